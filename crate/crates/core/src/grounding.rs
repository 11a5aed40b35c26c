//! Geometric grounding of relation labels between two boxes.
//!
//! Labels are computed for box `i` relative to box `j` with
//! `d = center_i - center_j`. Directional labels follow the dominant
//! horizontal axis of `d`; "front" is larger y (toward the viewer).

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::geometry::Box3;
use crate::graph::RelationLabel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GroundingParams {
    /// Vertical tolerance between the bottom of `i` and the top of `j`.
    pub eps_z: f64,
    /// `close_by` radius as a multiple of the summed footprint half-diagonals.
    pub delta_close_factor: f64,
    /// Fraction of `i`'s footprint that must overlap `j` for `standing_on`.
    pub footprint_overlap: f64,
}

impl Default for GroundingParams {
    fn default() -> Self {
        Self {
            eps_z: 0.01,
            delta_close_factor: 1.25,
            footprint_overlap: 0.5,
        }
    }
}

type Poly = Vec<[f64; 2]>;

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn polygon_area(poly: &[[f64; 2]]) -> f64 {
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    let twice: f64 = (0..n)
        .map(|k| {
            let (a, b) = (poly[k], poly[(k + 1) % n]);
            a[0] * b[1] - b[0] * a[1]
        })
        .sum();
    twice.abs() / 2.0
}

/// Sutherland–Hodgman clip of `subject` against the convex, counter-clockwise `clip`.
fn clip_convex(subject: &[[f64; 2]], clip: &[[f64; 2]]) -> Poly {
    let mut output: Poly = subject.to_vec();
    for k in 0..clip.len() {
        if output.is_empty() {
            break;
        }
        let (a, b) = (clip[k], clip[(k + 1) % clip.len()]);
        let input = std::mem::take(&mut output);
        for m in 0..input.len() {
            let cur = input[m];
            let prev = input[(m + input.len() - 1) % input.len()];
            let cur_in = cross(a, b, cur) >= 0.0;
            let prev_in = cross(a, b, prev) >= 0.0;
            if cur_in != prev_in {
                // intersection of segment prev→cur with line a→b
                let d1 = cross(a, b, prev);
                let d2 = cross(a, b, cur);
                let t = d1 / (d1 - d2);
                output.push([
                    prev[0] + t * (cur[0] - prev[0]),
                    prev[1] + t * (cur[1] - prev[1]),
                ]);
            }
            if cur_in {
                output.push(cur);
            }
        }
    }
    output
}

/// Area of the intersection of the two (yawed) footprints.
pub fn footprint_intersection_area(a: &Box3, b: &Box3) -> f64 {
    polygon_area(&clip_convex(&a.footprint(), &b.footprint()))
}

pub fn is_standing_on(i: &Box3, j: &Box3, params: &GroundingParams) -> bool {
    (i.bottom() - j.top()).abs() <= params.eps_z
        && footprint_intersection_area(i, j) >= params.footprint_overlap * i.footprint_area()
}

/// Distance below which two boxes are `close_by`.
pub fn close_by_radius(i: &Box3, j: &Box3, params: &GroundingParams) -> f64 {
    params.delta_close_factor * (i.half_diagonal_xy() + j.half_diagonal_xy())
}

/// The set of labels that hold for `i` relative to `j`.
pub fn ground_relation(i: &Box3, j: &Box3, params: &GroundingParams) -> BTreeSet<RelationLabel> {
    let mut labels = BTreeSet::new();
    let d = i.center - j.center;
    if is_standing_on(i, j, params) {
        labels.insert(RelationLabel::StandingOn);
        return labels;
    }
    if d.x.hypot(d.y) <= close_by_radius(i, j, params) {
        labels.insert(RelationLabel::CloseBy);
    }
    let directional = if d.x.abs() >= d.y.abs() {
        if d.x < 0.0 {
            RelationLabel::Left
        } else {
            RelationLabel::Right
        }
    } else if d.y > 0.0 {
        RelationLabel::Front
    } else {
        RelationLabel::Behind
    };
    labels.insert(directional);
    labels
}
