//! Synthetic scene pairs.
//!
//! A small database of procedural object clouds is scattered on the table
//! at random, non-overlapping poses; the goal is what the commonsense rules
//! and the layout solver make of the same objects.

use std::ops::RangeInclusive;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::geometry::{Box3, PointCloud, RigidTransform, Vec3};
use crate::graph::{ObjectId, SceneGraph};
use crate::grounding::footprint_intersection_area;
use crate::layout::LayoutConfig;
use crate::rules::{build_commonsense_graph, CategoryVocabulary, RuleError};
use crate::scene::{table_box, ObjectInstance, SceneError, SceneState};
use crate::synth::{synthesize_goal, GoalScene, SynthError};

/// Table used by generated scenes, half extents in meters.
pub const SIM_TABLE_HALF_EXTENTS: [f64; 3] = [0.6, 0.45, 0.01];
/// Minimum hull gap between objects in a generated initial scene.
pub const SIM_OBJECT_GAP: f64 = 0.03;
const MAX_PLACEMENT_TRIES: usize = 1000;
const TEMPLATE_SEED: u64 = 0x5eed_7ab1e;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("could not place object {index} of seed {seed} after {MAX_PLACEMENT_TRIES} tries")]
    PlacementFailure { seed: u64, index: usize },
    #[error("object counts must lie within 2..=8, got {0}..={1}")]
    InvalidCounts(usize, usize),
    #[error("empty object database")]
    EmptyDatabase,
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Rules(#[from] RuleError),
    #[error(transparent)]
    Synth(#[from] SynthError),
}

/// A template object: upright, centered in xy, resting on z = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Template {
    pub category: String,
    pub cloud: PointCloud,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenePair {
    pub seed: u64,
    pub initial: SceneState,
    pub goal_truth: SceneState,
    pub graph_truth: SceneGraph,
}

fn disc_point(rng: &mut ChaCha8Rng, radius: f64) -> (f64, f64) {
    let r = radius * rng.random::<f64>().sqrt();
    let t = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
    (r * t.cos(), r * t.sin())
}

fn cylinder_wall(
    rng: &mut ChaCha8Rng,
    n: usize,
    radius: f64,
    z0: f64,
    z1: f64,
    pts: &mut Vec<Vec3>,
) {
    for _ in 0..n {
        let t = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        pts.push(Vec3::new(
            radius * t.cos(),
            radius * t.sin(),
            rng.random_range(z0..z1),
        ));
    }
}

fn disc(rng: &mut ChaCha8Rng, n: usize, radius: f64, z: f64, pts: &mut Vec<Vec3>) {
    for _ in 0..n {
        let (x, y) = disc_point(rng, radius);
        pts.push(Vec3::new(x, y, z));
    }
}

fn plate(rng: &mut ChaCha8Rng) -> Vec<Vec3> {
    let mut pts = Vec::new();
    for _ in 0..240 {
        let (x, y) = disc_point(rng, 0.12);
        let r = x.hypot(y);
        let z = if r > 0.09 {
            0.02 + 0.01 * (r - 0.09) / 0.03
        } else {
            0.02
        };
        pts.push(Vec3::new(x, y, z));
    }
    disc(rng, 100, 0.08, 0.0, &mut pts);
    pts
}

fn bowl(rng: &mut ChaCha8Rng) -> Vec<Vec3> {
    let radius = 0.08;
    let cos_max = (0.45 * std::f64::consts::PI).cos();
    let mut pts: Vec<Vec3> = (0..280)
        .map(|_| {
            let c: f64 = rng.random_range(cos_max..1.0);
            let s = (1.0 - c * c).sqrt();
            let t = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
            Vec3::new(
                radius * s * t.cos(),
                radius * s * t.sin(),
                0.012 + radius * (1.0 - c),
            )
        })
        .collect();
    // foot ring and a flat lip keep the shell from sliding along its sphere
    cylinder_wall(rng, 50, 0.035, 0.0, 0.012, &mut pts);
    let rim_z = 0.012 + radius * (1.0 - cos_max);
    for _ in 0..50 {
        let r = rng.random_range(radius * (1.0 - cos_max * cos_max).sqrt()..0.092);
        let t = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        pts.push(Vec3::new(r * t.cos(), r * t.sin(), rim_z));
    }
    pts
}

fn cup(rng: &mut ChaCha8Rng) -> Vec<Vec3> {
    let mut pts = Vec::new();
    cylinder_wall(rng, 250, 0.04, 0.0, 0.09, &mut pts);
    disc(rng, 60, 0.04, 0.0, &mut pts);
    pts
}

fn bottle(rng: &mut ChaCha8Rng) -> Vec<Vec3> {
    let mut pts = Vec::new();
    cylinder_wall(rng, 260, 0.035, 0.0, 0.14, &mut pts);
    for _ in 0..50 {
        // shoulder: cone from the body to the neck
        let s: f64 = rng.random();
        let r = 0.035 + (0.013 - 0.035) * s;
        let t = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        pts.push(Vec3::new(r * t.cos(), r * t.sin(), 0.14 + 0.03 * s));
    }
    cylinder_wall(rng, 50, 0.013, 0.17, 0.22, &mut pts);
    disc(rng, 40, 0.035, 0.0, &mut pts);
    pts
}

fn can(rng: &mut ChaCha8Rng) -> Vec<Vec3> {
    let mut pts = Vec::new();
    cylinder_wall(rng, 200, 0.033, 0.0, 0.12, &mut pts);
    disc(rng, 50, 0.033, 0.0, &mut pts);
    disc(rng, 50, 0.033, 0.12, &mut pts);
    pts
}

fn cardboard_box(rng: &mut ChaCha8Rng) -> Vec<Vec3> {
    let h = [0.06, 0.04, 0.03];
    let areas = [h[1] * h[2], h[0] * h[2], h[0] * h[1]];
    let total: f64 = areas.iter().sum();
    (0..360)
        .map(|_| {
            let pick = rng.random_range(0.0..total);
            let axis = if pick < areas[0] {
                0
            } else if pick < areas[0] + areas[1] {
                1
            } else {
                2
            };
            let mut p = Vec3::new(
                rng.random_range(-h[0]..h[0]),
                rng.random_range(-h[1]..h[1]),
                rng.random_range(-h[2]..h[2]),
            );
            p[axis] = if rng.random::<bool>() {
                h[axis]
            } else {
                -h[axis]
            };
            p
        })
        .collect()
}

fn fork(rng: &mut ChaCha8Rng) -> Vec<Vec3> {
    let profile = |x: f64| 0.015 * (x / 0.095).powi(2);
    let mut pts = Vec::new();
    for _ in 0..130 {
        let x: f64 = rng.random_range(-0.095..0.02);
        let t = (x + 0.095) / 0.115;
        let y = rng.random_range(-0.007..0.007) + 0.006 * (1.0 - t) * (1.0 - t);
        let z = profile(x) + if rng.random::<bool>() { 0.003 } else { 0.0 };
        pts.push(Vec3::new(x, y, z));
    }
    // head: solid root, then four tines of unequal width
    let tines = [
        (-0.012, -0.008),
        (-0.005, -0.002),
        (0.001, 0.006),
        (0.009, 0.012),
    ];
    for _ in 0..110 {
        let x = rng.random_range(0.02..0.095);
        let y = if x < 0.045 {
            rng.random_range(-0.012..0.012)
        } else {
            let (a, b) = tines[rng.random_range(0..tines.len())];
            rng.random_range(a..b)
        };
        let z = profile(x) + if rng.random::<bool>() { 0.002 } else { 0.0 };
        pts.push(Vec3::new(x, y, z));
    }
    pts
}

fn knife(rng: &mut ChaCha8Rng) -> Vec<Vec3> {
    let mut pts = Vec::new();
    for _ in 0..120 {
        let x: f64 = rng.random_range(-0.1..0.0);
        let y = rng.random_range(-0.008..0.008);
        let z = rng.random_range(0.0..0.012) + 0.004 * (x / 0.1).powi(2);
        pts.push(Vec3::new(x, y, z));
    }
    for _ in 0..120 {
        // straight spine on -y, curved edge on +y
        let x: f64 = rng.random_range(0.0..0.11);
        let edge = 0.014 * (1.0 - (x / 0.11).powi(2)) - 0.002;
        let y = rng.random_range(-0.008..edge.max(-0.007));
        let z = 0.003 + rng.random_range(0.0..0.002);
        pts.push(Vec3::new(x, y, z));
    }
    pts
}

fn spoon(rng: &mut ChaCha8Rng) -> Vec<Vec3> {
    let mut pts = Vec::new();
    for _ in 0..110 {
        let x: f64 = rng.random_range(-0.11..0.02);
        let t = (x + 0.11) / 0.13;
        let y = rng.random_range(-0.006..0.006) - 0.007 * (1.0 - t).powi(2);
        let z = 0.004 + 0.012 * (1.0 - t) + if rng.random::<bool>() { 0.002 } else { 0.0 };
        pts.push(Vec3::new(x, y, z));
    }
    for _ in 0..150 {
        // concave bowl: the rim sits higher than the middle
        let (ex, ey) = disc_point(rng, 1.0);
        let x = 0.055 + 0.035 * ex;
        let y = 0.022 * ey;
        let z = 0.012 * (ex * ex + ey * ey);
        pts.push(Vec3::new(x, y, z));
    }
    pts
}

fn teapot(rng: &mut ChaCha8Rng) -> Vec<Vec3> {
    let mut pts = Vec::new();
    for _ in 0..300 {
        let c: f64 = rng.random_range(-1.0..1.0);
        let s = (1.0 - c * c).sqrt();
        let t = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        pts.push(Vec3::new(
            0.075 * s * t.cos(),
            0.075 * s * t.sin(),
            0.065 * (1.0 + c),
        ));
    }
    let spout_dir = Vec3::new(40f64.to_radians().cos(), 0.0, 40f64.to_radians().sin());
    let side = Vec3::y();
    let up = spout_dir.cross(&side);
    for _ in 0..60 {
        let s = rng.random_range(0.0..0.07);
        let t = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        let r = 0.012 - 0.005 * s / 0.07;
        pts.push(Vec3::new(0.06, 0.0, 0.05) + spout_dir * s + (side * t.cos() + up * t.sin()) * r);
    }
    for _ in 0..70 {
        let a = rng.random_range(0.5 * std::f64::consts::PI..1.5 * std::f64::consts::PI);
        let b = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        let ring = 0.035 + 0.007 * b.cos();
        pts.push(Vec3::new(
            -0.07 + ring * a.cos(),
            0.007 * b.sin(),
            0.07 + ring * a.sin(),
        ));
    }
    for _ in 0..20 {
        let c: f64 = rng.random_range(0.0..1.0);
        let s = (1.0 - c * c).sqrt();
        let t = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        pts.push(Vec3::new(
            0.012 * s * t.cos(),
            0.012 * s * t.sin(),
            0.128 + 0.012 * c,
        ));
    }
    pts
}

/// Centers in xy and drops onto z = 0.
fn normalize(mut pts: Vec<Vec3>) -> PointCloud {
    let n = pts.len() as f64;
    let cx = pts.iter().map(|p| p.x).sum::<f64>() / n;
    let cy = pts.iter().map(|p| p.y).sum::<f64>() / n;
    let z0 = pts.iter().map(|p| p.z).fold(f64::INFINITY, f64::min);
    for p in &mut pts {
        *p -= Vec3::new(cx, cy, z0);
    }
    PointCloud::table(pts)
}

/// The ten procedural templates, identical on every call.
pub fn object_database() -> Vec<Template> {
    type Maker = fn(&mut ChaCha8Rng) -> Vec<Vec3>;
    let makers: [(&str, Maker); 10] = [
        ("plate", plate),
        ("bowl", bowl),
        ("cup", cup),
        ("fork", fork),
        ("knife", knife),
        ("spoon", spoon),
        ("bottle", bottle),
        ("can", can),
        ("box", cardboard_box),
        ("teapot", teapot),
    ];
    makers
        .iter()
        .enumerate()
        .map(|(k, (category, make))| {
            let mut rng = ChaCha8Rng::seed_from_u64(TEMPLATE_SEED + k as u64);
            Template {
                category: category.to_string(),
                cloud: normalize(make(&mut rng)),
            }
        })
        .collect()
}

fn table() -> Box3 {
    table_box(Vec3::from(SIM_TABLE_HALF_EXTENTS)).expect("positive extents")
}

/// Scatters `templates` over the table at random yaw, keeping hull gaps of
/// at least [`SIM_OBJECT_GAP`].
fn scatter(
    rng: &mut ChaCha8Rng,
    templates: &[&Template],
    seed: u64,
) -> Result<Vec<ObjectInstance>, SimError> {
    let table = table();
    let mut placed: Vec<ObjectInstance> = Vec::new();
    for (index, template) in templates.iter().enumerate() {
        let id = index as ObjectId + 1;
        let mut done = false;
        for _ in 0..MAX_PLACEMENT_TRIES {
            let yaw = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
            let turned = RigidTransform::from_yaw(yaw, Vec3::zeros()).apply(&template.cloud);
            let obj = ObjectInstance::from_cloud(id, template.category.clone(), turned)?;
            let hull = obj.bbox.hull_half_extents();
            let ax = table.half_extents.x - hull.x - SIM_OBJECT_GAP;
            let ay = table.half_extents.y - hull.y - SIM_OBJECT_GAP;
            if ax <= 0.0 || ay <= 0.0 {
                continue;
            }
            let target = Vec3::new(rng.random_range(-ax..ax), rng.random_range(-ay..ay), 0.0);
            let shift = Vec3::new(
                target.x - obj.bbox.center.x,
                target.y - obj.bbox.center.y,
                0.0,
            );
            let obj = obj.moved(&RigidTransform::from_translation(shift));
            if placed
                .iter()
                .all(|p| p.bbox.hull_clearance_xy(&obj.bbox) >= SIM_OBJECT_GAP)
            {
                placed.push(obj);
                done = true;
                break;
            }
        }
        if !done {
            return Err(SimError::PlacementFailure { seed, index });
        }
    }
    Ok(placed)
}

/// The goal scene expressed as the initial objects moved into place.
pub fn goal_as_scene(initial: &SceneState, goal: &GoalScene) -> SceneState {
    let objects = goal
        .objects
        .values()
        .filter_map(|g| {
            initial.get(g.source_id).map(|o| ObjectInstance {
                id: g.id,
                ..o.moved(&g.from_source)
            })
        })
        .collect();
    SceneState::new_unchecked(objects, *initial.table())
}

/// One seeded initial/goal pair; identical output for identical inputs.
pub fn generate_scene_pair(
    seed: u64,
    database: &[Template],
    counts: RangeInclusive<usize>,
    layout: &LayoutConfig,
) -> Result<ScenePair, SimError> {
    let (lo, hi) = (*counts.start(), *counts.end());
    if lo < 2 || hi > 8 || lo > hi {
        return Err(SimError::InvalidCounts(lo, hi));
    }
    if database.is_empty() {
        return Err(SimError::EmptyDatabase);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = rng.random_range(lo..=hi);
    let picks: Vec<&Template> = (0..count)
        .map(|_| &database[rng.random_range(0..database.len())])
        .collect();
    let objects = scatter(&mut rng, &picks, seed)?;
    let initial = SceneState::new(objects, table())?;
    let graph_truth = build_commonsense_graph(initial.objects(), &CategoryVocabulary::default())?;
    let goal = synthesize_goal(&initial, &graph_truth, seed, layout)?;
    let goal_truth = goal_as_scene(&initial, &goal);
    Ok(ScenePair {
        seed,
        initial,
        goal_truth,
        graph_truth,
    })
}

/// Drops every object straight down, onto the table or onto whatever it
/// overlaps below; lower objects settle first.
pub fn settle(scene: &SceneState) -> SceneState {
    let mut order: Vec<&ObjectInstance> = scene.objects().iter().collect();
    order.sort_by(|a, b| {
        let za = a.cloud.min_z().unwrap_or(0.0);
        let zb = b.cloud.min_z().unwrap_or(0.0);
        za.total_cmp(&zb).then(a.id.cmp(&b.id))
    });
    let mut settled: Vec<ObjectInstance> = Vec::with_capacity(order.len());
    for obj in order {
        let bottom = obj.cloud.min_z().unwrap_or(0.0);
        let rest = settled
            .iter()
            .filter(|s| {
                s.bbox.center.z < obj.bbox.center.z
                    && footprint_intersection_area(&obj.bbox, &s.bbox)
                        >= 0.5 * obj.bbox.footprint_area()
            })
            .map(|s| s.cloud.max_z().unwrap_or(0.0))
            .fold(0.0, f64::max);
        settled.push(obj.moved(&RigidTransform::from_translation(Vec3::new(
            0.0,
            0.0,
            rest - bottom,
        ))));
    }
    SceneState::new_unchecked(settled, *scene.table())
}
