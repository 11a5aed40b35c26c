//! Pose-error and IoU metrics against a ground-truth scene.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{geodesic_angle, rot_z, Box3, Vec3};
use crate::graph::ObjectId;
use crate::registration::kabsch;
use crate::scene::SceneState;
use crate::sim::settle;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("object sets differ: {0:?} only on one side")]
    IdMismatch(Vec<ObjectId>),
    #[error("object {0}: final and truth clouds have different point counts")]
    PointCountMismatch(ObjectId),
}

/// Rotational symmetry of an upright object about the table normal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Symmetry {
    #[default]
    None,
    ZRot180,
    ZRotInf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetryTable {
    pub by_category: BTreeMap<String, Symmetry>,
}

impl Default for SymmetryTable {
    fn default() -> Self {
        let mut by_category = BTreeMap::new();
        for c in ["plate", "bowl", "cup", "bottle", "can"] {
            by_category.insert(c.to_string(), Symmetry::ZRotInf);
        }
        by_category.insert("box".to_string(), Symmetry::ZRot180);
        Self { by_category }
    }
}

impl SymmetryTable {
    pub fn of(&self, category: &str) -> Symmetry {
        self.by_category
            .get(&category.trim().to_ascii_lowercase())
            .copied()
            .unwrap_or_default()
    }
}

/// Geodesic angle of `r`, reduced by the symmetry group about the z axis.
pub fn symmetric_rotation_error(r: &nalgebra::Matrix3<f64>, symmetry: Symmetry) -> f64 {
    match symmetry {
        Symmetry::None => geodesic_angle(r),
        Symmetry::ZRot180 => {
            geodesic_angle(r).min(geodesic_angle(&(rot_z(std::f64::consts::PI) * r)))
        }
        Symmetry::ZRotInf => {
            // only the tilt of the symmetry axis counts
            let z = Vec3::z();
            (r * z).dot(&z).clamp(-1.0, 1.0).acos()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseError {
    pub rotation: f64,
    pub translation: f64,
}

fn check_ids(a: &SceneState, b: &SceneState) -> Result<(), EvalError> {
    let (ia, ib) = (a.ids(), b.ids());
    if ia != ib {
        return Err(EvalError::IdMismatch(
            ia.symmetric_difference(&ib).copied().collect(),
        ));
    }
    Ok(())
}

/// Per-object rotation (radians) and box-center translation (meters)
/// errors. Clouds must be rigid copies of the same observation, point for
/// point, so the relative rotation follows from a Kabsch fit.
pub fn pose_errors(
    final_scene: &SceneState,
    truth: &SceneState,
    symmetries: &SymmetryTable,
) -> Result<BTreeMap<ObjectId, PoseError>, EvalError> {
    check_ids(final_scene, truth)?;
    final_scene
        .objects()
        .iter()
        .map(|f| {
            let t = truth.get(f.id).expect("ids checked");
            if f.cloud.len() != t.cloud.len() {
                return Err(EvalError::PointCountMismatch(f.id));
            }
            let relative = kabsch(&f.cloud.points, &t.cloud.points);
            Ok((
                f.id,
                PoseError {
                    rotation: symmetric_rotation_error(
                        relative.rotation(),
                        symmetries.of(&t.category),
                    ),
                    translation: (f.bbox.center - t.bbox.center).norm(),
                },
            ))
        })
        .collect()
}

/// IoU of the axis-aligned hulls of two boxes.
pub fn iou3d(a: &Box3, b: &Box3) -> f64 {
    let (amin, amax) = (a.hull_min(), a.hull_max());
    let (bmin, bmax) = (b.hull_min(), b.hull_max());
    let mut inter = 1.0;
    for k in 0..3 {
        let overlap = amax[k].min(bmax[k]) - amin[k].max(bmin[k]);
        if overlap <= 0.0 {
            return 0.0;
        }
        inter *= overlap;
    }
    let vol = |lo: Vec3, hi: Vec3| (hi - lo).product();
    let union = vol(amin, amax) + vol(bmin, bmax) - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// Percentage of objects whose hull IoU with the truth exceeds `threshold`.
pub fn success_rate(
    final_scene: &SceneState,
    truth: &SceneState,
    threshold: f64,
) -> Result<f64, EvalError> {
    check_ids(final_scene, truth)?;
    if truth.is_empty() {
        return Ok(100.0);
    }
    let hits = final_scene
        .objects()
        .iter()
        .filter(|f| iou3d(&f.bbox, &truth.get(f.id).expect("ids checked").bbox) > threshold)
        .count();
    Ok(100.0 * hits as f64 / truth.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectReport {
    pub id: ObjectId,
    pub category: String,
    /// Before settling.
    pub rotation_error_pre: f64,
    pub translation_error_pre: f64,
    /// After settling.
    pub rotation_error: f64,
    pub translation_error: f64,
    pub iou: f64,
    pub success_iou25: bool,
    pub success_iou50: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub objects: Vec<ObjectReport>,
    pub r_e: f64,
    pub t_e: f64,
    pub r_f: f64,
    pub t_f: f64,
    pub iou25: f64,
    pub iou50: f64,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Scores `final_scene` against `truth`, before and after settling.
pub fn evaluate(
    final_scene: &SceneState,
    truth: &SceneState,
    symmetries: &SymmetryTable,
) -> Result<EvalReport, EvalError> {
    let pre = pose_errors(final_scene, truth, symmetries)?;
    let settled = settle(final_scene);
    let post = pose_errors(&settled, truth, symmetries)?;
    let objects: Vec<ObjectReport> = settled
        .objects()
        .iter()
        .map(|o| {
            let t = truth.get(o.id).expect("ids checked");
            let iou = iou3d(&o.bbox, &t.bbox);
            ObjectReport {
                id: o.id,
                category: t.category.clone(),
                rotation_error_pre: pre[&o.id].rotation,
                translation_error_pre: pre[&o.id].translation,
                rotation_error: post[&o.id].rotation,
                translation_error: post[&o.id].translation,
                iou,
                success_iou25: iou > 0.25,
                success_iou50: iou > 0.5,
            }
        })
        .collect();
    let rate = |f: fn(&ObjectReport) -> bool| {
        if objects.is_empty() {
            100.0
        } else {
            100.0 * objects.iter().filter(|o| f(o)).count() as f64 / objects.len() as f64
        }
    };
    Ok(EvalReport {
        r_e: mean(objects.iter().map(|o| o.rotation_error_pre)),
        t_e: mean(objects.iter().map(|o| o.translation_error_pre)),
        r_f: mean(objects.iter().map(|o| o.rotation_error)),
        t_f: mean(objects.iter().map(|o| o.translation_error)),
        iou25: rate(|o| o.success_iou25),
        iou50: rate(|o| o.success_iou50),
        objects,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{rot_x, PointCloud, RigidTransform};
    use crate::scene::{table_box, ObjectInstance};
    use proptest::prelude::*;

    fn unit_cube(x: f64) -> Box3 {
        Box3::new(Vec3::new(x, 0.0, 0.5), Vec3::repeat(0.5), 0.0).unwrap()
    }

    #[test]
    fn iou_examples() {
        assert_eq!(iou3d(&unit_cube(0.0), &unit_cube(0.0)), 1.0);
        assert_eq!(iou3d(&unit_cube(0.0), &unit_cube(2.0)), 0.0);
        let third = iou3d(&unit_cube(0.0), &unit_cube(0.5));
        assert!((third - 1.0 / 3.0).abs() < 1e-12);
        assert!(third > 0.25 && third <= 0.5);
    }

    fn l_object(id: ObjectId, category: &str) -> ObjectInstance {
        let pts = (0..30)
            .map(|i| {
                let s = i as f64 * 0.01;
                if i % 3 == 0 {
                    Vec3::new(0.0, s * 0.5, 0.02 * (i % 2) as f64)
                } else {
                    Vec3::new(s, 0.0, 0.03 * (i % 2) as f64)
                }
            })
            .collect();
        ObjectInstance::from_cloud(id, category, PointCloud::table(pts)).unwrap()
    }

    fn scene(objects: Vec<ObjectInstance>) -> SceneState {
        SceneState::new_unchecked(objects, table_box(Vec3::new(0.6, 0.45, 0.01)).unwrap())
    }

    #[test]
    fn identical_scenes_score_zero() {
        let s = scene(vec![l_object(1, "fork"), l_object(2, "knife")]);
        for e in pose_errors(&s, &s, &SymmetryTable::default())
            .unwrap()
            .values()
        {
            assert!(e.rotation < 1e-7 && e.translation == 0.0);
        }
    }

    #[test]
    fn pure_offset() {
        let a = l_object(1, "fork");
        let b = a.moved(&RigidTransform::from_translation(Vec3::new(0.03, 0.0, 0.0)));
        let e =
            pose_errors(&scene(vec![a]), &scene(vec![b]), &SymmetryTable::default()).unwrap()[&1];
        assert!(e.rotation < 1e-7);
        assert!((e.translation - 0.03).abs() < 1e-12);
    }

    #[test]
    fn yaw_error_by_trace_formula() {
        let a = l_object(1, "fork");
        let b = a.moved(&RigidTransform::from_yaw(0.2, Vec3::zeros()));
        let e = pose_errors(
            &scene(vec![a.clone()]),
            &scene(vec![b.clone()]),
            &SymmetryTable::default(),
        )
        .unwrap()[&1];
        assert!((e.rotation - 0.2).abs() < 1e-9);
        // a round object forgives any yaw
        let round = |o: &ObjectInstance| ObjectInstance {
            category: "plate".into(),
            ..o.clone()
        };
        let e = pose_errors(
            &scene(vec![round(&a)]),
            &scene(vec![round(&b)]),
            &SymmetryTable::default(),
        )
        .unwrap()[&1];
        assert!(e.rotation < 1e-7);
    }

    #[test]
    fn half_turn_symmetry() {
        let t = SymmetryTable::default();
        let half = rot_z(std::f64::consts::PI);
        assert!(symmetric_rotation_error(&half, t.of("box")) < 1e-12);
        assert!(
            (symmetric_rotation_error(&half, t.of("fork")) - std::f64::consts::PI).abs() < 1e-9
        );
        assert!((symmetric_rotation_error(&rot_x(0.3), t.of("cup")) - 0.3).abs() < 1e-12);
        let r = rot_z(std::f64::consts::PI - 0.1);
        assert!((symmetric_rotation_error(&r, t.of("box")) - 0.1).abs() < 1e-9);
    }

    #[test]
    fn mismatched_ids() {
        let a = scene(vec![l_object(1, "fork")]);
        let b = scene(vec![l_object(2, "fork")]);
        assert_eq!(
            pose_errors(&a, &b, &SymmetryTable::default()),
            Err(EvalError::IdMismatch(vec![1, 2]))
        );
    }

    #[test]
    fn report_aggregates() {
        let a = l_object(1, "fork");
        let b = l_object(2, "knife");
        let truth = scene(vec![a.clone(), b.clone()]);
        let moved = b.moved(&RigidTransform::from_translation(Vec3::new(1.0, 0.0, 0.0)));
        let out = scene(vec![a, moved]);
        let r = evaluate(&out, &truth, &SymmetryTable::default()).unwrap();
        assert_eq!(r.iou50, 50.0);
        assert_eq!(r.iou25, 50.0);
        assert!((r.t_f - 0.5).abs() < 1e-12);
        assert_eq!(success_rate(&out, &truth, 0.5).unwrap(), 50.0);
    }

    fn arb_box() -> impl Strategy<Value = Box3> {
        (
            -1.0f64..1.0,
            -1.0f64..1.0,
            0.0f64..0.5,
            0.01f64..0.3,
            0.01f64..0.3,
            0.01f64..0.3,
            -3.0f64..3.0,
        )
            .prop_map(|(x, y, z, a, b, c, yaw)| {
                Box3::new(Vec3::new(x, y, z), Vec3::new(a, b, c), yaw).unwrap()
            })
    }

    proptest! {
        #[test]
        fn iou_properties(a in arb_box(), b in arb_box(), dx in -1.0f64..1.0, dy in -1.0f64..1.0) {
            let ab = iou3d(&a, &b);
            prop_assert!((0.0..=1.0).contains(&ab));
            prop_assert!((ab - iou3d(&b, &a)).abs() < 1e-12);
            prop_assert!((iou3d(&a, &a) - 1.0).abs() < 1e-12);
            let shift = RigidTransform::from_translation(Vec3::new(dx, dy, 0.0));
            let moved = iou3d(&a.transformed(&shift), &b.transformed(&shift));
            prop_assert!((moved - ab).abs() < 1e-9);
        }
    }
}
