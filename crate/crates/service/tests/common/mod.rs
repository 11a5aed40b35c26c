#![allow(dead_code)]

use sgbot_core::geometry::{RigidTransform, Vec3};
use sgbot_core::scene::{table_box, ObjectInstance, SceneState};
use sgbot_core::sim::{object_database, SIM_TABLE_HALF_EXTENTS};

/// Database templates placed at `(x, y)` with the given yaw; ids from 1.
pub fn table_scene(items: &[(&str, f64, f64, f64)]) -> SceneState {
    let db = object_database();
    let objects = items
        .iter()
        .enumerate()
        .map(|(i, &(category, x, y, yaw))| {
            let t = db
                .iter()
                .find(|t| t.category == category)
                .expect("known template");
            let cloud = RigidTransform::from_yaw(yaw, Vec3::new(x, y, 0.0)).apply(&t.cloud);
            ObjectInstance::from_cloud(i as u32 + 1, category, cloud).unwrap()
        })
        .collect();
    SceneState::new(
        objects,
        table_box(Vec3::from(SIM_TABLE_HALF_EXTENTS)).unwrap(),
    )
    .unwrap()
}

/// Plate, fork and knife scattered away from their commonsense layout.
pub fn plate_fork_knife() -> SceneState {
    table_scene(&[
        ("plate", 0.3, 0.2, 0.0),
        ("fork", -0.35, -0.2, 0.7),
        ("knife", -0.3, 0.25, -1.2),
    ])
}
