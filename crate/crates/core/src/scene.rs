//! Observed scene state: segmented objects on a table.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::geometry::{
    box_from_cloud, Box3, GeometryError, PointCloud, RigidTransform, Vec3, YawMode,
};
use crate::graph::ObjectId;

/// Slack around the table footprint inside which object clouds must lie.
pub const TABLE_MARGIN: f64 = 0.05;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SceneError {
    #[error("duplicate object id {0}")]
    DuplicateId(ObjectId),
    #[error("object {0} has an empty cloud")]
    EmptyCloud(ObjectId),
    #[error("object {id}: {source}")]
    Geometry { id: ObjectId, source: GeometryError },
    #[error("object {0} lies outside the table extent")]
    OffTable(ObjectId),
    #[error("object {0} is not contained in its box")]
    BoxMismatch(ObjectId),
    #[error("unknown object {0}")]
    UnknownObject(ObjectId),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectInstance {
    pub id: ObjectId,
    pub category: String,
    pub cloud: PointCloud,
    pub bbox: Box3,
    pub is_obstacle: bool,
}

impl ObjectInstance {
    /// Wraps a table-frame cloud, fitting its principal-axis box.
    pub fn from_cloud(
        id: ObjectId,
        category: impl Into<String>,
        cloud: PointCloud,
    ) -> Result<Self, SceneError> {
        if cloud.is_empty() {
            return Err(SceneError::EmptyCloud(id));
        }
        let bbox = box_from_cloud(&cloud, YawMode::PrincipalAxis)
            .map_err(|source| SceneError::Geometry { id, source })?;
        Ok(Self {
            id,
            category: category.into(),
            cloud,
            bbox,
            is_obstacle: false,
        })
    }

    /// The same object after a rigid move: cloud and box carried along.
    pub fn moved(&self, t: &RigidTransform) -> Self {
        Self {
            cloud: t.apply(&self.cloud),
            bbox: self.bbox.transformed(t),
            ..self.clone()
        }
    }
}

/// Objects in ascending id order plus the table extent.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneState {
    objects: Vec<ObjectInstance>,
    table: Box3,
}

/// The table extent: a slab centered at the origin.
pub fn table_box(half_extents: Vec3) -> Result<Box3, GeometryError> {
    Box3::new(Vec3::zeros(), half_extents, 0.0)
}

impl SceneState {
    /// Builds a scene, checking id uniqueness and that every cloud sits on
    /// the table footprint (inflated by [`TABLE_MARGIN`]).
    pub fn new(mut objects: Vec<ObjectInstance>, table: Box3) -> Result<Self, SceneError> {
        objects.sort_by_key(|o| o.id);
        let mut seen = BTreeSet::new();
        for o in &objects {
            if !seen.insert(o.id) {
                return Err(SceneError::DuplicateId(o.id));
            }
            if o.cloud.is_empty() {
                return Err(SceneError::EmptyCloud(o.id));
            }
            let hx = table.half_extents.x + TABLE_MARGIN;
            let hy = table.half_extents.y + TABLE_MARGIN;
            if o.cloud
                .points
                .iter()
                .any(|p| (p.x - table.center.x).abs() > hx || (p.y - table.center.y).abs() > hy)
            {
                return Err(SceneError::OffTable(o.id));
            }
        }
        Ok(Self { objects, table })
    }

    /// Skips the table-extent check (intermediate planner states).
    pub fn new_unchecked(mut objects: Vec<ObjectInstance>, table: Box3) -> Self {
        objects.sort_by_key(|o| o.id);
        Self { objects, table }
    }

    pub fn objects(&self) -> &[ObjectInstance] {
        &self.objects
    }

    pub fn table(&self) -> &Box3 {
        &self.table
    }

    pub fn get(&self, id: ObjectId) -> Option<&ObjectInstance> {
        self.objects
            .binary_search_by_key(&id, |o| o.id)
            .ok()
            .map(|i| &self.objects[i])
    }

    pub fn ids(&self) -> BTreeSet<ObjectId> {
        self.objects.iter().map(|o| o.id).collect()
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    /// Replaces object `id` (which must exist).
    pub fn with_object(&self, object: ObjectInstance) -> Result<Self, SceneError> {
        let idx = self
            .objects
            .binary_search_by_key(&object.id, |o| o.id)
            .map_err(|_| SceneError::UnknownObject(object.id))?;
        let mut objects = self.objects.clone();
        objects[idx] = object;
        Ok(Self {
            objects,
            table: self.table,
        })
    }

    pub fn without(&self, ids: &BTreeSet<ObjectId>) -> Self {
        Self {
            objects: self
                .objects
                .iter()
                .filter(|o| !ids.contains(&o.id))
                .cloned()
                .collect(),
            table: self.table,
        }
    }

    pub fn obstacle_ids(&self) -> BTreeSet<ObjectId> {
        self.objects
            .iter()
            .filter(|o| o.is_obstacle)
            .map(|o| o.id)
            .collect()
    }

    pub(crate) fn objects_mut(&mut self) -> &mut [ObjectInstance] {
        &mut self.objects
    }
}
