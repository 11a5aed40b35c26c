//! Goal-scene synthesis: shape priors taken from the observed clouds are
//! placed into the boxes produced by the layout solver.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::geometry::{
    box_from_cloud, rot_z, wrap_angle, Box3, GeometryError, PointCloud, RigidTransform, Vec3,
    YawMode,
};
use crate::graph::{Edge, ObjectId, RelationLabel, SceneGraph};
use crate::grounding::{ground_relation, GroundingParams};
use crate::layout::{solve_layout, LayoutConfig};
use crate::scene::{ObjectInstance, SceneState};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("object {id}: {source}")]
    DegenerateCloud { id: ObjectId, source: GeometryError },
    #[error("no shape prior for node {0}")]
    MissingPrior(ObjectId),
    #[error("layout infeasible: {reason}")]
    LayoutInfeasible { reason: String, edges: Vec<Edge> },
    #[error("layout and priors disagree on object {0}")]
    KeyMismatch(ObjectId),
    #[error("graph node {0} is not an object of the scene")]
    UnknownObject(ObjectId),
}

/// Observed shape of one object, normalized to zero centroid.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapePrior {
    pub source_id: ObjectId,
    pub centered: PointCloud,
    /// Full extents of the principal-axis box.
    pub dims: Vec3,
    pub yaw: f64,
    /// Offset from the centroid to the center of the principal-axis box.
    pub box_offset: Vec3,
    /// Centroid of the observed cloud.
    pub centroid: Vec3,
}

impl ShapePrior {
    pub fn footprint_area(&self) -> f64 {
        self.dims.x * self.dims.y
    }
}

pub fn estimate_shape_prior(obj: &ObjectInstance) -> Result<ShapePrior, SynthError> {
    let degenerate = |source| SynthError::DegenerateCloud { id: obj.id, source };
    let bbox = box_from_cloud(&obj.cloud, YawMode::PrincipalAxis).map_err(degenerate)?;
    let centroid = obj
        .cloud
        .centroid()
        .ok_or_else(|| degenerate(GeometryError::DegenerateCloud("empty cloud".into())))?;
    Ok(ShapePrior {
        source_id: obj.id,
        centered: obj.cloud.translated(&-centroid),
        dims: bbox.half_extents * 2.0,
        yaw: bbox.yaw,
        box_offset: bbox.center - centroid,
        centroid,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GoalObject {
    pub id: ObjectId,
    pub cloud: PointCloud,
    pub bbox: Box3,
    pub source_id: ObjectId,
    /// Carries the source object's observed cloud onto `cloud`.
    pub from_source: RigidTransform,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GoalScene {
    pub objects: BTreeMap<ObjectId, GoalObject>,
}

impl GoalScene {
    pub fn get(&self, id: ObjectId) -> Option<&GoalObject> {
        self.objects.get(&id)
    }

    pub fn ids(&self) -> impl Iterator<Item = ObjectId> + '_ {
        self.objects.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    pub fn boxes(&self) -> BTreeMap<ObjectId, Box3> {
        self.objects.iter().map(|(k, v)| (*k, v.bbox)).collect()
    }
}

/// The rigid motion that carries a prior's source cloud into `goal_box`.
pub fn placement_transform(prior: &ShapePrior, goal_box: &Box3) -> RigidTransform {
    let turn = wrap_angle(goal_box.yaw - prior.yaw);
    let rotation = rot_z(turn);
    // centered point p maps to R·(p − offset) + center
    RigidTransform::from_yaw(turn, goal_box.center - rotation * prior.box_offset)
}

pub fn instantiate_goal_scene(
    layout: &BTreeMap<ObjectId, Box3>,
    priors: &BTreeMap<ObjectId, ShapePrior>,
) -> Result<GoalScene, SynthError> {
    if let Some(id) = layout
        .keys()
        .find(|k| !priors.contains_key(k))
        .or_else(|| priors.keys().find(|k| !layout.contains_key(k)))
    {
        return Err(SynthError::KeyMismatch(*id));
    }
    let objects = layout
        .iter()
        .map(|(&id, goal_box)| {
            let prior = &priors[&id];
            let placement = placement_transform(prior, goal_box);
            let cloud = placement.apply(&prior.centered);
            let bbox = Box3 {
                half_extents: prior.dims / 2.0,
                ..*goal_box
            };
            (
                id,
                GoalObject {
                    id,
                    cloud,
                    bbox,
                    source_id: prior.source_id,
                    from_source: placement
                        .compose(&RigidTransform::from_translation(-prior.centroid)),
                },
            )
        })
        .collect();
    Ok(GoalScene { objects })
}

pub fn priors_for_graph(
    scene: &SceneState,
    graph: &SceneGraph,
) -> Result<BTreeMap<ObjectId, ShapePrior>, SynthError> {
    graph
        .nodes()
        .iter()
        .map(|n| {
            let obj = scene.get(n.id).ok_or(SynthError::UnknownObject(n.id))?;
            Ok((n.id, estimate_shape_prior(obj)?))
        })
        .collect()
}

/// Graph + observed scene → goal scene.
pub fn synthesize_goal(
    scene: &SceneState,
    graph: &SceneGraph,
    seed: u64,
    cfg: &LayoutConfig,
) -> Result<GoalScene, SynthError> {
    let priors = priors_for_graph(scene, graph)?;
    let layout = solve_layout(graph, &priors, scene.table(), seed, cfg)?;
    instantiate_goal_scene(&layout, &priors)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeCheck {
    pub edge: Edge,
    pub holds: bool,
    pub grounded: Vec<RelationLabel>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LayoutReport {
    pub checks: Vec<EdgeCheck>,
}

impl LayoutReport {
    pub fn all_true(&self) -> bool {
        self.checks.iter().all(|c| c.holds)
    }

    pub fn violations(&self) -> Vec<Edge> {
        self.checks
            .iter()
            .filter(|c| !c.holds)
            .map(|c| c.edge)
            .collect()
    }
}

/// Grounds every graph edge on a set of boxes.
pub fn verify_boxes(
    boxes: &BTreeMap<ObjectId, Box3>,
    graph: &SceneGraph,
    params: &GroundingParams,
) -> LayoutReport {
    let checks = graph
        .edges()
        .iter()
        .map(|edge| match (boxes.get(&edge.from), boxes.get(&edge.to)) {
            (Some(a), Some(b)) => {
                let grounded: Vec<_> = ground_relation(a, b, params).into_iter().collect();
                EdgeCheck {
                    edge: *edge,
                    holds: grounded.contains(&edge.relation),
                    grounded,
                }
            }
            _ => EdgeCheck {
                edge: *edge,
                holds: false,
                grounded: Vec::new(),
            },
        })
        .collect();
    LayoutReport { checks }
}

pub fn verify_layout(
    goal: &GoalScene,
    graph: &SceneGraph,
    params: &GroundingParams,
) -> LayoutReport {
    verify_boxes(&goal.boxes(), graph, params)
}
