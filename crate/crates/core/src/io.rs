//! JSON documents for scenes, graphs, goals and plans.
//!
//! Numbers are written with serde_json's shortest round-trip formatting, so
//! a save → load → save cycle is byte-stable.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Box3, PointCloud, Vec3};
use crate::graph::{Edge, Node, ObjectId, SceneGraph};
use crate::ingest::PoseDoc;
use crate::planner::{Action, ActionKind, Plan, PlanStatus};
use crate::scene::{table_box, ObjectInstance, SceneState};
use crate::synth::{GoalObject, GoalScene};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DocError {
    #[error("parse error at line {line}, column {column} ({path}): {message}")]
    Parse {
        line: usize,
        column: usize,
        path: String,
        message: String,
    },
    #[error("schema violation: {0}")]
    Schema(String),
}

/// Deserializes `bytes`, reporting the location and field path of failures.
pub fn parse_json<T: DeserializeOwned>(bytes: &[u8]) -> Result<T, DocError> {
    let mut de = serde_json::Deserializer::from_slice(bytes);
    let value: T = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        DocError::Parse {
            line: inner.line(),
            column: inner.column(),
            path,
            message: inner.to_string(),
        }
    })?;
    de.end().map_err(|e| DocError::Parse {
        line: e.line(),
        column: e.column(),
        path: ".".into(),
        message: e.to_string(),
    })?;
    Ok(value)
}

/// Compact JSON plus a trailing newline.
pub fn to_json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec(value).expect("documents contain only finite numbers");
    out.push(b'\n');
    out
}

fn points_doc(cloud: &PointCloud) -> Vec<[f64; 3]> {
    cloud.points.iter().map(|p| [p.x, p.y, p.z]).collect()
}

fn cloud_from_doc(points: &[[f64; 3]]) -> PointCloud {
    PointCloud::table(points.iter().map(|p| Vec3::from(*p)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableDoc {
    pub half_extents: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectDoc {
    pub id: ObjectId,
    pub category: String,
    pub points: Vec<[f64; 3]>,
    #[serde(default)]
    pub is_obstacle: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneDoc {
    pub table: TableDoc,
    pub objects: Vec<ObjectDoc>,
}

impl SceneDoc {
    pub fn from_scene(scene: &SceneState) -> Self {
        Self {
            table: TableDoc {
                half_extents: scene.table().half_extents.into(),
            },
            objects: scene
                .objects()
                .iter()
                .map(|o| ObjectDoc {
                    id: o.id,
                    category: o.category.clone(),
                    points: points_doc(&o.cloud),
                    is_obstacle: o.is_obstacle,
                })
                .collect(),
        }
    }

    pub fn to_scene(&self) -> Result<SceneState, DocError> {
        let schema = |e: &dyn std::fmt::Display| DocError::Schema(e.to_string());
        let table = table_box(Vec3::from(self.table.half_extents)).map_err(|e| schema(&e))?;
        let objects = self
            .objects
            .iter()
            .map(|o| {
                let mut obj =
                    ObjectInstance::from_cloud(o.id, o.category.clone(), cloud_from_doc(&o.points))
                        .map_err(|e| schema(&e))?;
                obj.is_obstacle = o.is_obstacle;
                Ok(obj)
            })
            .collect::<Result<Vec<_>, DocError>>()?;
        SceneState::new(objects, table).map_err(|e| schema(&e))
    }
}

pub fn load_scene(bytes: &[u8]) -> Result<SceneState, DocError> {
    parse_json::<SceneDoc>(bytes)?.to_scene()
}

pub fn save_scene(scene: &SceneState) -> Vec<u8> {
    to_json_bytes(&SceneDoc::from_scene(scene))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphDoc {
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
}

impl GraphDoc {
    pub fn from_graph(graph: &SceneGraph) -> Self {
        Self {
            nodes: graph.nodes().to_vec(),
            edges: graph.edges().to_vec(),
        }
    }

    pub fn to_graph(&self) -> Result<SceneGraph, DocError> {
        SceneGraph::new(self.nodes.clone(), self.edges.clone())
            .map_err(|e| DocError::Schema(e.to_string()))
    }
}

pub fn load_graph(bytes: &[u8]) -> Result<SceneGraph, DocError> {
    parse_json::<GraphDoc>(bytes)?.to_graph()
}

pub fn save_graph(graph: &SceneGraph) -> Vec<u8> {
    to_json_bytes(&GraphDoc::from_graph(graph))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxDoc {
    pub center: [f64; 3],
    pub half_extents: [f64; 3],
    pub yaw: f64,
}

impl From<&Box3> for BoxDoc {
    fn from(b: &Box3) -> Self {
        Self {
            center: b.center.into(),
            half_extents: b.half_extents.into(),
            yaw: b.yaw,
        }
    }
}

impl BoxDoc {
    pub fn to_box(&self) -> Result<Box3, DocError> {
        Box3::new(
            Vec3::from(self.center),
            Vec3::from(self.half_extents),
            self.yaw,
        )
        .map_err(|e| DocError::Schema(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalObjectDoc {
    pub id: ObjectId,
    pub source_id: ObjectId,
    #[serde(rename = "box")]
    pub bbox: BoxDoc,
    pub points: Vec<[f64; 3]>,
    pub from_source: PoseDoc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalDoc {
    pub objects: Vec<GoalObjectDoc>,
}

impl GoalDoc {
    pub fn from_goal(goal: &GoalScene) -> Self {
        Self {
            objects: goal
                .objects
                .values()
                .map(|g| GoalObjectDoc {
                    id: g.id,
                    source_id: g.source_id,
                    bbox: BoxDoc::from(&g.bbox),
                    points: points_doc(&g.cloud),
                    from_source: PoseDoc::from_transform(&g.from_source),
                })
                .collect(),
        }
    }

    pub fn to_goal(&self) -> Result<GoalScene, DocError> {
        let mut goal = GoalScene::default();
        for o in &self.objects {
            if o.points.is_empty() {
                return Err(DocError::Schema(format!(
                    "goal object {} has no points",
                    o.id
                )));
            }
            let g = GoalObject {
                id: o.id,
                cloud: cloud_from_doc(&o.points),
                bbox: o.bbox.to_box()?,
                source_id: o.source_id,
                from_source: o
                    .from_source
                    .to_transform()
                    .map_err(|e| DocError::Schema(e.to_string()))?,
            };
            if goal.objects.insert(o.id, g).is_some() {
                return Err(DocError::Schema(format!(
                    "duplicate goal object id {}",
                    o.id
                )));
            }
        }
        Ok(goal)
    }
}

pub fn load_goal(bytes: &[u8]) -> Result<GoalScene, DocError> {
    parse_json::<GoalDoc>(bytes)?.to_goal()
}

pub fn save_goal(goal: &GoalScene) -> Vec<u8> {
    to_json_bytes(&GoalDoc::from_goal(goal))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionDoc {
    pub object: ObjectId,
    pub kind: ActionKind,
    pub transform: PoseDoc,
    /// `null` when nothing else was on the table.
    pub clearance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotEntry {
    pub id: ObjectId,
    #[serde(rename = "box")]
    pub bbox: BoxDoc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanDoc {
    pub status: PlanStatus,
    pub actions: Vec<ActionDoc>,
    pub snapshots: Vec<Vec<SnapshotEntry>>,
}

impl PlanDoc {
    pub fn from_plan(plan: &Plan) -> Self {
        Self {
            status: plan.status,
            actions: plan
                .actions
                .iter()
                .map(|a| ActionDoc {
                    object: a.object,
                    kind: a.kind,
                    transform: PoseDoc::from_transform(&a.transform),
                    clearance: a.clearance.is_finite().then_some(a.clearance),
                })
                .collect(),
            snapshots: plan
                .snapshots
                .iter()
                .map(|s| {
                    s.iter()
                        .map(|(id, b)| SnapshotEntry {
                            id: *id,
                            bbox: BoxDoc::from(b),
                        })
                        .collect()
                })
                .collect(),
        }
    }

    pub fn to_plan(&self) -> Result<Plan, DocError> {
        let actions = self
            .actions
            .iter()
            .map(|a| {
                Ok(Action {
                    object: a.object,
                    kind: a.kind,
                    transform: a
                        .transform
                        .to_transform()
                        .map_err(|e| DocError::Schema(e.to_string()))?,
                    clearance: a.clearance.unwrap_or(f64::INFINITY),
                })
            })
            .collect::<Result<Vec<_>, DocError>>()?;
        let snapshots = self
            .snapshots
            .iter()
            .map(|s| s.iter().map(|e| Ok((e.id, e.bbox.to_box()?))).collect())
            .collect::<Result<Vec<_>, DocError>>()?;
        Ok(Plan {
            actions,
            snapshots,
            status: self.status,
        })
    }
}

pub fn load_plan(bytes: &[u8]) -> Result<Plan, DocError> {
    parse_json::<PlanDoc>(bytes)?.to_plan()
}

pub fn save_plan(plan: &Plan) -> Vec<u8> {
    to_json_bytes(&PlanDoc::from_plan(plan))
}
