//! Greedy, occupancy-checked rearrangement.
//!
//! Each round scans unplaced objects in ascending id, registers the current
//! cloud against its goal cloud, and moves the first object whose goal
//! region is clear. When every goal is blocked, one object is parked at the
//! table edge to break the cycle.

use std::collections::{BTreeMap, BTreeSet};

use kiddo::{ImmutableKdTree, SquaredEuclidean};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Box3, PointCloud, RigidTransform, Vec3};
use crate::graph::ObjectId;
use crate::grounding::{is_standing_on, GroundingParams};
use crate::registration::{multistart_register, IcpConfig, RegistrationError, RegistrationResult};
use crate::scene::SceneState;
use crate::synth::GoalScene;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    /// Minimum clearance, in meters, between a goal cloud and other objects.
    pub sigma: f64,
    /// Drop obstacle-flagged objects before planning.
    pub remove_obstacles: bool,
    /// Clearance required around a parked object.
    pub buffer_clearance: f64,
    /// Inset of parking poses from the table edge.
    pub buffer_margin: f64,
    /// Angular step, in degrees, of the parking-pose scan.
    pub buffer_angle_step_deg: f64,
    /// An object within these bounds of its goal counts as placed.
    pub converged_translation: f64,
    pub converged_rotation: f64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            sigma: 0.01,
            remove_obstacles: true,
            buffer_clearance: 0.03,
            buffer_margin: 0.02,
            buffer_angle_step_deg: 5.0,
            converged_translation: 0.01,
            converged_rotation: 0.05,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlannerError {
    #[error("goal object {0} is not in the scene")]
    UnknownObject(ObjectId),
    #[error("registration of object {id} failed: {source}")]
    Registration {
        id: ObjectId,
        #[source]
        source: RegistrationError,
    },
    #[error("no free buffer pose for object {0}")]
    BufferExhausted(ObjectId),
    #[error("invalid planner configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    MoveToGoal,
    MoveToBuffer,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Action {
    pub object: ObjectId,
    pub kind: ActionKind,
    pub transform: RigidTransform,
    /// Clearance of the object's goal region when the action was chosen.
    pub clearance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanStatus {
    Complete,
    Deadlock,
    StepLimit,
}

impl PlanStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            PlanStatus::Complete => "complete",
            PlanStatus::Deadlock => "deadlock",
            PlanStatus::StepLimit => "step_limit",
        }
    }
}

/// Object boxes after one action.
pub type Snapshot = Vec<(ObjectId, Box3)>;

#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub actions: Vec<Action>,
    pub snapshots: Vec<Snapshot>,
    pub status: PlanStatus,
}

/// Nearest-neighbour index over a set of clouds.
struct CloudIndex {
    tree: Option<ImmutableKdTree<f64, 3>>,
}

impl CloudIndex {
    fn new<'a>(clouds: impl IntoIterator<Item = &'a PointCloud>) -> Self {
        let raw: Vec<[f64; 3]> = clouds
            .into_iter()
            .flat_map(|c| c.points.iter().map(|p| [p.x, p.y, p.z]))
            .collect();
        let tree = (!raw.is_empty())
            .then(|| ImmutableKdTree::new_from_slice(&raw).expect("finite points"));
        Self { tree }
    }

    fn distance(&self, cloud: &PointCloud) -> f64 {
        let Some(tree) = &self.tree else {
            return f64::INFINITY;
        };
        cloud
            .points
            .iter()
            .map(|p| {
                tree.query(&[p.x, p.y, p.z])
                    .nearest_one::<SquaredEuclidean<f64>>()
                    .execute()
                    .distance
            })
            .fold(f64::INFINITY, f64::min)
            .sqrt()
    }
}

/// Smallest distance between `goal_cloud` and any point of any scene object
/// other than `exclude`; `+∞` when there is none.
pub fn occupancy_distance(goal_cloud: &PointCloud, scene: &SceneState, exclude: ObjectId) -> f64 {
    CloudIndex::new(
        scene
            .objects()
            .iter()
            .filter(|o| o.id != exclude)
            .map(|o| &o.cloud),
    )
    .distance(goal_cloud)
}

/// Planner state carried across rounds.
pub struct Planner<'a> {
    goal: &'a GoalScene,
    cfg: PlannerConfig,
    icp: IcpConfig,
    placed: BTreeSet<ObjectId>,
    parked: BTreeSet<ObjectId>,
    registrations: BTreeMap<ObjectId, RegistrationResult>,
    /// Goal objects each goal object rests on; those must be placed first.
    supporters: BTreeMap<ObjectId, Vec<ObjectId>>,
}

/// Outcome of one planning round.
#[derive(Debug, Clone, PartialEq)]
pub enum Step {
    Act(Action),
    Done,
}

impl<'a> Planner<'a> {
    pub fn new(
        goal: &'a GoalScene,
        cfg: PlannerConfig,
        icp: IcpConfig,
    ) -> Result<Self, PlannerError> {
        let non_negative = |v: f64| v >= 0.0;
        if !non_negative(cfg.sigma)
            || !non_negative(cfg.buffer_clearance)
            || cfg.buffer_angle_step_deg.is_nan()
            || cfg.buffer_angle_step_deg <= 0.0
        {
            return Err(PlannerError::InvalidConfig(
                "sigma and buffer clearance must be non-negative, angle step positive".into(),
            ));
        }
        icp.validate()
            .map_err(|e| PlannerError::InvalidConfig(e.to_string()))?;
        let params = GroundingParams::default();
        let supporters = goal
            .objects
            .values()
            .map(|g| {
                let below = goal
                    .objects
                    .values()
                    .filter(|h| h.id != g.id && is_standing_on(&g.bbox, &h.bbox, &params))
                    .map(|h| h.id)
                    .collect();
                (g.id, below)
            })
            .collect();
        Ok(Self {
            goal,
            cfg,
            icp,
            placed: BTreeSet::new(),
            parked: BTreeSet::new(),
            registrations: BTreeMap::new(),
            supporters,
        })
    }

    pub fn placed(&self) -> &BTreeSet<ObjectId> {
        &self.placed
    }

    fn registration(
        &mut self,
        scene: &SceneState,
        id: ObjectId,
    ) -> Result<RegistrationResult, PlannerError> {
        if let Some(r) = self.registrations.get(&id) {
            return Ok(*r);
        }
        let current = scene.get(id).ok_or(PlannerError::UnknownObject(id))?;
        let goal = self.goal.get(id).ok_or(PlannerError::UnknownObject(id))?;
        let r = multistart_register(&current.cloud, &goal.cloud, &self.icp)
            .map_err(|source| PlannerError::Registration { id, source })?;
        self.registrations.insert(id, r);
        Ok(r)
    }

    fn is_converged(&self, cloud: &PointCloud, t: &RigidTransform) -> bool {
        let c = cloud.centroid().unwrap_or_else(Vec3::zeros);
        t.rotation_angle() < self.cfg.converged_rotation
            && (t.apply_point(&c) - c).norm() < self.cfg.converged_translation
    }

    /// Chooses the next action. Objects already at their goal are marked
    /// placed on the way without producing an action.
    pub fn select_next_action(&mut self, scene: &SceneState) -> Result<Step, PlannerError> {
        let unplaced: Vec<ObjectId> = self
            .goal
            .ids()
            .filter(|id| !self.placed.contains(id))
            .collect();
        if unplaced.is_empty() {
            return Ok(Step::Done);
        }
        let mut blocked: Vec<(ObjectId, f64)> = Vec::new();
        for id in unplaced {
            let reg = self.registration(scene, id)?;
            let current = scene.get(id).ok_or(PlannerError::UnknownObject(id))?;
            if self.is_converged(&current.cloud, &reg.transform) {
                self.placed.insert(id);
                continue;
            }
            let goal = self.goal.get(id).ok_or(PlannerError::UnknownObject(id))?;
            let below = &self.supporters[&id];
            if below.iter().any(|b| !self.placed.contains(b)) {
                blocked.push((id, 0.0));
                continue;
            }
            // supporters are meant to touch the goal cloud
            let others = CloudIndex::new(
                scene
                    .objects()
                    .iter()
                    .filter(|o| o.id != id && !below.contains(&o.id))
                    .map(|o| &o.cloud),
            );
            let landed = reg.transform.apply(&current.cloud);
            let d = others.distance(&goal.cloud).min(others.distance(&landed));
            if d > self.cfg.sigma {
                return Ok(Step::Act(Action {
                    object: id,
                    kind: ActionKind::MoveToGoal,
                    transform: reg.transform,
                    clearance: d,
                }));
            }
            blocked.push((id, d));
        }
        if blocked.is_empty() {
            return Ok(Step::Done);
        }

        // park the most promising blocked object that is not parked already
        let candidate = blocked
            .iter()
            .filter(|(id, _)| !self.parked.contains(id))
            .fold(None::<(ObjectId, f64)>, |best, &(id, d)| match best {
                Some((_, bd)) if bd >= d => best,
                _ => Some((id, d)),
            });
        let Some((id, d)) = candidate else {
            return Err(PlannerError::BufferExhausted(blocked[0].0));
        };
        let transform = self.buffer_pose(scene, id)?;
        Ok(Step::Act(Action {
            object: id,
            kind: ActionKind::MoveToBuffer,
            transform,
            clearance: d,
        }))
    }

    /// First parking pose, scanning counter-clockwise from +x, that keeps
    /// the object clear of every other current cloud and unplaced goal.
    fn buffer_pose(
        &self,
        scene: &SceneState,
        id: ObjectId,
    ) -> Result<RigidTransform, PlannerError> {
        let obj = scene.get(id).ok_or(PlannerError::UnknownObject(id))?;
        let table = scene.table();
        let hull = obj.bbox.hull_half_extents();
        let ax = table.half_extents.x - hull.x - self.cfg.buffer_margin;
        let ay = table.half_extents.y - hull.y - self.cfg.buffer_margin;
        if ax <= 0.0 || ay <= 0.0 {
            return Err(PlannerError::BufferExhausted(id));
        }
        let blockers = CloudIndex::new(
            scene
                .objects()
                .iter()
                .filter(|o| o.id != id)
                .map(|o| &o.cloud)
                .chain(
                    self.goal
                        .objects
                        .values()
                        .filter(|g| g.id != id && !self.placed.contains(&g.id))
                        .map(|g| &g.cloud),
                ),
        );
        let steps = (360.0 / self.cfg.buffer_angle_step_deg).floor() as usize;
        for k in 0..steps {
            let theta = (k as f64 * self.cfg.buffer_angle_step_deg).to_radians();
            let (s, c) = theta.sin_cos();
            let reach = (ax / c.abs()).min(ay / s.abs());
            let target = table.center + Vec3::new(reach * c, reach * s, 0.0);
            let shift = Vec3::new(
                target.x - obj.bbox.center.x,
                target.y - obj.bbox.center.y,
                0.0,
            );
            let t = RigidTransform::from_translation(shift);
            if blockers.distance(&t.apply(&obj.cloud)) >= self.cfg.buffer_clearance {
                return Ok(t);
            }
        }
        Err(PlannerError::BufferExhausted(id))
    }

    /// Records that `action` was carried out.
    pub fn commit(&mut self, action: &Action) {
        self.registrations.remove(&action.object);
        match action.kind {
            ActionKind::MoveToGoal => {
                self.placed.insert(action.object);
                self.parked.remove(&action.object);
            }
            ActionKind::MoveToBuffer => {
                self.parked.insert(action.object);
            }
        }
    }
}

/// Applies `action` to `scene`.
pub fn apply_action(scene: &SceneState, action: &Action) -> Result<SceneState, PlannerError> {
    let obj = scene
        .get(action.object)
        .ok_or(PlannerError::UnknownObject(action.object))?;
    scene
        .with_object(obj.moved(&action.transform))
        .map_err(|_| PlannerError::UnknownObject(action.object))
}

fn snapshot(scene: &SceneState) -> Snapshot {
    scene.objects().iter().map(|o| (o.id, o.bbox)).collect()
}

/// Runs the planner to completion, at most `3N` actions for `N` goal objects.
///
/// Registration failures and exhausted buffers end the plan with
/// [`PlanStatus::Deadlock`] instead of an error.
pub fn execute_plan(
    initial: &SceneState,
    goal: &GoalScene,
    cfg: &PlannerConfig,
    icp: &IcpConfig,
) -> Result<(SceneState, Plan), PlannerError> {
    if let Some(id) = goal.ids().find(|id| initial.get(*id).is_none()) {
        return Err(PlannerError::UnknownObject(id));
    }
    let mut scene = if cfg.remove_obstacles {
        initial.without(&initial.obstacle_ids())
    } else {
        initial.clone()
    };
    let mut planner = Planner::new(goal, *cfg, *icp)?;
    let limit = 3 * goal.len();
    let mut plan = Plan {
        actions: Vec::new(),
        snapshots: Vec::new(),
        status: PlanStatus::StepLimit,
    };
    loop {
        let step = match planner.select_next_action(&scene) {
            Ok(step) => step,
            Err(PlannerError::Registration { .. } | PlannerError::BufferExhausted(_)) => {
                plan.status = PlanStatus::Deadlock;
                break;
            }
            Err(e) => return Err(e),
        };
        match step {
            Step::Done => {
                plan.status = PlanStatus::Complete;
                break;
            }
            Step::Act(_) if plan.actions.len() >= limit => {
                plan.status = PlanStatus::StepLimit;
                break;
            }
            Step::Act(action) => {
                scene = apply_action(&scene, &action)?;
                planner.commit(&action);
                plan.snapshots.push(snapshot(&scene));
                plan.actions.push(action);
            }
        }
    }
    Ok((scene, plan))
}
