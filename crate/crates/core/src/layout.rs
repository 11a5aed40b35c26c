//! Deterministic constraint-based layout solver.
//!
//! Every node is placed relative to one "primary" outgoing edge (standing_on
//! before directional before close_by), breadth-first from an anchor set at
//! the table origin. Directional children are searched outward from the
//! minimal offset, staggering along the free axis only while the placement
//! axis stays dominant; close_by children scan a ring clockwise from a
//! seeded start angle. A bounded separation pass repairs residual overlaps
//! and the result is re-grounded against every edge before it is returned.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{Box3, Vec3};
use crate::graph::{Edge, ObjectId, RelationLabel, SceneGraph};
use crate::grounding::GroundingParams;
use crate::rules::{anchor_rank, CategoryVocabulary, Role};
use crate::synth::{verify_boxes, ShapePrior, SynthError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LayoutConfig {
    /// Clearance between adjacent boxes, meters.
    pub gap: f64,
    /// Angular samples on a close_by ring.
    pub ring_steps: usize,
    /// Largest |free-axis offset| / |placement-axis offset| for staggered
    /// directional placements.
    pub dominance: f64,
    pub max_separation_rounds: usize,
    /// Outward steps tried for a directional placement before giving up.
    pub max_search_steps: usize,
    pub grounding: GroundingParams,
}

impl Default for LayoutConfig {
    fn default() -> Self {
        Self {
            gap: 0.03,
            ring_steps: 72,
            dominance: 0.75,
            max_separation_rounds: 100,
            max_search_steps: 400,
            grounding: GroundingParams::default(),
        }
    }
}

const OVERLAP_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Placement {
    Anchor,
    FreeRoot,
    Child(ObjectId, RelationLabel),
}

#[derive(Debug, Clone)]
struct Slot {
    half: Vec3,
    yaw: f64,
    placement: Placement,
    center: Option<Vec3>,
}

impl Slot {
    fn box_at(&self, center: Vec3) -> Box3 {
        Box3 {
            center,
            half_extents: self.half,
            yaw: self.yaw,
        }
    }

    fn hull(&self) -> Vec3 {
        self.box_at(Vec3::zeros()).hull_half_extents()
    }
}

fn edge_class(r: RelationLabel) -> u8 {
    match r {
        RelationLabel::StandingOn => 0,
        RelationLabel::CloseBy => 2,
        _ => 1,
    }
}

fn infeasible(reason: impl Into<String>, edges: Vec<Edge>) -> SynthError {
    SynthError::LayoutInfeasible {
        reason: reason.into(),
        edges,
    }
}

/// Edges that force a strict order along x, y or z, as (lower, upper) pairs.
fn strict_order(edge: &Edge) -> Option<(usize, ObjectId, ObjectId)> {
    use RelationLabel::*;
    match edge.relation {
        Left => Some((0, edge.from, edge.to)),
        Right => Some((0, edge.to, edge.from)),
        Behind => Some((1, edge.from, edge.to)),
        Front => Some((1, edge.to, edge.from)),
        StandingOn => Some((2, edge.to, edge.from)),
        CloseBy => None,
    }
}

/// Edges lying on a cycle of strict orderings along any one axis.
fn contradictory_edges(graph: &SceneGraph) -> Vec<Edge> {
    let mut bad = Vec::new();
    for axis in 0..3 {
        let arcs: Vec<(ObjectId, ObjectId, Edge)> = graph
            .edges()
            .iter()
            .filter_map(|e| {
                strict_order(e)
                    .filter(|o| o.0 == axis)
                    .map(|o| (o.1, o.2, *e))
            })
            .collect();
        // Kahn's algorithm; whatever cannot be peeled off sits on or behind a cycle
        let mut alive: BTreeSet<ObjectId> = arcs.iter().flat_map(|a| [a.0, a.1]).collect();
        loop {
            let sources: Vec<ObjectId> = alive
                .iter()
                .copied()
                .filter(|n| !arcs.iter().any(|a| a.1 == *n && alive.contains(&a.0)))
                .collect();
            let sinks: Vec<ObjectId> = alive
                .iter()
                .copied()
                .filter(|n| !arcs.iter().any(|a| a.0 == *n && alive.contains(&a.1)))
                .collect();
            if sources.is_empty() && sinks.is_empty() {
                break;
            }
            for n in sources.into_iter().chain(sinks) {
                alive.remove(&n);
            }
        }
        bad.extend(
            arcs.iter()
                .filter(|a| alive.contains(&a.0) && alive.contains(&a.1))
                .map(|a| a.2),
        );
    }
    bad
}

struct Solver<'a> {
    cfg: &'a LayoutConfig,
    slots: BTreeMap<ObjectId, Slot>,
    order: Vec<ObjectId>,
    rng: ChaCha8Rng,
}

impl Solver<'_> {
    fn placed_boxes(&self) -> impl Iterator<Item = (ObjectId, Box3)> + '_ {
        self.order.iter().map(|id| {
            let s = &self.slots[id];
            (*id, s.box_at(s.center.expect("ordered slots are placed")))
        })
    }

    fn clearance(&self, candidate: &Box3, skip: &BTreeSet<ObjectId>) -> f64 {
        self.placed_boxes()
            .filter(|(id, _)| !skip.contains(id))
            .map(|(_, b)| candidate.hull_clearance_xy(&b))
            .fold(f64::INFINITY, f64::min)
    }

    fn commit(&mut self, id: ObjectId, center: Vec3) {
        self.slots.get_mut(&id).expect("known slot").center = Some(center);
        self.order.push(id);
    }

    fn table_z(&self, id: ObjectId) -> f64 {
        self.slots[&id].half.z
    }

    /// Nearest pose to `origin` with full clearance, on growing rings.
    fn place_free(&mut self, id: ObjectId, origin: Vec3) {
        let slot = &self.slots[&id];
        let z = self.table_z(id);
        let steps = self.cfg.ring_steps.max(1);
        for k in 0..self.cfg.max_search_steps {
            let r = k as f64 * self.cfg.gap;
            let angles = if k == 0 { 1 } else { steps };
            for a in 0..angles {
                let theta = -(a as f64) * 2.0 * PI / steps as f64;
                let c = Vec3::new(origin.x + r * theta.cos(), origin.y + r * theta.sin(), z);
                if self.clearance(&slot.box_at(c), &BTreeSet::new()) >= self.cfg.gap - 1e-12 {
                    self.commit(id, c);
                    return;
                }
            }
        }
        self.commit(id, Vec3::new(origin.x, origin.y, z));
    }

    fn place_directional(&mut self, id: ObjectId, parent: ObjectId, rel: RelationLabel) {
        let (axis, sign) = match rel {
            RelationLabel::Left => (0, -1.0),
            RelationLabel::Right => (0, 1.0),
            RelationLabel::Front => (1, 1.0),
            _ => (1, -1.0),
        };
        let free = 1 - axis;
        let slot = &self.slots[&id];
        let pslot = &self.slots[&parent];
        let pc = pslot.center.expect("parent placed first");
        let (hs, hp) = (slot.hull(), pslot.hull());
        let base = hp[axis] + hs[axis] + self.cfg.gap;
        let stride = 2.0 * hs[free] + self.cfg.gap;
        let z = self.table_z(id);
        let none = BTreeSet::new();
        for step in 0..self.cfg.max_search_steps {
            let along = base + step as f64 * self.cfg.gap;
            let mut k = 0usize;
            loop {
                // 0, +1, −1, +2, −2, … strides along the free axis
                let m = k.div_ceil(2) as f64;
                let offset = if k % 2 == 1 { m * stride } else { -m * stride };
                if offset.abs() > self.cfg.dominance * along {
                    break;
                }
                let mut c = Vec3::new(pc.x, pc.y, z);
                c[axis] += sign * along;
                c[free] += offset;
                if self.clearance(&slot.box_at(c), &none) >= self.cfg.gap - 1e-12 {
                    self.commit(id, c);
                    return;
                }
                k += 1;
            }
        }
        let mut c = Vec3::new(pc.x, pc.y, z);
        c[axis] += sign * base;
        self.commit(id, c);
    }

    fn place_close_by(&mut self, id: ObjectId, parent: ObjectId) {
        let slot = &self.slots[&id];
        let pslot = &self.slots[&parent];
        let pc = pslot.center.expect("parent placed first");
        let (hd_s, hd_p) = (
            slot.box_at(Vec3::zeros()).half_diagonal_xy(),
            pslot.box_at(Vec3::zeros()).half_diagonal_xy(),
        );
        let sum = hd_s + hd_p;
        // stay well inside the grounding radius even when the gap is large
        let slack = self
            .cfg
            .gap
            .min(0.8 * (self.cfg.grounding.delta_close_factor - 1.0) * sum)
            .max(0.0);
        let radius = sum + slack;
        let steps = self.cfg.ring_steps.max(1);
        let start = self.rng.random_range(0..steps);
        let z = self.table_z(id);
        let skip = BTreeSet::from([parent]);
        let mut best: Option<(f64, Vec3)> = None;
        for k in 0..steps {
            let theta = -(((start + k) % steps) as f64) * 2.0 * PI / steps as f64;
            let c = Vec3::new(pc.x + radius * theta.cos(), pc.y + radius * theta.sin(), z);
            let clearance = self.clearance(&slot.box_at(c), &skip);
            if clearance >= self.cfg.gap - 1e-12 {
                self.commit(id, c);
                return;
            }
            if best.is_none_or(|(b, _)| clearance > b) {
                best = Some((clearance, c));
            }
        }
        let (_, c) = best.expect("ring has at least one sample");
        self.commit(id, c);
    }

    fn place_on(&mut self, id: ObjectId, parent: ObjectId) {
        let pslot = &self.slots[&parent];
        let pc = pslot.center.expect("parent placed first");
        let top = pc.z + pslot.half.z;
        let c = Vec3::new(pc.x, pc.y, top + self.slots[&id].half.z);
        self.commit(id, c);
    }

    fn place(&mut self, id: ObjectId, origin: Vec3) {
        match self.slots[&id].placement {
            Placement::Anchor => {
                let z = self.table_z(id);
                self.commit(id, Vec3::new(origin.x, origin.y, z));
            }
            Placement::FreeRoot => self.place_free(id, origin),
            Placement::Child(parent, RelationLabel::StandingOn) => self.place_on(id, parent),
            Placement::Child(parent, RelationLabel::CloseBy) => self.place_close_by(id, parent),
            Placement::Child(parent, rel) => self.place_directional(id, parent, rel),
        }
    }

    fn stacked_pair(&self, a: ObjectId, b: ObjectId) -> bool {
        let on = |x: ObjectId, y: ObjectId| matches!(self.slots[&x].placement, Placement::Child(p, RelationLabel::StandingOn) if p == y);
        on(a, b) || on(b, a)
    }

    fn overlapping_pairs(&self) -> Vec<(ObjectId, ObjectId, f64)> {
        let boxes: Vec<(ObjectId, Box3)> = self.placed_boxes().collect();
        let mut out = Vec::new();
        for (i, (a, ba)) in boxes.iter().enumerate() {
            for (b, bb) in &boxes[i + 1..] {
                let c = ba.hull_clearance_xy(bb);
                if c < -OVERLAP_TOLERANCE && !self.stacked_pair(*a, *b) {
                    out.push((*a, *b, c));
                }
            }
        }
        out
    }

    /// Pushes the later-placed box of each overlapping pair apart along its
    /// unconstrained axis.
    fn separate(&mut self) -> Result<(), SynthError> {
        for _ in 0..self.cfg.max_separation_rounds {
            let pairs = self.overlapping_pairs();
            let Some(&(a, b, _)) = pairs.first() else {
                return Ok(());
            };
            let (fixed, moving) = if self.order.iter().position(|x| *x == a)
                < self.order.iter().position(|x| *x == b)
            {
                (a, b)
            } else {
                (b, a)
            };
            let fb = self.slots[&fixed].box_at(self.slots[&fixed].center.expect("placed"));
            let ms = &self.slots[&moving];
            let mc = ms.center.expect("placed");
            let axis = match ms.placement {
                Placement::Child(_, RelationLabel::Left | RelationLabel::Right) => 1,
                Placement::Child(_, RelationLabel::Front | RelationLabel::Behind) => 0,
                Placement::Child(_, RelationLabel::StandingOn) | Placement::Anchor => {
                    return Err(infeasible(
                        format!("objects {fixed} and {moving} overlap and neither can move"),
                        Vec::new(),
                    ))
                }
                _ => {
                    let (hf, hm) = (fb.hull_half_extents(), ms.hull());
                    let px = hf.x + hm.x - (mc.x - fb.center.x).abs();
                    let py = hf.y + hm.y - (mc.y - fb.center.y).abs();
                    usize::from(py < px)
                }
            };
            let (hf, hm) = (fb.hull_half_extents(), ms.hull());
            let delta = mc[axis] - fb.center[axis];
            let dir = if delta >= 0.0 { 1.0 } else { -1.0 };
            let shift = hf[axis] + hm[axis] + self.cfg.gap - delta.abs();
            let mut c = mc;
            c[axis] += dir * shift;
            self.slots.get_mut(&moving).expect("known slot").center = Some(c);
            // whatever stands on the moved box moves with it
            let riders: Vec<ObjectId> = self
                .slots
                .iter()
                .filter(|(_, s)| s.placement == Placement::Child(moving, RelationLabel::StandingOn))
                .map(|(id, _)| *id)
                .collect();
            for r in riders {
                let s = self.slots.get_mut(&r).expect("known slot");
                if let Some(rc) = s.center.as_mut() {
                    rc[axis] += dir * shift;
                }
            }
        }
        if self.overlapping_pairs().is_empty() {
            Ok(())
        } else {
            Err(infeasible(
                format!(
                    "overlap separation did not converge in {} rounds",
                    self.cfg.max_separation_rounds
                ),
                Vec::new(),
            ))
        }
    }
}

/// Computes goal boxes for every graph node.
///
/// `seed` only selects where close_by ring searches start; the result is a
/// pure function of its inputs.
pub fn solve_layout(
    graph: &SceneGraph,
    priors: &BTreeMap<ObjectId, ShapePrior>,
    table: &Box3,
    seed: u64,
    cfg: &LayoutConfig,
) -> Result<BTreeMap<ObjectId, Box3>, SynthError> {
    for n in graph.nodes() {
        if !priors.contains_key(&n.id) {
            return Err(SynthError::MissingPrior(n.id));
        }
    }
    let contradictions = contradictory_edges(graph);
    if !contradictions.is_empty() {
        return Err(infeasible(
            "contradictory ordering constraints",
            contradictions,
        ));
    }
    if graph.nodes().is_empty() {
        return Ok(BTreeMap::new());
    }

    let vocab = CategoryVocabulary::default();
    let priority = |id: ObjectId| {
        let node = graph.node(id).expect("node exists");
        let rank = anchor_rank(&node.category).unwrap_or(3);
        // larger footprint first, then lower id
        (rank, -priors[&id].footprint_area(), id)
    };

    // primary edge per node
    let mut primary: BTreeMap<ObjectId, Edge> = BTreeMap::new();
    for e in graph.edges() {
        match primary.get(&e.from) {
            Some(p) if edge_class(p.relation) <= edge_class(e.relation) => {}
            _ => {
                primary.insert(e.from, *e);
            }
        }
    }

    let mut roots: Vec<ObjectId> = graph
        .nodes()
        .iter()
        .map(|n| n.id)
        .filter(|id| !primary.contains_key(id))
        .collect();
    roots.sort_by(|a, b| {
        priority(*a)
            .partial_cmp(&priority(*b))
            .expect("finite areas")
    });
    let anchor = match roots.first() {
        Some(id) => *id,
        None => {
            let mut all: Vec<ObjectId> = graph.nodes().iter().map(|n| n.id).collect();
            all.sort_by(|a, b| {
                priority(*a)
                    .partial_cmp(&priority(*b))
                    .expect("finite areas")
            });
            primary.remove(&all[0]);
            all[0]
        }
    };

    let slots: BTreeMap<ObjectId, Slot> = graph
        .nodes()
        .iter()
        .map(|n| {
            let prior = &priors[&n.id];
            let yaw = if vocab.role(&n.category) == Role::Cutlery {
                PI / 2.0
            } else if n.id == anchor {
                0.0
            } else {
                prior.yaw
            };
            let placement = if n.id == anchor {
                Placement::Anchor
            } else {
                match primary.get(&n.id) {
                    Some(e) => Placement::Child(e.to, e.relation),
                    None => Placement::FreeRoot,
                }
            };
            (
                n.id,
                Slot {
                    half: prior.dims / 2.0,
                    yaw,
                    placement,
                    center: None,
                },
            )
        })
        .collect();

    let mut solver = Solver {
        cfg,
        slots,
        order: Vec::new(),
        rng: ChaCha8Rng::seed_from_u64(seed),
    };
    let origin = table.center;
    let mut pending: VecDeque<ObjectId> = VecDeque::from([anchor]);
    loop {
        while let Some(id) = pending.pop_front() {
            solver.place(id, origin);
            let mut children: Vec<(u8, ObjectId)> = solver
                .slots
                .iter()
                .filter_map(|(cid, s)| match s.placement {
                    Placement::Child(p, rel) if p == id && s.center.is_none() => {
                        // directional first so rings avoid them
                        let class = match edge_class(rel) {
                            1 => 0,
                            0 => 1,
                            c => c,
                        };
                        Some((class, *cid))
                    }
                    _ => None,
                })
                .collect();
            children.sort();
            pending.extend(children.into_iter().map(|(_, c)| c));
        }
        let unplaced: Vec<ObjectId> = solver
            .slots
            .iter()
            .filter(|(_, s)| s.center.is_none())
            .map(|(id, _)| *id)
            .collect();
        if unplaced.is_empty() {
            break;
        }
        // another root, or a cycle of close_by edges: start from its best node
        let mut candidates: Vec<ObjectId> = unplaced
            .iter()
            .copied()
            .filter(|id| matches!(solver.slots[id].placement, Placement::FreeRoot))
            .collect();
        if candidates.is_empty() {
            candidates = unplaced;
        }
        candidates.sort_by(|a, b| {
            priority(*a)
                .partial_cmp(&priority(*b))
                .expect("finite areas")
        });
        let next = candidates[0];
        solver.slots.get_mut(&next).expect("known slot").placement = Placement::FreeRoot;
        pending.push_back(next);
    }

    solver.separate()?;

    let boxes: BTreeMap<ObjectId, Box3> = solver.placed_boxes().collect();
    let report = verify_boxes(&boxes, graph, &cfg.grounding);
    if !report.all_true() {
        return Err(infeasible(
            "placement does not satisfy every relation",
            report.violations(),
        ));
    }
    Ok(boxes)
}
