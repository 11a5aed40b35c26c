//! Semantic scene graphs over the six-relation vocabulary, plus the
//! transactional edit operations used by the user-defined mode.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type ObjectId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationLabel {
    Left,
    Right,
    Front,
    Behind,
    StandingOn,
    CloseBy,
}

impl RelationLabel {
    pub const ALL: [RelationLabel; 6] = [
        RelationLabel::Left,
        RelationLabel::Right,
        RelationLabel::Front,
        RelationLabel::Behind,
        RelationLabel::StandingOn,
        RelationLabel::CloseBy,
    ];

    /// The label obtained by swapping the arguments. `standing_on` has no
    /// counterpart in the vocabulary.
    pub fn inverse(self) -> Option<RelationLabel> {
        use RelationLabel::*;
        match self {
            Left => Some(Right),
            Right => Some(Left),
            Front => Some(Behind),
            Behind => Some(Front),
            CloseBy => Some(CloseBy),
            StandingOn => None,
        }
    }

    pub fn is_directional(self) -> bool {
        matches!(
            self,
            RelationLabel::Left
                | RelationLabel::Right
                | RelationLabel::Front
                | RelationLabel::Behind
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RelationLabel::Left => "left",
            RelationLabel::Right => "right",
            RelationLabel::Front => "front",
            RelationLabel::Behind => "behind",
            RelationLabel::StandingOn => "standing_on",
            RelationLabel::CloseBy => "close_by",
        }
    }
}

impl fmt::Display for RelationLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RelationLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RelationLabel::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| format!("unknown relation '{s}'"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub id: ObjectId,
    pub category: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub from: ObjectId,
    pub to: ObjectId,
    pub relation: RelationLabel,
}

impl Edge {
    pub fn new(from: ObjectId, to: ObjectId, relation: RelationLabel) -> Self {
        Self { from, to, relation }
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.from, self.relation, self.to)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("duplicate node id {0}")]
    DuplicateNode(ObjectId),
    #[error("edge {0} references a missing node")]
    DanglingEdge(Edge),
    #[error("self-edge on node {0}")]
    SelfEdge(ObjectId),
    #[error("duplicate edge {0}")]
    DuplicateEdge(Edge),
    #[error("unknown node {0}")]
    UnknownNode(ObjectId),
    #[error("unknown edge {0}")]
    UnknownEdge(Edge),
}

/// Failure of an edit batch; `index` points at the offending edit.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EditError {
    #[error("edit {index}: unknown reference ({source})")]
    UnknownReference { index: usize, source: GraphError },
    #[error("edit {index}: invariant violation ({source})")]
    InvariantViolation { index: usize, source: GraphError },
}

impl EditError {
    pub fn index(&self) -> usize {
        match self {
            EditError::UnknownReference { index, .. }
            | EditError::InvariantViolation { index, .. } => *index,
        }
    }
}

/// Directed labeled graph. Nodes keep insertion order; edges keep
/// insertion order and are unique as (from, to, relation) triples.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SceneGraph {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
}

impl SceneGraph {
    pub fn new(nodes: Vec<Node>, edges: Vec<Edge>) -> Result<Self, GraphError> {
        let mut graph = SceneGraph::default();
        for node in nodes {
            graph.add_node(node.id, node.category)?;
        }
        for edge in edges {
            graph.add_edge(edge)?;
        }
        Ok(graph)
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node(&self, id: ObjectId) -> Option<&Node> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn contains_node(&self, id: ObjectId) -> bool {
        self.node(id).is_some()
    }

    pub fn node_ids(&self) -> BTreeSet<ObjectId> {
        self.nodes.iter().map(|n| n.id).collect()
    }

    pub fn outgoing(&self, id: ObjectId) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(move |e| e.from == id)
    }

    pub fn add_node(
        &mut self,
        id: ObjectId,
        category: impl Into<String>,
    ) -> Result<(), GraphError> {
        if self.contains_node(id) {
            return Err(GraphError::DuplicateNode(id));
        }
        self.nodes.push(Node {
            id,
            category: category.into(),
        });
        Ok(())
    }

    pub fn add_edge(&mut self, edge: Edge) -> Result<(), GraphError> {
        if edge.from == edge.to {
            return Err(GraphError::SelfEdge(edge.from));
        }
        if !self.contains_node(edge.from) || !self.contains_node(edge.to) {
            return Err(GraphError::DanglingEdge(edge));
        }
        if self.edges.contains(&edge) {
            return Err(GraphError::DuplicateEdge(edge));
        }
        self.edges.push(edge);
        Ok(())
    }

    pub fn remove_edge(&mut self, edge: &Edge) -> Result<(), GraphError> {
        let pos = self
            .edges
            .iter()
            .position(|e| e == edge)
            .ok_or(GraphError::UnknownEdge(*edge))?;
        self.edges.remove(pos);
        Ok(())
    }

    /// Removes the node and every edge touching it.
    pub fn remove_node(&mut self, id: ObjectId) -> Result<(), GraphError> {
        let pos = self
            .nodes
            .iter()
            .position(|n| n.id == id)
            .ok_or(GraphError::UnknownNode(id))?;
        self.nodes.remove(pos);
        self.edges.retain(|e| e.from != id && e.to != id);
        Ok(())
    }

    pub fn set_category(
        &mut self,
        id: ObjectId,
        category: impl Into<String>,
    ) -> Result<(), GraphError> {
        let node = self
            .nodes
            .iter_mut()
            .find(|n| n.id == id)
            .ok_or(GraphError::UnknownNode(id))?;
        node.category = category.into();
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum GraphEdit {
    AddEdge {
        from: ObjectId,
        to: ObjectId,
        relation: RelationLabel,
    },
    RemoveEdge {
        from: ObjectId,
        to: ObjectId,
        relation: RelationLabel,
    },
    RemoveNode {
        id: ObjectId,
    },
    SetCategory {
        id: ObjectId,
        category: String,
    },
}

fn classify(index: usize, err: GraphError) -> EditError {
    match err {
        GraphError::UnknownNode(_) | GraphError::UnknownEdge(_) | GraphError::DanglingEdge(_) => {
            EditError::UnknownReference { index, source: err }
        }
        GraphError::SelfEdge(_) | GraphError::DuplicateEdge(_) | GraphError::DuplicateNode(_) => {
            EditError::InvariantViolation { index, source: err }
        }
    }
}

/// Applies `edits` in order to a copy of `graph`; either every edit lands
/// or the error for the first failing edit is returned.
pub fn apply_edits(graph: &SceneGraph, edits: &[GraphEdit]) -> Result<SceneGraph, EditError> {
    let mut out = graph.clone();
    for (index, edit) in edits.iter().enumerate() {
        let result = match edit {
            GraphEdit::AddEdge { from, to, relation } => {
                out.add_edge(Edge::new(*from, *to, *relation))
            }
            GraphEdit::RemoveEdge { from, to, relation } => {
                out.remove_edge(&Edge::new(*from, *to, *relation))
            }
            GraphEdit::RemoveNode { id } => out.remove_node(*id),
            GraphEdit::SetCategory { id, category } => out.set_category(*id, category.clone()),
        };
        result.map_err(|e| classify(index, e))?;
    }
    Ok(out)
}
