//! Scene-graph guided tabletop rearrangement.
//!
//! Observed objects are grounded into a relation graph, a goal layout is
//! synthesized from a (possibly edited) graph, each object is registered
//! against its goal with multi-start ICP, and a greedy planner orders the
//! moves, parking blockers at the table edge.

pub mod bench;
pub mod eval;
pub mod geometry;
pub mod graph;
pub mod grounding;
pub mod ingest;
pub mod io;
pub mod layout;
pub mod planner;
pub mod registration;
pub mod rules;
pub mod scene;
pub mod sim;
pub mod synth;
