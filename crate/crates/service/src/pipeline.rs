//! Pipeline steps shared by the CLI and the HTTP service, so both produce
//! identical documents for identical inputs.

use sgbot_core::graph::{Node, SceneGraph};
use sgbot_core::planner::{execute_plan, Plan, PlannerConfig, PlannerError};
use sgbot_core::rules::{build_commonsense_graph, CategoryVocabulary, RuleError};
use sgbot_core::scene::SceneState;
use sgbot_core::synth::{synthesize_goal, GoalScene, SynthError};

use crate::config::AppConfig;

pub fn commonsense_graph(scene: &SceneState) -> Result<SceneGraph, RuleError> {
    build_commonsense_graph(scene.objects(), &CategoryVocabulary::default())
}

/// Every non-obstacle object as a node, no edges.
pub fn blank_graph(scene: &SceneState) -> SceneGraph {
    let vocab = CategoryVocabulary::default();
    let nodes = scene
        .objects()
        .iter()
        .filter(|o| !o.is_obstacle && !vocab.is_obstacle(&o.category))
        .map(|o| Node {
            id: o.id,
            category: o.category.clone(),
        })
        .collect();
    SceneGraph::new(nodes, Vec::new()).expect("scene ids are unique")
}

/// Checks that every graph node names an object of `scene`.
pub fn check_graph_nodes(graph: &SceneGraph, scene: &SceneState) -> Result<(), String> {
    match graph.nodes().iter().find(|n| scene.get(n.id).is_none()) {
        Some(n) => Err(format!("graph node {} is not an object of the scene", n.id)),
        None => Ok(()),
    }
}

pub fn synthesize(
    scene: &SceneState,
    graph: &SceneGraph,
    seed: u64,
    cfg: &AppConfig,
) -> Result<GoalScene, SynthError> {
    synthesize_goal(scene, graph, seed, &cfg.layout())
}

/// Plans with the configured planner, optionally overriding sigma.
pub fn plan(
    scene: &SceneState,
    goal: &GoalScene,
    sigma: Option<f64>,
    cfg: &AppConfig,
) -> Result<(SceneState, Plan), PlannerError> {
    let planner = PlannerConfig {
        sigma: sigma.unwrap_or(cfg.planner.sigma),
        ..cfg.planner
    };
    execute_plan(scene, goal, &planner, &cfg.icp)
}
