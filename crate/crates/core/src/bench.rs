//! Full pipeline on generated scene pairs, and the benchmark table.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::{evaluate, EvalError, EvalReport, SymmetryTable};
use crate::layout::LayoutConfig;
use crate::planner::{execute_plan, Plan, PlannerConfig, PlannerError};
use crate::registration::IcpConfig;
use crate::rules::{build_commonsense_graph, CategoryVocabulary, RuleError};
use crate::scene::SceneState;
use crate::sim::{generate_scene_pair, object_database, ScenePair, SimError};
use crate::synth::{synthesize_goal, GoalScene, SynthError};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Rules(#[from] RuleError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Planner(#[from] PlannerError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Settings shared by every stage of a pipeline run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub layout: LayoutConfig,
    pub planner: PlannerConfig,
    pub icp: IcpConfig,
    pub symmetries: SymmetryTable,
}

#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub goal: GoalScene,
    pub final_scene: SceneState,
    pub plan: Plan,
    pub report: EvalReport,
}

/// Commonsense graph, goal synthesis, planning and evaluation for one pair.
pub fn run_scene_pair(pair: &ScenePair, cfg: &PipelineConfig) -> Result<PipelineRun, BenchError> {
    let graph = build_commonsense_graph(pair.initial.objects(), &CategoryVocabulary::default())?;
    let goal = synthesize_goal(&pair.initial, &graph, pair.seed, &cfg.layout)?;
    let (final_scene, plan) = execute_plan(&pair.initial, &goal, &cfg.planner, &cfg.icp)?;
    let report = evaluate(&final_scene, &pair.goal_truth, &cfg.symmetries)?;
    Ok(PipelineRun {
        goal,
        final_scene,
        plan,
        report,
    })
}

/// Benchmark manifest document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchManifest {
    pub seeds: Vec<u64>,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default)]
    pub icp: IcpConfig,
    pub out_dir: PathBuf,
    #[serde(default = "default_counts")]
    pub counts: [usize; 2],
}

fn default_sigma() -> f64 {
    PlannerConfig::default().sigma
}

fn default_counts() -> [usize; 2] {
    [2, 8]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub seed: u64,
    #[serde(rename = "R_e")]
    pub r_e: f64,
    pub t_e: f64,
    #[serde(rename = "R_f")]
    pub r_f: f64,
    pub t_f: f64,
    pub iou25: f64,
    pub iou50: f64,
    pub actions: usize,
    pub status: String,
}

fn bench_one(
    seed: u64,
    manifest: &BenchManifest,
    base: &PipelineConfig,
) -> Result<(BenchRow, EvalReport), BenchError> {
    let cfg = PipelineConfig {
        planner: PlannerConfig {
            sigma: manifest.sigma,
            ..base.planner
        },
        icp: manifest.icp,
        ..base.clone()
    };
    let pair = generate_scene_pair(
        seed,
        &object_database(),
        manifest.counts[0]..=manifest.counts[1],
        &cfg.layout,
    )?;
    let run = run_scene_pair(&pair, &cfg)?;
    let r = &run.report;
    let row = BenchRow {
        seed,
        r_e: r.r_e,
        t_e: r.t_e,
        r_f: r.r_f,
        t_f: r.t_f,
        iou25: r.iou25,
        iou50: r.iou50,
        actions: run.plan.actions.len(),
        status: run.plan.status.as_str().to_string(),
    };
    Ok((row, run.report))
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> BenchError + '_ {
    move |source| BenchError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Runs every seed, writing `report_<seed>.json` files and `bench.csv`
/// (rows in ascending seed order) into the manifest's output directory.
pub fn run_bench(
    manifest: &BenchManifest,
    base: &PipelineConfig,
) -> Result<Vec<BenchRow>, BenchError> {
    let mut seeds = manifest.seeds.clone();
    seeds.sort_unstable();
    seeds.dedup();
    let results: Vec<(BenchRow, EvalReport)> = seeds
        .par_iter()
        .map(|&seed| bench_one(seed, manifest, base))
        .collect::<Result<_, _>>()?;

    let out = &manifest.out_dir;
    fs::create_dir_all(out).map_err(io_err(out))?;
    for (row, report) in &results {
        let path = out.join(format!("report_{}.json", row.seed));
        let body = serde_json::to_string_pretty(report)?;
        fs::write(&path, body + "\n").map_err(io_err(&path))?;
    }
    let csv_path = out.join("bench.csv");
    let mut writer = csv::Writer::from_path(&csv_path)?;
    for (row, _) in &results {
        writer.serialize(row)?;
    }
    writer.flush().map_err(io_err(&csv_path))?;
    Ok(results.into_iter().map(|(row, _)| row).collect())
}
