//! The `sgbot` command line.
//!
//! Failures print one JSON object `{"error": code, "detail": text}` on
//! stderr. Exit code 2 marks unreadable or malformed input and usage
//! errors; exit code 1 marks failures of the pipeline itself.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use sgbot_core::bench::{run_bench, BenchError, BenchManifest};
use sgbot_core::geometry::Vec3;
use sgbot_core::graph::SceneGraph;
use sgbot_core::ingest::{
    depth_from_bytes, ingest_labels, labels_from_bytes, CameraSidecar, IngestError,
};
use sgbot_core::io::{
    load_goal, load_graph, load_scene, parse_json, save_goal, save_graph, save_plan, save_scene,
    DocError,
};
use sgbot_core::scene::{table_box, SceneState};
use sgbot_core::sim::SIM_TABLE_HALF_EXTENTS;
use sgbot_core::synth::SynthError;

use crate::config::AppConfig;
use crate::pipeline;

#[derive(Debug, Parser)]
#[command(
    name = "sgbot",
    version,
    about = "Tabletop rearrangement from semantic scene graphs"
)]
pub struct Cli {
    /// Configuration file (.toml or .json).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GraphMode {
    Commonsense,
    File,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Back-project a depth image and instance labels into a scene.
    Ingest {
        /// Row-major little-endian f32 depth in meters.
        #[arg(long)]
        depth: PathBuf,
        /// Row-major u8 instance labels, 0 for background.
        #[arg(long)]
        mask: PathBuf,
        /// Camera sidecar JSON: intrinsics, camera_pose, categories.
        #[arg(long)]
        intrinsics: PathBuf,
        /// Table half extents x,y,z in meters.
        #[arg(long, value_delimiter = ',')]
        table: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build a goal scene graph.
    Graph {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long, value_enum)]
        mode: GraphMode,
        /// User-defined graph, required with `--mode file`.
        #[arg(long)]
        graph: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Synthesize a goal scene from a scene and a graph.
    Synth {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Plan the rearrangement of a scene into a goal.
    Plan {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        goal: PathBuf,
        /// Clearance threshold in meters; defaults to the configured value.
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the simulated benchmark described by a manifest.
    Bench {
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Serve the session API over HTTP.
    Serve {
        /// Listen address; defaults to the configured value.
        #[arg(long)]
        addr: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: &'static str,
    pub detail: String,
    pub exit: i32,
}

impl CliError {
    fn input(code: &'static str, detail: impl Into<String>) -> Self {
        Self {
            code,
            detail: detail.into(),
            exit: 2,
        }
    }

    fn domain(code: &'static str, detail: impl Into<String>) -> Self {
        Self {
            code,
            detail: detail.into(),
            exit: 1,
        }
    }

    pub fn to_json(&self) -> String {
        json!({"error": self.code, "detail": self.detail}).to_string()
    }
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => {
            CliError::input("file_not_found", path.display().to_string())
        }
        _ => CliError::input("io_error", format!("{}: {e}", path.display())),
    })
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes)
        .map_err(|e| CliError::input("io_error", format!("{}: {e}", path.display())))
}

fn doc_error(path: &Path, e: DocError) -> CliError {
    let code = match e {
        DocError::Parse { .. } => "parse_error",
        DocError::Schema(_) => "schema_violation",
    };
    CliError::input(code, format!("{}: {e}", path.display()))
}

fn load<T>(path: &Path, f: impl FnOnce(&[u8]) -> Result<T, DocError>) -> Result<T, CliError> {
    let bytes = read(path)?;
    f(&bytes).map_err(|e| doc_error(path, e))
}

fn synth_error(e: SynthError) -> CliError {
    match &e {
        SynthError::LayoutInfeasible { edges, .. } => {
            let list: Vec<String> = edges.iter().map(|e| e.to_string()).collect();
            CliError::domain(
                "layout_infeasible",
                format!("{e}; edges: [{}]", list.join(", ")),
            )
        }
        _ => CliError::domain("synthesis_failed", e.to_string()),
    }
}

fn ingest_error(e: IngestError) -> CliError {
    match e {
        IngestError::EmptyMask => CliError::domain("empty_mask", e.to_string()),
        _ => CliError::input("invalid_input", e.to_string()),
    }
}

fn cmd_ingest(
    depth: &Path,
    mask: &Path,
    intrinsics: &Path,
    table: &[f64],
    out: &Path,
) -> Result<(), CliError> {
    let half = match table {
        [] => Vec3::from(SIM_TABLE_HALF_EXTENTS),
        [x, y, z] => Vec3::new(*x, *y, *z),
        _ => {
            return Err(CliError::input(
                "usage",
                "--table takes three comma-separated values",
            ))
        }
    };
    let sidecar: CameraSidecar = load(intrinsics, parse_json)?;
    let (w, h) = (sidecar.intrinsics.width, sidecar.intrinsics.height);
    let depth = depth_from_bytes(&read(depth)?, w, h).map_err(ingest_error)?;
    let labels = labels_from_bytes(&read(mask)?, w, h).map_err(ingest_error)?;
    let objects = ingest_labels(&depth, &labels, &sidecar).map_err(ingest_error)?;
    let table =
        table_box(half).map_err(|e| CliError::input("invalid_input", format!("table: {e}")))?;
    let scene = SceneState::new(objects, table)
        .map_err(|e| CliError::domain("invalid_scene", e.to_string()))?;
    write(out, &save_scene(&scene))
}

fn cmd_graph(
    scene: &Path,
    mode: GraphMode,
    graph: Option<&Path>,
    out: &Path,
) -> Result<(), CliError> {
    let state = load(scene, load_scene)?;
    let g: SceneGraph = match mode {
        GraphMode::Commonsense => pipeline::commonsense_graph(&state)
            .map_err(|e| CliError::domain("no_placeable_objects", e.to_string()))?,
        GraphMode::File => {
            let path =
                graph.ok_or_else(|| CliError::input("usage", "--mode file requires --graph"))?;
            let g = load(path, load_graph)?;
            pipeline::check_graph_nodes(&g, &state)
                .map_err(|d| CliError::input("schema_violation", d))?;
            g
        }
    };
    write(out, &save_graph(&g))
}

fn cmd_synth(
    cfg: &AppConfig,
    scene: &Path,
    graph: &Path,
    seed: u64,
    out: &Path,
) -> Result<(), CliError> {
    let state = load(scene, load_scene)?;
    let g = load(graph, load_graph)?;
    pipeline::check_graph_nodes(&g, &state).map_err(|d| CliError::input("schema_violation", d))?;
    let goal = pipeline::synthesize(&state, &g, seed, cfg).map_err(synth_error)?;
    write(out, &save_goal(&goal))
}

fn cmd_plan(
    cfg: &AppConfig,
    scene: &Path,
    goal: &Path,
    sigma: Option<f64>,
    out: &Path,
) -> Result<(), CliError> {
    let state = load(scene, load_scene)?;
    let goal = load(goal, load_goal)?;
    let (_, plan) = pipeline::plan(&state, &goal, sigma, cfg)
        .map_err(|e| CliError::domain("planning_failed", e.to_string()))?;
    write(out, &save_plan(&plan))
}

fn cmd_bench(cfg: &AppConfig, manifest: &Path) -> Result<(), CliError> {
    let mut m: BenchManifest = load(manifest, parse_json)?;
    if m.out_dir.is_relative() {
        let base = manifest.parent().unwrap_or(Path::new("."));
        m.out_dir = base.join(&m.out_dir);
    }
    run_bench(&m, &cfg.pipeline()).map_err(|e| match e {
        BenchError::Io { .. } | BenchError::Csv(_) => CliError::input("io_error", e.to_string()),
        _ => CliError::domain("bench_failed", e.to_string()),
    })?;
    Ok(())
}

fn cmd_serve(mut cfg: AppConfig, addr: Option<String>) -> Result<(), CliError> {
    if let Some(a) = addr {
        cfg.server.addr = a;
    }
    let runtime =
        tokio::runtime::Runtime::new().map_err(|e| CliError::domain("runtime", e.to_string()))?;
    runtime
        .block_on(crate::server::serve(cfg))
        .map_err(|e| CliError::domain("server_failed", e.to_string()))
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    let cfg = AppConfig::from_env(cli.config.as_deref()).map_err(|e| match &e {
        crate::config::ConfigError::Io { source, path }
            if source.kind() == std::io::ErrorKind::NotFound =>
        {
            CliError::input("file_not_found", path.display().to_string())
        }
        _ => CliError::input("invalid_config", e.to_string()),
    })?;
    match cli.command {
        Command::Ingest {
            depth,
            mask,
            intrinsics,
            table,
            out,
        } => cmd_ingest(&depth, &mask, &intrinsics, &table, &out),
        Command::Graph {
            scene,
            mode,
            graph,
            out,
        } => cmd_graph(&scene, mode, graph.as_deref(), &out),
        Command::Synth {
            scene,
            graph,
            seed,
            out,
        } => cmd_synth(&cfg, &scene, &graph, seed, &out),
        Command::Plan {
            scene,
            goal,
            sigma,
            out,
        } => cmd_plan(&cfg, &scene, &goal, sigma, &out),
        Command::Bench { manifest } => cmd_bench(&cfg, &manifest),
        Command::Serve { addr } => cmd_serve(cfg, addr),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return 0;
        }
        Err(e) => {
            let err = CliError::input("usage", e.to_string().trim_end());
            eprintln!("{}", err.to_json());
            return err.exit;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(err) => {
            let mut stderr = std::io::stderr().lock();
            let _ = writeln!(stderr, "{}", err.to_json());
            err.exit
        }
    }
}
