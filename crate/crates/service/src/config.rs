//! Service configuration: a TOML or JSON file plus `SGBOT_` environment
//! overrides.
//!
//! An override variable is named `SGBOT_<SECTION>_<FIELD>`, for example
//! `SGBOT_PLANNER_SIGMA=0.02` or `SGBOT_SERVER_ADDR=0.0.0.0:9000`. Values
//! that parse as JSON are used as such; anything else is taken as a string.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use sgbot_core::bench::PipelineConfig;
use sgbot_core::eval::SymmetryTable;
use sgbot_core::grounding::GroundingParams;
use sgbot_core::io::{parse_json, DocError};
use sgbot_core::layout::LayoutConfig;
use sgbot_core::planner::PlannerConfig;
use sgbot_core::registration::IcpConfig;

pub const ENV_PREFIX: &str = "SGBOT_";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("unsupported config extension on {0} (expected .toml or .json)")]
    Extension(PathBuf),
    #[error("environment override {var}: {message}")]
    Override { var: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServerConfig {
    pub addr: String,
    /// Directory that receives a JSON dump of every session on shutdown.
    pub snapshot_dir: Option<PathBuf>,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            addr: "127.0.0.1:8080".into(),
            snapshot_dir: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    pub grounding: GroundingParams,
    pub icp: IcpConfig,
    pub planner: PlannerConfig,
    /// Layout solver settings; its grounding thresholds are taken from the
    /// top-level `grounding` section.
    pub layout: LayoutConfig,
    pub server: ServerConfig,
}

impl AppConfig {
    /// Reads `path` (if any), then applies overrides from `env`.
    pub fn load<I>(path: Option<&Path>, env: I) -> Result<Self, ConfigError>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut value = match path {
            Some(p) => read_value(p)?,
            None => Value::Object(Default::default()),
        };
        apply_env(&mut value, env)?;
        serde_json::from_value(value).map_err(|e| ConfigError::Parse {
            path: path.map(Path::to_path_buf).unwrap_or_default(),
            message: e.to_string(),
        })
    }

    /// [`AppConfig::load`] with the process environment.
    pub fn from_env(path: Option<&Path>) -> Result<Self, ConfigError> {
        Self::load(path, std::env::vars())
    }

    pub fn layout(&self) -> LayoutConfig {
        LayoutConfig {
            grounding: self.grounding,
            ..self.layout
        }
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            layout: self.layout(),
            planner: self.planner,
            icp: self.icp,
            symmetries: SymmetryTable::default(),
        }
    }
}

fn read_value(path: &Path) -> Result<Value, ConfigError> {
    let bytes = std::fs::read(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let parse_err = |message: String| ConfigError::Parse {
        path: path.to_path_buf(),
        message,
    };
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => parse_json::<Value>(&bytes).map_err(|e: DocError| parse_err(e.to_string())),
        Some("toml") => {
            let text = std::str::from_utf8(&bytes).map_err(|e| parse_err(e.to_string()))?;
            toml::from_str::<Value>(text).map_err(|e| parse_err(e.to_string()))
        }
        _ => Err(ConfigError::Extension(path.to_path_buf())),
    }
}

const SECTIONS: [&str; 5] = ["grounding", "icp", "planner", "layout", "server"];

fn apply_env<I>(value: &mut Value, env: I) -> Result<(), ConfigError>
where
    I: IntoIterator<Item = (String, String)>,
{
    let mut vars: Vec<(String, String)> = env
        .into_iter()
        .filter(|(k, _)| k.starts_with(ENV_PREFIX))
        .collect();
    vars.sort();
    for (var, raw) in vars {
        let rest = var[ENV_PREFIX.len()..].to_ascii_lowercase();
        let Some((section, field)) = rest.split_once('_') else {
            continue;
        };
        if !SECTIONS.contains(&section) {
            continue;
        }
        let parsed = serde_json::from_str::<Value>(&raw).unwrap_or(Value::String(raw));
        let root = value.as_object_mut().ok_or_else(|| ConfigError::Override {
            var: var.clone(),
            message: "config root is not a table".into(),
        })?;
        let entry = root
            .entry(section.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
        let table = entry.as_object_mut().ok_or_else(|| ConfigError::Override {
            var: var.clone(),
            message: format!("section {section} is not a table"),
        })?;
        table.insert(field.to_string(), parsed);
    }
    Ok(())
}
