pub mod map;
pub mod orbits;
pub mod shift;
pub mod stats;
pub mod words;

use std::path::{Path, PathBuf};

use clap::Args;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use henon_mme::henon_model::{HenonMap, Perturbation};
use henon_mme::shift_core::{GraphSpec, MarkovGraph};
use henon_mme::symbolic_words::{ModelSpec, SuitabilityModel};

use crate::error::CliError;

/// Reads and parses a JSON file; parse errors carry line and column.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| {
        CliError::Usage(format!(
            "{}: malformed JSON at line {} column {}: {e}",
            path.display(),
            e.line(),
            e.column()
        ))
    })
}

pub fn load_graph(path: &Path) -> Result<(MarkovGraph, GraphSpec), CliError> {
    let spec: GraphSpec = read_json(path)?;
    Ok((MarkovGraph::from_spec(&spec)?, spec))
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("{name} must be positive, got {v}")))
    }
}

/// `--map FILE` or `--a/--b/--perturbation`.
#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct MapArgs {
    /// map spec JSON: {"a":-2.0,"b":0.001,"perturbation":"classical"}
    #[arg(long)]
    pub map: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    pub a: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub b: Option<f64>,
    /// zero or classical
    #[arg(long)]
    pub perturbation: Option<String>,
}

impl MapArgs {
    pub fn build(&self) -> Result<HenonMap, CliError> {
        let base: Option<HenonMap> = self.map.as_deref().map(read_json).transpose()?;
        let a = self.a.or(base.as_ref().map(|m| m.a)).unwrap_or(-2.0);
        let b = self.b.or(base.as_ref().map(|m| m.b)).unwrap_or(0.0);
        let perturbation = match self.perturbation.as_deref() {
            Some("zero") => Perturbation::Zero,
            Some("classical") => Perturbation::Classical,
            Some(other) => return Err(CliError::Usage(format!("unknown perturbation {other:?}"))),
            None => base.as_ref().map(|m| m.perturbation.clone()).unwrap_or(Perturbation::Classical),
        };
        let map = HenonMap::new(a, b, perturbation)?;
        Ok(match base {
            Some(m) => map.with_escape_radius(m.escape_radius),
            None => map,
        })
    }
}

/// `--model FILE` or `--m/--b` for the full model.
#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ModelArgs {
    /// model spec JSON: {"M":100,"b":1e-8,"model":"full"}
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long = "M", alias = "m")]
    pub m: Option<u64>,
    #[arg(long = "model-b")]
    pub model_b: Option<f64>,
}

impl ModelArgs {
    pub fn build(&self) -> Result<(SuitabilityModel, ModelSpec), CliError> {
        let mut spec: ModelSpec = match self.model.as_deref() {
            Some(p) => read_json(p)?,
            None => ModelSpec { m: 100, b: 1e-8, model: "full".into(), parabolic: None },
        };
        if let Some(m) = self.m {
            spec.m = m;
        }
        if let Some(b) = self.model_b {
            spec.b = b;
        }
        Ok((SuitabilityModel::from_spec(&spec)?, spec))
    }
}
