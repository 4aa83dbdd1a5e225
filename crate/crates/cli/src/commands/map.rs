use clap::{Args, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use henon_mme::henon_model::{
    check_expansion_g4, check_g6, lyapunov as lyapunov_exponents, ConeConvention, ConeField, HenonMap,
    RegionSample,
};
use henon_mme::symbolic_words::Params;

use super::MapArgs;
use crate::error::CliError;
use crate::output::Outcome;
use crate::Ctx;

#[derive(Debug, Clone, Subcommand)]
pub enum Cmd {
    /// first and second derivative bounds on the working region
    G6(G6Args),
    /// cone invariance and expansion along n_s steps at sampled points
    Expansion(ExpansionArgs),
    /// Lyapunov exponents along an orbit
    Lyapunov(LyapunovArgs),
}

/// Model constant `M`; `b` is taken from the map.
fn params(m: u64, map: &HenonMap) -> Result<Params, CliError> {
    Ok(Params::new(m, map.b.abs())?)
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct G6Args {
    #[command(flatten)]
    #[serde(flatten)]
    pub map: MapArgs,
    #[arg(long = "M", default_value_t = 100)]
    pub m: u64,
    #[arg(long, default_value_t = 200)]
    pub nx: usize,
    #[arg(long, default_value_t = 50)]
    pub ny: usize,
}

pub fn g6(a: &G6Args, _: &Ctx) -> Result<Outcome, CliError> {
    let map = a.map.build()?;
    let p = params(a.m, &map)?;
    let report = check_g6(&map, &p, a.nx, a.ny);
    Outcome::new(&report)?.inputs(&json!({ "map": map, "params": p }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Convention {
    Horizontal,
    Vertical,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ExpansionArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub map: MapArgs,
    #[arg(long = "M", default_value_t = 100)]
    pub m: u64,
    /// x range of the sampled rectangle
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "0.5,2.0")]
    pub x: Vec<f64>,
    /// y range of the sampled rectangle
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "-0.001,0.001")]
    pub y: Vec<f64>,
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    #[arg(long, default_value_t = 2)]
    pub n_s: usize,
    #[arg(long, default_value_t = 0.1)]
    pub half_angle: f64,
    #[arg(long, value_enum, default_value_t = Convention::Horizontal)]
    pub cone: Convention,
    #[arg(long)]
    pub seed: u64,
    /// include every sample in the output
    #[arg(long)]
    pub per_sample: bool,
}

fn range(name: &str, v: &[f64]) -> Result<(f64, f64), CliError> {
    match v {
        [lo, hi] if lo <= hi => Ok((*lo, *hi)),
        _ => Err(CliError::Usage(format!("--{name} takes LO,HI"))),
    }
}

pub fn expansion(a: &ExpansionArgs, _: &Ctx) -> Result<Outcome, CliError> {
    let map = a.map.build()?;
    let p = params(a.m, &map)?;
    let convention = match a.cone {
        Convention::Horizontal => ConeConvention::Horizontal,
        Convention::Vertical => ConeConvention::Vertical,
    };
    let cone = ConeField::new(convention, a.half_angle)?;
    let sample = RegionSample::random(range("x", &a.x)?, range("y", &a.y)?, a.samples, &cone, a.seed);
    let mut report = check_expansion_g4(&map, &sample, a.n_s, &cone, &p);
    let failed = report.samples.iter().filter(|s| !(s.cone_ok && s.growth_ok)).count();
    if !a.per_sample {
        report.samples.clear();
    }
    Outcome::new(&json!({ "report": report, "failed": failed, "c": p.c() }))?
        .inputs(&json!({ "map": map, "params": p, "cone": cone }))
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct LyapunovArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub map: MapArgs,
    /// starting point X,Y
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "0.3,0.0")]
    pub start: Vec<f64>,
    #[arg(long, default_value_t = 100_000)]
    pub n: usize,
}

pub fn lyapunov(a: &LyapunovArgs, _: &Ctx) -> Result<Outcome, CliError> {
    let map = a.map.build()?;
    let [x, y] = a.start[..] else {
        return Err(CliError::Usage("--start takes X,Y".into()));
    };
    let l = lyapunov_exponents(&map, [x, y], a.n)?;
    let identity_error = if l.lambda2.is_finite() {
        Some((l.lambda1 + l.lambda2 - l.mean_log_det).abs())
    } else {
        None
    };
    Outcome::new(&json!({ "lyapunov": l, "identity_error": identity_error }))?.inputs(&json!({ "map": map }))
}
