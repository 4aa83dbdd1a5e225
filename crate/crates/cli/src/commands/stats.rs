use std::fmt::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use henon_mme::henon_model::{iterate, lyapunov, Vec2};
use henon_mme::measure_stats::{
    box_dimension, clt_test, covariance_decay, renewal_pi_base, return_decay_check, return_decay_for_chain,
    sample_mme_1d, young_dimension, EmpiricalMeasure, Observable, SampleKind,
};
use henon_mme::shift_core::{build_mme, count_loops, perron, radii};

use super::shift::CensusSource;
use super::{load_graph, positive, MapArgs};
use crate::error::CliError;
use crate::output::Outcome;
use crate::Ctx;

#[derive(Debug, Clone, Subcommand)]
pub enum Cmd {
    /// decay of correlations under the maximal-entropy sample
    Mixing(MixingArgs),
    /// normality of Birkhoff sums
    Clt(CltArgs),
    /// box-counting dimension of a point cloud or attractor orbit
    Boxdim(BoxdimArgs),
    /// decay of the first-return tail at the base
    ReturnDecay(ReturnDecayArgs),
    /// h (1/lambda1 - 1/lambda2)
    Young(YoungArgs),
}

/// Observable syntax: `x`, `y`, `abs-x`, `abs-y`, `const:V`, `chebyshev:K`,
/// `bump:C:W`, `indicator:LO:HI:RAMP`; prefix `cob:` for `phi - phi o f`.
pub fn parse_observable(s: &str) -> Result<Observable, CliError> {
    let bad = || CliError::Usage(format!("cannot parse observable {s:?}"));
    if let Some(rest) = s.strip_prefix("cob:") {
        return Ok(Observable::Coboundary(Box::new(parse_observable(rest)?)));
    }
    let parts: Vec<&str> = s.split(':').collect();
    let num = |i: usize| parts.get(i).and_then(|p| p.parse::<f64>().ok()).ok_or_else(bad);
    Ok(match parts[0] {
        "x" if parts.len() == 1 => Observable::Coordinate(0),
        "y" if parts.len() == 1 => Observable::Coordinate(1),
        "abs-x" if parts.len() == 1 => Observable::AbsCoordinate(0),
        "abs-y" if parts.len() == 1 => Observable::AbsCoordinate(1),
        "const" if parts.len() == 2 => Observable::Constant(num(1)?),
        "chebyshev" if parts.len() == 2 => Observable::Chebyshev(parts[1].parse().map_err(|_| bad())?),
        "bump" if parts.len() == 3 => Observable::Bump { center: num(1)?, width: num(2)? },
        "indicator" if parts.len() == 4 => Observable::SmoothedIndicator { lo: num(1)?, hi: num(2)?, ramp: num(3)? },
        _ => return Err(bad()),
    })
}

/// Maximal-entropy sample on `y = 0`: arcsine law, or the chain of `--graph`.
#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SampleArgs {
    /// sample size
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    /// draw binary digits from this graph's maximal-entropy chain
    #[arg(long)]
    pub graph: Option<PathBuf>,
    #[arg(long)]
    pub seed: u64,
}

impl SampleArgs {
    fn draw(&self) -> Result<EmpiricalMeasure, CliError> {
        match &self.graph {
            None => Ok(sample_mme_1d(SampleKind::Arcsine, self.samples, self.seed)?),
            Some(path) => {
                let (g, _) = load_graph(path)?;
                let chain = build_mme(&perron(&g, 1e-12)?, &g)?;
                Ok(sample_mme_1d(SampleKind::Chain(&chain), self.samples, self.seed)?)
            }
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct MixingArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub map: MapArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub sample: SampleArgs,
    #[arg(long, default_value = "abs-x")]
    pub g: String,
    #[arg(long, default_value = "x")]
    pub h: String,
    /// largest lag
    #[arg(long, default_value_t = 20)]
    pub n_max: usize,
}

pub fn mixing(a: &MixingArgs, _: &Ctx) -> Result<Outcome, CliError> {
    let map = a.map.build()?;
    let (g, h) = (parse_observable(&a.g)?, parse_observable(&a.h)?);
    let measure = a.sample.draw()?;
    let fit = covariance_decay(&map, &measure, &g, &h, a.n_max)?;
    let mut csv = String::from("lag,cov,fit\n");
    for (n, v) in fit.lags.iter().zip(&fit.values) {
        let fitted = match (fit.log_amplitude, fit.kappa) {
            (Some(c), Some(k)) => format!("{:e}", (c + *n as f64 * k.ln()).exp()),
            _ => String::new(),
        };
        let _ = writeln!(csv, "{n},{v:e},{fitted}");
    }
    let exponential = fit.kappa.is_some_and(|k| k < 1.0);
    Ok(Outcome::new(&json!({ "fit": fit, "exponential": exponential, "provenance": measure.provenance }))?
        .inputs(&json!({ "map": map, "g": g, "h": h }))?
        .csv(csv))
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct CltArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub map: MapArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub sample: SampleArgs,
    #[arg(long, default_value = "x")]
    pub psi: String,
    /// Birkhoff sum length
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long, default_value_t = 0.01)]
    pub alpha: f64,
}

pub fn clt(a: &CltArgs, _: &Ctx) -> Result<Outcome, CliError> {
    let map = a.map.build()?;
    let psi = parse_observable(&a.psi)?;
    let start = a.sample.draw()?;
    let report = clt_test(&map, &start, &psi, a.n, a.trials, a.alpha, a.sample.seed)?;
    Outcome::new(&report)?.inputs(&json!({ "map": map, "psi": psi }))
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct BoxdimArgs {
    /// CSV of x,y rows (a header line is skipped); otherwise an orbit of the map
    #[arg(long)]
    pub points: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub map: MapArgs,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "0.1,0.05")]
    pub start: Vec<f64>,
    /// orbit length after the transient
    #[arg(long, default_value_t = 200_000)]
    pub n: usize,
    #[arg(long, default_value_t = 1000)]
    pub burn_in: usize,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "0.25,0.125,0.0625,0.03125,0.015625,0.0078125,0.00390625,0.001953125"
    )]
    pub scales: Vec<f64>,
}

fn read_points(path: &Path) -> Result<Vec<Vec2>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut cols = line.split(',').map(|c| c.trim().parse::<f64>());
        match (cols.next(), cols.next()) {
            (Some(Ok(x)), Some(Ok(y))) => out.push([x, y]),
            _ if i == 0 => continue,
            _ => {
                return Err(CliError::Usage(format!("{}: line {}: expected x,y", path.display(), i + 1)));
            }
        }
    }
    Ok(out)
}

pub fn boxdim(a: &BoxdimArgs, _: &Ctx) -> Result<Outcome, CliError> {
    let (points, inputs) = match &a.points {
        Some(path) => (read_points(path)?, json!({ "points": path })),
        None => {
            let map = a.map.build()?;
            let [x, y] = a.start[..] else {
                return Err(CliError::Usage("--start takes X,Y".into()));
            };
            let seg = iterate(&map, [x, y], a.burn_in + a.n);
            if let Some(step) = seg.escaped_at {
                return Err(CliError::Analysis(format!("orbit escaped at step {step}")));
            }
            (seg.points[a.burn_in + 1..].to_vec(), json!({ "map": map }))
        }
    };
    let dim = box_dimension(&points, &a.scales)?;
    Outcome::new(&json!({ "points": points.len(), "box": dim }))?.inputs(&inputs)
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ReturnDecayArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub source: CensusSource,
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
}

pub fn return_decay(a: &ReturnDecayArgs, _: &Ctx) -> Result<Outcome, CliError> {
    positive("tol", a.tol)?;
    if let Some(path) = &a.source.graph {
        let (g, spec) = load_graph(path)?;
        let census = count_loops(&g, a.source.horizon)?;
        let chain = build_mme(&perron(&g, a.tol)?, &g)?;
        let decay = return_decay_for_chain(&chain, &census);
        return Outcome::new(&json!({ "decay": decay, "horizon": census.horizon, "pi_from": "chain" }))?
            .inputs(&json!({ "graph": spec }));
    }
    let (census, inputs) = a.source.census()?;
    // entropy from the root-test radius of sum Z_n x^n
    let h = -radii(&census)?.r.ln();
    let pi = renewal_pi_base(&census, h);
    let decay = return_decay_check(pi, &census, h);
    Outcome::new(&json!({ "decay": decay, "horizon": census.horizon, "pi_from": "renewal" }))?.inputs(&inputs)
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct YoungArgs {
    /// entropy
    #[arg(long)]
    pub h: f64,
    /// given exponents; otherwise measured along an orbit of the map
    #[arg(long, allow_hyphen_values = true)]
    pub lambda1: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub lambda2: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub map: MapArgs,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "0.3,0.0")]
    pub start: Vec<f64>,
    #[arg(long, default_value_t = 100_000)]
    pub n: usize,
}

pub fn young(a: &YoungArgs, _: &Ctx) -> Result<Outcome, CliError> {
    let (l1, l2, inputs) = match (a.lambda1, a.lambda2) {
        (Some(l1), Some(l2)) => (l1, l2, serde_json::Value::Null),
        (None, None) => {
            let map = a.map.build()?;
            let [x, y] = a.start[..] else {
                return Err(CliError::Usage("--start takes X,Y".into()));
            };
            let l = lyapunov(&map, [x, y], a.n)?;
            (l.lambda1, l.lambda2, json!({ "map": map, "steps": l.steps }))
        }
        _ => return Err(CliError::Usage("give both --lambda1 and --lambda2, or neither".into())),
    };
    let d = young_dimension(a.h, l1, l2)?;
    Outcome::new(&json!({ "dimension": d, "h": a.h, "lambda1": l1, "lambda2": l2 }))?.inputs(&inputs)
}
