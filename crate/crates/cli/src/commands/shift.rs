use std::fmt::Write;
use std::path::PathBuf;

use clap::{Args, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use henon_mme::shift_core::{
    build_mme, chain_entropy, count_loops, equidistribution_cylinder, is_spr, perron, radii,
    shift_periodic_census, CylinderWord, LoopCensus,
};
use henon_mme::symbolic_words::{model_census, Truncation};

use super::{load_graph, positive, ModelArgs};
use crate::error::CliError;
use crate::output::Outcome;
use crate::Ctx;

#[derive(Debug, Clone, Subcommand)]
pub enum Cmd {
    /// Gurevich entropy of a finite strongly connected graph
    Entropy(GraphTol),
    /// the maximal-entropy Markov chain
    Mme(GraphTol),
    /// strong positive recurrence from a loop census
    Spr(SprArgs),
    /// number of points of Fix(sigma^p)
    FixCount(FixArgs),
    /// fraction of Fix(sigma^p) in a cylinder against its MME mass
    Equidist(EquidistArgs),
    /// loop and first-return counts at the base
    Census(CensusArgs),
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct GraphTol {
    /// graph JSON: {"vertices":[...],"arrows":[[a,b],...],"base":"e"}
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
}

pub fn entropy(a: &GraphTol, _: &Ctx) -> Result<Outcome, CliError> {
    positive("tol", a.tol)?;
    let (g, spec) = load_graph(&a.graph)?;
    let s = perron(&g, a.tol)?;
    Outcome::new(&json!({
        "entropy": s.lambda.ln(),
        "lambda": s.lambda,
        "residual": s.residual,
        "iterations": s.iterations,
        "tol": a.tol,
    }))?
    .inputs(&json!({ "graph": spec }))
}

pub fn mme(a: &GraphTol, _: &Ctx) -> Result<Outcome, CliError> {
    positive("tol", a.tol)?;
    let (g, spec) = load_graph(&a.graph)?;
    let s = perron(&g, a.tol)?;
    let chain = build_mme(&s, &g)?;
    let transitions: Vec<_> = chain
        .p
        .iter()
        .enumerate()
        .flat_map(|(i, row)| {
            let chain = &chain;
            row.iter()
                .map(move |&(j, p)| json!({ "from": chain.vertices[i], "to": chain.vertices[j], "p": p }))
        })
        .collect();
    Outcome::new(&json!({
        "entropy": chain.h_top,
        "chain_entropy": chain_entropy(&chain),
        "vertices": chain.vertices,
        "base": chain.vertices[chain.base],
        "pi": chain.pi,
        "transitions": transitions,
        "stationarity_defect_l1": chain.stationarity_defect(),
        "row_sum_defect": chain.row_sum_defect(),
        "spectral_residual": s.residual,
        "tol": a.tol,
    }))?
    .inputs(&json!({ "graph": spec }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TruncationKind {
    Order,
    Depth,
}

/// Census source: a finite graph or the word model's tower.
#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct CensusSource {
    #[arg(long, conflicts_with_all = ["model", "m"])]
    pub graph: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 200)]
    pub horizon: usize,
    /// how the model's countable graph is cut down
    #[arg(long, value_enum, default_value_t = TruncationKind::Order)]
    pub truncation: TruncationKind,
    /// symbols per first-return word for depth truncation
    #[arg(long, default_value_t = 4)]
    pub depth: usize,
}

impl CensusSource {
    pub fn census(&self) -> Result<(LoopCensus, serde_json::Value), CliError> {
        if let Some(path) = &self.graph {
            let (g, spec) = load_graph(path)?;
            return Ok((count_loops(&g, self.horizon)?, json!({ "graph": spec })));
        }
        let (model, spec) = self.model.build()?;
        let trunc = match self.truncation {
            TruncationKind::Order => Truncation::Order { horizon: self.horizon },
            TruncationKind::Depth => Truncation::Depth { depth: self.depth, horizon: self.horizon },
        };
        Ok((model_census(&model, trunc), json!({ "model": spec, "truncation": trunc })))
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SprArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub source: CensusSource,
    /// required gap R_* - R
    #[arg(long, default_value_t = 0.0)]
    pub margin: f64,
}

pub fn spr(a: &SprArgs, _: &Ctx) -> Result<Outcome, CliError> {
    let (census, inputs) = a.source.census()?;
    let report = is_spr(&census, a.margin)?;
    let rad = radii(&census)?;
    let undecided = report.short_horizon_warning;
    Ok(Outcome::new(&json!({ "report": report, "radii": rad }))?
        .inputs(&inputs)?
        .fail_if(undecided, format!("SPR undecidable at horizon {}: tail estimates unstable", census.horizon)))
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct FixArgs {
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long)]
    pub p: usize,
}

pub fn fix_count(a: &FixArgs, _: &Ctx) -> Result<Outcome, CliError> {
    let (g, spec) = load_graph(&a.graph)?;
    let n = shift_periodic_census(&g, a.p)?;
    Outcome::new(&json!({ "p": a.p, "count": n.to_string(), "exact": true }))?.inputs(&json!({ "graph": spec }))
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct EquidistArgs {
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long)]
    pub p: usize,
    /// comma-separated vertex ids
    #[arg(long, value_delimiter = ',', required = true)]
    pub cylinder: Vec<String>,
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
}

pub fn equidist(a: &EquidistArgs, _: &Ctx) -> Result<Outcome, CliError> {
    positive("tol", a.tol)?;
    let (g, spec) = load_graph(&a.graph)?;
    let chain = build_mme(&perron(&g, a.tol)?, &g)?;
    let cyl = CylinderWord::new(&a.cylinder);
    let (empirical, mme) = equidistribution_cylinder(&g, a.p, &cyl, &chain)?;
    Outcome::new(&json!({
        "p": a.p,
        "cylinder": a.cylinder,
        "empirical": empirical,
        "mme": mme,
        "deviation": (empirical - mme).abs(),
        "tol": a.tol,
    }))?
    .inputs(&json!({ "graph": spec }))
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct CensusArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub source: CensusSource,
}

pub fn census(a: &CensusArgs, _: &Ctx) -> Result<Outcome, CliError> {
    let (census, inputs) = a.source.census()?;
    let mut csv = String::from("n,z,zstar\n");
    for n in 1..=census.horizon {
        let _ = writeln!(csv, "{n},{},{}", census.z[n], census.zstar[n]);
    }
    Ok(Outcome::new(&json!({
        "base": census.base,
        "horizon": census.horizon,
        "z": strings(&census.z),
        "zstar": strings(&census.zstar),
        "renewal_holds": census.renewal_holds(),
    }))?
    .inputs(&inputs)?
    .csv(csv))
}

fn strings<T: ToString>(v: &[T]) -> Vec<String> {
    v.iter().map(T::to_string).collect()
}
