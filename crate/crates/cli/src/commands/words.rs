use std::fmt::Write;

use clap::{Args, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use henon_mme::symbolic_words::{
    covering_sum, dimension_upper_bound, prime_word_sequence, sharp_sequence, zstar_sequence,
};

use super::ModelArgs;
use crate::error::CliError;
use crate::output::Outcome;
use crate::Ctx;

#[derive(Debug, Clone, Subcommand)]
pub enum Cmd {
    /// regular, prime and first-return word counts by order
    Count(CountArgs),
    /// covering sum over words built from N long blocks
    Covering(CoveringArgs),
    /// dimension upper bound from the decay of covering sums
    Dimension(DimensionArgs),
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct CountArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// largest order counted
    #[arg(long, default_value_t = 40)]
    pub n_max: usize,
}

pub fn count(a: &CountArgs, _: &Ctx) -> Result<Outcome, CliError> {
    let (model, spec) = a.model.build()?;
    let sharp = sharp_sequence(a.n_max, &model);
    let prime = prime_word_sequence(a.n_max, &model);
    let zstar = zstar_sequence(a.n_max, &model);
    let mut csv = String::from("n,sharp,prime,zstar\n");
    let mut rows = Vec::with_capacity(a.n_max);
    for n in 1..=a.n_max {
        let _ = writeln!(csv, "{n},{},{},{}", sharp[n], prime[n], zstar[n]);
        rows.push(json!({
            "n": n,
            "sharp": sharp[n].to_string(),
            "prime": prime[n].to_string(),
            "zstar": zstar[n].to_string(),
        }));
    }
    Ok(Outcome::new(&json!({ "n_max": a.n_max, "exact": true, "counts": rows }))?
        .inputs(&json!({ "model": spec }))?
        .csv(csv))
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct CoveringArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// number of long blocks
    #[arg(long)]
    pub n: usize,
    /// exponent
    #[arg(long)]
    pub s: f64,
}

pub fn covering(a: &CoveringArgs, _: &Ctx) -> Result<Outcome, CliError> {
    let (model, spec) = a.model.build()?;
    let sum = covering_sum(a.n, a.s, &model)?;
    Outcome::new(&json!({ "sum": sum, "upper": sum.upper() }))?.inputs(&json!({ "model": spec }))
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct DimensionArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// increasing exponents in (0, 1]
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "0.02,0.04,0.06,0.08,0.1,0.15,0.2,0.25,0.3,0.35,0.4,0.45,0.5,0.6,0.7,0.8,0.9,1.0"
    )]
    pub s_grid: Vec<f64>,
    #[arg(long, default_value_t = 10)]
    pub n_max: usize,
    /// report three times the critical exponent
    #[arg(long)]
    pub tripled: bool,
}

pub fn dimension(a: &DimensionArgs, _: &Ctx) -> Result<Outcome, CliError> {
    let (model, spec) = a.model.build()?;
    let bound = dimension_upper_bound(&model, &a.s_grid, a.n_max, a.tripled)?;
    Outcome::new(&bound)?.inputs(&json!({ "model": spec }))
}
