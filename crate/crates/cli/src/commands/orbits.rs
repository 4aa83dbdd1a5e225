use std::path::PathBuf;

use clap::{Args, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use henon_mme::henon_model::{iterate, HenonMap, Perturbation};
use henon_mme::orbit_search::{
    census_csv, entropy_from_census, equidistribution_test, fixed_points_1d, periodic_orbits_2d,
    periodic_orbits_refined, PeriodicCensus, Reference, SeedGrid,
};

use super::{positive, read_json, MapArgs};
use crate::error::CliError;
use crate::output::Outcome;
use crate::Ctx;

#[derive(Debug, Clone, Subcommand)]
pub enum Cmd {
    /// points of Fix f^p by seeded Newton search
    Census(CensusArgs),
    /// growth rate of the periodic-point counts
    Entropy(EntropyArgs),
    /// distribution of Fix f^p against a reference measure
    Equidist(EquidistArgs),
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct GridArgs {
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
    #[arg(long, default_value_t = 256)]
    pub nx: usize,
    #[arg(long, default_value_t = 256)]
    pub ny: usize,
    /// also run on the doubled grid and report whether the count moved
    #[arg(long)]
    pub refine: bool,
}

impl GridArgs {
    fn census(&self, map: &HenonMap, p: usize) -> Result<PeriodicCensus, CliError> {
        positive("tol", self.tol)?;
        let grid = SeedGrid { nx: self.nx, ny: self.ny, ..SeedGrid::default() };
        Ok(if self.refine {
            periodic_orbits_refined(map, p, &grid, self.tol)?
        } else {
            periodic_orbits_2d(map, p, &grid, self.tol)?
        })
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct CensusArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub map: MapArgs,
    #[arg(long)]
    pub p: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub grid: GridArgs,
}

pub fn census(a: &CensusArgs, _: &Ctx) -> Result<Outcome, CliError> {
    let map = a.map.build()?;
    let census = a.grid.census(&map, a.p)?;
    let csv = census_csv(&census);
    Ok(Outcome::new(&census)?.inputs(&json!({ "map": map }))?.csv(csv))
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct EntropyArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub map: MapArgs,
    /// periods to census
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5,6,7,8")]
    pub periods: Vec<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    pub grid: GridArgs,
}

pub fn entropy(a: &EntropyArgs, _: &Ctx) -> Result<Outcome, CliError> {
    let map = a.map.build()?;
    let censuses = a
        .periods
        .iter()
        .map(|&p| a.grid.census(&map, p))
        .collect::<Result<Vec<_>, _>>()?;
    let estimate = entropy_from_census(&censuses)?;
    let counts: Vec<_> = censuses
        .iter()
        .map(|c| json!({ "p": c.p, "count_fix": c.count_fix, "stable_under_refinement": c.stable_under_refinement }))
        .collect();
    Outcome::new(&json!({ "estimate": estimate, "counts": counts, "tol": a.grid.tol }))?
        .inputs(&json!({ "map": map }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReferenceKind {
    Arcsine,
    /// a JSON array of sample x values given by --reference-file
    Empirical,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct EquidistArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub map: MapArgs,
    #[arg(long)]
    pub p: usize,
    #[arg(long, value_enum, default_value_t = ReferenceKind::Arcsine)]
    pub reference: ReferenceKind,
    #[arg(long)]
    pub reference_file: Option<PathBuf>,
    /// interval LO,HI whose mass is compared
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub interval: Option<Vec<f64>>,
    #[command(flatten)]
    #[serde(flatten)]
    pub grid: GridArgs,
}

/// x coordinates of every point of `Fix f^p`. On the line `b = 0` the
/// one-dimensional root finder is used; otherwise each orbit from the
/// Newton census contributes all its phases.
fn fixed_xs(map: &HenonMap, p: usize, grid: &GridArgs) -> Result<(Vec<f64>, &'static str), CliError> {
    let one_dim = map.b == 0.0 && matches!(map.perturbation, Perturbation::Zero | Perturbation::Classical);
    if one_dim && p <= 16 {
        positive("tol", grid.tol)?;
        return Ok((fixed_points_1d(map.a, p as u32, grid.tol)?, "interval roots"));
    }
    let census = grid.census(map, p)?;
    let mut xs = Vec::with_capacity(census.count_fix);
    for o in &census.orbits {
        let seg = iterate(map, o.point, o.least_period - 1);
        xs.extend(seg.points.iter().map(|z| z[0]));
    }
    Ok((xs, "newton census"))
}

pub fn equidist(a: &EquidistArgs, _: &Ctx) -> Result<Outcome, CliError> {
    let map = a.map.build()?;
    let reference = match (a.reference, &a.reference_file) {
        (ReferenceKind::Arcsine, _) => Reference::Arcsine,
        (ReferenceKind::Empirical, Some(path)) => Reference::Empirical(read_json(path)?),
        (ReferenceKind::Empirical, None) => {
            return Err(CliError::Usage("--reference empirical needs --reference-file".into()))
        }
    };
    let interval = match a.interval.as_deref() {
        None => None,
        Some([lo, hi]) if lo <= hi => Some((*lo, *hi)),
        Some(_) => return Err(CliError::Usage("--interval takes LO,HI".into())),
    };
    let (xs, method) = fixed_xs(&map, a.p, &a.grid)?;
    let abs = |x: f64| x.abs();
    let square = |x: f64| x * x;
    let observables: [(&str, &dyn Fn(f64) -> f64); 2] = [("abs_x", &abs), ("x_squared", &square)];
    let report = equidistribution_test(&xs, &reference, interval, &observables)?;
    Outcome::new(&json!({ "p": a.p, "method": method, "report": report, "tol": a.grid.tol }))?
        .inputs(&json!({ "map": map }))
}
