//! Statistics of measures of maximal entropy: samplers, correlation decay,
//! central limit tests, Young's dimension formula, box counting, and decay of
//! return times.

use std::collections::HashSet;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::henon_model::{HenonMap, Vec2};
use crate::numeric::{big_ln, fit_line, serde_f64};
use crate::shift_core::{LoopCensus, MaxEntropyChain};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("need lambda1 > 0 > lambda2, got {0} and {1}")]
    ExponentSigns(f64, f64),
    #[error("only {0} usable scales")]
    TooFewScales(usize),
}

pub type Result<T> = std::result::Result<T, StatsError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    PeriodicCensus,
    ChainSimulation,
    InverseCdf,
}

/// Weighted point set; weights are nonnegative and sum to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalMeasure {
    pub points: Vec<Vec2>,
    pub weights: Vec<f64>,
    pub provenance: Provenance,
}

impl EmpiricalMeasure {
    pub fn uniform(points: Vec<Vec2>, provenance: Provenance) -> Result<Self> {
        if points.is_empty() {
            return Err(StatsError::InvalidInput("empty measure".into()));
        }
        let w = 1.0 / points.len() as f64;
        Ok(EmpiricalMeasure {
            weights: vec![w; points.len()],
            points,
            provenance,
        })
    }

    pub fn weighted(points: Vec<Vec2>, weights: Vec<f64>, provenance: Provenance) -> Result<Self> {
        if points.is_empty() || points.len() != weights.len() {
            return Err(StatsError::InvalidInput("points and weights mismatch".into()));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(StatsError::InvalidInput("negative weight".into()));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(StatsError::InvalidInput("weights sum to zero".into()));
        }
        Ok(EmpiricalMeasure {
            weights: weights.into_iter().map(|w| w / total).collect(),
            points,
            provenance,
        })
    }

    /// Arcsine measure at the deterministic quantiles `2 cos(pi (k + 1/2) / n)`.
    pub fn arcsine_quantiles(n: usize) -> Result<Self> {
        let pts = (0..n)
            .map(|k| [2.0 * (PI * (k as f64 + 0.5) / n as f64).cos(), 0.0])
            .collect();
        EmpiricalMeasure::uniform(pts, Provenance::InverseCdf)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn expect(&self, f: impl Fn(Vec2) -> f64 + Sync) -> f64 {
        // evaluate in parallel, sum in a fixed order
        let terms: Vec<f64> = self.points.par_iter().zip(&self.weights).map(|(z, w)| w * f(*z)).collect();
        terms.iter().sum()
    }

    /// `1 / sqrt(effective sample size)`
    fn inverse_root_ess(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum::<f64>().sqrt()
    }
}

pub enum SampleKind<'a> {
    /// `x = 2 cos(pi U)` with `U` uniform
    Arcsine,
    /// binary digits from the chain's vertex parities, read as an angle
    Chain(&'a MaxEntropyChain),
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn chain_step(chain: &MaxEntropyChain, i: usize, u: f64) -> usize {
    let mut acc = 0.0;
    for &(j, p) in &chain.p[i] {
        acc += p;
        if u < acc {
            return j;
        }
    }
    chain.p[i].last().map(|x| x.0).unwrap_or(i)
}

/// `n` points of the maximal entropy measure of `x^2 - 2` on the line `y = 0`.
/// Point `k` uses stream `k` of the seeded generator.
pub fn sample_mme_1d(kind: SampleKind<'_>, n: usize, seed: u64) -> Result<EmpiricalMeasure> {
    if n == 0 {
        return Err(StatsError::InvalidInput("n must be positive".into()));
    }
    let (points, provenance): (Vec<Vec2>, _) = match kind {
        SampleKind::Arcsine => (
            (0..n)
                .into_par_iter()
                .map(|k| {
                    let u: f64 = stream_rng(seed, k as u64).random();
                    [2.0 * (PI * u).cos(), 0.0]
                })
                .collect(),
            Provenance::InverseCdf,
        ),
        SampleKind::Chain(chain) => {
            if chain.pi.is_empty() {
                return Err(StatsError::InvalidInput("empty chain".into()));
            }
            let pts = (0..n)
                .into_par_iter()
                .map(|k| {
                    let mut rng = stream_rng(seed, k as u64);
                    // stationary start
                    let u: f64 = rng.random();
                    let mut acc = 0.0;
                    let mut v = chain.pi.len() - 1;
                    for (i, p) in chain.pi.iter().enumerate() {
                        acc += p;
                        if u < acc {
                            v = i;
                            break;
                        }
                    }
                    let mut theta = 0.0;
                    let mut scale = 0.5;
                    for _ in 0..53 {
                        theta += scale * (v % 2) as f64;
                        scale *= 0.5;
                        v = chain_step(chain, v, rng.random());
                    }
                    [2.0 * (2.0 * PI * theta).cos(), 0.0]
                })
                .collect();
            (pts, Provenance::ChainSimulation)
        }
    };
    EmpiricalMeasure::uniform(points, provenance)
}

/// Observables evaluated on points of the plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    Constant(f64),
    /// coordinate `i`
    Coordinate(usize),
    AbsCoordinate(usize),
    /// tent of height 1 and half-width `width` in `x`
    Bump { center: f64, width: f64 },
    /// indicator of `[lo, hi]` in `x` with linear ramps of length `ramp`
    SmoothedIndicator { lo: f64, hi: f64, ramp: f64 },
    /// `2 cos(k theta)` with `x = 2 cos theta`
    Chebyshev(u32),
    /// `phi - phi o f`
    Coboundary(Box<Observable>),
}

impl Observable {
    pub fn eval(&self, z: Vec2, map: &dyn Fn(Vec2) -> Vec2) -> f64 {
        match self {
            Observable::Constant(c) => *c,
            Observable::Coordinate(i) => z[*i],
            Observable::AbsCoordinate(i) => z[*i].abs(),
            Observable::Bump { center, width } => (1.0 - (z[0] - center).abs() / width).max(0.0),
            Observable::SmoothedIndicator { lo, hi, ramp } => {
                let x = z[0];
                let up = ((x - lo) / ramp + 1.0).clamp(0.0, 1.0);
                let down = ((hi - x) / ramp + 1.0).clamp(0.0, 1.0);
                up.min(down)
            }
            Observable::Chebyshev(k) => 2.0 * (*k as f64 * (z[0] / 2.0).clamp(-1.0, 1.0).acos()).cos(),
            Observable::Coboundary(phi) => phi.eval(z, map) - phi.eval(map(z), map),
        }
    }
}

/// Correlation decay `|Cov_n|` with an exponential fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub lags: Vec<usize>,
    pub values: Vec<f64>,
    /// lags entering the fit
    pub used: Vec<bool>,
    pub noise_floor: f64,
    pub kappa: Option<f64>,
    /// `log C` in `|Cov_n| ~ C kappa^n`
    pub log_amplitude: Option<f64>,
    pub r_squared: Option<f64>,
    pub warning: Option<String>,
}

fn fit_decay(lags: Vec<usize>, values: Vec<f64>, noise_floor: f64) -> DecayFit {
    let used: Vec<bool> = values.iter().map(|v| v.abs() > noise_floor && *v != 0.0).collect();
    let xs: Vec<f64> = lags.iter().zip(&used).filter(|(_, u)| **u).map(|(n, _)| *n as f64).collect();
    let ys: Vec<f64> = values.iter().zip(&used).filter(|(_, u)| **u).map(|(v, _)| v.abs().ln()).collect();
    let fit = if xs.len() >= 2 { fit_line(&xs, &ys) } else { None };
    DecayFit {
        warning: fit.is_none().then(|| format!("{} lags above the noise floor", xs.len())),
        kappa: fit.map(|f| f.slope.exp()),
        log_amplitude: fit.map(|f| f.intercept),
        r_squared: fit.map(|f| f.r_squared),
        lags,
        values,
        used,
        noise_floor,
    }
}

/// `Cov_n = E[g . h o f^n] - E[g] E[h]` for `n = 1..=n_max` under the measure.
/// The fit uses lags whose value exceeds `3 sd(g) sd(h) / sqrt(ESS)`.
pub fn covariance_decay_with(
    step: &(dyn Fn(Vec2) -> Vec2 + Sync),
    measure: &EmpiricalMeasure,
    g: &Observable,
    h: &Observable,
    n_max: usize,
) -> Result<DecayFit> {
    if n_max == 0 {
        return Err(StatsError::InvalidInput("n_max must be positive".into()));
    }
    let gv: Vec<f64> = measure.points.par_iter().map(|z| g.eval(*z, step)).collect();
    let mean = |v: &[f64]| v.iter().zip(&measure.weights).map(|(x, w)| x * w).sum::<f64>();
    let eg = mean(&gv);
    let hv0: Vec<f64> = measure.points.par_iter().map(|z| h.eval(*z, step)).collect();
    let eh = mean(&hv0);
    let var = |v: &[f64], m: f64| v.iter().zip(&measure.weights).map(|(x, w)| w * (x - m).powi(2)).sum::<f64>();
    let floor = 3.0 * var(&gv, eg).sqrt() * var(&hv0, eh).sqrt() * measure.inverse_root_ess();
    let values: Vec<f64> = (1..=n_max)
        .into_par_iter()
        .map(|n| {
            // centred by the sample mean of h o f^n; the sample is only
            // approximately invariant
            measure
                .points
                .iter()
                .zip(&gv)
                .zip(&measure.weights)
                .map(|((z, gz), w)| {
                    let mut y = *z;
                    for _ in 0..n {
                        y = step(y);
                    }
                    w * (gz - eg) * h.eval(y, step)
                })
                .sum::<f64>()
        })
        .collect();
    Ok(fit_decay((1..=n_max).collect(), values, floor))
}

pub fn covariance_decay(
    map: &HenonMap,
    measure: &EmpiricalMeasure,
    g: &Observable,
    h: &Observable,
    n_max: usize,
) -> Result<DecayFit> {
    covariance_decay_with(&|z| map.apply(z), measure, g, h, n_max)
}

/// `Cov(g, h)` at lag zero, directly.
pub fn covariance(measure: &EmpiricalMeasure, g: &Observable, h: &Observable, step: &(dyn Fn(Vec2) -> Vec2 + Sync)) -> f64 {
    let eg = measure.expect(|z| g.eval(z, step));
    let eh = measure.expect(|z| h.eval(z, step));
    measure.expect(|z| (g.eval(z, step) - eg) * (h.eval(z, step) - eh))
}

/// `P(K > t)` for the Kolmogorov distribution.
pub fn kolmogorov_sf(t: f64) -> f64 {
    if t <= 0.0 {
        return 1.0;
    }
    if t < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * t * t).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// One-sample KS distance of `xs` against a continuous CDF.
pub fn ks_statistic(xs: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, x)| {
            let f = cdf(*x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// KS p-value with the Stephens small-sample correction.
pub fn ks_pvalue(d: f64, n: usize) -> f64 {
    let rn = (n as f64).sqrt();
    kolmogorov_sf((rn + 0.12 + 0.11 / rn) * d)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "verdict")]
pub enum CltVerdict {
    Pass,
    Fail,
    /// normalised sums collapse; no normality verdict
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CltReport {
    pub n: usize,
    pub trials: usize,
    pub alpha: f64,
    pub center: f64,
    pub sigma: f64,
    pub ks_distance: Option<f64>,
    pub p_value: Option<f64>,
    pub verdict: CltVerdict,
    pub seed: u64,
}

/// Normalised Birkhoff sums `(1/sqrt n) sum_{i=1}^n (psi o f^i - E psi)` from
/// `trials` starting points drawn from `start` (trial `k` uses stream `k`),
/// tested for normality with the estimated variance.
#[allow(clippy::too_many_arguments)]
pub fn clt_test_with(
    step: &(dyn Fn(Vec2) -> Vec2 + Sync),
    start: &EmpiricalMeasure,
    psi: &Observable,
    n: usize,
    trials: usize,
    alpha: f64,
    seed: u64,
) -> Result<CltReport> {
    if trials < 500 {
        return Err(StatsError::InvalidInput(format!("trials = {trials} is below 500")));
    }
    if n == 0 || !(alpha > 0.0 && alpha < 1.0) {
        return Err(StatsError::InvalidInput("need n > 0 and alpha in (0, 1)".into()));
    }
    let center = start.expect(|z| psi.eval(z, step));
    let cum: Vec<f64> = {
        let mut acc = 0.0;
        start
            .weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect()
    };
    let sums: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|k| {
            let u: f64 = stream_rng(seed, k as u64).random();
            let idx = cum.partition_point(|c| *c <= u).min(start.len() - 1);
            let mut z = start.points[idx];
            let mut s = 0.0;
            for _ in 0..n {
                z = step(z);
                s += psi.eval(z, step) - center;
            }
            s / (n as f64).sqrt()
        })
        .collect();
    let mean = sums.iter().sum::<f64>() / trials as f64;
    let sigma = (sums.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (trials - 1) as f64).sqrt();
    // a coboundary telescopes: the sums are O(1/sqrt n)
    let scale = start.expect(|z| (psi.eval(z, step) - center).powi(2)).sqrt();
    if !(sigma > 1e-6) || sigma < 10.0 * scale / (n as f64).sqrt() {
        return Ok(CltReport {
            n,
            trials,
            alpha,
            center,
            sigma,
            ks_distance: None,
            p_value: None,
            verdict: CltVerdict::Degenerate,
            seed,
        });
    }
    let normal = Normal::new(mean, sigma).map_err(|e| StatsError::InvalidInput(e.to_string()))?;
    let d = ks_statistic(&sums, |x| normal.cdf(x));
    let p = ks_pvalue(d, trials);
    Ok(CltReport {
        n,
        trials,
        alpha,
        center,
        sigma,
        ks_distance: Some(d),
        p_value: Some(p),
        verdict: if p >= alpha { CltVerdict::Pass } else { CltVerdict::Fail },
        seed,
    })
}

pub fn clt_test(
    map: &HenonMap,
    start: &EmpiricalMeasure,
    psi: &Observable,
    n: usize,
    trials: usize,
    alpha: f64,
    seed: u64,
) -> Result<CltReport> {
    clt_test_with(&|z| map.apply(z), start, psi, n, trials, alpha, seed)
}

/// `d = h (1/lambda1 - 1/lambda2)`, with `lambda2 = -inf` read as `1/lambda2 = 0`.
pub fn young_dimension(h: f64, lambda1: f64, lambda2: f64) -> Result<f64> {
    if !(lambda1 > 0.0 && lambda2 < 0.0) || lambda1.is_nan() || lambda2.is_nan() {
        return Err(StatsError::ExponentSigns(lambda1, lambda2));
    }
    let inv2 = if lambda2 == f64::NEG_INFINITY { 0.0 } else { 1.0 / lambda2 };
    Ok(h * (1.0 / lambda1 - inv2))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxDimension {
    pub dimension: f64,
    pub r_squared: f64,
    /// `(scale, occupied boxes, used in the fit)`
    pub counts: Vec<(f64, usize, bool)>,
}

/// Least-squares slope of `log N(eps)` against `log(1/eps)`. Scales whose
/// count is below 4 or above a fifth of the sample are saturated and skipped.
pub fn box_dimension(points: &[Vec2], scales: &[f64]) -> Result<BoxDimension> {
    if points.len() < 10_000 {
        return Err(StatsError::InvalidInput(format!("{} points, need 10^4", points.len())));
    }
    if scales.len() < 5 || scales.iter().any(|s| !(*s > 0.0)) {
        return Err(StatsError::InvalidInput("need at least five positive scales".into()));
    }
    let x0 = points.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
    let y0 = points.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min);
    let counts: Vec<(f64, usize, bool)> = scales
        .par_iter()
        .map(|&eps| {
            let cells: HashSet<(i64, i64)> = points
                .iter()
                .map(|p| (((p[0] - x0) / eps).floor() as i64, ((p[1] - y0) / eps).floor() as i64))
                .collect();
            let n = cells.len();
            (eps, n, n >= 4 && n <= points.len() / 5)
        })
        .collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) = counts
        .iter()
        .filter(|c| c.2)
        .map(|(e, n, _)| ((1.0 / e).ln(), (*n as f64).ln()))
        .unzip();
    if xs.len() < 3 {
        return Err(StatsError::TooFewScales(xs.len()));
    }
    let fit = fit_line(&xs, &ys).ok_or(StatsError::TooFewScales(xs.len()))?;
    Ok(BoxDimension {
        dimension: fit.slope,
        r_squared: fit.r_squared,
        counts,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnDecay {
    pub fit: DecayFit,
    pub pi_base: f64,
    #[serde(with = "serde_f64")]
    pub h_top: f64,
    /// finitely many nonzero terms: decay holds trivially
    pub degenerate: bool,
    pub exponential: bool,
}

/// `pi_base = 1 / sum_n n Z*_n e^{-n h}` for a renewal chain.
pub fn renewal_pi_base(census: &LoopCensus, h_top: f64) -> f64 {
    let s: f64 = census
        .zstar
        .iter()
        .enumerate()
        .skip(1)
        .map(|(n, z)| {
            let l = big_ln(z);
            if l == f64::NEG_INFINITY {
                0.0
            } else {
                (l + (n as f64).ln() - n as f64 * h_top).exp()
            }
        })
        .sum();
    1.0 / s
}

/// Fits `pi_e Z*_n e^{-n h}`; the decay is exponential if the fitted rate is
/// below one.
pub fn return_decay_check(pi_base: f64, census: &LoopCensus, h_top: f64) -> ReturnDecay {
    let lags: Vec<usize> = (1..=census.horizon).collect();
    let values: Vec<f64> = lags
        .iter()
        .map(|&n| {
            let l = big_ln(&census.zstar[n]);
            if l == f64::NEG_INFINITY {
                0.0
            } else {
                (pi_base.ln() + l - n as f64 * h_top).exp()
            }
        })
        .collect();
    let nonzero = values.iter().filter(|v| **v > 0.0).count();
    let fit = fit_decay(lags, values, 0.0);
    let degenerate = nonzero < 3;
    let exponential = degenerate || fit.kappa.is_some_and(|k| k < 1.0);
    ReturnDecay {
        fit,
        pi_base,
        h_top,
        degenerate,
        exponential,
    }
}

pub fn return_decay_for_chain(chain: &MaxEntropyChain, census: &LoopCensus) -> ReturnDecay {
    return_decay_check(chain.pi[chain.base], census, chain.h_top)
}

/// `x -> x^2 - 2` on the line `y = 0`.
pub fn chebyshev(z: Vec2) -> Vec2 {
    [z[0] * z[0] - 2.0, 0.0]
}
