//! Periodic-orbit censuses, entropy from periodic counts, equidistribution of
//! periodic points, and the exceptional-orbit bound.
//!
//! Newton censuses are lower bounds: completeness is judged by stability of
//! the count under refinement of the seed grid.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::henon_model::{HenonMap, Mat2, Perturbation, Vec2};
use crate::numeric::{fit_line, log_add_exp, LineFit};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OrbitError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("found {found} roots of f^{p}(x) = x at a = -2, expected {expected}")]
    RootCountMismatch { p: u32, found: usize, expected: usize },
    #[error("empty census")]
    EmptyCensus,
}

pub type Result<T> = std::result::Result<T, OrbitError>;

fn iterate_1d(a: f64, x: f64, p: u32) -> (f64, f64) {
    // value and derivative of f_a^p
    let (mut v, mut d) = (x, 1.0);
    for _ in 0..p {
        d *= 2.0 * v;
        v = v * v + a;
    }
    (v, d)
}

/// Real backward orbit of 0 inside `[lo, hi]`: every `x` with `f^j(x) = 0`
/// for some `j < p`. These are the turning points of `f^p`.
fn turning_points(a: f64, p: u32, lo: f64, hi: f64) -> Vec<f64> {
    let mut level = vec![0.0f64];
    let mut all = vec![0.0f64];
    for _ in 1..p {
        let mut next = Vec::with_capacity(level.len() * 2);
        for &y in &level {
            let t = y - a;
            if t >= 0.0 {
                let r = t.sqrt();
                for x in [r, -r] {
                    if x >= lo && x <= hi {
                        next.push(x);
                    }
                }
            }
        }
        next.sort_by(f64::total_cmp);
        next.dedup();
        all.extend_from_slice(&next);
        level = next;
    }
    all.retain(|x| *x > lo && *x < hi);
    all.sort_by(f64::total_cmp);
    all.dedup();
    all
}

/// Fixed points of `x -> cos`-coordinates of angle doubling: `2 cos(2 pi k / (2^p -+ 1))`.
pub fn chebyshev_roots(p: u32) -> Vec<f64> {
    let n = 1u64 << p;
    let mut v = Vec::with_capacity(n as usize);
    for k in 0..(n / 2) {
        v.push(2.0 * (2.0 * PI * k as f64 / (n - 1) as f64).cos());
    }
    for k in 1..=(n / 2) {
        v.push(2.0 * (2.0 * PI * k as f64 / (n + 1) as f64).cos());
    }
    v.sort_by(f64::total_cmp);
    v
}

/// All real roots of `f_a^p(x) = x` on `[-2 - d, 2 + d]`.
///
/// `f^p` is monotone between consecutive turning points; each lap is sampled,
/// sign changes are bisected and polished by safeguarded Newton.
pub fn fixed_points_1d(a: f64, p: u32, tol: f64) -> Result<Vec<f64>> {
    if p == 0 || p > 16 {
        return Err(OrbitError::InvalidInput(format!("period {p} outside 1..=16")));
    }
    if !(tol > 0.0) {
        return Err(OrbitError::InvalidInput("tol must be positive".into()));
    }
    let d = 1e-6;
    let (lo, hi) = (-2.0 - d, 2.0 + d);
    let mut edges = vec![lo];
    edges.extend(turning_points(a, p, lo, hi));
    edges.push(hi);
    let g = |x: f64| iterate_1d(a, x, p).0 - x;
    let per_lap = 8usize;
    let mut roots: Vec<f64> = edges
        .par_windows(2)
        .flat_map_iter(|w| {
            let (l, r) = (w[0], w[1]);
            let mut out = Vec::new();
            let mut prev_x = l;
            let mut prev_g = g(l);
            if prev_g == 0.0 {
                out.push(l);
            }
            for i in 1..=per_lap {
                let x = if i == per_lap { r } else { l + (r - l) * i as f64 / per_lap as f64 };
                let gx = g(x);
                if gx == 0.0 {
                    out.push(x);
                } else if prev_g != 0.0 && (prev_g < 0.0) != (gx < 0.0) {
                    out.push(polish_bracket(a, p, prev_x, x, tol));
                }
                prev_x = x;
                prev_g = gx;
            }
            out
        })
        .collect();
    roots.sort_by(f64::total_cmp);
    let merge = (10.0 * tol).max(1e-13);
    roots.dedup_by(|x, y| (*x - *y).abs() <= merge);
    if a == -2.0 {
        let expected = 1usize << p;
        if roots.len() != expected {
            return Err(OrbitError::RootCountMismatch { p, found: roots.len(), expected });
        }
    }
    Ok(roots)
}

fn polish_bracket(a: f64, p: u32, mut l: f64, mut r: f64, tol: f64) -> f64 {
    let g = |x: f64| iterate_1d(a, x, p);
    let gl = g(l).0 - l;
    let mut x = 0.5 * (l + r);
    for _ in 0..200 {
        let (v, dv) = g(x);
        let gx = v - x;
        if gx == 0.0 {
            return x;
        }
        if (gx < 0.0) == (gl < 0.0) {
            l = x;
        } else {
            r = x;
        }
        let newton = x - gx / (dv - 1.0);
        let next = if newton.is_finite() && newton > l && newton < r { newton } else { 0.5 * (l + r) };
        if (next - x).abs() <= tol * 1e-3 || (r - l) <= tol * 1e-3 {
            return next;
        }
        x = next;
    }
    x
}

/// Grid of Newton seeds on `[x0, x1] x [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeedGrid {
    pub x: (f64, f64),
    pub y: (f64, f64),
    pub nx: usize,
    pub ny: usize,
}

impl Default for SeedGrid {
    fn default() -> Self {
        SeedGrid { x: (-3.0, 3.0), y: (-3.0, 3.0), nx: 256, ny: 256 }
    }
}

impl SeedGrid {
    pub fn refined(&self) -> Self {
        SeedGrid { nx: self.nx * 2, ny: self.ny * 2, ..*self }
    }

    fn points(&self) -> Vec<Vec2> {
        let lin = |(lo, hi): (f64, f64), n: usize, i: usize| {
            if n <= 1 {
                0.5 * (lo + hi)
            } else {
                lo + (hi - lo) * i as f64 / (n - 1) as f64
            }
        };
        let mut v = Vec::with_capacity(self.nx * self.ny);
        for i in 0..self.nx {
            for j in 0..self.ny {
                v.push([lin(self.x, self.nx, i), lin(self.y, self.ny, j)]);
            }
        }
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Multiplier {
    pub re: f64,
    pub im: f64,
}

impl Multiplier {
    pub fn modulus(&self) -> f64 {
        self.re.hypot(self.im)
    }
}

impl std::fmt::Display for Multiplier {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.im == 0.0 {
            write!(f, "{}", self.re)
        } else {
            write!(f, "{}{:+}i", self.re, self.im)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicOrbit {
    /// phase with the smallest `x` coordinate
    pub point: Vec2,
    pub least_period: usize,
    pub multipliers: [Multiplier; 2],
    pub residual: f64,
    pub hyperbolic: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicCensus {
    pub p: usize,
    pub orbits: Vec<PeriodicOrbit>,
    /// points of `Fix f^p` found (a lower bound)
    pub count_fix: usize,
    pub tol: f64,
    /// residual floor from rounding in `f^p`, used when above `tol`
    pub max_accepted_residual: f64,
    pub seeds: usize,
    /// count unchanged when the seed grid is doubled; `None` if not checked
    pub stable_under_refinement: Option<bool>,
}

fn jac_power(map: &HenonMap, z: Vec2, p: usize) -> (Vec2, Mat2, f64) {
    // returns f^p(z), T_z f^p and sum_k ||T f^k|| |f^k z| as a rounding scale
    let mut m = [[1.0, 0.0], [0.0, 1.0]];
    let mut cur = z;
    let mut scale = 0.0;
    for _ in 0..p {
        let j = map.jacobian(cur);
        m = [
            [j[0][0] * m[0][0] + j[0][1] * m[1][0], j[0][0] * m[0][1] + j[0][1] * m[1][1]],
            [j[1][0] * m[0][0] + j[1][1] * m[1][0], j[1][0] * m[0][1] + j[1][1] * m[1][1]],
        ];
        cur = map.apply(cur);
        scale += cur[0].abs().max(cur[1].abs()).max(1.0);
    }
    let growth = m.iter().flatten().fold(1.0f64, |acc, v| acc.max(v.abs()));
    (cur, m, scale * growth)
}

fn eigenvalues(m: &Mat2) -> [Multiplier; 2] {
    let tr = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let disc = tr * tr / 4.0 - det;
    if disc >= 0.0 {
        let s = disc.sqrt();
        // stable pair: the small root from the product
        let big = tr / 2.0 + if tr >= 0.0 { s } else { -s };
        let small = if big != 0.0 { det / big } else { 0.0 };
        let mut v = [Multiplier { re: big, im: 0.0 }, Multiplier { re: small, im: 0.0 }];
        if v[0].modulus() < v[1].modulus() {
            v.swap(0, 1);
        }
        v
    } else {
        let s = (-disc).sqrt();
        [Multiplier { re: tr / 2.0, im: s }, Multiplier { re: tr / 2.0, im: -s }]
    }
}

fn residual(map: &HenonMap, z: Vec2, p: usize) -> f64 {
    let (w, _, _) = jac_power(map, z, p);
    (w[0] - z[0]).hypot(w[1] - z[1])
}

struct Converged {
    z: Vec2,
    /// residual floor from rounding in `f^p`
    floor: f64,
    /// length of the next Newton correction, a position error estimate
    pos_err: f64,
}

fn newton_step(m: &Mat2, f: Vec2) -> Option<Vec2> {
    let j = [[m[0][0] - 1.0, m[0][1]], [m[1][0], m[1][1] - 1.0]];
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    Some([
        -(j[1][1] * f[0] - j[0][1] * f[1]) / det,
        -(-j[1][0] * f[0] + j[0][0] * f[1]) / det,
    ])
}

/// Damped Newton on `f^p(z) - z`, step length at most 0.1, 100 iterations.
fn newton(map: &HenonMap, z0: Vec2, p: usize, tol: f64) -> Option<Converged> {
    let mut z = z0;
    for _ in 0..100 {
        let (w, m, scale) = jac_power(map, z, p);
        if !(w[0].is_finite() && w[1].is_finite()) || w[0].abs() > 1e6 || w[1].abs() > 1e6 {
            return None;
        }
        let f = [w[0] - z[0], w[1] - z[1]];
        let res = f[0].hypot(f[1]);
        let floor = 16.0 * f64::EPSILON * scale;
        let mut dz = newton_step(&m, f)?;
        if res <= tol.max(floor) {
            return Some(Converged { z, floor, pos_err: dz[0].hypot(dz[1]) });
        }
        let len = dz[0].hypot(dz[1]);
        if len > 0.1 {
            dz = [dz[0] * 0.1 / len, dz[1] * 0.1 / len];
        }
        z = [z[0] + dz[0], z[1] + dz[1]];
        if !(z[0].abs() <= map.escape_radius && z[1].abs() <= map.escape_radius) {
            return None;
        }
    }
    None
}

/// Points closer than this are one solution.
fn merge_radius(pos_err: f64) -> f64 {
    (100.0 * pos_err).max(1e-10)
}

/// Continuation seeds: the `b = 0` roots, lifted to the classical graph
/// `y = b x_{-1}`.
fn continuation_seeds(map: &HenonMap, p: usize) -> Vec<Vec2> {
    if p > 16 {
        return Vec::new();
    }
    let Ok(roots) = fixed_points_1d(map.a, p as u32, 1e-12) else {
        return Vec::new();
    };
    roots
        .into_iter()
        .map(|x| match map.perturbation {
            Perturbation::Classical => {
                // predecessor on the one-dimensional orbit
                let mut v = x;
                for _ in 0..(p - 1) {
                    v = v * v + map.a;
                }
                [x, map.b * v]
            }
            _ => [x, 0.0],
        })
        .collect()
}

/// Newton census of `Fix f^p` from grid and continuation seeds; converged
/// points are merged by orbit, each orbit stored at its phase of least `x`.
pub fn periodic_orbits_2d(map: &HenonMap, p: usize, grid: &SeedGrid, tol: f64) -> Result<PeriodicCensus> {
    if p == 0 || p > 12 {
        return Err(OrbitError::InvalidInput(format!("period {p} outside 1..=12")));
    }
    if !(tol > 0.0) {
        return Err(OrbitError::InvalidInput("tol must be positive".into()));
    }
    let mut seeds = grid.points();
    seeds.extend(continuation_seeds(map, p));
    let found: Vec<Option<Converged>> = seeds.par_iter().map(|&z| newton(map, z, p, tol)).collect();
    // canonical phases
    let mut points: Vec<(Vec2, usize, f64, f64)> = Vec::new();
    let mut max_err = 0.0f64;
    for c in found.into_iter().flatten() {
        let z = c.z;
        max_err = max_err.max(c.pos_err);
        let mut orbit = vec![z];
        for _ in 1..p {
            orbit.push(map.apply(*orbit.last().unwrap()));
        }
        let least = (1..p)
            .find(|d| p % d == 0 && {
                // forward rounding in f^d on top of the position error
                let (_, _, scale_d) = jac_power(map, z, *d);
                let w = orbit[*d];
                (w[0] - z[0]).hypot(w[1] - z[1]) <= merge_radius(c.pos_err) + 16.0 * f64::EPSILON * scale_d
            })
            .unwrap_or(p);
        let rep = orbit[..least]
            .iter()
            .copied()
            .min_by(|u, v| u[0].total_cmp(&v[0]).then(u[1].total_cmp(&v[1])))
            .unwrap();
        points.push((rep, least, c.floor, c.pos_err));
    }
    points.sort_by(|u, v| u.0[0].total_cmp(&v.0[0]).then(u.0[1].total_cmp(&v.0[1])));
    // representatives are images of converged points, so allow the forward error too
    let pair_radius = |u: &(Vec2, usize, f64, f64), v: &(Vec2, usize, f64, f64)| {
        merge_radius(u.3.max(v.3)) + u.2.max(v.2).min(1e-8)
    };
    let reach = merge_radius(max_err) + 1e-8;
    let mut reps: Vec<(Vec2, usize, f64, f64)> = Vec::new();
    for cand in points {
        let dup = reps.iter().rev().take_while(|r| cand.0[0] - r.0[0] <= reach).any(|r| {
            (r.0[0] - cand.0[0]).hypot(r.0[1] - cand.0[1]) <= pair_radius(r, &cand)
        });
        if !dup {
            reps.push(cand);
        }
    }
    let polished: Vec<(Vec2, usize, f64)> = reps
        .into_par_iter()
        .map(|(z, least, floor, err)| match newton(map, z, p, tol) {
            Some(c) if (c.z[0] - z[0]).hypot(c.z[1] - z[1]) <= merge_radius(err) + floor.min(1e-8) => {
                (c.z, least, c.floor.max(floor))
            }
            _ => (z, least, floor),
        })
        .collect();
    let max_accepted_residual = polished.iter().fold(tol, |acc, r| acc.max(r.2));
    let orbits: Vec<PeriodicOrbit> = polished
        .into_iter()
        .map(|(z, least, _)| {
            let (_, m, _) = jac_power(map, z, p);
            let multipliers = eigenvalues(&m);
            let hyperbolic = multipliers.iter().all(|l| (l.modulus() - 1.0).abs() > 1e-9);
            PeriodicOrbit {
                point: z,
                least_period: least,
                multipliers,
                residual: residual(map, z, p),
                hyperbolic,
            }
        })
        .collect();
    let count_fix = orbits.iter().map(|o| o.least_period).sum();
    Ok(PeriodicCensus {
        p,
        orbits,
        count_fix,
        tol,
        max_accepted_residual,
        seeds: seeds.len(),
        stable_under_refinement: None,
    })
}

/// Census on `grid`, checked against the census on the doubled grid.
pub fn periodic_orbits_refined(map: &HenonMap, p: usize, grid: &SeedGrid, tol: f64) -> Result<PeriodicCensus> {
    let coarse = periodic_orbits_2d(map, p, grid, tol)?;
    let fine = periodic_orbits_2d(map, p, &grid.refined(), tol)?;
    let stable = coarse.count_fix == fine.count_fix;
    Ok(PeriodicCensus {
        stable_under_refinement: Some(stable),
        ..fine
    })
}

/// Census as CSV: `p,least_period,x,y,mult1,mult2,residual`.
pub fn census_csv(census: &PeriodicCensus) -> String {
    let mut out = String::from("p,least_period,x,y,mult1,mult2,residual\n");
    for o in &census.orbits {
        let _ = writeln!(
            out,
            "{},{},{:.17e},{:.17e},{},{},{:.3e}",
            census.p, o.least_period, o.point[0], o.point[1], o.multipliers[0], o.multipliers[1], o.residual
        );
    }
    out
}

/// Exponential growth rate of periodic counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyEstimate {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// `(p, log(count)/p)`
    pub per_period: Vec<(usize, f64)>,
    /// slope does not exceed `log 2 + 0.02`
    pub within_log2: bool,
}

/// Slope of `log count` against `p`. Counts must be positive.
pub fn entropy_from_counts(counts: &[(usize, f64)]) -> Result<EntropyEstimate> {
    if counts.len() < 3 {
        return Err(OrbitError::InvalidInput("need at least three periods".into()));
    }
    if counts.iter().any(|(p, c)| *p == 0 || !(*c >= 1.0)) {
        return Err(OrbitError::EmptyCensus);
    }
    let xs: Vec<f64> = counts.iter().map(|(p, _)| *p as f64).collect();
    let ys: Vec<f64> = counts.iter().map(|(_, c)| c.ln()).collect();
    let LineFit { slope, intercept, r_squared } =
        fit_line(&xs, &ys).ok_or_else(|| OrbitError::InvalidInput("degenerate periods".into()))?;
    Ok(EntropyEstimate {
        slope,
        intercept,
        r_squared,
        per_period: counts.iter().map(|(p, c)| (*p, c.ln() / *p as f64)).collect(),
        within_log2: slope <= std::f64::consts::LN_2 + 0.02,
    })
}

pub fn entropy_from_census(censuses: &[PeriodicCensus]) -> Result<EntropyEstimate> {
    let counts: Vec<(usize, f64)> = censuses.iter().map(|c| (c.p, c.count_fix as f64)).collect();
    entropy_from_counts(&counts)
}

/// Reference measure on the line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reference {
    /// density `1 / (pi sqrt(4 - x^2))` on `[-2, 2]`
    Arcsine,
    /// uniform weights on the given points
    Empirical(Vec<f64>),
}

impl Reference {
    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            Reference::Arcsine => {
                if x <= -2.0 {
                    0.0
                } else if x >= 2.0 {
                    1.0
                } else {
                    0.5 + (x / 2.0).asin() / PI
                }
            }
            Reference::Empirical(v) => v.iter().filter(|y| **y <= x).count() as f64 / v.len().max(1) as f64,
        }
    }

    /// `int g dmu`; the arcsine integral uses the midpoint rule in the angle.
    pub fn integral(&self, g: &dyn Fn(f64) -> f64) -> f64 {
        match self {
            Reference::Arcsine => {
                let n = 4096;
                (0..n)
                    .map(|k| g(2.0 * (PI * (k as f64 + 0.5) / n as f64).cos()))
                    .sum::<f64>()
                    / n as f64
            }
            Reference::Empirical(v) => v.iter().map(|x| g(*x)).sum::<f64>() / v.len().max(1) as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableComparison {
    pub name: String,
    pub empirical: f64,
    pub reference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquidistributionReport {
    pub points: usize,
    pub ks_distance: f64,
    /// `(lo, hi, empirical fraction, reference measure)`
    pub interval: Option<(f64, f64, f64, f64)>,
    pub observables: Vec<ObservableComparison>,
}

/// Sup distance between the empirical CDF of `xs` and the reference CDF.
pub fn ks_distance(xs: &[f64], reference: &Reference) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mut d = 0.0f64;
    let mut eval = |x: f64, below: f64, at: f64| {
        let f = reference.cdf(x);
        // left limit of a step reference is approximated from just below
        let f_left = match reference {
            Reference::Arcsine => f,
            Reference::Empirical(_) => reference.cdf(x - f64::EPSILON * x.abs().max(1.0)),
        };
        d = d.max((at - f).abs()).max((below - f_left).abs());
    };
    let mut i = 0;
    while i < v.len() {
        let mut j = i;
        while j < v.len() && v[j] == v[i] {
            j += 1;
        }
        eval(v[i], i as f64 / n, j as f64 / n);
        i = j;
    }
    if let Reference::Empirical(r) = reference {
        for &x in r {
            let at = v.partition_point(|y| *y <= x) as f64 / n;
            let below = v.partition_point(|y| *y < x) as f64 / n;
            eval(x, below, at);
        }
    }
    d
}

/// Compares the points `xs` (x coordinates of `Fix f^p`) with a reference.
pub fn equidistribution_test(
    xs: &[f64],
    reference: &Reference,
    interval: Option<(f64, f64)>,
    observables: &[(&str, &dyn Fn(f64) -> f64)],
) -> Result<EquidistributionReport> {
    if xs.is_empty() {
        return Err(OrbitError::EmptyCensus);
    }
    let n = xs.len() as f64;
    let interval = interval.map(|(lo, hi)| {
        let emp = xs.iter().filter(|x| **x >= lo && **x <= hi).count() as f64 / n;
        let r = match reference {
            Reference::Arcsine => reference.cdf(hi) - reference.cdf(lo),
            Reference::Empirical(v) => v.iter().filter(|x| **x >= lo && **x <= hi).count() as f64 / v.len() as f64,
        };
        (lo, hi, emp, r)
    });
    let emp = Reference::Empirical(xs.to_vec());
    Ok(EquidistributionReport {
        points: xs.len(),
        ks_distance: ks_distance(xs, reference),
        interval,
        observables: observables
            .iter()
            .map(|(name, g)| ObservableComparison {
                name: name.to_string(),
                empirical: emp.integral(*g),
                reference: reference.integral(*g),
            })
            .collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExceptionalBound {
    pub p: u64,
    pub m: u64,
    pub bound: f64,
    pub ln_bound: f64,
    /// `log(bound / 2^p)`
    pub ln_ratio: f64,
    pub ratio: f64,
}

/// `p e^{p/sqrt M} + (M + 1) 2^{p/(M+1)}`, evaluated in log form.
pub fn exceptional_bound(p: u64, m: u64) -> Result<ExceptionalBound> {
    if p == 0 || m == 0 {
        return Err(OrbitError::InvalidInput("p and M must be positive".into()));
    }
    let (pf, mf) = (p as f64, m as f64);
    let first = pf.ln() + pf / mf.sqrt();
    let second = (mf + 1.0).ln() + pf / (mf + 1.0) * std::f64::consts::LN_2;
    let ln_bound = log_add_exp(first, second);
    let ln_ratio = ln_bound - pf * std::f64::consts::LN_2;
    Ok(ExceptionalBound {
        p,
        m,
        bound: ln_bound.exp(),
        ln_bound,
        ln_ratio,
        ratio: ln_ratio.exp(),
    })
}

/// `log 2 / (M + 1)`.
pub fn k_square_entropy(m: u64) -> f64 {
    std::f64::consts::LN_2 / (m as f64 + 1.0)
}

/// Synthetic census of the time-`(M+1)` full 2-shift horseshoe:
/// `2^n` fixed points at period `n (M + 1)`.
pub fn horseshoe_census(m: u64, n_max: usize) -> Vec<(usize, f64)> {
    (1..=n_max)
        .map(|n| (n * (m as usize + 1), 2f64.powi(n as i32)))
        .collect()
}
