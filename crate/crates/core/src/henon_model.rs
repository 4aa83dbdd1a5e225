//! Hénon-like maps `f(x, y) = (x^2 + a + y, 0) + B(x, y, a)` with tangent
//! cocycles, cone fields, and sampled checkers for the expansion conditions.
//!
//! Every condition check is sampling based: a pass means no counterexample
//! was found on the given sample, not a proof.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::serde_f64;
use crate::symbolic_words::Params;

pub type Vec2 = [f64; 2];
pub type Mat2 = [[f64; 2]; 2];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HenonError {
    #[error("orbit escaped at step {step}")]
    Escaped { step: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("singular values coincide (gap {0})")]
    DegenerateSingularValues(f64),
}

pub type Result<T> = std::result::Result<T, HenonError>;

/// `coeff * x^px * y^py` added to component `component` of the map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub component: usize,
    pub px: u32,
    pub py: u32,
    pub coeff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Perturbation {
    #[default]
    Zero,
    /// `B(x, y, a) = (0, b x)`
    Classical,
    Custom(Vec<Monomial>),
}

/// Map spec JSON: `{"a":-2.0,"b":0.001,"perturbation":"classical"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HenonMap {
    pub a: f64,
    pub b: f64,
    #[serde(default)]
    pub perturbation: Perturbation,
    #[serde(default = "default_escape")]
    pub escape_radius: f64,
}

fn default_escape() -> f64 {
    10.0
}

fn powi(v: f64, k: u32) -> f64 {
    v.powi(k as i32)
}

impl HenonMap {
    pub fn new(a: f64, b: f64, perturbation: Perturbation) -> Result<Self> {
        if !a.is_finite() || !(b >= 0.0) || !b.is_finite() {
            return Err(HenonError::InvalidInput(format!("a = {a}, b = {b}")));
        }
        if let Perturbation::Custom(terms) = &perturbation {
            if let Some(t) = terms.iter().find(|t| t.component > 1 || !t.coeff.is_finite()) {
                return Err(HenonError::InvalidInput(format!("bad monomial {t:?}")));
            }
        }
        Ok(HenonMap {
            a,
            b,
            perturbation,
            escape_radius: default_escape(),
        })
    }

    /// The one-dimensional quadratic family on the line `y = 0`.
    pub fn quadratic(a: f64) -> Self {
        HenonMap::new(a, 0.0, Perturbation::Zero).expect("finite parameter")
    }

    pub fn classical(a: f64, b: f64) -> Result<Self> {
        HenonMap::new(a, b, Perturbation::Classical)
    }

    /// Standard form `(X, Y) -> (1 - A X^2 + Y, B X)`, conjugated by
    /// `(x, y) = (-A X, -A Y)` to `a = -A`, classical perturbation with `b = B`.
    pub fn from_standard(big_a: f64, big_b: f64) -> Result<Self> {
        HenonMap::classical(-big_a, big_b)
    }

    pub fn with_escape_radius(mut self, r: f64) -> Self {
        self.escape_radius = r;
        self
    }

    pub fn apply(&self, z: Vec2) -> Vec2 {
        let [x, y] = z;
        let mut out = [x * x + self.a + y, 0.0];
        match &self.perturbation {
            Perturbation::Zero => {}
            Perturbation::Classical => out[1] += self.b * x,
            Perturbation::Custom(terms) => {
                for t in terms {
                    out[t.component] += t.coeff * powi(x, t.px) * powi(y, t.py);
                }
            }
        }
        out
    }

    pub fn jacobian(&self, z: Vec2) -> Mat2 {
        let [x, y] = z;
        let mut j = [[2.0 * x, 1.0], [0.0, 0.0]];
        match &self.perturbation {
            Perturbation::Zero => {}
            Perturbation::Classical => j[1][0] += self.b,
            Perturbation::Custom(terms) => {
                for t in terms {
                    if t.px > 0 {
                        j[t.component][0] += t.coeff * t.px as f64 * powi(x, t.px - 1) * powi(y, t.py);
                    }
                    if t.py > 0 {
                        j[t.component][1] += t.coeff * t.py as f64 * powi(x, t.px) * powi(y, t.py - 1);
                    }
                }
            }
        }
        j
    }

    /// Hessians of the two components.
    pub fn hessians(&self, z: Vec2) -> [Mat2; 2] {
        let [x, y] = z;
        let mut h = [[[2.0, 0.0], [0.0, 0.0]], [[0.0; 2]; 2]];
        if let Perturbation::Custom(terms) = &self.perturbation {
            for t in terms {
                let (px, py, c) = (t.px, t.py, t.coeff);
                let k = t.component;
                if px > 1 {
                    h[k][0][0] += c * (px * (px - 1)) as f64 * powi(x, px - 2) * powi(y, py);
                }
                if py > 1 {
                    h[k][1][1] += c * (py * (py - 1)) as f64 * powi(x, px) * powi(y, py - 2);
                }
                if px > 0 && py > 0 {
                    let v = c * (px * py) as f64 * powi(x, px - 1) * powi(y, py - 1);
                    h[k][0][1] += v;
                    h[k][1][0] += v;
                }
            }
        }
        h
    }

    fn escaped(&self, z: Vec2) -> bool {
        !(z[0].abs() <= self.escape_radius && z[1].abs() <= self.escape_radius)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitSegment {
    pub points: Vec<Vec2>,
    pub escaped_at: Option<usize>,
}

/// Forward orbit `z, f(z), ..., f^n(z)`; stops at the first point outside the
/// escape box.
pub fn iterate(map: &HenonMap, z: Vec2, n: usize) -> OrbitSegment {
    let mut points = Vec::with_capacity(n + 1);
    let mut cur = z;
    points.push(cur);
    if map.escaped(cur) {
        return OrbitSegment { points, escaped_at: Some(0) };
    }
    for k in 1..=n {
        cur = map.apply(cur);
        points.push(cur);
        if map.escaped(cur) {
            return OrbitSegment { points, escaped_at: Some(k) };
        }
    }
    OrbitSegment { points, escaped_at: None }
}

fn mat_vec(m: &Mat2, v: Vec2) -> Vec2 {
    [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
}

fn mat_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut c = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

fn det(m: &Mat2) -> f64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

fn norm(v: Vec2) -> f64 {
    v[0].hypot(v[1])
}

/// Largest singular value of a 2x2 matrix and its right singular vector.
fn top_singular(m: &Mat2) -> (f64, Vec2) {
    let p = m[0][0] * m[0][0] + m[1][0] * m[1][0];
    let r = m[0][1] * m[0][1] + m[1][1] * m[1][1];
    let q = m[0][0] * m[0][1] + m[1][0] * m[1][1];
    let phi = 0.5 * (2.0 * q).atan2(p - r);
    let v = [phi.cos(), phi.sin()];
    (norm(mat_vec(m, v)), v)
}

/// Operator norm of a 2x2 matrix.
pub fn operator_norm(m: &Mat2) -> f64 {
    top_singular(m).0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LadderKind {
    /// `log ||T f^k (u)||` for a fixed initial vector
    Vector,
    /// `log ||T f^k||`
    Operator,
}

/// Log-norm ladder along an orbit, renormalised at every step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TangentProduct {
    pub base: Vec2,
    pub horizon: usize,
    pub kind: LadderKind,
    /// `l_k` for `k = 0..=horizon`; `-inf` once the image vanishes
    #[serde(with = "crate::numeric::serde_f64_vec")]
    pub log_norms: Vec<f64>,
    /// unit image directions; empty for operator ladders
    pub directions: Vec<Vec2>,
    /// `log |det T f|` at each step
    #[serde(with = "crate::numeric::serde_f64_vec")]
    pub log_dets: Vec<f64>,
    pub escaped_at: Option<usize>,
}

impl TangentProduct {
    /// Number of steps actually computed.
    pub fn len(&self) -> usize {
        self.log_norms.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.log_norms.len() <= 1
    }
}

/// `l_k = log ||T_z f^k (u) / ||u|| ||` for `k <= n`.
pub fn tangent_cocycle(map: &HenonMap, z: Vec2, u: Vec2, n: usize) -> Result<TangentProduct> {
    let nu = norm(u);
    if !(nu > 0.0) || !nu.is_finite() {
        return Err(HenonError::InvalidInput("tangent vector must be nonzero".into()));
    }
    let mut dir = [u[0] / nu, u[1] / nu];
    let mut acc = 0.0;
    let mut log_norms = vec![0.0];
    let mut directions = vec![dir];
    let mut log_dets = Vec::with_capacity(n);
    let mut cur = z;
    let mut escaped_at = None;
    for k in 1..=n {
        let j = map.jacobian(cur);
        log_dets.push(det(&j).abs().ln());
        let w = mat_vec(&j, dir);
        let s = norm(w);
        acc += s.ln();
        log_norms.push(acc);
        if s > 0.0 {
            dir = [w[0] / s, w[1] / s];
        }
        directions.push(dir);
        cur = map.apply(cur);
        if map.escaped(cur) {
            escaped_at = Some(k);
            break;
        }
    }
    Ok(TangentProduct {
        base: z,
        horizon: n,
        kind: LadderKind::Vector,
        log_norms,
        directions,
        log_dets,
        escaped_at,
    })
}

/// Running product `T_z f^k` as a unit-Frobenius matrix with its log scale.
fn accumulate(map: &HenonMap, z: Vec2, k: usize) -> Result<(Mat2, f64, f64, Vec2)> {
    let mut m = [[1.0, 0.0], [0.0, 1.0]];
    let mut log_scale = 0.0;
    let mut log_det = 0.0;
    let mut cur = z;
    for step in 0..k {
        let j = map.jacobian(cur);
        log_det += det(&j).abs().ln();
        m = mat_mul(&j, &m);
        let f = (m[0][0].powi(2) + m[0][1].powi(2) + m[1][0].powi(2) + m[1][1].powi(2)).sqrt();
        if f == 0.0 {
            return Ok((m, f64::NEG_INFINITY, log_det, cur));
        }
        for row in m.iter_mut() {
            for v in row.iter_mut() {
                *v /= f;
            }
        }
        log_scale += f.ln();
        cur = map.apply(cur);
        if map.escaped(cur) {
            return Err(HenonError::Escaped { step: step + 1 });
        }
    }
    Ok((m, log_scale, log_det, cur))
}

/// `log ||T_z f^j||` for `j = 0..=k`.
pub fn operator_norm_ladder(map: &HenonMap, z: Vec2, k: usize) -> Result<TangentProduct> {
    let mut m = [[1.0, 0.0], [0.0, 1.0]];
    let mut log_scale = 0.0f64;
    let mut log_norms = vec![0.0];
    let mut log_dets = Vec::with_capacity(k);
    let mut cur = z;
    let mut escaped_at = None;
    for step in 1..=k {
        let j = map.jacobian(cur);
        log_dets.push(det(&j).abs().ln());
        m = mat_mul(&j, &m);
        let s = operator_norm(&m);
        if s == 0.0 {
            log_scale = f64::NEG_INFINITY;
        } else {
            for row in m.iter_mut() {
                for v in row.iter_mut() {
                    *v /= s;
                }
            }
            log_scale += s.ln();
        }
        log_norms.push(log_scale);
        cur = map.apply(cur);
        if map.escaped(cur) {
            escaped_at = Some(step);
            break;
        }
    }
    Ok(TangentProduct {
        base: z,
        horizon: k,
        kind: LadderKind::Operator,
        log_norms,
        directions: Vec::new(),
        log_dets,
        escaped_at,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ConeConvention {
    /// centred at `(1, 0)`
    #[default]
    Horizontal,
    /// centred at `(0, 1)`
    Vertical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeField {
    pub center: Vec2,
    pub half_angle: f64,
}

impl ConeField {
    /// `half_angle` must lie in `[0, pi/4)`; zero gives a line field.
    pub fn new(convention: ConeConvention, half_angle: f64) -> Result<Self> {
        if !(0.0..std::f64::consts::FRAC_PI_4).contains(&half_angle) {
            return Err(HenonError::InvalidInput(format!(
                "cone half-angle {half_angle} outside [0, pi/4)"
            )));
        }
        let center = match convention {
            ConeConvention::Horizontal => [1.0, 0.0],
            ConeConvention::Vertical => [0.0, 1.0],
        };
        Ok(ConeField { center, half_angle })
    }

    /// Unoriented angle between `u` and the centre line.
    pub fn angle(&self, u: Vec2) -> f64 {
        let n = norm(u);
        let c = ((u[0] * self.center[0] + u[1] * self.center[1]) / n).abs().min(1.0);
        c.acos()
    }

    pub fn contains(&self, u: Vec2) -> bool {
        norm(u) > 0.0 && self.angle(u) <= self.half_angle + 1e-12
    }
}

/// Points with tangent vectors at which a condition is sampled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionSample {
    pub points: Vec<Vec2>,
    pub vectors: Vec<Vec2>,
}

impl RegionSample {
    pub fn new(points: Vec<Vec2>, vectors: Vec<Vec2>) -> Result<Self> {
        if points.len() != vectors.len() {
            return Err(HenonError::InvalidInput("points and vectors differ in length".into()));
        }
        Ok(RegionSample { points, vectors })
    }

    /// Uniform grid on `[x0, x1] x [y0, y1]` with the same vector at each point.
    pub fn grid(x: (f64, f64), y: (f64, f64), nx: usize, ny: usize, u: Vec2) -> Self {
        let lin = |(lo, hi): (f64, f64), n: usize, i: usize| {
            if n <= 1 {
                0.5 * (lo + hi)
            } else {
                lo + (hi - lo) * i as f64 / (n - 1) as f64
            }
        };
        let mut points = Vec::with_capacity(nx * ny);
        for i in 0..nx {
            for j in 0..ny {
                points.push([lin(x, nx, i), lin(y, ny, j)]);
            }
        }
        let vectors = vec![u; points.len()];
        RegionSample { points, vectors }
    }

    /// `n` uniform points with random vectors inside `cone`; point `i` uses
    /// its own stream of the seeded generator.
    pub fn random(x: (f64, f64), y: (f64, f64), n: usize, cone: &ConeField, seed: u64) -> Self {
        let (points, vectors) = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(i as u64);
                let p = [rng.random_range(x.0..=x.1), rng.random_range(y.0..=y.1)];
                let base = cone.center[1].atan2(cone.center[0]);
                let t = base + cone.half_angle * (2.0 * rng.random::<f64>() - 1.0);
                (p, [t.cos(), t.sin()])
            })
            .unzip();
        RegionSample { points, vectors }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpansionSample {
    pub point: Vec2,
    pub cone_ok: bool,
    pub growth_ok: bool,
    /// `min_k (l_{n} - l_{n-k} - k c)`
    #[serde(with = "serde_f64")]
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionReport {
    pub n_s: usize,
    pub samples: Vec<ExpansionSample>,
    pub pass_fraction: f64,
    #[serde(with = "serde_f64")]
    pub worst_margin: f64,
    pub escaped: usize,
}

/// Cone invariance of `T f^{n_s}(u)` and `||T f^{n_s}(u)|| >= e^{k c} ||T f^{n_s-k}(u)||`
/// for every `k <= n_s`, at each sample.
pub fn check_expansion_g4(
    map: &HenonMap,
    sample: &RegionSample,
    n_s: usize,
    cone: &ConeField,
    params: &Params,
) -> ExpansionReport {
    let c = params.c();
    let results: Vec<Option<ExpansionSample>> = sample
        .points
        .par_iter()
        .zip(&sample.vectors)
        .map(|(&z, &u)| {
            let tp = tangent_cocycle(map, z, u, n_s).ok()?;
            if tp.escaped_at.is_some_and(|k| k < n_s) {
                return None;
            }
            let l = &tp.log_norms;
            let margin = (0..=n_s)
                .map(|k| l[n_s] - l[n_s - k] - k as f64 * c)
                .fold(f64::INFINITY, f64::min);
            let image = tp.directions[n_s];
            Some(ExpansionSample {
                point: z,
                cone_ok: l[n_s] > f64::NEG_INFINITY && cone.contains(image),
                growth_ok: margin >= -1e-12,
                margin,
            })
        })
        .collect();
    let escaped = results.iter().filter(|r| r.is_none()).count();
    let samples: Vec<ExpansionSample> = results.into_iter().flatten().collect();
    let passed = samples.iter().filter(|s| s.cone_ok && s.growth_ok).count();
    ExpansionReport {
        n_s,
        pass_fraction: if samples.is_empty() { 0.0 } else { passed as f64 / samples.len() as f64 },
        worst_margin: samples.iter().map(|s| s.margin).fold(f64::INFINITY, f64::min),
        samples,
        escaped,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct G6Report {
    pub max_first: f64,
    pub max_second: f64,
    pub bound: f64,
    pub pass: bool,
    pub samples: usize,
    /// sampled rectangle `[x0, x1] x [y0, y1]`
    pub region: [f64; 4],
}

/// Sup norm of the symmetric bilinear map `(u, v) -> (u^T H_1 v, u^T H_2 v)`,
/// attained on the diagonal; sampled over 3600 directions.
fn bilinear_norm(h: &[Mat2; 2]) -> f64 {
    (0..3600)
        .map(|i| {
            let t = std::f64::consts::PI * i as f64 / 3600.0;
            let u = [t.cos(), t.sin()];
            let q = |m: &Mat2| u[0] * (m[0][0] * u[0] + m[0][1] * u[1]) + u[1] * (m[1][0] * u[0] + m[1][1] * u[1]);
            q(&h[0]).hypot(q(&h[1]))
        })
        .fold(0.0, f64::max)
}

/// Rectangle hull of the `3 theta` neighbourhood of `[a, a^2 + a] x {0}`.
pub fn g6_region(map: &HenonMap, params: &Params) -> [f64; 4] {
    let t = 3.0 * params.theta();
    let (lo, hi) = {
        let v = map.a * map.a + map.a;
        (map.a.min(v), map.a.max(v))
    };
    [lo - t, hi + t, -t, t]
}

/// Largest sampled `||T f||` and `||T^2 f||` on the working region against
/// `e^{c+} = 5`. `nx * ny` grid points.
pub fn check_g6(map: &HenonMap, params: &Params, nx: usize, ny: usize) -> G6Report {
    let region = g6_region(map, params);
    let grid = RegionSample::grid((region[0], region[1]), (region[2], region[3]), nx, ny, [1.0, 0.0]);
    let (max_first, max_second) = grid
        .points
        .par_iter()
        .map(|&z| (operator_norm(&map.jacobian(z)), bilinear_norm(&map.hessians(z))))
        .reduce(|| (0.0, 0.0), |a, b| (a.0.max(b.0), a.1.max(b.1)));
    // e^{c+} with c+ = log 5
    let bound = 5.0;
    let _ = params;
    G6Report {
        max_first,
        max_second,
        bound,
        pass: max_first <= bound && max_second <= bound,
        samples: grid.len(),
        region,
    }
}

/// `l_n >= (c/3)(n - l) + l_l` for every `l <= n`.
pub fn h_times_check(tp: &TangentProduct, n: usize, params: &Params) -> Result<bool> {
    if tp.len() < n {
        return Err(HenonError::InvalidInput(format!(
            "ladder has {} steps, need {n}",
            tp.len()
        )));
    }
    let c3 = params.c() / 3.0;
    let l = &tp.log_norms;
    Ok((0..=n).all(|k| l[n] >= c3 * (n - k) as f64 + l[k] - 1e-12 || (k == n && l[n] == l[k])))
}

/// `log` of the threshold `e^{-Xi c+ (M + 1 + j)}`.
pub fn pce_log_threshold(j: usize, params: &Params) -> f64 {
    let m = params.m() as f64;
    -(params.ln_xi() + (params.c_plus() * (m + 1.0 + j as f64)).ln()).exp()
}

/// `||T_z f^j|| >= e^{-Xi c+ (M + 1 + j)}` for `j <= k`. A vector ladder
/// gives a lower bound for the operator norm, so a pass on it is a pass.
pub fn pce_check(tp: &TangentProduct, k: usize, params: &Params) -> Result<bool> {
    if tp.len() < k {
        return Err(HenonError::InvalidInput(format!(
            "ladder has {} steps, need {k}",
            tp.len()
        )));
    }
    Ok((0..=k).all(|j| tp.log_norms[j] >= pce_log_threshold(j, params)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContractedDirection {
    pub direction: Vec2,
    pub log_sigma_max: f64,
    #[serde(with = "serde_f64")]
    pub log_sigma_min: f64,
    /// `log sigma_max - log sigma_min`
    #[serde(with = "serde_f64")]
    pub log_gap: f64,
}

/// Right singular direction of the smaller singular value of `T_z f^k`.
///
/// The product is accumulated with Frobenius renormalisation; the dominant
/// right singular vector is well conditioned and `e_k` is its orthogonal
/// complement. `sigma_min` comes from the determinant, kept in log form.
pub fn most_contracted_direction(map: &HenonMap, z: Vec2, k: usize) -> Result<ContractedDirection> {
    if k == 0 {
        return Err(HenonError::DegenerateSingularValues(0.0));
    }
    let (m, log_scale, log_det, _) = accumulate(map, z, k)?;
    let (s1, v1) = top_singular(&m);
    let log_sigma_max = log_scale + s1.ln();
    let log_sigma_min = log_det - log_sigma_max;
    let log_gap = log_sigma_max - log_sigma_min;
    if !(log_gap > 1e-12) {
        return Err(HenonError::DegenerateSingularValues(log_gap.max(0.0)));
    }
    Ok(ContractedDirection {
        direction: [-v1[1], v1[0]],
        log_sigma_max,
        log_sigma_min,
        log_gap,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lyapunov {
    pub lambda1: f64,
    /// `-inf` when the Jacobian is singular somewhere on the orbit
    #[serde(with = "serde_f64")]
    pub lambda2: f64,
    #[serde(with = "serde_f64")]
    pub mean_log_det: f64,
    pub steps: usize,
}

/// Lyapunov exponents over `n` steps by QR iteration of an orthonormal
/// frame; the sum `lambda1 + lambda2` and `mean log|det|` are computed
/// independently.
pub fn lyapunov(map: &HenonMap, z: Vec2, n: usize) -> Result<Lyapunov> {
    if n < 1000 {
        return Err(HenonError::InvalidInput(format!("n = {n} is below 1000")));
    }
    let mut q1: Vec2 = [1.0, 0.3];
    let n1 = norm(q1);
    q1 = [q1[0] / n1, q1[1] / n1];
    let mut q2: Vec2 = [-q1[1], q1[0]];
    let (mut s1, mut s2, mut sd) = (0.0, 0.0, 0.0);
    let mut cur = z;
    for step in 0..n {
        let j = map.jacobian(cur);
        sd += det(&j).abs().ln();
        let w1 = mat_vec(&j, q1);
        let w2 = mat_vec(&j, q2);
        let r11 = norm(w1);
        if !(r11 > 0.0) {
            return Err(HenonError::DegenerateSingularValues(r11));
        }
        q1 = [w1[0] / r11, w1[1] / r11];
        let dot = q1[0] * w2[0] + q1[1] * w2[1];
        let v2 = [w2[0] - dot * q1[0], w2[1] - dot * q1[1]];
        // in the plane the second column is determined up to sign
        let r22 = (q1[0] * v2[1] - q1[1] * v2[0]).abs();
        q2 = [-q1[1], q1[0]];
        s1 += r11.ln();
        s2 += r22.ln();
        cur = map.apply(cur);
        if map.escaped(cur) {
            return Err(HenonError::Escaped { step: step + 1 });
        }
    }
    Ok(Lyapunov {
        lambda1: s1 / n as f64,
        lambda2: s2 / n as f64,
        mean_log_det: sd / n as f64,
        steps: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn params(m: u64, b: f64) -> Params {
        Params::new(m, b).unwrap()
    }

    #[test]
    fn iterate_examples() {
        let f = HenonMap::quadratic(-2.0);
        let o = iterate(&f, [2.0, 0.0], 5);
        assert!(o.points.iter().all(|p| *p == [2.0, 0.0]));
        let o = iterate(&f, [0.0, 0.0], 4);
        let xs: Vec<f64> = o.points.iter().map(|p| p[0]).collect();
        assert_eq!(xs, vec![0.0, -2.0, 2.0, 2.0, 2.0]);
        let f = HenonMap::quadratic(-1.0);
        let xs: Vec<f64> = iterate(&f, [0.0, 0.0], 4).points.iter().map(|p| p[0]).collect();
        assert_eq!(xs, vec![0.0, -1.0, 0.0, -1.0, 0.0]);
        let o = iterate(&HenonMap::quadratic(1.0), [0.0, 0.0], 50);
        assert!(o.escaped_at.is_some());
        assert_eq!(o.points.len(), o.escaped_at.unwrap() + 1);
    }

    #[test]
    fn tangent_cocycle_examples() {
        let f = HenonMap::quadratic(-2.0);
        let z = [0.3, 0.0];
        let tp = tangent_cocycle(&f, z, [1.0, 0.0], 20).unwrap();
        assert_eq!(tp.log_norms[0], 0.0);
        let orbit = iterate(&f, z, 20);
        let mut acc = 0.0;
        for k in 0..20 {
            acc += (2.0 * orbit.points[k][0]).abs().ln();
            assert_abs_diff_eq!(tp.log_norms[k + 1], acc, epsilon = 1e-10);
        }
        let tp = tangent_cocycle(&f, z, [0.0, 1.0], 1).unwrap();
        assert_eq!(tp.directions[1], [1.0, 0.0]);
        assert_eq!(tp.log_norms[1], 0.0);
        assert!(tangent_cocycle(&f, z, [0.0, 0.0], 1).is_err());
    }

    #[test]
    fn very_long_ladder_does_not_overflow() {
        let f = HenonMap::quadratic(-2.0);
        let tp = tangent_cocycle(&f, [-1.0, 0.0], [1.0, 0.0], 2_000_000).unwrap();
        assert_abs_diff_eq!(tp.log_norms[2_000_000], 2_000_000.0 * 2f64.ln(), epsilon = 1e-4);
    }

    #[test]
    fn map_spec_json() {
        let f: HenonMap = serde_json::from_str(r#"{"a":-2.0,"b":0.001,"perturbation":"classical"}"#).unwrap();
        assert_eq!(f, HenonMap::classical(-2.0, 0.001).unwrap());
        let g: HenonMap = serde_json::from_str(
            r#"{"a":-1.5,"b":0.01,"perturbation":{"custom":[{"component":1,"px":2,"py":0,"coeff":0.01}]}}"#,
        )
        .unwrap();
        assert_eq!(g.apply([1.0, 0.0]), [-0.5, 0.01]);
    }

    #[test]
    fn classical_matches_standard_form() {
        let (ba, bb) = (1.4, 0.3);
        let f = HenonMap::from_standard(ba, bb).unwrap();
        let (mut x, mut y) = (0.1f64, 0.05f64);
        let mut z = [-ba * x, -ba * y];
        for _ in 0..30 {
            (x, y) = (1.0 - ba * x * x + y, bb * x);
            z = f.apply(z);
            assert_abs_diff_eq!(z[0], -ba * x, epsilon = 1e-9);
            assert_abs_diff_eq!(z[1], -ba * y, epsilon = 1e-9);
        }
    }

    #[test]
    fn g4_examples() {
        let q = params(10, 0.0);
        let f = HenonMap::quadratic(-2.0);
        let cone = ConeField::new(ConeConvention::Horizontal, 0.0).unwrap();
        let sample = RegionSample::grid((-2.0, 2.0), (0.0, 0.0), 401, 1, [1.0, 0.0]);
        let rep = check_expansion_g4(&f, &sample, 2, &cone, &q);
        for s in &rep.samples {
            assert!(s.cone_ok || (s.point[0] * (s.point[0].powi(2) - 2.0)) == 0.0);
            // one-dimensional oracle: |2 x1| >= e^c and |4 x0 x1| >= e^{2c}
            let x0 = s.point[0];
            let x1 = x0 * x0 - 2.0;
            let expect = (2.0 * x1).abs() >= q.c().exp() && (4.0 * x0 * x1).abs() >= (2.0 * q.c()).exp();
            assert_eq!(s.growth_ok, expect, "x0 = {x0}");
        }
        let near: Vec<_> = rep.samples.iter().filter(|s| s.point[0].abs() > 1.9).collect();
        assert!(near.iter().all(|s| s.growth_ok && s.cone_ok));
        let crit = RegionSample::grid((-1e-3, 1e-3), (0.0, 0.0), 5, 1, [1.0, 0.0]);
        assert_eq!(check_expansion_g4(&f, &crit, 2, &cone, &q).pass_fraction, 0.0);
    }

    #[test]
    fn cone_conventions() {
        let h = ConeField::new(ConeConvention::Horizontal, 0.1).unwrap();
        let v = ConeField::new(ConeConvention::Vertical, 0.1).unwrap();
        assert!(h.contains([-1.0, 0.05]) && !h.contains([0.0, 1.0]));
        assert!(v.contains([0.05, -1.0]) && !v.contains([1.0, 0.0]));
        assert!(ConeField::new(ConeConvention::Horizontal, 0.8).is_err());
        let s = RegionSample::random((-1.0, 1.0), (-0.1, 0.1), 200, &h, 9);
        assert!(s.vectors.iter().all(|u| h.contains(*u)));
        assert_eq!(s, RegionSample::random((-1.0, 1.0), (-0.1, 0.1), 200, &h, 9));
    }

    #[test]
    fn g6_examples() {
        let q = params(10, 0.0);
        let rep = check_g6(&HenonMap::quadratic(-2.0), &q, 401, 1);
        assert!(rep.pass);
        assert_abs_diff_eq!(rep.max_first, 17f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(rep.max_second, 2.0, epsilon = 1e-12);
        assert_eq!(rep.bound, 5.0);
        assert_abs_diff_eq!(q.c_plus().exp(), 5.0, epsilon = 1e-14);
        assert!(!check_g6(&HenonMap::quadratic(-10.0), &q, 101, 1).pass);
    }

    #[test]
    fn h_times_examples() {
        let q = params(10, 0.0);
        let f = HenonMap::quadratic(-2.0);
        let tp = tangent_cocycle(&f, [-1.0, 0.0], [1.0, 0.0], 10).unwrap();
        assert!(h_times_check(&tp, 10, &q).unwrap());
        assert!(h_times_check(&tp, 0, &q).unwrap());
        let tp = tangent_cocycle(&HenonMap::quadratic(-1.0), [-1.0, 0.0], [1.0, 0.0], 10).unwrap();
        assert!(!h_times_check(&tp, 10, &q).unwrap());
        assert!(h_times_check(&tp, 11, &q).is_err());
    }

    #[test]
    fn pce_examples() {
        let q = params(4, 0.0);
        assert!(pce_log_threshold(0, &q) < 0.0);
        let f = HenonMap::quadratic(-2.0);
        let tp = operator_norm_ladder(&f, [0.4, 0.0], 12).unwrap();
        assert!(pce_check(&tp, 12, &q).unwrap());
        // the superattracting cycle 0 <-> -1 kills the derivative
        let tp = operator_norm_ladder(&HenonMap::quadratic(-1.0), [-1.0, 0.0], 4).unwrap();
        assert_eq!(tp.log_norms[2], f64::NEG_INFINITY);
        assert!(!pce_check(&tp, 4, &q).unwrap());
        let tp = tangent_cocycle(&f, [0.4, 0.0], [0.0, 1.0], 8).unwrap();
        assert!(pce_check(&tp, 8, &q).unwrap());
    }

    #[test]
    fn operator_ladder_matches_explicit_product() {
        let f = HenonMap::classical(-1.7, 0.01).unwrap();
        let tp = operator_norm_ladder(&f, [0.2, 0.0], 15).unwrap();
        let mut m = nalgebra::Matrix2::identity();
        let mut z = [0.2, 0.0];
        for j in 1..=15 {
            let jac = f.jacobian(z);
            m = nalgebra::Matrix2::new(jac[0][0], jac[0][1], jac[1][0], jac[1][1]) * m;
            z = f.apply(z);
            let s = m.svd(false, false).singular_values.max();
            assert_abs_diff_eq!(tp.log_norms[j], s.ln(), epsilon = 1e-9);
        }
    }

    #[test]
    fn contracted_direction_one_step_is_kernel() {
        let f = HenonMap::quadratic(-2.0);
        let x = 0.7;
        // b = 0 gives a singular Jacobian: sigma_min = 0
        let e = most_contracted_direction(&f, [x, 0.0], 1).unwrap();
        let expect = [1.0 / (1.0 + 4.0 * x * x).sqrt(), -2.0 * x / (1.0 + 4.0 * x * x).sqrt()];
        let dot = e.direction[0] * expect[0] + e.direction[1] * expect[1];
        assert_abs_diff_eq!(dot.abs(), 1.0, epsilon = 1e-12);
        assert_eq!(e.log_sigma_min, f64::NEG_INFINITY);
    }

    fn diagonal_map() -> HenonMap {
        // (x, y) -> (2x, y/2)
        let a = -1.0;
        let terms = vec![
            Monomial { component: 0, px: 2, py: 0, coeff: -1.0 },
            Monomial { component: 0, px: 1, py: 0, coeff: 2.0 },
            Monomial { component: 0, px: 0, py: 1, coeff: -1.0 },
            Monomial { component: 0, px: 0, py: 0, coeff: -a },
            Monomial { component: 1, px: 0, py: 1, coeff: 0.5 },
        ];
        HenonMap::new(a, 0.5, Perturbation::Custom(terms)).unwrap().with_escape_radius(1e6)
    }

    #[test]
    fn contracted_direction_of_diagonal_map() {
        let f = diagonal_map();
        assert_eq!(f.apply([0.25, 0.5]), [0.5, 0.25]);
        let e = most_contracted_direction(&f, [0.1, 0.1], 6).unwrap();
        assert_abs_diff_eq!(e.direction[0].abs(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e.log_gap, 12.0 * 2f64.ln(), epsilon = 1e-10);
        let id = HenonMap::new(
            -1.0,
            1.0,
            Perturbation::Custom(vec![
                Monomial { component: 0, px: 2, py: 0, coeff: -1.0 },
                Monomial { component: 0, px: 1, py: 0, coeff: 1.0 },
                Monomial { component: 0, px: 0, py: 1, coeff: -1.0 },
                Monomial { component: 0, px: 0, py: 0, coeff: 1.0 },
                Monomial { component: 1, px: 0, py: 1, coeff: 1.0 },
            ]),
        )
        .unwrap();
        assert!(matches!(
            most_contracted_direction(&id, [0.1, 0.1], 3),
            Err(HenonError::DegenerateSingularValues(_))
        ));
    }

    #[test]
    fn contracted_direction_matches_svd_oracle() {
        let f = HenonMap::classical(-1.8, 1e-3).unwrap();
        let z = [0.37, 0.0002];
        let k = 5;
        let e = most_contracted_direction(&f, z, k).unwrap();
        let mut m = nalgebra::Matrix2::identity();
        let mut w = z;
        for _ in 0..k {
            let j = f.jacobian(w);
            m = nalgebra::Matrix2::new(j[0][0], j[0][1], j[1][0], j[1][1]) * m;
            w = f.apply(w);
        }
        let svd = m.svd(false, true);
        let vt = svd.v_t.unwrap();
        let imin = if svd.singular_values[0] < svd.singular_values[1] { 0 } else { 1 };
        let oracle = [vt[(imin, 0)], vt[(imin, 1)]];
        let dot = e.direction[0] * oracle[0] + e.direction[1] * oracle[1];
        assert_abs_diff_eq!(dot.abs(), 1.0, epsilon = 1e-9);
        assert!(e.log_gap > 0.0);
        assert_abs_diff_eq!(e.log_sigma_max, svd.singular_values.max().ln(), epsilon = 1e-9);
    }

    #[test]
    fn contracted_directions_are_close_and_contract() {
        let b: f64 = 1e-3;
        let q = params(4, b);
        let f = HenonMap::classical(-1.8, b).unwrap();
        for x0 in [0.37, -0.81, 1.23] {
            let z = [x0, 0.0];
            let ladder = operator_norm_ladder(&f, z, 10).unwrap();
            assert!(pce_check(&ladder, 10, &q).unwrap());
            let dirs: Vec<Vec2> = (1..=10).map(|k| most_contracted_direction(&f, z, k).unwrap().direction).collect();
            for k in 1..=10usize {
                for i in 1..=k {
                    let (ei, ek) = (dirs[i - 1], dirs[k - 1]);
                    let angle = (ei[0] * ek[1] - ei[1] * ek[0]).abs().asin();
                    assert!(angle <= b.powf(i as f64 / 2.0), "angle e_{i}, e_{k} = {angle}");
                    let tp = tangent_cocycle(&f, z, ek, i).unwrap();
                    // rounding in e_k is amplified by sigma_max of T f^i
                    let floor = (8.0 * f64::EPSILON).ln() + most_contracted_direction(&f, z, i).unwrap().log_sigma_max;
                    assert!(tp.log_norms[i] <= ((i as f64 / 2.0) * b.ln()).max(floor), "i = {i}, k = {k}");
                }
            }
        }
    }

    #[test]
    fn lyapunov_examples() {
        let f = HenonMap::quadratic(-2.0);
        let x0 = 2.0 * (std::f64::consts::PI * 0.2137).cos();
        let l = lyapunov(&f, [x0, 0.0], 20_000).unwrap();
        assert_abs_diff_eq!(l.lambda1, 2f64.ln(), epsilon = 0.02);
        assert_eq!(l.lambda2, f64::NEG_INFINITY);
        let h = HenonMap::from_standard(1.4, 0.3).unwrap();
        let warm = iterate(&h, [0.0, 0.0], 1000);
        let l = lyapunov(&h, *warm.points.last().unwrap(), 200_000).unwrap();
        assert_abs_diff_eq!(l.lambda1, 0.419, epsilon = 0.01);
        assert_abs_diff_eq!(l.lambda1 + l.lambda2, 0.3f64.ln(), epsilon = 1e-8);
        assert!(lyapunov(&f, [x0, 0.0], 10).is_err());
        assert!(matches!(lyapunov(&HenonMap::quadratic(1.0), [0.0, 0.0], 1000), Err(HenonError::Escaped { .. })));
    }

    proptest! {
        #[test]
        fn chain_rule(x in -1.9f64..1.9, m in 1usize..40, n in 1usize..40, t in 0.0f64..3.1) {
            let f = HenonMap::classical(-1.9, 0.002).unwrap();
            let z = [x, 0.0];
            let u = [t.cos(), t.sin()];
            let whole = tangent_cocycle(&f, z, u, m + n).unwrap();
            prop_assume!(whole.escaped_at.is_none());
            let first = tangent_cocycle(&f, z, u, m).unwrap();
            let zm = iterate(&f, z, m).points[m];
            let rest = tangent_cocycle(&f, zm, first.directions[m], n).unwrap();
            prop_assert!((whole.log_norms[m + n] - (first.log_norms[m] + rest.log_norms[n])).abs() < 1e-10);
        }

        #[test]
        fn determinant_bound(x in -3.0f64..3.0, y in -3.0f64..3.0, b in 0.0f64..0.5) {
            let f = HenonMap::classical(-1.5, b).unwrap();
            prop_assert!(det(&f.jacobian([x, y])).abs() <= b + 1e-15);
            prop_assert!(det(&HenonMap::quadratic(-1.5).jacobian([x, y])).abs() <= 1e-15);
        }

        #[test]
        fn log_det_sum_matches_product(x in -1.5f64..1.5, n in 1usize..60) {
            let f = HenonMap::classical(-1.6, 0.05).unwrap();
            let tp = tangent_cocycle(&f, [x, 0.0], [1.0, 0.0], n).unwrap();
            prop_assume!(tp.escaped_at.is_none());
            let s: f64 = tp.log_dets.iter().sum();
            prop_assert!((s - n as f64 * 0.05f64.ln()).abs() < 1e-9);
        }
    }
}
