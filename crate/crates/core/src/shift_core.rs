//! Finite truncations of countable topological Markov shifts.
//!
//! A [`MarkovGraph`] is a directed graph with a distinguished base vertex.
//! From it we compute loop censuses at the base (all loops and first-return
//! loops), the Gurevich entropy via a shifted power iteration, the radii test
//! for strong positive recurrence, the Parry-type maximal-entropy Markov chain
//! and statistics of periodic points of the shift.

use std::collections::{BTreeSet, HashMap, VecDeque};

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::{big_ln, serde_f64};

/// Spectral shift used by [`perron`]: the iteration runs on `M + DELTA * I`.
pub const DELTA: f64 = 1.0;

/// Default iteration cap for [`perron`].
pub const DEFAULT_MAX_ITER: usize = 2_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ShiftError {
    #[error("graph has no vertices")]
    EmptyGraph,
    #[error("duplicate vertex id {0:?}")]
    DuplicateVertex(String),
    #[error("unknown vertex id {0:?}")]
    UnknownVertex(String),
    #[error("graph is not strongly connected: no path from {from:?} to {to:?}")]
    NotStronglyConnected { from: String, to: String },
    #[error("power iteration did not converge in {iterations} iterations (last residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("eigenvector vanishes at vertex {0:?}")]
    VanishingEigenvector(String),
    #[error("spectral residual {0:e} is too large to build a chain")]
    ResidualTooLarge(f64),
    #[error("census horizon {0} is below the minimum of 8")]
    HorizonTooShort(usize),
    #[error("Fix(sigma^{0}) is empty")]
    EmptyFixedSet(usize),
    #[error("invalid cylinder: {0}")]
    InvalidCylinder(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, ShiftError>;

/// Directed graph with a base vertex. Arrows are stored as sorted adjacency
/// lists over vertex indices.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovGraph {
    vertices: Vec<String>,
    succ: Vec<Vec<usize>>,
    base: usize,
}

/// Serialized form: `{"vertices":[...],"arrows":[[a,b],...],"base":"e"}`.
/// Vertex ids may be JSON strings or integers.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GraphSpec {
    pub vertices: Vec<VertexId>,
    pub arrows: Vec<(VertexId, VertexId)>,
    pub base: VertexId,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq, Hash)]
#[serde(untagged)]
pub enum VertexId {
    Int(i64),
    Name(String),
}

impl VertexId {
    fn label(&self) -> String {
        match self {
            VertexId::Int(i) => i.to_string(),
            VertexId::Name(s) => s.clone(),
        }
    }
}

impl MarkovGraph {
    pub fn new<S: AsRef<str>>(vertices: &[S], arrows: &[(S, S)], base: &str) -> Result<Self> {
        if vertices.is_empty() {
            return Err(ShiftError::EmptyGraph);
        }
        let mut index = HashMap::new();
        let mut names = Vec::with_capacity(vertices.len());
        for v in vertices {
            let v = v.as_ref().to_string();
            if index.insert(v.clone(), names.len()).is_some() {
                return Err(ShiftError::DuplicateVertex(v));
            }
            names.push(v);
        }
        let lookup = |v: &str| {
            index
                .get(v)
                .copied()
                .ok_or_else(|| ShiftError::UnknownVertex(v.to_string()))
        };
        let mut sets = vec![BTreeSet::new(); names.len()];
        for (a, b) in arrows {
            sets[lookup(a.as_ref())?].insert(lookup(b.as_ref())?);
        }
        Ok(MarkovGraph {
            base: lookup(base)?,
            vertices: names,
            succ: sets.into_iter().map(|s| s.into_iter().collect()).collect(),
        })
    }

    /// Builds a graph on vertices `0..n` labelled by their index.
    pub fn from_indices(n: usize, arrows: &[(usize, usize)], base: usize) -> Result<Self> {
        if n == 0 {
            return Err(ShiftError::EmptyGraph);
        }
        let mut sets = vec![BTreeSet::new(); n];
        for &(a, b) in arrows {
            if a >= n || b >= n {
                return Err(ShiftError::UnknownVertex(a.max(b).to_string()));
            }
            sets[a].insert(b);
        }
        if base >= n {
            return Err(ShiftError::UnknownVertex(base.to_string()));
        }
        Ok(MarkovGraph {
            vertices: (0..n).map(|i| i.to_string()).collect(),
            succ: sets.into_iter().map(|s| s.into_iter().collect()).collect(),
            base,
        })
    }

    pub fn from_spec(spec: &GraphSpec) -> Result<Self> {
        let vs: Vec<String> = spec.vertices.iter().map(VertexId::label).collect();
        let arrows: Vec<(String, String)> =
            spec.arrows.iter().map(|(a, b)| (a.label(), b.label())).collect();
        MarkovGraph::new(&vs, &arrows, &spec.base.label())
    }

    pub fn to_spec(&self) -> GraphSpec {
        GraphSpec {
            vertices: self.vertices.iter().cloned().map(VertexId::Name).collect(),
            arrows: self
                .arrows()
                .map(|(a, b)| {
                    (
                        VertexId::Name(self.vertices[a].clone()),
                        VertexId::Name(self.vertices[b].clone()),
                    )
                })
                .collect(),
            base: VertexId::Name(self.vertices[self.base].clone()),
        }
    }

    /// Golden-mean shift: `0 -> 0`, `0 -> 1`, `1 -> 0`, base `0`.
    pub fn golden_mean() -> Self {
        MarkovGraph::from_indices(2, &[(0, 0), (0, 1), (1, 0)], 0).expect("valid graph")
    }

    /// Full shift on `k` symbols (complete graph with loops), base `0`.
    pub fn full_shift(k: usize) -> Self {
        let arrows: Vec<_> = (0..k).flat_map(|i| (0..k).map(move |j| (i, j))).collect();
        MarkovGraph::from_indices(k, &arrows, 0).expect("valid graph")
    }

    /// Directed cycle `0 -> 1 -> ... -> n-1 -> 0`, base `0`.
    pub fn cycle(n: usize) -> Self {
        let arrows: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        MarkovGraph::from_indices(n, &arrows, 0).expect("valid graph")
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn base(&self) -> usize {
        self.base
    }

    pub fn vertex(&self, i: usize) -> &str {
        &self.vertices[i]
    }

    pub fn vertices(&self) -> &[String] {
        &self.vertices
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.vertices.iter().position(|v| v == id)
    }

    pub fn successors(&self, i: usize) -> &[usize] {
        &self.succ[i]
    }

    pub fn has_arrow(&self, a: usize, b: usize) -> bool {
        self.succ[a].binary_search(&b).is_ok()
    }

    pub fn arrows(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.succ
            .iter()
            .enumerate()
            .flat_map(|(a, s)| s.iter().map(move |&b| (a, b)))
    }

    pub fn arrow_count(&self) -> usize {
        self.succ.iter().map(Vec::len).sum()
    }

    fn predecessors(&self) -> Vec<Vec<usize>> {
        let mut pred = vec![Vec::new(); self.len()];
        for (a, b) in self.arrows() {
            pred[b].push(a);
        }
        pred
    }

    fn reachable(adj: &[Vec<usize>], start: usize) -> Vec<bool> {
        let mut seen = vec![false; adj.len()];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(v) = queue.pop_front() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
        seen
    }

    /// Checks strong connectivity. A single vertex needs a self-loop.
    /// On failure returns a pair `(from, to)` with no path `from -> to`.
    pub fn strong_connectivity(&self) -> Result<()> {
        let r = 0;
        let fwd = Self::reachable(&self.succ, r);
        if let Some(v) = fwd.iter().position(|x| !x) {
            return Err(self.not_connected(r, v));
        }
        let bwd = Self::reachable(&self.predecessors(), r);
        if let Some(v) = bwd.iter().position(|x| !x) {
            return Err(self.not_connected(v, r));
        }
        if self.arrow_count() == 0 {
            return Err(self.not_connected(r, r));
        }
        Ok(())
    }

    fn not_connected(&self, from: usize, to: usize) -> ShiftError {
        ShiftError::NotStronglyConnected {
            from: self.vertices[from].clone(),
            to: self.vertices[to].clone(),
        }
    }

    /// Period of a strongly connected graph: gcd of all cycle lengths.
    pub fn period(&self) -> Option<u64> {
        self.strong_connectivity().ok()?;
        let mut level = vec![u64::MAX; self.len()];
        level[self.base] = 0;
        let mut queue = VecDeque::from([self.base]);
        while let Some(v) = queue.pop_front() {
            for &w in &self.succ[v] {
                if level[w] == u64::MAX {
                    level[w] = level[v] + 1;
                    queue.push_back(w);
                }
            }
        }
        let mut g = 0u64;
        for (a, b) in self.arrows() {
            let d = (level[a] + 1).abs_diff(level[b]);
            g = g.gcd(&d);
        }
        Some(g)
    }

    fn step(&self, v: &[BigUint]) -> Vec<BigUint> {
        let mut next = vec![BigUint::zero(); self.len()];
        for (a, s) in self.succ.iter().enumerate() {
            if v[a].is_zero() {
                continue;
            }
            for &b in s {
                next[b] += &v[a];
            }
        }
        next
    }

    fn closed_walks_from(&self, start: usize, p: usize) -> BigUint {
        let mut v = vec![BigUint::zero(); self.len()];
        v[start] = BigUint::one();
        for _ in 0..p {
            v = self.step(&v);
        }
        std::mem::take(&mut v[start])
    }

    fn walks_between(&self, from: usize, to: usize, len: usize) -> BigUint {
        let mut v = vec![BigUint::zero(); self.len()];
        v[from] = BigUint::one();
        for _ in 0..len {
            v = self.step(&v);
        }
        std::mem::take(&mut v[to])
    }
}

/// Loop counts at the base. Index 0 is stored explicitly: `z[0] = 1` and
/// `zstar[0] = 0`, so `z[n]` is `Z_n` for `1 <= n <= horizon`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopCensus {
    pub base: String,
    pub horizon: usize,
    #[serde(with = "biguint_vec")]
    pub z: Vec<BigUint>,
    #[serde(with = "biguint_vec")]
    pub zstar: Vec<BigUint>,
}

impl LoopCensus {
    /// Builds a census from first-return counts `zstar[1..=N]` (index 0 is
    /// ignored) and fills `Z_n` by the renewal identity.
    pub fn from_first_returns(base: &str, zstar: &[BigUint]) -> Self {
        let horizon = zstar.len().saturating_sub(1);
        let mut zs = zstar.to_vec();
        if let Some(z0) = zs.first_mut() {
            *z0 = BigUint::zero();
        }
        let mut z = vec![BigUint::one()];
        for n in 1..=horizon {
            let mut acc = BigUint::zero();
            for k in 1..=n {
                if !zs[k].is_zero() && !z[n - k].is_zero() {
                    acc += &zs[k] * &z[n - k];
                }
            }
            z.push(acc);
        }
        LoopCensus {
            base: base.to_string(),
            horizon,
            z,
            zstar: zs,
        }
    }

    /// Checks `Z_n = sum_{k=1}^n Z*_k Z_{n-k}` for every `n` in the horizon.
    pub fn renewal_holds(&self) -> bool {
        (1..=self.horizon).all(|n| {
            let mut acc = BigUint::zero();
            for k in 1..=n {
                acc += &self.zstar[k] * &self.z[n - k];
            }
            acc == self.z[n]
        })
    }
}

/// Counts loops of length `1..=horizon` at the base and first-return loops.
pub fn count_loops(graph: &MarkovGraph, horizon: usize) -> Result<LoopCensus> {
    if graph.is_empty() {
        return Err(ShiftError::EmptyGraph);
    }
    if horizon == 0 {
        return Err(ShiftError::InvalidInput("horizon must be at least 1".into()));
    }
    let e = graph.base;
    let mut z = vec![BigUint::one()];
    let mut zstar = vec![BigUint::zero()];
    let mut all = vec![BigUint::zero(); graph.len()];
    all[e] = BigUint::one();
    // `avoid` counts paths from e that have not yet come back to e
    let mut avoid = all.clone();
    for _ in 1..=horizon {
        all = graph.step(&all);
        z.push(all[e].clone());
        avoid = graph.step(&avoid);
        zstar.push(std::mem::take(&mut avoid[e]));
    }
    Ok(LoopCensus {
        base: graph.vertices[e].clone(),
        horizon,
        z,
        zstar,
    })
}

/// Radii of convergence of `sum Z_n x^n` and `sum Z*_n x^n`, estimated by
/// the root test over the tail of the census.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Radii {
    #[serde(with = "serde_f64")]
    pub r: f64,
    #[serde(with = "serde_f64")]
    pub r_star: f64,
    pub horizon: usize,
    /// first index of the tail window
    pub tail_start: usize,
}

fn root_test(seq: &[BigUint], from: usize, to: usize) -> f64 {
    // largest Z_n^{1/n} over the window; 0 if the window is all zeros
    let mut best = 0.0f64;
    for (n, x) in seq.iter().enumerate().take(to + 1).skip(from) {
        if !x.is_zero() {
            best = best.max((big_ln(x) / n as f64).exp());
        }
    }
    best
}

fn radius(limsup: f64) -> f64 {
    if limsup == 0.0 {
        f64::INFINITY
    } else {
        1.0 / limsup
    }
}

pub fn radii(census: &LoopCensus) -> Result<Radii> {
    let n = census.horizon;
    if n < 8 {
        return Err(ShiftError::HorizonTooShort(n));
    }
    let tail_start = n + 1 - n.div_ceil(2);
    Ok(Radii {
        r: radius(root_test(&census.z, tail_start, n)),
        r_star: radius(root_test(&census.zstar, tail_start, n)),
        horizon: n,
        tail_start,
    })
}

/// Outcome of the strong positive recurrence test `R + margin < R_*`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SprReport {
    pub spr: bool,
    #[serde(with = "serde_f64")]
    pub r: f64,
    #[serde(with = "serde_f64")]
    pub r_star: f64,
    #[serde(with = "serde_f64")]
    pub gap: f64,
    pub margin: f64,
    pub horizon: usize,
    /// tail estimates disagree between the two halves of the window, or the
    /// horizon is short; the verdict may change with a longer census
    pub short_horizon_warning: bool,
    /// `R >= 1`: zero entropy, SPR holds only by convention
    pub degenerate: bool,
}

pub fn is_spr(census: &LoopCensus, margin: f64) -> Result<SprReport> {
    let rad = radii(census)?;
    let n = census.horizon;
    let mid = rad.tail_start + (n - rad.tail_start) / 2;
    let unstable = |seq: &[BigUint]| {
        let a = radius(root_test(seq, rad.tail_start, mid));
        let b = radius(root_test(seq, mid + 1, n));
        match (a.is_finite(), b.is_finite()) {
            (true, true) => (a - b).abs() > 0.02 * a.max(b),
            (false, false) => false,
            _ => true,
        }
    };
    let warning = n < 32 || unstable(&census.z) || unstable(&census.zstar);
    Ok(SprReport {
        spr: rad.r + margin < rad.r_star,
        r: rad.r,
        r_star: rad.r_star,
        gap: rad.r_star - rad.r,
        margin,
        horizon: n,
        short_horizon_warning: warning,
        degenerate: rad.r >= 1.0 - 1e-12,
    })
}

/// Perron data of the adjacency matrix `M`: `M alpha = lambda alpha`,
/// `beta M = lambda beta`, `sum alpha = 1`, `sum alpha_i beta_i = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralData {
    pub lambda: f64,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
    pub delta: f64,
}

fn power_iterate(
    adj: &[Vec<usize>],
    tol: f64,
    max_iter: usize,
) -> std::result::Result<(f64, Vec<f64>, f64, usize), (usize, f64)> {
    // iterates x -> (A + delta I)^T x over the given adjacency (x_b += x_a for a -> b)
    let n = adj.len();
    let mut x = vec![1.0 / n as f64; n];
    let mut y = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for it in 1..=max_iter {
        for (yb, xb) in y.iter_mut().zip(&x) {
            *yb = DELTA * xb;
        }
        for (a, s) in adj.iter().enumerate() {
            let xa = x[a];
            for &b in s {
                y[b] += xa;
            }
        }
        let mu: f64 = y.iter().sum();
        residual = y
            .iter()
            .zip(&x)
            .map(|(yi, xi)| (yi - mu * xi).abs())
            .fold(0.0, f64::max);
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = yi / mu;
        }
        if residual <= tol * mu {
            return Ok((mu - DELTA, x, residual, it));
        }
    }
    Err((max_iter, residual))
}

/// Shifted power iteration on `M + I` for both Perron vectors.
pub fn perron(graph: &MarkovGraph, tol: f64) -> Result<SpectralData> {
    perron_with_limit(graph, tol, DEFAULT_MAX_ITER)
}

pub fn perron_with_limit(graph: &MarkovGraph, tol: f64, max_iter: usize) -> Result<SpectralData> {
    graph.strong_connectivity()?;
    let nc = |(iterations, residual)| ShiftError::NoConvergence {
        iterations,
        residual,
    };
    // right eigenvector of M = left eigenvector of M^T: iterate over predecessors
    let (lambda, alpha, res_a, it_a) =
        power_iterate(&graph.predecessors(), tol, max_iter).map_err(nc)?;
    let (_, mut beta, res_b, it_b) = power_iterate(&graph.succ, tol, max_iter).map_err(nc)?;
    let dot: f64 = alpha.iter().zip(&beta).map(|(a, b)| a * b).sum();
    for b in &mut beta {
        *b /= dot;
    }
    let residual = spectral_residual(graph, lambda, &alpha, &beta).max(res_a.max(res_b));
    Ok(SpectralData {
        lambda,
        alpha,
        beta,
        residual,
        iterations: it_a.max(it_b),
        delta: DELTA,
    })
}

fn spectral_residual(graph: &MarkovGraph, lambda: f64, alpha: &[f64], beta: &[f64]) -> f64 {
    let n = graph.len();
    let mut ma = vec![0.0; n];
    let mut bm = vec![0.0; n];
    for (a, b) in graph.arrows() {
        ma[a] += alpha[b];
        bm[b] += beta[a];
    }
    let ra = (0..n).map(|i| (ma[i] - lambda * alpha[i]).abs()).fold(0.0, f64::max);
    let bmax = beta.iter().cloned().fold(0.0, f64::max).max(1.0);
    let rb = (0..n).map(|i| (bm[i] - lambda * beta[i]).abs()).fold(0.0, f64::max) / bmax;
    ra.max(rb)
}

/// Gurevich entropy `log lambda` of a finite strongly connected graph.
pub fn gurevich_entropy(graph: &MarkovGraph) -> Result<f64> {
    Ok(perron(graph, 1e-12)?.lambda.ln())
}

/// The maximal-entropy Markov chain. Rows of `p` are sparse and follow the
/// arrow order of the graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxEntropyChain {
    pub vertices: Vec<String>,
    pub base: usize,
    pub h_top: f64,
    pub pi: Vec<f64>,
    pub p: Vec<Vec<(usize, f64)>>,
}

impl MaxEntropyChain {
    pub fn transition(&self, i: usize, j: usize) -> f64 {
        self.p[i]
            .iter()
            .find(|(k, _)| *k == j)
            .map(|(_, v)| *v)
            .unwrap_or(0.0)
    }

    /// `|| pi P - pi ||_1`.
    pub fn stationarity_defect(&self) -> f64 {
        let mut pp = vec![0.0; self.pi.len()];
        for (i, row) in self.p.iter().enumerate() {
            for &(j, v) in row {
                pp[j] += self.pi[i] * v;
            }
        }
        pp.iter().zip(&self.pi).map(|(a, b)| (a - b).abs()).sum()
    }

    /// Largest deviation of a row sum from one.
    pub fn row_sum_defect(&self) -> f64 {
        self.p
            .iter()
            .map(|row| (row.iter().map(|(_, v)| v).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// `pi_i = alpha_i beta_i` and `p_ij = m_ij alpha_j / (lambda alpha_i)`.
///
/// The ratio uses the column eigenvector, which is what makes the kernel
/// row-stochastic with `pi` stationary for a non-symmetric `M`.
pub fn build_mme(spec: &SpectralData, graph: &MarkovGraph) -> Result<MaxEntropyChain> {
    if spec.alpha.len() != graph.len() || spec.beta.len() != graph.len() {
        return Err(ShiftError::InvalidInput("spectral data does not match graph".into()));
    }
    if !(spec.residual <= 1e-8) {
        return Err(ShiftError::ResidualTooLarge(spec.residual));
    }
    for i in 0..graph.len() {
        if !(spec.alpha[i] > 0.0 && spec.beta[i] > 0.0) {
            return Err(ShiftError::VanishingEigenvector(graph.vertices[i].clone()));
        }
    }
    let lambda = spec.lambda;
    let pi: Vec<f64> = spec.alpha.iter().zip(&spec.beta).map(|(a, b)| a * b).collect();
    let p = (0..graph.len())
        .map(|i| {
            let row: Vec<(usize, f64)> = graph.succ[i]
                .iter()
                .map(|&j| (j, spec.alpha[j] / (lambda * spec.alpha[i])))
                .collect();
            // remove the eigenvector residual from the row sums
            let total: f64 = row.iter().map(|(_, v)| v).sum();
            row.into_iter().map(|(j, v)| (j, v / total)).collect()
        })
        .collect();
    Ok(MaxEntropyChain {
        vertices: graph.vertices.clone(),
        base: graph.base,
        h_top: lambda.ln(),
        pi,
        p,
    })
}

/// Entropy of the stationary chain, `-sum_i pi_i sum_j p_ij log p_ij`.
pub fn chain_entropy(chain: &MaxEntropyChain) -> f64 {
    let mut h = 0.0;
    for (i, row) in chain.p.iter().enumerate() {
        let mut hi = 0.0;
        for &(_, v) in row {
            if v > 0.0 {
                hi -= v * v.ln();
            }
        }
        h += chain.pi[i] * hi;
    }
    h
}

/// `Card Fix(sigma^p) = trace(M^p)`, exactly. Parallel over source vertices;
/// integer addition keeps the result independent of scheduling.
pub fn shift_periodic_census(graph: &MarkovGraph, p: usize) -> Result<BigUint> {
    if p == 0 {
        return Err(ShiftError::InvalidInput("period must be at least 1".into()));
    }
    let parts: Vec<BigUint> = (0..graph.len())
        .into_par_iter()
        .map(|v| graph.closed_walks_from(v, p))
        .collect();
    Ok(parts.into_iter().sum())
}

/// Cylinder `[v_0 ... v_k]` placed at position `anchor`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CylinderWord {
    pub vertices: Vec<String>,
    #[serde(default)]
    pub anchor: i64,
}

impl CylinderWord {
    pub fn new<S: AsRef<str>>(vertices: &[S]) -> Self {
        CylinderWord {
            vertices: vertices.iter().map(|s| s.as_ref().to_string()).collect(),
            anchor: 0,
        }
    }
}

fn cylinder_indices(graph: &MarkovGraph, cyl: &CylinderWord) -> Result<Vec<usize>> {
    if cyl.vertices.is_empty() {
        return Err(ShiftError::InvalidCylinder("empty cylinder".into()));
    }
    let idx = cyl
        .vertices
        .iter()
        .map(|v| graph.index_of(v).ok_or_else(|| ShiftError::UnknownVertex(v.clone())))
        .collect::<Result<Vec<_>>>()?;
    for w in idx.windows(2) {
        if !graph.has_arrow(w[0], w[1]) {
            return Err(ShiftError::InvalidCylinder(format!(
                "{} -> {} is not an arrow",
                graph.vertices[w[0]], graph.vertices[w[1]]
            )));
        }
    }
    Ok(idx)
}

/// Fraction of `Fix(sigma^p)` lying in the cylinder, next to the mass the
/// maximal-entropy chain gives it.
///
/// `Fix(sigma^p)` is shift-invariant, so the count does not depend on the
/// anchor: it is the number of closed walks of length `p` that start with
/// `v_0 ... v_k`.
pub fn equidistribution_cylinder(
    graph: &MarkovGraph,
    p: usize,
    cyl: &CylinderWord,
    chain: &MaxEntropyChain,
) -> Result<(f64, f64)> {
    let idx = cylinder_indices(graph, cyl)?;
    let k = idx.len() - 1;
    if p < idx.len() {
        return Err(ShiftError::InvalidInput(format!(
            "period {p} is shorter than the cylinder length {}",
            idx.len()
        )));
    }
    let total = shift_periodic_census(graph, p)?;
    if total.is_zero() {
        return Err(ShiftError::EmptyFixedSet(p));
    }
    let hits = graph.walks_between(idx[k], idx[0], p - k);
    let empirical = (big_ln(&hits) - big_ln(&total)).exp();
    let mut mme = chain.pi[idx[0]];
    for w in idx.windows(2) {
        mme *= chain.transition(w[0], w[1]);
    }
    Ok((empirical, mme))
}

/// Strongly connected with period one.
pub fn is_mixing(graph: &MarkovGraph) -> bool {
    graph.period() == Some(1)
}

/// `pi_e Z*_n e^{-n h}`: probability under the chain of a first return to the
/// base after exactly `n` steps.
pub fn return_time_tail(chain: &MaxEntropyChain, census: &LoopCensus, n: usize) -> Result<f64> {
    if n > census.horizon {
        return Err(ShiftError::InvalidInput(format!(
            "n = {n} exceeds the census horizon {}",
            census.horizon
        )));
    }
    let zs = &census.zstar[n];
    if zs.is_zero() {
        return Ok(0.0);
    }
    Ok(chain.pi[chain.base] * (big_ln(zs) - n as f64 * chain.h_top).exp())
}

/// Serde helper: big integers as decimal strings.
pub mod biguint_vec {
    use num_bigint::BigUint;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[BigUint], s: S) -> Result<S::Ok, S::Error> {
        let strings: Vec<String> = v.iter().map(|x| x.to_str_radix(10)).collect();
        strings.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<BigUint>, D::Error> {
        let strings = Vec::<String>::deserialize(d)?;
        strings
            .iter()
            .map(|s| {
                BigUint::parse_bytes(s.as_bytes(), 10)
                    .ok_or_else(|| serde::de::Error::custom(format!("bad integer {s:?}")))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn big(v: &[u64]) -> Vec<BigUint> {
        v.iter().map(|&x| BigUint::from(x)).collect()
    }

    /// Brute-force enumeration of all paths of length n from the base back
    /// to the base, split into all loops and first returns.
    fn enumerate_loops(g: &MarkovGraph, n: usize) -> (u64, u64) {
        fn rec(g: &MarkovGraph, v: usize, left: usize, touched: bool, acc: &mut (u64, u64)) {
            if left == 0 {
                if v == g.base() {
                    acc.0 += 1;
                    if !touched {
                        acc.1 += 1;
                    }
                }
                return;
            }
            for &w in g.successors(v) {
                let t = touched || (left > 1 && w == g.base());
                rec(g, w, left - 1, t, acc);
            }
        }
        let mut acc = (0, 0);
        rec(g, g.base(), n, false, &mut acc);
        acc
    }

    fn matrix_power_entry(g: &MarkovGraph, p: usize, i: usize, j: usize) -> u64 {
        let n = g.len();
        let mut m = vec![vec![0u64; n]; n];
        for (a, b) in g.arrows() {
            m[a][b] = 1;
        }
        let mut acc: Vec<Vec<u64>> = (0..n).map(|r| (0..n).map(|c| (r == c) as u64).collect()).collect();
        for _ in 0..p {
            let mut next = vec![vec![0u64; n]; n];
            for r in 0..n {
                for k in 0..n {
                    if acc[r][k] != 0 {
                        for c in 0..n {
                            next[r][c] += acc[r][k] * m[k][c];
                        }
                    }
                }
            }
            acc = next;
        }
        acc[i][j]
    }

    #[test]
    fn self_loop_census() {
        let g = MarkovGraph::from_indices(1, &[(0, 0)], 0).unwrap();
        let c = count_loops(&g, 5).unwrap();
        assert_eq!(&c.z[1..], &big(&[1, 1, 1, 1, 1])[..]);
        assert_eq!(&c.zstar[1..], &big(&[1, 0, 0, 0, 0])[..]);
    }

    #[test]
    fn golden_mean_census_matches_enumeration() {
        let g = MarkovGraph::golden_mean();
        let c = count_loops(&g, 4).unwrap();
        assert_eq!(&c.z[1..], &big(&[1, 2, 3, 5])[..]);
        assert_eq!(&c.zstar[1..], &big(&[1, 1, 0, 0])[..]);
        for n in 1..=4 {
            let (z, zs) = enumerate_loops(&g, n);
            assert_eq!(c.z[n], BigUint::from(z));
            assert_eq!(c.zstar[n], BigUint::from(zs));
        }
    }

    #[test]
    fn complete_two_vertex_census() {
        let g = MarkovGraph::full_shift(2);
        let c = count_loops(&g, 3).unwrap();
        assert_eq!(&c.z[1..], &big(&[1, 2, 4])[..]);
        for n in 1..=3 {
            assert_eq!(c.z[n], BigUint::from(matrix_power_entry(&g, n, 0, 0)));
        }
    }

    #[test]
    fn empty_graph_is_rejected() {
        let none: [&str; 0] = [];
        assert_eq!(MarkovGraph::new(&none, &[], "e"), Err(ShiftError::EmptyGraph));
    }

    #[test]
    fn graph_json_round_trip() {
        let json = r#"{"vertices":["e","g0"],"arrows":[["e","g0"],["g0","e"],["e","e"]],"base":"e"}"#;
        let spec: GraphSpec = serde_json::from_str(json).unwrap();
        let g = MarkovGraph::from_spec(&spec).unwrap();
        assert_eq!(g.len(), 2);
        assert!(g.has_arrow(0, 0) && g.has_arrow(0, 1) && g.has_arrow(1, 0));
        let g2 = MarkovGraph::from_spec(&g.to_spec()).unwrap();
        assert_eq!(g, g2);
        let ints: GraphSpec = serde_json::from_str(r#"{"vertices":[0,1],"arrows":[[0,1],[1,0]],"base":0}"#).unwrap();
        assert_eq!(MarkovGraph::from_spec(&ints).unwrap().len(), 2);
        let bad: GraphSpec = serde_json::from_str(r#"{"vertices":[0],"arrows":[[0,1]],"base":0}"#).unwrap();
        assert_eq!(MarkovGraph::from_spec(&bad), Err(ShiftError::UnknownVertex("1".into())));
    }

    #[test]
    fn radii_examples() {
        let c = count_loops(&MarkovGraph::full_shift(2), 400).unwrap();
        let r = radii(&c).unwrap();
        assert!((r.r - 0.5).abs() < 2e-3, "{r:?}");

        let c = count_loops(&MarkovGraph::from_indices(1, &[(0, 0)], 0).unwrap(), 16).unwrap();
        let r = radii(&c).unwrap();
        assert_eq!(r.r, 1.0);
        assert_eq!(r.r_star, f64::INFINITY);

        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let c = count_loops(&MarkovGraph::golden_mean(), 400).unwrap();
        let r = radii(&c).unwrap();
        assert!((r.r - 1.0 / phi).abs() < 2e-3, "{r:?}");
        assert_eq!(r.r_star, f64::INFINITY);

        let short = count_loops(&MarkovGraph::golden_mean(), 7).unwrap();
        assert_eq!(radii(&short), Err(ShiftError::HorizonTooShort(7)));
    }

    /// A base vertex hanging off a dense cluster: first returns grow at the
    /// same rate as all loops.
    fn bottleneck() -> MarkovGraph {
        let mut arrows = vec![(0, 1), (1, 0)];
        for a in 1..4 {
            for b in 1..4 {
                arrows.push((a, b));
            }
        }
        MarkovGraph::from_indices(4, &arrows, 0).unwrap()
    }

    #[test]
    fn spr_examples() {
        let rep = is_spr(&count_loops(&MarkovGraph::golden_mean(), 64).unwrap(), 0.1).unwrap();
        assert!(rep.spr && !rep.degenerate);
        assert_eq!(rep.r_star, f64::INFINITY);

        let rep = is_spr(&count_loops(&MarkovGraph::from_indices(1, &[(0, 0)], 0).unwrap(), 64).unwrap(), 0.1).unwrap();
        assert!(rep.spr && rep.degenerate);

        let rep = is_spr(&count_loops(&bottleneck(), 200).unwrap(), 0.05).unwrap();
        assert!(!rep.spr, "{rep:?}");
        assert!(rep.gap.abs() < 0.05);
    }

    #[test]
    fn short_horizon_is_flagged() {
        let rep = is_spr(&count_loops(&MarkovGraph::golden_mean(), 10).unwrap(), 0.0).unwrap();
        assert!(rep.short_horizon_warning);
    }

    #[test]
    fn entropy_examples() {
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((gurevich_entropy(&MarkovGraph::full_shift(2)).unwrap() - 2f64.ln()).abs() < 1e-12);
        let h = gurevich_entropy(&MarkovGraph::golden_mean()).unwrap();
        assert!((h - phi.ln()).abs() < 1e-12);
        assert!((h - 0.4812118).abs() < 1e-7);
        let one = MarkovGraph::from_indices(1, &[(0, 0)], 0).unwrap();
        assert!(gurevich_entropy(&one).unwrap().abs() < 1e-12);
        assert!(gurevich_entropy(&MarkovGraph::cycle(3)).unwrap().abs() < 1e-12);
    }

    #[test]
    fn entropy_rejects_reducible_graph() {
        let g = MarkovGraph::from_indices(2, &[(0, 0), (0, 1), (1, 1)], 0).unwrap();
        match gurevich_entropy(&g) {
            Err(ShiftError::NotStronglyConnected { from, to }) => {
                assert_eq!((from.as_str(), to.as_str()), ("1", "0"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn perron_golden_mean_closed_form() {
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let s = perron(&MarkovGraph::golden_mean(), 1e-13).unwrap();
        assert!((s.lambda - phi).abs() < 1e-12);
        // symmetric matrix: alpha and beta are both proportional to (phi, 1)
        assert!((s.alpha[0] / s.alpha[1] - phi).abs() < 1e-10);
        assert!((s.beta[0] / s.beta[1] - phi).abs() < 1e-10);
        let dot: f64 = s.alpha.iter().zip(&s.beta).map(|(a, b)| a * b).sum();
        assert!((dot - 1.0).abs() < 1e-12);
        assert!(s.residual <= 1e-12);
    }

    #[test]
    fn perron_uniform_cases() {
        let s = perron(&MarkovGraph::full_shift(2), 1e-13).unwrap();
        assert!((s.lambda - 2.0).abs() < 1e-12);
        assert!((s.alpha[0] - s.alpha[1]).abs() < 1e-12);
        let s = perron(&MarkovGraph::cycle(3), 1e-13).unwrap();
        assert!((s.lambda - 1.0).abs() < 1e-12);
        for i in 0..3 {
            assert!((s.alpha[i] - 1.0 / 3.0).abs() < 1e-10);
            assert!((s.beta[i] - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn perron_reports_non_convergence() {
        let mut arrows: Vec<(usize, usize)> = (0..50).map(|i| (i, (i + 1) % 50)).collect();
        arrows.push((0, 0));
        let g = MarkovGraph::from_indices(50, &arrows, 0).unwrap();
        match perron_with_limit(&g, 1e-14, 3) {
            Err(ShiftError::NoConvergence { iterations, residual }) => {
                assert_eq!(iterations, 3);
                assert!(residual > 0.0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn mme_examples() {
        let g = MarkovGraph::full_shift(2);
        let c = build_mme(&perron(&g, 1e-13).unwrap(), &g).unwrap();
        for i in 0..2 {
            assert!((c.pi[i] - 0.5).abs() < 1e-12);
            for j in 0..2 {
                assert!((c.transition(i, j) - 0.5).abs() < 1e-12);
            }
        }

        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let g = MarkovGraph::golden_mean();
        let c = build_mme(&perron(&g, 1e-13).unwrap(), &g).unwrap();
        // closed form: pi_0 = phi^2 / (1 + phi^2), p_00 = 1/phi, p_01 = 1/phi^2
        assert!((c.pi[0] - phi * phi / (1.0 + phi * phi)).abs() < 1e-12);
        assert!((c.transition(0, 0) - 1.0 / phi).abs() < 1e-12);
        assert!((c.transition(0, 1) - 1.0 / (phi * phi)).abs() < 1e-12);
        assert!((c.transition(1, 0) - 1.0).abs() < 1e-12);
        assert_eq!(c.transition(1, 1), 0.0);

        let g = MarkovGraph::cycle(3);
        let c = build_mme(&perron(&g, 1e-13).unwrap(), &g).unwrap();
        assert!((c.transition(0, 1) - 1.0).abs() < 1e-12);
        assert!((c.pi[2] - 1.0 / 3.0).abs() < 1e-10);
        assert!(chain_entropy(&c).abs() < 1e-12);
    }

    #[test]
    fn mme_rejects_vanishing_vector() {
        let g = MarkovGraph::golden_mean();
        let mut s = perron(&g, 1e-13).unwrap();
        s.beta[1] = 0.0;
        assert_eq!(build_mme(&s, &g), Err(ShiftError::VanishingEigenvector("1".into())));
        s.beta[1] = 1.0;
        s.residual = 1.0;
        assert_eq!(build_mme(&s, &g), Err(ShiftError::ResidualTooLarge(1.0)));
    }

    #[test]
    fn periodic_census_examples() {
        assert_eq!(shift_periodic_census(&MarkovGraph::full_shift(2), 5).unwrap(), BigUint::from(32u32));
        assert_eq!(shift_periodic_census(&MarkovGraph::golden_mean(), 4).unwrap(), BigUint::from(7u32));
        assert_eq!(shift_periodic_census(&MarkovGraph::cycle(3), 2).unwrap(), BigUint::zero());
    }

    #[test]
    fn equidistribution_examples() {
        let g = MarkovGraph::full_shift(2);
        let chain = build_mme(&perron(&g, 1e-13).unwrap(), &g).unwrap();
        for p in [1, 3, 8] {
            let (emp, mme) = equidistribution_cylinder(&g, p, &CylinderWord::new(&["0"]), &chain).unwrap();
            assert!((emp - 0.5).abs() < 1e-15);
            assert!((mme - 0.5).abs() < 1e-12);
        }

        let g = MarkovGraph::cycle(3);
        let chain = build_mme(&perron(&g, 1e-13).unwrap(), &g).unwrap();
        let (emp, mme) = equidistribution_cylinder(&g, 3, &CylinderWord::new(&["0"]), &chain).unwrap();
        assert!((emp - 1.0 / 3.0).abs() < 1e-15);
        assert!((mme - 1.0 / 3.0).abs() < 1e-10);
        assert_eq!(
            equidistribution_cylinder(&g, 2, &CylinderWord::new(&["0"]), &chain),
            Err(ShiftError::EmptyFixedSet(2))
        );

        // golden mean, [0,0], p = 10: (M^9)_00 = F_10 = 55 and trace M^10 = L_10 = 123
        let g = MarkovGraph::golden_mean();
        let chain = build_mme(&perron(&g, 1e-13).unwrap(), &g).unwrap();
        let mut cyl = CylinderWord::new(&["0", "0"]);
        let (emp, mme) = equidistribution_cylinder(&g, 10, &cyl, &chain).unwrap();
        assert!((emp - 55.0 / 123.0).abs() < 1e-15);
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((emp - mme).abs() < 2.0 * phi.powi(-20));
        cyl.anchor = 7;
        assert_eq!(equidistribution_cylinder(&g, 10, &cyl, &chain).unwrap().0, emp);
        let bad = CylinderWord::new(&["1", "1"]);
        assert!(matches!(
            equidistribution_cylinder(&g, 10, &bad, &chain),
            Err(ShiftError::InvalidCylinder(_))
        ));
    }

    #[test]
    fn mixing_examples() {
        assert!(is_mixing(&MarkovGraph::full_shift(2)));
        assert!(!is_mixing(&MarkovGraph::cycle(3)));
        assert!(is_mixing(&MarkovGraph::golden_mean()));
        let two_three = MarkovGraph::from_indices(3, &[(0, 1), (1, 0), (1, 2), (2, 0)], 0).unwrap();
        assert!(is_mixing(&two_three));
        let reducible = MarkovGraph::from_indices(2, &[(0, 0), (0, 1)], 0).unwrap();
        assert!(!is_mixing(&reducible));
    }

    #[test]
    fn return_tail_examples() {
        let one = MarkovGraph::from_indices(1, &[(0, 0)], 0).unwrap();
        let chain = build_mme(&perron(&one, 1e-13).unwrap(), &one).unwrap();
        let c = count_loops(&one, 4).unwrap();
        assert!((return_time_tail(&chain, &c, 1).unwrap() - 1.0).abs() < 1e-12);

        let g = MarkovGraph::golden_mean();
        let chain = build_mme(&perron(&g, 1e-13).unwrap(), &g).unwrap();
        let c = count_loops(&g, 10).unwrap();
        assert_eq!(return_time_tail(&chain, &c, 3).unwrap(), 0.0);
        let total: f64 = (1..=10).map(|n| return_time_tail(&chain, &c, n).unwrap()).sum();
        // Kac: the first-return probabilities started from the base sum to pi_e
        assert!((total - chain.pi[0]).abs() < 1e-12);

        let g = MarkovGraph::full_shift(2);
        let chain = build_mme(&perron(&g, 1e-13).unwrap(), &g).unwrap();
        let c = count_loops(&g, 30).unwrap();
        for n in 2..30 {
            let a = return_time_tail(&chain, &c, n).unwrap();
            let b = return_time_tail(&chain, &c, n + 1).unwrap();
            assert!((b / a - 0.5).abs() < 1e-12);
        }
    }

    fn random_graph() -> impl Strategy<Value = MarkovGraph> {
        (1usize..=6)
            .prop_flat_map(|n| (Just(n), proptest::collection::vec(any::<bool>(), n * n)))
            .prop_map(|(n, bits)| {
                let mut arrows: Vec<(usize, usize)> = (0..n).map(|i| (i, (i + 1) % n)).collect();
                for (k, b) in bits.iter().enumerate() {
                    if *b {
                        arrows.push((k / n, k % n));
                    }
                }
                MarkovGraph::from_indices(n, &arrows, 0).unwrap()
            })
    }

    proptest! {
        #[test]
        fn renewal_and_enumeration_agree(g in random_graph(), n in 1usize..=9) {
            let c = count_loops(&g, n).unwrap();
            prop_assert!(c.renewal_holds());
            let (z, zs) = enumerate_loops(&g, n);
            prop_assert_eq!(&c.z[n], &BigUint::from(z));
            prop_assert_eq!(&c.zstar[n], &BigUint::from(zs));
            prop_assert!(c.zstar[n] <= c.z[n]);
            let rebuilt = LoopCensus::from_first_returns(&c.base, &c.zstar);
            prop_assert_eq!(rebuilt.z, c.z);
        }

        #[test]
        fn chain_is_stationary_and_attains_entropy(g in random_graph()) {
            let s = perron(&g, 1e-13).unwrap();
            let chain = build_mme(&s, &g).unwrap();
            prop_assert!(chain.stationarity_defect() <= 1e-10);
            prop_assert!(chain.row_sum_defect() <= 1e-12);
            prop_assert!((chain_entropy(&chain) - s.lambda.ln()).abs() <= 1e-9);
        }

        #[test]
        fn trace_matches_matrix_power(g in random_graph(), p in 1usize..=8) {
            let t = shift_periodic_census(&g, p).unwrap();
            let oracle: u64 = (0..g.len()).map(|i| matrix_power_entry(&g, p, i, i)).sum();
            prop_assert_eq!(t, BigUint::from(oracle));
        }

        #[test]
        fn periodic_growth_matches_entropy(g in random_graph()) {
            prop_assume!(is_mixing(&g));
            let h = gurevich_entropy(&g).unwrap();
            let est = big_ln(&shift_periodic_census(&g, 60).unwrap()) / 60.0;
            prop_assert!((est - h).abs() <= 0.03, "est {} h {}", est, h);
        }
    }
}
