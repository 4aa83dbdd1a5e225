//! Symbolic alphabet of puzzle pieces and its word combinatorics.
//!
//! Symbols carry an order `n_a`; words add orders. On top of that sit the
//! regularity predicate, the `aleph` run-length function, validation of
//! common sequences, right divisibility, and the counting recursions that
//! bound the number of first-return words. A [`SuitabilityModel`] stands in
//! for the geometric suitability relation; the built-in full model saturates
//! the multiplicity bound of two symbols per order.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::{big_ln, serde_f64};
use crate::shift_core::LoopCensus;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WordsError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("no spelling for parabolic symbol {0}")]
    MissingSpelling(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, WordsError>;

/// Model constants. Only `M` and `b` are stored; everything else is derived.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    #[serde(rename = "M")]
    m: u64,
    b: f64,
}

impl Params {
    pub fn new(m: u64, b: f64) -> Result<Self> {
        if m < 4 {
            return Err(WordsError::InvalidParams(format!("M = {m} must be at least 4")));
        }
        if !(0.0..1.0).contains(&b) {
            return Err(WordsError::InvalidParams(format!("b = {b} must lie in [0, 1)")));
        }
        Ok(Params { m, b })
    }

    pub fn m(&self) -> u64 {
        self.m
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    /// `1 / |log b|`; zero at `b = 0`.
    pub fn theta(&self) -> f64 {
        if self.b == 0.0 {
            0.0
        } else {
            1.0 / self.b.ln().abs()
        }
    }

    pub fn c(&self) -> f64 {
        std::f64::consts::LN_2 / 2.0
    }

    pub fn c_plus(&self) -> f64 {
        5f64.ln()
    }

    pub fn epsilon(&self) -> f64 {
        1.0 / (self.m as f64).sqrt()
    }

    pub fn c_minus(&self) -> f64 {
        self.c() - self.epsilon()
    }

    /// `ln Xi = sqrt(M)`.
    pub fn ln_xi(&self) -> f64 {
        (self.m as f64).sqrt()
    }

    /// `Xi = e^{sqrt M}`; infinite when it overflows.
    pub fn xi(&self) -> Xi {
        Xi::from_ln(self.ln_xi())
    }

    pub fn s(&self) -> f64 {
        1.0 / (self.m as f64).sqrt()
    }

    /// `lambda = e^{-M^{1/4}}`.
    pub fn lambda(&self) -> f64 {
        (-(self.m as f64).powf(0.25)).exp()
    }
}

/// A nonnegative factor kept both as a value and as a logarithm, so that
/// `n <= M + xi * sum` can be decided without overflow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Xi {
    value: f64,
    ln: f64,
}

impl Xi {
    pub fn value(v: f64) -> Self {
        Xi { value: v, ln: v.ln() }
    }

    pub fn from_ln(ln: f64) -> Self {
        Xi { value: ln.exp(), ln }
    }

    pub fn get(&self) -> f64 {
        self.value
    }

    pub fn ln(&self) -> f64 {
        self.ln
    }

    /// Decides `lhs <= base + xi * sum` for integers.
    pub fn bounds(&self, lhs: u64, base: u64, sum: u64) -> bool {
        if lhs <= base {
            return true;
        }
        if sum == 0 || self.value == 0.0 {
            return false;
        }
        let excess = (lhs - base) as f64;
        let rhs = self.value * sum as f64;
        if rhs.is_finite() && rhs < 9.0e15 {
            excess <= rhs
        } else {
            excess.ln() <= self.ln + (sum as f64).ln()
        }
    }

    /// Smallest order strictly above `base + xi * sum`, or `None` if it
    /// exceeds `cap`.
    pub fn first_order_above(&self, base: u64, sum: u64, cap: u64) -> Option<u64> {
        let mut n = base + 1;
        if sum > 0 {
            let t = self.value * sum as f64;
            if !(t < cap as f64) {
                return None;
            }
            n = base + t.floor() as u64 + 1;
            // step past rounding in the conversion
            while n > base + 1 && !self.bounds(n - 1, base, sum) {
                n -= 1;
            }
            while self.bounds(n, base, sum) {
                n += 1;
            }
        }
        (n <= cap).then_some(n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sign {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
    #[serde(rename = "b")]
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SymbolKind {
    Simple,
    Parabolic { depth: u32, sign: Sign },
    Square,
    SquareC,
}

/// Order of a symbol or word; `Infinite` only through the stable-leaf symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Order {
    Finite(u64),
    Infinite,
}

impl Order {
    pub fn finite(&self) -> Option<u64> {
        match self {
            Order::Finite(n) => Some(*n),
            Order::Infinite => None,
        }
    }
}

impl Serialize for Order {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Order::Finite(n) => s.serialize_u64(*n),
            Order::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Order {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            N(u64),
            S(String),
        }
        match Repr::deserialize(d)? {
            Repr::N(n) => Ok(Order::Finite(n)),
            Repr::S(s) if s == "inf" => Ok(Order::Infinite),
            Repr::S(s) => Err(serde::de::Error::custom(format!("bad order {s:?}"))),
        }
    }
}

/// A symbol of the alphabet. `index` tells apart symbols that share kind and
/// order (the two simple symbols of a given order, for instance).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Symbol {
    #[serde(flatten)]
    pub kind: SymbolKind,
    pub order: Order,
    #[serde(default)]
    pub index: u8,
}

impl Symbol {
    pub fn simple(order: u64, index: u8) -> Self {
        Symbol {
            kind: SymbolKind::Simple,
            order: Order::Finite(order),
            index,
        }
    }

    pub fn parabolic(order: u64, depth: u32, sign: Sign) -> Self {
        Symbol {
            kind: SymbolKind::Parabolic { depth, sign },
            order: Order::Finite(order),
            index: 0,
        }
    }

    pub fn square(m: u64) -> Self {
        Symbol {
            kind: SymbolKind::Square,
            order: Order::Finite(m + 1),
            index: 0,
        }
    }

    pub fn square_c() -> Self {
        Symbol {
            kind: SymbolKind::SquareC,
            order: Order::Infinite,
            index: 0,
        }
    }

    /// The order-2 simple symbol on the minus side of the critical value.
    pub fn s_minus() -> Self {
        Symbol::simple(2, 0)
    }

    pub fn s_plus() -> Self {
        Symbol::simple(2, 1)
    }

    pub fn is_simple(&self) -> bool {
        self.kind == SymbolKind::Simple
    }

    pub fn is_parabolic(&self) -> bool {
        matches!(self.kind, SymbolKind::Parabolic { .. })
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = match self.order {
            Order::Finite(n) => n.to_string(),
            Order::Infinite => "inf".into(),
        };
        match self.kind {
            SymbolKind::Simple => write!(f, "s{n}.{}", self.index),
            SymbolKind::Parabolic { depth, sign } => {
                let sg = match sign {
                    Sign::Plus => "+",
                    Sign::Minus => "-",
                    Sign::B => "b",
                };
                write!(f, "p{sg}{n}/{depth}")
            }
            SymbolKind::Square => write!(f, "sq{n}"),
            SymbolKind::SquareC => write!(f, "sqc"),
        }
    }
}

/// A finite word; the empty word is the unit `e`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Word(pub Vec<Symbol>);

impl Word {
    pub fn unit() -> Self {
        Word(Vec::new())
    }

    pub fn is_unit(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.0
    }

    pub fn order(&self) -> Order {
        word_order(&self.0)
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Word(v)
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "e");
        }
        for (i, s) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

fn word_order(symbols: &[Symbol]) -> Order {
    let mut n = 0u64;
    for s in symbols {
        match s.order {
            Order::Finite(k) => n += k,
            Order::Infinite => return Order::Infinite,
        }
    }
    Order::Finite(n)
}

/// `n_{a_i} <= M + xi * sum_{j<i} n_{a_j}` for every position.
pub fn is_xi_regular(w: &Word, xi: Xi, params: &Params) -> bool {
    let mut prefix = 0u64;
    for s in &w.0 {
        let Some(n) = s.order.finite() else {
            return false;
        };
        if !xi.bounds(n, params.m, prefix) {
            return false;
        }
        prefix += n;
    }
    true
}

/// Words whose last symbol is too long for regularity of the word it ends:
/// `n_{a_m} > M + Xi * sum_{k<m} n_{a_k}`. Equality counts as regular.
pub fn is_long_block(w: &Word, params: &Params) -> bool {
    let Some((last, head)) = w.0.split_last() else {
        return false;
    };
    let Order::Finite(prefix) = word_order(head) else {
        return false;
    };
    match last.order {
        Order::Finite(n) => !params.xi().bounds(n, params.m, prefix),
        Order::Infinite => true,
    }
}

/// Integer part of `log M / (6 c+)` at `i = 0` and of `c (i + M) / (6 c+)`
/// otherwise.
pub fn aleph(i: u64, params: &Params) -> u64 {
    let v = if i == 0 {
        (params.m as f64).ln() / (6.0 * params.c_plus())
    } else {
        params.c() * (i + params.m) as f64 / (6.0 * params.c_plus())
    };
    v.floor() as u64
}

/// A piece of a common sequence: a simple symbol, or a segment of the square
/// box with a given order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "tag")]
pub enum CommonPiece {
    Simple { symbol: Symbol },
    SquareSegment { order: u64 },
}

impl CommonPiece {
    pub fn order(&self) -> u64 {
        match self {
            CommonPiece::Simple { symbol } => symbol.order.finite().unwrap_or(u64::MAX),
            CommonPiece::SquareSegment { order } => *order,
        }
    }

    fn is(&self, s: Symbol) -> bool {
        matches!(self, CommonPiece::Simple { symbol } if *symbol == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrefixVerdict {
    pub depth: usize,
    pub order: u64,
    pub condition2: bool,
    pub condition3: bool,
    pub condition4: bool,
    /// order of the product is at most `M * depth`
    pub order_bound: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommonSequenceReport {
    /// attachment of the first piece to the curve is geometric and not checked
    pub condition1: String,
    pub prefixes: Vec<PrefixVerdict>,
    pub first_failure: Option<(usize, u8)>,
    pub valid: bool,
    pub order_bound_holds: bool,
}

/// Checks conditions 2 to 4 of a common sequence on every prefix.
pub fn validate_common_sequence(seq: &[CommonPiece], params: &Params) -> CommonSequenceReport {
    let m = params.m;
    let sqrt_m = params.ln_xi();
    let mut prefixes = Vec::with_capacity(seq.len());
    let mut first_failure = None;
    let mut total = 0u64;
    let mut square_total = 0u64;
    // run_ok[n] stays true while runs started after position n are short enough
    let mut cond4_ok = true;
    for (j0, piece) in seq.iter().enumerate() {
        let j = j0 + 1;
        let n = piece.order();
        let cond2 = match piece {
            CommonPiece::Simple { symbol } => {
                symbol.is_simple() && symbol.order.finite().is_some_and(|k| (2..=m).contains(&k))
            }
            CommonPiece::SquareSegment { order } => *order > m,
        };
        if n > m {
            square_total += n;
        }
        // sum over l <= j with n >= M+1  <=  e^{-sqrt M} * sum_{l < j} n_l
        let cond3 = square_total == 0
            || (total > 0 && (square_total as f64).ln() + sqrt_m <= (total as f64).ln());
        if cond4_ok {
            cond4_ok = !run_violation_ends_at(seq, j0, params);
        }
        total = total.saturating_add(n);
        let v = PrefixVerdict {
            depth: j,
            order: total,
            condition2: cond2,
            condition3: cond3,
            condition4: cond4_ok,
            order_bound: total <= m.saturating_mul(j as u64),
        };
        if first_failure.is_none() {
            for (ok, c) in [(cond2, 2u8), (cond3, 3), (cond4_ok, 4)] {
                if !ok {
                    first_failure = Some((j, c));
                    break;
                }
            }
        }
        prefixes.push(v);
    }
    let valid = prefixes
        .iter()
        .all(|p| p.condition2 && p.condition3 && p.condition4);
    CommonSequenceReport {
        condition1: "unchecked".into(),
        order_bound_holds: prefixes.iter().all(|p| p.order_bound),
        prefixes,
        first_failure,
        valid,
    }
}

/// Whether the piece at `end` completes a run of `s-` (possibly led by one
/// `s+`) that is too long for the position it started after.
fn run_violation_ends_at(seq: &[CommonPiece], end: usize, params: &Params) -> bool {
    let minus = Symbol::s_minus();
    let plus = Symbol::s_plus();
    if !seq[end].is(minus) {
        return false;
    }
    let mut start = end;
    while start > 0 && seq[start - 1].is(minus) {
        start -= 1;
    }
    // pure run: pieces start..=end are s-, preceded by n = start pieces
    for n in start..=end {
        let k = (end - n + 1) as u64;
        if k >= aleph(n as u64, params) {
            return true;
        }
    }
    // run led by s+ at position start - 1
    if start > 0 && seq[start - 1].is(plus) {
        let n = start - 1;
        let k = (end - start + 1) as u64;
        if k >= aleph(n as u64, params) {
            return true;
        }
    }
    false
}

/// Spelling of parabolic symbols as words.
pub trait SpellingMap {
    fn spelling_of(&self, s: &Symbol) -> Option<Word>;
}

impl SpellingMap for HashMap<Symbol, Word> {
    fn spelling_of(&self, s: &Symbol) -> Option<Word> {
        self.get(s).cloned()
    }
}

/// Right divisibility `a / b`:
/// D1 `a = b` or `b = e`; D2 `a` is one parabolic symbol and its spelling
/// divides `b`; D3 `a = a3 a2 a1`, `b = b2 a1`, `a2 / b2`, with `a3 a1`
/// nonempty.
pub fn divides(a: &Word, b: &Word, spelling: &dyn SpellingMap) -> Result<bool> {
    let mut memo = HashMap::new();
    div_rec(&a.0, &b.0, spelling, &mut memo)
}

fn div_rec(
    a: &[Symbol],
    b: &[Symbol],
    sp: &dyn SpellingMap,
    memo: &mut HashMap<(Vec<Symbol>, Vec<Symbol>), bool>,
) -> Result<bool> {
    if b.is_empty() || a == b {
        return Ok(true);
    }
    if a.is_empty() {
        return Ok(false);
    }
    let key = (a.to_vec(), b.to_vec());
    if let Some(&v) = memo.get(&key) {
        return Ok(v);
    }
    let mut result = false;
    if a.len() == 1 && a[0].is_parabolic() {
        let spell = sp
            .spelling_of(&a[0])
            .ok_or_else(|| WordsError::MissingSpelling(a[0].to_string()))?;
        result = div_rec(&spell.0, b, sp, memo)?;
    }
    let len = a.len();
    'outer: for j in (0..=len).rev() {
        let a1 = &a[j..];
        if a1.len() > b.len() || !b.ends_with(a1) {
            continue;
        }
        let b2 = &b[..b.len() - a1.len()];
        for i in 0..=j {
            if result {
                break 'outer;
            }
            if i == 0 && j == len {
                continue;
            }
            result = div_rec(&a[i..j], b2, sp, memo)?;
        }
    }
    memo.insert(key, result);
    Ok(result)
}

/// All right divisors of `a`, built constructively from D1 to D3.
pub fn divisors(a: &Word, spelling: &dyn SpellingMap) -> Result<HashSet<Word>> {
    let mut memo = HashMap::new();
    divisors_rec(&a.0, spelling, &mut memo)
}

fn divisors_rec(
    a: &[Symbol],
    sp: &dyn SpellingMap,
    memo: &mut HashMap<Vec<Symbol>, HashSet<Word>>,
) -> Result<HashSet<Word>> {
    if let Some(d) = memo.get(a) {
        return Ok(d.clone());
    }
    let mut out = HashSet::new();
    out.insert(Word::unit());
    out.insert(Word(a.to_vec()));
    if a.len() == 1 && a[0].is_parabolic() {
        let spell = sp
            .spelling_of(&a[0])
            .ok_or_else(|| WordsError::MissingSpelling(a[0].to_string()))?;
        out.extend(divisors_rec(&spell.0, sp, memo)?);
    }
    let len = a.len();
    for j in 0..=len {
        for i in 0..=j {
            if i == 0 && j == len {
                continue;
            }
            for b2 in divisors_rec(&a[i..j], sp, memo)? {
                let mut w = b2.0;
                w.extend_from_slice(&a[j..]);
                out.insert(Word(w));
            }
        }
    }
    memo.insert(a.to_vec(), out.clone());
    Ok(out)
}

/// Supply of parabolic symbols per order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParabolicSupply {
    /// two symbols (signs + and -) for every order `>= M + 1`
    Saturated,
    /// no parabolic symbols at all
    Absent,
    /// explicit multiplicities (at most two) per order
    Table(BTreeMap<u64, u8>),
}

/// Abstract stand-in for the suitability relation: which symbols may follow a
/// given prefix. The built-in models are prefix independent.
#[derive(Debug, Clone, PartialEq)]
pub struct SuitabilityModel {
    params: Params,
    simple: Vec<u8>,
    parabolic: ParabolicSupply,
}

/// JSON form: `{"M":100,"b":1e-8,"model":"full"}`. `model` is `"full"` or
/// `"simple_only"`; `"table"` reads `parabolic` as order/multiplicity pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    #[serde(rename = "M")]
    pub m: u64,
    pub b: f64,
    #[serde(default = "default_model")]
    pub model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parabolic: Option<BTreeMap<u64, u8>>,
}

fn default_model() -> String {
    "full".into()
}

impl SuitabilityModel {
    /// Two simple symbols per order in `[2, M]`, two parabolic symbols per
    /// order `>= M + 1`.
    pub fn full(params: Params) -> Self {
        SuitabilityModel {
            params,
            simple: vec![2; params.m as usize + 1],
            parabolic: ParabolicSupply::Saturated,
        }
    }

    pub fn simple_only(params: Params) -> Self {
        SuitabilityModel {
            parabolic: ParabolicSupply::Absent,
            ..SuitabilityModel::full(params)
        }
    }

    pub fn with_parabolic(params: Params, parabolic: ParabolicSupply) -> Result<Self> {
        if let ParabolicSupply::Table(t) = &parabolic {
            if let Some((k, v)) = t.iter().find(|(k, v)| **k <= params.m || **v > 2) {
                return Err(WordsError::InvalidInput(format!(
                    "parabolic order {k} with multiplicity {v} is not admissible"
                )));
            }
        }
        Ok(SuitabilityModel {
            parabolic,
            ..SuitabilityModel::full(params)
        })
    }

    pub fn from_spec(spec: &ModelSpec) -> Result<Self> {
        let params = Params::new(spec.m, spec.b)?;
        match spec.model.as_str() {
            "full" => Ok(SuitabilityModel::full(params)),
            "simple_only" => Ok(SuitabilityModel::simple_only(params)),
            "table" => SuitabilityModel::with_parabolic(
                params,
                ParabolicSupply::Table(spec.parabolic.clone().unwrap_or_default()),
            ),
            other => Err(WordsError::InvalidInput(format!("unknown model {other:?}"))),
        }
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn simple_multiplicity(&self, order: u64) -> u64 {
        if (2..=self.params.m).contains(&order) {
            self.simple[order as usize] as u64
        } else {
            0
        }
    }

    pub fn parabolic_multiplicity(&self, order: u64) -> u64 {
        if order <= self.params.m {
            return 0;
        }
        match &self.parabolic {
            ParabolicSupply::Saturated => 2,
            ParabolicSupply::Absent => 0,
            ParabolicSupply::Table(t) => t.get(&order).copied().unwrap_or(0) as u64,
        }
    }

    pub fn has_parabolic(&self) -> bool {
        match &self.parabolic {
            ParabolicSupply::Saturated => true,
            ParabolicSupply::Absent => false,
            ParabolicSupply::Table(t) => t.values().any(|v| *v > 0),
        }
    }

    /// Symbols admissible after `prefix` with order at most `max_order`.
    pub fn successors(&self, _prefix: &[Symbol], max_order: u64) -> Vec<Symbol> {
        let m = self.params.m;
        let mut out = Vec::new();
        for k in 2..=max_order.min(m) {
            for i in 0..self.simple_multiplicity(k) {
                out.push(Symbol::simple(k, i as u8));
            }
        }
        for k in (m + 1)..=max_order {
            let depth = self.spelling_for_order(k).len() as u32;
            let mult = self.parabolic_multiplicity(k);
            for sign in [Sign::Plus, Sign::Minus].into_iter().take(mult as usize) {
                out.push(Symbol::parabolic(k, depth, sign));
            }
        }
        out
    }

    /// Canonical spelling of the parabolic pieces of order `k`: a word of
    /// order `k - M - 1` made of simple pieces of order `M` followed by a
    /// remainder. Orders `M + 1` and `M + 2` are spelled by the unit word.
    pub fn spelling_for_order(&self, k: u64) -> Word {
        let m = self.params.m;
        let Some(mut r) = k.checked_sub(m + 1) else {
            return Word::unit();
        };
        if r < 2 {
            return Word::unit();
        }
        let mut w = Vec::new();
        while r > m + 1 {
            w.push(Symbol::simple(m, 0));
            r -= m;
        }
        if r == m + 1 {
            w.push(Symbol::simple(m - 1, 0));
            w.push(Symbol::simple(2, 0));
        } else {
            w.push(Symbol::simple(r, 0));
        }
        Word(w)
    }

    /// All words of total order exactly `n`, by explicit enumeration through
    /// [`SuitabilityModel::successors`]. Exponential; meant for small `n`.
    pub fn enumerate_words(&self, n: u64) -> Vec<Word> {
        let mut out = Vec::new();
        let mut stack = Vec::new();
        self.enumerate_rec(n, &mut stack, &mut out);
        out
    }

    fn enumerate_rec(&self, left: u64, stack: &mut Vec<Symbol>, out: &mut Vec<Word>) {
        if left == 0 {
            out.push(Word(stack.clone()));
            return;
        }
        for s in self.successors(stack, left) {
            let k = s.order.finite().expect("finite successor");
            stack.push(s);
            self.enumerate_rec(left - k, stack, out);
            stack.pop();
        }
    }

    fn multiplicity(&self, k: u64) -> u64 {
        self.simple_multiplicity(k) + self.parabolic_multiplicity(k)
    }
}

impl SpellingMap for SuitabilityModel {
    fn spelling_of(&self, s: &Symbol) -> Option<Word> {
        match (s.kind, s.order) {
            (SymbolKind::Parabolic { .. }, Order::Finite(k)) if k > self.params.m => {
                Some(self.spelling_for_order(k))
            }
            _ => None,
        }
    }
}

/// `#_n` for `n = 0..=N`: number of model words of exact order `n`
/// (`#_0 = 1` for the unit word).
pub fn sharp_sequence(n_max: usize, model: &SuitabilityModel) -> Vec<BigUint> {
    let mut h = vec![BigUint::one()];
    for n in 1..=n_max {
        let mut acc = BigUint::zero();
        for k in 2..=n {
            let mult = model.multiplicity(k as u64);
            if mult > 0 && !h[n - k].is_zero() {
                acc += &h[n - k] * mult;
            }
        }
        h.push(acc);
    }
    h
}

pub fn count_sharp(n: usize, model: &SuitabilityModel) -> BigUint {
    sharp_sequence(n, model).pop().unwrap_or_default()
}

/// Words made of parabolic symbols only, by order (`Q_0 = 1`).
fn parabolic_only(n_max: usize, model: &SuitabilityModel) -> Vec<BigUint> {
    let m = model.params.m as usize;
    let mut q = vec![BigUint::one()];
    for n in 1..=n_max {
        let mut acc = BigUint::zero();
        for k in (m + 1)..=n {
            let mult = model.parabolic_multiplicity(k as u64);
            if mult > 0 && !q[n - k].is_zero() {
                acc += &q[n - k] * mult;
            }
        }
        q.push(acc);
    }
    q
}

/// `P_n` for `n = 0..=N`: words made of one simple symbol followed by
/// parabolic symbols only.
pub fn prime_word_sequence(n_max: usize, model: &SuitabilityModel) -> Vec<BigUint> {
    let m = model.params.m as usize;
    let q = parabolic_only(n_max, model);
    (0..=n_max)
        .map(|n| {
            let mut acc = BigUint::zero();
            for j in 2..=n.min(m) {
                let mult = model.simple_multiplicity(j as u64);
                if mult > 0 {
                    acc += &q[n - j] * mult;
                }
            }
            acc
        })
        .collect()
}

pub fn count_prime_words(m: usize, model: &SuitabilityModel) -> BigUint {
    prime_word_sequence(m, model).pop().unwrap_or_default()
}

/// `Z*_n` for `n = 0..=N` by decomposing at the last simple symbol:
/// `Z*_n = P_n + sum_k Z*_k P_{n-k}` over blocks `P_{n-k}` of order `> M`.
pub fn zstar_sequence(n_max: usize, model: &SuitabilityModel) -> Vec<BigUint> {
    let m = model.params.m as usize;
    let p = prime_word_sequence(n_max, model);
    let mut z: Vec<BigUint> = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        let mut acc = p[n].clone();
        for k in 2..=n.saturating_sub(m + 1) {
            if !z[k].is_zero() && !p[n - k].is_zero() {
                acc += &z[k] * &p[n - k];
            }
        }
        z.push(acc);
    }
    z
}

pub fn zstar_from_model(n: usize, model: &SuitabilityModel) -> BigUint {
    zstar_sequence(n, model).pop().unwrap_or_default()
}

/// Loops at the base of the tower graph, counted directly as words cut into
/// first-return blocks: after the first block, a block without parabolic
/// symbols must open a new first return, a block with one may either open a
/// new first return or extend the current one.
pub fn loop_sequence(n_max: usize, model: &SuitabilityModel) -> Vec<BigUint> {
    let m = model.params.m as usize;
    let p = prime_word_sequence(n_max, model);
    // tail[n]: weighted block sequences of order n following a first block
    let mut tail = vec![BigUint::one()];
    for n in 1..=n_max {
        let mut acc = BigUint::zero();
        for k in 2..=n {
            if p[k].is_zero() || tail[n - k].is_zero() {
                continue;
            }
            let weight: u32 = if k > m { 2 } else { 1 };
            acc += &p[k] * &tail[n - k] * weight;
        }
        tail.push(acc);
    }
    (0..=n_max)
        .map(|n| {
            if n == 0 {
                return BigUint::one();
            }
            (2..=n).fold(BigUint::zero(), |acc, k| acc + &p[k] * &tail[n - k])
        })
        .collect()
}

/// How a countable first-return graph is cut down to a finite census.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "by")]
pub enum Truncation {
    /// keep first-return words of order at most `horizon`
    Order { horizon: usize },
    /// keep first-return words with at most `depth` symbols, counted up to `horizon`
    Depth { depth: usize, horizon: usize },
}

/// Synthetic loop census of the tower graph built over the model's
/// first-return words.
pub fn model_census(model: &SuitabilityModel, truncation: Truncation) -> LoopCensus {
    let zstar = match truncation {
        Truncation::Order { horizon } => zstar_sequence(horizon, model),
        Truncation::Depth { depth, horizon } => zstar_by_depth(horizon, depth, model),
    };
    LoopCensus::from_first_returns("e", &zstar)
}

fn zstar_by_depth(n_max: usize, d_max: usize, model: &SuitabilityModel) -> Vec<BigUint> {
    let m = model.params.m as usize;
    let zero = || vec![vec![BigUint::zero(); d_max + 1]; n_max + 1];
    // q[n][d]: parabolic-only words; p[n][d]: prime words
    let mut q = zero();
    q[0][0] = BigUint::one();
    for n in 1..=n_max {
        for d in 1..=d_max {
            let mut acc = BigUint::zero();
            for k in (m + 1)..=n {
                let mult = model.parabolic_multiplicity(k as u64);
                if mult > 0 && !q[n - k][d - 1].is_zero() {
                    acc += &q[n - k][d - 1] * mult;
                }
            }
            q[n][d] = acc;
        }
    }
    let mut p = zero();
    for n in 2..=n_max {
        for d in 1..=d_max {
            let mut acc = BigUint::zero();
            for j in 2..=n.min(m) {
                let mult = model.simple_multiplicity(j as u64);
                if mult > 0 && !q[n - j][d - 1].is_zero() {
                    acc += &q[n - j][d - 1] * mult;
                }
            }
            p[n][d] = acc;
        }
    }
    let mut z = zero();
    for n in 0..=n_max {
        for d in 0..=d_max {
            let mut acc = p[n][d].clone();
            for k in 2..=n.saturating_sub(m + 1) {
                for d1 in 1..d {
                    if !z[k][d1].is_zero() && !p[n - k][d - d1].is_zero() {
                        acc += &z[k][d1] * &p[n - k][d - d1];
                    }
                }
            }
            z[n][d] = acc;
        }
    }
    z.into_iter()
        .map(|row| row.into_iter().fold(BigUint::zero(), |a, b| a + b))
        .collect()
}

/// Value of the covering sum over `a' b_1 ... b_N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoveringSum {
    pub n: usize,
    pub s: f64,
    /// sum over words of order at most `truncation_order`
    pub value: f64,
    /// bound on the omitted part; infinite when the relaxed series diverges
    #[serde(with = "serde_f64")]
    pub tail_bound: f64,
    pub divergent: bool,
    pub truncation_order: u64,
    /// `lambda^N` with `lambda = e^{-M^{1/4}}`
    pub lambda_n: f64,
    pub below_lambda_n: bool,
}

impl CoveringSum {
    pub fn upper(&self) -> f64 {
        self.value + self.tail_bound
    }
}

/// Evaluates the covering sum at exponent `s` by a dynamic program over the
/// total order.
///
/// `a'` ranges over regular words of order `<= N`, the unit word included. Each block
/// `b = u . a_m` has its last symbol of order in `(M + Xi n_u, M + Xi (t + n_u)]`
/// where `t` is the order already placed, so that the concatenation stays
/// regular; the symbols inside `u` are counted by `#_{n_u}`. Words above the
/// truncation order are bounded by the same sum with the upper constraint
/// dropped, which factorises into closed form.
pub fn covering_sum(n: usize, s: f64, model: &SuitabilityModel) -> Result<CoveringSum> {
    if !(s > 0.0) {
        return Err(WordsError::InvalidInput(format!("s = {s} must be positive")));
    }
    let params = model.params;
    let m = params.m;
    let xi = params.xi();
    let x = s * params.c() / 3.0;
    let r = (-x).exp();
    let cap = (n as u64) * (m + 1) + n as u64 + (60.0 / x).ceil() as u64;
    let t_max = cap as usize;

    // regular a' of order <= N (the unit word included), weighted by r^order
    let mut reg = vec![0.0f64; n.max(1) + 1];
    reg[0] = 1.0;
    for t in 0..=n {
        if reg[t] == 0.0 {
            continue;
        }
        for k in 2..=(n - t) {
            let k64 = k as u64;
            if xi.bounds(k64, m, t as u64) {
                reg[t + k] += reg[t] * model.multiplicity(k64) as f64 * r.powi(k as i32);
            }
        }
    }
    let a_prime: Vec<f64> = reg[..=n].to_vec();
    let a_total: f64 = a_prime.iter().sum();

    // orders n_u that can still fit under the cap
    let mut lows = Vec::new();
    for nu in 0..=t_max {
        let Some(lo) = xi.first_order_above(m, nu as u64, cap) else {
            break;
        };
        if lo + nu as u64 > cap {
            break;
        }
        lows.push(lo);
    }
    let sharp = sharp_sequence(lows.len().saturating_sub(1), model);
    // (n_u, ln #_{n_u} + n_u ln r, first long order)
    let u_orders: Vec<(usize, f64, u64)> = lows
        .iter()
        .enumerate()
        .filter(|(nu, _)| !sharp[*nu].is_zero())
        .map(|(nu, &lo)| (nu, big_ln(&sharp[nu]) - nu as f64 * x, lo))
        .collect();

    let mut w_con = vec![0.0f64; t_max + 1];
    let mut w_rel = vec![0.0f64; t_max + 1];
    w_con[..=n].copy_from_slice(&a_prime);
    w_rel[..=n].copy_from_slice(&a_prime);
    let saturated = matches!(model.parabolic, ParabolicSupply::Saturated);
    for _ in 0..n {
        let mut next_con = vec![0.0f64; t_max + 2];
        let mut next_rel = vec![0.0f64; t_max + 2];
        for t in 0..=t_max {
            let (wc, wr) = (w_con[t], w_rel[t]);
            if wc == 0.0 && wr == 0.0 {
                continue;
            }
            for &(nu, ln_base, lo) in &u_orders {
                let start = t + nu + lo as usize;
                if start > t_max {
                    continue;
                }
                // #u r^{n_u}; the symbol weight r^k is applied below
                let base = ln_base.exp();
                if saturated {
                    // two symbols per order: the block weights are geometric in
                    // tt, so inject the first term and cancel past the last
                    let first = 2.0 * base * r.powi(lo as i32);
                    next_rel[start] += wr * first;
                    if wc != 0.0 {
                        // allowed orders are lo..end
                        let end = xi.first_order_above(m, (t + nu) as u64, cap);
                        if end.is_none_or(|e| e > lo) {
                            next_con[start] += wc * first;
                            if let Some(e) = end {
                                let stop = t + nu + e as usize;
                                if stop <= t_max {
                                    next_con[stop] -= wc * 2.0 * base * r.powi(e as i32);
                                }
                            }
                        }
                    }
                    continue;
                }
                let parab_ok = |k: u64| model.parabolic_multiplicity(k) as f64;
                if wr != 0.0 {
                    for tt in start..=t_max {
                        let k = (tt - t - nu) as u64;
                        next_rel[tt] += wr * base * parab_ok(k) * r.powi(k as i32);
                    }
                }
                if wc != 0.0 {
                    let hi = m as f64 + xi.get() * (t + nu) as f64;
                    for tt in start..=t_max {
                        let k = (tt - t - nu) as u64;
                        if (k as f64) > hi && !xi.bounds(k, m, (t + nu) as u64) {
                            break;
                        }
                        next_con[tt] += wc * base * parab_ok(k) * r.powi(k as i32);
                    }
                }
            }
        }
        if saturated {
            for v in [&mut next_con, &mut next_rel] {
                for tt in 1..=t_max {
                    v[tt] += r * v[tt - 1];
                }
                // cancellation leaves rounding noise where the true value is zero
                for x in v.iter_mut() {
                    if *x < 0.0 {
                        *x = 0.0;
                    }
                }
            }
        }
        next_con.truncate(t_max + 1);
        next_rel.truncate(t_max + 1);
        w_con = next_con;
        w_rel = next_rel;
    }
    let value: f64 = w_con.iter().sum();
    let relaxed_trunc: f64 = w_rel.iter().sum();

    // closed form of the relaxed sum: A * B^N
    let (block, divergent) = relaxed_block_sum(model, r);
    let lambda_n = params.lambda().powi(n as i32);
    let tail_bound = if divergent {
        f64::INFINITY
    } else {
        (a_total * block.powi(n as i32) - relaxed_trunc).max(0.0)
    };
    Ok(CoveringSum {
        n,
        s,
        value,
        tail_bound,
        divergent,
        truncation_order: cap,
        lambda_n,
        below_lambda_n: !divergent && value + tail_bound < lambda_n,
    })
}

/// `sum_u #u r^{n_u} sum_{k > M + Xi n_u} mult(k) r^k`, with the divergence
/// flag of the series in `n_u`.
fn relaxed_block_sum(model: &SuitabilityModel, r: f64) -> (f64, bool) {
    let params = model.params;
    let m = params.m;
    let xi = params.xi();
    let geometric_from = |lo: u64| -> f64 {
        // sum_{k >= lo} mult(k) r^k
        match &model.parabolic {
            ParabolicSupply::Saturated => 2.0 * r.powf(lo as f64) / (1.0 - r),
            ParabolicSupply::Absent => 0.0,
            ParabolicSupply::Table(t) => t
                .range(lo..)
                .map(|(k, v)| *v as f64 * r.powf(*k as f64))
                .sum(),
        }
    };
    // ratio test on #_n r^{(1 + Xi) n}: #_n grows at most like 2^n
    let y_ln = -(1.0 + xi.get()) * (-r.ln());
    let divergent = model.has_parabolic() && 2f64.ln() + y_ln >= 0.0;
    if divergent {
        return (f64::INFINITY, true);
    }
    let mut total = geometric_from(m + 1);
    let mut h = vec![1.0f64];
    for nu in 1..4096usize {
        let mut acc = 0.0;
        for k in 2..=nu {
            acc += h[nu - k] * model.multiplicity(k as u64) as f64;
        }
        h.push(acc);
        if acc == 0.0 {
            continue;
        }
        let lo_f = m as f64 + xi.get() * nu as f64 + 1.0;
        let term_ln = acc.ln() + nu as f64 * r.ln() + lo_f * r.ln();
        if !term_ln.is_finite() || term_ln < -745.0 {
            if nu > 8 {
                break;
            }
            continue;
        }
        total += acc * r.powi(nu as i32) * geometric_from(lo_f as u64);
    }
    (total, false)
}

/// Sum of `e^{-s n c/3}` over single long blocks `u . a_m` following a prefix
/// of order `prefix`, by direct summation up to order `cap`.
pub fn long_block_sum(s: f64, prefix: u64, cap: u64, model: &SuitabilityModel) -> f64 {
    let params = model.params;
    let m = params.m;
    let xi = params.xi();
    let r = (-s * params.c() / 3.0).exp();
    let sharp = sharp_sequence(cap as usize, model);
    let mut total = 0.0;
    for (nu, cnt) in sharp.iter().enumerate() {
        let nu64 = nu as u64;
        let cnt = cnt.to_f64().unwrap_or(0.0);
        if cnt == 0.0 {
            continue;
        }
        for k in (m + 1)..=cap.saturating_sub(nu64) {
            let long = !xi.bounds(k, m, nu64);
            let regular = xi.bounds(k, m, prefix + nu64);
            if long && regular {
                total += cnt * model.parabolic_multiplicity(k) as f64 * r.powf((nu64 + k) as f64);
            }
        }
    }
    total
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionBound {
    /// certified bound (three times the exponent when `tripled`)
    pub bound: f64,
    /// smallest grid exponent with geometric decay; `None` if none certifies
    pub s_star: Option<f64>,
    pub tripled: bool,
    pub n_max: usize,
    pub warning: Option<String>,
    /// decay ratio of the covering sums at each grid point
    pub ratios: Vec<(f64, f64)>,
}

/// Smallest grid exponent at which the covering sums decay geometrically
/// over `N = 1..=n_max`.
pub fn dimension_upper_bound(
    model: &SuitabilityModel,
    s_grid: &[f64],
    n_max: usize,
    tripled: bool,
) -> Result<DimensionBound> {
    if s_grid.is_empty() || s_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(WordsError::InvalidInput("s grid must be increasing".into()));
    }
    if s_grid[0] <= 0.0 || s_grid[s_grid.len() - 1] > 1.0 {
        return Err(WordsError::InvalidInput("s grid must lie in (0, 1]".into()));
    }
    if n_max < 2 {
        return Err(WordsError::InvalidInput("n_max must be at least 2".into()));
    }
    let factor = if tripled { 3.0 } else { 1.0 };
    if !model.has_parabolic() {
        return Ok(DimensionBound {
            bound: 0.0,
            s_star: None,
            tripled,
            n_max,
            warning: Some("no long blocks: the covering family is empty".into()),
            ratios: Vec::new(),
        });
    }
    let mut ratios = Vec::new();
    for &s in s_grid {
        let sums = (1..=n_max)
            .into_par_iter()
            .map(|n| covering_sum(n, s, model).map(|c| c.upper()))
            .collect::<Result<Vec<_>>>()?;
        let ratio = sums
            .windows(2)
            .map(|w| if w[0] > 0.0 { w[1] / w[0] } else { 0.0 })
            .fold(0.0f64, f64::max);
        ratios.push((s, ratio));
        if ratio < 1.0 && sums.iter().all(|v| v.is_finite()) {
            return Ok(DimensionBound {
                bound: (factor * s).min(1.0).max(if factor * s > 1.0 { 1.0 } else { 0.0 }),
                s_star: Some(s),
                tripled,
                n_max,
                warning: (factor * s > 1.0).then(|| "bound exceeds 1 and is reported as 1".into()),
                ratios,
            });
        }
    }
    Ok(DimensionBound {
        bound: 1.0,
        s_star: None,
        tripled,
        n_max,
        warning: Some("no grid point certifies geometric decay".into()),
        ratios,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(m: u64) -> Params {
        Params::new(m, 1e-8).unwrap()
    }

    fn bu(x: u64) -> BigUint {
        BigUint::from(x)
    }

    fn orders_word(orders: &[u64], m: u64) -> Word {
        Word(
            orders
                .iter()
                .map(|&k| if k <= m { Symbol::simple(k, 0) } else { Symbol::parabolic(k, 0, Sign::Plus) })
                .collect(),
        )
    }

    #[test]
    fn params_derived_values() {
        let q = p(100);
        assert!((q.theta() - 1.0 / (1e-8f64).ln().abs()).abs() < 1e-15);
        assert_eq!(q.epsilon(), 0.1);
        assert!((q.c_minus() - (2f64.ln() / 2.0 - 0.1)).abs() < 1e-15);
        assert!((q.xi().get() - 10f64.exp()).abs() < 1e-6);
        assert!((q.lambda() - (-100f64.powf(0.25)).exp()).abs() < 1e-15);
        assert!(Params::new(3, 0.1).is_err());
        assert!(Params::new(10, 1.0).is_err());
        assert_eq!(Params::new(10, 0.0).unwrap().theta(), 0.0);
    }

    #[test]
    fn regularity_examples() {
        let q = p(10);
        let one = Xi::value(1.0);
        assert!(!is_xi_regular(&orders_word(&[3, 14], 10), one, &q));
        assert!(is_xi_regular(&orders_word(&[3, 13], 10), one, &q));
        assert!(is_xi_regular(&orders_word(&[2, 5, 10, 7], 10), Xi::value(0.0), &q));
        assert!(!is_xi_regular(&orders_word(&[12], 10), q.xi(), &q));
        assert!(!is_xi_regular(&Word(vec![Symbol::simple(2, 0), Symbol::square_c()]), q.xi(), &q));
    }

    #[test]
    fn regularity_in_log_form_at_huge_xi() {
        // sqrt(M) = 1000 makes Xi overflow; the comparison must still work
        let q = Params::new(1_000_000, 0.5).unwrap();
        assert!(q.xi().get().is_infinite());
        let w = orders_word(&[2, u64::MAX / 4], 1_000_000);
        assert!(is_xi_regular(&w, q.xi(), &q));
        let w = orders_word(&[1_000_001], 1_000_000);
        assert!(!is_xi_regular(&w, q.xi(), &q));
    }

    #[test]
    fn long_block_boundary_is_regular() {
        let q = p(10);
        let xi = q.xi().get();
        let k = 10 + (xi * 3.0).floor() as u64;
        let w = orders_word(&[3, k], 10);
        assert!(!is_long_block(&w, &q));
        assert!(is_xi_regular(&w, q.xi(), &q));
        let w = orders_word(&[3, k + 1], 10);
        assert!(is_long_block(&w, &q));
    }

    #[test]
    fn aleph_examples() {
        assert_eq!(aleph(0, &p(1000)), 0);
        assert_eq!(aleph(0, &p(22026)), 1);
        let q = p(1000);
        let expected = (q.c() * 2000.0 / (6.0 * q.c_plus())).floor() as u64;
        assert_eq!(aleph(1000, &q), expected);
        assert_eq!(aleph(1, &q), 35);
    }

    fn simple(k: u64) -> CommonPiece {
        CommonPiece::Simple { symbol: Symbol::simple(k, 1) }
    }

    #[test]
    fn common_sequence_all_simple_passes() {
        let q = p(100);
        let seq: Vec<_> = (0..50).map(|i| simple(2 + (i % 7))).collect();
        let rep = validate_common_sequence(&seq, &q);
        assert!(rep.valid, "{:?}", rep.first_failure);
        assert!(rep.order_bound_holds);
        assert_eq!(rep.condition1, "unchecked");
    }

    #[test]
    fn common_sequence_condition3_failure() {
        let q = p(16);
        let mut seq: Vec<_> = (0..5).map(|_| simple(3)).collect();
        seq.push(CommonPiece::SquareSegment { order: 17 });
        let rep = validate_common_sequence(&seq, &q);
        assert_eq!(rep.first_failure, Some((6, 3)));
        assert!(!rep.prefixes[5].condition3 && rep.prefixes[4].condition3);
        // enough mass in front makes the same piece acceptable
        let mut seq: Vec<_> = (0..200).map(|_| simple(16)).collect();
        seq.push(CommonPiece::SquareSegment { order: 17 });
        assert!(validate_common_sequence(&seq, &q).valid);
    }

    #[test]
    fn common_sequence_condition4_boundary() {
        let q = p(100);
        let n = 3usize;
        let a = aleph(n as u64, &q) as usize;
        let minus = CommonPiece::Simple { symbol: Symbol::s_minus() };
        let lead: Vec<_> = (0..n).map(|_| simple(5)).collect();
        let mut ok = lead.clone();
        ok.extend(std::iter::repeat_n(minus, a - 1));
        ok.push(simple(4));
        assert!(validate_common_sequence(&ok, &q).valid);
        let mut bad = lead.clone();
        bad.extend(std::iter::repeat_n(minus, a));
        let rep = validate_common_sequence(&bad, &q);
        assert_eq!(rep.first_failure, Some((n + a, 4)));
        // s+ followed by aleph(n) copies of s-
        let mut led = lead;
        led.push(CommonPiece::Simple { symbol: Symbol::s_plus() });
        led.extend(std::iter::repeat_n(minus, a));
        let rep = validate_common_sequence(&led, &q);
        assert_eq!(rep.first_failure, Some((n + 1 + a, 4)));
    }

    #[test]
    fn common_sequence_condition2_failure() {
        let q = p(10);
        let seq = [simple(3), CommonPiece::Simple { symbol: Symbol::parabolic(12, 0, Sign::Minus) }];
        assert_eq!(validate_common_sequence(&seq, &q).first_failure, Some((2, 2)));
    }

    #[test]
    fn divides_examples() {
        let model = SuitabilityModel::full(p(4));
        let a = Word(vec![Symbol::simple(3, 0), Symbol::simple(2, 1)]);
        assert!(divides(&a, &a, &model).unwrap());
        assert!(divides(&a, &Word::unit(), &model).unwrap());
        assert!(divides(&a, &Word(vec![Symbol::simple(2, 1)]), &model).unwrap());
        assert!(!divides(&a, &Word(vec![Symbol::simple(3, 0)]), &model).unwrap());
        let par = Symbol::parabolic(12, 0, Sign::Plus);
        let spell = model.spelling_for_order(12);
        assert_eq!(spell.order(), Order::Finite(7));
        assert!(divides(&Word(vec![par]), &spell, &model).unwrap());
        let mut custom = HashMap::new();
        custom.insert(par, a.clone());
        assert!(divides(&Word(vec![par]), &a, &custom).unwrap());
        let other = Symbol::parabolic(13, 0, Sign::Minus);
        assert_eq!(
            divides(&Word(vec![other]), &a, &custom),
            Err(WordsError::MissingSpelling(other.to_string()))
        );
    }

    #[test]
    fn sharp_counts() {
        let model = SuitabilityModel::full(p(10));
        let h = sharp_sequence(300, &model);
        assert_eq!(h[1], bu(0));
        assert_eq!(h[2], bu(2));
        for (n, v) in h.iter().enumerate() {
            // closed form of the full model: (2^n + 2 (-1)^n) / 3
            let two_n = BigUint::one() << n;
            let closed = if n % 2 == 0 { (two_n + 2u32) / 3u32 } else { (two_n - 2u32) / 3u32 };
            assert_eq!(v, &closed, "n = {n}");
        }
    }

    #[test]
    fn counters_match_enumeration_small() {
        let model = SuitabilityModel::full(p(10));
        let h = sharp_sequence(18, &model);
        let pr = prime_word_sequence(18, &model);
        for n in 1..=18u64 {
            let words = model.enumerate_words(n);
            assert_eq!(bu(words.len() as u64), h[n as usize]);
            let prime = words
                .iter()
                .filter(|w| w.0[0].is_simple() && w.0[1..].iter().all(Symbol::is_parabolic))
                .count();
            assert_eq!(bu(prime as u64), pr[n as usize]);
        }
    }

    #[test]
    fn prime_and_zstar_examples() {
        let model = SuitabilityModel::full(p(100));
        let pr = prime_word_sequence(300, &model);
        let zs = zstar_sequence(300, &model);
        for n in 2..=100 {
            assert_eq!(pr[n], bu(2));
            assert_eq!(zs[n], bu(2));
        }
        // one simple symbol of order j then one parabolic symbol of order n - j
        assert_eq!(pr[103], bu(4));
        assert_eq!(pr[150], bu(4 * (150 - 100 - 2)));
    }

    fn count_words(model: &SuitabilityModel, left: u64) -> u64 {
        if left == 0 {
            return 1;
        }
        model
            .successors(&[], left)
            .iter()
            .map(|s| count_words(model, left - s.order.finite().unwrap()))
            .sum()
    }

    #[test]
    fn sharp_matches_enumeration_up_to_25() {
        let model = SuitabilityModel::full(p(10));
        let h = sharp_sequence(25, &model);
        for n in [19u64, 22, 25] {
            assert_eq!(bu(count_words(&model, n)), h[n as usize]);
        }
    }

    // first-return words: a simple start, and every later simple symbol is
    // immediately followed by a parabolic one
    fn is_first_return(w: &Word) -> bool {
        let s = w.symbols();
        !s.is_empty()
            && s[0].is_simple()
            && (1..s.len()).all(|i| !s[i].is_simple() || s.get(i + 1).is_some_and(Symbol::is_parabolic))
    }

    #[test]
    fn prime_and_zstar_match_enumeration_past_m() {
        let model = SuitabilityModel::full(p(6));
        let pr = prime_word_sequence(20, &model);
        let zs = zstar_sequence(20, &model);
        for n in [8u64, 9, 13, 17, 20] {
            let words = model.enumerate_words(n);
            let prime = words
                .iter()
                .filter(|w| w.0[0].is_simple() && w.0[1..].iter().all(Symbol::is_parabolic))
                .count();
            assert_eq!(bu(prime as u64), pr[n as usize], "P at {n}");
            let first = words.iter().filter(|w| is_first_return(w)).count();
            assert_eq!(bu(first as u64), zs[n as usize], "Z* at {n}");
        }
    }

    #[test]
    fn growth_bounds_at_m_100() {
        let q = p(100);
        let model = SuitabilityModel::full(q);
        let pr = prime_word_sequence(300, &model);
        let zs = zstar_sequence(300, &model);
        let eps = q.epsilon();
        for n in 2..=300usize {
            let pn = pr[n].to_f64().unwrap();
            let zn = zs[n].to_f64().unwrap();
            assert!(pn <= 2.0 * (eps * n as f64).exp(), "P_{n}");
            assert!(zn <= 2.0 * (2.0 * eps * n as f64).exp(), "Z*_{n}");
            // the recursion bound on P
            if n > 101 {
                let rhs: BigUint = (2..=n - 101).map(|k| &pr[k] * 2u32).sum();
                assert!(pr[n] <= rhs);
            }
        }
        let h = sharp_sequence(300, &model);
        assert!(h.iter().enumerate().all(|(n, v)| v <= &(BigUint::one() << n)));
    }

    #[test]
    fn tower_loops_satisfy_renewal() {
        for m in [4u64, 10, 25] {
            let model = SuitabilityModel::full(p(m));
            let z = loop_sequence(120, &model);
            let census = model_census(&model, Truncation::Order { horizon: 120 });
            assert_eq!(census.z, z);
            assert!(census.renewal_holds());
        }
    }

    #[test]
    fn depth_truncation_converges_to_order_truncation() {
        let model = SuitabilityModel::full(p(6));
        let by_order = model_census(&model, Truncation::Order { horizon: 40 });
        let shallow = model_census(&model, Truncation::Depth { depth: 2, horizon: 40 });
        let deep = model_census(&model, Truncation::Depth { depth: 40, horizon: 40 });
        assert_eq!(deep.zstar, by_order.zstar);
        assert!(shallow.zstar.iter().zip(&by_order.zstar).all(|(a, b)| a <= b));
        assert!(shallow.zstar != by_order.zstar);
        // depth one: only words of one simple symbol
        let one = model_census(&model, Truncation::Depth { depth: 1, horizon: 40 });
        let expected: Vec<_> = (0..=40u64).map(|n| bu(if (2..=6).contains(&n) { 2 } else { 0 })).collect();
        assert_eq!(one.zstar, expected);
    }

    #[test]
    fn covering_sum_large_s_is_tiny() {
        let q = p(100);
        let model = SuitabilityModel::full(q);
        // a leading long block is never regular
        assert_eq!(covering_sum(1, 1.0, &model).unwrap().value, 0.0);
        for n in 2..=4 {
            let c = covering_sum(n, 1.0, &model).unwrap();
            assert!(!c.divergent);
            assert!(c.upper() < 1e-6, "{}", c.upper());
        }
    }

    #[test]
    fn single_block_matches_closed_form() {
        let q = p(25);
        let model = SuitabilityModel::full(q);
        let s = 0.3;
        let r = (-s * q.c() / 3.0).exp();
        let xi = q.xi().get();
        // u of order nu, then a parabolic symbol with order in (M + Xi nu, M + Xi (2 + nu)]
        let mut closed = 0.0;
        for nu in 0..40i32 {
            let count = if nu == 0 { 1.0 } else { (2f64.powi(nu) + 2.0 * (-1f64).powi(nu)) / 3.0 };
            let lo = 25 + (xi * nu as f64).floor() as i32 + 1;
            let hi = (25 + (xi * (nu + 2) as f64).floor() as i32).min(3000 - nu);
            if lo > hi {
                break;
            }
            closed += count * r.powi(nu) * 2.0 * (r.powi(lo) - r.powi(hi + 1)) / (1.0 - r);
        }
        let direct = long_block_sum(s, 2, 3000, &model);
        assert!((direct - closed).abs() < 1e-9 * closed, "{direct} vs {closed}");
    }

    #[test]
    fn saturated_fast_path_matches_table() {
        let q = p(10);
        let fast = SuitabilityModel::full(q);
        for (n, s) in [(1usize, 0.5), (2, 0.5), (3, 0.8), (4, 1.0)] {
            let a = covering_sum(n, s, &fast).unwrap();
            let table: BTreeMap<u64, u8> = (11..=a.truncation_order + 1).map(|k| (k, 2)).collect();
            let slow = SuitabilityModel::with_parabolic(q, ParabolicSupply::Table(table)).unwrap();
            let b = covering_sum(n, s, &slow).unwrap();
            assert_eq!(a.truncation_order, b.truncation_order);
            assert!((a.value - b.value).abs() <= 1e-10 * b.value.max(1e-300), "{} vs {}", a.value, b.value);
        }
    }

    #[test]
    fn covering_sum_tail_bound_is_consistent() {
        let model = SuitabilityModel::full(p(10));
        for n in 1..=4 {
            let c = covering_sum(n, 0.8, &model).unwrap();
            assert!(c.tail_bound >= 0.0 && c.tail_bound <= 1e-9 * c.value.max(1.0), "{c:?}");
        }
    }

    #[test]
    fn dimension_bound_without_parabolic_is_zero() {
        let model = SuitabilityModel::simple_only(p(25));
        let grid: Vec<f64> = (1..=20).map(|k| k as f64 / 20.0).collect();
        assert_eq!(dimension_upper_bound(&model, &grid, 5, true).unwrap().bound, 0.0);
    }

    #[test]
    fn model_spec_json() {
        let spec: ModelSpec = serde_json::from_str(r#"{"M":100,"b":1e-8,"model":"full"}"#).unwrap();
        let model = SuitabilityModel::from_spec(&spec).unwrap();
        assert_eq!(model.params().m(), 100);
        let bad: ModelSpec = serde_json::from_str(r#"{"M":100,"b":1e-8,"model":"weird"}"#).unwrap();
        assert!(SuitabilityModel::from_spec(&bad).is_err());
        let word = Word(vec![Symbol::simple(3, 1), Symbol::parabolic(120, 2, Sign::Minus), Symbol::square_c()]);
        let text = serde_json::to_string(&word).unwrap();
        assert_eq!(serde_json::from_str::<Word>(&text).unwrap(), word);
    }

    fn small_word(model: &SuitabilityModel) -> impl Strategy<Value = Word> {
        let symbols = model.successors(&[], 14);
        proptest::collection::vec(proptest::sample::select(symbols), 0..5).prop_map(Word)
    }

    proptest! {
        #[test]
        fn divisors_agree_with_predicate(a in small_word(&SuitabilityModel::full(p(4))), b in small_word(&SuitabilityModel::full(p(4)))) {
            let model = SuitabilityModel::full(p(4));
            let d = divisors(&a, &model).unwrap();
            prop_assert_eq!(divides(&a, &b, &model).unwrap(), d.contains(&b));
            for w in &d {
                prop_assert!(divides(&a, w, &model).unwrap());
            }
        }

        #[test]
        fn divisors_of_a_word_form_a_chain(a in small_word(&SuitabilityModel::full(p(4)))) {
            let model = SuitabilityModel::full(p(4));
            let mut d: Vec<Word> = divisors(&a, &model).unwrap().into_iter().collect();
            d.sort_by_key(|w| std::cmp::Reverse(w.order()));
            for i in 0..d.len() {
                for j in (i + 1)..d.len() {
                    prop_assert!(divides(&d[i], &d[j], &model).unwrap(), "{} / {}", d[i], d[j]);
                }
            }
        }

        #[test]
        fn regularity_is_prefix_closed(orders in proptest::collection::vec(2u64..40, 1..8)) {
            let q = p(10);
            let w = orders_word(&orders, 10);
            if is_xi_regular(&w, Xi::value(1.5), &q) {
                for k in 1..w.len() {
                    prop_assert!(is_xi_regular(&Word(w.0[..k].to_vec()), Xi::value(1.5), &q));
                }
            }
        }
    }
}
