//! Numerical toolkit for maximal-entropy measures of strongly dissipative
//! Henon-like maps.
//!
//! The crate is organised bottom-up:
//!
//! * [`shift_core`]: countable Markov shifts, loop censuses, Gurevich entropy,
//!   strong positive recurrence and the maximal-entropy Markov chain.
//! * [`symbolic_words`]: the symbolic alphabet of puzzle pieces, regularity,
//!   common sequences, divisibility and the combinatorial counting bounds.
//! * [`henon_model`]: the map family, tangent cocycles and cone/expansion checks.
//! * [`orbit_search`]: periodic-orbit censuses for the 1-D and 2-D maps.
//! * [`measure_stats`]: empirical measures, decay of correlations, CLT checks and
//!   box-counting dimension.

// negated float comparisons are deliberate: they reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod henon_model;
pub mod measure_stats;
pub mod numeric;
pub mod orbit_search;
pub mod shift_core;
pub mod symbolic_words;

/// Library version embedded in command outputs.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
