//! Exact finite-sample law and asymptotic expansion machinery for the
//! self-normalized statistic `W = D / sqrt(T)` built from i.i.d. draws on
//! `{-1, 0, +1}` with equal probabilities.
//!
//! The crate has five layers:
//!
//! * [`numerics`] — special functions, exact rational support keys and
//!   compensated accumulation used everywhere else.
//! * [`exact_law`] — exact enumeration of the law of `W` for a given sample
//!   size, with collision-free aggregation of the discrete support.
//! * [`expansion`] — the normal approximation plus its `O(N^-1/2)`
//!   oscillatory continuity correction, including left limits and the full
//!   discontinuity set.
//! * [`oscillatory`] — Fourier/theta evaluation of the correction term:
//!   sawtooth series, Poisson summation, closed-form theta factors and the
//!   resonance witness for the lower bound.
//! * [`analysis`] — the verification harness: certified sup-norm distances,
//!   scaling sweeps across sample sizes, brute-force oracles and the
//!   Student-statistic threshold map.
//!
//! The [`cli`] module wires all stages to the `nonlattice` binary.

// negated float comparisons like `!(w >= 0.0)` are deliberate: domain
// guards must reject NaN along with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod exact_law;
pub mod expansion;
pub mod numerics;
pub mod oscillatory;

mod error;

pub use error::{Error, Result};
