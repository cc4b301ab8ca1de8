//! Intrinsic dimension estimation from nearest-neighbor distance ratios.
//!
//! The crate implements a family of likelihood-based estimators for the
//! intrinsic dimension (`id`) of a point cloud, all built on one fact about
//! homogeneous Poisson point processes: the ratio of the distances from a
//! point to two of its nearest neighbors has a closed-form law whose shape
//! parameter is the dimension of the supporting manifold.
//!
//! * `TWO-NN` uses the second-to-first neighbor distance ratio, which is
//!   Pareto(1, d) distributed.
//! * `Cride` pools consecutive ratios `r_l / r_{l-1}` up to order `L`; each is
//!   Pareto(1, (l-1)d) and they are jointly independent.
//! * `Gride` uses a single ratio `r_{n2} / r_{n1}` of generic orders, whose
//!   density involves a Beta-function normalizer and supports scale-dependent
//!   analysis by growing `n1` geometrically.
//!
//! Module layout mirrors the pipeline: [`geometry`] turns raw coordinates
//! into neighbor tables and ratio samples, [`distributions`] holds the
//! probability kernels and exact samplers, [`estimators`] the point and
//! interval estimators, [`scale`] the scale-dependent sweeps, and
//! [`synthgen`] the synthetic dataset generators used for validation.
//!
//! With the default `parallel` feature the distance computations, bootstrap
//! replicates, and sweep rows run on rayon; all outputs are independent of
//! the thread count because every parallel task gets a pre-derived seed and
//! results are collected in canonical order. Disabling the feature swaps in
//! a sequential fallback with identical results.

// Validations are written as `!(x > 0.0)` on purpose: the negation rejects
// NaN along with the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod distributions;
pub mod error;
pub mod estimators;
pub mod geometry;
pub mod rng;
pub mod scale;
pub mod stats;
pub mod synthgen;

pub(crate) mod exec;

pub use error::{Error, Result};
