//! Two-sided moment and tail estimates for random multilinear chaoses
//! `sum_i a_i X^1_{i_1} ... X^d_{i_d}` generated by independent symmetric
//! variables with logarithmically convex tails, together with a Monte Carlo
//! harness that checks them empirically.
//!
//! The deterministic side (tensors, partition norms, laws, estimates) is
//! generic over [`Scalar`] (`f32` or `f64`); the aliases below fix `f64`.
//! Monte Carlo sampling works in `f64`.

// `!(x >= lo)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimator;
pub mod laws;
pub mod montecarlo;
pub mod multiindex;
pub mod norms;
pub mod rng;
pub mod scalar;
pub mod special;

pub use error::{Error, Result};
pub use estimator::{Aggregation, EstimateBreakdown, EstimateForm, NormTable, Term};
pub use laws::{Law, LawDescriptor, LawGrid, LawKind};
pub use montecarlo::SampleConfig;
pub use multiindex::{CoefTensor, IndexTuple, ModeSubset, Partition};
pub use norms::{NormConfig, NormMethod, NormResult};
pub use scalar::Scalar;

pub type Tensor = CoefTensor<f64>;
pub type Tensor32 = CoefTensor<f32>;
pub type Breakdown = EstimateBreakdown<f64>;
pub type Table = NormTable<f64>;
