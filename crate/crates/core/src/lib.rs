//! Exponent calculus, circle-method machinery and random thin bases for
//! Waring's problem with smooth variables.

// `!(x > 0.0)`-style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arcs;
pub mod constants;
pub mod error;
pub mod expsum;
pub mod moments;
pub mod numtheory;
pub mod randbasis;
pub mod repcount;
pub mod singular;
pub mod smooth;

pub use arcs::{ArcDissection, Classification, RationalApprox};
pub use constants::{ExponentMode, ExponentModel, ThresholdReport};
pub use error::{Error, Result};
pub use expsum::{FrequencyTable, Variant, WeylSumSpec};
pub use moments::{ArcSet, ProbeKind, QRule};
pub use randbasis::{BasisParams, BasisSample, Decomposition, DeltaSpec, ExperimentConfig, ExperimentReport, Interval};
pub use repcount::{Growth, RepQuery, RepResult, Smoothness};
pub use singular::Route;
pub use smooth::SmoothSet;
