//! Probability that a non-localized node of a random network hears at
//! least three anchors, with and without log-normal shadowing.

// `!(x > 0.0)` style guards also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod error;
pub mod experiment;
pub mod model;
pub mod montecarlo;
pub mod numerics;
pub mod shadowing;

pub use analytic::{CoefficientVariant, FailureProbResult, Method};
pub use error::{Error, Result};
pub use model::{BhatDistribution, CoverageParams, NetworkParams, ShadowModel};
pub use montecarlo::{ProbEstimate, Realization, TrialProtocol};
