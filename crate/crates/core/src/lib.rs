//! Panel regressions with ARMA errors and SUR weighting, specification
//! tests, univariate forecast models and seeded Monte Carlo compliance
//! analysis for energy and emissions targets.

pub mod diagnostics;
pub mod error;
pub mod forecast;
pub mod linalg;
pub mod panel;
pub mod pipeline;
pub mod regression;
pub mod serialize;
pub mod montecarlo;
pub mod report;
pub mod targets;

pub use error::{Error, ErrorClass};
