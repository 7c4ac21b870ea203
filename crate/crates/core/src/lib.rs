//! Bayesian predictive densities for the isotropic normal model under
//! alpha-divergence loss.
//!
//! The crate covers the best invariant and harmonic-prior Bayes predictive
//! densities, their risks and risk differences (Monte Carlo with common random
//! numbers, deterministic integral representations, and the closed forms at
//! `alpha = 1` and `alpha = -1`), the domination thresholds in `v_x / v_y`, and
//! numerical checks of the hypercube integral identities behind them.

pub mod appendix_lab;
pub mod domination;
pub mod error;
pub mod marginal;
pub mod numerics;
pub mod predictive;
pub mod problem;
pub mod risk;

pub use error::{Error, Result};
pub use numerics::Estimate;
pub use problem::{derive_constants, DerivedConstants, ProblemSpec};
pub use marginal::{Marginal, Prior};
pub use predictive::{DensityKind, PredictiveDensity, Shape};
pub use risk::{Candidate, Method, RiskDifferenceResult, RiskQuery};
pub use domination::{Branch, ThresholdResult, Verdict};
