//! Numerical building blocks: special functions, quadrature, radial reductions
//! of Gaussian expectations, and a reproducible parallel Monte Carlo engine.

pub mod mc;
pub mod quad;
pub mod radial;
pub mod special;

use serde::{Deserialize, Serialize};

pub use mc::{mc_mean, mc_means, substream, CHUNK_SIZE};
pub use quad::{adaptive_quad, gauss_legendre, QuadOptions};
pub use radial::{
    default_fd_step, log_noncentral_chi_pdf, radial_derivatives, radial_expectation,
    radial_laplacian, radial_log_expectation, RadialProfile, TabulatedProfile,
};
pub use special::{lower_gamma_scaled, reg_lower_inc_gamma, reg_upper_inc_gamma};

/// A numerical estimate with its uncertainty.
///
/// `error` is a standard error for Monte Carlo results and an error bound for
/// deterministic quadrature; `seed` is set only for Monte Carlo results.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub n: u64,
    pub seed: Option<u64>,
}

impl Estimate {
    pub fn exact(value: f64, n: u64) -> Self {
        Self {
            value,
            error: 0.0,
            n: n.max(1),
            seed: None,
        }
    }

    /// Number of standard errors separating `value` from `target`.
    pub fn z_score(&self, target: f64) -> f64 {
        let gap = self.value - target;
        if self.error == 0.0 {
            if gap == 0.0 {
                0.0
            } else {
                gap.signum() * f64::INFINITY
            }
        } else {
            gap / self.error
        }
    }

    /// Whether `target` lies within `k` errors of the estimate.
    pub fn covers(&self, target: f64, k: f64) -> bool {
        (self.value - target).abs() <= k * self.error
    }
}
