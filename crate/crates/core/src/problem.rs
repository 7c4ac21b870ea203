//! Problem definition for predicting `Y ~ N_d(mu, v_y I)` from `X ~ N_d(mu, v_x I)`
//! under alpha-divergence loss, with the constants every other module derives from it.
//!
//! With `beta = (1 - alpha) / 2` the Bayes predictive density is a normalized
//! `1/beta` power of a posterior-smoothed density. Completing the square in `mu`
//! introduces `gamma = 1 / (1 + beta v_x / v_y)`, the smoothing scale
//! `xi = (1 - gamma) sqrt(v_y / gamma)`, and the best invariant variance
//! `v_y / gamma = v_y + beta v_x`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Relative tolerance used to decide whether `1/beta` is an integer.
pub const INTEGER_REL_TOL: f64 = 1e-9;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// The tuple `(d, v_x, v_y, alpha)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub d: usize,
    pub v_x: f64,
    pub v_y: f64,
    pub alpha: f64,
}

impl ProblemSpec {
    pub fn new(d: usize, v_x: f64, v_y: f64, alpha: f64) -> Result<Self> {
        let spec = Self { d, v_x, v_y, alpha };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 3 {
            return Err(invalid("d", format!("dimension must be at least 3, got {}", self.d)));
        }
        if !(self.v_x > 0.0 && self.v_x.is_finite()) {
            return Err(invalid("v_x", format!("variance must be positive, got {}", self.v_x)));
        }
        if !(self.v_y > 0.0 && self.v_y.is_finite()) {
            return Err(invalid("v_y", format!("variance must be positive, got {}", self.v_y)));
        }
        if !(-1.0..=1.0).contains(&self.alpha) {
            return Err(invalid("alpha", format!("must lie in [-1, 1], got {}", self.alpha)));
        }
        Ok(())
    }

    /// Rejects the endpoints `alpha = -1` and `alpha = 1`.
    pub fn require_interior(&self) -> Result<()> {
        self.validate()?;
        if self.alpha <= -1.0 || self.alpha >= 1.0 {
            return Err(invalid(
                "alpha",
                format!("operation requires alpha in (-1, 1), got {}", self.alpha),
            ));
        }
        Ok(())
    }

    pub fn derived(&self) -> Result<DerivedConstants> {
        derive_constants(self)
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        Self::new(self.d, self.v_x, self.v_y, alpha)
    }
}

/// Constants derived from a [`ProblemSpec`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedConstants {
    pub beta: f64,
    pub gamma: f64,
    pub xi: f64,
    pub v_star: f64,
    /// Smallest integer strictly greater than `1/beta`; `None` when `1/beta` is an integer.
    pub kappa: Option<u64>,
    /// `(kappa - 1/beta + 1) / 2`, present together with `kappa`.
    pub c_beta: Option<f64>,
}

impl DerivedConstants {
    /// `gamma^{(1 - beta) d / 2}`.
    pub fn gamma_power(&self, d: usize) -> f64 {
        ((1.0 - self.beta) * d as f64 / 2.0 * self.gamma.ln()).exp()
    }

    /// Variance of the best invariant density, `v_y / gamma`.
    pub fn invariant_variance(&self, v_y: f64) -> f64 {
        v_y / self.gamma
    }

    /// `1/beta` when it is (numerically) an integer.
    pub fn integer_inverse_beta(&self) -> Option<u64> {
        if self.beta <= 0.0 {
            return None;
        }
        nearest_integer(1.0 / self.beta)
    }
}

/// Returns `round(x)` when `|x - round(x)| < 1e-9 * x`.
pub fn nearest_integer(x: f64) -> Option<u64> {
    if !(x.is_finite() && x > 0.0) {
        return None;
    }
    let r = x.round();
    ((x - r).abs() < INTEGER_REL_TOL * x).then_some(r as u64)
}

pub fn derive_constants(spec: &ProblemSpec) -> Result<DerivedConstants> {
    spec.validate()?;
    let ProblemSpec { v_x, v_y, alpha, .. } = *spec;
    let beta = (1.0 - alpha) / 2.0;
    let gamma = 1.0 / (1.0 + beta * v_x / v_y);
    let xi = (1.0 - gamma) * (v_y / gamma).sqrt();
    let v_star = v_x * v_y / (v_x + v_y);

    let (kappa, c_beta) = if beta > 0.0 {
        let inv = 1.0 / beta;
        match nearest_integer(inv) {
            Some(_) => (None, None),
            None => {
                let kappa = inv.floor() as u64 + 1;
                let c = (kappa as f64 - inv + 1.0) / 2.0;
                (Some(kappa), Some(c))
            }
        }
    } else {
        (None, None)
    };

    Ok(DerivedConstants {
        beta,
        gamma,
        xi,
        v_star,
        kappa,
        c_beta,
    })
}

/// Generator of the alpha-divergence, `D_alpha(p || q) = E_p[f_alpha(q / p)]`.
pub fn f_alpha(z: f64, alpha: f64) -> Result<f64> {
    if !(z > 0.0) {
        return Err(invalid("z", format!("ratio must be positive, got {z}")));
    }
    if !(-1.0..=1.0).contains(&alpha) {
        return Err(invalid("alpha", format!("must lie in [-1, 1], got {alpha}")));
    }
    Ok(if alpha == 1.0 {
        z * z.ln()
    } else if alpha == -1.0 {
        -z.ln()
    } else {
        // 1 - z^p computed as -expm1(p ln z) to keep f_alpha(1 + eps) accurate.
        let p = (1.0 + alpha) / 2.0;
        -4.0 / (1.0 - alpha * alpha) * (p * z.ln()).exp_m1()
    })
}

/// Log-density of `N_d(0, v I)` at offset `u`.
pub fn gaussian_logpdf(u: &[f64], v: f64) -> Result<f64> {
    if !(v > 0.0) {
        return Err(invalid("v", format!("variance must be positive, got {v}")));
    }
    let norm_sq: f64 = u.iter().map(|c| c * c).sum();
    Ok(gaussian_logpdf_sq(norm_sq, u.len(), v))
}

/// Log-density of `N_d(0, v I)` at a point with squared norm `norm_sq`. No validation.
#[inline]
pub fn gaussian_logpdf_sq(norm_sq: f64, d: usize, v: f64) -> f64 {
    -0.5 * d as f64 * (LN_2PI + v.ln()) - norm_sq / (2.0 * v)
}

/// Both sides of the completing-squares identity
/// `ln phi(x - mu, v_x) + beta ln phi(y - mu, v_y)
///  = ln[gamma^{(1-beta)d/2} phi(w - mu, v_x gamma)] + beta ln phi(y - x, v_y / gamma)`
/// with `w = gamma x + (1 - gamma) y`.
pub fn completing_squares_sides(spec: &ProblemSpec, x: &[f64], y: &[f64], mu: &[f64]) -> Result<(f64, f64)> {
    spec.validate()?;
    let d = spec.d;
    if x.len() != d || y.len() != d || mu.len() != d {
        return Err(invalid("x", format!("all points need {d} coordinates")));
    }
    let c = derive_constants(spec)?;
    let g = c.gamma;
    let sq = |f: &dyn Fn(usize) -> f64| (0..d).map(|i| f(i) * f(i)).sum::<f64>();
    let lhs = gaussian_logpdf_sq(sq(&|i| x[i] - mu[i]), d, spec.v_x)
        + c.beta * gaussian_logpdf_sq(sq(&|i| y[i] - mu[i]), d, spec.v_y);
    let rhs = (1.0 - c.beta) * d as f64 / 2.0 * g.ln()
        + gaussian_logpdf_sq(sq(&|i| g * x[i] + (1.0 - g) * y[i] - mu[i]), d, spec.v_x * g)
        + c.beta * gaussian_logpdf_sq(sq(&|i| y[i] - x[i]), d, spec.v_y / g);
    Ok((lhs, rhs))
}

/// `D_alpha{ N(mu1, v1 I) || N(mu2, v2 I) }` for `alpha` in `(-1, 1)`.
///
/// Uses `D = (1 - C) / (beta (1 - beta))` with the Chernoff coefficient
/// `C = int p^beta q^{1-beta}`, which for isotropic Gaussians is
/// `(v1^{1-beta} v2^beta / V)^{d/2} exp(-beta (1-beta) |mu1 - mu2|^2 / (2V))`,
/// `V = beta v2 + (1 - beta) v1`.
pub fn alpha_div_gaussians(mu1: &[f64], v1: f64, mu2: &[f64], v2: f64, alpha: f64) -> Result<f64> {
    if mu1.len() != mu2.len() {
        return Err(invalid("mu2", "mean vectors must have equal length"));
    }
    let dist_sq: f64 = mu1.iter().zip(mu2).map(|(a, b)| (a - b) * (a - b)).sum();
    alpha_div_gaussians_sq(dist_sq, mu1.len(), v1, v2, alpha)
}

/// [`alpha_div_gaussians`] with the squared mean distance given directly.
pub fn alpha_div_gaussians_sq(dist_sq: f64, d: usize, v1: f64, v2: f64, alpha: f64) -> Result<f64> {
    if !(v1 > 0.0) {
        return Err(invalid("v1", format!("variance must be positive, got {v1}")));
    }
    if !(v2 > 0.0) {
        return Err(invalid("v2", format!("variance must be positive, got {v2}")));
    }
    if !(alpha > -1.0 && alpha < 1.0) {
        return Err(invalid("alpha", format!("must lie in (-1, 1), got {alpha}")));
    }
    let beta = (1.0 - alpha) / 2.0;
    let mixed = beta * v2 + (1.0 - beta) * v1;
    let log_var = if v1 == v2 {
        0.0
    } else {
        0.5 * d as f64 * ((1.0 - beta) * v1.ln() + beta * v2.ln() - mixed.ln())
    };
    let log_c = log_var - beta * (1.0 - beta) * dist_sq / (2.0 * mixed);
    // Hoelder gives C <= 1; clamp the rounding residue
    Ok(-log_c.min(0.0).exp_m1() / (beta * (1.0 - beta)))
}
