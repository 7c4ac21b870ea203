//! Marginal densities `m(w, v)` of `X ~ N(mu, v I)` under radial priors.
//!
//! Every marginal here is radial, `m(w, v) = M(|w|^2, v)`, and is described by
//! its profile `M(z, v)` together with the analytic derivatives `dM/dz` and
//! `d^2M/dz^2`. Laplacians follow from the chain rule
//! `Delta m = 2 d M' + 4 z M''`.
//!
//! For the harmonic prior `|mu|^{2-d}`,
//! `M(z, v) = b int_0^1 s^{a-1} e^{-s c} ds` with `a = d/2 - 1`,
//! `c = z / (2v)` and `b = 1 / (Gamma(a) 2^a v^a)`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::numerics::special::{ln_gamma, lower_gamma_scaled};

/// The priors whose marginals are available in closed form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Prior {
    /// Lebesgue measure; `m` is identically one.
    Uniform,
    /// `pi_H(mu) = |mu|^{-(d-2)}`.
    Harmonic,
    /// `N(0, c * base * I)`.
    Gaussian { c: f64, base: f64 },
}

impl Prior {
    pub fn label(&self) -> &'static str {
        match self {
            Prior::Uniform => "uniform",
            Prior::Harmonic => "harmonic",
            Prior::Gaussian { .. } => "gaussian",
        }
    }
}

/// A radial marginal density in dimension `d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Marginal {
    pub prior: Prior,
    pub d: usize,
}

/// Profile value with its first two `z`-derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialJet {
    pub value: f64,
    pub dz: f64,
    pub dz2: f64,
}

fn check_zv(z: f64, v: f64) -> Result<()> {
    if !(z >= 0.0 && z.is_finite()) {
        return Err(invalid("z", format!("squared radius must be finite and nonnegative, got {z}")));
    }
    if !(v > 0.0 && v.is_finite()) {
        return Err(invalid("v", format!("variance must be positive, got {v}")));
    }
    Ok(())
}

fn check_dim(d: usize) -> Result<()> {
    if d < 3 {
        return Err(invalid("d", format!("harmonic marginal needs d >= 3, got {d}")));
    }
    Ok(())
}

/// `ln b` for the harmonic marginal; `b` depends on `v` and is never cached.
fn ln_harmonic_b(d: usize, v: f64) -> f64 {
    let a = d as f64 / 2.0 - 1.0;
    -ln_gamma(a) - a * (2.0 * v).ln()
}

/// Harmonic-prior marginal `m_H` at squared radius `z`.
pub fn harmonic_marginal(z: f64, v: f64, d: usize) -> Result<f64> {
    Ok(ln_harmonic_marginal(z, v, d)?.exp())
}

/// `ln m_H(z, v)`.
pub fn ln_harmonic_marginal(z: f64, v: f64, d: usize) -> Result<f64> {
    check_zv(z, v)?;
    check_dim(d)?;
    let a = d as f64 / 2.0 - 1.0;
    Ok(ln_harmonic_b(d, v) + lower_gamma_scaled(a, z / (2.0 * v))?.ln())
}

/// `d^k M_H / dz^k` for `k` in {1, 2}, by differentiating under the integral sign.
pub fn harmonic_marginal_dz(z: f64, v: f64, d: usize, order: u32) -> Result<f64> {
    check_zv(z, v)?;
    check_dim(d)?;
    let a = d as f64 / 2.0 - 1.0;
    let b = ln_harmonic_b(d, v).exp();
    let c = z / (2.0 * v);
    match order {
        1 => Ok(-b / (2.0 * v) * lower_gamma_scaled(a + 1.0, c)?),
        2 => Ok(b / (4.0 * v * v) * lower_gamma_scaled(a + 2.0, c)?),
        _ => Err(invalid("order", format!("derivative order must be 1 or 2, got {order}"))),
    }
}

/// Marginal of `X` when `mu ~ N(0, c * base * I)`: the `N(0, (v + c base) I)` density.
pub fn gaussian_prior_marginal(z: f64, v: f64, d: usize, c: f64, base: f64) -> Result<f64> {
    check_zv(z, v)?;
    if !(c >= 0.0 && base >= 0.0) {
        return Err(invalid("c", "prior scale must be nonnegative"));
    }
    Ok(crate::problem::gaussian_logpdf_sq(z, d, v + c * base).exp())
}

impl Marginal {
    pub fn new(prior: Prior, d: usize) -> Result<Self> {
        match prior {
            Prior::Harmonic => check_dim(d)?,
            Prior::Gaussian { c, base } if !(c > 0.0 && base > 0.0) => {
                return Err(invalid("c", format!("prior scale must be positive, got c = {c}, base = {base}")))
            }
            _ if d == 0 => return Err(invalid("d", "dimension must be positive")),
            _ => {}
        }
        Ok(Self { prior, d })
    }

    pub fn uniform(d: usize) -> Self {
        Self { prior: Prior::Uniform, d }
    }

    pub fn harmonic(d: usize) -> Result<Self> {
        Self::new(Prior::Harmonic, d)
    }

    pub fn value(&self, z: f64, v: f64) -> Result<f64> {
        Ok(self.ln_value(z, v)?.exp())
    }

    pub fn ln_value(&self, z: f64, v: f64) -> Result<f64> {
        check_zv(z, v)?;
        match self.prior {
            Prior::Uniform => Ok(0.0),
            Prior::Harmonic => ln_harmonic_marginal(z, v, self.d),
            Prior::Gaussian { c, base } => Ok(crate::problem::gaussian_logpdf_sq(z, self.d, v + c * base)),
        }
    }

    /// `M`, `dM/dz` and `d^2M/dz^2` at `(z, v)`.
    pub fn jet(&self, z: f64, v: f64) -> Result<RadialJet> {
        check_zv(z, v)?;
        match self.prior {
            Prior::Uniform => Ok(RadialJet { value: 1.0, dz: 0.0, dz2: 0.0 }),
            Prior::Harmonic => Ok(RadialJet {
                value: harmonic_marginal(z, v, self.d)?,
                dz: harmonic_marginal_dz(z, v, self.d, 1)?,
                dz2: harmonic_marginal_dz(z, v, self.d, 2)?,
            }),
            Prior::Gaussian { c, base } => {
                let s = v + c * base;
                let m = gaussian_prior_marginal(z, v, self.d, c, base)?;
                Ok(RadialJet { value: m, dz: -m / (2.0 * s), dz2: m / (4.0 * s * s) })
            }
        }
    }

    /// `d/dz ln M(z, v)`.
    pub fn dz_log(&self, z: f64, v: f64) -> Result<f64> {
        check_zv(z, v)?;
        match self.prior {
            Prior::Uniform => Ok(0.0),
            Prior::Harmonic => {
                let a = self.d as f64 / 2.0 - 1.0;
                let c = z / (2.0 * v);
                Ok(-lower_gamma_scaled(a + 1.0, c)? / (2.0 * v * lower_gamma_scaled(a, c)?))
            }
            Prior::Gaussian { c, base } => Ok(-1.0 / (2.0 * (v + c * base))),
        }
    }

    /// `Delta_w m / m` at `|w|^2 = z`.
    ///
    /// For the harmonic prior the chain-rule terms cancel to
    /// `Delta m_H = -(2 b / v) e^{-z/(2v)}`, which is used directly.
    pub fn laplacian_ratio(&self, z: f64, v: f64) -> Result<f64> {
        check_zv(z, v)?;
        match self.prior {
            Prior::Uniform => Ok(0.0),
            Prior::Harmonic => {
                let a = self.d as f64 / 2.0 - 1.0;
                let c = z / (2.0 * v);
                Ok(-2.0 * (-c).exp() / (v * lower_gamma_scaled(a, c)?))
            }
            Prior::Gaussian { c, base } => {
                let s = v + c * base;
                Ok(-(self.d as f64) / s + z / (s * s))
            }
        }
    }

    /// `|grad_w ln m|^2 = 4 z (M'/M)^2`.
    pub fn grad_log_sq(&self, z: f64, v: f64) -> Result<f64> {
        let g = self.dz_log(z, v)?;
        Ok(4.0 * z * g * g)
    }

    /// `Delta_w m^a / m^a = a (Delta m / m + (a - 1) |grad ln m|^2)`.
    pub fn laplacian_power_ratio(&self, z: f64, v: f64, a: f64) -> Result<f64> {
        if a == 0.0 || !a.is_finite() {
            return Err(invalid("a", format!("exponent must be finite and nonzero, got {a}")));
        }
        Ok(a * (self.laplacian_ratio(z, v)? + (a - 1.0) * self.grad_log_sq(z, v)?))
    }
}

/// `Delta_w m` at `|w|^2 = z`.
pub fn laplacian_m(marginal: &Marginal, z: f64, v: f64) -> Result<f64> {
    Ok(marginal.laplacian_ratio(z, v)? * marginal.value(z, v)?)
}

/// `Delta_w m^a` at `|w|^2 = z`.
pub fn laplacian_m_power(marginal: &Marginal, z: f64, v: f64, a: f64) -> Result<f64> {
    let ratio = marginal.laplacian_power_ratio(z, v, a)?;
    Ok(ratio * (a * marginal.ln_value(z, v)?).exp())
}

/// The chain-rule Laplacian `2 d M' + 4 z M''` from the analytic jet.
pub fn laplacian_chain_rule(marginal: &Marginal, z: f64, v: f64) -> Result<f64> {
    let jet = marginal.jet(z, v)?;
    Ok(2.0 * marginal.d as f64 * jet.dz + 4.0 * z * jet.dz2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::quad::{adaptive_quad, QuadOptions};
    use crate::numerics::radial::{default_fd_step, radial_expectation, radial_laplacian};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// `m_H` by direct quadrature of the mixing integral.
    fn harmonic_by_quadrature(z: f64, v: f64, d: usize) -> f64 {
        let a = d as f64 / 2.0 - 1.0;
        let b = 1.0 / (ln_gamma(a).exp() * (2.0 * v).powf(a));
        let opts = QuadOptions::with_tol(1e-13).lower_exponent(a - 1.0);
        b * adaptive_quad(|s: f64| s.powf(a - 1.0) * (-s * z / (2.0 * v)).exp(), 0.0, 1.0, &opts)
            .unwrap()
            .value
    }

    /// Laplacian of `w -> F(|w|^2)` by the 2d+1 point axis stencil at `w = (sqrt z, 0, ...)`.
    fn stencil_laplacian(f: impl Fn(f64) -> f64, z: f64, d: usize, h: f64) -> f64 {
        let r = z.sqrt();
        let center = f(z);
        let mut total = 0.0;
        for axis in 0..d {
            let (zp, zm) = if axis == 0 {
                ((r + h).powi(2), (r - h).powi(2))
            } else {
                (z + h * h, z + h * h)
            };
            total += (f(zp) - 2.0 * center + f(zm)) / (h * h);
        }
        total
    }

    #[test]
    fn harmonic_examples() {
        assert!((harmonic_marginal(0.0, 1.0, 4).unwrap() - 0.5).abs() < 1e-15);
        let expect = 0.5 * (1.0 - (-1.0f64).exp());
        assert!((harmonic_marginal(2.0, 1.0, 4).unwrap() - expect).abs() < 1e-15);
        assert!((expect - 0.316_060_3).abs() < 1e-7);
        for &(z, v, d) in &[(5.0, 2.0, 3usize), (0.0, 1.0, 3), (1e-9, 0.3, 5), (40.0, 0.7, 6), (3.0, 1.0, 11)] {
            let got = harmonic_marginal(z, v, d).unwrap();
            let oracle = harmonic_by_quadrature(z, v, d);
            assert!((got - oracle).abs() <= 1e-10 * oracle, "({z},{v},{d}): {got} vs {oracle}");
        }
        assert!(harmonic_marginal(1.0, 0.0, 4).is_err());
        assert!(harmonic_marginal(1.0, 1.0, 2).is_err());
    }

    #[test]
    fn derivative_examples() {
        assert!((harmonic_marginal_dz(0.0, 1.0, 4, 1).unwrap() + 0.125).abs() < 1e-15);
        assert!(harmonic_marginal_dz(0.0, 1.0, 4, 3).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let z = rng.random_range(0.1..20.0);
            let v = rng.random_range(0.2..3.0);
            let d = rng.random_range(3..9);
            let m = |z: f64| harmonic_marginal(z, v, d).unwrap();
            let h = 1e-4 * (1.0 + z);
            let d1 = (m(z + h) - m(z - h)) / (2.0 * h);
            let got1 = harmonic_marginal_dz(z, v, d, 1).unwrap();
            assert!(got1 < 0.0);
            assert!((got1 - d1).abs() <= 1e-6 * got1.abs().max(1e-3), "{got1} vs {d1}");
            let h = 1e-3 * (1.0 + z);
            let d2 = (m(z + h) - 2.0 * m(z) + m(z - h)) / (h * h);
            let got2 = harmonic_marginal_dz(z, v, d, 2).unwrap();
            assert!(got2 > 0.0);
            assert!((got2 - d2).abs() <= 1e-4 * got2.abs().max(1e-3), "{got2} vs {d2}");
        }
    }

    #[test]
    fn closed_form_laplacian_matches_chain_rule_and_stencil() {
        let mh = Marginal::harmonic(4).unwrap();
        let stencil = stencil_laplacian(|z| harmonic_marginal(z, 1.0, 4).unwrap(), 1.0, 4, 1e-3);
        let lap = laplacian_m(&mh, 1.0, 1.0).unwrap();
        assert!((lap - stencil).abs() < 1e-5, "{lap} vs {stencil}");
        for &(z, v, d) in &[(0.0, 1.0, 3usize), (0.4, 2.0, 5), (3.0, 0.5, 4), (9.0, 1.0, 7)] {
            let m = Marginal::harmonic(d).unwrap();
            let chain = laplacian_chain_rule(&m, z, v).unwrap();
            let closed = laplacian_m(&m, z, v).unwrap();
            assert!((chain - closed).abs() <= 1e-10 * closed.abs(), "{chain} vs {closed}");
        }
        let sq = stencil_laplacian(|z| harmonic_marginal(z, 1.0, 4).unwrap().powi(2), 1.0, 4, 1e-3);
        let got = laplacian_m_power(&mh, 1.0, 1.0, 2.0).unwrap();
        assert!((got - sq).abs() < 1e-5, "{got} vs {sq}");
        let one = laplacian_m_power(&mh, 1.0, 1.0, 1.0).unwrap();
        assert!((one - lap).abs() <= 1e-14 * lap.abs());
        assert!(laplacian_m_power(&mh, 1.0, 1.0, 0.0).is_err());
        assert_eq!(laplacian_m(&Marginal::uniform(4), 3.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn root_profile_laplacian_matches_stencil() {
        // radial_laplacian on the m_H^{1/2} profile against the full stencil
        let root = |r: f64| harmonic_marginal(r * r, 1.0, 4).unwrap().sqrt();
        let radial = radial_laplacian(&root, 1.0, 4, default_fd_step(1.0)).unwrap();
        let stencil = stencil_laplacian(|z| harmonic_marginal(z, 1.0, 4).unwrap().sqrt(), 1.0, 4, 1e-3);
        let analytic = laplacian_m_power(&Marginal::harmonic(4).unwrap(), 1.0, 1.0, 0.5).unwrap();
        assert!(radial < 0.0);
        assert!((radial - stencil).abs() < 1e-5);
        assert!((radial - analytic).abs() < 1e-6);
    }

    #[test]
    fn superharmonic_on_grid() {
        for i in 0..10 {
            for j in 0..10 {
                let z = 0.05 * 1.9f64.powi(i) - 0.05;
                let v = 0.1 + 0.4 * j as f64;
                for d in [3usize, 4, 5, 10] {
                    let m = Marginal::harmonic(d).unwrap();
                    assert!(laplacian_m(&m, z, v).unwrap() <= 0.0);
                    assert!(laplacian_m_power(&m, z, v, 0.5).unwrap() <= 0.0);
                }
            }
        }
    }

    #[test]
    fn heat_semigroup() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let d = rng.random_range(3..7);
            let u: f64 = rng.random_range(0.0..4.0);
            let t: f64 = rng.random_range(0.1..2.0);
            let v: f64 = rng.random_range(0.2..2.0);
            let smoothed = radial_expectation(&|r: f64| harmonic_marginal(r * r, v, d).unwrap(), u, t, d, 1e-11)
                .unwrap()
                .value;
            let target = harmonic_marginal(u * u, v + t * t, d).unwrap();
            assert!((smoothed - target).abs() <= 1e-8 * target, "{smoothed} vs {target}");
            let g = |r: f64| gaussian_prior_marginal(r * r, v, d, 1.0, 0.5).unwrap();
            let smoothed = radial_expectation(&g, u, t, d, 1e-11).unwrap().value;
            let target = gaussian_prior_marginal(u * u, v + t * t, d, 1.0, 0.5).unwrap();
            assert!((smoothed - target).abs() <= 1e-10 * target);
        }
    }

    #[test]
    fn gaussian_prior_examples() {
        let at0 = gaussian_prior_marginal(0.0, 1.0, 3, 2.0, 0.5).unwrap();
        assert!((at0 - (2.0 * std::f64::consts::PI * 2.0f64).powf(-1.5)).abs() < 1e-15);
        let point_mass = gaussian_prior_marginal(1.3, 1.0, 3, 0.0, 0.5).unwrap();
        let phi = crate::problem::gaussian_logpdf_sq(1.3, 3, 1.0).exp();
        assert_eq!(point_mass, phi);
        let m = Marginal::new(Prior::Gaussian { c: 1.0, base: 0.7 }, 4).unwrap();
        let chain = laplacian_chain_rule(&m, 2.0, 1.0).unwrap();
        assert!((chain - laplacian_m(&m, 2.0, 1.0).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn asymptote_monotonicity_and_scaling() {
        for d in [3usize, 4, 6] {
            let a = d as f64 / 2.0 - 1.0;
            let v = 0.8;
            let z = 1e4 * v;
            let limit = (ln_harmonic_b(d, v) + ln_gamma(a) + a * (2.0 * v / z).ln()).exp();
            let got = harmonic_marginal(z, v, d).unwrap();
            assert!((got / limit - 1.0).abs() < 1e-3);
            let mut prev = f64::INFINITY;
            for i in 0..200 {
                let m = harmonic_marginal(0.1 * i as f64, v, d).unwrap();
                assert!(m < prev);
                prev = m;
            }
            // m_H(z, v) = v^{-(d-2)/2} g(z / v)
            for &(z, s) in &[(1.0, 3.0), (0.2, 0.1), (7.0, 11.0)] {
                let lhs = harmonic_marginal(z * s, v * s, d).unwrap();
                let rhs = s.powf(-a) * harmonic_marginal(z, v, d).unwrap();
                assert!((lhs - rhs).abs() <= 1e-13 * rhs);
            }
        }
    }
}
