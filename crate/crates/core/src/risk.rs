//! Alpha-divergence risks `R(p, mu) = E_X D_alpha(phi(. - mu, v_y) || p(. | X))`
//! and risk differences against the best invariant density `p_U`.
//!
//! Risk differences are reported as `R(p_U) - R(p)`, so positive values favour
//! the shrinkage density. Four independent routes are provided: paired Monte
//! Carlo with common random numbers, the deterministic `rho(W, Z)` representation,
//! and the closed forms at the endpoints `alpha = 1` and `alpha = -1`.

use std::cell::RefCell;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::marginal::Marginal;
use crate::numerics::radial::{
    laplacian_from_derivatives, radial_expectation, radial_expectation_fixed, radial_expectation_panels,
    radial_log_expectation_jet, radial_log_panels, RadialProfile, TabulatedProfile,
};
use crate::numerics::{adaptive_quad, mc_mean, mc_means, Estimate, QuadOptions};
use crate::predictive::{harmonic_shape, NormalizerTable, Shape};
use crate::problem::{alpha_div_gaussians_sq, gaussian_logpdf_sq, DerivedConstants, ProblemSpec};

/// Smallest Monte Carlo sample size accepted for reported results.
pub const MIN_SAMPLES: u64 = 1000;

/// Log-ratios above this are clamped and counted.
pub const LOG_CLAMP: f64 = 700.0;

/// Predictive density whose risk is estimated.
#[derive(Debug, Clone)]
pub enum Candidate {
    /// `phi(y - x, v_y / gamma)`.
    BestInvariant,
    /// `phi(y - x, variance)`.
    InvariantGaussian { variance: f64 },
    /// Bayes density under the harmonic prior.
    HarmonicBayes,
    /// Density induced by a radial `f`.
    Induced(Shape),
    /// `phi(y - mu_hat(x), v_y)` with the posterior mean under `marginal`.
    Plugin(Marginal),
}

impl Candidate {
    pub fn label(&self) -> &'static str {
        match self {
            Candidate::BestInvariant => "uniform",
            Candidate::InvariantGaussian { .. } => "invariant_gaussian",
            Candidate::HarmonicBayes => "harmonic",
            Candidate::Induced(_) => "f_induced",
            Candidate::Plugin(_) => "plugin",
        }
    }
}

/// One risk evaluation at a true mean `mu`.
#[derive(Debug, Clone)]
pub struct RiskQuery {
    pub spec: ProblemSpec,
    pub mu: Vec<f64>,
    pub candidate: Candidate,
    pub n: u64,
    pub seed: u64,
}

impl RiskQuery {
    pub fn new(spec: ProblemSpec, mu: Vec<f64>, candidate: Candidate, n: u64, seed: u64) -> Result<Self> {
        let q = Self { spec, mu, candidate, n, seed };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        check_mu(&self.spec, &self.mu)?;
        check_n(self.n)
    }
}

/// How a risk difference was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    CrnMc,
    RhoOracle,
    Alpha1Formula,
    KlIntegral,
}

impl Method {
    pub fn label(&self) -> &'static str {
        match self {
            Method::CrnMc => "crn_mc",
            Method::RhoOracle => "rho_oracle",
            Method::Alpha1Formula => "alpha1_formula",
            Method::KlIntegral => "kl_integral",
        }
    }
}

/// `R(p_U, mu) - R(p, mu)` at one mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskDifferenceResult {
    pub diff: Estimate,
    pub mu_norm: f64,
    pub method: Method,
    /// Samples whose log-ratio hit [`LOG_CLAMP`].
    pub clamped: u64,
}

fn check_mu(spec: &ProblemSpec, mu: &[f64]) -> Result<()> {
    if mu.len() != spec.d {
        return Err(invalid("mu", format!("expected {} coordinates, got {}", spec.d, mu.len())));
    }
    if mu.iter().any(|m| !m.is_finite()) {
        return Err(invalid("mu", "mean must be finite"));
    }
    Ok(())
}

fn check_n(n: u64) -> Result<()> {
    if n < MIN_SAMPLES {
        return Err(invalid("n", format!("need at least {MIN_SAMPLES} samples, got {n}")));
    }
    Ok(())
}

fn check_tol(tol: f64) -> Result<()> {
    if !(tol > 0.0 && tol < 1.0) {
        return Err(invalid("quad_tol", format!("must lie in (0, 1), got {tol}")));
    }
    Ok(())
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Risk of the invariant Gaussian `phi(y - x, q_variance)`; constant in `mu`.
///
/// `(1 - g) / (beta (1 - beta)) + g D_alpha(phi(., v_y / gamma) || phi(., q_variance))`
/// with `g = gamma^{(1 - beta) d / 2}`.
pub fn invariant_risk_closed_form(spec: &ProblemSpec, q_variance: f64) -> Result<f64> {
    spec.require_interior()?;
    if !(q_variance > 0.0 && q_variance.is_finite()) {
        return Err(invalid("q_variance", format!("must be positive, got {q_variance}")));
    }
    let c = spec.derived()?;
    let g = c.gamma_power(spec.d);
    let best = c.invariant_variance(spec.v_y);
    let div = if q_variance == best {
        0.0
    } else {
        alpha_div_gaussians_sq(0.0, spec.d, best, q_variance, spec.alpha)?
    };
    Ok((1.0 - g) / (c.beta * (1.0 - c.beta)) + g * div)
}

/// Bayes risk of the Bayes density under the prior `N(0, c v_x I)`.
pub fn extended_bayes_risk(spec: &ProblemSpec, c: f64) -> Result<f64> {
    spec.require_interior()?;
    if !(c > 0.0 && c.is_finite()) {
        return Err(invalid("c", format!("prior scale must be positive, got {c}")));
    }
    let k = spec.derived()?;
    let ratio = (1.0 + c * k.gamma) / (1.0 + c);
    let p = spec.d as f64 * (1.0 - k.beta) / 2.0;
    Ok(-(p * ratio.ln()).exp_m1() / (k.beta * (1.0 - k.beta)))
}

/// `(1 - beta) (ln p - ln phi)`, clamped at [`LOG_CLAMP`]; the flag is 1 when clamped.
#[inline]
fn clamp_log(a: f64) -> (f64, f64) {
    if a > LOG_CLAMP {
        (LOG_CLAMP, 1.0)
    } else {
        (a, 0.0)
    }
}

/// Monte Carlo estimate of the risk `R(p, mu)`.
///
/// At `alpha = 1` the loss is `|mu_hat(X) - mu|^2 / (2 v_y)` for a plug-in
/// candidate. For `|alpha| < 1`, Gaussian candidates use the closed-form
/// divergence per `X`; other candidates draw one `Y` per `X`. Any clamped
/// log-ratio is reported as [`Error::Overflow`].
pub fn risk_mc(query: &RiskQuery) -> Result<Estimate> {
    query.validate()?;
    let spec = &query.spec;
    let d = spec.d;
    let mu = &query.mu;
    let sx = spec.v_x.sqrt();
    let draw_x = |rng: &mut rand_chacha::ChaCha8Rng, x: &mut Vec<f64>| {
        x.clear();
        x.extend(mu.iter().map(|m| m + sx * rng.sample::<f64, _>(StandardNormal)));
    };

    if spec.alpha == 1.0 {
        let marginal = match &query.candidate {
            Candidate::Plugin(m) => *m,
            Candidate::BestInvariant => Marginal::uniform(d),
            other => {
                return Err(invalid(
                    "candidate",
                    format!("alpha = 1 needs a plug-in candidate, got {}", other.label()),
                ))
            }
        };
        return mc_mean(query.n, query.seed, |rng| {
            let mut x = Vec::with_capacity(d);
            draw_x(rng, &mut x);
            let z: f64 = x.iter().map(|a| a * a).sum();
            let factor = 1.0 + 2.0 * spec.v_x * marginal.dz_log(z, spec.v_x).unwrap_or(f64::NAN);
            let err: f64 = x.iter().zip(mu).map(|(a, m)| (a * factor - m).powi(2)).sum();
            err / (2.0 * spec.v_y)
        });
    }

    spec.require_interior()?;
    let c = spec.derived()?;
    let shape = match &query.candidate {
        Candidate::BestInvariant => {
            return gaussian_risk_mc(query, c.invariant_variance(spec.v_y), None);
        }
        Candidate::InvariantGaussian { variance } => {
            if !(*variance > 0.0) {
                return Err(invalid("variance", format!("must be positive, got {variance}")));
            }
            return gaussian_risk_mc(query, *variance, None);
        }
        Candidate::Plugin(m) => return gaussian_risk_mc(query, spec.v_y, Some(m)),
        Candidate::HarmonicBayes => harmonic_shape(spec)?,
        Candidate::Induced(s) => s.clone(),
    };

    let table = normalizer_table(spec, &c, shape, norm(mu))?;
    let inv_var = c.invariant_variance(spec.v_y);
    let sy = spec.v_y.sqrt();
    let scale = 1.0 / (c.beta * (1.0 - c.beta));
    let est = mc_means(query.n, query.seed, 2, |rng, out| {
        let s = pair_sample(rng, mu, sx, sy, c.gamma);
        let ln_n = table.ln_normalizer(s.x_sq.sqrt()).unwrap_or(f64::NAN);
        let ln_ratio = gaussian_logpdf_sq(s.yx_sq, d, inv_var) - gaussian_logpdf_sq(s.ymu_sq, d, spec.v_y)
            + table.shape().ln_value(s.w_sq.sqrt())
            - ln_n;
        let (a, flag) = clamp_log((1.0 - c.beta) * ln_ratio);
        out[0] = -a.exp_m1() * scale;
        out[1] = flag;
    })?;
    let clamped = count(&est[1]);
    if clamped > 0 {
        return Err(Error::Overflow { context: "risk_mc", samples: clamped });
    }
    Ok(est[0])
}

fn gaussian_risk_mc(query: &RiskQuery, variance: f64, plugin: Option<&Marginal>) -> Result<Estimate> {
    let spec = &query.spec;
    let mu = &query.mu;
    let sx = spec.v_x.sqrt();
    mc_mean(query.n, query.seed, |rng| {
        let xs: Vec<f64> = mu.iter().map(|m| m + sx * rng.sample::<f64, _>(StandardNormal)).collect();
        let factor = match plugin {
            None => 1.0,
            Some(m) => {
                let z: f64 = xs.iter().map(|a| a * a).sum();
                1.0 + 2.0 * spec.v_x * m.dz_log(z, spec.v_x).unwrap_or(f64::NAN)
            }
        };
        let dist: f64 = xs.iter().zip(mu).map(|(a, m)| (a * factor - m).powi(2)).sum();
        alpha_div_gaussians_sq(dist, spec.d, spec.v_y, variance, spec.alpha).unwrap_or(f64::NAN)
    })
}

fn count(flag: &Estimate) -> u64 {
    (flag.value * flag.n as f64).round() as u64
}

/// Squared norms of one paired draw `X ~ N(mu, v_x)`, `Y ~ N(mu, v_y)`.
struct PairSample {
    x_sq: f64,
    w_sq: f64,
    yx_sq: f64,
    ymu_sq: f64,
}

#[inline]
fn pair_sample(rng: &mut rand_chacha::ChaCha8Rng, mu: &[f64], sx: f64, sy: f64, gamma: f64) -> PairSample {
    let mut s = PairSample { x_sq: 0.0, w_sq: 0.0, yx_sq: 0.0, ymu_sq: 0.0 };
    for m in mu {
        let ex = sx * rng.sample::<f64, _>(StandardNormal);
        let ey = sy * rng.sample::<f64, _>(StandardNormal);
        let x = m + ex;
        let y = m + ey;
        let w = gamma * x + (1.0 - gamma) * y;
        s.x_sq += x * x;
        s.w_sq += w * w;
        s.yx_sq += (ey - ex) * (ey - ex);
        s.ymu_sq += ey * ey;
    }
    s
}

fn normalizer_table(spec: &ProblemSpec, c: &DerivedConstants, shape: Shape, mu_norm: f64) -> Result<NormalizerTable> {
    let sx = spec.v_x.sqrt();
    let max_norm = mu_norm + sx * ((spec.d as f64).sqrt() + 10.0);
    let scale = (spec.v_x * c.gamma).sqrt().max(c.xi);
    NormalizerTable::new(shape, c.xi, spec.d, max_norm, scale)
}

/// Risk difference `R(p_U) - R(p_H)` of the harmonic Bayes density by paired Monte Carlo.
pub fn risk_difference_crn(spec: &ProblemSpec, mu: &[f64], n: u64, seed: u64) -> Result<RiskDifferenceResult> {
    spec.require_interior()?;
    risk_difference_crn_shape(spec, mu, &harmonic_shape(spec)?, n, seed)
}

/// Risk difference `R(p_U) - R(p_f)` by paired Monte Carlo.
///
/// Each draw contributes `(p_f/phi)^{1-beta} - (p_U/phi)^{1-beta}`, computed as
/// `e^b expm1(a - b)` from the two log-ratios, so both risks share the same
/// `(X, Y)` and the common noise cancels.
pub fn risk_difference_crn_shape(
    spec: &ProblemSpec,
    mu: &[f64],
    shape: &Shape,
    n: u64,
    seed: u64,
) -> Result<RiskDifferenceResult> {
    spec.require_interior()?;
    check_mu(spec, mu)?;
    check_n(n)?;
    let c = spec.derived()?;
    let d = spec.d;
    let mu_norm = norm(mu);
    let table = normalizer_table(spec, &c, shape.clone(), mu_norm)?;
    let constant = shape.is_constant();
    let inv_var = c.invariant_variance(spec.v_y);
    let (sx, sy) = (spec.v_x.sqrt(), spec.v_y.sqrt());
    let p = 1.0 - c.beta;
    let scale = 1.0 / (c.beta * p);
    let est = mc_means(n, seed, 2, |rng, out| {
        let s = pair_sample(rng, mu, sx, sy, c.gamma);
        if constant {
            out[0] = 0.0;
            out[1] = 0.0;
            return;
        }
        let ln_u = gaussian_logpdf_sq(s.yx_sq, d, inv_var) - gaussian_logpdf_sq(s.ymu_sq, d, spec.v_y);
        let ln_f = table.shape().ln_value(s.w_sq.sqrt()) - table.ln_normalizer(s.x_sq.sqrt()).unwrap_or(f64::NAN);
        let (b, fb) = clamp_log(p * ln_u);
        let (a, fa) = clamp_log(p * (ln_u + ln_f));
        out[0] = b.exp() * (a - b).exp_m1() * scale;
        out[1] = fa.max(fb);
    })?;
    Ok(RiskDifferenceResult {
        diff: est[0],
        mu_norm,
        method: Method::CrnMc,
        clamped: count(&est[1]),
    })
}

/// `(2 v_x^2 / v_y) E_X[-Delta m^{1/2} / m^{1/2}(X, v_x)]`, the `alpha = 1`
/// risk improvement of the plug-in posterior mean over `x`.
pub fn alpha1_risk_difference(
    spec: &ProblemSpec,
    mu: &[f64],
    marginal: &Marginal,
    quad_tol: f64,
) -> Result<RiskDifferenceResult> {
    spec.validate()?;
    check_mu(spec, mu)?;
    check_tol(quad_tol)?;
    check_marginal(spec, marginal)?;
    let mu_norm = norm(mu);
    let e = sqrt_laplacian_expectation(marginal, mu_norm, spec.v_x, spec.d, quad_tol)?;
    let k = 2.0 * spec.v_x * spec.v_x / spec.v_y;
    Ok(RiskDifferenceResult {
        diff: Estimate { value: k * e.value, error: k * e.error, n: e.n, seed: None },
        mu_norm,
        method: Method::Alpha1Formula,
        clamped: 0,
    })
}

fn check_marginal(spec: &ProblemSpec, marginal: &Marginal) -> Result<()> {
    if marginal.d != spec.d {
        return Err(invalid("marginal", format!("dimension {} does not match d = {}", marginal.d, spec.d)));
    }
    Ok(())
}

/// `E_{Z ~ N(mu, v I)}[-Delta m^{1/2} / m^{1/2}(Z, v)]`.
fn sqrt_laplacian_expectation(marginal: &Marginal, mu_norm: f64, v: f64, d: usize, tol: f64) -> Result<Estimate> {
    let failure = RefCell::new(None);
    let g = |r: f64| match marginal.laplacian_power_ratio(r * r, v, 0.5) {
        Ok(x) => -x,
        Err(e) => {
            failure.borrow_mut().get_or_insert(e);
            f64::NAN
        }
    };
    let out = radial_expectation(&g, mu_norm, v.sqrt(), d, tol);
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    out
}

/// `2 int_{v_*}^{v_x} E_{Z ~ N(mu, v I)}[-Delta m^{1/2} / m^{1/2}(Z, v)] dv`, the
/// Kullback-Leibler risk difference at `alpha = -1`.
pub fn kl_risk_difference_integral(
    spec: &ProblemSpec,
    mu: &[f64],
    marginal: &Marginal,
    quad_tol: f64,
) -> Result<RiskDifferenceResult> {
    spec.validate()?;
    if spec.alpha != -1.0 {
        return Err(invalid("alpha", format!("the integral form needs alpha = -1, got {}", spec.alpha)));
    }
    check_mu(spec, mu)?;
    check_tol(quad_tol)?;
    check_marginal(spec, marginal)?;
    let mu_norm = norm(mu);
    let c = spec.derived()?;
    let inner_tol = quad_tol * 1e-2;
    let failure = RefCell::new(None);
    let integrand = |v: f64| match sqrt_laplacian_expectation(marginal, mu_norm, v, spec.d, inner_tol) {
        Ok(e) => e.value,
        Err(e) => {
            failure.borrow_mut().get_or_insert(e);
            f64::NAN
        }
    };
    let out = adaptive_quad(integrand, c.v_star, spec.v_x, &QuadOptions::with_tol(quad_tol));
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    let e = out?;
    Ok(RiskDifferenceResult {
        diff: Estimate {
            value: 2.0 * e.value,
            error: 2.0 * (e.error + inner_tol * e.value.abs()),
            n: e.n,
            seed: None,
        },
        mu_norm,
        method: Method::KlIntegral,
        clamped: 0,
    })
}

/// Largest dimension accepted by [`risk_difference_rho_oracle`].
pub const RHO_ORACLE_MAX_D: usize = 5;

/// Knots (per side) of the tabulated integrand `h_t`.
const H_KNOTS: usize = 200;

/// Risk difference `R(p_U) - R(p_f)` from the representation
/// `(4 g / beta^2) E_W[f(W)^{1-beta} int_0^xi t E_Z[h_t(W + t Z)] dt]`,
/// `W ~ N(mu, v_x gamma I)`, `g = gamma^{(1-beta) d / 2}`, where
/// `h_t = -Delta rho / rho^{2/beta - 1}` and `rho(u; t) = E[f(u + t Z)]^{beta/2}`.
///
/// Every layer is deterministic. With `L = ln E[f(u + t Z)]` and `q = beta/2`,
/// `h_t = -exp((beta - 1) L) (q Delta L + q^2 |grad L|^2)`; `L` is evaluated with
/// a fixed panel count so that its finite differences are smooth. For each `t`
/// the even function `h_t` is tabulated on a cubic spline before the two outer
/// radial expectations. `quad_tol` is the relative tolerance of the `t`-integral;
/// the radial layers run 100 times tighter.
pub fn risk_difference_rho_oracle(
    spec: &ProblemSpec,
    mu: &[f64],
    shape: &Shape,
    quad_tol: f64,
) -> Result<RiskDifferenceResult> {
    spec.require_interior()?;
    check_mu(spec, mu)?;
    check_tol(quad_tol)?;
    if spec.d > RHO_ORACLE_MAX_D {
        return Err(invalid("d", format!("the oracle supports d <= {RHO_ORACLE_MAX_D}, got {}", spec.d)));
    }
    let mu_norm = norm(mu);
    if shape.is_constant() {
        return Ok(RiskDifferenceResult {
            diff: Estimate::exact(0.0, 1),
            mu_norm,
            method: Method::RhoOracle,
            clamped: 0,
        });
    }
    let c = spec.derived()?;
    let oracle = RhoOracle {
        shape,
        d: spec.d,
        beta: c.beta,
        mu_norm,
        sw: (spec.v_x * c.gamma).sqrt(),
        inner_tol: quad_tol * 1e-2,
    };
    let failure = RefCell::new(None);
    let integrand = |t: f64| match oracle.k_of_t(t) {
        Ok(k) => t * k,
        Err(e) => {
            failure.borrow_mut().get_or_insert(e);
            f64::NAN
        }
    };
    let out = adaptive_quad(integrand, 0.0, c.xi, &QuadOptions::with_tol(quad_tol));
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    let e = out?;
    let pre = 4.0 * c.gamma_power(spec.d) / (c.beta * c.beta);
    let value = pre * e.value;
    Ok(RiskDifferenceResult {
        diff: Estimate {
            value,
            error: pre * e.error + 10.0 * oracle.inner_tol * value.abs(),
            n: e.n,
            seed: None,
        },
        mu_norm,
        method: Method::RhoOracle,
        clamped: 0,
    })
}

struct RhoOracle<'a> {
    shape: &'a Shape,
    d: usize,
    beta: f64,
    mu_norm: f64,
    sw: f64,
    inner_tol: f64,
}

impl RhoOracle<'_> {
    /// Radius beyond which `W + t Z` essentially never falls.
    fn reach(&self, t: f64) -> f64 {
        let k = (self.d as f64).sqrt() + 13.0;
        self.mu_norm + k * (self.sw + t)
    }

    /// Panel count giving `inner_tol` on `L`, checked at the centre and the far end.
    fn log_panels(&self, t: f64) -> Result<usize> {
        let radii = [self.mu_norm, 0.5 * self.reach(t)];
        radial_log_panels(|r| self.shape.ln_value(r), &radii, t, self.d, self.inner_tol * 1e-3)
    }

    /// `h_t(s)` with `L` evaluated on `panels` fixed panels.
    fn h(&self, s: f64, t: f64, panels: usize) -> Result<f64> {
        let sigma = (self.sw * self.sw + t * t).sqrt();
        let step = 1e-3 * (sigma + s);
        let (l0, d1, d2) = radial_log_expectation_jet(|r| self.shape.ln_value(r), s, t, self.d, panels, step)?;
        let lap = laplacian_from_derivatives(d1, d2, s, self.d);
        let q = self.beta / 2.0;
        Ok(-((self.beta - 1.0) * l0).exp() * (q * lap + q * q * d1 * d1))
    }

    /// Cubic-spline table of `h_t` on mirrored sinh-spaced knots.
    fn h_table(&self, t: f64) -> Result<TabulatedProfile> {
        let panels = if t == 0.0 { 0 } else { self.log_panels(t)? };
        let sigma = (self.sw * self.sw + t * t).sqrt();
        let scale = 0.25 * sigma;
        let n = H_KNOTS - 1;
        let step = (self.reach(t) / scale).asinh() / n as f64;
        let radii: Vec<f64> = (0..=n).map(|i| scale * (i as f64 * step).sinh()).collect();
        let values: Vec<f64> = radii.par_iter().map(|&s| self.h(s, t, panels)).collect::<Result<_>>()?;
        let mut knots: Vec<f64> = radii[1..].iter().rev().map(|r| -r).collect();
        knots.extend_from_slice(&radii);
        let mut vals: Vec<f64> = values[1..].iter().rev().copied().collect();
        vals.extend_from_slice(&values);
        TabulatedProfile::new(knots, vals)
    }

    /// `K(t) = E_W[f(W)^{1-beta} E_Z[h_t(W + t Z)]]`.
    fn k_of_t(&self, t: f64) -> Result<f64> {
        let table = self.h_table(t)?;
        let (_, inner_panels) = radial_expectation_panels(&table, self.mu_norm, t, self.d, self.inner_tol)?;
        let inner_panels = 2 * inner_panels.max(8);
        let g = |r: f64| {
            let smoothed = if t == 0.0 {
                table.value(r)
            } else {
                radial_expectation_fixed(&table, r, t, self.d, inner_panels)
            };
            ((1.0 - self.beta) * self.shape.ln_value(r)).exp() * smoothed
        };
        Ok(radial_expectation(&g, self.mu_norm, self.sw, self.d, self.inner_tol)?.value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(d: usize, alpha: f64) -> ProblemSpec {
        ProblemSpec::new(d, 1.0, 1.0, alpha).unwrap()
    }

    fn e1(d: usize, r: f64) -> Vec<f64> {
        let mut v = vec![0.0; d];
        v[0] = r;
        v
    }

    #[test]
    fn invariant_closed_form_example() {
        let s = spec(3, 0.0);
        let v = invariant_risk_closed_form(&s, 1.5).unwrap();
        let expected = 4.0 * (1.0 - (2.0f64 / 3.0).powf(0.75));
        assert!((v - expected).abs() < 1e-14, "{v} vs {expected}");
        assert!((v - 1.048849).abs() < 1e-6);
    }

    #[test]
    fn invariant_closed_form_minimized_at_best_variance() {
        let s = spec(4, 0.3);
        let best = s.derived().unwrap().invariant_variance(1.0);
        let r0 = invariant_risk_closed_form(&s, best).unwrap();
        for q in [0.5 * best, 0.99 * best, 1.01 * best, 3.0 * best] {
            assert!(invariant_risk_closed_form(&s, q).unwrap() > r0);
        }
        assert!(invariant_risk_closed_form(&s, 0.0).is_err());
        assert!(invariant_risk_closed_form(&s, -1.0).is_err());
    }

    #[test]
    fn invariant_risk_matches_mc() {
        let s = spec(3, 0.0);
        let target = invariant_risk_closed_form(&s, 1.5).unwrap();
        for (i, r) in [0.0, 1.0, 10.0].into_iter().enumerate() {
            let q = RiskQuery::new(s, e1(3, r), Candidate::BestInvariant, 200_000, 11 + i as u64).unwrap();
            let est = risk_mc(&q).unwrap();
            assert!(est.covers(target, 3.0), "mu = {r}: {est:?} vs {target}");
        }
    }

    #[test]
    fn induced_constant_shape_risk_matches_closed_form() {
        let s = spec(3, 0.4);
        let target = invariant_risk_closed_form(&s, s.derived().unwrap().invariant_variance(1.0)).unwrap();
        let q = RiskQuery::new(s, e1(3, 1.0), Candidate::Induced(Shape::Constant), 200_000, 5).unwrap();
        let est = risk_mc(&q).unwrap();
        assert!(est.covers(target, 3.0), "{est:?} vs {target}");
    }

    #[test]
    fn alpha1_uniform_risk() {
        let s = ProblemSpec::new(3, 2.0, 1.0, 1.0).unwrap();
        let q = RiskQuery::new(s, e1(3, 0.5), Candidate::BestInvariant, 100_000, 3).unwrap();
        let est = risk_mc(&q).unwrap();
        assert!(est.covers(3.0 * 2.0 / 2.0, 3.0), "{est:?}");
    }

    #[test]
    fn alpha1_harmonic_shrinks() {
        let s = ProblemSpec::new(3, 1.0, 1.0, 1.0).unwrap();
        let q = RiskQuery::new(s, e1(3, 0.0), Candidate::Plugin(Marginal::harmonic(3).unwrap()), 100_000, 9).unwrap();
        let est = risk_mc(&q).unwrap();
        assert!(est.value + 3.0 * est.error < 1.5, "{est:?}");
    }

    #[test]
    fn rejects_small_n_and_bad_mu() {
        let s = spec(3, 0.0);
        assert!(RiskQuery::new(s, e1(3, 0.0), Candidate::BestInvariant, 999, 1).is_err());
        assert!(RiskQuery::new(s, vec![0.0; 2], Candidate::BestInvariant, 1000, 1).is_err());
        assert!(RiskQuery::new(s, vec![f64::NAN, 0.0, 0.0], Candidate::BestInvariant, 1000, 1).is_err());
    }

    #[test]
    fn crn_constant_shape_is_exactly_zero() {
        let s = spec(3, 0.0);
        let r = risk_difference_crn_shape(&s, &e1(3, 1.0), &Shape::Constant, 10_000, 1).unwrap();
        assert_eq!(r.diff.value, 0.0);
        assert_eq!(r.diff.error, 0.0);
    }

    #[test]
    fn crn_positive_at_origin_d5() {
        let s = spec(5, 0.0);
        let r = risk_difference_crn(&s, &e1(5, 0.0), 200_000, 21).unwrap();
        assert!(r.diff.value > 3.0 * r.diff.error, "{:?}", r.diff);
        assert_eq!(r.clamped, 0);
    }

    #[test]
    fn crn_inert_far_from_origin() {
        let s = spec(5, 0.0);
        let far = risk_difference_crn(&s, &e1(5, 50.0), 100_000, 4).unwrap();
        let near = risk_difference_crn(&s, &e1(5, 0.0), 100_000, 4).unwrap();
        assert!(far.diff.value.abs() < 10.0 * far.diff.error.max(1e-12), "{:?}", far.diff);
        assert!(far.diff.value.abs() < 0.05 * near.diff.value, "{:?} {:?}", far.diff, near.diff);
    }

    #[test]
    fn crn_matches_difference_of_risks() {
        let s = spec(3, 0.0);
        let mu = e1(3, 1.0);
        let crn = risk_difference_crn(&s, &mu, 200_000, 8).unwrap();
        let ru = invariant_risk_closed_form(&s, 1.5).unwrap();
        let q = RiskQuery::new(s, mu, Candidate::HarmonicBayes, 200_000, 99).unwrap();
        let rh = risk_mc(&q).unwrap();
        let gap = crn.diff.value - (ru - rh.value);
        let se = (crn.diff.error.powi(2) + rh.error.powi(2)).sqrt();
        assert!(gap.abs() < 3.0 * se, "gap {gap}, se {se}");
        assert!(crn.diff.error < rh.error);
    }

    #[test]
    fn extended_bayes_closed_form() {
        let s = spec(3, 0.0);
        let v = extended_bayes_risk(&s, 1.0).unwrap();
        assert!((v - 4.0 * (1.0 - (5.0f64 / 6.0).powf(0.75))).abs() < 1e-14);
        let limit = invariant_risk_closed_form(&s, 1.5).unwrap();
        assert!((extended_bayes_risk(&s, 1e6).unwrap() - limit).abs() < 1e-5);
        let mut prev = 0.0;
        for c in [0.01, 0.1, 1.0, 10.0, 100.0, 1e4] {
            let r = extended_bayes_risk(&s, c).unwrap();
            assert!(r > prev && r < limit);
            prev = r;
        }
        assert!(extended_bayes_risk(&s, 0.0).is_err());
    }

    #[test]
    fn alpha1_formula_uniform_is_zero() {
        let s = ProblemSpec::new(3, 1.0, 1.0, 1.0).unwrap();
        let r = alpha1_risk_difference(&s, &e1(3, 1.0), &Marginal::uniform(3), 1e-9).unwrap();
        assert_eq!(r.diff.value, 0.0);
    }

    #[test]
    fn alpha1_formula_decays_with_mu() {
        let s = ProblemSpec::new(3, 1.0, 1.0, 1.0).unwrap();
        let m = Marginal::harmonic(3).unwrap();
        let mut prev = f64::INFINITY;
        for r in [0.0, 1.0, 2.0, 4.0, 8.0, 50.0] {
            let v = alpha1_risk_difference(&s, &e1(3, r), &m, 1e-9).unwrap().diff.value;
            assert!(v > 0.0 && v < prev, "r = {r}: {v}");
            prev = v;
        }
        assert!(prev < 1e-3);
    }

    #[test]
    fn alpha1_formula_matches_quadratic_loss_mc() {
        let s = ProblemSpec::new(3, 1.0, 1.0, 1.0).unwrap();
        let m = Marginal::harmonic(3).unwrap();
        let formula = alpha1_risk_difference(&s, &e1(3, 0.0), &m, 1e-9).unwrap().diff.value;
        let q = RiskQuery::new(s, e1(3, 0.0), Candidate::Plugin(m), 100_000, 17).unwrap();
        let mc = risk_mc(&q).unwrap();
        assert!(mc.covers(1.5 - formula, 3.0), "{mc:?} vs {}", 1.5 - formula);
    }

    #[test]
    fn kl_integral_properties() {
        let m = Marginal::harmonic(3).unwrap();
        let s = ProblemSpec::new(3, 1.0, 1.0, -1.0).unwrap();
        let v = kl_risk_difference_integral(&s, &e1(3, 0.0), &m, 1e-8).unwrap().diff.value;
        assert!(v > 0.0);
        let u = kl_risk_difference_integral(&s, &e1(3, 0.0), &Marginal::uniform(3), 1e-8).unwrap();
        assert_eq!(u.diff.value, 0.0);
        let tiny = ProblemSpec::new(3, 1e-6, 1.0, -1.0).unwrap();
        let t = kl_risk_difference_integral(&tiny, &e1(3, 0.0), &m, 1e-8).unwrap().diff.value;
        assert!(t.abs() < 1e-5 * v, "{t}");
        assert!(kl_risk_difference_integral(&spec(3, 0.0), &e1(3, 0.0), &m, 1e-8).is_err());
    }

    #[test]
    fn rho_oracle_constant_shape_is_zero() {
        let s = spec(3, 0.0);
        let r = risk_difference_rho_oracle(&s, &e1(3, 0.0), &Shape::Constant, 1e-7).unwrap();
        assert_eq!(r.diff.value, 0.0);
        assert!(risk_difference_rho_oracle(&spec(6, 0.0), &e1(6, 0.0), &Shape::Constant, 1e-7).is_err());
    }

    #[test]
    fn rho_oracle_h_table_matches_direct() {
        let s = spec(3, 0.0);
        let c = s.derived().unwrap();
        let shape = harmonic_shape(&s).unwrap();
        let oracle = RhoOracle {
            shape: &shape,
            d: 3,
            beta: c.beta,
            mu_norm: 0.0,
            sw: (c.gamma).sqrt(),
            inner_tol: 1e-9,
        };
        let t = 0.2;
        let table = oracle.h_table(t).unwrap();
        let panels = oracle.log_panels(t).unwrap();
        for s in [0.013, 0.37, 1.1, 2.9, 6.3] {
            let direct = oracle.h(s, t, panels).unwrap();
            let tab = table.value(s);
            assert!((direct - tab).abs() < 1e-6 * direct.abs().max(1e-3), "s = {s}: {direct} vs {tab}");
        }
    }
}
