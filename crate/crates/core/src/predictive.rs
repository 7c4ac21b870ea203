//! Predictive densities `p(y | x)` for a future `Y ~ N(mu, v_y I)` given
//! `X ~ N(mu, v_x I)`.
//!
//! The f-induced family multiplies the best invariant density
//! `p_U(y | x) = phi(y - x, v_y / gamma)` by `f(gamma x + (1 - gamma) y)` and
//! renormalizes. The normalizer is `N(x) = E[f(x + xi Z)]`, which depends on
//! `x` only through `|x|` because every `f` here is radial. The harmonic Bayes
//! density is the member with `f = m_H(., v_x gamma)^{1/beta}`.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::marginal::{ln_harmonic_marginal, Marginal};
use crate::numerics::radial::{radial_log_expectation, RadialProfile, TabulatedProfile};
use crate::numerics::{mc_means, Estimate};
use crate::problem::{gaussian_logpdf_sq, DerivedConstants, ProblemSpec};

/// Tolerance on `ln N` for normalizers.
pub const NORMALIZER_TOL: f64 = 1e-9;

/// A positive radial function `f`, stored through `ln f(r)`.
#[derive(Clone)]
pub enum Shape {
    /// `f = 1`; the induced density is the best invariant one.
    Constant,
    /// `f(r) = m_H(r^2, v)^power` in dimension `d`.
    HarmonicPower { d: usize, v: f64, power: f64 },
    /// `f(r) = (1 + r^2)^{-(d-2)/2}`, smooth and superharmonic:
    /// its Laplacian is `-d (d-2) (1 + r^2)^{-d/2-1}`.
    SoftHarmonic { d: usize },
    /// Arbitrary `ln f(r)`.
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Shape::Constant => write!(f, "Constant"),
            Shape::HarmonicPower { d, v, power } => {
                write!(f, "HarmonicPower {{ d: {d}, v: {v}, power: {power} }}")
            }
            Shape::SoftHarmonic { d } => write!(f, "SoftHarmonic {{ d: {d} }}"),
            Shape::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl Shape {
    /// Wraps a positive profile.
    pub fn from_profile<P: RadialProfile + Send + Sync + 'static>(p: P) -> Self {
        Shape::Custom(Arc::new(move |r| p.value(r).ln()))
    }

    pub fn ln_value(&self, r: f64) -> f64 {
        match self {
            Shape::Constant => 0.0,
            Shape::HarmonicPower { d, v, power } => {
                power * ln_harmonic_marginal(r * r, *v, *d).unwrap_or(f64::NAN)
            }
            Shape::SoftHarmonic { d } => -0.5 * (*d as f64 - 2.0) * (r * r).ln_1p(),
            Shape::Custom(lf) => lf(r),
        }
    }

    pub fn value(&self, r: f64) -> f64 {
        self.ln_value(r).exp()
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Shape::Constant)
    }
}

/// Which member of the family a density is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityKind {
    BestInvariant,
    FInduced,
    HarmonicBayes,
    PluginAlpha1,
}

impl DensityKind {
    pub fn label(&self) -> &'static str {
        match self {
            DensityKind::BestInvariant => "best_invariant",
            DensityKind::FInduced => "f_induced",
            DensityKind::HarmonicBayes => "harmonic_bayes",
            DensityKind::PluginAlpha1 => "plugin_alpha1",
        }
    }
}

#[derive(Debug, Clone)]
enum Form {
    /// `N(center, variance I)`.
    Gaussian { center: Vec<f64>, variance: f64 },
    /// `f(gamma x + (1 - gamma) y) / N(|x|) * p_U(y | x)`.
    Induced { shape: Shape, ln_normalizer: Estimate },
}

/// An evaluable predictive density conditioned on one observation `x`.
#[derive(Debug, Clone)]
pub struct PredictiveDensity {
    kind: DensityKind,
    spec: ProblemSpec,
    consts: DerivedConstants,
    x: Vec<f64>,
    form: Form,
}

/// `ln E[f(x + xi Z)]` as a function of `|x|`.
pub fn ln_normalizer(shape: &Shape, x_norm: f64, xi: f64, d: usize) -> Result<Estimate> {
    if shape.is_constant() {
        return Ok(Estimate::exact(0.0, 1));
    }
    radial_log_expectation(|r| shape.ln_value(r), x_norm, xi, d, NORMALIZER_TOL)
}

fn check_point(spec: &ProblemSpec, x: &[f64]) -> Result<()> {
    if x.len() != spec.d {
        return Err(invalid("x", format!("expected {} coordinates, got {}", spec.d, x.len())));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(invalid("x", "conditioning point must be finite"));
    }
    Ok(())
}

fn norm_sq(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum()
}

/// The best invariant density `phi(y - x, v_y + beta v_x)`.
pub fn best_invariant(spec: &ProblemSpec, x: &[f64]) -> Result<PredictiveDensity> {
    spec.validate()?;
    check_point(spec, x)?;
    let consts = spec.derived()?;
    Ok(PredictiveDensity {
        kind: DensityKind::BestInvariant,
        spec: *spec,
        consts,
        x: x.to_vec(),
        form: Form::Gaussian {
            center: x.to_vec(),
            variance: spec.v_y + consts.beta * spec.v_x,
        },
    })
}

/// The density induced by a radial `f`.
pub fn f_induced(spec: &ProblemSpec, x: &[f64], shape: Shape) -> Result<PredictiveDensity> {
    induced(spec, x, shape, DensityKind::FInduced)
}

/// The Bayes predictive density under the harmonic prior, `f = m_H(., v_x gamma)^{1/beta}`.
pub fn harmonic_bayes(spec: &ProblemSpec, x: &[f64]) -> Result<PredictiveDensity> {
    spec.require_interior()?;
    let shape = harmonic_shape(spec)?;
    induced(spec, x, shape, DensityKind::HarmonicBayes)
}

/// The `f` of the harmonic Bayes density.
pub fn harmonic_shape(spec: &ProblemSpec) -> Result<Shape> {
    spec.require_interior()?;
    let c = spec.derived()?;
    if spec.d < 3 {
        return Err(invalid("d", "the harmonic prior needs d >= 3"));
    }
    Ok(Shape::HarmonicPower {
        d: spec.d,
        v: spec.v_x * c.gamma,
        power: 1.0 / c.beta,
    })
}

fn induced(spec: &ProblemSpec, x: &[f64], shape: Shape, kind: DensityKind) -> Result<PredictiveDensity> {
    spec.require_interior()?;
    check_point(spec, x)?;
    let consts = spec.derived()?;
    let ln_normalizer = ln_normalizer(&shape, norm_sq(x).sqrt(), consts.xi, spec.d)?;
    Ok(PredictiveDensity {
        kind,
        spec: *spec,
        consts,
        x: x.to_vec(),
        form: Form::Induced { shape, ln_normalizer },
    })
}

/// The `alpha = 1` Bayes density `phi(y - mu_hat(x), v_y)` with the posterior mean
/// `mu_hat(x) = x (1 + 2 v_x d/dz ln M(|x|^2, v_x))`.
pub fn plugin_alpha1(spec: &ProblemSpec, x: &[f64], marginal: &Marginal) -> Result<PredictiveDensity> {
    spec.validate()?;
    check_point(spec, x)?;
    let center = posterior_mean(spec.v_x, x, marginal)?;
    Ok(PredictiveDensity {
        kind: DensityKind::PluginAlpha1,
        spec: *spec,
        consts: spec.derived()?,
        x: x.to_vec(),
        form: Form::Gaussian {
            center,
            variance: spec.v_y,
        },
    })
}

/// Posterior mean of `mu` under a radial prior: `x + v_x grad ln m(x, v_x)`.
pub fn posterior_mean(v_x: f64, x: &[f64], marginal: &Marginal) -> Result<Vec<f64>> {
    let factor = 1.0 + 2.0 * v_x * marginal.dz_log(norm_sq(x), v_x)?;
    Ok(x.iter().map(|xi| xi * factor).collect())
}

impl PredictiveDensity {
    pub fn kind(&self) -> DensityKind {
        self.kind
    }

    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    /// `ln N(|x|)`; exactly zero for Gaussian kinds.
    pub fn ln_normalizer(&self) -> Estimate {
        match &self.form {
            Form::Gaussian { .. } => Estimate::exact(0.0, 1),
            Form::Induced { ln_normalizer, .. } => *ln_normalizer,
        }
    }

    /// Mean and variance when the density is Gaussian.
    pub fn gaussian_params(&self) -> Option<(&[f64], f64)> {
        match &self.form {
            Form::Gaussian { center, variance } => Some((center, *variance)),
            Form::Induced { shape, .. } if shape.is_constant() => {
                Some((&self.x, self.spec.v_y / self.consts.gamma))
            }
            Form::Induced { .. } => None,
        }
    }

    /// `ln p(y | x)`.
    pub fn ln_pdf(&self, y: &[f64]) -> f64 {
        assert_eq!(y.len(), self.spec.d, "y has the wrong dimension");
        match &self.form {
            Form::Gaussian { center, variance } => {
                let dist: f64 = y.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
                gaussian_logpdf_sq(dist, self.spec.d, *variance)
            }
            Form::Induced { .. } => self.ln_ratio_to_invariant(y) + self.ln_invariant(y),
        }
    }

    fn ln_invariant(&self, y: &[f64]) -> f64 {
        let dist: f64 = y.iter().zip(&self.x).map(|(a, b)| (a - b) * (a - b)).sum();
        gaussian_logpdf_sq(dist, self.spec.d, self.spec.v_y / self.consts.gamma)
    }

    /// `ln p(y | x) - ln p_U(y | x)`; for induced kinds `ln f(w) - ln N(|x|)`.
    pub fn ln_ratio_to_invariant(&self, y: &[f64]) -> f64 {
        match &self.form {
            Form::Gaussian { .. } => self.ln_pdf(y) - self.ln_invariant(y),
            Form::Induced { shape, ln_normalizer } => {
                let g = self.consts.gamma;
                let w_sq: f64 = self
                    .x
                    .iter()
                    .zip(y)
                    .map(|(xi, yi)| {
                        let w = g * xi + (1.0 - g) * yi;
                        w * w
                    })
                    .sum();
                shape.ln_value(w_sq.sqrt()) - ln_normalizer.value
            }
        }
    }
}

/// Importance-sampling weights are clipped here.
pub const WEIGHT_CLIP: f64 = 1e6;

/// Result of [`normalization_check_detailed`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationCheck {
    pub integral: Estimate,
    /// Number of importance weights clipped at [`WEIGHT_CLIP`].
    pub clipped: u64,
}

/// `int p(y | x) dy` estimated by importance sampling from `p_U`.
pub fn normalization_check(p: &PredictiveDensity, n: u64, seed: u64) -> Result<Estimate> {
    Ok(normalization_check_detailed(p, n, seed)?.integral)
}

pub fn normalization_check_detailed(p: &PredictiveDensity, n: u64, seed: u64) -> Result<NormalizationCheck> {
    if p.gaussian_params().is_some() {
        return Ok(NormalizationCheck {
            integral: Estimate::exact(1.0, n.max(1)),
            clipped: 0,
        });
    }
    let d = p.spec.d;
    let sd = (p.spec.v_y / p.consts.gamma).sqrt();
    let est = mc_means(n, seed, 2, |rng, out| {
        let y: Vec<f64> = p
            .x
            .iter()
            .map(|xi| xi + sd * rng.sample::<f64, _>(StandardNormal))
            .collect();
        debug_assert_eq!(y.len(), d);
        let w = p.ln_ratio_to_invariant(&y).exp();
        if w > WEIGHT_CLIP {
            out[0] = WEIGHT_CLIP;
            out[1] = 1.0;
        } else {
            out[0] = w;
            out[1] = 0.0;
        }
    })?;
    Ok(NormalizationCheck {
        integral: est[0],
        clipped: (est[1].value * est[1].n as f64).round() as u64,
    })
}

/// Knots of a normalizer table.
pub const TABLE_KNOTS: usize = 512;

/// Cubic-spline table of `ln N(|x|)` for a fixed shape, built once per run.
///
/// Knots are sinh-spaced (linear near the origin, logarithmic far out) and
/// mirrored to negative radii so that `r = 0` is an interior point of the
/// even spline. Radii beyond the table fall back to direct quadrature.
#[derive(Debug, Clone)]
pub struct NormalizerTable {
    shape: Shape,
    xi: f64,
    d: usize,
    r_max: f64,
    spline: Option<TabulatedProfile>,
}

impl NormalizerTable {
    /// Builds a table covering `|x| <= 1.2 * max_norm`; `scale` sets the
    /// spacing near the origin (the width of the smoothed profile).
    pub fn new(shape: Shape, xi: f64, d: usize, max_norm: f64, scale: f64) -> Result<Self> {
        if shape.is_constant() {
            return Ok(Self { shape, xi, d, r_max: f64::INFINITY, spline: None });
        }
        if !(max_norm > 0.0 && scale > 0.0) {
            return Err(invalid("max_norm", "table range and scale must be positive"));
        }
        // knots run past the trusted range, away from the natural end condition
        let r_max = 1.2 * max_norm;
        let n = TABLE_KNOTS - 1;
        let step = (1.25 * r_max / scale).asinh() / n as f64;
        let radii: Vec<f64> = (0..=n).map(|i| scale * (i as f64 * step).sinh()).collect();
        let values: Vec<f64> = radii
            .par_iter()
            .map(|&r| ln_normalizer(&shape, r, xi, d).map(|e| e.value))
            .collect::<Result<_>>()?;
        let mut knots: Vec<f64> = radii[1..].iter().rev().map(|r| -r).collect();
        knots.extend_from_slice(&radii);
        let mut vals: Vec<f64> = values[1..].iter().rev().copied().collect();
        vals.extend_from_slice(&values);
        let spline = TabulatedProfile::new(knots, vals)?;
        Ok(Self { shape, xi, d, r_max, spline: Some(spline) })
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    /// `ln N(r)`.
    pub fn ln_normalizer(&self, r: f64) -> Result<f64> {
        match &self.spline {
            None => Ok(0.0),
            Some(s) if r <= self.r_max => Ok(s.value(r)),
            Some(_) => Ok(ln_normalizer(&self.shape, r, self.xi, self.d)?.value),
        }
    }
}
