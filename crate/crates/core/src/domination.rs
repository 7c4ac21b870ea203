//! Upper bounds on `v_x / v_y` under which the harmonic Bayes density dominates
//! the best invariant one, the curve of those bounds over `alpha`, and direct
//! numerical checks of the superharmonicity conditions behind them.
//!
//! With `nu = 1/beta` an integer the bound is `(d + 2) / (d (1 + alpha))`.
//! Otherwise, with `kappa` the smallest integer above `1/beta`, it is
//! `(1/beta)^2 ((d + 2) / d) (1 - (kappa - 1/beta)) / (2 kappa (kappa - 1))`,
//! which rises to the integer value as `1/beta` climbs to `kappa` and drops to
//! zero as it falls to `kappa - 1`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::marginal::ln_harmonic_marginal;
use crate::numerics::radial::{laplacian_from_derivatives, radial_log_expectation_jet, radial_log_panels};
use crate::predictive::Shape;
use crate::problem::{nearest_integer, ProblemSpec};
use crate::risk::{risk_difference_crn_shape, RiskDifferenceResult};

/// Radii `|mu|` of the default domination grid, along `e_1`.
pub const MU_GRID: [f64; 7] = [0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0];

/// Pass tolerance of the superharmonicity check, relative to `rho / sigma^2`.
pub const SUPERHARMONIC_TOL: f64 = 1e-8;

/// Significance multiplier for domination verdicts.
pub const SIGMA_LEVEL: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    IntegerCase,
    NonintegerCase,
}

impl Branch {
    pub fn label(&self) -> &'static str {
        match self {
            Branch::IntegerCase => "integer_case",
            Branch::NonintegerCase => "noninteger_case",
        }
    }
}

/// Upper bound on `v_x / v_y` at one `(d, alpha)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdResult {
    pub alpha: f64,
    pub d: usize,
    pub branch: Branch,
    pub bound: f64,
    pub kappa: Option<u64>,
    pub c_beta: Option<f64>,
}

pub fn threshold(d: usize, alpha: f64) -> Result<ThresholdResult> {
    if d < 3 {
        return Err(invalid("d", format!("need d >= 3, got {d}")));
    }
    if !(alpha > -1.0 && alpha < 1.0) {
        return Err(invalid("alpha", format!("must lie in (-1, 1), got {alpha}")));
    }
    let inv = 2.0 / (1.0 - alpha);
    let dd = d as f64;
    match nearest_integer(inv) {
        Some(_) => Ok(ThresholdResult {
            alpha,
            d,
            branch: Branch::IntegerCase,
            bound: (dd + 2.0) / (dd * (1.0 + alpha)),
            kappa: None,
            c_beta: None,
        }),
        None => {
            let kappa = inv.floor() as u64 + 1;
            let k = kappa as f64;
            let bound = inv * inv * ((dd + 2.0) / dd) * (1.0 - (k - inv)) / (2.0 * k * (k - 1.0));
            Ok(ThresholdResult {
                alpha,
                d,
                branch: Branch::NonintegerCase,
                bound,
                kappa: Some(kappa),
                c_beta: Some((k - inv + 1.0) / 2.0),
            })
        }
    }
}

/// The `alpha` values in `(lo, hi)` where `2 / (1 - alpha)` is an integer.
pub fn integer_case_alphas(lo: f64, hi: f64) -> Vec<f64> {
    (2u64..)
        .map(|k| 1.0 - 2.0 / k as f64)
        .skip_while(|&a| a <= lo)
        .take_while(|&a| a < hi)
        .collect()
}

/// Offset in `1/beta` at which one-sided limits of the bound are sampled.
pub const LIMIT_OFFSET: f64 = 1e-6;

/// `alpha` at which `2 / (1 - alpha) = k`.
pub fn alpha_at_inverse_beta(k: f64) -> f64 {
    1.0 - 2.0 / k
}

/// Bounds just left and just right of the integer case `2 / (1 - alpha) = k`,
/// sampled at `1/beta = k -+ LIMIT_OFFSET`.
pub fn one_sided_limits(d: usize, k: u64) -> Result<(f64, f64)> {
    let k = k as f64;
    let left = threshold(d, alpha_at_inverse_beta(k - LIMIT_OFFSET))?;
    let right = threshold(d, alpha_at_inverse_beta(k + LIMIT_OFFSET))?;
    Ok((left.bound, right.bound))
}

/// Default curve grid: 400 equally spaced points in `(-0.99, 0.99)`, the
/// integer-case values below 0.99, and the points [`LIMIT_OFFSET`] either side
/// of them in `1/beta`, sorted.
pub fn figure1_alpha_grid() -> Vec<f64> {
    let n = 400;
    let mut grid: Vec<f64> = (0..n).map(|i| -0.99 + 1.98 * i as f64 / (n - 1) as f64).collect();
    for a in integer_case_alphas(-0.99, 0.99) {
        let k = 2.0 / (1.0 - a);
        grid.push(alpha_at_inverse_beta(k - LIMIT_OFFSET));
        grid.push(a);
        grid.push(alpha_at_inverse_beta(k + LIMIT_OFFSET));
    }
    grid.retain(|a| *a > -0.99 - 1e-12 && *a < 0.99);
    grid.sort_by(|a, b| a.total_cmp(b));
    grid.dedup();
    grid
}

pub fn figure1_curve(d: usize, alpha_grid: &[f64]) -> Result<Vec<ThresholdResult>> {
    alpha_grid.iter().map(|&a| threshold(d, a)).collect()
}

/// `sqrt((d + 2)(1 - c) v / (d nu (nu - 1)))`, the largest smoothing scale for
/// which `E[m_H^nu(u + t Z, v)]^{c/nu}` is superharmonic.
pub fn t_max(nu: u64, c: f64, v: f64, d: usize) -> Result<f64> {
    if nu < 2 {
        return Err(invalid("nu", format!("need an integer nu >= 2, got {nu}")));
    }
    if !(c > 0.0 && c < 1.0) {
        return Err(invalid("c", format!("must lie in (0, 1), got {c}")));
    }
    if !(v > 0.0 && v.is_finite()) {
        return Err(invalid("v", format!("variance must be positive, got {v}")));
    }
    if d < 3 {
        return Err(invalid("d", format!("need d >= 3, got {d}")));
    }
    let nu = nu as f64;
    let dd = d as f64;
    Ok(((dd + 2.0) * (1.0 - c) * v / (dd * nu * (nu - 1.0))).sqrt())
}

/// Which power pair `(p, q)` enters the profile `E[m_H^p]^q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExponentMode {
    /// `(1/beta, beta/2)`; needs `1/beta` integer.
    InverseBeta,
    /// `(kappa, c(beta)/kappa)`; needs `1/beta` non-integer.
    Kappa,
}

/// One grid radius of a superharmonicity check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuperharmonicRow {
    pub r: f64,
    /// `Delta rho / rho`.
    pub laplacian_ratio: f64,
    /// `sigma^2 Delta rho / rho` with `sigma^2 = v + t^2`; compared with the tolerance.
    pub scaled: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuperharmonicReport {
    pub d: usize,
    pub v: f64,
    pub t: f64,
    pub nu: u64,
    pub c: f64,
    /// `t_max(nu, c, v, d)`; rows with `t > t_max` are informational.
    pub t_max: f64,
    pub informational: bool,
    pub rows: Vec<SuperharmonicRow>,
    pub max_scaled: f64,
    pub pass: bool,
}

/// `r = 0` followed by 40 log-spaced radii in `[1e-3, 30] * scale`.
pub fn default_r_grid(scale: f64) -> Vec<f64> {
    let n = 40;
    let (lo, hi) = (1e-3f64.ln(), 30f64.ln());
    let mut grid = vec![0.0];
    grid.extend((0..n).map(|i| scale * (lo + (hi - lo) * i as f64 / (n - 1) as f64).exp()));
    grid
}

/// Checks `Delta_u E[m_H^nu(u + t Z, v)]^{c/nu} <= 0` on `r_grid`.
///
/// `L = ln E[m_H^nu]` uses fixed-panel quadrature and finite differences with
/// step `fd_step` (default `1e-3 (sigma + r)`), and `Delta rho / rho` follows from
/// `q Delta L + q^2 |L'|^2` with `q = c / nu`.
pub fn check_superharmonic_profile(
    d: usize,
    v: f64,
    nu: u64,
    c: f64,
    t: f64,
    r_grid: &[f64],
    fd_step: Option<f64>,
) -> Result<SuperharmonicReport> {
    let limit = t_max(nu, c, v, d)?;
    if !(t >= 0.0 && t.is_finite()) {
        return Err(invalid("t", format!("must be nonnegative, got {t}")));
    }
    if let Some(h) = fd_step {
        if !(h > 0.0) {
            return Err(invalid("fd_step", format!("must be positive, got {h}")));
        }
    }
    if r_grid.iter().any(|r| !(*r >= 0.0 && r.is_finite())) {
        return Err(invalid("r_grid", "radii must be finite and nonnegative"));
    }
    let p = nu as f64;
    let q = c / p;
    let sigma2 = v + t * t;
    let lg = |r: f64| p * ln_harmonic_marginal(r * r, v, d).unwrap_or(f64::NAN);
    let panels = if t == 0.0 {
        0
    } else {
        let far = r_grid.iter().copied().fold(0.0, f64::max);
        radial_log_panels(lg, &[0.0, sigma2.sqrt(), far], t, d, 1e-13)?
    };
    let rows: Vec<SuperharmonicRow> = r_grid
        .par_iter()
        .map(|&r| {
            let h = fd_step.unwrap_or(1e-3 * (sigma2.sqrt() + r));
            let (_, d1, d2) = radial_log_expectation_jet(lg, r, t, d, panels, h)?;
            let ratio = q * laplacian_from_derivatives(d1, d2, r, d) + q * q * d1 * d1;
            let scaled = ratio * sigma2;
            Ok(SuperharmonicRow { r, laplacian_ratio: ratio, scaled, pass: scaled <= SUPERHARMONIC_TOL })
        })
        .collect::<Result<_>>()?;
    let max_scaled = rows.iter().map(|r| r.scaled).fold(f64::NEG_INFINITY, f64::max);
    Ok(SuperharmonicReport {
        d,
        v,
        t,
        nu,
        c,
        t_max: limit,
        informational: t > limit,
        pass: rows.iter().all(|r| r.pass),
        rows,
        max_scaled,
    })
}

/// [`check_superharmonic_profile`] for the harmonic Bayes density of `spec`,
/// with `v = v_x gamma` and the power pair selected by `mode`.
pub fn check_superharmonic_condition(
    spec: &ProblemSpec,
    t: f64,
    mode: ExponentMode,
    r_grid: Option<&[f64]>,
    fd_step: Option<f64>,
) -> Result<SuperharmonicReport> {
    spec.require_interior()?;
    let k = spec.derived()?;
    let v = spec.v_x * k.gamma;
    let (nu, c) = match mode {
        ExponentMode::InverseBeta => {
            let nu = k
                .integer_inverse_beta()
                .ok_or_else(|| invalid("mode", "1/beta is not an integer; use the kappa mode"))?;
            (nu, 0.5)
        }
        ExponentMode::Kappa => match (k.kappa, k.c_beta) {
            (Some(kappa), Some(c)) => (kappa, c),
            _ => return Err(invalid("mode", "1/beta is an integer; use the inverse-beta mode")),
        },
    };
    let default;
    let grid = match r_grid {
        Some(g) => g,
        None => {
            default = default_r_grid(v.sqrt());
            &default
        }
    };
    check_superharmonic_profile(spec.d, v, nu, c, t, grid, fd_step)
}

/// Desk-scale reading of a domination scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    /// Every difference is at least `-3` standard errors and the one at `mu = 0` at least `+3`.
    Pass,
    /// Every difference is exactly zero.
    Neutral,
    /// Some difference is below `-3` standard errors.
    Fail,
    /// No failure, but the gain at `mu = 0` is not significant.
    Inconclusive,
}

impl Verdict {
    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Pass => "PASS",
            Verdict::Neutral => "NEUTRAL",
            Verdict::Fail => "FAIL",
            Verdict::Inconclusive => "INCONCLUSIVE",
        }
    }
}

/// Verdict over per-`mu` results; the row with the smallest `|mu|` plays `mu = 0`.
pub fn verdict(rows: &[RiskDifferenceResult]) -> Verdict {
    if rows.is_empty() {
        return Verdict::Inconclusive;
    }
    if rows.iter().all(|r| r.diff.value == 0.0 && r.diff.error == 0.0) {
        return Verdict::Neutral;
    }
    if rows.iter().any(|r| r.diff.value < -SIGMA_LEVEL * r.diff.error) {
        return Verdict::Fail;
    }
    let origin = rows.iter().min_by(|a, b| a.mu_norm.total_cmp(&b.mu_norm)).expect("nonempty");
    if origin.diff.value >= SIGMA_LEVEL * origin.diff.error && origin.diff.value > 0.0 {
        Verdict::Pass
    } else {
        Verdict::Inconclusive
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominationReport {
    pub spec: ProblemSpec,
    pub threshold: ThresholdResult,
    /// `v_x / v_y <= bound`; outside it the scan only probes the open conjecture.
    pub within_threshold: bool,
    pub rows: Vec<RiskDifferenceResult>,
    pub verdict: Verdict,
}

/// `R(p_U) - R(p_H)` by paired Monte Carlo at `|mu|` in `mu_grid` along `e_1`.
pub fn domination_experiment(spec: &ProblemSpec, mu_grid: &[f64], n: u64, seed: u64) -> Result<DominationReport> {
    spec.require_interior()?;
    let shape = crate::predictive::harmonic_shape(spec)?;
    domination_experiment_shape(spec, mu_grid, &shape, n, seed)
}

/// [`domination_experiment`] for the density induced by `shape`.
pub fn domination_experiment_shape(
    spec: &ProblemSpec,
    mu_grid: &[f64],
    shape: &Shape,
    n: u64,
    seed: u64,
) -> Result<DominationReport> {
    spec.require_interior()?;
    if mu_grid.is_empty() {
        return Err(invalid("mu_grid", "need at least one radius"));
    }
    let th = threshold(spec.d, spec.alpha)?;
    let rows = mu_grid
        .iter()
        .map(|&r| {
            let mut mu = vec![0.0; spec.d];
            mu[0] = r;
            risk_difference_crn_shape(spec, &mu, shape, n, seed)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DominationReport {
        spec: *spec,
        threshold: th,
        within_threshold: spec.v_x / spec.v_y <= th.bound,
        verdict: verdict(&rows),
        rows,
    })
}
