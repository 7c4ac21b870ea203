//! Radial functions: finite-difference Laplacians and Gaussian expectations
//! reduced to one-dimensional integrals over the noncentral chi distribution.
//!
//! For `Z ~ N(0, I_d)`, `E[g(|u + t Z|)]` depends on `u` only through
//! `|u|`. Writing `r = |u + t Z| / t`, `r` has the noncentral chi
//! distribution with `d` degrees of freedom and noncentrality `|u| / t`.

use super::quad::{WGK15, XGK15};
use super::special::{ln_bessel_i_scaled_large, ln_gamma};
use super::Estimate;
use crate::error::{invalid, Error, Result};

/// A function of the radius `r >= 0`, possibly with analytic derivatives.
pub trait RadialProfile {
    fn value(&self, r: f64) -> f64;

    /// Analytic `(f'(r), f''(r))` when available.
    fn derivatives(&self, _r: f64) -> Option<(f64, f64)> {
        None
    }
}

impl<F: Fn(f64) -> f64> RadialProfile for F {
    fn value(&self, r: f64) -> f64 {
        self(r)
    }
}

/// Natural cubic spline through `(r_i, y_i)` on a strictly increasing grid.
///
/// Outside the grid the end cubic pieces are extended.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedProfile {
    r: Vec<f64>,
    y: Vec<f64>,
    /// Second derivatives at the knots.
    m: Vec<f64>,
}

impl TabulatedProfile {
    pub fn new(r: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if r.len() != y.len() {
            return Err(invalid("grid", "radius and value tables differ in length"));
        }
        if r.len() < 2 {
            return Err(invalid("grid", "need at least two knots"));
        }
        if r.windows(2).any(|w| !(w[1] > w[0])) || r.iter().any(|x| !x.is_finite()) {
            return Err(invalid("grid", "radii must be finite and strictly increasing"));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(invalid("grid", "tabulated values must be finite"));
        }
        let m = natural_spline_moments(&r, &y);
        Ok(Self { r, y, m })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.r[0], self.r[self.r.len() - 1])
    }

    fn segment(&self, x: f64) -> usize {
        let n = self.r.len();
        match self.r.partition_point(|&k| k <= x) {
            0 => 0,
            i if i >= n => n - 2,
            i => i - 1,
        }
    }

    fn eval_all(&self, x: f64) -> (f64, f64, f64) {
        let i = self.segment(x);
        let (x0, x1) = (self.r[i], self.r[i + 1]);
        let h = x1 - x0;
        let a = (x1 - x) / h;
        let b = (x - x0) / h;
        let (m0, m1) = (self.m[i], self.m[i + 1]);
        let (y0, y1) = (self.y[i], self.y[i + 1]);
        let value = a * y0 + b * y1 + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
        let d1 = (y1 - y0) / h + ((1.0 - 3.0 * a * a) * m0 + (3.0 * b * b - 1.0) * m1) * h / 6.0;
        let d2 = a * m0 + b * m1;
        (value, d1, d2)
    }
}

impl RadialProfile for TabulatedProfile {
    fn value(&self, r: f64) -> f64 {
        self.eval_all(r).0
    }

    fn derivatives(&self, r: f64) -> Option<(f64, f64)> {
        let (_, d1, d2) = self.eval_all(r);
        Some((d1, d2))
    }
}

fn natural_spline_moments(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut m = vec![0.0; n];
    if n < 3 {
        return m;
    }
    // tridiagonal system for interior second derivatives (Thomas algorithm)
    let mut c_prime = vec![0.0; n];
    let mut d_prime = vec![0.0; n];
    for i in 1..n - 1 {
        let h0 = x[i] - x[i - 1];
        let h1 = x[i + 1] - x[i];
        let lower = h0 / 6.0;
        let diag = (h0 + h1) / 3.0;
        let upper = h1 / 6.0;
        let rhs = (y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0;
        let denom = diag - lower * c_prime[i - 1];
        c_prime[i] = upper / denom;
        d_prime[i] = (rhs - lower * d_prime[i - 1]) / denom;
    }
    for i in (1..n - 1).rev() {
        m[i] = d_prime[i] - c_prime[i] * m[i + 1];
    }
    m
}

/// Default finite-difference step at radius `r` for profiles of unit scale.
pub fn default_fd_step(r: f64) -> f64 {
    (1e-3 * (1.0 + r)).max(1e-4)
}

/// Finite-difference `(f'(r), f''(r))` of an even radial profile.
///
/// Central differences with step `h` for `r >= h`. Within one step of the
/// origin the profile is fitted by an even quartic through `f(0), f(h), f(2h)`,
/// which stays O(h^2) accurate and gives `f'(0) = 0`.
pub fn radial_derivatives<P: RadialProfile + ?Sized>(f: &P, r: f64, h: f64) -> Result<(f64, f64)> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(invalid("h", format!("step must be positive, got {h}")));
    }
    if !(r >= 0.0 && r.is_finite()) {
        return Err(invalid("r", format!("radius must be nonnegative, got {r}")));
    }
    if r >= h {
        let fp = f.value(r + h);
        let f0 = f.value(r);
        let fm = f.value(r - h);
        Ok(((fp - fm) / (2.0 * h), (fp - 2.0 * f0 + fm) / (h * h)))
    } else {
        let f0 = f.value(0.0);
        let f1 = f.value(h) - f0;
        let f2 = f.value(2.0 * h) - f0;
        let h2 = h * h;
        let c = (f2 - 4.0 * f1) / (12.0 * h2 * h2);
        let b = (f1 - c * h2 * h2) / h2;
        Ok((2.0 * b * r + 4.0 * c * r * r * r, 2.0 * b + 12.0 * c * r * r))
    }
}

/// Laplacian in `R^d` of the radial function `u -> f(|u|)` at `|u| = r`.
///
/// Uses analytic derivatives when the profile has them, otherwise
/// [`radial_derivatives`]; at `r = 0` the symmetric limit `d f''(0)` is used.
pub fn radial_laplacian<P: RadialProfile + ?Sized>(f: &P, r: f64, d: usize, h: f64) -> Result<f64> {
    let (d1, d2) = match f.derivatives(r) {
        Some(jet) => {
            if !(r >= 0.0 && r.is_finite()) {
                return Err(invalid("r", format!("radius must be nonnegative, got {r}")));
            }
            jet
        }
        None => radial_derivatives(f, r, h)?,
    };
    Ok(laplacian_from_derivatives(d1, d2, r, d))
}

/// `f'' + (d - 1) f' / r`, with the limit `d f''` at the origin.
pub fn laplacian_from_derivatives(d1: f64, d2: f64, r: f64, d: usize) -> f64 {
    let dd = d as f64;
    if r > 0.0 {
        d2 + (dd - 1.0) * d1 / r
    } else {
        dd * d2
    }
}

/// Log density at `r` of `|rho0 e_1 + Z|`, `Z ~ N(0, I_d)`.
pub fn log_noncentral_chi_pdf(r: f64, rho0: f64, d: usize) -> f64 {
    if !(r > 0.0) {
        return if d == 1 && r == 0.0 {
            -0.5 * rho0 * rho0 + (2.0 / std::f64::consts::PI).sqrt().ln()
        } else {
            f64::NEG_INFINITY
        };
    }
    let nu = d as f64 / 2.0 - 1.0;
    let y = r * rho0;
    if y >= 30f64.max(nu * nu) {
        if let Some(ln_i) = ln_bessel_i_scaled_large(nu, y) {
            let diff = r - rho0;
            return r.ln() + nu * (r / rho0).ln() - 0.5 * diff * diff + ln_i;
        }
    }
    // (r/rho0)^nu I_nu(r rho0) = (r^2/2)^nu sum_m (y^2/4)^m / (m! Gamma(m + nu + 1))
    r.ln() + nu * (0.5 * r * r).ln() - 0.5 * (r * r + rho0 * rho0) + ln_bessel_series(nu, 0.25 * y * y)
}

/// `ln sum_{m >= 0} q^m / (m! Gamma(m + nu + 1))`, summed outward from the largest term.
fn ln_bessel_series(nu: f64, q: f64) -> f64 {
    if q == 0.0 {
        return -ln_gamma(nu + 1.0);
    }
    // ratio of consecutive terms is q / ((m + 1)(m + nu + 1))
    let disc = (nu * nu + 4.0 * q).sqrt();
    let peak = (0.5 * (disc - nu - 2.0)).max(0.0).round();
    let ln_peak = peak * q.ln() - ln_gamma(peak + 1.0) - ln_gamma(peak + nu + 1.0);
    let mut sum = 1.0;
    let mut term = 1.0;
    let mut m = peak;
    loop {
        term *= q / ((m + 1.0) * (m + nu + 1.0));
        sum += term;
        m += 1.0;
        if term < 1e-17 * sum {
            break;
        }
    }
    term = 1.0;
    m = peak;
    while m >= 1.0 {
        term *= m * (m + nu) / q;
        sum += term;
        m -= 1.0;
        if term < 1e-17 * sum {
            break;
        }
    }
    ln_peak + sum.ln()
}

/// Half-width of the integration window, in standard deviations of `Z`.
const WINDOW: f64 = 12.0;
const START_PANELS: usize = 16;
const MAX_PANELS: usize = 4096;

fn window(rho0: f64, d: usize) -> (f64, f64) {
    ((rho0 - WINDOW).max(0.0), (rho0 * rho0 + d as f64).sqrt() + WINDOW)
}

/// Composite 15-point Kronrod sums over `panels` equal panels of the window.
/// Returns `(kronrod, sum of |kronrod terms|)`.
fn composite<F: FnMut(f64) -> f64>(lo: f64, hi: f64, panels: usize, mut f: F) -> (f64, f64) {
    let width = (hi - lo) / panels as f64;
    let half = 0.5 * width;
    let mut total = 0.0;
    let mut abs = 0.0;
    for p in 0..panels {
        let center = lo + (p as f64 + 0.5) * width;
        let fc = f(center);
        let mut k = WGK15[7] * fc;
        let mut a = WGK15[7] * fc.abs();
        for j in 0..7 {
            let f1 = f(center - half * XGK15[j]);
            let f2 = f(center + half * XGK15[j]);
            k += WGK15[j] * (f1 + f2);
            a += WGK15[j] * (f1.abs() + f2.abs());
        }
        total += k * half;
        abs += a * half;
    }
    (total, abs)
}

/// Same as [`composite`] but for `ln f`; returns `ln` of the integral.
fn composite_log<F: FnMut(f64) -> f64>(lo: f64, hi: f64, panels: usize, mut lf: F) -> f64 {
    let width = (hi - lo) / panels as f64;
    let half = 0.5 * width;
    let mut terms = Vec::with_capacity(15 * panels);
    for p in 0..panels {
        let center = lo + (p as f64 + 0.5) * width;
        terms.push((WGK15[7] * half).ln() + lf(center));
        for j in 0..7 {
            let lw = (WGK15[j] * half).ln();
            terms.push(lw + lf(center - half * XGK15[j]));
            terms.push(lw + lf(center + half * XGK15[j]));
        }
    }
    log_sum_exp(&terms)
}

pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

fn check_radial_args(center_norm: f64, t: f64, d: usize, tol: f64) -> Result<()> {
    if d == 0 {
        return Err(invalid("d", "dimension must be positive"));
    }
    if !(center_norm >= 0.0 && center_norm.is_finite()) {
        return Err(invalid("center_norm", format!("must be finite and nonnegative, got {center_norm}")));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(invalid("t", format!("scale must be finite and nonnegative, got {t}")));
    }
    if !(tol > 0.0) {
        return Err(invalid("tol", "tolerance must be positive"));
    }
    Ok(())
}

/// `E[g(|u + t Z|)]` with a fixed number of panels.
///
/// For a fixed panel count the result is a smooth function of `center_norm`,
/// which is what finite-difference Laplacians of smoothed profiles need.
pub fn radial_expectation_fixed<P: RadialProfile + ?Sized>(
    g: &P,
    center_norm: f64,
    t: f64,
    d: usize,
    panels: usize,
) -> f64 {
    if t == 0.0 {
        return g.value(center_norm);
    }
    let rho0 = center_norm / t;
    let (lo, hi) = window(rho0, d);
    composite(lo, hi, panels, |r| {
        let lp = log_noncentral_chi_pdf(r, rho0, d);
        if lp == f64::NEG_INFINITY {
            0.0
        } else {
            g.value(t * r) * lp.exp()
        }
    })
    .0
}

/// [`radial_expectation`] that also returns the panel count it settled on.
pub fn radial_expectation_panels<P: RadialProfile + ?Sized>(
    g: &P,
    center_norm: f64,
    t: f64,
    d: usize,
    tol: f64,
) -> Result<(Estimate, usize)> {
    check_radial_args(center_norm, t, d, tol)?;
    if t == 0.0 {
        return Ok((Estimate::exact(g.value(center_norm), 1), 0));
    }
    let rho0 = center_norm / t;
    let (lo, hi) = window(rho0, d);
    let mut evals = 0u64;
    let mut eval = |panels: usize| {
        evals += 15 * panels as u64;
        composite(lo, hi, panels, |r| {
            let lp = log_noncentral_chi_pdf(r, rho0, d);
            if lp == f64::NEG_INFINITY {
                0.0
            } else {
                g.value(t * r) * lp.exp()
            }
        })
    };
    let mut panels = START_PANELS;
    let (mut prev, _) = eval(panels);
    loop {
        panels *= 2;
        let (cur, abs) = eval(panels);
        if !cur.is_finite() {
            return Err(Error::Divergent {
                context: "radial_expectation",
                detail: format!("non-finite integral at |u| = {center_norm}, t = {t}"),
            });
        }
        let diff = (cur - prev).abs();
        if diff <= tol * cur.abs() || diff <= 1e-15 * abs || abs == 0.0 {
            let est = Estimate {
                value: cur,
                error: diff,
                n: evals,
                seed: None,
            };
            return Ok((est, panels));
        }
        if panels >= MAX_PANELS {
            return Err(Error::NonConvergence {
                context: "radial_expectation",
                estimate: cur,
                error: diff,
            });
        }
        prev = cur;
    }
}

/// `E[g(|u + t Z|)]` for `Z ~ N(0, I_d)`, to relative tolerance `tol`.
///
/// The window covers twelve standard deviations on each side of the bulk of
/// the noncentral chi law, and the panel count is doubled until successive
/// results agree. `t = 0` returns `g(|u|)`.
pub fn radial_expectation<P: RadialProfile + ?Sized>(
    g: &P,
    center_norm: f64,
    t: f64,
    d: usize,
    tol: f64,
) -> Result<Estimate> {
    radial_expectation_panels(g, center_norm, t, d, tol).map(|(e, _)| e)
}

/// `ln E[exp(lg(|u + t Z|))]` with a fixed number of panels; smooth in `center_norm`.
pub fn radial_log_expectation_fixed<F: Fn(f64) -> f64>(
    lg: F,
    center_norm: f64,
    t: f64,
    d: usize,
    panels: usize,
) -> f64 {
    if t == 0.0 {
        return lg(center_norm);
    }
    let rho0 = center_norm / t;
    let (lo, hi) = window(rho0, d);
    composite_log(lo, hi, panels, |r| log_noncentral_chi_pdf(r, rho0, d) + lg(t * r))
}

/// `(L, L', L'')` for `L(r) = ln E[exp(lg(|u + t Z|))]` at `|u| = r`, by finite
/// differences of [`radial_log_expectation_fixed`] with step `h`.
pub fn radial_log_expectation_jet<F: Fn(f64) -> f64>(
    lg: F,
    r: f64,
    t: f64,
    d: usize,
    panels: usize,
    h: f64,
) -> Result<(f64, f64, f64)> {
    let l = |s: f64| radial_log_expectation_fixed(&lg, s, t, d, panels);
    let (d1, d2) = radial_derivatives(&l, r, h)?;
    Ok((l(r), d1, d2))
}

/// Panel count reaching absolute tolerance `tol` on the log-expectation at
/// every radius in `radii`, doubled as a safety margin.
pub fn radial_log_panels<F: Fn(f64) -> f64>(lg: F, radii: &[f64], t: f64, d: usize, tol: f64) -> Result<usize> {
    let mut panels = 0;
    for &r in radii {
        let (_, p) = radial_log_expectation_panels(&lg, r, t, d, tol)?;
        panels = panels.max(p);
    }
    Ok(2 * panels)
}

/// [`radial_log_expectation`] that also returns the panel count it settled on.
pub fn radial_log_expectation_panels<F: Fn(f64) -> f64>(
    lg: F,
    center_norm: f64,
    t: f64,
    d: usize,
    tol: f64,
) -> Result<(Estimate, usize)> {
    check_radial_args(center_norm, t, d, tol)?;
    if t == 0.0 {
        return Ok((Estimate::exact(lg(center_norm), 1), 0));
    }
    let mut panels = START_PANELS;
    let mut evals = 15 * panels as u64;
    let mut prev = radial_log_expectation_fixed(&lg, center_norm, t, d, panels);
    loop {
        panels *= 2;
        evals += 15 * panels as u64;
        let cur = radial_log_expectation_fixed(&lg, center_norm, t, d, panels);
        if !cur.is_finite() {
            return Err(Error::Divergent {
                context: "radial_log_expectation",
                detail: format!("log integral {cur} at |u| = {center_norm}, t = {t}"),
            });
        }
        let diff = (cur - prev).abs();
        if diff <= tol {
            let est = Estimate {
                value: cur,
                error: diff,
                n: evals,
                seed: None,
            };
            return Ok((est, panels));
        }
        if panels >= MAX_PANELS {
            return Err(Error::NonConvergence {
                context: "radial_log_expectation",
                estimate: cur,
                error: diff,
            });
        }
        prev = cur;
    }
}

/// `ln E[exp(lg(|u + t Z|))]`, for integrands spanning many orders of magnitude.
///
/// The returned error is an absolute bound on the logarithm.
pub fn radial_log_expectation<F: Fn(f64) -> f64>(
    lg: F,
    center_norm: f64,
    t: f64,
    d: usize,
    tol: f64,
) -> Result<Estimate> {
    radial_log_expectation_panels(lg, center_norm, t, d, tol).map(|(e, _)| e)
}
