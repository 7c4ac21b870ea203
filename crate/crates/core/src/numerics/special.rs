//! Incomplete gamma functions and the exponentially scaled modified Bessel function.

use crate::error::{invalid, Error, Result};

const EPS: f64 = 1e-17;
const MAX_ITER: usize = 100_000;
const TINY: f64 = 1e-300;

pub fn ln_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

/// Regularized lower incomplete gamma function `P(a, x)`.
///
/// Series for `x < a + 1`, Lentz continued fraction for `Q = 1 - P` otherwise.
pub fn reg_lower_inc_gamma(a: f64, x: f64) -> Result<f64> {
    check_args(a, x)?;
    if x == 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(1.0);
    }
    if x < a + 1.0 {
        let log_pref = -x + a * x.ln() - ln_gamma(a + 1.0);
        Ok((log_pref.exp() * series_sum(a, x)?).min(1.0))
    } else {
        let log_pref = -x + a * x.ln() - ln_gamma(a);
        Ok(1.0 - log_pref.exp() * continued_fraction(a, x)?)
    }
}

/// Regularized upper incomplete gamma function `Q(a, x) = 1 - P(a, x)`.
pub fn reg_upper_inc_gamma(a: f64, x: f64) -> Result<f64> {
    check_args(a, x)?;
    if x == 0.0 {
        return Ok(1.0);
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    if x < a + 1.0 {
        Ok(1.0 - reg_lower_inc_gamma(a, x)?)
    } else {
        let log_pref = -x + a * x.ln() - ln_gamma(a);
        Ok(log_pref.exp() * continued_fraction(a, x)?)
    }
}

/// `int_0^1 s^{k-1} e^{-s c} ds = gamma(k, c) / c^k` for `k > 0`, `c >= 0`.
///
/// Stays accurate as `c -> 0`, where the ratio form cancels.
pub fn lower_gamma_scaled(k: f64, c: f64) -> Result<f64> {
    check_args(k, c)?;
    if c <= 1e-8 {
        // 1/k - c/(k+1) + c^2/(2(k+2)) - c^3/(6(k+3))
        return Ok(1.0 / k - c / (k + 1.0) + c * c / (2.0 * (k + 2.0))
            - c * c * c / (6.0 * (k + 3.0)));
    }
    if c < k + 1.0 {
        // e^{-c} sum_n c^n / (k (k+1) ... (k+n)); all terms positive.
        Ok((-c).exp() * series_sum(k, c)? / k)
    } else {
        let log_pref = ln_gamma(k) - k * c.ln();
        let q_log = -c + k * c.ln() - ln_gamma(k);
        let q = q_log.exp() * continued_fraction(k, c)?;
        Ok(log_pref.exp() * (1.0 - q))
    }
}

fn check_args(a: f64, x: f64) -> Result<()> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(invalid("a", format!("shape must be positive, got {a}")));
    }
    if !(x >= 0.0) {
        return Err(invalid("x", format!("argument must be nonnegative, got {x}")));
    }
    Ok(())
}

/// `sum_{n>=0} x^n / ((a+1)(a+2)...(a+n))`.
fn series_sum(a: f64, x: f64) -> Result<f64> {
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut ap = a;
    for _ in 0..MAX_ITER {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term < sum * EPS {
            return Ok(sum);
        }
    }
    Err(Error::NonConvergence {
        context: "incomplete gamma series",
        estimate: sum,
        error: term,
    })
}

/// Continued fraction for `Gamma(a, x) e^x x^{-a}` by the modified Lentz method.
fn continued_fraction(a: f64, x: f64) -> Result<f64> {
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            return Ok(h);
        }
    }
    Err(Error::NonConvergence {
        context: "incomplete gamma continued fraction",
        estimate: h,
        error: f64::NAN,
    })
}

/// `ln(e^{-x} I_nu(x))` for large `x` from the Hankel asymptotic expansion.
///
/// Returns `None` when the expansion cannot reach full precision at this `x`;
/// callers must then use another representation.
pub fn ln_bessel_i_scaled_large(nu: f64, x: f64) -> Option<f64> {
    if !(x > 0.0) {
        return None;
    }
    let mu = 4.0 * nu * nu;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k: f64 = 1.0;
    loop {
        let factor = (mu - (2.0 * k - 1.0).powi(2)) / (8.0 * k * x);
        let next = -term * factor;
        if next == 0.0 {
            break;
        }
        if next.abs() > term.abs() && k > nu + 1.0 {
            // asymptotic series started to diverge before converging
            return None;
        }
        term = next;
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
        k += 1.0;
        if k > 200.0 {
            return None;
        }
    }
    if !(sum > 0.0) {
        return None;
    }
    Some(sum.ln() - 0.5 * (2.0 * std::f64::consts::PI * x).ln())
}
