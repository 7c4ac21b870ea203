//! Numerical verification of the hypercube-integral facts behind the
//! superharmonicity of `E[m_H^nu(u + t Z, v)]^{c/nu}`.
//!
//! With `s = v / t^2` and `z = |u|^2 / 2` the profile reduces to
//! `psi = int_{[0,1]^nu} zeta(lambda) d lambda`, where
//! `zeta = prod lambda_i^{d/2-2} (S)^{-d/2} exp(-z sum lambda / S)`, `S = sum lambda + s`.
//! The moments
//! `rho(j1, j2, l) = int lambda_1^j1 lambda_2^j2 S^l zeta` and
//! `eta(j2, l) = int lambda_2^j2 S^l zeta(1, lambda_2, ...)` (with `lambda_1 = 1`)
//! satisfy a set of identities and inequalities checked here by tensor
//! Gauss-Legendre quadrature after the substitution `lambda = u^2`, which turns
//! `lambda^{d/2-2} d lambda` into the smooth `2 u^{d-3} du`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numerics::quad::gauss_legendre_unit;
use crate::numerics::Estimate;

/// Relative tolerance for the identities.
pub const IDENTITY_TOL: f64 = 1e-8;

/// Agreement required between successive quadrature orders.
pub const QUAD_AGREEMENT: f64 = 1e-11;

/// Relative slack granted to inequalities and the psi-condition for quadrature error.
pub const QUAD_SLACK: f64 = 1e-10;

/// Log-domain slack of the MTP2 check.
pub const MTP2_SLACK: f64 = 1e-12;

const START_ORDER: usize = 64;
const MAX_ORDER: usize = 256;

/// Parameters of one hypercube moment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HypercubeIntegralSpec {
    pub nu: usize,
    pub d: usize,
    pub s: f64,
    pub z: f64,
    pub j1: u32,
    pub j2: u32,
    pub l: i32,
}

impl HypercubeIntegralSpec {
    pub fn validate(&self) -> Result<()> {
        check_point(self.nu, self.d, self.s, self.z)
    }
}

fn check_point(nu: usize, d: usize, s: f64, z: f64) -> Result<()> {
    if !(2..=3).contains(&nu) {
        return Err(invalid("nu", format!("supported values are 2 and 3, got {nu}")));
    }
    if d < 3 {
        return Err(invalid("d", format!("need d >= 3, got {d}")));
    }
    if !(s > 0.0 && s.is_finite()) {
        return Err(invalid("s", format!("must be positive, got {s}")));
    }
    if !(z >= 0.0 && z.is_finite()) {
        return Err(invalid("z", format!("must be nonnegative, got {z}")));
    }
    Ok(())
}

/// `ln zeta(lambda)`; `+inf` when some `lambda_i = 0` and `d = 3`.
pub fn ln_zeta(lambda: &[f64], s: f64, z: f64, d: usize) -> f64 {
    let e = d as f64 / 2.0 - 2.0;
    let sum: f64 = lambda.iter().sum();
    let big_s = sum + s;
    let powers: f64 = if e == 0.0 { 0.0 } else { lambda.iter().map(|l| e * l.ln()).sum() };
    powers - d as f64 / 2.0 * big_s.ln() - z * sum / big_s
}

pub fn zeta(lambda: &[f64], s: f64, z: f64, d: usize) -> Result<f64> {
    if lambda.is_empty() {
        return Err(invalid("lambda", "need at least one coordinate"));
    }
    if lambda.iter().any(|l| !(0.0..=1.0).contains(l)) {
        return Err(invalid("lambda", "coordinates must lie in [0, 1]"));
    }
    if d < 3 {
        return Err(invalid("d", format!("need d >= 3, got {d}")));
    }
    if !(s > 0.0) {
        return Err(invalid("s", format!("must be positive, got {s}")));
    }
    if !(z >= 0.0) {
        return Err(invalid("z", format!("must be nonnegative, got {z}")));
    }
    Ok(ln_zeta(lambda, s, z, d).exp())
}

/// One requested moment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Moment {
    Rho { j1: u32, j2: u32, l: i32 },
    Eta { j2: u32, l: i32 },
}

/// Tensor Gauss-Legendre with `n` nodes per coordinate, all moments in one pass.
fn moments_at_order(nu: usize, d: usize, s: f64, z: f64, list: &[Moment], n: usize) -> Vec<f64> {
    let (u, w) = gauss_legendre_unit(n);
    // lambda = u^2 and lambda^{d/2-2} d lambda = 2 u^{d-3} du
    let lam: Vec<f64> = u.iter().map(|x| x * x).collect();
    let jac: Vec<f64> = u.iter().zip(&w).map(|(x, wi)| 2.0 * wi * x.powi(d as i32 - 3)).collect();
    let half_d = d as f64 / 2.0;
    let mut out = vec![0.0; list.len()];

    let accumulate = |out: &mut [f64], lambdas: &[f64], weight: f64, eta: bool| {
        let sum: f64 = lambdas.iter().sum();
        let big_s = sum + s;
        let base = weight * (-half_d * big_s.ln() - z * sum / big_s).exp();
        for (o, m) in out.iter_mut().zip(list) {
            match (*m, eta) {
                (Moment::Rho { j1, j2, l }, false) => {
                    *o += base * lambdas[0].powi(j1 as i32) * lambdas[1].powi(j2 as i32) * big_s.powi(l);
                }
                (Moment::Eta { j2, l }, true) => {
                    *o += base * lambdas[1].powi(j2 as i32) * big_s.powi(l);
                }
                _ => {}
            }
        }
    };

    let want_rho = list.iter().any(|m| matches!(m, Moment::Rho { .. }));
    let want_eta = list.iter().any(|m| matches!(m, Moment::Eta { .. }));
    let mut lambdas = vec![0.0; nu];
    if want_rho {
        let partial: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|a| {
                let mut acc = vec![0.0; list.len()];
                let mut lv = vec![0.0; nu];
                lv[0] = lam[a];
                for b in 0..n {
                    lv[1] = lam[b];
                    if nu == 2 {
                        accumulate(&mut acc, &lv, jac[a] * jac[b], false);
                    } else {
                        for c in 0..n {
                            lv[2] = lam[c];
                            accumulate(&mut acc, &lv, jac[a] * jac[b] * jac[c], false);
                        }
                    }
                }
                acc
            })
            .collect();
        for p in partial {
            out.iter_mut().zip(p).for_each(|(o, v)| *o += v);
        }
    }
    if want_eta {
        // lambda_1 = 1 carries no Jacobian
        lambdas[0] = 1.0;
        for b in 0..n {
            lambdas[1] = lam[b];
            if nu == 2 {
                accumulate(&mut out, &lambdas, jac[b], true);
            } else {
                for c in 0..n {
                    lambdas[2] = lam[c];
                    accumulate(&mut out, &lambdas, jac[b] * jac[c], true);
                }
            }
        }
    }
    out
}

/// All moments in `list`, doubling the order from 64 until two successive
/// orders agree to [`QUAD_AGREEMENT`] relative.
pub fn moments(nu: usize, d: usize, s: f64, z: f64, list: &[Moment]) -> Result<Vec<Estimate>> {
    check_point(nu, d, s, z)?;
    let mut n = START_ORDER;
    let mut prev = moments_at_order(nu, d, s, z, list, n);
    loop {
        n *= 2;
        let cur = moments_at_order(nu, d, s, z, list, n);
        let worst = cur
            .iter()
            .zip(&prev)
            .map(|(c, p)| (c - p).abs() / c.abs().max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max);
        if worst <= QUAD_AGREEMENT {
            let evals = (n as u64).pow(nu as u32);
            return Ok(cur
                .iter()
                .zip(&prev)
                .map(|(c, p)| Estimate { value: *c, error: (c - p).abs(), n: evals, seed: None })
                .collect());
        }
        if n >= MAX_ORDER {
            return Err(Error::NonConvergence {
                context: "hypercube moments",
                estimate: cur[0],
                error: worst,
            });
        }
        prev = cur;
    }
}

pub fn rho_int(spec: &HypercubeIntegralSpec) -> Result<Estimate> {
    spec.validate()?;
    let m = Moment::Rho { j1: spec.j1, j2: spec.j2, l: spec.l };
    Ok(moments(spec.nu, spec.d, spec.s, spec.z, &[m])?[0])
}

/// `eta(j2, l)` at the `(nu, d, s, z)` of `spec`; its `j1`, `j2`, `l` are ignored.
pub fn eta_int(j2: u32, l: i32, spec: &HypercubeIntegralSpec) -> Result<Estimate> {
    spec.validate()?;
    Ok(moments(spec.nu, spec.d, spec.s, spec.z, &[Moment::Eta { j2, l }])?[0])
}

/// Outcome of one identity, inequality or condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    /// Relative error for identities; relative slack (positive is good) otherwise.
    pub margin: f64,
    pub pass: bool,
    /// Outside the range where the statement is claimed; never counted as a failure.
    pub informational: bool,
}

/// The full moment table a verification at one point needs.
struct Table {
    nu: f64,
    d: f64,
    s: f64,
    z: f64,
    values: Vec<(Moment, f64)>,
}

const RHO_NEEDED: [(u32, u32, i32); 15] = [
    (0, 0, -1),
    (0, 0, 0),
    (0, 0, 1),
    (1, 0, -2),
    (1, 0, -1),
    (1, 0, 0),
    (0, 1, 0),
    (2, 0, -2),
    (2, 0, -1),
    (2, 0, 0),
    (1, 1, -2),
    (1, 1, -1),
    (1, 1, 0),
    (0, 0, -2),
    (0, 1, -1),
];

const ETA_NEEDED: [(u32, i32); 4] = [(0, 0), (0, 1), (1, 0), (1, 1)];

impl Table {
    fn new(s: f64, z: f64, d: usize, nu: usize) -> Result<Self> {
        let list: Vec<Moment> = RHO_NEEDED
            .iter()
            .map(|&(j1, j2, l)| Moment::Rho { j1, j2, l })
            .chain(ETA_NEEDED.iter().map(|&(j2, l)| Moment::Eta { j2, l }))
            .collect();
        let est = moments(nu, d, s, z, &list)?;
        Ok(Self {
            nu: nu as f64,
            d: d as f64,
            s,
            z,
            values: list.into_iter().zip(est.into_iter().map(|e| e.value)).collect(),
        })
    }

    fn get(&self, m: Moment) -> f64 {
        self.values
            .iter()
            .find(|(k, _)| *k == m)
            .map(|(_, v)| *v)
            .unwrap_or_else(|| panic!("moment {m:?} not tabulated"))
    }

    fn rho(&self, j1: u32, j2: u32, l: i32) -> f64 {
        self.get(Moment::Rho { j1, j2, l })
    }

    fn eta(&self, j2: u32, l: i32) -> f64 {
        self.get(Moment::Eta { j2, l })
    }
}

/// Identity `lhs = sum(terms)`, error relative to `max(|lhs|, sum |terms|)`.
fn identity(name: String, lhs: f64, terms: &[f64]) -> Check {
    let rhs: f64 = terms.iter().sum();
    let scale = lhs.abs().max(terms.iter().map(|t| t.abs()).sum());
    let margin = if scale == 0.0 { 0.0 } else { (lhs - rhs).abs() / scale };
    Check { name, lhs, rhs, margin, pass: margin <= IDENTITY_TOL, informational: false }
}

/// Inequality `lhs >= rhs`.
fn at_least(name: &str, lhs: f64, rhs: f64) -> Check {
    let margin = (lhs - rhs) / lhs.abs().max(rhs.abs());
    Check { name: name.into(), lhs, rhs, margin, pass: margin >= -QUAD_SLACK, informational: false }
}

fn identities(t: &Table) -> Vec<Check> {
    let (nu, d, s, z) = (t.nu, t.d, t.s, t.z);
    let mut out = Vec::new();
    for (j1, j2, l) in [(1u32, 0u32, -1i32), (2, 0, -2), (1, 1, -2)] {
        out.push(identity(
            format!("parts ({j1},{j2},{l})"),
            s * z * t.rho(j1, j2, l),
            &[
                -t.eta(j2, l + 2),
                (j1 as f64 + d / 2.0 - 2.0) * t.rho(j1 - 1, j2, l + 2),
                (l as f64 - d / 2.0 + 2.0) * t.rho(j1, j2, l + 1),
            ],
        ));
    }
    for l in [0, 1] {
        out.push(identity(
            format!("split rho(0,0,{l})"),
            t.rho(0, 0, l),
            &[nu * t.rho(1, 0, l - 1), s * t.rho(0, 0, l - 1)],
        ));
    }
    for l in [-1, 0] {
        out.push(identity(
            format!("split rho(1,0,{l})"),
            t.rho(1, 0, l),
            &[t.rho(2, 0, l - 1), (nu - 1.0) * t.rho(1, 1, l - 1), s * t.rho(1, 0, l - 1)],
        ));
    }
    out.push(identity(
        "split eta(0,1)".into(),
        t.eta(0, 1),
        &[t.eta(0, 0), (nu - 1.0) * t.eta(1, 0), s * t.eta(0, 0)],
    ));
    out
}

fn inequalities(t: &Table) -> Vec<Check> {
    let (nu, d, s) = (t.nu, t.d, t.s);
    let r100 = t.rho(1, 0, 0);
    vec![
        at_least("fkg", t.eta(0, 1) * t.rho(0, 0, -1), t.eta(0, 0) * t.rho(0, 0, 0)),
        at_least("lower rho(1,0,-1)/rho(1,0,0)", t.rho(1, 0, -1) / r100, 1.0 / (nu * d / (d + 2.0) + s)),
        at_least("upper rho(2,0,0)/rho(1,0,0)", d / (d + 2.0), t.rho(2, 0, 0) / r100),
        at_least("upper rho(1,1,0)/rho(1,0,0)", (d - 2.0) / d, t.rho(1, 1, 0) / r100),
    ]
}

/// Smallest `s` for which the psi-condition is claimed: `nu d (nu - 1) / ((1 - c)(d + 2))`.
pub fn psi_s_min(d: usize, nu: usize, c: f64) -> f64 {
    let (d, nu) = (d as f64, nu as f64);
    nu * d * (nu - 1.0) / ((1.0 - c) * (d + 2.0))
}

/// Components of the psi-condition at one point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsiReport {
    pub psi: f64,
    pub grad_sq: f64,
    pub laplacian: f64,
    /// `(c/nu - 1) |grad psi|^2 + psi Delta psi`.
    pub form: f64,
    pub s_min: f64,
    pub check: Check,
}

fn psi_from(t: &Table, c: f64, s_min: f64) -> PsiReport {
    let (nu, d, z) = (t.nu, t.d, t.z);
    let r = t.rho(1, 0, -1);
    let psi = t.rho(0, 0, 0);
    let grad_sq = 2.0 * nu * nu * z * r * r;
    let laplacian = -d * nu * r + 2.0 * nu * z * t.rho(2, 0, -2) + 2.0 * nu * (nu - 1.0) * z * t.rho(1, 1, -2);
    let a = (c / nu - 1.0) * grad_sq;
    let b = psi * laplacian;
    let form = a + b;
    let scale = a.abs() + b.abs();
    let margin = -form / scale;
    PsiReport {
        psi,
        grad_sq,
        laplacian,
        form,
        s_min,
        check: Check {
            name: "psi-condition".into(),
            lhs: form,
            rhs: 0.0,
            margin,
            pass: margin >= -QUAD_SLACK,
            informational: t.s < s_min,
        },
    }
}

/// Checks the integration-by-parts identity (three index triples) and the
/// identities from splitting `S = sum lambda + s` at one point.
pub fn verify_identities(s: f64, z: f64, d: usize, nu: usize) -> Result<Vec<Check>> {
    Ok(identities(&Table::new(s, z, d, nu)?))
}

/// Checks the FKG inequality and the three moment-ratio bounds.
pub fn verify_inequalities(s: f64, z: f64, d: usize, nu: usize) -> Result<Vec<Check>> {
    Ok(inequalities(&Table::new(s, z, d, nu)?))
}

/// Evaluates the psi-condition; informational when `s` is below [`psi_s_min`].
pub fn verify_psi_condition(s: f64, z: f64, d: usize, nu: usize, c: f64) -> Result<PsiReport> {
    if !(c > 0.0 && c < 1.0) {
        return Err(invalid("c", format!("must lie in (0, 1), got {c}")));
    }
    Ok(psi_from(&Table::new(s, z, d, nu)?, c, psi_s_min(d, nu, c)))
}

/// `zeta(a) zeta(b) <= zeta(a v b) zeta(a ^ b)` in the log domain.
pub fn mtp2_check(a: &[f64], b: &[f64], s: f64, z: f64, d: usize) -> Result<bool> {
    if a.len() != b.len() || a.is_empty() {
        return Err(invalid("lambda_b", "vectors must be nonempty and of equal length"));
    }
    if a.iter().chain(b).any(|x| !(*x > 0.0 && *x <= 1.0)) {
        return Err(invalid("lambda", "coordinates must lie in (0, 1]"));
    }
    if !(s > 0.0) || !(z >= 0.0) || d < 3 {
        return Err(invalid("s", "need s > 0, z >= 0, d >= 3"));
    }
    let hi: Vec<f64> = a.iter().zip(b).map(|(x, y)| x.max(*y)).collect();
    let lo: Vec<f64> = a.iter().zip(b).map(|(x, y)| x.min(*y)).collect();
    let lhs = ln_zeta(a, s, z, d) + ln_zeta(b, s, z, d);
    let rhs = ln_zeta(&hi, s, z, d) + ln_zeta(&lo, s, z, d);
    Ok(lhs <= rhs + MTP2_SLACK)
}

/// All checks at one `(s, z, d, nu)` sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointReport {
    pub s: f64,
    pub z: f64,
    pub d: usize,
    pub nu: usize,
    pub checks: Vec<Check>,
    /// psi-condition at the sampled `s` (informational below `s_min`).
    pub psi: PsiReport,
    /// psi-condition at `s_min + s`, always inside the claimed range.
    pub psi_in_range: PsiReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub seed: u64,
    pub c: f64,
    pub points: Vec<PointReport>,
    pub mtp2_pairs: u64,
    pub mtp2_failures: u64,
    pub pass: bool,
}

impl SweepReport {
    /// Every non-informational check, in order.
    pub fn checks(&self) -> impl Iterator<Item = &Check> {
        self.points.iter().flat_map(|p| {
            p.checks
                .iter()
                .chain([&p.psi.check, &p.psi_in_range.check])
                .filter(|c| !c.informational)
        })
    }
}

/// Dimensions and `nu` values of the default sweep.
pub const SWEEP_D: [usize; 3] = [3, 4, 5];
pub const SWEEP_NU: [usize; 2] = [2, 3];

/// For each `(d, nu)` in the default grid, `points` random `(s, z)` in
/// `[0.1, 10]^2`; runs every identity, inequality and the psi-condition with
/// constant `c`, and `mtp2_pairs` random MTP2 pairs spread over all points.
pub fn sweep(seed: u64, points: usize, c: f64, mtp2_pairs: u64) -> Result<SweepReport> {
    if points == 0 {
        return Err(invalid("points", "need at least one point"));
    }
    if !(c > 0.0 && c < 1.0) {
        return Err(invalid("c", format!("must lie in (0, 1), got {c}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut jobs = Vec::new();
    for d in SWEEP_D {
        for nu in SWEEP_NU {
            for _ in 0..points {
                let s = rng.random_range(0.1..=10.0);
                let z = rng.random_range(0.1..=10.0);
                jobs.push((d, nu, s, z));
            }
        }
    }
    let mut reports = Vec::with_capacity(jobs.len());
    for &(d, nu, s, z) in &jobs {
        let table = Table::new(s, z, d, nu)?;
        let s_min = psi_s_min(d, nu, c);
        let mut checks = identities(&table);
        checks.extend(inequalities(&table));
        let psi = psi_from(&table, c, s_min);
        let shifted = Table::new(s_min + s, z, d, nu)?;
        let psi_in_range = psi_from(&shifted, c, s_min);
        reports.push(PointReport { s, z, d, nu, checks, psi, psi_in_range });
    }

    let per_point = mtp2_pairs.div_ceil(jobs.len() as u64);
    let mut failures = 0;
    let mut done = 0;
    for &(d, nu, s, z) in &jobs {
        for _ in 0..per_point.min(mtp2_pairs - done) {
            let a: Vec<f64> = (0..nu).map(|_| 1.0 - rng.random::<f64>()).collect();
            let b: Vec<f64> = (0..nu).map(|_| 1.0 - rng.random::<f64>()).collect();
            if !mtp2_check(&a, &b, s, z, d)? {
                failures += 1;
            }
            done += 1;
        }
    }

    let mut report = SweepReport { seed, c, points: reports, mtp2_pairs: done, mtp2_failures: failures, pass: false };
    report.pass = failures == 0 && report.checks().all(|c| c.pass);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{adaptive_quad, mc_mean, QuadOptions};
    use proptest::prelude::{prop_assert, proptest, ProptestConfig};

    fn spec(nu: usize, d: usize, s: f64, z: f64, j1: u32, j2: u32, l: i32) -> HypercubeIntegralSpec {
        HypercubeIntegralSpec { nu, d, s, z, j1, j2, l }
    }

    #[test]
    fn zeta_examples() {
        let v = zeta(&[1.0, 1.0], 1.0, 0.0, 4).unwrap();
        assert!((v - 1.0 / 9.0).abs() < 1e-16);
        assert!(zeta(&[0.5, 0.5], 1.0, 1e4, 4).unwrap() < 1e-300);
        assert_eq!(zeta(&[0.0, 0.5], 1.0, 1.0, 3).unwrap(), f64::INFINITY);
        assert!(zeta(&[1.5, 0.5], 1.0, 1.0, 3).is_err());
        let a = zeta(&[0.2, 0.7, 0.4], 2.0, 1.5, 5).unwrap();
        let b = zeta(&[0.4, 0.2, 0.7], 2.0, 1.5, 5).unwrap();
        assert!((a - b).abs() < 1e-15 * a);
    }

    #[test]
    fn rho_d4_closed_form() {
        // int int (x + y + 1)^{-2} over the unit square = ln(4/3)
        let v = rho_int(&spec(2, 4, 1.0, 0.0, 0, 0, 0)).unwrap();
        assert!((v.value - (4.0f64 / 3.0).ln()).abs() < 1e-13, "{v:?}");
    }

    #[test]
    fn rho_matches_mc() {
        let sp = spec(2, 3, 1.3, 0.7, 1, 0, -1);
        let q = rho_int(&sp).unwrap();
        let mc = mc_mean(10_000_000, 3, |rng| {
            // lambda = u^2 with u uniform, density 2 u^{d-3} = 2 absorbs lambda^{-1/2}
            let u1: f64 = rng.random();
            let u2: f64 = rng.random();
            let (l1, l2) = (u1 * u1, u2 * u2);
            let sum = l1 + l2;
            let big = sum + sp.s;
            4.0 * l1 / big * big.powf(-1.5) * (-sp.z * sum / big).exp()
        })
        .unwrap();
        assert!(mc.covers(q.value, 3.0), "{mc:?} vs {q:?}");
    }

    #[test]
    fn rho_symmetric_in_indices() {
        for nu in [2, 3] {
            let a = rho_int(&spec(nu, 5, 0.7, 2.0, 2, 1, -1)).unwrap().value;
            let b = rho_int(&spec(nu, 5, 0.7, 2.0, 1, 2, -1)).unwrap().value;
            assert!((a - b).abs() < 1e-12 * a);
        }
    }

    #[test]
    fn eta_nu2_matches_adaptive_quad() {
        let (s, z, d) = (2.0, 1.5, 3);
        let e = eta_int(1, -1, &spec(2, d, s, z, 0, 0, 0)).unwrap();
        let direct = adaptive_quad(
            |l: f64| {
                let big = 1.0 + l + s;
                l * big.powi(-1) * (-0.5 * l.ln()).exp() * big.powf(-1.5) * (-z * (1.0 + l) / big).exp()
            },
            0.0,
            1.0,
            &QuadOptions::with_tol(1e-13).lower_exponent(-0.5),
        )
        .unwrap();
        assert!((e.value - direct.value).abs() < 1e-11 * direct.value, "{e:?} vs {direct:?}");
    }

    #[test]
    fn identities_examples() {
        for (s, z, d, nu) in [(1.0, 1.0, 4, 2), (10.0, 0.1, 5, 2), (0.3, 4.0, 3, 3)] {
            for c in verify_identities(s, z, d, nu).unwrap() {
                assert!(c.pass, "{c:?}");
            }
        }
    }

    #[test]
    fn identities_at_z_zero() {
        let checks = verify_identities(1.0, 0.0, 4, 2).unwrap();
        for c in checks.iter().filter(|c| c.name.starts_with("parts")) {
            assert_eq!(c.lhs, 0.0);
            assert!(c.pass, "{c:?}");
        }
    }

    #[test]
    fn inequalities_examples() {
        for (s, z) in [(1.0, 1.0), (1.0, 0.0), (50.0, 1.0)] {
            for c in verify_inequalities(s, z, 4, 2).unwrap() {
                assert!(c.pass, "{c:?}");
            }
        }
        let near = verify_inequalities(1.0, 1.0, 4, 2).unwrap();
        let far = verify_inequalities(1e3, 1.0, 4, 2).unwrap();
        assert!(far[1].margin < near[1].margin);
    }

    #[test]
    fn psi_condition_examples() {
        let s_min = psi_s_min(4, 2, 0.5);
        assert!((s_min - 8.0 / 3.0).abs() < 1e-15);
        let at = verify_psi_condition(s_min, 1.0, 4, 2, 0.5).unwrap();
        assert!(at.check.pass && !at.check.informational, "{at:?}");
        let far = verify_psi_condition(100.0 * s_min, 1.0, 4, 2, 0.5).unwrap();
        assert!(far.check.pass);
        let zero = verify_psi_condition(1.0, 0.0, 4, 2, 0.5).unwrap();
        assert_eq!(zero.grad_sq, 0.0);
        assert!(zero.laplacian < 0.0 && zero.check.pass);
        assert!(zero.check.informational);
    }

    #[test]
    fn mtp2_trivial_cases() {
        let a = [0.3, 0.6, 0.9];
        assert!(mtp2_check(&a, &a, 1.0, 2.0, 4).unwrap());
        assert!(mtp2_check(&a, &[0.4, 0.7, 1.0], 1.0, 2.0, 4).unwrap());
        assert!(mtp2_check(&a, &[0.0, 0.7, 1.0], 1.0, 2.0, 4).is_err());
    }

    #[test]
    fn mtp2_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..10_000 {
            let a: Vec<f64> = (0..3).map(|_| 1.0 - rng.random::<f64>()).collect();
            let b: Vec<f64> = (0..3).map(|_| 1.0 - rng.random::<f64>()).collect();
            assert!(mtp2_check(&a, &b, 1.0, 2.0, 4).unwrap(), "{a:?} {b:?}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn mtp2_holds(a in proptest::collection::vec(1e-6f64..=1.0, 3),
                      b in proptest::collection::vec(1e-6f64..=1.0, 3),
                      s in 0.05f64..20.0, z in 0.0f64..20.0, d in 3usize..8) {
            prop_assert!(mtp2_check(&a, &b, s, z, d).unwrap());
        }
    }

    #[test]
    fn small_sweep_passes() {
        let r = sweep(1, 1, 0.5, 1000).unwrap();
        assert_eq!(r.points.len(), 6);
        assert_eq!(r.mtp2_pairs, 1000);
        assert!(r.pass, "{:?}", r.checks().filter(|c| !c.pass).collect::<Vec<_>>());
    }
}
