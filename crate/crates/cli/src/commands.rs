//! One function per subcommand; each returns its table and, if a check failed,
//! the failure to report after the table is written.

use alphapred_core::appendix_lab::{sweep, Check};
use alphapred_core::domination::{
    check_superharmonic_condition, check_superharmonic_profile, default_r_grid, domination_experiment_shape,
    figure1_alpha_grid, figure1_curve, t_max, ExponentMode, SuperharmonicReport,
};
use alphapred_core::marginal::Marginal;
use alphapred_core::numerics::radial::radial_expectation;
use alphapred_core::predictive::harmonic_shape;
use alphapred_core::problem::completing_squares_sides;
use alphapred_core::risk::{invariant_risk_closed_form, risk_difference_crn, risk_difference_rho_oracle, risk_mc};
use alphapred_core::{Candidate, ProblemSpec, RiskQuery, Shape, Verdict};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{Density, RunConfig, Subcommand};
use crate::error::CliError;
use crate::table::{Cell, Table};

pub struct Outcome {
    pub table: Table,
    pub failure: Option<CliError>,
}

impl Outcome {
    fn ok(table: Table) -> Self {
        Self { table, failure: None }
    }
}

pub fn run(cfg: &RunConfig) -> Result<Outcome, CliError> {
    match cfg.command {
        Subcommand::Risk => cmd_risk(cfg),
        Subcommand::Dominate => cmd_dominate(cfg),
        Subcommand::Figure1 => cmd_figure1(cfg),
        Subcommand::Superharmonic => cmd_superharmonic(cfg),
        Subcommand::Appendix => cmd_appendix(cfg),
        Subcommand::Verify => cmd_verify(cfg),
    }
}

fn density_label(d: Density) -> &'static str {
    match d {
        Density::Uniform => "uniform",
        Density::Harmonic => "harmonic",
        Density::Constant => "constant",
        Density::SoftHarmonic => "soft-harmonic",
        Density::Plugin => "plugin",
    }
}

fn along_e1(d: usize, r: f64) -> Vec<f64> {
    let mut mu = vec![0.0; d];
    mu[0] = r;
    mu
}

pub fn cmd_risk(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let spec = cfg.spec()?;
    let candidate = match cfg.density {
        Density::Uniform => Candidate::BestInvariant,
        Density::Harmonic => Candidate::HarmonicBayes,
        Density::Constant => Candidate::Induced(Shape::Constant),
        Density::SoftHarmonic => Candidate::Induced(Shape::SoftHarmonic { d: spec.d }),
        Density::Plugin => Candidate::Plugin(Marginal::harmonic(spec.d)?),
    };
    let mut table = Table::new("risk", &["mu_norm", "density_kind", "risk", "stderr", "n"]);
    if matches!(cfg.density, Density::Uniform | Density::Constant) && spec.alpha.abs() < 1.0 {
        let k = spec.derived()?;
        table.meta("closed_form", invariant_risk_closed_form(&spec, spec.v_y / k.gamma)?);
    }
    for &r in &cfg.mu_grid {
        let q = RiskQuery::new(spec, along_e1(spec.d, r), candidate.clone(), cfg.n, cfg.seed)?;
        let est = risk_mc(&q)?;
        table.push(vec![
            Cell::F(r),
            Cell::S(density_label(cfg.density).into()),
            Cell::F(est.value),
            Cell::F(est.error),
            Cell::U(est.n),
        ]);
    }
    Ok(Outcome::ok(table))
}

pub fn cmd_dominate(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let spec = cfg.spec()?;
    let shape = match cfg.density {
        Density::Harmonic => harmonic_shape(&spec)?,
        Density::Uniform | Density::Constant => Shape::Constant,
        Density::SoftHarmonic => Shape::SoftHarmonic { d: spec.d },
        Density::Plugin => {
            return Err(CliError::Config("dominate compares induced densities; plugin is not one".into()))
        }
    };
    let rep = domination_experiment_shape(&spec, &cfg.mu_grid, &shape, cfg.n, cfg.seed)?;
    let mut table = Table::new("dominate", &["mu_norm", "diff", "stderr", "z", "n", "clamped", "method"]);
    table.meta("density", density_label(cfg.density));
    table.meta("threshold", rep.threshold.bound);
    table.meta("branch", rep.threshold.branch.label());
    table.meta("within_threshold", rep.within_threshold);
    table.meta("verdict", rep.verdict.label());
    for row in &rep.rows {
        let z = if row.diff.error > 0.0 { row.diff.value / row.diff.error } else { 0.0 };
        table.push(vec![
            Cell::F(row.mu_norm),
            Cell::F(row.diff.value),
            Cell::F(row.diff.error),
            Cell::F(z),
            Cell::U(row.diff.n),
            Cell::U(row.clamped),
            Cell::S(row.method.label().into()),
        ]);
    }
    let failure = (rep.verdict == Verdict::Fail)
        .then(|| CliError::Verification("risk difference significantly negative at some |mu|".into()));
    Ok(Outcome { table, failure })
}

pub fn cmd_figure1(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let d = cfg.require_d()?;
    let curve = figure1_curve(d, &figure1_alpha_grid())?;
    let mut table = Table::new("figure1", &["alpha", "bound", "branch", "kappa", "c_beta"]);
    for row in curve {
        table.push(vec![
            Cell::F(row.alpha),
            Cell::F(row.bound),
            Cell::S(row.branch.label().into()),
            row.kappa.map_or(Cell::Null, Cell::U),
            row.c_beta.map_or(Cell::Null, Cell::F),
        ]);
    }
    Ok(Outcome::ok(table))
}

fn t_grid(limit: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![0.0],
        k => (0..k).map(|i| limit * i as f64 / (k - 1) as f64).collect(),
    }
}

pub fn cmd_superharmonic(cfg: &RunConfig) -> Result<Outcome, CliError> {
    if cfg.t_count == 0 {
        return Err(CliError::Config("--t-count must be positive".into()));
    }
    let reports: Vec<SuperharmonicReport> = match cfg.alpha {
        Some(_) => {
            let spec = cfg.spec()?;
            let mode = if spec.derived()?.integer_inverse_beta().is_some() {
                ExponentMode::InverseBeta
            } else {
                ExponentMode::Kappa
            };
            let first = check_superharmonic_condition(&spec, 0.0, mode, None, None)?;
            let mut out = vec![first.clone()];
            for &t in t_grid(first.t_max, cfg.t_count).iter().skip(1) {
                out.push(check_superharmonic_condition(&spec, t, mode, None, None)?);
            }
            out
        }
        None => {
            let d = cfg.require_d()?;
            let limit = t_max(cfg.nu, cfg.c, cfg.v, d)?;
            let grid = default_r_grid(cfg.v.sqrt());
            t_grid(limit, cfg.t_count)
                .into_iter()
                .map(|t| check_superharmonic_profile(d, cfg.v, cfg.nu, cfg.c, t, &grid, None))
                .collect::<Result<_, _>>()?
        }
    };
    let first = &reports[0];
    let mut table = Table::new("superharmonic", &["t", "r", "laplacian_ratio", "scaled", "pass"]);
    table.meta("nu", first.nu);
    table.meta("c", first.c);
    table.meta("v", first.v);
    table.meta("t_max", first.t_max);
    let max_scaled = reports.iter().map(|r| r.max_scaled).fold(f64::NEG_INFINITY, f64::max);
    let pass = reports.iter().all(|r| r.pass || r.informational);
    table.meta("max_scaled", max_scaled);
    table.meta("pass", pass);
    for rep in &reports {
        for row in &rep.rows {
            table.push(vec![
                Cell::F(rep.t),
                Cell::F(row.r),
                Cell::F(row.laplacian_ratio),
                Cell::F(row.scaled),
                Cell::B(row.pass),
            ]);
        }
    }
    let failure = (!pass).then(|| CliError::Verification(format!("scaled Laplacian reached {max_scaled:e}")));
    Ok(Outcome { table, failure })
}

fn check_cells(d: usize, nu: usize, s: f64, z: f64, name: &str, c: &Check) -> Vec<Cell> {
    vec![
        Cell::U(d as u64),
        Cell::U(nu as u64),
        Cell::F(s),
        Cell::F(z),
        Cell::S(name.into()),
        Cell::F(c.lhs),
        Cell::F(c.rhs),
        Cell::F(c.margin),
        Cell::B(c.pass),
        Cell::B(c.informational),
    ]
}

pub fn cmd_appendix(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let rep = sweep(cfg.seed, cfg.points, cfg.c, cfg.mtp2_pairs)?;
    let mut table = Table::new(
        "appendix",
        &["d", "nu", "s", "z", "check", "lhs", "rhs", "margin", "pass", "informational"],
    );
    table.meta("mtp2_pairs", rep.mtp2_pairs);
    table.meta("mtp2_failures", rep.mtp2_failures);
    table.meta("pass", rep.pass);
    for p in &rep.points {
        for c in &p.checks {
            table.push(check_cells(p.d, p.nu, p.s, p.z, &c.name, c));
        }
        table.push(check_cells(p.d, p.nu, p.s, p.z, "psi-condition", &p.psi.check));
        let shifted = p.psi_in_range.s_min + p.s;
        table.push(check_cells(p.d, p.nu, shifted, p.z, "psi-condition", &p.psi_in_range.check));
    }
    let failure = (!rep.pass).then(|| {
        let names: Vec<String> = rep.checks().filter(|c| !c.pass).map(|c| c.name.clone()).collect();
        CliError::Verification(format!("{} failed checks, {} MTP2 failures: {}", names.len(), rep.mtp2_failures, names.join(", ")))
    });
    Ok(Outcome { table, failure })
}

/// Check groups run by `verify`, in order.
pub const VERIFY_GROUPS: [&str; 6] = ["squares", "heat", "appendix", "superharmonic", "rho", "invariant"];

struct VerifyRow {
    group: &'static str,
    check: String,
    value: f64,
    tolerance: f64,
    pass: bool,
}

fn verify_squares(cfg: &RunConfig) -> Result<Vec<VerifyRow>, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let d = rng.random_range(3..=10);
        let spec = ProblemSpec::new(
            d,
            rng.random_range(0.1..5.0),
            rng.random_range(0.1..5.0),
            rng.random_range(-1.0..=1.0),
        )?;
        let mut pt = || (0..d).map(|_| rng.random_range(-4.0..4.0)).collect::<Vec<f64>>();
        let (x, y, mu) = (pt(), pt(), pt());
        let (l, mut r) = completing_squares_sides(&spec, &x, &y, &mu)?;
        if cfg.inject_fault {
            r = -r;
        }
        worst = worst.max((l - r).abs() / l.abs());
    }
    let tol = 1e-12;
    Ok(vec![VerifyRow { group: "squares", check: "completing squares, 100 points".into(), value: worst, tolerance: tol, pass: worst <= tol }])
}

fn verify_heat(cfg: &RunConfig) -> Result<Vec<VerifyRow>, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let d = rng.random_range(3..=8);
        let m = Marginal::harmonic(d)?;
        let (u, t, v) = (rng.random_range(0.0..6.0), rng.random_range(0.05..2.0), rng.random_range(0.2..3.0));
        let smoothed = radial_expectation(&|r: f64| m.value(r * r, v).unwrap_or(f64::NAN), u, t, d, 1e-12)?.value;
        let exact = m.value(u * u, v + t * t)?;
        worst = worst.max((smoothed - exact).abs() / exact);
    }
    let tol = 1e-8;
    Ok(vec![VerifyRow { group: "heat", check: "heat semigroup, 20 points".into(), value: worst, tolerance: tol, pass: worst <= tol }])
}

fn verify_appendix(cfg: &RunConfig) -> Result<Vec<VerifyRow>, CliError> {
    let rep = sweep(cfg.seed, cfg.points, cfg.c, cfg.mtp2_pairs)?;
    let mut names: Vec<String> = Vec::new();
    for c in rep.checks() {
        if !names.contains(&c.name) {
            names.push(c.name.clone());
        }
    }
    let mut rows: Vec<VerifyRow> = names
        .into_iter()
        .map(|name| {
            let of_kind: Vec<&Check> = rep.checks().filter(|c| c.name == name).collect();
            let failed = of_kind.iter().filter(|c| !c.pass).count();
            VerifyRow {
                group: "appendix",
                check: format!("{name}, {} evaluations", of_kind.len()),
                value: failed as f64,
                tolerance: 0.0,
                pass: failed == 0,
            }
        })
        .collect();
    rows.push(VerifyRow {
        group: "appendix",
        check: format!("MTP2, {} pairs", rep.mtp2_pairs),
        value: rep.mtp2_failures as f64,
        tolerance: 0.0,
        pass: rep.mtp2_failures == 0,
    });
    Ok(rows)
}

fn verify_superharmonic() -> Result<Vec<VerifyRow>, CliError> {
    let (nu, c, d, v) = (2, 0.5, 4, 1.0);
    let limit = t_max(nu, c, v, d)?;
    let grid = default_r_grid(v);
    let mut worst = f64::NEG_INFINITY;
    for t in t_grid(limit, 10) {
        worst = worst.max(check_superharmonic_profile(d, v, nu, c, t, &grid, None)?.max_scaled);
    }
    let tol = alphapred_core::domination::SUPERHARMONIC_TOL;
    Ok(vec![VerifyRow {
        group: "superharmonic",
        check: "nu=2, c=1/2, d=4, v=1, 10 t in [0, t_max]".into(),
        value: worst,
        tolerance: tol,
        pass: worst <= tol,
    }])
}

fn verify_rho(cfg: &RunConfig) -> Result<Vec<VerifyRow>, CliError> {
    let spec = ProblemSpec::new(3, 1.0, 1.0, 0.0)?;
    let shape = harmonic_shape(&spec)?;
    let mut rows = Vec::new();
    for r in [0.0, 2.0] {
        let mu = along_e1(3, r);
        let rho = risk_difference_rho_oracle(&spec, &mu, &shape, cfg.tol)?.diff;
        let crn = risk_difference_crn(&spec, &mu, cfg.n, cfg.seed)?.diff;
        let budget = 3.0 * crn.error + rho.error;
        let gap = (rho.value - crn.value).abs();
        rows.push(VerifyRow {
            group: "rho",
            check: format!("rho oracle vs paired MC at |mu|={r}"),
            value: gap,
            tolerance: budget,
            pass: gap <= budget,
        });
    }
    Ok(rows)
}

fn verify_invariant(cfg: &RunConfig) -> Result<Vec<VerifyRow>, CliError> {
    let spec = ProblemSpec::new(3, 1.0, 1.0, 0.0)?;
    let exact = invariant_risk_closed_form(&spec, spec.v_y / spec.derived()?.gamma)?;
    let mut rows = Vec::new();
    for (i, r) in [0.0, 1.0, 10.0].into_iter().enumerate() {
        let q = RiskQuery::new(spec, along_e1(3, r), Candidate::BestInvariant, cfg.n, cfg.seed + i as u64)?;
        let est = risk_mc(&q)?;
        let z = est.z_score(exact).abs();
        rows.push(VerifyRow {
            group: "invariant",
            check: format!("constant risk at |mu|={r}, |z|"),
            value: z,
            tolerance: 3.0,
            pass: z <= 3.0,
        });
    }
    Ok(rows)
}

pub fn cmd_verify(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let groups: Vec<&str> = match &cfg.only {
        Some(list) => {
            for g in list {
                if !VERIFY_GROUPS.contains(&g.as_str()) {
                    return Err(CliError::Config(format!(
                        "--only: unknown group `{g}`; expected one of {}",
                        VERIFY_GROUPS.join(", ")
                    )));
                }
            }
            VERIFY_GROUPS.iter().copied().filter(|g| list.iter().any(|x| x == g)).collect()
        }
        None => VERIFY_GROUPS.to_vec(),
    };
    let mut rows = Vec::new();
    for g in &groups {
        rows.extend(match *g {
            "squares" => verify_squares(cfg)?,
            "heat" => verify_heat(cfg)?,
            "appendix" => verify_appendix(cfg)?,
            "superharmonic" => verify_superharmonic()?,
            "rho" => verify_rho(cfg)?,
            _ => verify_invariant(cfg)?,
        });
    }
    let mut table = Table::new("verify", &["group", "check", "value", "tolerance", "required", "pass"]);
    let failed: Vec<String> = rows.iter().filter(|r| !r.pass).map(|r| format!("{}: {}", r.group, r.check)).collect();
    table.meta("groups", groups.join(","));
    table.meta("pass", failed.is_empty());
    for r in rows {
        table.push(vec![
            Cell::S(r.group.into()),
            Cell::S(r.check),
            Cell::F(r.value),
            Cell::F(r.tolerance),
            Cell::B(true),
            Cell::B(r.pass),
        ]);
    }
    let failure = (!failed.is_empty()).then(|| CliError::Verification(failed.join("; ")));
    Ok(Outcome { table, failure })
}
