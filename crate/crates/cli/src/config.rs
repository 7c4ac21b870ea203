//! Flag parsing, config files and their merge into one resolved run configuration.

use std::path::PathBuf;

use clap::{Parser, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Subcommand {
    /// Monte Carlo risk of one predictive density along `mu = r e_1`.
    Risk,
    /// Paired risk differences against the best invariant density, with a verdict.
    Dominate,
    /// Upper bound on `v_x / v_y` over a grid of alpha.
    Figure1,
    /// Superharmonicity of the smoothed harmonic-marginal power.
    Superharmonic,
    /// Hypercube identities, inequalities, psi-condition and MTP2 sweep.
    Appendix,
    /// Aggregated numerical checks; exit 4 if any required check fails.
    Verify,
}

impl Subcommand {
    pub fn label(&self) -> &'static str {
        match self {
            Subcommand::Risk => "risk",
            Subcommand::Dominate => "dominate",
            Subcommand::Figure1 => "figure1",
            Subcommand::Superharmonic => "superharmonic",
            Subcommand::Appendix => "appendix",
            Subcommand::Verify => "verify",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Density {
    /// Best invariant density.
    Uniform,
    /// Harmonic-prior Bayes density.
    Harmonic,
    /// Density induced by `f = 1`; coincides with `uniform`.
    Constant,
    /// Density induced by `(1 + r^2)^{-(d-2)/2}`.
    SoftHarmonic,
    /// Normal plug-in at the harmonic posterior mean.
    Plugin,
}

#[derive(Debug, Parser)]
#[command(name = "alphapred", version, about = "Predictive densities under alpha-divergence loss")]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Subcommand,

    /// Dimension.
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub vx: Option<f64>,
    #[arg(long)]
    pub vy: Option<f64>,
    /// Comma-separated radii `|mu|`.
    #[arg(long)]
    pub mu_grid: Option<String>,
    /// Monte Carlo samples; scientific notation such as `1e6` is accepted.
    #[arg(long)]
    pub n: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Quadrature tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Worker threads; defaults to the available cores.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// JSON file with any of the fields above, overridden by flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Comma-separated check groups for `verify`.
    #[arg(long)]
    pub only: Option<String>,
    #[arg(long, value_enum)]
    pub density: Option<Density>,
    /// Power `nu` for `superharmonic`.
    #[arg(long)]
    pub nu: Option<u64>,
    /// Exponent constant `c` for `superharmonic` and `appendix`.
    #[arg(long)]
    pub c: Option<f64>,
    /// Variance `v` for `superharmonic`.
    #[arg(long)]
    pub v: Option<f64>,
    /// Number of smoothing scales in `[0, t_max]` for `superharmonic`.
    #[arg(long)]
    pub t_count: Option<usize>,
    /// Random `(s, z)` points per `(d, nu)` for `appendix`.
    #[arg(long)]
    pub points: Option<usize>,
    /// Random MTP2 pairs for `appendix`; scientific notation accepted.
    #[arg(long)]
    pub mtp2_pairs: Option<String>,
    /// Test hook: flips a sign inside `verify`.
    #[arg(long, hide = true)]
    pub inject_fault: bool,
}

/// A sample count written as an integer, a float such as `1e6`, or a string.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum CountRepr {
    Int(u64),
    Float(f64),
    Text(String),
}

/// Radii written as a list or a comma-separated string.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum GridRepr {
    List(Vec<f64>),
    Text(String),
}

/// Contents of a `--config` file; every field is optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub d: Option<usize>,
    pub alpha: Option<f64>,
    pub vx: Option<f64>,
    pub vy: Option<f64>,
    pub mu_grid: Option<GridRepr>,
    pub n: Option<CountRepr>,
    pub seed: Option<u64>,
    pub tol: Option<f64>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub only: Option<String>,
    pub density: Option<Density>,
    pub nu: Option<u64>,
    pub c: Option<f64>,
    pub v: Option<f64>,
    pub t_count: Option<usize>,
    pub points: Option<usize>,
    pub mtp2_pairs: Option<CountRepr>,
}

/// The merged configuration; serialized into every output header.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Subcommand,
    pub d: Option<usize>,
    pub alpha: Option<f64>,
    pub vx: f64,
    pub vy: f64,
    pub mu_grid: Vec<f64>,
    pub n: u64,
    pub seed: u64,
    pub tol: f64,
    pub format: Format,
    pub only: Option<Vec<String>>,
    pub density: Density,
    pub nu: u64,
    pub c: f64,
    pub v: f64,
    pub t_count: usize,
    pub points: usize,
    pub mtp2_pairs: u64,
    #[serde(skip)]
    pub threads: Option<usize>,
    #[serde(skip)]
    pub out: Option<PathBuf>,
    #[serde(skip)]
    pub inject_fault: bool,
}

pub const DEFAULT_N: u64 = 100_000;
pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_TOL: f64 = 1e-7;

pub fn parse_count(name: &str, text: &str) -> Result<u64, CliError> {
    let t = text.trim();
    if let Ok(n) = t.parse::<u64>() {
        return Ok(n);
    }
    let x: f64 = t
        .parse()
        .map_err(|_| CliError::Config(format!("--{name}: cannot parse `{text}` as a count")))?;
    count_from_f64(name, x)
}

fn count_from_f64(name: &str, x: f64) -> Result<u64, CliError> {
    if x.is_finite() && x >= 0.0 && x.fract() == 0.0 && x <= 9.007_199_254_740_992e15 {
        Ok(x as u64)
    } else {
        Err(CliError::Config(format!("--{name}: `{x}` is not a nonnegative integer")))
    }
}

fn count_repr(name: &str, c: &CountRepr) -> Result<u64, CliError> {
    match c {
        CountRepr::Int(n) => Ok(*n),
        CountRepr::Float(x) => count_from_f64(name, *x),
        CountRepr::Text(s) => parse_count(name, s),
    }
}

pub fn parse_grid(text: &str) -> Result<Vec<f64>, CliError> {
    let grid = text
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Config(format!("--mu-grid: cannot parse `{p}`")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    check_grid(grid)
}

fn check_grid(grid: Vec<f64>) -> Result<Vec<f64>, CliError> {
    if grid.is_empty() || grid.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
        return Err(CliError::Config("--mu-grid: radii must be finite and nonnegative".into()));
    }
    Ok(grid)
}

fn split_list(text: &str) -> Vec<String> {
    text.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
}

impl RunConfig {
    /// Flags override the config file, which overrides the defaults.
    pub fn resolve(cli: &Cli) -> Result<Self, CliError> {
        let file = match &cli.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Config(format!("--config {}: {e}", path.display())))?;
                serde_json::from_str::<FileConfig>(&text)
                    .map_err(|e| CliError::Config(format!("--config {}: {e}", path.display())))?
            }
            None => FileConfig::default(),
        };

        let mu_grid = match (&cli.mu_grid, &file.mu_grid) {
            (Some(s), _) => parse_grid(s)?,
            (None, Some(GridRepr::Text(s))) => parse_grid(s)?,
            (None, Some(GridRepr::List(v))) => check_grid(v.clone())?,
            (None, None) => alphapred_core::domination::MU_GRID.to_vec(),
        };
        let n = match (&cli.n, &file.n) {
            (Some(s), _) => parse_count("n", s)?,
            (None, Some(c)) => count_repr("n", c)?,
            (None, None) => DEFAULT_N,
        };
        let mtp2_pairs = match (&cli.mtp2_pairs, &file.mtp2_pairs) {
            (Some(s), _) => parse_count("mtp2-pairs", s)?,
            (None, Some(c)) => count_repr("mtp2-pairs", c)?,
            (None, None) => 100_000,
        };
        let only = cli.only.as_deref().or(file.only.as_deref()).map(split_list);

        let cfg = RunConfig {
            command: cli.command,
            d: cli.d.or(file.d),
            alpha: cli.alpha.or(file.alpha),
            vx: cli.vx.or(file.vx).unwrap_or(1.0),
            vy: cli.vy.or(file.vy).unwrap_or(1.0),
            mu_grid,
            n,
            seed: cli.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
            tol: cli.tol.or(file.tol).unwrap_or(DEFAULT_TOL),
            format: cli.format.or(file.format).unwrap_or(Format::Csv),
            only,
            density: cli.density.or(file.density).unwrap_or(Density::Harmonic),
            nu: cli.nu.or(file.nu).unwrap_or(2),
            c: cli.c.or(file.c).unwrap_or(0.5),
            v: cli.v.or(file.v).unwrap_or(1.0),
            t_count: cli.t_count.or(file.t_count).unwrap_or(10),
            points: cli.points.or(file.points).unwrap_or(20),
            mtp2_pairs,
            threads: cli.threads.or(file.threads),
            out: cli.out.clone().or(file.out),
            inject_fault: cli.inject_fault,
        };
        if !(cfg.tol > 0.0 && cfg.tol < 1.0) {
            return Err(CliError::Config(format!("--tol must lie in (0, 1), got {}", cfg.tol)));
        }
        if cfg.threads == Some(0) {
            return Err(CliError::Config("--threads must be positive".into()));
        }
        Ok(cfg)
    }

    pub fn require_d(&self) -> Result<usize, CliError> {
        self.d.ok_or_else(|| CliError::Config("missing --d".into()))
    }

    pub fn require_alpha(&self) -> Result<f64, CliError> {
        self.alpha.ok_or_else(|| CliError::Config("missing --alpha".into()))
    }

    pub fn spec(&self) -> Result<alphapred_core::ProblemSpec, CliError> {
        Ok(alphapred_core::ProblemSpec::new(self.require_d()?, self.vx, self.vy, self.require_alpha()?)?)
    }
}
