use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "chowfilter", version, about = "PQ and TDS learning under distribution shift")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Learn a classifier and selector on a scenario.
    PqRun(RunArgs),
    /// Accept or reject a test sample and report the error of accepted runs.
    TdsRun(RunArgs),
    /// Run the filter alone against a classifier learned from half the training sample.
    IcfRun(RunArgs),
    /// Run a grid of overrides times seeds and aggregate the results.
    BenchSweep(SweepArgs),
    /// Compare the exact hypercube oracles with Monte-Carlo estimates.
    OracleCheck(OracleArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Pq,
    Tds,
    Icf,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Pq => "pq",
            Mode::Tds => "tds",
            Mode::Icf => "icf",
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Scenario file (TOML).
    #[arg(long)]
    pub scenario: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub params: Params,
    /// Write (x, y) series files for plotting.
    #[arg(long)]
    pub emit_plot_data: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum)]
    pub mode: Mode,
    /// Axis `key=v1,v2,...`; repeat for a cross product. An axis without values empties the grid.
    #[arg(long)]
    pub grid: Vec<String>,
    /// Seeds per cell, counting up from `--seed`.
    #[arg(long, default_value_t = 1)]
    pub seeds: u64,
    /// Worker threads (default: number of processors).
    #[arg(long)]
    pub workers: Option<usize>,
    /// Abort on the first failed trial instead of recording it.
    #[arg(long)]
    pub fail_fast: bool,
    #[command(flatten)]
    pub params: Params,
    #[arg(long)]
    pub emit_plot_data: bool,
}

#[derive(Debug, Clone, Args)]
pub struct OracleArgs {
    /// Hypercube dimension, at most 20.
    #[arg(long, default_value_t = 10)]
    pub d: usize,
    /// Monte-Carlo sample size.
    #[arg(long, default_value_t = 20_000)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Overrides shared by every run. Unset values fall back to the defaults in [`Resolved`].
#[derive(Debug, Clone, Default, Args)]
pub struct Params {
    /// Run seed (default: the scenario's).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Target accuracy [default: 0.2].
    #[arg(long)]
    pub eps: Option<f64>,
    /// PQ rejection budget [default: 0.5].
    #[arg(long)]
    pub eta: Option<f64>,
    /// Failure probability, sizes the TDS holdout [default: 0.1].
    #[arg(long)]
    pub delta: Option<f64>,
    /// TDS tolerance for mass that may move [default: 0].
    #[arg(long)]
    pub theta: Option<f64>,
    /// Slack R > 1 (TDS and ICF modes). Unset, TDS derives it from theta and eps and ICF uses 2.
    #[arg(long = "slack-R")]
    pub slack_r: Option<f64>,
    /// Polynomial degree [default: 2].
    #[arg(long)]
    pub degree: Option<usize>,
    /// Hypercontractivity constant A >= 1, sets beta = 4(2A)^(2 degree) [default: 1].
    #[arg(long = "hyper-A")]
    pub hyper_a: Option<f64>,
    /// Second-moment bound (ICF mode only) [default: 1].
    #[arg(long)]
    pub beta: Option<f64>,
    /// Witness solver optimality tolerance [default: 1e-6].
    #[arg(long)]
    pub opt_tol: Option<f64>,
    /// Witness solver feasibility tolerance [default: 1e-8].
    #[arg(long)]
    pub feas_tol: Option<f64>,
    /// Override the scenario's training sample size.
    #[arg(long)]
    pub n_train: Option<usize>,
    /// Override the scenario's test sample size.
    #[arg(long)]
    pub n_test: Option<usize>,
    /// Override the number of fresh evaluation draws.
    #[arg(long)]
    pub n_fresh: Option<usize>,
    /// Fail when no valid threshold exists instead of stopping the filter early.
    #[arg(long)]
    pub strict: bool,
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value.trim().parse().map_err(|_| CliError::validation(format!("cannot parse `{value}` for {key}")))
}

impl Params {
    /// Applies one `key=value` override using the flag name as key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        match key {
            "seed" => self.seed = Some(parse(key, value)?),
            "eps" => self.eps = Some(parse(key, value)?),
            "eta" => self.eta = Some(parse(key, value)?),
            "delta" => self.delta = Some(parse(key, value)?),
            "theta" => self.theta = Some(parse(key, value)?),
            "slack-R" | "R" => self.slack_r = Some(parse(key, value)?),
            "degree" => self.degree = Some(parse(key, value)?),
            "hyper-A" | "A" => self.hyper_a = Some(parse(key, value)?),
            "beta" => self.beta = Some(parse(key, value)?),
            "opt-tol" => self.opt_tol = Some(parse(key, value)?),
            "feas-tol" => self.feas_tol = Some(parse(key, value)?),
            "n-train" => self.n_train = Some(parse(key, value)?),
            "n-test" => self.n_test = Some(parse(key, value)?),
            "n-fresh" => self.n_fresh = Some(parse(key, value)?),
            _ => return Err(CliError::validation(format!("unknown grid key `{key}`"))),
        }
        Ok(())
    }

    pub fn resolve(&self) -> Resolved {
        let d = Resolved::default();
        Resolved {
            eps: self.eps.unwrap_or(d.eps),
            eta: self.eta.unwrap_or(d.eta),
            delta: self.delta.unwrap_or(d.delta),
            theta: self.theta.unwrap_or(d.theta),
            slack_r: self.slack_r,
            degree: self.degree.unwrap_or(d.degree),
            hyper_a: self.hyper_a.unwrap_or(d.hyper_a),
            beta: self.beta,
            opt_tol: self.opt_tol.unwrap_or(d.opt_tol),
            feas_tol: self.feas_tol.unwrap_or(d.feas_tol),
            strict: self.strict,
        }
    }
}

/// Algorithm parameters after defaults are applied.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Resolved {
    pub eps: f64,
    pub eta: f64,
    pub delta: f64,
    pub theta: f64,
    /// `None` means the mode's default (`default_R` for TDS, 2 for the bare filter).
    pub slack_r: Option<f64>,
    pub degree: usize,
    pub hyper_a: f64,
    /// `None` means `4 (2A)^(2l)` for PQ and TDS, and 1 for the bare filter.
    pub beta: Option<f64>,
    pub opt_tol: f64,
    pub feas_tol: f64,
    pub strict: bool,
}

impl Default for Resolved {
    fn default() -> Self {
        Resolved {
            eps: 0.2,
            eta: 0.5,
            delta: 0.1,
            theta: 0.0,
            slack_r: None,
            degree: 2,
            hyper_a: 1.0,
            beta: None,
            opt_tol: chowfilter::cvxsub::DEFAULT_OPT_TOL,
            feas_tol: chowfilter::cvxsub::DEFAULT_FEAS_TOL,
            strict: false,
        }
    }
}
