use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use glosten_core::{AssetValue, YMode};
use serde::{Deserialize, Serialize};

/// Simulations, exact curves and bound checks for a Glosten-Milgrom market
/// with informed and noise traders.
///
/// Every run writes its outputs plus a `<name>.manifest.json` that
/// `glosten replay` can re-execute bit-identically.
///
/// Exit codes: 0 success, 1 check failed, 2 usage error, 3 I/O error.
#[derive(Debug, Parser)]
#[command(name = "glosten", version)]
pub struct Cli {
    /// Worker threads; results do not depend on this. Defaults to all cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Monte Carlo ensemble of trading games; per-step statistics as CSV.
    Simulate(SimulateArgs),
    /// Exact expected price, variance, payoff, gain and information per step.
    Exact(ExactArgs),
    /// Numerical checks; exits 1 if a check fails.
    #[command(subcommand)]
    Verify(Check),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Check {
    /// Scan the single-step entropic inequality over a (q, θ) grid.
    Inequality(InequalityArgs),
    /// Exact E[G_n] against T·I(Y; X_1..n) for every n up to --steps.
    Bound(BoundArgs),
    /// Asymptotic gain against T·H(Y) once the order flow has revealed Y.
    Corollary(CorollaryArgs),
    /// Fit the price-variance peak time against ν on log-log axes.
    Scaling(ScalingArgs),
    /// Gain-maximising ν for several horizons and its power law.
    OptimalNu(OptimalNuArgs),
    /// Payoff autocorrelation: variance excess and joint payoff moments.
    Autocorr(AutocorrArgs),
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ModelArgs {
    /// Fraction of informed traders ν, in [0, 1].
    #[arg(long, default_value_t = 0.2)]
    pub nu: f64,
    /// Prior probability θ₀ that the asset is worth 1, in [0, 1].
    #[arg(long, default_value_t = 0.5)]
    pub theta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct OutputArgs {
    /// Output directory (created if missing).
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
pub enum YChoice {
    #[value(name = "0")]
    #[serde(rename = "0")]
    Zero,
    #[value(name = "1")]
    #[serde(rename = "1")]
    One,
    #[serde(rename = "prior")]
    Prior,
}

impl YChoice {
    pub fn mode(self) -> YMode {
        match self {
            YChoice::Zero => YMode::Fixed(AssetValue::Zero),
            YChoice::One => YMode::Fixed(AssetValue::One),
            YChoice::Prior => YMode::Prior,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Orders per game.
    #[arg(long, default_value_t = 500)]
    pub steps: usize,
    /// Number of games.
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Asset value: fixed 0 or 1, or drawn from the prior per game.
    #[arg(long, value_enum, default_value_t = YChoice::Prior)]
    pub y: YChoice,
    /// Also write every trajectory to trajectories.csv.
    #[arg(long)]
    pub raw: bool,
    /// Memory cap in bytes for --raw.
    #[arg(long, default_value_t = 1 << 30)]
    pub memory_budget: usize,
    /// Per-step statistics as CSV or a single JSON document.
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ExactArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 500)]
    pub steps: usize,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct InequalityArgs {
    /// Grid points per axis.
    #[arg(long, default_value_t = 512)]
    pub grid: usize,
    /// Distance kept from q = 1/2, q = 1, θ = 0 and θ = 1.
    #[arg(long, default_value_t = 1e-9)]
    pub margin: f64,
    /// Allowed excess of the left side over the right side.
    #[arg(long, default_value_t = 1e-12)]
    pub tolerance: f64,
    /// `csv` adds a one-row summary next to the JSON report.
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct BoundArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 500)]
    pub steps: usize,
    /// Smallest allowed slack T·I - E[G].
    #[arg(long, default_value_t = 1e-10)]
    pub tolerance: f64,
    /// Also check the empirical mean gain over this many simulated games.
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// `csv` adds the per-step series next to the JSON report.
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct CorollaryArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Horizon; by default the first power of two (from 64) at which
    /// H(Y | X) < 1e-3 · H(Y).
    #[arg(long)]
    pub steps: Option<usize>,
    /// Upper limit for the horizon search.
    #[arg(long, default_value_t = 1 << 16)]
    pub max_steps: usize,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ScalingArgs {
    /// Comma-separated values of ν (at least three).
    #[arg(long, value_delimiter = ',', default_value = "0.4,0.2,0.1")]
    pub nus: Vec<f64>,
    #[arg(long, default_value_t = 0.5)]
    pub theta: f64,
    #[arg(long, default_value_t = -2.0, allow_hyphen_values = true)]
    pub expected_slope: f64,
    /// Allowed distance of the fitted slope from --expected-slope.
    #[arg(long, default_value_t = 0.3)]
    pub tolerance: f64,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct OptimalNuArgs {
    /// Comma-separated horizons τ.
    #[arg(long, value_delimiter = ',', default_value = "100,400,1600")]
    pub taus: Vec<usize>,
    #[arg(long, default_value_t = 0.5)]
    pub theta: f64,
    /// Log-spaced ν grid: lower end.
    #[arg(long, default_value_t = 0.005)]
    pub nu_min: f64,
    /// Log-spaced ν grid: upper end.
    #[arg(long, default_value_t = 0.9)]
    pub nu_max: f64,
    /// Log-spaced ν grid: number of points.
    #[arg(long, default_value_t = 120)]
    pub grid: usize,
    #[arg(long, default_value_t = -0.5, allow_hyphen_values = true)]
    pub expected_slope: f64,
    #[arg(long, default_value_t = 0.15)]
    pub tolerance: f64,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct AutocorrArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 200)]
    pub steps: usize,
    #[arg(long, default_value_t = 100_000)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Joint moments E[μ_n μ_(n-lag)] to compare, as comma-separated `n:lag`.
    #[arg(long, value_delimiter = ',', default_value = "10:1,10:9,200:1")]
    pub pairs: Vec<String>,
    /// Required significance of the variance excess, in standard errors.
    #[arg(long, default_value_t = 5.0)]
    pub min_sigma: f64,
    /// Allowed exact-vs-MC distance for joint moments, in standard errors.
    #[arg(long, default_value_t = 3.0)]
    pub max_z: f64,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ReplayArgs {
    /// Manifest written by an earlier run.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Write outputs here instead of next to the manifest.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Command {
    pub fn output_mut(&mut self) -> Option<&mut OutputArgs> {
        Some(match self {
            Command::Simulate(a) => &mut a.output,
            Command::Exact(a) => &mut a.output,
            Command::Verify(check) => match check {
                Check::Inequality(a) => &mut a.output,
                Check::Bound(a) => &mut a.output,
                Check::Corollary(a) => &mut a.output,
                Check::Scaling(a) => &mut a.output,
                Check::OptimalNu(a) => &mut a.output,
                Check::Autocorr(a) => &mut a.output,
            },
            Command::Replay(_) => return None,
        })
    }

    /// File stem shared by the outputs and the manifest.
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Exact(_) => "exact",
            Command::Verify(check) => match check {
                Check::Inequality(_) => "verify-inequality",
                Check::Bound(_) => "verify-bound",
                Check::Corollary(_) => "verify-corollary",
                Check::Scaling(_) => "verify-scaling",
                Check::OptimalNu(_) => "verify-optimal-nu",
                Check::Autocorr(_) => "verify-autocorr",
            },
            Command::Replay(_) => "replay",
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            Command::Simulate(a) => Some(a.seed),
            Command::Verify(Check::Bound(a)) if a.trials.is_some() => Some(a.seed),
            Command::Verify(Check::Autocorr(a)) => Some(a.seed),
            _ => None,
        }
    }
}

/// Parses `n:lag`.
pub fn parse_pair(s: &str) -> Result<(usize, usize), String> {
    let (n, lag) = s
        .split_once(':')
        .ok_or_else(|| format!("expected n:lag, got {s:?}"))?;
    let n = n.trim().parse().map_err(|_| format!("bad step in {s:?}"))?;
    let lag = lag.trim().parse().map_err(|_| format!("bad lag in {s:?}"))?;
    Ok((n, lag))
}
