//! Seeded Monte Carlo simulation of order flows, beliefs and payoffs.
//!
//! Each trial draws from its own ChaCha8 stream (`seed`, stream = trial
//! index), and trials are folded in fixed-size chunks merged in index order,
//! so results are bit-identical for any rayon pool size.

use std::io::{self, Write};
use std::ops::Range;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::mutual_info_direct_series;
use crate::model::{
    noise_step_payoff, posterior_update, realized_step_payoff, AssetValue, ModelParams,
    Order,
};

const CHUNK: usize = 256;

/// How the asset value is chosen for each trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum YMode {
    Fixed(AssetValue),
    Prior,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub params: ModelParams,
    pub horizon: usize,
    pub trials: usize,
    pub seed: u64,
    pub y_mode: YMode,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        Ok(())
    }
}

/// One simulated game. Index `i` holds step `i + 1`; `beliefs[i]` is the
/// posterior after that step's order.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub y: AssetValue,
    pub orders: Vec<Order>,
    pub informed: Vec<bool>,
    pub beliefs: Vec<f64>,
    pub payoffs: Vec<f64>,
    pub gains: Vec<f64>,
    pub noise_payoffs: Vec<f64>,
    pub maker_payoffs: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.orders.len()
    }

    pub fn is_empty(&self) -> bool {
        self.orders.is_empty()
    }

    pub fn final_gain(&self) -> f64 {
        self.gains.last().copied().unwrap_or(0.0)
    }
}

fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

/// Plays one game of `config.horizon` steps.
pub fn simulate_trial(config: &SimConfig, trial: usize) -> Trajectory {
    let params = &config.params;
    let mut rng = trial_rng(config.seed, trial);
    let y = match config.y_mode {
        YMode::Fixed(y) => y,
        YMode::Prior => {
            if rng.random::<f64>() < params.theta0() {
                AssetValue::One
            } else {
                AssetValue::Zero
            }
        }
    };
    let n = config.horizon;
    let mut traj = Trajectory {
        y,
        orders: Vec::with_capacity(n),
        informed: Vec::with_capacity(n),
        beliefs: Vec::with_capacity(n),
        payoffs: Vec::with_capacity(n),
        gains: Vec::with_capacity(n),
        noise_payoffs: Vec::with_capacity(n),
        maker_payoffs: Vec::with_capacity(n),
    };
    let mut belief = params.prior();
    let mut gain = 0.0;
    for _ in 0..n {
        let informed = rng.random::<f64>() < params.nu();
        let order = if informed {
            y.informed_order()
        } else if rng.random::<bool>() {
            Order::Buy
        } else {
            Order::Sell
        };
        let payoff = realized_step_payoff(belief, y, informed, params);
        let noise = if informed {
            0.0
        } else {
            noise_step_payoff(belief, y, order, params)
        };
        gain += payoff;
        belief = posterior_update(belief, order, params);

        traj.orders.push(order);
        traj.informed.push(informed);
        traj.beliefs.push(belief.theta());
        traj.payoffs.push(payoff);
        traj.gains.push(gain);
        traj.noise_payoffs.push(noise);
        traj.maker_payoffs.push(-(payoff + noise));
    }
    traj
}

/// Streaming mean and variance (Welford), mergeable with Chan's formula.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunningStats {
    count: u64,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &RunningStats) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n_a = self.count as f64;
        let n_b = other.count as f64;
        let n = n_a + n_b;
        let delta = other.mean - self.mean;
        self.mean += delta * n_b / n;
        self.m2 += other.m2 + delta * delta * n_a * n_b / n;
        self.count += other.count;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn moments(&self) -> Moments {
        let variance = self.variance();
        Moments {
            mean: self.mean,
            variance,
            std_error: (variance / self.count.max(1) as f64).sqrt(),
        }
    }
}

/// Empirical mean, variance and standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub variance: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `bins + 1` edges.
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    /// Fixed-width bins over `[0, max(values)]`.
    pub fn fixed_width(values: &[f64], bins: usize) -> Self {
        let bins = bins.max(1);
        let hi = values.iter().copied().fold(0.0f64, f64::max);
        let width = hi / bins as f64;
        let edges = (0..=bins).map(|b| b as f64 * width).collect();
        let mut counts = vec![0u64; bins];
        for &v in values {
            let bin = if width > 0.0 {
                ((v / width) as usize).min(bins - 1)
            } else {
                0
            };
            counts[bin] += 1;
        }
        Self { edges, counts }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Per-step statistics across all trials (index `i` is step `i + 1`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub horizon: usize,
    pub trials: usize,
    pub beliefs: Vec<Moments>,
    pub payoffs: Vec<Moments>,
    pub gains: Vec<Moments>,
    pub final_gain_histogram: Histogram,
}

pub const HISTOGRAM_BINS: usize = 50;

/// Folds `observe` over the trials in `range`, chunk by chunk, merging
/// chunk accumulators in ascending order.
fn fold_trials<A, I, O, M>(config: &SimConfig, range: Range<usize>, init: I, observe: O, merge: M) -> A
where
    A: Send,
    I: Fn() -> A + Sync,
    O: Fn(&mut A, usize, &Trajectory) + Sync,
    M: Fn(&mut A, A),
{
    let starts: Vec<usize> = range.clone().step_by(CHUNK).collect();
    let partials: Vec<A> = starts
        .par_iter()
        .map(|&start| {
            let mut acc = init();
            for trial in start..(start + CHUNK).min(range.end) {
                let traj = simulate_trial(config, trial);
                observe(&mut acc, trial, &traj);
            }
            acc
        })
        .collect();
    let mut total = init();
    for part in partials {
        merge(&mut total, part);
    }
    total
}

struct StepAccumulator {
    beliefs: Vec<RunningStats>,
    payoffs: Vec<RunningStats>,
    gains: Vec<RunningStats>,
}

impl StepAccumulator {
    fn new(horizon: usize) -> Self {
        Self {
            beliefs: vec![RunningStats::default(); horizon],
            payoffs: vec![RunningStats::default(); horizon],
            gains: vec![RunningStats::default(); horizon],
        }
    }

    fn observe(&mut self, traj: &Trajectory) {
        for i in 0..traj.len() {
            self.beliefs[i].push(traj.beliefs[i]);
            self.payoffs[i].push(traj.payoffs[i]);
            self.gains[i].push(traj.gains[i]);
        }
    }

    fn merge(&mut self, other: &StepAccumulator) {
        let pairs = [
            (&mut self.beliefs, &other.beliefs),
            (&mut self.payoffs, &other.payoffs),
            (&mut self.gains, &other.gains),
        ];
        for (mine, theirs) in pairs {
            for (a, b) in mine.iter_mut().zip(theirs) {
                a.merge(b);
            }
        }
    }
}

/// Runs the ensemble and returns per-step statistics.
pub fn simulate(config: &SimConfig) -> Result<EnsembleStats> {
    config.validate()?;
    let horizon = config.horizon;
    let (acc, finals) = fold_trials(
        config,
        0..config.trials,
        || (StepAccumulator::new(horizon), Vec::new()),
        |(acc, finals), _, traj| {
            acc.observe(traj);
            finals.push(traj.final_gain());
        },
        |(acc, finals), (other, other_finals)| {
            acc.merge(&other);
            finals.extend(other_finals);
        },
    );
    Ok(EnsembleStats {
        horizon,
        trials: config.trials,
        beliefs: acc.beliefs.iter().map(RunningStats::moments).collect(),
        payoffs: acc.payoffs.iter().map(RunningStats::moments).collect(),
        gains: acc.gains.iter().map(RunningStats::moments).collect(),
        final_gain_histogram: Histogram::fixed_width(&finals, HISTOGRAM_BINS),
    })
}

/// Approximate bytes held by raw trajectories for one configuration.
pub fn raw_export_size(config: &SimConfig) -> usize {
    let per_step = std::mem::size_of::<Order>()
        + std::mem::size_of::<bool>()
        + 5 * std::mem::size_of::<f64>();
    config.trials.saturating_mul(config.horizon).saturating_mul(per_step)
}

/// Runs the ensemble and also keeps every trajectory, provided they fit in
/// `memory_budget` bytes.
pub fn simulate_with_trajectories(
    config: &SimConfig,
    memory_budget: usize,
) -> Result<(EnsembleStats, Vec<Trajectory>)> {
    config.validate()?;
    let required = raw_export_size(config);
    if required > memory_budget {
        return Err(Error::MemoryBudget {
            required,
            budget: memory_budget,
        });
    }
    let stats = simulate(config)?;
    let trajectories = (0..config.trials)
        .into_par_iter()
        .map(|trial| simulate_trial(config, trial))
        .collect();
    Ok((stats, trajectories))
}

pub const TRAJECTORY_CSV_HEADER: &str = "trial,step,y,order,belief,payoff,gain";

/// Writes one row per (trial, step). `order` is 1 for a buy, 0 for a sell.
pub fn write_trajectories_csv<W: Write>(mut out: W, trajectories: &[Trajectory]) -> io::Result<()> {
    writeln!(out, "{TRAJECTORY_CSV_HEADER}")?;
    for (trial, traj) in trajectories.iter().enumerate() {
        for i in 0..traj.len() {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                trial,
                i + 1,
                traj.y.bit(),
                traj.orders[i].bit(),
                format_f64(traj.beliefs[i]),
                format_f64(traj.payoffs[i]),
                format_f64(traj.gains[i]),
            )?;
        }
    }
    Ok(())
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn format_f64(x: f64) -> String {
    if x == 0.0 {
        // Keeps -0.0 and 0.0 byte-identical.
        "0".to_string()
    } else if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

/// Empirical mean gain against `T · I(Y; X_{1:n})` at one step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundCheckStep {
    pub step: usize,
    pub mean_gain: f64,
    pub std_error: f64,
    pub bound: f64,
    pub slack: f64,
    /// Fraction of trajectories whose gain exceeds the bound at this step.
    pub violation_fraction: f64,
}

/// Compares the empirical mean gain with the information bound at every
/// step, and counts the individual trajectories that exceed it.
pub fn empirical_bound_check(config: &SimConfig) -> Result<Vec<BoundCheckStep>> {
    config.validate()?;
    let params = &config.params;
    if params.nu() == 0.0 {
        return Err(Error::Config("bound check needs nu > 0 (T is infinite at nu = 0)".into()));
    }
    let horizon = config.horizon;
    let temperature = params.temperature();
    let info = mutual_info_direct_series(horizon, params);
    let bound: Vec<f64> = (1..=horizon).map(|n| temperature * info.at(n)).collect();
    let (stats, exceed) = fold_trials(
        config,
        0..config.trials,
        || (vec![RunningStats::default(); horizon], vec![0u64; horizon]),
        |(stats, exceed), _, traj| {
            for i in 0..horizon {
                stats[i].push(traj.gains[i]);
                if traj.gains[i] > bound[i] {
                    exceed[i] += 1;
                }
            }
        },
        |(stats, exceed), (s, e)| {
            for i in 0..horizon {
                stats[i].merge(&s[i]);
                exceed[i] += e[i];
            }
        },
    );
    Ok((0..horizon)
        .map(|i| {
            let m = stats[i].moments();
            BoundCheckStep {
                step: i + 1,
                mean_gain: m.mean,
                std_error: m.std_error,
                bound: bound[i],
                slack: bound[i] - m.mean,
                violation_fraction: exceed[i] as f64 / config.trials as f64,
            }
        })
        .collect())
}

/// `V[G_n]` against `Σ_{i<=n} V[μ_i]` at one step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceDecomposition {
    pub step: usize,
    pub gain_variance: f64,
    pub payoff_variance_sum: f64,
    pub excess: f64,
    /// Batch-means standard error of `excess`.
    pub excess_std_error: f64,
}

pub const DECOMPOSITION_BATCHES: usize = 50;

fn decomposition_from(gains: &[RunningStats], payoffs: &[RunningStats]) -> Vec<(f64, f64)> {
    let mut running = 0.0;
    gains
        .iter()
        .zip(payoffs)
        .map(|(g, p)| {
            running += p.variance();
            (g.variance(), running)
        })
        .collect()
}

/// Splits `V[G_n]` into the sum of per-step payoff variances plus the excess
/// due to payoff autocorrelation. The excess standard error comes from
/// [`DECOMPOSITION_BATCHES`] contiguous batches of trials.
pub fn gain_variance_decomposition(config: &SimConfig) -> Result<Vec<VarianceDecomposition>> {
    config.validate()?;
    if config.trials < 100 {
        return Err(Error::Config("variance decomposition needs at least 100 trials".into()));
    }
    let horizon = config.horizon;
    let batches = DECOMPOSITION_BATCHES;
    let per_batch = config.trials / batches;
    let mut total_gains = vec![RunningStats::default(); horizon];
    let mut total_payoffs = vec![RunningStats::default(); horizon];
    let mut batch_excess = vec![RunningStats::default(); horizon];
    for b in 0..batches {
        let start = b * per_batch;
        let end = if b + 1 == batches { config.trials } else { start + per_batch };
        let (gains, payoffs) = fold_trials(
            config,
            start..end,
            || (vec![RunningStats::default(); horizon], vec![RunningStats::default(); horizon]),
            |(gains, payoffs), _, traj| {
                for i in 0..horizon {
                    gains[i].push(traj.gains[i]);
                    payoffs[i].push(traj.payoffs[i]);
                }
            },
            |(gains, payoffs), (g, p)| {
                for i in 0..horizon {
                    gains[i].merge(&g[i]);
                    payoffs[i].merge(&p[i]);
                }
            },
        );
        for (i, (gv, pv)) in decomposition_from(&gains, &payoffs).into_iter().enumerate() {
            batch_excess[i].push(gv - pv);
        }
        for i in 0..horizon {
            total_gains[i].merge(&gains[i]);
            total_payoffs[i].merge(&payoffs[i]);
        }
    }
    Ok(decomposition_from(&total_gains, &total_payoffs)
        .into_iter()
        .enumerate()
        .map(|(i, (gain_variance, payoff_variance_sum))| VarianceDecomposition {
            step: i + 1,
            gain_variance,
            payoff_variance_sum,
            excess: gain_variance - payoff_variance_sum,
            excess_std_error: (batch_excess[i].variance() / batches as f64).sqrt(),
        })
        .collect())
}

/// Fraction of trajectories whose final gain is strictly above `threshold`.
pub fn final_gain_exceedance(config: &SimConfig, threshold: f64) -> Result<f64> {
    config.validate()?;
    let count = fold_trials(
        config,
        0..config.trials,
        || 0u64,
        |count, _, traj| {
            if traj.final_gain() > threshold {
                *count += 1;
            }
        },
        |count, other| *count += other,
    );
    Ok(count as f64 / config.trials as f64)
}

/// Monte Carlo estimate of `E[μ_n μ_{n-lag}]` with its standard error.
pub fn payoff_product_estimate(config: &SimConfig, n: usize, lag: usize) -> Result<Moments> {
    Ok(payoff_product_estimates(config, &[(n, lag)])?[0])
}

/// [`payoff_product_estimate`] for several `(n, lag)` pairs from one pass
/// over the trials.
pub fn payoff_product_estimates(config: &SimConfig, pairs: &[(usize, usize)]) -> Result<Vec<Moments>> {
    config.validate()?;
    for &(n, lag) in pairs {
        if lag == 0 || lag >= n {
            return Err(Error::Lag { step: n, lag });
        }
        if n > config.horizon {
            return Err(Error::Config(format!("step {n} is beyond the horizon {}", config.horizon)));
        }
    }
    let stats = fold_trials(
        config,
        0..config.trials,
        || vec![RunningStats::default(); pairs.len()],
        |acc, _, traj| {
            for (stats, &(n, lag)) in acc.iter_mut().zip(pairs) {
                stats.push(traj.payoffs[n - 1] * traj.payoffs[n - lag - 1]);
            }
        },
        |acc, other| {
            for (a, b) in acc.iter_mut().zip(&other) {
                a.merge(b);
            }
        },
    );
    Ok(stats.iter().map(RunningStats::moments).collect())
}
