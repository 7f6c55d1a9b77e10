//! Exact expectations over the binomial law of the buy count.
//!
//! Conditioned on `Y = y`, the buy count after `n` orders is
//! `Binomial(n, 1 - q + (2q-1)y)` and the belief is `L_q^{2k-n}[θ₀]`, so every
//! price, payoff and information statistic is a finite binomial-weighted sum.
//!
//! Single-step evaluations (`expected_price`, `conditional_entropy`, ...)
//! use the saddle-point PMF and weight-sorted compensated sums. The
//! `*_series` functions walk the binomial law forward one order at a time,
//! which is much cheaper when every step up to a horizon is needed.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::belief_map::{buy_probability, logistic, MapOrbit};
use crate::binomial;
use crate::entropy::{binary_entropy, entropy_gain};
use crate::error::{Error, Result};
use crate::model::{AssetValue, Belief, ModelParams};
use crate::sum::{weighted_sum, CompensatedSum};

/// Mean and variance of the price at one step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepMoments {
    pub step: usize,
    pub mean: f64,
    pub variance: f64,
}

/// `I(Y; X_{1:n})` for `n = 0..=N`, in nats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MutualInfoSeries {
    pub values: Vec<f64>,
}

impl MutualInfoSeries {
    pub fn horizon(&self) -> usize {
        self.values.len().saturating_sub(1)
    }

    pub fn at(&self, n: usize) -> f64 {
        self.values[n]
    }

    /// `I(Y; X_n | X_{1:n-1})` for `n >= 1`.
    pub fn increment(&self, n: usize) -> f64 {
        self.values[n] - self.values[n - 1]
    }
}

fn orbit(params: &ModelParams) -> MapOrbit {
    MapOrbit::new(params.theta0(), params.q())
}

fn pmf(n: usize, y: AssetValue, params: &ModelParams) -> Vec<f64> {
    binomial::pmf_vec(n as u64, buy_probability(y, params.q()))
}

#[inline]
fn disp(k: usize, n: usize) -> i64 {
    2 * k as i64 - n as i64
}

/// No informed flow can ever pay off.
fn payoffs_vanish(params: &ModelParams) -> bool {
    params.is_degenerate_prior() || params.nu() == 0.0 || params.nu() == 1.0
}

/// `E[θ_n | Y = y] = Σ_k P(k | y) L_q^{2k-n}[θ₀]`.
pub fn expected_price(n: usize, y: AssetValue, params: &ModelParams) -> f64 {
    if params.is_degenerate_prior() || params.nu() == 0.0 {
        return params.theta0();
    }
    let orbit = orbit(params);
    weighted_sum(&pmf(n, y, params), |k| orbit.price(disp(k, n)))
}

/// Mean and variance of `θ_n` given `Y = y`, both over the same binomial law.
pub fn price_moments(n: usize, y: AssetValue, params: &ModelParams) -> StepMoments {
    if params.is_degenerate_prior() || params.nu() == 0.0 {
        return StepMoments {
            step: n,
            mean: params.theta0(),
            variance: 0.0,
        };
    }
    let orbit = orbit(params);
    let weights = pmf(n, y, params);
    let mean = weighted_sum(&weights, |k| orbit.price(disp(k, n)));
    let variance = weighted_sum(&weights, |k| {
        let dev = orbit.price(disp(k, n)) - mean;
        dev * dev
    });
    StepMoments {
        step: n,
        mean,
        variance: variance.max(0.0),
    }
}

/// `V[θ_n | Y = y]`.
pub fn price_variance(n: usize, y: AssetValue, params: &ModelParams) -> f64 {
    price_moments(n, y, params).variance
}

/// The estimator obtained by substituting `E[k | Y=1] = nq` for the buy
/// count, `L_q^{(2q-1)n}[θ₀]`. It is not the expected price.
pub fn naive_price_estimate(n: usize, params: &ModelParams) -> f64 {
    if params.is_degenerate_prior() {
        return params.theta0();
    }
    let exponent = (2.0 * params.q() - 1.0) * n as f64;
    let origin = crate::belief_map::log_odds(params.theta0());
    logistic(origin + exponent * params.log_odds_step())
}

/// Unconditional `E[μ_i]` for `i >= 1`, from the quotes:
/// `(2q-1)[(1-θ) Σ P(k|0) b_i(k) + θ Σ P(k|1)(1 - a_i(k))]`.
pub fn expected_payoff_exact(i: usize, params: &ModelParams) -> Result<f64> {
    let history = step_history(i)?;
    if payoffs_vanish(params) {
        return Ok(0.0);
    }
    let orbit = orbit(params);
    let theta = params.theta0();
    let bids = weighted_sum(&pmf(history, AssetValue::Zero, params), |k| {
        orbit.price(disp(k, history) - 1)
    });
    let asks = weighted_sum(&pmf(history, AssetValue::One, params), |k| {
        orbit.complement(disp(k, history) + 1)
    });
    Ok(params.nu() * ((1.0 - theta) * bids + theta * asks))
}

/// Spread posted at step `h + 1` after `k` buys among `h` orders:
/// `(2q-1)/(1-q)² · L^{d-1}(1 - L^{d+1})`.
fn spread_after(orbit: &MapOrbit, q: f64, k: usize, h: usize) -> f64 {
    let d = disp(k, h);
    (2.0 * q - 1.0) / ((1.0 - q) * (1.0 - q)) * orbit.price(d - 1) * orbit.complement(d + 1)
}

/// `E[μ_i]` as `(1-q)` times the expected spread under the prior mixture.
pub fn expected_payoff_via_spread(i: usize, params: &ModelParams) -> Result<f64> {
    let history = step_history(i)?;
    if payoffs_vanish(params) {
        return Ok(0.0);
    }
    let q = params.q();
    let theta = params.theta0();
    let orbit = orbit(params);
    let one = pmf(history, AssetValue::One, params);
    let zero = pmf(history, AssetValue::Zero, params);
    let mix: Vec<f64> = one
        .iter()
        .zip(&zero)
        .map(|(a, b)| theta * a + (1.0 - theta) * b)
        .collect();
    Ok((1.0 - q) * weighted_sum(&mix, |k| spread_after(&orbit, q, k, history)))
}

fn step_history(i: usize) -> Result<usize> {
    if i == 0 {
        return Err(Error::Domain {
            name: "step",
            value: 0.0,
            domain: "i >= 1",
        });
    }
    Ok(i - 1)
}

/// `H(Y | X_{1:n})`.
pub fn conditional_entropy(n: usize, params: &ModelParams) -> f64 {
    if params.is_degenerate_prior() {
        return 0.0;
    }
    if params.nu() == 0.0 || n == 0 {
        return params.prior_entropy();
    }
    let theta = params.theta0();
    let orbit = orbit(params);
    let given_one = weighted_sum(&pmf(n, AssetValue::One, params), |k| {
        -orbit.ln_price(disp(k, n))
    });
    let given_zero = weighted_sum(&pmf(n, AssetValue::Zero, params), |k| {
        -orbit.ln_complement(disp(k, n))
    });
    theta * given_one + (1.0 - theta) * given_zero
}

/// `I(Y; X_{1:n}) = H(Y) - H(Y | X_{1:n})`.
pub fn mutual_info_direct(n: usize, params: &ModelParams) -> f64 {
    (params.prior_entropy() - conditional_entropy(n, params)).max(0.0)
}

/// `I(Y; X_{i+1} | X_{1:i})`, averaging the stochastic kernel
/// `h(q L^{d}/L^{d+1}) - h(q)` over the unconditional buy-count law written
/// as `θ P(k | Y=1) / L^{d}`.
pub fn step_information(i: usize, params: &ModelParams) -> f64 {
    if params.is_degenerate_prior() || params.nu() == 0.0 {
        return 0.0;
    }
    if params.nu() == 1.0 {
        // The first order reveals Y.
        return if i == 0 { params.prior_entropy() } else { 0.0 };
    }
    let q = params.q();
    let orbit = orbit(params);
    let ln_theta = params.theta0().ln();
    let h_q = binary_entropy(q);
    let ln_one = binomial::ln_pmf_vec(i as u64, q);
    let weights: Vec<f64> = ln_one
        .iter()
        .enumerate()
        .map(|(k, lp)| (ln_theta + lp - orbit.ln_price(disp(k, i))).exp())
        .collect();
    weighted_sum(&weights, |k| {
        let d = disp(k, i);
        let z = q * (orbit.ln_price(d) - orbit.ln_price(d + 1)).exp();
        binary_entropy(z) - h_q
    })
}

/// `Σ_{i=1}^n I(Y; X_i | X_{1:i-1})`.
pub fn mutual_info_chain(n: usize, params: &ModelParams) -> f64 {
    let steps: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| step_information(i, params))
        .collect();
    steps.into_iter().collect::<CompensatedSum>().value()
}

/// `I(Y; X_n | x_{1:n-1}) = h(z) - h(q)` at the current belief, with
/// `z = qθ + (1-q)(1-θ)`.
pub fn single_step_mutual_info(belief: Belief, params: &ModelParams) -> f64 {
    entropy_gain(params.q(), belief.theta())
}

/// The same quantity as the explicit sum over the four `(x, y)` outcomes of
/// `L_xy p(y) ln(L_xy / p(x))`.
pub fn single_step_mutual_info_terms(belief: Belief, params: &ModelParams) -> f64 {
    let theta = belief.theta();
    let nu = params.nu();
    let (hi, lo) = (1.0 + nu, 1.0 - nu);
    let sell_mass = hi * (1.0 - theta) + lo * theta;
    let buy_mass = lo * (1.0 - theta) + hi * theta;
    let term = |coef: f64, num: f64, den: f64| {
        if coef == 0.0 || num == 0.0 {
            0.0
        } else {
            coef * (num / den).ln()
        }
    };
    term(hi / 2.0 * (1.0 - theta), hi, sell_mass)
        + term(lo / 2.0 * theta, lo, sell_mass)
        + term(lo / 2.0 * (1.0 - theta), lo, buy_mass)
        + term(hi / 2.0 * theta, hi, buy_mass)
}

/// Binomial law of the buy count, advanced one order at a time.
struct BinomialLadder {
    p: f64,
    probs: Vec<f64>,
}

impl BinomialLadder {
    fn new(p: f64) -> Self {
        Self { p, probs: vec![1.0] }
    }

    fn advance(&mut self) {
        let (p, r) = (self.p, 1.0 - self.p);
        self.probs.push(0.0);
        for k in (1..self.probs.len()).rev() {
            self.probs[k] = self.probs[k] * r + self.probs[k - 1] * p;
        }
        self.probs[0] *= r;
    }
}

/// Dense table of `L_q^d[θ₀]` and `1 - L_q^d[θ₀]` for `|d| <= reach`.
struct OrbitTable {
    reach: i64,
    price: Vec<f64>,
    complement: Vec<f64>,
}

impl OrbitTable {
    fn new(params: &ModelParams, reach: usize) -> Self {
        let orbit = orbit(params);
        let reach = reach as i64;
        let price = (-reach..=reach).map(|d| orbit.price(d)).collect();
        let complement = (-reach..=reach).map(|d| orbit.complement(d)).collect();
        Self {
            reach,
            price,
            complement,
        }
    }

    #[inline]
    fn price(&self, d: i64) -> f64 {
        self.price[(d + self.reach) as usize]
    }

    #[inline]
    fn complement(&self, d: i64) -> f64 {
        self.complement[(d + self.reach) as usize]
    }
}

/// `E[μ_i]` for `i = 1..=horizon` (entry `i - 1`).
pub fn expected_payoff_series(horizon: usize, params: &ModelParams) -> Vec<f64> {
    if payoffs_vanish(params) {
        return vec![0.0; horizon];
    }
    let theta = params.theta0();
    let q = params.q();
    let table = OrbitTable::new(params, horizon + 1);
    let mut given_one = BinomialLadder::new(q);
    let mut given_zero = BinomialLadder::new(1.0 - q);
    let mut out = Vec::with_capacity(horizon);
    for history in 0..horizon {
        if history > 0 {
            given_one.advance();
            given_zero.advance();
        }
        let mut bids = CompensatedSum::new();
        let mut asks = CompensatedSum::new();
        for k in 0..=history {
            let d = disp(k, history);
            bids.add(given_zero.probs[k] * table.price(d - 1));
            asks.add(given_one.probs[k] * table.complement(d + 1));
        }
        out.push(params.nu() * ((1.0 - theta) * bids.value() + theta * asks.value()));
    }
    out
}

/// `E[G_n] = Σ_{i<=n} E[μ_i]` for `n = 0..=horizon`.
pub fn expected_gain_series(horizon: usize, params: &ModelParams) -> Vec<f64> {
    let mut acc = CompensatedSum::new();
    let mut out = Vec::with_capacity(horizon + 1);
    out.push(0.0);
    for payoff in expected_payoff_series(horizon, params) {
        acc.add(payoff);
        out.push(acc.value());
    }
    out
}

/// `I(Y; X_{1:n})` for `n = 0..=horizon` accumulated through the chain rule.
pub fn mutual_info_chain_series(horizon: usize, params: &ModelParams) -> MutualInfoSeries {
    let mut values = Vec::with_capacity(horizon + 1);
    values.push(0.0);
    if params.is_degenerate_prior() || params.nu() == 0.0 {
        values.resize(horizon + 1, 0.0);
        return MutualInfoSeries { values };
    }
    let mut acc = CompensatedSum::new();
    if params.nu() == 1.0 {
        for _ in 0..horizon {
            values.push(params.prior_entropy());
        }
        return MutualInfoSeries { values };
    }
    let q = params.q();
    let h_q = binary_entropy(q);
    let theta = params.theta0();
    let table = OrbitTable::new(params, horizon + 1);
    let mut given_one = BinomialLadder::new(q);
    let mut given_zero = BinomialLadder::new(1.0 - q);
    for i in 0..horizon {
        if i > 0 {
            given_one.advance();
            given_zero.advance();
        }
        let mut step = CompensatedSum::new();
        for k in 0..=i {
            let weight = theta * given_one.probs[k] + (1.0 - theta) * given_zero.probs[k];
            if weight == 0.0 {
                continue;
            }
            let d = disp(k, i);
            let z = q * table.price(d) + (1.0 - q) * table.complement(d);
            step.add(weight * (binary_entropy(z) - h_q));
        }
        acc.add(step.value());
        values.push(acc.value());
    }
    MutualInfoSeries { values }
}

/// `I(Y; X_{1:n})` for `n = 0..=horizon` from `H(Y) - H(Y | X_{1:n})`.
pub fn mutual_info_direct_series(horizon: usize, params: &ModelParams) -> MutualInfoSeries {
    let values = (0..=horizon)
        .into_par_iter()
        .map(|n| mutual_info_direct(n, params))
        .collect();
    MutualInfoSeries { values }
}

/// Price moments given `Y = y` for `n = 0..=horizon`.
pub fn price_moment_series(horizon: usize, y: AssetValue, params: &ModelParams) -> Vec<StepMoments> {
    if params.is_degenerate_prior() || params.nu() == 0.0 {
        return (0..=horizon)
            .map(|step| StepMoments {
                step,
                mean: params.theta0(),
                variance: 0.0,
            })
            .collect();
    }
    let table = OrbitTable::new(params, horizon);
    let mut law = BinomialLadder::new(buy_probability(y, params.q()));
    let mut out = Vec::with_capacity(horizon + 1);
    for n in 0..=horizon {
        if n > 0 {
            law.advance();
        }
        let mut mean = CompensatedSum::new();
        for (k, w) in law.probs.iter().enumerate() {
            mean.add(w * table.price(disp(k, n)));
        }
        let mean = mean.value();
        let mut var = CompensatedSum::new();
        for (k, w) in law.probs.iter().enumerate() {
            let dev = table.price(disp(k, n)) - mean;
            var.add(w * dev * dev);
        }
        out.push(StepMoments {
            step: n,
            mean,
            variance: var.value().max(0.0),
        });
    }
    out
}

fn check_lag(n: usize, lag: usize) -> Result<()> {
    if lag == 0 || lag >= n {
        return Err(Error::Lag { step: n, lag });
    }
    Ok(())
}

/// Exact joint moment `E[μ_n μ_{n-lag}]`.
///
/// The earlier payoff is nonzero only when the informed trader was drawn, in
/// which case its order equals `Y`; conditioning on that fixes one extra buy
/// (or sell) in the history seen by the later quote:
///
/// `E[μ_n μ_m | y] = ν² Σ_j P(j | y) π_y(θ_{m-1}(j)) Σ_l P(l | y) π_y(θ_{n-1}(j + y + l))`
///
/// with `m = n - lag`, `j` buys in the first `m - 1` orders, `l` buys in the
/// `lag - 1` orders between the two steps, and `π_y` the informed payoff
/// against the quote at that belief (`bid` for `y = 0`, `1 - ask` for `y = 1`).
/// The result mixes both values of `Y` by the prior.
pub fn payoff_joint_moment(n: usize, lag: usize, params: &ModelParams) -> Result<f64> {
    check_lag(n, lag)?;
    if payoffs_vanish(params) {
        return Ok(0.0);
    }
    let m = n - lag;
    let orbit = orbit(params);
    let pay = |y: AssetValue, d: i64| match y {
        AssetValue::Zero => orbit.price(d - 1),
        AssetValue::One => orbit.complement(d + 1),
    };
    let branch = |y: AssetValue| {
        let p = buy_probability(y, params.q());
        let before = binomial::pmf_vec((m - 1) as u64, p);
        let between = binomial::pmf_vec((lag - 1) as u64, p);
        let shift = y.bit() as usize;
        weighted_sum(&before, |j| {
            let early = pay(y, disp(j, m - 1));
            let late = weighted_sum(&between, |l| pay(y, disp(j + shift + l, n - 1)));
            early * late
        })
    };
    let theta = params.theta0();
    let nu = params.nu();
    Ok(nu * nu * (theta * branch(AssetValue::One) + (1.0 - theta) * branch(AssetValue::Zero)))
}

/// `Cov(μ_n, μ_{n-lag}) = E[μ_n μ_{n-lag}] - E[μ_n] E[μ_{n-lag}]`.
pub fn payoff_autocovariance(n: usize, lag: usize, params: &ModelParams) -> Result<f64> {
    let joint = payoff_joint_moment(n, lag, params)?;
    let late = expected_payoff_exact(n, params)?;
    let early = expected_payoff_exact(n - lag, params)?;
    Ok(joint - late * early)
}

/// The closed form that replaces both payoffs by their history-conditional
/// means `(1-q)s`:
/// `(1-q)² Σ_k Σ_j P(β_n = k | β_{n-i} = j) P(β_{n-i} = j) s_n(k) s_{n-i}(j)`,
/// with `s_t(k)` the spread quoted after `k` buys among `t` orders.
///
/// This drops the correlation between the earlier trader's type and its
/// order, so it differs from [`payoff_joint_moment`]; it is kept for
/// comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpreadProductMoment {
    /// The `Y = 1` branch, weights `q^k (1-q)^{n-k}`.
    pub given_one: f64,
    /// Both branches mixed by the prior.
    pub mixture: f64,
}

pub fn payoff_joint_moment_from_spreads(
    n: usize,
    lag: usize,
    params: &ModelParams,
) -> Result<SpreadProductMoment> {
    check_lag(n, lag)?;
    if payoffs_vanish(params) {
        return Ok(SpreadProductMoment {
            given_one: 0.0,
            mixture: 0.0,
        });
    }
    let q = params.q();
    let orbit = orbit(params);
    let m = n - lag;
    let branch = |y: AssetValue| {
        let p = buy_probability(y, q);
        let early = binomial::pmf_vec(m as u64, p);
        let between = binomial::pmf_vec(lag as u64, p);
        weighted_sum(&early, |j| {
            let s_early = spread_after(&orbit, q, j, m);
            let late = weighted_sum(&between, |l| spread_after(&orbit, q, j + l, n));
            s_early * late
        })
    };
    let scale = (1.0 - q) * (1.0 - q);
    let one = scale * branch(AssetValue::One);
    let zero = scale * branch(AssetValue::Zero);
    let theta = params.theta0();
    Ok(SpreadProductMoment {
        given_one: one,
        mixture: theta * one + (1.0 - theta) * zero,
    })
}
