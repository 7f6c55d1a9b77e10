//! Primitives of the sequential trading game: parameters, the order
//! likelihood, the market maker's Bayesian update, quotes and payoffs.
//!
//! At each step the market maker posts `bid = E[Y | history, sell]` and
//! `ask = E[Y | history, buy]`. A trader is then drawn: informed with
//! probability `ν` (buys iff `Y = 1`), otherwise a noise trader who buys or
//! sells with probability 1/2. Payoffs are booked against the quote posted
//! before the order arrives.

use serde::{Deserialize, Serialize};

use crate::error::{check_unit, Error, Result};

/// Prior `θ₀ = P(Y = 1)` and informed-trader fraction `ν`.
///
/// `q = (1 + ν) / 2`, the temperature and the convergence timescale are
/// derived on demand so there is a single source for every formula.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    theta0: f64,
    nu: f64,
}

impl ModelParams {
    pub fn new(theta0: f64, nu: f64) -> Result<Self> {
        check_unit("theta0", theta0)?;
        check_unit("nu", nu)?;
        Ok(Self { theta0, nu })
    }

    pub fn theta0(&self) -> f64 {
        self.theta0
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    /// Probability that the next order agrees with `Y`.
    pub fn q(&self) -> f64 {
        (1.0 + self.nu) / 2.0
    }

    /// `ln(q / (1-q))`, the log-odds increment of one buy order.
    pub fn log_odds_step(&self) -> f64 {
        2.0 * self.nu.atanh()
    }

    /// Effective temperature; `+∞` at `ν = 0` and `0` at `ν = 1`.
    pub fn temperature(&self) -> f64 {
        if self.nu == 0.0 {
            f64::INFINITY
        } else if self.nu == 1.0 {
            0.0
        } else {
            1.0 / (self.q() * self.log_odds_step())
        }
    }

    /// `τ_q = qT = 1 / ln(q/(1-q))`.
    pub fn tau_q(&self) -> f64 {
        if self.nu == 0.0 {
            f64::INFINITY
        } else if self.nu == 1.0 {
            0.0
        } else {
            1.0 / self.log_odds_step()
        }
    }

    /// Prior entropy `H(Y) = h(θ₀)`.
    pub fn prior_entropy(&self) -> f64 {
        crate::entropy::binary_entropy(self.theta0)
    }

    pub fn prior(&self) -> Belief {
        Belief(self.theta0)
    }

    pub fn is_degenerate_prior(&self) -> bool {
        self.theta0 == 0.0 || self.theta0 == 1.0
    }
}

/// `T = ((1+ν)/2 · ln((1+ν)/(1-ν)))⁻¹` for `ν ∈ (0, 1)`.
pub fn temperature(nu: f64) -> Result<f64> {
    if nu > 0.0 && nu < 1.0 {
        Ok(ModelParams { theta0: 0.5, nu }.temperature())
    } else {
        Err(Error::Domain {
            name: "nu",
            value: nu,
            domain: "(0, 1)",
        })
    }
}

/// Market maker's posterior `P(Y = 1 | orders so far)`, which is also the price.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Belief(f64);

impl Belief {
    pub fn new(theta: f64) -> Result<Self> {
        check_unit("theta", theta).map(Self)
    }

    pub fn theta(self) -> f64 {
        self.0
    }

    pub fn is_certain(self) -> bool {
        self.0 == 0.0 || self.0 == 1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Order {
    Sell,
    Buy,
}

impl Order {
    pub fn from_bit(bit: u8) -> Self {
        if bit == 0 {
            Order::Sell
        } else {
            Order::Buy
        }
    }

    pub fn bit(self) -> u8 {
        match self {
            Order::Sell => 0,
            Order::Buy => 1,
        }
    }
}

/// Terminal value `Y ∈ {0, 1}` of the asset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AssetValue {
    Zero,
    One,
}

impl AssetValue {
    pub fn from_bit(bit: u8) -> Self {
        if bit == 0 {
            AssetValue::Zero
        } else {
            AssetValue::One
        }
    }

    pub fn bit(self) -> u8 {
        match self {
            AssetValue::Zero => 0,
            AssetValue::One => 1,
        }
    }

    pub fn value(self) -> f64 {
        f64::from(self.bit())
    }

    /// The order an informed trader sends.
    pub fn informed_order(self) -> Order {
        Order::from_bit(self.bit())
    }
}

/// `p(X = x | Y = y) = (1-ν)/2 + ν·[x = y]`.
pub fn likelihood(x: Order, y: AssetValue, params: &ModelParams) -> f64 {
    let nu = params.nu();
    let agree = if x.bit() == y.bit() { nu } else { 0.0 };
    (1.0 - nu) / 2.0 + agree
}

/// One Bayesian update of the belief after observing order `x`.
///
/// The fixed points 0 and 1 are preserved, including for the zero-probability
/// event of an order contradicting a certain belief at `ν = 1`.
pub fn posterior_update(belief: Belief, x: Order, params: &ModelParams) -> Belief {
    let theta = belief.theta();
    if belief.is_certain() {
        return belief;
    }
    let l1 = likelihood(x, AssetValue::One, params);
    let num = theta * l1;
    let den = num + (1.0 - theta) * (1.0 - l1);
    if den == 0.0 {
        belief
    } else {
        Belief(num / den)
    }
}

/// Bid, ask and spread posted at a given belief.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quote {
    pub bid: f64,
    pub ask: f64,
    pub spread: f64,
}

pub fn quote(belief: Belief, params: &ModelParams) -> Quote {
    let theta = belief.theta();
    let nu = params.nu();
    if belief.is_certain() || nu == 0.0 {
        return Quote {
            bid: theta,
            ask: theta,
            spread: 0.0,
        };
    }
    let (lo, hi) = (1.0 - nu, 1.0 + nu);
    let bid_den = lo * theta + hi * (1.0 - theta);
    let ask_den = hi * theta + lo * (1.0 - theta);
    Quote {
        bid: lo * theta / bid_den,
        ask: hi * theta / ask_den,
        spread: 4.0 * nu * theta * (1.0 - theta) / (bid_den * ask_den),
    }
}

/// `E[μ | history] = (1-q)·spread`, the informed trader's expected payoff
/// for the coming step.
pub fn expected_step_payoff(belief: Belief, params: &ModelParams) -> f64 {
    (1.0 - params.q()) * quote(belief, params).spread
}

/// The same expectation written as `ν(b(1-θ) + (1-a)θ)`.
pub fn expected_step_payoff_from_quotes(belief: Belief, params: &ModelParams) -> f64 {
    let theta = belief.theta();
    let Quote { bid, ask, .. } = quote(belief, params);
    params.nu() * (bid * (1.0 - theta) + (1.0 - ask) * theta)
}

/// Informed payoff `b(1-y) + (1-a)y` against the pre-trade quote, or 0 when
/// the noise trader was drawn.
pub fn realized_step_payoff(
    belief: Belief,
    y: AssetValue,
    informed_trades: bool,
    params: &ModelParams,
) -> f64 {
    if !informed_trades {
        return 0.0;
    }
    let Quote { bid, ask, .. } = quote(belief, params);
    match y {
        AssetValue::Zero => bid,
        AssetValue::One => 1.0 - ask,
    }
}

/// Noise trader's profit for one order: `Y - a` on a buy, `b - Y` on a sell.
pub fn noise_step_payoff(belief: Belief, y: AssetValue, order: Order, params: &ModelParams) -> f64 {
    let Quote { bid, ask, .. } = quote(belief, params);
    match order {
        Order::Buy => y.value() - ask,
        Order::Sell => bid - y.value(),
    }
}

/// Factor `1 - m(2q-1)/(1-q)` by which the informed gain shrinks when the
/// market maker also charges a fraction `m` of the spread as a fee.
pub fn fee_adjusted_gain_factor(m: f64, params: &ModelParams) -> Result<f64> {
    if !m.is_finite() || m < 0.0 {
        return Err(Error::Domain {
            name: "m",
            value: m,
            domain: "[0, ∞)",
        });
    }
    if m == 0.0 {
        return Ok(1.0);
    }
    let q = params.q();
    Ok(1.0 - m * (2.0 * q - 1.0) / (1.0 - q))
}

/// Whether informed trading stays profitable under fee `m`: `νm < (1-ν)/2`,
/// equivalently `ν < 1/(1+2m)`.
pub fn profitable_under_fee(m: f64, params: &ModelParams) -> bool {
    let nu = params.nu();
    nu * m < (1.0 - nu) / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn p(theta0: f64, nu: f64) -> ModelParams {
        ModelParams::new(theta0, nu).unwrap()
    }

    fn b(theta: f64) -> Belief {
        Belief::new(theta).unwrap()
    }

    #[test]
    fn params_validation() {
        assert!(ModelParams::new(-0.1, 0.2).is_err());
        assert!(ModelParams::new(0.5, 1.2).is_err());
        assert!(ModelParams::new(0.5, f64::NAN).is_err());
        let params = p(0.5, 0.2);
        assert_eq!(params.q(), 0.6);
        assert_relative_eq!(params.tau_q(), 1.0 / 1.5f64.ln(), max_relative = 1e-14);
        assert_relative_eq!(params.temperature(), params.tau_q() / params.q(), max_relative = 1e-14);
    }

    #[test]
    fn temperature_examples() {
        // 1 / (0.6 ln 1.5)
        assert_relative_eq!(temperature(0.2).unwrap(), 4.110_505_770_627_386, max_relative = 1e-14);
        assert!(temperature(1.0 - 1e-12).unwrap() < 0.1);
        let t = temperature(1e-6).unwrap();
        assert_relative_eq!(t * 1e-6, 1.0, max_relative = 1e-5);
        assert!(temperature(0.0).is_err());
        assert!(temperature(1.0).is_err());
        assert_eq!(p(0.5, 0.0).temperature(), f64::INFINITY);
        assert_eq!(p(0.5, 1.0).temperature(), 0.0);
    }

    #[test]
    fn likelihood_examples() {
        let params = p(0.5, 0.2);
        assert_relative_eq!(likelihood(Order::Buy, AssetValue::One, &params), 0.6, epsilon = 1e-15);
        assert_relative_eq!(likelihood(Order::Sell, AssetValue::One, &params), 0.4, epsilon = 1e-15);
        let noise = p(0.5, 0.0);
        for x in [Order::Sell, Order::Buy] {
            for y in [AssetValue::Zero, AssetValue::One] {
                assert_eq!(likelihood(x, y, &noise), 0.5);
            }
        }
    }

    #[test]
    fn posterior_examples() {
        let params = p(0.5, 0.2);
        assert_relative_eq!(posterior_update(b(0.5), Order::Buy, &params).theta(), 0.6, epsilon = 1e-15);
        assert_eq!(posterior_update(b(0.5), Order::Buy, &p(0.5, 1.0)).theta(), 1.0);
        assert_eq!(posterior_update(b(0.0), Order::Buy, &params).theta(), 0.0);
        assert_eq!(posterior_update(b(1.0), Order::Sell, &p(0.5, 1.0)).theta(), 1.0);
    }

    #[test]
    fn quote_examples() {
        let q = quote(b(0.5), &p(0.5, 0.2));
        assert_relative_eq!(q.bid, 0.4, epsilon = 1e-15);
        assert_relative_eq!(q.ask, 0.6, epsilon = 1e-15);
        assert_relative_eq!(q.spread, 0.2, epsilon = 1e-15);
        let certain = quote(b(1.0), &p(0.5, 0.7));
        assert_eq!((certain.bid, certain.ask, certain.spread), (1.0, 1.0, 0.0));
        let noise = quote(b(0.3), &p(0.5, 0.0));
        assert_eq!((noise.bid, noise.ask, noise.spread), (0.3, 0.3, 0.0));
    }

    #[test]
    fn payoff_examples() {
        let params = p(0.5, 0.2);
        assert_relative_eq!(expected_step_payoff(b(0.5), &params), 0.08, epsilon = 1e-15);
        assert_eq!(expected_step_payoff(b(0.0), &params), 0.0);
        assert_eq!(expected_step_payoff(b(1.0), &params), 0.0);
        assert_eq!(expected_step_payoff(b(0.4), &p(0.5, 0.0)), 0.0);

        assert_eq!(realized_step_payoff(b(0.5), AssetValue::One, false, &params), 0.0);
        assert_relative_eq!(realized_step_payoff(b(0.5), AssetValue::One, true, &params), 0.4, epsilon = 1e-15);
        assert_relative_eq!(realized_step_payoff(b(0.5), AssetValue::Zero, true, &params), 0.4, epsilon = 1e-15);
    }

    #[test]
    fn fee_examples() {
        let params = p(0.5, 0.2);
        assert_eq!(fee_adjusted_gain_factor(0.0, &params).unwrap(), 1.0);
        assert_relative_eq!(fee_adjusted_gain_factor(2.0, &params).unwrap(), 0.0, epsilon = 1e-14);
        assert_relative_eq!(fee_adjusted_gain_factor(1.0, &params).unwrap(), 0.5, epsilon = 1e-14);
        assert!(fee_adjusted_gain_factor(-1.0, &params).is_err());
        assert_eq!(fee_adjusted_gain_factor(0.0, &p(0.5, 1.0)).unwrap(), 1.0);

        assert!(profitable_under_fee(1.0, &params));
        assert!(!profitable_under_fee(2.0, &params));
        // ν < 1/(1+2m) at the edge m = 2 is exactly ν = 0.2: not profitable.
        assert!(profitable_under_fee(1.99, &params));
    }

    #[test]
    fn zero_sum_in_expectation() {
        for &nu in &[0.05, 0.2, 0.5, 0.9] {
            let params = p(0.5, nu);
            for &theta in &[0.01, 0.3, 0.5, 0.8] {
                let belief = b(theta);
                let spread = quote(belief, &params).spread;
                let informed = expected_step_payoff(belief, &params);
                let noise = -(1.0 - nu) / 2.0 * spread;
                assert!((informed + noise).abs() < 1e-15);

                // Same thing from the noise trader's four outcomes.
                let mut expected_noise = 0.0;
                for (y, py) in [(AssetValue::One, theta), (AssetValue::Zero, 1.0 - theta)] {
                    for order in [Order::Buy, Order::Sell] {
                        expected_noise += py * (1.0 - nu) * 0.5 * noise_step_payoff(belief, y, order, &params);
                    }
                }
                assert!((expected_noise - noise).abs() < 1e-15);
            }
        }
    }
}
