//! The belief map `L_q : θ ↦ qθ / (qθ + (1-q)(1-θ))` and its iterates.
//!
//! A buy order applies `L_q` to the belief and a sell applies its inverse
//! `L_{1-q}`. In log-odds `ℓ = ln(θ/(1-θ))` the map is a shift by
//! `Δ = ln(q/(1-q))`, so the belief after `n` orders of which `k` are buys
//! is `L_q^{2k-n}[θ₀]` regardless of their arrangement. All iterates are
//! evaluated in log-odds space so that beliefs within 1e-300 of a fixed
//! point stay representable.

use serde::{Deserialize, Serialize};

use crate::binomial;
use crate::error::{Error, Result};
use crate::model::AssetValue;

/// Numerically stable logistic `1 / (1 + e^{-x})`.
#[inline]
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// `ln logistic(x)`.
#[inline]
pub fn ln_logistic(x: f64) -> f64 {
    -softplus(-x)
}

/// `ln(θ / (1-θ))`; `±∞` at the endpoints.
#[inline]
pub fn log_odds(theta: f64) -> f64 {
    theta.ln() - (-theta).ln_1p()
}

/// One application of `L_q`. Values `q < 1/2` give the inverse map.
pub fn map_apply(theta: f64, q: f64) -> f64 {
    let num = q * theta;
    let den = num + (1.0 - q) * (1.0 - theta);
    if den == 0.0 {
        theta
    } else {
        num / den
    }
}

/// `L_q^d[θ]` for a signed exponent `d`; negative `d` iterates `L_{1-q}`.
pub fn map_iterate(theta: f64, q: f64, d: i64) -> f64 {
    MapOrbit::new(theta, q).price(d)
}

/// Orbit of a starting belief under the iterated map, precomputing the
/// log-odds origin and step so that many exponents can be evaluated cheaply.
#[derive(Debug, Clone, Copy)]
pub struct MapOrbit {
    theta0: f64,
    origin: f64,
    step: f64,
}

impl MapOrbit {
    pub fn new(theta0: f64, q: f64) -> Self {
        Self {
            theta0,
            origin: log_odds(theta0),
            step: q.ln() - (-q).ln_1p(),
        }
    }

    fn fixed(&self) -> bool {
        self.theta0 == 0.0 || self.theta0 == 1.0
    }

    /// Log-odds after net displacement `d`.
    pub fn log_odds(&self, d: i64) -> f64 {
        if d == 0 {
            return self.origin;
        }
        // Avoids 0 * ∞ when q = 1/2 or q = 1.
        if self.step == 0.0 {
            self.origin
        } else {
            self.origin + d as f64 * self.step
        }
    }

    pub fn price(&self, d: i64) -> f64 {
        if self.fixed() || d == 0 {
            return self.theta0;
        }
        logistic(self.log_odds(d))
    }

    /// `1 - L_q^d[θ]`, without cancellation near 1.
    pub fn complement(&self, d: i64) -> f64 {
        if self.fixed() || d == 0 {
            return 1.0 - self.theta0;
        }
        logistic(-self.log_odds(d))
    }

    /// `ln L_q^d[θ]`.
    pub fn ln_price(&self, d: i64) -> f64 {
        if self.fixed() {
            return self.theta0.ln();
        }
        ln_logistic(self.log_odds(d))
    }

    /// `ln(1 - L_q^d[θ])`.
    pub fn ln_complement(&self, d: i64) -> f64 {
        if self.fixed() {
            return (1.0 - self.theta0).ln();
        }
        ln_logistic(-self.log_odds(d))
    }
}

/// Net iteration count of the map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MapExponent(pub i64);

/// Number of buys `k` among `n` orders; a sufficient statistic for the belief.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BuyCount {
    n: u64,
    k: u64,
}

impl BuyCount {
    pub fn new(n: u64, k: u64) -> Result<Self> {
        if k > n {
            return Err(Error::BuyCount { steps: n, buys: k });
        }
        Ok(Self { n, k })
    }

    pub fn steps(&self) -> u64 {
        self.n
    }

    pub fn buys(&self) -> u64 {
        self.k
    }

    /// `2k - n`.
    pub fn displacement(&self) -> MapExponent {
        MapExponent(2 * self.k as i64 - self.n as i64)
    }
}

pub fn price_from_buycount(theta0: f64, q: f64, bc: BuyCount) -> f64 {
    map_iterate(theta0, q, bc.displacement().0)
}

/// Probability that a single order is a buy given `Y`: `1 - q + (2q-1)y`.
pub fn buy_probability(y: AssetValue, q: f64) -> f64 {
    match y {
        AssetValue::One => q,
        AssetValue::Zero => 1.0 - q,
    }
}

/// Law of the buy count `k` after `n` orders, conditioned on `Y = y`.
pub fn buycount_pmf(n: u64, y: AssetValue, q: f64) -> Vec<f64> {
    binomial::pmf_vec(n, buy_probability(y, q))
}

/// Unconditional law of the buy count, mixing both values of `Y` by the prior.
pub fn buycount_mixture_pmf(n: u64, theta0: f64, q: f64) -> Vec<f64> {
    let one = buycount_pmf(n, AssetValue::One, q);
    let zero = buycount_pmf(n, AssetValue::Zero, q);
    one.iter()
        .zip(&zero)
        .map(|(a, b)| theta0 * a + (1.0 - theta0) * b)
        .collect()
}
