//! Binary entropy `h(x) = -x ln x - (1-x) ln(1-x)` in nats, its first four
//! derivatives, and the auxiliary functions used to certify the single-step
//! entropic inequality.

use serde::{Deserialize, Serialize};

use crate::error::{check_open_unit, check_unit, Error, Result};

/// A real number in `[0, 1]`, checked at construction.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct UnitInterval(f64);

impl UnitInterval {
    pub fn new(value: f64) -> Result<Self> {
        check_unit("x", value).map(Self)
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for UnitInterval {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Self::new(value)
    }
}

impl From<UnitInterval> for f64 {
    fn from(x: UnitInterval) -> f64 {
        x.0
    }
}

/// Binary entropy in nats. `h(0) = h(1) = 0`.
pub fn h(x: UnitInterval) -> f64 {
    binary_entropy(x.get())
}

/// Unchecked binary entropy; arguments outside `(0, 1)` return 0.
#[inline]
pub fn binary_entropy(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    -x * x.ln() - (1.0 - x) * (-x).ln_1p()
}

/// Derivative of order 1 to 4 of the binary entropy at `x ∈ (0, 1)`.
pub fn h_deriv(order: u8, x: f64) -> Result<f64> {
    if !(1..=4).contains(&order) {
        return Err(Error::DerivativeOrder(order));
    }
    let x = check_open_unit("x", x)?;
    let y = 1.0 - x;
    Ok(match order {
        1 => -(x.ln() - (-x).ln_1p()),
        2 => -1.0 / (x * y),
        3 => -(2.0 * x - 1.0) / (x * x * y * y),
        _ => -2.0 * (1.0 - 3.0 * x + 3.0 * x * x) / (x * x * x * y * y * y),
    })
}

fn check_q(q: f64) -> Result<f64> {
    if (0.5..1.0).contains(&q) {
        Ok(q)
    } else {
        Err(Error::Domain {
            name: "q",
            value: q,
            domain: "[1/2, 1)",
        })
    }
}

/// `f(x) = -h'''(q) h(x) + h'(q) h''(x)` for a fixed `q ∈ [1/2, 1)`.
///
/// The single-step inequality is equivalent to `f(z) >= f(q)` for every
/// `z ∈ [1/2, q]`.
pub fn f_aux(q: f64, x: f64) -> Result<f64> {
    let q = check_q(q)?;
    let x = check_open_unit("x", x)?;
    Ok(-h_deriv(3, q)? * binary_entropy(x) + h_deriv(1, q)? * h_deriv(2, x)?)
}

/// `g(z) = 2z - 1 - 2(1 - 3z + 3z²) ln(z / (1 - z))`. Non-positive on `[1/2, 1)`.
pub fn g_aux(z: f64) -> Result<f64> {
    let z = check_open_unit("z", z)?;
    Ok(2.0 * z - 1.0 - 2.0 * (1.0 - 3.0 * z + 3.0 * z * z) * logit(z))
}

/// Analytic derivative of [`g_aux`].
pub fn g_aux_deriv(z: f64) -> Result<f64> {
    let z = check_open_unit("z", z)?;
    let s = 2.0 * z - 1.0;
    Ok(-6.0 * s * logit(z) - 2.0 * s * s / (z * (1.0 - z)))
}

/// Derivative of `z ↦ h'(z) / h'''(z)`, written as `z(1-z)/(2z-1)² · g(z)`.
///
/// The ratio itself is 0/0 at `z = 1/2`, so that point is rejected.
pub fn ratio_deriv(z: f64) -> Result<f64> {
    let z = check_open_unit("z", z)?;
    if z == 0.5 {
        return Err(Error::Domain {
            name: "z",
            value: z,
            domain: "(0, 1) \\ {1/2}",
        });
    }
    let s = 2.0 * z - 1.0;
    Ok(z * (1.0 - z) / (s * s) * g_aux(z)?)
}

#[inline]
fn logit(z: f64) -> f64 {
    z.ln() - (-z).ln_1p()
}

/// `φ(v) = ((1+v) ln(1+v) + (1-v) ln(1-v)) / 2`, so `h(x) = ln 2 - φ(2x - 1)`.
fn half_divergence(v: f64) -> f64 {
    let v = v.abs();
    if v >= 1.0 {
        return std::f64::consts::LN_2;
    }
    0.5 * ((-v * v).ln_1p() + 2.0 * v * v.atanh())
}

/// `h(z) - h(q)` with `z = qθ + (1-q)(1-θ)`, accurate even when `q → 1/2`
/// where both entropies approach `ln 2`.
///
/// This is the single-step mutual information `I(Y; X | θ)`.
pub fn entropy_gain(q: f64, theta: f64) -> f64 {
    let u = 2.0 * q - 1.0;
    let w = 2.0 * theta - 1.0;
    if u.abs() >= 1.0 {
        return half_divergence(u) - half_divergence(u * w);
    }
    if u.abs() > 0.25 {
        // h(q + δ) - h(q) with δ = -u·min(θ, 1-θ), using h(z) = h(1-z);
        // the log1p form keeps full relative precision as δ → 0.
        let delta = -u * theta.min(1.0 - theta);
        let p = 1.0 - q;
        return -2.0 * u.atanh() * delta
            - (q + delta) * (delta / q).ln_1p()
            - (p - delta) * (-delta / p).ln_1p();
    }
    // Σ_k u^{2k} (1 - w^{2k}) / (2k(2k-1)), with 1 - w^{2k} = (1 - w²) Σ_{j<k} w^{2j}.
    let u2 = u * u;
    let w2 = w * w;
    let one_minus_w2 = 4.0 * theta * (1.0 - theta);
    let mut u_pow = 1.0;
    let mut w_partial = 0.0;
    let mut w_pow = 1.0;
    let mut total = 0.0;
    for k in 1..200 {
        u_pow *= u2;
        w_partial += w_pow;
        w_pow *= w2;
        let kf = k as f64;
        let term = u_pow * one_minus_w2 * w_partial / (2.0 * kf * (2.0 * kf - 1.0));
        total += term;
        if term <= total * 1e-18 {
            break;
        }
    }
    total
}
