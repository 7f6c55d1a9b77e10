//! Numerical certification of the information bounds and scaling claims.
//!
//! Every check returns a plain report struct (serializable to JSON) with the
//! measured slack; the callers decide pass or fail against a tolerance.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::entropy::entropy_gain;
use crate::error::{Error, Result};
use crate::exact::{
    conditional_entropy, expected_gain_series, mutual_info_chain_series, price_moment_series,
    single_step_mutual_info,
};
use crate::model::{expected_step_payoff, AssetValue, Belief, ModelParams};

/// Margin kept from the singular edges `q ∈ {1/2, 1}`, `θ ∈ {0, 1}`.
pub const EDGE_MARGIN: f64 = 1e-9;
pub const SCAN_TOLERANCE: f64 = 1e-12;
pub const BOUND_TOLERANCE: f64 = 1e-10;

/// Both sides of the single-step inequality
/// `θ(1-θ)(2q-1)(1-q) / (z(1-z)) <= (h(z) - h(q)) / (q ln(q/(1-q)))`.
pub fn entropic_inequality_sides(q: f64, theta: f64) -> (f64, f64) {
    let z = q * theta + (1.0 - q) * (1.0 - theta);
    let one_minus_z = q * (1.0 - theta) + (1.0 - q) * theta;
    let lhs = theta * (1.0 - theta) * (2.0 * q - 1.0) * (1.0 - q) / (z * one_minus_z);
    let inverse_temperature = q * 2.0 * (2.0 * q - 1.0).atanh();
    let rhs = entropy_gain(q, theta) / inverse_temperature;
    (lhs, rhs)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub resolution: usize,
    pub margin: f64,
    pub tolerance: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            resolution: 512,
            margin: EDGE_MARGIN,
            tolerance: SCAN_TOLERANCE,
        }
    }
}

impl GridSpec {
    pub fn q_at(&self, i: usize) -> f64 {
        lin(0.5 + self.margin, 1.0 - self.margin, i, self.resolution)
    }

    pub fn theta_at(&self, j: usize) -> f64 {
        lin(self.margin, 1.0 - self.margin, j, self.resolution)
    }
}

fn lin(lo: f64, hi: f64, i: usize, n: usize) -> f64 {
    if n <= 1 {
        return lo;
    }
    lo + (hi - lo) * i as f64 / (n - 1) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorstCase {
    pub slack: f64,
    pub q: f64,
    pub theta: f64,
    pub q_index: usize,
    pub theta_index: usize,
}

/// Result of scanning an inequality `lhs <= rhs` over a `(q, θ)` grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    pub grid: GridSpec,
    pub q_range: (f64, f64),
    pub theta_range: (f64, f64),
    pub points: usize,
    /// Minimum of `rhs - lhs`.
    pub worst: WorstCase,
    /// Points where `lhs > rhs + tolerance`.
    pub violations: usize,
}

impl ScanReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }

    /// Whether the worst case sits on the `q → 1/2` edge of the grid.
    pub fn worst_on_half_edge(&self) -> bool {
        self.worst.q_index == 0
    }
}

pub fn scan_entropic_inequality(grid: GridSpec) -> Result<ScanReport> {
    if grid.resolution < 2 {
        return Err(Error::Config("grid resolution must be at least 2".into()));
    }
    if !(grid.margin > 0.0 && grid.margin < 0.25) {
        return Err(Error::Config("grid margin must lie in (0, 1/4)".into()));
    }
    let n = grid.resolution;
    let rows: Vec<(WorstCase, usize)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let q = grid.q_at(i);
            let mut worst = WorstCase {
                slack: f64::INFINITY,
                q,
                theta: f64::NAN,
                q_index: i,
                theta_index: 0,
            };
            let mut violations = 0;
            for j in 0..n {
                let theta = grid.theta_at(j);
                let (lhs, rhs) = entropic_inequality_sides(q, theta);
                let slack = rhs - lhs;
                if lhs > rhs + grid.tolerance {
                    violations += 1;
                }
                if slack < worst.slack {
                    worst.slack = slack;
                    worst.theta = theta;
                    worst.theta_index = j;
                }
            }
            (worst, violations)
        })
        .collect();
    let mut worst = rows[0].0;
    let mut violations = 0;
    for (row_worst, row_violations) in rows {
        violations += row_violations;
        if row_worst.slack < worst.slack {
            worst = row_worst;
        }
    }
    Ok(ScanReport {
        grid,
        q_range: (grid.q_at(0), grid.q_at(n - 1)),
        theta_range: (grid.theta_at(0), grid.theta_at(n - 1)),
        points: n * n,
        worst,
        violations,
    })
}

fn require_interior_nu(params: &ModelParams) -> Result<()> {
    let nu = params.nu();
    if nu > 0.0 && nu < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain {
            name: "nu",
            value: nu,
            domain: "(0, 1)",
        })
    }
}

/// `T · I(Y; X | θ) - E[μ | θ]` for one step at belief `θ`.
pub fn check_single_step_bound(belief: Belief, params: &ModelParams) -> Result<f64> {
    require_interior_nu(params)?;
    if belief.is_certain() {
        return Ok(0.0);
    }
    Ok(params.temperature() * single_step_mutual_info(belief, params) - expected_step_payoff(belief, params))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundStep {
    pub step: usize,
    pub expected_gain: f64,
    pub mutual_info: f64,
    pub bound: f64,
    pub slack: f64,
}

/// Exact `E[G_n]` against `T · I(Y; X_{1:n})` for `n = 1..=horizon`, with
/// the information accumulated through the chain rule.
pub fn check_theorem_bound(horizon: usize, params: &ModelParams) -> Result<Vec<BoundStep>> {
    require_interior_nu(params)?;
    let temperature = params.temperature();
    let gains = expected_gain_series(horizon, params);
    let info = mutual_info_chain_series(horizon, params);
    Ok((1..=horizon)
        .map(|n| {
            let bound = temperature * info.at(n);
            BoundStep {
                step: n,
                expected_gain: gains[n],
                mutual_info: info.at(n),
                bound,
                slack: bound - gains[n],
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorollaryReport {
    pub horizon: usize,
    pub expected_gain: f64,
    pub bound: f64,
    pub gap: f64,
    pub residual_entropy: f64,
    /// Whether `H(Y | X_{1:N}) < 1e-3 · H(Y)` at the horizon.
    pub converged: bool,
}

impl CorollaryReport {
    pub fn relative_gap(&self) -> f64 {
        if self.bound == 0.0 {
            0.0
        } else {
            self.gap / self.bound
        }
    }
}

pub const CONVERGENCE_FRACTION: f64 = 1e-3;

/// Cumulative exact expected gain at `horizon` against `T · H(Y)`.
pub fn check_corollary(params: &ModelParams, horizon: usize) -> Result<CorollaryReport> {
    require_interior_nu(params)?;
    let prior = params.prior_entropy();
    let residual = conditional_entropy(horizon, params);
    let gain = expected_gain_series(horizon, params)[horizon];
    let bound = params.temperature() * prior;
    Ok(CorollaryReport {
        horizon,
        expected_gain: gain,
        bound,
        gap: bound - gain,
        residual_entropy: residual,
        converged: residual <= CONVERGENCE_FRACTION * prior,
    })
}

/// Smallest power-of-two multiple of 64 at which the residual entropy falls
/// below `fraction · H(Y)`, capped at `max_horizon`.
pub fn convergence_horizon(params: &ModelParams, fraction: f64, max_horizon: usize) -> Result<usize> {
    require_interior_nu(params)?;
    let target = fraction * params.prior_entropy();
    let mut n = 64;
    loop {
        if conditional_entropy(n, params) <= target {
            return Ok(n);
        }
        if n >= max_horizon {
            return Err(Error::Config(format!(
                "residual entropy still above {target:e} at n = {max_horizon}"
            )));
        }
        n = (n * 2).min(max_horizon);
    }
}

/// Least-squares fit of `ln y = intercept + slope · ln x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub samples: Vec<(f64, f64)>,
    pub slope: f64,
    pub slope_std_error: f64,
    pub intercept: f64,
}

pub fn loglog_fit(samples: &[(f64, f64)]) -> Result<ScalingFit> {
    if samples.len() < 2 {
        return Err(Error::InsufficientPoints {
            needed: 2,
            got: samples.len(),
        });
    }
    let pts: Vec<(f64, f64)> = samples.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Config("fit needs at least two distinct x values".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let slope_std_error = if pts.len() > 2 {
        let rss: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
        (rss / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(ScalingFit {
        samples: samples.to_vec(),
        slope,
        slope_std_error,
        intercept,
    })
}

/// `argmax_n V[θ_n | Y = 1]` by exhaustive scan over `n = 0..=max_horizon`.
pub fn variance_peak_time(params: &ModelParams, max_horizon: usize) -> Result<usize> {
    let moments = price_moment_series(max_horizon, AssetValue::One, params);
    let mut best = 0;
    for m in &moments {
        if m.variance > moments[best].variance {
            best = m.step;
        }
    }
    if best == max_horizon {
        return Err(Error::PeakAtBoundary {
            nu: params.nu(),
            horizon: max_horizon,
        });
    }
    Ok(best)
}

/// Scan horizon long enough to contain the variance peak for `nu`.
pub fn default_peak_horizon(nu: f64) -> usize {
    ((40.0 / (nu * nu)).ceil() as usize).max(64)
}

/// Fits the variance-peak time against `ν` on log-log axes.
pub fn variance_peak_scaling(nus: &[f64], theta0: f64) -> Result<ScalingFit> {
    if nus.len() < 3 {
        return Err(Error::InsufficientPoints {
            needed: 3,
            got: nus.len(),
        });
    }
    let samples = nus
        .par_iter()
        .map(|&nu| {
            let params = ModelParams::new(theta0, nu)?;
            require_interior_nu(&params)?;
            let peak = variance_peak_time(&params, default_peak_horizon(nu))?;
            Ok((nu, peak as f64))
        })
        .collect::<Result<Vec<_>>>()?;
    loglog_fit(&samples)
}

/// Best `ν` on a grid for one finite horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimalFrequency {
    pub horizon: usize,
    pub nu: f64,
    pub expected_gain: f64,
    /// The maximiser sits on the first or last grid point.
    pub at_grid_edge: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalFrequencyReport {
    pub optima: Vec<OptimalFrequency>,
    /// Fit of `ν*` against the horizon; present with two or more horizons.
    pub fit: Option<ScalingFit>,
}

/// Log-spaced grid of `points` values in `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..points).map(|i| lin(a, b, i, points).exp()).collect()
}

/// For each horizon `τ`, the grid value of `ν` maximising `E[G_τ]`.
pub fn optimal_frequency_experiment(
    horizons: &[usize],
    nu_grid: &[f64],
    theta0: f64,
) -> Result<OptimalFrequencyReport> {
    if nu_grid.len() < 2 {
        return Err(Error::InsufficientPoints {
            needed: 2,
            got: nu_grid.len(),
        });
    }
    let longest = horizons.iter().copied().max().unwrap_or(0);
    // gains[g][τ] = E[G_τ] at nu_grid[g]
    let gains = nu_grid
        .par_iter()
        .map(|&nu| {
            let params = ModelParams::new(theta0, nu)?;
            Ok(expected_gain_series(longest, &params))
        })
        .collect::<Result<Vec<_>>>()?;
    let optima: Vec<OptimalFrequency> = horizons
        .iter()
        .map(|&tau| {
            let mut best = 0;
            for g in 1..nu_grid.len() {
                if gains[g][tau] > gains[best][tau] {
                    best = g;
                }
            }
            OptimalFrequency {
                horizon: tau,
                nu: nu_grid[best],
                expected_gain: gains[best][tau],
                at_grid_edge: best == 0 || best + 1 == nu_grid.len(),
            }
        })
        .collect();
    let fit = if optima.len() >= 2 {
        let samples: Vec<(f64, f64)> = optima.iter().map(|o| (o.horizon as f64, o.nu)).collect();
        Some(loglog_fit(&samples)?)
    } else {
        None
    };
    Ok(OptimalFrequencyReport { optima, fit })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn p(theta0: f64, nu: f64) -> ModelParams {
        ModelParams::new(theta0, nu).unwrap()
    }

    #[test]
    fn inequality_examples() {
        let (lhs, rhs) = entropic_inequality_sides(0.5 + 1e-6, 0.5);
        assert!(rhs - lhs >= 0.0 && rhs - lhs <= 1e-6);
        for theta in [EDGE_MARGIN, 1.0 - EDGE_MARGIN] {
            let (lhs, rhs) = entropic_inequality_sides(0.7, theta);
            assert!(lhs < 1e-8 && lhs <= rhs);
        }
        // At ν = 0.2, θ = 1/2: LHS = 0.08, RHS = T(ln 2 - h(0.6)).
        let (lhs, rhs) = entropic_inequality_sides(0.6, 0.5);
        assert_relative_eq!(lhs, 0.08, epsilon = 1e-15);
        assert_relative_eq!(rhs, 0.082_767_144_644_652_54, epsilon = 1e-13);
    }

    #[test]
    fn small_scan_passes() {
        let report = scan_entropic_inequality(GridSpec {
            resolution: 64,
            ..GridSpec::default()
        })
        .unwrap();
        assert!(report.passed());
        assert_eq!(report.points, 64 * 64);
        assert!(scan_entropic_inequality(GridSpec {
            resolution: 1,
            ..GridSpec::default()
        })
        .is_err());
    }

    #[test]
    fn single_step_examples() {
        let slack = check_single_step_bound(Belief::new(0.5).unwrap(), &p(0.5, 0.2)).unwrap();
        assert_relative_eq!(slack, 0.002_767_144_644_652_544, epsilon = 1e-14);
        for theta in [0.0, 1.0] {
            assert_eq!(check_single_step_bound(Belief::new(theta).unwrap(), &p(0.5, 0.2)).unwrap(), 0.0);
        }
        let params = p(0.5, 0.01);
        let b = Belief::new(0.5).unwrap();
        let slack = check_single_step_bound(b, &params).unwrap();
        let bound = params.temperature() * single_step_mutual_info(b, &params);
        assert!(slack >= 0.0 && slack / bound <= 0.01);
        assert!(check_single_step_bound(b, &p(0.5, 0.0)).is_err());
    }

    #[test]
    fn theorem_first_step_is_single_step_bound() {
        let params = p(0.3, 0.4);
        let series = check_theorem_bound(3, &params).unwrap();
        let single = check_single_step_bound(params.prior(), &params).unwrap();
        assert!((series[0].slack - single).abs() < 1e-14);
    }

    #[test]
    fn corollary_degenerate_prior() {
        let report = check_corollary(&p(1.0, 0.2), 50).unwrap();
        assert_eq!(report.bound, 0.0);
        assert_eq!(report.expected_gain, 0.0);
        assert!(report.converged);
    }

    #[test]
    fn fit_recovers_power_law() {
        let samples: Vec<(f64, f64)> = [0.4f64, 0.2, 0.1, 0.05].iter().map(|&x| (x, 3.0 * x.powf(-2.0))).collect();
        let fit = loglog_fit(&samples).unwrap();
        assert_relative_eq!(fit.slope, -2.0, epsilon = 1e-12);
        assert_relative_eq!(fit.intercept, 3f64.ln(), epsilon = 1e-12);
        assert!(fit.slope_std_error < 1e-12);
    }

    #[test]
    fn scaling_needs_three_points() {
        assert_eq!(
            variance_peak_scaling(&[0.2], 0.5),
            Err(Error::InsufficientPoints { needed: 3, got: 1 })
        );
    }

    #[test]
    fn peak_at_boundary_is_an_error() {
        let err = variance_peak_time(&p(0.5, 0.1), 5).unwrap_err();
        assert!(matches!(err, Error::PeakAtBoundary { .. }));
    }

    #[test]
    fn single_step_horizon_optimum() {
        let grid: Vec<f64> = (1..100).map(|i| i as f64 / 100.0).collect();
        let report = optimal_frequency_experiment(&[1], &grid, 0.5).unwrap();
        assert_eq!(report.optima[0].nu, 0.5);
        assert!(report.fit.is_none());
    }
}
