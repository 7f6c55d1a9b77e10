use glosten_core::exact::{
    expected_gain_series, expected_payoff_series, mutual_info_direct_series, payoff_autocovariance,
    payoff_joint_moment, payoff_joint_moment_from_spreads, price_moment_series,
};
use glosten_core::monte_carlo::{
    empirical_bound_check, final_gain_exceedance, gain_variance_decomposition, payoff_product_estimates,
    simulate, simulate_with_trajectories, write_trajectories_csv, BoundCheckStep, VarianceDecomposition,
};
use glosten_core::verification::{
    check_corollary, check_theorem_bound, convergence_horizon, log_grid, optimal_frequency_experiment,
    scan_entropic_inequality, variance_peak_scaling, BoundStep, CorollaryReport, GridSpec,
    OptimalFrequencyReport, CONVERGENCE_FRACTION,
};
use glosten_core::{AssetValue, ModelParams, ScalingFit, ScanReport, SimConfig, YMode};
use serde::Serialize;

use crate::args::{
    parse_pair, AutocorrArgs, BoundArgs, Check, CorollaryArgs, ExactArgs, Format, InequalityArgs, ModelArgs,
    OptimalNuArgs, ScalingArgs, SimulateArgs,
};
use crate::error::{CliError, CliResult};
use crate::output::{f, i, OutputDir, Table};

/// What a command reports back besides its files.
pub struct Outcome {
    pub passed: Option<bool>,
    pub summary: String,
}

fn params(model: &ModelArgs) -> CliResult<ModelParams> {
    Ok(ModelParams::new(model.theta, model.nu)?)
}

fn require_steps(steps: usize) -> CliResult<()> {
    if steps == 0 {
        return Err(CliError::Usage("--steps must be at least 1".into()));
    }
    Ok(())
}

pub fn run_simulate(args: &SimulateArgs, out: &mut OutputDir) -> CliResult<Outcome> {
    let config = SimConfig {
        params: params(&args.model)?,
        horizon: args.steps,
        trials: args.trials,
        seed: args.seed,
        y_mode: args.y.mode(),
    };
    let (stats, trajectories) = if args.raw {
        let (stats, trajectories) = simulate_with_trajectories(&config, args.memory_budget)?;
        (stats, Some(trajectories))
    } else {
        (simulate(&config)?, None)
    };
    match args.format {
        Format::Csv => {
            let mut table = Table::new(&[
                "step",
                "belief_mean",
                "belief_variance",
                "belief_std_error",
                "payoff_mean",
                "payoff_variance",
                "payoff_std_error",
                "gain_mean",
                "gain_variance",
                "gain_std_error",
            ]);
            for s in 0..stats.horizon {
                let (b, p, g) = (stats.beliefs[s], stats.payoffs[s], stats.gains[s]);
                table.push(vec![
                    i(s + 1),
                    f(b.mean),
                    f(b.variance),
                    f(b.std_error),
                    f(p.mean),
                    f(p.variance),
                    f(p.std_error),
                    f(g.mean),
                    f(g.variance),
                    f(g.std_error),
                ]);
            }
            out.write_csv("simulate.csv", &table)?;
            let hist = &stats.final_gain_histogram;
            let mut table = Table::new(&["bin_lower", "bin_upper", "count"]);
            for (b, count) in hist.counts.iter().enumerate() {
                table.push(vec![f(hist.edges[b]), f(hist.edges[b + 1]), i(count)]);
            }
            out.write_csv("simulate-histogram.csv", &table)?;
        }
        Format::Json => out.write_json("simulate.json", &stats)?,
    }
    if let Some(trajectories) = trajectories {
        out.write("trajectories.csv", |w| write_trajectories_csv(w, &trajectories))?;
    }
    let last = stats.gains[stats.horizon - 1];
    Ok(Outcome {
        passed: None,
        summary: format!(
            "{} trials x {} steps; final mean gain {:.6} ± {:.6}",
            config.trials, config.horizon, last.mean, last.std_error
        ),
    })
}

#[derive(Serialize)]
struct ExactRow {
    step: usize,
    price_given_1: f64,
    variance_given_1: f64,
    price_given_0: f64,
    variance_given_0: f64,
    expected_payoff: f64,
    expected_gain: f64,
    conditional_entropy: f64,
    mutual_info: f64,
}

pub fn run_exact(args: &ExactArgs, out: &mut OutputDir) -> CliResult<Outcome> {
    let params = params(&args.model)?;
    require_steps(args.steps)?;
    let n = args.steps;
    let given_one = price_moment_series(n, AssetValue::One, &params);
    let given_zero = price_moment_series(n, AssetValue::Zero, &params);
    let payoffs = expected_payoff_series(n, &params);
    let gains = expected_gain_series(n, &params);
    let info = mutual_info_direct_series(n, &params);
    let prior = params.prior_entropy();
    let rows: Vec<ExactRow> = (0..=n)
        .map(|s| ExactRow {
            step: s,
            price_given_1: given_one[s].mean,
            variance_given_1: given_one[s].variance,
            price_given_0: given_zero[s].mean,
            variance_given_0: given_zero[s].variance,
            expected_payoff: if s == 0 { 0.0 } else { payoffs[s - 1] },
            expected_gain: gains[s],
            conditional_entropy: (prior - info.at(s)).max(0.0),
            mutual_info: info.at(s),
        })
        .collect();
    match args.format {
        Format::Csv => {
            let mut table = Table::new(&[
                "step",
                "price_given_1",
                "variance_given_1",
                "price_given_0",
                "variance_given_0",
                "expected_payoff",
                "expected_gain",
                "conditional_entropy",
                "mutual_info",
            ]);
            for r in &rows {
                table.push(vec![
                    i(r.step),
                    f(r.price_given_1),
                    f(r.variance_given_1),
                    f(r.price_given_0),
                    f(r.variance_given_0),
                    f(r.expected_payoff),
                    f(r.expected_gain),
                    f(r.conditional_entropy),
                    f(r.mutual_info),
                ]);
            }
            out.write_csv("exact.csv", &table)?;
        }
        Format::Json => out.write_json("exact.json", &rows)?,
    }
    Ok(Outcome {
        passed: None,
        summary: format!("{} steps; E[G_n] = {:.6}, I = {:.6} nats", n, gains[n], info.at(n)),
    })
}

pub fn run_check(check: &Check, out: &mut OutputDir) -> CliResult<Outcome> {
    match check {
        Check::Inequality(a) => inequality(a, out),
        Check::Bound(a) => bound(a, out),
        Check::Corollary(a) => corollary(a, out),
        Check::Scaling(a) => scaling(a, out),
        Check::OptimalNu(a) => optimal_nu(a, out),
        Check::Autocorr(a) => autocorr(a, out),
    }
}

fn verdict(passed: bool) -> &'static str {
    if passed {
        "PASS"
    } else {
        "FAIL"
    }
}

#[derive(Serialize)]
struct InequalityReport {
    passed: bool,
    worst_on_half_edge: bool,
    scan: ScanReport,
}

fn inequality(args: &InequalityArgs, out: &mut OutputDir) -> CliResult<Outcome> {
    let scan = scan_entropic_inequality(GridSpec {
        resolution: args.grid,
        margin: args.margin,
        tolerance: args.tolerance,
    })?;
    let passed = scan.passed() && scan.worst_on_half_edge();
    let report = InequalityReport {
        passed,
        worst_on_half_edge: scan.worst_on_half_edge(),
        scan,
    };
    out.write_json("verify-inequality.json", &report)?;
    if args.format == Format::Csv {
        let mut table = Table::new(&[
            "resolution",
            "points",
            "violations",
            "worst_slack",
            "worst_q",
            "worst_theta",
            "worst_on_half_edge",
        ]);
        let w = scan.worst;
        table.push(vec![
            i(args.grid),
            i(scan.points),
            i(scan.violations),
            f(w.slack),
            f(w.q),
            f(w.theta),
            i(report.worst_on_half_edge),
        ]);
        out.write_csv("verify-inequality.csv", &table)?;
    }
    Ok(Outcome {
        passed: Some(passed),
        summary: format!(
            "{}: {} points, {} violations, worst slack {:e} at q = {}, θ = {}",
            verdict(passed),
            scan.points,
            scan.violations,
            scan.worst.slack,
            scan.worst.q,
            scan.worst.theta
        ),
    })
}

#[derive(Serialize)]
struct EmpiricalBound {
    trials: usize,
    seed: u64,
    /// Mean gain within three standard errors of the bound at every step.
    within_three_std_errors: bool,
    /// Share of trajectories whose final gain exceeds T·H(Y).
    fraction_above_entropy_bound: f64,
    steps: Vec<BoundCheckStep>,
}

#[derive(Serialize)]
struct BoundReport {
    passed: bool,
    tolerance: f64,
    temperature: f64,
    min_slack: f64,
    min_slack_step: usize,
    steps: Vec<BoundStep>,
    empirical: Option<EmpiricalBound>,
}

fn bound(args: &BoundArgs, out: &mut OutputDir) -> CliResult<Outcome> {
    let params = params(&args.model)?;
    require_steps(args.steps)?;
    let steps = check_theorem_bound(args.steps, &params)?;
    let worst = steps
        .iter()
        .min_by(|a, b| a.slack.total_cmp(&b.slack))
        .copied()
        .expect("at least one step");
    let mut passed = worst.slack >= -args.tolerance;
    let empirical = match args.trials {
        Some(trials) => {
            let config = SimConfig {
                params,
                horizon: args.steps,
                trials,
                seed: args.seed,
                y_mode: YMode::Prior,
            };
            let rows = empirical_bound_check(&config)?;
            let within = rows.iter().all(|s| s.mean_gain <= s.bound + 3.0 * s.std_error);
            passed &= within;
            let fraction = final_gain_exceedance(&config, params.temperature() * params.prior_entropy())?;
            Some(EmpiricalBound {
                trials,
                seed: args.seed,
                within_three_std_errors: within,
                fraction_above_entropy_bound: fraction,
                steps: rows,
            })
        }
        None => None,
    };
    if args.format == Format::Csv {
        let mut table = Table::new(&["step", "expected_gain", "mutual_info", "bound", "slack"]);
        for s in &steps {
            table.push(vec![i(s.step), f(s.expected_gain), f(s.mutual_info), f(s.bound), f(s.slack)]);
        }
        out.write_csv("verify-bound.csv", &table)?;
        if let Some(emp) = &empirical {
            let mut table = Table::new(&["step", "mean_gain", "std_error", "bound", "slack", "violation_fraction"]);
            for s in &emp.steps {
                table.push(vec![
                    i(s.step),
                    f(s.mean_gain),
                    f(s.std_error),
                    f(s.bound),
                    f(s.slack),
                    f(s.violation_fraction),
                ]);
            }
            out.write_csv("verify-bound-empirical.csv", &table)?;
        }
    }
    let mut summary = format!(
        "{}: min slack {:e} at n = {} over {} steps",
        verdict(passed),
        worst.slack,
        worst.step,
        args.steps
    );
    if let Some(emp) = &empirical {
        summary.push_str(&format!(
            "; MC mean within 3 SE: {}; trajectories above T·H(Y): {:.4}",
            emp.within_three_std_errors, emp.fraction_above_entropy_bound
        ));
    }
    out.write_json(
        "verify-bound.json",
        &BoundReport {
            passed,
            tolerance: args.tolerance,
            temperature: params.temperature(),
            min_slack: worst.slack,
            min_slack_step: worst.step,
            steps,
            empirical,
        },
    )?;
    Ok(Outcome {
        passed: Some(passed),
        summary,
    })
}

#[derive(Serialize)]
struct CorollaryOutput {
    passed: bool,
    relative_gap: f64,
    convergence_fraction: f64,
    report: CorollaryReport,
}

fn corollary(args: &CorollaryArgs, out: &mut OutputDir) -> CliResult<Outcome> {
    let params = params(&args.model)?;
    let horizon = match args.steps {
        Some(n) => n,
        None if params.is_degenerate_prior() => 1,
        None => convergence_horizon(&params, CONVERGENCE_FRACTION, args.max_steps)?,
    };
    let report = check_corollary(&params, horizon)?;
    if !report.converged {
        eprintln!(
            "warning: H(Y | X) = {:e} is not below {CONVERGENCE_FRACTION}·H(Y) at n = {horizon}; \
             the gain has not reached its asymptote",
            report.residual_entropy
        );
    }
    let passed = report.expected_gain <= report.bound;
    if args.format == Format::Csv {
        let mut table = Table::new(&["horizon", "expected_gain", "bound", "gap", "residual_entropy", "converged"]);
        table.push(vec![
            i(report.horizon),
            f(report.expected_gain),
            f(report.bound),
            f(report.gap),
            f(report.residual_entropy),
            i(report.converged),
        ]);
        out.write_csv("verify-corollary.csv", &table)?;
    }
    out.write_json(
        "verify-corollary.json",
        &CorollaryOutput {
            passed,
            relative_gap: report.relative_gap(),
            convergence_fraction: CONVERGENCE_FRACTION,
            report,
        },
    )?;
    Ok(Outcome {
        passed: Some(passed),
        summary: format!(
            "{}: E[G_{}] = {:.9} vs T·H(Y) = {:.9} (gap {:.3e})",
            verdict(passed),
            report.horizon,
            report.expected_gain,
            report.bound,
            report.gap
        ),
    })
}

#[derive(Serialize)]
struct SlopeReport<T: Serialize> {
    passed: bool,
    expected_slope: f64,
    tolerance: f64,
    #[serde(flatten)]
    result: T,
}

fn scaling(args: &ScalingArgs, out: &mut OutputDir) -> CliResult<Outcome> {
    let fit: ScalingFit = variance_peak_scaling(&args.nus, args.theta)?;
    let passed = (fit.slope - args.expected_slope).abs() <= args.tolerance;
    if args.format == Format::Csv {
        let mut table = Table::new(&["nu", "peak_step"]);
        for &(nu, peak) in &fit.samples {
            table.push(vec![f(nu), i(peak as usize)]);
        }
        out.write_csv("verify-scaling.csv", &table)?;
    }
    let summary = format!(
        "{}: slope {:.4} ± {:.4} (expected {} ± {})",
        verdict(passed),
        fit.slope,
        fit.slope_std_error,
        args.expected_slope,
        args.tolerance
    );
    out.write_json(
        "verify-scaling.json",
        &SlopeReport {
            passed,
            expected_slope: args.expected_slope,
            tolerance: args.tolerance,
            result: fit,
        },
    )?;
    Ok(Outcome {
        passed: Some(passed),
        summary,
    })
}

fn optimal_nu(args: &OptimalNuArgs, out: &mut OutputDir) -> CliResult<Outcome> {
    if !(args.nu_min > 0.0 && args.nu_max <= 1.0 && args.nu_max >= 10.0 * args.nu_min) {
        return Err(CliError::Usage(
            "the ν grid must satisfy 0 < --nu-min and 10·--nu-min <= --nu-max <= 1".into(),
        ));
    }
    if args.taus.contains(&0) {
        return Err(CliError::Usage("horizons in --taus must be at least 1".into()));
    }
    let grid = log_grid(args.nu_min, args.nu_max, args.grid);
    let report: OptimalFrequencyReport = optimal_frequency_experiment(&args.taus, &grid, args.theta)?;
    for o in report.optima.iter().filter(|o| o.at_grid_edge) {
        eprintln!("warning: optimum for τ = {} sits on the grid edge ν = {}", o.horizon, o.nu);
    }
    let passed = report
        .fit
        .as_ref()
        .map_or(true, |fit| (fit.slope - args.expected_slope).abs() <= args.tolerance);
    if args.format == Format::Csv {
        let mut table = Table::new(&["tau", "nu_star", "expected_gain", "at_grid_edge"]);
        for o in &report.optima {
            table.push(vec![i(o.horizon), f(o.nu), f(o.expected_gain), i(o.at_grid_edge)]);
        }
        out.write_csv("verify-optimal-nu.csv", &table)?;
    }
    let summary = match &report.fit {
        Some(fit) => format!(
            "{}: slope {:.4} (expected {} ± {})",
            verdict(passed),
            fit.slope,
            args.expected_slope,
            args.tolerance
        ),
        None => format!("{}: ν* = {}", verdict(passed), report.optima[0].nu),
    };
    out.write_json(
        "verify-optimal-nu.json",
        &SlopeReport {
            passed,
            expected_slope: args.expected_slope,
            tolerance: args.tolerance,
            result: report,
        },
    )?;
    Ok(Outcome {
        passed: Some(passed),
        summary,
    })
}

#[derive(Serialize)]
struct PairComparison {
    step: usize,
    lag: usize,
    mc_mean: f64,
    mc_std_error: f64,
    exact: f64,
    z: f64,
    exact_covariance: f64,
    /// The spread-product closed form, for comparison.
    spread_product: f64,
    spread_product_z: f64,
}

#[derive(Serialize)]
struct AutocorrReport {
    passed: bool,
    trials: usize,
    seed: u64,
    excess_sigma: f64,
    final_step: VarianceDecomposition,
    pairs: Vec<PairComparison>,
    decomposition: Vec<VarianceDecomposition>,
}

fn autocorr(args: &AutocorrArgs, out: &mut OutputDir) -> CliResult<Outcome> {
    let params = params(&args.model)?;
    require_steps(args.steps)?;
    let pairs = args
        .pairs
        .iter()
        .map(|s| parse_pair(s))
        .collect::<Result<Vec<_>, _>>()
        .map_err(CliError::Usage)?;
    let config = SimConfig {
        params,
        horizon: args.steps,
        trials: args.trials,
        seed: args.seed,
        y_mode: YMode::Prior,
    };
    let decomposition = gain_variance_decomposition(&config)?;
    let final_step = *decomposition.last().expect("at least one step");
    let excess_sigma = final_step.excess / final_step.excess_std_error;
    let estimates = payoff_product_estimates(&config, &pairs)?;
    let mut comparisons = Vec::with_capacity(pairs.len());
    for (&(n, lag), mc) in pairs.iter().zip(&estimates) {
        let exact = payoff_joint_moment(n, lag, &params)?;
        let spreads = payoff_joint_moment_from_spreads(n, lag, &params)?.mixture;
        comparisons.push(PairComparison {
            step: n,
            lag,
            mc_mean: mc.mean,
            mc_std_error: mc.std_error,
            exact,
            z: (mc.mean - exact) / mc.std_error,
            exact_covariance: payoff_autocovariance(n, lag, &params)?,
            spread_product: spreads,
            spread_product_z: (mc.mean - spreads) / mc.std_error,
        });
    }
    let passed = excess_sigma >= args.min_sigma && comparisons.iter().all(|c| c.z.abs() <= args.max_z);
    if args.format == Format::Csv {
        let mut table = Table::new(&["step", "gain_variance", "payoff_variance_sum", "excess", "excess_std_error"]);
        for d in &decomposition {
            table.push(vec![
                i(d.step),
                f(d.gain_variance),
                f(d.payoff_variance_sum),
                f(d.excess),
                f(d.excess_std_error),
            ]);
        }
        out.write_csv("verify-autocorr.csv", &table)?;
        let mut table = Table::new(&["step", "lag", "mc_mean", "mc_std_error", "exact", "z", "exact_covariance"]);
        for c in &comparisons {
            table.push(vec![
                i(c.step),
                i(c.lag),
                f(c.mc_mean),
                f(c.mc_std_error),
                f(c.exact),
                f(c.z),
                f(c.exact_covariance),
            ]);
        }
        out.write_csv("verify-autocorr-pairs.csv", &table)?;
    }
    let worst_z = comparisons.iter().map(|c| c.z.abs()).fold(0.0, f64::max);
    let summary = format!(
        "{}: excess {:.4} at {:.1}σ; worst joint-moment |z| = {:.2}",
        verdict(passed),
        final_step.excess,
        excess_sigma,
        worst_z
    );
    out.write_json(
        "verify-autocorr.json",
        &AutocorrReport {
            passed,
            trials: args.trials,
            seed: args.seed,
            excess_sigma,
            final_step,
            pairs: comparisons,
            decomposition,
        },
    )?;
    Ok(Outcome {
        passed: Some(passed),
        summary,
    })
}
