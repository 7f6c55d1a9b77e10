//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use glosten_core::belief_map::{map_apply, map_iterate};
use glosten_core::entropy::entropy_gain;
use glosten_core::exact::{
    expected_gain_series, expected_payoff_exact, expected_payoff_via_spread, price_moment_series,
    mutual_info_chain_series, mutual_info_direct_series, payoff_joint_moment,
    single_step_mutual_info_terms,
};
use glosten_core::model::{expected_step_payoff, expected_step_payoff_from_quotes, quote};
use glosten_core::monte_carlo::{
    final_gain_exceedance, gain_variance_decomposition, payoff_product_estimates, simulate,
};
use glosten_core::verification::{
    check_corollary, check_theorem_bound, convergence_horizon, log_grid,
    optimal_frequency_experiment, scan_entropic_inequality, variance_peak_scaling,
    CONVERGENCE_FRACTION,
};
use glosten_core::{AssetValue, Belief, GridSpec, ModelParams, SimConfig, YMode};

type Verdict = Result<String, String>;
type Criterion = (&'static str, fn() -> Verdict);

const BOUND_NUS: [f64; 4] = [0.05, 0.1, 0.2, 0.5];
const BOUND_THETAS: [f64; 3] = [0.1, 0.5, 0.9];

fn params(theta0: f64, nu: f64) -> ModelParams {
    ModelParams::new(theta0, nu).expect("valid parameters")
}

fn within(elapsed: Duration, limit_secs: f64) -> Verdict {
    if elapsed.as_secs_f64() < limit_secs {
        Ok(String::new())
    } else {
        Err(format!("took {:.2} s, limit {limit_secs} s", elapsed.as_secs_f64()))
    }
}

fn inequality_scan() -> Verdict {
    let start = Instant::now();
    let report = scan_entropic_inequality(GridSpec::default()).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let w = report.worst;
    let detail = format!(
        "{} points, {} violations, worst slack {:.3e} at q={:.6}, θ={:.6}, {:.2} s",
        report.points,
        report.violations,
        w.slack,
        w.q,
        w.theta,
        elapsed.as_secs_f64()
    );
    if report.violations != 0 || !report.worst_on_half_edge() {
        return Err(detail);
    }
    within(elapsed, 5.0)?;
    Ok(detail)
}

fn information_bound() -> Verdict {
    let start = Instant::now();
    let mut min_slack = f64::INFINITY;
    for &nu in &BOUND_NUS {
        for &theta0 in &BOUND_THETAS {
            let steps = check_theorem_bound(500, &params(theta0, nu)).map_err(|e| e.to_string())?;
            for s in steps {
                min_slack = min_slack.min(s.slack);
            }
        }
    }
    let detail = format!("min slack {min_slack:.3e} over 12 settings, n ≤ 500");
    if min_slack < -1e-10 {
        return Err(detail);
    }
    within(start.elapsed(), 30.0)?;
    Ok(detail)
}

fn mutual_info_routes() -> Verdict {
    let mut small = 0.0f64;
    for &nu in &BOUND_NUS {
        for &theta0 in &BOUND_THETAS {
            let p = params(theta0, nu);
            let chain = mutual_info_chain_series(64, &p);
            let direct = mutual_info_direct_series(64, &p);
            for n in 1..=64 {
                small = small.max((chain.at(n) - direct.at(n)).abs());
            }
        }
    }
    let p = params(0.5, 0.2);
    let chain = mutual_info_chain_series(4096, &p);
    let direct = mutual_info_direct_series(4096, &p);
    let large = (1..=4096).map(|n| (chain.at(n) - direct.at(n)).abs()).fold(0.0, f64::max);
    let detail = format!("max diff {small:.2e} (n ≤ 64), {large:.2e} (n ≤ 4096, ν=0.2)");
    if small <= 1e-10 && large <= 1e-8 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn exact_matches_simulation() -> Verdict {
    let p = params(0.5, 0.2);
    let config = SimConfig {
        params: p,
        horizon: 500,
        trials: 1000,
        seed: 7,
        y_mode: YMode::Fixed(AssetValue::One),
    };
    let stats = simulate(&config).map_err(|e| e.to_string())?;
    let exact = price_moment_series(500, AssetValue::One, &p);
    // The standard error of a 1000-trial mean uses the exact variance of θ_n.
    // The sample variance misses the rare low-belief paths that carry the
    // left tail, so it understates the error at late steps.
    let (mut agree, mut agree_sample) = (0, 0);
    for (m, e) in stats.beliefs.iter().zip(&exact[1..]) {
        let diff = (m.mean - e.mean).abs();
        let se = (e.variance / config.trials as f64).sqrt();
        if diff <= 3.0 * se || diff <= 1e-12 {
            agree += 1;
        }
        if diff <= 3.0 * m.std_error || diff <= 1e-12 {
            agree_sample += 1;
        }
    }
    let fraction = agree as f64 / stats.beliefs.len() as f64;
    let detail = format!(
        "{agree}/500 steps within 3 SE ({:.1}%); {agree_sample}/500 against the sample SE",
        100.0 * fraction
    );
    if fraction >= 0.99 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn corollary() -> Verdict {
    let mut gaps = Vec::new();
    let mut detail = String::new();
    for &nu in &[0.2, 0.1, 0.05] {
        let p = params(0.5, nu);
        let n = convergence_horizon(&p, CONVERGENCE_FRACTION, 1 << 16).map_err(|e| e.to_string())?;
        let report = check_corollary(&p, n).map_err(|e| e.to_string())?;
        if nu == 0.2 {
            let analytic = 4.110505770627386 * std::f64::consts::LN_2;
            if (report.bound - analytic).abs() > 1e-12 {
                return Err(format!("bound {} differs from T·ln 2 = {analytic}", report.bound));
            }
            if !(report.converged && report.expected_gain < report.bound) {
                return Err(format!("gain {} vs bound {} at N={n}", report.expected_gain, report.bound));
            }
            detail = format!("ν=0.2: E[G_{n}] = {:.4} < {:.4}", report.expected_gain, report.bound);
        }
        gaps.push(report.relative_gap());
    }
    detail.push_str(&format!(
        "; gap/bound {:.4}, {:.4}, {:.4}",
        gaps[0], gaps[1], gaps[2]
    ));
    if gaps.windows(2).all(|w| w[1] < w[0]) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn peak_scaling() -> Verdict {
    let start = Instant::now();
    let fit = variance_peak_scaling(&[0.4, 0.2, 0.1], 0.5).map_err(|e| e.to_string())?;
    let detail = format!("slope {:.3}", fit.slope);
    if !(-2.3..=-1.7).contains(&fit.slope) {
        return Err(detail);
    }
    within(start.elapsed(), 60.0)?;
    Ok(detail)
}

fn payoff_autocorrelation() -> Verdict {
    let p = params(0.5, 0.2);
    let config = SimConfig {
        params: p,
        horizon: 200,
        trials: 100_000,
        seed: 0,
        y_mode: YMode::Prior,
    };
    let decomposition = gain_variance_decomposition(&config).map_err(|e| e.to_string())?;
    let last = decomposition.last().expect("non-empty horizon");
    let sigmas = last.excess / last.excess_std_error;
    let pairs = [(10, 1), (200, 1)];
    let estimates = payoff_product_estimates(&config, &pairs).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for (&(n, lag), mc) in pairs.iter().zip(&estimates) {
        let exact = payoff_joint_moment(n, lag, &p).map_err(|e| e.to_string())?;
        worst = worst.max(((mc.mean - exact) / mc.std_error).abs());
    }
    let detail = format!("excess {:.4} at {sigmas:.1}σ; worst joint-moment |z| {worst:.2}", last.excess);
    if sigmas >= 5.0 && worst <= 3.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn trajectory_violations() -> Verdict {
    let p = params(0.5, 0.2);
    let config = SimConfig {
        params: p,
        horizon: 500,
        trials: 10_000,
        seed: 0,
        y_mode: YMode::Prior,
    };
    let threshold = p.temperature() * p.prior_entropy();
    let fraction = final_gain_exceedance(&config, threshold).map_err(|e| e.to_string())?;
    let detail = format!("{:.2}% of trajectories end above T·H(Y) = {threshold:.4}", 100.0 * fraction);
    if fraction > 0.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn optimal_frequency() -> Verdict {
    let grid = log_grid(0.005, 0.9, 120);
    let report = optimal_frequency_experiment(&[100, 400, 1600], &grid, 0.5).map_err(|e| e.to_string())?;
    if let Some(edge) = report.optima.iter().find(|o| o.at_grid_edge) {
        return Err(format!("optimum at grid edge for τ={}", edge.horizon));
    }
    let slope = report.fit.expect("three horizons").slope;
    let nus: Vec<String> = report.optima.iter().map(|o| format!("{:.4}", o.nu)).collect();
    let detail = format!("slope {slope:.3}, ν* = {}", nus.join(", "));
    if (-0.65..=-0.35).contains(&slope) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn unit_grid(points: usize) -> impl Iterator<Item = f64> + Clone {
    (0..=points).map(move |i| i as f64 / points as f64)
}

fn identities() -> Verdict {
    let tol = 1e-10;
    let mut worst: BTreeMap<&str, f64> = BTreeMap::new();
    let mut note = |name: &'static str, err: f64| {
        let e = worst.entry(name).or_insert(0.0);
        *e = e.max(err);
    };
    for q in unit_grid(200).map(|t| 0.5 + 0.49 * t) {
        for theta in unit_grid(200) {
            let z = q * theta + (1.0 - q) * (1.0 - theta);
            let lhs = theta * (1.0 - theta) * (2.0 * q - 1.0).powi(2);
            note("change of variable", (lhs - (z * (1.0 - z) - q * (1.0 - q))).abs());

            let p = params(0.5, 2.0 * q - 1.0);
            let b = Belief::new(theta).expect("θ in [0, 1]");
            note("map inverse", (map_apply(map_apply(theta, q), 1.0 - q) - theta).abs());
            note(
                "map commutation",
                (map_apply(map_apply(theta, q), 1.0 - q) - map_apply(map_apply(theta, 1.0 - q), q)).abs(),
            );
            let spread_form = (1.0 - q) * quote(b, &p).spread;
            note("step payoff", (expected_step_payoff(b, &p) - spread_form).abs());
            note("step payoff", (expected_step_payoff_from_quotes(b, &p) - spread_form).abs());
            note("four-term information", (single_step_mutual_info_terms(b, &p) - entropy_gain(q, theta)).abs());
        }
    }
    for q in unit_grid(40).map(|t| 0.5 + 0.4 * t) {
        for theta in unit_grid(40).map(|t| 0.05 + 0.9 * t) {
            let mut t = theta;
            for d in 1..=20i64 {
                t = map_apply(t, q);
                note("map closed form", (map_iterate(theta, q, d) - t).abs());
            }
            let mut t = theta;
            for d in 1..=20i64 {
                t = map_apply(t, 1.0 - q);
                note("map closed form", (map_iterate(theta, q, -d) - t).abs());
            }
        }
    }
    for &nu in &BOUND_NUS {
        for &theta0 in &BOUND_THETAS {
            let p = params(theta0, nu);
            for i in 1..=64 {
                let a = expected_payoff_exact(i, &p).map_err(|e| e.to_string())?;
                let b = expected_payoff_via_spread(i, &p).map_err(|e| e.to_string())?;
                note("series payoff", (a - b).abs());
            }
            let gains = expected_gain_series(1, &p);
            let first = expected_payoff_exact(1, &p).map_err(|e| e.to_string())?;
            note("series payoff", (gains[1] - first).abs());
        }
    }
    let max = worst.values().copied().fold(0.0, f64::max);
    let detail = worst
        .iter()
        .map(|(k, v)| format!("{k} {v:.1e}"))
        .collect::<Vec<_>>()
        .join(", ");
    if max <= tol {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn glosten(args: &[&str]) -> Result<(), String> {
    let output = Command::new(env!("CARGO_BIN_EXE_glosten"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if output.status.success() {
        Ok(())
    } else {
        Err(format!(
            "`glosten {}` exited with {}: {}",
            args.join(" "),
            output.status,
            String::from_utf8_lossy(&output.stderr).trim()
        ))
    }
}

/// Output files of a run directory, without manifests, keyed by file name.
fn outputs(dir: &Path) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let mut files = BTreeMap::new();
    for entry in fs::read_dir(dir).map_err(|e| e.to_string())? {
        let path = entry.map_err(|e| e.to_string())?.path();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        if !name.ends_with(".manifest.json") {
            files.insert(name, fs::read(&path).map_err(|e| e.to_string())?);
        }
    }
    Ok(files)
}

fn determinism() -> Verdict {
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let runs: [(&str, &[&str]); 6] = [
        ("simulate", &["simulate", "--steps", "200", "--trials", "3000", "--seed", "11", "--raw"]),
        ("simulate-json", &["simulate", "--steps", "100", "--trials", "600", "--format", "json"]),
        ("exact", &["exact", "--steps", "300", "--nu", "0.1", "--theta", "0.3"]),
        ("bound", &["verify", "bound", "--steps", "200", "--trials", "2000", "--seed", "5", "--format", "csv"]),
        ("autocorr", &["verify", "autocorr", "--steps", "60", "--trials", "20000", "--pairs", "10:1,60:1"]),
        ("inequality", &["verify", "inequality", "--grid", "128", "--format", "csv"]),
    ];
    let mut files = 0;
    for (label, args) in runs {
        let base = root.path().join(label);
        let base_str = base.to_string_lossy().into_owned();
        let mut full = vec!["--threads", "1"];
        full.extend_from_slice(args);
        full.extend_from_slice(&["--out", &base_str]);
        glosten(&full)?;
        let manifest = fs::read_dir(&base)
            .map_err(|e| e.to_string())?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .find(|p| p.to_string_lossy().ends_with(".manifest.json"))
            .ok_or_else(|| format!("{label}: no manifest written"))?;
        let reference = outputs(&base)?;
        if reference.is_empty() {
            return Err(format!("{label}: no outputs written"));
        }
        for threads in ["4", "3"] {
            let replay = root.path().join(format!("{label}-replay-{threads}"));
            glosten(&[
                "--threads",
                threads,
                "replay",
                "--manifest",
                &manifest.to_string_lossy(),
                "--out",
                &replay.to_string_lossy(),
            ])?;
            if outputs(&replay)? != reference {
                return Err(format!("{label}: replay with {threads} threads differs"));
            }
        }
        files += reference.len();
    }
    Ok(format!("6 runs, {files} files byte-identical under 1, 3 and 4 threads"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("entropic inequality scan", inequality_scan),
        ("information bound on expected gain", information_bound),
        ("mutual information routes agree", mutual_info_routes),
        ("exact price matches simulation", exact_matches_simulation),
        ("gain bounded by prior entropy", corollary),
        ("variance peak scaling", peak_scaling),
        ("positive payoff autocorrelation", payoff_autocorrelation),
        ("trajectory-level bound violations", trajectory_violations),
        ("optimal trading frequency scaling", optimal_frequency),
        ("identity suite", identities),
        ("determinism under replay", determinism),
    ];
    let mut failures = 0;
    for (index, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let verdict = check();
        let secs = start.elapsed().as_secs_f64();
        match verdict {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} [{secs:.2} s]", index + 1),
            Err(detail) => {
                failures += 1;
                println!("FAIL {:>2} {name}: {detail} [{secs:.2} s]", index + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
