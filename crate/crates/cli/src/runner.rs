//! The scenario pipeline: simulate -> estimate -> fit -> rate -> compare,
//! with CSV/JSON/plot-data outputs.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ldp_core::drivers::{simulate_gaussian, simulate_markov_chain, simulate_poisson, Driver};
use ldp_core::grid::{CadlagPath, TimeGrid};
use ldp_core::mc::{
    binomial_tail_ln, estimate_tail, fit_decay, poisson_tail_ln, DecayFit, TailEstimate,
};
use ldp_core::rate::{
    cramer_log_mgf, legendre, minimize_action_hitting, poisson_log_mgf, schilder_action,
    GramFactor,
};
use ldp_core::sde::solve_markov_evolution;
use ldp_core::space::GridFunction;
use serde::Serialize;

use crate::scenario::ScenarioConfig;

pub struct RunOutcome {
    pub pass: bool,
    pub summary: Summary,
    pub files: Vec<PathBuf>,
}

#[derive(Debug, Serialize)]
pub struct Summary {
    pub scenario: String,
    pub slope: f64,
    pub slope_ci: f64,
    pub rate_predicted: f64,
    pub pass: bool,
}

/// Scalar summary of one replica that the event predicate consumes.
#[derive(Clone, Copy)]
struct Outcome {
    terminal: f64,
    sup_abs: f64,
}

fn observable_path(config: &ScenarioConfig, n: u64, stream: &mut ldp_core::RandomStream) -> CadlagPath {
    let space = config.space();
    let grid = TimeGrid::new(config.grid.horizon, config.grid.steps).expect("validated");
    match config.driver.family.as_str() {
        "gaussian_white_noise" => {
            let h = GridFunction::new(space.clone(), config.observable.h.clone().expect("validated"))
                .expect("validated");
            let d = simulate_gaussian(&space, grid, n, stream).expect("validated");
            d.path(&h).expect("same space")
        }
        "poisson_random_measure" => {
            let h = GridFunction::new(space.clone(), config.observable.h.clone().expect("validated"))
                .expect("validated");
            let d = simulate_poisson(&space, grid, n, stream)
                .expect("validated")
                .centered(config.driver.centered);
            d.path(&h).expect("same space")
        }
        "markov_counting" => {
            let kernel = config.driver.kernel.as_ref().expect("validated");
            let initial = config.driver.initial.as_ref().expect("validated");
            let chain = simulate_markov_chain(kernel, initial, n, config.grid.horizon, stream)
                .expect("validated");
            match config.observable.kind.as_str() {
                "markov_mean_sde" => {
                    let sv = config.observable.state_values.clone().expect("validated");
                    let x0 = config.observable.x0.unwrap_or(0.0);
                    solve_markov_evolution(|_x, xi| vec![sv[xi]], &chain, &[x0]).expect("validated")
                }
                _ => {
                    let h = GridFunction::new(
                        chain.space().clone(),
                        config.observable.h.clone().expect("validated"),
                    )
                    .expect("validated");
                    chain.path(&h).expect("same space")
                }
            }
        }
        _ => unreachable!("validated"),
    }
}

fn simulate_outcome(config: &ScenarioConfig, n: u64, stream: &mut ldp_core::RandomStream) -> Outcome {
    let path = observable_path(config, n, stream);
    Outcome {
        terminal: path.terminal()[0],
        sup_abs: path.sup_norm(),
    }
}

fn estimate_ladder(config: &ScenarioConfig, samples: u64, seed: u64) -> Result<Vec<TailEstimate>, String> {
    // lattice observables (Poisson counts, coin means) accumulate 1/n per
    // step, so a boundary hit can land one ulp below the level; the event is
    // the closed half-line, so compare with an epsilon grace
    let level = config.event.level - 1e-9 * (1.0 + config.event.level.abs());
    let kind = config.event.kind.clone();
    config
        .n_ladder
        .iter()
        .map(|&n| {
            estimate_tail(
                |o: &Outcome| match kind.as_str() {
                    "terminal_ge" => o.terminal >= level,
                    _ => o.sup_abs >= level,
                },
                |n, stream| simulate_outcome(config, n, stream),
                n,
                samples,
                seed,
            )
            .map_err(|e| e.to_string())
        })
        .collect()
}

fn predicted_rate(config: &ScenarioConfig) -> Result<f64, String> {
    let level = config.event.level;
    match config.rate.kind.as_str() {
        "poisson_legendre" => {
            let space = config.space();
            let h = GridFunction::new(space.clone(), config.observable.h.clone().ok_or("poisson_legendre needs observable h")?)
                .map_err(|e| e.to_string())?;
            let mgf = poisson_log_mgf(&[h], &space).map_err(|e| e.to_string())?;
            let y = config.rate.y.unwrap_or(level);
            let lv = legendre(&mgf, &[y], 10.0).map_err(|e| e.to_string())?;
            Ok(lv.value)
        }
        "cramer_legendre" => {
            let sv = config.observable.state_values.clone().ok_or("cramer_legendre needs state_values")?;
            let pi = config
                .rate
                .pi
                .clone()
                .or_else(|| config.driver.initial.clone())
                .ok_or("cramer_legendre needs a mark distribution")?;
            let h: Vec<Vec<f64>> = sv.iter().map(|v| vec![*v]).collect();
            let mgf = cramer_log_mgf(&h, &pi).map_err(|e| e.to_string())?;
            let y = config.rate.y.unwrap_or(level);
            let lv = legendre(&mgf, &[y], 10.0).map_err(|e| e.to_string())?;
            Ok(lv.value)
        }
        "schilder_hitting" => {
            let space = config.space();
            let h = GridFunction::new(space.clone(), config.observable.h.clone().ok_or("schilder_hitting needs observable h")?)
                .map_err(|e| e.to_string())?;
            let factor = GramFactor::from_functions(&[h]).map_err(|e| e.to_string())?;
            let action = move |p: &CadlagPath| schilder_action(p, &factor).expect("scalar path");
            let steps = config.rate.minimize_steps.unwrap_or(64);
            let grid = TimeGrid::new(config.grid.horizon, steps).map_err(|e| e.to_string())?;
            let restarts = config.rate.restarts.unwrap_or(2);
            let report = minimize_action_hitting(&action, level, grid, restarts, config.seed)
                .map_err(|e| e.to_string())?;
            Ok(report.value)
        }
        _ => unreachable!("validated"),
    }
}

fn oracle_rate(config: &ScenarioConfig) -> Result<Option<f64>, String> {
    let Some(oracle) = &config.oracle else {
        return Ok(None);
    };
    let n = oracle.n_exact;
    let level = config.event.level;
    let rate = match oracle.kind.as_str() {
        "poisson_terminal" => {
            let total_mass: f64 = config.space.masses.iter().sum();
            let mean = total_mass * n as f64 * config.grid.horizon;
            let k = (level * n as f64).ceil() as u64;
            -poisson_tail_ln(mean, k).map_err(|e| e.to_string())? / n as f64
        }
        "binomial_terminal" => {
            // Bernoulli marks: success probability of the high state
            let pi = config
                .rate
                .pi
                .clone()
                .or_else(|| config.driver.initial.clone())
                .ok_or("binomial oracle needs a mark distribution")?;
            let p = pi.last().copied().unwrap_or(0.5);
            let k = (level * n as f64).ceil() as u64;
            -binomial_tail_ln(n, p, k).map_err(|e| e.to_string())? / n as f64
        }
        _ => unreachable!("validated"),
    };
    Ok(Some(rate))
}

fn csv_text(estimates: &[TailEstimate], timestamp: Option<&str>) -> String {
    let mut out = String::new();
    if let Some(ts) = timestamp {
        let _ = writeln!(out, "# generated {ts}");
    }
    let _ = writeln!(out, "n,hits,samples,p_hat,ci_low,ci_high,neglog_over_n");
    for e in estimates {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            e.n,
            e.hits,
            e.samples,
            e.p_hat,
            e.ci_low,
            e.ci_high,
            e.neglog_over_n()
        );
    }
    out
}

fn plot_text(fit: &DecayFit, timestamp: Option<&str>) -> String {
    let mut out = String::new();
    if let Some(ts) = timestamp {
        let _ = writeln!(out, "# generated {ts}");
    }
    for (n, v) in &fit.points {
        let _ = writeln!(out, "{n} {v}");
    }
    out
}

/// Runs the scenario end to end, writing outputs into `out_dir`.
///
/// Returns `Ok(outcome)` when the pipeline ran; `outcome.pass` reports the
/// rate comparison (the caller maps it to exit code 2).
pub fn run(
    config: &ScenarioConfig,
    out_dir: &Path,
    samples_override: Option<u64>,
    seed_override: Option<u64>,
    no_timestamp: bool,
) -> Result<RunOutcome, String> {
    let samples = samples_override.unwrap_or(config.samples);
    let seed = seed_override.unwrap_or(config.seed);
    if samples < 1_000 {
        return Err(format!("samples {samples} below the minimum of 1000"));
    }
    let estimates = estimate_ladder(config, samples, seed)?;
    let fit = fit_decay(&estimates).map_err(|e| e.to_string())?;
    let rate_predicted = predicted_rate(config)?;
    let rel = (fit.slope - rate_predicted).abs() / rate_predicted.abs().max(f64::MIN_POSITIVE);
    let mut pass = rel <= config.rate.tolerance_rel;
    if let Some(oracle) = oracle_rate(config)? {
        let tol = config.oracle.as_ref().expect("checked").tolerance_rel;
        let rel_oracle = (oracle - rate_predicted).abs() / rate_predicted.abs().max(f64::MIN_POSITIVE);
        pass = pass && rel_oracle <= tol;
    }

    std::fs::create_dir_all(out_dir).map_err(|e| format!("{}: {e}", out_dir.display()))?;
    let timestamp = if no_timestamp {
        None
    } else {
        Some(chrono::Utc::now().to_rfc3339())
    };
    let summary = Summary {
        scenario: config.name.clone(),
        slope: fit.slope,
        slope_ci: fit.slope_ci,
        rate_predicted,
        pass,
    };
    let mut files = Vec::new();
    let csv_path = out_dir.join(format!("{}_estimates.csv", config.name));
    std::fs::write(&csv_path, csv_text(&estimates, timestamp.as_deref()))
        .map_err(|e| format!("{}: {e}", csv_path.display()))?;
    files.push(csv_path);
    let json_path = out_dir.join(format!("{}_summary.json", config.name));
    let json = serde_json::to_string_pretty(&summary).expect("serializable") + "\n";
    std::fs::write(&json_path, json).map_err(|e| format!("{}: {e}", json_path.display()))?;
    files.push(json_path);
    let plot_path = out_dir.join(format!("{}_plot.dat", config.name));
    std::fs::write(&plot_path, plot_text(&fit, timestamp.as_deref()))
        .map_err(|e| format!("{}: {e}", plot_path.display()))?;
    files.push(plot_path);

    Ok(RunOutcome { pass, summary, files })
}
