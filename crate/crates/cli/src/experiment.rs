//! Seeded Monte-Carlo execution across methods and sweep values.
//!
//! Every trial synthesizes one instance and runs all selected methods on it
//! (paired comparison). Trials are independent and dispatched to a worker
//! pool; per-trial seeds are derived from the base seed through a splittable
//! mix, so growing the trial count never re-randomizes earlier trials, and
//! results are sorted before aggregation so the worker count cannot change
//! any output value.

use std::time::Instant;

use jacd_core::rng::trial_seed;
use jacd_core::scenario::{self, ScenarioConfig};
use jacd_core::solver::{self, JacdProblem, SolverConfig};
use jacd_core::{baselines, metrics};
use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::config::{apply_sweep_value, ConfigError, ExperimentConfig, Method};
use crate::output::{summarize, ResultTable, SummaryRow, TrialRow};

/// Abort the run when more than this fraction of trials fail.
pub const MAX_FAILURE_RATE: f64 = 0.01;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("scenario error: {0}")]
    Scenario(#[from] scenario::ScenarioError),
    #[error("worker pool: {0}")]
    Pool(String),
    #[error("{failed} of {total} trials failed (more than {:.0}%), aborting", MAX_FAILURE_RATE * 100.0)]
    TooManyFailures { failed: usize, total: usize },
}

/// A trial that could not be completed; recorded with its seed and skipped.
#[derive(Debug, Clone)]
pub struct TrialFailure {
    pub sweep_value: Option<f64>,
    pub trial: usize,
    pub seed: u64,
    pub message: String,
}

fn method_order(m: Method) -> usize {
    match m {
        Method::Proposed => 0,
        Method::NoDataSparsity => 1,
        Method::PilotThenZf => 2,
    }
}

/// Run the configured experiment. `workers = 0` uses all available cores.
pub fn run_experiment(cfg: &ExperimentConfig, workers: usize) -> Result<ResultTable, RunError> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| RunError::Pool(e.to_string()))?;

    // (sweep value, scenario, solver) per run point.
    let mut points: Vec<(Option<f64>, ScenarioConfig, SolverConfig)> = Vec::new();
    match &cfg.sweep {
        None => points.push((None, cfg.scenario.clone(), cfg.resolved_solver())),
        Some(sweep) => {
            for &v in &sweep.values {
                let mut point_cfg = cfg.clone();
                point_cfg.sweep = None;
                apply_sweep_value(&mut point_cfg, &sweep.param, v)?;
                points.push((Some(v), point_cfg.scenario.clone(), point_cfg.resolved_solver()));
            }
        }
    }

    let mut rows: Vec<TrialRow> = Vec::new();
    let mut failures: Vec<TrialFailure> = Vec::new();
    for (sweep_value, scenario_cfg, solver_cfg) in &points {
        // The pilot design is a protocol constant of the configuration; build
        // it once per sweep point and share it across trials.
        let pilots = scenario::generate_pilots(scenario_cfg, scenario_cfg.rng_seed)?;
        let results: Vec<Result<Vec<TrialRow>, TrialFailure>> = pool.install(|| {
            (0..cfg.trials)
                .into_par_iter()
                .map(|t| {
                    run_trial(
                        *sweep_value,
                        t,
                        scenario_cfg,
                        solver_cfg,
                        &pilots,
                        &cfg.methods,
                        cfg.base_seed,
                    )
                })
                .collect()
        });
        for r in results {
            match r {
                Ok(mut trial_rows) => rows.append(&mut trial_rows),
                Err(f) => {
                    log::warn!(
                        "trial {} (seed {}) failed at sweep value {:?}: {}",
                        f.trial,
                        f.seed,
                        f.sweep_value,
                        f.message
                    );
                    failures.push(f);
                }
            }
        }
    }

    let total = cfg.trials * points.len();
    if failures.len() as f64 > MAX_FAILURE_RATE * total as f64 {
        return Err(RunError::TooManyFailures {
            failed: failures.len(),
            total,
        });
    }

    // Stable output order regardless of worker scheduling.
    rows.sort_by(|a, b| {
        let ka = (
            a.sweep_value.map(|v| v.to_bits()),
            a.trial,
            method_order(a.method),
        );
        let kb = (
            b.sweep_value.map(|v| v.to_bits()),
            b.trial,
            method_order(b.method),
        );
        ka.cmp(&kb)
    });
    let sweep_order: Vec<Option<f64>> = points.iter().map(|(v, _, _)| *v).collect();
    let summary: Vec<SummaryRow> = summarize(&rows, &sweep_order, &cfg.methods);

    Ok(ResultTable {
        rows,
        summary,
        failures,
    })
}

#[allow(clippy::too_many_arguments)]
fn run_trial(
    sweep_value: Option<f64>,
    trial: usize,
    scenario_cfg: &ScenarioConfig,
    solver_cfg: &SolverConfig,
    pilots: &Array2<Complex64>,
    methods: &[Method],
    base_seed: u64,
) -> Result<Vec<TrialRow>, TrialFailure> {
    let seed = trial_seed(base_seed, trial as u64);
    let fail = |message: String| TrialFailure {
        sweep_value,
        trial,
        seed,
        message,
    };

    let (gt, rx) = scenario::synthesize_with_pilots(scenario_cfg, seed, pilots)
        .map_err(|e| fail(e.to_string()))?;
    let problem = JacdProblem::new(rx.y.view(), gt.pilots.view(), scenario_cfg.antennas_per_ap)
        .map_err(|e| fail(e.to_string()))?;
    let b = scenario_cfg.box_b;
    let n_active = gt.n_active();

    // All methods share the pilot stage: it is the pilot-then-ZF baseline and
    // the warm start of both JACD variants.
    let t_pilot = Instant::now();
    let ws = solver::warm_start(&problem, solver_cfg).map_err(|e| fail(e.to_string()))?;
    let pilot_ms = t_pilot.elapsed().as_secs_f64() * 1e3;

    let mut rows = Vec::with_capacity(methods.len());
    for &method in methods {
        let (estimate, runtime_ms) = match method {
            Method::PilotThenZf => {
                let t0 = Instant::now();
                let pe = &ws.pilot_outcome.estimate;
                let x_hard = solver::harden_decisions(&ws.x0.view(), &pe.activity_hat, b);
                let harden_ms = t0.elapsed().as_secs_f64() * 1e3;
                let estimate = solver::Estimate {
                    h_hat: pe.h_hat.clone(),
                    x_d_soft: ws.x0.clone(),
                    x_d_hard: x_hard,
                    activity_hat: pe.activity_hat.clone(),
                    iterations_used: pe.iterations_used,
                    final_objective: pe.final_objective,
                };
                (estimate, pilot_ms + harden_ms)
            }
            Method::Proposed => {
                let t0 = Instant::now();
                let out = solver::run_fbs(ws.h0.clone(), ws.x0.clone(), &problem, solver_cfg)
                    .map_err(|e| fail(e.to_string()))?;
                (out.estimate, t0.elapsed().as_secs_f64() * 1e3)
            }
            Method::NoDataSparsity => {
                let t0 = Instant::now();
                let out = baselines::jacd_no_data_sparsity(
                    ws.h0.clone(),
                    ws.x0.clone(),
                    &problem,
                    solver_cfg,
                )
                .map_err(|e| fail(e.to_string()))?;
                (out.estimate, t0.elapsed().as_secs_f64() * 1e3)
            }
        };

        rows.push(TrialRow {
            sweep_value,
            method,
            trial,
            seed,
            n_active,
            umr: metrics::umr(&gt.activity, &estimate.activity_hat),
            nmse: metrics::nmse(&gt.effective_channel.view(), &estimate.h_hat.view()),
            aser: metrics::aser(&gt.activity, &gt.data.view(), &estimate.x_d_hard.view(), b),
            iterations: estimate.iterations_used,
            runtime_ms,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Preset;

    fn tiny_config() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::preset(Preset::Desk);
        cfg.scenario.n_ues = 12;
        cfg.scenario.n_aps = 3;
        cfg.scenario.pilot_len = 6;
        cfg.scenario.data_len = 8;
        cfg.trials = 3;
        cfg.sweep = None;
        cfg
    }

    #[test]
    fn one_trial_one_method_gives_one_row() {
        let mut cfg = tiny_config();
        cfg.trials = 1;
        cfg.methods = vec![Method::Proposed];
        let table = run_experiment(&cfg, 1).unwrap();
        assert_eq!(table.rows.len(), 1);
        assert!(table.failures.is_empty());
    }

    #[test]
    fn rerun_is_deterministic_modulo_runtime() {
        let cfg = tiny_config();
        let a = run_experiment(&cfg, 1).unwrap();
        let b = run_experiment(&cfg, 2).unwrap();
        assert_eq!(a.rows.len(), b.rows.len());
        for (x, y) in a.rows.iter().zip(b.rows.iter()) {
            assert_eq!(x.sweep_value, y.sweep_value);
            assert_eq!(x.method, y.method);
            assert_eq!(x.trial, y.trial);
            assert_eq!(x.seed, y.seed);
            assert_eq!(x.n_active, y.n_active);
            assert_eq!(x.umr, y.umr);
            assert_eq!(x.nmse, y.nmse);
            assert_eq!(x.aser, y.aser);
            assert_eq!(x.iterations, y.iterations);
        }
    }

    #[test]
    fn sweep_produces_rows_per_point() {
        let mut cfg = tiny_config();
        cfg.sweep = Some(crate::config::Sweep {
            param: "n_aps".into(),
            values: vec![2.0, 4.0],
        });
        cfg.methods = vec![Method::Proposed, Method::PilotThenZf];
        let table = run_experiment(&cfg, 2).unwrap();
        assert_eq!(table.rows.len(), 2 * 3 * 2);
        assert!(table.rows.iter().any(|r| r.sweep_value == Some(2.0)));
        assert!(table.rows.iter().any(|r| r.sweep_value == Some(4.0)));
    }

    #[test]
    fn impossible_scenario_aborts_with_failures() {
        let mut cfg = tiny_config();
        // antennas_per_ap that does not divide into a valid problem: force a
        // pilot failure instead via pilot_len > n_ues being fine, so use an
        // invalid activity probability to fail validation.
        cfg.scenario.activity_prob = 2.0;
        assert!(run_experiment(&cfg, 1).is_err());
    }
}
