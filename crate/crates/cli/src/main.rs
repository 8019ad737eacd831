use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use jacd_cli::config::{
    apply_config_file, apply_sweep_value, ConfigError, ExperimentConfig, Preset, Sweep,
};
use jacd_cli::{experiment, output, selftest};

/// Joint active-user detection, channel estimation, and data detection for
/// cell-free grant-free access: scenario synthesis, the box-constrained FBS
/// solver, baselines, and a seeded Monte-Carlo harness.
#[derive(Parser)]
#[command(name = "jacd", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct RunFlags {
    /// Config file (flat key-value format with `[scenario]`, `[solver]`,
    /// `[experiment]` sections); applied on top of the preset or defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Shipped configuration: `desk` (small, fast) or `paper` (full scale).
    #[arg(long)]
    preset: Option<Preset>,
    /// Number of Monte-Carlo trials per sweep value.
    #[arg(long)]
    trials: Option<usize>,
    /// Base seed; per-trial seeds are derived from it.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for trial-level parallelism (0 = all cores).
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Output directory for trials.csv and summary.csv.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured experiment (optionally with its configured sweep).
    Run(RunFlags),
    /// Run a sweep over one scenario or solver parameter.
    Sweep {
        /// Parameter name, e.g. n_aps or mu_h.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',')]
        values: Vec<f64>,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Run the proximal-operator and gradient oracle suites.
    ProxSelftest,
}

fn build_config(flags: &RunFlags) -> Result<ExperimentConfig, ConfigError> {
    let mut cfg = match flags.preset {
        Some(preset) => ExperimentConfig::preset(preset),
        None => ExperimentConfig::default(),
    };
    if let Some(path) = &flags.config {
        apply_config_file(&mut cfg, path)?;
    }
    if let Some(trials) = flags.trials {
        cfg.trials = trials;
    }
    if let Some(seed) = flags.seed {
        cfg.base_seed = seed;
    }
    if let Some(out) = &flags.out {
        cfg.output_path = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cfg: &ExperimentConfig, workers: usize) -> Result<(), i32> {
    log::info!(
        "running {} trials x {} methods{} on {} UEs",
        cfg.trials,
        cfg.methods.len(),
        cfg.sweep
            .as_ref()
            .map(|s| format!(" x {} sweep values of {}", s.values.len(), s.param))
            .unwrap_or_default(),
        cfg.scenario.n_ues
    );
    let table = match experiment::run_experiment(cfg, workers) {
        Ok(table) => table,
        Err(experiment::RunError::Config(e)) => {
            eprintln!("error: {e}");
            return Err(2);
        }
        Err(e) => {
            eprintln!("error: {e}");
            return Err(3);
        }
    };
    if !table.failures.is_empty() {
        eprintln!("warning: {} trials failed and were skipped", table.failures.len());
    }
    match output::write_results(&cfg.output_path, &table) {
        Ok((trials_path, summary_path)) => {
            println!("wrote {}", trials_path.display());
            println!("wrote {}", summary_path.display());
        }
        Err(e) => {
            eprintln!("error: cannot write results: {e}");
            return Err(3);
        }
    }
    for row in &table.summary {
        if row.metric == "umr" || row.metric == "nmse" || row.metric == "aser" {
            println!(
                "sweep={} method={} {}: mean {:.6} (n={})",
                row.sweep_value.map(|v| v.to_string()).unwrap_or_else(|| "-".into()),
                row.method,
                row.metric,
                row.mean,
                row.count
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("JACD_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(flags) => match build_config(&flags) {
            Ok(cfg) => execute(&cfg, flags.workers),
            Err(e) => {
                eprintln!("config error: {e}");
                Err(2)
            }
        },
        Command::Sweep {
            param,
            values,
            flags,
        } => match build_config(&flags) {
            Ok(mut cfg) => {
                cfg.sweep = Some(Sweep {
                    param: param.clone(),
                    values,
                });
                // Surface bad parameter names before starting the run.
                let probe = cfg.sweep.as_ref().unwrap().values.first().copied();
                let check = probe
                    .map(|v| {
                        let mut c = cfg.clone();
                        c.sweep = None;
                        apply_sweep_value(&mut c, &param, v)
                    })
                    .unwrap_or_else(|| Err(ConfigError::plain("sweep needs at least one value")));
                match check.and_then(|_| cfg.validate()) {
                    Ok(()) => execute(&cfg, flags.workers),
                    Err(e) => {
                        eprintln!("config error: {e}");
                        Err(2)
                    }
                }
            }
            Err(e) => {
                eprintln!("config error: {e}");
                Err(2)
            }
        },
        Command::ProxSelftest => {
            let results = selftest::run_all();
            let mut ok = true;
            for r in &results {
                println!("{}", r.line());
                ok &= r.pass;
            }
            if ok {
                Ok(())
            } else {
                Err(3)
            }
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(code) => ExitCode::from(code as u8),
    }
}
