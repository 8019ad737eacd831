//! Result tables and CSV persistence.
//!
//! Two files per run: `trials.csv` with one row per (sweep value, trial,
//! method), and `summary.csv` with per-(sweep value, method, metric)
//! aggregates. Missing metrics (e.g. ASER of a trial with no active UE) are
//! written as empty fields, not zeros. No timestamps; reruns of the same
//! configuration produce byte-identical values apart from runtimes.

use std::io::{self, Write};
use std::path::{Path, PathBuf};

use jacd_core::metrics::aggregate;

use crate::config::Method;
use crate::experiment::TrialFailure;

#[derive(Debug, Clone)]
pub struct TrialRow {
    pub sweep_value: Option<f64>,
    pub method: Method,
    pub trial: usize,
    pub seed: u64,
    pub n_active: usize,
    pub umr: f64,
    pub nmse: Option<f64>,
    pub aser: Option<f64>,
    pub iterations: usize,
    pub runtime_ms: f64,
}

#[derive(Debug, Clone)]
pub struct SummaryRow {
    pub sweep_value: Option<f64>,
    pub method: Method,
    pub metric: &'static str,
    pub mean: f64,
    pub stderr: Option<f64>,
    pub count: usize,
}

#[derive(Debug)]
pub struct ResultTable {
    pub rows: Vec<TrialRow>,
    pub summary: Vec<SummaryRow>,
    pub failures: Vec<TrialFailure>,
}

pub const SUMMARY_METRICS: [&str; 5] = ["umr", "nmse", "aser", "iterations", "runtime_ms"];

/// Aggregate trial rows per (sweep value, method, metric), in the given
/// sweep and method order.
pub fn summarize(
    rows: &[TrialRow],
    sweep_order: &[Option<f64>],
    methods: &[Method],
) -> Vec<SummaryRow> {
    let mut out = Vec::new();
    for &sweep_value in sweep_order {
        for &method in methods {
            let group: Vec<&TrialRow> = rows
                .iter()
                .filter(|r| r.sweep_value == sweep_value && r.method == method)
                .collect();
            if group.is_empty() {
                continue;
            }
            for metric in SUMMARY_METRICS {
                let values: Vec<f64> = match metric {
                    "umr" => group.iter().map(|r| r.umr).collect(),
                    "nmse" => group.iter().filter_map(|r| r.nmse).collect(),
                    "aser" => group.iter().filter_map(|r| r.aser).collect(),
                    "iterations" => group.iter().map(|r| r.iterations as f64).collect(),
                    "runtime_ms" => group.iter().map(|r| r.runtime_ms).collect(),
                    _ => unreachable!(),
                };
                if let Some(agg) = aggregate(&values) {
                    out.push(SummaryRow {
                        sweep_value,
                        method,
                        metric,
                        mean: agg.mean,
                        stderr: agg.stderr,
                        count: agg.count,
                    });
                }
            }
        }
    }
    out
}

fn fmt_opt_f64(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_trials_csv<W: Write>(w: &mut W, rows: &[TrialRow]) -> io::Result<()> {
    writeln!(
        w,
        "sweep_value,method,trial,seed,n_active,umr,nmse,aser,iterations,runtime_ms"
    )?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{}",
            fmt_opt_f64(r.sweep_value),
            r.method,
            r.trial,
            r.seed,
            r.n_active,
            r.umr,
            fmt_opt_f64(r.nmse),
            fmt_opt_f64(r.aser),
            r.iterations,
            r.runtime_ms,
        )?;
    }
    Ok(())
}

pub fn write_summary_csv<W: Write>(w: &mut W, rows: &[SummaryRow]) -> io::Result<()> {
    writeln!(w, "sweep_value,method,metric,mean,stderr,count")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            fmt_opt_f64(r.sweep_value),
            r.method,
            r.metric,
            r.mean,
            fmt_opt_f64(r.stderr),
            r.count,
        )?;
    }
    Ok(())
}

/// Write `trials.csv` and `summary.csv` under `dir`, returning their paths.
pub fn write_results(dir: &Path, table: &ResultTable) -> io::Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir)?;
    let trials_path = dir.join("trials.csv");
    let summary_path = dir.join("summary.csv");
    let mut trials = io::BufWriter::new(std::fs::File::create(&trials_path)?);
    write_trials_csv(&mut trials, &table.rows)?;
    trials.flush()?;
    let mut summary = io::BufWriter::new(std::fs::File::create(&summary_path)?);
    write_summary_csv(&mut summary, &table.summary)?;
    summary.flush()?;
    Ok((trials_path, summary_path))
}
