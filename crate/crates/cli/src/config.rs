//! Experiment configuration: presets, the flat key-value config format, and
//! sweep-parameter plumbing.
//!
//! Config files are plain text with `[scenario]`, `[solver]`, and
//! `[experiment]` sections of `key = value` lines. Unknown keys are rejected
//! and every diagnostic carries a line number. Omitted keys keep their
//! defaults (the standard large-scale setup with 20 APs).

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use jacd_core::objective::CVariant;
use jacd_core::scenario::ScenarioConfig;
use jacd_core::solver::{ActivityThreshold, SolverConfig};
use thiserror::Error;

#[derive(Debug, Error)]
#[error("{}{message}", .line.map(|l| format!("line {l}: ")).unwrap_or_default())]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    fn at(line: usize, message: impl Into<String>) -> Self {
        ConfigError {
            line: Some(line),
            message: message.into(),
        }
    }

    pub fn plain(message: impl Into<String>) -> Self {
        ConfigError {
            line: None,
            message: message.into(),
        }
    }
}

/// The three schemes the harness can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Proposed,
    NoDataSparsity,
    PilotThenZf,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Proposed, Method::NoDataSparsity, Method::PilotThenZf];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Proposed => "proposed",
            Method::NoDataSparsity => "no_data_sparsity",
            Method::PilotThenZf => "pilot_then_zf",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "proposed" => Ok(Method::Proposed),
            "no_data_sparsity" => Ok(Method::NoDataSparsity),
            "pilot_then_zf" => Ok(Method::PilotThenZf),
            other => Err(format!(
                "unknown method '{other}' (expected proposed, no_data_sparsity, pilot_then_zf)"
            )),
        }
    }
}

/// Sweep over one numeric scenario or solver parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub param: String,
    pub values: Vec<f64>,
}

/// Shipped configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Small instances for quick paired comparisons on a workstation.
    Desk,
    /// The full large-scale setup (expensive).
    Paper,
}

impl FromStr for Preset {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "desk" => Ok(Preset::Desk),
            "paper" => Ok(Preset::Paper),
            other => Err(format!("unknown preset '{other}' (expected desk or paper)")),
        }
    }
}

/// Everything one `jacd run` needs.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub scenario: ScenarioConfig,
    pub solver: SolverConfig,
    /// Absolute activity-energy threshold; `None` selects the relative rule.
    pub t_th: Option<f64>,
    /// Fraction of the peak column energy used when `t_th` is automatic.
    pub t_th_alpha: f64,
    pub methods: Vec<Method>,
    pub trials: usize,
    pub base_seed: u64,
    pub sweep: Option<Sweep>,
    pub output_path: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            scenario: ScenarioConfig::default(),
            solver: SolverConfig::default(),
            t_th: None,
            t_th_alpha: 1e-3,
            methods: Method::ALL.to_vec(),
            trials: 5000,
            base_seed: 1,
            sweep: None,
            output_path: PathBuf::from("results"),
        }
    }
}

impl ExperimentConfig {
    pub fn preset(preset: Preset) -> Self {
        let mut cfg = ExperimentConfig::default();
        // Presets exist for paired method comparisons; plain backtracking
        // keeps iterate trajectories smooth so per-trial differences reflect
        // the objective, not spectral step-size chatter.
        cfg.solver.bb_steps = false;
        match preset {
            Preset::Desk => {
                cfg.scenario.n_ues = 50;
                cfg.scenario.n_aps = 4;
                cfg.scenario.pilot_len = 16;
                cfg.scenario.data_len = 64;
                cfg.trials = 200;
                cfg.sweep = Some(Sweep {
                    param: "n_aps".into(),
                    values: vec![4.0, 8.0, 16.0],
                });
            }
            Preset::Paper => {
                cfg.sweep = Some(Sweep {
                    param: "n_aps".into(),
                    values: vec![20.0, 40.0, 60.0, 80.0, 100.0],
                });
            }
        }
        cfg
    }

    /// Solver config ready for a run: activity threshold assembled and the
    /// box matched to the scenario constellation.
    pub fn resolved_solver(&self) -> SolverConfig {
        let mut solver = self.solver.clone();
        solver.box_b = self.scenario.box_b;
        solver.threshold = match self.t_th {
            Some(v) => ActivityThreshold::Absolute(v),
            None => ActivityThreshold::RelativeToPeak(self.t_th_alpha),
        };
        solver
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.scenario
            .validate()
            .map_err(|e| ConfigError::plain(e.to_string()))?;
        self.resolved_solver()
            .validate()
            .map_err(|e| ConfigError::plain(e.to_string()))?;
        if self.trials == 0 {
            return Err(ConfigError::plain("trials must be at least 1"));
        }
        if self.methods.is_empty() {
            return Err(ConfigError::plain("methods must be non-empty"));
        }
        if self.t_th.is_some_and(|v| v < 0.0) {
            return Err(ConfigError::plain("t_th must be nonnegative"));
        }
        if self.t_th_alpha.is_nan() || self.t_th_alpha <= 0.0 {
            return Err(ConfigError::plain("t_th_alpha must be positive"));
        }
        if let Some(sweep) = &self.sweep {
            if sweep.values.is_empty() {
                return Err(ConfigError::plain("sweep needs at least one value"));
            }
            // Every sweep value must be applicable to a copy of the config.
            for &v in &sweep.values {
                let mut probe = self.clone();
                probe.sweep = None;
                apply_sweep_value(&mut probe, &sweep.param, v)?;
                probe.validate()?;
            }
        }
        Ok(())
    }
}

/// Set a named numeric parameter on the scenario or solver. Integer-valued
/// fields reject fractional values.
pub fn apply_sweep_value(
    cfg: &mut ExperimentConfig,
    param: &str,
    value: f64,
) -> Result<(), ConfigError> {
    let as_count = |value: f64| -> Result<usize, ConfigError> {
        if value.fract() != 0.0 || value < 0.0 || !value.is_finite() {
            return Err(ConfigError::plain(format!(
                "parameter '{param}' needs a nonnegative integer, got {value}"
            )));
        }
        Ok(value as usize)
    };
    let s = &mut cfg.scenario;
    match param {
        "n_ues" => s.n_ues = as_count(value)?,
        "n_aps" => s.n_aps = as_count(value)?,
        "antennas_per_ap" => s.antennas_per_ap = as_count(value)?,
        "pilot_len" => s.pilot_len = as_count(value)?,
        "data_len" => s.data_len = as_count(value)?,
        "activity_prob" => s.activity_prob = value,
        "area_side_m" => s.area_side_m = value,
        "ap_height_m" => s.ap_height_m = value,
        "ue_height_m" => s.ue_height_m = value,
        "carrier_freq_ghz" => s.carrier_freq_ghz = value,
        "bandwidth_hz" => s.bandwidth_hz = value,
        "tx_power_w" => s.tx_power_w = value,
        "dynamic_range_db" => s.dynamic_range_db = value,
        "shadow_sigma_db" => s.shadow_sigma_db = value,
        "noise_figure_db" => s.noise_figure_db = value,
        "noise_temp_k" => s.noise_temp_k = value,
        "box_b" => s.box_b = value,
        "mu_h" => cfg.solver.mu_h = Some(value),
        "mu_x" => cfg.solver.mu_x = Some(value),
        "lambda" => cfg.solver.lambda = value,
        "lambda_ramp_iters" => cfg.solver.lambda_ramp_iters = as_count(value)?,
        "max_iters" => cfg.solver.max_iters = as_count(value)?,
        "tol" => cfg.solver.tol = value,
        "tau0" => cfg.solver.tau0 = value,
        "backtrack_factor" => cfg.solver.backtrack_factor = value,
        "scale_eq_tol" => cfg.solver.scale_eq_tol = value,
        "t_th" => cfg.t_th = Some(value),
        "t_th_alpha" => cfg.t_th_alpha = value,
        other => {
            return Err(ConfigError::plain(format!(
                "unknown sweep parameter '{other}'"
            )))
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    None,
    Scenario,
    Solver,
    Experiment,
}

/// Apply a config file onto `cfg` (typically a preset or the defaults).
pub fn apply_config_str(cfg: &mut ExperimentConfig, text: &str) -> Result<(), ConfigError> {
    let mut section = Section::None;
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = match raw.find(['#', ';']) {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            section = match name.trim() {
                "scenario" => Section::Scenario,
                "solver" => Section::Solver,
                "experiment" => Section::Experiment,
                other => {
                    return Err(ConfigError::at(lineno, format!("unknown section [{other}]")))
                }
            };
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError::at(
                lineno,
                format!("expected 'key = value', got '{line}'"),
            ));
        };
        let key = key.trim();
        let value = value.trim();
        match section {
            Section::None => {
                return Err(ConfigError::at(
                    lineno,
                    format!("key '{key}' appears before any [section] header"),
                ))
            }
            Section::Scenario => apply_scenario_key(cfg, key, value, lineno)?,
            Section::Solver => apply_solver_key(cfg, key, value, lineno)?,
            Section::Experiment => apply_experiment_key(cfg, key, value, lineno)?,
        }
    }
    Ok(())
}

fn parse_num<T: FromStr>(key: &str, value: &str, lineno: usize) -> Result<T, ConfigError> {
    value
        .parse()
        .map_err(|_| ConfigError::at(lineno, format!("invalid value '{value}' for {key}")))
}

fn apply_scenario_key(
    cfg: &mut ExperimentConfig,
    key: &str,
    value: &str,
    lineno: usize,
) -> Result<(), ConfigError> {
    let s = &mut cfg.scenario;
    match key {
        "n_ues" => s.n_ues = parse_num(key, value, lineno)?,
        "n_aps" => s.n_aps = parse_num(key, value, lineno)?,
        "antennas_per_ap" => s.antennas_per_ap = parse_num(key, value, lineno)?,
        "pilot_len" => s.pilot_len = parse_num(key, value, lineno)?,
        "data_len" => s.data_len = parse_num(key, value, lineno)?,
        "activity_prob" => {
            let v: f64 = parse_num(key, value, lineno)?;
            if !(0.0..=1.0).contains(&v) {
                return Err(ConfigError::at(
                    lineno,
                    format!("activity_prob must lie in [0, 1], got {v}"),
                ));
            }
            s.activity_prob = v;
        }
        "area_side_m" => s.area_side_m = parse_num(key, value, lineno)?,
        "ap_height_m" => s.ap_height_m = parse_num(key, value, lineno)?,
        "ue_height_m" => s.ue_height_m = parse_num(key, value, lineno)?,
        "carrier_freq_ghz" => s.carrier_freq_ghz = parse_num(key, value, lineno)?,
        "bandwidth_hz" => s.bandwidth_hz = parse_num(key, value, lineno)?,
        "tx_power_w" => s.tx_power_w = parse_num(key, value, lineno)?,
        "dynamic_range_db" => s.dynamic_range_db = parse_num(key, value, lineno)?,
        "shadow_sigma_db" => s.shadow_sigma_db = parse_num(key, value, lineno)?,
        "noise_figure_db" => s.noise_figure_db = parse_num(key, value, lineno)?,
        "noise_temp_k" => s.noise_temp_k = parse_num(key, value, lineno)?,
        "box_b" => s.box_b = parse_num(key, value, lineno)?,
        "rng_seed" => s.rng_seed = parse_num(key, value, lineno)?,
        other => {
            return Err(ConfigError::at(
                lineno,
                format!("unknown key '{other}' in [scenario]"),
            ))
        }
    }
    Ok(())
}

fn apply_solver_key(
    cfg: &mut ExperimentConfig,
    key: &str,
    value: &str,
    lineno: usize,
) -> Result<(), ConfigError> {
    let sv = &mut cfg.solver;
    match key {
        "mu_h" => sv.mu_h = parse_auto(key, value, lineno)?,
        "mu_x" => sv.mu_x = parse_auto(key, value, lineno)?,
        "lambda" => sv.lambda = parse_num(key, value, lineno)?,
        "lambda_ramp_iters" => sv.lambda_ramp_iters = parse_num(key, value, lineno)?,
        "c_variant" => {
            sv.c_variant = match value {
                "per_component" => CVariant::PerComponent,
                "complex_modulus" => CVariant::ComplexModulus,
                other => {
                    return Err(ConfigError::at(
                        lineno,
                        format!(
                            "invalid c_variant '{other}' (expected per_component or complex_modulus)"
                        ),
                    ))
                }
            }
        }
        "max_iters" => sv.max_iters = parse_num(key, value, lineno)?,
        "tol" => sv.tol = parse_num(key, value, lineno)?,
        "t_th" => cfg.t_th = parse_auto(key, value, lineno)?,
        "t_th_alpha" => cfg.t_th_alpha = parse_num(key, value, lineno)?,
        "tau0" => sv.tau0 = parse_num(key, value, lineno)?,
        "backtrack_factor" => sv.backtrack_factor = parse_num(key, value, lineno)?,
        "bb_steps" => {
            sv.bb_steps = match value {
                "true" | "on" => true,
                "false" | "off" => false,
                other => {
                    return Err(ConfigError::at(
                        lineno,
                        format!("invalid bb_steps '{other}' (expected true or false)"),
                    ))
                }
            }
        }
        "scale_eq_tol" => sv.scale_eq_tol = parse_num(key, value, lineno)?,
        other => {
            return Err(ConfigError::at(
                lineno,
                format!("unknown key '{other}' in [solver]"),
            ))
        }
    }
    Ok(())
}

fn parse_auto(key: &str, value: &str, lineno: usize) -> Result<Option<f64>, ConfigError> {
    if value == "auto" {
        return Ok(None);
    }
    let v: f64 = parse_num(key, value, lineno)?;
    if !v.is_finite() {
        return Err(ConfigError::at(
            lineno,
            format!("invalid value '{value}' for {key}"),
        ));
    }
    Ok(Some(v))
}

fn apply_experiment_key(
    cfg: &mut ExperimentConfig,
    key: &str,
    value: &str,
    lineno: usize,
) -> Result<(), ConfigError> {
    match key {
        "methods" => {
            let mut methods = Vec::new();
            for part in value.split(',') {
                let m: Method = part
                    .parse()
                    .map_err(|e: String| ConfigError::at(lineno, e))?;
                if !methods.contains(&m) {
                    methods.push(m);
                }
            }
            if methods.is_empty() {
                return Err(ConfigError::at(lineno, "methods must be non-empty"));
            }
            cfg.methods = methods;
        }
        "trials" => cfg.trials = parse_num(key, value, lineno)?,
        "base_seed" => cfg.base_seed = parse_num(key, value, lineno)?,
        "sweep" => {
            let Some((param, values)) = value.split_once(':') else {
                return Err(ConfigError::at(
                    lineno,
                    format!("sweep must look like 'param: v1,v2,...', got '{value}'"),
                ));
            };
            let values: Result<Vec<f64>, _> = values
                .split(',')
                .map(|v| parse_num::<f64>("sweep value", v.trim(), lineno))
                .collect();
            cfg.sweep = Some(Sweep {
                param: param.trim().to_string(),
                values: values?,
            });
        }
        "output_path" => cfg.output_path = PathBuf::from(value),
        other => {
            return Err(ConfigError::at(
                lineno,
                format!("unknown key '{other}' in [experiment]"),
            ))
        }
    }
    Ok(())
}

/// Read and apply a config file onto `cfg`.
pub fn apply_config_file(cfg: &mut ExperimentConfig, path: &Path) -> Result<(), ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::plain(format!("cannot read {}: {e}", path.display())))?;
    apply_config_str(cfg, &text)
}

/// Parse a config file into a full experiment configuration on top of the
/// defaults, validating the result.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let mut cfg = ExperimentConfig::default();
    apply_config_file(&mut cfg, path)?;
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_gives_paper_defaults_with_20_aps() {
        let mut cfg = ExperimentConfig::default();
        apply_config_str(&mut cfg, "").unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.scenario.n_aps, 20);
        assert_eq!(cfg.scenario.n_ues, 400);
        assert_eq!(cfg.scenario.pilot_len, 50);
        assert_eq!(cfg.trials, 5000);
    }

    #[test]
    fn out_of_range_activity_prob_reports_line() {
        let mut cfg = ExperimentConfig::default();
        let err = apply_config_str(&mut cfg, "[scenario]\nactivity_prob = 1.5\n").unwrap_err();
        assert_eq!(err.line, Some(2));
        assert!(err.message.contains("activity_prob"));
    }

    #[test]
    fn sweep_line_parses_five_points() {
        let mut cfg = ExperimentConfig::default();
        apply_config_str(
            &mut cfg,
            "[experiment]\nsweep = n_aps: 20,40,60,80,100\n",
        )
        .unwrap();
        let sweep = cfg.sweep.unwrap();
        assert_eq!(sweep.param, "n_aps");
        assert_eq!(sweep.values, vec![20.0, 40.0, 60.0, 80.0, 100.0]);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut cfg = ExperimentConfig::default();
        let err = apply_config_str(&mut cfg, "[scenario]\nn_apss = 4\n").unwrap_err();
        assert!(err.message.contains("unknown key"));
        let err = apply_config_str(&mut cfg, "[nonsense]\n").unwrap_err();
        assert!(err.message.contains("unknown section"));
        let err = apply_config_str(&mut cfg, "n_aps = 4\n").unwrap_err();
        assert!(err.message.contains("before any"));
    }

    #[test]
    fn malformed_line_reports_position() {
        let mut cfg = ExperimentConfig::default();
        let err = apply_config_str(&mut cfg, "[solver]\nmu_h\n").unwrap_err();
        assert_eq!(err.line, Some(2));
    }

    #[test]
    fn solver_auto_and_numeric_values() {
        let mut cfg = ExperimentConfig::default();
        apply_config_str(&mut cfg, "[solver]\nmu_h = 12.5\nmu_x = auto\nbb_steps = false\n")
            .unwrap();
        assert_eq!(cfg.solver.mu_h, Some(12.5));
        assert_eq!(cfg.solver.mu_x, None);
        assert!(!cfg.solver.bb_steps);
    }

    #[test]
    fn sweep_rejects_unknown_and_fractional_count_params() {
        let mut cfg = ExperimentConfig {
            sweep: Some(Sweep {
                param: "bogus".into(),
                values: vec![1.0],
            }),
            ..ExperimentConfig::default()
        };
        assert!(cfg.validate().is_err());
        cfg.sweep = Some(Sweep {
            param: "n_aps".into(),
            values: vec![2.5],
        });
        assert!(cfg.validate().is_err());
        cfg.sweep = Some(Sweep {
            param: "n_aps".into(),
            values: vec![4.0, 8.0],
        });
        cfg.validate().unwrap();
    }

    #[test]
    fn desk_preset_matches_advertised_shape() {
        let cfg = ExperimentConfig::preset(Preset::Desk);
        assert_eq!(cfg.scenario.n_ues, 50);
        assert_eq!(cfg.scenario.pilot_len, 16);
        assert_eq!(cfg.scenario.data_len, 64);
        assert_eq!(cfg.trials, 200);
        assert_eq!(cfg.sweep.as_ref().unwrap().values, vec![4.0, 8.0, 16.0]);
        cfg.validate().unwrap();
    }

    #[test]
    fn comments_and_blank_lines_are_ignored()  {
        let mut cfg = ExperimentConfig::default();
        apply_config_str(
            &mut cfg,
            "# full line comment\n\n[experiment]\ntrials = 7 ; trailing\n",
        )
        .unwrap();
        assert_eq!(cfg.trials, 7);
    }

    #[test]
    fn resolved_solver_mirrors_scenario_box_and_threshold() {
        let mut cfg = ExperimentConfig::default();
        cfg.scenario.box_b = 2.0;
        cfg.t_th = Some(0.25);
        let sv = cfg.resolved_solver();
        assert_eq!(sv.box_b, 2.0);
        assert_eq!(sv.threshold, ActivityThreshold::Absolute(0.25));
        cfg.t_th = None;
        cfg.t_th_alpha = 0.01;
        assert_eq!(
            cfg.resolved_solver().threshold,
            ActivityThreshold::RelativeToPeak(0.01)
        );
    }
}
