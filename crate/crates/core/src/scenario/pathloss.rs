//! Three-slope path-loss model and link-budget normalization.
//!
//! Large-scale gain follows the usual cell-free model: a Hata-COST231
//! constant from carrier frequency and antenna heights, with 3.5 / 2.0 / 0.0
//! decay exponents beyond, between, and inside the 50 m / 10 m breakpoints.
//! Transmit power and thermal noise power are folded into the coefficients so
//! the synthesized noise has unit variance and the solver never sees absolute
//! units.

use super::ScenarioConfig;

/// Boltzmann constant in joule per kelvin.
pub const BOLTZMANN: f64 = 1.380649e-23;

/// Inner breakpoint of the three-slope model, meters.
pub const BREAKPOINT_D0_M: f64 = 10.0;
/// Outer breakpoint of the three-slope model, meters.
pub const BREAKPOINT_D1_M: f64 = 50.0;

/// Hata-COST231 propagation constant `L` in dB for the configured carrier
/// frequency (GHz) and antenna heights (m).
pub fn cost231_constant_db(cfg: &ScenarioConfig) -> f64 {
    let f_mhz = cfg.carrier_freq_ghz * 1e3;
    let log_f = f_mhz.log10();
    46.3 + 33.9 * log_f - 13.82 * cfg.ap_height_m.log10() - (1.1 * log_f - 0.7) * cfg.ue_height_m
        + (1.56 * log_f - 0.8)
}

/// Path gain in dB (negative) at 2-D distance `distance_m`. Distances below
/// one meter are clamped to one meter.
pub fn path_loss_db(distance_m: f64, cfg: &ScenarioConfig) -> f64 {
    let l = cost231_constant_db(cfg);
    let d_km = distance_m.max(1.0) / 1e3;
    let d0_km = BREAKPOINT_D0_M / 1e3;
    let d1_km = BREAKPOINT_D1_M / 1e3;
    if d_km > d1_km {
        -l - 35.0 * d_km.log10()
    } else if d_km > d0_km {
        -l - 15.0 * d1_km.log10() - 20.0 * d_km.log10()
    } else {
        -l - 15.0 * d1_km.log10() - 20.0 * d0_km.log10()
    }
}

/// Receiver noise power in watts: `k_B * T * BW` scaled by the noise figure.
pub fn noise_power_w(cfg: &ScenarioConfig) -> f64 {
    BOLTZMANN * cfg.noise_temp_k * cfg.bandwidth_hz * 10f64.powf(cfg.noise_figure_db / 10.0)
}

/// Link-budget offset in dB folded into the large-scale coefficients:
/// transmit power over noise power, so noise is unit variance afterwards.
pub fn link_budget_offset_db(cfg: &ScenarioConfig) -> f64 {
    10.0 * (cfg.tx_power_w / noise_power_w(cfg)).log10()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> ScenarioConfig {
        ScenarioConfig::default()
    }

    #[test]
    fn cost231_constant_matches_reference_value() {
        // 1.9 GHz, 15 m AP height, 1.65 m UE height.
        let l = cost231_constant_db(&cfg());
        assert!((l - 140.72).abs() < 5e-3, "L = {l}");
    }

    #[test]
    fn far_field_slope_is_35_db_per_decade() {
        let c = cfg();
        let delta = path_loss_db(1000.0, &c) - path_loss_db(100.0, &c);
        assert!((delta + 35.0).abs() < 1e-12, "delta = {delta}");
    }

    #[test]
    fn continuous_at_breakpoints() {
        let c = cfg();
        for d in [BREAKPOINT_D0_M, BREAKPOINT_D1_M] {
            let below = path_loss_db(d - 1e-9, &c);
            let above = path_loss_db(d + 1e-9, &c);
            assert!((below - above).abs() < 1e-6, "jump at {d} m");
        }
        // Exactly at the breakpoints the two segment formulas agree.
        let at_d1_far = -cost231_constant_db(&c) - 35.0 * (BREAKPOINT_D1_M / 1e3).log10();
        assert!((path_loss_db(BREAKPOINT_D1_M, &c) - at_d1_far).abs() < 1e-9);
    }

    #[test]
    fn zero_distance_clamps_to_one_meter() {
        let c = cfg();
        assert_eq!(path_loss_db(0.0, &c), path_loss_db(1.0, &c));
    }

    #[test]
    fn noise_power_matches_budget() {
        // k_B * 290 K * 20 MHz * 9 dB noise figure.
        let p = noise_power_w(&cfg());
        assert!((p - 6.36e-13).abs() / 6.36e-13 < 1e-2, "noise power {p}");
    }
}
