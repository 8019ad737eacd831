//! Shared fixtures for the benchmark targets: a synthesized desk-scale
//! instance and pre-stacked prox inputs.

use jacd_core::scenario::{generate_pilots, synthesize_with_pilots, ScenarioConfig};
use jacd_core::{GroundTruth, ReceivedSignal};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Desk-scale scenario: 50 UEs, 16 APs with 4 antennas, 16 pilot and 64 data
/// symbols.
pub fn desk_scenario() -> ScenarioConfig {
    ScenarioConfig {
        n_ues: 50,
        n_aps: 16,
        antennas_per_ap: 4,
        pilot_len: 16,
        data_len: 64,
        ..ScenarioConfig::default()
    }
}

pub fn desk_instance(seed: u64) -> (GroundTruth, ReceivedSignal) {
    let cfg = desk_scenario();
    let pilots = generate_pilots(&cfg, cfg.rng_seed).expect("pilot construction");
    synthesize_with_pilots(&cfg, seed, &pilots).expect("synthesis")
}

/// Random complex channel block of length `m`.
pub fn random_block(m: usize, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    (0..m)
        .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
        .collect()
}

/// Random real-stacked data row of length `dim` at the given magnitude scale.
pub fn random_row(dim: usize, scale: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    (0..dim)
        .map(|_| (rng.gen::<f64>() - 0.5) * 2.0 * scale)
        .collect()
}
