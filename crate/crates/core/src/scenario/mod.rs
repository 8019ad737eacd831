//! Cell-free mMTC scenario generation.
//!
//! Every solver input is synthesized from a config and a seed: uniform
//! geometry, three-slope path loss with log-normal shadowing, per-UE power
//! control into a bounded dynamic range, Rayleigh small-scale fading,
//! near-ETF pilots, Bernoulli activity, QPSK data, and unit-variance noise.

pub mod pathloss;
pub mod pilots;

use ndarray::{s, Array2};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::rng::{stream_rng, Stream};

pub use pathloss::{cost231_constant_db, link_budget_offset_db, noise_power_w, path_loss_db};
pub use pilots::{generate_pilots, row_coherence, welch_bound};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid scenario config: {0}")]
    InvalidConfig(String),
    #[error("pilot construction failed: {0}")]
    PilotConstruction(String),
}

/// Physical and protocol parameters of the cell-free system.
///
/// Defaults follow the standard simulation setup for this scenario family:
/// 400 UEs and 20 four-antenna APs in a 500 m by 500 m area, 50 pilot and
/// 200 data symbols, 20% activity, 1.9 GHz carrier, 20 MHz bandwidth, 0.1 W
/// transmit power with a 12 dB power-control window, 8 dB shadowing, 9 dB
/// noise figure at 290 K, and unit-amplitude QPSK (B = sqrt(0.5)).
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub n_ues: usize,
    pub n_aps: usize,
    pub antennas_per_ap: usize,
    pub pilot_len: usize,
    pub data_len: usize,
    pub activity_prob: f64,
    pub area_side_m: f64,
    pub ap_height_m: f64,
    pub ue_height_m: f64,
    pub carrier_freq_ghz: f64,
    pub bandwidth_hz: f64,
    pub tx_power_w: f64,
    pub dynamic_range_db: f64,
    pub shadow_sigma_db: f64,
    pub noise_figure_db: f64,
    pub noise_temp_k: f64,
    /// Half-side of the QPSK box: constellation points are `{+-B +- jB}`.
    pub box_b: f64,
    /// Seed for quantities fixed across trials (currently the pilot design).
    pub rng_seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            n_ues: 400,
            n_aps: 20,
            antennas_per_ap: 4,
            pilot_len: 50,
            data_len: 200,
            activity_prob: 0.2,
            area_side_m: 500.0,
            ap_height_m: 15.0,
            ue_height_m: 1.65,
            carrier_freq_ghz: 1.9,
            bandwidth_hz: 20e6,
            tx_power_w: 0.1,
            dynamic_range_db: 12.0,
            shadow_sigma_db: 8.0,
            noise_figure_db: 9.0,
            noise_temp_k: 290.0,
            box_b: std::f64::consts::FRAC_1_SQRT_2,
            rng_seed: 1,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let err = |msg: &str| Err(ScenarioError::InvalidConfig(msg.into()));
        if self.n_ues == 0 || self.n_aps == 0 || self.antennas_per_ap == 0 || self.pilot_len == 0 {
            return err("counts must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.activity_prob) {
            return err("activity_prob must lie in [0, 1]");
        }
        if self.box_b <= 0.0 {
            return err("box_b must be positive");
        }
        if self.dynamic_range_db < 0.0 {
            return err("dynamic_range_db must be nonnegative");
        }
        if self.area_side_m < 0.0 || self.shadow_sigma_db < 0.0 {
            return err("area_side_m and shadow_sigma_db must be nonnegative");
        }
        if self.tx_power_w <= 0.0 || self.bandwidth_hz <= 0.0 || self.noise_temp_k <= 0.0 {
            return err("tx_power_w, bandwidth_hz, noise_temp_k must be positive");
        }
        Ok(())
    }

    /// Total receive dimension M * P.
    pub fn receive_dim(&self) -> usize {
        self.antennas_per_ap * self.n_aps
    }

    /// Total frame length R_P + R_D.
    pub fn frame_len(&self) -> usize {
        self.pilot_len + self.data_len
    }
}

/// One synthesized problem instance: everything the receiver does not know.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    /// Per-UE activity indicators.
    pub activity: Vec<bool>,
    /// Channel before the activity mask, MP x N, AP blocks of M rows each.
    pub raw_channel: Array2<Complex64>,
    /// Effective channel: column n is `activity[n]` times the raw column.
    pub effective_channel: Array2<Complex64>,
    /// Pilot matrix, N x R_P, row norms exactly sqrt(R_P).
    pub pilots: Array2<Complex64>,
    /// Sparse data matrix, N x R_D; active rows are QPSK, inactive rows zero.
    pub data: Array2<Complex64>,
    pub ue_positions: Vec<[f64; 2]>,
    pub ap_positions: Vec<[f64; 2]>,
}

impl GroundTruth {
    pub fn n_active(&self) -> usize {
        self.activity.iter().filter(|&&a| a).count()
    }

    /// Stacked signal matrix `[X_P, X_D]`, N x R.
    pub fn signal(&self) -> Array2<Complex64> {
        let n = self.pilots.nrows();
        let (rp, rd) = (self.pilots.ncols(), self.data.ncols());
        let mut x = Array2::zeros((n, rp + rd));
        x.slice_mut(s![.., ..rp]).assign(&self.pilots);
        x.slice_mut(s![.., rp..]).assign(&self.data);
        x
    }

    /// Received signal without noise: `H [X_P, X_D]`.
    pub fn noiseless_received(&self) -> Array2<Complex64> {
        self.effective_channel.dot(&self.signal())
    }
}

/// Received signal and the noise variance it was generated with.
#[derive(Debug, Clone)]
pub struct ReceivedSignal {
    /// MP x (R_P + R_D).
    pub y: Array2<Complex64>,
    /// Per-entry complex noise variance; 1 under the normalization convention.
    pub noise_var: f64,
}

/// UE and AP positions, i.i.d. uniform over the square.
pub fn generate_geometry(cfg: &ScenarioConfig, seed: u64) -> (Vec<[f64; 2]>, Vec<[f64; 2]>) {
    let mut ue_rng = stream_rng(seed, Stream::UeGeometry);
    let mut ap_rng = stream_rng(seed, Stream::ApGeometry);
    let side = cfg.area_side_m;
    let ue_positions = (0..cfg.n_ues)
        .map(|_| [ue_rng.gen::<f64>() * side, ue_rng.gen::<f64>() * side])
        .collect();
    let ap_positions = (0..cfg.n_aps)
        .map(|_| [ap_rng.gen::<f64>() * side, ap_rng.gen::<f64>() * side])
        .collect();
    (ue_positions, ap_positions)
}

/// Large-scale link gains beta[n, p] (linear power), including log-normal
/// shadowing and the link-budget offset that normalizes noise to unit
/// variance.
pub fn large_scale_coeffs(
    ue_positions: &[[f64; 2]],
    ap_positions: &[[f64; 2]],
    cfg: &ScenarioConfig,
    seed: u64,
) -> Array2<f64> {
    let mut rng = stream_rng(seed, Stream::Shadowing);
    let shadow = Normal::new(0.0, cfg.shadow_sigma_db.max(0.0)).unwrap();
    let offset = link_budget_offset_db(cfg);
    let mut beta = Array2::zeros((ue_positions.len(), ap_positions.len()));
    for (n, ue) in ue_positions.iter().enumerate() {
        for (p, ap) in ap_positions.iter().enumerate() {
            let d = ((ue[0] - ap[0]).powi(2) + (ue[1] - ap[1]).powi(2)).sqrt();
            let z = if cfg.shadow_sigma_db > 0.0 {
                shadow.sample(&mut rng)
            } else {
                0.0
            };
            let gain_db = path_loss_db(d, cfg) + z + offset;
            beta[(n, p)] = 10f64.powf(gain_db / 10.0);
        }
    }
    beta
}

/// Power control: attenuate strong UEs so the ratio between the largest and
/// smallest total gain `g_n = sum_p beta[n, p]` is at most the dynamic range.
/// No UE is ever boosted.
pub fn power_control(beta: &Array2<f64>, dynamic_range_db: f64) -> Array2<f64> {
    let n = beta.nrows();
    if n <= 1 {
        return beta.clone();
    }
    let totals: Vec<f64> = (0..n).map(|i| beta.row(i).sum()).collect();
    let g_min = totals.iter().cloned().fold(f64::INFINITY, f64::min);
    if g_min.is_nan() || g_min <= 0.0 {
        return beta.clone();
    }
    let allowed = g_min * 10f64.powf(dynamic_range_db / 10.0);
    let mut out = beta.clone();
    for (i, &total) in totals.iter().enumerate() {
        if total > allowed {
            let scale = allowed / total;
            for v in out.row_mut(i) {
                *v *= scale;
            }
        }
    }
    out
}

/// Bernoulli activity and the masked QPSK data matrix. Active rows are i.i.d.
/// uniform over `{+-B +- jB}`, inactive rows are zero.
pub fn generate_activity_and_data(
    cfg: &ScenarioConfig,
    seed: u64,
) -> (Vec<bool>, Array2<Complex64>) {
    let mut act_rng = stream_rng(seed, Stream::Activity);
    let mut data_rng = stream_rng(seed, Stream::Data);
    let activity: Vec<bool> = (0..cfg.n_ues)
        .map(|_| act_rng.gen::<f64>() < cfg.activity_prob)
        .collect();
    let b = cfg.box_b;
    let mut data = Array2::zeros((cfg.n_ues, cfg.data_len));
    for n in 0..cfg.n_ues {
        for r in 0..cfg.data_len {
            // Draw for every row so the data stream does not depend on the
            // activity pattern; inactive rows are masked afterwards.
            let sym = match data_rng.gen_range(0..4u8) {
                0 => Complex64::new(b, b),
                1 => Complex64::new(b, -b),
                2 => Complex64::new(-b, b),
                _ => Complex64::new(-b, -b),
            };
            if activity[n] {
                data[(n, r)] = sym;
            }
        }
    }
    (activity, data)
}

/// Full instance synthesis with a precomputed pilot matrix (the pilot design
/// is a protocol constant, so callers running many trials cache it).
pub fn synthesize_with_pilots(
    cfg: &ScenarioConfig,
    seed: u64,
    pilots: &Array2<Complex64>,
) -> Result<(GroundTruth, ReceivedSignal), ScenarioError> {
    cfg.validate()?;
    if pilots.dim() != (cfg.n_ues, cfg.pilot_len) {
        return Err(ScenarioError::InvalidConfig(format!(
            "pilot matrix is {:?}, expected ({}, {})",
            pilots.dim(),
            cfg.n_ues,
            cfg.pilot_len
        )));
    }

    let (ue_positions, ap_positions) = generate_geometry(cfg, seed);
    let beta = large_scale_coeffs(&ue_positions, &ap_positions, cfg, seed);
    let beta = power_control(&beta, cfg.dynamic_range_db);
    let (activity, data) = generate_activity_and_data(cfg, seed);

    let (m, p, n) = (cfg.antennas_per_ap, cfg.n_aps, cfg.n_ues);
    let mp = m * p;
    let mut raw = Array2::zeros((mp, n));
    let mut ss_rng = stream_rng(seed, Stream::SmallScale);
    let normal = Normal::new(0.0, std::f64::consts::FRAC_1_SQRT_2).unwrap();
    for ue in 0..n {
        for ap in 0..p {
            let amp = beta[(ue, ap)].sqrt();
            for ant in 0..m {
                let g = Complex64::new(normal.sample(&mut ss_rng), normal.sample(&mut ss_rng));
                raw[(ap * m + ant, ue)] = amp * g;
            }
        }
    }

    let mut effective = raw.clone();
    for (ue, &active) in activity.iter().enumerate() {
        if !active {
            effective.column_mut(ue).fill(Complex64::new(0.0, 0.0));
        }
    }

    let gt = GroundTruth {
        activity,
        raw_channel: raw,
        effective_channel: effective,
        pilots: pilots.clone(),
        data,
        ue_positions,
        ap_positions,
    };

    let mut y = gt.noiseless_received();
    let mut noise_rng = stream_rng(seed, Stream::Noise);
    for i in 0..y.nrows() {
        for j in 0..y.ncols() {
            y[(i, j)] += Complex64::new(normal.sample(&mut noise_rng), normal.sample(&mut noise_rng));
        }
    }

    Ok((gt, ReceivedSignal { y, noise_var: 1.0 }))
}

/// Full instance synthesis, generating the pilot design from
/// `cfg.rng_seed` (pilots are fixed across trials of one configuration).
pub fn synthesize(cfg: &ScenarioConfig, seed: u64) -> Result<(GroundTruth, ReceivedSignal), ScenarioError> {
    let pilots = generate_pilots(cfg, cfg.rng_seed)?;
    synthesize_with_pilots(cfg, seed, &pilots)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::fro_norm2;

    fn small_cfg() -> ScenarioConfig {
        ScenarioConfig {
            n_ues: 12,
            n_aps: 3,
            antennas_per_ap: 2,
            pilot_len: 6,
            data_len: 8,
            ..ScenarioConfig::default()
        }
    }

    #[test]
    fn geometry_is_deterministic() {
        let cfg = small_cfg();
        let (u1, a1) = generate_geometry(&cfg, 5);
        let (u2, a2) = generate_geometry(&cfg, 5);
        assert_eq!(u1, u2);
        assert_eq!(a1, a2);
    }

    #[test]
    fn zero_area_puts_everything_at_origin() {
        let cfg = ScenarioConfig {
            area_side_m: 0.0,
            ..small_cfg()
        };
        let (ues, aps) = generate_geometry(&cfg, 1);
        assert!(ues.iter().all(|p| p[0] == 0.0 && p[1] == 0.0));
        assert!(aps.iter().all(|p| p[0] == 0.0 && p[1] == 0.0));
    }

    #[test]
    fn geometry_mean_matches_uniform_law() {
        let cfg = ScenarioConfig {
            n_ues: 10_000,
            ..ScenarioConfig::default()
        };
        let (ues, _) = generate_geometry(&cfg, 11);
        let mean_x: f64 = ues.iter().map(|p| p[0]).sum::<f64>() / ues.len() as f64;
        let mean_y: f64 = ues.iter().map(|p| p[1]).sum::<f64>() / ues.len() as f64;
        assert!((mean_x - 250.0).abs() < 5.0, "mean x = {mean_x}");
        assert!((mean_y - 250.0).abs() < 5.0, "mean y = {mean_y}");
    }

    #[test]
    fn equal_distances_give_equal_gains_without_shadowing() {
        let cfg = ScenarioConfig {
            shadow_sigma_db: 0.0,
            ..small_cfg()
        };
        let ues = vec![[100.0, 200.0], [300.0, 200.0]];
        let aps = vec![[200.0, 200.0]];
        let beta = large_scale_coeffs(&ues, &aps, &cfg, 3);
        assert!((beta[(0, 0)] - beta[(1, 0)]).abs() < 1e-18);
    }

    #[test]
    fn doubling_tx_power_scales_every_gain_by_3db() {
        let cfg = small_cfg();
        let cfg2 = ScenarioConfig {
            tx_power_w: 2.0 * cfg.tx_power_w,
            ..cfg.clone()
        };
        let (ues, aps) = generate_geometry(&cfg, 9);
        let b1 = large_scale_coeffs(&ues, &aps, &cfg, 9);
        let b2 = large_scale_coeffs(&ues, &aps, &cfg2, 9);
        for (x, y) in b1.iter().zip(b2.iter()) {
            let ratio_db = 10.0 * (y / x).log10();
            assert!((ratio_db - 3.0103).abs() < 1e-3, "ratio {ratio_db} dB");
        }
    }

    #[test]
    fn power_control_clips_to_exact_window() {
        // Two UEs with a 20 dB gain ratio collapse to exactly 12 dB.
        let beta = ndarray::array![[100.0], [1.0]];
        let out = power_control(&beta, 12.0);
        let ratio = out[(0, 0)] / out[(1, 0)];
        assert!((ratio - 10f64.powf(1.2)).abs() < 1e-9, "ratio {ratio}");
        assert!(out[(1, 0)] == 1.0, "weak UE must not change");
    }

    #[test]
    fn power_control_is_noop_within_range() {
        let beta = ndarray::array![[2.0, 1.0], [1.5, 1.5], [1.0, 2.0]];
        let out = power_control(&beta, 12.0);
        assert_eq!(out, beta);
        let single = ndarray::array![[5.0, 3.0]];
        assert_eq!(power_control(&single, 0.0), single);
    }

    #[test]
    fn power_control_never_boosts() {
        let beta = ndarray::array![[100.0, 50.0], [1.0, 0.5], [10.0, 5.0]];
        let out = power_control(&beta, 6.0);
        for (a, b) in out.iter().zip(beta.iter()) {
            assert!(a <= b);
        }
    }

    #[test]
    fn activity_extremes() {
        let cfg0 = ScenarioConfig {
            activity_prob: 0.0,
            ..small_cfg()
        };
        let (xi, data) = generate_activity_and_data(&cfg0, 2);
        assert!(xi.iter().all(|&a| !a));
        assert!(fro_norm2(&data.view()) == 0.0);

        let cfg1 = ScenarioConfig {
            activity_prob: 1.0,
            ..small_cfg()
        };
        let (xi, data) = generate_activity_and_data(&cfg1, 2);
        assert!(xi.iter().all(|&a| a));
        // Unit-amplitude QPSK when B = sqrt(0.5).
        for z in data.iter() {
            assert!((z.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn activity_rate_concentrates() {
        let cfg = ScenarioConfig {
            n_ues: 100,
            ..small_cfg()
        };
        let mut active = 0usize;
        let trials = 100;
        for t in 0..trials {
            let (xi, _) = generate_activity_and_data(&cfg, t);
            active += xi.iter().filter(|&&a| a).count();
        }
        let rate = active as f64 / (trials as f64 * cfg.n_ues as f64);
        assert!((0.19..=0.21).contains(&rate), "rate {rate}");
    }

    #[test]
    fn synthesize_is_bit_deterministic() {
        let cfg = small_cfg();
        let (g1, r1) = synthesize(&cfg, 17).unwrap();
        let (g2, r2) = synthesize(&cfg, 17).unwrap();
        assert_eq!(g1.effective_channel, g2.effective_channel);
        assert_eq!(g1.data, g2.data);
        assert_eq!(r1.y, r2.y);
    }

    #[test]
    fn effective_channel_has_exactly_inactive_zero_columns() {
        let cfg = small_cfg();
        let (gt, _) = synthesize(&cfg, 23).unwrap();
        let zero_cols = (0..cfg.n_ues)
            .filter(|&n| gt.effective_channel.column(n).iter().all(|z| z.norm() == 0.0))
            .count();
        assert_eq!(zero_cols, cfg.n_ues - gt.n_active());
        for (n, &active) in gt.activity.iter().enumerate() {
            let raw = gt.raw_channel.column(n);
            let eff = gt.effective_channel.column(n);
            if active {
                assert_eq!(raw, eff);
            }
        }
    }

    #[test]
    fn all_inactive_means_zero_noiseless_signal() {
        let cfg = ScenarioConfig {
            activity_prob: 0.0,
            ..small_cfg()
        };
        let (gt, _) = synthesize(&cfg, 3).unwrap();
        assert_eq!(fro_norm2(&gt.noiseless_received().view()), 0.0);
    }

    #[test]
    fn single_active_ue_gives_rank_one_noiseless_signal() {
        let cfg = small_cfg();
        // Hunt for a seed with exactly one active UE.
        let seed = (0..200)
            .find(|&s| {
                let (xi, _) = generate_activity_and_data(&cfg, s);
                xi.iter().filter(|&&a| a).count() == 1
            })
            .expect("no single-active seed found");
        let (gt, _) = synthesize(&cfg, seed).unwrap();
        let y0 = gt.noiseless_received();
        let qr = crate::linalg::ColPivQr::factor(&y0.view());
        assert_eq!(qr.rank(1e-10), 1);
    }

    #[test]
    fn noise_has_unit_variance() {
        let cfg = small_cfg();
        let mut total = 0.0;
        let mut count = 0usize;
        for seed in 0..100 {
            let (gt, rx) = synthesize(&cfg, seed).unwrap();
            let noise = &rx.y - &gt.noiseless_received();
            total += fro_norm2(&noise.view());
            count += noise.len();
        }
        let var = total / count as f64;
        assert!((var - 1.0).abs() < 0.05, "noise variance {var}");
    }
}
