//! Oracle self-test suites for the math core.
//!
//! Each suite compares a production operation against an independent
//! reference over a seeded batch of random cases and reports the worst
//! deviation. The acceptance tests and the `prox-selftest` subcommand both
//! run these with the tolerances pinned here.

use std::time::{Duration, Instant};

use jacd_core::objective::{self, CVariant};
use jacd_core::oracle;
use jacd_core::prox;
use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

pub const PROX_CHANNEL_TOL: f64 = 1e-6;
pub const PROX_DATA_TOL: f64 = 1e-5;
pub const KKT_EPS: f64 = 1e-8;
pub const GRAD_REL_TOL: f64 = 1e-6;
pub const FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone)]
pub struct SuiteResult {
    pub name: &'static str,
    pub cases: usize,
    pub pass: bool,
    pub worst: f64,
    pub tolerance: f64,
    pub elapsed: Duration,
}

impl SuiteResult {
    pub fn line(&self) -> String {
        format!(
            "[{}] {} ({} cases, worst {:.3e} vs tol {:.0e}, {:.2}s)",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.cases,
            self.worst,
            self.tolerance,
            self.elapsed.as_secs_f64()
        )
    }
}

/// Channel-block prox vs a numeric minimizer of its objective.
/// Blocks of length 4, mixed scales, thresholds straddling the block norm.
pub fn prox_channel_suite(cases: usize) -> SuiteResult {
    let t0 = Instant::now();
    let mut rng = ChaCha12Rng::seed_from_u64(0x701);
    let mut worst = 0.0f64;
    for case in 0..cases {
        let scale = [0.1, 0.5, 1.0, 3.0, 10.0][case % 5];
        let m = 4;
        let h: Vec<Complex64> = (0..m)
            .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5) * scale)
            .collect();
        let norm: f64 = h.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        // Thresholds from far below to above the block norm.
        let t = rng.gen::<f64>() * 1.5 * norm.max(1e-3);
        let ours = prox::prox_channel_block(&h, t);
        let reference = oracle::numeric_prox_channel(&h, t);
        for (a, b) in ours.iter().zip(&reference) {
            worst = worst.max((a.re - b.re).abs()).max((a.im - b.im).abs());
        }
    }
    SuiteResult {
        name: "prox-channel oracle",
        cases,
        pass: worst < PROX_CHANNEL_TOL,
        worst,
        tolerance: PROX_CHANNEL_TOL,
        elapsed: t0.elapsed(),
    }
}

/// Data-row prox vs the numeric box-constrained minimizer, plus a KKT check
/// of every output. Rows span the four regimes: no clamping, partial
/// clamping, full clamping, and zero output; the suite fails if any regime
/// goes unexercised.
pub fn prox_data_suite(cases: usize) -> SuiteResult {
    let t0 = Instant::now();
    let b = std::f64::consts::FRAC_1_SQRT_2;
    let mut rng = ChaCha12Rng::seed_from_u64(0x702);
    let dim = 16;
    let mut worst = 0.0f64;
    // [zero output, plain shrinkage, partial clamp, full clamp]
    let mut regimes = [0usize; 4];
    for case in 0..cases {
        // Regime mix via the magnitude scale: small rows stay unclamped or
        // die, large rows clamp partially or fully.
        let scale = [0.05, 0.3, 1.0, 4.0][case % 4];
        let r_hat: Vec<f64> = (0..dim)
            .map(|_| (rng.gen::<f64>() - 0.5) * 2.0 * scale)
            .collect();
        let norm: f64 = r_hat.iter().map(|v| v * v).sum::<f64>().sqrt();
        let t = match case % 3 {
            0 => rng.gen::<f64>() * 0.3,
            1 => rng.gen::<f64>() * norm.max(1e-6),
            _ => norm * (0.9 + 0.2 * rng.gen::<f64>()),
        };
        let ours = prox::prox_data_row(&r_hat, t, b, 1e-13).expect("prox_data_row failed");
        let clamped = ours.iter().filter(|v| v.abs() == b).count();
        let regime = if ours.iter().all(|v| *v == 0.0) {
            0
        } else if clamped == 0 {
            1
        } else if clamped < dim {
            2
        } else {
            3
        };
        regimes[regime] += 1;
        let reference = oracle::numeric_group_prox(&r_hat, t, Some(b));
        for (a, r) in ours.iter().zip(&reference) {
            worst = worst.max((a - r).abs());
        }
        let kkt = prox::verify_kkt(&ours, &r_hat, t, b, KKT_EPS);
        if !kkt.ok {
            return SuiteResult {
                name: "prox-data oracle",
                cases,
                pass: false,
                worst: f64::INFINITY,
                tolerance: PROX_DATA_TOL,
                elapsed: t0.elapsed(),
            };
        }
    }
    let all_regimes = regimes.iter().all(|&c| c > 0);
    SuiteResult {
        name: "prox-data oracle",
        cases,
        pass: worst < PROX_DATA_TOL && all_regimes,
        worst,
        tolerance: PROX_DATA_TOL,
        elapsed: t0.elapsed(),
    }
}

/// Analytic gradient vs central finite differences of the smooth objective,
/// on random instances with MP = 16, N = 8, R = 16, for lambda in {0, 1e-2}
/// and both constellation variants.
pub fn gradient_suite(cases: usize) -> SuiteResult {
    let t0 = Instant::now();
    let b = std::f64::consts::FRAC_1_SQRT_2;
    let mut rng = ChaCha12Rng::seed_from_u64(0x703);
    let (mp, n, r_p, r_d) = (16, 8, 8, 8);
    let randc = |rows: usize, cols: usize, rng: &mut ChaCha12Rng| -> Array2<Complex64> {
        Array2::from_shape_fn((rows, cols), |_| {
            Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        })
    };
    let mut worst = 0.0f64;
    for case in 0..cases {
        let lambda = if case % 2 == 0 { 0.0 } else { 1e-2 };
        let variant = if (case / 2) % 2 == 0 {
            CVariant::PerComponent
        } else {
            CVariant::ComplexModulus
        };
        let h = randc(mp, n, &mut rng);
        let x_d = randc(n, r_d, &mut rng);
        let pilots = randc(n, r_p, &mut rng);
        let y = randc(mp, r_p + r_d, &mut rng);
        let (g_h, g_x) = objective::grad_smooth(
            &h.view(),
            &x_d.view(),
            &y.view(),
            &pilots.view(),
            lambda,
            b,
            variant,
        );
        for _ in 0..3 {
            let mut d_h = randc(mp, n, &mut rng);
            let mut d_x = randc(n, r_d, &mut rng);
            let scale = (jacd_core::linalg::fro_norm2(&d_h.view())
                + jacd_core::linalg::fro_norm2(&d_x.view()))
            .sqrt();
            d_h.mapv_inplace(|z| z / scale);
            d_x.mapv_inplace(|z| z / scale);
            let analytic = oracle::real_inner(&g_h, &g_x, &d_h, &d_x);
            let fd = oracle::fd_directional(
                |hv, xv| {
                    objective::objective_smooth(hv, xv, &y.view(), &pilots.view(), lambda, b, variant)
                },
                &h,
                &x_d,
                &d_h,
                &d_x,
                FD_STEP,
            );
            let rel = (analytic - fd).abs() / analytic.abs().max(fd.abs()).max(1e-9);
            worst = worst.max(rel);
        }
    }
    SuiteResult {
        name: "gradient finite-difference",
        cases,
        pass: worst < GRAD_REL_TOL,
        worst,
        tolerance: GRAD_REL_TOL,
        elapsed: t0.elapsed(),
    }
}

/// All suites at self-test sizes.
pub fn run_all() -> Vec<SuiteResult> {
    vec![
        prox_channel_suite(1000),
        prox_data_suite(1000),
        gradient_suite(100),
    ]
}
