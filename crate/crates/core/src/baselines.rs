//! Baseline schemes the solver is compared against.
//!
//! Both baselines reuse the FBS engine: pilot-only joint AUD-CE drops the
//! data block entirely (followed by zero-forcing detection), and the
//! no-data-sparsity variant runs the full solver with the data group weight
//! and constellation regularizer disabled.

use ndarray::{Array2, ArrayView2};
use num_complex::Complex64;

use crate::linalg;
use crate::solver::{self, harden_decisions, JacdProblem, SolveOutcome, SolverConfig, SolverError};

/// Relative tolerance used to declare the active-channel matrix
/// rank-deficient during zero-forcing.
pub const ZF_RANK_RTOL: f64 = 1e-10;

/// Diagnostics of a zero-forcing equalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ZfReport {
    /// Number of UEs the equalizer solved for.
    pub detected: usize,
    /// Numerical rank of their channel columns.
    pub rank: usize,
}

impl ZfReport {
    pub fn rank_deficient(&self) -> bool {
        self.rank < self.detected
    }
}

/// Joint AUD-CE from pilots alone: the FBS engine on the pilot block with no
/// data part, activity from the channel-energy threshold.
pub fn pilot_only_aud_ce(
    y_pilot: ArrayView2<Complex64>,
    pilots: ArrayView2<Complex64>,
    antennas_per_ap: usize,
    cfg: &SolverConfig,
) -> Result<SolveOutcome, SolverError> {
    if y_pilot.ncols() != pilots.ncols() {
        return Err(SolverError::DimensionMismatch(format!(
            "pilot observation has {} columns, pilot matrix {}",
            y_pilot.ncols(),
            pilots.ncols()
        )));
    }
    let problem = JacdProblem::new(y_pilot, pilots, antennas_per_ap)?;
    let h0 = Array2::zeros((problem.receive_dim(), problem.n_ues()));
    let x0 = Array2::zeros((problem.n_ues(), 0));
    solver::run_fbs(h0, x0, &problem, cfg)
}

/// Zero-forcing equalization of the detected UEs: least squares against
/// their channel columns, undetected rows zero. Rank deficiency is handled
/// by the rank-revealing factorization and reported.
pub fn zf_equalize(
    h_hat: &ArrayView2<Complex64>,
    activity: &[bool],
    y_data: &ArrayView2<Complex64>,
) -> (Array2<Complex64>, ZfReport) {
    assert_eq!(h_hat.ncols(), activity.len());
    let n = activity.len();
    let r_d = y_data.ncols();
    let detected: Vec<usize> = (0..n).filter(|&i| activity[i]).collect();
    let mut x = Array2::zeros((n, r_d));
    if detected.is_empty() || r_d == 0 {
        return (
            x,
            ZfReport {
                detected: detected.len(),
                rank: 0,
            },
        );
    }

    let mut h_active = Array2::zeros((h_hat.nrows(), detected.len()));
    for (k, &ue) in detected.iter().enumerate() {
        h_active.column_mut(k).assign(&h_hat.column(ue));
    }
    let (solved, rank) = linalg::least_squares(&h_active.view(), y_data, ZF_RANK_RTOL);
    let report = ZfReport {
        detected: detected.len(),
        rank,
    };
    if report.rank_deficient() {
        log::warn!(
            "zero-forcing channel matrix is rank deficient: rank {} of {} detected UEs",
            report.rank,
            report.detected
        );
    }
    for (k, &ue) in detected.iter().enumerate() {
        x.row_mut(ue).assign(&solved.row(k));
    }
    (x, report)
}

/// Zero-forcing data detection: equalize, then map every detected entry to
/// the nearest QPSK symbol.
pub fn zf_detect(
    h_hat: &ArrayView2<Complex64>,
    activity: &[bool],
    y_data: &ArrayView2<Complex64>,
    b: f64,
) -> (Array2<Complex64>, ZfReport) {
    let (soft, report) = zf_equalize(h_hat, activity, y_data);
    (harden_decisions(&soft.view(), activity, b), report)
}

/// JACD without data-matrix sparsity: the same engine with the data group
/// weight and constellation regularizer forced to zero.
pub fn jacd_no_data_sparsity(
    h0: Array2<Complex64>,
    x0: Array2<Complex64>,
    problem: &JacdProblem,
    cfg: &SolverConfig,
) -> Result<SolveOutcome, SolverError> {
    let cfg = SolverConfig {
        mu_x: Some(0.0),
        lambda: 0.0,
        ..cfg.clone()
    };
    solver::run_fbs(h0, x0, problem, &cfg)
}
