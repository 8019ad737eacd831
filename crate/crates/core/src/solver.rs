//! Forward-backward splitting engine for the relaxed JACD problem.
//!
//! Each iteration takes a gradient step on the smooth objective part, then
//! applies group shrinkage to every channel block and the box-constrained
//! group prox to every data row. Steps are guarded by a backtracking
//! sufficient-decrease condition, which makes the composite objective
//! non-increasing; Barzilai-Borwein spectral steps are proposed between
//! iterations when enabled.

use std::io::Write;

use ndarray::{s, Array2, ArrayView2, Zip};
use num_complex::Complex64;
use thiserror::Error;

use crate::baselines;
use crate::linalg::fro_norm2;
use crate::objective::{self, CVariant};
use crate::prox::{self, ProxError};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid solver config: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("step size underflow at iteration {iteration} (tau = {tau:e})")]
    StepUnderflow { iteration: usize, tau: f64 },
    #[error(transparent)]
    Prox(#[from] ProxError),
}

/// How the activity threshold is chosen when detecting the active set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ActivityThreshold {
    /// Use this energy threshold directly.
    Absolute(f64),
    /// Threshold at this fraction of the largest column energy. An all-zero
    /// channel estimate detects nothing.
    RelativeToPeak(f64),
}

impl Default for ActivityThreshold {
    fn default() -> Self {
        ActivityThreshold::RelativeToPeak(1e-3)
    }
}

/// Scale of the automatic channel group weight, in units of the per-block
/// gradient noise norm `sqrt(M (R_P + 2 B^2 R_D))` at unit noise variance.
pub const AUTO_MU_H_SCALE: f64 = 1.9;
/// Scale of the automatic data group weight, in units of a full QPSK row
/// norm `B sqrt(2 R_D)`.
pub const AUTO_MU_X_SCALE: f64 = 0.15;

/// Regularization weights and iteration controls.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Channel group-sparsity weight; `None` derives it from the problem
    /// dimensions assuming unit noise variance.
    pub mu_h: Option<f64>,
    /// Data group-sparsity weight; `None` derives it from the problem
    /// dimensions.
    pub mu_x: Option<f64>,
    /// Constellation regularizer weight.
    pub lambda: f64,
    /// Iterations over which lambda ramps linearly from 0 to its value;
    /// 0 applies the full weight from the start.
    pub lambda_ramp_iters: usize,
    pub c_variant: CVariant,
    /// Box half-side; must match the scenario constellation.
    pub box_b: f64,
    pub max_iters: usize,
    /// Stop when the relative iterate change drops below this.
    pub tol: f64,
    pub threshold: ActivityThreshold,
    /// Initial step size; backtracking shrinks it as needed.
    pub tau0: f64,
    /// Multiplier applied to the step on each rejected backtracking attempt.
    pub backtrack_factor: f64,
    /// Propose Barzilai-Borwein spectral steps between iterations.
    pub bb_steps: bool,
    /// Bisection tolerance of the data-prox scale equation.
    pub scale_eq_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            mu_h: None,
            mu_x: None,
            lambda: 1e-2,
            lambda_ramp_iters: 20,
            c_variant: CVariant::PerComponent,
            box_b: std::f64::consts::FRAC_1_SQRT_2,
            max_iters: 200,
            tol: 1e-3,
            threshold: ActivityThreshold::default(),
            tau0: 1.0,
            backtrack_factor: 0.5,
            bb_steps: true,
            scale_eq_tol: 1e-12,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        let err = |msg: &str| Err(SolverError::InvalidConfig(msg.into()));
        if self.max_iters == 0 {
            return err("max_iters must be at least 1");
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return err("tol must be positive");
        }
        if self.mu_h.is_some_and(|v| v < 0.0) || self.mu_x.is_some_and(|v| v < 0.0) {
            return err("mu_h and mu_x must be nonnegative");
        }
        if self.lambda < 0.0 {
            return err("lambda must be nonnegative");
        }
        if self.box_b.is_nan() || self.box_b <= 0.0 {
            return err("box_b must be positive");
        }
        if self.tau0.is_nan() || self.tau0 <= 0.0 {
            return err("tau0 must be positive");
        }
        if self.backtrack_factor.is_nan()
            || self.backtrack_factor <= 0.0
            || self.backtrack_factor >= 1.0
        {
            return err("backtrack_factor must lie in (0, 1)");
        }
        if self.scale_eq_tol.is_nan() || self.scale_eq_tol <= 0.0 {
            return err("scale_eq_tol must be positive");
        }
        if let ActivityThreshold::Absolute(v) = self.threshold {
            if v < 0.0 {
                return err("activity threshold must be nonnegative");
            }
        }
        Ok(())
    }

    /// Effective channel weight for a problem with `m` antennas per AP and
    /// the given frame split, assuming unit noise variance.
    pub fn resolved_mu_h(&self, m: usize, pilot_len: usize, data_len: usize) -> f64 {
        self.mu_h.unwrap_or_else(|| {
            let energy = pilot_len as f64 + 2.0 * self.box_b * self.box_b * data_len as f64;
            AUTO_MU_H_SCALE * (m as f64 * energy).sqrt()
        })
    }

    /// Effective data weight for a problem with the given data length.
    pub fn resolved_mu_x(&self, data_len: usize) -> f64 {
        self.mu_x.unwrap_or_else(|| {
            AUTO_MU_X_SCALE * self.box_b * (2.0 * data_len as f64).sqrt()
        })
    }

    fn effective_lambda(&self, iter: usize) -> f64 {
        if self.lambda_ramp_iters == 0 {
            self.lambda
        } else {
            self.lambda * (iter as f64 / self.lambda_ramp_iters as f64).min(1.0)
        }
    }
}

/// One JACD instance as seen by the solver: received signal, pilots, and the
/// AP block size. The data length is whatever the frame has beyond the
/// pilots; zero data columns degrade gracefully to pilot-only estimation.
pub struct JacdProblem<'a> {
    pub y: ArrayView2<'a, Complex64>,
    pub pilots: ArrayView2<'a, Complex64>,
    pub antennas_per_ap: usize,
}

impl<'a> JacdProblem<'a> {
    pub fn new(
        y: ArrayView2<'a, Complex64>,
        pilots: ArrayView2<'a, Complex64>,
        antennas_per_ap: usize,
    ) -> Result<Self, SolverError> {
        if antennas_per_ap == 0 || y.nrows() == 0 {
            return Err(SolverError::InvalidConfig(
                "antennas_per_ap and receive dimension must be positive".into(),
            ));
        }
        if !y.nrows().is_multiple_of(antennas_per_ap) {
            return Err(SolverError::DimensionMismatch(format!(
                "receive dimension {} is not a multiple of antennas_per_ap {}",
                y.nrows(),
                antennas_per_ap
            )));
        }
        if y.ncols() < pilots.ncols() {
            return Err(SolverError::DimensionMismatch(format!(
                "frame length {} shorter than pilot length {}",
                y.ncols(),
                pilots.ncols()
            )));
        }
        Ok(JacdProblem {
            y,
            pilots,
            antennas_per_ap,
        })
    }

    pub fn n_ues(&self) -> usize {
        self.pilots.nrows()
    }

    pub fn receive_dim(&self) -> usize {
        self.y.nrows()
    }

    pub fn pilot_len(&self) -> usize {
        self.pilots.ncols()
    }

    pub fn data_len(&self) -> usize {
        self.y.ncols() - self.pilots.ncols()
    }

    pub fn y_data(&self) -> ArrayView2<'a, Complex64> {
        self.y.slice_move(s![.., self.pilots.ncols()..])
    }
}

/// Per-iteration log record: step, objective split, and iterate change.
#[derive(Debug, Clone, Copy)]
pub struct IterRecord {
    pub iter: usize,
    pub tau: f64,
    pub smooth: f64,
    pub nonsmooth: f64,
    pub rel_change: f64,
}

impl IterRecord {
    pub fn composite(&self) -> f64 {
        self.smooth + self.nonsmooth
    }
}

struct PrevIterate {
    h: Array2<Complex64>,
    x_d: Array2<Complex64>,
    g_h: Array2<Complex64>,
    g_x: Array2<Complex64>,
}

/// The stacked iterate (channel and data parts) plus iteration bookkeeping.
pub struct SolverState {
    pub h: Array2<Complex64>,
    pub x_d: Array2<Complex64>,
    pub iter: usize,
    pub tau: f64,
    pub history: Vec<IterRecord>,
    prev: Option<PrevIterate>,
    cached_residual: Option<Array2<Complex64>>,
}

impl SolverState {
    pub fn new(h0: Array2<Complex64>, x0: Array2<Complex64>, cfg: &SolverConfig) -> Self {
        let mut x0 = x0;
        clip_to_box(&mut x0, cfg.box_b);
        SolverState {
            h: h0,
            x_d: x0,
            iter: 0,
            tau: cfg.tau0,
            history: Vec::new(),
            prev: None,
            cached_residual: None,
        }
    }
}

/// Recovered channel, data decisions, and activity set.
#[derive(Debug, Clone)]
pub struct Estimate {
    pub h_hat: Array2<Complex64>,
    /// Final relaxed data iterate, box-feasible.
    pub x_d_soft: Array2<Complex64>,
    /// Hard decisions on the augmented constellation: QPSK for detected
    /// UEs, zero rows otherwise.
    pub x_d_hard: Array2<Complex64>,
    pub activity_hat: Vec<bool>,
    pub iterations_used: usize,
    pub final_objective: f64,
}

/// Solve result: the estimate plus the per-iteration trace.
#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub estimate: Estimate,
    pub history: Vec<IterRecord>,
}

fn pair_norm2(h: &Array2<Complex64>, x: &Array2<Complex64>) -> f64 {
    fro_norm2(&h.view()) + fro_norm2(&x.view())
}

fn real_dot(a: &Array2<Complex64>, b: &Array2<Complex64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| x.re * y.re + x.im * y.im)
        .sum()
}

/// One forward-backward iteration with backtracking. Returns the relative
/// iterate change of the accepted step.
pub fn fbs_iterate(
    state: &mut SolverState,
    problem: &JacdProblem,
    cfg: &SolverConfig,
) -> Result<f64, SolverError> {
    let m = problem.antennas_per_ap;
    let lam = cfg.effective_lambda(state.iter);
    let mu_h = cfg.resolved_mu_h(m, problem.pilot_len(), problem.data_len());
    let mu_x = cfg.resolved_mu_x(problem.data_len());

    let res = match state.cached_residual.take() {
        Some(r) => r,
        None => objective::residual(
            &state.h.view(),
            &state.x_d.view(),
            &problem.y,
            &problem.pilots,
        ),
    };
    let f0 = objective::objective_smooth_from_residual(
        fro_norm2(&res.view()),
        &state.x_d.view(),
        lam,
        cfg.box_b,
        cfg.c_variant,
    );
    let (g_h, g_x) = objective::grad_smooth_from_residual(
        &res.view(),
        &state.h.view(),
        &state.x_d.view(),
        &problem.pilots,
        lam,
        cfg.box_b,
        cfg.c_variant,
    );

    if cfg.bb_steps {
        if let Some(prev) = &state.prev {
            let ds_h = &state.h - &prev.h;
            let ds_x = &state.x_d - &prev.x_d;
            let dg_h = &g_h - &prev.g_h;
            let dg_x = &g_x - &prev.g_x;
            let num = pair_norm2(&ds_h, &ds_x);
            let den = real_dot(&ds_h, &dg_h) + real_dot(&ds_x, &dg_x);
            if den > 0.0 && num > 0.0 {
                state.tau = (num / den).clamp(1e-12, 1e8);
            } else {
                state.tau = (state.tau / cfg.backtrack_factor).min(1e8);
            }
        }
    }

    let norm_s_old = pair_norm2(&state.h, &state.x_d).sqrt();
    let mut tau = state.tau;
    let mut row_scratch = vec![0.0f64; 2 * problem.data_len()];

    loop {
        if tau < 1e-20 {
            return Err(SolverError::StepUnderflow {
                iteration: state.iter,
                tau,
            });
        }

        // Forward step.
        let mut h_c = state.h.clone();
        Zip::from(&mut h_c).and(&g_h).for_each(|a, &g| *a -= g * tau);
        let mut x_c = state.x_d.clone();
        Zip::from(&mut x_c).and(&g_x).for_each(|a, &g| *a -= g * tau);

        // Backward step: group shrinkage per channel block, box-constrained
        // group shrinkage per data row.
        let t_h = tau * mu_h;
        let blocks = problem.receive_dim() / m;
        for mut col in h_c.columns_mut() {
            for p in 0..blocks {
                let mut block = col.slice_mut(s![p * m..(p + 1) * m]);
                prox::prox_channel_block_view(&mut block, t_h);
            }
        }
        let t_x = tau * mu_x;
        let r_d = problem.data_len();
        if r_d > 0 {
            for mut row in x_c.rows_mut() {
                for (d, z) in row.iter().enumerate() {
                    row_scratch[d] = z.re;
                    row_scratch[r_d + d] = z.im;
                }
                let solved = prox::prox_data_row(&row_scratch, t_x, cfg.box_b, cfg.scale_eq_tol)?;
                for (d, z) in row.iter_mut().enumerate() {
                    *z = Complex64::new(solved[d], solved[r_d + d]);
                }
            }
        }

        let dh = &h_c - &state.h;
        let dx = &x_c - &state.x_d;
        let dist2 = pair_norm2(&dh, &dx);
        if dist2 == 0.0 {
            // Fixed point: nothing to evaluate, nothing changes.
            state.cached_residual = Some(res);
            let g_val = objective::objective_nonsmooth(
                &state.h.view(),
                &state.x_d.view(),
                m,
                mu_h,
                mu_x,
                cfg.box_b,
            );
            state.history.push(IterRecord {
                iter: state.iter,
                tau,
                smooth: f0,
                nonsmooth: g_val,
                rel_change: 0.0,
            });
            state.iter += 1;
            state.tau = tau;
            return Ok(0.0);
        }

        let inner = real_dot(&g_h, &dh) + real_dot(&g_x, &dx);
        let res_c = objective::residual(&h_c.view(), &x_c.view(), &problem.y, &problem.pilots);
        let f_c = objective::objective_smooth_from_residual(
            fro_norm2(&res_c.view()),
            &x_c.view(),
            lam,
            cfg.box_b,
            cfg.c_variant,
        );

        if f_c <= f0 + inner + dist2 / (2.0 * tau) {
            let g_val =
                objective::objective_nonsmooth(&h_c.view(), &x_c.view(), m, mu_h, mu_x, cfg.box_b);
            let rel_change = dist2.sqrt() / norm_s_old.max(1.0);

            debug_assert!(
                x_c.iter().all(|z| z.re.abs() <= cfg.box_b && z.im.abs() <= cfg.box_b),
                "data iterate left the box"
            );

            state.prev = Some(PrevIterate {
                h: std::mem::replace(&mut state.h, h_c),
                x_d: std::mem::replace(&mut state.x_d, x_c),
                g_h,
                g_x,
            });
            state.cached_residual = Some(res_c);
            state.history.push(IterRecord {
                iter: state.iter,
                tau,
                smooth: f_c,
                nonsmooth: g_val,
                rel_change,
            });
            state.iter += 1;
            state.tau = tau;
            return Ok(rel_change);
        }
        tau *= cfg.backtrack_factor;
    }
}

/// Run FBS to completion: at most `max_iters` iterations, stopping early when
/// the relative iterate change drops below `tol`.
pub fn run_fbs(
    h0: Array2<Complex64>,
    x0: Array2<Complex64>,
    problem: &JacdProblem,
    cfg: &SolverConfig,
) -> Result<SolveOutcome, SolverError> {
    cfg.validate()?;
    let (mp, n, r_d) = (problem.receive_dim(), problem.n_ues(), problem.data_len());
    if h0.dim() != (mp, n) {
        return Err(SolverError::DimensionMismatch(format!(
            "initial channel is {:?}, expected ({mp}, {n})",
            h0.dim()
        )));
    }
    if x0.dim() != (n, r_d) {
        return Err(SolverError::DimensionMismatch(format!(
            "initial data is {:?}, expected ({n}, {r_d})",
            x0.dim()
        )));
    }

    let mut state = SolverState::new(h0, x0, cfg);
    for _ in 0..cfg.max_iters {
        let rel = fbs_iterate(&mut state, problem, cfg)?;
        if rel < cfg.tol {
            break;
        }
    }

    let threshold = resolve_threshold(&state.h.view(), cfg.threshold);
    let activity_hat = detect_activity(&state.h.view(), threshold);
    let x_d_hard = harden_decisions(&state.x_d.view(), &activity_hat, cfg.box_b);
    let final_objective = state
        .history
        .last()
        .map(|r| r.composite())
        .unwrap_or(f64::NAN);
    Ok(SolveOutcome {
        estimate: Estimate {
            h_hat: state.h,
            x_d_soft: state.x_d,
            x_d_hard,
            activity_hat,
            iterations_used: state.iter,
            final_objective,
        },
        history: state.history,
    })
}

/// Per-UE channel energies `||h_n||_F^2`.
pub fn column_energies(h: &ArrayView2<Complex64>) -> Vec<f64> {
    (0..h.ncols())
        .map(|n| h.column(n).iter().map(|z| z.norm_sqr()).sum())
        .collect()
}

/// Turn the threshold rule into an absolute energy threshold for `h`.
pub fn resolve_threshold(h: &ArrayView2<Complex64>, rule: ActivityThreshold) -> f64 {
    match rule {
        ActivityThreshold::Absolute(v) => v,
        ActivityThreshold::RelativeToPeak(alpha) => {
            let peak = column_energies(h).into_iter().fold(0.0f64, f64::max);
            if peak > 0.0 {
                alpha * peak
            } else {
                f64::INFINITY
            }
        }
    }
}

/// Threshold the per-UE channel energies: active iff `||h_n||^2 >= t_th`.
pub fn detect_activity(h: &ArrayView2<Complex64>, t_th: f64) -> Vec<bool> {
    column_energies(h).into_iter().map(|e| e >= t_th).collect()
}

/// Map soft decisions to the augmented constellation: rows of undetected UEs
/// become zero, every entry of a detected row maps to the nearest QPSK point
/// with ties broken toward the positive half-plane.
pub fn harden_decisions(
    x_soft: &ArrayView2<Complex64>,
    activity_hat: &[bool],
    b: f64,
) -> Array2<Complex64> {
    assert_eq!(x_soft.nrows(), activity_hat.len());
    let mut hard = Array2::zeros(x_soft.dim());
    for (n, &active) in activity_hat.iter().enumerate() {
        if !active {
            continue;
        }
        for (r, z) in x_soft.row(n).iter().enumerate() {
            let re = if z.re < 0.0 { -b } else { b };
            let im = if z.im < 0.0 { -b } else { b };
            hard[(n, r)] = Complex64::new(re, im);
        }
    }
    hard
}

/// Clamp every entry of a data matrix into the box (in place).
pub fn clip_to_box(x: &mut Array2<Complex64>, b: f64) {
    for z in x.iter_mut() {
        *z = Complex64::new(z.re.clamp(-b, b), z.im.clamp(-b, b));
    }
}

/// Warm start: channel part from the pilot-only estimate (columns of UEs the
/// pilot stage did not detect are zeroed), data part from zero-forcing
/// equalization of the detected UEs clipped into the box.
pub struct WarmStart {
    pub h0: Array2<Complex64>,
    pub x0: Array2<Complex64>,
    /// The pilot-only solve that produced the starting point.
    pub pilot_outcome: SolveOutcome,
    pub zf: baselines::ZfReport,
}

pub fn warm_start(problem: &JacdProblem, cfg: &SolverConfig) -> Result<WarmStart, SolverError> {
    let pilot_outcome = baselines::pilot_only_aud_ce(
        problem.y.slice(s![.., ..problem.pilot_len()]),
        problem.pilots,
        problem.antennas_per_ap,
        cfg,
    )?;
    let est = &pilot_outcome.estimate;

    let mut h0 = est.h_hat.clone();
    for (n, &active) in est.activity_hat.iter().enumerate() {
        if !active {
            h0.column_mut(n).fill(Complex64::new(0.0, 0.0));
        }
    }

    let (mut x0, zf) = baselines::zf_equalize(
        &est.h_hat.view(),
        &est.activity_hat,
        &problem.y_data(),
    );
    clip_to_box(&mut x0, cfg.box_b);

    Ok(WarmStart {
        h0,
        x0,
        pilot_outcome,
        zf,
    })
}

/// Write the iteration trace as CSV (iteration, tau, f, g, rel_change).
pub fn write_trace_csv<W: Write>(w: &mut W, history: &[IterRecord]) -> std::io::Result<()> {
    writeln!(w, "iteration,tau,f,g,rel_change")?;
    for rec in history {
        writeln!(
            w,
            "{},{},{},{},{}",
            rec.iter, rec.tau, rec.smooth, rec.nonsmooth, rec.rel_change
        )?;
    }
    Ok(())
}
