//! Performance metrics: user misdetection rate, channel NMSE, average symbol
//! error rate over active UEs, and the cumulative symbol error rate over the
//! distribution of the number of active UEs.

use ndarray::ArrayView2;
use num_complex::Complex64;

/// Per-trial metric record. `nmse` is absent when the true effective channel
/// is all-zero; `aser` is absent when no UE was active.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialMetrics {
    pub n_active: usize,
    pub umr: f64,
    pub nmse: Option<f64>,
    pub aser: Option<f64>,
}

impl TrialMetrics {
    /// NMSE in decibels.
    pub fn nmse_db(&self) -> Option<f64> {
        self.nmse.map(|v| 10.0 * v.log10())
    }
}

/// User misdetection rate: mean absolute activity error.
pub fn umr(activity: &[bool], activity_hat: &[bool]) -> f64 {
    assert_eq!(activity.len(), activity_hat.len(), "activity length mismatch");
    let wrong = activity
        .iter()
        .zip(activity_hat)
        .filter(|(a, b)| a != b)
        .count();
    wrong as f64 / activity.len() as f64
}

/// Normalized channel MSE `||H - H_hat||_F^2 / ||H||_F^2`, absent for an
/// all-zero true channel.
pub fn nmse(h: &ArrayView2<Complex64>, h_hat: &ArrayView2<Complex64>) -> Option<f64> {
    assert_eq!(h.dim(), h_hat.dim(), "channel shape mismatch");
    let denom: f64 = h.iter().map(|z| z.norm_sqr()).sum();
    if denom == 0.0 {
        return None;
    }
    let num: f64 = h
        .iter()
        .zip(h_hat.iter())
        .map(|(a, b)| (a - b).norm_sqr())
        .sum();
    Some(num / denom)
}

/// Label of an augmented-constellation symbol: zero or one of four quadrants.
/// Entries closer to zero than to any corner count as the zero symbol.
fn symbol_label(z: Complex64, b: f64) -> u8 {
    if z.norm_sqr() < 0.5 * b * b {
        return 0;
    }
    1 + u8::from(z.re < 0.0) + 2 * u8::from(z.im < 0.0)
}

/// Average symbol error rate over the active UEs' data symbols; inactive
/// rows are excluded regardless of what the detector decided. Absent when
/// nothing was active.
pub fn aser(
    activity: &[bool],
    x_d: &ArrayView2<Complex64>,
    x_d_hard: &ArrayView2<Complex64>,
    b: f64,
) -> Option<f64> {
    assert_eq!(x_d.dim(), x_d_hard.dim(), "data shape mismatch");
    assert_eq!(x_d.nrows(), activity.len(), "activity length mismatch");
    let n_active = activity.iter().filter(|&&a| a).count();
    let r_d = x_d.ncols();
    if n_active == 0 || r_d == 0 {
        return None;
    }
    let mut errors = 0usize;
    for (n, &active) in activity.iter().enumerate() {
        if !active {
            continue;
        }
        for r in 0..r_d {
            if symbol_label(x_d[(n, r)], b) != symbol_label(x_d_hard[(n, r)], b) {
                errors += 1;
            }
        }
    }
    Some(errors as f64 / (n_active * r_d) as f64)
}

/// Cumulative symbol error rate at `x`: the empirical expectation of ASER
/// over trials with at most `x` active UEs,
/// `CSER(x) = sum_{n_a <= x} mean_aser(n_a) * P(N_a = n_a)`,
/// with frequencies taken over trials that had at least one active UE.
/// Bins with no observed trials contribute zero.
pub fn cser(records: &[TrialMetrics], x: usize) -> f64 {
    let active: Vec<&TrialMetrics> = records
        .iter()
        .filter(|r| r.n_active > 0 && r.aser.is_some())
        .collect();
    if active.is_empty() {
        return 0.0;
    }
    let total = active.len() as f64;
    let max_na = active.iter().map(|r| r.n_active).max().unwrap();
    let mut acc = 0.0;
    for n_a in 1..=x.min(max_na) {
        let bin: Vec<f64> = active
            .iter()
            .filter(|r| r.n_active == n_a)
            .map(|r| r.aser.unwrap())
            .collect();
        if bin.is_empty() {
            continue;
        }
        let mean = bin.iter().sum::<f64>() / bin.len() as f64;
        acc += mean * (bin.len() as f64 / total);
    }
    acc
}

/// CSER with analytic Binomial(n_ues, activity_prob) weights instead of
/// empirical frequencies, for comparison against finite Monte-Carlo runs.
pub fn cser_analytic(records: &[TrialMetrics], x: usize, n_ues: usize, activity_prob: f64) -> f64 {
    let mut acc = 0.0;
    for n_a in 1..=x.min(n_ues) {
        let bin: Vec<f64> = records
            .iter()
            .filter(|r| r.n_active == n_a)
            .filter_map(|r| r.aser)
            .collect();
        if bin.is_empty() {
            continue;
        }
        let mean = bin.iter().sum::<f64>() / bin.len() as f64;
        acc += mean * binomial_pmf(n_ues, n_a, activity_prob);
    }
    acc
}

fn binomial_pmf(n: usize, k: usize, p: f64) -> f64 {
    // log-space for stability at n = 400.
    let mut log_c = 0.0;
    for i in 0..k {
        log_c += ((n - i) as f64).ln() - ((i + 1) as f64).ln();
    }
    (log_c + k as f64 * p.ln() + (n - k) as f64 * (1.0 - p).ln()).exp()
}

/// Mean, standard error, and count of a metric stream (absent values are
/// skipped by the caller).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggregate {
    pub mean: f64,
    pub stderr: Option<f64>,
    pub count: usize,
}

pub fn aggregate(values: &[f64]) -> Option<Aggregate> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let stderr = if values.len() > 1 {
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        Some((var / n).sqrt())
    } else {
        None
    };
    Some(Aggregate {
        mean,
        stderr,
        count: values.len(),
    })
}
