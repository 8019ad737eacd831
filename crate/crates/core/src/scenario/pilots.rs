//! Pilot matrix design: near-equiangular tight frames via alternating
//! projections.
//!
//! The pilot matrix packs N sequences of length R_P with R_P <= N, so the
//! rows form an overcomplete frame. The construction alternates between
//! clipping the Gram matrix toward the Welch bound and projecting back onto
//! the set of rank-R_P tight frames (via warm-started subspace iteration),
//! with per-vector renormalization. Exact ETFs do not exist for most sizes;
//! the loop keeps the best coherence seen and fails if it cannot improve on
//! the random start.

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use rand_distr::{Distribution, Normal};

use crate::linalg;
use crate::rng::{stream_rng, Stream};
use crate::scenario::{ScenarioConfig, ScenarioError};

/// Welch lower bound on the maximum cross-correlation of `n` unit vectors in
/// dimension `r`. Zero when `r >= n` (orthonormal sets exist).
pub fn welch_bound(n: usize, r: usize) -> f64 {
    if r >= n || n <= 1 {
        return 0.0;
    }
    (((n - r) as f64) / ((r * (n - 1)) as f64)).sqrt()
}

/// Maximum absolute cross-correlation between distinct rows of `x`,
/// rows normalized.
pub fn row_coherence(x: &Array2<Complex64>) -> f64 {
    let n = x.nrows();
    let norms: Vec<f64> = (0..n)
        .map(|i| x.row(i).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
        .collect();
    let mut max = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            let mut dot = Complex64::new(0.0, 0.0);
            for k in 0..x.ncols() {
                dot += x[(i, k)] * x[(j, k)].conj();
            }
            let denom = norms[i] * norms[j];
            if denom > 0.0 {
                max = max.max(dot.norm() / denom);
            }
        }
    }
    max
}

fn random_unit_columns(r: usize, n: usize, seed: u64) -> Array2<Complex64> {
    let mut rng = stream_rng(seed, Stream::Pilots);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut f = Array2::zeros((r, n));
    for j in 0..n {
        for i in 0..r {
            f[(i, j)] = Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng));
        }
    }
    normalize_columns(&mut f);
    f
}

fn normalize_columns(f: &mut Array2<Complex64>) {
    let (r, n) = f.dim();
    for j in 0..n {
        let norm: f64 = (0..r).map(|i| f[(i, j)].norm_sqr()).sum::<f64>().sqrt();
        if norm > 0.0 {
            for i in 0..r {
                f[(i, j)] /= norm;
            }
        }
    }
}

/// Gram matrix of unit columns, with off-diagonal magnitudes clipped to `mu`
/// and the diagonal reset to one.
fn clipped_gram(f: &Array2<Complex64>, mu: f64) -> (Array2<Complex64>, f64) {
    let fh = linalg::conj_t(&f.view());
    let mut g = fh.dot(f);
    let n = g.nrows();
    let mut coherence = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                g[(i, j)] = Complex64::new(1.0, 0.0);
            } else {
                let mag = g[(i, j)].norm();
                coherence = coherence.max(mag);
                if mag > mu {
                    g[(i, j)] *= mu / mag;
                }
            }
        }
    }
    (g, coherence)
}

/// Near-ETF pilot matrix: N rows of length R_P, each row with squared norm
/// exactly R_P, coherence pushed toward the Welch bound. Deterministic given
/// the seed.
pub fn generate_pilots(cfg: &ScenarioConfig, seed: u64) -> Result<Array2<Complex64>, ScenarioError> {
    let n = cfg.n_ues;
    let r = cfg.pilot_len;
    if n == 0 || r == 0 {
        return Err(ScenarioError::InvalidConfig(
            "pilot construction needs n_ues >= 1 and pilot_len >= 1".into(),
        ));
    }

    if r >= n {
        // Orthonormal rows exist; no alternating projections needed.
        let g = random_unit_columns(r, n, seed);
        let q = linalg::orthonormal_columns(&g.view());
        let mut x = Array2::zeros((n, r));
        for row in 0..n {
            for col in 0..r {
                x[(row, col)] = q[(col, row)];
            }
        }
        scale_rows_to(&mut x, (r as f64).sqrt());
        return Ok(x);
    }

    let mu = welch_bound(n, r);
    let mut f = random_unit_columns(r, n, seed);
    let start_coherence = row_coherence(&transpose(&f));
    let mut best = f.clone();
    let mut best_coherence = start_coherence;

    // Warm-started subspace for the rank-R tight projection.
    let mut v = linalg::orthonormal_columns(&linalg::conj_t(&f.view()).view());

    let max_iters = 400;
    for _ in 0..max_iters {
        let (g, coherence) = clipped_gram(&f, mu);
        if coherence < best_coherence {
            best_coherence = coherence;
            best = f.clone();
        }
        if best_coherence <= 1.3 * mu {
            break;
        }
        // One power step toward the dominant R-dimensional eigenspace of the
        // clipped Gram, then rebuild a tight frame from it.
        let gv = g.dot(&v);
        v = linalg::orthonormal_columns(&gv.view());
        f = linalg::conj_t(&v.view());
        normalize_columns(&mut f);
    }

    let (_, final_coherence) = clipped_gram(&best, mu);
    if final_coherence >= start_coherence {
        return Err(ScenarioError::PilotConstruction(format!(
            "alternating projections failed to improve coherence: start {start_coherence:.4}, final {final_coherence:.4}"
        )));
    }

    let mut x = transpose(&best);
    scale_rows_to(&mut x, (r as f64).sqrt());
    Ok(x)
}

fn transpose(f: &Array2<Complex64>) -> Array2<Complex64> {
    let (r, n) = f.dim();
    Array2::from_shape_fn((n, r), |(i, j)| f[(j, i)])
}

fn scale_rows_to(x: &mut Array2<Complex64>, target_norm: f64) {
    let (n, r) = x.dim();
    for i in 0..n {
        let norm: f64 = (0..r).map(|j| x[(i, j)].norm_sqr()).sum::<f64>().sqrt();
        if norm > 0.0 {
            let s = target_norm / norm;
            for j in 0..r {
                x[(i, j)] *= s;
            }
        }
    }
}

/// Row norms of a pilot matrix, for invariant checks.
pub fn row_norms(x: &Array2<Complex64>) -> Array1<f64> {
    Array1::from_iter(
        (0..x.nrows()).map(|i| x.row(i).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n: usize, r: usize) -> ScenarioConfig {
        ScenarioConfig {
            n_ues: n,
            pilot_len: r,
            ..ScenarioConfig::default()
        }
    }

    #[test]
    fn welch_bound_paper_dimensions() {
        let w = welch_bound(400, 50);
        assert!((w - 0.1325).abs() < 1e-4, "welch = {w}");
    }

    #[test]
    fn square_case_is_orthonormal() {
        let x = generate_pilots(&cfg(16, 16), 3).unwrap();
        assert!(row_coherence(&x) < 1e-10);
        for norm in row_norms(&x) {
            assert!((norm - 4.0).abs() < 1e-9);
        }
    }

    #[test]
    fn more_pilots_than_ues_is_orthonormal() {
        let x = generate_pilots(&cfg(8, 12), 3).unwrap();
        assert!(row_coherence(&x) < 1e-10);
    }

    #[test]
    fn row_norms_are_exact() {
        let x = generate_pilots(&cfg(50, 16), 7).unwrap();
        let target = 4.0;
        for norm in row_norms(&x) {
            assert!((norm - target).abs() < 1e-9, "norm {norm}");
        }
    }

    #[test]
    fn coherence_beats_random_start_at_desk_size() {
        let c = cfg(50, 16);
        let x = generate_pilots(&c, 7).unwrap();
        let w = welch_bound(50, 16);
        let coh = row_coherence(&x);
        assert!(coh <= 1.5 * w, "coherence {coh} vs welch {w}");
    }

    #[test]
    fn deterministic_given_seed() {
        let c = cfg(30, 10);
        let a = generate_pilots(&c, 9).unwrap();
        let b = generate_pilots(&c, 9).unwrap();
        assert_eq!(a, b);
    }
}
