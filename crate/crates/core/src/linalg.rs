//! Dense complex linear algebra: Householder QR with column pivoting,
//! rank-revealing least squares, and a few norm helpers.
//!
//! The solver only ever factors small matrices (receive dimension by number
//! of detected users, or pilot-matrix sized blocks), so a straightforward
//! reflector-based implementation is plenty.

use ndarray::{Array1, Array2, ArrayView2};
use num_complex::Complex64;

/// Householder QR factorization with column pivoting: `A P = Q R`.
///
/// Pivoting orders the diagonal of `R` by decreasing magnitude, which makes
/// rank detection by a relative tolerance reliable.
pub struct ColPivQr {
    rows: usize,
    cols: usize,
    /// Unit Householder vectors; reflector `j` acts on rows `j..rows`.
    reflectors: Vec<Array1<Complex64>>,
    /// Upper-triangular factor (stored full size, lower part zeroed).
    r: Array2<Complex64>,
    /// Column permutation: factored column `j` is input column `perm[j]`.
    perm: Vec<usize>,
}

impl ColPivQr {
    pub fn factor(a: &ArrayView2<Complex64>) -> Self {
        let (m, n) = a.dim();
        let mut work = a.to_owned();
        let mut perm: Vec<usize> = (0..n).collect();
        let steps = m.min(n);
        let mut reflectors = Vec::with_capacity(steps);

        for j in 0..steps {
            // Pivot: bring the remaining column with the largest tail norm up front.
            let mut best = j;
            let mut best_norm = 0.0;
            for k in j..n {
                let norm2: f64 = (j..m).map(|i| work[(i, k)].norm_sqr()).sum();
                if norm2 > best_norm {
                    best_norm = norm2;
                    best = k;
                }
            }
            if best != j {
                for i in 0..m {
                    work.swap((i, j), (i, best));
                }
                perm.swap(j, best);
            }

            let norm = best_norm.sqrt();
            if norm == 0.0 {
                // Remaining block is zero; R tail is zero and no reflector is needed.
                reflectors.push(Array1::zeros(0));
                continue;
            }

            let alpha = work[(j, j)];
            let phase = if alpha.norm() == 0.0 {
                Complex64::new(1.0, 0.0)
            } else {
                alpha / alpha.norm()
            };
            let mut u = Array1::zeros(m - j);
            for i in j..m {
                u[i - j] = work[(i, j)];
            }
            u[0] += phase * norm;
            let unorm = u.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            u.mapv_inplace(|z| z / unorm);

            // Apply H = I - 2 u u^H to the trailing block.
            for col in j..n {
                let mut s = Complex64::new(0.0, 0.0);
                for i in j..m {
                    s += u[i - j].conj() * work[(i, col)];
                }
                let s2 = 2.0 * s;
                for i in j..m {
                    work[(i, col)] -= s2 * u[i - j];
                }
            }
            work[(j, j)] = -phase * norm;
            for i in (j + 1)..m {
                work[(i, j)] = Complex64::new(0.0, 0.0);
            }
            reflectors.push(u);
        }

        ColPivQr {
            rows: m,
            cols: n,
            reflectors,
            r: work,
            perm,
        }
    }

    /// Numerical rank: diagonal entries of `R` above `rtol` times the largest.
    pub fn rank(&self, rtol: f64) -> usize {
        let steps = self.rows.min(self.cols);
        if steps == 0 {
            return 0;
        }
        let r00 = self.r[(0, 0)].norm();
        if r00 == 0.0 {
            return 0;
        }
        (0..steps)
            .take_while(|&j| self.r[(j, j)].norm() > rtol * r00)
            .count()
    }

    /// Apply `Q^H` to `b` in place.
    fn apply_qh(&self, b: &mut Array2<Complex64>) {
        let ncols = b.ncols();
        for (j, u) in self.reflectors.iter().enumerate() {
            if u.is_empty() {
                continue;
            }
            for col in 0..ncols {
                let mut s = Complex64::new(0.0, 0.0);
                for i in j..self.rows {
                    s += u[i - j].conj() * b[(i, col)];
                }
                let s2 = 2.0 * s;
                for i in j..self.rows {
                    b[(i, col)] -= s2 * u[i - j];
                }
            }
        }
    }

    /// First `min(m, n)` columns of `Q` (an orthonormal basis of the column
    /// space when `A` has full column rank).
    pub fn thin_q(&self) -> Array2<Complex64> {
        let k = self.rows.min(self.cols);
        let mut q = Array2::zeros((self.rows, k));
        for j in 0..k {
            q[(j, j)] = Complex64::new(1.0, 0.0);
        }
        for (j, u) in self.reflectors.iter().enumerate().rev() {
            if u.is_empty() {
                continue;
            }
            for col in 0..k {
                let mut s = Complex64::new(0.0, 0.0);
                for i in j..self.rows {
                    s += u[i - j].conj() * q[(i, col)];
                }
                let s2 = 2.0 * s;
                for i in j..self.rows {
                    q[(i, col)] -= s2 * u[i - j];
                }
            }
        }
        q
    }

    /// Basic least-squares solution of `A X = B` truncated at the numerical
    /// rank: coefficients of columns beyond the rank are set to zero.
    /// Returns the solution and the rank used.
    pub fn least_squares(&self, b: &ArrayView2<Complex64>, rtol: f64) -> (Array2<Complex64>, usize) {
        assert_eq!(b.nrows(), self.rows, "rhs row count mismatch");
        let rank = self.rank(rtol);
        let nrhs = b.ncols();
        let mut c = b.to_owned();
        self.apply_qh(&mut c);

        let mut x = Array2::zeros((self.cols, nrhs));
        for col in 0..nrhs {
            for j in (0..rank).rev() {
                let mut s = c[(j, col)];
                for l in (j + 1)..rank {
                    s -= self.r[(j, l)] * x[(self.perm[l], col)];
                }
                x[(self.perm[j], col)] = s / self.r[(j, j)];
            }
        }
        (x, rank)
    }
}

/// Least-squares solve with rank revealing, one-shot convenience.
pub fn least_squares(
    a: &ArrayView2<Complex64>,
    b: &ArrayView2<Complex64>,
    rtol: f64,
) -> (Array2<Complex64>, usize) {
    ColPivQr::factor(a).least_squares(b, rtol)
}

/// Orthonormal basis of the column space of `a` (thin Q).
pub fn orthonormal_columns(a: &ArrayView2<Complex64>) -> Array2<Complex64> {
    ColPivQr::factor(a).thin_q()
}

/// Squared Frobenius norm.
pub fn fro_norm2(a: &ArrayView2<Complex64>) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

/// Conjugate transpose as an owned array.
pub fn conj_t(a: &ArrayView2<Complex64>) -> Array2<Complex64> {
    let (m, n) = a.dim();
    Array2::from_shape_fn((n, m), |(i, j)| a[(j, i)].conj())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn random_complex(m: usize, n: usize, seed: u64) -> Array2<Complex64> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        Array2::from_shape_fn((m, n), |_| {
            Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        })
    }

    fn reconstruct(qr: &ColPivQr, m: usize, n: usize) -> Array2<Complex64> {
        // Q R with columns un-permuted.
        let q = qr.thin_q();
        let k = m.min(n);
        let mut qr_prod = Array2::zeros((m, n));
        for i in 0..m {
            for j in 0..n {
                let mut s = Complex64::new(0.0, 0.0);
                for l in 0..k {
                    s += q[(i, l)] * qr.r[(l, j)];
                }
                qr_prod[(i, qr.perm[j])] = s;
            }
        }
        qr_prod
    }

    #[test]
    fn qr_reconstructs_tall_matrix() {
        let a = random_complex(12, 5, 3);
        let qr = ColPivQr::factor(&a.view());
        let b = reconstruct(&qr, 12, 5);
        let err = fro_norm2(&(&a - &b).view()).sqrt();
        assert!(err < 1e-12, "reconstruction error {err}");
    }

    #[test]
    fn thin_q_is_orthonormal() {
        let a = random_complex(20, 7, 11);
        let q = ColPivQr::factor(&a.view()).thin_q();
        let qh = conj_t(&q.view());
        let g = qh.dot(&q);
        for i in 0..7 {
            for j in 0..7 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((g[(i, j)].re - expect).abs() < 1e-12);
                assert!(g[(i, j)].im.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn least_squares_recovers_exact_solution() {
        let a = random_complex(16, 6, 5);
        let x_true = random_complex(6, 3, 6);
        let b = a.dot(&x_true);
        let (x, rank) = least_squares(&a.view(), &b.view(), 1e-12);
        assert_eq!(rank, 6);
        let err = fro_norm2(&(&x - &x_true).view()).sqrt();
        assert!(err < 1e-10, "solve error {err}");
    }

    #[test]
    fn rank_detects_duplicated_column() {
        let mut a = random_complex(10, 4, 9);
        let col0: Vec<Complex64> = (0..10).map(|i| a[(i, 0)]).collect();
        for i in 0..10 {
            a[(i, 3)] = col0[i] * Complex64::new(2.0, 1.0);
        }
        let qr = ColPivQr::factor(&a.view());
        assert_eq!(qr.rank(1e-10), 3);
    }

    #[test]
    fn least_squares_minimizes_residual_for_tall_noisy_system() {
        let a = random_complex(15, 4, 21);
        let b = random_complex(15, 2, 22);
        let (x, _) = least_squares(&a.view(), &b.view(), 1e-12);
        // At the least-squares solution the residual is orthogonal to range(A).
        let res = &b - &a.dot(&x);
        let ah = conj_t(&a.view());
        let g = ah.dot(&res);
        assert!(fro_norm2(&g.view()).sqrt() < 1e-10);
    }

    #[test]
    fn zero_matrix_has_rank_zero() {
        let a = Array2::<Complex64>::zeros((5, 3));
        let qr = ColPivQr::factor(&a.view());
        assert_eq!(qr.rank(1e-12), 0);
        let b = random_complex(5, 1, 2);
        let (x, rank) = qr.least_squares(&b.view(), 1e-12);
        assert_eq!(rank, 0);
        assert!(fro_norm2(&x.view()) == 0.0);
    }
}
