//! Objective evaluation and Wirtinger gradients for the relaxed JACD problem.
//!
//! The composite objective splits into a smooth part
//! `f(S) = 1/2 ||Y - H [X_P, X_D]||_F^2 + lambda * C(X_D)` and a nonsmooth
//! part `g(S) = mu_h * sum of channel block norms + mu_x * sum of data row
//! norms + box indicator`. Gradients are stored in the same layout as the
//! iterate (the channel part MP x N, the data part N x R_D), arranged so the
//! forward step is a plain fused update on real and imaginary parts.

use ndarray::{s, Array2, ArrayView2};
use num_complex::Complex64;

use crate::linalg::{conj_t, fro_norm2};

/// Which form the constellation regularizer `C` takes.
///
/// Both variants are nonpositive and vanish-or-peak exactly on the relaxed
/// constellation set; they differ in whether the squared deviation from `B^2`
/// is measured per complex modulus or per real component. `PerComponent` is
/// zero exactly on the QPSK corners `{+-B +- jB}`, which is the default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CVariant {
    /// `C = -sum_d [(Re(x_d)^2 - B^2)^2 + (Im(x_d)^2 - B^2)^2]`
    #[default]
    PerComponent,
    /// `C = -sum_d (|x_d|^2 - B^2)^2`
    ComplexModulus,
}

/// Value of the constellation regularizer `C(X_D)` (always <= 0).
pub fn constellation_value(x_d: &ArrayView2<Complex64>, b: f64, variant: CVariant) -> f64 {
    let b2 = b * b;
    let mut acc = 0.0;
    match variant {
        CVariant::PerComponent => {
            for z in x_d.iter() {
                let dr = z.re * z.re - b2;
                let di = z.im * z.im - b2;
                acc += dr * dr + di * di;
            }
        }
        CVariant::ComplexModulus => {
            for z in x_d.iter() {
                let d = z.norm_sqr() - b2;
                acc += d * d;
            }
        }
    }
    -acc
}

/// Gradient of `lambda * C` with respect to the data matrix, accumulated into
/// `g` (same shape as `X_D`, real-pair gradient arranged as complex entries).
fn add_constellation_grad(
    g: &mut Array2<Complex64>,
    x_d: &ArrayView2<Complex64>,
    b: f64,
    lambda: f64,
    variant: CVariant,
) {
    if lambda == 0.0 {
        return;
    }
    let b2 = b * b;
    let scale = -4.0 * lambda;
    match variant {
        CVariant::PerComponent => {
            for (g, z) in g.iter_mut().zip(x_d.iter()) {
                let gr = z.re * (z.re * z.re - b2);
                let gi = z.im * (z.im * z.im - b2);
                *g += Complex64::new(scale * gr, scale * gi);
            }
        }
        CVariant::ComplexModulus => {
            for (g, z) in g.iter_mut().zip(x_d.iter()) {
                let d = z.norm_sqr() - b2;
                *g += scale * d * z;
            }
        }
    }
}

/// Residual `Y - H [X_P, X_D]`.
pub fn residual(
    h: &ArrayView2<Complex64>,
    x_d: &ArrayView2<Complex64>,
    y: &ArrayView2<Complex64>,
    pilots: &ArrayView2<Complex64>,
) -> Array2<Complex64> {
    let r_p = pilots.ncols();
    let mut res = y.to_owned();
    let minus_one = Complex64::new(-1.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    ndarray::linalg::general_mat_mul(
        minus_one,
        h,
        pilots,
        one,
        &mut res.slice_mut(s![.., ..r_p]),
    );
    if x_d.ncols() > 0 {
        ndarray::linalg::general_mat_mul(minus_one, h, x_d, one, &mut res.slice_mut(s![.., r_p..]));
    }
    res
}

/// Smooth objective `1/2 ||Y - H X||_F^2 + lambda * C(X_D)`.
pub fn objective_smooth(
    h: &ArrayView2<Complex64>,
    x_d: &ArrayView2<Complex64>,
    y: &ArrayView2<Complex64>,
    pilots: &ArrayView2<Complex64>,
    lambda: f64,
    b: f64,
    variant: CVariant,
) -> f64 {
    check_dims(h, x_d, y, pilots);
    let res = residual(h, x_d, y, pilots);
    0.5 * fro_norm2(&res.view()) + lambda * constellation_value(x_d, b, variant)
}

/// Smooth objective given an already computed residual.
pub fn objective_smooth_from_residual(
    res_norm2: f64,
    x_d: &ArrayView2<Complex64>,
    lambda: f64,
    b: f64,
    variant: CVariant,
) -> f64 {
    0.5 * res_norm2 + lambda * constellation_value(x_d, b, variant)
}

/// Nonsmooth objective: weighted channel block norms plus weighted data row
/// norms, or infinity when any data entry leaves the box.
pub fn objective_nonsmooth(
    h: &ArrayView2<Complex64>,
    x_d: &ArrayView2<Complex64>,
    antennas_per_ap: usize,
    mu_h: f64,
    mu_x: f64,
    b: f64,
) -> f64 {
    for z in x_d.iter() {
        if z.re.abs() > b || z.im.abs() > b {
            return f64::INFINITY;
        }
    }
    let mut acc = 0.0;
    if mu_h > 0.0 {
        let (mp, n) = h.dim();
        debug_assert_eq!(mp % antennas_per_ap, 0);
        for ue in 0..n {
            let col = h.column(ue);
            for block in col.exact_chunks(antennas_per_ap) {
                acc += mu_h * block.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            }
        }
    }
    if mu_x > 0.0 {
        for row in x_d.rows() {
            acc += mu_x * row.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        }
    }
    acc
}

/// Gradient of the smooth objective, returned as the pair
/// `(d f / d H, d f / d X_D)` in real-pair convention: the complex entry at
/// each position holds the partial derivatives with respect to the real and
/// imaginary parts, so the forward step is `H - tau * G_H`, `X_D - tau * G_X`.
pub fn grad_smooth(
    h: &ArrayView2<Complex64>,
    x_d: &ArrayView2<Complex64>,
    y: &ArrayView2<Complex64>,
    pilots: &ArrayView2<Complex64>,
    lambda: f64,
    b: f64,
    variant: CVariant,
) -> (Array2<Complex64>, Array2<Complex64>) {
    check_dims(h, x_d, y, pilots);
    let res = residual(h, x_d, y, pilots);
    grad_smooth_from_residual(&res.view(), h, x_d, pilots, lambda, b, variant)
}

/// Gradient of the smooth objective reusing a precomputed residual.
pub fn grad_smooth_from_residual(
    res: &ArrayView2<Complex64>,
    h: &ArrayView2<Complex64>,
    x_d: &ArrayView2<Complex64>,
    pilots: &ArrayView2<Complex64>,
    lambda: f64,
    b: f64,
    variant: CVariant,
) -> (Array2<Complex64>, Array2<Complex64>) {
    let r_p = pilots.ncols();
    let (mp, n) = h.dim();
    let r_d = x_d.ncols();

    // G_H = -(Y - H X) X^H, split over the pilot and data blocks.
    let mut g_h = Array2::zeros((mp, n));
    let minus_one = Complex64::new(-1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let pilots_h = conj_t(pilots);
    ndarray::linalg::general_mat_mul(
        minus_one,
        &res.slice(s![.., ..r_p]),
        &pilots_h,
        zero,
        &mut g_h,
    );
    let mut g_x = Array2::zeros((n, r_d));
    if r_d > 0 {
        let x_d_h = conj_t(x_d);
        ndarray::linalg::general_mat_mul(
            minus_one,
            &res.slice(s![.., r_p..]),
            &x_d_h,
            one,
            &mut g_h,
        );
        // G_X = -H^H (Y_D - H X_D) + lambda * dC/dX_D.
        let h_h = conj_t(h);
        ndarray::linalg::general_mat_mul(
            minus_one,
            &h_h,
            &res.slice(s![.., r_p..]),
            zero,
            &mut g_x,
        );
        add_constellation_grad(&mut g_x, x_d, b, lambda, variant);
    }
    (g_h, g_x)
}

fn check_dims(
    h: &ArrayView2<Complex64>,
    x_d: &ArrayView2<Complex64>,
    y: &ArrayView2<Complex64>,
    pilots: &ArrayView2<Complex64>,
) {
    assert_eq!(h.nrows(), y.nrows(), "H and Y row mismatch");
    assert_eq!(h.ncols(), pilots.nrows(), "H columns vs pilot rows");
    assert_eq!(h.ncols(), x_d.nrows(), "H columns vs data rows");
    assert_eq!(
        y.ncols(),
        pilots.ncols() + x_d.ncols(),
        "Y width vs R_P + R_D"
    );
}
