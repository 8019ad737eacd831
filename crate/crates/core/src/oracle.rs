//! Independent reference implementations used by self-tests.
//!
//! Nothing here shares code with the production paths it checks: the
//! objective is re-evaluated with plain loops, the proximal operators are
//! re-solved by projected gradient descent with a one-dimensional ray polish,
//! and gradients are checked against central finite differences. Slow and
//! simple on purpose.

use ndarray::{Array2, ArrayView2};
use num_complex::Complex64;

use crate::objective::CVariant;

/// Naive re-evaluation of the smooth objective with index loops.
pub fn objective_smooth_reference(
    h: &ArrayView2<Complex64>,
    x_d: &ArrayView2<Complex64>,
    y: &ArrayView2<Complex64>,
    pilots: &ArrayView2<Complex64>,
    lambda: f64,
    b: f64,
    variant: CVariant,
) -> f64 {
    let (mp, n) = h.dim();
    let r_p = pilots.ncols();
    let r_d = x_d.ncols();
    let mut acc = 0.0;
    for i in 0..mp {
        for j in 0..(r_p + r_d) {
            let mut pred = Complex64::new(0.0, 0.0);
            for k in 0..n {
                let xk = if j < r_p {
                    pilots[(k, j)]
                } else {
                    x_d[(k, j - r_p)]
                };
                pred += h[(i, k)] * xk;
            }
            acc += (y[(i, j)] - pred).norm_sqr();
        }
    }
    let b2 = b * b;
    let mut creg = 0.0;
    for z in x_d.iter() {
        match variant {
            CVariant::PerComponent => {
                let dr = z.re * z.re - b2;
                let di = z.im * z.im - b2;
                creg += dr * dr + di * di;
            }
            CVariant::ComplexModulus => {
                let d = z.norm_sqr() - b2;
                creg += d * d;
            }
        }
    }
    0.5 * acc - lambda * creg
}

/// Objective of the group prox problem `1/2 ||r - r_hat||^2 + t ||r||`.
fn group_prox_objective(r: &[f64], r_hat: &[f64], t: f64) -> f64 {
    let dist2: f64 = r.iter().zip(r_hat).map(|(a, b)| (a - b) * (a - b)).sum();
    let norm: f64 = r.iter().map(|v| v * v).sum::<f64>().sqrt();
    0.5 * dist2 + t * norm
}

fn clip_into(r: &mut [f64], b: Option<f64>) {
    if let Some(b) = b {
        for v in r {
            *v = v.clamp(-b, b);
        }
    }
}

/// Numeric minimizer of `1/2 ||r - r_hat||^2 + t ||r||`, optionally subject
/// to the box `|r(d)| <= b`: projected gradient descent with backtracking
/// from several starts, a zero candidate, and a golden-section polish along
/// the ray of the best iterate.
pub fn numeric_group_prox(r_hat: &[f64], t: f64, b: Option<f64>) -> Vec<f64> {
    let dim = r_hat.len();
    let obj = |r: &[f64]| group_prox_objective(r, r_hat, t);

    let hat_norm: f64 = r_hat.iter().map(|v| v * v).sum::<f64>().sqrt();
    let shrink = if hat_norm > 0.0 {
        (hat_norm - t).max(0.0) / hat_norm
    } else {
        0.0
    };
    let mut starts: Vec<Vec<f64>> = vec![
        r_hat.to_vec(),
        r_hat.iter().map(|v| v * shrink).collect(),
        r_hat.iter().map(|v| v * 0.5).collect(),
    ];
    for s in &mut starts {
        clip_into(s, b);
    }

    let mut best = vec![0.0; dim];
    let mut best_obj = obj(&best);

    for start in starts {
        let mut r = start;
        let mut step = 0.5;
        let mut fr = obj(&r);
        for _ in 0..2000 {
            let norm: f64 = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            let grad: Vec<f64> = r
                .iter()
                .zip(r_hat)
                .map(|(ri, hi)| {
                    let sub = if norm > 1e-14 { t * ri / norm } else { 0.0 };
                    ri - hi + sub
                })
                .collect();
            let mut cand: Vec<f64> = r.iter().zip(&grad).map(|(ri, gi)| ri - step * gi).collect();
            clip_into(&mut cand, b);
            let fc = obj(&cand);
            if fc < fr - 1e-15 {
                r = cand;
                fr = fc;
                step = (step * 1.25).min(1.0);
            } else {
                step *= 0.5;
                if step < 1e-13 {
                    break;
                }
            }
        }
        if fr < best_obj {
            best_obj = fr;
            best = r;
        }
    }

    // Polish along the ray through the best point (the minimizer of the
    // clipped problem lies on a clipped ray, and near the shrink threshold
    // the ray of r_hat is exact).
    for direction in [best.clone(), r_hat.to_vec()] {
        let norm: f64 = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let eval = |alpha: f64| {
            let mut cand: Vec<f64> = direction.iter().map(|v| alpha * v).collect();
            clip_into(&mut cand, b);
            (obj(&cand), cand)
        };
        let (mut lo, mut hi) = (0.0f64, 2.0f64);
        let phi = 0.5 * (5.0f64.sqrt() - 1.0);
        let mut a = hi - phi * (hi - lo);
        let mut c = lo + phi * (hi - lo);
        let (mut fa, _) = eval(a);
        let (mut fc, _) = eval(c);
        for _ in 0..200 {
            if fa < fc {
                hi = c;
                c = a;
                fc = fa;
                a = hi - phi * (hi - lo);
                fa = eval(a).0;
            } else {
                lo = a;
                a = c;
                fa = fc;
                c = lo + phi * (hi - lo);
                fc = eval(c).0;
            }
            if hi - lo < 1e-14 {
                break;
            }
        }
        let (f_best, cand) = eval(0.5 * (lo + hi));
        if f_best < best_obj {
            best_obj = f_best;
            best = cand;
        }
    }

    best
}

/// Numeric minimizer of the channel block prox objective
/// `1/2 ||h - h_hat||^2 + t ||h||` over complex vectors.
pub fn numeric_prox_channel(h_hat: &[Complex64], t: f64) -> Vec<Complex64> {
    let stacked: Vec<f64> = h_hat
        .iter()
        .flat_map(|z| [z.re, z.im])
        .collect();
    let sol = numeric_group_prox(&stacked, t, None);
    sol.chunks(2).map(|p| Complex64::new(p[0], p[1])).collect()
}

/// Central finite difference of a scalar function of the stacked iterate
/// along direction `(dh, dx)`, treating real and imaginary parts as
/// independent reals.
pub fn fd_directional<F>(
    f: F,
    h: &Array2<Complex64>,
    x_d: &Array2<Complex64>,
    dh: &Array2<Complex64>,
    dx: &Array2<Complex64>,
    step: f64,
) -> f64
where
    F: Fn(&ArrayView2<Complex64>, &ArrayView2<Complex64>) -> f64,
{
    let hp = h + &dh.mapv(|z| z * step);
    let xp = x_d + &dx.mapv(|z| z * step);
    let hm = h - &dh.mapv(|z| z * step);
    let xm = x_d - &dx.mapv(|z| z * step);
    (f(&hp.view(), &xp.view()) - f(&hm.view(), &xm.view())) / (2.0 * step)
}

/// Real inner product of two complex gradient/direction pairs, i.e. the
/// directional derivative predicted by a real-pair gradient.
pub fn real_inner(
    g_h: &Array2<Complex64>,
    g_x: &Array2<Complex64>,
    d_h: &Array2<Complex64>,
    d_x: &Array2<Complex64>,
) -> f64 {
    let dot = |a: &Array2<Complex64>, b: &Array2<Complex64>| -> f64 {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| x.re * y.re + x.im * y.im)
            .sum()
    };
    dot(g_h, d_h) + dot(g_x, d_x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numeric_group_prox_matches_soft_threshold_in_1d() {
        // For a scalar, the prox of t|r| is soft thresholding.
        let sol = numeric_group_prox(&[2.0], 0.5, None);
        assert!((sol[0] - 1.5).abs() < 1e-7, "sol = {:?}", sol);
        let dead = numeric_group_prox(&[0.3], 0.5, None);
        assert!(dead[0].abs() < 1e-7);
    }

    #[test]
    fn numeric_group_prox_respects_box() {
        let sol = numeric_group_prox(&[5.0, -5.0], 0.0, Some(1.0));
        assert!((sol[0] - 1.0).abs() < 1e-9);
        assert!((sol[1] + 1.0).abs() < 1e-9);
    }

    #[test]
    fn numeric_channel_prox_matches_shrinkage_example() {
        let h = vec![Complex64::new(3.0, 0.0), Complex64::new(4.0, 0.0)];
        let sol = numeric_prox_channel(&h, 1.0);
        assert!((sol[0].re - 2.4).abs() < 1e-6);
        assert!((sol[1].re - 3.2).abs() < 1e-6);
    }
}
