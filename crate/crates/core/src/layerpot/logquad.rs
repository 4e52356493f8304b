//! Product integration of `ln|s − a|` against polynomials on `[-1, 1]`.
//!
//! Moments `L_k(a) = ∫ ln|s − a| P_k(s) ds` are integrated numerically on
//! dyadic grids graded toward the singular (or nearest) point, which stays
//! stable for targets inside and outside the panel alike.

use crate::quadrature::{gauss_legendre_16, legendre_all, ORDER};

const LEVELS: usize = 60;

/// `∫_{x0}^{x1} f` with dyadic grading toward `x0`. The integrand receives
/// the offset from `x0`, so distances to `x0` keep full relative precision.
fn graded<F: Fn(f64) -> [f64; ORDER]>(x0: f64, x1: f64, f: &F, acc: &mut [f64; ORDER]) {
    let (nodes, weights) = gauss_legendre_16();
    let len = x1 - x0;
    if len == 0.0 {
        return;
    }
    let mut hi = 1.0;
    for _ in 0..LEVELS {
        let lo = 0.5 * hi;
        let (c, h) = (0.5 * (lo + hi) * len, 0.5 * (hi - lo) * len);
        for (s, w) in nodes.iter().zip(weights) {
            let vals = f(c + h * s);
            for k in 0..ORDER {
                acc[k] += w * h * vals[k];
            }
        }
        hi = lo;
    }
}

/// `L_k(a)` for `k = 0..15`.
pub fn log_moments(a: f64) -> [f64; ORDER] {
    let pivot = a.clamp(-1.0, 1.0);
    let gap = pivot - a;
    let f = |u: f64| {
        let l = (gap + u).abs().ln();
        let mut p = legendre_all(pivot + u);
        for v in &mut p {
            *v *= l;
        }
        p
    };
    // `graded` integrates with orientation, so ∫_{-1}^{1} = ∫_p^{1} − ∫_p^{-1}.
    let mut right = [0.0; ORDER];
    let mut left = [0.0; ORDER];
    graded(pivot, 1.0, &f, &mut right);
    graded(pivot, -1.0, &f, &mut left);
    let mut acc = [0.0; ORDER];
    for k in 0..ORDER {
        acc[k] = right[k] - left[k];
    }
    acc
}

/// Weights `ω_j(a)` with `∫ ln|s − a| f(s) ds ≈ Σ_j ω_j f(s_j)`, exact for
/// polynomials of degree below 16.
pub fn log_weights(a: f64) -> [f64; ORDER] {
    let (nodes, weights) = gauss_legendre_16();
    let moments = log_moments(a);
    let mut out = [0.0; ORDER];
    for j in 0..ORDER {
        let p = legendre_all(nodes[j]);
        let mut acc = 0.0;
        for k in 0..ORDER {
            acc += moments[k] * (2 * k + 1) as f64 / 2.0 * p[k];
        }
        out[j] = acc * weights[j];
    }
    out
}
