//! Hankel functions `H₀¹` and `H₁¹` for `Im z ≥ 0`.
//!
//! Small arguments use the power-log series, split into the pieces the
//! singular quadrature needs (`J₀`, `J₁` and the log-free remainders).
//! Large arguments use the Laplace integral
//! `H_ν(z) = √(2/(πz)) e^{i(z−νπ/2−π/4)} / Γ(ν+½) ∫₀^∞ 2v^{2ν} e^{−v²} (1 + iv²/(2z))^{ν−½} dv`,
//! which is exact and avoids the divergent asymptotic tail. Beyond
//! `|z| = 20` the asymptotic series, cut at its smallest term, is already
//! accurate to about `e^{−2|z|}` and much cheaper.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::sync::OnceLock;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre_16;

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Series/integral switch radius.
pub const SWITCH_RADIUS: f64 = 8.0;

/// Above this imaginary part the series cancels badly (terms grow like
/// `e^{Im z}` while the result decays like `e^{−Im z}`), so the integral is used.
pub const SWITCH_IMAG: f64 = 2.0;

/// `Im z` beyond which `|H(z)| < e^{−40}`; callers may drop such terms.
pub const NEGLIGIBLE_DECAY: f64 = 40.0;

/// Radius from which the asymptotic expansion is used.
pub const ASYMPTOTIC_RADIUS: f64 = 20.0;

const I: C64 = C64 { re: 0.0, im: 1.0 };

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Route {
    Series,
    Integral,
    Asymptotic,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HankelValue {
    pub z: C64,
    pub value: C64,
    pub route: Route,
}

/// Pieces of the small-argument expansions.
///
/// `Y₀ = (2/π)[(ln(z/2) + γ) J₀ + s0]` and
/// `Y₁ = (2/π) J₁ ln(z/2) − 2/(πz) − t1/π`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeriesParts {
    pub j0: C64,
    pub s0: C64,
    pub j1: C64,
    pub t1: C64,
}

fn digamma_int(n: usize) -> f64 {
    // ψ(n) = −γ + H_{n−1}
    -EULER_GAMMA + (1..n).map(|k| 1.0 / k as f64).sum::<f64>()
}

/// Power series pieces; accurate for `|z| ≤ 8`.
pub fn series_parts(z: C64) -> SeriesParts {
    let q = -z * z / 4.0;
    let half = z / 2.0;
    // term_m = q^m / (m!)²; term1_m = q^m / (m!(m+1)!)
    let mut term = C64::new(1.0, 0.0);
    let mut term1 = C64::new(1.0, 0.0);
    let mut j0 = term;
    let mut j1 = term1;
    let mut s0 = C64::new(0.0, 0.0);
    let mut t1 = term1 * (digamma_int(1) + digamma_int(2));
    let mut harmonic = 0.0;
    let mut biggest: f64 = 1.0;
    let qn = q.norm_sqr();
    for m in 1..200 {
        let mf = m as f64;
        term *= q / (mf * mf);
        term1 *= q / (mf * (mf + 1.0));
        harmonic += 1.0 / mf;
        j0 += term;
        j1 += term1;
        // s0 = Σ (−1)^{m+1} H_m (z²/4)^m/(m!)² = −Σ H_m q^m/(m!)²
        s0 -= term * harmonic;
        let psi = 2.0 * (-EULER_GAMMA + harmonic) + 1.0 / (mf + 1.0);
        t1 += term1 * psi;
        // Squared magnitudes avoid a hypot per term.
        let size = term.norm_sqr();
        biggest = biggest.max(size * harmonic.max(1.0).powi(2));
        if size * (harmonic + 1.0).powi(2) < 1e-34 * biggest && (mf * mf).powi(2) > qn {
            break;
        }
    }
    SeriesParts {
        j0,
        s0,
        j1: j1 * half,
        t1: t1 * half,
    }
}

struct LaplaceRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl LaplaceRule {
    fn new(panels: usize) -> LaplaceRule {
        let (x, w) = gauss_legendre_16();
        let upper = 6.5;
        let h = upper / panels as f64 / 2.0;
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for p in 0..panels {
            let c = (2 * p + 1) as f64 * h;
            for (s, wt) in x.iter().zip(w) {
                let v = c + h * s;
                nodes.push(v);
                weights.push(wt * h * 2.0 * (-v * v).exp());
            }
        }
        LaplaceRule { nodes, weights }
    }
}

/// The integrand's branch points sit at `v = ±√(2iz)`, so larger `|z|`
/// allows wider panels.
fn laplace_rule(z: C64) -> &'static LaplaceRule {
    static NEAR: OnceLock<LaplaceRule> = OnceLock::new();
    static FAR: OnceLock<LaplaceRule> = OnceLock::new();
    if z.norm() >= SWITCH_RADIUS {
        FAR.get_or_init(|| LaplaceRule::new(2))
    } else {
        NEAR.get_or_init(|| LaplaceRule::new(3))
    }
}

/// Principal square root in real arithmetic; the library version goes
/// through polar form and dominates the cost of the integral route.
fn csqrt(z: C64) -> C64 {
    let r = (z.re * z.re + z.im * z.im).sqrt();
    if r == 0.0 {
        return C64::new(0.0, 0.0);
    }
    if z.re >= 0.0 {
        let t = (0.5 * (r + z.re)).sqrt();
        C64::new(t, z.im / (2.0 * t))
    } else {
        let t = (0.5 * (r - z.re)).sqrt();
        C64::new(z.im.abs() / (2.0 * t), t.copysign(z.im))
    }
}

fn laplace_pair(z: C64) -> (C64, C64) {
    let rule = laplace_rule(z);
    let mut i0 = C64::new(0.0, 0.0);
    let mut i1 = C64::new(0.0, 0.0);
    let c = I / (2.0 * z);
    for (&v, &w) in rule.nodes.iter().zip(&rule.weights) {
        let v2 = v * v;
        let base = C64::new(1.0, 0.0) + c * v2;
        let root = csqrt(base);
        i0 += w / root;
        i1 += root * (w * v2);
    }
    let pre = csqrt(2.0 / (PI * z));
    let gamma_half = PI.sqrt();
    let h0 = pre * (I * (z - FRAC_PI_4)).exp() * i0 / gamma_half;
    let h1 = pre * (I * (z - FRAC_PI_2 - FRAC_PI_4)).exp() * i1 / (0.5 * gamma_half);
    (h0, h1)
}

fn check_argument(z: C64) -> Result<()> {
    if z == C64::new(0.0, 0.0) {
        return Err(Error::LogSingularity);
    }
    if !z.re.is_finite() || !z.im.is_finite() {
        return Err(Error::InvalidParameter(format!("non-finite Hankel argument {z}")));
    }
    if z.im < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "Hankel argument {z} lies outside the closed upper half plane"
        )));
    }
    Ok(())
}

/// `H₀¹(z)` and `H₁¹(z)` together.
pub fn hankel01(z: C64) -> Result<(C64, C64)> {
    check_argument(z)?;
    Ok(hankel01_unchecked(z))
}

/// Evaluation route for `z`.
pub fn route(z: C64) -> Route {
    let r = z.norm();
    if r <= SWITCH_RADIUS && z.im <= SWITCH_IMAG {
        Route::Series
    } else if r < ASYMPTOTIC_RADIUS {
        Route::Integral
    } else {
        Route::Asymptotic
    }
}

pub(crate) fn hankel01_unchecked(z: C64) -> (C64, C64) {
    match route(z) {
        Route::Series => {
            let p = series_parts(z);
            let lg = (z / 2.0).ln();
            let y0 = (2.0 / PI) * ((lg + EULER_GAMMA) * p.j0 + p.s0);
            let y1 = (2.0 / PI) * p.j1 * lg - 2.0 / (PI * z) - p.t1 / PI;
            (p.j0 + I * y0, p.j1 + I * y1)
        }
        Route::Integral => laplace_pair(z),
        Route::Asymptotic => asymptotic_pair(z),
    }
}

/// `Σ_k i^k a_k(ν) / z^k` with `a_k(ν) = Π_{m≤k} (4ν² − (2m−1)²) / (k! 8^k)`,
/// summed until the terms stop decreasing.
fn asymptotic_sum(nu: f64, z: C64) -> C64 {
    let mu = 4.0 * nu * nu;
    let mut term = C64::new(1.0, 0.0);
    let mut sum = term;
    let step = I / z;
    for k in 1..200 {
        let m = (2 * k - 1) as f64;
        let next = term * step * ((mu - m * m) / (8.0 * k as f64));
        if next.norm_sqr() >= term.norm_sqr() {
            break;
        }
        sum += next;
        term = next;
        if term.norm_sqr() < 1e-34 * sum.norm_sqr() {
            break;
        }
    }
    sum
}

fn asymptotic_pair(z: C64) -> (C64, C64) {
    let pre = csqrt(2.0 / (PI * z));
    let h0 = pre * (I * (z - FRAC_PI_4)).exp() * asymptotic_sum(0.0, z);
    let h1 = pre * (I * (z - FRAC_PI_2 - FRAC_PI_4)).exp() * asymptotic_sum(1.0, z);
    (h0, h1)
}

/// `H₀¹(z)` with its evaluation route.
pub fn hankel_h0(z: C64) -> Result<HankelValue> {
    let (h0, _) = hankel01(z)?;
    Ok(HankelValue {
        z,
        value: h0,
        route: route(z),
    })
}

pub fn hankel_h1(z: C64) -> Result<C64> {
    Ok(hankel01(z)?.1)
}

/// Coefficients `b_n`, `c_n` of `−(i/4)H₀¹(k|x|) = Σ_n (b_n ln(k|x|) + c_n)(k|x|)^{2n}`
/// beyond the leading logarithm, for `n ≥ 1`.
pub fn expansion_coefficients(n: usize) -> (C64, C64) {
    let mut fact = 1.0;
    for m in 1..=n {
        fact *= m as f64;
    }
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    let base = sign / (4f64.powi(n as i32) * fact * fact);
    let harmonic: f64 = (1..=n).map(|j| 1.0 / j as f64).sum();
    let b = base / (2.0 * PI);
    let c = C64::new(base / (2.0 * PI) * (EULER_GAMMA - 2f64.ln() - harmonic), -base / 4.0);
    (C64::new(b, 0.0), c)
}
