//! Nyström discretizations of the Neumann–Poincaré operator `K*` and the
//! single-layer operator `S`, static and at finite frequency.
//!
//! Entries act on node values: `(A φ)_i = Σ_j A_ij φ_j` approximates the
//! boundary integral at node `i`. Logarithmic kernels are integrated on the
//! target's own panel and its two neighbours by product integration of the
//! split `A(r) ln r + B(r)`, with `A` and `B` smooth.

pub mod hankel;
pub mod logquad;

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::path::Path;

use faer::Mat;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg::spectral_norm;
use crate::quadrature::{PanelMesh, ORDER};
use hankel::{hankel01_unchecked, series_parts, EULER_GAMMA, NEGLIGIBLE_DECAY, SWITCH_RADIUS};

const I: C64 = C64 { re: 0.0, im: 1.0 };

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OperatorKind {
    NpStatic,
    SlStatic,
    NpHelmholtz,
    SlHelmholtz,
}

impl fmt::Display for OperatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OperatorKind::NpStatic => "np_static",
            OperatorKind::SlStatic => "sl_static",
            OperatorKind::NpHelmholtz => "np_helmholtz",
            OperatorKind::SlHelmholtz => "sl_helmholtz",
        })
    }
}

#[derive(Clone, Debug)]
pub enum OperatorData {
    Real(Mat<f64>),
    Complex(Mat<C64>),
}

/// Square Nyström matrix over a mesh.
#[derive(Clone, Debug)]
pub struct DenseOperator {
    pub kind: OperatorKind,
    /// Wavenumber; zero for static operators.
    pub k: C64,
    pub data: OperatorData,
}

impl DenseOperator {
    pub fn dim(&self) -> usize {
        match &self.data {
            OperatorData::Real(m) => m.nrows(),
            OperatorData::Complex(m) => m.nrows(),
        }
    }

    pub fn entry(&self, i: usize, j: usize) -> C64 {
        match &self.data {
            OperatorData::Real(m) => C64::new(m[(i, j)], 0.0),
            OperatorData::Complex(m) => m[(i, j)],
        }
    }

    pub fn real(&self) -> Option<&Mat<f64>> {
        match &self.data {
            OperatorData::Real(m) => Some(m),
            OperatorData::Complex(_) => None,
        }
    }

    /// Complex copy of the matrix.
    pub fn to_complex(&self) -> Mat<C64> {
        match &self.data {
            OperatorData::Real(m) => Mat::from_fn(m.nrows(), m.ncols(), |i, j| C64::new(m[(i, j)], 0.0)),
            OperatorData::Complex(m) => m.clone(),
        }
    }

    /// `A φ` for complex node data.
    pub fn apply(&self, phi: &[C64]) -> Result<Vec<C64>> {
        let n = self.dim();
        if phi.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                got: phi.len(),
            });
        }
        let mut out = vec![C64::new(0.0, 0.0); n];
        match &self.data {
            OperatorData::Real(m) => {
                for (j, p) in phi.iter().enumerate() {
                    for (o, a) in out.iter_mut().zip(m.col(j).iter()) {
                        *o += p * *a;
                    }
                }
            }
            OperatorData::Complex(m) => {
                for (j, p) in phi.iter().enumerate() {
                    for (o, a) in out.iter_mut().zip(m.col(j).iter()) {
                        *o += p * a;
                    }
                }
            }
        }
        Ok(out)
    }

    /// `A φ` for real node data.
    pub fn apply_real(&self, phi: &[f64]) -> Result<Vec<C64>> {
        let c: Vec<C64> = phi.iter().map(|&v| C64::new(v, 0.0)).collect();
        self.apply(&c)
    }

    /// Writes the matrix as CSV: a comment header with kind, wavenumber and
    /// node count, then `row,col,re,im` in row-major order.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(
            w,
            "# kind={} k_re={:.16e} k_im={:.16e} nodes={}",
            self.kind,
            self.k.re,
            self.k.im,
            self.dim()
        )?;
        writeln!(w, "row,col,re,im")?;
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                let v = self.entry(i, j);
                writeln!(w, "{i},{j},{:.16e},{:.16e}", v.re, v.im)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// `(1/2π)⟨x − y, ν_x⟩/|x − y|²` for `x ≠ y`.
pub fn np_kernel(x: [f64; 2], nu_x: [f64; 2], y: [f64; 2]) -> f64 {
    np_kernel_chord([x[0] - y[0], x[1] - y[1]], nu_x)
}

fn np_kernel_chord(d: [f64; 2], nu: [f64; 2]) -> f64 {
    (d[0] * nu[0] + d[1] * nu[1]) / (2.0 * PI * (d[0] * d[0] + d[1] * d[1]))
}

/// Diagonal limit `−⟨x″, ν⟩/(4π|x′|²)`, equal to `κ/(4π)`.
pub fn np_diagonal(mesh: &PanelMesh, j: usize) -> f64 {
    let (dd, nu, sp) = (mesh.ddx[j], mesh.normal[j], mesh.speed[j]);
    -(dd[0] * nu[0] + dd[1] * nu[1]) / (4.0 * PI * sp * sp)
}

/// One near panel of a target node with its product-integration weights.
struct NearPanel {
    panel: usize,
    /// Target parameter in the panel's reference coordinate.
    a: f64,
    omega: [f64; ORDER],
}

fn near_panels(mesh: &PanelMesh, i: usize) -> Vec<NearPanel> {
    let np = mesh.panel_count();
    let p = mesh.panel_of(i);
    let mut list = vec![(np + p - 1) % np, p, (p + 1) % np];
    list.dedup();
    if list.len() == 3 && list[0] == list[2] {
        list.pop();
    }
    list.into_iter()
        .map(|q| {
            let panel = mesh.panels()[q];
            let mut dt = mesh.t[i] - panel.center();
            // Unwrap across t = 0.
            if dt > PI {
                dt -= 2.0 * PI;
            } else if dt < -PI {
                dt += 2.0 * PI;
            }
            let a = if q == p {
                crate::quadrature::gauss_legendre_16().0[i % ORDER]
            } else {
                dt / panel.half_width()
            };
            NearPanel {
                panel: q,
                a,
                omega: logquad::log_weights(a),
            }
        })
        .collect()
}

/// Chord `x_i − x_j`, with the cancellation-free formula for nearby nodes.
fn chord(mesh: &PanelMesh, i: usize, j: usize, near: bool) -> [f64; 2] {
    if near {
        mesh.curve().chord(mesh.t[i], mesh.t[j])
    } else {
        [mesh.x[i][0] - mesh.x[j][0], mesh.x[i][1] - mesh.x[j][1]]
    }
}

fn is_near(mesh: &PanelMesh, i: usize, j: usize) -> bool {
    let np = mesh.panel_count();
    let (p, q) = (mesh.panel_of(i), mesh.panel_of(j));
    p == q || (p + 1) % np == q || (q + 1) % np == p
}

/// Kernel data for one target/source pair.
struct Pair {
    d: [f64; 2],
    r: f64,
}

/// Fills a complex operator: `far(pair, i, j)` gives the plain kernel value,
/// `split(pair, i, j)` the smooth pair `(A, B)` with kernel `A ln r + B`.
fn assemble_split<F, S>(mesh: &PanelMesh, far: F, split: S) -> Result<Mat<C64>>
where
    F: Fn(&Pair, usize, usize) -> C64,
    S: Fn(&Pair, usize, usize) -> Result<(C64, C64)>,
{
    let n = mesh.len();
    let mut m = Mat::<C64>::zeros(n, n);
    let (nodes, _) = crate::quadrature::gauss_legendre_16();
    for i in 0..n {
        for j in 0..n {
            if is_near(mesh, i, j) {
                continue;
            }
            let d = chord(mesh, i, j, false);
            let pair = Pair { d, r: d[0].hypot(d[1]) };
            m[(i, j)] = far(&pair, i, j) * mesh.weights[j];
        }
        for np in near_panels(mesh, i) {
            let h = mesh.panels()[np.panel].half_width();
            for jj in 0..ORDER {
                let j = np.panel * ORDER + jj;
                let (pair, log_ratio) = if j == i {
                    (Pair { d: [0.0, 0.0], r: 0.0 }, (h * mesh.speed[i]).ln())
                } else {
                    let d = chord(mesh, i, j, true);
                    let r = d[0].hypot(d[1]);
                    (Pair { d, r }, (r / (np.a - nodes[jj]).abs()).ln())
                };
                let (a, b) = split(&pair, i, j)?;
                let wj = mesh.weights[j];
                m[(i, j)] = a * (h * mesh.speed[j] * np.omega[jj] + wj * log_ratio) + b * wj;
            }
        }
    }
    Ok(m)
}

/// Static NP operator `K*`.
pub fn assemble_np(mesh: &PanelMesh) -> DenseOperator {
    let n = mesh.len();
    let m = Mat::from_fn(n, n, |i, j| {
        if i == j {
            np_diagonal(mesh, j) * mesh.weights[j]
        } else {
            let d = chord(mesh, i, j, is_near(mesh, i, j));
            np_kernel_chord(d, mesh.normal[i]) * mesh.weights[j]
        }
    });
    DenseOperator {
        kind: OperatorKind::NpStatic,
        k: C64::new(0.0, 0.0),
        data: OperatorData::Real(m),
    }
}

/// Static single-layer operator with kernel `(1/2π) ln|x − y|`.
pub fn assemble_sl(mesh: &PanelMesh) -> DenseOperator {
    let c = 1.0 / (2.0 * PI);
    let m = assemble_split(
        mesh,
        |p, _, _| C64::new(c * p.r.ln(), 0.0),
        |_, _, _| Ok((C64::new(c, 0.0), C64::new(0.0, 0.0))),
    )
    .expect("static split cannot fail");
    let n = mesh.len();
    DenseOperator {
        kind: OperatorKind::SlStatic,
        k: C64::new(0.0, 0.0),
        data: OperatorData::Real(Mat::from_fn(n, n, |i, j| m[(i, j)].re)),
    }
}

fn check_wavenumber(k: C64) -> Result<()> {
    if k == C64::new(0.0, 0.0) {
        return Err(Error::InvalidParameter("k = 0: use the static assembly".into()));
    }
    if k.im < 0.0 || !k.re.is_finite() || !k.im.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "wavenumber {k} must be finite with Im k ≥ 0"
        )));
    }
    Ok(())
}

fn near_too_far(k: C64, r: f64) -> Error {
    Error::Resolution(format!(
        "|k|·r = {:.3} on neighbouring panels exceeds {SWITCH_RADIUS}; refine the mesh",
        k.norm() * r
    ))
}

/// Finite-frequency single layer with `G^k = −(i/4) H₀¹(k|x − y|)`.
pub fn assemble_sl_k(mesh: &PanelMesh, k: C64) -> Result<DenseOperator> {
    check_wavenumber(k)?;
    let lk = (k / 2.0).ln() + EULER_GAMMA;
    let c = 1.0 / (2.0 * PI);
    let m = assemble_split(
        mesh,
        |p, _, _| {
            if k.im * p.r > NEGLIGIBLE_DECAY {
                return C64::new(0.0, 0.0);
            }
            -I / 4.0 * hankel01_unchecked(k * p.r).0
        },
        |p, _, _| {
            let z = k * p.r;
            if z.norm() > SWITCH_RADIUS {
                return Err(near_too_far(k, p.r));
            }
            let s = series_parts(z);
            Ok((s.j0 * c, -I / 4.0 * s.j0 + c * (s.j0 * lk + s.s0)))
        },
    )?;
    Ok(DenseOperator {
        kind: OperatorKind::SlHelmholtz,
        k,
        data: OperatorData::Complex(m),
    })
}

/// Finite-frequency NP operator with kernel `∂_{ν_x} G^k(x − y)`.
pub fn assemble_np_k(mesh: &PanelMesh, k: C64) -> Result<DenseOperator> {
    check_wavenumber(k)?;
    let lk = (k / 2.0).ln();
    let c = 1.0 / (2.0 * PI);
    let m = assemble_split(
        mesh,
        |p, i, _| {
            if k.im * p.r > NEGLIGIBLE_DECAY {
                return C64::new(0.0, 0.0);
            }
            let nu = mesh.normal[i];
            let dn = (p.d[0] * nu[0] + p.d[1] * nu[1]) / p.r;
            I * k / 4.0 * hankel01_unchecked(k * p.r).1 * dn
        },
        |p, i, _| {
            if p.r == 0.0 {
                return Ok((C64::new(0.0, 0.0), C64::new(mesh.kappa[i] / (4.0 * PI), 0.0)));
            }
            let z = k * p.r;
            if z.norm() > SWITCH_RADIUS {
                return Err(near_too_far(k, p.r));
            }
            let s = series_parts(z);
            let nu = mesh.normal[i];
            let dn = (p.d[0] * nu[0] + p.d[1] * nu[1]) / p.r;
            let a = -k * c * s.j1 * dn;
            let b = dn * (c / p.r + I * k / 4.0 * s.j1 - k * c * s.j1 * lk + k * c / 2.0 * s.t1);
            Ok((a, b))
        },
    )?;
    Ok(DenseOperator {
        kind: OperatorKind::NpHelmholtz,
        k,
        data: OperatorData::Complex(m),
    })
}

/// Column-sum identity report for a static NP matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct ColumnSumReport {
    /// `max_j |Σ_i w_i A_ij / w_j − ½|`.
    pub max_defect: f64,
    /// Quadrature error estimate from a panel-bisected integration of the kernel.
    pub error_estimate: f64,
    pub pass: bool,
}

/// Floor on the quadrature error estimate.
pub const COLUMN_SUM_FLOOR: f64 = 1e-12;

/// Checks `Σ_i w_i A_ij = ½ w_j` against an independent quadrature error
/// estimate: the kernel column integrals on the mesh and on its bisection.
pub fn column_sum_check(mesh: &PanelMesh, op: &DenseOperator) -> Result<ColumnSumReport> {
    if op.kind != OperatorKind::NpStatic || op.dim() != mesh.len() {
        return Err(Error::Precondition(
            "column-sum check needs the static NP matrix of this mesh".into(),
        ));
    }
    let fine = mesh.refined()?;
    let n = mesh.len();
    let mut max_defect: f64 = 0.0;
    let mut estimate: f64 = 0.0;
    for j in 0..n {
        let s: f64 = (0..n).map(|i| mesh.weights[i] * op.entry(i, j).re).sum();
        max_defect = max_defect.max((s / mesh.weights[j] - 0.5).abs());
        let y = mesh.x[j];
        let integrate = |m: &PanelMesh| -> f64 {
            (0..m.len())
                .map(|i| {
                    let d = [m.x[i][0] - y[0], m.x[i][1] - y[1]];
                    let k = if d[0].hypot(d[1]) < 1e-14 {
                        m.kappa[i] / (4.0 * PI)
                    } else {
                        np_kernel_chord(d, m.normal[i])
                    };
                    k * m.weights[i]
                })
                .sum()
        };
        estimate = estimate.max((integrate(mesh) - integrate(&fine)).abs());
    }
    let error_estimate = estimate.max(COLUMN_SUM_FLOOR);
    Ok(ColumnSumReport {
        max_defect,
        error_estimate,
        pass: max_defect <= 10.0 * error_estimate,
    })
}

/// One row of the quasi-static residual table.
#[derive(Clone, Debug, PartialEq)]
pub struct QuasistaticRow {
    pub k: f64,
    /// `‖(K^k)* − K*‖ / (k²|ln k|)`.
    pub residual_k: f64,
    /// `‖S^k − S − τ⟨·,1⟩‖ / (k²|ln k|)`.
    pub residual_s: f64,
    /// Same without the `τ⟨·,1⟩` correction.
    pub residual_s_uncorrected: f64,
    /// `k·diam > 0.5`: outside the asymptotic regime.
    pub outside_regime: bool,
}

/// Constant `τ = (1/2π)(ln k + γ − ln 2) − i/4` of the small-`k` expansion.
pub fn tau(k: C64) -> C64 {
    ((k / 2.0).ln() + EULER_GAMMA) / (2.0 * PI) - I / 4.0
}

/// Weighted-L² operator norm `‖D^{1/2} M D^{−1/2}‖₂`.
pub fn weighted_norm(mesh: &PanelMesh, m: &Mat<C64>) -> f64 {
    let sw: Vec<f64> = mesh.weights.iter().map(|w| w.sqrt()).collect();
    let scaled = Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * (sw[i] / sw[j]));
    spectral_norm(scaled.as_ref(), 1e-8, 2000)
}

/// Scaled finite-frequency residuals for each `k`.
pub fn quasistatic_residual(mesh: &PanelMesh, k_values: &[f64]) -> Result<Vec<QuasistaticRow>> {
    if k_values.is_empty() {
        return Ok(vec![]);
    }
    let diam = diameter(mesh);
    let np = assemble_np(mesh).to_complex();
    let sl = assemble_sl(mesh).to_complex();
    let n = mesh.len();
    let mut rows = Vec::with_capacity(k_values.len());
    for &k in k_values {
        if !(k > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "quasi-static residual needs k > 0, got {k}"
            )));
        }
        let kc = C64::new(k, 0.0);
        let npk = assemble_np_k(mesh, kc)?.to_complex();
        let slk = assemble_sl_k(mesh, kc)?.to_complex();
        let t = tau(kc);
        let scale = k * k * k.ln().abs();
        let dk = Mat::from_fn(n, n, |i, j| npk[(i, j)] - np[(i, j)]);
        let ds = Mat::from_fn(n, n, |i, j| slk[(i, j)] - sl[(i, j)]);
        let dsc = Mat::from_fn(n, n, |i, j| ds[(i, j)] - t * mesh.weights[j]);
        let outside_regime = k * diam > 0.5;
        if outside_regime {
            log::warn!("k = {k}: k·diam = {:.3} is outside the quasi-static regime", k * diam);
        }
        rows.push(QuasistaticRow {
            k,
            residual_k: weighted_norm(mesh, &dk) / scale,
            residual_s: weighted_norm(mesh, &dsc) / scale,
            residual_s_uncorrected: weighted_norm(mesh, &ds) / scale,
            outside_regime,
        });
    }
    Ok(rows)
}

/// Largest distance between mesh nodes.
pub fn diameter(mesh: &PanelMesh) -> f64 {
    let mut d: f64 = 0.0;
    for i in 0..mesh.len() {
        for j in i + 1..mesh.len() {
            d = d.max((mesh.x[i][0] - mesh.x[j][0]).hypot(mesh.x[i][1] - mesh.x[j][1]));
        }
    }
    d
}
