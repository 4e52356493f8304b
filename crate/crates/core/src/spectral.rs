//! Spectrum of the static NP operator, the permittivity map and the
//! closed-form ellipse eigensystem.

use std::path::Path;

use faer::Mat;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::fieldeval::{eval_single_layer, upsample};
use crate::io::{num, write_csv};
use crate::layerpot::{DenseOperator, OperatorKind};
use crate::linalg::{eig_real, inverse_iteration};
use crate::quadrature::PanelMesh;

/// Relative eigenvalue gap below which eigenvalues are grouped as one.
pub const CLUSTER_TOL: f64 = 1e-5;

/// Eigenvalues with `|λ|` below this are grouped by absolute gap instead.
const CLUSTER_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct EigenPair {
    pub eigenvalue: C64,
    /// Eigenfunction values at the mesh nodes.
    pub vector: Vec<C64>,
    /// `(Σ_j |φ_j|² w_j)^{1/2}`.
    pub norm: f64,
    pub cluster: usize,
    /// Position when sorted by `|λ|` descending.
    pub rank: usize,
}

impl EigenPair {
    pub fn lambda(&self) -> f64 {
        self.eigenvalue.re
    }
}

/// Full spectrum of a static NP matrix.
///
/// The eigenproblem is solved for `D^{1/2} A D^{−1/2}` with `D = diag(w)`,
/// which is nearly symmetric. Eigenfunctions come back with unit weighted
/// L² norm, an orthonormal basis within each cluster and their largest
/// sample real and positive.
pub fn eigendecompose(mesh: &PanelMesh, op: &DenseOperator, cluster_tol: f64) -> Result<Vec<EigenPair>> {
    let a = match (&op.kind, op.real()) {
        (OperatorKind::NpStatic, Some(a)) => a,
        _ => {
            return Err(Error::Precondition(format!(
                "eigendecompose needs the static NP operator, got {}",
                op.kind
            )))
        }
    };
    let n = mesh.len();
    if a.nrows() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: a.nrows(),
        });
    }
    let sw: Vec<f64> = mesh.weights.iter().map(|w| w.sqrt()).collect();
    let b = Mat::from_fn(n, n, |i, j| a[(i, j)] * sw[i] / sw[j]);
    let (values, vectors) = eig_real(b.as_ref())?;

    // Cluster neighbours in value order, then rank the clusters by |λ|. Doing
    // it the other way round would split a degenerate λ whenever −λ is
    // also an eigenvalue.
    let mut by_value: Vec<usize> = (0..n).collect();
    by_value.sort_by(|&i, &j| {
        let (a, b) = (values[i], values[j]);
        b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)).then(i.cmp(&j))
    });
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (r, &idx) in by_value.iter().enumerate() {
        let joins = r > 0 && {
            let (prev, cur) = (values[by_value[r - 1]], values[idx]);
            let scale = prev.norm().max(cur.norm()).max(CLUSTER_FLOOR);
            (prev - cur).norm() <= cluster_tol * scale
        };
        match groups.last_mut() {
            Some(g) if joins => g.push(idx),
            _ => groups.push(vec![idx]),
        }
    }
    let peak = |g: &[usize]| g.iter().map(|&i| values[i].norm()).fold(0.0, f64::max);
    groups.sort_by(|a, b| {
        peak(b)
            .total_cmp(&peak(a))
            .then(values[b[0]].re.total_cmp(&values[a[0]].re))
            .then(a[0].cmp(&b[0]))
    });
    let order: Vec<usize> = groups.iter().flatten().copied().collect();
    let cluster_of: Vec<usize> = groups
        .iter()
        .enumerate()
        .flat_map(|(c, g)| std::iter::repeat_n(c, g.len()))
        .collect();

    let mut pairs: Vec<EigenPair> = Vec::with_capacity(n);
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && cluster_of[end] == cluster_of[start] {
            end += 1;
        }
        // Orthonormal basis of the cluster in the symmetrized coordinates.
        let members = &order[start..end];
        let basis = match cluster_basis(&vectors, members) {
            Some(basis) => basis,
            None => recover_cluster(b.as_ref(), &values, &vectors, members)?,
        };
        for (off, v) in basis.into_iter().enumerate() {
            let idx = order[start + off];
            let mut vector: Vec<C64> = v.iter().zip(&sw).map(|(x, s)| x / s).collect();
            fix_phase(&mut vector);
            pairs.push(EigenPair {
                eigenvalue: values[idx],
                vector,
                norm: 1.0,
                cluster: cluster_of[start],
                rank: start + off,
            });
        }
        start = end;
    }
    for p in &mut pairs {
        p.norm = weighted_norm(mesh, &p.vector);
    }
    Ok(pairs)
}

/// Gram–Schmidt over the solver's eigenvectors, or `None` when they are
/// numerically dependent.
fn cluster_basis(vectors: &Mat<C64>, members: &[usize]) -> Option<Vec<Vec<C64>>> {
    let mut basis: Vec<Vec<C64>> = Vec::with_capacity(members.len());
    for &idx in members {
        let mut v: Vec<C64> = vectors.col(idx).iter().copied().collect();
        for q in &basis {
            let c: C64 = q.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
            for (x, y) in v.iter_mut().zip(q) {
                *x -= c * y;
            }
        }
        let nrm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if nrm < 1e-8 {
            return None;
        }
        for x in &mut v {
            *x /= nrm;
        }
        basis.push(v);
    }
    Some(basis)
}

/// A nearly defective multiple eigenvalue (common on symmetric shapes,
/// where the discretized operator is only nearly normal) can come back with
/// parallel eigenvectors. The invariant subspace is still well defined, so a
/// real cluster is rebuilt by block inverse iteration started from the
/// solver's vectors plus smooth perturbations.
fn recover_cluster(
    b: faer::MatRef<'_, f64>,
    values: &[C64],
    vectors: &Mat<C64>,
    members: &[usize],
) -> Result<Vec<Vec<C64>>> {
    let n = b.nrows();
    let scale = members.iter().map(|&i| values[i].norm()).fold(CLUSTER_FLOOR, f64::max);
    if members.iter().any(|&i| values[i].im.abs() > 1e-8 * scale) {
        return Err(Error::EigenSolver(format!(
            "eigenvectors of the complex cluster at λ = {} are numerically dependent",
            values[members[0]]
        )));
    }
    let mean = members.iter().map(|&i| values[i].re).sum::<f64>() / members.len() as f64;
    let start: Vec<Vec<f64>> = members
        .iter()
        .enumerate()
        .map(|(k, &idx)| {
            (0..n)
                .map(|r| {
                    vectors[(r, idx)].re + 0.1 * ((k + 1) as f64 * (r as f64 + 0.5) * 0.618).sin() / (n as f64).sqrt()
                })
                .collect()
        })
        .collect();
    let shift = mean + 1e-3 * CLUSTER_TOL * scale;
    log::debug!("recovering {} dependent eigenvectors at λ = {mean}", members.len());
    let (_, q) = inverse_iteration(b, shift, start, 8)?;
    Ok(q.into_iter()
        .map(|v| v.into_iter().map(|x| C64::new(x, 0.0)).collect())
        .collect())
}

fn fix_phase(v: &mut [C64]) {
    let big = v
        .iter()
        .copied()
        .max_by(|a, b| a.norm().total_cmp(&b.norm()))
        .unwrap_or(C64::new(1.0, 0.0));
    if big.norm() > 0.0 {
        let rot = big.conj() / big.norm();
        for x in v.iter_mut() {
            *x *= rot;
        }
    }
}

/// `(Σ_j |φ_j|² w_j)^{1/2}`.
pub fn weighted_norm(mesh: &PanelMesh, phi: &[C64]) -> f64 {
    phi.iter()
        .zip(&mesh.weights)
        .map(|(p, w)| p.norm_sqr() * w)
        .sum::<f64>()
        .sqrt()
}

/// `Σ_j conj(a_j) b_j w_j`.
pub fn weighted_inner(mesh: &PanelMesh, a: &[C64], b: &[C64]) -> C64 {
    a.iter()
        .zip(b)
        .zip(&mesh.weights)
        .map(|((x, y), w)| x.conj() * y * *w)
        .sum()
}

/// Pair whose eigenvalue is closest to `1/2`.
pub fn half_pair(pairs: &[EigenPair]) -> Result<&EigenPair> {
    pairs
        .iter()
        .min_by(|a, b| (a.eigenvalue - 0.5).norm().total_cmp(&(b.eigenvalue - 0.5).norm()))
        .filter(|p| (p.eigenvalue - 0.5).norm() < 1e-4)
        .ok_or_else(|| Error::MissingEigenvalue("no eigenvalue near 1/2".into()))
}

/// Eigenvalues other than `1/2` with the given sign, by decreasing `|λ|`.
pub fn signed_track(pairs: &[EigenPair], positive: bool) -> Vec<&EigenPair> {
    let half = half_pair(pairs).ok().map(|p| p.rank);
    pairs
        .iter()
        .filter(|p| Some(p.rank) != half && (p.lambda() > 0.0) == positive && p.lambda() != 0.0)
        .collect()
}

/// `λ(ε) = (ε + 1)/(2(ε − 1))`.
pub fn permittivity_to_eigenvalue(eps: f64) -> Result<f64> {
    if eps == 1.0 {
        return Err(Error::Pole("ε = 1 has no eigenvalue".into()));
    }
    if !eps.is_finite() {
        return Err(Error::Domain(format!("permittivity {eps} is not finite")));
    }
    Ok((eps + 1.0) / (2.0 * (eps - 1.0)))
}

/// `ε = (2λ + 1)/(2λ − 1)`, the inverse of [`permittivity_to_eigenvalue`].
pub fn eigenvalue_to_permittivity(lambda: f64) -> Result<f64> {
    if lambda == 0.5 {
        return Err(Error::Pole("λ = 1/2 corresponds to ε = ∞".into()));
    }
    if !(lambda > -0.5 && lambda < 0.5) {
        return Err(Error::Domain(format!("λ = {lambda} lies outside (−1/2, 1/2)")));
    }
    Ok((2.0 * lambda + 1.0) / (2.0 * lambda - 1.0))
}

#[derive(Clone, Debug, PartialEq)]
pub struct HalfEigenReport {
    pub eigenvalue: f64,
    pub mean: f64,
    pub max_deviation: f64,
    /// `max_deviation / max(|mean|, Σ|ψ₀| w / 2π)`.
    pub relative_deviation: f64,
    pub probes: usize,
    pub pass: bool,
}

/// Checks that the single layer of the `λ = 1/2` eigenfunction is constant
/// inside the domain, probing along rays from the centroid. The density is
/// first interpolated onto a mesh with panels quartered, which narrows the
/// excluded boundary band.
pub fn check_half_eigen(pairs: &[EigenPair], mesh: &PanelMesh) -> Result<HalfEigenReport> {
    let half = half_pair(pairs)?;
    let (fine, density) = upsample(mesh, &half.vector, 2)?;
    let c = centroid(mesh);
    let mut points = Vec::new();
    let step = (mesh.len() / 24).max(1);
    for j in (0..mesh.len()).step_by(step) {
        for s in [0.0, 0.3, 0.6] {
            points.push([c[0] + s * (mesh.x[j][0] - c[0]), c[1] + s * (mesh.x[j][1] - c[1])]);
        }
    }
    let values = eval_single_layer(&fine, &density, &points, C64::new(0.0, 0.0))?;
    let re: Vec<f64> = values.iter().flatten().map(|v| v.re).collect();
    if re.len() < 8 {
        return Err(Error::InsufficientGrid(
            "fewer than 8 interior probes clear the boundary band".into(),
        ));
    }
    let mean = re.iter().sum::<f64>() / re.len() as f64;
    let max_deviation = re.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max);
    let scale: f64 = half
        .vector
        .iter()
        .zip(&mesh.weights)
        .map(|(p, w)| p.norm() * w)
        .sum::<f64>()
        / (2.0 * std::f64::consts::PI);
    let relative_deviation = max_deviation / mean.abs().max(scale);
    Ok(HalfEigenReport {
        eigenvalue: half.lambda(),
        mean,
        max_deviation,
        relative_deviation,
        probes: re.len(),
        pass: relative_deviation < 1e-6,
    })
}

/// Area centroid of the region bounded by the mesh.
pub fn centroid(mesh: &PanelMesh) -> [f64; 2] {
    // Green's theorem: A = ½∮(x dy − y dx), Cx = (1/2A)∮x² dy, Cy = −(1/2A)∮y² dx.
    let (mut a, mut cx, mut cy) = (0.0, 0.0, 0.0);
    for j in 0..mesh.len() {
        let (x, dx) = (mesh.x[j], mesh.dx[j]);
        let w = mesh.weights[j] / mesh.speed[j];
        a += 0.5 * (x[0] * dx[1] - x[1] * dx[0]) * w;
        cx += 0.5 * x[0] * x[0] * dx[1] * w;
        cy -= 0.5 * x[1] * x[1] * dx[0] * w;
    }
    [cx / a, cy / a]
}

/// Closed-form NP eigensystem of the ellipse
/// `x = (R₀ cos ω cosh ρ₀, R₀ sin ω sinh ρ₀)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EllipseOracle {
    pub r0: f64,
    pub rho0: f64,
}

/// Which closed-form eigenfunction: `Ξ⁻¹ cos nω` (eigenvalue `+a_n`) or
/// `Ξ⁻¹ sin nω` (eigenvalue `−a_n`).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EllipseMode {
    Cos,
    Sin,
}

impl EllipseMode {
    pub fn sign(self) -> f64 {
        match self {
            EllipseMode::Cos => 1.0,
            EllipseMode::Sin => -1.0,
        }
    }
}

pub fn ellipse_oracle(r0: f64, rho0: f64) -> Result<EllipseOracle> {
    if !(r0 > 0.0 && rho0 > 0.0 && r0.is_finite() && rho0.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "ellipse oracle needs R₀ > 0 and ρ₀ > 0, got ({r0}, {rho0})"
        )));
    }
    Ok(EllipseOracle { r0, rho0 })
}

impl EllipseOracle {
    /// `a_n = e^{−2nρ₀}/2`.
    pub fn a(&self, n: u32) -> f64 {
        0.5 * (-2.0 * n as f64 * self.rho0).exp()
    }

    pub fn eigenvalue(&self, mode: EllipseMode, n: u32) -> f64 {
        mode.sign() * self.a(n)
    }

    /// `Ξ(ω) = R₀ (sinh²ρ₀ + sin²ω)^{1/2}`, also the parametrization speed.
    pub fn xi(&self, omega: f64) -> f64 {
        self.r0 * (self.rho0.sinh().powi(2) + omega.sin().powi(2)).sqrt()
    }

    pub fn eigenfunction(&self, mode: EllipseMode, n: u32, omega: f64) -> f64 {
        let nw = n as f64 * omega;
        let trig = match mode {
            EllipseMode::Cos => nw.cos(),
            EllipseMode::Sin => nw.sin(),
        };
        trig / self.xi(omega)
    }

    /// `S[φ](x)` at elliptic coordinates `(ρ, ω)`, for `n ≥ 1`.
    ///
    /// The cosine mode gives `−cosh(nρ_<) e^{−nρ_>}/n · cos nω` and the sine
    /// mode `−sinh(nρ_<) e^{−nρ_>}/n · sin nω`, with `ρ_< = min(ρ, ρ₀)` and
    /// `ρ_> = max(ρ, ρ₀)`.
    pub fn single_layer(&self, mode: EllipseMode, n: u32, rho: f64, omega: f64) -> f64 {
        let nf = n as f64;
        let (lo, hi) = (rho.min(self.rho0), rho.max(self.rho0));
        let nw = nf * omega;
        let (radial, angular) = match mode {
            EllipseMode::Cos => ((nf * lo).cosh(), nw.cos()),
            EllipseMode::Sin => ((nf * lo).sinh(), nw.sin()),
        };
        -radial * (-nf * hi).exp() / nf * angular
    }

    /// Elliptic coordinates `(ρ ≥ 0, ω ∈ [0, 2π))` of a Cartesian point.
    pub fn coordinates(&self, x: [f64; 2]) -> (f64, f64) {
        let w = (C64::new(x[0], x[1]) / self.r0).acosh();
        let w = if w.re < 0.0 { -w } else { w };
        (w.re, w.im.rem_euclid(std::f64::consts::TAU))
    }

    /// `max |φ_{1,n}| = 1/(R₀ sinh ρ₀)`, attained at the vertices.
    pub fn tau_max(&self) -> f64 {
        1.0 / (self.r0 * self.rho0.sinh())
    }

    /// `max |dφ_{2,n}| = n/(R₀² sinh²ρ₀)` for the conormal derivative `ψ_t/|x′(t)|`.
    pub fn tau_prime_max(&self, n: u32) -> f64 {
        n as f64 / (self.r0 * self.rho0.sinh()).powi(2)
    }

    /// `κ_max = cosh ρ₀/(R₀ sinh²ρ₀)`.
    pub fn kappa_max(&self) -> f64 {
        self.rho0.cosh() / (self.r0 * self.rho0.sinh().powi(2))
    }

    /// Eigenfunction sampled at mesh nodes (the mesh parameter is `ω`).
    pub fn sample(&self, mesh: &PanelMesh, mode: EllipseMode, n: u32) -> Vec<C64> {
        mesh.t
            .iter()
            .map(|&t| C64::new(self.eigenfunction(mode, n, t), 0.0))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OracleRow {
    pub n: u32,
    pub mode: EllipseMode,
    pub exact: f64,
    pub computed: f64,
    pub eigenvalue_error: f64,
    /// Sine of the angle between the computed and closed-form eigenfunctions.
    pub subspace_angle: f64,
    pub rank: usize,
}

/// Compares computed pairs with the closed-form ellipse eigensystem for
/// `n = 1..=n_max`, both signs.
pub fn match_oracle(
    pairs: &[EigenPair],
    mesh: &PanelMesh,
    oracle: &EllipseOracle,
    n_max: u32,
) -> Result<Vec<OracleRow>> {
    let mut rows = Vec::new();
    for n in 1..=n_max {
        for mode in [EllipseMode::Cos, EllipseMode::Sin] {
            let exact = oracle.eigenvalue(mode, n);
            let best = pairs
                .iter()
                .min_by(|a, b| (a.eigenvalue - exact).norm().total_cmp(&(b.eigenvalue - exact).norm()))
                .ok_or_else(|| Error::MissingEigenvalue(format!("no eigenvalues for n = {n}")))?;
            let members: Vec<&EigenPair> = pairs.iter().filter(|p| p.cluster == best.cluster).collect();
            if members.len() != 1 {
                return Err(Error::MultiplicityMismatch {
                    label: format!("{}a_{n}", if mode == EllipseMode::Cos { "+" } else { "−" }),
                    expected: 1,
                    found: members.len(),
                });
            }
            let f = oracle.sample(mesh, mode, n);
            let nf = weighted_norm(mesh, &f);
            let proj = weighted_inner(mesh, &f, &best.vector).norm() / (nf * best.norm);
            rows.push(OracleRow {
                n,
                mode,
                exact,
                computed: best.lambda(),
                eigenvalue_error: (best.eigenvalue - exact).norm(),
                subspace_angle: (1.0 - proj * proj).max(0.0).sqrt(),
                rank: best.rank,
            });
        }
    }
    Ok(rows)
}

/// Spectrum CSV: `rank,re,im,cluster,kappa_max`.
pub fn write_spectrum_csv(path: &Path, pairs: &[EigenPair], kappa_max: f64) -> Result<()> {
    write_csv(
        path,
        &["rank", "re", "im", "cluster", "kappa_max"],
        pairs.iter().map(|p| {
            vec![
                p.rank.to_string(),
                num(p.eigenvalue.re),
                num(p.eigenvalue.im),
                p.cluster.to_string(),
                num(kappa_max),
            ]
        }),
    )
}
