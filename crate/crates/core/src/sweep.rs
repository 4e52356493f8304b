//! Curvature sweeps: follow an eigenvalue across a family of domains with
//! growing `κ_max`, read the eigenfunction (or its conormal derivative) at
//! the high-curvature point and fit `ψ_max ≈ α κ_max^p`.

use std::fmt;
use std::path::Path;

use faer::Mat;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fieldeval::{conormal_derivative, upsample};
use crate::geometry::{make_bump_family, make_ellipse, Curve};
use crate::io::{flag, num, write_csv};
use crate::layerpot::assemble_np;
use crate::linalg::inverse_iteration;
use crate::quadrature::{build_mesh_with, MeshOptions, PanelMesh};
use crate::spectral::{eigendecompose, half_pair, weighted_inner, EigenPair, EllipseMode, EllipseOracle, CLUSTER_TOL};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    /// `|φ|`
    Modulus,
    /// `|dφ|`, the conormal derivative.
    Conormal,
}

impl fmt::Display for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Observable::Modulus => "modulus",
            Observable::Conormal => "conormal",
        })
    }
}

/// The `rank`-th eigenvalue cluster of one sign, counted by decreasing `|λ|`
/// and skipping `λ = 1/2`. Ranks start at 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Track {
    pub positive: bool,
    pub rank: usize,
    /// Defaults by sign and convexity when absent.
    #[serde(default)]
    pub observable: Option<Observable>,
}

impl Track {
    pub fn new(positive: bool, rank: usize) -> Track {
        Track {
            positive,
            rank,
            observable: None,
        }
    }

    pub fn label(&self) -> String {
        format!("{}{}", if self.positive { "+" } else { "-" }, self.rank)
    }

    /// Modulus for positive λ and conormal derivative for negative λ on
    /// convex families; the roles swap on concave ones.
    pub fn observable_for(&self, concave: bool) -> Observable {
        self.observable.unwrap_or(if self.positive != concave {
            Observable::Modulus
        } else {
            Observable::Conormal
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Family {
    /// Ellipses with fixed `R₀`, one member per `ρ₀` (in decreasing order).
    Ellipse { r0: f64, rho0: Vec<f64> },
    /// n-symmetric bump domains, one member per target `κ_max`.
    Bump {
        n_sym: u32,
        #[serde(default)]
        concave: bool,
        kappa: Vec<f64>,
    },
}

impl Family {
    pub fn concave(&self) -> bool {
        matches!(self, Family::Bump { concave: true, .. })
    }

    /// `(κ_max, curve)` for each member.
    pub fn members(&self) -> Result<Vec<(f64, Curve)>> {
        match self {
            Family::Ellipse { r0, rho0 } => rho0
                .iter()
                .map(|&r| {
                    let o = EllipseOracle { r0: *r0, rho0: r };
                    Ok((o.kappa_max(), make_ellipse(*r0, r)?))
                })
                .collect(),
            Family::Bump { n_sym, concave, kappa } => kappa
                .iter()
                .map(|&k| Ok((k, make_bump_family(*n_sym, k, *concave)?)))
                .collect(),
        }
    }

    fn oracle(&self, curve: &Curve) -> Option<EllipseOracle> {
        match self {
            Family::Ellipse { .. } => curve.ellipse_params().map(|(r0, rho0)| EllipseOracle { r0, rho0 }),
            Family::Bump { .. } => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepOptions {
    pub mesh: MeshOptions,
    pub cluster_tol: f64,
    /// Largest mesh used while testing convergence.
    pub max_nodes: usize,
    /// Relative change of `ψ_max` under panel doubling accepted as converged.
    pub convergence_tol: f64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        // Coarser curvature grading than the default mesh: the doubling
        // test checks the result anyway and the finest sweep mesh stays under the cap.
        SweepOptions {
            mesh: MeshOptions {
                kappa_length: 1.0,
                ..MeshOptions::graded(32)
            },
            cluster_tol: CLUSTER_TOL,
            max_nodes: 4096,
            convergence_tol: 0.01,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRecord {
    pub kappa_max: f64,
    pub track: String,
    pub lambda: f64,
    pub cluster_size: usize,
    pub observable: Observable,
    pub psi_max: f64,
    /// Node count of the mesh `psi_max` was read on.
    pub nodes: usize,
    pub converged: bool,
    /// Arc distance from the boundary argmax of the observable to the
    /// nearest marked point, in local panel lengths.
    pub argmax_offset: f64,
}

impl SweepRecord {
    pub fn localized(&self) -> bool {
        self.argmax_offset <= 2.0
    }
}

/// Same-sign clusters (excluding `λ = 1/2`) as lists of pair indices, by decreasing `|λ|`.
fn signed_clusters(pairs: &[EigenPair], positive: bool) -> Vec<Vec<usize>> {
    let half = half_pair(pairs).ok().map(|p| p.cluster);
    let mut out: Vec<Vec<usize>> = Vec::new();
    for (i, p) in pairs.iter().enumerate() {
        if Some(p.cluster) == half || p.lambda() == 0.0 || (p.lambda() > 0.0) != positive {
            continue;
        }
        match out.last_mut() {
            Some(last) if pairs[last[0]].cluster == p.cluster => last.push(i),
            _ => out.push(vec![i]),
        }
    }
    out
}

/// Relative gap below which neighbouring clusters make a rank-based track ambiguous.
const TRACK_GAP: f64 = 1e-3;

fn select(pairs: &[EigenPair], track: &Track) -> Result<Vec<usize>> {
    let clusters = signed_clusters(pairs, track.positive);
    let idx = track
        .rank
        .checked_sub(1)
        .filter(|&r| r < clusters.len())
        .ok_or_else(|| {
            Error::MissingEigenvalue(format!(
                "track {} needs {} clusters of that sign, found {}",
                track.label(),
                track.rank,
                clusters.len()
            ))
        })?;
    let lam = pairs[clusters[idx][0]].lambda();
    for nb in [idx.checked_sub(1), Some(idx + 1)].into_iter().flatten() {
        if let Some(c) = clusters.get(nb) {
            let other = pairs[c[0]].lambda();
            if (other - lam).abs() <= TRACK_GAP * lam.abs() {
                return Err(Error::Tracking(format!(
                    "track {}: candidates λ = {lam} and λ = {other} are too close to order",
                    track.label()
                )));
            }
        }
    }
    Ok(clusters[idx].clone())
}

/// Nodal values of the observable for each basis function.
fn profiles(mesh: &PanelMesh, basis: &[Vec<C64>], obs: Observable) -> Result<Vec<Vec<C64>>> {
    match obs {
        Observable::Modulus => Ok(basis.to_vec()),
        Observable::Conormal => basis.iter().map(|v| conormal_derivative(mesh, v)).collect(),
    }
}

/// `(Σ_m |p_m(t)|²)^{1/2}`: the largest `|p(t)|` over unit combinations of
/// an orthonormal basis, so it does not depend on the basis chosen.
fn envelope_at(mesh: &PanelMesh, profiles: &[Vec<C64>], t: f64) -> Result<f64> {
    let mut acc = 0.0;
    for p in profiles {
        acc += mesh.interpolate(p, t)?.norm_sqr();
    }
    Ok(acc.sqrt())
}

fn envelope_nodes(profiles: &[Vec<C64>], n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| profiles.iter().map(|p| p[i].norm_sqr()).sum::<f64>().sqrt())
        .collect()
}

/// Largest envelope value near the marked points: best node within one
/// panel of the node nearest each mark, refined by golden-section search on
/// the panel interpolant between its neighbours.
fn peak_near_marks(mesh: &PanelMesh, profiles: &[Vec<C64>], marks: &[f64]) -> Result<f64> {
    let env = envelope_nodes(profiles, mesh.len());
    let np = mesh.panel_count();
    let mut best: f64 = 0.0;
    for &t in marks {
        let p = mesh.panel_of(mesh.nearest_node(t));
        let mut top = (f64::NEG_INFINITY, 0);
        for q in [(p + np - 1) % np, p, (p + 1) % np] {
            for i in mesh.panel_nodes(q) {
                if env[i] > top.0 {
                    top = (env[i], i);
                }
            }
        }
        let n = mesh.len();
        let i = top.1;
        let mut lo = mesh.t[(i + n - 1) % n];
        let mut hi = mesh.t[(i + 1) % n];
        if lo > mesh.t[i] {
            lo -= std::f64::consts::TAU;
        }
        if hi < mesh.t[i] {
            hi += std::f64::consts::TAU;
        }
        best = best
            .max(top.0)
            .max(golden_max(|t| envelope_at(mesh, profiles, t), lo, hi)?);
    }
    Ok(best)
}

fn golden_max(f: impl Fn(f64) -> Result<f64>, mut a: f64, mut b: f64) -> Result<f64> {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    for _ in 0..60 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d)?;
        }
        if (b - a).abs() < 1e-14 {
            break;
        }
    }
    Ok(fc.max(fd))
}

/// Arc distance from the global argmax of the envelope to the nearest mark,
/// in units of the local panel length at that mark.
fn argmax_offset(mesh: &PanelMesh, profiles: &[Vec<C64>], marks: &[f64]) -> Result<f64> {
    let env = envelope_nodes(profiles, mesh.len());
    let (imax, _) = env.iter().enumerate().fold(
        (0, f64::NEG_INFINITY),
        |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc },
    );
    let perimeter = mesh.perimeter();
    let mut best = f64::INFINITY;
    for &t in marks {
        let arc_mark = mesh.interpolate(&mesh.arc, t)?;
        let d = (mesh.arc[imax] - arc_mark).rem_euclid(perimeter);
        let d = d.min(perimeter - d);
        let len = mesh.local_panel_length(mesh.nearest_node(t));
        best = best.min(d / len);
    }
    Ok(best)
}

/// Scales a single eigenfunction to its best fit of the closed-form ellipse
/// eigenfunction, so values compare with `1/(R₀ sinh ρ₀)` directly.
fn oracle_scaled(mesh: &PanelMesh, v: &[C64], oracle: &EllipseOracle, track: &Track) -> Vec<C64> {
    let mode = if track.positive {
        EllipseMode::Cos
    } else {
        EllipseMode::Sin
    };
    let f = oracle.sample(mesh, mode, track.rank as u32);
    let c = weighted_inner(mesh, v, &f) / weighted_inner(mesh, v, v);
    v.iter().map(|x| x * c).collect()
}

struct Reading {
    psi: f64,
    offset: f64,
}

fn read_track(
    mesh: &PanelMesh,
    basis: &[Vec<C64>],
    obs: Observable,
    marks: &[f64],
    oracle: Option<&EllipseOracle>,
    track: &Track,
) -> Result<Reading> {
    let basis: Vec<Vec<C64>> = match oracle {
        Some(o) if basis.len() == 1 => vec![oracle_scaled(mesh, &basis[0], o, track)],
        _ => basis.to_vec(),
    };
    let prof = profiles(mesh, &basis, obs)?;
    Ok(Reading {
        psi: peak_near_marks(mesh, &prof, marks)?,
        offset: argmax_offset(mesh, &prof, marks)?,
    })
}

struct TrackState {
    track: Track,
    obs: Observable,
    lambdas: Vec<f64>,
    basis: Vec<Vec<C64>>,
    reading: Reading,
    nodes: usize,
    converged: bool,
}

/// Runs every track over every family member.
pub fn run_sweep(family: &Family, tracks: &[Track], opts: &SweepOptions) -> Result<Vec<SweepRecord>> {
    let members = family.members()?;
    if members.len() < 3 {
        return Err(Error::Precondition(format!(
            "a sweep needs at least 3 members, got {}",
            members.len()
        )));
    }
    if members.windows(2).any(|w| !(w[1].0 > w[0].0)) {
        return Err(Error::Precondition(
            "κ_max must increase strictly along the family".into(),
        ));
    }
    if tracks.iter().any(|t| t.rank == 0) {
        return Err(Error::InvalidParameter("track ranks start at 1".into()));
    }
    let concave = family.concave();
    let mut records = Vec::new();
    for (kappa, curve) in &members {
        log::info!("sweep member κ_max = {kappa}");
        let marks: Vec<f64> = curve.marks().iter().map(|m| m.t).collect();
        if marks.is_empty() {
            return Err(Error::Precondition("family member has no marked point".into()));
        }
        let oracle = family.oracle(curve);
        let mesh = build_mesh_with(curve, &opts.mesh)?;
        let pairs = eigendecompose(&mesh, &assemble_np(&mesh), opts.cluster_tol)?;
        let mut states = Vec::new();
        for track in tracks {
            let idx = select(&pairs, track)?;
            let basis: Vec<Vec<C64>> = idx.iter().map(|&i| pairs[i].vector.clone()).collect();
            let obs = track.observable_for(concave);
            let reading = read_track(&mesh, &basis, obs, &marks, oracle.as_ref(), track)?;
            states.push(TrackState {
                track: *track,
                obs,
                lambdas: idx.iter().map(|&i| pairs[i].lambda()).collect(),
                basis,
                reading,
                nodes: mesh.len(),
                converged: false,
            });
        }
        // Panel doubling until every track settles or the node cap is reached.
        let mut coarse = mesh;
        loop {
            if states.iter().all(|s| s.converged) {
                break;
            }
            let fine = coarse.refined()?;
            if fine.len() > opts.max_nodes {
                break;
            }
            let a = assemble_np(&fine);
            let a = a.real().expect("static operator is real");
            let sw: Vec<f64> = fine.weights.iter().map(|w| w.sqrt()).collect();
            let n = fine.len();
            let b = Mat::from_fn(n, n, |i, j| a[(i, j)] * sw[i] / sw[j]);
            for s in states.iter_mut().filter(|s| !s.converged) {
                let shift = s.lambdas.iter().sum::<f64>() / s.lambdas.len() as f64;
                let start = s
                    .basis
                    .iter()
                    .map(|v| {
                        let (_, up) = upsample(&coarse, v, 1)?;
                        Ok(up.iter().zip(&sw).map(|(x, w)| x.re * w).collect())
                    })
                    .collect::<Result<Vec<Vec<f64>>>>()?;
                let (vals, vecs) = inverse_iteration(b.as_ref(), shift, start, 3)?;
                let basis: Vec<Vec<C64>> = vecs
                    .iter()
                    .map(|v| v.iter().zip(&sw).map(|(x, w)| C64::new(x / w, 0.0)).collect())
                    .collect();
                let reading = read_track(&fine, &basis, s.obs, &marks, oracle.as_ref(), &s.track)?;
                let change = (reading.psi - s.reading.psi).abs() / reading.psi;
                log::debug!(
                    "κ = {kappa}, track {}: ψ {} → {} on {} nodes",
                    s.track.label(),
                    s.reading.psi,
                    reading.psi,
                    n
                );
                s.converged = change < opts.convergence_tol;
                s.lambdas = vals;
                s.basis = basis;
                s.reading = reading;
                s.nodes = n;
            }
            coarse = fine;
        }
        for s in states {
            if !s.converged {
                log::warn!(
                    "κ = {kappa}, track {}: ψ_max not converged on {} nodes",
                    s.track.label(),
                    s.nodes
                );
            }
            records.push(SweepRecord {
                kappa_max: *kappa,
                track: s.track.label(),
                lambda: s.lambdas.iter().sum::<f64>() / s.lambdas.len() as f64,
                cluster_size: s.basis.len(),
                observable: s.obs,
                psi_max: s.reading.psi,
                nodes: s.nodes,
                converged: s.converged,
                argmax_offset: s.reading.offset,
            });
        }
    }
    Ok(records)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegressionFit {
    pub p: f64,
    pub ln_alpha: f64,
    /// `max |ln ψ − (ln α + p ln κ)|`.
    pub residual: f64,
    pub points: usize,
}

impl RegressionFit {
    pub fn predict(&self, kappa: f64) -> f64 {
        (self.ln_alpha + self.p * kappa.ln()).exp()
    }
}

/// Least-squares line through `(ln κ, ln ψ)`.
pub fn fit_power_law(points: &[(f64, f64)]) -> Result<RegressionFit> {
    if points.len() < 3 {
        return Err(Error::Precondition(format!(
            "power-law fit needs at least 3 points, got {}",
            points.len()
        )));
    }
    if let Some(&(k, v)) = points.iter().find(|(k, v)| !(*k > 0.0 && *v > 0.0)) {
        return Err(Error::Domain(format!(
            "non-positive data (κ = {k}, ψ = {v}) in a log fit"
        )));
    }
    let xs: Vec<f64> = points.iter().map(|(k, _)| k.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|(_, v)| v.ln()).collect();
    let m = points.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / m, ys.iter().sum::<f64>() / m);
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Precondition("all κ values coincide".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let p = sxy / sxx;
    let ln_alpha = my - p * mx;
    let residual = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - ln_alpha - p * x).abs())
        .fold(0.0, f64::max);
    Ok(RegressionFit {
        p,
        ln_alpha,
        residual,
        points: points.len(),
    })
}

/// Fit for the records of one track.
pub fn fit_track(records: &[SweepRecord], track: &str) -> Result<RegressionFit> {
    let pts: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.track == track)
        .map(|r| (r.kappa_max, r.psi_max))
        .collect();
    fit_power_law(&pts)
}

/// Plain-text table with columns label, p, ln α, residual.
pub fn table_report(fits: &[(String, RegressionFit)]) -> String {
    if fits.is_empty() {
        return String::new();
    }
    let mut out = format!("{:<10} {:>10} {:>10} {:>12}\n", "eigen", "p", "ln_alpha", "residual");
    for (label, f) in fits {
        out.push_str(&format!(
            "{:<10} {:>10.4} {:>10.4} {:>12.3e}\n",
            label, f.p, f.ln_alpha, f.residual
        ));
    }
    out
}

pub fn write_fit_csv(path: &Path, fits: &[(String, RegressionFit)]) -> Result<()> {
    write_csv(
        path,
        &["eigen", "p", "ln_alpha", "residual", "points"],
        fits.iter().map(|(l, f)| {
            vec![
                l.clone(),
                num(f.p),
                num(f.ln_alpha),
                num(f.residual),
                f.points.to_string(),
            ]
        }),
    )
}

pub fn write_sweep_csv(path: &Path, records: &[SweepRecord]) -> Result<()> {
    write_csv(
        path,
        &[
            "kappa_max",
            "track",
            "lambda",
            "observable",
            "psi_max",
            "converged",
            "nodes",
            "cluster_size",
            "argmax_offset",
        ],
        records.iter().map(|r| {
            vec![
                num(r.kappa_max),
                r.track.clone(),
                num(r.lambda),
                r.observable.to_string(),
                num(r.psi_max),
                flag(r.converged).to_string(),
                r.nodes.to_string(),
                r.cluster_size.to_string(),
                num(r.argmax_offset),
            ]
        }),
    )
}
