//! Helmholtz transmission problem for a plasmonic inclusion.
//!
//! The field is `u = S^{k_c}[ψ]` inside and `u = uⁱ + S^k[φ]` outside, with
//! `k_c = k/√(ε_c + iδ)`. The densities solve
//!
//! ```text
//! S^{k_c} ψ − S^k φ                       = uⁱ
//! ε (−½ + K^{k_c,*}) ψ − (½ + K^{k,*}) φ  = ∂_ν uⁱ
//! ```
//!
//! which encodes continuity of `u` and of `ε ∂_ν u` across the boundary.

use std::f64::consts::{PI, TAU};

use faer::Mat;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fieldeval::{classify_grid, eval_point, fill_grid, upsample, CellMask, FieldGrid, Window};
use crate::geometry::{make_bump_family, make_cusp_star, Curve};
use crate::layerpot::{assemble_np, assemble_np_k, assemble_sl_k, DenseOperator};
use crate::linalg::{inverse_iteration, matvec, Lu};
use crate::quadrature::{build_mesh_with, MeshOptions, PanelMesh};

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Largest `|k|·(panel length)`: 16 nodes per panel then give about 50
/// nodes per wavelength, and near-panel interactions stay inside the
/// Hankel series range.
pub const WAVE_PANEL: f64 = 2.0;

/// Node cap for the densities used when rendering grids.
pub const RENDER_NODES: usize = 16384;

/// Condition estimate above which a solve is reported as near-singular.
pub const NEAR_SINGULAR: f64 = 1e12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScatterConfig {
    /// Real part of the inclusion permittivity, typically negative.
    pub eps_c: f64,
    /// Loss, `δ > 0`.
    pub delta: f64,
    /// Exterior wavenumber.
    pub k: f64,
    /// Unit propagation direction of the incident plane wave.
    pub direction: [f64; 2],
}

impl ScatterConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0) || !self.delta.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "loss δ = {} must be positive",
                self.delta
            )));
        }
        if !(self.k > 0.0) || !self.k.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "wavenumber k = {} must be positive",
                self.k
            )));
        }
        if !self.eps_c.is_finite() {
            return Err(Error::InvalidParameter("ε_c must be finite".into()));
        }
        let n = self.direction[0].hypot(self.direction[1]);
        if (n - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "incident direction has length {n}, not 1"
            )));
        }
        Ok(())
    }

    /// `ε_c + iδ`.
    pub fn permittivity(&self) -> C64 {
        C64::new(self.eps_c, self.delta)
    }

    pub fn interior_wavenumber(&self) -> C64 {
        interior_wavenumber(self.k, self.permittivity())
    }

    pub fn incident(&self, p: [f64; 2]) -> C64 {
        (I * self.k * (self.direction[0] * p[0] + self.direction[1] * p[1])).exp()
    }

    pub fn incident_normal_derivative(&self, p: [f64; 2], nu: [f64; 2]) -> C64 {
        let dn = self.direction[0] * nu[0] + self.direction[1] * nu[1];
        I * self.k * dn * self.incident(p)
    }

    /// Wavenumber `sk` of the problem rescaled to a domain `s` times smaller.
    pub fn rescaled(&self, s: f64) -> ScatterConfig {
        ScatterConfig { k: self.k * s, ..*self }
    }
}

/// `k/√ε` on the branch with `Im ≥ 0`.
pub fn interior_wavenumber(k: f64, eps: C64) -> C64 {
    let kc = k / eps.sqrt();
    if kc.im < 0.0 {
        -kc
    } else {
        kc
    }
}

/// Mesh for a scattering solve: the graded mesh of `base` with panels no
/// longer than `WAVE_PANEL / max(|k|, |k_c|)`.
pub fn scatter_mesh(curve: &Curve, cfg: &ScatterConfig, base: &MeshOptions) -> Result<PanelMesh> {
    cfg.validate()?;
    let kmax = cfg.k.max(cfg.interior_wavenumber().norm());
    let limit = WAVE_PANEL / kmax;
    let opts = MeshOptions {
        max_panel_length: Some(base.max_panel_length.map_or(limit, |l| l.min(limit))),
        ..base.clone()
    };
    build_mesh_with(curve, &opts)
}

/// Rejects meshes whose panels are too long for either wavelength.
pub fn check_resolution(mesh: &PanelMesh, cfg: &ScatterConfig) -> Result<()> {
    let kmax = cfg.k.max(cfg.interior_wavenumber().norm());
    let longest = mesh.panel_lengths().iter().cloned().fold(0.0, f64::max);
    if longest * kmax > WAVE_PANEL * (1.0 + 1e-9) {
        return Err(Error::Resolution(format!(
            "panel length {longest:.3e} with |k| = {kmax:.3} exceeds |k|·L ≤ {WAVE_PANEL}"
        )));
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct ScatterSolution {
    pub config: ScatterConfig,
    pub k_c: C64,
    /// Interior density.
    pub psi: Vec<C64>,
    /// Exterior density.
    pub phi: Vec<C64>,
    /// Total field on the boundary nodes (exterior trace).
    pub boundary: Vec<C64>,
    /// `‖A‖₁‖A⁻¹‖₁` estimate for the block system.
    pub condition: f64,
    pub near_singular: bool,
}

struct Operators {
    s_c: Mat<C64>,
    s_e: Mat<C64>,
    k_c: Mat<C64>,
    k_e: Mat<C64>,
}

fn operators(mesh: &PanelMesh, k: f64, k_c: C64) -> Result<Operators> {
    let mat = |op: DenseOperator| op.to_complex();
    let ke = C64::new(k, 0.0);
    Ok(Operators {
        s_c: mat(assemble_sl_k(mesh, k_c)?),
        s_e: mat(assemble_sl_k(mesh, ke)?),
        k_c: mat(assemble_np_k(mesh, k_c)?),
        k_e: mat(assemble_np_k(mesh, ke)?),
    })
}

/// Solves the transmission problem on `mesh`.
pub fn solve_transmission(mesh: &PanelMesh, cfg: &ScatterConfig) -> Result<ScatterSolution> {
    cfg.validate()?;
    check_resolution(mesh, cfg)?;
    let n = mesh.len();
    let eps = cfg.permittivity();
    let k_c = cfg.interior_wavenumber();
    let ops = operators(mesh, cfg.k, k_c)?;
    let half = C64::new(0.5, 0.0);
    let a = Mat::from_fn(2 * n, 2 * n, |i, j| match (i < n, j < n) {
        (true, true) => ops.s_c[(i, j)],
        (true, false) => -ops.s_e[(i, j - n)],
        (false, true) => {
            let d = if i - n == j { half } else { C64::new(0.0, 0.0) };
            eps * (ops.k_c[(i - n, j)] - d)
        }
        (false, false) => {
            let d = if i == j { half } else { C64::new(0.0, 0.0) };
            -(ops.k_e[(i - n, j - n)] + d)
        }
    });
    let mut rhs = Vec::with_capacity(2 * n);
    rhs.extend(mesh.x.iter().map(|&x| cfg.incident(x)));
    rhs.extend(
        mesh.x
            .iter()
            .zip(&mesh.normal)
            .map(|(&x, &nu)| cfg.incident_normal_derivative(x, nu)),
    );
    let lu = Lu::new(a.as_ref())?;
    let sol = lu.solve(&rhs)?;
    if sol.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::Singular {
            condition: f64::INFINITY,
        });
    }
    let condition = lu.condition_estimate();
    let near_singular = condition > NEAR_SINGULAR;
    if near_singular {
        log::warn!("transmission system is near-singular (condition estimate {condition:.3e})");
    }
    let (psi, phi) = (sol[..n].to_vec(), sol[n..].to_vec());
    let sphi = matvec(ops.s_e.as_ref(), &phi);
    let boundary = mesh.x.iter().zip(&sphi).map(|(&x, s)| cfg.incident(x) + s).collect();
    Ok(ScatterSolution {
        config: *cfg,
        k_c,
        psi,
        phi,
        boundary,
        condition,
        near_singular,
    })
}

impl ScatterSolution {
    /// Total field at an off-boundary point, given which side it lies on.
    pub fn field_at(&self, mesh: &PanelMesh, p: [f64; 2], inside: bool) -> C64 {
        if inside {
            eval_point(mesh, &self.psi, p, self.k_c)
        } else {
            self.config.incident(p) + eval_point(mesh, &self.phi, p, C64::new(self.config.k, 0.0))
        }
    }

    /// Total field on a grid; cells in the boundary band stay excluded.
    /// The densities are first carried to bisected panels until the longest
    /// panel is at most two grid cells, which keeps that band thin.
    pub fn render(&self, mesh: &PanelMesh, window: Window, nx: usize, ny: usize) -> Result<FieldGrid> {
        let (hx, hy) = (
            (window.x_max - window.x_min) / (nx.max(2) - 1) as f64,
            (window.y_max - window.y_min) / (ny.max(2) - 1) as f64,
        );
        let target = 2.0 * hx.max(hy);
        let mut levels = 0;
        let mut longest = mesh.panel_lengths().iter().cloned().fold(0.0, f64::max);
        while longest > target && (mesh.len() << (levels + 1)) <= RENDER_NODES {
            longest /= 2.0;
            levels += 1;
        }
        let (fine, psi) = upsample(mesh, &self.psi, levels)?;
        let (_, phi) = upsample(mesh, &self.phi, levels)?;
        let fine_sol = ScatterSolution {
            psi,
            phi,
            boundary: Vec::new(),
            ..self.clone()
        };
        let mut grid = classify_grid(&fine, window, nx, ny)?;
        fill_grid(&mut grid, |p, mask| {
            fine_sol.field_at(&fine, p, mask == CellMask::Interior)
        });
        grid.label = format!(
            "total field, eps_c = {}, delta = {}, k = {}",
            self.config.eps_c, self.config.delta, self.config.k
        );
        Ok(grid)
    }

    /// `max |u|` over the boundary nodes divided by `|uⁱ| = 1`.
    pub fn boundary_enhancement(&self) -> f64 {
        self.boundary.iter().map(|u| u.norm()).fold(0.0, f64::max)
    }

    /// Relative mismatch of both transmission conditions at the nodes of
    /// the bisected mesh, where the densities are carried by their panel
    /// interpolants. Returns `(field, flux)`.
    pub fn transmission_residual(&self, mesh: &PanelMesh) -> Result<(f64, f64)> {
        let (fine, psi) = upsample(mesh, &self.psi, 1)?;
        let (_, phi) = upsample(mesh, &self.phi, 1)?;
        let ops = operators(&fine, self.config.k, self.k_c)?;
        let eps = self.config.permittivity();
        let s_c = matvec(ops.s_c.as_ref(), &psi);
        let s_e = matvec(ops.s_e.as_ref(), &phi);
        let k_c = matvec(ops.k_c.as_ref(), &psi);
        let k_e = matvec(ops.k_e.as_ref(), &phi);
        let (mut r1, mut r2, mut u1, mut u2) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
        for i in 0..fine.len() {
            let inner = s_c[i];
            let outer = self.config.incident(fine.x[i]) + s_e[i];
            let flux_in = eps * (k_c[i] - 0.5 * psi[i]);
            let flux_out = self.config.incident_normal_derivative(fine.x[i], fine.normal[i]) + k_e[i] + 0.5 * phi[i];
            r1 = r1.max((inner - outer).norm());
            r2 = r2.max((flux_in - flux_out).norm());
            u1 = u1.max(outer.norm());
            u2 = u2.max(flux_out.norm());
        }
        Ok((r1 / u1, r2 / u2))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyReport {
    /// `(δ/2) Σ |∇u|² · cell area` over interior cells.
    pub energy: f64,
    /// Counted cell area over the area of the inclusion.
    pub coverage: f64,
}

impl EnergyReport {
    pub fn reliable(&self) -> bool {
        self.coverage >= 0.8
    }
}

/// Enclosed area, `½ ∮ x·ν ds`.
pub fn enclosed_area(mesh: &PanelMesh) -> f64 {
    mesh.x
        .iter()
        .zip(&mesh.normal)
        .zip(&mesh.weights)
        .map(|((x, nu), w)| 0.5 * (x[0] * nu[0] + x[1] * nu[1]) * w)
        .sum()
}

/// Energy proxy from interior field values on a grid. Gradients are centred
/// differences, so only interior cells with four interior neighbours count.
pub fn energy_from_grid(grid: &FieldGrid, delta: f64, area: f64) -> Result<EnergyReport> {
    if grid.nx < 3 || grid.ny < 3 {
        return Err(Error::InsufficientGrid(format!(
            "{}×{} grid has no centred cells",
            grid.nx, grid.ny
        )));
    }
    let (hx, hy) = grid.spacing();
    let interior = |ix: usize, iy: usize| grid.mask[grid.index(ix, iy)] == CellMask::Interior;
    let mut sum = 0.0;
    let mut cells = 0usize;
    for iy in 1..grid.ny - 1 {
        for ix in 1..grid.nx - 1 {
            if !(interior(ix, iy)
                && interior(ix - 1, iy)
                && interior(ix + 1, iy)
                && interior(ix, iy - 1)
                && interior(ix, iy + 1))
            {
                continue;
            }
            let v = |a: usize, b: usize| grid.values[grid.index(a, b)];
            let gx = (v(ix + 1, iy) - v(ix - 1, iy)) / (2.0 * hx);
            let gy = (v(ix, iy + 1) - v(ix, iy - 1)) / (2.0 * hy);
            sum += gx.norm_sqr() + gy.norm_sqr();
            cells += 1;
        }
    }
    let cell = hx * hy;
    let report = EnergyReport {
        energy: 0.5 * delta * sum * cell,
        coverage: cells as f64 * cell / area,
    };
    if !report.reliable() {
        log::warn!(
            "energy proxy covers only {:.1}% of the inclusion",
            100.0 * report.coverage
        );
    }
    Ok(report)
}

/// Energy proxy `E_δ = (δ/2) ∫_D |∇u|²` on an `nx × ny` grid over the
/// bounding box of the inclusion.
pub fn energy_proxy(sol: &ScatterSolution, mesh: &PanelMesh, nx: usize, ny: usize) -> Result<EnergyReport> {
    let grid = sol.render(mesh, Window::around(mesh, 0.0), nx, ny)?;
    energy_from_grid(&grid, sol.config.delta, enclosed_area(mesh))
}

/// Relative disagreement between solving on `sΩ` with wavenumber `k` and on
/// `Ω` with `sk`: boundary fields compared directly, densities after the
/// factor `s` from the arc-length change.
pub fn scaling_discrepancy(curve: &Curve, cfg: &ScatterConfig, s: f64, base: &MeshOptions) -> Result<f64> {
    let big = curve.scaled(s)?;
    let small_cfg = cfg.rescaled(s);
    // Same parameter panels on both curves, fine enough for both problems.
    let m1 = scatter_mesh(&big, cfg, base)?;
    let m0 = scatter_mesh(curve, &small_cfg, base)?;
    let (m_big, m_small) = if m1.panel_count() >= m0.panel_count() {
        let p = m1.panels().to_vec();
        (m1, PanelMesh::from_panels(curve, p)?)
    } else {
        let p = m0.panels().to_vec();
        (PanelMesh::from_panels(&big, p)?, m0)
    };
    let a = solve_transmission(&m_big, cfg)?;
    let b = solve_transmission(&m_small, &small_cfg)?;
    let rel = |x: &[C64], y: &[C64], f: f64| {
        let num = x.iter().zip(y).map(|(p, q)| (p * f - q).norm()).fold(0.0, f64::max);
        let den = y.iter().map(|q| q.norm()).fold(0.0, f64::max);
        num / den
    };
    Ok(rel(&a.boundary, &b.boundary, 1.0)
        .max(rel(&a.phi, &b.phi, s))
        .max(rel(&a.psi, &b.psi, s)))
}

#[derive(Clone, Debug, PartialEq)]
pub struct LocalizationRow {
    pub kappa_max: f64,
    /// Largest `|u|` inside the zoom window (boundary nodes and grid cells).
    pub zoom_max: f64,
    /// Largest `|u|` outside it.
    pub elsewhere_max: f64,
    pub ratio: f64,
    /// Arc distance from the boundary argmax of `|u|` to the marked point,
    /// in local panel lengths.
    pub peak_offset: f64,
    pub nodes: usize,
    pub condition: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LocalizationOptions {
    pub mesh: MeshOptions,
    /// Half-width of the zoom window around the marked point.
    pub zoom_half: f64,
    /// Grid resolution of both windows.
    pub grid: usize,
}

impl Default for LocalizationOptions {
    fn default() -> Self {
        LocalizationOptions {
            mesh: MeshOptions::graded(32),
            zoom_half: 0.2,
            grid: 81,
        }
    }
}

pub struct LocalizationCase {
    pub row: LocalizationRow,
    pub global: FieldGrid,
    pub zoom: FieldGrid,
}

fn arc_offset(mesh: &PanelMesh, node: usize, t: f64) -> Result<f64> {
    let p = mesh.perimeter();
    let arc = mesh.interpolate(&mesh.arc, t)?;
    let d = (mesh.arc[node] - arc).rem_euclid(p);
    Ok(d.min(p - d) / mesh.local_panel_length(mesh.nearest_node(t)))
}

/// Size of the localization domains: a disc of radius 2 with one bump pulled out.
pub const LOCALIZATION_SCALE: f64 = 2.0;

/// One-bump convex domains scaled by `scale`, with the bump calibrated so
/// that the scaled curve has the listed `κ_max`.
pub fn localization_members(kappas: &[f64], scale: f64) -> Result<Vec<(f64, Curve)>> {
    if !(scale > 0.0) {
        return Err(Error::InvalidParameter(format!("scale must be positive, got {scale}")));
    }
    kappas
        .iter()
        .map(|&k| Ok((k, make_bump_family(1, k * scale, false)?.scaled(scale)?)))
        .collect()
}

/// Solves each `(κ_max, curve)` member and compares the field near its
/// first marked point with the field elsewhere.
pub fn localization_experiment(
    members: &[(f64, Curve)],
    cfg: &ScatterConfig,
    opts: &LocalizationOptions,
) -> Result<Vec<LocalizationCase>> {
    if members.windows(2).any(|w| !(w[1].0 > w[0].0)) {
        return Err(Error::Precondition("κ_max must increase along the family".into()));
    }
    let mut out = Vec::new();
    for (kappa, curve) in members {
        let mark = curve
            .marks()
            .first()
            .ok_or_else(|| Error::Precondition("family member has no marked point".into()))?
            .t;
        let mesh = scatter_mesh(curve, cfg, &opts.mesh)?;
        log::info!("localization member κ_max = {kappa}: {} nodes", mesh.len());
        let sol = solve_transmission(&mesh, cfg)?;
        let centre = curve.position(mark);
        let zoom_window = Window::centered(centre, opts.zoom_half);
        let in_zoom =
            |p: [f64; 2]| (p[0] - centre[0]).abs() <= opts.zoom_half && (p[1] - centre[1]).abs() <= opts.zoom_half;
        let global = sol.render(&mesh, Window::around(&mesh, 0.25), opts.grid, opts.grid)?;
        let zoom = sol.render(&mesh, zoom_window, opts.grid, opts.grid)?;
        let (mut zoom_max, mut elsewhere_max) = (0.0f64, 0.0f64);
        for (x, u) in mesh.x.iter().zip(&sol.boundary) {
            if in_zoom(*x) {
                zoom_max = zoom_max.max(u.norm());
            } else {
                elsewhere_max = elsewhere_max.max(u.norm());
            }
        }
        for iy in 0..zoom.ny {
            for ix in 0..zoom.nx {
                let i = zoom.index(ix, iy);
                if zoom.mask[i] != CellMask::Excluded {
                    zoom_max = zoom_max.max(zoom.values[i].norm());
                }
            }
        }
        for iy in 0..global.ny {
            for ix in 0..global.nx {
                let i = global.index(ix, iy);
                if global.mask[i] != CellMask::Excluded && !in_zoom(global.point(ix, iy)) {
                    elsewhere_max = elsewhere_max.max(global.values[i].norm());
                }
            }
        }
        let peak = (0..mesh.len())
            .max_by(|&a, &b| sol.boundary[a].norm().total_cmp(&sol.boundary[b].norm()))
            .unwrap_or(0);
        out.push(LocalizationCase {
            row: LocalizationRow {
                kappa_max: *kappa,
                zoom_max,
                elsewhere_max,
                ratio: zoom_max / elsewhere_max,
                peak_offset: arc_offset(&mesh, peak, mark)?,
                nodes: mesh.len(),
                condition: sol.condition,
            },
            global,
            zoom,
        });
    }
    Ok(out)
}

/// Parameters of the twelve-cusp star demonstration.
pub const STAR_EPS_C: f64 = -2.48907;
pub const STAR_DELTA: f64 = 1e-5;
pub const STAR_K: f64 = 0.01;
/// NP eigenvalue the permittivity was chosen for.
pub const STAR_LAMBDA: f64 = 0.21339;

#[derive(Clone, Debug, PartialEq)]
pub struct CuspPeak {
    pub cusp: usize,
    /// Parameter of the cusp tip.
    pub t_cusp: f64,
    /// Parameter of the largest `|u|` within the cusp's sector.
    pub t_peak: f64,
    pub value: f64,
    /// Arc distance between the two, in local panel lengths.
    pub offset: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StarReport {
    pub wavelength: f64,
    /// Distance between adjacent cusp tips.
    pub cusp_distance: f64,
    pub subwavelength_ratio: f64,
    pub eps_c: f64,
    pub delta: f64,
    pub k: f64,
    /// NP eigenvalue of the discretized star closest to `STAR_LAMBDA`.
    pub np_eigenvalue: f64,
    pub peaks: Vec<CuspPeak>,
    /// Median over the peaks of `|u|` at the peak divided by `|u|` midway
    /// between cusps.
    pub contrast: f64,
    pub nodes: usize,
    pub condition: f64,
}

pub struct StarDemo {
    pub report: StarReport,
    pub mesh: PanelMesh,
    pub solution: ScatterSolution,
}

/// Mesh options used for the star: graded to `κL ≤ 2`, which resolves the
/// cusps with 3456 nodes.
pub fn star_mesh_options() -> MeshOptions {
    MeshOptions {
        kappa_length: 2.0,
        ..MeshOptions::graded(48)
    }
}

/// The twelve-cusp star under a long-wavelength plane wave.
pub fn star_demo(opts: &MeshOptions) -> Result<StarDemo> {
    let curve = make_cusp_star()?;
    let cfg = ScatterConfig {
        eps_c: STAR_EPS_C,
        delta: STAR_DELTA,
        k: STAR_K,
        direction: [-1.0, 0.0],
    };
    let mesh = scatter_mesh(&curve, &cfg, opts)?;
    log::info!("star demo: {} nodes", mesh.len());
    let sol = solve_transmission(&mesh, &cfg)?;
    let np_eigenvalue = nearest_np_eigenvalue(&mesh, STAR_LAMBDA)?;
    let marks: Vec<f64> = curve.marks().iter().map(|m| m.t).collect();
    let sector = PI / marks.len() as f64;
    let mut peaks = Vec::new();
    let mut contrasts = Vec::new();
    for (j, &tc) in marks.iter().enumerate() {
        let mut best = (f64::NEG_INFINITY, 0);
        for i in 0..mesh.len() {
            let d = (mesh.t[i] - tc + PI).rem_euclid(TAU) - PI;
            if d.abs() < sector && sol.boundary[i].norm() > best.0 {
                best = (sol.boundary[i].norm(), i);
            }
        }
        let valley = mesh.interpolate(&sol.boundary, tc + sector)?.norm();
        contrasts.push(best.0 / valley);
        peaks.push(CuspPeak {
            cusp: j,
            t_cusp: tc,
            t_peak: mesh.t[best.1],
            value: best.0,
            offset: arc_offset(&mesh, best.1, tc)?,
        });
    }
    contrasts.sort_by(f64::total_cmp);
    let tips: Vec<[f64; 2]> = marks.iter().map(|&t| curve.position(t)).collect();
    let cusp_distance = (tips[0][0] - tips[1][0]).hypot(tips[0][1] - tips[1][1]);
    let wavelength = TAU / cfg.k;
    Ok(StarDemo {
        report: StarReport {
            wavelength,
            cusp_distance,
            subwavelength_ratio: cusp_distance / wavelength,
            eps_c: cfg.eps_c,
            delta: cfg.delta,
            k: cfg.k,
            np_eigenvalue,
            peaks,
            contrast: contrasts[contrasts.len() / 2],
            nodes: mesh.len(),
            condition: sol.condition,
        },
        mesh,
        solution: sol,
    })
}

/// Static NP eigenvalue of the discretization closest to `target`, by
/// shifted inverse iteration in the symmetrized coordinates.
pub fn nearest_np_eigenvalue(mesh: &PanelMesh, target: f64) -> Result<f64> {
    let a = assemble_np(mesh);
    let a = a.real().expect("static operator is real");
    let sw: Vec<f64> = mesh.weights.iter().map(|w| w.sqrt()).collect();
    let n = mesh.len();
    let b = Mat::from_fn(n, n, |i, j| a[(i, j)] * sw[i] / sw[j]);
    // Smooth start with no symmetry, so every eigenvector has a component.
    let start: Vec<f64> = (0..n)
        .map(|i| 1.0 + (mesh.t[i] + 0.3).sin() + 0.5 * (5.0 * mesh.t[i]).cos())
        .collect();
    let (vals, _) = inverse_iteration(b.as_ref(), target, vec![start], 30)?;
    Ok(vals[0])
}
