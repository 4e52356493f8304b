//! Single-layer potentials off the boundary, conormal derivatives along it,
//! and gridded field maps with CSV and graymap export.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{num, write_csv};
use crate::layerpot::hankel::{hankel01_unchecked, NEGLIGIBLE_DECAY};
use crate::quadrature::PanelMesh;

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Points closer to the boundary than this many local panel lengths are not evaluated.
pub const EXCLUSION_PANELS: f64 = 1.0;

/// Fundamental solution: `(1/2π) ln r` for `k = 0`, `−(i/4) H₀¹(kr)` otherwise.
pub fn green(k: C64, r: f64) -> C64 {
    if k == C64::new(0.0, 0.0) {
        C64::new(r.ln() / (2.0 * PI), 0.0)
    } else {
        -I / 4.0 * hankel01_unchecked(k * r).0
    }
}

/// Distance to the nearest node and that node's local panel length.
fn boundary_distance(mesh: &PanelMesh, p: [f64; 2]) -> (f64, f64) {
    let mut best = (f64::INFINITY, 0);
    for (j, x) in mesh.x.iter().enumerate() {
        let d = (p[0] - x[0]).hypot(p[1] - x[1]);
        if d < best.0 {
            best = (d, j);
        }
    }
    (best.0, mesh.local_panel_length(best.1))
}

/// `Σ_j G(x − y_j) φ_j w_j` at each point; `None` inside the boundary band.
pub fn eval_single_layer(mesh: &PanelMesh, density: &[C64], points: &[[f64; 2]], k: C64) -> Result<Vec<Option<C64>>> {
    mesh.check_len(density.len())?;
    if k.im < 0.0 {
        return Err(Error::InvalidParameter(format!("wavenumber {k} has Im k < 0")));
    }
    Ok(points
        .iter()
        .map(|&p| {
            let (d, len) = boundary_distance(mesh, p);
            if d < EXCLUSION_PANELS * len {
                return None;
            }
            Some(eval_point(mesh, density, p, k))
        })
        .collect())
}

pub(crate) fn eval_point(mesh: &PanelMesh, density: &[C64], p: [f64; 2], k: C64) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for ((x, f), w) in mesh.x.iter().zip(density).zip(&mesh.weights) {
        let r = (p[0] - x[0]).hypot(p[1] - x[1]);
        if k.im * r > NEGLIGIBLE_DECAY {
            continue;
        }
        acc += green(k, r) * f * *w;
    }
    acc
}

/// Boundary function with its conormal derivative.
#[derive(Clone, Debug)]
pub struct BoundaryTrace {
    pub t: Vec<f64>,
    pub arc: Vec<f64>,
    pub values: Vec<C64>,
    pub derivative: Option<Vec<C64>>,
}

/// `dψ = ψ′(t)/|x′(t)|`, the arc-length derivative of node data.
pub fn conormal_derivative(mesh: &PanelMesh, values: &[C64]) -> Result<Vec<C64>> {
    let dt = mesh.differentiate(values)?;
    Ok(dt.iter().zip(&mesh.speed).map(|(d, s)| d / *s).collect())
}

pub fn boundary_trace(mesh: &PanelMesh, values: &[C64]) -> Result<BoundaryTrace> {
    let derivative = conormal_derivative(mesh, values)?;
    Ok(BoundaryTrace {
        t: mesh.t.clone(),
        arc: mesh.arc.clone(),
        values: values.to_vec(),
        derivative: Some(derivative),
    })
}

/// Trace CSV: `t,arc,re,im,abs` plus `d_re,d_im,d_abs` when present.
pub fn write_trace_csv(path: &Path, trace: &BoundaryTrace) -> Result<()> {
    let mut header = vec!["t", "arc", "re", "im", "abs"];
    if trace.derivative.is_some() {
        header.extend(["d_re", "d_im", "d_abs"]);
    }
    write_csv(
        path,
        &header,
        (0..trace.t.len()).map(|i| {
            let v = trace.values[i];
            let mut row = vec![num(trace.t[i]), num(trace.arc[i]), num(v.re), num(v.im), num(v.norm())];
            if let Some(d) = &trace.derivative {
                row.extend([num(d[i].re), num(d[i].im), num(d[i].norm())]);
            }
            row
        }),
    )
}

/// Maps node values onto a mesh with every panel bisected `levels` times.
pub fn upsample(mesh: &PanelMesh, values: &[C64], levels: u32) -> Result<(PanelMesh, Vec<C64>)> {
    let mut fine = mesh.clone();
    for _ in 0..levels {
        fine = fine.refined()?;
    }
    let v = fine
        .t
        .iter()
        .map(|&t| mesh.interpolate(values, t))
        .collect::<Result<Vec<_>>>()?;
    Ok((fine, v))
}

/// Rectangular region of the plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Window {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Window {
    pub fn centered(c: [f64; 2], half: f64) -> Window {
        Window {
            x_min: c[0] - half,
            x_max: c[0] + half,
            y_min: c[1] - half,
            y_max: c[1] + half,
        }
    }

    /// Bounding box of the mesh nodes enlarged by `margin` on each side.
    pub fn around(mesh: &PanelMesh, margin: f64) -> Window {
        let mut w = Window {
            x_min: f64::INFINITY,
            x_max: f64::NEG_INFINITY,
            y_min: f64::INFINITY,
            y_max: f64::NEG_INFINITY,
        };
        for x in &mesh.x {
            w.x_min = w.x_min.min(x[0]);
            w.x_max = w.x_max.max(x[0]);
            w.y_min = w.y_min.min(x[1]);
            w.y_max = w.y_max.max(x[1]);
        }
        w.x_min -= margin;
        w.x_max += margin;
        w.y_min -= margin;
        w.y_max += margin;
        w
    }

    fn validate(&self) -> Result<()> {
        if !(self.x_max > self.x_min && self.y_max > self.y_min) {
            return Err(Error::InvalidParameter(format!("degenerate window {self:?}")));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CellMask {
    Interior,
    Exterior,
    Excluded,
}

impl CellMask {
    pub fn code(self) -> u8 {
        match self {
            CellMask::Exterior => 0,
            CellMask::Interior => 1,
            CellMask::Excluded => 2,
        }
    }
}

/// Values on the nodes of a uniform grid, row-major from `y_min`.
#[derive(Clone, Debug)]
pub struct FieldGrid {
    pub window: Window,
    pub nx: usize,
    pub ny: usize,
    pub values: Vec<C64>,
    pub mask: Vec<CellMask>,
    /// What produced the values.
    pub label: String,
}

impl FieldGrid {
    pub fn point(&self, ix: usize, iy: usize) -> [f64; 2] {
        let w = &self.window;
        [
            w.x_min + (w.x_max - w.x_min) * ix as f64 / (self.nx - 1) as f64,
            w.y_min + (w.y_max - w.y_min) * iy as f64 / (self.ny - 1) as f64,
        ]
    }

    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }

    pub fn spacing(&self) -> (f64, f64) {
        let w = &self.window;
        (
            (w.x_max - w.x_min) / (self.nx - 1) as f64,
            (w.y_max - w.y_min) / (self.ny - 1) as f64,
        )
    }

    /// Largest `|value|` over cells with the given mask, with its position.
    pub fn max_abs(&self, region: Option<CellMask>) -> Option<(f64, [f64; 2])> {
        let mut best: Option<(f64, [f64; 2])> = None;
        for iy in 0..self.ny {
            for ix in 0..self.nx {
                let i = self.index(ix, iy);
                let m = self.mask[i];
                if m == CellMask::Excluded || region.is_some_and(|r| r != m) {
                    continue;
                }
                let v = self.values[i].norm();
                if best.is_none_or(|b| v > b.0) {
                    best = Some((v, self.point(ix, iy)));
                }
            }
        }
        best
    }
}

/// Winding number of the closed node polygon around `p`.
pub fn winding_number(mesh: &PanelMesh, p: [f64; 2]) -> i32 {
    let mut total = 0.0;
    let n = mesh.len();
    for j in 0..n {
        let a = mesh.x[j];
        let b = mesh.x[(j + 1) % n];
        let (ax, ay) = (a[0] - p[0], a[1] - p[1]);
        let (bx, by) = (b[0] - p[0], b[1] - p[1]);
        total += (ax * by - ay * bx).atan2(ax * bx + ay * by);
    }
    (total / (2.0 * PI)).round() as i32
}

/// Grid with interior/exterior/excluded classification and zero values.
pub fn classify_grid(mesh: &PanelMesh, window: Window, nx: usize, ny: usize) -> Result<FieldGrid> {
    window.validate()?;
    if nx < 2 || ny < 2 {
        return Err(Error::InvalidParameter(format!("grid resolution {nx}×{ny} below 2×2")));
    }
    let mut grid = FieldGrid {
        window,
        nx,
        ny,
        values: vec![C64::new(0.0, 0.0); nx * ny],
        mask: vec![CellMask::Exterior; nx * ny],
        label: String::new(),
    };
    for iy in 0..ny {
        for ix in 0..nx {
            let p = grid.point(ix, iy);
            let (d, len) = boundary_distance(mesh, p);
            let i = grid.index(ix, iy);
            grid.mask[i] = if d < EXCLUSION_PANELS * len {
                CellMask::Excluded
            } else if winding_number(mesh, p) != 0 {
                CellMask::Interior
            } else {
                CellMask::Exterior
            };
        }
    }
    Ok(grid)
}

/// Fills every non-excluded cell with `f(point, mask)`.
pub fn fill_grid(grid: &mut FieldGrid, f: impl Fn([f64; 2], CellMask) -> C64) {
    for iy in 0..grid.ny {
        for ix in 0..grid.nx {
            let i = grid.index(ix, iy);
            if grid.mask[i] != CellMask::Excluded {
                grid.values[i] = f(grid.point(ix, iy), grid.mask[i]);
            }
        }
    }
}

/// Single-layer potential of `density` on an `nx × ny` grid over `window`.
pub fn render_field(
    mesh: &PanelMesh,
    density: &[C64],
    window: Window,
    nx: usize,
    ny: usize,
    k: C64,
) -> Result<FieldGrid> {
    mesh.check_len(density.len())?;
    let mut grid = classify_grid(mesh, window, nx, ny)?;
    fill_grid(&mut grid, |p, _| eval_point(mesh, density, p, k));
    grid.label = format!("single layer, k = {k}");
    Ok(grid)
}

/// `max |Δ_h u + k² u| / max |u|` over cells of `region` whose four
/// neighbours lie in the same region, with the 5-point Laplacian `Δ_h`.
pub fn pde_residual(grid: &FieldGrid, k: C64, region: CellMask) -> Result<f64> {
    let (hx, hy) = grid.spacing();
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    let mut count = 0;
    for iy in 1..grid.ny.saturating_sub(1) {
        for ix in 1..grid.nx.saturating_sub(1) {
            let c = grid.index(ix, iy);
            let nb = [
                grid.index(ix - 1, iy),
                grid.index(ix + 1, iy),
                grid.index(ix, iy - 1),
                grid.index(ix, iy + 1),
            ];
            if grid.mask[c] != region || nb.iter().any(|&i| grid.mask[i] != region) {
                continue;
            }
            let lap = (grid.values[nb[0]] + grid.values[nb[1]] - 2.0 * grid.values[c]) / (hx * hx)
                + (grid.values[nb[2]] + grid.values[nb[3]] - 2.0 * grid.values[c]) / (hy * hy);
            worst = worst.max((lap + k * k * grid.values[c]).norm());
            scale = scale.max(grid.values[c].norm());
            count += 1;
        }
    }
    if count < 4 {
        return Err(Error::InsufficientGrid(format!(
            "only {count} cells have four same-region neighbours"
        )));
    }
    Ok(if scale > 0.0 { worst / scale } else { worst })
}

/// Static case of [`pde_residual`] on interior cells.
pub fn harmonicity_check(grid: &FieldGrid) -> Result<f64> {
    pde_residual(grid, C64::new(0.0, 0.0), CellMask::Interior)
}

/// Grid CSV: `x,y,re,im,abs,mask` with mask 0 exterior, 1 interior, 2 excluded.
pub fn write_grid_csv(path: &Path, grid: &FieldGrid) -> Result<()> {
    write_csv(
        path,
        &["x", "y", "re", "im", "abs", "mask"],
        (0..grid.ny).flat_map(|iy| {
            (0..grid.nx).map(move |ix| {
                let i = grid.index(ix, iy);
                let p = grid.point(ix, iy);
                let v = grid.values[i];
                let ex = grid.mask[i] == CellMask::Excluded;
                vec![
                    num(p[0]),
                    num(p[1]),
                    if ex { String::new() } else { num(v.re) },
                    if ex { String::new() } else { num(v.im) },
                    if ex { String::new() } else { num(v.norm()) },
                    grid.mask[i].code().to_string(),
                ]
            })
        }),
    )
}

/// Binary graymap of `|value|`, linearly scaled from the smallest to the
/// largest non-excluded modulus; excluded cells are black. The scale is
/// written to `<path>.txt`.
pub fn write_pgm(path: &Path, grid: &FieldGrid) -> Result<()> {
    let moduli: Vec<f64> = grid
        .values
        .iter()
        .zip(&grid.mask)
        .filter(|(_, m)| **m != CellMask::Excluded)
        .map(|(v, _)| v.norm())
        .collect();
    let lo = moduli.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = moduli.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    write!(out, "P5\n{} {}\n255\n", grid.nx, grid.ny)?;
    // Image rows run top to bottom, so start at y_max.
    for iy in (0..grid.ny).rev() {
        let row: Vec<u8> = (0..grid.nx)
            .map(|ix| {
                let i = grid.index(ix, iy);
                if grid.mask[i] == CellMask::Excluded {
                    0
                } else {
                    (((grid.values[i].norm() - lo) / span) * 255.0)
                        .round()
                        .clamp(0.0, 255.0) as u8
                }
            })
            .collect();
        out.write_all(&row)?;
    }
    out.flush()?;
    let mut side = path.as_os_str().to_owned();
    side.push(".txt");
    std::fs::write(
        side,
        format!(
            "quantity = |value|\nmin = {}\nmax = {}\nmapping = linear, gray = round(255 (v - min)/(max - min))\nexcluded = 0\nwindow = [{}, {}] x [{}, {}]\nsize = {} x {}\nsource = {}\n",
            num(lo),
            num(hi),
            num(grid.window.x_min),
            num(grid.window.x_max),
            num(grid.window.y_min),
            num(grid.window.y_max),
            grid.nx,
            grid.ny,
            grid.label
        ),
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_bump_family, make_circle, make_ellipse};
    use crate::quadrature::{build_mesh, build_mesh_with, MeshOptions};
    use crate::spectral::{ellipse_oracle, EllipseMode};

    fn ones(n: usize) -> Vec<C64> {
        vec![C64::new(1.0, 0.0); n]
    }

    #[test]
    fn constant_density_on_disc() {
        let m = build_mesh(&make_circle(1.0).unwrap(), 8).unwrap();
        let v = eval_single_layer(
            &m,
            &ones(m.len()),
            &[[2.0, 0.0], [0.0, -3.0], [0.0, 0.0], [0.999, 0.0]],
            C64::new(0.0, 0.0),
        )
        .unwrap();
        assert!((v[0].unwrap().re - 2f64.ln()).abs() < 1e-13);
        assert!((v[1].unwrap().re - 3f64.ln()).abs() < 1e-13);
        assert!(v[2].unwrap().norm() < 1e-14);
        assert!(v[3].is_none());
        let z = eval_single_layer(
            &m,
            &vec![C64::new(0.0, 0.0); m.len()],
            &[[2.0, 0.0]],
            C64::new(0.0, 0.0),
        )
        .unwrap();
        assert_eq!(z[0].unwrap(), C64::new(0.0, 0.0));
    }

    #[test]
    fn ellipse_exterior_single_layer() {
        let o = ellipse_oracle(1.0, 0.5).unwrap();
        let m = build_mesh(&make_ellipse(1.0, 0.5).unwrap(), 32).unwrap();
        for n in 1..4 {
            let phi = o.sample(&m, EllipseMode::Sin, n);
            let pts: Vec<[f64; 2]> = (0..10)
                .map(|i| {
                    let (rho, w) = (0.9 + 0.05 * i as f64, 0.3 + 0.6 * i as f64);
                    [w.cos() * rho.cosh(), w.sin() * rho.sinh()]
                })
                .collect();
            let vals = eval_single_layer(&m, &phi, &pts, C64::new(0.0, 0.0)).unwrap();
            for (p, v) in pts.iter().zip(vals) {
                let (rho, w) = o.coordinates(*p);
                let want = o.single_layer(EllipseMode::Sin, n, rho, w);
                assert!((v.unwrap().re - want).abs() < 1e-5, "n = {n}, {p:?}: {v:?} vs {want}");
            }
        }
    }

    #[test]
    fn conormal_of_arc_length_and_constant() {
        let m = build_mesh(&make_circle(1.0).unwrap(), 8).unwrap();
        let s: Vec<C64> = m.arc.iter().map(|&a| C64::new(a, 0.0)).collect();
        for d in conormal_derivative(&m, &s).unwrap() {
            assert!((d.re - 1.0).abs() < 1e-10);
        }
        for d in conormal_derivative(&m, &ones(m.len())).unwrap() {
            assert!(d.norm() < 1e-10);
        }
        let tri: Vec<C64> =
            m.t.iter()
                .map(|t| C64::new((3.0 * t).sin() + (2.0 * t).cos(), 0.0))
                .collect();
        for (d, t) in conormal_derivative(&m, &tri).unwrap().iter().zip(&m.t) {
            let want = 3.0 * (3.0 * t).cos() - 2.0 * (2.0 * t).sin();
            assert!((d.re - want).abs() < 1e-8);
        }
    }

    #[test]
    fn conormal_maximum_on_ellipse() {
        let o = ellipse_oracle(1.0, 0.2).unwrap();
        let m = build_mesh_with(&make_ellipse(1.0, 0.2).unwrap(), &MeshOptions::graded(32)).unwrap();
        for n in 1..3 {
            let d = conormal_derivative(&m, &o.sample(&m, EllipseMode::Sin, n)).unwrap();
            let peak = d.iter().map(|v| v.norm()).fold(0.0, f64::max);
            assert!((peak - o.tau_prime_max(n)).abs() < 1e-3 * o.tau_prime_max(n), "{peak}");
        }
    }

    #[test]
    fn disc_grid_is_constant_inside() {
        let m = build_mesh(&make_circle(1.0).unwrap(), 16).unwrap();
        let g = render_field(
            &m,
            &ones(m.len()),
            Window::centered([0.0, 0.0], 1.5),
            32,
            32,
            C64::new(0.0, 0.0),
        )
        .unwrap();
        let mut count = 0;
        for (v, mask) in g.values.iter().zip(&g.mask) {
            if *mask == CellMask::Interior {
                assert!(v.norm() < 1e-8);
                count += 1;
            }
        }
        assert!(count > 20);
    }

    #[test]
    fn zoom_window_near_sharp_tip() {
        let c = make_bump_family(1, 500.0, false).unwrap();
        let m = build_mesh_with(&c, &MeshOptions::graded(32)).unwrap();
        let tip = c.position(c.marks()[0].t);
        let g = classify_grid(&m, Window::centered(tip, 0.01), 16, 16).unwrap();
        assert_eq!(g.mask.len(), 256);
        assert!(g.mask.contains(&CellMask::Excluded));
    }

    #[test]
    fn ellipse_field_peaks_at_vertex() {
        let o = ellipse_oracle(1.0, 0.5).unwrap();
        let c = make_ellipse(1.0, 0.5).unwrap();
        let m = build_mesh(&c, 16).unwrap();
        let g = render_field(
            &m,
            &o.sample(&m, EllipseMode::Cos, 1),
            Window::around(&m, 0.3),
            41,
            31,
            C64::new(0.0, 0.0),
        )
        .unwrap();
        let (_, at) = g.max_abs(None).unwrap();
        let vx = c.position(0.0)[0];
        assert!((at[0].abs() - vx).abs() < 0.3 && at[1].abs() < 0.3, "{at:?}");
    }

    #[test]
    fn five_point_residual() {
        let m = build_mesh(&make_circle(1.0).unwrap(), 32).unwrap();
        let mut g = classify_grid(&m, Window::centered([0.0, 0.0], 0.5), 51, 51).unwrap();
        fill_grid(&mut g, |p, _| {
            C64::new(p[0] * p[0] * p[0] - 3.0 * p[0] * p[1] * p[1] + 2.0 * p[1], 0.0)
        });
        assert!(harmonicity_check(&g).unwrap() < 1e-10);

        // Potential of a disc density: second-order convergence.
        let m = build_mesh(&make_circle(1.0).unwrap(), 16).unwrap();
        let phi: Vec<C64> = m.t.iter().map(|t| C64::new((2.0 * t).cos() + 0.5, 0.0)).collect();
        let r1 = harmonicity_check(
            &render_field(&m, &phi, Window::centered([0.0, 0.0], 0.5), 11, 11, C64::new(0.0, 0.0)).unwrap(),
        )
        .unwrap();
        let r2 = harmonicity_check(
            &render_field(&m, &phi, Window::centered([0.0, 0.0], 0.5), 21, 21, C64::new(0.0, 0.0)).unwrap(),
        )
        .unwrap();
        assert!(r1 < 1e-10 || (r1 / r2 > 3.0 && r1 / r2 < 5.0), "{r1} {r2}");

        let tiny = classify_grid(&m, Window::centered([5.0, 5.0], 0.1), 3, 3).unwrap();
        assert!(matches!(harmonicity_check(&tiny), Err(Error::InsufficientGrid(_))));
    }

    #[test]
    fn helmholtz_green_matches_hankel() {
        let k = C64::new(2.0, 0.0);
        let g = green(k, 1.5);
        let h = crate::layerpot::hankel::hankel_h0(k * 1.5).unwrap().value;
        assert!((g + I / 4.0 * h).norm() < 1e-15);
    }

    #[test]
    fn graymap_and_csv_exports() {
        let dir = tempfile::tempdir().unwrap();
        let m = build_mesh(&make_circle(1.0).unwrap(), 4).unwrap();
        let g = render_field(
            &m,
            &ones(m.len()),
            Window::centered([0.0, 0.0], 2.0),
            8,
            6,
            C64::new(0.0, 0.0),
        )
        .unwrap();
        write_pgm(&dir.path().join("f.pgm"), &g).unwrap();
        let bytes = std::fs::read(dir.path().join("f.pgm")).unwrap();
        assert!(bytes.starts_with(b"P5\n8 6\n255\n"));
        assert_eq!(bytes.len(), b"P5\n8 6\n255\n".len() + 48);
        let side = std::fs::read_to_string(dir.path().join("f.pgm.txt")).unwrap();
        assert!(side.contains("min = ") && side.contains("max = "));
        write_grid_csv(&dir.path().join("f.csv"), &g).unwrap();
        let text = std::fs::read_to_string(dir.path().join("f.csv")).unwrap();
        assert!(text.starts_with("x,y,re,im,abs,mask\n"));
        assert_eq!(text.lines().count(), 49);
    }
}
