//! Composite 16-point Gauss–Legendre panel quadrature on closed curves.

use std::f64::consts::{PI, TAU};
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::geometry::Curve;

/// Nodes per panel.
pub const ORDER: usize = 16;

/// Hard upper bound on mesh size; dense operators beyond this are impractical.
pub const MAX_NODES: usize = 4096;

struct Rule {
    nodes: [f64; ORDER],
    weights: [f64; ORDER],
    bary: [f64; ORDER],
    diff: [[f64; ORDER]; ORDER],
}

fn rule() -> &'static Rule {
    static RULE: OnceLock<Rule> = OnceLock::new();
    RULE.get_or_init(|| {
        let (nodes, weights) = newton_gauss_legendre();
        // Barycentric weights for interpolation through the nodes.
        let mut bary = [0.0; ORDER];
        for j in 0..ORDER {
            let mut p = 1.0;
            for k in 0..ORDER {
                if k != j {
                    p *= nodes[j] - nodes[k];
                }
            }
            bary[j] = 1.0 / p;
        }
        let mut diff = [[0.0; ORDER]; ORDER];
        for i in 0..ORDER {
            let mut row_sum = 0.0;
            for j in 0..ORDER {
                if i != j {
                    diff[i][j] = bary[j] / bary[i] / (nodes[i] - nodes[j]);
                    row_sum += diff[i][j];
                }
            }
            diff[i][i] = -row_sum;
        }
        Rule {
            nodes,
            weights,
            bary,
            diff,
        }
    })
}

fn newton_gauss_legendre() -> ([f64; ORDER], [f64; ORDER]) {
    let n = ORDER;
    let mut nodes = [0.0; ORDER];
    let mut weights = [0.0; ORDER];
    for i in 0..n {
        // Ascending order: start from the Chebyshev-like guess of root n-1-i.
        let mut x = -(PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        dp = if d != 0.0 { d } else { dp };
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    // Enforce exact symmetry.
    for i in 0..n / 2 {
        let x = 0.5 * (nodes[n - 1 - i] - nodes[i]);
        let w = 0.5 * (weights[i] + weights[n - 1 - i]);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    (p1, n as f64 * (x * p1 - p0) / (x * x - 1.0))
}

/// Legendre polynomials `P_0..P_{ORDER-1}` at `x`.
pub fn legendre_all(x: f64) -> [f64; ORDER] {
    let mut p = [0.0; ORDER];
    p[0] = 1.0;
    p[1] = x;
    for k in 2..ORDER {
        p[k] = ((2 * k - 1) as f64 * x * p[k - 1] - (k - 1) as f64 * p[k - 2]) / k as f64;
    }
    p
}

/// 16-point Gauss–Legendre nodes (ascending) and weights on `[-1, 1]`.
pub fn gauss_legendre_16() -> (&'static [f64; ORDER], &'static [f64; ORDER]) {
    let r = rule();
    (&r.nodes, &r.weights)
}

/// Values at `s ∈ [-1, 1]` of the Lagrange basis through the 16 nodes.
pub fn lagrange_basis(s: f64) -> [f64; ORDER] {
    let r = rule();
    let mut out = [0.0; ORDER];
    for (j, &x) in r.nodes.iter().enumerate() {
        if s == x {
            out[j] = 1.0;
            return out;
        }
    }
    let mut denom = 0.0;
    for j in 0..ORDER {
        let c = r.bary[j] / (s - r.nodes[j]);
        out[j] = c;
        denom += c;
    }
    for v in &mut out {
        *v /= denom;
    }
    out
}

/// Differentiation matrix on the reference nodes: `(D f)_i = f'(s_i)`.
pub fn differentiation_matrix() -> &'static [[f64; ORDER]; ORDER] {
    &rule().diff
}

/// Parameter interval `[t0, t1)` of one panel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Panel {
    pub t0: f64,
    pub t1: f64,
}

impl Panel {
    pub fn center(&self) -> f64 {
        0.5 * (self.t0 + self.t1)
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.t1 - self.t0)
    }
}

/// Mesh construction knobs.
#[derive(Clone, Debug, PartialEq)]
pub struct MeshOptions {
    /// Initial number of uniform panels.
    pub panels: usize,
    /// Curvature and proximity driven refinement.
    pub graded: bool,
    /// Upper bound on panel arc length, e.g. a fraction of a wavelength.
    pub max_panel_length: Option<f64>,
    pub max_nodes: usize,
    /// Split panels with `|κ|·length` above this.
    pub kappa_length: f64,
    /// Split panels that a fold-back part of the curve approaches closer
    /// than this fraction of their length.
    pub proximity: f64,
}

impl MeshOptions {
    pub fn uniform(panels: usize) -> Self {
        MeshOptions {
            panels,
            graded: false,
            max_panel_length: None,
            max_nodes: MAX_NODES,
            kappa_length: GRADING_KAPPA_LENGTH,
            proximity: 0.5,
        }
    }

    pub fn graded(panels: usize) -> Self {
        MeshOptions {
            graded: true,
            ..Self::uniform(panels)
        }
    }
}

/// Panel count for a uniform mesh: 32 up to `κ_max = 10`, doubling per decade.
pub fn default_panels(kappa_max: f64) -> usize {
    let decades = (kappa_max.abs() / 10.0).log10().ceil().max(0.0);
    let p = 32usize << (decades as u32).min(7);
    p.min(MAX_NODES / ORDER)
}

/// Curvature-graded refinement threshold on `|κ|·(panel length)`.
pub const GRADING_KAPPA_LENGTH: f64 = 0.5;

/// Nyström node set on a curve.
#[derive(Clone, Debug)]
pub struct PanelMesh {
    curve: Curve,
    panels: Vec<Panel>,
    pub t: Vec<f64>,
    pub x: Vec<[f64; 2]>,
    pub dx: Vec<[f64; 2]>,
    pub ddx: Vec<[f64; 2]>,
    pub speed: Vec<f64>,
    pub normal: Vec<[f64; 2]>,
    pub kappa: Vec<f64>,
    pub weights: Vec<f64>,
    pub arc: Vec<f64>,
    panel_lengths: Vec<f64>,
}

/// Uniform mesh of `panels` panels.
pub fn build_mesh(curve: &Curve, panels: usize) -> Result<PanelMesh> {
    build_mesh_with(curve, &MeshOptions::uniform(panels))
}

pub fn build_mesh_with(curve: &Curve, opts: &MeshOptions) -> Result<PanelMesh> {
    if opts.panels < 4 {
        return Err(Error::InvalidParameter(format!(
            "a mesh needs at least 4 panels, got {}",
            opts.panels
        )));
    }
    let mut panels: Vec<Panel> = (0..opts.panels)
        .map(|p| Panel {
            t0: TAU * p as f64 / opts.panels as f64,
            t1: TAU * (p + 1) as f64 / opts.panels as f64,
        })
        .collect();
    if opts.graded || opts.max_panel_length.is_some() {
        panels = refine(curve, panels, opts)?;
    }
    if panels.len() * ORDER > opts.max_nodes {
        return Err(Error::Resolution(format!(
            "mesh needs {} nodes, above the cap of {}",
            panels.len() * ORDER,
            opts.max_nodes
        )));
    }
    PanelMesh::from_panels(curve, panels)
}

fn refine(curve: &Curve, mut panels: Vec<Panel>, opts: &MeshOptions) -> Result<Vec<Panel>> {
    loop {
        let mesh = PanelMesh::from_panels(curve, panels.clone())?;
        let np = panels.len();
        let mut split = vec![false; np];
        for q in 0..np {
            let len = mesh.panel_lengths[q];
            if let Some(lmax) = opts.max_panel_length {
                if len > lmax {
                    split[q] = true;
                    continue;
                }
            }
            if !opts.graded {
                continue;
            }
            let kmax = mesh.panel_nodes(q).map(|i| mesh.kappa[i].abs()).fold(0.0, f64::max);
            if kmax * len > opts.kappa_length {
                split[q] = true;
                continue;
            }
            // Parts of the curve that fold back close to this panel, such as
            // the opposite flank of a needle, must stay well separated from it.
            let perim = mesh.perimeter();
            let centre = mesh.x[q * ORDER + ORDER / 2];
            'outer: for p in 0..np {
                if p == q || p == (q + 1) % np || p == (q + np - 1) % np {
                    continue;
                }
                let first = mesh.x[p * ORDER];
                if (first[0] - centre[0]).hypot(first[1] - centre[1]) > len + mesh.panel_lengths[p] {
                    continue;
                }
                for i in mesh.panel_nodes(p) {
                    for j in mesh.panel_nodes(q) {
                        let ds = (mesh.arc[i] - mesh.arc[j]).rem_euclid(perim);
                        if ds.min(perim - ds) < 1.5 * len {
                            continue;
                        }
                        let d = (mesh.x[i][0] - mesh.x[j][0]).hypot(mesh.x[i][1] - mesh.x[j][1]);
                        if d < opts.proximity * len {
                            split[q] = true;
                            break 'outer;
                        }
                    }
                }
            }
        }
        // 2:1 balance in parameter width between neighbours.
        loop {
            let mut changed = false;
            for q in 0..np {
                let w = if split[q] { 0.5 } else { 1.0 } * (panels[q].t1 - panels[q].t0);
                for nb in [(q + 1) % np, (q + np - 1) % np] {
                    let wn = if split[nb] { 0.5 } else { 1.0 } * (panels[nb].t1 - panels[nb].t0);
                    if wn > 2.0 * w * (1.0 + 1e-12) && !split[nb] {
                        split[nb] = true;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        if !split.iter().any(|&s| s) {
            return Ok(panels);
        }
        let mut next = Vec::with_capacity(2 * np);
        for (p, s) in panels.iter().zip(&split) {
            if *s {
                let m = p.center();
                next.push(Panel { t0: p.t0, t1: m });
                next.push(Panel { t0: m, t1: p.t1 });
            } else {
                next.push(*p);
            }
        }
        if next.len() * ORDER > opts.max_nodes {
            return Err(Error::Resolution(format!(
                "graded refinement exceeds the cap of {} nodes",
                opts.max_nodes
            )));
        }
        panels = next;
    }
}

impl PanelMesh {
    /// Mesh on an explicit panel partition of `[0, 2π)`.
    pub fn from_panels(curve: &Curve, panels: Vec<Panel>) -> Result<PanelMesh> {
        let (nodes, gw) = gauss_legendre_16();
        let n = panels.len() * ORDER;
        let mut m = PanelMesh {
            curve: curve.clone(),
            panels,
            t: Vec::with_capacity(n),
            x: Vec::with_capacity(n),
            dx: Vec::with_capacity(n),
            ddx: Vec::with_capacity(n),
            speed: Vec::with_capacity(n),
            normal: Vec::with_capacity(n),
            kappa: Vec::with_capacity(n),
            weights: Vec::with_capacity(n),
            arc: Vec::with_capacity(n),
            panel_lengths: Vec::new(),
        };
        let mut s0 = 0.0;
        for p in 0..m.panels.len() {
            let Panel { t0, t1 } = m.panels[p];
            if !(t1 > t0) {
                return Err(Error::InvalidParameter(format!(
                    "panel {p} has empty interval [{t0}, {t1})"
                )));
            }
            let (c, h) = (0.5 * (t0 + t1), 0.5 * (t1 - t0));
            let mut len = 0.0;
            let start = m.t.len();
            for (s, w) in nodes.iter().zip(gw) {
                let t = c + h * s;
                let [x, d1, d2] = curve.eval(t);
                let sp = d1[0].hypot(d1[1]);
                if !(sp >= 1e-14) {
                    return Err(Error::DegenerateParametrization { t, speed: sp });
                }
                m.t.push(t);
                m.x.push(x);
                m.dx.push(d1);
                m.ddx.push(d2);
                m.speed.push(sp);
                m.normal.push([d1[1] / sp, -d1[0] / sp]);
                m.kappa.push((d1[0] * d2[1] - d1[1] * d2[0]) / (sp * sp * sp));
                m.weights.push(w * h * sp);
                len += w * h * sp;
            }
            // Arc length at nodes: integrate the speed from the panel start
            // with the Lagrange interpolant (exact for the degree-15 fit).
            let speeds: Vec<f64> = m.speed[start..].to_vec();
            for &s in nodes {
                m.arc.push(s0 + panel_antiderivative(&speeds, s) * h);
            }
            m.panel_lengths.push(len);
            s0 += len;
        }
        Ok(m)
    }

    pub fn curve(&self) -> &Curve {
        &self.curve
    }

    pub fn panels(&self) -> &[Panel] {
        &self.panels
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn panel_count(&self) -> usize {
        self.panels.len()
    }

    pub fn panel_of(&self, node: usize) -> usize {
        node / ORDER
    }

    pub fn panel_nodes(&self, panel: usize) -> std::ops::Range<usize> {
        panel * ORDER..(panel + 1) * ORDER
    }

    /// Arc length of each panel.
    pub fn panel_lengths(&self) -> &[f64] {
        &self.panel_lengths
    }

    pub fn perimeter(&self) -> f64 {
        self.panel_lengths.iter().sum()
    }

    /// Panel arc length at the node's panel.
    pub fn local_panel_length(&self, node: usize) -> f64 {
        self.panel_lengths[self.panel_of(node)]
    }

    /// Index of the panel containing parameter `t` (taken mod 2π).
    pub fn locate(&self, t: f64) -> usize {
        let t = t.rem_euclid(TAU);
        let i = self.panels.partition_point(|p| p.t1 <= t);
        i.min(self.panels.len() - 1)
    }

    /// Node nearest (in parameter) to `t`.
    pub fn nearest_node(&self, t: f64) -> usize {
        let t = t.rem_euclid(TAU);
        let mut best = (f64::INFINITY, 0);
        let p = self.locate(t);
        let np = self.panels.len();
        for q in [(p + np - 1) % np, p, (p + 1) % np] {
            for i in self.panel_nodes(q) {
                let d = periodic_distance(self.t[i], t);
                if d < best.0 {
                    best = (d, i);
                }
            }
        }
        best.1
    }

    /// Same mesh with every panel bisected.
    pub fn refined(&self) -> Result<PanelMesh> {
        let panels = self
            .panels
            .iter()
            .flat_map(|p| {
                let m = p.center();
                [Panel { t0: p.t0, t1: m }, Panel { t0: m, t1: p.t1 }]
            })
            .collect();
        PanelMesh::from_panels(&self.curve, panels)
    }

    /// Interpolates node values at parameter `t` with the panel's Lagrange basis.
    pub fn interpolate<T>(&self, values: &[T], t: f64) -> Result<T>
    where
        T: Copy + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T>,
    {
        self.check_len(values.len())?;
        let q = self.locate(t);
        let p = self.panels[q];
        let s = (t.rem_euclid(TAU) - p.center()) / p.half_width();
        let basis = lagrange_basis(s.clamp(-1.0, 1.0));
        let base = q * ORDER;
        let mut acc = values[base] * basis[0];
        for j in 1..ORDER {
            acc = acc + values[base + j] * basis[j];
        }
        Ok(acc)
    }

    /// Derivative in `t` of node data, computed panel by panel.
    pub fn differentiate<T>(&self, values: &[T]) -> Result<Vec<T>>
    where
        T: Copy + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T>,
    {
        self.check_len(values.len())?;
        let d = differentiation_matrix();
        let mut out = Vec::with_capacity(values.len());
        for (q, p) in self.panels.iter().enumerate() {
            let base = q * ORDER;
            let scale = 1.0 / p.half_width();
            for row in d.iter() {
                let mut acc = values[base] * (row[0] * scale);
                for j in 1..ORDER {
                    acc = acc + values[base + j] * (row[j] * scale);
                }
                out.push(acc);
            }
        }
        Ok(out)
    }

    pub(crate) fn check_len(&self, got: usize) -> Result<()> {
        if got != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                got,
            });
        }
        Ok(())
    }
}

/// `∫_{-1}^{s} p(u) du` for the interpolant `p` of `values` at the nodes.
fn panel_antiderivative(values: &[f64], s: f64) -> f64 {
    let (nodes, weights) = gauss_legendre_16();
    let h = 0.5 * (s + 1.0);
    let mut acc = 0.0;
    for (u, w) in nodes.iter().zip(weights) {
        let x = -1.0 + h * (u + 1.0);
        let basis = lagrange_basis(x);
        let p: f64 = basis.iter().zip(values).map(|(b, v)| b * v).sum();
        acc += w * p;
    }
    acc * h
}

/// Distance between two parameters on the circle `[0, 2π)`.
pub fn periodic_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

/// `Σ samples_j · w_j`.
pub fn integrate(mesh: &PanelMesh, samples: &[f64]) -> Result<f64> {
    mesh.check_len(samples.len())?;
    Ok(samples.iter().zip(&mesh.weights).map(|(f, w)| f * w).sum())
}
