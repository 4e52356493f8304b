//! Closed C² boundary curves parametrized over `t ∈ [0, 2π)`.
//!
//! Two shapes are supported: ellipses in elliptic coordinates and star-shaped
//! curves `r(θ)(cos θ, sin θ)`. Every curve carries an optional uniform scale
//! and a list of marked (high-curvature) points.
//!
//! Chords `x(a) - x(b)` are evaluated through difference identities rather
//! than by subtracting positions, so that nearby nodes on a needle-like bump
//! keep full relative accuracy.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre_16;

const SPEED_FLOOR: f64 = 1e-14;

/// Radial function `r(θ)` with its first two derivatives.
pub trait RadialFunction: Send + Sync + fmt::Debug {
    /// Returns `[r, r', r'']` at `theta`.
    fn eval(&self, theta: f64) -> [f64; 3];

    /// `r(a) - r(b)`. Implementations should avoid cancellation for `a ≈ b`.
    fn difference(&self, a: f64, b: f64) -> f64 {
        self.eval(a)[0] - self.eval(b)[0]
    }
}

/// One exponential bump `amplitude · exp(β (cos(n (θ - θ₀)) - 1))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub amplitude: f64,
    pub beta: f64,
    pub n: u32,
    pub theta0: f64,
}

impl Bump {
    fn exponent(&self, theta: f64) -> f64 {
        self.beta * ((self.n as f64 * (theta - self.theta0)).cos() - 1.0)
    }

    /// Parameters of the bump tips.
    pub fn tips(&self) -> impl Iterator<Item = f64> + '_ {
        let n = self.n.max(1);
        (0..n).map(move |j| (self.theta0 + TAU * j as f64 / n as f64).rem_euclid(TAU))
    }
}

/// `r(θ) = base + Σ bumps`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BumpSum {
    pub base: f64,
    pub bumps: Vec<Bump>,
}

impl RadialFunction for BumpSum {
    fn eval(&self, theta: f64) -> [f64; 3] {
        let mut out = [self.base, 0.0, 0.0];
        for b in &self.bumps {
            let n = b.n as f64;
            let phase = n * (theta - b.theta0);
            let (s, c) = phase.sin_cos();
            let e = b.amplitude * (b.beta * (c - 1.0)).exp();
            out[0] += e;
            out[1] += -e * b.beta * n * s;
            out[2] += e * (b.beta * b.beta * n * n * s * s - b.beta * n * n * c);
        }
        out
    }

    fn difference(&self, a: f64, b: f64) -> f64 {
        self.bumps
            .iter()
            .map(|bump| {
                let n = bump.n as f64;
                let mid = n * (0.5 * (a + b) - bump.theta0);
                let half = 0.5 * n * (a - b);
                let du = -2.0 * bump.beta * mid.sin() * half.sin();
                let eb = bump.exponent(b);
                // exp(eb) can underflow while expm1(du) overflows far from the tip.
                if du.abs() < 1.0 {
                    bump.amplitude * eb.exp() * du.exp_m1()
                } else {
                    bump.amplitude * ((eb + du).exp() - eb.exp())
                }
            })
            .sum()
    }
}

/// Radial function built from user closures.
#[derive(Clone)]
pub struct FnRadial {
    f: Arc<dyn Fn(f64) -> [f64; 3] + Send + Sync>,
}

impl FnRadial {
    pub fn new(f: impl Fn(f64) -> [f64; 3] + Send + Sync + 'static) -> Self {
        FnRadial { f: Arc::new(f) }
    }
}

impl fmt::Debug for FnRadial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("FnRadial")
    }
}

impl RadialFunction for FnRadial {
    fn eval(&self, theta: f64) -> [f64; 3] {
        (self.f)(theta)
    }
}

#[derive(Clone, Debug)]
enum Shape {
    Ellipse { r0: f64, rho0: f64 },
    Radial(Arc<dyn RadialFunction>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveKind {
    Ellipse,
    Radial,
    Composite,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MarkedPoint {
    pub label: String,
    pub t: f64,
}

/// A closed, regular, counterclockwise C² curve.
#[derive(Clone, Debug)]
pub struct Curve {
    shape: Shape,
    kind: CurveKind,
    scale: f64,
    marks: Vec<MarkedPoint>,
    spec: Option<CurveSpec>,
}

impl Curve {
    pub fn kind(&self) -> CurveKind {
        self.kind
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn marks(&self) -> &[MarkedPoint] {
        &self.marks
    }

    /// The serializable description this curve was built from, if any.
    pub fn spec(&self) -> Option<&CurveSpec> {
        self.spec.as_ref()
    }

    /// Ellipse parameters `(R₀, ρ₀)` before scaling.
    pub fn ellipse_params(&self) -> Option<(f64, f64)> {
        match self.shape {
            Shape::Ellipse { r0, rho0 } => Some((r0 * self.scale, rho0)),
            Shape::Radial(_) => None,
        }
    }

    /// Same curve dilated by `factor` about the origin.
    pub fn scaled(&self, factor: f64) -> Result<Curve> {
        if !(factor > 0.0) || !factor.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "scale factor must be positive, got {factor}"
            )));
        }
        let mut out = self.clone();
        out.scale *= factor;
        out.spec = None;
        Ok(out)
    }

    pub fn with_marks(mut self, marks: Vec<MarkedPoint>) -> Curve {
        self.marks = marks;
        self
    }

    /// Position, first and second derivative at `t`.
    pub fn eval(&self, t: f64) -> [[f64; 2]; 3] {
        let (s, c) = t.sin_cos();
        let [x, d1, d2] = match &self.shape {
            Shape::Ellipse { r0, rho0 } => {
                let a = r0 * rho0.cosh();
                let b = r0 * rho0.sinh();
                [[a * c, b * s], [-a * s, b * c], [-a * c, -b * s]]
            }
            Shape::Radial(r) => {
                let [r0, r1, r2] = r.eval(t);
                [
                    [r0 * c, r0 * s],
                    [r1 * c - r0 * s, r1 * s + r0 * c],
                    [(r2 - r0) * c - 2.0 * r1 * s, (r2 - r0) * s + 2.0 * r1 * c],
                ]
            }
        };
        let k = self.scale;
        [[k * x[0], k * x[1]], [k * d1[0], k * d1[1]], [k * d2[0], k * d2[1]]]
    }

    pub fn position(&self, t: f64) -> [f64; 2] {
        self.eval(t)[0]
    }

    pub fn speed(&self, t: f64) -> f64 {
        let d = self.eval(t)[1];
        d[0].hypot(d[1])
    }

    /// Outward unit normal (the curve is counterclockwise).
    pub fn normal(&self, t: f64) -> Result<[f64; 2]> {
        let d = self.eval(t)[1];
        let sp = d[0].hypot(d[1]);
        if sp < SPEED_FLOOR {
            return Err(Error::DegenerateParametrization { t, speed: sp });
        }
        Ok([d[1] / sp, -d[0] / sp])
    }

    /// `x(a) - x(b)` without cancellation for nearby parameters.
    pub fn chord(&self, a: f64, b: f64) -> [f64; 2] {
        let mid = 0.5 * (a + b);
        let half = (0.5 * (a - b)).sin();
        let dcos = -2.0 * mid.sin() * half;
        let dsin = 2.0 * mid.cos() * half;
        let k = self.scale;
        match &self.shape {
            Shape::Ellipse { r0, rho0 } => [k * r0 * rho0.cosh() * dcos, k * r0 * rho0.sinh() * dsin],
            Shape::Radial(r) => {
                let dr = r.difference(a, b);
                let rb = r.eval(b)[0];
                let (sa, ca) = a.sin_cos();
                [k * (dr * ca + rb * dcos), k * (dr * sa + rb * dsin)]
            }
        }
    }

    /// Signed curvature `(x₁'x₂'' - x₂'x₁'')/|x'|³`, positive where convex.
    pub fn curvature(&self, t: f64) -> Result<f64> {
        let [_, d1, d2] = self.eval(t);
        let sp = d1[0].hypot(d1[1]);
        if sp < SPEED_FLOOR {
            return Err(Error::DegenerateParametrization { t, speed: sp });
        }
        Ok((d1[0] * d2[1] - d1[1] * d2[0]) / (sp * sp * sp))
    }

    /// Signed enclosed area by high-order quadrature of `½(x₁x₂' - x₂x₁')`.
    pub fn signed_area(&self) -> f64 {
        self.integrate_param(512, |c, t| {
            let [x, d, _] = c.eval(t);
            0.5 * (x[0] * d[1] - x[1] * d[0])
        })
    }

    pub fn perimeter(&self) -> f64 {
        self.integrate_param(512, |c, t| c.speed(t))
    }

    fn integrate_param(&self, panels: usize, f: impl Fn(&Curve, f64) -> f64) -> f64 {
        let (nodes, weights) = gauss_legendre_16();
        let h = PI / panels as f64;
        (0..panels)
            .map(|p| {
                let c = (2 * p + 1) as f64 * h;
                nodes
                    .iter()
                    .zip(weights)
                    .map(|(s, w)| w * f(self, c + h * s))
                    .sum::<f64>()
                    * h
            })
            .sum()
    }

    fn validate(&self, samples: usize) -> Result<()> {
        for i in 0..samples {
            let t = TAU * i as f64 / samples as f64;
            if let Shape::Radial(r) = &self.shape {
                let rv = r.eval(t)[0];
                if !(rv > 0.0) {
                    return Err(Error::InvalidGeometry(format!(
                        "radial function r({t:.6}) = {rv} is not positive"
                    )));
                }
            }
            let sp = self.speed(t);
            if !(sp >= SPEED_FLOOR) {
                return Err(Error::DegenerateParametrization { t, speed: sp });
            }
        }
        let area = self.signed_area();
        if !(area > 0.0) {
            return Err(Error::InvalidGeometry(format!(
                "curve is not counterclockwise (signed area {area})"
            )));
        }
        Ok(())
    }
}

/// Serializable curve description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CurveSpec {
    Circle {
        radius: f64,
    },
    Ellipse {
        r0: f64,
        rho0: f64,
    },
    /// n-symmetric exponential bump family calibrated to a target curvature.
    BumpFamily {
        n_sym: u32,
        kappa_max: f64,
        #[serde(default)]
        concave: bool,
    },
    /// Explicit bump list on a circle of radius `base_radius`.
    Bumps {
        base_radius: f64,
        bumps: Vec<BumpSpec>,
    },
    /// The twelve-cusp star `1 + 0.0001·exp(8 sin 12θ)`.
    CuspStar,
}

/// One bump of a [`CurveSpec::Bumps`] curve: either `beta` or `kappa_max`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BumpSpec {
    /// Signed height; negative values give an inward dimple.
    pub height: f64,
    pub theta: f64,
    #[serde(default = "one")]
    pub n: u32,
    #[serde(default)]
    pub beta: Option<f64>,
    #[serde(default)]
    pub kappa_max: Option<f64>,
}

fn one() -> u32 {
    1
}

impl CurveSpec {
    pub fn build(&self) -> Result<Curve> {
        let mut curve = match self {
            CurveSpec::Circle { radius } => make_circle(*radius)?,
            CurveSpec::Ellipse { r0, rho0 } => make_ellipse(*r0, *rho0)?,
            CurveSpec::BumpFamily {
                n_sym,
                kappa_max,
                concave,
            } => make_bump_family(*n_sym, *kappa_max, *concave)?,
            CurveSpec::Bumps { base_radius, bumps } => make_bumps(*base_radius, bumps)?,
            CurveSpec::CuspStar => make_cusp_star()?,
        };
        curve.spec = Some(self.clone());
        Ok(curve)
    }
}

pub fn make_circle(radius: f64) -> Result<Curve> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "circle radius must be positive, got {radius}"
        )));
    }
    let mut c = radial_curve(
        Arc::new(BumpSum {
            base: radius,
            bumps: vec![],
        }),
        CurveKind::Radial,
        vec![],
    )?;
    c.spec = Some(CurveSpec::Circle { radius });
    Ok(c)
}

/// Ellipse `x = (R₀ cos ω cosh ρ₀, R₀ sin ω sinh ρ₀)` with marks `x_star` (ω = 0)
/// and `x_circ` (ω = π).
pub fn make_ellipse(r0: f64, rho0: f64) -> Result<Curve> {
    if !(r0 > 0.0 && rho0 > 0.0) || !r0.is_finite() || !rho0.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "ellipse needs R0 > 0 and rho0 > 0, got R0 = {r0}, rho0 = {rho0}"
        )));
    }
    let curve = Curve {
        shape: Shape::Ellipse { r0, rho0 },
        kind: CurveKind::Ellipse,
        scale: 1.0,
        marks: vec![
            MarkedPoint {
                label: "x_star".into(),
                t: 0.0,
            },
            MarkedPoint {
                label: "x_circ".into(),
                t: PI,
            },
        ],
        spec: Some(CurveSpec::Ellipse { r0, rho0 }),
    };
    curve.validate(1024)?;
    Ok(curve)
}

/// Star-shaped curve `r(θ)(cos θ, sin θ)`.
pub fn make_radial(radial: Arc<dyn RadialFunction>) -> Result<Curve> {
    radial_curve(radial, CurveKind::Radial, vec![])
}

fn radial_curve(radial: Arc<dyn RadialFunction>, kind: CurveKind, marks: Vec<MarkedPoint>) -> Result<Curve> {
    let curve = Curve {
        shape: Shape::Radial(radial),
        kind,
        scale: 1.0,
        marks,
        spec: None,
    };
    curve.validate(8192)?;
    Ok(curve)
}

/// Largest `|κ|` over the curve and the parameter where it occurs.
///
/// Dense sampling followed by golden-section refinement of the best bracket.
pub fn max_abs_curvature(curve: &Curve, samples: usize) -> Result<(f64, f64)> {
    let mut best = (0.0, 0.0);
    let dt = TAU / samples as f64;
    for i in 0..samples {
        let t = dt * i as f64;
        let k = curve.curvature(t)?.abs();
        if k > best.0 {
            best = (k, t);
        }
    }
    let (mut a, mut b) = (best.1 - dt, best.1 + dt);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let f = |t: f64| curve.curvature(t).map(f64::abs);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    for _ in 0..80 {
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
    }
    let t = 0.5 * (a + b);
    let k = f(t)?;
    if k > best.0 {
        best = (k, t);
    }
    Ok((best.0, best.1.rem_euclid(TAU)))
}

/// Bump height for the symmetric families (fraction of the base radius).
pub const CONVEX_HEIGHT: f64 = 0.5;
pub const CONCAVE_HEIGHT: f64 = 0.3;

/// n-symmetric family `r = 1 ± h exp(β (cos nθ - 1))` with `max |κ|` equal to
/// `target_kappa_max`. `target_kappa_max == 1` returns the unit circle.
pub fn make_bump_family(n_sym: u32, target_kappa_max: f64, concave: bool) -> Result<Curve> {
    if n_sym < 1 {
        return Err(Error::InvalidParameter("n_sym must be at least 1".into()));
    }
    if !target_kappa_max.is_finite() || target_kappa_max < 1.0 {
        return Err(Error::InvalidParameter(format!(
            "target curvature {target_kappa_max} does not exceed the base circle's"
        )));
    }
    let height = if concave { -CONCAVE_HEIGHT } else { CONVEX_HEIGHT };
    let spec = CurveSpec::BumpFamily {
        n_sym,
        kappa_max: target_kappa_max,
        concave,
    };
    if target_kappa_max - 1.0 < 1e-12 {
        let mut c = make_circle(1.0)?;
        c.spec = Some(spec);
        return Ok(c);
    }
    let bump = calibrate_bump(1.0, height, n_sym, 0.0, target_kappa_max)?;
    let marks = bump
        .tips()
        .enumerate()
        .map(|(j, t)| MarkedPoint {
            label: format!("tip{j}"),
            t,
        })
        .collect();
    let mut c = radial_curve(
        Arc::new(BumpSum {
            base: 1.0,
            bumps: vec![bump],
        }),
        CurveKind::Composite,
        marks,
    )?;
    c.spec = Some(spec);
    Ok(c)
}

/// Solves for β so that a single bump on a circle of radius `base` reaches
/// `target` as its largest `|κ|`. Bracketing bisection in `ln β`.
pub fn calibrate_bump(base: f64, height: f64, n: u32, theta0: f64, target: f64) -> Result<Bump> {
    if height == 0.0 || height <= -base {
        return Err(Error::InvalidGeometry(format!(
            "bump height {height} is incompatible with base radius {base}"
        )));
    }
    let samples = 4096 * n.max(1) as usize;
    let max_kappa = |beta: f64| -> Result<f64> {
        let bump = Bump {
            amplitude: height,
            beta,
            n,
            theta0,
        };
        let curve = radial_curve(
            Arc::new(BumpSum {
                base,
                bumps: vec![bump],
            }),
            CurveKind::Composite,
            vec![],
        )?;
        // Tips are the candidate maxima; the dense scan guards the rest.
        let tip = curve.curvature(theta0)?.abs();
        let scan = max_abs_curvature(&curve, samples)?.0;
        Ok(tip.max(scan))
    };
    let mut lo = 1e-3;
    let mut hi = 1.0;
    let f_lo = max_kappa(lo)? - target;
    if f_lo > 0.0 {
        return Err(Error::FamilyCalibration(format!(
            "target {target} is below the curvature of the flattest member"
        )));
    }
    let mut expansions = 0;
    while max_kappa(hi)? - target < 0.0 {
        lo = hi;
        hi *= 2.0;
        expansions += 1;
        if expansions > 60 {
            return Err(Error::FamilyCalibration(format!(
                "could not bracket target curvature {target}"
            )));
        }
    }
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if max_kappa(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo - 1.0 < 1e-13 {
            break;
        }
    }
    let beta = (lo * hi).sqrt();
    let achieved = max_kappa(beta)?;
    if ((achieved - target) / target).abs() > 1e-3 {
        return Err(Error::FamilyCalibration(format!(
            "achieved max curvature {achieved} misses target {target}"
        )));
    }
    Ok(Bump {
        amplitude: height,
        beta,
        n,
        theta0,
    })
}

/// Sum of independently calibrated bumps on a circle. Each bump with a
/// `kappa_max` is calibrated alone; the joint curvature at each tip is then
/// checked to stay within 1% of its target.
pub fn make_bumps(base_radius: f64, specs: &[BumpSpec]) -> Result<Curve> {
    if !(base_radius > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "base radius must be positive, got {base_radius}"
        )));
    }
    let mut bumps = Vec::with_capacity(specs.len());
    for spec in specs {
        let bump = match (spec.beta, spec.kappa_max) {
            (Some(beta), None) => Bump {
                amplitude: spec.height,
                beta,
                n: spec.n,
                theta0: spec.theta,
            },
            (None, Some(k)) => calibrate_bump(base_radius, spec.height, spec.n, spec.theta, k)?,
            _ => {
                return Err(Error::InvalidParameter(
                    "each bump needs exactly one of `beta` or `kappa_max`".into(),
                ))
            }
        };
        bumps.push(bump);
    }
    let marks = bumps
        .iter()
        .enumerate()
        .flat_map(|(i, b)| {
            b.tips()
                .enumerate()
                .map(move |(j, t)| MarkedPoint {
                    label: format!("bump{i}_{j}"),
                    t,
                })
                .collect::<Vec<_>>()
        })
        .collect();
    let curve = radial_curve(
        Arc::new(BumpSum {
            base: base_radius,
            bumps: bumps.clone(),
        }),
        CurveKind::Composite,
        marks,
    )?;
    for (spec, bump) in specs.iter().zip(&bumps) {
        if let Some(target) = spec.kappa_max {
            let joint = curve.curvature(bump.theta0)?.abs();
            if ((joint - target) / target).abs() > 1e-2 {
                log::warn!(
                    "bump at theta = {:.4}: joint curvature {joint:.3} vs calibrated {target:.3}",
                    bump.theta0
                );
            }
        }
    }
    Ok(curve)
}

/// The twelve-cusp star `r(θ) = 1 + 0.0001·exp(8 sin 12θ)`.
pub fn make_cusp_star() -> Result<Curve> {
    // exp(8 sin 12θ) = e⁸ exp(8 (cos(12 (θ - π/24)) - 1))
    let bump = Bump {
        amplitude: 1e-4 * 8f64.exp(),
        beta: 8.0,
        n: 12,
        theta0: PI / 24.0,
    };
    let marks = bump
        .tips()
        .enumerate()
        .map(|(j, t)| MarkedPoint {
            label: format!("cusp{j}"),
            t,
        })
        .collect();
    let mut c = radial_curve(
        Arc::new(BumpSum {
            base: 1.0,
            bumps: vec![bump],
        }),
        CurveKind::Composite,
        marks,
    )?;
    c.spec = Some(CurveSpec::CuspStar);
    Ok(c)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProfileMark {
    pub label: String,
    pub t: f64,
    pub kappa: f64,
}

#[derive(Clone, Debug)]
pub struct CurvatureProfile {
    pub t: Vec<f64>,
    pub kappa: Vec<f64>,
    pub arc_length: Vec<f64>,
    pub perimeter: f64,
    pub marks: Vec<ProfileMark>,
}

/// Samples curvature and arc length at `n_samples` uniform parameters.
pub fn profile(curve: &Curve, n_samples: usize) -> Result<CurvatureProfile> {
    if n_samples < 16 {
        return Err(Error::InvalidParameter(format!(
            "profile needs at least 16 samples, got {n_samples}"
        )));
    }
    let (nodes, weights) = gauss_legendre_16();
    let dt = TAU / n_samples as f64;
    let mut t = Vec::with_capacity(n_samples);
    let mut kappa = Vec::with_capacity(n_samples);
    let mut arc = Vec::with_capacity(n_samples);
    let mut s = 0.0;
    for i in 0..n_samples {
        let ti = dt * i as f64;
        t.push(ti);
        kappa.push(curve.curvature(ti)?);
        arc.push(s);
        let c = ti + 0.5 * dt;
        s += nodes
            .iter()
            .zip(weights)
            .map(|(x, w)| w * curve.speed(c + 0.5 * dt * x))
            .sum::<f64>()
            * 0.5
            * dt;
    }
    let marks = if curve.marks().is_empty() {
        detect_marks(&t, &kappa)
    } else {
        curve
            .marks()
            .iter()
            .map(|m| {
                Ok(ProfileMark {
                    label: m.label.clone(),
                    t: m.t,
                    kappa: curve.curvature(m.t)?,
                })
            })
            .collect::<Result<_>>()?
    };
    Ok(CurvatureProfile {
        t,
        kappa,
        arc_length: arc,
        perimeter: s,
        marks,
    })
}

fn detect_marks(t: &[f64], kappa: &[f64]) -> Vec<ProfileMark> {
    let n = kappa.len();
    let mut sorted = kappa.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = 0.5 * (sorted[(n - 1) / 2] + sorted[n / 2]);
    let mut marks = Vec::new();
    for i in 0..n {
        let k = kappa[i];
        if k > 2.0 * median && k >= kappa[(i + n - 1) % n] && k > kappa[(i + 1) % n] {
            marks.push(ProfileMark {
                label: format!("peak{}", marks.len()),
                t: t[i],
                kappa: k,
            });
        }
    }
    marks
}
