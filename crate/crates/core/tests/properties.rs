use std::f64::consts::{PI, TAU};

use num_complex::Complex64 as C64;
use proptest::prelude::*;

use nplasmon::fieldeval::{conormal_derivative, eval_single_layer, pde_residual, CellMask, Window};
use nplasmon::geometry::{make_bump_family, make_circle, make_ellipse, max_abs_curvature, Curve};
use nplasmon::layerpot::{assemble_np, column_sum_check};
use nplasmon::quadrature::{build_mesh, build_mesh_with, integrate, MeshOptions, Panel, PanelMesh};
use nplasmon::scatter::{energy_proxy, scatter_mesh, solve_transmission, ScatterConfig};
use nplasmon::spectral::{eigendecompose, ellipse_oracle, weighted_inner, EigenPair, EllipseMode, CLUSTER_TOL};
use nplasmon::sweep::fit_power_law;

#[derive(Clone, Debug)]
enum Shape {
    Ellipse { r0: f64, rho0: f64 },
    Bump { n: u32, kappa: f64, concave: bool },
}

impl Shape {
    fn curve(&self) -> Curve {
        match *self {
            Shape::Ellipse { r0, rho0 } => make_ellipse(r0, rho0).unwrap(),
            Shape::Bump { n, kappa, concave } => make_bump_family(n, kappa, concave).unwrap(),
        }
    }
}

fn shapes() -> impl Strategy<Value = Shape> {
    prop_oneof![
        (0.5..2.0f64, 0.3..1.2f64).prop_map(|(r0, rho0)| Shape::Ellipse { r0, rho0 }),
        (1u32..=4, 10.0..40.0f64, any::<bool>()).prop_map(|(n, kappa, concave)| Shape::Bump { n, kappa, concave }),
    ]
}

fn spectrum(mesh: &PanelMesh) -> Vec<EigenPair> {
    eigendecompose(mesh, &assemble_np(mesh), CLUSTER_TOL).unwrap()
}

fn sorted_top(pairs: &[EigenPair], count: usize) -> Vec<f64> {
    let mut v: Vec<f64> = pairs.iter().map(|p| p.lambda()).collect();
    v.sort_by(|a, b| b.abs().partial_cmp(&a.abs()).unwrap().then(b.partial_cmp(a).unwrap()));
    v.truncate(count);
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn total_signed_curvature_is_one_turn(shape in shapes()) {
        let mesh = build_mesh_with(&shape.curve(), &MeshOptions::graded(32)).unwrap();
        let turn = integrate(&mesh, &mesh.kappa).unwrap();
        prop_assert!((turn - TAU).abs() < 1e-8, "∮κ ds = {turn}");
    }

    #[test]
    fn derivatives_match_finite_differences(shape in shapes(), t in 0.0..TAU) {
        let c = shape.curve();
        let h = 1e-6;
        let [_, d1, d2] = c.eval(t);
        let [p, dp, _] = c.eval(t + h);
        let [m, dm, _] = c.eval(t - h);
        for i in 0..2 {
            let fd1 = (p[i] - m[i]) / (2.0 * h);
            let fd2 = (dp[i] - dm[i]) / (2.0 * h);
            prop_assert!((fd1 - d1[i]).abs() < 1e-6 * (1.0 + d1[i].abs() + d2[i].abs()));
            prop_assert!((fd2 - d2[i]).abs() < 1e-4 * (1.0 + d2[i].abs()));
        }
    }

    #[test]
    fn bump_family_has_n_fold_symmetry(
        n in 1u32..=6,
        kappa in 10.0..200.0f64,
        concave in any::<bool>(),
        t in 0.0..TAU,
    ) {
        let c = make_bump_family(n, kappa, concave).unwrap();
        let r = |t: f64| { let x = c.position(t); x[0].hypot(x[1]) };
        let shifted = r(t + TAU / n as f64);
        prop_assert!((shifted - r(t)).abs() <= 1e-13 * r(t), "{} vs {}", shifted, r(t));
    }

    #[test]
    fn ellipse_curvature_peaks_at_the_vertex(r0 in 0.2..5.0f64, rho0 in 0.05..2.0f64) {
        let c = make_ellipse(r0, rho0).unwrap();
        let expected = rho0.cosh() / (r0 * rho0.sinh().powi(2));
        let (kmax, _) = max_abs_curvature(&c, 4096).unwrap();
        prop_assert!((kmax - expected).abs() <= 1e-10 * expected, "{kmax} vs {expected}");
    }

    #[test]
    fn column_sums_are_one_half(shape in shapes()) {
        let mesh = build_mesh_with(&shape.curve(), &MeshOptions::graded(32)).unwrap();
        let report = column_sum_check(&mesh, &assemble_np(&mesh)).unwrap();
        prop_assert!(report.pass, "{report:?}");
    }

    #[test]
    fn conormal_derivative_of_trig_polynomials(
        radius in 0.3..3.0f64,
        coeffs in prop::collection::vec(-1.0..1.0f64, 10),
    ) {
        let mesh = build_mesh(&make_circle(radius).unwrap(), 16).unwrap();
        let f = |t: f64| -> (f64, f64) {
            let mut v = 0.0;
            let mut d = 0.0;
            for m in 1..=5 {
                let (a, b) = (coeffs[2 * m - 2], coeffs[2 * m - 1]);
                let (s, c) = (m as f64 * t).sin_cos();
                v += a * c + b * s;
                d += m as f64 * (b * c - a * s);
            }
            (v, d)
        };
        let values: Vec<C64> = mesh.t.iter().map(|&t| C64::new(f(t).0, 0.0)).collect();
        let got = conormal_derivative(&mesh, &values).unwrap();
        for (t, g) in mesh.t.iter().zip(&got) {
            let want = f(*t).1 / radius;
            prop_assert!((g - want).norm() < 1e-8, "t = {t}: {g} vs {want}");
        }
    }

    #[test]
    fn power_law_fit_recovers_exact_data(
        p in 0.1..2.0f64,
        ln_alpha in -3.0..3.0f64,
        kappas in prop::collection::btree_set(1u32..2000, 3..8),
    ) {
        let pts: Vec<(f64, f64)> = kappas
            .iter()
            .map(|&k| { let k = k as f64; (k, (ln_alpha + p * k.ln()).exp()) })
            .collect();
        let fit = fit_power_law(&pts).unwrap();
        prop_assert!((fit.p - p).abs() < 1e-9 && (fit.ln_alpha - ln_alpha).abs() < 1e-8);
        prop_assert!(fit.residual < 1e-9);
        let refit: Vec<(f64, f64)> = pts.iter().map(|&(k, _)| (k, fit.predict(k))).collect();
        let again = fit_power_law(&refit).unwrap();
        prop_assert!((again.p - fit.p).abs() < 1e-9);
    }

    #[test]
    fn single_layer_matches_ellipse_closed_form(
        rho0 in 0.3..1.0f64,
        n in 1u32..=4,
        inside in any::<bool>(),
        s in 0.0..1.0f64,
        omega in 0.0..TAU,
    ) {
        // Interior samples stay near the minor axis, clear of the boundary band.
        let (rho, omega) = if inside {
            (0.2 * rho0 * s, PI / 3.0 + omega / 6.0 + if omega > PI { PI } else { 0.0 })
        } else {
            (1.4 + s, omega)
        };
        let o = ellipse_oracle(1.0, rho0).unwrap();
        let mesh = build_mesh(&make_ellipse(1.0, rho0).unwrap(), 32).unwrap();
        let phi = o.sample(&mesh, EllipseMode::Cos, n);
        let p = [rho.cosh() * omega.cos(), rho.sinh() * omega.sin()];
        let got = eval_single_layer(&mesh, &phi, &[p], C64::new(0.0, 0.0)).unwrap()[0];
        let got = got.expect("point lies outside the boundary band");
        let want = o.single_layer(EllipseMode::Cos, n, rho, omega);
        prop_assert!((got - want).norm() < 1e-9, "{got} vs {want}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn spectrum_is_real_bounded_with_simple_half(shape in shapes()) {
        let pairs = spectrum(&build_mesh_with(&shape.curve(), &MeshOptions::graded(32)).unwrap());
        for p in &pairs {
            prop_assert!(p.eigenvalue.im.abs() < 1e-8, "{}", p.eigenvalue);
            prop_assert!(p.lambda() > -0.5 - 1e-8 && p.lambda() <= 0.5 + 1e-8, "{}", p.lambda());
        }
        let halves = pairs.iter().filter(|p| (p.lambda() - 0.5).abs() < 1e-6).count();
        prop_assert_eq!(halves, 1);
    }

    /// The discrete spectrum does not depend on where the panel breaks are.
    #[test]
    fn spectrum_ignores_the_panel_partition(
        rho0 in 0.4..1.0f64,
        jitter in prop::collection::vec(-0.3..0.3f64, 24),
    ) {
        let curve = make_ellipse(1.0, rho0).unwrap();
        let reference = spectrum(&build_mesh(&curve, 24).unwrap());
        let h = TAU / 24.0;
        let breaks: Vec<f64> = (0..=24)
            .map(|j| if j == 0 || j == 24 { j as f64 * h } else { (j as f64 + jitter[j]) * h })
            .collect();
        let panels = breaks.windows(2).map(|w| Panel { t0: w[0], t1: w[1] }).collect();
        let mesh = PanelMesh::from_panels(&curve, panels).unwrap();
        let moved = spectrum(&mesh);
        for a in reference.iter().map(|p| p.lambda()).filter(|l| l.abs() > 1e-3) {
            let b = moved
                .iter()
                .map(|p| p.lambda())
                .min_by(|x, y| (x - a).abs().total_cmp(&(y - a).abs()))
                .unwrap();
            prop_assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    /// Rotating an eigenfunction of an n-fold symmetric domain by one sector
    /// keeps it in its eigenspace.
    #[test]
    fn eigenspaces_are_rotation_invariant(
        n in 2u32..=4,
        kappa in 5.0..30.0f64,
        concave in any::<bool>(),
    ) {
        let panels = 16 * n as usize;
        let mesh = build_mesh(&make_bump_family(n, kappa, concave).unwrap(), panels).unwrap();
        let pairs = spectrum(&mesh);
        let shift = mesh.len() / n as usize;
        for p in pairs.iter().filter(|p| p.lambda().abs() > 1e-3) {
            let len = mesh.len();
            let rotated: Vec<C64> = (0..len).map(|i| p.vector[(i + shift) % len]).collect();
            let mut residual = rotated.clone();
            for q in pairs.iter().filter(|q| q.cluster == p.cluster) {
                let c = weighted_inner(&mesh, &q.vector, &rotated);
                for (r, v) in residual.iter_mut().zip(&q.vector) {
                    *r -= c * v;
                }
            }
            let norm = weighted_inner(&mesh, &residual, &residual).re.sqrt();
            prop_assert!(norm < 1e-6, "λ = {}: leaves its eigenspace by {norm}", p.lambda());
        }
    }

    /// A zero-mean density has no logarithmic term, so `|x|·|S[φ](x)|` stays bounded.
    #[test]
    fn zero_mean_single_layer_decays(
        shape in shapes(),
        coeffs in prop::collection::vec(-1.0..1.0f64, 6),
        angle in 0.0..TAU,
    ) {
        let mesh = build_mesh_with(&shape.curve(), &MeshOptions::graded(32)).unwrap();
        let raw: Vec<f64> = mesh
            .t
            .iter()
            .map(|&t| (1..=3).map(|m| coeffs[2 * m - 2] * (m as f64 * t).cos() + coeffs[2 * m - 1] * (m as f64 * t).sin()).sum())
            .collect();
        let mean = integrate(&mesh, &raw).unwrap() / mesh.perimeter();
        let phi: Vec<C64> = raw.iter().map(|v| C64::new(v - mean, 0.0)).collect();
        let dir = [angle.cos(), angle.sin()];
        let radii = [50.0, 100.0, 200.0, 400.0];
        let points: Vec<[f64; 2]> = radii.iter().map(|r| [r * dir[0], r * dir[1]]).collect();
        let values = eval_single_layer(&mesh, &phi, &points, C64::new(0.0, 0.0)).unwrap();
        let scaled: Vec<f64> = radii.iter().zip(&values).map(|(r, v)| r * v.unwrap().norm()).collect();
        for w in scaled.windows(2) {
            prop_assert!(w[1] <= 1.05 * w[0] + 1e-12, "|x||S[φ]| grows: {scaled:?}");
        }
    }
}

fn disc_solution(delta: f64) -> (PanelMesh, nplasmon::scatter::ScatterSolution) {
    let cfg = ScatterConfig {
        eps_c: -1.0,
        delta,
        k: 10.0,
        direction: [-1.0, 0.0],
    };
    let curve = make_circle(2.0).unwrap();
    let mesh = scatter_mesh(&curve, &cfg, &MeshOptions::uniform(16)).unwrap();
    let sol = solve_transmission(&mesh, &cfg).unwrap();
    (mesh, sol)
}

#[test]
fn energy_is_nonnegative_and_falls_with_the_loss() {
    let energies: Vec<f64> = [1e-2, 1e-3, 1e-4]
        .iter()
        .map(|&d| {
            let (mesh, sol) = disc_solution(d);
            let e = energy_proxy(&sol, &mesh, 61, 61).unwrap();
            assert!(e.reliable(), "{e:?}");
            e.energy
        })
        .collect();
    assert!(energies.iter().all(|&e| e >= 0.0), "{energies:?}");
    assert!(energies.windows(2).all(|w| w[1] < w[0]), "{energies:?}");
}

/// Both sides satisfy their Helmholtz equation up to the 5-point stencil's
/// O(h²) error, so halving the spacing cuts the residual about four times.
#[test]
fn field_solves_helmholtz_at_second_order() {
    let cfg = ScatterConfig {
        eps_c: -1.0,
        delta: 0.1,
        k: 3.0,
        direction: [-1.0, 0.0],
    };
    let curve = make_circle(1.0).unwrap();
    let mesh = scatter_mesh(&curve, &cfg, &MeshOptions::uniform(16)).unwrap();
    let sol = solve_transmission(&mesh, &cfg).unwrap();
    let cases = [
        (
            Window {
                x_min: 1.3,
                x_max: 1.9,
                y_min: -0.3,
                y_max: 0.3,
            },
            C64::new(cfg.k, 0.0),
            CellMask::Exterior,
        ),
        (Window::centered([0.0, 0.0], 0.4), sol.k_c, CellMask::Interior),
    ];
    for (window, k, region) in cases {
        let r: Vec<f64> = [11, 21]
            .iter()
            .map(|&n| pde_residual(&sol.render(&mesh, window, n, n).unwrap(), k, region).unwrap())
            .collect();
        assert!(r[0] / r[1] > 3.0 && r[0] / r[1] < 5.0, "{region:?}: {r:?}");
    }
}

#[test]
fn unit_circle_spectrum_is_only_half_and_zero() {
    let pairs = spectrum(&build_mesh(&make_circle(1.0).unwrap(), 8).unwrap());
    let top = sorted_top(&pairs, 2);
    assert!((top[0] - 0.5).abs() < 1e-12, "{top:?}");
    assert!(top[1].abs() < 1e-12, "{top:?}");
}
