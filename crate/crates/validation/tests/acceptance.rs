//! Headline checks at their stated tolerances, one PASS/FAIL line each.
//!
//! Run with `cargo test -p nplasmon-validation --test acceptance`; any extra arguments
//! are substrings that select checks by name.

use std::process::ExitCode;
use std::time::Instant;

use num_complex::Complex64 as C64;

use nplasmon::fieldeval::eval_single_layer;
use nplasmon::geometry::{make_bump_family, make_circle, make_ellipse};
use nplasmon::layerpot::{assemble_np, assemble_sl, column_sum_check, quasistatic_residual};
use nplasmon::quadrature::{build_mesh, build_mesh_with, MeshOptions, PanelMesh};
use nplasmon::scatter::{
    localization_experiment, localization_members, scaling_discrepancy, scatter_mesh, solve_transmission, star_demo,
    star_mesh_options, LocalizationOptions, ScatterConfig, LOCALIZATION_SCALE,
};
use nplasmon::spectral::{
    check_half_eigen, eigendecompose, ellipse_oracle, match_oracle, EigenPair, EllipseMode, CLUSTER_TOL,
};
use nplasmon::sweep::{fit_track, run_sweep, Family, SweepOptions, SweepRecord, Track};
use nplasmon::Result;

struct Outcome {
    pass: bool,
    detail: String,
}

struct Check {
    name: &'static str,
    /// Wall-clock budget in seconds.
    budget: Option<f64>,
    run: fn() -> Result<Outcome>,
}

fn spectrum(mesh: &PanelMesh) -> Result<Vec<EigenPair>> {
    eigendecompose(mesh, &assemble_np(mesh), CLUSTER_TOL)
}

fn disc_oracle() -> Result<Outcome> {
    let mesh = build_mesh(&make_circle(1.0)?, 32)?;
    let pairs = spectrum(&mesh)?;
    let top = (pairs[0].eigenvalue - 0.5).norm();
    let rest = pairs[1..].iter().map(|p| p.eigenvalue.norm()).fold(0.0, f64::max);
    let imag = pairs.iter().map(|p| p.eigenvalue.im.abs()).fold(0.0, f64::max);
    Ok(Outcome {
        pass: top < 1e-10 && rest < 1e-8 && imag < 1e-10,
        detail: format!("|λ₀ − ½| = {top:.1e}, max other |λ| = {rest:.1e}, max |Im λ| = {imag:.1e}"),
    })
}

fn ellipse_spectrum() -> Result<Outcome> {
    let oracle = ellipse_oracle(1.0, 0.5)?;
    let mesh = build_mesh(&make_ellipse(1.0, 0.5)?, 64)?;
    let rows = match_oracle(&spectrum(&mesh)?, &mesh, &oracle, 5)?;
    let err = rows.iter().map(|r| r.eigenvalue_error).fold(0.0, f64::max);
    let angle = rows.iter().map(|r| r.subspace_angle).fold(0.0, f64::max);
    Ok(Outcome {
        pass: err < 1e-6 && angle < 1e-4,
        detail: format!("n = 1..5, max eigenvalue error {err:.1e}, max subspace angle {angle:.1e}"),
    })
}

fn ellipse_single_layer() -> Result<Outcome> {
    let oracle = ellipse_oracle(1.0, 0.5)?;
    let mesh = build_mesh(&make_ellipse(1.0, 0.5)?, 64)?;
    let sl = assemble_sl(&mesh);
    let nodes: Vec<usize> = (0..50).map(|i| i * mesh.len() / 50).collect();
    let probes: Vec<[f64; 2]> = (0..50)
        .map(|i| {
            let (rho, w) = (
                0.7 + 0.8 * i as f64 / 49.0,
                0.1 + std::f64::consts::TAU * i as f64 / 50.0,
            );
            [w.cos() * rho.cosh(), w.sin() * rho.sinh()]
        })
        .collect();
    let (mut on, mut off) = (0.0f64, 0.0f64);
    for n in 1..=5 {
        for mode in [EllipseMode::Cos, EllipseMode::Sin] {
            let phi = oracle.sample(&mesh, mode, n);
            let s = sl.apply(&phi)?;
            for &i in &nodes {
                on = on.max((s[i].re - oracle.single_layer(mode, n, 0.5, mesh.t[i])).abs());
            }
            for (p, v) in probes
                .iter()
                .zip(eval_single_layer(&mesh, &phi, &probes, C64::new(0.0, 0.0))?)
            {
                let (rho, w) = oracle.coordinates(*p);
                let v = v.map_or(f64::INFINITY, |v| v.re);
                off = off.max((v - oracle.single_layer(mode, n, rho, w)).abs());
            }
        }
    }
    Ok(Outcome {
        pass: on < 1e-5 && off < 1e-5,
        detail: format!("n = 1..5, both modes, 50 points each: boundary {on:.1e}, exterior {off:.1e}"),
    })
}

fn half_eigenfunction() -> Result<Outcome> {
    let cases = [
        ("circle", build_mesh(&make_circle(1.0)?, 16)?),
        ("ellipse", build_mesh(&make_ellipse(1.0, 0.5)?, 32)?),
        (
            "bump κ=50",
            build_mesh_with(&make_bump_family(1, 50.0, false)?, &MeshOptions::graded(32))?,
        ),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, mesh) in &cases {
        let rep = check_half_eigen(&spectrum(mesh)?, mesh)?;
        pass &= rep.relative_deviation < 1e-6;
        parts.push(format!("{name} {:.1e}", rep.relative_deviation));
    }
    Ok(Outcome {
        pass,
        detail: format!("relative deviation: {}", parts.join(", ")),
    })
}

fn column_sums() -> Result<Outcome> {
    let sweep_mesh = SweepOptions::default().mesh;
    let cases = [
        ("circle", build_mesh(&make_circle(1.0)?, 32)?),
        ("ellipse", build_mesh(&make_ellipse(1.0, 0.5)?, 64)?),
        (
            "thin ellipse",
            build_mesh_with(&make_ellipse(1.0, 0.025)?, &sweep_mesh)?,
        ),
        (
            "bump κ=50",
            build_mesh_with(&make_bump_family(1, 50.0, false)?, &MeshOptions::graded(32))?,
        ),
        (
            "bump κ=1500",
            build_mesh_with(&make_bump_family(1, 1500.0, false)?, &sweep_mesh)?,
        ),
        (
            "concave κ=1500",
            build_mesh_with(&make_bump_family(1, 1500.0, true)?, &sweep_mesh)?,
        ),
        (
            "star",
            build_mesh_with(&nplasmon::geometry::make_cusp_star()?, &star_mesh_options())?,
        ),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, mesh) in &cases {
        let rep = column_sum_check(mesh, &assemble_np(mesh))?;
        pass &= rep.pass;
        parts.push(format!("{name} {:.1e}/{:.1e}", rep.max_defect, rep.error_estimate));
    }
    Ok(Outcome {
        pass,
        detail: format!("defect/estimate: {}", parts.join(", ")),
    })
}

fn ellipse_sweep() -> Result<Outcome> {
    let rho0 = vec![0.2, 0.1, 0.05, 0.025];
    let family = Family::Ellipse {
        r0: 1.0,
        rho0: rho0.clone(),
    };
    let records = run_sweep(&family, &[Track::new(true, 1)], &SweepOptions::default())?;
    let worst = records
        .iter()
        .zip(&rho0)
        .map(|(r, &p)| (r.psi_max * p.sinh() - 1.0).abs())
        .fold(0.0, f64::max);
    let fit = fit_track(&records, "+1")?;
    Ok(Outcome {
        pass: worst < 1e-4 && (fit.p - 0.5).abs() <= 0.02 && records.iter().all(|r| r.converged),
        detail: format!("max relative ψ_max error {worst:.1e}, p = {:.4}", fit.p),
    })
}

fn quasi_static() -> Result<Outcome> {
    let mesh = build_mesh(&make_circle(1.0)?, 16)?;
    let rows = quasistatic_residual(&mesh, &[1e-2, 1e-3, 1e-4])?;
    let r: Vec<f64> = rows.iter().map(|r| r.residual_k).collect();
    let (lo, hi) = r
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
    Ok(Outcome {
        pass: hi / lo < 2.0,
        detail: format!(
            "scaled residuals {} (spread {:.3})",
            r.iter().map(|x| format!("{x:.4e}")).collect::<Vec<_>>().join(", "),
            hi / lo
        ),
    })
}

fn bump_tracks() -> Vec<Track> {
    (1..=3)
        .flat_map(|r| [Track::new(true, r), Track::new(false, r)])
        .collect()
}

fn exponent_summary(records: &[SweepRecord]) -> Result<String> {
    let mut parts = Vec::new();
    for t in bump_tracks() {
        let label = t.label();
        let fit = fit_track(records, &label)?;
        let obs = records.iter().find(|r| r.track == label).map(|r| r.observable);
        parts.push(format!(
            "{label} {} p={:.3}",
            obs.map_or("?".into(), |o| o.to_string()),
            fit.p
        ));
    }
    Ok(parts.join(", "))
}

fn bump_family(concave: bool) -> Result<Outcome> {
    let family = Family::Bump {
        n_sym: 1,
        concave,
        kappa: vec![500.0, 1000.0, 1500.0],
    };
    let records = run_sweep(&family, &bump_tracks(), &SweepOptions::default())?;
    // The modulus track is the one whose sign matches the convexity.
    let (modulus, conormal) = if concave { ("-1", "+1") } else { ("+1", "-1") };
    let pm = fit_track(&records, modulus)?.p;
    let pc = fit_track(&records, conormal)?.p;
    let localized = records.iter().filter(|r| r.localized()).count();
    let all_local = localized == records.len();
    let pass = (0.4..=0.6).contains(&pm) && (1.2..=1.6).contains(&pc) && (concave || all_local);
    Ok(Outcome {
        pass,
        detail: format!(
            "modulus {modulus} p = {pm:.3} (want [0.4, 0.6]), conormal {conormal} p = {pc:.3} (want [1.2, 1.6]), \
             {localized}/{} records localized; all tracks: {}",
            records.len(),
            exponent_summary(&records)?
        ),
    })
}

fn convex_family() -> Result<Outcome> {
    bump_family(false)
}

fn concave_family() -> Result<Outcome> {
    bump_family(true)
}

fn disc_config() -> ScatterConfig {
    ScatterConfig {
        eps_c: -1.0,
        delta: 1e-3,
        k: 10.0,
        direction: [-1.0, 0.0],
    }
}

fn scattering() -> Result<Outcome> {
    let cfg = disc_config();
    let base = MeshOptions::uniform(32);
    let mut enh = Vec::new();
    for s in [0.002, 2.0] {
        let mesh = scatter_mesh(&make_circle(s)?, &cfg, &base)?;
        enh.push(solve_transmission(&mesh, &cfg)?.boundary_enhancement());
    }
    let ratio = enh[0] / enh[1];
    let unit = make_circle(1.0)?;
    let d: Vec<f64> = [0.5, 2.0]
        .iter()
        .map(|&s| scaling_discrepancy(&unit, &cfg, s, &base))
        .collect::<Result<_>>()?;
    Ok(Outcome {
        pass: ratio >= 100.0 && d.iter().all(|&x| x <= 1e-3),
        detail: format!(
            "max|u| {:.4} at s = 0.002 vs {:.4} at s = 2, ratio {ratio:.2} (want ≥ 100); \
             scaling discrepancy {:.1e} (s = 0.5), {:.1e} (s = 2)",
            enh[0], enh[1], d[0], d[1]
        ),
    })
}

fn localization() -> Result<Outcome> {
    let members = localization_members(&[50.0, 500.0, 1500.0], LOCALIZATION_SCALE)?;
    let cases = localization_experiment(&members, &disc_config(), &LocalizationOptions::default())?;
    let rows: Vec<_> = cases.iter().map(|c| &c.row).collect();
    let increasing = rows.windows(2).all(|w| w[1].ratio > w[0].ratio);
    let last = rows.last().map_or(f64::INFINITY, |r| r.peak_offset);
    Ok(Outcome {
        pass: increasing && last <= 2.0,
        detail: format!(
            "ratios {} ; peak offset at κ = 1500: {last:.1} panel lengths",
            rows.iter()
                .map(|r| format!("κ={} {:.3}", r.kappa_max, r.ratio))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    })
}

fn star() -> Result<Outcome> {
    let demo = star_demo(&star_mesh_options())?;
    let r = &demo.report;
    let near = r.peaks.iter().filter(|p| p.offset <= 2.0).count();
    let wavelength = format!("{:.2}", r.wavelength);
    let distance = format!("{:.4}", r.cusp_distance);
    Ok(Outcome {
        pass: r.peaks.len() == 12 && near == 12 && wavelength == "628.32" && distance == "0.6719",
        detail: format!(
            "{near}/{} peaks within 2 panel lengths of a cusp (median offset {:.1}), contrast {:.3}, \
             wavelength {wavelength}, cusp distance {distance}, NP eigenvalue {:.6}",
            r.peaks.len(),
            median(r.peaks.iter().map(|p| p.offset).collect()),
            r.contrast,
            r.np_eigenvalue
        ),
    })
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

const CHECKS: &[Check] = &[
    Check {
        name: "disc-spectrum",
        budget: Some(5.0),
        run: disc_oracle,
    },
    Check {
        name: "ellipse-spectrum",
        budget: Some(30.0),
        run: ellipse_spectrum,
    },
    Check {
        name: "ellipse-single-layer",
        budget: None,
        run: ellipse_single_layer,
    },
    Check {
        name: "half-eigenfunction-constant",
        budget: None,
        run: half_eigenfunction,
    },
    Check {
        name: "column-sum",
        budget: None,
        run: column_sums,
    },
    Check {
        name: "ellipse-sweep",
        budget: Some(120.0),
        run: ellipse_sweep,
    },
    Check {
        name: "quasi-static-scaling",
        budget: None,
        run: quasi_static,
    },
    Check {
        name: "convex-blow-up",
        budget: Some(600.0),
        run: convex_family,
    },
    Check {
        name: "concave-swap",
        budget: None,
        run: concave_family,
    },
    Check {
        name: "scattering-size",
        budget: Some(300.0),
        run: scattering,
    },
    Check {
        name: "localization",
        budget: None,
        run: localization,
    },
    Check {
        name: "star-demo",
        budget: None,
        run: star,
    },
];

fn main() -> ExitCode {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    let mut ran = 0;
    for check in CHECKS {
        if !filters.is_empty() && !filters.iter().any(|f| check.name.contains(f.as_str())) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let result = (check.run)();
        let secs = start.elapsed().as_secs_f64();
        let (mut pass, mut detail) = match result {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if let Some(b) = check.budget {
            if secs > b {
                pass = false;
                detail.push_str(&format!("; over the {b} s budget"));
            }
        }
        if !pass {
            failed += 1;
        }
        println!(
            "{} {}: {detail} [{secs:.1} s]",
            if pass { "PASS" } else { "FAIL" },
            check.name
        );
    }
    println!("acceptance: {} passed, {failed} failed", ran - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
