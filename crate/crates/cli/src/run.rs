//! One function per command. Each writes its files into the output
//! directory and records their names for the manifest.

use std::path::{Path, PathBuf};

use serde::Serialize;

use nplasmon::fieldeval::{
    boundary_trace, render_field, write_grid_csv, write_pgm, write_trace_csv, FieldGrid, Window,
};
use nplasmon::geometry::{max_abs_curvature, Curve, CurveSpec};
use nplasmon::io::{num, write_csv};
use nplasmon::layerpot::assemble_np;
use nplasmon::quadrature::{build_mesh_with, default_panels, MeshOptions, PanelMesh};
use nplasmon::scatter::{
    energy_proxy, localization_experiment, localization_members, scatter_mesh, solve_transmission, star_demo,
    star_mesh_options, LocalizationOptions,
};
use nplasmon::spectral::{eigendecompose, ellipse_oracle, match_oracle, write_spectrum_csv, EigenPair};
use nplasmon::sweep::{fit_track, run_sweep, table_report, write_fit_csv, write_sweep_csv, SweepOptions};

use crate::scenario::{Command, MeshSection, OracleSection, Scenario, ScenarioError, SpectrumSection};

// Stdout may be a closed pipe (`| head`); losing the summary is fine there.
macro_rules! say {
    ($($t:tt)*) => {{
        use std::io::Write;
        let _ = write!(std::io::stdout(), $($t)*);
    }};
}

macro_rules! sayln {
    ($($t:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Numerics(#[from] nplasmon::Error),
    #[error("cannot write manifest: {0}")]
    Manifest(String),
    #[error("oracle check failed: {0}")]
    Check(String),
}

impl RunError {
    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Numerics(e) if e.is_numerical() => 3,
            RunError::Check(_) => 4,
            _ => 2,
        }
    }
}

type Result<T> = std::result::Result<T, RunError>;

#[derive(Serialize)]
struct Manifest<'a> {
    version: &'static str,
    /// Scenario with every default filled in.
    scenario: &'a Scenario,
    nodes: usize,
    files: Vec<String>,
}

/// Mesh knobs used when the scenario leaves them out.
fn default_mesh(cmd: Command, curve: Option<&Curve>) -> nplasmon::Result<MeshOptions> {
    Ok(match (cmd, curve.and_then(|c| c.spec())) {
        (Command::Sweep, _) => SweepOptions::default().mesh,
        (Command::StarDemo, _) => star_mesh_options(),
        (_, Some(CurveSpec::Circle { .. } | CurveSpec::Ellipse { .. })) => {
            let (kappa, _) = max_abs_curvature(curve.expect("spec implies a curve"), 4096)?;
            MeshOptions::uniform(default_panels(kappa))
        }
        (_, Some(CurveSpec::CuspStar)) => star_mesh_options(),
        _ => MeshOptions::graded(32),
    })
}

/// Bounding box of the boundary padded by `margin` times its larger side.
fn padded(mesh: &PanelMesh, margin: f64) -> Window {
    let w = Window::around(mesh, 0.0);
    Window::around(mesh, margin * (w.x_max - w.x_min).max(w.y_max - w.y_min))
}

struct Run<'a> {
    dir: &'a Path,
    files: Vec<String>,
    nodes: usize,
}

impl Run<'_> {
    fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.dir.join(name)
    }

    fn grid(&mut self, stem: &str, grid: &FieldGrid) -> nplasmon::Result<()> {
        write_grid_csv(&self.path(&format!("{stem}.csv")), grid)?;
        write_pgm(&self.path(&format!("{stem}.pgm")), grid)
    }

    fn summary(&mut self, name: &str, rows: &[(&str, String)]) -> nplasmon::Result<()> {
        let path = self.path(name);
        write_csv(
            &path,
            &["key", "value"],
            rows.iter().map(|(k, v)| [k.to_string(), v.clone()]),
        )
    }
}

/// Resolves defaults, runs the scenario's command and writes the manifest.
pub fn execute(mut scenario: Scenario, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(nplasmon::Error::from)?;
    let curve = scenario.curve.as_ref().map(|c| c.build()).transpose()?;
    let mesh_opts = scenario.mesh.resolve(&default_mesh(scenario.command, curve.as_ref())?);
    scenario.mesh = MeshSection::from_options(&mesh_opts);
    scenario.output = Some(dir.to_path_buf());
    let mut run = Run {
        dir,
        files: Vec::new(),
        nodes: 0,
    };
    match scenario.command {
        Command::Spectrum => {
            let s = scenario.spectrum.get_or_insert_with(SpectrumSection::default).clone();
            spectrum(&mut run, curve.as_ref().expect("validated"), &mesh_opts, &s)?;
        }
        Command::Field => field(&mut run, curve.as_ref().expect("validated"), &mesh_opts, &scenario)?,
        Command::Sweep => sweep(&mut run, &mesh_opts, &scenario)?,
        Command::Scatter => scatter(&mut run, curve.as_ref(), &mesh_opts, &scenario)?,
        Command::OracleCheck => {
            let o = scenario.oracle.get_or_insert_with(OracleSection::default).clone();
            let outcome = oracle_check(&mut run, curve.as_ref().expect("validated"), &mesh_opts, &o)?;
            write_manifest(&run, &scenario)?;
            return outcome;
        }
        Command::StarDemo => star(&mut run, &mesh_opts)?,
    }
    write_manifest(&run, &scenario)
}

fn write_manifest(run: &Run, scenario: &Scenario) -> Result<()> {
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION"),
        scenario,
        nodes: run.nodes,
        files: run.files.clone(),
    };
    let text = toml::to_string(&manifest).map_err(|e| RunError::Manifest(e.to_string()))?;
    std::fs::write(run.dir.join("manifest.toml"), text).map_err(nplasmon::Error::from)?;
    Ok(())
}

fn eigen(
    run: &mut Run,
    curve: &Curve,
    opts: &MeshOptions,
    cluster_tol: f64,
) -> nplasmon::Result<(PanelMesh, Vec<EigenPair>)> {
    let mesh = build_mesh_with(curve, opts)?;
    run.nodes = mesh.len();
    log::info!("{} panels, {} nodes", mesh.panel_count(), mesh.len());
    let pairs = eigendecompose(&mesh, &assemble_np(&mesh), cluster_tol)?;
    Ok((mesh, pairs))
}

fn spectrum(run: &mut Run, curve: &Curve, opts: &MeshOptions, s: &SpectrumSection) -> Result<()> {
    let (mesh, pairs) = eigen(run, curve, opts, s.cluster_tol)?;
    let (kappa, _) = max_abs_curvature(curve, 4096)?;
    write_spectrum_csv(&run.path("spectrum.csv"), &pairs, kappa)?;
    for &r in &s.traces {
        let p = pairs
            .get(r)
            .ok_or_else(|| ScenarioError::Invalid(format!("trace rank {r} exceeds the {} eigenvalues", pairs.len())))?;
        write_trace_csv(&run.path(&format!("trace_{r}.csv")), &boundary_trace(&mesh, &p.vector)?)?;
    }
    for p in pairs.iter().take(8) {
        sayln!("{:>4} {:>+.12} cluster {}", p.rank, p.lambda(), p.cluster);
    }
    Ok(())
}

fn field(run: &mut Run, curve: &Curve, opts: &MeshOptions, scenario: &Scenario) -> Result<()> {
    let f = scenario.field.as_ref().expect("validated");
    let (mesh, pairs) = eigen(run, curve, opts, f.cluster_tol)?;
    let p = pairs.get(f.rank).ok_or_else(|| {
        ScenarioError::Invalid(format!("field rank {} exceeds the {} eigenvalues", f.rank, pairs.len()))
    })?;
    let zero = num_complex::Complex64::new(0.0, 0.0);
    write_trace_csv(&run.path("trace.csv"), &boundary_trace(&mesh, &p.vector)?)?;
    let grid = render_field(&mesh, &p.vector, padded(&mesh, f.margin), f.grid, f.grid, zero)?;
    run.grid("field", &grid)?;
    if let Some(half) = f.zoom_half {
        let mark = curve
            .marks()
            .first()
            .ok_or_else(|| ScenarioError::Invalid("zoom_half needs a curve with a marked point".into()))?;
        let zoom = render_field(
            &mesh,
            &p.vector,
            Window::centered(curve.position(mark.t), half),
            f.grid,
            f.grid,
            zero,
        )?;
        run.grid("field_zoom", &zoom)?;
    }
    sayln!("rank {} λ = {:+.12}", f.rank, p.lambda());
    Ok(())
}

fn sweep(run: &mut Run, mesh: &MeshOptions, scenario: &Scenario) -> Result<()> {
    let s = scenario.sweep.as_ref().expect("validated");
    let opts = SweepOptions {
        mesh: mesh.clone(),
        cluster_tol: s.cluster_tol,
        max_nodes: s.max_nodes,
        convergence_tol: s.convergence_tol,
    };
    let records = run_sweep(&s.family, &s.tracks, &opts)?;
    run.nodes = records.iter().map(|r| r.nodes).max().unwrap_or(0);
    write_sweep_csv(&run.path("sweep.csv"), &records)?;
    let fits = s
        .tracks
        .iter()
        .map(|t| Ok((t.label(), fit_track(&records, &t.label())?)))
        .collect::<nplasmon::Result<Vec<_>>>()?;
    write_fit_csv(&run.path("fit.csv"), &fits)?;
    let table = table_report(&fits);
    std::fs::write(run.path("table.txt"), &table).map_err(nplasmon::Error::from)?;
    say!("{table}");
    Ok(())
}

fn scatter(run: &mut Run, curve: Option<&Curve>, base: &MeshOptions, scenario: &Scenario) -> Result<()> {
    let s = scenario.scatter.as_ref().expect("validated");
    let cfg = s.config();
    cfg.validate()?;
    if let Some(loc) = &s.localization {
        let members = localization_members(&loc.kappa, loc.scale)?;
        let opts = LocalizationOptions {
            mesh: base.clone(),
            zoom_half: loc.zoom_half,
            grid: s.grid,
        };
        let cases = localization_experiment(&members, &cfg, &opts)?;
        run.nodes = cases.iter().map(|c| c.row.nodes).max().unwrap_or(0);
        let path = run.path("localization.csv");
        write_csv(
            &path,
            &[
                "kappa_max",
                "zoom_max",
                "elsewhere_max",
                "ratio",
                "peak_offset",
                "nodes",
                "condition",
            ],
            cases.iter().map(|c| {
                let r = &c.row;
                vec![
                    num(r.kappa_max),
                    num(r.zoom_max),
                    num(r.elsewhere_max),
                    num(r.ratio),
                    num(r.peak_offset),
                    r.nodes.to_string(),
                    num(r.condition),
                ]
            }),
        )?;
        for (i, c) in cases.iter().enumerate() {
            run.grid(&format!("member{i}_global"), &c.global)?;
            run.grid(&format!("member{i}_zoom"), &c.zoom)?;
            sayln!(
                "κ_max {:>8} ratio {:.4} peak offset {:.1} panel lengths",
                c.row.kappa_max,
                c.row.ratio,
                c.row.peak_offset
            );
        }
        return Ok(());
    }
    let curve = curve.expect("validated");
    let mesh = scatter_mesh(curve, &cfg, base)?;
    run.nodes = mesh.len();
    log::info!("{} panels, {} nodes", mesh.panel_count(), mesh.len());
    let sol = solve_transmission(&mesh, &cfg)?;
    write_trace_csv(&run.path("boundary.csv"), &boundary_trace(&mesh, &sol.boundary)?)?;
    let grid = sol.render(&mesh, padded(&mesh, s.margin), s.grid, s.grid)?;
    run.grid("field", &grid)?;
    let mut rows = vec![
        ("enhancement", num(sol.boundary_enhancement())),
        ("condition", num(sol.condition)),
        ("nodes", mesh.len().to_string()),
    ];
    if s.residual {
        let (a, b) = sol.transmission_residual(&mesh)?;
        rows.push(("residual_field", num(a)));
        rows.push(("residual_flux", num(b)));
    }
    if s.energy {
        let e = energy_proxy(&sol, &mesh, s.grid, s.grid)?;
        rows.push(("energy", num(e.energy)));
        rows.push(("energy_coverage", num(e.coverage)));
    }
    for (k, v) in &rows {
        sayln!("{k} {v}");
    }
    run.summary("summary.csv", &rows)?;
    Ok(())
}

fn oracle_check(run: &mut Run, curve: &Curve, opts: &MeshOptions, o: &OracleSection) -> Result<Result<()>> {
    let (r0, rho0) = curve
        .ellipse_params()
        .ok_or_else(|| ScenarioError::Invalid("oracle-check needs an ellipse curve".into()))?;
    let (mesh, pairs) = eigen(run, curve, opts, nplasmon::spectral::CLUSTER_TOL)?;
    let rows = match_oracle(&pairs, &mesh, &ellipse_oracle(r0, rho0)?, o.n_max)?;
    let path = run.path("oracle.csv");
    write_csv(
        &path,
        &[
            "n",
            "mode",
            "exact",
            "computed",
            "eigenvalue_error",
            "subspace_angle",
            "pass",
        ],
        rows.iter().map(|r| {
            let pass = r.eigenvalue_error < o.eigenvalue_tol && r.subspace_angle < o.angle_tol;
            vec![
                r.n.to_string(),
                format!("{:?}", r.mode).to_lowercase(),
                num(r.exact),
                num(r.computed),
                num(r.eigenvalue_error),
                num(r.subspace_angle),
                nplasmon::io::flag(pass).to_string(),
            ]
        }),
    )?;
    let mut failures = Vec::new();
    for r in &rows {
        let ok = r.eigenvalue_error < o.eigenvalue_tol && r.subspace_angle < o.angle_tol;
        sayln!(
            "n={} {:?} λ={:+.12} error {:.2e} angle {:.2e} {}",
            r.n,
            r.mode,
            r.computed,
            r.eigenvalue_error,
            r.subspace_angle,
            if ok { "ok" } else { "FAIL" }
        );
        if !ok {
            failures.push(format!("n = {} {:?}", r.n, r.mode));
        }
    }
    Ok(if failures.is_empty() {
        Ok(())
    } else {
        Err(RunError::Check(failures.join(", ")))
    })
}

fn star(run: &mut Run, opts: &MeshOptions) -> Result<()> {
    let demo = star_demo(opts)?;
    let r = &demo.report;
    run.nodes = r.nodes;
    let rows = [
        ("wavelength", format!("{:.2}", r.wavelength)),
        ("cusp_distance", format!("{:.4}", r.cusp_distance)),
        ("subwavelength_ratio", num(r.subwavelength_ratio)),
        ("eps_c", num(r.eps_c)),
        ("delta", num(r.delta)),
        ("k", num(r.k)),
        ("np_eigenvalue", num(r.np_eigenvalue)),
        ("contrast", num(r.contrast)),
        ("nodes", r.nodes.to_string()),
        ("condition", num(r.condition)),
    ];
    for (k, v) in &rows {
        sayln!("{k} {v}");
    }
    run.summary("star_report.csv", &rows)?;
    let path = run.path("star_peaks.csv");
    write_csv(
        &path,
        &["cusp", "t_cusp", "t_peak", "value", "offset"],
        r.peaks.iter().map(|p| {
            vec![
                p.cusp.to_string(),
                num(p.t_cusp),
                num(p.t_peak),
                num(p.value),
                num(p.offset),
            ]
        }),
    )?;
    write_trace_csv(
        &run.path("boundary.csv"),
        &boundary_trace(&demo.mesh, &demo.solution.boundary)?,
    )?;
    let grid = demo.solution.render(&demo.mesh, padded(&demo.mesh, 0.15), 101, 101)?;
    run.grid("field", &grid)?;
    Ok(())
}
