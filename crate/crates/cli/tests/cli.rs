use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nplasmon"))
}

fn scenario_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

fn run(scenario: &Path, out: &Path, extra: &[&str]) -> Output {
    bin()
        .arg(scenario)
        .arg("--output")
        .arg(out)
        .args(extra)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

/// Rows of a CSV file as string fields, header excluded.
fn rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records()
        .map(|x| x.unwrap().iter().map(str::to_string).collect())
        .collect()
}

fn value(path: &Path, key: &str) -> f64 {
    rows(path)
        .into_iter()
        .find(|r| r[0] == key)
        .unwrap_or_else(|| panic!("{key} missing from {}", path.display()))[1]
        .parse()
        .unwrap()
}

#[test]
fn disc_spectrum_starts_at_one_half() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(
        &scenario_dir().join("disc_spectrum.toml"),
        tmp.path(),
        &["--panels", "8"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = rows(&tmp.path().join("spectrum.csv"));
    assert!((r[0][1].parse::<f64>().unwrap() - 0.5).abs() < 1e-12);
    for row in &r[1..] {
        assert!(row[1].parse::<f64>().unwrap().abs() < 1e-8);
    }
    let manifest: toml::Value =
        toml::from_str(&std::fs::read_to_string(tmp.path().join("manifest.toml")).unwrap()).unwrap();
    assert_eq!(manifest["scenario"]["mesh"]["panels"].as_integer(), Some(8));
    assert_eq!(manifest["scenario"]["curve"]["kind"].as_str(), Some("circle"));
    assert_eq!(manifest["nodes"].as_integer(), Some(128));
    assert!(manifest["scenario"]["mesh"]["kappa_length"].as_float().is_some());
}

#[test]
fn ellipse_spectrum_matches_closed_form() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(
        &scenario_dir().join("ellipse_spectrum.toml"),
        tmp.path(),
        &["--panels", "16"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let values: Vec<f64> = rows(&tmp.path().join("spectrum.csv"))
        .iter()
        .map(|r| r[1].parse().unwrap())
        .collect();
    for n in 1..=5 {
        let exact = (-(n as f64)).exp() / 2.0;
        for sign in [1.0, -1.0] {
            let best = values
                .iter()
                .map(|v| (v - sign * exact).abs())
                .fold(f64::INFINITY, f64::min);
            assert!(best < 1e-10, "n = {n}: {best}");
        }
    }
    for r in 1..=4 {
        assert!(tmp.path().join(format!("trace_{r}.csv")).exists());
    }
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let scenario = scenario_dir().join("ellipse_spectrum.toml");
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        assert!(run(&scenario, dir, &["--panels", "8"]).status.success());
    }
    for name in ["spectrum.csv", "trace_1.csv", "trace_4.csv"] {
        assert_eq!(
            std::fs::read(a.join(name)).unwrap(),
            std::fs::read(b.join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn unknown_key_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let p = write(
        tmp.path(),
        "bad.toml",
        "schema = 1\ncommand = \"spectrum\"\n[curve]\nkind = \"circle\"\nradius = 1.0\nradiu = 2.0\n",
    );
    let out = run(&p, &tmp.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("`radiu`") && err.contains("line 3"), "{err}");
}

#[test]
fn wrong_schema_and_missing_tables_are_config_errors() {
    let tmp = tempfile::tempdir().unwrap();
    for (name, text) in [
        ("v2.toml", "schema = 2\ncommand = \"star-demo\"\n"),
        ("nocurve.toml", "schema = 1\ncommand = \"spectrum\"\n"),
        ("nosweep.toml", "schema = 1\ncommand = \"sweep\"\n"),
        (
            "oracle.toml",
            "schema = 1\ncommand = \"oracle-check\"\n[curve]\nkind = \"circle\"\nradius = 1.0\n",
        ),
    ] {
        let out = run(&write(tmp.path(), name, text), &tmp.path().join("out"), &[]);
        assert_eq!(
            out.status.code(),
            Some(2),
            "{name}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let out = run(&tmp.path().join("absent.toml"), &tmp.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_kappa_list_reports_the_precondition() {
    let tmp = tempfile::tempdir().unwrap();
    let p = write(
        tmp.path(),
        "sweep.toml",
        "schema = 1\ncommand = \"sweep\"\n[sweep.family]\nkind = \"bump\"\nn_sym = 1\nkappa = [500.0, 400.0, 1500.0]\n\
         [[sweep.tracks]]\npositive = true\nrank = 1\n",
    );
    let out = run(&p, &tmp.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("precondition"));
}

#[test]
fn node_cap_is_a_numerical_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let p = write(
        tmp.path(),
        "cap.toml",
        "schema = 1\ncommand = \"spectrum\"\n[curve]\nkind = \"bump_family\"\nn_sym = 1\nkappa_max = 500.0\n\
         [mesh]\nmax_nodes = 64\n",
    );
    let out = run(&p, &tmp.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn oracle_check_passes_and_fails_with_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(
        &scenario_dir().join("ellipse_oracle.toml"),
        &tmp.path().join("ok"),
        &["--panels", "16"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = rows(&tmp.path().join("ok").join("oracle.csv"));
    assert_eq!(r.len(), 10);
    assert!(r.iter().all(|row| row[6] == "true"));

    let strict = write(
        tmp.path(),
        "strict.toml",
        "schema = 1\ncommand = \"oracle-check\"\n[curve]\nkind = \"ellipse\"\nr0 = 1.0\nrho0 = 0.5\n\
         [mesh]\npanels = 16\n[oracle]\nn_max = 3\neigenvalue_tol = 1e-30\n",
    );
    let out = run(&strict, &tmp.path().join("strict"), &[]);
    assert_eq!(out.status.code(), Some(4));
    assert!(tmp.path().join("strict").join("manifest.toml").exists());
}

#[test]
fn convex_bump_spectrum_alternates_in_sign() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&scenario_dir().join("bump_spectrum.toml"), tmp.path(), &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let values: Vec<f64> = rows(&tmp.path().join("spectrum.csv"))
        .iter()
        .map(|r| r[1].parse().unwrap())
        .collect();
    assert!((values[0] - 0.5).abs() < 1e-10);
    let signs: Vec<bool> = values[1..9].iter().map(|v| *v > 0.0).collect();
    for pair in signs.chunks(2) {
        assert_ne!(pair[0], pair[1], "{values:?}");
    }
}

#[test]
fn small_disc_scatter_matches_the_series_solution() {
    let tmp = tempfile::tempdir().unwrap();
    let p = write(
        tmp.path(),
        "disc.toml",
        "schema = 1\ncommand = \"scatter\"\n[curve]\nkind = \"circle\"\nradius = 0.002\n[mesh]\npanels = 16\n\
         [scatter]\neps_c = -1.0\ndelta = 0.001\nk = 10.0\ngrid = 31\nresidual = true\n",
    );
    let out = run(&p, &tmp.path().join("out"), &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = tmp.path().join("out").join("summary.csv");
    // Boundary maximum of |u| from the separated-variables series. The
    // reported value is a maximum over nodes, which undershoots slightly.
    let enh = value(&summary, "enhancement");
    assert!(
        enh <= 22.887792252410356 + 1e-9 && enh > 22.887792252410356 - 1e-4,
        "{enh}"
    );
    assert!(value(&summary, "residual_field") < 1e-8);
    let pgm = std::fs::read(tmp.path().join("out").join("field.pgm")).unwrap();
    assert!(pgm.starts_with(b"P5\n31 31\n255\n"));
    assert_eq!(rows(&tmp.path().join("out").join("field.csv")).len(), 31 * 31);
}

#[test]
fn field_command_writes_grids_and_trace() {
    let tmp = tempfile::tempdir().unwrap();
    let p = write(
        tmp.path(),
        "field.toml",
        "schema = 1\ncommand = \"field\"\n[curve]\nkind = \"ellipse\"\nr0 = 1.0\nrho0 = 0.5\n[mesh]\npanels = 8\n\
         [field]\nrank = 1\ngrid = 21\nzoom_half = 0.3\n",
    );
    let out = run(&p, &tmp.path().join("out"), &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in [
        "trace.csv",
        "field.csv",
        "field.pgm",
        "field_zoom.csv",
        "field_zoom.pgm",
        "manifest.toml",
    ] {
        assert!(tmp.path().join("out").join(f).exists(), "{f}");
    }
}

#[test]
fn ellipse_sweep_recovers_the_square_root_law() {
    let tmp = tempfile::tempdir().unwrap();
    let p = write(
        tmp.path(),
        "sweep.toml",
        "schema = 1\ncommand = \"sweep\"\n[sweep.family]\nkind = \"ellipse\"\nr0 = 1.0\nrho0 = [0.4, 0.2, 0.1]\n\
         [[sweep.tracks]]\npositive = true\nrank = 1\n",
    );
    let out = run(&p, &tmp.path().join("out"), &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let fit = rows(&tmp.path().join("out").join("fit.csv"));
    let slope: f64 = fit[0][1].parse().unwrap();
    assert!((slope - 0.5).abs() < 0.02, "p = {slope}");
    assert_eq!(rows(&tmp.path().join("out").join("sweep.csv")).len(), 3);
    assert!(std::fs::read_to_string(tmp.path().join("out").join("table.txt"))
        .unwrap()
        .contains("+1"));
}

#[test]
fn every_sample_scenario_parses() {
    let tmp = tempfile::tempdir().unwrap();
    let mut n = 0;
    for entry in std::fs::read_dir(scenario_dir()).unwrap() {
        let path = entry.unwrap().path();
        let text = std::fs::read_to_string(&path).unwrap();
        let v: toml::Value = toml::from_str(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(v["schema"].as_integer(), Some(1), "{}", path.display());
        n += 1;
        // A zero panel override is rejected before any numerics run.
        let out = run(&path, &tmp.path().join("x"), &["--panels", "0"]);
        assert_eq!(out.status.code(), Some(2), "{}", path.display());
        assert!(
            String::from_utf8_lossy(&out.stderr).contains("--panels"),
            "{}",
            path.display()
        );
    }
    assert!(n >= 10);
}
