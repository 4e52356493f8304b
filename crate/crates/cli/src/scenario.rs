//! Scenario files: a versioned TOML schema in which unknown keys are errors.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use nplasmon::geometry::CurveSpec;
use nplasmon::quadrature::MeshOptions;
use nplasmon::scatter::ScatterConfig;
use nplasmon::spectral::CLUSTER_TOL;
use nplasmon::sweep::{Family, SweepOptions, Track};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Spectrum,
    Field,
    Sweep,
    Scatter,
    OracleCheck,
    StarDemo,
}

impl Command {
    fn needs_curve(self) -> bool {
        !matches!(self, Command::Sweep | Command::StarDemo)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema: u32,
    pub command: Command,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// Reserved: every algorithm is deterministic.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curve: Option<CurveSpec>,
    #[serde(default)]
    pub mesh: MeshSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<SpectrumSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<FieldSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scatter: Option<ScatterSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleSection>,
}

/// Mesh knobs; absent values take the command's default.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSection {
    pub panels: Option<usize>,
    pub graded: Option<bool>,
    pub kappa_length: Option<f64>,
    pub proximity: Option<f64>,
    pub max_panel_length: Option<f64>,
    pub max_nodes: Option<usize>,
}

impl MeshSection {
    pub fn resolve(&self, defaults: &MeshOptions) -> MeshOptions {
        MeshOptions {
            panels: self.panels.unwrap_or(defaults.panels),
            graded: self.graded.unwrap_or(defaults.graded),
            max_panel_length: self.max_panel_length.or(defaults.max_panel_length),
            max_nodes: self.max_nodes.unwrap_or(defaults.max_nodes),
            kappa_length: self.kappa_length.unwrap_or(defaults.kappa_length),
            proximity: self.proximity.unwrap_or(defaults.proximity),
        }
    }

    pub fn from_options(o: &MeshOptions) -> MeshSection {
        MeshSection {
            panels: Some(o.panels),
            graded: Some(o.graded),
            kappa_length: Some(o.kappa_length),
            proximity: Some(o.proximity),
            max_panel_length: o.max_panel_length,
            max_nodes: Some(o.max_nodes),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumSection {
    #[serde(default = "cluster_tol")]
    pub cluster_tol: f64,
    /// Ranks (0-based, by decreasing |λ|) whose boundary traces are written.
    #[serde(default)]
    pub traces: Vec<usize>,
}

impl Default for SpectrumSection {
    fn default() -> Self {
        SpectrumSection {
            cluster_tol: CLUSTER_TOL,
            traces: Vec::new(),
        }
    }
}

/// Single layer of one eigenfunction on a grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSection {
    #[serde(default = "cluster_tol")]
    pub cluster_tol: f64,
    pub rank: usize,
    #[serde(default = "grid")]
    pub grid: usize,
    /// Padding around the boundary as a fraction of its bounding box.
    #[serde(default = "margin")]
    pub margin: f64,
    /// Half-width of an extra window centred on the first marked point.
    #[serde(default)]
    pub zoom_half: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub family: Family,
    pub tracks: Vec<Track>,
    #[serde(default = "cluster_tol")]
    pub cluster_tol: f64,
    #[serde(default = "sweep_max_nodes")]
    pub max_nodes: usize,
    #[serde(default = "convergence_tol")]
    pub convergence_tol: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScatterSection {
    pub eps_c: f64,
    pub delta: f64,
    pub k: f64,
    #[serde(default = "direction")]
    pub direction: [f64; 2],
    #[serde(default = "grid")]
    pub grid: usize,
    #[serde(default = "margin")]
    pub margin: f64,
    /// Also report the grid energy proxy.
    #[serde(default)]
    pub energy: bool,
    #[serde(default)]
    pub residual: bool,
    /// Runs the localization experiment on scaled one-bump domains
    /// instead of solving on `curve`.
    #[serde(default)]
    pub localization: Option<LocalizationSection>,
}

impl ScatterSection {
    pub fn config(&self) -> ScatterConfig {
        ScatterConfig {
            eps_c: self.eps_c,
            delta: self.delta,
            k: self.k,
            direction: self.direction,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalizationSection {
    pub kappa: Vec<f64>,
    #[serde(default = "localization_scale")]
    pub scale: f64,
    #[serde(default = "zoom_half")]
    pub zoom_half: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSection {
    #[serde(default = "n_max")]
    pub n_max: u32,
    #[serde(default = "eigenvalue_tol")]
    pub eigenvalue_tol: f64,
    #[serde(default = "angle_tol")]
    pub angle_tol: f64,
}

impl Default for OracleSection {
    fn default() -> Self {
        OracleSection {
            n_max: n_max(),
            eigenvalue_tol: eigenvalue_tol(),
            angle_tol: angle_tol(),
        }
    }
}

fn cluster_tol() -> f64 {
    CLUSTER_TOL
}
fn grid() -> usize {
    101
}
fn margin() -> f64 {
    0.25
}
fn sweep_max_nodes() -> usize {
    SweepOptions::default().max_nodes
}
fn convergence_tol() -> f64 {
    SweepOptions::default().convergence_tol
}
fn direction() -> [f64; 2] {
    [-1.0, 0.0]
}
fn localization_scale() -> f64 {
    nplasmon::scatter::LOCALIZATION_SCALE
}
fn zoom_half() -> f64 {
    0.2
}
fn n_max() -> u32 {
    5
}
fn eigenvalue_tol() -> f64 {
    1e-6
}
fn angle_tol() -> f64 {
    1e-4
}

/// Errors in the scenario itself, reported with exit code 2.
#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("cannot read scenario {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("scenario {path}: {source}")]
    Parse { path: PathBuf, source: toml::de::Error },
    #[error("scenario: {0}")]
    Invalid(String),
}

impl Scenario {
    pub fn parse(text: &str, path: &std::path::Path) -> Result<Scenario, ScenarioError> {
        let s: Scenario = toml::from_str(text).map_err(|source| ScenarioError::Parse {
            path: path.to_path_buf(),
            source,
        })?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &std::path::Path) -> Result<Scenario, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Scenario::parse(&text, path)
    }

    fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: String| Err(ScenarioError::Invalid(m));
        if self.schema != SCHEMA_VERSION {
            return bad(format!(
                "schema version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema
            ));
        }
        if self.command.needs_curve() && self.curve.is_none() {
            let localization = self.scatter.as_ref().is_some_and(|s| s.localization.is_some());
            if !(self.command == Command::Scatter && localization) {
                return bad(format!("command {:?} needs a [curve] table", self.command));
            }
        }
        let missing =
            |table: &str| ScenarioError::Invalid(format!("command {:?} needs a [{table}] table", self.command));
        match self.command {
            Command::Field if self.field.is_none() => Err(missing("field")),
            Command::Sweep if self.sweep.is_none() => Err(missing("sweep")),
            Command::Scatter if self.scatter.is_none() => Err(missing("scatter")),
            Command::OracleCheck if !matches!(self.curve, Some(CurveSpec::Ellipse { .. })) => {
                bad("oracle-check needs an ellipse curve".into())
            }
            _ => Ok(()),
        }?;
        Ok(())
    }
}
