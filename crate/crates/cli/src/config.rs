//! Run configuration: parsing, normalization and validation.

use std::path::Path;

use kamcert_core::analytic::FtfJson;
use kamcert_core::engine::system::golden;
use kamcert_core::engine::{pendulum2d, EngineConfig, HamiltonianSystem, RunOptions};
use kamcert_core::geometry::{DomainSpec, SurfaceSpec};
use kamcert_core::measure::default_lattice_per_axis;
use kamcert_core::FourierTaylorFunction;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Workflow {
    Constants,
    Certify,
    Iterate,
    Geometry,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    General,
    Smooth,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemSpec {
    /// A named system; `anchor` overrides the preset anchor.
    Preset {
        name: String,
        #[serde(default)]
        anchor: Option<Vec<f64>>,
    },
    Inline {
        k: FtfJson,
        p: FtfJson,
        anchor: Vec<f64>,
    },
}

pub const SYSTEM_PRESETS: [&str; 1] = ["pendulum2d"];

impl SystemSpec {
    pub fn dim(&self) -> Result<usize, CliError> {
        match self {
            SystemSpec::Preset { name, .. } if name == "pendulum2d" => Ok(2),
            SystemSpec::Preset { name, .. } => Err(unknown_preset(name)),
            SystemSpec::Inline { k, .. } => Ok(k.d),
        }
    }

    pub fn anchor(&self) -> Result<Vec<f64>, CliError> {
        match self {
            SystemSpec::Preset { anchor: Some(a), .. } => Ok(a.clone()),
            SystemSpec::Preset { name, .. } if name == "pendulum2d" => Ok(vec![golden(), 1.0]),
            SystemSpec::Preset { name, .. } => Err(unknown_preset(name)),
            SystemSpec::Inline { anchor, .. } => Ok(anchor.clone()),
        }
    }

    /// (K, P) as coefficient tables.
    pub fn functions(&self, s: f64) -> Result<(FourierTaylorFunction, FourierTaylorFunction), CliError> {
        match self {
            SystemSpec::Preset { name, .. } if name == "pendulum2d" => {
                let sys = pendulum2d(0.0, 1.0, s)?;
                Ok((sys.k, sys.p))
            }
            SystemSpec::Preset { name, .. } => Err(unknown_preset(name)),
            SystemSpec::Inline { k, p, .. } => {
                Ok((FourierTaylorFunction::from_json_value(k)?, FourierTaylorFunction::from_json_value(p)?))
            }
        }
    }

    /// The system with its norms taken over the sup-ball B_radius(center).
    pub fn build(&self, epsilon: f64, center: &[f64], radius: f64, s: f64) -> Result<HamiltonianSystem, CliError> {
        let (k, p) = self.functions(s)?;
        Ok(HamiltonianSystem::new(k, p, epsilon, center.to_vec(), radius, s)?)
    }
}

fn unknown_preset(name: &str) -> CliError {
    CliError::Usage(format!("unknown system preset {name:?} (known: {})", SYSTEM_PRESETS.join(", ")))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeometryTask {
    /// Greedy internal cover of the domain lattice, with the exhaustive oracle on request.
    Cover {
        domain: DomainSpec,
        r: f64,
        per_axis: usize,
        #[serde(default)]
        oracle: bool,
    },
    Tube {
        surface: SurfaceSpec,
        rho: f64,
    },
    /// Inverts the frequency map K_y of the configured system on B_r(y0).
    Invert {
        y0: Vec<f64>,
        r: f64,
        samples: usize,
        targets: Vec<Vec<f64>>,
    },
}

impl GeometryTask {
    pub fn op(&self) -> &'static str {
        match self {
            GeometryTask::Cover { .. } => "cover",
            GeometryTask::Tube { .. } => "tube",
            GeometryTask::Invert { .. } => "invert",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub workflow: Workflow,
    #[serde(default)]
    pub system: Option<SystemSpec>,
    #[serde(default)]
    pub d: Option<usize>,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default)]
    pub epsilon: f64,
    /// Diophantine constant; certified from the anchor frequency when absent.
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default = "default_s")]
    pub s: f64,
    #[serde(default = "default_s_star")]
    pub s_star: f64,
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default)]
    pub rho_hat: Option<f64>,
    #[serde(default)]
    pub r_bar: Option<f64>,
    #[serde(default = "default_j_max")]
    pub j_max: usize,
    #[serde(default = "default_floor")]
    pub floor_tol: f64,
    #[serde(default = "default_k_max")]
    pub k_max: usize,
    #[serde(default = "default_degree")]
    pub degree: usize,
    #[serde(default = "default_k_cert")]
    pub k_cert: usize,
    #[serde(default)]
    pub override_conditions: bool,
    #[serde(default = "default_torus_grid")]
    pub torus_grid: usize,
    #[serde(default = "default_kolmogorov_grid")]
    pub kolmogorov_grid: usize,
    #[serde(default = "default_symplectic_points")]
    pub symplectic_points: usize,
    #[serde(default = "default_flow_t_end")]
    pub flow_t_end: f64,
    #[serde(default = "default_flow_tol")]
    pub flow_tol: f64,
    #[serde(default = "default_mode")]
    pub mode: Mode,
    #[serde(default)]
    pub domain: Option<DomainSpec>,
    #[serde(default)]
    pub surface: Option<SurfaceSpec>,
    /// Samples per axis of the det K_yy lattice.
    #[serde(default)]
    pub lattice_per_axis: Option<usize>,
    #[serde(default)]
    pub geometry: Option<GeometryTask>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out_dir: Option<String>,
    #[serde(default)]
    pub json: bool,
    #[serde(default)]
    pub markdown: bool,
}

fn default_tau() -> f64 {
    2.0
}
fn default_s() -> f64 {
    0.5
}
fn default_s_star() -> f64 {
    0.25
}
fn default_rho() -> f64 {
    0.05
}
fn default_j_max() -> usize {
    10
}
fn default_floor() -> f64 {
    1e-12
}
fn default_k_max() -> usize {
    24
}
fn default_degree() -> usize {
    3
}
fn default_k_cert() -> usize {
    2000
}
fn default_torus_grid() -> usize {
    32
}
fn default_kolmogorov_grid() -> usize {
    16
}
fn default_symplectic_points() -> usize {
    100
}
fn default_flow_t_end() -> f64 {
    10.0
}
fn default_flow_tol() -> f64 {
    1e-12
}
fn default_mode() -> Mode {
    Mode::General
}

impl RunConfig {
    /// A config with every field at its default.
    pub fn new(workflow: Workflow) -> Self {
        serde_json::from_value(serde_json::json!({ "workflow": workflow })).expect("defaults parse")
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Usage(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }

    /// Fills derived defaults and validates; the result is a fixed point of
    /// normalize∘parse∘serialize.
    pub fn normalize(mut self) -> Result<Self, CliError> {
        if let Some(sys) = &self.system {
            let dim = sys.dim()?;
            if let Some(d) = self.d {
                if d != dim {
                    return Err(CliError::Usage(format!("d = {d} does not match the system dimension {dim}")));
                }
            }
            self.d = Some(dim);
            if sys.anchor()?.len() != dim {
                return Err(CliError::Usage("anchor dimension mismatch".into()));
            }
        }
        let r_bar = *self.r_bar.get_or_insert(self.rho);
        self.rho_hat.get_or_insert(0.5 * r_bar);
        if let (None, Some(d)) = (self.lattice_per_axis, self.d) {
            self.lattice_per_axis = Some(default_lattice_per_axis(d));
        }
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<(), CliError> {
        let bad = |m: &str| Err(CliError::Usage(m.into()));
        if let Some(d) = self.d {
            if d == 0 {
                return bad("d must be positive");
            }
            if self.workflow != Workflow::Geometry && !(self.tau > d as f64 - 1.0) {
                return bad("tau must exceed d−1");
            }
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return bad("epsilon must be finite and nonnegative");
        }
        if !(self.s > 0.0 && 0.0 < self.s_star && self.s_star < self.s) {
            return bad("need 0 < s_star < s");
        }
        let (rho_hat, r_bar) = (self.rho_hat.unwrap_or(0.0), self.r_bar.unwrap_or(0.0));
        if !(0.0 < rho_hat && rho_hat < r_bar && r_bar <= self.rho) {
            return bad("radii must satisfy 0 < rho_hat < r_bar <= rho");
        }
        if let Some(a) = self.alpha {
            if !(a > 0.0) {
                return bad("alpha must be positive");
            }
        }
        if !(self.floor_tol >= 0.0 && self.flow_tol > 0.0 && self.flow_t_end > 0.0) {
            return bad("tolerances must be positive");
        }
        if self.k_max == 0 || self.degree < 2 || self.torus_grid == 0 || self.kolmogorov_grid == 0 {
            return bad("k_max, torus_grid, kolmogorov_grid must be positive and degree >= 2");
        }
        if self.lattice_per_axis == Some(0) {
            return bad("lattice_per_axis must be positive");
        }
        if let Some(dom) = &self.domain {
            dom.validate()?;
        }
        Ok(())
    }

    pub fn dim(&self) -> Result<usize, CliError> {
        self.d.ok_or_else(|| CliError::Usage("dimension unknown: give d or a system".into()))
    }

    pub fn system(&self) -> Result<&SystemSpec, CliError> {
        self.system.as_ref().ok_or_else(|| CliError::Usage("config needs a system".into()))
    }

    pub fn run_options(&self) -> RunOptions {
        RunOptions {
            alpha: self.alpha,
            tau: self.tau,
            k_cert: self.k_cert,
            s_star: self.s_star,
            rho_hat: self.rho_hat,
            r_bar: self.r_bar,
            j_max: self.j_max,
            floor_tol: self.floor_tol,
            override_conditions: self.override_conditions,
            engine: EngineConfig { degree: self.degree, k_max: self.k_max, ..Default::default() },
        }
    }
}
