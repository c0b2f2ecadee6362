//! Report documents and their text, markdown, JSON and CSV renderings.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use kamcert_core::engine::schedule::format_pow10;
use kamcert_core::engine::torus::{ActionShiftCheck, KolmogorovCheck, TorusSample};
use kamcert_core::engine::{DecayRow, SlopeFit, StepRecord, StopReason};
use kamcert_core::measure::{MeasureReport, Theorem1Check};
use serde::Serialize;

use crate::CliError;

/// One inequality of the certification chain with both sides.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Inequality {
    pub name: String,
    pub lhs: f64,
    pub relation: String,
    pub rhs: f64,
    pub holds: bool,
}

impl Inequality {
    pub fn le(name: &str, lhs: f64, rhs: f64) -> Self {
        Inequality { name: name.into(), lhs, relation: "<=".into(), rhs, holds: lhs <= rhs }
    }

    pub fn lt(name: &str, lhs: f64, rhs: f64) -> Self {
        Inequality { name: name.into(), lhs, relation: "<".into(), rhs, holds: lhs < rhs }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CertifyReport {
    pub mode: String,
    pub anchor: Vec<f64>,
    pub omega: Vec<f64>,
    pub alpha: f64,
    pub alpha_source: String,
    pub theorem1: Theorem1Check,
    pub measure: MeasureReport,
    pub inequalities: Vec<Inequality>,
    pub applicable: bool,
}

impl CertifyReport {
    pub fn text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "mode: {}", self.mode);
        let _ = writeln!(out, "anchor: {:?}  omega: {:?}", self.anchor, self.omega);
        let _ = writeln!(out, "alpha = {:e} ({})", self.alpha, self.alpha_source);
        let m = &self.measure;
        let _ = writeln!(out, "M = {:e}  L = {:e}  P = {:e}  theta = {:e}", m.m, m.l, m.p_norm, m.theta);
        for q in &self.inequalities {
            let tag = if q.holds { "ok  " } else { "FAIL" };
            let _ = writeln!(out, "[{tag}] {}: {:e} {} {:e}", q.name, q.lhs, q.relation, q.rhs);
        }
        match m.bound {
            Some(b) => {
                let _ = writeln!(out, "complement bound: {b:e}");
            }
            None => {
                let _ = writeln!(out, "complement bound: not applicable (epsilon is not below epsilon_star_actions)");
            }
        }
        out
    }

    pub fn markdown(&self) -> String {
        let mut out = format!("# Certification ({} mode)\n\n| inequality | lhs | rel | rhs | holds |\n|---|---|---|---|---|\n", self.mode);
        for q in &self.inequalities {
            let _ = writeln!(out, "| {} | {:e} | {} | {:e} | {} |", q.name, q.lhs, q.relation, q.rhs, q.holds);
        }
        let bound = self.measure.bound.map_or("not applicable".to_string(), |b| format!("{b:e}"));
        let _ = writeln!(out, "\ncomplement bound: {bound}");
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InitialNorms {
    pub anchor: Vec<f64>,
    pub omega: Vec<f64>,
    pub m: f64,
    pub l: f64,
    pub p_norm: f64,
    pub theta: f64,
    /// Measured N(R₀) = ε‖P‖ on the engine grid.
    pub rho0: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScheduleSummary {
    pub epsilon0: f64,
    pub eps_hat0: f64,
    pub first_step_ok: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepSummary {
    pub j: usize,
    pub kappa: usize,
    pub sigma: f64,
    pub rho_in: f64,
    pub rho_out_retained: f64,
    pub tail_dropped: f64,
    pub eta1: Vec<f64>,
    pub generator_norm: f64,
    pub fp_iterations: usize,
    pub homological_defect: f64,
    pub frequency_defect: f64,
    pub smallness_ok: bool,
    pub smallness_lhs: f64,
    pub smallness_rhs: f64,
}

impl From<&StepRecord> for StepSummary {
    fn from(r: &StepRecord) -> Self {
        StepSummary {
            j: r.j,
            kappa: r.kappa,
            sigma: r.sigma,
            rho_in: r.rho_in,
            rho_out_retained: r.rho_out_retained,
            tail_dropped: r.tail_dropped,
            eta1: r.eta1.clone(),
            generator_norm: r.generator_norm,
            fp_iterations: r.fp_iterations,
            homological_defect: r.homological_defect,
            frequency_defect: r.frequency_defect,
            smallness_ok: r.smallness_ok,
            smallness_lhs: r.smallness_lhs,
            smallness_rhs: r.smallness_rhs,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TorusChecks {
    pub conjugacy_residual: f64,
    pub flow_drift: f64,
    pub kolmogorov: KolmogorovCheck,
    pub symplecticity_defect: f64,
    pub transformed_hamiltonian_defect: f64,
    pub frequency_defect: f64,
    pub action_shift: ActionShiftCheck,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IterateSummary {
    pub d: usize,
    pub epsilon: f64,
    pub tau: f64,
    pub alpha: f64,
    pub s: f64,
    pub s_star: f64,
    pub rho: f64,
    pub k_max: usize,
    pub grid_n: usize,
    pub initial: InitialNorms,
    pub theorem1: Theorem1Check,
    pub schedule: Option<ScheduleSummary>,
    pub steps: usize,
    pub stop: StopReason,
    pub final_rho: f64,
    pub floor_tol: f64,
    pub slope_fit: SlopeFit,
    pub torus_anchor: Vec<f64>,
    pub checks: Option<TorusChecks>,
    pub step_log: Vec<StepSummary>,
}

impl IterateSummary {
    pub fn text(&self, decay: &[DecayRow]) -> String {
        let mut out = String::new();
        let i = &self.initial;
        let _ = writeln!(out, "d = {}  epsilon = {:e}  alpha = {:e}  tau = {}", self.d, self.epsilon, self.alpha, self.tau);
        let _ = writeln!(out, "anchor {:?}  omega {:?}", i.anchor, i.omega);
        let _ = writeln!(out, "M = {:e}  L = {:e}  P = {:e}  rho_0 = {:e}", i.m, i.l, i.p_norm, i.rho0);
        let t = &self.theorem1;
        let _ = writeln!(out, "alpha <= c0 rho_hat / L: {:e} <= {:e} ({})", t.alpha, t.alpha_limit, t.alpha_ok);
        let _ = writeln!(out, "epsilon_frak <= epsilon_star_frak: {:e} <= {:e} ({})", t.epsilon_frak, t.epsilon_star_frak, t.eps_ok);
        let _ = writeln!(out, "{:>3}  {:>12}  {:>10}  envelope", "j", "rho_j", "s_j");
        for r in decay {
            let env = r.log10_envelope.map_or("-".to_string(), format_pow10);
            let _ = writeln!(out, "{:>3}  {:>12.4e}  {:>10.6}  {}", r.j, r.rho, r.s, env);
        }
        let slope = self.slope_fit.slope.map_or("-".to_string(), |v| format!("{v:.4}"));
        let _ = writeln!(out, "stop: {:?} after {} steps; slope fit {} over {} pairs", self.stop, self.steps, slope, self.slope_fit.pairs);
        if let Some(c) = &self.checks {
            let _ = writeln!(out, "conjugacy residual {:e}", c.conjugacy_residual);
            let _ = writeln!(out, "flow drift {:e}", c.flow_drift);
            let _ = writeln!(out, "Kolmogorov det {:.9} (ok {})", c.kolmogorov.det, c.kolmogorov.ok);
            let _ = writeln!(out, "symplecticity defect {:e}", c.symplecticity_defect);
            let _ = writeln!(out, "transformed Hamiltonian defect {:e}", c.transformed_hamiltonian_defect);
            let _ = writeln!(out, "frequency defect {:e}", c.frequency_defect);
            let _ = writeln!(out, "action shift {:e} <= {:e} ({})", c.action_shift.shift, c.action_shift.bound, c.action_shift.ok);
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TorusDocument<'a> {
    pub d: usize,
    pub n: usize,
    pub omega: &'a [f64],
    pub samples: &'a [TorusSample],
}

#[derive(Serialize)]
struct CsvRow {
    j: usize,
    rho_j: f64,
    certified_envelope_j: String,
    s_j: f64,
}

/// Decay log with columns j, rho_j, certified_envelope_j, s_j. The envelope ε^{2ʲ}Pⱼ is
/// printed from its logarithm since it leaves the f64 range.
pub fn decay_csv(decay: &[DecayRow]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in decay {
        w.serialize(CsvRow {
            j: r.j,
            rho_j: r.rho,
            certified_envelope_j: r.log10_envelope.map_or(String::new(), format_pow10),
            s_j: r.s,
        })
        .map_err(|e| CliError::Io(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Io(e.to_string()))
}

pub fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("report serializes") + "\n"
}

pub fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(path)
}
