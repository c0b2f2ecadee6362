//! The four workflows.

use std::path::{Path, PathBuf};

use kamcert_core::engine::torus::{
    action_shift_check, conjugacy_residual, flow_drift, frequency_defect, kolmogorov_check, symplecticity_defect,
    torus_grid, transformed_hamiltonian_defect,
};
use kamcert_core::engine::{run_iteration, slope_fit, IterationResult};
use kamcert_core::geometry::{
    covering_bound, greedy_internal_cover, minimal_cover_oracle, quantitative_inverse, sup_dist, surface_properties,
    tube_volume_bound, unit_ball_volume, DomainSpec, SurfaceSpec,
};
use kamcert_core::ledger::build_ledger;
use kamcert_core::measure::{check_theorem1, general_case_bound, smooth_case_bound, DetSampler, Outcome as Applicability, SystemData};
use kamcert_core::{FrequencyVector, KamError};
use serde::Serialize;

use crate::config::{GeometryTask, Mode, RunConfig};
use crate::report::*;
use crate::{CliError, GeometryOp, Outcome};

fn out_dir(cfg: &RunConfig) -> Option<PathBuf> {
    cfg.out_dir.as_ref().map(PathBuf::from)
}

fn done(code: i32, stdout: String, files: Vec<PathBuf>) -> Result<Outcome, CliError> {
    Ok(Outcome { code, stdout, files })
}

pub fn constants(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let d = cfg.d.ok_or_else(|| CliError::Usage("constants needs --d".into()))?;
    if d < 2 {
        return Err(CliError::Usage("d must be at least 2".into()));
    }
    let ledger = build_ledger(d, cfg.tau)?;
    let json = to_json(&ledger);
    let md = ledger.to_markdown();
    let mut files = Vec::new();
    if let Some(dir) = out_dir(cfg) {
        files.push(write_file(&dir, "constants.json", &json)?);
        files.push(write_file(&dir, "constants.md", &md)?);
    }
    done(0, if cfg.json { json } else { md }, files)
}

/// Center and sup-radius of the region the measure bound ranges over.
fn region(cfg: &RunConfig) -> Result<(Vec<f64>, f64), CliError> {
    match cfg.mode {
        Mode::Smooth => {
            let s = cfg.surface.as_ref().ok_or_else(|| CliError::Usage("smooth mode requires canonical surface".into()))?;
            Ok((s.center().to_vec(), s.outer_radius()))
        }
        Mode::General => {
            let dom = cfg.domain.as_ref().ok_or_else(|| CliError::Usage("general mode requires a domain".into()))?;
            Ok(match dom {
                DomainSpec::Box { lo, hi } => (
                    lo.iter().zip(hi).map(|(a, b)| 0.5 * (a + b)).collect(),
                    lo.iter().zip(hi).map(|(a, b)| 0.5 * (b - a)).fold(0.0, f64::max),
                ),
                DomainSpec::Ball { center, radius } => (center.clone(), *radius),
                DomainSpec::Points { points } => {
                    let d = points[0].len();
                    let lo: Vec<f64> = (0..d).map(|i| points.iter().map(|p| p[i]).fold(f64::INFINITY, f64::min)).collect();
                    let hi: Vec<f64> = (0..d).map(|i| points.iter().map(|p| p[i]).fold(f64::NEG_INFINITY, f64::max)).collect();
                    (
                        lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect(),
                        lo.iter().zip(&hi).map(|(a, b)| 0.5 * (b - a)).fold(0.0, f64::max),
                    )
                }
            })
        }
    }
}

fn frequency(cfg: &RunConfig, omega: Vec<f64>) -> Result<(FrequencyVector, String), CliError> {
    Ok(match cfg.alpha {
        Some(a) => (FrequencyVector::with_alpha(omega, a, cfg.tau, cfg.k_cert)?, "given".into()),
        None => (FrequencyVector::certify(omega, cfg.tau, cfg.k_cert)?, format!("certified over |k|_1 <= {}", cfg.k_cert)),
    })
}

/// Norms are taken over the sup-ball around the region that contains every lattice the
/// bounds sample, so M, L and 𝖯 hold on the whole neighbourhood of the domain.
pub fn certify(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let spec = cfg.system()?;
    let d = cfg.dim()?;
    let ledger = build_ledger(d, cfg.tau)?;
    let (center, radius) = region(cfg)?;
    if let (Mode::Smooth, Some(DomainSpec::Box { .. })) = (cfg.mode, &cfg.domain) {
        return Err(CliError::Usage("smooth mode requires canonical surface".into()));
    }
    let big = radius + (d as f64).sqrt() * cfg.rho;
    let sys = spec.build(cfg.epsilon, &center, big, cfg.s)?;
    if !sys.norms.l.is_finite() {
        return Err(CliError::Core(KamError::HessianSampling(
            "K_yy is not uniformly invertible on the neighbourhood of the domain".into(),
        )));
    }
    let data = SystemData {
        d,
        m: sys.norms.m,
        l: sys.norms.l,
        p_norm: sys.norms.p_norm,
        epsilon: cfg.epsilon,
        rho: cfg.rho,
        s: cfg.s,
    };
    let anchor = spec.anchor()?;
    let omega = sys.frequency(&anchor);
    let (freq, alpha_source) = frequency(cfg, omega.clone())?;
    let (rho_hat, r_bar) = (cfg.rho_hat.expect("normalized"), cfg.r_bar.expect("normalized"));
    let theorem1 = check_theorem1(&data, freq.alpha, rho_hat, r_bar, cfg.s_star, &ledger)?;
    let det = |y: &[f64]| sys.k_hessian(y).determinant();
    let sampler = DetSampler {
        det: &det,
        lip: sys.det_lipschitz(&center, big),
        per_axis: cfg.lattice_per_axis.expect("normalized"),
    };
    let measure = match cfg.mode {
        Mode::General => general_case_bound(&data, cfg.domain.as_ref().expect("checked"), &sampler, cfg.s_star, &ledger)?,
        Mode::Smooth => smooth_case_bound(&data, cfg.surface.as_ref().expect("checked"), &sampler, cfg.s_star, &ledger)?,
    };
    let inequalities = vec![
        Inequality::le("alpha <= c0 rho_hat / L", theorem1.alpha, theorem1.alpha_limit),
        Inequality::le("epsilon M P / alpha^2 <= epsilon_star", theorem1.epsilon_frak, theorem1.epsilon_star_frak),
        Inequality::lt("epsilon < epsilon_star_actions", measure.epsilon, measure.epsilon_star_actions),
        Inequality::lt("0 < delta0 = lattice min |det K_yy| - margin", 0.0, measure.delta0.value),
    ];
    let applicable = inequalities.iter().all(|q| q.holds) && measure.outcome == Applicability::Bound;
    let report = CertifyReport {
        mode: measure.mode.clone(),
        anchor,
        omega,
        alpha: freq.alpha,
        alpha_source,
        theorem1,
        measure,
        inequalities,
        applicable,
    };
    let json = to_json(&report);
    let mut files = Vec::new();
    if let Some(dir) = out_dir(cfg) {
        files.push(write_file(&dir, "certify.json", &json)?);
    }
    let stdout = if cfg.json {
        json
    } else if cfg.markdown {
        report.markdown()
    } else {
        report.text()
    };
    done(if applicable { 0 } else { 2 }, stdout, files)
}

pub fn iterate(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let spec = cfg.system()?;
    let d = cfg.dim()?;
    let ledger = build_ledger(d, cfg.tau)?;
    let anchor = spec.anchor()?;
    let sys = spec.build(cfg.epsilon, &anchor, cfg.rho, cfg.s)?;
    let res: IterationResult = match run_iteration(&sys, &cfg.run_options(), &ledger) {
        Ok(r) => r,
        Err(KamError::PerturbationNotSmall(e)) => {
            let msg = format!(
                "smallness conditions fail (epsilon_frak = {e:e}); not iterating. Set override_conditions to run anyway.\n"
            );
            return done(2, msg, vec![]);
        }
        Err(e) => return Err(e.into()),
    };
    let initial = InitialNorms {
        anchor: anchor.clone(),
        omega: sys.omega.clone(),
        m: sys.norms.m,
        l: sys.norms.l,
        p_norm: sys.norms.p_norm,
        theta: sys.norms.theta,
        rho0: res.decay[0].rho,
    };
    let fit = slope_fit(&res.decay, cfg.floor_tol);
    let grid_n = cfg.torus_grid;
    let (checks, torus) = if cfg.j_max == 0 {
        (None, None)
    } else {
        let samples = torus_grid(&res, &sys, grid_n)?;
        let x0 = vec![0.3; d];
        let checks = TorusChecks {
            conjugacy_residual: conjugacy_residual(&samples),
            flow_drift: flow_drift(&res, &sys, &x0, cfg.flow_t_end, 0.1, cfg.flow_tol)?,
            kolmogorov: kolmogorov_check(&res, &sys, cfg.kolmogorov_grid, 1e-3)?,
            symplecticity_defect: symplecticity_defect(&res, cfg.symplectic_points, 0.5 * cfg.rho.min(0.02), 1e-6, cfg.seed)?,
            transformed_hamiltonian_defect: transformed_hamiltonian_defect(&res, &sys)?,
            frequency_defect: frequency_defect(&res),
            action_shift: action_shift_check(&res, &sys, cfg.s_star, &ledger),
        };
        (Some(checks), Some(samples))
    };
    let summary = IterateSummary {
        d,
        epsilon: cfg.epsilon,
        tau: cfg.tau,
        alpha: res.frequency.alpha,
        s: cfg.s,
        s_star: cfg.s_star,
        rho: cfg.rho,
        k_max: cfg.k_max,
        grid_n: res.engine.grid.n,
        initial,
        theorem1: res.theorem1.clone(),
        schedule: res.schedule.as_ref().map(|s| ScheduleSummary {
            epsilon0: s.epsilon0,
            eps_hat0: s.eps_hat0,
            first_step_ok: s.first_step_ok,
        }),
        steps: res.state.j,
        stop: res.stop,
        final_rho: res.state.rho,
        floor_tol: cfg.floor_tol,
        slope_fit: fit,
        torus_anchor: res.state.anchor().to_vec(),
        checks,
        step_log: res.state.steps.iter().map(StepSummary::from).collect(),
    };
    let mut files = Vec::new();
    let json = to_json(&summary);
    if let Some(dir) = out_dir(cfg) {
        files.push(write_file(&dir, "decay.csv", &decay_csv(&res.decay)?)?);
        if let Some(samples) = &torus {
            let doc = TorusDocument { d, n: grid_n, omega: &sys.omega, samples };
            files.push(write_file(&dir, "torus.json", &to_json(&doc))?);
        }
        files.push(write_file(&dir, "summary.json", &json)?);
    }
    done(0, if cfg.json { json } else { summary.text(&res.decay) }, files)
}

#[derive(Serialize)]
struct CoverReport {
    op: &'static str,
    points: usize,
    pitch: f64,
    r: f64,
    greedy_count: usize,
    centers: Vec<Vec<f64>>,
    covering_bound: u64,
    oracle_count: Option<usize>,
}

#[derive(Serialize)]
struct TubeReport {
    op: &'static str,
    rho: f64,
    curvature_kappa: f64,
    minfoc: f64,
    area: f64,
    max_section: f64,
    bound: f64,
    /// Exact shell volume, for spheres.
    exact: Option<f64>,
}

#[derive(Serialize)]
struct InvertPoint {
    target: Vec<f64>,
    y: Option<Vec<f64>>,
    residual: Option<f64>,
    error: Option<String>,
}

#[derive(Serialize)]
struct InvertReport {
    op: &'static str,
    lambda: f64,
    rho: f64,
    varrho: f64,
    t_norm: f64,
    f_y0: Vec<f64>,
    results: Vec<InvertPoint>,
}

pub fn geometry(cfg: &RunConfig, op: GeometryOp) -> Result<Outcome, CliError> {
    let task = cfg.geometry.as_ref().ok_or_else(|| CliError::Usage("config has no geometry task".into()))?;
    let want = match op {
        GeometryOp::Cover => "cover",
        GeometryOp::Tube => "tube",
        GeometryOp::Invert => "invert",
    };
    if task.op() != want {
        return Err(CliError::Usage(format!("config describes a {} task, not {want}", task.op())));
    }
    let json = match task {
        GeometryTask::Cover { domain, r, per_axis, oracle } => {
            domain.validate()?;
            if !(*r > 0.0) {
                return Err(CliError::Usage("cover radius must be positive".into()));
            }
            let (pts, pitch) = domain.lattice(*per_axis);
            let greedy = greedy_internal_cover(&pts, *r);
            let oracle_count = if *oracle { Some(minimal_cover_oracle(&pts, *r)?) } else { None };
            to_json(&CoverReport {
                op: "cover",
                points: pts.len(),
                pitch,
                r: *r,
                greedy_count: greedy.len(),
                centers: greedy.iter().map(|&i| pts[i].clone()).collect(),
                covering_bound: covering_bound(domain.diameter(), *r, domain.dim()),
                oracle_count,
            })
        }
        GeometryTask::Tube { surface, rho } => {
            let props = surface_properties(surface)?;
            let bound = tube_volume_bound(surface, *rho)?;
            let exact = match surface {
                SurfaceSpec::Sphere { center, radius } => {
                    let n = center.len() as i32;
                    Some(unit_ball_volume(center.len()) * ((radius + rho).powi(n) - (radius - rho).powi(n)))
                }
                SurfaceSpec::Ellipsoid { .. } => None,
            };
            to_json(&TubeReport {
                op: "tube",
                rho: *rho,
                curvature_kappa: props.curvature_kappa,
                minfoc: props.minfoc,
                area: props.area,
                max_section: props.max_section,
                bound,
                exact,
            })
        }
        GeometryTask::Invert { y0, r, samples, targets } => {
            let spec = cfg.system()?;
            let sys = spec.build(0.0, y0, *r, cfg.s)?;
            let hess_bound = sys.hessian_bounds(y0, *r).1;
            let qi = quantitative_inverse(|y: &[f64]| sys.frequency(y), |y: &[f64]| sys.k_hessian(y), y0, *r, *samples, hess_bound)?;
            let results = targets
                .iter()
                .map(|t| match qi.invert(t) {
                    Ok(y) => InvertPoint {
                        residual: Some(sup_dist(&sys.frequency(&y), t)),
                        y: Some(y),
                        target: t.clone(),
                        error: None,
                    },
                    Err(e) => InvertPoint { target: t.clone(), y: None, residual: None, error: Some(e.to_string()) },
                })
                .collect();
            to_json(&InvertReport {
                op: "invert",
                lambda: qi.lambda,
                rho: qi.rho,
                varrho: qi.varrho,
                t_norm: qi.t_norm,
                f_y0: qi.f_y0.clone(),
                results,
            })
        }
    };
    let mut files = Vec::new();
    if let Some(dir) = out_dir(cfg) {
        files.push(write_file(Path::new(&dir), &format!("geometry-{want}.json"), &json)?);
    }
    done(0, json, files)
}
