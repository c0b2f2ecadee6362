//! The quadratic iteration: repeated steps with the parameter schedule, a decay log and the
//! final state from which the torus is read off.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::analytic::{FourierTaylorFunction, FrequencyVector};
use crate::error::{KamError, Result};
use crate::ledger::ConstantLedger;
use crate::measure::{check_theorem1, Theorem1Check};

use super::field::{Field, JetSpace};
use super::schedule::{build_schedule, KamSchedule, ScheduleInputs};
use super::step::{field_from_jets, kam_step, Engine, EngineConfig, StepInput, StepRecord};
use super::system::{jets_at, HamiltonianSystem};

type C = Complex64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    /// Diophantine constant; certified from the frequency when absent.
    pub alpha: Option<f64>,
    pub tau: f64,
    /// Modes checked when certifying α.
    pub k_cert: usize,
    pub s_star: f64,
    /// Inner radii entering the smallness conditions; default ρ/2 and ρ.
    pub rho_hat: Option<f64>,
    pub r_bar: Option<f64>,
    pub j_max: usize,
    /// Stop once the measured perturbation falls below this.
    pub floor_tol: f64,
    /// Run even if the theorem's smallness conditions fail.
    pub override_conditions: bool,
    pub engine: EngineConfig,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            alpha: None,
            tau: 0.0,
            k_cert: 10_000,
            s_star: 0.0,
            rho_hat: None,
            r_bar: None,
            j_max: 10,
            floor_tol: 1e-12,
            override_conditions: false,
            engine: EngineConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayRow {
    pub j: usize,
    /// Measured N(Rⱼ) on (ρ, sⱼ), including all tails dropped so far.
    pub rho: f64,
    pub s: f64,
    /// log₁₀(ε^{2ʲ}Pⱼ); absent without a schedule.
    pub log10_envelope: Option<f64>,
}

/// Iteration state: H∘Φⱼ = Kⱼ(η) + Rⱼ(η, x) with η = y − yⱼ.
pub struct KamState {
    pub j: usize,
    pub anchors: Vec<Vec<f64>>,
    pub k_jet: Vec<C>,
    pub r_spec: Field,
    pub s: f64,
    pub rho: f64,
    pub tail: f64,
    pub steps: Vec<StepRecord>,
}

impl KamState {
    pub fn initial(sys: &HamiltonianSystem, eng: &Engine) -> Result<Self> {
        let js = &eng.js;
        let kj = jets_at(&sys.k, &sys.anchor, &js.idx, js.p)?;
        let mut k_jet = vec![C::default(); js.nj()];
        for (_, jet) in kj {
            for (a, b) in k_jet.iter_mut().zip(jet) {
                *a += b;
            }
        }
        let pj = jets_at(&sys.p, &sys.anchor, &js.idx, js.p)?;
        let (r_spec, tail) = field_from_jets(eng, &pj, sys.epsilon, sys.s);
        let rho = eng.norm(&r_spec, sys.s) + tail;
        Ok(KamState { j: 0, anchors: vec![sys.anchor.clone()], k_jet, r_spec, s: sys.s, rho, tail, steps: vec![] })
    }

    pub fn anchor(&self) -> &[f64] {
        self.anchors.last().unwrap()
    }

    /// Rⱼ as a Fourier-Taylor function around the current anchor.
    pub fn perturbation(&self, eng: &Engine) -> Result<FourierTaylorFunction> {
        let js: &JetSpace = &eng.js;
        let d = js.d;
        let mut f = FourierTaylorFunction::zero(d, self.anchor().to_vec(), eng.r, self.s, js.p, eng.cfg.k_max)?;
        for pt in 0..eng.grid.len {
            if eng.grid.l1[pt] as usize > eng.cfg.k_max {
                continue;
            }
            for (g, c) in self.r_spec.at(pt).iter().enumerate() {
                if *c != C::default() {
                    f.insert(js.idx[g].clone(), eng.grid.kvec[pt].clone(), *c)?;
                }
            }
        }
        f.tail = self.tail;
        Ok(f)
    }
}

pub struct IterationResult {
    pub frequency: FrequencyVector,
    pub theorem1: Theorem1Check,
    pub schedule: Option<KamSchedule>,
    pub engine: Engine,
    pub state: KamState,
    pub decay: Vec<DecayRow>,
    /// Why the loop stopped.
    pub stop: StopReason,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    Floor,
    MaxSteps,
}

pub fn run_iteration(sys: &HamiltonianSystem, opts: &RunOptions, ledger: &ConstantLedger) -> Result<IterationResult> {
    if sys.epsilon > 0.0 && !sys.is_nondegenerate() {
        return Err(KamError::Invalid("K_yy is not invertible on the action ball".into()));
    }
    if !(0.0 < opts.s_star && opts.s_star < sys.s) {
        return Err(KamError::Invalid("need 0 < s_star < s".into()));
    }
    let frequency = match opts.alpha {
        Some(a) => FrequencyVector::with_alpha(sys.omega.clone(), a, opts.tau, opts.k_cert)?,
        None => FrequencyVector::certify(sys.omega.clone(), opts.tau, opts.k_cert)?,
    };
    let alpha = frequency.alpha;
    let r_bar = opts.r_bar.unwrap_or(sys.rho);
    let rho_hat = opts.rho_hat.unwrap_or(0.5 * r_bar);
    let theorem1 = check_theorem1(&sys.system_data(), alpha, rho_hat, r_bar, opts.s_star, ledger)?;
    if !(theorem1.alpha_ok && theorem1.eps_ok) && !opts.override_conditions {
        return Err(KamError::PerturbationNotSmall(sys.epsilon_frak(alpha)));
    }

    let engine = Engine::new(sys.d, sys.omega.clone(), sys.rho, opts.engine.clone());
    let mut state = KamState::initial(sys, &engine)?;
    let schedule = if sys.epsilon > 0.0 {
        let inp = ScheduleInputs {
            d: sys.d,
            epsilon: sys.epsilon,
            m: sys.norms.m,
            l: sys.norms.l,
            p_norm: sys.norms.p_norm,
            alpha,
            rho: sys.rho,
            s: sys.s,
            s_star: opts.s_star,
        };
        Some(build_schedule(&inp, ledger, opts.j_max)?)
    } else {
        None
    };
    let envelope = |j: usize| schedule.as_ref().and_then(|s| s.log10_envelope.get(j).copied());
    let mut decay = vec![DecayRow { j: 0, rho: state.rho, s: state.s, log10_envelope: envelope(0) }];
    let mut stop = StopReason::MaxSteps;

    while let Some(sc) = &schedule {
        if state.rho <= opts.floor_tol {
            stop = StopReason::Floor;
            break;
        }
        if state.j >= opts.j_max {
            break;
        }
        let j = state.j;
        let kappa = sc.kappa[j].floor().min(engine.cfg.k_max as f64) as usize;
        let inp = StepInput {
            j,
            k_jet: &state.k_jet,
            r_spec: &state.r_spec,
            kappa,
            sigma: sc.sigma[j],
            s_in: state.s,
            rho_in: state.rho,
            alpha,
        };
        let out = kam_step(&engine, &inp, ledger)?;
        let rec = out.record;
        let mut next_anchor = state.anchor().to_vec();
        for (a, e) in next_anchor.iter_mut().zip(&rec.eta1) {
            *a += e;
        }
        state.tail += rec.tail_dropped;
        state.rho = rec.rho_out_retained + state.tail;
        state.s = rec.s_out;
        state.k_jet = out.k_jet;
        state.r_spec = out.r_spec;
        state.anchors.push(next_anchor);
        state.steps.push(rec);
        state.j += 1;
        decay.push(DecayRow { j: state.j, rho: state.rho, s: state.s, log10_envelope: envelope(state.j) });
    }
    if schedule.is_none() {
        stop = StopReason::Floor;
    }
    Ok(IterationResult { frequency, theorem1, schedule, engine, state, decay, stop })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    /// Steps whose input residual lay above the floor.
    pub pairs: usize,
    /// Least-squares slope of ln ρⱼ₊₁ against ln ρⱼ; absent with fewer than two pairs.
    pub slope: Option<f64>,
    /// ρⱼ₊₁/ρⱼ² per pair.
    pub c: Vec<f64>,
}

/// Log-log fit of the decay law over consecutive pairs (ρⱼ, ρⱼ₊₁) with ρⱼ above `floor`.
pub fn slope_fit(decay: &[DecayRow], floor: f64) -> SlopeFit {
    let pts: Vec<(f64, f64)> = decay
        .windows(2)
        .filter(|w| w[0].rho > floor && w[1].rho > 0.0)
        .map(|w| (w[0].rho, w[1].rho))
        .collect();
    let c = pts.iter().map(|(a, b)| b / (a * a)).collect();
    let slope = (pts.len() >= 2).then(|| {
        let n = pts.len() as f64;
        let (xs, ys): (Vec<f64>, Vec<f64>) = pts.iter().map(|(a, b)| (a.ln(), b.ln())).unzip();
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        sxy / sxx
    });
    SlopeFit { pairs: pts.len(), slope, c }
}
