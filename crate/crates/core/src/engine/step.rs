//! One Arnold step on jet fields.
//!
//! With H = K(η) + R(η, x) around the current anchor, the generating function
//! S(η', x) = η'·x + g(η', x) solves ω(η)·g_x + T_κ(R − ⟨R⟩) = 0 mode by mode with the
//! η-dependent frequency ω(η) = K_η(η). Then
//!   η = η' + g_x(η', x),   x' = x + g_η(η', x),
//! and H∘φ = K' + R' with K' = K + ⟨R⟩ and R'(η', x') = E(η', x' + w), where
//! E = (R − T_κR) + [K(η'+g_x) − K − ω·g_x] + [R(η'+g_x) − R] and w solves w = −g_η(η', x'+w).
//! Finally η' is recentred at the point η₁ where K'_η(η₁) = ω.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{KamError, Result};
use crate::geometry::{op_norm_inf, quantitative_inverse};
use crate::index::{deg, l1};
use crate::ledger::ConstantLedger;

use super::field::{eta_shift, eta_shift_from, x_shift, Field, Grid, JetSpace};

type C = Complex64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    /// Taylor degree of the jets in η.
    pub degree: usize,
    /// Cap on the Fourier cutoff and on the retained modes of each new perturbation.
    pub k_max: usize,
    /// Points per angle axis; 0 picks the next power of two above 2·k_max + 1.
    pub grid_n: usize,
    /// Relative tolerance of the generating-function fixed point.
    pub fp_tol: f64,
    pub fp_max_iter: usize,
    /// Relative size of the last Taylor order kept in angle shifts.
    pub shift_tol: f64,
    /// Generator coefficients below this modulus are dropped from the stored step maps.
    pub prune_tol: f64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig { degree: 3, k_max: 64, grid_n: 0, fp_tol: 1e-12, fp_max_iter: 50, shift_tol: 1e-17, prune_tol: 1e-22 }
    }
}

pub struct Engine {
    pub cfg: EngineConfig,
    pub js: JetSpace,
    pub grid: Grid,
    pub omega: Vec<f64>,
    /// Action radius used by the measured norms.
    pub r: f64,
}

impl Engine {
    pub fn new(d: usize, omega: Vec<f64>, r: f64, cfg: EngineConfig) -> Self {
        let n = if cfg.grid_n == 0 { (2 * cfg.k_max + 2).next_power_of_two() } else { cfg.grid_n };
        let js = JetSpace::new(d, cfg.degree);
        Engine { grid: Grid::new(d, n), js, omega, r, cfg }
    }

    pub fn d(&self) -> usize {
        self.js.d
    }

    pub fn norm(&self, spec: &Field, s: f64) -> f64 {
        self.grid.norm(&self.js, spec, self.r, s, |_| true)
    }

    /// ∇_η of an angle-independent jet, as d jets.
    fn gradient_jets(&self, k: &[C]) -> Vec<Vec<C>> {
        (0..self.d())
            .map(|i| {
                let mut out = vec![C::default(); self.js.nj()];
                self.js.deriv(k, i, &mut out);
                out
            })
            .collect()
    }

    fn eval_real(&self, jet: &[C], eta: &[f64]) -> f64 {
        let e: Vec<C> = eta.iter().map(|&v| v.into()).collect();
        self.js.eval(jet, &e).re
    }

    pub fn hessian_at(&self, k: &[C], eta: &[f64]) -> DMatrix<f64> {
        let grads = self.gradient_jets(k);
        let d = self.d();
        let mut h = DMatrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                let mut out = vec![C::default(); self.js.nj()];
                self.js.deriv(&grads[i], j, &mut out);
                h[(i, j)] = self.eval_real(&out, eta);
            }
        }
        h
    }

    /// Majorant of the third derivatives of a jet on the sup-ball of radius r, as an
    /// operator-norm bound for the Hessian's Lipschitz constant.
    fn third_derivative_bound(&self, k: &[C], r: f64) -> f64 {
        self.js
            .idx
            .iter()
            .zip(k)
            .filter(|(a, _)| deg(a) >= 3)
            .map(|(a, c)| {
                let n = deg(a) as f64;
                c.norm() * n * (n - 1.0) * (n - 2.0) * r.powi(deg(a) as i32 - 3) * self.d() as f64
            })
            .sum()
    }
}

/// Sparse table of a step's generating function g(η', x) = Σ_k jet_k(η') e^{ik·x}.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub d: usize,
    pub idx: Vec<Vec<u32>>,
    pub modes: Vec<(Vec<i32>, Vec<C>)>,
}

impl Generator {
    /// (g_x, g_η) at a real point.
    pub fn gradients(&self, eta: &[f64], x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let d = self.d;
        let mut gx = vec![0.0; d];
        let mut ge = vec![0.0; d];
        let mono: Vec<f64> = self.idx.iter().map(|a| a.iter().zip(eta).map(|(&e, v)| v.powi(e as i32)).product()).collect();
        for (k, jet) in &self.modes {
            let phase: f64 = k.iter().zip(x).map(|(&a, b)| a as f64 * b).sum();
            let ex = C::from_polar(1.0, phase);
            let val: C = jet.iter().zip(&mono).map(|(c, m)| c * m).sum();
            for i in 0..d {
                gx[i] += (val * ex * C::new(0.0, k[i] as f64)).re;
                let mut dv = C::default();
                for (g, a) in self.idx.iter().enumerate() {
                    if a[i] > 0 {
                        let mut am = a.clone();
                        am[i] -= 1;
                        let m: f64 = am.iter().zip(eta).map(|(&e, v)| v.powi(e as i32)).product();
                        dv += jet[g] * a[i] as f64 * m;
                    }
                }
                ge[i] += (dv * ex).re;
            }
        }
        (gx, ge)
    }

    /// Old coordinates (η, x) of the new point (η', x'): x = x' + w with w = −g_η(η', x' + w),
    /// then η = η' + g_x(η', x).
    pub fn pull_back(&self, eta_new: &[f64], x_new: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let d = self.d;
        let mut x = x_new.to_vec();
        for it in 0..100 {
            let (_, ge) = self.gradients(eta_new, &x);
            let next: Vec<f64> = (0..d).map(|i| x_new[i] - ge[i]).collect();
            let diff = next.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            x = next;
            if diff <= 1e-16 * (1.0 + x.iter().fold(0.0f64, |m, v| m.max(v.abs()))) {
                break;
            }
            if it == 99 {
                return Err(KamError::FixedPointDivergence("pointwise generating-function inversion".into()));
            }
        }
        let (gx, _) = self.gradients(eta_new, &x);
        let eta: Vec<f64> = (0..d).map(|i| eta_new[i] + gx[i]).collect();
        Ok((eta, x))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub j: usize,
    pub kappa: usize,
    pub sigma: f64,
    pub s_in: f64,
    pub s_out: f64,
    pub rho_in: f64,
    /// N(R') on (r, s_out) for the retained modes.
    pub rho_out_retained: f64,
    /// Norm of the modes dropped above k_max at this step.
    pub tail_dropped: f64,
    /// Recentring shift η₁, i.e. G(yⱼ) − yⱼ.
    pub eta1: Vec<f64>,
    pub generator_norm: f64,
    pub fp_iterations: usize,
    pub fp_last_change: f64,
    /// max over solved modes of |ω(η)·g_x + T_κR̃| in jet coefficients.
    pub homological_defect: f64,
    /// |K'_η(η₁) − ω|∞
    pub frequency_defect: f64,
    /// ε℘ ≤ σ/3 evaluated with measured norms.
    pub smallness_ok: bool,
    pub smallness_lhs: f64,
    pub smallness_rhs: f64,
    pub inverse_lambda: f64,
    pub generator: Generator,
}

/// Measured counterpart of the step's smallness condition ε℘ ≤ σ/3, with εP replaced by ρ.
#[allow(clippy::too_many_arguments)]
pub fn step_smallness(
    rho: f64,
    m: f64,
    l: f64,
    alpha: f64,
    sigma: f64,
    r: f64,
    d: usize,
    ledger: &ConstantLedger,
) -> (bool, f64, f64) {
    let nu = ledger.nu;
    let df = d as f64;
    let rhs = sigma / 3.0;
    if rho == 0.0 {
        return (true, 0.0, rhs);
    }
    let lam = (sigma.powf(2.0 * nu + df) * alpha * alpha / (rho * m)).ln();
    if !(lam >= 1.0) {
        return (false, f64::INFINITY, rhs);
    }
    let kappa = 4.0 * lam / sigma;
    let r_check = r / (32.0 * df * l * m);
    let r_bar = (alpha / (2.0 * df * m * kappa.powf(nu))).min(r_check);
    let wp = (16.0 * l / (r * r_bar) * sigma.powf(-(nu + df))).max(ledger.c[4] / (alpha * r_bar) * sigma.powf(-2.0 * (nu + df)));
    let lhs = rho * wp;
    (lhs <= rhs, lhs, rhs)
}

pub struct StepInput<'a> {
    pub j: usize,
    pub k_jet: &'a [C],
    pub r_spec: &'a Field,
    pub kappa: usize,
    pub sigma: f64,
    pub s_in: f64,
    pub rho_in: f64,
    pub alpha: f64,
}

pub struct StepOutput {
    pub k_jet: Vec<C>,
    pub r_spec: Field,
    pub record: StepRecord,
}

pub fn kam_step(eng: &Engine, inp: &StepInput, ledger: &ConstantLedger) -> Result<StepOutput> {
    let (js, grid) = (&eng.js, &eng.grid);
    let d = eng.d();
    let nj = js.nj();
    let kappa = inp.kappa.min(eng.cfg.k_max);

    let h0 = eng.hessian_at(inp.k_jet, &vec![0.0; d]);
    let m_meas = op_norm_inf(&h0);
    let l_meas = h0.clone().try_inverse().map(|t| op_norm_inf(&t)).unwrap_or(f64::INFINITY);
    let (smallness_ok, smallness_lhs, smallness_rhs) =
        step_smallness(inp.rho_in, m_meas, l_meas, inp.alpha, inp.sigma, eng.r, d, ledger);

    // split R into average, solved band and high modes
    let avg: Vec<C> = inp.r_spec.at(0).to_vec();
    let mut r_tilde = inp.r_spec.clone();
    r_tilde.data[..nj].iter_mut().for_each(|v| *v = C::default());
    let r_lo = grid.low_pass(&r_tilde, kappa);
    let r_hi = r_tilde.sub(&r_lo);

    let om = eng.gradient_jets(inp.k_jet);
    let mut g = Field::zeros(nj, grid.len);
    let resonant = std::sync::Mutex::new(None);
    g.data.par_chunks_mut(nj).enumerate().for_each(|(pt, out)| {
        let n = grid.l1[pt] as usize;
        if n == 0 || n > kappa {
            return;
        }
        let k = &grid.kvec[pt];
        let mut c = vec![C::default(); nj];
        for i in 0..d {
            for (cg, og) in c.iter_mut().zip(&om[i]) {
                *cg += og * C::new(0.0, k[i] as f64);
            }
        }
        if c[0].norm() == 0.0 {
            *resonant.lock().unwrap() = Some(k.clone());
            return;
        }
        let neg: Vec<C> = r_lo.at(pt).iter().map(|v| -v).collect();
        js.div(&neg, &c, out);
    });
    if let Some(k) = resonant.into_inner().unwrap() {
        return Err(KamError::ResonantFrequency(k));
    }

    // ω(η)·g_x + T_κR̃ should vanish jetwise
    let mut hom_defect: f64 = 0.0;
    for pt in 0..grid.len {
        let n = grid.l1[pt] as usize;
        if n == 0 || n > kappa {
            continue;
        }
        let k = &grid.kvec[pt];
        let mut acc = r_lo.at(pt).to_vec();
        let mut tmp = vec![C::default(); nj];
        for i in 0..d {
            let ik: Vec<C> = g.at(pt).iter().map(|v| v * C::new(0.0, k[i] as f64)).collect();
            js.mul(&om[i], &ik, &mut tmp);
            for (a, t) in acc.iter_mut().zip(&tmp) {
                *a += t;
            }
        }
        hom_defect = hom_defect.max(acc.iter().map(|v| v.norm()).fold(0.0, f64::max));
    }

    let gx: Vec<Field> = (0..d).map(|i| grid.to_physical(&grid.dx(&g, i)).real_part()).collect();
    let gy: Vec<Field> = (0..d).map(|i| grid.to_physical(&g.deriv(js, i)).real_part()).collect();
    let k_field = Field::broadcast(inp.k_jet, grid.len);
    let r_phys = grid.to_physical(inp.r_spec);

    let q = eta_shift_from(js, &k_field, &gx, 2).add(&eta_shift(js, &r_phys, &gx));
    let e_spec = r_hi.add(&grid.to_spectral(&q));

    // w = −g_η(η', x' + w)
    let gy_spec: Vec<Field> = gy.iter().map(|f| grid.to_spectral(f)).collect();
    let mut w: Vec<Field> = gy.iter().map(|f| f.scale(-1.0)).collect();
    let mut fp_iterations = 0;
    let mut last_change = 0.0;
    let w_scale = w.iter().map(|f| f.max_abs()).fold(0.0, f64::max);
    if w_scale > 0.0 {
        let mut converged = false;
        for it in 1..=eng.cfg.fp_max_iter {
            let next: Vec<Field> = gy_spec
                .iter()
                .map(|f| x_shift(grid, js, f, &w, eng.cfg.shift_tol, 60).real_part().scale(-1.0))
                .collect();
            last_change = next.iter().zip(&w).map(|(a, b)| a.sub(b).max_abs()).fold(0.0, f64::max);
            w = next;
            fp_iterations = it;
            if last_change <= eng.cfg.fp_tol * w_scale {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(KamError::FixedPointDivergence(format!(
                "generating function: change {last_change:.3e} after {} iterations",
                eng.cfg.fp_max_iter
            )));
        }
    }

    let r_new_phys = if w_scale > 0.0 { x_shift(grid, js, &e_spec, &w, eng.cfg.shift_tol, 60) } else { grid.to_physical(&e_spec) };
    let r_new_full = grid.to_spectral(&r_new_phys.real_part());
    let s_out = inp.s_in - inp.sigma;
    // coefficients at rounding level carry no truncated content
    let noise = 64.0 * f64::EPSILON * r_new_full.max_abs();
    let mut above = r_new_full.clone();
    above.data.iter_mut().filter(|c| c.norm() <= noise).for_each(|c| *c = C::default());
    let tail_dropped = grid.norm(js, &above, eng.r, s_out, |n| n as usize > eng.cfg.k_max);
    let r_new = grid.low_pass(&r_new_full, eng.cfg.k_max);

    // K' = K + ⟨R⟩, then find η₁ with K'_η(η₁) = ω by the quantitative inverse
    let k_new: Vec<C> = inp.k_jet.iter().zip(&avg).map(|(a, b)| C::new((a + b).re, 0.0)).collect();
    let grads = eng.gradient_jets(&k_new);
    let ball = 0.5 * eng.r;
    let hess_bound = eng.third_derivative_bound(&k_new, ball);
    let f = |eta: &[f64]| grads.iter().map(|g| eng.eval_real(g, eta)).collect::<Vec<f64>>();
    let qi = quantitative_inverse(f, |eta: &[f64]| eng.hessian_at(&k_new, eta), &vec![0.0; d], ball, 5, hess_bound)?;
    let eta1 = qi.invert(&eng.omega)?;
    let frequency_defect = grads
        .iter()
        .zip(&eng.omega)
        .map(|(g, w)| (eng.eval_real(g, &eta1) - w).abs())
        .fold(0.0, f64::max);

    let mut k_out = vec![C::default(); nj];
    js.translate(&k_new, &eta1, &mut k_out);
    let r_out = r_new.translate(js, &eta1);
    let rho_out_retained = eng.norm(&r_out, s_out);

    let generator_norm = eng.norm(&g, inp.s_in);
    let mut modes = Vec::new();
    for pt in 0..grid.len {
        let jet = g.at(pt);
        if jet.iter().any(|c| c.norm() > eng.cfg.prune_tol) {
            modes.push((grid.kvec[pt].clone(), jet.to_vec()));
        }
    }
    let generator = Generator { d, idx: js.idx.clone(), modes };

    Ok(StepOutput {
        k_jet: k_out,
        r_spec: r_out,
        record: StepRecord {
            j: inp.j,
            kappa,
            sigma: inp.sigma,
            s_in: inp.s_in,
            s_out,
            rho_in: inp.rho_in,
            rho_out_retained,
            tail_dropped,
            eta1,
            generator_norm,
            fp_iterations,
            fp_last_change: last_change,
            homological_defect: hom_defect,
            frequency_defect,
            smallness_ok,
            smallness_lhs,
            smallness_rhs,
            inverse_lambda: qi.lambda,
            generator,
        },
    })
}

/// Spectral jet field of an exactly represented function around an anchor; modes that do
/// not fit the grid or exceed k_max are returned as a dropped-norm tail.
pub fn field_from_jets(eng: &Engine, jets: &[(Vec<i32>, Vec<C>)], scale: f64, s: f64) -> (Field, f64) {
    let mut f = Field::zeros(eng.js.nj(), eng.grid.len);
    let mut tail = 0.0;
    for (k, jet) in jets {
        let slot = eng.grid.slot(k).filter(|_| l1(k) as usize <= eng.cfg.k_max);
        match slot {
            Some(pt) => {
                for (g, c) in jet.iter().enumerate() {
                    f.data[pt * eng.js.nj() + g] += c * scale;
                }
            }
            None => {
                tail += jet
                    .iter()
                    .zip(&eng.js.idx)
                    .map(|(c, a)| (c * scale).norm() * eng.r.powi(deg(a) as i32))
                    .sum::<f64>()
                    * (l1(k) as f64 * s).exp();
            }
        }
    }
    (f, tail)
}
