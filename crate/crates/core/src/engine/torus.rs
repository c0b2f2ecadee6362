//! Reading off the invariant torus from the composed step maps, and the checks run on it.

use nalgebra::DMatrix;
use ode_solvers::{DVector, Dop853, System};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{KamError, Result};
use crate::ledger::ConstantLedger;

use super::field::JetSpace;
use super::iterate::IterationResult;
use super::system::HamiltonianSystem;

/// Φ_J(ζ, x): original coordinates (Y, X) of the point with action offset ζ from the final
/// anchor and angle x.
pub fn compose_back(res: &IterationResult, zeta: &[f64], x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let st = &res.state;
    let mut z = zeta.to_vec();
    let mut ang = x.to_vec();
    for rec in st.steps.iter().rev() {
        let eta_new: Vec<f64> = z.iter().zip(&rec.eta1).map(|(a, b)| a + b).collect();
        let (eta, xo) = rec.generator.pull_back(&eta_new, &ang)?;
        z = eta;
        ang = xo;
    }
    let y: Vec<f64> = st.anchors[0].iter().zip(&z).map(|(a, b)| a + b).collect();
    Ok((y, ang))
}

/// φ*(x) = Φ_J(0, x).
pub fn embedding(res: &IterationResult, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    compose_back(res, &vec![0.0; res.state.anchors[0].len()], x)
}

fn angle_grid(d: usize, n: usize) -> Vec<Vec<f64>> {
    let tau = 2.0 * std::f64::consts::PI;
    let total = n.pow(d as u32);
    (0..total)
        .map(|mut i| {
            (0..d)
                .map(|_| {
                    let v = (i % n) as f64 * tau / n as f64;
                    i /= n;
                    v
                })
                .collect()
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusSample {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub x_image: Vec<f64>,
    pub energy: f64,
}

/// φ* on an n^d angle grid with the energy at each point.
pub fn torus_grid(res: &IterationResult, sys: &HamiltonianSystem, n: usize) -> Result<Vec<TorusSample>> {
    angle_grid(sys.d, n)
        .into_par_iter()
        .map(|x| {
            let (y, xi) = embedding(res, &x)?;
            let energy = sys.energy(&y, &xi);
            Ok(TorusSample { x, y, x_image: xi, energy })
        })
        .collect()
}

/// Oscillation max H∘φ* − min H∘φ* over the grid.
pub fn conjugacy_residual(samples: &[TorusSample]) -> f64 {
    let (lo, hi) = samples.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| (lo.min(s.energy), hi.max(s.energy)));
    hi - lo
}

struct HamiltonFlow<'a> {
    sys: &'a HamiltonianSystem,
}

impl System<f64, DVector<f64>> for HamiltonFlow<'_> {
    fn system(&self, _t: f64, z: &DVector<f64>, dz: &mut DVector<f64>) {
        let d = self.sys.d;
        let (hy, hx) = self.sys.gradient(&z.as_slice()[..d], &z.as_slice()[d..]);
        for i in 0..d {
            dz[i] = -hx[i];
            dz[d + i] = hy[i];
        }
    }
}

fn angle_diff(a: f64, b: f64) -> f64 {
    let tau = 2.0 * std::f64::consts::PI;
    let r = (a - b).rem_euclid(tau);
    r.min(tau - r)
}

/// sup over t ∈ [0, t_end] of the distance between the Hamiltonian flow started on φ*(x₀)
/// and φ*(x₀ + ωt); actions in sup norm, angles modulo 2π.
pub fn flow_drift(res: &IterationResult, sys: &HamiltonianSystem, x0: &[f64], t_end: f64, dt: f64, tol: f64) -> Result<f64> {
    let d = sys.d;
    let (y0, xi0) = embedding(res, x0)?;
    let mut init = DVector::zeros(2 * d);
    for i in 0..d {
        init[i] = y0[i];
        init[d + i] = xi0[i];
    }
    let mut solver = Dop853::new(HamiltonFlow { sys }, 0.0, t_end, dt, init, tol, tol);
    solver.integrate().map_err(|e| KamError::Invalid(format!("flow integration failed: {e:?}")))?;
    let mut worst: f64 = 0.0;
    for (t, z) in solver.x_out().iter().zip(solver.y_out()) {
        let xt: Vec<f64> = x0.iter().zip(&sys.omega).map(|(a, w)| a + w * t).collect();
        let (y, xi) = embedding(res, &xt)?;
        for i in 0..d {
            worst = worst.max((z[i] - y[i]).abs()).max(angle_diff(z[d + i], xi[i]));
        }
    }
    Ok(worst)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KolmogorovCheck {
    pub hessian: Vec<Vec<f64>>,
    pub det: f64,
    pub ok: bool,
}

/// Angle-averaged Hessian in the action offset of H∘Φ_J(ζ, x) at ζ = 0, by central
/// differences with one Richardson extrapolation.
pub fn kolmogorov_check(res: &IterationResult, sys: &HamiltonianSystem, n: usize, h: f64) -> Result<KolmogorovCheck> {
    let d = sys.d;
    let grid = angle_grid(d, n);
    let avg = |zeta: &[f64]| -> Result<f64> {
        let vals: Result<Vec<f64>> = grid
            .par_iter()
            .map(|x| {
                let (y, xi) = compose_back(res, zeta, x)?;
                Ok(sys.energy(&y, &xi))
            })
            .collect();
        Ok(vals?.iter().sum::<f64>() / grid.len() as f64)
    };
    let hess = |h: f64| -> Result<DMatrix<f64>> {
        let mut m = DMatrix::zeros(d, d);
        let e0 = avg(&vec![0.0; d])?;
        for i in 0..d {
            for j in i..d {
                let v = if i == j {
                    let mut p = vec![0.0; d];
                    p[i] = h;
                    let mut q = vec![0.0; d];
                    q[i] = -h;
                    (avg(&p)? - 2.0 * e0 + avg(&q)?) / (h * h)
                } else {
                    let mut acc = 0.0;
                    for (si, sj, sg) in [(1.0, 1.0, 1.0), (1.0, -1.0, -1.0), (-1.0, 1.0, -1.0), (-1.0, -1.0, 1.0)] {
                        let mut p = vec![0.0; d];
                        p[i] = si * h;
                        p[j] = sj * h;
                        acc += sg * avg(&p)?;
                    }
                    acc / (4.0 * h * h)
                };
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        Ok(m)
    };
    let coarse = hess(h)?;
    let fine = hess(h / 2.0)?;
    let q = (fine * 4.0 - coarse) / 3.0;
    let det = q.determinant();
    let scale = q.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    Ok(KolmogorovCheck {
        hessian: (0..d).map(|i| (0..d).map(|j| q[(i, j)]).collect()).collect(),
        det,
        ok: det.abs() > 1e-8 * scale.powi(d as i32),
    })
}

/// max over random points of ‖JᵀΩJ − Ω‖ for the composed map (ζ, x) ↦ Φ_J(ζ, x), with J by
/// central differences.
pub fn symplecticity_defect(res: &IterationResult, points: usize, zeta_radius: f64, h: f64, seed: u64) -> Result<f64> {
    let d = res.state.anchors[0].len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tau = 2.0 * std::f64::consts::PI;
    let pts: Vec<Vec<f64>> = (0..points)
        .map(|_| {
            (0..2 * d)
                .map(|i| if i < d { rng.random_range(-zeta_radius..=zeta_radius) } else { rng.random_range(0.0..tau) })
                .collect()
        })
        .collect();
    let mut omega = DMatrix::zeros(2 * d, 2 * d);
    for i in 0..d {
        omega[(i, d + i)] = 1.0;
        omega[(d + i, i)] = -1.0;
    }
    let eval = |z: &[f64]| -> Result<Vec<f64>> {
        let (y, x) = compose_back(res, &z[..d], &z[d..])?;
        Ok(y.into_iter().chain(x).collect())
    };
    let defects: Result<Vec<f64>> = pts
        .par_iter()
        .map(|p| {
            let mut jac = DMatrix::zeros(2 * d, 2 * d);
            for c in 0..2 * d {
                let mut a = p.clone();
                a[c] += h;
                let mut b = p.clone();
                b[c] -= h;
                let (fa, fb) = (eval(&a)?, eval(&b)?);
                for r in 0..2 * d {
                    jac[(r, c)] = (fa[r] - fb[r]) / (2.0 * h);
                }
            }
            let m = jac.transpose() * &omega * &jac - &omega;
            Ok(m.iter().fold(0.0f64, |acc, v| acc.max(v.abs())))
        })
        .collect();
    Ok(defects?.into_iter().fold(0.0, f64::max))
}

/// max over the engine grid of |H(Φ_J(0, x)) − K_J(0) − R_J(0, x)|: the composed maps
/// evaluated directly against the transformed Hamiltonian carried by the iteration.
pub fn transformed_hamiltonian_defect(res: &IterationResult, sys: &HamiltonianSystem) -> Result<f64> {
    let eng = &res.engine;
    let st = &res.state;
    let phys = eng.grid.to_physical(&st.r_spec);
    let nj = eng.js.nj();
    let k0 = st.k_jet[0].re;
    let defects: Result<Vec<f64>> = (0..eng.grid.len)
        .into_par_iter()
        .map(|pt| {
            let x = eng.grid.angle(pt);
            let (y, xi) = embedding(res, &x)?;
            Ok((sys.energy(&y, &xi) - k0 - phys.data[pt * nj].re).abs())
        })
        .collect();
    Ok(defects?.into_iter().fold(0.0, f64::max))
}

/// |∇K_J(0) − ω|∞.
pub fn frequency_defect(res: &IterationResult) -> f64 {
    let js: &JetSpace = &res.engine.js;
    (0..js.d).map(|i| (res.state.k_jet[js.unit(i)].re - res.engine.omega[i]).abs()).fold(0.0, f64::max)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionShiftCheck {
    /// |y* − y₀|∞
    pub shift: f64,
    /// c₁(s − s*)^ν θ² ε𝖯/α
    pub bound: f64,
    pub ok: bool,
}

pub fn action_shift_check(res: &IterationResult, sys: &HamiltonianSystem, s_star: f64, ledger: &ConstantLedger) -> ActionShiftCheck {
    let st = &res.state;
    let shift =
        st.anchor().iter().zip(&st.anchors[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let n = &sys.norms;
    let bound = ledger.c1 * (sys.s - s_star).powf(ledger.nu) * n.theta * n.theta * sys.epsilon * n.p_norm / res.frequency.alpha;
    ActionShiftCheck { shift, bound, ok: shift <= bound }
}
