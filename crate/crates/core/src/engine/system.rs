//! Nearly integrable Hamiltonians H = K(y) + εP(y, x) and their derived norms.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::analytic::FourierTaylorFunction;
use crate::error::{invalid, KamError, Result};
use crate::geometry::op_norm_inf;
use crate::index::{binom, deg};
use crate::measure::SystemData;

#[derive(Clone, Debug)]
pub struct HamiltonianSystem {
    pub d: usize,
    /// Angle-independent integrable part.
    pub k: FourierTaylorFunction,
    pub p: FourierTaylorFunction,
    pub epsilon: f64,
    /// Action radius of the analyticity domain around the anchor.
    pub rho: f64,
    pub s: f64,
    pub anchor: Vec<f64>,
    /// ω₀ = K_y at the anchor.
    pub omega: Vec<f64>,
    pub hessian: DMatrix<f64>,
    /// Torsion T = K_yy⁻¹ at the anchor, when it exists.
    pub torsion: Option<DMatrix<f64>>,
    /// Derived norms; `l` is infinite when K_yy is not uniformly invertible on the ball.
    pub norms: SystemNorms,
    dk: Vec<FourierTaylorFunction>,
    kyy: Vec<Vec<FourierTaylorFunction>>,
    dp_y: Vec<FourierTaylorFunction>,
    dp_x: Vec<FourierTaylorFunction>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemNorms {
    pub m: f64,
    pub l: f64,
    pub p_norm: f64,
    pub theta: f64,
}

/// sup over the sup-ball B_ρ(a) × strip s of |f|, bounded by the majorant
/// Σ|c_{α,k}| Π(|aᵢ − cᵢ| + ρ)^{αᵢ} e^{|k|₁ s}.
pub fn majorant_on_ball(f: &FourierTaylorFunction, a: &[f64], rho: f64, s: f64) -> f64 {
    let off: Vec<f64> = a.iter().zip(&f.y0).map(|(x, c)| (x - c).abs() + rho).collect();
    f.entries().map(|((al, k), c)| c.norm() * mono(&off, al) * (crate::index::l1(k) as f64 * s).exp()).sum::<f64>()
        + f.tail
}

/// sup over B_ρ(a) of |f(y) − f(a)| for an angle-independent f.
fn variation_on_ball(f: &FourierTaylorFunction, a: &[f64], rho: f64) -> f64 {
    let base: Vec<f64> = a.iter().zip(&f.y0).map(|(x, c)| (x - c).abs()).collect();
    let grown: Vec<f64> = base.iter().map(|b| b + rho).collect();
    f.entries().map(|((al, _), c)| c.norm() * (mono(&grown, al) - mono(&base, al))).sum::<f64>() + 2.0 * f.tail
}

fn mono(v: &[f64], al: &[u32]) -> f64 {
    v.iter().zip(al).map(|(x, &e)| x.powi(e as i32)).product()
}

impl HamiltonianSystem {
    pub fn new(
        k: FourierTaylorFunction,
        p: FourierTaylorFunction,
        epsilon: f64,
        anchor: Vec<f64>,
        rho: f64,
        s: f64,
    ) -> Result<Self> {
        let d = k.d;
        if p.d != d || anchor.len() != d {
            return invalid("dimension mismatch between K, P and anchor");
        }
        if k.entries().any(|((_, m), c)| m.iter().any(|&v| v != 0) && c.norm() > 0.0) {
            return invalid("K must be angle-independent");
        }
        if !(rho > 0.0 && s > 0.0 && epsilon >= 0.0) {
            return invalid("need rho > 0, s > 0, epsilon >= 0");
        }
        let dk: Vec<_> = (0..d).map(|i| k.dy(i)).collect();
        let omega: Vec<f64> = dk.iter().map(|f| f.eval_real(&anchor, &vec![0.0; d])).collect();
        let kyy: Vec<Vec<FourierTaylorFunction>> = (0..d).map(|i| (0..d).map(|j| dk[i].dy(j)).collect()).collect();
        let zero = vec![0.0; d];
        let hessian = DMatrix::from_fn(d, d, |i, j| kyy[i][j].eval_real(&anchor, &zero));
        let m = (0..d)
            .map(|i| (0..d).map(|j| majorant_on_ball(&kyy[i][j], &anchor, rho, 0.0)).sum::<f64>())
            .fold(0.0, f64::max);
        let torsion = hessian.clone().try_inverse();
        let l = match &torsion {
            Some(t) => {
                let var = (0..d)
                    .map(|i| (0..d).map(|j| variation_on_ball(&kyy[i][j], &anchor, rho)).sum::<f64>())
                    .fold(0.0, f64::max);
                let tn = op_norm_inf(t);
                // Neumann series: ‖(A + B)⁻¹‖ ≤ ‖A⁻¹‖/(1 − ‖A⁻¹‖‖B‖)
                if tn * var < 1.0 {
                    tn / (1.0 - tn * var)
                } else {
                    f64::INFINITY
                }
            }
            None => f64::INFINITY,
        };
        let p_norm = majorant_on_ball(&p, &anchor, rho, s);
        let norms = SystemNorms { m, l, p_norm, theta: m * l };
        let dp_y = (0..d).map(|i| p.dy(i)).collect();
        let dp_x = (0..d).map(|i| p.dx(i)).collect();
        Ok(HamiltonianSystem { d, k, p, epsilon, rho, s, anchor, omega, hessian, torsion, norms, dk, kyy, dp_y, dp_x })
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        HamiltonianSystem { epsilon, ..self.clone() }
    }

    pub fn is_nondegenerate(&self) -> bool {
        self.torsion.is_some() && self.norms.l.is_finite()
    }

    /// ϵ = εM𝖯/α².
    pub fn epsilon_frak(&self, alpha: f64) -> f64 {
        self.epsilon * self.norms.m * self.norms.p_norm / (alpha * alpha)
    }

    pub fn system_data(&self) -> SystemData {
        SystemData {
            d: self.d,
            m: self.norms.m,
            l: self.norms.l,
            p_norm: self.norms.p_norm,
            epsilon: self.epsilon,
            rho: self.rho,
            s: self.s,
        }
    }

    pub fn energy(&self, y: &[f64], x: &[f64]) -> f64 {
        self.k.eval_real(y, x) + self.epsilon * self.p.eval_real(y, x)
    }

    /// Frequency map K_y at a real action.
    pub fn frequency(&self, y: &[f64]) -> Vec<f64> {
        let zero = vec![0.0; self.d];
        self.dk.iter().map(|f| f.eval_real(y, &zero)).collect()
    }

    pub fn k_hessian(&self, y: &[f64]) -> DMatrix<f64> {
        let zero = vec![0.0; self.d];
        DMatrix::from_fn(self.d, self.d, |i, j| self.kyy[i][j].eval_real(y, &zero))
    }

    /// Majorant bounds over the sup-ball B_r(c): (max-row-sum of K_yy, Lipschitz constant of
    /// K_yy from the sup norm to the max-row-sum norm).
    pub fn hessian_bounds(&self, c: &[f64], r: f64) -> (f64, f64) {
        let d = self.d;
        let m = (0..d).map(|i| (0..d).map(|j| majorant_on_ball(&self.kyy[i][j], c, r, 0.0)).sum::<f64>()).fold(0.0, f64::max);
        let lip = (0..d)
            .map(|i| {
                (0..d)
                    .flat_map(|j| (0..d).map(move |k| (j, k)))
                    .map(|(j, k)| majorant_on_ball(&self.kyy[i][j].dy(k), c, r, 0.0))
                    .sum::<f64>()
            })
            .fold(0.0, f64::max);
        (m, lip)
    }

    /// Lipschitz constant of det K_yy on B_r(c) in the sup norm. Hadamard's inequality on
    /// the telescoped column swap gives d·M^{d−1}·Lip(K_yy), using that columns of a
    /// symmetric matrix have 2-norm at most its max-row-sum.
    pub fn det_lipschitz(&self, c: &[f64], r: f64) -> f64 {
        let (m, lip) = self.hessian_bounds(c, r);
        self.d as f64 * m.powi(self.d as i32 - 1) * lip
    }

    /// (H_y, H_x) at a real point.
    pub fn gradient(&self, y: &[f64], x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let hy = (0..self.d).map(|i| self.dk[i].eval_real(y, x) + self.epsilon * self.dp_y[i].eval_real(y, x)).collect();
        let hx = (0..self.d).map(|i| self.epsilon * self.dp_x[i].eval_real(y, x)).collect();
        (hy, hx)
    }
}

/// Jet coefficients of f(a + η, x) for each Fourier mode, truncated at degree p.
/// Errors when f has Taylor degree above p.
pub fn jets_at(
    f: &FourierTaylorFunction,
    a: &[f64],
    idx: &[Vec<u32>],
    p: usize,
) -> Result<Vec<(Vec<i32>, Vec<Complex64>)>> {
    let d = f.d;
    let off: Vec<f64> = a.iter().zip(&f.y0).map(|(x, c)| x - c).collect();
    let mut out: std::collections::BTreeMap<Vec<i32>, Vec<Complex64>> = Default::default();
    for ((al, k), c) in f.entries() {
        if deg(al) as usize > p {
            return invalid(format!("Taylor degree {} exceeds engine degree {p}", deg(al)));
        }
        let jet = out.entry(k.clone()).or_insert_with(|| vec![Complex64::default(); idx.len()]);
        // (off + η)^α = Σ_{γ≤α} C(α,γ) off^{α−γ} η^γ
        for (g, gam) in idx.iter().enumerate() {
            if (0..d).any(|i| gam[i] > al[i]) {
                continue;
            }
            let mut w = 1.0;
            for i in 0..d {
                w *= binom(al[i] as u64, gam[i] as u64) * off[i].powi((al[i] - gam[i]) as i32);
            }
            jet[g] += c * w;
        }
    }
    if f.tail > 0.0 {
        return Err(KamError::Invalid("engine input must be exactly represented (tail = 0)".into()));
    }
    Ok(out.into_iter().collect())
}

/// γ = (1 + √5)/2.
pub fn golden() -> f64 {
    (1.0 + 5f64.sqrt()) / 2.0
}

/// K = |y|²/2, P = cos x₁ + cos(x₁ + x₂), anchored at (γ, 1).
pub fn pendulum2d(epsilon: f64, rho: f64, s: f64) -> Result<HamiltonianSystem> {
    let mut k = FourierTaylorFunction::zero(2, vec![0.0, 0.0], 1.0, s, 2, 0)?;
    k.insert(vec![2, 0], vec![0, 0], Complex64::new(0.5, 0.0))?;
    k.insert(vec![0, 2], vec![0, 0], Complex64::new(0.5, 0.0))?;
    let mut p = FourierTaylorFunction::zero(2, vec![0.0, 0.0], 1.0, s, 0, 2)?;
    p.add_cos(vec![0, 0], vec![1, 0], 1.0, 0.0)?;
    p.add_cos(vec![0, 0], vec![1, 1], 1.0, 0.0)?;
    HamiltonianSystem::new(k, p, epsilon, vec![golden(), 1.0], rho, s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pendulum_norms() {
        let sys = pendulum2d(1e-4, 0.05, 0.5).unwrap();
        assert_eq!(sys.norms.m, 1.0);
        assert_eq!(sys.norms.l, 1.0);
        assert_eq!(sys.norms.theta, 1.0);
        assert!((sys.norms.p_norm - (0.5f64.exp() + 1f64.exp())).abs() < 1e-14);
        assert!((sys.omega[0] - golden()).abs() < 1e-15 && sys.omega[1] == 1.0);
    }

    #[test]
    fn jets_reexpand_exactly() {
        let sys = pendulum2d(0.0, 0.05, 0.5).unwrap();
        let idx = crate::index::taylor_indices(2, 2);
        let jets = jets_at(&sys.k, &[1.0, 2.0], &idx, 2).unwrap();
        let j = &jets[0].1;
        // K(1+η₁, 2+η₂) = 2.5 + η₁ + 2η₂ + (η₁² + η₂²)/2
        let want = [2.5, 1.0, 2.0, 0.5, 0.0, 0.5];
        for (g, w) in want.iter().enumerate() {
            assert!((j[g].re - w).abs() < 1e-15, "{g}");
        }
    }
}
