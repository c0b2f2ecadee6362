//! D_ω u = T_κ f − ⟨T_κ f⟩ solved mode by mode.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

use crate::analytic::{FourierTaylorFunction, FrequencyVector};
use crate::error::{KamError, Result};
use crate::index::l1;

/// u_k = f_k/(iω·k) for 0 < |k|₁ ≤ κ, u = 0 elsewhere.
pub fn solve_homological(f: &FourierTaylorFunction, omega: &FrequencyVector, kappa: usize) -> Result<FourierTaylorFunction> {
    let mut u = f.like();
    for ((a, k), c) in f.entries() {
        let n = l1(k) as usize;
        if n == 0 || n > kappa {
            continue;
        }
        let wk = omega.dot(k);
        if wk == 0.0 {
            return Err(KamError::ResonantFrequency(k.clone()));
        }
        u.insert(a.clone(), k.clone(), c / Complex64::new(0.0, wk))?;
    }
    Ok(u)
}

/// Largest |u_k|/|f_k| over the solved modes, with the mode attaining it.
pub fn max_amplification(f: &FourierTaylorFunction, u: &FourierTaylorFunction) -> (f64, Vec<i32>) {
    let mut best = (0.0, vec![0; f.d]);
    for ((a, k), c) in f.entries() {
        let uc = u.get(a, k);
        if c.norm() > 0.0 && uc.norm() > 0.0 {
            let amp = uc.norm() / c.norm();
            if amp > best.0 {
                best = (amp, k.clone());
            }
        }
    }
    best
}

/// D_ω u − (T_κ f − ⟨T_κ f⟩) computed coefficientwise; all-zero for an exact solve.
pub fn homological_defect(
    f: &FourierTaylorFunction,
    u: &FourierTaylorFunction,
    omega: &[f64],
    kappa: usize,
) -> Result<FourierTaylorFunction> {
    let (low, _) = f.truncate(kappa, 0.0)?;
    let target = low.sub(&low.average())?;
    let mut defect = u.lie_derivative(omega).sub(&target)?;
    defect.prune(0.0);
    Ok(defect)
}

/// Coefficient table over exact rationals: (Taylor index, mode) ↦ (real part, imaginary part).
pub type ExactTable = BTreeMap<(Vec<u32>, Vec<i32>), (BigRational, BigRational)>;

fn exact(v: f64) -> BigRational {
    BigRational::from_float(v).expect("finite coefficient")
}

fn exact_dot(omega: &[f64], k: &[i32]) -> BigRational {
    omega.iter().zip(k).fold(BigRational::zero(), |acc, (w, &n)| acc + exact(*w) * BigInt::from(n))
}

/// The same solve carried out in exact rational arithmetic on the binary64 values of f and ω.
pub fn solve_homological_exact(f: &FourierTaylorFunction, omega: &[f64], kappa: usize) -> Result<ExactTable> {
    let mut u = ExactTable::new();
    for ((a, k), c) in f.entries() {
        let n = l1(k) as usize;
        if n == 0 || n > kappa {
            continue;
        }
        let w = exact_dot(omega, k);
        if w.is_zero() {
            return Err(KamError::ResonantFrequency(k.clone()));
        }
        // (re + i im)/(i w) = im/w − i re/w
        u.insert((a.clone(), k.clone()), (exact(c.im) / &w, -exact(c.re) / &w));
    }
    Ok(u)
}

/// Nonzero entries of D_ω u − (T_κ f − ⟨T_κ f⟩), evaluated exactly.
pub fn homological_defect_exact(f: &FourierTaylorFunction, u: &ExactTable, omega: &[f64], kappa: usize) -> ExactTable {
    let mut acc = ExactTable::new();
    for ((a, k), (re, im)) in u {
        let w = exact_dot(omega, k);
        // i w (re + i im) = −w im + i w re
        acc.insert((a.clone(), k.clone()), (-(&w * im), &w * re));
    }
    for ((a, k), c) in f.entries() {
        let n = l1(k) as usize;
        if n == 0 || n > kappa {
            continue;
        }
        let e = acc.entry((a.clone(), k.clone())).or_insert_with(|| (BigRational::zero(), BigRational::zero()));
        e.0 -= exact(c.re);
        e.1 -= exact(c.im);
    }
    acc.retain(|_, (re, im)| !(re.is_zero() && im.is_zero()));
    acc
}

/// max |u_k − u_k^exact| / |u_k^exact| over the exact table, with u from the binary64 solve.
pub fn deviation_from_exact(u: &FourierTaylorFunction, exact_u: &ExactTable) -> f64 {
    let mut worst: f64 = 0.0;
    for ((a, k), (re, im)) in exact_u {
        let z = Complex64::new(re.to_f64().unwrap_or(f64::NAN), im.to_f64().unwrap_or(f64::NAN));
        if z.norm() > 0.0 {
            worst = worst.max((u.get(a, k) - z).norm() / z.norm());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::system::golden;

    #[test]
    fn single_modes() {
        let g = golden();
        let w = FrequencyVector::with_alpha(vec![g, 1.0], 0.5, 2.0, 50).unwrap();
        let mut f = FourierTaylorFunction::zero(2, vec![0.0; 2], 1.0, 1.0, 0, 4).unwrap();
        f.add_cos(vec![0, 0], vec![1, 0], 1.0, 0.0).unwrap();
        let u = solve_homological(&f, &w, 4).unwrap();
        // sin(x₁)/γ = (e^{ix₁} − e^{−ix₁})/(2iγ)
        assert!((u.get(&[0, 0], &[1, 0]) - Complex64::new(0.0, -0.5 / g)).norm() < 1e-16);
        let ue = solve_homological_exact(&f, &w.omega, 4).unwrap();
        assert!(homological_defect_exact(&f, &ue, &w.omega, 4).is_empty());
        assert!(deviation_from_exact(&u, &ue) <= 2.0 * f64::EPSILON);
        // the binary64 defect is at rounding level
        let def = homological_defect(&f, &u, &w.omega, 4).unwrap();
        assert!(def.entries().all(|(_, c)| c.norm() <= 2.0 * f64::EPSILON));

        let mut f2 = FourierTaylorFunction::zero(2, vec![0.0; 2], 1.0, 1.0, 0, 4).unwrap();
        f2.add_cos(vec![0, 0], vec![1, -1], 1.0, 0.0).unwrap();
        let u2 = solve_homological(&f2, &w, 4).unwrap();
        assert!((u2.get(&[0, 0], &[1, -1]) - Complex64::new(0.0, -0.5 / (g - 1.0))).norm() < 1e-15);
        let (amp, _) = max_amplification(&f2, &u2);
        assert!(amp <= 2f64.powf(2.0) / w.alpha);

        let konst = FourierTaylorFunction::constant(2, 1.0, 1.0, 3.0);
        assert!(solve_homological(&konst, &w, 4).unwrap().is_empty());
    }

    #[test]
    fn resonance_is_reported() {
        let w = FrequencyVector { omega: vec![1.0, 1.0], alpha: 1.0, tau: 2.0, k_cert: 0 };
        let mut f = FourierTaylorFunction::zero(2, vec![0.0; 2], 1.0, 1.0, 0, 4).unwrap();
        f.add_cos(vec![0, 0], vec![1, -1], 1.0, 0.0).unwrap();
        assert!(matches!(solve_homological(&f, &w, 4), Err(KamError::ResonantFrequency(_))));
    }
}
