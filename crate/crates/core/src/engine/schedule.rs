//! Parameter sequences of the iterative scheme: σⱼ, sⱼ, κⱼ, Mⱼ, Lⱼ, rⱼ, r̃ⱼ, řⱼ, Pⱼ, ϵⱼ, ε̂ⱼ.
//!
//! Pⱼ and ϵⱼ grow or shrink doubly exponentially, so they are carried as natural logarithms.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, KamError, Result};
use crate::ledger::ConstantLedger;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleInputs {
    pub d: usize,
    pub epsilon: f64,
    pub m: f64,
    pub l: f64,
    pub p_norm: f64,
    pub alpha: f64,
    pub rho: f64,
    pub s: f64,
    pub s_star: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KamSchedule {
    pub inputs: ScheduleInputs,
    pub nu: f64,
    pub theta0: f64,
    /// ϵ₀ = εM𝖯/α²
    pub epsilon0: f64,
    pub lambda0: f64,
    pub lambda_star: f64,
    pub theta_star: f64,
    /// ε̂₀ = C₈σ₀^{−(3ν+2d+1)}ϵ₀^{1/2}
    pub eps_hat0: f64,
    /// α ≤ (C₄/16)r₀/L₀ and max{e·ϵ₀, ε̂₀} ≤ 1
    pub first_step_ok: bool,
    pub sigma: Vec<f64>,
    pub s_seq: Vec<f64>,
    pub kappa: Vec<f64>,
    pub m_seq: Vec<f64>,
    pub l_seq: Vec<f64>,
    /// r₀ = ρ; entries for j ≥ 1 follow the recursion.
    pub r: Vec<f64>,
    pub r_tilde: Vec<f64>,
    pub r_check: Vec<f64>,
    pub ln_p: Vec<f64>,
    pub ln_eps_frak: Vec<f64>,
    /// ε̂ⱼ for j ≥ 1 by repeated squaring of ε̂₁; entry 0 is ε̂₀.
    pub eps_hat: Vec<f64>,
    /// ln(λ*θ*ʲϵⱼ) straight from the definitions, for j ≥ 1.
    pub ln_eps_hat_direct: Vec<f64>,
    /// log₁₀(ε^{2ʲ}Pⱼ): the certified size of the j-th perturbation.
    pub log10_envelope: Vec<f64>,
}

pub fn build_schedule(inp: &ScheduleInputs, ledger: &ConstantLedger, j_max: usize) -> Result<KamSchedule> {
    let ScheduleInputs { d, epsilon, m, l, p_norm, alpha, rho, s, s_star } = *inp;
    if ledger.d != d {
        return invalid("ledger dimension mismatch");
    }
    if !(0.0 < s_star && s_star < s) {
        return invalid("need 0 < s_star < s");
    }
    if !(epsilon > 0.0 && alpha > 0.0 && m > 0.0 && l.is_finite() && p_norm > 0.0) {
        return invalid("schedule needs epsilon, alpha, M, P > 0 and finite L");
    }
    let df = d as f64;
    let nu = ledger.nu;
    let theta0 = m * l;
    let eps0 = epsilon * m * p_norm / (alpha * alpha);
    if !(eps0 < 1.0) {
        return Err(KamError::PerturbationNotSmall(eps0));
    }
    let sigma0 = (s - s_star) / 2.0;
    let lambda0 = (1.0 / eps0).ln();
    let lambda_star = ledger.c[7] * sigma0.powf(-(4.0 * nu + 2.0 * df + 1.0)) * theta0 * theta0 * lambda0.powf(2.0 * nu);
    let theta_star = 2f64.powf(2.0 * nu + 2.0 * df + 1.0) * ledger.c[5].powi(2) * theta0 * theta0;
    let kappa0 = 4.0 * lambda0 / sigma0;
    let eps_hat0 = ledger.c[8] * sigma0.powf(-(3.0 * nu + 2.0 * df + 1.0)) * eps0.sqrt();
    let first_step_ok = alpha <= ledger.c[4] / 16.0 * rho / l && (std::f64::consts::E * eps0).max(eps_hat0) <= 1.0;

    let n = j_max + 1;
    let sigma: Vec<f64> = (0..n).map(|j| sigma0 / 2f64.powi(j as i32)).collect();
    let mut s_seq = vec![s];
    let mut m_seq = vec![m];
    let mut l_seq = vec![l];
    let mut r = vec![rho];
    let mut r_tilde = vec![f64::NAN];
    let mut r_check = vec![f64::NAN];
    let kappa: Vec<f64> = (0..n).map(|j| 4f64.powi(j as i32) * kappa0).collect();
    let sq2 = 2f64.sqrt();
    for j in 0..j_max {
        s_seq.push(s_seq[j] - sigma[j]);
        m_seq.push(m_seq[j] * (1.0 + sigma[j] / 3.0));
        l_seq.push(l_seq[j] * (1.0 + sigma[j] / 3.0));
        let rc = r[j] / (64.0 * df * theta0);
        r_check.push(rc);
        r_tilde.push(rc * sigma[j] / (32.0 * df * theta0));
        r.push(0.5 * (alpha / (2.0 * df * sq2 * m * kappa[j].powf(nu))).min(rc));
    }

    let ln_eps = epsilon.ln();
    let ln_a2 = 2.0 * alpha.ln();
    let mut ln_p = vec![p_norm.ln()];
    if j_max >= 1 {
        ln_p.push(eps_hat0.ln() + p_norm.ln() - ln_eps);
    }
    for j in 1..j_max {
        let next = lambda_star.ln() + (j as f64 - 1.0) * theta_star.ln() + m.ln() + 2.0 * ln_p[j] - ln_a2;
        ln_p.push(next);
    }
    let ln_eps_frak: Vec<f64> =
        (0..ln_p.len()).map(|j| m.ln() + 2f64.powi(j as i32) * ln_eps + ln_p[j] - ln_a2).collect();
    let ln_eps_hat_direct: Vec<f64> = (0..ln_p.len())
        .map(|j| if j == 0 { f64::NAN } else { lambda_star.ln() + j as f64 * theta_star.ln() + ln_eps_frak[j] })
        .collect();
    let mut eps_hat = vec![eps_hat0];
    if j_max >= 1 {
        eps_hat.push(ln_eps_hat_direct[1].exp());
        for j in 1..j_max {
            eps_hat.push(eps_hat[j] * eps_hat[j]);
        }
    }
    let log10_envelope =
        (0..ln_p.len()).map(|j| (2f64.powi(j as i32) * ln_eps + ln_p[j]) / std::f64::consts::LN_10).collect();

    Ok(KamSchedule {
        inputs: inp.clone(),
        nu,
        theta0,
        epsilon0: eps0,
        lambda0,
        lambda_star,
        theta_star,
        eps_hat0,
        first_step_ok,
        sigma,
        s_seq,
        kappa,
        m_seq,
        l_seq,
        r,
        r_tilde,
        r_check,
        ln_p,
        ln_eps_frak,
        eps_hat,
        ln_eps_hat_direct,
        log10_envelope,
    })
}

/// x^{2^k} by k squarings.
pub fn pow2_by_squaring(x: f64, k: u32) -> f64 {
    (0..k).fold(x, |acc, _| acc * acc)
}

/// Formats 10^v in scientific notation even when it is outside the f64 range.
pub fn format_pow10(v: f64) -> String {
    if !v.is_finite() {
        return if v > 0.0 { "inf".into() } else { "0".into() };
    }
    let e = v.floor();
    let mant = 10f64.powf(v - e);
    format!("{mant:.6}e{e:+}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::build_ledger;

    fn inputs(eps: f64) -> ScheduleInputs {
        ScheduleInputs { d: 2, epsilon: eps, m: 1.0, l: 1.0, p_norm: 4.37, alpha: 1.0, rho: 0.05, s: 0.5, s_star: 0.25 }
    }

    #[test]
    fn exact_identities() {
        let led = build_ledger(2, 2.0).unwrap();
        let sc = build_schedule(&inputs(1e-4), &led, 20).unwrap();
        for j in 0..=20 {
            assert_eq!(sc.kappa[j], 4f64.powi(j as i32) * sc.kappa[0]);
            assert_eq!(sc.sigma[j], sc.sigma[0] / 2f64.powi(j as i32));
        }
        for j in 1..=20 {
            assert_eq!(sc.eps_hat[j], pow2_by_squaring(sc.eps_hat[1], j as u32 - 1));
        }
        // the squaring law also holds for the logarithms taken from the definitions
        for j in 1..20 {
            let (a, b) = (sc.ln_eps_hat_direct[j + 1], 2.0 * sc.ln_eps_hat_direct[j]);
            assert!((a - b).abs() <= 1e-9 * b.abs(), "{j}: {a} vs {b}");
        }
        assert!(sc.m_seq.iter().all(|v| *v < 2f64.sqrt() * sc.m_seq[0]));
    }

    #[test]
    fn sigma_example_and_errors() {
        let led = build_ledger(2, 2.0).unwrap();
        let sc = build_schedule(&inputs(1e-4), &led, 3).unwrap();
        assert_eq!(sc.sigma[0], 0.125);
        let mut inp = inputs(1e-4);
        inp.s = 0.75;
        let sc = build_schedule(&inp, &led, 3).unwrap();
        assert_eq!(sc.sigma[3], 0.03125);
        assert!(matches!(build_schedule(&inputs(1.0), &led, 3), Err(KamError::PerturbationNotSmall(_))));
        assert!((pow2_by_squaring(0.1, 3) - 1e-8).abs() < 1e-22);
    }

    #[test]
    fn format_large_powers() {
        assert_eq!(format_pow10(2.0), "1.000000e+2");
        assert_eq!(format_pow10(-400.5), "3.162278e-401");
    }
}
