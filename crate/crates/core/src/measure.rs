//! Smallness thresholds and complement-measure bounds for the Kolmogorov set.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, KamError, Result};
use crate::geometry::{covering_bound, greedy_internal_cover, surface_properties, DomainSpec, SurfaceSpec};
use crate::index::{binom, l1, shell};
use crate::ledger::ConstantLedger;

/// Bracket [lo, hi] for Σ_{k≠0} 1/(|k|₁^τ |k|₂): exact partial sum over 0 < |k|₁ ≤ K plus an
/// integral-comparison tail using |k|₂ ≥ |k|₁/√d and #{|k|₁ = m} ≤ 2^d (m+d−1)^{d−1}/(d−1)!.
pub fn dioph_series(d: usize, tau: f64, k_trunc: usize) -> Result<(f64, f64)> {
    if d == 0 || !(tau > d as f64 - 1.0) {
        return Err(KamError::DivergentSeries);
    }
    let mut lo = 0.0;
    for m in 1..=k_trunc {
        let mut shell_sum = 0.0;
        for k in shell(d, m) {
            let n2 = k.iter().map(|&v| (v as f64).powi(2)).sum::<f64>().sqrt();
            shell_sum += 1.0 / ((l1(&k) as f64).powf(tau) * n2);
        }
        lo += shell_sum;
    }
    Ok((lo, lo + dioph_tail(d, tau, k_trunc.max(1))))
}

/// ∫_K^∞ 2^d √d (t+d−1)^{d−1} t^{−τ−1}/(d−1)! dt, expanded binomially.
fn dioph_tail(d: usize, tau: f64, k: usize) -> f64 {
    let kf = k as f64;
    let c = d as f64 - 1.0;
    let mut integral = 0.0;
    for j in 0..d {
        integral += binom(d as u64 - 1, j as u64) * c.powi((d - 1 - j) as i32) * kf.powf(j as f64 - tau)
            / (tau - j as f64);
    }
    let fact: f64 = (1..d).map(|v| v as f64).product();
    2f64.powi(d as i32) * (d as f64).sqrt() * integral / fact
}

/// ϵ* = (s − s*)^a / (c* θ⁶).
pub fn epsilon_star(s: f64, s_star: f64, theta: f64, ledger: &ConstantLedger) -> f64 {
    (s - s_star).powf(ledger.a) / (ledger.c_star * theta.powi(6))
}

/// The scalar data of a nearly integrable system that the thresholds consume.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemData {
    pub d: usize,
    /// ‖K_yy‖ bound
    pub m: f64,
    /// ‖K_yy⁻¹‖ bound
    pub l: f64,
    /// ‖P‖ bound
    pub p_norm: f64,
    pub epsilon: f64,
    pub rho: f64,
    pub s: f64,
}

impl SystemData {
    pub fn theta(&self) -> f64 {
        self.m * self.l
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Theorem1Check {
    pub alpha_ok: bool,
    pub eps_ok: bool,
    pub alpha: f64,
    pub alpha_limit: f64,
    pub epsilon_frak: f64,
    pub epsilon_star_frak: f64,
    pub alpha_margin: f64,
    pub eps_margin: f64,
}

/// α ≤ c₀ρ̂/L and ϵ = εM𝖯/α² ≤ ϵ*.
pub fn check_theorem1(
    sys: &SystemData,
    alpha: f64,
    rho_hat: f64,
    r_bar: f64,
    s_star: f64,
    ledger: &ConstantLedger,
) -> Result<Theorem1Check> {
    if !(0.0 < rho_hat && rho_hat < r_bar && r_bar <= sys.rho) {
        return invalid("radii must satisfy 0 < rho_hat < r_bar <= rho");
    }
    if !(0.0 < s_star && s_star < sys.s) {
        return invalid("need 0 < s_star < s");
    }
    let alpha_limit = ledger.c0 * rho_hat / sys.l;
    let eps_frak = sys.epsilon * sys.m * sys.p_norm / (alpha * alpha);
    let eps_star = epsilon_star(sys.s, s_star, sys.theta(), ledger);
    Ok(Theorem1Check {
        alpha_ok: alpha <= alpha_limit,
        eps_ok: eps_frak <= eps_star,
        alpha,
        alpha_limit,
        epsilon_frak: eps_frak,
        epsilon_star_frak: eps_star,
        alpha_margin: alpha_limit - alpha,
        eps_margin: if eps_frak == 0.0 { f64::INFINITY } else { eps_star / eps_frak },
    })
}

/// (2^d d^{(d−1)/2} S_hi)·n₀·δ₀⁻¹·M^{d−1}·r̄^{d−1}·α.
#[allow(clippy::too_many_arguments)]
pub fn resonant_zone_measure(
    d: usize,
    s_hi: f64,
    alpha: f64,
    n0: f64,
    delta0: f64,
    m: f64,
    r_bar: f64,
) -> f64 {
    let df = d as f64;
    2f64.powi(d as i32) * df.powf((df - 1.0) / 2.0) * s_hi * n0 / delta0
        * m.powi(d as i32 - 1)
        * r_bar.powi(d as i32 - 1)
        * alpha
}

/// β·(tube + resonant), β = (1 + 2 lip)^d (2π)^d.
pub fn abstract_bound(lip: f64, tube_measure: f64, resonant_measure: f64, d: usize) -> Result<f64> {
    if !(lip >= 0.0 && lip <= 1.0 / (4.0 * d as f64)) {
        return invalid("lip must lie in [0, 1/(4d)]");
    }
    Ok(beta(lip, d) * (tube_measure + resonant_measure))
}

pub fn beta(lip: f64, d: usize) -> f64 {
    (1.0 + 2.0 * lip).powi(d as i32) * (2.0 * std::f64::consts::PI).powi(d as i32)
}

/// Lower bound on inf |det K_yy| over a sample: lattice minimum minus Lipschitz margin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Delta0 {
    pub lattice_min: f64,
    pub margin: f64,
    pub value: f64,
    pub samples: usize,
    pub pitch: f64,
}

pub fn delta0_lower_bound(points: &[Vec<f64>], pitch: f64, det: &(dyn Fn(&[f64]) -> f64 + Sync), det_lip: f64) -> Delta0 {
    use rayon::prelude::*;
    let lattice_min = points.par_iter().map(|p| det(p).abs()).reduce(|| f64::INFINITY, f64::min);
    let margin = det_lip * pitch / 2.0;
    Delta0 { lattice_min, margin, value: lattice_min - margin, samples: points.len(), pitch }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Outcome {
    Bound,
    NotApplicable,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureReport {
    pub mode: String,
    pub outcome: Outcome,
    pub d: usize,
    pub tau: f64,
    pub rho: f64,
    pub s: f64,
    pub s_star: f64,
    pub m: f64,
    pub l: f64,
    pub p_norm: f64,
    pub theta: f64,
    pub epsilon: f64,
    pub epsilon_star_frak: f64,
    pub r_bar: f64,
    pub alpha_star: f64,
    pub epsilon_star_actions: f64,
    pub delta0: Delta0,
    pub theta0: f64,
    pub rho_step: f64,
    pub covering_count: f64,
    pub covering_method: String,
    pub series_lo: f64,
    pub series_hi: f64,
    pub constant: f64,
    pub geometric_factor: f64,
    /// Complement-measure bound; absent when the smallness condition fails.
    pub bound: Option<f64>,
}

/// Inputs that describe how to sample |det K_yy|.
pub struct DetSampler<'a> {
    pub det: &'a (dyn Fn(&[f64]) -> f64 + Sync),
    pub lip: f64,
    pub per_axis: usize,
}

/// Covering count of D at radius r̄: exact Π⌈ℓᵢ/(2r̄)⌉ for boxes, greedy for point sets,
/// Lemma-type bound for balls.
pub fn covering_count(domain: &DomainSpec, r_bar: f64) -> (f64, String) {
    match domain {
        DomainSpec::Box { lo, hi } => {
            let n: f64 = lo.iter().zip(hi).map(|(a, b)| ((b - a) / (2.0 * r_bar)).ceil().max(1.0)).product();
            (n, "box product count".into())
        }
        DomainSpec::Points { points } => (greedy_internal_cover(points, r_bar).len() as f64, "greedy".into()),
        DomainSpec::Ball { .. } => {
            (covering_bound(domain.diameter(), r_bar, domain.dim()) as f64, "diameter bound".into())
        }
    }
}

fn enlarged_lattice(domain: &DomainSpec, r_bar: f64, n: usize) -> (Vec<Vec<f64>>, f64) {
    match domain {
        DomainSpec::Box { lo, hi } => {
            let lo: Vec<f64> = lo.iter().map(|v| v - r_bar).collect();
            let hi: Vec<f64> = hi.iter().map(|v| v + r_bar).collect();
            DomainSpec::Box { lo, hi }.lattice(n)
        }
        DomainSpec::Ball { center, radius } => {
            // sup-ball neighbourhood ⊂ Euclidean ball of radius R + √d r̄
            let grown = DomainSpec::Ball { center: center.clone(), radius: radius + (center.len() as f64).sqrt() * r_bar };
            grown.lattice(n)
        }
        DomainSpec::Points { points } => {
            let d = points[0].len();
            let mut out = Vec::new();
            let mut pitch: f64 = 0.0;
            for p in points {
                let lo: Vec<f64> = p.iter().map(|v| v - r_bar).collect();
                let hi: Vec<f64> = p.iter().map(|v| v + r_bar).collect();
                let (pts, h) = DomainSpec::Box { lo, hi }.lattice(n.min(5));
                pitch = pitch.max(h);
                out.extend(pts);
            }
            let _ = d;
            (out, pitch)
        }
    }
}

pub fn default_lattice_per_axis(d: usize) -> usize {
    // 17^d capped at 10⁵ points
    let mut n = 17usize;
    while n > 2 && n.pow(d as u32) > 100_000 {
        n -= 1;
    }
    n
}

struct Common {
    theta: f64,
    eps_star: f64,
    alpha_star: f64,
    eps_actions: f64,
}

fn common(sys: &SystemData, r_bar: f64, s_star: f64, ledger: &ConstantLedger) -> Common {
    let theta = sys.theta();
    let eps_star = epsilon_star(sys.s, s_star, theta, ledger);
    let alpha_star = (sys.m * sys.p_norm / eps_star).sqrt();
    let eps_actions = (ledger.c0 * r_bar / (sys.l * alpha_star)).powi(2);
    Common { theta, eps_star, alpha_star, eps_actions }
}

/// General bounded domain: c̄*·θ₀·N·M⁻¹·r̄^{d−1}·α*·√ε.
pub fn general_case_bound(
    sys: &SystemData,
    domain: &DomainSpec,
    det: &DetSampler,
    s_star: f64,
    ledger: &ConstantLedger,
) -> Result<MeasureReport> {
    domain.validate()?;
    if domain.dim() != sys.d || ledger.d != sys.d {
        return invalid("dimension mismatch");
    }
    let d = sys.d;
    let theta = sys.theta();
    let r_bar = sys.rho / (1.0 + 2.0 * (d * d) as f64 * theta);
    let c = common(sys, r_bar, s_star, ledger);
    let (pts, pitch) = enlarged_lattice(domain, r_bar, det.per_axis);
    let delta0 = delta0_lower_bound(&pts, pitch, det.det, det.lip);
    if !(delta0.value > 0.0) {
        return Err(KamError::HessianSampling("det K_yy lower bound is not positive".into()));
    }
    let theta0 = (sys.m.powi(d as i32) / delta0.value).max(c.theta);
    let (n_cover, method) = covering_count(domain, r_bar);
    let applicable = sys.epsilon < c.eps_actions;
    let geometric = n_cover * r_bar.powi(d as i32 - 1);
    let bound = applicable.then(|| ledger.c_bar_star * theta0 * geometric / sys.m * c.alpha_star * sys.epsilon.sqrt());
    Ok(MeasureReport {
        mode: "general".into(),
        outcome: if applicable { Outcome::Bound } else { Outcome::NotApplicable },
        d,
        tau: ledger.tau,
        rho: sys.rho,
        s: sys.s,
        s_star,
        m: sys.m,
        l: sys.l,
        p_norm: sys.p_norm,
        theta,
        epsilon: sys.epsilon,
        epsilon_star_frak: c.eps_star,
        r_bar,
        alpha_star: c.alpha_star,
        epsilon_star_actions: c.eps_actions,
        delta0,
        theta0,
        rho_step: c.alpha_star * sys.l * sys.epsilon.sqrt() / ledger.c0,
        covering_count: n_cover,
        covering_method: method,
        series_lo: ledger.s_lo,
        series_hi: ledger.s_hi,
        constant: ledger.c_bar_star,
        geometric_factor: geometric,
        bound,
    })
}

/// Domain bounded by a canonical surface: ĉ*·θ₀·M⁻¹·max{sec, ℋ^{d−1}}·α*·√ε.
pub fn smooth_case_bound(
    sys: &SystemData,
    surface: &SurfaceSpec,
    det: &DetSampler,
    s_star: f64,
    ledger: &ConstantLedger,
) -> Result<MeasureReport> {
    if surface.dim() != sys.d || ledger.d != sys.d {
        return invalid("dimension mismatch");
    }
    let d = sys.d;
    let props = surface_properties(surface)?;
    let theta = sys.theta();
    let r_bar = sys.rho.min(props.minfoc).min(1.0 / props.curvature_kappa) / (d as f64).sqrt();
    let c = common(sys, r_bar, s_star, ledger);
    let grown = DomainSpec::Ball {
        center: surface.center().to_vec(),
        radius: surface.outer_radius() + (d as f64).sqrt() * r_bar,
    };
    let (pts, pitch) = grown.lattice(det.per_axis);
    let delta0 = delta0_lower_bound(&pts, pitch, det.det, det.lip);
    if !(delta0.value > 0.0) {
        return Err(KamError::HessianSampling("det K_yy lower bound is not positive".into()));
    }
    let theta0 = (sys.m.powi(d as i32) / delta0.value).max(c.theta);
    let applicable = sys.epsilon < c.eps_actions;
    let geometric = props.max_section.max(props.area);
    let bound = applicable.then(|| ledger.c_hat_star * theta0 * geometric / sys.m * c.alpha_star * sys.epsilon.sqrt());
    Ok(MeasureReport {
        mode: "smooth".into(),
        outcome: if applicable { Outcome::Bound } else { Outcome::NotApplicable },
        d,
        tau: ledger.tau,
        rho: sys.rho,
        s: sys.s,
        s_star,
        m: sys.m,
        l: sys.l,
        p_norm: sys.p_norm,
        theta,
        epsilon: sys.epsilon,
        epsilon_star_frak: c.eps_star,
        r_bar,
        alpha_star: c.alpha_star,
        epsilon_star_actions: c.eps_actions,
        delta0,
        theta0,
        rho_step: c.alpha_star * sys.l * sys.epsilon.sqrt() / ledger.c0,
        covering_count: 1.0,
        covering_method: "not used".into(),
        series_lo: ledger.s_lo,
        series_hi: ledger.s_hi,
        constant: ledger.c_hat_star,
        geometric_factor: geometric,
        bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::build_ledger;

    #[test]
    fn series_examples() {
        let (lo, hi) = dioph_series(2, 2.0, 2).unwrap();
        let expect = 4.0 + 4.0 / (4.0 * 2f64.sqrt()) + 0.5;
        assert!((lo - expect).abs() < 1e-14);
        assert!(hi > lo);
        let (lo, hi) = dioph_series(2, 10.0, 1).unwrap();
        assert_eq!(lo, 4.0);
        assert!(hi - lo <= 2.0);
        assert!(matches!(dioph_series(2, 1.0, 4), Err(KamError::DivergentSeries)));
    }

    #[test]
    fn epsilon_star_scaling() {
        let l = build_ledger(2, 2.0).unwrap();
        let a = epsilon_star(1.0, 0.5, 1.0, &l);
        let b = epsilon_star(1.0, 0.5, 2.0, &l);
        assert!((a / b - 64.0).abs() < 1e-12);
        assert!((a - 0.5f64.powi(31) / l.c_star).abs() <= 1e-15 * a);
    }

    #[test]
    fn resonant_zone_examples() {
        let (_, s_hi) = dioph_series(2, 2.0, 64).unwrap();
        assert_eq!(resonant_zone_measure(2, s_hi, 0.0, 1.0, 1.0, 1.0, 1.0), 0.0);
        let one = resonant_zone_measure(2, s_hi, 1.0, 1.0, 1.0, 1.0, 1.0);
        assert!((one - 4.0 * 2f64.sqrt() * s_hi).abs() < 1e-12);
        assert_eq!(resonant_zone_measure(2, s_hi, 2.0, 1.0, 1.0, 1.0, 1.0), 2.0 * one);
    }

    #[test]
    fn beta_values() {
        let b0 = abstract_bound(0.0, 1.0, 0.0, 2).unwrap();
        assert!((b0 - (2.0 * std::f64::consts::PI).powi(2)).abs() < 1e-12);
        assert_eq!(abstract_bound(0.01, 0.0, 0.0, 2).unwrap(), 0.0);
        assert!(abstract_bound(0.2, 1.0, 1.0, 2).is_err());
    }

    #[test]
    fn r_bar_example() {
        let l = build_ledger(2, 2.0).unwrap();
        let sys = SystemData { d: 2, m: 1.0, l: 1.0, p_norm: 1.0, epsilon: 0.0, rho: 0.9, s: 1.0 };
        let det = |_: &[f64]| 1.0;
        let sampler = DetSampler { det: &det, lip: 0.0, per_axis: 5 };
        let dom = DomainSpec::Box { lo: vec![0.0, 0.0], hi: vec![1.0, 1.0] };
        let rep = general_case_bound(&sys, &dom, &sampler, 0.5, &l).unwrap();
        assert!((rep.r_bar - 0.1).abs() < 1e-15);
        assert_eq!(rep.bound, Some(0.0));
    }
}
