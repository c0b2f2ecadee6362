//! Truncated Taylor (in the actions) × Fourier (in the angles) series with a majorant norm.
//!
//! A function is stored as a sparse table c_{α,k} of complex coefficients multiplying
//! (y − y₀)^α e^{ik·x}, plus a scalar tail t bounding whatever was discarded.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, KamError, Result};
use crate::index::{deg, factorial, l1, shell_count};

/// Default per-operation pessimism for reported bounds.
pub const PESSIMISM_PER_OP: f64 = 1e-12;

pub fn pessimism(opcount: usize) -> f64 {
    1.0 + PESSIMISM_PER_OP * opcount as f64
}

pub type Key = (Vec<u32>, Vec<i32>);

#[derive(Clone, Debug, PartialEq)]
pub struct FourierTaylorFunction {
    pub d: usize,
    pub y0: Vec<f64>,
    pub r: f64,
    pub s: f64,
    pub p: usize,
    pub k_max: usize,
    pub tail: f64,
    coeffs: BTreeMap<Key, Complex64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DerivativeBound {
    /// p!·N(f)·(r−r')^{−|l|}(s−s')^{−|k|}
    pub cauchy: f64,
    /// Σ over stored coefficients of the exact derivative weights, plus the Cauchy bound of the tail.
    pub direct: f64,
    pub form: &'static str,
}

impl FourierTaylorFunction {
    pub fn zero(d: usize, y0: Vec<f64>, r: f64, s: f64, p: usize, k_max: usize) -> Result<Self> {
        if d == 0 || y0.len() != d {
            return invalid("dimension mismatch");
        }
        if !(r > 0.0) || !(s > 0.0) {
            return invalid("radii must be positive");
        }
        Ok(FourierTaylorFunction { d, y0, r, s, p, k_max, tail: 0.0, coeffs: BTreeMap::new() })
    }

    /// Same domain and caps, no coefficients.
    pub fn like(&self) -> Self {
        FourierTaylorFunction { tail: 0.0, coeffs: BTreeMap::new(), ..self.clone() }
    }

    pub fn constant(d: usize, r: f64, s: f64, c: f64) -> Self {
        let mut f = Self::zero(d, vec![0.0; d], r, s, 0, 0).unwrap();
        f.insert(vec![0; d], vec![0; d], Complex64::new(c, 0.0)).unwrap();
        f
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&Key, &Complex64)> {
        self.coeffs.iter()
    }

    pub fn get(&self, alpha: &[u32], k: &[i32]) -> Complex64 {
        self.coeffs.get(&(alpha.to_vec(), k.to_vec())).copied().unwrap_or_default()
    }

    fn check_key(&self, alpha: &[u32], k: &[i32]) -> Result<()> {
        if alpha.len() != self.d || k.len() != self.d {
            return invalid("index dimension mismatch");
        }
        if deg(alpha) as usize > self.p || l1(k) as usize > self.k_max {
            return invalid(format!("index ({alpha:?},{k:?}) exceeds caps (p={}, K={})", self.p, self.k_max));
        }
        Ok(())
    }

    /// Adds c to the coefficient at (α, k).
    pub fn insert(&mut self, alpha: Vec<u32>, k: Vec<i32>, c: Complex64) -> Result<()> {
        self.check_key(&alpha, &k)?;
        *self.coeffs.entry((alpha, k)).or_default() += c;
        Ok(())
    }

    /// Adds amp·η^α·cos(k·x + phase) keeping the reality symmetry.
    pub fn add_cos(&mut self, alpha: Vec<u32>, k: Vec<i32>, amp: f64, phase: f64) -> Result<()> {
        if k.iter().all(|&v| v == 0) {
            return self.insert(alpha, k, Complex64::new(amp * phase.cos(), 0.0));
        }
        let half = Complex64::from_polar(amp / 2.0, phase);
        let neg: Vec<i32> = k.iter().map(|v| -v).collect();
        self.insert(alpha.clone(), k, half)?;
        self.insert(alpha, neg, half.conj())
    }

    /// Drops coefficients with modulus ≤ tol (exact zeros by default).
    pub fn prune(&mut self, tol: f64) {
        self.coeffs.retain(|_, c| c.norm() > tol);
    }

    fn weight(&self, alpha: &[u32], k: &[i32]) -> f64 {
        self.r.powi(deg(alpha) as i32) * (l1(k) as f64 * self.s).exp()
    }

    /// Coefficient part of the majorant, without the tail.
    pub fn coeff_norm(&self) -> f64 {
        self.coeffs.iter().map(|((a, k), c)| c.norm() * self.weight(a, k)).sum()
    }

    /// N(f) = Σ|c_{α,k}| r^{|α|} e^{|k|₁ s} + t.
    pub fn norm_majorant(&self) -> f64 {
        self.coeff_norm() + self.tail
    }

    /// Majorant evaluated on other radii (r', s') without changing the function.
    pub fn norm_at(&self, r: f64, s: f64) -> f64 {
        self.coeffs
            .iter()
            .map(|((a, k), c)| c.norm() * r.powi(deg(a) as i32) * (l1(k) as f64 * s).exp())
            .sum::<f64>()
            + self.tail
    }

    pub fn eval(&self, y: &[Complex64], x: &[Complex64]) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for ((a, k), c) in &self.coeffs {
            let mut term = *c;
            for i in 0..self.d {
                if a[i] > 0 {
                    term *= (y[i] - self.y0[i]).powu(a[i]);
                }
            }
            let phase: Complex64 = (0..self.d).map(|i| x[i] * k[i] as f64).sum();
            acc += term * (Complex64::i() * phase).exp();
        }
        acc
    }

    pub fn eval_real(&self, y: &[f64], x: &[f64]) -> f64 {
        let yc: Vec<Complex64> = y.iter().map(|&v| v.into()).collect();
        let xc: Vec<Complex64> = x.iter().map(|&v| v.into()).collect();
        self.eval(&yc, &xc).re
    }

    /// Max |c_{α,k} − conj(c_{α,−k})| over stored modes.
    pub fn reality_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for ((a, k), c) in &self.coeffs {
            let neg: Vec<i32> = k.iter().map(|v| -v).collect();
            worst = worst.max((c - self.get(a, &neg).conj()).norm());
        }
        worst
    }

    pub fn derivative_bound(&self, l: &[u32], k: &[u32], r_prime: f64, s_prime: f64) -> Result<DerivativeBound> {
        if l.len() != self.d || k.len() != self.d {
            return invalid("multi-index dimension mismatch");
        }
        if !(r_prime >= 0.0 && r_prime < self.r && s_prime >= 0.0 && s_prime < self.s) {
            return Err(KamError::DegenerateCauchyMargin);
        }
        let nl = deg(l) as i32;
        let nk = deg(k) as i32;
        let pf = factorial((nl + nk) as u32);
        let shrink = (self.r - r_prime).powi(-nl) * (self.s - s_prime).powi(-nk);
        let cauchy = pf * self.norm_majorant() * shrink;
        let mut direct = 0.0;
        for ((a, m), c) in &self.coeffs {
            if (0..self.d).any(|i| a[i] < l[i]) {
                continue;
            }
            let mut w = 1.0;
            for i in 0..self.d {
                for j in 0..l[i] {
                    w *= (a[i] - j) as f64;
                }
                w *= (m[i].unsigned_abs() as f64).powi(k[i] as i32);
            }
            w *= r_prime.powi(deg(a) as i32 - nl) * (l1(m) as f64 * s_prime).exp();
            direct += c.norm() * w;
        }
        direct += pf * self.tail * shrink;
        let f = pessimism(self.len() + 1);
        Ok(DerivativeBound { cauchy: cauchy * f, direct: direct * f, form: "negative-exponent Cauchy" })
    }

    /// T_N f and a bound on |f − T_N f| on the strip of half-width s'.
    pub fn truncate(&self, n: usize, s_prime: f64) -> Result<(Self, f64)> {
        if !(s_prime >= 0.0 && s_prime < self.s) {
            return invalid("truncate requires s' < s");
        }
        let mut low = self.like();
        low.k_max = self.k_max.min(n);
        low.tail = self.tail;
        let mut dropped = 0.0;
        let mut ops = 0;
        for ((a, k), c) in &self.coeffs {
            if (l1(k) as usize) <= n {
                low.coeffs.insert((a.clone(), k.clone()), *c);
            } else {
                dropped += c.norm() * self.r.powi(deg(a) as i32) * (l1(k) as f64 * s_prime).exp();
                ops += 1;
            }
        }
        if self.tail > 0.0 {
            dropped += shell_tail(self.d, n, self.s - s_prime) * self.norm_majorant();
        }
        Ok((low, dropped * pessimism(ops + 1)))
    }

    /// The coefficients with |k|₁ > n; complement of the first output of `truncate`.
    pub fn high_part(&self, n: usize) -> Self {
        let mut hi = self.like();
        for ((a, k), c) in &self.coeffs {
            if (l1(k) as usize) > n {
                hi.coeffs.insert((a.clone(), k.clone()), *c);
            }
        }
        hi
    }

    /// ⟨f⟩: the k = 0 part.
    pub fn average(&self) -> Self {
        let mut out = self.like();
        for ((a, k), c) in &self.coeffs {
            if k.iter().all(|&v| v == 0) {
                out.coeffs.insert((a.clone(), k.clone()), *c);
            }
        }
        out.tail = self.tail;
        out
    }

    fn check_compatible(&self, g: &Self) -> Result<()> {
        if self.d != g.d {
            return invalid("dimension mismatch");
        }
        if self.y0.iter().zip(&g.y0).any(|(a, b)| a != b) {
            return Err(KamError::IncompatibleCenters);
        }
        Ok(())
    }

    pub fn add(&self, g: &Self) -> Result<Self> {
        self.check_compatible(g)?;
        let mut out = self.like();
        out.r = self.r.min(g.r);
        out.s = self.s.min(g.s);
        out.p = self.p.max(g.p);
        out.k_max = self.k_max.max(g.k_max);
        out.coeffs = self.coeffs.clone();
        for (key, c) in &g.coeffs {
            *out.coeffs.entry(key.clone()).or_default() += c;
        }
        out.tail = self.tail + g.tail;
        Ok(out)
    }

    pub fn scale(&self, c: f64) -> Self {
        let mut out = self.clone();
        for v in out.coeffs.values_mut() {
            *v *= c;
        }
        out.tail *= c.abs();
        out
    }

    pub fn sub(&self, g: &Self) -> Result<Self> {
        self.add(&g.scale(-1.0))
    }

    /// Coefficientwise convolution. Terms beyond the caps go to the tail:
    /// t = overflow + N_c(f)·t_g + t_f·N_c(g) + t_f·t_g.
    pub fn multiply(&self, g: &Self) -> Result<Self> {
        self.check_compatible(g)?;
        let mut out = self.like();
        out.r = self.r.min(g.r);
        out.s = self.s.min(g.s);
        out.p = self.p.max(g.p);
        out.k_max = self.k_max.max(g.k_max);
        let mut overflow = 0.0;
        for ((a, k), c) in &self.coeffs {
            for ((b, m), e) in &g.coeffs {
                let ab: Vec<u32> = a.iter().zip(b).map(|(x, y)| x + y).collect();
                let km: Vec<i32> = k.iter().zip(m).map(|(x, y)| x + y).collect();
                let v = c * e;
                if deg(&ab) as usize > out.p || l1(&km) as usize > out.k_max {
                    overflow += v.norm() * out.weight(&ab, &km);
                } else {
                    *out.coeffs.entry((ab, km)).or_default() += v;
                }
            }
        }
        out.coeffs.retain(|_, c| *c != Complex64::new(0.0, 0.0));
        out.tail = overflow + self.coeff_norm() * g.tail + self.tail * g.coeff_norm() + self.tail * g.tail;
        Ok(out)
    }

    /// ∂f/∂y_i, exact in coefficients.
    pub fn dy(&self, i: usize) -> Self {
        let mut out = self.like();
        for ((a, k), c) in &self.coeffs {
            if a[i] > 0 {
                let mut b = a.clone();
                b[i] -= 1;
                out.coeffs.insert((b, k.clone()), c * a[i] as f64);
            }
        }
        out
    }

    /// ∂f/∂x_i, exact in coefficients.
    pub fn dx(&self, i: usize) -> Self {
        let mut out = self.like();
        for ((a, k), c) in &self.coeffs {
            if k[i] != 0 {
                out.coeffs.insert((a.clone(), k.clone()), c * Complex64::new(0.0, k[i] as f64));
            }
        }
        out
    }

    /// D_ω f = ω·∂_x f.
    pub fn lie_derivative(&self, omega: &[f64]) -> Self {
        let mut out = self.like();
        for ((a, k), c) in &self.coeffs {
            let wk: f64 = omega.iter().zip(k).map(|(w, &v)| w * v as f64).sum();
            if wk != 0.0 {
                out.coeffs.insert((a.clone(), k.clone()), c * Complex64::new(0.0, wk));
            }
        }
        out
    }

    /// f(y + v(x), x) re-expanded on the action radius r − margin.
    pub fn compose_near_identity(&self, v: &[Self], margin: f64) -> Result<Self> {
        if v.len() != self.d {
            return invalid("shift must have d components");
        }
        if !(margin >= 0.0 && margin < self.r) {
            return Err(KamError::LeavesDomain);
        }
        for vi in v {
            self.check_compatible(vi)?;
            if vi.norm_majorant() > margin {
                return Err(KamError::LeavesDomain);
            }
        }
        let r_new = self.r - margin;
        let kv = v.iter().map(|f| f.k_max).max().unwrap_or(0);
        let mut base = self.like();
        base.r = r_new;
        base.k_max = self.k_max + self.p * kv;
        // s_i = η_i + v_i, with v_i seen on the new domain
        let mut shifted = Vec::with_capacity(self.d);
        for (i, vi) in v.iter().enumerate() {
            let mut e = base.clone();
            let mut a = vec![0u32; self.d];
            a[i] = 1;
            e.coeffs.insert((a, vec![0; self.d]), Complex64::new(1.0, 0.0));
            let mut vv = vi.clone();
            vv.r = r_new;
            vv.p = self.p;
            vv.k_max = base.k_max;
            shifted.push(e.add(&vv)?);
        }
        // group f by Taylor exponent
        let mut slices: BTreeMap<Vec<u32>, Self> = BTreeMap::new();
        for ((a, k), c) in &self.coeffs {
            let sl = slices.entry(a.clone()).or_insert_with(|| base.clone());
            sl.coeffs.insert((vec![0; self.d], k.clone()), *c);
        }
        let mut powers: Vec<Vec<Self>> = Vec::with_capacity(self.d);
        for si in &shifted {
            let mut pw = vec![FourierTaylorFunction::constant_like(&base, 1.0)];
            for j in 1..=self.p {
                let next = pw[j - 1].multiply(si)?;
                pw.push(next);
            }
            powers.push(pw);
        }
        let mut out = base.clone();
        for (a, sl) in slices {
            let mut term = sl;
            for i in 0..self.d {
                if a[i] > 0 {
                    term = term.multiply(&powers[i][a[i] as usize])?;
                }
            }
            out = out.add(&term)?;
        }
        out.r = r_new;
        out.tail += self.tail;
        out.prune(0.0);
        Ok(out)
    }

    fn constant_like(base: &Self, c: f64) -> Self {
        let mut f = base.like();
        f.coeffs.insert((vec![0; base.d], vec![0; base.d]), Complex64::new(c, 0.0));
        f
    }

    pub fn to_json_value(&self) -> FtfJson {
        FtfJson {
            d: self.d,
            y0: self.y0.clone(),
            r: self.r,
            s: self.s,
            p: self.p,
            k_cap: self.k_max,
            tail: self.tail,
            entries: self
                .coeffs
                .iter()
                .map(|((a, k), c)| FtfEntry { alpha: a.clone(), k: k.clone(), re: c.re, im: c.im })
                .collect(),
        }
    }

    pub fn from_json_value(j: &FtfJson) -> Result<Self> {
        let mut f = Self::zero(j.d, j.y0.clone(), j.r, j.s, j.p, j.k_cap)?;
        if !(j.tail >= 0.0) {
            return invalid("tail must be nonnegative");
        }
        f.tail = j.tail;
        for e in &j.entries {
            f.insert(e.alpha.clone(), e.k.clone(), Complex64::new(e.re, e.im))?;
        }
        Ok(f)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_json_value()).expect("serializable")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let j: FtfJson = serde_json::from_str(s).map_err(|e| KamError::Invalid(e.to_string()))?;
        Self::from_json_value(&j)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FtfEntry {
    pub alpha: Vec<u32>,
    pub k: Vec<i32>,
    pub re: f64,
    pub im: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FtfJson {
    pub d: usize,
    pub y0: Vec<f64>,
    pub r: f64,
    pub s: f64,
    pub p: usize,
    #[serde(rename = "K")]
    pub k_cap: usize,
    pub tail: f64,
    pub entries: Vec<FtfEntry>,
}

/// Σ_{m>n} #{|k|₁ = m}·e^{−mδ}: exact shells until the remainder is negligible, then a
/// geometric bound on the envelope 2^d·C(m+d−1, d−1).
pub fn shell_tail(d: usize, n: usize, delta: f64) -> f64 {
    assert!(delta > 0.0);
    let mut sum = 0.0;
    let mut m = n as u64 + 1;
    loop {
        let term = shell_count(d, m) * (-(m as f64) * delta).exp();
        sum += term;
        let next = m + 1;
        let q = ((next + d as u64 - 1) as f64 / next as f64) * (-delta).exp();
        if q < 1.0 {
            let env = 2f64.powi(d as i32)
                * crate::index::binom(next + d as u64 - 1, d as u64 - 1)
                * (-(next as f64) * delta).exp();
            let rest = env / (1.0 - q);
            if rest <= 1e-17 * sum || rest < 1e-300 {
                return sum + rest;
            }
        }
        m = next;
        if m > 10_000_000 {
            return f64::INFINITY;
        }
    }
}

/// Frequency vector with a brute-force Diophantine certificate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyVector {
    pub omega: Vec<f64>,
    pub alpha: f64,
    pub tau: f64,
    pub k_cert: usize,
}

impl FrequencyVector {
    /// α := min over 0 < |k|₁ ≤ K_cert of |ω·k|·|k|₁^τ.
    pub fn certify(omega: Vec<f64>, tau: f64, k_cert: usize) -> Result<Self> {
        let (alpha, kmin) = min_small_divisor(&omega, tau, k_cert);
        if alpha == 0.0 {
            return Err(KamError::ResonantFrequency(kmin));
        }
        Ok(FrequencyVector { omega, alpha, tau, k_cert })
    }

    /// Uses a caller-chosen α, checked against the brute-force certificate.
    pub fn with_alpha(omega: Vec<f64>, alpha: f64, tau: f64, k_cert: usize) -> Result<Self> {
        let cert = Self::certify(omega, tau, k_cert)?;
        if alpha > cert.alpha {
            return invalid(format!("alpha {alpha} exceeds certified {}", cert.alpha));
        }
        Ok(FrequencyVector { alpha, ..cert })
    }

    pub fn dot(&self, k: &[i32]) -> f64 {
        self.omega.iter().zip(k).map(|(w, &v)| w * v as f64).sum()
    }
}

/// Minimum of |ω·k|·|k|₁^τ over one representative of each ±k pair with 0 < |k|₁ ≤ kmax.
pub fn min_small_divisor(omega: &[f64], tau: f64, kmax: usize) -> (f64, Vec<i32>) {
    use rayon::prelude::*;
    let d = omega.len();
    if d == 1 {
        return (omega[0].abs(), vec![1]);
    }
    // first coordinate k₀ ≥ 0; the rest range over the remaining 1-norm budget
    let best = (0..=kmax as i32)
        .into_par_iter()
        .map(|k0| {
            let mut best = (f64::INFINITY, vec![0; d]);
            let mut cur = vec![0i32; d];
            cur[0] = k0;
            scan_rest(omega, tau, &mut cur, 1, kmax as i32 - k0, k0 as f64 * omega[0], k0.unsigned_abs(), &mut best);
            best
        })
        .reduce(
            || (f64::INFINITY, vec![0; d]),
            |a, b| if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a },
        );
    best
}

#[allow(clippy::too_many_arguments)]
fn scan_rest(
    omega: &[f64],
    tau: f64,
    cur: &mut Vec<i32>,
    i: usize,
    budget: i32,
    partial: f64,
    norm: u32,
    best: &mut (f64, Vec<i32>),
) {
    let d = omega.len();
    if i == d {
        if norm == 0 || !crate::index::is_positive_half(cur) {
            return;
        }
        let v = partial.abs() * (norm as f64).powf(tau);
        if v < best.0 {
            *best = (v, cur.clone());
        }
        return;
    }
    for ki in -budget..=budget {
        cur[i] = ki;
        scan_rest(omega, tau, cur, i + 1, budget - ki.abs(), partial + ki as f64 * omega[i], norm + ki.unsigned_abs(), best);
    }
    cur[i] = 0;
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cos1(s: f64) -> FourierTaylorFunction {
        let mut f = FourierTaylorFunction::zero(2, vec![0.0, 0.0], 1.0, s, 0, 2).unwrap();
        f.add_cos(vec![0, 0], vec![1, 0], 1.0, 0.0).unwrap();
        f
    }

    #[test]
    fn norm_examples() {
        let mut f = FourierTaylorFunction::zero(2, vec![0.0; 2], 1.0, 0.5, 0, 2).unwrap();
        f.insert(vec![0, 0], vec![1, 1], 3.0.into()).unwrap();
        f.insert(vec![0, 0], vec![-1, -1], 3.0.into()).unwrap();
        assert!((f.norm_majorant() - 6.0 * 1f64.exp()).abs() < 1e-12);
        assert_eq!(FourierTaylorFunction::constant(2, 1.0, 1.0, 5.0).norm_majorant(), 5.0);
        assert!((cos1(1.0).norm_majorant() - 1f64.exp()).abs() < 1e-15);
    }

    #[test]
    fn derivative_bound_examples() {
        let b = cos1(1.0).derivative_bound(&[0, 0], &[1, 0], 0.5, 0.5).unwrap();
        assert!((b.cauchy - 2.0 * 1f64.exp()).abs() < 1e-9);
        assert!((b.direct - 0.5f64.exp()).abs() < 1e-9);
        let c = FourierTaylorFunction::constant(2, 1.0, 1.0, 7.0);
        assert_eq!(c.derivative_bound(&[1, 0], &[0, 0], 0.5, 0.5).unwrap().direct, 0.0);
        let mut m = FourierTaylorFunction::zero(1, vec![0.0], 1.0, 1.0, 0, 3).unwrap();
        m.insert(vec![0], vec![3], 1.0.into()).unwrap();
        let b = m.derivative_bound(&[0], &[1], 0.5, 0.0).unwrap();
        assert!((b.direct - 3.0).abs() < 1e-9);
        assert_eq!(m.derivative_bound(&[0], &[1], 0.5, 1.0), Err(KamError::DegenerateCauchyMargin));
    }

    #[test]
    fn truncate_examples() {
        let mut f = FourierTaylorFunction::zero(2, vec![0.0; 2], 1.0, 0.5, 0, 2).unwrap();
        f.add_cos(vec![0, 0], vec![1, 0], 1.0, 0.0).unwrap();
        f.add_cos(vec![0, 0], vec![1, 1], 1.0, 0.0).unwrap();
        let (low, t) = f.truncate(1, 0.0).unwrap();
        assert!((t - 1.0).abs() < 1e-10);
        assert_eq!(low.len(), 2);
        let (same, t) = f.truncate(2, 0.0).unwrap();
        assert_eq!(t, 0.0);
        assert_eq!(same.entries().count(), f.len());
    }

    #[test]
    fn shell_tail_matches_direct_sum() {
        // d = 2: shells hold 4m modes
        let direct: f64 = (6..2000).map(|m| 4.0 * m as f64 * (-(m as f64)).exp()).sum();
        assert!((shell_tail(2, 5, 1.0) - direct).abs() < 1e-14);
        assert!((direct - 0.103_240_363_636_674_9).abs() < 1e-15);
    }

    #[test]
    fn average_examples() {
        let mut f = cos1(1.0);
        f.p = 2;
        assert!(f.average().is_empty());
        f.insert(vec![0, 1], vec![0, 0], 1.0.into()).unwrap();
        f.add_cos(vec![2, 0], vec![1, 0], 1.0, 0.0).unwrap();
        let a = f.average();
        assert_eq!(a.len(), 1);
        assert_eq!(a.get(&[0, 1], &[0, 0]), 1.0.into());
    }

    #[test]
    fn multiply_cos_squared() {
        let f = cos1(1.0);
        let g = f.multiply(&f).unwrap();
        assert!((g.get(&[0, 0], &[0, 0]).re - 0.5).abs() < 1e-15);
        assert!((g.get(&[0, 0], &[2, 0]).re - 0.25).abs() < 1e-15);
        assert_eq!(g.tail, 0.0);
        let two = FourierTaylorFunction::constant(2, 1.0, 1.0, 2.0);
        let h = f.multiply(&two).unwrap();
        assert_eq!(h.get(&[0, 0], &[1, 0]), 1.0.into());
    }

    #[test]
    fn multiply_overflow_goes_to_tail() {
        let mut f = FourierTaylorFunction::zero(1, vec![0.0], 1.0, 0.1, 0, 1).unwrap();
        f.add_cos(vec![0], vec![1], 1.0, 0.0).unwrap();
        let g = f.multiply(&f).unwrap();
        // cos² = ½ + ½cos 2x; the |k| = 2 part is beyond the cap
        assert!((g.tail - 0.5 * (0.2f64).exp()).abs() < 1e-15);
        assert!(g.norm_majorant() <= f.norm_majorant().powi(2) * (1.0 + 1e-12));
    }

    #[test]
    fn compose_examples() {
        let mut f = FourierTaylorFunction::zero(2, vec![0.0; 2], 1.0, 0.5, 2, 4).unwrap();
        f.insert(vec![1, 0], vec![0, 0], 1.0.into()).unwrap();
        let zero = f.like();
        let same = f.compose_near_identity(&[zero.clone(), zero.clone()], 0.1).unwrap();
        assert_eq!(same.get(&[1, 0], &[0, 0]), 1.0.into());
        let mut v = f.like();
        v.add_cos(vec![0, 0], vec![1, 0], 0.01, 0.0).unwrap();
        let g = f.compose_near_identity(&[v.clone(), zero.clone()], 0.1).unwrap();
        assert!((g.get(&[0, 0], &[1, 0]).re - 0.005).abs() < 1e-16);
        assert_eq!(
            f.compose_near_identity(&[v.scale(100.0), zero], 0.1),
            Err(KamError::LeavesDomain)
        );
    }

    #[test]
    fn golden_certificate() {
        let g = (1.0 + 5f64.sqrt()) / 2.0;
        let fv = FrequencyVector::certify(vec![g, 1.0], 2.0, 200).unwrap();
        assert!((fv.alpha - 1.0).abs() < 1e-12);
        assert!(matches!(
            FrequencyVector::certify(vec![1.0, 1.0], 2.0, 5),
            Err(KamError::ResonantFrequency(_))
        ));
    }

    #[test]
    fn json_round_trip() {
        let f = cos1(0.7);
        let back = FourierTaylorFunction::from_json(&f.to_json()).unwrap();
        assert_eq!(back, f);
    }
}
