//! Explicit constants C₀…C₁₂, C*, and the derived c's of the KAM and measure theorems.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{KamError, Result};
use crate::measure::dioph_series;

/// ∫_{ℝ^d} |y|₁^m e^{−|y|₁} dy = 2^d Γ(m+d)/(d−1)!.
pub fn shell_integral(d: usize, m: f64) -> f64 {
    2f64.powi(d as i32) * gamma(m + d as f64) / gamma(d as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub name: String,
    pub value: f64,
    pub formula: String,
    pub provenance: String,
}

/// Integral term of a constant: the exponents m and weights w in Σ w·∫|y|₁^m e^{−|y|₁}.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegralTerm {
    pub constant: String,
    pub weights: Vec<(f64, f64)>,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantLedger {
    pub d: usize,
    pub tau: f64,
    pub nu: f64,
    pub a: f64,
    /// C₀ … C₁₂
    pub c: [f64; 13],
    pub c_star_big: f64,
    pub c_star: f64,
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub c_bar_star: f64,
    pub c_hat_star: f64,
    pub s_lo: f64,
    pub s_hi: f64,
    pub s_trunc: usize,
    /// Undefined in the source; exposed as a free parameter.
    pub a1: f64,
    pub integrals: Vec<IntegralTerm>,
    pub entries: Vec<LedgerEntry>,
}

/// Truncation of the Diophantine series used for S; shells grow like m^{d−1}.
pub fn default_series_trunc(d: usize) -> usize {
    match d {
        0..=2 => 64,
        3 => 24,
        _ => 10,
    }
}

pub fn build_ledger(d: usize, tau: f64) -> Result<ConstantLedger> {
    build_ledger_with(d, tau, 1.0, default_series_trunc(d))
}

pub fn build_ledger_with(d: usize, tau: f64, a1: f64, s_trunc: usize) -> Result<ConstantLedger> {
    if d < 2 {
        return Err(KamError::Invalid("ledger needs d >= 2".into()));
    }
    if !(tau > d as f64 - 1.0) {
        return Err(KamError::DivergentSeries);
    }
    let df = d as f64;
    let nu = tau + 1.0;
    let a = 7.0 * nu + 4.0 * df + 2.0;
    let nne = nu.powf(nu) * (-nu).exp();
    let sq2 = 2f64.sqrt();
    let i = |m: f64| shell_integral(d, m);
    let p2 = |e: f64| 2f64.powf(e);

    let int0 = vec![(1.0, nu), (df, 2.0 * nu)];
    let int1 = vec![(1.0, nu)];
    let int10 = vec![(1.0, nu + 1.0)];
    let int11 = vec![(2.0, tau), (3.0, 2.0 * tau + 1.0), (1.0, 3.0 * tau + 2.0)];
    let eval = |w: &Vec<(f64, f64)>| w.iter().map(|(c, m)| c * i(*m)).sum::<f64>();

    let mut c = [0.0; 13];
    c[0] = 4.0 * 1.5f64.powf(2.0 * nu + df) * eval(&int0);
    c[1] = 2.0 * 1.5f64.powf(nu + df) * eval(&int1);
    c[2] = p2(3.0 * df) * df;
    c[3] = df * df * c[1] * c[1] + 6.0 * df * c[1] + c[2];
    c[4] = ((1.0 + df * df) * c[0]).max(c[3]);
    c[5] = p2(2.0 * nu).max(p2(7.0) * df);
    c[6] = (p2(-df) * c[5]).powf(0.25);
    c[7] = 3.0 * p2(4.0 * nu + 2.0 * df + 3.0) * df * sq2 * (p2(2.0 * nu + 6.0) * df).max(c[4] / 2.0) * c[5];
    c[8] = 3.0 * p2(3.0 * nu + 1.0) * nne * df * c[4] * sq2;
    c[9] = 3.0 * p2(-(4.0 * nu + 2.0 * df)) * df * c[4] * sq2 + p2(-nu) * nne * c[7] * c[8];
    c[10] = 2.0 * 1.5f64.powf(nu + df + 1.0) * eval(&int10);
    c[11] = 8.0 * 1.5f64.powf(3.0 * tau + df + 2.0) * eval(&int11);
    c[12] = (2.0 * c[10]).max(2.0 * c[11]).max(12.0 * c[0]);

    let cs_args = [
        p2(11.0 * nu + 6.0 * df + 4.0) * nne * c[5] * c[5] * c[6] * c[7] * c[8],
        (p2(nu / 2.0 - 2.0 * df + 2.0) * (18.0 * df.powi(3) + 70.0) * nne * c[4] * c[9] / c[12]).powi(2),
        p2(tau + 8.0) * df * df * c[4] * c[9] * sq2,
    ];
    let c_star_big = cs_args.iter().cloned().fold(f64::MIN, f64::max);

    let c0 = p2(-4.0) * c[4];
    let c1 = p2(tau - 0.5) / df * c[9];
    let c2 = p2(2.0 * nu + 6.0) * df * c[9];
    let c3 = c[9];
    let c4 = (1.0 / (4.0 * df)).exp() * c[4] * c[9] / c[12];

    let (s_lo, s_hi) = dioph_series(d, tau, s_trunc)?;
    let two_pi_d = (2.0 * std::f64::consts::PI).powi(d as i32);
    let c_bar_star = 1.25 * two_pi_d * (df * p2(2.0 * df) / c0 + p2(df) * df.powf((df - 1.0) / 2.0) * s_hi);
    let c_hat_star = 2.5 * two_pi_d * (p2(df) / (df.sqrt() * c0) + s_hi);

    let integrals = vec![
        IntegralTerm { constant: "C0".into(), value: eval(&int0), weights: int0 },
        IntegralTerm { constant: "C1".into(), value: eval(&int1), weights: int1 },
        IntegralTerm { constant: "C10".into(), value: eval(&int10), weights: int10 },
        IntegralTerm { constant: "C11".into(), value: eval(&int11), weights: int11 },
    ];

    let closed = "closed form";
    let gamma_form = "Gamma closed form of the 1-norm shell integral";
    let series = format!("Diophantine series upper bracket, K_trunc = {s_trunc}");
    let e = |name: &str, value: f64, formula: &str, prov: &str| LedgerEntry {
        name: name.into(),
        value,
        formula: formula.into(),
        provenance: prov.into(),
    };
    let entries = vec![
        e("nu", nu, "tau + 1", closed),
        e("a", a, "7 nu + 4 d + 2", closed),
        e("C0", c[0], "4 (3/2)^(2 nu + d) * Int(|y|_1^nu + d |y|_1^(2 nu)) e^(-|y|_1) dy", gamma_form),
        e("C1", c[1], "2 (3/2)^(nu + d) * Int |y|_1^nu e^(-|y|_1) dy", gamma_form),
        e("C2", c[2], "2^(3d) d", closed),
        e("C3", c[3], "d^2 C1^2 + 6 d C1 + C2", closed),
        e("C4", c[4], "max{(1 + d^2) C0, C3}", closed),
        e("C5", c[5], "max{2^(2 nu), 2^7 d}", closed),
        e("C6", c[6], "(2^(-d) C5)^(1/4)", closed),
        e("C7", c[7], "3 * 2^(4 nu + 2d + 3) d sqrt2 max{2^(2 nu + 6) d, C4/2} C5", closed),
        e("C8", c[8], "3 * 2^(3 nu + 1) nu^nu e^(-nu) d C4 sqrt2", closed),
        e("C9", c[9], "3 * 2^(-(4 nu + 2d)) d C4 sqrt2 + 2^(-nu) nu^nu e^(-nu) C7 C8", closed),
        e("C10", c[10], "2 (3/2)^(nu + d + 1) * Int |y|_1^(nu+1) e^(-|y|_1) dy", gamma_form),
        e(
            "C11",
            c[11],
            "8 (3/2)^(3 tau + d + 2) * Int (2|y|_1^tau + 3|y|_1^(2 tau + 1) + |y|_1^(3 tau + 2)) e^(-|y|_1) dy",
            gamma_form,
        ),
        e("C12", c[12], "max{2 C10, 2 C11, 12 C0}", closed),
        e(
            "C*",
            c_star_big,
            "max{2^(11 nu + 6d + 4) nu^nu e^(-nu) C5^2 C6 C7 C8, (2^(nu/2 - 2d + 2)(18 d^3 + 70) nu^nu e^(-nu) C4 C9 / C12)^2, 2^(tau + 8) d^2 C4 C9 sqrt2}",
            closed,
        ),
        e("c*", c_star_big, "C*", closed),
        e("c0", c0, "2^(-4) C4", closed),
        e("c1", c1, "2^(tau - 1/2) d^(-1) C9", closed),
        e("c2", c2, "2^(2 nu + 6) d C9", closed),
        e("c3", c3, "C9", closed),
        e("c4", c4, "e^(1/(4d)) C4 C9 / C12", closed),
        e("S_lo", s_lo, "sum over 0 < |k|_1 <= K_trunc of 1/(|k|_1^tau |k|_2)", &series),
        e("S_hi", s_hi, "S_lo + shell-comparison tail bound", &series),
        e(
            "c_bar*",
            c_bar_star,
            "(5/4)(2 pi)^d (d 2^(2d)/c0 + 2^d d^((d-1)/2) S)",
            "closed form with S = S_hi",
        ),
        e("c_hat*", c_hat_star, "(5/2)(2 pi)^d (2^d/(sqrt(d) c0) + S)", "closed form with S = S_hi"),
        e("a1", a1, "free parameter (symbol not defined in the source)", "user input, default 1"),
    ];

    Ok(ConstantLedger {
        d,
        tau,
        nu,
        a,
        c,
        c_star_big,
        c_star: c_star_big,
        c0,
        c1,
        c2,
        c3,
        c4,
        c_bar_star,
        c_hat_star,
        s_lo,
        s_hi,
        s_trunc,
        a1,
        integrals,
        entries,
    })
}

impl ConstantLedger {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.entries.iter().find(|e| e.name == name).map(|e| e.value)
    }

    pub fn to_markdown(&self) -> String {
        let mut out = format!("# Constants (d = {}, tau = {})\n\n| name | value | formula | provenance |\n|---|---|---|---|\n", self.d, self.tau);
        for e in &self.entries {
            out.push_str(&format!("| {} | {:.12e} | `{}` | {} |\n", e.name, e.value, e.formula, e.provenance));
        }
        out
    }
}
