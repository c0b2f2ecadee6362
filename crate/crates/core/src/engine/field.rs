//! Jet fields: degree-p Taylor jets in the action offset η, sampled on an N^d angle grid.
//!
//! Layout is point-major: `data[pt * nj + g]` holds the coefficient of η^{idx[g]} at grid point
//! `pt`. A field is either in physical (angle samples) or spectral (Fourier coefficients)
//! representation; the caller tracks which.

use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::index::{binom, deg, factorial, l1, taylor_indices};

type C = Complex64;

pub struct JetSpace {
    pub d: usize,
    pub p: usize,
    pub idx: Vec<Vec<u32>>,
    pos: HashMap<Vec<u32>, usize>,
    mul: Vec<(usize, usize, usize)>,
    /// For each target g: pairs (i, j) with idx[i] + idx[j] = idx[g] and j ≠ 0.
    div_terms: Vec<Vec<(usize, usize)>>,
    /// up[i][g] = position of idx[g] + e_i, if within degree p.
    up: Vec<Vec<Option<usize>>>,
    /// (source α, target γ, Π C(α_i, γ_i)) for γ ≤ α.
    shift_terms: Vec<(usize, usize, f64)>,
}

impl JetSpace {
    pub fn new(d: usize, p: usize) -> Self {
        let idx = taylor_indices(d, p);
        let pos: HashMap<Vec<u32>, usize> = idx.iter().cloned().enumerate().map(|(i, a)| (a, i)).collect();
        let mut mul = Vec::new();
        let mut div_terms = vec![Vec::new(); idx.len()];
        for (i, a) in idx.iter().enumerate() {
            for (j, b) in idx.iter().enumerate() {
                if deg(a) + deg(b) <= p as u32 {
                    let sum: Vec<u32> = a.iter().zip(b).map(|(x, y)| x + y).collect();
                    let g = pos[&sum];
                    mul.push((i, j, g));
                    if j != 0 {
                        div_terms[g].push((i, j));
                    }
                }
            }
        }
        let up = (0..d)
            .map(|i| {
                idx.iter()
                    .map(|a| {
                        let mut b = a.clone();
                        b[i] += 1;
                        pos.get(&b).copied()
                    })
                    .collect()
            })
            .collect();
        let mut shift_terms = Vec::new();
        for (src, a) in idx.iter().enumerate() {
            for (dst, g) in idx.iter().enumerate() {
                if a.iter().zip(g).all(|(x, y)| y <= x) {
                    let c: f64 = a.iter().zip(g).map(|(&x, &y)| binom(x as u64, y as u64)).product();
                    shift_terms.push((src, dst, c));
                }
            }
        }
        JetSpace { d, p, idx, pos, mul, div_terms, up, shift_terms }
    }

    pub fn nj(&self) -> usize {
        self.idx.len()
    }

    pub fn position(&self, alpha: &[u32]) -> Option<usize> {
        self.pos.get(alpha).copied()
    }

    pub fn unit(&self, i: usize) -> usize {
        let mut e = vec![0; self.d];
        e[i] = 1;
        self.pos[&e]
    }

    /// out = a·b, truncated at degree p.
    pub fn mul(&self, a: &[C], b: &[C], out: &mut [C]) {
        out.iter_mut().for_each(|v| *v = C::default());
        for &(i, j, g) in &self.mul {
            out[g] += a[i] * b[j];
        }
    }

    /// out = r / c as jets; requires c[0] ≠ 0.
    pub fn div(&self, r: &[C], c: &[C], out: &mut [C]) {
        for g in 0..self.nj() {
            let mut acc = r[g];
            for &(i, j) in &self.div_terms[g] {
                acc -= out[i] * c[j];
            }
            out[g] = acc / c[0];
        }
    }

    /// out = ∂a/∂η_i.
    pub fn deriv(&self, a: &[C], i: usize, out: &mut [C]) {
        for g in 0..self.nj() {
            out[g] = match self.up[i][g] {
                Some(h) => a[h] * (self.idx[g][i] + 1) as f64,
                None => C::default(),
            };
        }
    }

    /// out = a(η + e) re-expanded at η = 0.
    pub fn translate(&self, a: &[C], e: &[f64], out: &mut [C]) {
        out.iter_mut().for_each(|v| *v = C::default());
        for &(src, dst, c) in &self.shift_terms {
            let mut w = c;
            for i in 0..self.d {
                let k = self.idx[src][i] - self.idx[dst][i];
                if k > 0 {
                    w *= e[i].powi(k as i32);
                }
            }
            out[dst] += a[src] * w;
        }
    }

    pub fn eval(&self, a: &[C], eta: &[C]) -> C {
        self.idx
            .iter()
            .zip(a)
            .map(|(al, c)| {
                let mut t = *c;
                for i in 0..self.d {
                    if al[i] > 0 {
                        t *= eta[i].powu(al[i]);
                    }
                }
                t
            })
            .sum()
    }

    /// 1/β! for a multi-index β.
    pub fn inv_factorial(beta: &[u32]) -> f64 {
        1.0 / beta.iter().map(|&b| factorial(b)).product::<f64>()
    }
}

pub struct Grid {
    pub d: usize,
    pub n: usize,
    pub len: usize,
    /// Integer mode of each spectral slot, row-major with the last axis fastest.
    pub kvec: Vec<Vec<i32>>,
    pub l1: Vec<u32>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Grid {
    pub fn new(d: usize, n: usize) -> Self {
        let len = n.pow(d as u32);
        let freq = |m: usize| if m < n.div_ceil(2) { m as i32 } else { m as i32 - n as i32 };
        let kvec: Vec<Vec<i32>> = (0..len)
            .map(|pt| {
                let mut rest = pt;
                let mut k = vec![0; d];
                for a in (0..d).rev() {
                    k[a] = freq(rest % n);
                    rest /= n;
                }
                k
            })
            .collect();
        let l1s = kvec.iter().map(|k| l1(k)).collect();
        let mut planner = FftPlanner::new();
        Grid { d, n, len, kvec, l1: l1s, fwd: planner.plan_fft_forward(n), inv: planner.plan_fft_inverse(n) }
    }

    /// Slot of mode k, if representable.
    pub fn slot(&self, k: &[i32]) -> Option<usize> {
        let mut pt = 0;
        for &v in k {
            if v.unsigned_abs() as usize >= self.n.div_ceil(2) {
                return None;
            }
            pt = pt * self.n + v.rem_euclid(self.n as i32) as usize;
        }
        Some(pt)
    }

    pub fn angle(&self, pt: usize) -> Vec<f64> {
        let mut rest = pt;
        let mut x = vec![0.0; self.d];
        for a in (0..self.d).rev() {
            x[a] = 2.0 * std::f64::consts::PI * (rest % self.n) as f64 / self.n as f64;
            rest /= self.n;
        }
        x
    }

    fn transform(&self, f: &mut Field, forward: bool) {
        let plan = if forward { &self.fwd } else { &self.inv };
        let (n, nj) = (self.n, f.nj);
        for axis in 0..self.d {
            let stride = n.pow((self.d - 1 - axis) as u32);
            let starts: Vec<usize> =
                (0..self.len).filter(|pt| (pt / stride) % n == 0).collect();
            let lines: Vec<(usize, usize, Vec<C>)> = starts
                .par_iter()
                .flat_map_iter(|&st| {
                    let data = &f.data;
                    (0..nj).map(move |g| {
                        let mut buf: Vec<C> = (0..n).map(|m| data[(st + m * stride) * nj + g]).collect();
                        plan.process(&mut buf);
                        (st, g, buf)
                    })
                })
                .collect();
            for (st, g, buf) in lines {
                for (m, v) in buf.into_iter().enumerate() {
                    f.data[(st + m * stride) * nj + g] = v;
                }
            }
        }
        if forward {
            let scale = 1.0 / self.len as f64;
            f.data.par_iter_mut().for_each(|v| *v *= scale);
        }
    }

    pub fn to_spectral(&self, f: &Field) -> Field {
        let mut out = f.clone();
        self.transform(&mut out, true);
        out
    }

    pub fn to_physical(&self, f: &Field) -> Field {
        let mut out = f.clone();
        self.transform(&mut out, false);
        out
    }

    /// Zeroes modes with |k|₁ > kmax (spectral input).
    pub fn low_pass(&self, f: &Field, kmax: usize) -> Field {
        let mut out = f.clone();
        out.data.par_chunks_mut(f.nj).enumerate().for_each(|(pt, c)| {
            if self.l1[pt] as usize > kmax {
                c.iter_mut().for_each(|v| *v = C::default());
            }
        });
        out
    }

    /// ∂/∂x_i of a spectral field.
    pub fn dx(&self, f: &Field, i: usize) -> Field {
        let mut out = f.clone();
        out.data.par_chunks_mut(f.nj).enumerate().for_each(|(pt, c)| {
            let m = C::new(0.0, self.kvec[pt][i] as f64);
            c.iter_mut().for_each(|v| *v *= m);
        });
        out
    }

    /// Σ|c_{α,k}| r^{|α|} e^{|k|₁ s} over a spectral field, optionally restricted by |k|₁.
    pub fn norm(&self, js: &JetSpace, f: &Field, r: f64, s: f64, keep: impl Fn(u32) -> bool + Sync) -> f64 {
        let rw: Vec<f64> = js.idx.iter().map(|a| r.powi(deg(a) as i32)).collect();
        // fixed-order reduction
        let per_pt: Vec<f64> = f
            .data
            .par_chunks(f.nj)
            .enumerate()
            .map(|(pt, c)| {
                if !keep(self.l1[pt]) {
                    return 0.0;
                }
                let e = (self.l1[pt] as f64 * s).exp();
                c.iter().zip(&rw).map(|(v, w)| v.norm() * w).sum::<f64>() * e
            })
            .collect();
        per_pt.iter().sum()
    }
}

#[derive(Clone, Debug)]
pub struct Field {
    pub nj: usize,
    pub data: Vec<C>,
}

impl Field {
    pub fn zeros(nj: usize, len: usize) -> Self {
        Field { nj, data: vec![C::default(); nj * len] }
    }

    /// The same jet at every grid point.
    pub fn broadcast(jet: &[C], len: usize) -> Self {
        let mut data = Vec::with_capacity(jet.len() * len);
        for _ in 0..len {
            data.extend_from_slice(jet);
        }
        Field { nj: jet.len(), data }
    }

    pub fn at(&self, pt: usize) -> &[C] {
        &self.data[pt * self.nj..(pt + 1) * self.nj]
    }

    pub fn add(&self, o: &Field) -> Field {
        Field { nj: self.nj, data: self.data.par_iter().zip(&o.data).map(|(a, b)| a + b).collect() }
    }

    pub fn sub(&self, o: &Field) -> Field {
        Field { nj: self.nj, data: self.data.par_iter().zip(&o.data).map(|(a, b)| a - b).collect() }
    }

    pub fn scale(&self, c: f64) -> Field {
        Field { nj: self.nj, data: self.data.par_iter().map(|a| a * c).collect() }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.par_iter().map(|v| v.norm()).reduce(|| 0.0, f64::max)
    }

    /// Pointwise jet product (physical fields).
    pub fn mul(&self, js: &JetSpace, o: &Field) -> Field {
        let mut out = Field::zeros(self.nj, self.data.len() / self.nj);
        out.data
            .par_chunks_mut(self.nj)
            .zip(self.data.par_chunks(self.nj).zip(o.data.par_chunks(self.nj)))
            .for_each(|(c, (a, b))| js.mul(a, b, c));
        out
    }

    pub fn deriv(&self, js: &JetSpace, i: usize) -> Field {
        let mut out = Field::zeros(self.nj, self.data.len() / self.nj);
        out.data.par_chunks_mut(self.nj).zip(self.data.par_chunks(self.nj)).for_each(|(c, a)| js.deriv(a, i, c));
        out
    }

    pub fn translate(&self, js: &JetSpace, e: &[f64]) -> Field {
        let mut out = Field::zeros(self.nj, self.data.len() / self.nj);
        out.data.par_chunks_mut(self.nj).zip(self.data.par_chunks(self.nj)).for_each(|(c, a)| js.translate(a, e, c));
        out
    }

    /// Drops imaginary parts (physical fields of real functions).
    pub fn real_part(&self) -> Field {
        Field { nj: self.nj, data: self.data.par_iter().map(|v| C::new(v.re, 0.0)).collect() }
    }
}

/// A(η + v) − A(η) = Σ_{1≤|β|≤p} ∂^β A · v^β/β!, with v a d-tuple of physical fields.
pub fn eta_shift(js: &JetSpace, a: &Field, v: &[Field]) -> Field {
    eta_shift_from(js, a, v, 1)
}

/// The orders |β| ≥ min_order of the same sum; with min_order = 2 this is the Taylor
/// remainder A(η + v) − A − ∇A·v without the cancellation of the first-order term.
pub fn eta_shift_from(js: &JetSpace, a: &Field, v: &[Field], min_order: u32) -> Field {
    let len = a.data.len() / a.nj;
    let mut out = Field::zeros(a.nj, len);
    let mut deriv: HashMap<Vec<u32>, Field> = HashMap::new();
    let mut power: HashMap<Vec<u32>, Field> = HashMap::new();
    let zero = vec![0u32; js.d];
    deriv.insert(zero.clone(), a.clone());
    let mut one = vec![C::default(); a.nj];
    one[0] = C::new(1.0, 0.0);
    power.insert(zero, Field::broadcast(&one, len));
    for beta in taylor_indices(js.d, js.p).into_iter().skip(1) {
        // build from the predecessor obtained by lowering the last nonzero entry
        let i = (0..js.d).rev().find(|&i| beta[i] > 0).unwrap();
        let mut prev = beta.clone();
        prev[i] -= 1;
        let dv = deriv[&prev].deriv(js, i);
        let pw = power[&prev].mul(js, &v[i]);
        if beta.iter().sum::<u32>() >= min_order {
            let term = dv.mul(js, &pw).scale(JetSpace::inv_factorial(&beta));
            out = out.add(&term);
        }
        deriv.insert(beta.clone(), dv);
        power.insert(beta, pw);
    }
    out
}

/// A(η, x + w(η, x)) by the multivariate Taylor series in x, summed until the newest order
/// falls below `rel_tol` relative to the result. Spectral A, physical w; physical output.
pub fn x_shift(grid: &Grid, js: &JetSpace, a_spec: &Field, w: &[Field], rel_tol: f64, max_order: usize) -> Field {
    let mut out = grid.to_physical(a_spec);
    let len = grid.len;
    let mut one = vec![C::default(); a_spec.nj];
    one[0] = C::new(1.0, 0.0);
    // order-m layer: multi-indices β with |β| = m, with ∂_x^β A (spectral) and w^β/β! (physical)
    let mut layer: Vec<(Vec<u32>, Field, Field)> = vec![(vec![0; js.d], a_spec.clone(), Field::broadcast(&one, len))];
    let scale = out.max_abs().max(f64::MIN_POSITIVE);
    for _m in 1..=max_order {
        let mut next: Vec<(Vec<u32>, Field, Field)> = Vec::new();
        for (beta, da, wb) in &layer {
            for i in 0..js.d {
                // each β of the next order is generated once: only raise at or after the last raised axis
                let last = (0..js.d).rev().find(|&k| beta[k] > 0).unwrap_or(0);
                if i < last {
                    continue;
                }
                let mut nb = beta.clone();
                nb[i] += 1;
                let dnext = grid.dx(da, i);
                let wnext = wb.mul(js, &w[i]).scale(1.0 / nb[i] as f64);
                next.push((nb, dnext, wnext));
            }
        }
        let mut biggest: f64 = 0.0;
        for (_, da, wb) in &next {
            let t = grid.to_physical(da).mul(js, wb);
            biggest = biggest.max(t.max_abs());
            out = out.add(&t);
        }
        layer = next;
        if biggest <= rel_tol * scale {
            break;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(v: f64) -> C {
        C::new(v, 0.0)
    }

    #[test]
    fn jet_division_inverts_multiplication() {
        let js = JetSpace::new(2, 3);
        let a: Vec<C> = (0..js.nj()).map(|i| c(1.0 + i as f64 * 0.3)).collect();
        let b: Vec<C> = (0..js.nj()).map(|i| C::new(2.0 - i as f64 * 0.1, 0.2 * i as f64)).collect();
        let mut ab = vec![C::default(); js.nj()];
        js.mul(&a, &b, &mut ab);
        let mut q = vec![C::default(); js.nj()];
        js.div(&ab, &b, &mut q);
        for (x, y) in q.iter().zip(&a) {
            assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn translate_matches_evaluation() {
        let js = JetSpace::new(2, 3);
        let a: Vec<C> = (0..js.nj()).map(|i| c((i as f64 * 0.7).sin())).collect();
        let e = [0.1, -0.2];
        let mut t = vec![C::default(); js.nj()];
        js.translate(&a, &e, &mut t);
        let z = [c(0.03), c(0.05)];
        let direct = js.eval(&a, &[z[0] + e[0], z[1] + e[1]]);
        assert!((js.eval(&t, &z) - direct).norm() < 1e-14);
    }

    #[test]
    fn fft_round_trip_and_modes() {
        let grid = Grid::new(2, 8);
        let mut f = Field::zeros(1, grid.len);
        for pt in 0..grid.len {
            let x = grid.angle(pt);
            f.data[pt] = c((x[0] + 2.0 * x[1]).cos());
        }
        let s = grid.to_spectral(&f);
        let slot = grid.slot(&[1, 2]).unwrap();
        assert!((s.data[slot] - c(0.5)).norm() < 1e-14);
        let back = grid.to_physical(&s);
        assert!(back.sub(&f).max_abs() < 1e-14);
    }

    #[test]
    fn x_shift_matches_pointwise_value() {
        let js = JetSpace::new(1, 0);
        let grid = Grid::new(1, 32);
        let mut a = Field::zeros(1, grid.len);
        let mut w = Field::zeros(1, grid.len);
        for pt in 0..grid.len {
            let x = grid.angle(pt)[0];
            a.data[pt] = c(x.cos());
            w.data[pt] = c(0.01 * x.sin());
        }
        let shifted = x_shift(&grid, &js, &grid.to_spectral(&a), &[w], 1e-17, 40);
        for pt in 0..grid.len {
            let x = grid.angle(pt)[0];
            assert!((shifted.data[pt].re - (x + 0.01 * x.sin()).cos()).abs() < 1e-14);
        }
    }
}
