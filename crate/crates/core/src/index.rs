//! Multi-index enumeration for Taylor exponents and Fourier modes.

/// All α ∈ ℕ^d with |α|₁ ≤ p, graded by degree then reverse-lex.
pub fn taylor_indices(d: usize, p: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    for deg in 0..=p {
        let mut cur = vec![0u32; d];
        fill_degree(d, deg as u32, 0, &mut cur, &mut out);
    }
    out
}

fn fill_degree(d: usize, left: u32, i: usize, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if i == d - 1 {
        cur[i] = left;
        out.push(cur.clone());
        return;
    }
    for a in (0..=left).rev() {
        cur[i] = a;
        fill_degree(d, left - a, i + 1, cur, out);
    }
}

/// All k ∈ ℤ^d with |k|₁ ≤ kmax, sorted by |k|₁ then lexicographically.
pub fn modes_l1(d: usize, kmax: usize) -> Vec<Vec<i32>> {
    let mut out = Vec::new();
    for m in 0..=kmax {
        out.extend(shell(d, m));
    }
    out
}

/// The modes with |k|₁ = m exactly.
pub fn shell(d: usize, m: usize) -> Vec<Vec<i32>> {
    let mut out = Vec::new();
    let mut cur = vec![0i32; d];
    fill_shell(d, m as i32, 0, &mut cur, &mut out);
    out.sort();
    out
}

fn fill_shell(d: usize, left: i32, i: usize, cur: &mut Vec<i32>, out: &mut Vec<Vec<i32>>) {
    if i == d - 1 {
        cur[i] = left;
        out.push(cur.clone());
        if left != 0 {
            cur[i] = -left;
            out.push(cur.clone());
        }
        return;
    }
    for a in -left..=left {
        cur[i] = a;
        fill_shell(d, left - a.abs(), i + 1, cur, out);
    }
}

/// Number of k ∈ ℤ^d with |k|₁ = m: Σ_i 2^i C(d,i) C(m−1,i−1).
pub fn shell_count(d: usize, m: u64) -> f64 {
    if m == 0 {
        return 1.0;
    }
    let mut total = 0.0;
    for i in 1..=d.min(m as usize) {
        total += 2f64.powi(i as i32) * binom(d as u64, i as u64) * binom(m - 1, i as u64 - 1);
    }
    total
}

pub fn binom(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc.round()
}

pub fn l1(k: &[i32]) -> u32 {
    k.iter().map(|v| v.unsigned_abs()).sum()
}

pub fn deg(a: &[u32]) -> u32 {
    a.iter().sum()
}

pub fn factorial(n: u32) -> f64 {
    (1..=n).fold(1.0, |acc, v| acc * v as f64)
}

/// β! for a multi-index.
pub fn multi_factorial(a: &[u32]) -> f64 {
    a.iter().map(|&v| factorial(v)).product()
}

/// True if k is the representative of the pair {k, −k}: first nonzero entry positive.
pub fn is_positive_half(k: &[i32]) -> bool {
    for &v in k {
        if v != 0 {
            return v > 0;
        }
    }
    false
}
