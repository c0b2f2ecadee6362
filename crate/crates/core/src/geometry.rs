//! Coverings, canonical surfaces, tube volumes, Lipschitz measure lemmas and a
//! quantitative inverse function theorem.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{invalid, KamError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainSpec {
    Points { points: Vec<Vec<f64>> },
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
}

impl DomainSpec {
    pub fn dim(&self) -> usize {
        match self {
            DomainSpec::Points { points } => points.first().map_or(0, |p| p.len()),
            DomainSpec::Box { lo, .. } => lo.len(),
            DomainSpec::Ball { center, .. } => center.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DomainSpec::Points { points } => {
                if points.is_empty() {
                    return invalid("empty point set");
                }
                let d = points[0].len();
                if d == 0 || points.iter().any(|p| p.len() != d || p.iter().any(|v| !v.is_finite())) {
                    return invalid("ragged or non-finite point set");
                }
            }
            DomainSpec::Box { lo, hi } => {
                if lo.is_empty() || lo.len() != hi.len() || lo.iter().zip(hi).any(|(a, b)| !(a <= b)) {
                    return invalid("box corners must satisfy lo <= hi");
                }
            }
            DomainSpec::Ball { center, radius } => {
                if center.is_empty() || !(*radius > 0.0) {
                    return invalid("ball needs a center and a positive radius");
                }
            }
        }
        Ok(())
    }

    /// Sup-norm diameter (exact for boxes and balls, pairwise for point sets).
    pub fn diameter(&self) -> f64 {
        match self {
            DomainSpec::Points { points } => {
                let mut diam: f64 = 0.0;
                for (i, a) in points.iter().enumerate() {
                    for b in &points[i + 1..] {
                        diam = diam.max(sup_dist(a, b));
                    }
                }
                diam
            }
            DomainSpec::Box { lo, hi } => lo.iter().zip(hi).map(|(a, b)| b - a).fold(0.0, f64::max),
            DomainSpec::Ball { radius, .. } => 2.0 * radius,
        }
    }

    /// Regular lattice with `n` nodes per axis (endpoints included); points outside a ball are dropped.
    /// Returns the nodes and the pitch.
    pub fn lattice(&self, n: usize) -> (Vec<Vec<f64>>, f64) {
        match self {
            DomainSpec::Points { points } => (points.clone(), 0.0),
            DomainSpec::Box { lo, hi } => {
                let pitch = lo.iter().zip(hi).map(|(a, b)| (b - a) / (n.max(2) - 1) as f64).fold(0.0, f64::max);
                (box_lattice(lo, hi, n), pitch)
            }
            DomainSpec::Ball { center, radius } => {
                let lo: Vec<f64> = center.iter().map(|c| c - radius).collect();
                let hi: Vec<f64> = center.iter().map(|c| c + radius).collect();
                let pts = box_lattice(&lo, &hi, n)
                    .into_iter()
                    .filter(|p| euclid_dist(p, center) <= *radius)
                    .collect();
                (pts, 2.0 * radius / (n.max(2) - 1) as f64)
            }
        }
    }
}

pub fn box_lattice(lo: &[f64], hi: &[f64], n: usize) -> Vec<Vec<f64>> {
    let d = lo.len();
    let n = n.max(1);
    let total = n.pow(d as u32);
    let mut out = Vec::with_capacity(total);
    for mut idx in 0..total {
        let mut p = vec![0.0; d];
        for i in 0..d {
            let j = idx % n;
            idx /= n;
            p[i] = if n == 1 { 0.5 * (lo[i] + hi[i]) } else { lo[i] + (hi[i] - lo[i]) * j as f64 / (n - 1) as f64 };
        }
        out.push(p);
    }
    out
}

pub fn sup_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn euclid_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Upper bound on the r-internal covering number: ([diam/r] + 1)^d.
pub fn covering_bound(diam: f64, r: f64, d: usize) -> u64 {
    assert!(r > 0.0);
    ((diam / r).floor() as u64 + 1).pow(d as u32)
}

/// Greedy max-coverage selection of centers among the points; sup-distance < r covers.
pub fn greedy_internal_cover(points: &[Vec<f64>], r: f64) -> Vec<usize> {
    let n = points.len();
    let covers: Vec<Vec<usize>> =
        (0..n).map(|i| (0..n).filter(|&j| sup_dist(&points[i], &points[j]) < r).collect()).collect();
    let mut covered = vec![false; n];
    let mut left = n;
    let mut centers = Vec::new();
    while left > 0 {
        let mut best = (0usize, 0usize);
        for (i, c) in covers.iter().enumerate() {
            let gain = c.iter().filter(|&&j| !covered[j]).count();
            if gain > best.1 {
                best = (i, gain);
            }
        }
        centers.push(best.0);
        for &j in &covers[best.0] {
            if !covered[j] {
                covered[j] = true;
                left -= 1;
            }
        }
    }
    centers
}

pub const ORACLE_CAP: usize = 20;

/// Exact minimal internal covering number by exhaustive subset search.
pub fn minimal_cover_oracle(points: &[Vec<f64>], r: f64) -> Result<usize> {
    let n = points.len();
    if n > ORACLE_CAP {
        return Err(KamError::SizeCapExceeded(n, ORACLE_CAP));
    }
    if n == 0 {
        return Ok(0);
    }
    let masks: Vec<u32> = (0..n)
        .map(|i| (0..n).filter(|&j| sup_dist(&points[i], &points[j]) < r).fold(0u32, |m, j| m | (1 << j)))
        .collect();
    let full: u32 = if n == 32 { u32::MAX } else { (1u32 << n) - 1 };
    for k in 1..=n {
        if search(&masks, 0, k, 0, full) {
            return Ok(k);
        }
    }
    Ok(n)
}

fn search(masks: &[u32], start: usize, left: usize, acc: u32, full: u32) -> bool {
    if acc == full {
        return true;
    }
    if left == 0 {
        return false;
    }
    (start..masks.len()).any(|i| search(masks, i + 1, left - 1, acc | masks[i], full))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SurfaceSpec {
    Sphere { center: Vec<f64>, radius: f64 },
    Ellipsoid { center: Vec<f64>, semi_axes: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceProperties {
    pub curvature_kappa: f64,
    pub minfoc: f64,
    pub area: f64,
    pub max_section: f64,
}

impl SurfaceSpec {
    pub fn dim(&self) -> usize {
        match self {
            SurfaceSpec::Sphere { center, .. } => center.len(),
            SurfaceSpec::Ellipsoid { center, .. } => center.len(),
        }
    }

    pub fn center(&self) -> &[f64] {
        match self {
            SurfaceSpec::Sphere { center, .. } | SurfaceSpec::Ellipsoid { center, .. } => center,
        }
    }

    /// Largest extent from the center along any axis.
    pub fn outer_radius(&self) -> f64 {
        match self {
            SurfaceSpec::Sphere { radius, .. } => *radius,
            SurfaceSpec::Ellipsoid { semi_axes, .. } => semi_axes.iter().cloned().fold(0.0, f64::max),
        }
    }

    /// Whether y lies in the closed solid bounded by the surface.
    pub fn contains(&self, y: &[f64]) -> bool {
        match self {
            SurfaceSpec::Sphere { center, radius } => euclid_dist(y, center) <= *radius,
            SurfaceSpec::Ellipsoid { center, semi_axes } => {
                y.iter().zip(center).zip(semi_axes).map(|((v, c), a)| ((v - c) / a).powi(2)).sum::<f64>() <= 1.0
            }
        }
    }
}

/// Surface area of the unit (d−1)-sphere in ℝ^d.
pub fn unit_sphere_area(d: usize) -> f64 {
    2.0 * std::f64::consts::PI.powf(d as f64 / 2.0) / gamma(d as f64 / 2.0)
}

/// Volume of the unit ball in ℝ^n.
pub fn unit_ball_volume(n: usize) -> f64 {
    std::f64::consts::PI.powf(n as f64 / 2.0) / gamma(n as f64 / 2.0 + 1.0)
}

pub fn surface_properties(surface: &SurfaceSpec) -> Result<SurfaceProperties> {
    match surface {
        SurfaceSpec::Sphere { center, radius } => {
            let d = center.len();
            if d < 2 || !(*radius > 0.0) {
                return invalid("sphere needs d >= 2 and R > 0");
            }
            Ok(SurfaceProperties {
                curvature_kappa: 1.0 / radius,
                minfoc: *radius,
                area: unit_sphere_area(d) * radius.powi(d as i32 - 1),
                max_section: unit_ball_volume(d - 1) * radius.powi(d as i32 - 1),
            })
        }
        SurfaceSpec::Ellipsoid { center, semi_axes } => {
            let d = center.len();
            if semi_axes.len() != d || semi_axes.iter().any(|a| !(*a > 0.0)) {
                return invalid("semi-axes must be positive, one per dimension");
            }
            let amax = semi_axes.iter().cloned().fold(0.0, f64::max);
            let amin = semi_axes.iter().cloned().fold(f64::INFINITY, f64::min);
            let mut sorted = semi_axes.clone();
            sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
            let area = match d {
                2 => ellipse_perimeter(semi_axes[0], semi_axes[1]),
                3 => ellipsoid_area(semi_axes[0], semi_axes[1], semi_axes[2]),
                _ => return Err(KamError::UnsupportedSurface),
            };
            Ok(SurfaceProperties {
                curvature_kappa: amax / (amin * amin),
                minfoc: amin * amin / amax,
                area,
                max_section: unit_ball_volume(d - 1) * sorted[..d - 1].iter().product::<f64>(),
            })
        }
    }
}

fn ellipse_perimeter(a: f64, b: f64) -> f64 {
    let f = |t: f64| (a * a * t.sin().powi(2) + b * b * t.cos().powi(2)).sqrt();
    4.0 * quadrature::integrate(f, 0.0, std::f64::consts::FRAC_PI_2, 1e-13).integral
}

fn ellipsoid_area(a: f64, b: f64, c: f64) -> f64 {
    // parametrize by polar angle θ ∈ [0, π] and azimuth φ ∈ [0, 2π]; |r_θ × r_φ| in closed form
    let inner = |th: f64| {
        let (st, ct) = th.sin_cos();
        let g = |ph: f64| {
            let (sp, cp) = ph.sin_cos();
            let nx = b * c * st * st * cp;
            let ny = a * c * st * st * sp;
            let nz = a * b * st * ct;
            (nx * nx + ny * ny + nz * nz).sqrt()
        };
        4.0 * quadrature::integrate(g, 0.0, std::f64::consts::FRAC_PI_2, 1e-13).integral
    };
    2.0 * quadrature::integrate(inner, 0.0, std::f64::consts::FRAC_PI_2, 1e-12).integral
}

/// (2/d)((1+ρκ)^d − 1)/κ · ℋ^{d−1}(S), valid for ρ ≤ minfoc.
pub fn tube_volume_bound(surface: &SurfaceSpec, rho: f64) -> Result<f64> {
    let props = surface_properties(surface)?;
    if !(rho > 0.0) {
        return invalid("tube width must be positive");
    }
    if rho > props.minfoc {
        return Err(KamError::TubeOverlapsFocalSet);
    }
    let d = surface.dim() as f64;
    let k = props.curvature_kappa;
    Ok((2.0 / d) * ((1.0 + rho * k).powf(d) - 1.0) / k * props.area)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LipschitzBounds {
    pub image_bound: f64,
    pub diff_bound: f64,
}

pub fn lipschitz_measure_bounds(meas_a: f64, lip: f64, delta: f64, d: usize) -> Result<LipschitzBounds> {
    if meas_a < 0.0 || lip < 0.0 || delta < 0.0 {
        return invalid("inputs must be nonnegative");
    }
    Ok(LipschitzBounds {
        image_bound: lip.powi(d as i32) * meas_a,
        diff_bound: ((1.0 + delta).powi(d as i32) - 1.0) * meas_a,
    })
}

/// Euclidean inner domain D''_ρ of a ball: the concentric ball of radius R − ρ.
pub fn ball_inner_domain(center: &[f64], radius: f64, rho: f64) -> Option<(Vec<f64>, f64)> {
    (rho < radius).then(|| (center.to_vec(), radius - rho))
}

/// Membership in the open Euclidean ρ-neighbourhood of a ball.
pub fn in_ball_neighbourhood(center: &[f64], radius: f64, rho: f64, y: &[f64]) -> bool {
    euclid_dist(y, center) < radius + rho
}

/// Max-row-sum operator norm, matching the sup norm on vectors.
pub fn op_norm_inf(m: &DMatrix<f64>) -> f64 {
    (0..m.nrows()).map(|i| m.row(i).iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Certified local inverse of a C² map on the sup-ball B_r(y₀).
pub struct QuantitativeInverse<'a> {
    pub lambda: f64,
    pub rho: f64,
    pub varrho: f64,
    pub t_norm: f64,
    pub y0: Vec<f64>,
    pub f_y0: Vec<f64>,
    t: DMatrix<f64>,
    f: Box<dyn Fn(&[f64]) -> Vec<f64> + 'a>,
}

/// T := f'(y₀)⁻¹, ϱ := sup‖1 − T f'‖ over a lattice of B_r(y₀) plus a Lipschitz margin
/// ‖T‖·hess_bound·pitch/2; λ = ‖T‖/(1−ϱ), ρ = r/λ.
pub fn quantitative_inverse<'a>(
    f: impl Fn(&[f64]) -> Vec<f64> + 'a,
    jac: impl Fn(&[f64]) -> DMatrix<f64>,
    y0: &[f64],
    r: f64,
    samples: usize,
    hess_bound: f64,
) -> Result<QuantitativeInverse<'a>> {
    let d = y0.len();
    let j0 = jac(y0);
    let t = j0.clone().try_inverse().ok_or(KamError::NoContraction(f64::INFINITY))?;
    let t_norm = op_norm_inf(&t);
    let lo: Vec<f64> = y0.iter().map(|v| v - r).collect();
    let hi: Vec<f64> = y0.iter().map(|v| v + r).collect();
    let n = samples.max(2);
    let pitch = 2.0 * r / (n - 1) as f64;
    let id = DMatrix::<f64>::identity(d, d);
    let mut sup: f64 = 0.0;
    for y in box_lattice(&lo, &hi, n) {
        sup = sup.max(op_norm_inf(&(&id - &t * jac(&y))));
    }
    let varrho = sup + t_norm * hess_bound * pitch / 2.0;
    if !(varrho < 1.0) {
        return Err(KamError::NoContraction(varrho));
    }
    let lambda = t_norm / (1.0 - varrho);
    let f_y0 = f(y0);
    Ok(QuantitativeInverse { lambda, rho: r / lambda, varrho, t_norm, y0: y0.to_vec(), f_y0, t, f: Box::new(f) })
}

impl QuantitativeInverse<'_> {
    /// Solves f(y) = η by iterating Φ(y) = y − T(f(y) − η) from y₀.
    pub fn invert(&self, eta: &[f64]) -> Result<Vec<f64>> {
        if sup_dist(eta, &self.f_y0) >= self.rho {
            return Err(KamError::TargetOutsideBall);
        }
        let mut y = DVector::from_column_slice(&self.y0);
        let target = DVector::from_column_slice(eta);
        for _ in 0..500 {
            let fy = DVector::from_vec((self.f)(y.as_slice()));
            let step = &self.t * (fy - &target);
            y -= &step;
            if step.amax() <= 1e-13 * (1.0 + y.amax()) {
                return Ok(y.as_slice().to_vec());
            }
        }
        Err(KamError::FixedPointDivergence("inverse iteration did not reach 1e-13".into()))
    }
}

/// Solves y + f(y) = ȳ for a contraction f by fixed-point iteration y ← ȳ − f(y).
pub fn near_identity_solve(f: impl Fn(&[f64]) -> Vec<f64>, ybar: &[f64]) -> Result<Vec<f64>> {
    let mut y = ybar.to_vec();
    for _ in 0..1000 {
        let fy = f(&y);
        let next: Vec<f64> = ybar.iter().zip(&fy).map(|(a, b)| a - b).collect();
        let diff = sup_dist(&next, &y);
        y = next;
        if diff <= 1e-15 * (1.0 + y.iter().fold(0.0f64, |m, v| m.max(v.abs()))) {
            return Ok(y);
        }
    }
    Err(KamError::FixedPointDivergence("near-identity solve".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn covering_examples() {
        assert_eq!(covering_bound(1.0, 0.5, 2), 9);
        assert_eq!(covering_bound(1.0, 2.0, 2), 1);
        assert_eq!(covering_bound(2.0, 0.5, 3), 125);
    }

    #[test]
    fn unit_square_cover() {
        let pts = box_lattice(&[0.0, 0.0], &[1.0, 1.0], 4);
        let g = greedy_internal_cover(&pts, 0.5);
        assert!(g.len() <= 9);
        assert_eq!(minimal_cover_oracle(&pts, 0.5).unwrap(), 4);
        assert_eq!(minimal_cover_oracle(&[vec![0.0, 0.0], vec![5.0, 5.0]], 0.1).unwrap(), 2);
        assert_eq!(minimal_cover_oracle(&pts, 1.5).unwrap(), 1);
        assert_eq!(greedy_internal_cover(&[vec![0.3, 0.3]], 0.1).len(), 1);
        let big = box_lattice(&[0.0, 0.0], &[1.0, 1.0], 5);
        assert!(matches!(minimal_cover_oracle(&big, 0.5), Err(KamError::SizeCapExceeded(25, 20))));
    }

    #[test]
    fn sphere_properties() {
        let s = SurfaceSpec::Sphere { center: vec![0.0; 3], radius: 2.0 };
        let p = surface_properties(&s).unwrap();
        assert_eq!(p.curvature_kappa, 0.5);
        assert_eq!(p.minfoc, 2.0);
        assert!((p.area - 16.0 * PI).abs() < 1e-12);
        assert!((p.max_section - 4.0 * PI).abs() < 1e-12);
        let c = SurfaceSpec::Sphere { center: vec![0.0; 2], radius: 1.0 };
        let p = surface_properties(&c).unwrap();
        assert!((p.area - 2.0 * PI).abs() < 1e-12);
        assert!((p.max_section - 2.0).abs() < 1e-12);
    }

    #[test]
    fn tube_examples() {
        let c = SurfaceSpec::Sphere { center: vec![0.0; 2], radius: 1.0 };
        let b = tube_volume_bound(&c, 0.1).unwrap();
        assert!((b - 0.21 * 2.0 * PI).abs() < 1e-12);
        assert!(b >= PI * (1.1f64.powi(2) - 0.9f64.powi(2)));
        assert_eq!(tube_volume_bound(&c, 1.5), Err(KamError::TubeOverlapsFocalSet));
    }

    #[test]
    fn lipschitz_examples() {
        let b = lipschitz_measure_bounds(1.0, 1.0, 0.0, 2).unwrap();
        assert_eq!((b.image_bound, b.diff_bound), (1.0, 0.0));
        let b = lipschitz_measure_bounds(1.0, 1.1, 0.1, 2).unwrap();
        assert!((b.diff_bound - 0.21).abs() < 1e-15);
        assert!((b.image_bound - 1.21).abs() < 1e-15);
    }

    #[test]
    fn identity_inverse() {
        let inv = quantitative_inverse(|y| y.to_vec(), |_| DMatrix::identity(2, 2), &[0.0, 0.0], 1.0, 5, 0.0).unwrap();
        assert_eq!(inv.varrho, 0.0);
        assert_eq!(inv.lambda, 1.0);
        assert_eq!(inv.invert(&[0.3, -0.2]).unwrap(), vec![0.3, -0.2]);
    }
}
