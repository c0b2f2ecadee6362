//! Acceptance criteria 1 to 9. Prints one PASS/FAIL line per criterion and exits nonzero if
//! any criterion fails.

use std::process::Command;
use std::time::{Duration, Instant};

use kamcert_core::engine::homological::{
    deviation_from_exact, homological_defect_exact, solve_homological, solve_homological_exact,
};
use kamcert_core::engine::schedule::{build_schedule, pow2_by_squaring, ScheduleInputs};
use kamcert_core::engine::system::golden;
use kamcert_core::geometry::{
    box_lattice, greedy_internal_cover, minimal_cover_oracle, quantitative_inverse, tube_volume_bound, unit_ball_volume,
    SurfaceSpec,
};
use kamcert_core::ledger::build_ledger;
use kamcert_core::measure::{beta, dioph_series, epsilon_star, resonant_zone_measure};
use kamcert_core::{FourierTaylorFunction, FrequencyVector};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

type Check = (bool, String);

fn kamcert(args: &[&str]) -> (i32, String) {
    let o = Command::new(env!("CARGO_BIN_EXE_kamcert")).args(args).output().unwrap();
    (o.status.code().unwrap(), String::from_utf8(o.stdout).unwrap())
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

struct PendulumRun {
    summary: Value,
    rho: Vec<f64>,
    runtime: Duration,
}

fn pendulum_run() -> PendulumRun {
    let dir = tempfile::tempdir().unwrap();
    let t0 = Instant::now();
    let (code, _) = kamcert(&["iterate", "--preset", "pendulum2d", "--out", dir.path().to_str().unwrap()]);
    let runtime = t0.elapsed();
    assert_eq!(code, 0);
    let summary: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    let mut rd = csv::Reader::from_path(dir.path().join("decay.csv")).unwrap();
    let rho = rd.records().map(|r| r.unwrap()[1].parse::<f64>().unwrap()).collect();
    PendulumRun { summary, rho, runtime }
}

/// ε̂ⱼ = ε̂₁^{2^{j−1}} bit for bit, j ≤ 20.
fn eps_hat_identity(epsilon: f64) -> bool {
    let led = build_ledger(2, 2.0).unwrap();
    let inp = ScheduleInputs {
        d: 2,
        epsilon,
        m: 1.0,
        l: 1.0,
        p_norm: 0.5f64.exp() + 1f64.exp(),
        alpha: 1.0,
        rho: 0.05,
        s: 0.5,
        s_star: 0.25,
    };
    let sc = build_schedule(&inp, &led, 20).unwrap();
    (1..=20).all(|j| sc.eps_hat[j].to_bits() == pow2_by_squaring(sc.eps_hat[1], j as u32 - 1).to_bits())
}

fn criterion1(run: &PendulumRun) -> Check {
    let floor = run.summary["floor_tol"].as_f64().unwrap();
    let fit = &run.summary["slope_fit"];
    let pairs = fit["pairs"].as_u64().unwrap();
    let slope = fit["slope"].as_f64();
    let above = run.rho.iter().filter(|r| **r > floor).count();
    let slope_ok = slope.is_some_and(|s| (s - 2.0).abs() <= 0.2);
    let identity = eps_hat_identity(1e-4) && eps_hat_identity(1e-300);
    let fast = run.runtime <= Duration::from_secs(60);
    let ok = pairs >= 3 && slope_ok && identity && fast;
    let detail = format!(
        "rho = {:?}; {above} residuals above {floor:e}, {pairs} step pairs (need 3); slope {slope:?} (2 +/- 0.2: {slope_ok}); \
         eps_hat identity to j = 20: {identity}; runtime {:.2?}",
        run.rho, run.runtime
    );
    (ok, detail)
}

fn criterion2(run: &PendulumRun) -> Check {
    let c = &run.summary["checks"];
    let res = c["conjugacy_residual"].as_f64().unwrap();
    let drift = c["flow_drift"].as_f64().unwrap();
    (res <= 1e-6 && drift <= 1e-6, format!("conjugacy residual {res:e} <= 1e-6, flow drift over [0, 10] {drift:e} <= 1e-6"))
}

fn criterion3() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let w = FrequencyVector::certify(vec![golden(), 1.0], 2.0, 24).unwrap();
    let mut worst_dev: f64 = 0.0;
    let mut nonzero = 0;
    for _ in 0..1000 {
        let mut f = FourierTaylorFunction::zero(2, vec![0.0; 2], 1.0, 1.0, 4, 12).unwrap();
        for _ in 0..rng.random_range(1..12) {
            let a = vec![rng.random_range(0..=2u32), rng.random_range(0..=2u32)];
            let k = vec![rng.random_range(-6..=6), rng.random_range(-6..=6)];
            f.add_cos(a, k, rng.random_range(-1.0..1.0), rng.random_range(0.0..6.3)).unwrap();
        }
        let kappa = rng.random_range(1..=12);
        let exact = solve_homological_exact(&f, &w.omega, kappa).unwrap();
        nonzero += homological_defect_exact(&f, &exact, &w.omega, kappa).len();
        let u = solve_homological(&f, &w, kappa).unwrap();
        worst_dev = worst_dev.max(deviation_from_exact(&u, &exact));
    }
    (
        nonzero == 0 && worst_dev <= 4.0 * f64::EPSILON,
        format!("1000 polynomials: {nonzero} nonzero defect coefficients in exact arithmetic; binary64 solve within {worst_dev:e} of exact"),
    )
}

fn orthant_quadrature(d: usize, m: f64) -> f64 {
    fn nest(level: usize, acc: f64, m: f64) -> f64 {
        if level == 0 {
            return acc.powf(m) * (-acc).exp();
        }
        let f = |t: f64| {
            let y = t / (1.0 - t);
            if !y.is_finite() {
                return 0.0;
            }
            nest(level - 1, acc + y, m) / ((1.0 - t) * (1.0 - t))
        };
        quadrature::integrate(f, 0.0, 1.0, 1e-13).integral
    }
    2f64.powi(d as i32) * nest(d, 0.0, m)
}

fn criterion4() -> Check {
    let led = build_ledger(2, 2.0).unwrap();
    let worst = led
        .integrals
        .iter()
        .map(|t| rel(t.value, t.weights.iter().map(|(c, m)| c * orthant_quadrature(2, *m)).sum()))
        .fold(0.0, f64::max);
    let ok = led.c[2] == 128.0 && led.a == 31.0 && worst <= 1e-10;
    (ok, format!("C2 = {}, a = {}, worst integral mismatch {worst:e} over {} entries", led.c[2], led.a, led.integrals.len()))
}

fn certify_box(epsilon: Option<f64>) -> Value {
    let mut cfg = kamcert_cli::preset("box-domain").unwrap();
    if let Some(e) = epsilon {
        cfg.epsilon = e;
    }
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("box.json");
    std::fs::write(&p, cfg.to_json()).unwrap();
    let (code, out) = kamcert(&["certify", "--config", p.to_str().unwrap(), "--json"]);
    assert_eq!(code, 0);
    serde_json::from_str(&out).unwrap()
}

fn criterion5() -> Check {
    let rep = certify_box(None);
    let m = &rep["measure"];
    let got = m["bound"].as_f64().unwrap();
    let led = build_ledger(2, 2.0).unwrap();
    // K = |y|²/2: M = L = θ = det K_yy = 1; P = cos x₁ + cos(x₁ + x₂) on the strip s = 1/2
    let (eps, s, s_star, rho): (f64, f64, f64, f64) = (1e-76, 0.5, 0.25, 0.05);
    let p = 0.5f64.exp() + 1f64.exp();
    let r_bar = rho / (1.0 + 2.0 * 4.0);
    let n = (1.0 / (2.0 * r_bar)).ceil().powi(2);
    let eps_star = (s - s_star).powf(led.a) / led.c_star;
    let alpha_star = (p / eps_star).sqrt();
    let direct = led.c_bar_star * n * r_bar * alpha_star * eps.sqrt();
    // second path: (5/4)(2π)²·(tube term + resonant zone) at α = α*√ε
    let alpha = alpha_star * eps.sqrt();
    let tube = 2.0 * 16.0 / led.c0 * n * r_bar * alpha;
    let resonant = resonant_zone_measure(2, led.s_hi, alpha, n, 1.0, 1.0, r_bar);
    let split = 1.25 * beta(0.0, 2) * (tube + resonant);
    let eps_star_lib = epsilon_star(s, s_star, 1.0, &led);
    let four = certify_box(Some(4.0 * eps))["measure"]["bound"].as_f64().unwrap();
    let b0 = beta(0.0, 2);
    let ok = rel(got, direct) <= 1e-12
        && rel(got, split) <= 1e-12
        && rel(eps_star, eps_star_lib) <= 1e-12
        && four == 2.0 * got
        && b0 == (2.0 * std::f64::consts::PI).powi(2);
    (
        ok,
        format!(
            "bound {got:e}; direct recomputation rel {:e}; tube+resonant split rel {:e}; bound(4 eps)/bound(eps) = {}; beta(0) = {b0}",
            rel(got, direct),
            rel(got, split),
            four / got
        ),
    )
}

fn criterion6() -> Check {
    let t = Instant::now();
    let pts = box_lattice(&[0.0, 0.0], &[1.0, 1.0], 4);
    let greedy = greedy_internal_cover(&pts, 0.5).len();
    let oracle = minimal_cover_oracle(&pts, 0.5).unwrap();
    let t_cover = t.elapsed();
    let t = Instant::now();
    let circle = tube_volume_bound(&SurfaceSpec::Sphere { center: vec![0.0; 2], radius: 1.0 }, 0.1).unwrap();
    let annulus = std::f64::consts::PI * (1.1f64.powi(2) - 0.9f64.powi(2));
    let t_circle = t.elapsed();
    let t = Instant::now();
    let sphere = tube_volume_bound(&SurfaceSpec::Sphere { center: vec![0.0; 3], radius: 2.0 }, 0.2).unwrap();
    let shell = unit_ball_volume(3) * (2.2f64.powi(3) - 1.8f64.powi(3));
    // (2/3)((1 + ρ/R)³ − 1)·2·ℋ²(S), ℋ²(S) = 16π; evaluates to 22.1845
    let sphere_formula = (2.0 / 3.0) * (1.1f64.powi(3) - 1.0) * 2.0 * 16.0 * std::f64::consts::PI;
    let t_sphere = t.elapsed();
    let second = Duration::from_secs(1);
    let ok = greedy <= 9
        && oracle == 4
        && (circle - 1.3195).abs() < 1e-4
        && circle >= annulus
        && rel(sphere, sphere_formula) <= 1e-12
        && sphere >= shell
        && [t_cover, t_circle, t_sphere].iter().all(|t| *t <= second);
    (
        ok,
        format!(
            "greedy {greedy} <= 9, oracle {oracle}; circle {circle:.4} >= {annulus:.4}; sphere {sphere:.4} (formula {sphere_formula:.4}) >= {shell:.2}; times {t_cover:.2?} {t_circle:.2?} {t_sphere:.2?}"
        ),
    )
}

fn bisect(f: impl Fn(f64) -> f64, target: f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn criterion7() -> Check {
    let f = |y: f64| y + 0.1 * y.sin();
    let pi = std::f64::consts::PI;
    let qi = quantitative_inverse(
        |y: &[f64]| vec![f(y[0])],
        |y: &[f64]| DMatrix::from_element(1, 1, 1.0 + 0.1 * y[0].cos()),
        &[0.0],
        pi,
        201,
        0.1,
    )
    .unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let eta = 0.9 * qi.rho * (2.0 * i as f64 / 99.0 - 1.0);
        let y = qi.invert(&[eta]).unwrap()[0];
        worst = worst.max((y - bisect(f, eta, -pi, pi)).abs());
    }
    (qi.lambda <= 1.12 && worst <= 1e-10, format!("lambda {:.6} <= 1.12 (varrho {:.6}); worst |inverse - bisection| {worst:e} over 100 targets", qi.lambda, qi.varrho))
}

fn criterion8() -> Check {
    let (code, out) = kamcert(&["certify", "--preset", "pendulum2d", "--json"]);
    let v: Value = serde_json::from_str(&out).unwrap();
    let t = &v["theorem1"];
    let eps_ok = t["eps_ok"].as_bool().unwrap();
    let (lhs, rhs) = (t["epsilon_frak"].as_f64().unwrap(), t["epsilon_star_frak"].as_f64().unwrap());
    let (code_text, text) = kamcert(&["certify", "--preset", "pendulum2d"]);
    let printed = text.contains(&format!("{lhs:e} <= {rhs:e}"));
    let ok = !eps_ok && code == 2 && code_text == 2 && printed && lhs > rhs;
    (ok, format!("eps_ok = {eps_ok}, {lhs:e} <= {rhs:e} printed: {printed}; exit code {code}"))
}

fn criterion9() -> Check {
    // direct enumeration over 0 < |k|₁ ≤ 2 of 1/(|k|₁^τ |k|₂)
    let mut direct = 0.0;
    for k1 in -2i32..=2 {
        for k2 in -2i32..=2 {
            let n1 = k1.abs() + k2.abs();
            if n1 == 0 || n1 > 2 {
                continue;
            }
            direct += 1.0 / ((n1 as f64).powi(2) * ((k1 * k1 + k2 * k2) as f64).sqrt());
        }
    }
    let (lo2, _) = dioph_series(2, 2.0, 2).unwrap();
    let mut nested = true;
    let mut prev = dioph_series(2, 2.0, 2).unwrap();
    for k in [4, 8, 16, 32] {
        let cur = dioph_series(2, 2.0, k).unwrap();
        nested &= prev.0 <= cur.0 && cur.0 <= cur.1 && cur.1 <= prev.1;
        prev = cur;
    }
    let ok = (lo2 - 5.2071).abs() <= 1e-4 && (lo2 - direct).abs() <= 1e-14 && nested;
    (ok, format!("lo(2) = {lo2:.6} (enumeration {direct:.6}); brackets nest over 2, 4, 8, 16, 32: {nested}; [lo, hi](32) = {prev:?}"))
}

fn main() {
    let run = pendulum_run();
    let results = [
        criterion1(&run),
        criterion2(&run),
        criterion3(),
        criterion4(),
        criterion5(),
        criterion6(),
        criterion7(),
        criterion8(),
        criterion9(),
    ];
    let mut failed = 0;
    for (i, (ok, detail)) in results.iter().enumerate() {
        println!("criterion {}: {} ({detail})", i + 1, if *ok { "PASS" } else { "FAIL" });
        failed += usize::from(!ok);
    }
    println!("acceptance: {} of 9 criteria pass", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
