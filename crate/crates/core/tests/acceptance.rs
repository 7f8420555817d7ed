//! One line per acceptance criterion; exits nonzero when any of them fails.

use std::path::PathBuf;
use std::process::{Command, ExitCode};
use std::time::Instant;

use lm_penalty::calculus::ProxableFn;
use lm_penalty::cli::RunConfig;
use lm_penalty::diagnostics::{integrated_sq_error, oracle_solve, verify_theorem, CheckStatus, TolProfile, TraceKind};
use lm_penalty::iterate::{penalty_fb_step, relaxed_penalty_step, run_discrete};
use lm_penalty::ode::{integrate, rhs, IntegratorOptions};
use lm_penalty::problem::ProblemInstance;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

type Outcome = Result<String, String>;
type Criterion = (&'static str, f64, fn() -> Outcome);

fn config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn load(name: &str) -> (RunConfig, ProblemInstance) {
    let cfg = RunConfig::load(&config(name)).expect("config parses");
    let prob = cfg.instance().expect("config is valid");
    (cfg, prob)
}

fn lmpen(args: &[&str]) -> i32 {
    let o = Command::new(env!("CARGO_BIN_EXE_lmpen")).args(args).output().expect("binary runs");
    o.status.code().unwrap_or(-1)
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok { Ok(()) } else { Err(msg()) }
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize, r: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-r..r)).collect()
}

fn random_phi(rng: &mut ChaCha8Rng, n: usize) -> ProxableFn {
    match rng.random_range(0..4) {
        0 => ProxableFn::Zero {},
        1 => ProxableFn::WeightedL1 { weights: (0..n).map(|_| rng.random_range(0.0..3.0)).collect() },
        2 => {
            let lo = random_vec(rng, n, 2.0);
            let hi = lo.iter().map(|l| l + rng.random_range(0.0..2.0)).collect();
            ProxableFn::BoxIndicator { lo, hi }
        }
        _ => ProxableFn::ScaledHalfSqnorm { c: rng.random_range(0.0..5.0) },
    }
}

fn c1_prox_calculus() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 3;
    for case in 0..1000 {
        let f = random_phi(&mut rng, n);
        let gamma = rng.random_range(0.01..10.0);
        let (x, y) = (random_vec(&mut rng, n, 10.0), random_vec(&mut rng, n, 10.0));
        let (px, vx) = f.yosida(gamma, &x).unwrap();
        let (py, vy) = f.yosida(gamma, &y).unwrap();
        ensure(dist(&px, &py) <= dist(&x, &y) + 1e-12, || format!("nonexpansiveness, case {case}"))?;
        ensure(dist(&vx, &vy) <= dist(&x, &y) / gamma * (1.0 + 1e-12) + 1e-12, || {
            format!("yosida lipschitz, case {case}")
        })?;
        // ⟨x − p, y' − p⟩ ≤ γ(Φ(y') − Φ(p)) for y' in the domain
        let yd = f.prox(1.0, &y).unwrap();
        let lhs: f64 = (0..n).map(|i| (x[i] - px[i]) * (yd[i] - px[i])).sum();
        ensure(lhs <= gamma * (f.value(&yd) - f.value(&px)) + 1e-9, || format!("prox optimality, case {case}"))?;
        let (l1, l2) = (rng.random_range(0.1..10.0), rng.random_range(0.1..10.0));
        let d = dist(&f.prox(l1, &x).unwrap(), &f.prox(l2, &x).unwrap());
        let bound = (l1 - l2).abs() * norm(&f.yosida(0.1, &x).unwrap().1) + 1e-10;
        ensure(d <= bound, || format!("step-size lipschitz, case {case}"))?;
        let mut prev = f64::INFINITY;
        for k in 1..=100 {
            let m = norm(&f.yosida(0.1 * k as f64, &x).unwrap().1);
            ensure(m <= prev * (1.0 + 1e-12) + 1e-12, || format!("yosida norm monotone, case {case}"))?;
            prev = m;
        }
    }
    Ok("5 properties x 1000 cases".into())
}

fn c2_exact_identities() -> Outcome {
    let (_, b1) = load("b1.json");
    let mu = 0.1;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let z = random_vec(&mut rng, 2, 5.0);
        let beta = rng.random_range(1.0..50.0);
        // h = 1: the relaxed map followed by the prox is one forward-backward step
        let x0 = b1.phi.prox(mu, &z).unwrap();
        let (x, z1) = relaxed_penalty_step(&b1, &z, 1.0, mu, beta).unwrap();
        let x1 = b1.phi.prox(mu, &z1).unwrap();
        let fb = penalty_fb_step(&b1, &x0, mu, beta).unwrap();
        worst = worst.max(dist(&x, &x0)).max(dist(&x1, &fb) / (1.0 + norm(&fb)));
        ensure(dist(&x1, &fb) <= 1e-14 * (1.0 + norm(&fb)), || format!("h=1 equivalence at z = {z:?}"))?;
    }
    // Euler consistency against the z-system with λ ≡ 1/μ
    let mut cfg = RunConfig::load(&config("b1.json")).unwrap();
    cfg.lambda = lm_penalty::schedules::LambdaSchedule::constant(1.0 / mu).unwrap();
    let p = cfg.instance().unwrap();
    for _ in 0..100 {
        let z = random_vec(&mut rng, 2, 5.0);
        let h = rng.random_range(0.01..1.0);
        let t = rng.random_range(0.0..10.0);
        let beta = p.beta.beta_at(t).unwrap();
        let (_, zn) = relaxed_penalty_step(&p, &z, h, mu, beta).unwrap();
        let f = rhs(&p, t, &z).unwrap();
        let e: Vec<f64> = z.iter().zip(&f).map(|(z, f)| z + h * f).collect();
        let d = dist(&zn, &e) / (1.0 + norm(&z));
        worst = worst.max(d);
        ensure(d <= 1e-14, || format!("euler consistency: {d:e}"))?;
    }
    Ok(format!("worst relative deviation {worst:.2e}"))
}

fn decay_problem(beta0: f64) -> ProblemInstance {
    let mut cfg = RunConfig::load(&config("stationary.json")).unwrap();
    cfg.v0 = None;
    cfg.x0 = vec![1.0];
    cfg.beta = lm_penalty::schedules::BetaSchedule::new(beta0, 0.0).unwrap();
    cfg.instance().unwrap()
}

fn c3_closed_forms() -> Outcome {
    let p = decay_problem(2.0);
    let tr = integrate(&p, 5.0, &IntegratorOptions::default()).map_err(|e| e.to_string())?;
    let e_exp = tr.samples().iter().map(|s| (s.z[0] - (-2.0 * s.t).exp()).abs()).fold(0.0, f64::max);
    ensure(e_exp <= 1e-6, || format!("exponential error {e_exp:e}"))?;

    let mut cfg = RunConfig::load(&config("psi_zero.json")).unwrap();
    cfg.phi = ProxableFn::Zero {};
    cfg.dimension = 1;
    cfg.x0 = vec![-1.0];
    cfg.v0 = None;
    cfg.theta = serde_json::from_str(r#"{"kind": "least-squares", "A": [[1.0]], "b": [3.0]}"#).unwrap();
    let p = cfg.instance().unwrap();
    let tr = integrate(&p, 5.0, &IntegratorOptions::default()).map_err(|e| e.to_string())?;
    let e_aff = tr.samples().iter().map(|s| (s.z[0] - (3.0 - 4.0 * (-s.t).exp())).abs()).fold(0.0, f64::max);
    ensure(e_aff <= 1e-6, || format!("affine error {e_aff:e}"))?;

    let p = decay_problem(2.0);
    let err = |rel: f64| {
        let o = IntegratorOptions {
            rel_tol: rel,
            abs_tol: rel * 1e-2,
            safety: 1.0,
            max_step: 10.0,
            min_step: 1e-9,
            sample_interval: 1.0,
        };
        let tr = integrate(&p, 5.0, &o).unwrap();
        tr.samples().iter().map(|s| (s.z[0] - (-2.0 * s.t).exp()).abs()).fold(0.0, f64::max)
    };
    let ratio = err(1e-6) / err(1e-6 / 16.0);
    ensure(ratio >= 8.0, || format!("order ratio {ratio:.2}"))?;
    Ok(format!("exp {e_exp:.1e}, affine {e_aff:.1e}, tol/16 ratio {ratio:.1}"))
}

fn b1_run() -> (ProblemInstance, lm_penalty::diagnostics::Trace, lm_penalty::diagnostics::OracleCertificate) {
    let (cfg, p) = load("b1.json");
    let tr = integrate(&p, cfg.horizon, &cfg.integrator).unwrap();
    let c = oracle_solve(&p).unwrap();
    (p, tr, c)
}

fn c4_main_theorem() -> Outcome {
    let (p, tr, c) = b1_run();
    ensure((c.opt_value - 1.5).abs() <= 1e-9, || format!("oracle value {}", c.opt_value))?;
    let r = verify_theorem(&p, &tr, TraceKind::Continuous, Ok(&c), &TolProfile::default()).map_err(|e| e.to_string())?;
    let mut parts = Vec::new();
    for name in ["C1", "C2", "C3", "C5", "C6", "C7"] {
        let ch = r.check(name).unwrap();
        ensure(ch.status == CheckStatus::Pass, || format!("{name} {:?} value {:?}", ch.status, ch.value))?;
        parts.push(format!("{name} {:.2e}", ch.value.unwrap()));
    }
    Ok(parts.join(", "))
}

fn c5_strong_convexity() -> Outcome {
    let (p, tr, c) = b1_run();
    let e = dist(&tr.last().unwrap().0.x, &c.z_star);
    let half: Vec<_> = tr.samples().iter().filter(|s| s.t <= 100.0).cloned().collect();
    let i_half = integrated_sq_error(&lm_penalty::diagnostics::Trace::from_samples(&p, half).unwrap(), &c.z_star);
    let i_full = integrated_sq_error(&tr, &c.z_star);
    let bounded = i_full.is_finite() && (i_full - i_half) <= 0.05 * (1.0 + i_full);
    ensure(bounded, || format!("integral of |x - z*|^2 not settling: {i_half} -> {i_full}"))?;
    ensure(e <= 1e-5, || format!("|x(T) - z*| = {e:.3e} > 1e-5 (integral {i_full:.4})"))?;
    Ok(format!("|x(T) - z*| = {e:.3e}, integral {i_full:.4}"))
}

fn c6_condition_h() -> Outcome {
    let mut cfg = RunConfig::load(&config("b1.json")).unwrap();
    let pstar = [-2.0, 0.0];
    let mut worst: f64 = 0.0;
    for alpha in [1.5, 2.0, 3.0] {
        cfg.beta = lm_penalty::schedules::BetaSchedule::new(1.0, alpha).unwrap();
        let p = cfg.instance().unwrap();
        for t in [10.0, 100.0, 1000.0] {
            let r = p.check_condition_h(&pstar, t).map_err(|e| e.to_string())?;
            let exact = 2.0 / (alpha - 1.0) * (1.0 - (1.0 + t).powf(1.0 - alpha));
            worst = worst.max((r.partial_integral - exact).abs());
            ensure(r.finite, || format!("alpha {alpha} reported divergent"))?;
        }
    }
    ensure(worst <= 1e-6, || format!("quadrature error {worst:e}"))?;
    cfg.beta = lm_penalty::schedules::BetaSchedule::new(1.0, 1.0).unwrap();
    let r = cfg.instance().unwrap().check_condition_h(&pstar, 100.0).map_err(|e| e.to_string())?;
    ensure(!r.finite, || "alpha = 1 reported finite".into())?;
    cfg.beta = lm_penalty::schedules::BetaSchedule::new(1.0, 2.0).unwrap();
    let total = cfg.instance().unwrap().check_condition_h(&pstar, 1000.0).unwrap().total();
    ensure((total - 2.0).abs() <= 1e-6, || format!("total {total}"))?;
    Ok(format!("max quadrature error {worst:.1e}, total {total:.9}"))
}

fn c7_falsification() -> Outcome {
    let (cfg, p) = load("b1_constant_beta.json");
    let tr = integrate(&p, cfg.horizon, &cfg.integrator).map_err(|e| e.to_string())?;
    let c = oracle_solve(&p).unwrap();
    let r = verify_theorem(&p, &tr, TraceKind::Continuous, Ok(&c), &TolProfile::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let cfg_s = config("b1_constant_beta.json");
    let cfg_s = cfg_s.to_str().unwrap();
    let run = lmpen(&["run", "--config", cfg_s, "--out", d]);
    let trace = dir.path().join("trace.csv");
    let verify = lmpen(&["verify", "--config", cfg_s, "--trace", trace.to_str().unwrap()]);
    let bad_v0 = lmpen(&["run", "--config", config("b1_bad_v0.json").to_str().unwrap(), "--out", d]);
    let lam = lmpen(&["run", "--config", config("b1_increasing_lambda.json").to_str().unwrap(), "--out", d]);
    ensure((run, verify, bad_v0, lam) == (0, 4, 2, 2), || {
        format!("exit codes run {run}, verify {verify}, bad v0 {bad_v0}, increasing lambda {lam}")
    })?;
    ensure(r.hypothesis_violations.iter().any(|m| m.contains("beta -> infinity")), || "no hypothesis flag".into())?;
    let failed = r.failed();
    ensure(failed == ["C1"], || format!("failed checks {failed:?}, expected only C1"))?;
    Ok("C1 fails alone, exit codes 4/2/2".into())
}

fn c8_discrete() -> Outcome {
    let (cfg, p) = load("b1.json");
    let dcfg = cfg.discrete.clone().unwrap();
    let run = run_discrete(&p, &dcfg, None).map_err(|e| e.to_string())?;
    let e = dist(&run.trace.last().unwrap().0.x, &[1.0, 0.0]);
    ensure(e <= 1e-3, || format!("|x_N - (1,0)| = {e:e}"))?;
    let dir = tempfile::tempdir().unwrap();
    let code = lmpen(&["compare", "--config", config("b1_compare.json").to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    let j: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("compare.json")).map_err(|e| e.to_string())?)
        .unwrap();
    let ratios: Vec<f64> = j["ratios"].as_array().unwrap().iter().map(|r| r.as_f64().unwrap()).collect();
    ensure(code == 0 && ratios.iter().all(|r| *r >= 1.7), || format!("compare exit {code}, ratios {ratios:?}"))?;
    Ok(format!("|x_N - (1,0)| = {e:.2e}, ratios {:.2} {:.2}", ratios[0], ratios[1]))
}

/// Fixed-step RK4 for `ẋ = −x − β(t)(x₁ − 1)e₁`.
fn rk4_penalized_flow(x0: [f64; 2], t_end: f64, h: f64) -> Vec<(f64, [f64; 2])> {
    let f = |t: f64, x: [f64; 2]| {
        let b = (1.0 + t) * (1.0 + t);
        [-x[0] - b * (x[0] - 1.0), -x[1]]
    };
    let steps = (t_end / h).round() as usize;
    let mut x = x0;
    let mut out = vec![(0.0, x)];
    for k in 0..steps {
        let t = k as f64 * h;
        let k1 = f(t, x);
        let k2 = f(t + h / 2.0, [x[0] + h / 2.0 * k1[0], x[1] + h / 2.0 * k1[1]]);
        let k3 = f(t + h / 2.0, [x[0] + h / 2.0 * k2[0], x[1] + h / 2.0 * k2[1]]);
        let k4 = f(t + h, [x[0] + h * k3[0], x[1] + h * k3[1]]);
        for i in 0..2 {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        out.push(((k + 1) as f64 * h, x));
    }
    out
}

fn c9_degenerate() -> Outcome {
    let (cfg, p) = load("phi_zero.json");
    let tr = integrate(&p, 10.0, &cfg.integrator).map_err(|e| e.to_string())?;
    let reference = rk4_penalized_flow([2.0, -1.0], 10.0, 1e-3);
    let mut worst: f64 = 0.0;
    for s in tr.samples() {
        ensure(s.v.iter().all(|v| *v == 0.0), || format!("v != 0 at t = {}", s.t))?;
        let k = (s.t / 1e-3).round() as usize;
        worst = worst.max(dist(&s.x, &reference[k].1));
        worst = worst.max((s.x[1] + (-s.t).exp()).abs());
    }
    ensure(worst <= 1e-6, || format!("penalized gradient flow deviates by {worst:e}"))?;

    let (cfg, p) = load("psi_zero.json");
    let c = oracle_solve(&p).map_err(|e| e.to_string())?;
    ensure(dist(&c.z_star, &[1.0, -2.0]) <= 1e-9, || format!("oracle {:?}", c.z_star))?;
    let tr = integrate(&p, cfg.horizon, &cfg.integrator).map_err(|e| e.to_string())?;
    let e = dist(&tr.last().unwrap().0.x, &c.z_star);
    ensure(e <= 1e-5, || format!("|x(T) - (1,-2)| = {e:e}"))?;
    Ok(format!("flow deviation {worst:.1e}, |x(T) - (1,-2)| = {e:.1e}"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("prox calculus", 5.0, c1_prox_calculus),
        ("exact identities", 1.0, c2_exact_identities),
        ("closed-form ODE", 5.0, c3_closed_forms),
        ("main theorem on B1", 30.0, c4_main_theorem),
        ("strong convexity on B1", 30.0, c5_strong_convexity),
        ("condition (H)", 1.0, c6_condition_h),
        ("falsification", 10.0, c7_falsification),
        ("discrete solver", 30.0, c8_discrete),
        ("degenerate cases", 10.0, c9_degenerate),
    ];
    let mut failures = 0;
    for (k, (name, budget, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        let outcome = match outcome {
            Ok(m) if secs > *budget => Err(format!("{m}; took {secs:.2}s, budget {budget}s")),
            other => other,
        };
        match outcome {
            Ok(m) => println!("PASS criterion {}: {name}: {m} ({secs:.2}s)", k + 1),
            Err(m) => {
                failures += 1;
                println!("FAIL criterion {}: {name}: {m} ({secs:.2}s)", k + 1);
            }
        }
    }
    if failures == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
