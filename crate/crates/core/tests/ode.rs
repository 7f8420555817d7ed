use lm_penalty::ode::{initial_state, integrate, local_lipschitz, recover_xv, rhs, IntegratorOptions};
use lm_penalty::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

mod common;
use common::{affine_flow, b1, b1_value, decay, dist, instance, norm};

#[test]
fn rhs_of_the_pure_penalty_flow_is_linear() {
    let p = decay(3.0, 1.0);
    for z in [0.0, 1.0, -2.5] {
        assert_eq!(rhs(&p, 0.7, &[z]).unwrap(), vec![-3.0 * z]);
    }
}

#[test]
fn rhs_of_the_affine_flow() {
    let p = affine_flow(&[3.0, -1.0], &[0.0, 0.0]);
    let f = rhs(&p, 1.0, &[1.0, 1.0]).unwrap();
    assert!(dist(&f, &[2.0, -2.0]) < 1e-15);
}

#[test]
fn rhs_with_l1_composes_prox_and_gradient() {
    let p = instance(json!({
        "dimension": 1,
        "phi": {"kind": "weighted-l1", "weights": [1.0]},
        "theta": {"kind": "zero"},
        "psi": {"kind": "half-sqnorm"},
        "lambda": {"lambda0": 1.0, "lambda_inf": 1.0, "decay": 0.0},
        "beta": {"beta0": 1.0, "alpha": 0.0},
        "x0": [0.0]
    }));
    assert_eq!(rhs(&p, 0.0, &[2.0]).unwrap(), vec![-2.0]);
}

#[test]
fn rhs_rejects_negative_time() {
    assert!(matches!(rhs(&b1(), -1.0, &[0.0, 0.0]), Err(Error::Input(_))));
}

#[test]
fn local_lipschitz_examples() {
    assert_eq!(local_lipschitz(&b1(), 1.0), 6.0);
    let p = instance(json!({
        "dimension": 2,
        "phi": {"kind": "weighted-l1", "weights": [1.0, 2.0]},
        "theta": {"kind": "zero"},
        "psi": {"kind": "zero"},
        "lambda": {"lambda0": 1.0, "lambda_inf": 1.0, "decay": 0.0},
        "beta": {"beta0": 1.0, "alpha": 2.0},
        "x0": [0.0, 0.0]
    }));
    assert_eq!(local_lipschitz(&p, 0.0), 1.0);
    assert_eq!(local_lipschitz(&p, 50.0), 1.0);
}

#[test]
fn rhs_respects_its_lipschitz_bound() {
    let mut v = b1_value(2.0);
    v["lambda"] = json!({"lambda0": 3.0, "lambda_inf": 0.5, "decay": 0.4});
    let p = instance(v);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..500 {
        let t: f64 = rng.random_range(0.0..20.0);
        let z1: Vec<f64> = (0..2).map(|_| rng.random_range(-10.0..10.0)).collect();
        let z2: Vec<f64> = (0..2).map(|_| rng.random_range(-10.0..10.0)).collect();
        let d = dist(&rhs(&p, t, &z1).unwrap(), &rhs(&p, t, &z2).unwrap());
        assert!(d <= local_lipschitz(&p, t) * dist(&z1, &z2) + 1e-10, "t = {t}");
    }
}

#[test]
fn recover_xv_examples() {
    let l1 = instance(json!({
        "dimension": 1,
        "phi": {"kind": "weighted-l1", "weights": [1.0]},
        "theta": {"kind": "zero"},
        "psi": {"kind": "zero"},
        "lambda": {"lambda0": 1.0, "lambda_inf": 1.0, "decay": 0.0},
        "beta": {"beta0": 1.0, "alpha": 2.0},
        "x0": [0.0]
    }));
    assert_eq!(recover_xv(&l1, 0.0, &[2.0]), (vec![1.0], vec![1.0]));

    let zero = affine_flow(&[0.0, 0.0], &[0.0, 0.0]);
    assert_eq!(recover_xv(&zero, 3.0, &[1.5, -2.0]), (vec![1.5, -2.0], vec![0.0, 0.0]));

    let boxed = instance(json!({
        "dimension": 1,
        "phi": {"kind": "box-indicator", "lo": [0.0], "hi": [1.0]},
        "theta": {"kind": "zero"},
        "psi": {"kind": "zero"},
        "lambda": {"lambda0": 2.0, "lambda_inf": 2.0, "decay": 0.0},
        "beta": {"beta0": 1.0, "alpha": 2.0},
        "x0": [0.5]
    }));
    let (x, v) = recover_xv(&boxed, 0.0, &[1.5]);
    assert_eq!((x.clone(), v.clone()), (vec![1.0], vec![1.0]));
    assert!(boxed.phi.check_subgradient(&x, &v, 0.0).is_ok());
}

#[test]
fn exponential_decay_matches_closed_form() {
    let p = decay(2.0, 1.0);
    let tr = integrate(&p, 5.0, &IntegratorOptions::default()).unwrap();
    let err = tr.samples().iter().map(|s| (s.z[0] - (-2.0 * s.t).exp()).abs()).fold(0.0, f64::max);
    assert!(err <= 1e-6, "max error {err}");
    assert_eq!(tr.last().unwrap().0.t, 5.0);
}

#[test]
fn affine_flow_matches_closed_form() {
    let p = affine_flow(&[3.0], &[-1.0]);
    let z0 = initial_state(&p)[0];
    let tr = integrate(&p, 5.0, &IntegratorOptions::default()).unwrap();
    let want = 3.0 + (z0 - 3.0) * (-5.0f64).exp();
    assert!((tr.last().unwrap().0.z[0] - want).abs() <= 1e-6);
}

#[test]
fn b1_reaches_the_oracle_solution() {
    let tr = integrate(&b1(), 200.0, &IntegratorOptions::default()).unwrap();
    assert_eq!(tr.len(), 2001);
    let (s, _) = tr.last().unwrap();
    assert!(dist(&s.x, &[1.0, 0.0]) <= 1e-3, "x(T) = {:?}", s.x);
}

#[test]
fn samples_reconstruct_z_and_stay_in_the_subdifferential() {
    let p = b1();
    let tr = integrate(&p, 30.0, &IntegratorOptions::default()).unwrap();
    for s in tr.samples() {
        let mu = 1.0 / s.lambda;
        let back: Vec<f64> = s.x.iter().zip(&s.v).map(|(x, v)| x + mu * v).collect();
        assert!(dist(&back, &s.z) <= 1e-12 * (1.0 + norm(&s.z)), "t = {}", s.t);
        assert!(p.phi.check_subgradient(&s.x, &s.v, 1e-12).is_ok(), "t = {}", s.t);
    }
}

fn max_residual(interval: f64) -> f64 {
    let p = b1();
    let opts = IntegratorOptions { sample_interval: interval, ..Default::default() };
    let tr = integrate(&p, 5.0, &opts).unwrap();
    let s = tr.samples();
    let mut worst: f64 = 0.0;
    for w in s.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let dt = b.t - a.t;
        let gt = p.theta.grad(&a.x);
        let gp = p.psi.grad(&a.x);
        let r: Vec<f64> = (0..p.n)
            .map(|i| {
                a.lambda * (b.x[i] - a.x[i]) / dt + (b.v[i] - a.v[i]) / dt + a.v[i] + gt[i] + a.beta * gp[i]
            })
            .collect();
        worst = worst.max(norm(&r));
    }
    worst
}

#[test]
fn residual_of_the_original_system_is_first_order() {
    let r: Vec<f64> = [0.1, 0.05, 0.025].iter().map(|&d| max_residual(d)).collect();
    for w in r.windows(2) {
        assert!(w[0] / w[1] >= 1.7, "residuals {r:?}");
    }
}

fn decay_error(rel: f64) -> f64 {
    let p = decay(2.0, 1.0);
    let opts = IntegratorOptions {
        rel_tol: rel,
        abs_tol: rel * 1e-2,
        safety: 1.0,
        max_step: 10.0,
        min_step: 1e-9,
        sample_interval: 1.0,
    };
    let tr = integrate(&p, 5.0, &opts).unwrap();
    tr.samples().iter().map(|s| (s.z[0] - (-2.0 * s.t).exp()).abs()).fold(0.0, f64::max)
}

#[test]
fn tightening_tolerance_sixteenfold_cuts_error_eightfold() {
    for rel in [1e-6, 1e-8] {
        let (a, b) = (decay_error(rel), decay_error(rel / 16.0));
        assert!(b <= a / 8.0, "rel {rel}: {a} then {b}");
    }
}

#[test]
fn extreme_penalty_growth_aborts_on_step_underflow() {
    let p = instance(b1_value(25.0));
    match integrate(&p, 20.0, &IntegratorOptions::default()) {
        Err(Error::Divergence { t, last_state, .. }) => {
            assert!(t > 0.0 && t < 20.0);
            assert!(last_state.iter().all(|v| v.is_finite()));
        }
        other => panic!("expected divergence, got {other:?}"),
    }
}

#[test]
fn options_are_validated() {
    let bad = [
        IntegratorOptions { rel_tol: 0.0, ..Default::default() },
        IntegratorOptions { abs_tol: -1.0, ..Default::default() },
        IntegratorOptions { safety: 1.5, ..Default::default() },
        IntegratorOptions { min_step: 2.0, max_step: 1.0, ..Default::default() },
        IntegratorOptions { sample_interval: 0.0, ..Default::default() },
    ];
    for o in bad {
        assert!(o.validate().is_err(), "{o:?}");
        assert!(integrate(&b1(), 1.0, &o).is_err());
    }
    assert!(integrate(&b1(), 0.0, &IntegratorOptions::default()).is_err());
}
