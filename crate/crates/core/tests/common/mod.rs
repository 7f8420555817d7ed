#![allow(dead_code)]

use std::path::PathBuf;

use lm_penalty::problem::{assemble, ProblemConfig, ProblemInstance};
use serde_json::{json, Value};

pub fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

/// B1: l1 plus half squared norm, constrained to `x₁ = 1`, `β = (1+t)^α`.
pub fn b1_value(alpha: f64) -> Value {
    json!({
        "dimension": 2,
        "phi": {"kind": "weighted-l1", "weights": [1.0, 1.0]},
        "theta": {"kind": "quadratic", "Q": [[1.0, 0.0], [0.0, 1.0]], "q": [0.0, 0.0]},
        "psi": {"kind": "half-sqdist-hyperplane", "a": [1.0, 0.0], "b": 1.0},
        "lambda": {"lambda0": 1.0, "lambda_inf": 1.0, "decay": 0.0},
        "beta": {"beta0": 1.0, "alpha": alpha},
        "x0": [2.0, -1.0],
        "seed": 7
    })
}

pub fn instance(v: Value) -> ProblemInstance {
    let cfg: ProblemConfig = serde_json::from_value(v).expect("valid problem document");
    assemble(&cfg).expect("assembles")
}

pub fn b1() -> ProblemInstance {
    instance(b1_value(2.0))
}

/// One-dimensional `Φ = Θ = 0`, `Ψ = ½x²`, `λ ≡ 1`, `β ≡ beta0`.
pub fn decay(beta0: f64, x0: f64) -> ProblemInstance {
    instance(json!({
        "dimension": 1,
        "phi": {"kind": "zero"},
        "theta": {"kind": "zero"},
        "psi": {"kind": "half-sqnorm"},
        "lambda": {"lambda0": 1.0, "lambda_inf": 1.0, "decay": 0.0},
        "beta": {"beta0": beta0, "alpha": 0.0},
        "x0": [x0]
    }))
}

/// `Φ = Ψ = 0`, `Θ = ½‖x − a‖²`, `λ ≡ 1`.
pub fn affine_flow(a: &[f64], x0: &[f64]) -> ProblemInstance {
    let n = a.len();
    let eye: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    instance(json!({
        "dimension": n,
        "phi": {"kind": "zero"},
        "theta": {"kind": "least-squares", "A": eye, "b": a},
        "psi": {"kind": "zero"},
        "lambda": {"lambda0": 1.0, "lambda_inf": 1.0, "decay": 0.0},
        "beta": {"beta0": 1.0, "alpha": 2.0},
        "x0": x0
    }))
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

pub fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}
