//! Forward–backward penalty iterations with constant `μ`.
//!
//! ```text
//! x_n     = J_{μ∂Φ}(z_n)
//! z_{n+1} = (1 − h_n) z_n + h_n (x_n − μ∇Θ(x_n) − μβ_n∇Ψ(x_n))
//! ```
//!
//! With `h_n = 1` this is `x_{n+1} = J_{μ∂Φ}(x_n − μ∇Θ(x_n) − μβ_n∇Ψ(x_n))`.

use serde::{Deserialize, Serialize};

use crate::diagnostics::{Sample, Trace};
use crate::error::{ensure_finite, ensure_positive, Error, Result};
use crate::linalg::norm;
use crate::problem::ProblemInstance;

/// Iterates whose norm exceeds this are reported as divergent.
pub const DIVERGENCE_THRESHOLD: f64 = 1e12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RelaxationRule {
    /// `h_n = min(1, 1/(μ(L_Θ + β_n L_Ψ)))`
    Stable,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Relaxation {
    Constant(f64),
    Rule(RelaxationRule),
}

impl Default for Relaxation {
    fn default() -> Self {
        Relaxation::Constant(1.0)
    }
}

impl Relaxation {
    fn at(&self, prob: &ProblemInstance, mu: f64, beta: f64) -> f64 {
        match self {
            Relaxation::Constant(h) => *h,
            Relaxation::Rule(RelaxationRule::Stable) => {
                let l = mu * (prob.theta.lipschitz_grad() + beta * prob.psi.lipschitz_grad());
                if l > 1.0 { 1.0 / l } else { 1.0 }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscreteRunConfig {
    pub mu: f64,
    pub steps: usize,
    #[serde(default)]
    pub h: Relaxation,
    /// Grid spacing of `β_n = β(nΔ)`; defaults to `mu`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// Explicit `β_0, β_1, …` overriding the schedule.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub betas: Option<Vec<f64>>,
}

impl DiscreteRunConfig {
    pub fn new(mu: f64, steps: usize) -> Self {
        DiscreteRunConfig { mu, steps, h: Relaxation::default(), delta: None, betas: None }
    }

    pub fn delta(&self) -> f64 {
        self.delta.unwrap_or(self.mu)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::Validation(format!("discrete.mu must be positive, got {}", self.mu)));
        }
        if let Some(d) = self.delta {
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::Validation(format!("discrete.delta must be positive, got {d}")));
            }
        }
        if let Relaxation::Constant(h) = self.h {
            if !(h > 0.0 && h <= 1.0) {
                return Err(Error::Validation(format!("discrete.h must lie in (0, 1], got {h}")));
            }
        }
        if let Some(b) = &self.betas {
            if b.len() < self.steps {
                return Err(Error::Validation(format!(
                    "discrete.betas has {} entries but {} steps were requested",
                    b.len(),
                    self.steps
                )));
            }
            if b.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                return Err(Error::Validation("discrete.betas must be positive".into()));
            }
            if b.windows(2).any(|w| w[1] < w[0]) {
                return Err(Error::Validation("discrete.betas must be nondecreasing".into()));
            }
        }
        Ok(())
    }

    /// `β_n` of step `n`.
    pub fn beta_n(&self, prob: &ProblemInstance, n: usize) -> f64 {
        match &self.betas {
            Some(b) => b[n.min(b.len() - 1)],
            None => prob.beta_t(n as f64 * self.delta()),
        }
    }
}

/// Output of [`run_discrete`].
#[derive(Clone, Debug)]
pub struct DiscreteRun {
    pub trace: Trace,
    /// `Σ_{k<n} μβ_k·gap(p/β_k)` for each recorded index `n`, when `p` was given.
    pub partial_sums: Option<Vec<f64>>,
}

/// `x ↦ x − μ∇Θ(x) − μβ∇Ψ(x)` into `out`.
fn forward_into(prob: &ProblemInstance, x: &[f64], mu: f64, beta: f64, out: &mut [f64], g: &mut [f64]) {
    prob.theta.grad_into(x, g);
    for i in 0..x.len() {
        out[i] = x[i] - mu * g[i];
    }
    prob.psi.grad_into(x, g);
    let mb = mu * beta;
    for i in 0..x.len() {
        out[i] -= mb * g[i];
    }
}

pub fn penalty_fb_step(prob: &ProblemInstance, x_n: &[f64], mu: f64, beta_n: f64) -> Result<Vec<f64>> {
    ensure_finite("x_n", x_n)?;
    ensure_positive("mu", mu)?;
    ensure_positive("beta_n", beta_n)?;
    let n = x_n.len();
    let mut y = vec![0.0; n];
    let mut g = vec![0.0; n];
    forward_into(prob, x_n, mu, beta_n, &mut y, &mut g);
    let mut out = vec![0.0; n];
    prob.phi.prox_into(mu, &y, &mut out);
    if !crate::linalg::is_finite(&out) {
        return Err(Error::Numeric { t: 0.0, message: "forward-backward step is not finite".into() });
    }
    Ok(out)
}

/// Returns `(x_n, z_{n+1})`.
pub fn relaxed_penalty_step(
    prob: &ProblemInstance,
    z_n: &[f64],
    h_n: f64,
    mu: f64,
    beta_n: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(h_n > 0.0 && h_n <= 1.0) {
        return Err(Error::Parameter(format!("relaxation h_n must lie in (0, 1], got {h_n}")));
    }
    ensure_finite("z_n", z_n)?;
    ensure_positive("mu", mu)?;
    ensure_positive("beta_n", beta_n)?;
    let n = z_n.len();
    let mut x = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut g = vec![0.0; n];
    relaxed_into(prob, z_n, h_n, mu, beta_n, &mut x, &mut z, &mut g);
    if !crate::linalg::is_finite(&z) {
        return Err(Error::Numeric { t: 0.0, message: "relaxed step is not finite".into() });
    }
    Ok((x, z))
}

#[allow(clippy::too_many_arguments)]
fn relaxed_into(
    prob: &ProblemInstance,
    z_n: &[f64],
    h: f64,
    mu: f64,
    beta: f64,
    x: &mut [f64],
    z_next: &mut [f64],
    g: &mut [f64],
) {
    prob.phi.prox_into(mu, z_n, x);
    forward_into(prob, x, mu, beta, z_next, g);
    if h != 1.0 {
        for i in 0..z_n.len() {
            z_next[i] = (1.0 - h) * z_n[i] + h * z_next[i];
        }
    }
}

/// Runs `steps` relaxed iterations from `z_0 = x_0 + μv_0`, recording
/// `t_n = nΔ` for `n = 0, …, steps`.
pub fn run_discrete(prob: &ProblemInstance, cfg: &DiscreteRunConfig, p: Option<&[f64]>) -> Result<DiscreteRun> {
    cfg.validate()?;
    let n = prob.n;
    let mu = cfg.mu;
    let delta = cfg.delta();
    let mut z: Vec<f64> = prob.x0.iter().zip(&prob.v0).map(|(x, v)| x + mu * v).collect();
    let mut x = vec![0.0; n];
    let mut z_next = vec![0.0; n];
    let mut g = vec![0.0; n];
    let mut trace = Trace::with_capacity(cfg.steps + 1);
    let mut sums = p.map(|_| Vec::with_capacity(cfg.steps + 1));
    let mut acc = 0.0;
    let mut q = vec![0.0; n];
    let mut last_h = 0.0;

    for k in 0..=cfg.steps {
        let beta = cfg.beta_n(prob, k);
        prob.phi.prox_into(mu, &z, &mut x);
        if !crate::linalg::is_finite(&x) || norm(&x) > DIVERGENCE_THRESHOLD {
            return Err(Error::Divergence {
                t: k as f64 * delta,
                message: format!("iterate norm exceeded {DIVERGENCE_THRESHOLD:e} at step {k}"),
                // after the swap `z_next` holds the previous iterate
                last_state: if k == 0 { z } else { z_next },
            });
        }
        let v = z.iter().zip(&x).map(|(zi, xi)| (zi - xi) / mu).collect();
        trace.push(
            prob,
            Sample { t: k as f64 * delta, z: z.clone(), x: x.clone(), v, beta, lambda: 1.0 / mu, step_h: last_h },
        );
        if let (Some(s), Some(p)) = (sums.as_mut(), p) {
            s.push(acc);
            for i in 0..n {
                q[i] = p[i] / beta;
            }
            acc += mu * beta * prob.psi.fenchel_gap(&q)?;
        }
        if k == cfg.steps {
            break;
        }
        let h = cfg.h.at(prob, mu, beta);
        relaxed_into(prob, &z, h, mu, beta, &mut x, &mut z_next, &mut g);
        std::mem::swap(&mut z, &mut z_next);
        last_h = h;
    }
    Ok(DiscreteRun { trace, partial_sums: sums })
}
