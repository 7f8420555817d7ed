//! First-order reformulation of the Levenberg–Marquardt dynamics.
//!
//! With `μ = 1/λ` the state `z = x + μv` obeys `ż = f(t, z)` where
//!
//! ```text
//! f(t, z) = (μ̇ − μ)·(∂Φ)_μ(z) − μ∇Θ(J_{μ∂Φ} z) − βμ∇Ψ(J_{μ∂Φ} z)
//! ```
//!
//! and the pair is recovered as `x = J_{μ∂Φ}(z)`, `v = (z − x)/μ`. The
//! right-hand side is globally Lipschitz in `z` with modulus
//! `1 + |λ̇|/λ + L_Θ/λ + L_Ψ β/λ`, which also bounds the step size.

use serde::{Deserialize, Serialize};

use crate::diagnostics::{Sample, Trace};
use crate::error::{Error, Result};
use crate::problem::ProblemInstance;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Fraction `η` of `1/L_f(t)` allowed as step size.
    pub safety: f64,
    pub max_step: f64,
    pub min_step: f64,
    pub sample_interval: f64,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        IntegratorOptions {
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            safety: 0.5,
            max_step: 1.0,
            min_step: 1e-7,
            sample_interval: 0.1,
        }
    }
}

impl IntegratorOptions {
    pub fn validate(&self) -> Result<()> {
        let pos = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Validation(format!("integrator.{name} must be positive, got {v}")))
            }
        };
        pos("rel_tol", self.rel_tol)?;
        pos("abs_tol", self.abs_tol)?;
        pos("max_step", self.max_step)?;
        pos("min_step", self.min_step)?;
        pos("sample_interval", self.sample_interval)?;
        if !(self.safety > 0.0 && self.safety <= 1.0) {
            return Err(Error::Validation(format!("integrator.safety must lie in (0, 1], got {}", self.safety)));
        }
        if self.min_step > self.max_step {
            return Err(Error::Validation("integrator.min_step exceeds max_step".into()));
        }
        Ok(())
    }
}

/// Reusable buffers for one right-hand-side evaluation.
pub(crate) struct Scratch {
    x: Vec<f64>,
    g_theta: Vec<f64>,
    g_psi: Vec<f64>,
}

impl Scratch {
    pub(crate) fn new(n: usize) -> Self {
        Scratch { x: vec![0.0; n], g_theta: vec![0.0; n], g_psi: vec![0.0; n] }
    }
}

/// `f(t, z)` into `out`, one resolvent evaluation shared by all three terms.
pub(crate) fn rhs_into(prob: &ProblemInstance, t: f64, z: &[f64], out: &mut [f64], s: &mut Scratch) -> Result<()> {
    let mu = prob.lambda.mu(t);
    let dmu = prob.lambda.dmu(t);
    let beta = prob.beta_t(t);
    prob.phi.prox_into(mu, z, &mut s.x);
    prob.theta.grad_into(&s.x, &mut s.g_theta);
    prob.psi.grad_into(&s.x, &mut s.g_psi);
    let c = (dmu - mu) / mu;
    let bm = beta * mu;
    for i in 0..z.len() {
        out[i] = c * (z[i] - s.x[i]) - mu * s.g_theta[i] - bm * s.g_psi[i];
        if !out[i].is_finite() {
            return Err(Error::Numeric { t, message: format!("right-hand side component {i} is not finite") });
        }
    }
    Ok(())
}

pub fn rhs(prob: &ProblemInstance, t: f64, z: &[f64]) -> Result<Vec<f64>> {
    if !(t >= 0.0) {
        return Err(Error::Input(format!("time must be nonnegative, got {t}")));
    }
    crate::error::ensure_finite("z", z)?;
    let mut out = vec![0.0; z.len()];
    rhs_into(prob, t, z, &mut out, &mut Scratch::new(z.len()))?;
    Ok(out)
}

/// Lipschitz modulus of `f(t, ·)`.
pub fn local_lipschitz(prob: &ProblemInstance, t: f64) -> f64 {
    let l = prob.lambda_t(t);
    1.0 + prob.lambda.dlambda(t).abs() / l
        + prob.theta.lipschitz_grad() / l
        + prob.psi.lipschitz_grad() * prob.beta_t(t) / l
}

/// `(x, v) = (J_{μ∂Φ}(z), (∂Φ)_μ(z))`.
pub fn recover_xv(prob: &ProblemInstance, t: f64, z: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mu = prob.lambda.mu(t);
    let mut x = vec![0.0; z.len()];
    prob.phi.prox_into(mu, z, &mut x);
    let v = z.iter().zip(&x).map(|(zi, xi)| (zi - xi) / mu).collect();
    (x, v)
}

/// `z(0) = x₀ + μ(0)v₀`
pub fn initial_state(prob: &ProblemInstance) -> Vec<f64> {
    let mu0 = prob.lambda.mu(0.0);
    prob.x0.iter().zip(&prob.v0).map(|(x, v)| x + mu0 * v).collect()
}

pub(crate) fn make_sample(prob: &ProblemInstance, t: f64, z: Vec<f64>, step_h: f64) -> Sample {
    let (x, v) = recover_xv(prob, t, &z);
    Sample { t, z, x, v, beta: prob.beta_t(t), lambda: prob.lambda_t(t), step_h }
}

/// Sample times `0, Δ, 2Δ, …` up to and including `horizon`.
pub(crate) fn sample_grid(horizon: f64, interval: f64) -> Vec<f64> {
    let m = (horizon / interval).round();
    let mut grid: Vec<f64> = if (m * interval - horizon).abs() <= 1e-9 * horizon.max(1.0) {
        (0..=m as usize).map(|k| k as f64 * interval).collect()
    } else {
        let mut g: Vec<f64> = (0..).map(|k| k as f64 * interval).take_while(|t| *t < horizon).collect();
        g.push(horizon);
        g
    };
    *grid.last_mut().unwrap() = horizon;
    grid
}

// Dormand–Prince 5(4) tableau
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// 5th-order minus embedded 4th-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;
const FAC_SAFETY: f64 = 0.9;
const PI_ALPHA: f64 = 0.7 / 5.0;
const PI_BETA: f64 = 0.4 / 5.0;

struct Stages {
    k: [Vec<f64>; 7],
    y: Vec<f64>,
    y_new: Vec<f64>,
}

/// Integrates `ż = f(t, z)` on `[0, horizon]` and samples `(t, z, x, v)` on the
/// `sample_interval` grid. Steps land exactly on sample times.
pub fn integrate(prob: &ProblemInstance, horizon: f64, opts: &IntegratorOptions) -> Result<Trace> {
    opts.validate()?;
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::Parameter(format!("horizon must be positive, got {horizon}")));
    }
    let n = prob.n;
    let grid = sample_grid(horizon, opts.sample_interval);
    let mut scratch = Scratch::new(n);
    let mut st = Stages {
        k: std::array::from_fn(|_| vec![0.0; n]),
        y: vec![0.0; n],
        y_new: vec![0.0; n],
    };
    let mut z = initial_state(prob);
    let mut t = 0.0;
    let mut trace = Trace::with_capacity(grid.len());
    trace.push(prob, make_sample(prob, 0.0, z.clone(), 0.0));

    rhs_into(prob, t, &z, &mut st.k[0], &mut scratch)?;
    let mut h_ctrl = (opts.safety / local_lipschitz(prob, 0.0)).min(opts.max_step).min(1e-2);
    let mut err_prev: f64 = 1e-4;
    let mut last_h = 0.0;

    for &t_next in &grid[1..] {
        while t < t_next {
            let cap = opts.safety / local_lipschitz(prob, t);
            let h_prop = h_ctrl.min(opts.max_step).min(cap);
            if h_prop < opts.min_step {
                return Err(Error::Divergence {
                    t,
                    message: format!(
                        "step size {h_prop:e} fell below min_step {:e} (stiffness bound {cap:e})",
                        opts.min_step
                    ),
                    last_state: z,
                });
            }
            let remaining = t_next - t;
            let landing = h_prop >= remaining * (1.0 - 1e-12);
            let h = if landing { remaining } else { h_prop };

            let err = dopri_step(prob, t, h, &z, &mut st, &mut scratch, (opts.abs_tol, opts.rel_tol))?;
            if err <= 1.0 {
                let fac = if err == 0.0 {
                    FAC_MAX
                } else {
                    (FAC_SAFETY * err.powf(-PI_ALPHA) * err_prev.powf(PI_BETA)).clamp(FAC_MIN, FAC_MAX)
                };
                err_prev = err.max(1e-4);
                let proposal = h * fac;
                h_ctrl = if landing { proposal.max(h_ctrl) } else { proposal };
                t = if landing { t_next } else { t + h };
                std::mem::swap(&mut z, &mut st.y_new);
                // first-same-as-last
                let (head, tail) = st.k.split_at_mut(6);
                head[0].copy_from_slice(&tail[0]);
                last_h = h;
                if !crate::linalg::is_finite(&z) {
                    return Err(Error::Numeric { t, message: "state became non-finite".into() });
                }
            } else {
                let fac = (FAC_SAFETY * err.powf(-0.2)).clamp(FAC_MIN, 1.0);
                h_ctrl = h * fac;
            }
        }
        trace.push(prob, make_sample(prob, t, z.clone(), last_h));
    }
    Ok(trace)
}

/// One Dormand–Prince step from `(t, z)` with `k[0] = f(t, z)` precomputed.
/// Leaves the 5th-order solution in `st.y_new`, `f(t+h, y_new)` in `k[6]`,
/// and returns the error norm scaled by `tol = (abs, rel)`.
fn dopri_step(
    prob: &ProblemInstance,
    t: f64,
    h: f64,
    z: &[f64],
    st: &mut Stages,
    s: &mut Scratch,
    tol: (f64, f64),
) -> Result<f64> {
    let n = z.len();
    macro_rules! stage {
        ($dst:expr, $c:expr, [$($j:expr => $a:expr),*]) => {{
            for i in 0..n {
                st.y[i] = z[i] + h * (0.0 $(+ $a * st.k[$j][i])*);
            }
            let (y, k) = (&st.y, &mut st.k);
            rhs_into(prob, t + $c * h, y, &mut k[$dst], s)?;
        }};
    }
    stage!(1, C2, [0 => A21]);
    stage!(2, C3, [0 => A31, 1 => A32]);
    stage!(3, C4, [0 => A41, 1 => A42, 2 => A43]);
    stage!(4, C5, [0 => A51, 1 => A52, 2 => A53, 3 => A54]);
    stage!(5, 1.0, [0 => A61, 1 => A62, 2 => A63, 3 => A64, 4 => A65]);
    let k = &st.k;
    for i in 0..n {
        st.y_new[i] = z[i] + h * (B1 * k[0][i] + B3 * k[2][i] + B4 * k[3][i] + B5 * k[4][i] + B6 * k[5][i]);
    }
    {
        let (y_new, k) = (&st.y_new, &mut st.k);
        rhs_into(prob, t + h, y_new, &mut k[6], s)?;
    }
    let k = &st.k;
    let mut acc = 0.0;
    for i in 0..n {
        let e = h
            * (E1 * k[0][i] + E3 * k[2][i] + E4 * k[3][i] + E5 * k[4][i] + E6 * k[5][i] + E7 * k[6][i]);
        let sc = tol.0 + tol.1 * z[i].abs().max(st.y_new[i].abs());
        acc += (e / sc).powi(2);
    }
    Ok((acc / n as f64).sqrt())
}
