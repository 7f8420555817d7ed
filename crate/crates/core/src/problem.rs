//! Validated problem instances and the static hypothesis checks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::calculus::{PenaltyFn, ProxableFn, SmoothConvexFn, SmoothKind};
use crate::error::{Error, Result};
use crate::linalg::{dist, dot, norm_sq};
use crate::quadrature::{adaptive_simpson, DEFAULT_ABS_TOL, DEFAULT_MAX_DEPTH};
use crate::schedules::{BetaSchedule, LambdaSchedule};

/// Tolerance of the subgradient membership tests.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

/// Declarative description of an instance, as found in a run configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub dimension: usize,
    pub phi: ProxableFn,
    pub theta: SmoothKind,
    pub psi: PenaltyFn,
    pub lambda: LambdaSchedule,
    pub beta: BetaSchedule,
    pub x0: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v0: Option<Vec<f64>>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProblemInstance {
    pub n: usize,
    pub phi: ProxableFn,
    pub theta: SmoothConvexFn,
    pub psi: PenaltyFn,
    pub lambda: LambdaSchedule,
    pub beta: BetaSchedule,
    pub x0: Vec<f64>,
    pub v0: Vec<f64>,
    pub seed: u64,
}

/// Builds an instance and enforces every invariant of its parts.
///
/// When `v0` is omitted the least-norm element of `∂Φ(x0)` is used.
pub fn assemble(config: &ProblemConfig) -> Result<ProblemInstance> {
    let n = config.dimension;
    if n == 0 {
        return Err(Error::Validation("dimension must be at least 1".into()));
    }
    config.phi.validate(n)?;
    config.psi.validate(n)?;
    let theta = SmoothConvexFn::new(config.theta.clone(), n)?;
    config.lambda.validate()?;
    config.beta.validate()?;
    if config.x0.len() != n {
        return Err(Error::Validation(format!("x0 has length {} but the dimension is {n}", config.x0.len())));
    }
    if config.x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation("x0 has non-finite entries".into()));
    }
    if !config.phi.value(&config.x0).is_finite() {
        return Err(Error::Validation("phi(x0) is not finite".into()));
    }
    let v0 = match &config.v0 {
        Some(v0) => {
            if v0.len() != n {
                return Err(Error::Validation(format!("v0 has length {} but the dimension is {n}", v0.len())));
            }
            config
                .phi
                .check_subgradient(&config.x0, v0, MEMBERSHIP_TOL)
                .map_err(|e| Error::Validation(format!("v0 is not a subgradient of phi at x0: {e}")))?;
            v0.clone()
        }
        None => config
            .phi
            .min_norm_subgradient(&config.x0)
            .ok_or_else(|| Error::Validation("phi has no subgradient at x0".into()))?,
    };
    sampled_subgradient_check(&config.phi, &config.x0, &v0, 200, config.seed)?;
    Ok(ProblemInstance {
        n,
        phi: config.phi.clone(),
        theta,
        psi: config.psi.clone(),
        lambda: config.lambda,
        beta: config.beta,
        x0: config.x0.clone(),
        v0,
        seed: config.seed,
    })
}

/// Checks `Φ(y) ≥ Φ(x) + ⟨v, y − x⟩ − tol` on random points of `dom Φ`.
fn sampled_subgradient_check(phi: &ProxableFn, x: &[f64], v: &[f64], count: usize, seed: u64) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0001);
    let fx = phi.value(x);
    let mut y = vec![0.0; x.len()];
    let mut raw = vec![0.0; x.len()];
    for _ in 0..count {
        for (r, xi) in raw.iter_mut().zip(x) {
            let g: f64 = StandardNormal.sample(&mut rng);
            *r = xi + 2.0 * g;
        }
        // land in dom Φ
        phi.prox_into(1.0, &raw, &mut y);
        let lhs = phi.value(&y);
        let rhs = fx + v.iter().zip(y.iter().zip(x)).map(|(vi, (yi, xi))| vi * (yi - xi)).sum::<f64>();
        if lhs < rhs - MEMBERSHIP_TOL {
            return Err(Error::Validation(format!(
                "v0 violates the subgradient inequality (gap {:e})",
                rhs - lhs
            )));
        }
    }
    Ok(())
}

/// Outcome of the constraint-qualification audit for `∂(Φ+Θ+δ_C) = ∂Φ + ∇Θ + N_C`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Qualification {
    pub holds: bool,
    pub reason: String,
}

/// Static summary of the hypotheses on the schedules and the penalty.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HypothesisFlags {
    /// `λ̇ ≤ 0` and `lim λ > 0`.
    pub lambda_ok: bool,
    /// `0 ≤ β̇ ≤ kβ` for `k = α`.
    pub growth_ok: bool,
    pub growth_constant: f64,
    /// `β(t) → ∞`.
    pub beta_diverges: bool,
    /// Finiteness of the conjugate integral for every normal-cone element.
    pub condition_h: bool,
    pub qualification: Qualification,
}

impl HypothesisFlags {
    pub fn all_hold(&self) -> bool {
        self.lambda_ok && self.growth_ok && self.beta_diverges && self.condition_h && self.qualification.holds
    }

    /// Human-readable list of the violated hypotheses.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !self.lambda_ok {
            v.push("lambda nonincreasing with positive limit violated".to_string());
        }
        if !self.growth_ok {
            v.push("growth condition 0 <= dbeta <= k beta violated".to_string());
        }
        if !self.beta_diverges {
            v.push("beta -> infinity violated".to_string());
        }
        if !self.condition_h {
            v.push("condition (H) not satisfied".to_string());
        }
        if !self.qualification.holds {
            v.push(format!("subdifferential sum rule not established: {}", self.qualification.reason));
        }
        v
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditionHReport {
    pub p: Vec<f64>,
    pub horizon: f64,
    /// `∫₀ᵀ β(t)·gap(p/β(t)) dt`
    pub partial_integral: f64,
    /// `∫_T^∞ β(t)·gap(p/β(t)) dt` in closed form.
    pub analytic_tail: f64,
    pub finite: bool,
}

impl ConditionHReport {
    pub fn total(&self) -> f64 {
        self.partial_integral + self.analytic_tail
    }
}

impl ProblemInstance {
    #[inline]
    pub(crate) fn lambda_t(&self, t: f64) -> f64 {
        self.lambda.lambda(t)
    }

    #[inline]
    pub(crate) fn beta_t(&self, t: f64) -> f64 {
        self.beta.beta(t)
    }

    /// `(Φ + Θ)(x)`
    pub fn objective(&self, x: &[f64]) -> f64 {
        self.phi.value(x) + self.theta.value(x)
    }

    /// Modulus of strong convexity of `Φ + Θ`.
    pub fn strong_convexity(&self) -> f64 {
        self.phi.strong_convexity() + self.theta.strong_convexity()
    }

    pub fn qualification(&self) -> Qualification {
        if self.phi.is_finite_valued() {
            return Qualification {
                holds: true,
                reason: "phi is finite and continuous everywhere".into(),
            };
        }
        let ProxableFn::BoxIndicator { lo, hi } = &self.phi else {
            unreachable!("only the box indicator takes infinite values")
        };
        let (holds, what) = match &self.psi {
            PenaltyFn::Zero {} => (true, "argmin psi is the whole space"),
            PenaltyFn::HalfSqnorm {} => (
                lo.iter().zip(hi).all(|(l, h)| *l <= 0.0 && 0.0 <= *h),
                "polyhedral sets: the box must contain 0",
            ),
            PenaltyFn::HalfSqdistHyperplane { a, b } => {
                let (mut lo_v, mut hi_v) = (0.0, 0.0);
                for i in 0..self.n {
                    lo_v += (a[i] * lo[i]).min(a[i] * hi[i]);
                    hi_v += (a[i] * lo[i]).max(a[i] * hi[i]);
                }
                (lo_v <= *b && *b <= hi_v, "polyhedral sets: the box must meet the hyperplane")
            }
            PenaltyFn::HalfSqdistBox { lo: l2, hi: h2 } => (
                (0..self.n).all(|i| lo[i].max(l2[i]) <= hi[i].min(h2[i])),
                "polyhedral sets: the boxes must overlap",
            ),
            PenaltyFn::HalfSqdistBall { center, radius } => {
                let nearest: Vec<f64> = (0..self.n).map(|i| center[i].clamp(lo[i], hi[i])).collect();
                let d = dist(&nearest, center);
                if *radius == 0.0 {
                    (d == 0.0, "the box must contain the center")
                } else {
                    (d < *radius, "the box must meet the open ball")
                }
            }
        };
        Qualification { holds, reason: what.to_string() }
    }

    pub fn hypotheses(&self) -> HypothesisFlags {
        let lambda_ok = self.lambda.validate().is_ok();
        HypothesisFlags {
            lambda_ok,
            growth_ok: self.beta.validate().is_ok(),
            growth_constant: self.beta.growth_constant(),
            beta_diverges: self.beta.diverges(),
            condition_h: self.psi.is_zero() || self.beta.reciprocal_integrable(),
            qualification: self.qualification(),
        }
    }

    fn condition_h_integrand(&self, p: &[f64], t: f64) -> f64 {
        let b = self.beta.beta(t);
        let q: Vec<f64> = p.iter().map(|pi| pi / b).collect();
        b * self.psi.fenchel_gap(&q).unwrap_or(f64::INFINITY)
    }

    /// `∫_{a}^{b} β·gap(p/β) dt` by adaptive Simpson.
    pub fn condition_h_integral(&self, p: &[f64], a: f64, b: f64) -> Result<f64> {
        if p.iter().all(|v| *v == 0.0) {
            return Ok(0.0);
        }
        if self.psi.is_zero() {
            return Ok(f64::INFINITY);
        }
        adaptive_simpson(|t| self.condition_h_integrand(p, t), a, b, DEFAULT_ABS_TOL, DEFAULT_MAX_DEPTH)
    }

    /// Closed-form `∫_T^∞ β·gap(p/β) dt`.
    pub fn condition_h_tail(&self, p: &[f64], horizon: f64) -> f64 {
        let pp = norm_sq(p);
        if pp == 0.0 {
            return 0.0;
        }
        if self.psi.is_zero() || self.beta.alpha <= 1.0 {
            return f64::INFINITY;
        }
        let a = self.beta.alpha;
        pp / (2.0 * self.beta.beta0 * (a - 1.0)) * (1.0 + horizon).powf(1.0 - a)
    }

    pub fn check_condition_h(&self, p: &[f64], horizon: f64) -> Result<ConditionHReport> {
        if p.len() != self.n || p.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("p must be a finite vector of the problem dimension".into()));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::Parameter(format!("horizon must be positive, got {horizon}")));
        }
        let partial = self.condition_h_integral(p, 0.0, horizon)?;
        let tail = self.condition_h_tail(p, horizon);
        Ok(ConditionHReport {
            p: p.to_vec(),
            horizon,
            partial_integral: partial,
            analytic_tail: tail,
            finite: partial.is_finite() && tail.is_finite(),
        })
    }

    /// Sampled variational-inequality residual of a candidate pair `(x, v)`.
    ///
    /// Returns `‖x − P_C(x)‖ + max_y max(0, −⟨v + ∇Θ(x), y − x⟩)` over `2·samples`
    /// projected Gaussian points (half centered at the origin, half at `x`) plus `anchor`.
    pub fn vi_residual(&self, x: &[f64], v: &[f64], samples: usize, anchor: Option<&[f64]>) -> Result<f64> {
        if samples == 0 {
            return Err(Error::Parameter("vi_residual needs at least one sample".into()));
        }
        let n = self.n;
        let feas = dist(x, &self.psi.project_to_argmin(x));
        let mut g = self.theta.grad(x);
        for (gi, vi) in g.iter_mut().zip(v) {
            *gi += vi;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ 0x5eed_0002);
        let mut worst = 0.0f64;
        let mut probe = vec![0.0; n];
        let mut y = vec![0.0; n];
        let mut score = |y: &[f64]| {
            let s: f64 = -g.iter().zip(y.iter().zip(x)).map(|(gi, (yi, xi))| gi * (yi - xi)).sum::<f64>();
            worst = worst.max(s);
        };
        for k in 0..2 * samples {
            for i in 0..n {
                let e: f64 = StandardNormal.sample(&mut rng);
                probe[i] = if k < samples { e } else { x[i] + e };
            }
            self.psi.project_into(&probe, &mut y);
            score(&y);
        }
        if let Some(a) = anchor {
            score(a);
        }
        Ok(feas + worst)
    }

    /// Whether `p ∈ N_C(z)` within `tol` on sampled points of `C` (`⟨p, z⟩ ≥ ⟨p, y⟩ − tol`).
    pub fn in_normal_cone(&self, z: &[f64], p: &[f64], samples: usize, tol: f64) -> bool {
        if dist(z, &self.psi.project_to_argmin(z)) > tol {
            return false;
        }
        let pz = dot(p, z);
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ 0x5eed_0003);
        let mut probe = vec![0.0; self.n];
        let mut y = vec![0.0; self.n];
        for k in 0..2 * samples {
            for i in 0..self.n {
                let e: f64 = StandardNormal.sample(&mut rng);
                probe[i] = if k < samples { e } else { z[i] + e };
            }
            self.psi.project_into(&probe, &mut y);
            if dot(p, &y) > pz + tol {
                return false;
            }
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn b1_config() -> ProblemConfig {
        ProblemConfig {
            dimension: 2,
            phi: ProxableFn::WeightedL1 { weights: vec![1.0, 1.0] },
            theta: SmoothKind::Quadratic { hessian: vec![vec![1.0, 0.0], vec![0.0, 1.0]], q: vec![0.0, 0.0] },
            psi: PenaltyFn::HalfSqdistHyperplane { a: vec![1.0, 0.0], b: 1.0 },
            lambda: LambdaSchedule::constant(1.0).unwrap(),
            beta: BetaSchedule::new(1.0, 2.0).unwrap(),
            x0: vec![2.0, -1.0],
            v0: None,
            seed: 7,
        }
    }

    #[test]
    fn v0_is_auto_selected() {
        let p = assemble(&b1_config()).unwrap();
        assert_eq!(p.v0, vec![1.0, -1.0]);
    }

    #[test]
    fn v0_at_origin_accepted() {
        let mut c = b1_config();
        c.x0 = vec![0.0, 0.0];
        c.v0 = Some(vec![0.5, -0.2]);
        assert!(assemble(&c).is_ok());
    }

    #[test]
    fn wrong_sign_v0_rejected_naming_coordinate() {
        let mut c = b1_config();
        c.x0 = vec![1.0, 0.0];
        c.v0 = Some(vec![-1.0, 0.0]);
        let err = assemble(&c).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
        assert!(err.to_string().contains("coordinate 1"), "{err}");
    }

    #[test]
    fn dimension_mismatch_and_indefinite_q_rejected() {
        let mut c = b1_config();
        c.x0 = vec![1.0];
        assert!(matches!(assemble(&c), Err(Error::Validation(_))));
        let mut c = b1_config();
        c.theta = SmoothKind::Quadratic { hessian: vec![vec![1.0, 0.0], vec![0.0, -1.0]], q: vec![0.0, 0.0] };
        assert!(matches!(assemble(&c), Err(Error::Validation(_))));
        let mut c = b1_config();
        c.dimension = 0;
        assert!(assemble(&c).is_err());
    }

    #[test]
    fn assemble_is_deterministic() {
        let c = b1_config();
        assert_eq!(assemble(&c).unwrap(), assemble(&c).unwrap());
    }

    #[test]
    fn condition_h_examples() {
        let p = assemble(&b1_config()).unwrap();
        let r = p.check_condition_h(&[-2.0, 0.0], 1000.0).unwrap();
        assert!(r.finite);
        assert!((r.total() - 2.0).abs() < 1e-6);
        let zero = p.check_condition_h(&[0.0, 0.0], 50.0).unwrap();
        assert_eq!((zero.partial_integral, zero.analytic_tail, zero.finite), (0.0, 0.0, true));
        let mut c = b1_config();
        c.beta = BetaSchedule::new(1.0, 1.0).unwrap();
        let r = assemble(&c).unwrap().check_condition_h(&[-2.0, 0.0], 10.0).unwrap();
        assert!(!r.finite);
        assert_eq!(r.analytic_tail, f64::INFINITY);
    }

    #[test]
    fn condition_h_zero_penalty() {
        let mut c = b1_config();
        c.psi = PenaltyFn::Zero {};
        let p = assemble(&c).unwrap();
        let r = p.check_condition_h(&[1.0, 0.0], 10.0).unwrap();
        assert!(!r.finite && r.partial_integral.is_infinite());
        assert!(p.check_condition_h(&[0.0, 0.0], 10.0).unwrap().finite);
        assert!(p.hypotheses().condition_h);
    }

    #[test]
    fn vi_residual_examples() {
        let p = assemble(&b1_config()).unwrap();
        let r = p.vi_residual(&[1.0, 0.0], &[1.0, 0.0], 50, None).unwrap();
        assert!(r <= 1e-10, "{r}");
        let bad = p.vi_residual(&[1.0, 1.0], &[1.0, 1.0], 50, Some(&[1.0, 0.0])).unwrap();
        assert!(bad > 0.0);
        assert!(matches!(p.vi_residual(&[1.0, 0.0], &[1.0, 0.0], 0, None), Err(Error::Parameter(_))));

        let mut c = b1_config();
        c.phi = ProxableFn::Zero {};
        c.psi = PenaltyFn::Zero {};
        c.theta = SmoothKind::LeastSquares { matrix: vec![vec![1.0, 0.0], vec![0.0, 1.0]], b: vec![2.0, -3.0] };
        let p = assemble(&c).unwrap();
        assert_eq!(p.vi_residual(&[2.0, -3.0], &[0.0, 0.0], 20, None).unwrap(), 0.0);
    }

    #[test]
    fn qualification_audit() {
        let p = assemble(&b1_config()).unwrap();
        assert!(p.qualification().holds);
        let mut c = b1_config();
        c.phi = ProxableFn::BoxIndicator { lo: vec![2.0, -1.0], hi: vec![3.0, 1.0] };
        c.x0 = vec![2.5, 0.0];
        assert!(!assemble(&c).unwrap().qualification().holds);
        c.phi = ProxableFn::BoxIndicator { lo: vec![0.0, -1.0], hi: vec![3.0, 1.0] };
        assert!(assemble(&c).unwrap().qualification().holds);
    }

    #[test]
    fn hypothesis_flags_for_b1_and_constant_beta() {
        let p = assemble(&b1_config()).unwrap();
        assert!(p.hypotheses().all_hold());
        let mut c = b1_config();
        c.beta = BetaSchedule::new(1.0, 0.0).unwrap();
        let h = assemble(&c).unwrap().hypotheses();
        assert!(!h.beta_diverges && !h.condition_h && !h.all_hold());
        assert!(h.violations().iter().any(|s| s.contains("infinity")));
    }
}
