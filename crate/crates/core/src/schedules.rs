//! Viscosity and penalty schedules.
//!
//! `λ(t) = λ∞ + (λ₀ − λ∞)e^{−ct}` is nonincreasing with a positive limit, and
//! `β(t) = β₀(1 + t)^α` satisfies `0 ≤ β̇ ≤ αβ` with `β → ∞` iff `α > 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_time(t: f64) -> Result<()> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::Input(format!("time must be finite and nonnegative, got {t}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LambdaSchedule {
    pub lambda0: f64,
    pub lambda_inf: f64,
    #[serde(default)]
    pub decay: f64,
}

impl LambdaSchedule {
    pub fn new(lambda0: f64, lambda_inf: f64, decay: f64) -> Result<Self> {
        let s = LambdaSchedule { lambda0, lambda_inf, decay };
        s.validate()?;
        Ok(s)
    }

    pub fn constant(lambda: f64) -> Result<Self> {
        Self::new(lambda, lambda, 0.0)
    }

    /// Rejects schedules that are not positive and nonincreasing.
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_inf > 0.0 && self.lambda_inf.is_finite()) {
            return Err(Error::Validation(format!(
                "lambda_inf must be positive, got {}",
                self.lambda_inf
            )));
        }
        if !(self.lambda0.is_finite() && self.lambda0 >= self.lambda_inf) {
            return Err(Error::Validation(format!(
                "lambda0 = {} < lambda_inf = {} makes lambda increasing",
                self.lambda0, self.lambda_inf
            )));
        }
        if !(self.decay.is_finite() && self.decay >= 0.0) {
            return Err(Error::Validation(format!("lambda decay must be nonnegative, got {}", self.decay)));
        }
        Ok(())
    }

    pub fn is_constant(&self) -> bool {
        self.decay == 0.0 || self.lambda0 == self.lambda_inf
    }

    #[inline]
    pub(crate) fn lambda(&self, t: f64) -> f64 {
        self.lambda_inf + (self.lambda0 - self.lambda_inf) * (-self.decay * t).exp()
    }

    #[inline]
    pub(crate) fn dlambda(&self, t: f64) -> f64 {
        -self.decay * (self.lambda0 - self.lambda_inf) * (-self.decay * t).exp()
    }

    #[inline]
    pub(crate) fn mu(&self, t: f64) -> f64 {
        1.0 / self.lambda(t)
    }

    #[inline]
    pub(crate) fn dmu(&self, t: f64) -> f64 {
        let l = self.lambda(t);
        -self.dlambda(t) / (l * l)
    }

    pub fn lambda_at(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        Ok(self.lambda(t))
    }

    pub fn dlambda_at(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        Ok(self.dlambda(t))
    }

    pub fn mu_at(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        Ok(self.mu(t))
    }

    pub fn dmu_at(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        Ok(self.dmu(t))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BetaSchedule {
    pub beta0: f64,
    pub alpha: f64,
}

impl BetaSchedule {
    pub fn new(beta0: f64, alpha: f64) -> Result<Self> {
        let s = BetaSchedule { beta0, alpha };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta0 > 0.0 && self.beta0.is_finite()) {
            return Err(Error::Validation(format!("beta0 must be positive, got {}", self.beta0)));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::Validation(format!("alpha must be nonnegative, got {}", self.alpha)));
        }
        Ok(())
    }

    #[inline]
    pub(crate) fn beta(&self, t: f64) -> f64 {
        self.beta0 * (1.0 + t).powf(self.alpha)
    }

    #[inline]
    pub(crate) fn dbeta(&self, t: f64) -> f64 {
        if self.alpha == 0.0 {
            0.0
        } else {
            self.alpha * self.beta0 * (1.0 + t).powf(self.alpha - 1.0)
        }
    }

    pub fn beta_at(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        Ok(self.beta(t))
    }

    pub fn dbeta_at(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        Ok(self.dbeta(t))
    }

    /// Least `k` with `β̇(t) ≤ kβ(t)` on `[0, ∞)`: the ratio `α/(1+t)` peaks at `t = 0`.
    pub fn growth_constant(&self) -> f64 {
        self.alpha
    }

    /// Smallest `t₀ ≥ 0` from which `β̇ ≤ kβ` holds for a prescribed `k`; `None` if never.
    pub fn growth_onset(&self, k: f64) -> Option<f64> {
        if self.alpha == 0.0 {
            return Some(0.0);
        }
        if k <= 0.0 {
            return None;
        }
        Some((self.alpha / k - 1.0).max(0.0))
    }

    pub fn diverges(&self) -> bool {
        self.alpha > 0.0
    }

    /// `∫₀^∞ 1/β dt < ∞`.
    pub fn reciprocal_integrable(&self) -> bool {
        self.alpha > 1.0
    }
}

/// Sampled audit of a schedule pair against the monotonicity and growth hypotheses.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScheduleAudit {
    pub lambda_positive: bool,
    pub lambda_nonincreasing: bool,
    pub lambda_limit: f64,
    pub growth_constant: f64,
    pub growth_holds: bool,
    pub growth_onset: Option<f64>,
    pub beta_diverges: bool,
}

/// Checks the schedules at `samples` evenly spaced points of `[0, horizon]`.
pub fn audit(lambda: &LambdaSchedule, beta: &BetaSchedule, horizon: f64, samples: usize) -> ScheduleAudit {
    let k = beta.growth_constant();
    let mut positive = true;
    let mut nonincreasing = true;
    let mut growth = true;
    let mut prev = f64::INFINITY;
    let n = samples.max(2);
    for i in 0..n {
        let t = horizon * i as f64 / (n - 1) as f64;
        let l = lambda.lambda(t);
        positive &= l > 0.0 && l >= lambda.lambda_inf - 1e-12;
        nonincreasing &= l <= prev && lambda.dlambda(t) <= 0.0;
        prev = l;
        let db = beta.dbeta(t);
        growth &= db >= 0.0 && db <= k * beta.beta(t) + 1e-12;
    }
    ScheduleAudit {
        lambda_positive: positive,
        lambda_nonincreasing: nonincreasing,
        lambda_limit: lambda.lambda_inf,
        growth_constant: k,
        growth_holds: growth,
        growth_onset: beta.growth_onset(k),
        beta_diverges: beta.diverges(),
    }
}
