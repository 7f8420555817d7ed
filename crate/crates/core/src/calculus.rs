//! Closed catalog of convex functions with exact oracles.
//!
//! Three families are provided:
//!
//! * [`ProxableFn`]: proper convex lsc functions with an exact resolvent
//!   (`prox`), Yosida approximation and an exact subdifferential membership test.
//! * [`SmoothConvexFn`]: convex quadratics `½xᵀQx + qᵀx + c` with Lipschitz gradient.
//! * [`PenaltyFn`]: smooth nonnegative penalties whose zero set is a simple
//!   closed convex set `C`, with the projection onto `C` and the Fenchel gap
//!   `Ψ*(q) − σ_C(q)`.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, ensure_positive, Error, Result};
use crate::linalg::{dot, gram, matvec_into, norm, norm_sq, sym_eigen_range};

fn check_len(what: &str, v: &[f64], n: usize) -> Result<()> {
    if v.len() != n {
        return Err(Error::Validation(format!(
            "{what} has length {} but the dimension is {n}",
            v.len()
        )));
    }
    ensure_finite(what, v).map_err(|e| Error::Validation(e.to_string()))
}

/// Where and why a pair `(x, v)` fails `v ∈ ∂Φ(x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SubgradientViolation {
    /// Zero-based coordinate index.
    pub index: usize,
    pub reason: String,
}

impl std::fmt::Display for SubgradientViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "coordinate {} (index {}): {}", self.index + 1, self.index, self.reason)
    }
}

/// Nonsmooth part of the objective.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProxableFn {
    Zero {},
    /// `Σ wᵢ|xᵢ|`
    WeightedL1 { weights: Vec<f64> },
    /// Indicator of `[lo, hi]`.
    BoxIndicator { lo: Vec<f64>, hi: Vec<f64> },
    /// `(c/2)‖x‖²`
    ScaledHalfSqnorm { c: f64 },
}

impl ProxableFn {
    pub fn validate(&self, n: usize) -> Result<()> {
        match self {
            ProxableFn::Zero {} => Ok(()),
            ProxableFn::WeightedL1 { weights } => {
                check_len("phi.weights", weights, n)?;
                if let Some(i) = weights.iter().position(|w| *w < 0.0) {
                    return Err(Error::Validation(format!("phi.weights[{i}] is negative")));
                }
                Ok(())
            }
            ProxableFn::BoxIndicator { lo, hi } => {
                check_len("phi.lo", lo, n)?;
                check_len("phi.hi", hi, n)?;
                if let Some(i) = (0..n).find(|&i| lo[i] > hi[i]) {
                    return Err(Error::Validation(format!("phi box has lo[{i}] > hi[{i}]")));
                }
                Ok(())
            }
            ProxableFn::ScaledHalfSqnorm { c } => {
                if !(c.is_finite() && *c >= 0.0) {
                    return Err(Error::Validation(format!("phi.c must be nonnegative, got {c}")));
                }
                Ok(())
            }
        }
    }

    /// Function value; `+∞` outside the domain.
    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            ProxableFn::Zero {} => 0.0,
            ProxableFn::WeightedL1 { weights } => {
                weights.iter().zip(x).map(|(w, xi)| w * xi.abs()).sum()
            }
            ProxableFn::BoxIndicator { lo, hi } => {
                let inside = x
                    .iter()
                    .zip(lo.iter().zip(hi))
                    .all(|(xi, (l, h))| *xi >= *l && *xi <= *h);
                if inside {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            ProxableFn::ScaledHalfSqnorm { c } => 0.5 * c * norm_sq(x),
        }
    }

    /// Modulus of strong convexity (0 when merely convex).
    pub fn strong_convexity(&self) -> f64 {
        match self {
            ProxableFn::ScaledHalfSqnorm { c } => *c,
            _ => 0.0,
        }
    }

    /// Whether the function is finite (hence continuous) on all of ℝⁿ.
    pub fn is_finite_valued(&self) -> bool {
        !matches!(self, ProxableFn::BoxIndicator { .. })
    }

    /// Resolvent `J_{γ∂Φ}(x)`, unchecked, written into `out`.
    pub(crate) fn prox_into(&self, gamma: f64, x: &[f64], out: &mut [f64]) {
        match self {
            ProxableFn::Zero {} => out.copy_from_slice(x),
            ProxableFn::WeightedL1 { weights } => {
                for ((o, xi), w) in out.iter_mut().zip(x).zip(weights) {
                    let t = w * gamma;
                    *o = if *xi > t {
                        xi - t
                    } else if *xi < -t {
                        xi + t
                    } else {
                        0.0
                    };
                }
            }
            ProxableFn::BoxIndicator { lo, hi } => {
                for (i, o) in out.iter_mut().enumerate() {
                    *o = x[i].clamp(lo[i], hi[i]);
                }
            }
            ProxableFn::ScaledHalfSqnorm { c } => {
                let s = 1.0 / (1.0 + gamma * c);
                for (o, xi) in out.iter_mut().zip(x) {
                    *o = s * xi;
                }
            }
        }
    }

    /// Proximal point: the unique minimizer of `Φ(u) + ‖u − x‖²/(2γ)`.
    pub fn prox(&self, gamma: f64, x: &[f64]) -> Result<Vec<f64>> {
        ensure_positive("gamma", gamma)?;
        ensure_finite("x", x)?;
        let mut out = vec![0.0; x.len()];
        self.prox_into(gamma, x, &mut out);
        Ok(out)
    }

    /// Yosida approximation: returns `(p, v)` with `p = prox(γ, x)` and `v = (x − p)/γ ∈ ∂Φ(p)`.
    pub fn yosida(&self, gamma: f64, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let p = self.prox(gamma, x)?;
        let v = x.iter().zip(&p).map(|(xi, pi)| (xi - pi) / gamma).collect();
        Ok((p, v))
    }

    /// Exact catalog test of `v ∈ ∂Φ(x)` up to an absolute tolerance.
    pub fn check_subgradient(
        &self,
        x: &[f64],
        v: &[f64],
        tol: f64,
    ) -> std::result::Result<(), SubgradientViolation> {
        let fail = |index: usize, reason: String| Err(SubgradientViolation { index, reason });
        match self {
            ProxableFn::Zero {} => match v.iter().position(|vi| vi.abs() > tol) {
                Some(i) => fail(i, format!("v = {} but the subdifferential is {{0}}", v[i])),
                None => Ok(()),
            },
            ProxableFn::WeightedL1 { weights } => {
                for i in 0..x.len() {
                    let w = weights[i];
                    let slack = tol * (1.0 + w);
                    if x[i] != 0.0 {
                        let want = w * x[i].signum();
                        if (v[i] - want).abs() > slack {
                            return fail(i, format!("v = {} but x = {} requires v = {want}", v[i], x[i]));
                        }
                    } else if v[i].abs() > w + slack {
                        return fail(i, format!("v = {} exceeds the weight {w} at x = 0", v[i]));
                    }
                }
                Ok(())
            }
            ProxableFn::BoxIndicator { lo, hi } => {
                for i in 0..x.len() {
                    if x[i] < lo[i] - tol || x[i] > hi[i] + tol {
                        return fail(i, format!("x = {} lies outside [{}, {}]", x[i], lo[i], hi[i]));
                    }
                    let at_lo = (x[i] - lo[i]).abs() <= tol;
                    let at_hi = (x[i] - hi[i]).abs() <= tol;
                    let ok = match (at_lo, at_hi) {
                        (true, true) => true,
                        (true, false) => v[i] <= tol,
                        (false, true) => v[i] >= -tol,
                        (false, false) => v[i].abs() <= tol,
                    };
                    if !ok {
                        return fail(i, format!("v = {} is not normal to the box at x = {}", v[i], x[i]));
                    }
                }
                Ok(())
            }
            ProxableFn::ScaledHalfSqnorm { c } => {
                for i in 0..x.len() {
                    let want = c * x[i];
                    if (v[i] - want).abs() > tol * (1.0 + want.abs()) {
                        return fail(i, format!("v = {} but the gradient is {want}", v[i]));
                    }
                }
                Ok(())
            }
        }
    }

    /// Least-norm element of `∂Φ(x)`, `None` when `x ∉ dom Φ`.
    pub fn min_norm_subgradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        match self {
            ProxableFn::Zero {} => Some(vec![0.0; x.len()]),
            ProxableFn::WeightedL1 { weights } => Some(
                x.iter()
                    .zip(weights)
                    .map(|(xi, w)| if *xi == 0.0 { 0.0 } else { w * xi.signum() })
                    .collect(),
            ),
            ProxableFn::BoxIndicator { .. } => {
                self.value(x).is_finite().then(|| vec![0.0; x.len()])
            }
            ProxableFn::ScaledHalfSqnorm { c } => Some(x.iter().map(|xi| c * xi).collect()),
        }
    }
}

/// Which quadratic a [`SmoothConvexFn`] was built from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SmoothKind {
    Zero {},
    /// `½xᵀQx + qᵀx`
    Quadratic {
        #[serde(rename = "Q")]
        hessian: Vec<Vec<f64>>,
        q: Vec<f64>,
    },
    /// `½‖Ax − b‖²`
    LeastSquares {
        #[serde(rename = "A")]
        matrix: Vec<Vec<f64>>,
        b: Vec<f64>,
    },
}

/// Smooth convex quadratic `½xᵀQx + qᵀx + c`.
#[derive(Clone, Debug, PartialEq)]
pub struct SmoothConvexFn {
    kind: SmoothKind,
    hessian: Vec<Vec<f64>>,
    linear: Vec<f64>,
    constant: f64,
    lipschitz_grad: f64,
    strong_convexity: f64,
}

const PSD_TOL: f64 = 1e-10;

impl SmoothConvexFn {
    pub fn zero(n: usize) -> Self {
        SmoothConvexFn {
            kind: SmoothKind::Zero {},
            hessian: Vec::new(),
            linear: vec![0.0; n],
            constant: 0.0,
            lipschitz_grad: 0.0,
            strong_convexity: 0.0,
        }
    }

    /// `½‖x − a‖²`
    pub fn centered(a: &[f64]) -> Self {
        let n = a.len();
        let identity = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Self::new(SmoothKind::LeastSquares { matrix: identity, b: a.to_vec() }, n)
            .expect("identity least-squares is valid")
    }

    pub fn new(kind: SmoothKind, n: usize) -> Result<Self> {
        let (hessian, linear, constant) = match &kind {
            SmoothKind::Zero {} => return Ok(Self::zero(n)),
            SmoothKind::Quadratic { hessian, q } => {
                check_len("theta.q", q, n)?;
                if hessian.len() != n {
                    return Err(Error::Validation(format!("theta.Q must have {n} rows")));
                }
                for (i, row) in hessian.iter().enumerate() {
                    check_len(&format!("theta.Q[{i}]"), row, n)?;
                }
                for i in 0..n {
                    for j in 0..i {
                        let (a, b) = (hessian[i][j], hessian[j][i]);
                        if (a - b).abs() > 1e-12 * (1.0 + a.abs().max(b.abs())) {
                            return Err(Error::Validation(format!(
                                "theta.Q is not symmetric at ({i}, {j})"
                            )));
                        }
                    }
                }
                (hessian.clone(), q.clone(), 0.0)
            }
            SmoothKind::LeastSquares { matrix, b } => {
                if matrix.is_empty() {
                    return Err(Error::Validation("theta.A has no rows".into()));
                }
                check_len("theta.b", b, matrix.len())?;
                for (i, row) in matrix.iter().enumerate() {
                    check_len(&format!("theta.A[{i}]"), row, n)?;
                }
                let q: Vec<f64> = (0..n)
                    .map(|j| -matrix.iter().zip(b).map(|(row, bi)| row[j] * bi).sum::<f64>())
                    .collect();
                (gram(matrix), q, 0.5 * norm_sq(b))
            }
        };
        let (min_eig, max_eig) = sym_eigen_range(&hessian);
        if min_eig < -PSD_TOL {
            return Err(Error::Validation(format!(
                "theta Hessian is not positive semidefinite (smallest eigenvalue {min_eig:e})"
            )));
        }
        Ok(SmoothConvexFn {
            kind,
            hessian,
            linear,
            constant,
            lipschitz_grad: max_eig.max(0.0),
            strong_convexity: min_eig.max(0.0),
        })
    }

    pub fn kind(&self) -> &SmoothKind {
        &self.kind
    }

    pub fn dimension(&self) -> usize {
        self.linear.len()
    }

    pub fn lipschitz_grad(&self) -> f64 {
        self.lipschitz_grad
    }

    /// Smallest Hessian eigenvalue, clipped at zero.
    pub fn strong_convexity(&self) -> f64 {
        self.strong_convexity
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, SmoothKind::Zero {})
    }

    /// Row-major Hessian; empty for the zero function.
    pub fn hessian(&self) -> &[Vec<f64>] {
        &self.hessian
    }

    pub fn linear(&self) -> &[f64] {
        &self.linear
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let quad: f64 = self.hessian.iter().zip(x).map(|(row, xi)| xi * dot(row, x)).sum();
        0.5 * quad + dot(&self.linear, x) + self.constant
    }

    pub(crate) fn grad_into(&self, x: &[f64], out: &mut [f64]) {
        if self.is_zero() {
            out.fill(0.0);
            return;
        }
        matvec_into(&self.hessian, x, out);
        for (o, l) in out.iter_mut().zip(&self.linear) {
            *o += l;
        }
    }

    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.grad_into(x, &mut out);
        out
    }
}

/// Smooth penalty `Ψ ≥ 0` with `argmin Ψ = Ψ⁻¹(0) = C`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PenaltyFn {
    /// `Ψ ≡ 0`, `C = ℝⁿ`.
    Zero {},
    /// `½ dist²(x, {⟨a, x⟩ = b})`
    HalfSqdistHyperplane { a: Vec<f64>, b: f64 },
    /// `½ dist²(x, [lo, hi])`
    HalfSqdistBox { lo: Vec<f64>, hi: Vec<f64> },
    /// `½ dist²(x, B(center, radius))`
    HalfSqdistBall { center: Vec<f64>, radius: f64 },
    /// `½‖x‖²`, `C = {0}`.
    HalfSqnorm {},
}

impl PenaltyFn {
    pub fn validate(&self, n: usize) -> Result<()> {
        match self {
            PenaltyFn::Zero {} | PenaltyFn::HalfSqnorm {} => Ok(()),
            PenaltyFn::HalfSqdistHyperplane { a, b } => {
                check_len("psi.a", a, n)?;
                if norm_sq(a) == 0.0 {
                    return Err(Error::Validation("psi.a must be nonzero".into()));
                }
                if !b.is_finite() {
                    return Err(Error::Validation("psi.b must be finite".into()));
                }
                Ok(())
            }
            PenaltyFn::HalfSqdistBox { lo, hi } => {
                check_len("psi.lo", lo, n)?;
                check_len("psi.hi", hi, n)?;
                if let Some(i) = (0..n).find(|&i| lo[i] > hi[i]) {
                    return Err(Error::Validation(format!("psi box has lo[{i}] > hi[{i}]")));
                }
                Ok(())
            }
            PenaltyFn::HalfSqdistBall { center, radius } => {
                check_len("psi.center", center, n)?;
                if !(radius.is_finite() && *radius >= 0.0) {
                    return Err(Error::Validation(format!(
                        "psi.radius must be nonnegative, got {radius}"
                    )));
                }
                Ok(())
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, PenaltyFn::Zero {})
    }

    /// All kinds except [`PenaltyFn::Zero {}`] are half squared distances.
    pub fn is_half_sqdist(&self) -> bool {
        !self.is_zero()
    }

    pub fn lipschitz_grad(&self) -> f64 {
        if self.is_zero() {
            0.0
        } else {
            1.0
        }
    }

    /// Metric projection onto `C = argmin Ψ`, unchecked.
    pub(crate) fn project_into(&self, x: &[f64], out: &mut [f64]) {
        match self {
            PenaltyFn::Zero {} => out.copy_from_slice(x),
            PenaltyFn::HalfSqnorm {} => out.fill(0.0),
            PenaltyFn::HalfSqdistHyperplane { a, b } => {
                let s = (dot(a, x) - b) / norm_sq(a);
                for ((o, xi), ai) in out.iter_mut().zip(x).zip(a) {
                    *o = xi - s * ai;
                }
            }
            PenaltyFn::HalfSqdistBox { lo, hi } => {
                for (i, o) in out.iter_mut().enumerate() {
                    *o = x[i].clamp(lo[i], hi[i]);
                }
            }
            PenaltyFn::HalfSqdistBall { center, radius } => {
                let mut d = 0.0;
                for (xi, ci) in x.iter().zip(center) {
                    d += (xi - ci) * (xi - ci);
                }
                let d = d.sqrt();
                if d <= *radius {
                    out.copy_from_slice(x);
                } else {
                    let s = radius / d;
                    for ((o, xi), ci) in out.iter_mut().zip(x).zip(center) {
                        *o = ci + s * (xi - ci);
                    }
                }
            }
        }
    }

    pub fn project_to_argmin(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.project_into(x, &mut out);
        out
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            PenaltyFn::Zero {} => 0.0,
            PenaltyFn::HalfSqnorm {} => 0.5 * norm_sq(x),
            PenaltyFn::HalfSqdistHyperplane { a, b } => {
                let r = dot(a, x) - b;
                0.5 * r * r / norm_sq(a)
            }
            PenaltyFn::HalfSqdistBox { lo, hi } => x
                .iter()
                .enumerate()
                .map(|(i, xi)| {
                    let d = xi - xi.clamp(lo[i], hi[i]);
                    0.5 * d * d
                })
                .sum(),
            PenaltyFn::HalfSqdistBall { center, radius } => {
                let d: f64 = x
                    .iter()
                    .zip(center)
                    .map(|(xi, ci)| (xi - ci) * (xi - ci))
                    .sum::<f64>()
                    .sqrt();
                let e = (d - radius).max(0.0);
                0.5 * e * e
            }
        }
    }

    /// `∇Ψ(x) = x − P_C(x)` for the squared-distance kinds.
    pub(crate) fn grad_into(&self, x: &[f64], out: &mut [f64]) {
        match self {
            PenaltyFn::Zero {} => out.fill(0.0),
            PenaltyFn::HalfSqnorm {} => out.copy_from_slice(x),
            PenaltyFn::HalfSqdistHyperplane { a, b } => {
                let s = (dot(a, x) - b) / norm_sq(a);
                for (o, ai) in out.iter_mut().zip(a) {
                    *o = s * ai;
                }
            }
            _ => {
                self.project_into(x, out);
                for (o, xi) in out.iter_mut().zip(x) {
                    *o = xi - *o;
                }
            }
        }
    }

    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.grad_into(x, &mut out);
        out
    }

    /// Support function `σ_C(q)`.
    pub fn support(&self, q: &[f64]) -> f64 {
        let zero_q = q.iter().all(|v| *v == 0.0);
        match self {
            PenaltyFn::Zero {} => {
                if zero_q {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            PenaltyFn::HalfSqnorm {} => 0.0,
            PenaltyFn::HalfSqdistHyperplane { a, b } => {
                // σ is finite only on span{a}.
                let s = dot(q, a) / norm_sq(a);
                let residual: f64 = q
                    .iter()
                    .zip(a)
                    .map(|(qi, ai)| (qi - s * ai).powi(2))
                    .sum::<f64>()
                    .sqrt();
                if residual <= 1e-12 * (1.0 + norm(q)) {
                    s * b
                } else {
                    f64::INFINITY
                }
            }
            PenaltyFn::HalfSqdistBox { lo, hi } => q
                .iter()
                .enumerate()
                .map(|(i, qi)| (qi * lo[i]).max(qi * hi[i]))
                .sum(),
            PenaltyFn::HalfSqdistBall { center, radius } => dot(q, center) + radius * norm(q),
        }
    }

    /// `Ψ*(q) − σ_C(q)`; `+∞` off `{0}` for the zero penalty.
    ///
    /// For `Ψ = ½dist²(·, C)` the conjugate is `σ_C + ½‖·‖²`, so the gap is `½‖q‖²`
    /// (taken as the value on all of ℝⁿ, including where both terms are infinite).
    pub fn fenchel_gap(&self, q: &[f64]) -> Result<f64> {
        ensure_finite("q", q)?;
        Ok(match self {
            PenaltyFn::Zero {} => {
                if q.iter().all(|v| *v == 0.0) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            _ => 0.5 * norm_sq(q),
        })
    }

    /// Whether `C` is a polyhedron (hyperplane, box, point or the whole space).
    pub fn argmin_is_polyhedral(&self) -> bool {
        !matches!(self, PenaltyFn::HalfSqdistBall { .. })
    }
}
