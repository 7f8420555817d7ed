//! Adaptive Simpson quadrature with interval bisection.

use crate::error::{Error, Result};

pub const DEFAULT_ABS_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_DEPTH: u32 = 40;

/// `∫ₐᵇ f` to absolute tolerance `tol`.
///
/// Fails with a numeric error if some subinterval reaches `max_depth` bisections
/// without meeting its share of the tolerance, or if `f` returns a non-finite value.
pub fn adaptive_simpson<F>(f: F, a: f64, b: f64, tol: f64, max_depth: u32) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if a == b {
        return Ok(0.0);
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let v = recurse(&f, a, b, fa, fm, fb, whole, tol, max_depth)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Numeric { t: a, message: "integrand is not finite".into() })
    }
}

#[allow(clippy::too_many_arguments)]
fn recurse<F>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    if !(flm.is_finite() && frm.is_finite()) {
        return Err(Error::Numeric { t: lm, message: "integrand is not finite".into() });
    }
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol {
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 {
        return Err(Error::Numeric {
            t: a,
            message: format!("quadrature did not converge on [{a}, {b}]"),
        });
    }
    Ok(recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?
        + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?)
}
