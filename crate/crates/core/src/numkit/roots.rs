//! Bracketed root finding for monotone scalar functions.

use super::{NumError, Result};

const MAX_ITER: usize = 400;

/// Root of a continuous, strictly increasing `f` on `[lo, hi]` with
/// `f(lo) < 0 < f(hi)`.
///
/// Alternates Illinois-weighted secant steps with bisection, so the
/// bracket at least halves every two iterations. Stops once `|f(x)| ≤ tol`
/// or the bracket is narrower than `tol·(1 + |x|)`.
pub fn find_root_increasing(f: impl Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f(a), f(b));
    if fa.is_nan() || fb.is_nan() {
        return Err(NumError::NonFinite(format!(
            "bracket evaluation f({a}) = {fa}, f({b}) = {fb}"
        )));
    }
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if !(a < b && fa < 0.0 && fb > 0.0) {
        return Err(NumError::BadBracket {
            lo: a,
            hi: b,
            f_lo: fa,
            f_hi: fb,
        });
    }

    // Illinois bookkeeping: which end was retained last time.
    let mut last_side = 0i8;
    for it in 0..MAX_ITER {
        let width = b - a;
        let secant_ok = fa.is_finite() && fb.is_finite() && it % 2 == 0;
        let mut x = if secant_ok {
            a - fa * width / (fb - fa)
        } else {
            0.5 * (a + b)
        };
        if !(x > a && x < b) {
            x = 0.5 * (a + b);
        }
        if x <= a || x >= b {
            // a and b are adjacent floats
            return Ok(if fa.abs() < fb.abs() { a } else { b });
        }
        let fx = f(x);
        if fx.is_nan() {
            return Err(NumError::NonFinite(format!("f({x}) is NaN")));
        }
        if fx.abs() <= tol {
            return Ok(x);
        }
        if fx < 0.0 {
            a = x;
            fa = fx;
            if last_side == -1 {
                fb *= 0.5;
            }
            last_side = -1;
        } else {
            b = x;
            fb = fx;
            if last_side == 1 {
                fa *= 0.5;
            }
            last_side = 1;
        }
        if b - a <= tol * (1.0 + x.abs()) {
            return Ok(0.5 * (a + b));
        }
    }
    Err(NumError::NoConvergence(format!(
        "root finder exceeded {MAX_ITER} iterations on [{a}, {b}]"
    )))
}
