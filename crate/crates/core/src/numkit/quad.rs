//! Adaptive Simpson quadrature with Richardson correction.
//!
//! Infinite endpoints are mapped through `x = tan(u)`.

use std::f64::consts::FRAC_PI_2;

use super::{NumError, Result};

const DEFAULT_MAX_DEPTH: usize = 60;
const INITIAL_PANELS: usize = 16;

pub fn integrate_adaptive(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    integrate_adaptive_with(f, a, b, tol, DEFAULT_MAX_DEPTH)
}

pub fn integrate_adaptive_with(
    f: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    tol: f64,
    max_depth: usize,
) -> Result<f64> {
    if a.is_nan() || b.is_nan() || !(a < b) {
        return Err(NumError::NonFinite(format!(
            "integration interval [{a}, {b}] is empty or invalid"
        )));
    }
    if a.is_finite() && b.is_finite() {
        return simpson(&f, a, b, tol, max_depth);
    }
    let ua = if a.is_finite() { a.atan() } else { -FRAC_PI_2 + 1e-12 };
    let ub = if b.is_finite() { b.atan() } else { FRAC_PI_2 - 1e-12 };
    let g = |u: f64| {
        let c = u.cos();
        f(u.tan()) / (c * c)
    };
    simpson(&g, ua, ub, tol, max_depth)
}

fn eval(f: &impl Fn(f64) -> f64, x: f64) -> Result<f64> {
    let v = f(x);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(NumError::NonFinite(format!("integrand at {x} is {v}")))
    }
}

fn simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, max_depth: usize) -> Result<f64> {
    let h = (b - a) / INITIAL_PANELS as f64;
    let panel_tol = tol / INITIAL_PANELS as f64;
    let mut total = 0.0;
    let mut fl = eval(f, a)?;
    for k in 0..INITIAL_PANELS {
        let l = a + h * k as f64;
        let r = if k + 1 == INITIAL_PANELS { b } else { l + h };
        let m = 0.5 * (l + r);
        let fm = eval(f, m)?;
        let fr = eval(f, r)?;
        let whole = (r - l) / 6.0 * (fl + 4.0 * fm + fr);
        total += refine(f, l, r, fl, fm, fr, whole, panel_tol, max_depth)?;
        fl = fr;
    }
    Ok(total)
}

#[allow(clippy::too_many_arguments)]
fn refine(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: usize,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = eval(f, lm)?;
    let frm = eval(f, rm)?;
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol || lm <= a || rm >= b {
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 {
        return Err(NumError::MaxDepth(a, b));
    }
    Ok(refine(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?
        + refine(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?)
}
