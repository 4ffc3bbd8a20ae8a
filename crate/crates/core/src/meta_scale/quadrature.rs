//! Deterministic adaptive Simpson quadrature.

use crate::error::{invalid, ArubaError, Result};

pub const RELATIVE_TOLERANCE: f64 = 1e-10;
pub const MAX_SUBDIVISIONS: usize = 1 << 20;

struct Panel {
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

/// ∫ₐᵇ f over a set of breakpoints, each piece starting from `panels`
/// uniform panels and refined until the local error estimate is within its
/// share of `rel_tol · |∫f|`.
pub fn integrate(
    f: impl Fn(f64) -> f64,
    breakpoints: &[f64],
    panels: usize,
    rel_tol: f64,
    max_subdivisions: usize,
) -> Result<f64> {
    if breakpoints.len() < 2 || breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(invalid("quadrature breakpoints must be strictly increasing"));
    }
    if panels == 0 {
        return Err(invalid("need at least one initial panel"));
    }
    let (lo, hi) = (breakpoints[0], breakpoints[breakpoints.len() - 1]);
    let mut stack = Vec::new();
    let mut coarse = 0.0;
    for w in breakpoints.windows(2) {
        let width = (w[1] - w[0]) / panels as f64;
        for k in 0..panels {
            let a = w[0] + width * k as f64;
            let b = if k + 1 == panels { w[1] } else { a + width };
            let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
            let whole = simpson(a, b, fa, fm, fb);
            coarse += whole;
            stack.push(Panel { a, b, fa, fm, fb, whole });
        }
    }
    if !coarse.is_finite() {
        return Err(ArubaError::Numeric("integrand is not finite".into()));
    }
    let tol = rel_tol * coarse.abs().max(f64::MIN_POSITIVE);
    let span = hi - lo;
    let mut total = 0.0;
    let mut subdivisions = 0usize;
    // Stack order is fixed, so the summation order (and result) is deterministic.
    stack.reverse();
    while let Some(p) = stack.pop() {
        let m = 0.5 * (p.a + p.b);
        let lm = 0.5 * (p.a + m);
        let rm = 0.5 * (m + p.b);
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(p.a, m, p.fa, flm, p.fm);
        let right = simpson(m, p.b, p.fm, frm, p.fb);
        let delta = left + right - p.whole;
        let share = tol * (p.b - p.a) / span;
        if delta.abs() <= 15.0 * share || p.b - p.a <= span * 1e-15 {
            total += left + right + delta / 15.0;
            continue;
        }
        subdivisions += 1;
        if subdivisions > max_subdivisions {
            return Err(ArubaError::Numeric(format!(
                "adaptive quadrature exceeded {max_subdivisions} subdivisions"
            )));
        }
        stack.push(Panel { a: m, b: p.b, fa: p.fm, fm: frm, fb: p.fb, whole: right });
        stack.push(Panel { a: p.a, b: m, fa: p.fa, fm: flm, fb: p.fm, whole: left });
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_and_exponential() {
        let cubic = integrate(|x| x * x * x, &[0.0, 2.0], 1, 1e-12, 10).unwrap();
        assert!((cubic - 4.0).abs() < 1e-14);
        let e = integrate(f64::exp, &[0.0, 0.5, 1.0], 4, 1e-12, 1 << 16).unwrap();
        assert!((e - (1f64.exp() - 1.0)).abs() < 1e-11);
    }

    #[test]
    fn sharp_peak_resolved_with_breakpoint() {
        let f = |x: f64| (-1e6 * (x - 0.3).powi(2)).exp();
        let got = integrate(f, &[0.0, 0.3, 1.0], 8, 1e-10, 1 << 20).unwrap();
        let exact = (std::f64::consts::PI / 1e6).sqrt();
        assert!((got - exact).abs() < 1e-9 * exact);
    }

    #[test]
    fn cap_is_reported() {
        let err = integrate(|x: f64| x.sqrt(), &[0.0, 1.0], 1, 1e-15, 3).unwrap_err();
        assert!(matches!(err, ArubaError::Numeric(_)));
    }
}
