//! Bracketed scalar root finding.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Stopping rule for [`bracketed`].
#[derive(Clone, Copy, Debug)]
pub struct Stop<S> {
    /// Accept when `|f| <= f_tol`.
    pub f_tol: S,
    /// Accept when the bracket width is `<= x_rel * |x|`.
    pub x_rel: S,
    pub max_iter: usize,
}

/// Root of `f` in `[a, b]` given a sign change, by Illinois-modified regula falsi
/// with a bisection fallback. Returns the point with the smallest residual seen.
pub fn bracketed<S: Real>(
    mut f: impl FnMut(S) -> S,
    a: S,
    b: S,
    stop: Stop<S>,
) -> Result<S> {
    let (fa, fb) = (f(a), f(b));
    bracketed_from(f, (a, fa), (b, fb), stop)
}

/// [`bracketed`] with the end values already known.
pub fn bracketed_from<S: Real>(
    mut f: impl FnMut(S) -> S,
    (mut a, mut fa): (S, S),
    (mut b, mut fb): (S, S),
    stop: Stop<S>,
) -> Result<S> {
    if !(fa.is_finite() && fb.is_finite()) {
        return Err(Error::numeric("non-finite value at bracket end"));
    }
    if fa == S::zero() {
        return Ok(a);
    }
    if fb == S::zero() {
        return Ok(b);
    }
    if (fa > S::zero()) == (fb > S::zero()) {
        return Err(Error::numeric(format!(
            "no sign change on [{a:e}, {b:e}]: f = {fa:e}, {fb:e}"
        )));
    }
    let half = S::lit(0.5);
    let mut side = 0i8;
    let mut best = if fa.abs() < fb.abs() { a } else { b };
    let mut best_f = fa.abs().min(fb.abs());
    for it in 0..stop.max_iter {
        // alternate secant and bisection steps to guarantee shrinkage
        let mut c = if it % 3 == 2 {
            half * (a + b)
        } else {
            (a * fb - b * fa) / (fb - fa)
        };
        if !(c > a.min(b) && c < a.max(b)) {
            c = half * (a + b);
        }
        let fc = f(c);
        if !fc.is_finite() {
            return Err(Error::numeric(format!("non-finite value at {c:e}")));
        }
        if fc.abs() < best_f {
            best = c;
            best_f = fc.abs();
        }
        if fc.abs() <= stop.f_tol {
            return Ok(c);
        }
        if (fc > S::zero()) == (fb > S::zero()) {
            b = c;
            fb = fc;
            if side == -1 {
                fa = fa * half;
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if side == 1 {
                fb = fb * half;
            }
            side = 1;
        }
        if (b - a).abs() <= stop.x_rel * c.abs().max(S::min_positive_value()) {
            return Ok(best);
        }
    }
    Ok(best)
}

/// Expands `hi` geometrically until `f(hi)` changes sign relative to `f(lo)`.
pub fn expand_upward<S: Real>(
    mut f: impl FnMut(S) -> S,
    lo: S,
    mut hi: S,
    factor: S,
    max_steps: usize,
) -> Option<S> {
    let flo = f(lo);
    for _ in 0..max_steps {
        let fh = f(hi);
        if fh.is_finite() && (fh > S::zero()) != (flo > S::zero()) {
            return Some(hi);
        }
        hi = hi * factor;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_cubic_root() {
        let stop = Stop { f_tol: 1e-14, x_rel: 1e-15, max_iter: 200 };
        let r = bracketed(|x: f64| x * x * x - 2.0, 0.0, 3.0, stop).unwrap();
        assert!((r - 2f64.cbrt()).abs() < 1e-12);
    }

    #[test]
    fn rejects_missing_sign_change() {
        let stop = Stop { f_tol: 1e-14, x_rel: 1e-15, max_iter: 50 };
        assert!(bracketed(|x: f64| x * x + 1.0, -1.0, 1.0, stop).is_err());
    }
}
