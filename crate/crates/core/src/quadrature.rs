//! Double-exponential (tanh-sinh) quadrature.
//!
//! Integrable endpoint singularities are the common case here
//! (`(1-x²)^{-1/2}`, `r^{δ-1}`), so integrands can receive the distances to
//! both endpoints, computed without cancellation.

use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};

/// Result of an adaptive quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quad {
    pub value: f64,
    /// Difference between the last two refinement levels.
    pub error: f64,
    pub evaluations: usize,
}

const MAX_LEVEL: u32 = 12;
const T_MAX: f64 = 6.5;

/// `∫_a^b f`, where `f(x, x - a, b - x)` may use either distance for accuracy.
pub fn tanh_sinh_with_distances(f: impl Fn(f64, f64, f64) -> f64, a: f64, b: f64, rel_tol: f64) -> Result<Quad> {
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(Error::Domain(format!("quadrature interval [{a}, {b}]")));
    }
    let half = 0.5 * (b - a);
    let mut evaluations = 0usize;
    let mut node = |t: f64| -> f64 {
        let u = FRAC_PI_2 * t.sinh();
        let cu = u.cosh();
        let w = FRAC_PI_2 * t.cosh() / (cu * cu);
        // 1 - tanh(u) and 1 + tanh(u), both free of cancellation
        let e = (-2.0 * u.abs()).exp();
        let small = 2.0 * e / (1.0 + e);
        let (da, db) = if u >= 0.0 { (half * (2.0 - small), half * small) } else { (half * small, half * (2.0 - small)) };
        if da <= 0.0 || db <= 0.0 || w == 0.0 {
            return 0.0;
        }
        let x = if da < db { a + da } else { b - db };
        evaluations += 1;
        let v = f(x, da, db);
        if v == 0.0 {
            0.0
        } else {
            w * half * v
        }
    };

    let mut h = 1.0;
    let mut sum = node(0.0);
    let mut k = 1;
    while k as f64 * h <= T_MAX {
        let t = k as f64 * h;
        sum += node(t) + node(-t);
        k += 1;
    }
    let mut prev = sum * h;
    for level in 1..=MAX_LEVEL {
        h *= 0.5;
        let mut k = 1;
        while k as f64 * h <= T_MAX {
            let t = k as f64 * h;
            sum += node(t) + node(-t);
            k += 2;
        }
        let cur = sum * h;
        if !cur.is_finite() {
            return Err(Error::Numeric("quadrature produced a non-finite value".into()));
        }
        let err = (cur - prev).abs();
        if level >= 3 && err <= rel_tol * cur.abs().max(1e-300) {
            return Ok(Quad { value: cur, error: err, evaluations });
        }
        prev = cur;
    }
    Err(Error::Numeric(format!("quadrature did not reach relative tolerance {rel_tol:e}")))
}

/// `∫_a^b f(x) dx`.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> Result<f64> {
    tanh_sinh_with_distances(|x, _, _| f(x), a, b, rel_tol).map(|q| q.value)
}

/// `∫_a^b ∫_{lo(x)}^{hi(x)} f(x, y) dy dx`.
pub fn integrate_2d(
    f: impl Fn(f64, f64) -> f64,
    a: f64,
    b: f64,
    lo: impl Fn(f64) -> f64,
    hi: impl Fn(f64) -> f64,
    rel_tol: f64,
) -> Result<f64> {
    let inner_tol = rel_tol * 0.1;
    let failed = std::cell::Cell::new(None);
    let outer = integrate(
        |x| {
            let (l, h) = (lo(x), hi(x));
            if !(l < h) {
                return 0.0;
            }
            match integrate(|y| f(x, y), l, h, inner_tol) {
                Ok(v) => v,
                Err(e) => {
                    failed.set(Some(e));
                    0.0
                }
            }
        },
        a,
        b,
        rel_tol,
    )?;
    match failed.into_inner() {
        Some(e) => Err(e),
        None => Ok(outer),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn polynomial() {
        let v = integrate(|x| x * x, 0.0, 3.0, 1e-14).unwrap();
        assert!((v - 9.0).abs() < 1e-13);
    }

    #[test]
    fn arcsine_singularity() {
        let q = tanh_sinh_with_distances(|_, da, db| 1.0 / (da * db).sqrt(), -1.0, 1.0, 1e-14).unwrap();
        assert!((q.value - PI).abs() < 1e-12, "{}", q.value);
    }

    #[test]
    fn log_singularity() {
        let v = integrate(|x| -x.ln(), 0.0, 1.0, 1e-13).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn triangle() {
        let v = integrate_2d(|x, y| x * y, 0.0, 1.0, |_| 0.0, |x| x, 1e-12).unwrap();
        assert!((v - 0.125).abs() < 1e-12);
    }
}
