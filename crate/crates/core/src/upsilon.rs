//! The contraction maps `Υ^m(P Q; R T) = T - R(1+P)⁻¹Q`, the cube
//! projection, and the integrands built from them.
//!
//! Iterating `Υ^1` is Gaussian elimination without pivoting on `1 + g`:
//! after `p` steps the trailing block is `1 + Υ^p(g)`, and the `p`-th pivot
//! is `1 + [Υ^{p-1}(g)]_1`. [`chain_scalars`] uses this directly.

use std::sync::atomic::{AtomicBool, Ordering};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::closedform::ExponentSpec;
use crate::error::{Error, Result};
use crate::matlin::{block_lower_right, block_upper_left, cayley, det, invert, GroupElement, KMatrix, SINGULAR_REL};
use crate::scalar::{AlgebraTag, Scalar};

/// Unitarity residual accepted for a computed `Υ^m(g)`.
pub const UPSILON_TOL: f64 = 1e-9;

static SIGN_FAULT: AtomicBool = AtomicBool::new(false);

/// Flips the sign of the correction term in [`upsilon`]; used to check that
/// the verification suite notices a wrong map.
#[doc(hidden)]
pub fn set_sign_fault(on: bool) {
    SIGN_FAULT.store(on, Ordering::Relaxed);
}

/// `Υ^m` of an arbitrary square matrix (no unitarity required).
pub fn upsilon_matrix(g: &KMatrix, m: usize) -> Result<KMatrix> {
    if !g.is_square() {
        return Err(Error::dim("upsilon", "matrix is not square"));
    }
    let n = g.rows();
    if m == 0 || m >= n {
        return Err(Error::dim("upsilon", format!("m = {m} for n = {n} (need 1 <= m < n)")));
    }
    let p = g.submatrix(0, 0, m, m)?;
    let q = g.submatrix(0, m, m, n - m)?;
    let r = g.submatrix(m, 0, n - m, m)?;
    let t = g.submatrix(m, m, n - m, n - m)?;
    let inv = invert(&p.plus_identity()).map_err(|e| e.at_step(format!("1 + [g]_{m}")))?;
    let corr = &(&r * &inv) * &q;
    if SIGN_FAULT.load(Ordering::Relaxed) {
        Ok(&t + &corr)
    } else {
        Ok(&t - &corr)
    }
}

/// `Υ^m(g)`, checked to be unitary again.
pub fn upsilon(g: &GroupElement, m: usize) -> Result<GroupElement> {
    let h = upsilon_matrix(g.matrix(), m)?;
    let res = h.unitarity_residual();
    if !(res < UPSILON_TOL) {
        return Err(Error::singular(
            format!("upsilon: 1 + [g]_{m} is ill-conditioned (unitarity residual {res:e})"),
            f64::NAN,
        ));
    }
    Ok(GroupElement::new_unchecked(h, g.group()))
}

/// `ξ_m(g) = (Υ^m(g), [g]_m)`.
pub fn xi(g: &GroupElement, m: usize) -> Result<(GroupElement, KMatrix)> {
    Ok((upsilon(g, m)?, block_upper_left(g.matrix(), m)?))
}

/// Cube coordinates `x_j = [Υ^{n-j}(g)]_1`, `j = 2..n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubePoint {
    pub n: usize,
    /// `coords[i]` is `x_{i+2}`.
    pub coords: Vec<Scalar>,
}

impl CubePoint {
    /// `x_j`, `2 <= j <= n`.
    pub fn x(&self, j: usize) -> Scalar {
        self.coords[j - 2]
    }

    /// Real parts, the coordinates themselves for K = R.
    pub fn real_coords(&self) -> Vec<f64> {
        self.coords.iter().map(|s| s.re()).collect()
    }
}

/// The scalars `1 + [Υ^{n-j}(g)]_1`, `j = 1..n` (cube order).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainScalars {
    pub algebra: AlgebraTag,
    pub n: usize,
    /// `values[j-1] = 1 + x_j`; `x_1 = [Υ^{n-1}(g)]_1`.
    pub values: Vec<Scalar>,
}

impl ChainScalars {
    /// `1 + x_j`, 1-based.
    pub fn value(&self, j: usize) -> Scalar {
        self.values[j - 1]
    }

    /// `x_j = value(j) - 1`.
    pub fn x(&self, j: usize) -> Scalar {
        self.values[j - 1] - Scalar::ONE
    }

    /// Elimination order: `d_p = 1 + [Υ^{p-1}(g)]_1`, `p = 1..n`.
    pub fn pivots(&self) -> impl Iterator<Item = Scalar> + '_ {
        self.values.iter().rev().copied()
    }

    /// `det(1 + [g]_m)` reassembled from the first `m` pivots. Over H this is
    /// the product of moduli (the quaternionic determinant is real).
    pub fn partial_det(&self, m: usize) -> Complex64 {
        let mut acc = Complex64::new(1.0, 0.0);
        for d in self.pivots().take(m) {
            acc *= match self.algebra {
                AlgebraTag::H => Complex64::new(d.abs(), 0.0),
                _ => d.to_c64(),
            };
        }
        acc
    }

    pub fn cube_point(&self) -> CubePoint {
        CubePoint { n: self.n, coords: (2..=self.n).map(|j| self.x(j)).collect() }
    }
}

/// Pivots of unpivoted elimination on `1 + M`, for any square `M`.
pub fn chain_scalars_matrix(m: &KMatrix) -> Result<ChainScalars> {
    if !m.is_square() {
        return Err(Error::dim("chain_scalars", "matrix is not square"));
    }
    let n = m.rows();
    let mut a: Vec<Scalar> = m.plus_identity().entries().to_vec();
    let threshold = SINGULAR_REL * a.iter().map(|s| s.abs()).fold(0.0, f64::max).max(1.0);
    let mut pivots = Vec::with_capacity(n);
    for p in 0..n {
        let piv = a[p * n + p];
        if !(piv.abs() > threshold) {
            return Err(Error::singular(format!("chain of Υ (step {p}: 1 + [Υ^{p}(g)]_1)"), piv.abs()));
        }
        pivots.push(piv);
        let pinv = piv.inv().expect("nonzero pivot");
        for r in p + 1..n {
            let f = a[r * n + p] * pinv;
            if f == Scalar::ZERO {
                continue;
            }
            for c in p + 1..n {
                let s = a[p * n + c];
                a[r * n + c] -= f * s;
            }
        }
    }
    pivots.reverse();
    Ok(ChainScalars { algebra: m.algebra(), n, values: pivots })
}

pub fn chain_scalars(g: &GroupElement) -> Result<ChainScalars> {
    chain_scalars_matrix(g.matrix())
}

pub fn cube_coordinates(g: &GroupElement) -> Result<CubePoint> {
    Ok(chain_scalars(g)?.cube_point())
}

/// `w^λ conj(w)^μ` through principal logarithms (K = C), `|w|^λ` over H,
/// `w^λ` over R (w real, >= 0).
fn scalar_power(alg: AlgebraTag, w: Scalar, lambda: Complex64, mu: Complex64) -> Complex64 {
    if lambda == Complex64::new(0.0, 0.0) && mu == Complex64::new(0.0, 0.0) {
        return Complex64::new(1.0, 0.0);
    }
    let ln = match alg {
        AlgebraTag::R => Complex64::new(w.re().max(0.0).ln(), 0.0),
        AlgebraTag::C => w.to_c64().ln(),
        AlgebraTag::H => Complex64::new(w.abs().ln(), 0.0),
    };
    if ln.re == f64::NEG_INFINITY {
        let e = (lambda + mu).re;
        return if e > 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(f64::INFINITY, 0.0)
        };
    }
    (lambda * ln + mu * ln.conj()).exp()
}

/// `∏_j (1+x_j)^{λ_j} (conj(1+x_j))^{μ_j}` on precomputed chain scalars.
pub fn hua_integrand_chain(chain: &ChainScalars, spec: &ExponentSpec) -> Complex64 {
    let mut v = Complex64::new(1.0, 0.0);
    for j in 1..=chain.n {
        v *= scalar_power(chain.algebra, chain.value(j), spec.lambda_k(j), spec.mu_k(j));
    }
    v
}

fn check_spec(g: &GroupElement, spec: &ExponentSpec) -> Result<()> {
    spec.validate()?;
    if spec.algebra != g.group().algebra() || spec.n() != g.n() {
        return Err(Error::dim(
            "integrand",
            format!("spec of size {} over {} for {}({})", spec.n(), spec.algebra, g.group(), g.n()),
        ));
    }
    Ok(())
}

/// `∏_j (1 + [Υ^{n-j}(g)]_1)^{λ_j}`, with conjugate powers `μ_j` over C.
pub fn hua_integrand(g: &GroupElement, spec: &ExponentSpec) -> Result<Complex64> {
    check_spec(g, spec)?;
    Ok(hua_integrand_chain(&chain_scalars(g)?, spec))
}

/// Exponent of `(1 - |x_k|²)` attached to `θ_k`.
pub fn theta_exponent(alg: AlgebraTag, theta: f64) -> f64 {
    match alg {
        AlgebraTag::R => theta / 2.0,
        AlgebraTag::C => theta,
        AlgebraTag::H => 2.0 * theta,
    }
}

pub fn theta_integrand_chain(chain: &ChainScalars, spec: &ExponentSpec) -> Complex64 {
    let mut v = hua_integrand_chain(chain, spec);
    for k in 2..=chain.n {
        let e = theta_exponent(chain.algebra, spec.theta_k(k));
        if e != 0.0 {
            let defect = (1.0 - chain.x(k).norm_sqr()).max(0.0);
            v *= defect.powf(e);
        }
    }
    v
}

/// [`hua_integrand`] times `∏_{k>=2} (1 - |x_k|²)^{e(θ_k)}`.
pub fn theta_integrand(g: &GroupElement, spec: &ExponentSpec) -> Result<Complex64> {
    check_spec(g, spec)?;
    Ok(theta_integrand_chain(&chain_scalars(g)?, spec))
}

/// `det(1+[g]_p)` against `det(1+[g]_m) · det(1+[Υ^m(g)]_{p-m})`.
pub fn multiplicativity_check(g: &GroupElement, m: usize, p: usize) -> Result<(Complex64, Complex64)> {
    if !(m < p && p <= g.n()) {
        return Err(Error::dim("multiplicativity_check", format!("need m < p <= n (m={m}, p={p}, n={})", g.n())));
    }
    let lhs = det(&block_upper_left(g.matrix(), p)?.plus_identity())?;
    let a = det(&block_upper_left(g.matrix(), m)?.plus_identity())?;
    let h = upsilon(g, m)?;
    let b = det(&block_upper_left(h.matrix(), p - m)?.plus_identity())?;
    Ok((lhs, a * b))
}

/// `{cayley(g)}_p` against `cayley(Υ^{n-p}(g))`.
pub fn cayley_block_check(g: &GroupElement, p: usize) -> Result<(KMatrix, KMatrix)> {
    let n = g.n();
    if p == 0 || p > n {
        return Err(Error::dim("cayley_block_check", format!("p = {p} for n = {n}")));
    }
    let lhs = block_lower_right(&cayley(g.matrix())?, p)?;
    let h = if p == n { g.matrix().clone() } else { upsilon(g, n - p)?.into_matrix() };
    Ok((lhs, cayley(&h)?))
}

/// `Υ^m(diag(1,A) g diag(1,B))` against `A Υ^m(g) B`.
pub fn equivariance_check(g: &GroupElement, m: usize, a: &GroupElement, b: &GroupElement) -> Result<(KMatrix, KMatrix)> {
    if a.n() + m != g.n() || b.n() + m != g.n() {
        return Err(Error::dim("equivariance_check", "A, B must have size n - m"));
    }
    let moved = a.embed_lower_right(m).mul(g)?.mul(&b.embed_lower_right(m))?;
    let lhs = upsilon(&moved, m)?.into_matrix();
    let rhs = &(a.matrix() * upsilon(g, m)?.matrix()) * b.matrix();
    Ok((lhs, rhs))
}

/// `det(1 + diag(1,A) S diag(1,B))` against `det(1+[S]_n) det(1 + A Υ^n(S) B)`,
/// where `S` has size `n + k` and `A, B` size `k`.
pub fn rn_pointwise_check(s: &GroupElement, a: &GroupElement, b: &GroupElement) -> Result<(Complex64, Complex64)> {
    let k = a.n();
    if b.n() != k || s.n() <= k {
        return Err(Error::dim("rn_pointwise_check", format!("S of size {}, A of size {k}, B of size {}", s.n(), b.n())));
    }
    let n = s.n() - k;
    let moved = a.embed_lower_right(n).mul(s)?.mul(&b.embed_lower_right(n))?;
    let lhs = det(&moved.matrix().plus_identity())?;
    let head = det(&block_upper_left(s.matrix(), n)?.plus_identity())?;
    let inner = &(a.matrix() * upsilon(s, n)?.matrix()) * b.matrix();
    let tail = det(&inner.plus_identity())?;
    Ok((lhs, head * tail))
}

/// Relative distance `|a - b| / max(1, |a|, |b|)`.
pub fn rel_err(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / 1f64.max(a.norm()).max(b.norm())
}
