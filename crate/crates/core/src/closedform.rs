//! Closed-form Gamma products for the group, ball and cube integrals.
//!
//! Every product is accumulated as a sum of complex log-Gammas and
//! exponentiated once.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::AlgebraTag;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

fn pole_at(z: Complex64) -> Option<i64> {
    if z.im != 0.0 || z.re > 0.0 {
        return None;
    }
    let r = z.re.round();
    if (z.re - r).abs() <= 1e-13 * r.abs().max(1.0) {
        Some(r as i64)
    } else {
        None
    }
}

/// Complex `log Γ(z)` (a branch; only its exponential is meaningful).
pub fn log_gamma(z: Complex64) -> Result<Complex64> {
    if let Some(at) = pole_at(z) {
        return Err(Error::Pole { at });
    }
    if !z.re.is_finite() || !z.im.is_finite() {
        return Err(Error::Domain(format!("log_gamma of non-finite argument {z}")));
    }
    if z.re < 0.5 {
        // Γ(z) Γ(1-z) = π / sin(πz)
        let s = (z * PI).sin();
        return Ok(c(PI.ln()) - s.ln() - log_gamma(c(1.0) - z)?);
    }
    let z = z - 1.0;
    let mut x = c(LANCZOS[0]);
    for (i, &p) in LANCZOS.iter().enumerate().skip(1) {
        x += p / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    Ok(c(0.5 * (2.0 * PI).ln()) + (z + 0.5) * t.ln() - t + x.ln())
}

pub fn log_gamma_real(x: f64) -> Result<f64> {
    Ok(log_gamma(c(x))?.re)
}

/// Γ(z).
pub fn gamma(z: Complex64) -> Result<Complex64> {
    Ok(log_gamma(z)?.exp())
}

/// Which closed form a value came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormulaId {
    OneStepFactor,
    GroupIntegral,
    GroupThetaIntegral,
    BallConstant,
    BallIntegral,
    PickrellProduct,
    DiskIntegral,
    Gauss2F1,
    Selberg,
}

/// A closed-form value stored as `value · exp(log_scale)`.
///
/// `log_scale` is zero unless the value would overflow or underflow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormValue {
    pub value: Complex64,
    pub log_scale: f64,
    pub formula_id: FormulaId,
}

impl ClosedFormValue {
    pub fn from_log(ln: Complex64, formula_id: FormulaId) -> Self {
        if ln.re.abs() < 600.0 {
            ClosedFormValue { value: ln.exp(), log_scale: 0.0, formula_id }
        } else {
            ClosedFormValue { value: Complex64::new(0.0, ln.im).exp(), log_scale: ln.re, formula_id }
        }
    }

    pub fn from_value(value: Complex64, formula_id: FormulaId) -> Self {
        ClosedFormValue { value, log_scale: 0.0, formula_id }
    }

    /// The value as an ordinary number (may overflow to infinity).
    pub fn to_complex(&self) -> Complex64 {
        self.value * self.log_scale.exp()
    }

    pub fn re(&self) -> f64 {
        self.to_complex().re
    }

    /// A logarithm of the value; `-inf` real part for zero.
    pub fn ln(&self) -> Complex64 {
        self.value.ln() + self.log_scale
    }
}

/// Accumulates `± log Γ(·)` and other log terms.
#[derive(Debug, Default)]
struct LogProduct(Complex64);

impl LogProduct {
    fn gamma(&mut self, z: Complex64) -> Result<&mut Self> {
        self.0 += log_gamma(z)?;
        Ok(self)
    }

    fn inv_gamma(&mut self, z: Complex64) -> Result<&mut Self> {
        self.0 -= log_gamma(z)?;
        Ok(self)
    }

    fn add(&mut self, ln: Complex64) -> &mut Self {
        self.0 += ln;
        self
    }

    fn pow2(&mut self, e: Complex64) -> &mut Self {
        self.0 += e * std::f64::consts::LN_2;
        self
    }
}

/// `F(a, b; c; 1)`.
///
/// Terminating cases (`a` or `b` a nonpositive integer) are summed as a
/// finite series; otherwise Gauss's Gamma-ratio is used, which needs
/// `Re(c - a - b) > 0`.
pub fn gauss_2f1_at_1(a: Complex64, b: Complex64, cc: Complex64) -> Result<Complex64> {
    let terminating = [a, b].into_iter().filter_map(pole_at).map(|p| -p).min();
    if let Some(terms) = terminating {
        let mut sum = c(1.0);
        let mut term = c(1.0);
        for k in 0..terms {
            let kk = k as f64;
            let den = (cc + kk) * (kk + 1.0);
            if den == c(0.0) {
                return Err(Error::Domain(format!("F(a,b;c;1) with c={cc}: (c)_k vanishes")));
            }
            term = term * (a + kk) * (b + kk) / den;
            sum += term;
        }
        return Ok(sum);
    }
    let s = cc - a - b;
    if !(s.re > 0.0) {
        return Err(Error::Domain(format!("F(a,b;c;1) diverges: Re(c-a-b) = {} <= 0", s.re)));
    }
    let ln = log_gamma(cc)? + log_gamma(s)? - log_gamma(cc - a)? - log_gamma(cc - b)?;
    Ok(ln.exp())
}

/// Selberg's integral
/// `∫_{[0,1]^n} ∏ t_i^{α-1}(1-t_i)^{β-1} |Δ(t)|^{2γ} dt`.
pub fn selberg(n: usize, alpha: f64, beta: f64, gam: f64) -> Result<ClosedFormValue> {
    if n == 0 {
        return Err(Error::Domain("selberg: n must be at least 1".into()));
    }
    let nf = n as f64;
    let mut bound = 1.0 / nf;
    if n > 1 {
        bound = bound.min(alpha / (nf - 1.0)).min(beta / (nf - 1.0));
    }
    if !(alpha > 0.0 && beta > 0.0 && gam > -bound) {
        return Err(Error::Domain(format!("selberg: (α, β, γ) = ({alpha}, {beta}, {gam}) outside convergence domain")));
    }
    let mut p = LogProduct::default();
    for j in 0..n {
        let jf = j as f64;
        p.gamma(c(alpha + jf * gam))?
            .gamma(c(beta + jf * gam))?
            .gamma(c(1.0 + (jf + 1.0) * gam))?
            .inv_gamma(c(alpha + beta + (nf + jf - 1.0) * gam))?
            .inv_gamma(c(1.0 + gam))?;
    }
    Ok(ClosedFormValue::from_log(p.0, FormulaId::Selberg))
}

/// `c_K^{(m)}(τ) = ∫_{B_m(K)} det(1 - Z*Z)^{τ-1} dZ`, with `dZ` the product of
/// Lebesgue measures on all real components.
pub fn ball_constant(algebra: AlgebraTag, m: usize, tau: f64) -> Result<ClosedFormValue> {
    if m == 0 {
        return Err(Error::Domain("ball_constant: m must be at least 1".into()));
    }
    if !(tau > 0.0) {
        return Err(Error::Domain(format!("ball_constant: τ = {tau} must be positive")));
    }
    let d = algebra.delta();
    let mf = m as f64;
    let mut p = LogProduct::default();
    p.add(c(mf * mf * d / 2.0 * PI.ln()));
    for j in 1..=m {
        let jf = j as f64;
        p.gamma(c(tau + (jf - 1.0) * d / 2.0))?.inv_gamma(c(tau + (mf + jf - 1.0) * d / 2.0))?;
    }
    Ok(ClosedFormValue::from_log(p.0, FormulaId::BallConstant))
}

/// Unnormalised joint density of the singular values `1 >= r_1 >= … >= r_m >= 0`
/// of the `m x m` corner of a Haar element of size `n`.
pub fn radial_density(algebra: AlgebraTag, n: usize, m: usize, r: &[f64]) -> Result<f64> {
    if r.len() != m || m == 0 {
        return Err(Error::dim("radial_density", format!("{} radii for m = {m}", r.len())));
    }
    if n < 2 * m {
        return Err(Error::Domain(format!("radial_density needs n >= 2m (n = {n}, m = {m})")));
    }
    if r.iter().any(|&x| !(0.0..=1.0).contains(&x)) || r.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::Domain(format!("radii {r:?} are not in 1 >= r_1 >= ... >= r_m >= 0")));
    }
    let d = algebra.delta();
    let e = ((n as f64 - 2.0 * m as f64 + 1.0) * d - 2.0) / 2.0;
    let mut v = 1.0;
    for (i, &ri) in r.iter().enumerate() {
        v *= (1.0 - ri * ri).powf(e) * ri.powf(d - 1.0);
        for &rj in &r[i + 1..] {
            v *= (ri * ri - rj * rj).powf(d);
        }
    }
    Ok(v)
}

/// Euler Beta function.
pub fn beta_fn(a: f64, b: f64) -> Result<f64> {
    Ok((log_gamma_real(a)? + log_gamma_real(b)? - log_gamma_real(a + b)?).exp())
}

/// Normalised density of one cube coordinate `x_k`:
/// `(1+x)^λ (1-x²)^{(k-3)/2}` over `[-1, 1]`.
pub fn cube_factor_density(k: usize, lambda: f64, x: f64) -> Result<f64> {
    if k < 2 {
        return Err(Error::Domain(format!("cube coordinates start at k = 2 (got {k})")));
    }
    let a = lambda + (k as f64 - 1.0) / 2.0;
    let b = (k as f64 - 1.0) / 2.0;
    if !(a > 0.0) {
        return Err(Error::Domain(format!("λ_{k} = {lambda} must exceed -(k-1)/2")));
    }
    if !(-1.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("cube coordinate {x} outside [-1, 1]")));
    }
    let norm = (-(lambda + k as f64 - 2.0) * std::f64::consts::LN_2).exp() / beta_fn(a, b)?;
    let v = norm * pow0(1.0 + x, lambda) * pow0((1.0 - x) * (1.0 + x), (k as f64 - 3.0) / 2.0);
    if v.is_infinite() {
        return Err(Error::Domain(format!("cube density is infinite at x = {x} (k = {k}, λ = {lambda})")));
    }
    Ok(v)
}

/// `x^e` with `0^0 = 1`.
fn pow0(x: f64, e: f64) -> f64 {
    if e == 0.0 {
        1.0
    } else {
        x.powf(e)
    }
}

/// Joint density of `(x_2, …, x_n)`; `lambda` is `λ_1..λ_n` (λ_1 unused),
/// `None` meaning all zero.
pub fn cube_density(n: usize, x: &[f64], lambda: Option<&[f64]>) -> Result<f64> {
    if n < 2 || x.len() != n - 1 {
        return Err(Error::dim("cube_density", format!("{} coordinates for n = {n}", x.len())));
    }
    if let Some(l) = lambda {
        if l.len() != n {
            return Err(Error::dim("cube_density", format!("{} exponents for n = {n}", l.len())));
        }
    }
    let mut v = 1.0;
    for (i, &xk) in x.iter().enumerate() {
        let k = i + 2;
        let lk = lambda.map_or(0.0, |l| l[k - 1]);
        v *= cube_factor_density(k, lk, xk)?;
    }
    Ok(v)
}

/// Exponents `λ_1..λ_n`, `μ_1..μ_n` (complex case) and optional `θ_1..θ_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentSpec {
    pub algebra: AlgebraTag,
    pub lambda: Vec<Complex64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<Vec<Complex64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<Vec<f64>>,
}

impl ExponentSpec {
    pub fn new(algebra: AlgebraTag, lambda: &[f64]) -> Self {
        ExponentSpec { algebra, lambda: lambda.iter().map(|&x| c(x)).collect(), mu: None, theta: None }
    }

    pub fn complex(lambda: &[Complex64], mu: &[Complex64]) -> Self {
        ExponentSpec { algebra: AlgebraTag::C, lambda: lambda.to_vec(), mu: Some(mu.to_vec()), theta: None }
    }

    pub fn zero(algebra: AlgebraTag, n: usize) -> Self {
        let mut s = Self::new(algebra, &vec![0.0; n]);
        if algebra == AlgebraTag::C {
            s.mu = Some(vec![c(0.0); n]);
        }
        s
    }

    pub fn with_mu(mut self, mu: &[f64]) -> Self {
        self.mu = Some(mu.iter().map(|&x| c(x)).collect());
        self
    }

    pub fn with_theta(mut self, theta: &[f64]) -> Self {
        self.theta = Some(theta.to_vec());
        self
    }

    pub fn n(&self) -> usize {
        self.lambda.len()
    }

    /// `λ_k`, 1-based.
    pub fn lambda_k(&self, k: usize) -> Complex64 {
        self.lambda[k - 1]
    }

    /// `μ_k`, 1-based; zero when no μ sequence is given.
    pub fn mu_k(&self, k: usize) -> Complex64 {
        self.mu.as_ref().map_or(c(0.0), |m| m[k - 1])
    }

    /// `θ_k`, 1-based; zero when no θ sequence is given.
    pub fn theta_k(&self, k: usize) -> f64 {
        self.theta.as_ref().map_or(0.0, |t| t[k - 1])
    }

    pub fn has_theta(&self) -> bool {
        self.theta.as_ref().is_some_and(|t| t.iter().any(|&x| x != 0.0))
    }

    pub fn is_zero(&self) -> bool {
        self.lambda.iter().all(|l| *l == c(0.0))
            && self.mu.as_ref().is_none_or(|m| m.iter().all(|x| *x == c(0.0)))
            && !self.has_theta()
    }

    /// Drops the last exponent (the spec for the group one size smaller).
    pub fn truncated(&self) -> ExponentSpec {
        let n = self.n() - 1;
        ExponentSpec {
            algebra: self.algebra,
            lambda: self.lambda[..n].to_vec(),
            mu: self.mu.as_ref().map(|m| m[..n].to_vec()),
            theta: self.theta.as_ref().map(|t| t[..n].to_vec()),
        }
    }

    /// Shape checks: lengths, real exponents outside the complex case, `θ_1 = 0`.
    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if n == 0 {
            return Err(Error::dim("ExponentSpec", "empty λ sequence"));
        }
        if let Some(m) = &self.mu {
            if self.algebra != AlgebraTag::C {
                return Err(Error::Domain(format!("μ exponents are only meaningful over C, not {}", self.algebra)));
            }
            if m.len() != n {
                return Err(Error::dim("ExponentSpec", format!("{} μ values for n = {n}", m.len())));
            }
        }
        if self.algebra != AlgebraTag::C && self.lambda.iter().any(|l| l.im != 0.0) {
            return Err(Error::Domain(format!("complex λ needs K = C (got {})", self.algebra)));
        }
        if let Some(t) = &self.theta {
            if t.len() != n {
                return Err(Error::dim("ExponentSpec", format!("{} θ values for n = {n}", t.len())));
            }
            if t[0] != 0.0 {
                return Err(Error::Domain(format!("θ_1 must be 0 (got {})", t[0])));
            }
        }
        let all_finite = self.lambda.iter().chain(self.mu.iter().flatten()).all(|z| z.re.is_finite() && z.im.is_finite())
            && self.theta.iter().flatten().all(|t| t.is_finite());
        if !all_finite {
            return Err(Error::Domain("non-finite exponent".into()));
        }
        Ok(())
    }

    /// Lower bound on `Re λ_k` (R, H) or `Re(λ_k + μ_k)` (C) for absolute
    /// convergence, at shifted index `κ = k + θ_k`.
    pub fn convergence_bound(algebra: AlgebraTag, kappa: f64) -> f64 {
        match algebra {
            AlgebraTag::R => -(kappa - 1.0) / 2.0,
            AlgebraTag::C => -kappa,
            AlgebraTag::H => -(2.0 * kappa + 1.0),
        }
    }

    fn convergence_value(&self, k: usize) -> f64 {
        match self.algebra {
            AlgebraTag::C => (self.lambda_k(k) + self.mu_k(k)).re,
            _ => self.lambda_k(k).re,
        }
    }

    /// First index violating the group-integral convergence conditions.
    pub fn convergence_violation(&self) -> Option<usize> {
        (1..=self.n()).find(|&k| {
            let kappa = k as f64 + self.theta_k(k);
            // the R factor at k = 1 is constant and always finite
            if self.algebra == AlgebraTag::R && k == 1 {
                return false;
            }
            if kappa < k as f64 && kappa <= 1.0 {
                return true;
            }
            !(self.convergence_value(k) > Self::convergence_bound(self.algebra, kappa))
        })
    }

    pub fn in_convergence_domain(&self) -> bool {
        self.validate().is_ok() && self.convergence_violation().is_none()
    }

    pub fn check_convergence(&self) -> Result<()> {
        self.validate()?;
        if let Some(k) = self.convergence_violation() {
            return Err(Error::Domain(format!(
                "exponents at k = {k} are outside the convergence domain over {}",
                self.algebra
            )));
        }
        Ok(())
    }

    /// True when the more conservative Monte Carlo guard holds
    /// (`Re λ_k >= -(k-1)/4` and its analogues), keeping the variance finite.
    pub fn has_finite_variance_margin(&self) -> bool {
        (1..=self.n()).all(|k| {
            if self.algebra == AlgebraTag::R && k == 1 {
                return true;
            }
            let kappa = k as f64 + self.theta_k(k);
            self.convergence_value(k) >= Self::convergence_bound(self.algebra, kappa) / 2.0
        })
    }
}

fn ln_one_step_factor(algebra: AlgebraTag, n: usize, lambda: Complex64, mu: Complex64) -> Result<Complex64> {
    let nf = n as f64;
    let mut p = LogProduct::default();
    match algebra {
        AlgebraTag::R => {
            p.pow2(lambda);
            if n >= 2 {
                p.gamma(c(nf - 1.0))?
                    .gamma(lambda + (nf - 1.0) / 2.0)?
                    .inv_gamma(c((nf - 1.0) / 2.0))?
                    .inv_gamma(lambda + nf - 1.0)?;
            }
        }
        AlgebraTag::C => {
            p.gamma(c(nf))?.gamma(lambda + mu + nf)?.inv_gamma(lambda + nf)?.inv_gamma(mu + nf)?;
        }
        AlgebraTag::H => {
            p.gamma(c(2.0 * nf))?
                .gamma(lambda + 2.0 * nf + 1.0)?
                .inv_gamma(lambda / 2.0 + 2.0 * nf)?
                .inv_gamma(lambda / 2.0 + 2.0 * nf + 1.0)?;
        }
    }
    Ok(p.0)
}

/// The constant by which the one-step pushforward of the size-`n` measure
/// with last exponent `λ_n` (and `μ_n`) differs from the size `n-1` one.
pub fn theorem16_factor(algebra: AlgebraTag, n: usize, lambda: Complex64, mu: Complex64) -> Result<ClosedFormValue> {
    if n == 0 {
        return Err(Error::Domain("n must be at least 1".into()));
    }
    let mut spec = ExponentSpec::zero(algebra, n);
    spec.lambda[n - 1] = lambda;
    if algebra == AlgebraTag::C {
        spec.mu.as_mut().unwrap()[n - 1] = mu;
    } else if mu != c(0.0) {
        return Err(Error::Domain(format!("μ given for K = {algebra}")));
    }
    spec.check_convergence()?;
    Ok(ClosedFormValue::from_log(ln_one_step_factor(algebra, n, lambda, mu)?, FormulaId::OneStepFactor))
}

/// `π/(n-1) · F(-λ, -μ; n; 1)`, the disk integral
/// `∫_{|p|<1} (1+p)^λ (1+p̄)^μ (1-|p|²)^{n-2} dA(p)`.
pub fn disk_integral_jn(n: usize, lambda: Complex64, mu: Complex64) -> Result<ClosedFormValue> {
    if n < 2 {
        return Err(Error::Domain(format!("disk integral needs n >= 2 (got {n})")));
    }
    if !((lambda + mu).re > -(n as f64)) {
        return Err(Error::Domain(format!("disk integral diverges: Re(λ+μ) = {} <= -n", (lambda + mu).re)));
    }
    let f = gauss_2f1_at_1(-lambda, -mu, c(n as f64))?;
    Ok(ClosedFormValue::from_value(f * (PI / (n as f64 - 1.0)), FormulaId::DiskIntegral))
}

/// `∫ ∏_k det(1+[g]_{n-k+1})^{λ_k-λ_{k-1}} (· conj(det)^{μ_k-μ_{k-1}}) dσ_n(g)`.
///
/// Factors are evaluated through the Beta, disk and quaternionic disk
/// integrals rather than through [`theorem16_factor`], so that the product
/// of one-step factors is an independent check.
pub fn group_integral_rhs(spec: &ExponentSpec) -> Result<ClosedFormValue> {
    spec.check_convergence()?;
    let mut p = LogProduct::default();
    for k in 1..=spec.n() {
        let (l, m) = (spec.lambda_k(k), spec.mu_k(k));
        let kf = k as f64;
        if k == 1 {
            p.add(ln_one_step_factor(spec.algebra, 1, l, m)?);
            continue;
        }
        match spec.algebra {
            AlgebraTag::R => {
                // ∫ (1+x)^λ (1-x²)^{(k-3)/2} dx / ∫ (1-x²)^{(k-3)/2} dx
                p.pow2(l + kf - 2.0)
                    .gamma(c(kf / 2.0))?
                    .gamma(l + (kf - 1.0) / 2.0)?
                    .inv_gamma(l + kf - 1.0)?
                    .add(c(-0.5 * PI.ln()));
            }
            AlgebraTag::C => {
                let j = disk_integral_jn(k, l, m)?;
                p.add(j.ln()).add(c(((kf - 1.0) / PI).ln()));
            }
            AlgebraTag::H => {
                // quaternionic disk integral over the unit ball of H
                p.add(c(2.0 * PI.ln()))
                    .gamma(c(2.0 * kf - 2.0))?
                    .gamma(l + 2.0 * kf + 1.0)?
                    .inv_gamma(l / 2.0 + 2.0 * kf)?
                    .inv_gamma(l / 2.0 + 2.0 * kf + 1.0)?
                    .add(c(((2.0 * kf - 2.0) * (2.0 * kf - 1.0) / (PI * PI)).ln()));
            }
        }
    }
    Ok(ClosedFormValue::from_log(p.0, FormulaId::GroupIntegral))
}

fn ln_factorial(n: usize) -> Result<f64> {
    log_gamma_real(n as f64 + 1.0)
}

/// The group integral with extra weights `∏_{k>=2} (1 - |x_k|²)^{e_k}`,
/// `e_k = θ_k/2, θ_k, 2θ_k` for R, C, H.
pub fn group_integral_theta_rhs(spec: &ExponentSpec) -> Result<ClosedFormValue> {
    spec.check_convergence()?;
    let n = spec.n();
    let nf = n as f64;
    let mut p = LogProduct::default();
    p.add(ln_one_step_factor(spec.algebra, 1, spec.lambda_k(1), spec.mu_k(1))?);
    match spec.algebra {
        AlgebraTag::R => {
            p.gamma(c(nf / 2.0))?.add(c(-nf / 2.0 * PI.ln()));
        }
        AlgebraTag::C => {
            p.add(c(ln_factorial(n - 1)?));
        }
        AlgebraTag::H => {
            p.add(c(ln_factorial(2 * n - 1)?));
        }
    }
    for k in 2..=n {
        let (l, m) = (spec.lambda_k(k), spec.mu_k(k));
        let s = k as f64 + spec.theta_k(k);
        match spec.algebra {
            AlgebraTag::R => {
                p.pow2(l + s - 2.0)
                    .gamma(c((s - 1.0) / 2.0))?
                    .gamma(l + (s - 1.0) / 2.0)?
                    .inv_gamma(l + s - 1.0)?;
            }
            AlgebraTag::C => {
                p.gamma(c(s - 1.0))?.gamma(l + m + s)?.inv_gamma(l + s)?.inv_gamma(m + s)?;
            }
            AlgebraTag::H => {
                p.gamma(c(2.0 * (s - 1.0)))?
                    .gamma(l + 2.0 * s + 1.0)?
                    .inv_gamma(l / 2.0 + 2.0 * s)?
                    .inv_gamma(l / 2.0 + 2.0 * s + 1.0)?;
            }
        }
    }
    Ok(ClosedFormValue::from_log(p.0, FormulaId::GroupThetaIntegral))
}

/// `τ` such that the ball weight `det(1 - Z*Z)^{τ-1}` matches parameter `α`.
pub fn ball_tau(algebra: AlgebraTag, m: usize, alpha: f64) -> f64 {
    let mf = m as f64;
    match algebra {
        AlgebraTag::R => (alpha - mf + 1.0) / 2.0,
        AlgebraTag::C => alpha - mf + 1.0,
        AlgebraTag::H => 2.0 * (alpha - mf + 1.0),
    }
}

/// `∫_{B_m(K)} det(1-Z*Z)^{τ(α)-1} ∏ det(1+[Z]_{m-k+1})^{λ_k-λ_{k-1}} (…) dZ`,
/// with `spec` of length `m`.
pub fn ball_integral_rhs(algebra: AlgebraTag, m: usize, alpha: f64, spec: &ExponentSpec) -> Result<ClosedFormValue> {
    spec.validate()?;
    if spec.algebra != algebra || spec.n() != m {
        return Err(Error::dim("ball_integral_rhs", format!("spec of size {} over {} for m = {m} over {algebra}", spec.n(), spec.algebra)));
    }
    let tau = ball_tau(algebra, m, alpha);
    let base = ball_constant(algebra, m, tau)?;
    let mut p = LogProduct::default();
    p.add(base.ln());
    for k in 1..=m {
        let (l, mu) = (spec.lambda_k(k), spec.mu_k(k));
        let kf = k as f64;
        match algebra {
            AlgebraTag::R => {
                p.pow2(l)
                    .gamma(c(kf + alpha - 1.0))?
                    .gamma(l + (alpha + kf - 1.0) / 2.0)?
                    .inv_gamma(c((kf + alpha - 1.0) / 2.0))?
                    .inv_gamma(l + alpha + kf - 1.0)?;
            }
            AlgebraTag::C => {
                p.gamma(c(kf + alpha))?
                    .gamma(l + mu + kf + alpha)?
                    .inv_gamma(l + kf + alpha)?
                    .inv_gamma(mu + kf + alpha)?;
            }
            AlgebraTag::H => {
                let s = 2.0 * (kf + alpha);
                p.gamma(c(s))?.gamma(l + s + 1.0)?.inv_gamma(l / 2.0 + s)?.inv_gamma(l / 2.0 + s + 1.0)?;
            }
        }
    }
    Ok(ClosedFormValue::from_log(p.0, FormulaId::BallIntegral))
}

/// Partial product of the Hua–Pickrell integrals, with a heuristic tail size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PickrellProduct {
    pub value: ClosedFormValue,
    pub k_max: usize,
    /// `Σ_{k>k_max} |λ_k - λ| / √k`, a rough bound on `|log tail|` (not asserted).
    pub tail_estimate: f64,
}

const TAIL_TERMS: usize = 100_000;

/// `∏_{k=1}^{k_max} 2^{λ_k-λ} Γ(λ_k+(k-1)/2)Γ(λ+k-1) / (Γ(λ+(k-1)/2)Γ(λ_k+k-1))`,
/// the k = 1 factor being `2^{λ_1-λ}`.
pub fn pickrell_product_rhs(lambda_k: impl Fn(usize) -> f64, lambda: f64, k_max: usize) -> Result<PickrellProduct> {
    if !(lambda > -0.5) {
        return Err(Error::Domain(format!("base λ = {lambda} must exceed -1/2")));
    }
    if k_max == 0 {
        return Err(Error::Domain("k_max must be at least 1".into()));
    }
    let mut p = LogProduct::default();
    for k in 1..=k_max {
        let lk = lambda_k(k);
        let d = lk - lambda;
        p.pow2(c(d));
        if k == 1 || d == 0.0 {
            continue;
        }
        let kf = k as f64;
        if !(lk > -(kf - 1.0) / 2.0) {
            return Err(Error::Domain(format!("λ_{k} = {lk} must exceed -(k-1)/2")));
        }
        p.gamma(c(lk + (kf - 1.0) / 2.0))?
            .gamma(c(lambda + kf - 1.0))?
            .inv_gamma(c(lambda + (kf - 1.0) / 2.0))?
            .inv_gamma(c(lk + kf - 1.0))?;
    }
    let tail_estimate =
        (k_max + 1..=k_max + TAIL_TERMS).map(|k| (lambda_k(k) - lambda).abs() / (k as f64).sqrt()).sum();
    Ok(PickrellProduct { value: ClosedFormValue::from_log(p.0, FormulaId::PickrellProduct), k_max, tail_estimate })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{integrate, integrate_2d, tanh_sinh_with_distances};
    use proptest::prelude::*;
    use statrs::function::gamma::ln_gamma as statrs_ln_gamma;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn log_gamma_examples() {
        assert!(log_gamma(c(1.0)).unwrap().norm() < 1e-14);
        assert!(close(log_gamma_real(0.5).unwrap(), 0.5 * PI.ln(), 1e-14));
        assert!(close(log_gamma_real(4.0).unwrap(), 6f64.ln(), 1e-14));
    }

    #[test]
    fn log_gamma_matches_statrs_on_reals() {
        for i in 1..400 {
            let x = i as f64 * 0.173;
            let ours = log_gamma_real(x).unwrap();
            assert!((ours - statrs_ln_gamma(x)).abs() < 1e-12 * statrs_ln_gamma(x).abs().max(1.0), "x = {x}");
        }
    }

    #[test]
    fn gamma_reflection_and_complex() {
        // Γ(-1/2) = -2√π
        let g = gamma(c(-0.5)).unwrap();
        assert!((g - c(-2.0 * PI.sqrt())).norm() < 1e-13);
        // |Γ(i)|² = π / sinh π
        let gi = gamma(Complex64::new(0.0, 1.0)).unwrap();
        assert!(close(gi.norm_sqr(), PI / PI.sinh(), 1e-13));
        // |Γ(1/2 + iy)|² = π / cosh(πy)
        let y = 2.3;
        let g = gamma(Complex64::new(0.5, y)).unwrap();
        assert!(close(g.norm_sqr(), PI / (PI * y).cosh(), 1e-12));
        // Γ(z+1) = z Γ(z) off the axis
        let z = Complex64::new(3.7, -1.9);
        let lhs = gamma(z + 1.0).unwrap();
        let rhs = z * gamma(z).unwrap();
        assert!((lhs - rhs).norm() < 1e-12 * rhs.norm());
    }

    #[test]
    fn log_gamma_poles() {
        assert_eq!(log_gamma(c(0.0)), Err(Error::Pole { at: 0 }));
        assert_eq!(log_gamma(c(-3.0)), Err(Error::Pole { at: -3 }));
        assert!(log_gamma(c(-2.5)).is_ok());
    }

    fn series_2f1(a: f64, b: f64, cc: f64, terms: usize) -> f64 {
        let mut sum = 1.0;
        let mut term = 1.0;
        for k in 0..terms {
            let k = k as f64;
            term *= (a + k) * (b + k) / ((cc + k) * (k + 1.0));
            sum += term;
        }
        sum
    }

    #[test]
    fn gauss_examples() {
        let v = gauss_2f1_at_1(c(0.0), c(1.3), c(2.2)).unwrap();
        assert!((v - c(1.0)).norm() < 1e-15);
        let v = gauss_2f1_at_1(c(-1.0), c(-1.0), c(2.0)).unwrap();
        assert!((v - c(1.5)).norm() < 1e-15);
        let v = gauss_2f1_at_1(c(-2.0), c(-2.0), c(3.0)).unwrap();
        // Γ(3)Γ(7)/(Γ(5)Γ(5)) = 2·720/576
        assert!((v - c(2.5)).norm() < 1e-12);
        assert!(gauss_2f1_at_1(c(0.5), c(0.7), c(1.0)).is_err());
    }

    #[test]
    fn gauss_nonterminating_matches_slow_series() {
        // c - a - b = 2.5, the series converges like k^{-3.5}
        let v = gauss_2f1_at_1(c(0.3), c(-0.4), c(2.4)).unwrap();
        let s = series_2f1(0.3, -0.4, 2.4, 200_000);
        assert!((v.re - s).abs() < 1e-9);
    }

    #[test]
    fn selberg_reduces_to_beta() {
        for &(a, b) in &[(1.0, 1.0), (0.5, 2.5), (3.2, 0.7)] {
            let s = selberg(1, a, b, 0.37).unwrap().re();
            let beta = (statrs_ln_gamma(a) + statrs_ln_gamma(b) - statrs_ln_gamma(a + b)).exp();
            assert!(close(s, beta, 1e-12));
        }
        assert!(close(selberg(1, 1.0, 1.0, 0.5).unwrap().re(), 1.0, 1e-14));
    }

    #[test]
    fn selberg_two_dimensional() {
        let v = selberg(2, 1.0, 1.0, 0.5).unwrap().re();
        assert!(close(v, 1.0 / 3.0, 1e-13));
        // ∫∫ |t1 - t2| = 1/3 independently, as twice the integral over t2 < t1
        let q = 2.0 * integrate_2d(|x, y| x - y, 0.0, 1.0, |_| 0.0, |x| x, 1e-10).unwrap();
        assert!((v - q).abs() < 1e-6);
        assert!(selberg(2, -1.0, 1.0, 0.5).is_err());
    }

    #[test]
    fn ball_constant_examples() {
        for &tau in &[0.5, 1.0, 2.7] {
            let v = ball_constant(AlgebraTag::C, 1, tau).unwrap().re();
            assert!(close(v, PI / tau, 1e-13));
        }
        for n in 2..10 {
            let nf = n as f64;
            let r = ball_constant(AlgebraTag::R, 1, (nf - 1.0) / 2.0).unwrap().re();
            let expect = PI.powf(-0.5) * (statrs_ln_gamma(nf / 2.0) - statrs_ln_gamma((nf - 1.0) / 2.0)).exp();
            assert!(close(1.0 / r, expect, 1e-12));
            let h = ball_constant(AlgebraTag::H, 1, 2.0 * nf - 2.0).unwrap().re();
            assert!(close(1.0 / h, (2.0 * nf - 2.0) * (2.0 * nf - 1.0) / (PI * PI), 1e-12));
            let cc = ball_constant(AlgebraTag::C, 1, nf - 1.0).unwrap().re();
            assert!(close(1.0 / cc, (nf - 1.0) / PI, 1e-12));
        }
        assert!(ball_constant(AlgebraTag::R, 2, 0.0).is_err());
    }

    #[test]
    fn ball_constant_real_m1_quadrature() {
        let tau = 1.7;
        let q = integrate(|x: f64| (1.0 - x * x).powf(tau - 1.0), -1.0, 1.0, 1e-13).unwrap();
        assert!(close(ball_constant(AlgebraTag::R, 1, tau).unwrap().re(), q, 1e-11));
    }

    #[test]
    fn radial_density_examples() {
        let a = radial_density(AlgebraTag::R, 3, 1, &[0.2]).unwrap();
        let b = radial_density(AlgebraTag::R, 3, 1, &[0.9]).unwrap();
        assert_eq!(a, b);
        assert!(close(radial_density(AlgebraTag::C, 2, 1, &[0.6]).unwrap(), 0.6, 1e-15));
        for alg in AlgebraTag::ALL {
            assert_eq!(radial_density(alg, 6, 2, &[0.5, 0.5]).unwrap(), 0.0);
        }
        assert!(radial_density(AlgebraTag::R, 5, 2, &[0.2, 0.5]).is_err());
        assert!(radial_density(AlgebraTag::R, 3, 2, &[0.5, 0.2]).is_err());
    }

    #[test]
    fn cube_factors_are_normalised() {
        for k in 2..9 {
            for &lambda in &[0.0, 1.0, 2.5, -0.2] {
                // the density at x = 0 is exactly the normalising constant
                let norm = cube_factor_density(k, lambda, 0.0).unwrap();
                let e = (k as f64 - 3.0) / 2.0;
                let q = tanh_sinh_with_distances(|_, da, db| norm * da.powf(lambda) * (da * db).powf(e), -1.0, 1.0, 1e-13)
                    .unwrap();
                assert!((q.value - 1.0).abs() < 1e-10, "k={k} λ={lambda}: {}", q.value);
            }
        }
    }

    #[test]
    fn cube_density_examples() {
        assert!(close(cube_factor_density(3, 0.0, 0.3).unwrap(), 0.5, 1e-14));
        let x: f64 = 0.4;
        let arcsine = 1.0 / (PI * (1.0 - x * x).sqrt());
        assert!(close(cube_factor_density(2, 0.0, x).unwrap(), arcsine, 1e-13));
        // λ ≡ 0 reproduces Γ(n/2)/π^{n/2} ∏ (1-x²)^{(j-3)/2}
        let n = 5;
        let xs = [0.1, -0.3, 0.5, 0.7];
        let joint = cube_density(n, &xs, None).unwrap();
        let mut expect = (statrs_ln_gamma(n as f64 / 2.0) - n as f64 / 2.0 * PI.ln()).exp();
        for (i, &x) in xs.iter().enumerate() {
            expect *= (1.0 - x * x).powf((i as f64 + 2.0 - 3.0) / 2.0);
        }
        assert!(close(joint, expect, 1e-13));
        assert!(cube_factor_density(2, 0.0, 1.0).is_err());
        assert_eq!(cube_factor_density(5, 0.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn one_step_factor_examples() {
        for alg in AlgebraTag::ALL {
            for n in 1..6 {
                let v = theorem16_factor(alg, n, c(0.0), c(0.0)).unwrap().re();
                assert!(close(v, 1.0, 1e-13), "{alg} n={n}");
            }
        }
        assert!(close(theorem16_factor(AlgebraTag::C, 1, c(1.0), c(1.0)).unwrap().re(), 2.0, 1e-13));
        assert!(close(theorem16_factor(AlgebraTag::R, 2, c(1.0), c(0.0)).unwrap().re(), 1.0, 1e-13));
        assert!(theorem16_factor(AlgebraTag::R, 3, c(-1.5), c(0.0)).is_err());
    }

    #[test]
    fn one_step_factor_quaternion_n1_quadrature() {
        // Sp(1) = S³; Re q has density (2/π)√(1-t²) and |1+q|² = 2 + 2t
        let lambda: f64 = 1.3;
        let q = integrate(|t: f64| 2.0 / PI * (1.0 - t * t).sqrt() * (2.0 + 2.0 * t).powf(lambda / 2.0), -1.0, 1.0, 1e-13)
            .unwrap();
        let v = theorem16_factor(AlgebraTag::H, 1, c(lambda), c(0.0)).unwrap().re();
        assert!(close(v, q, 1e-10));
    }

    #[test]
    fn group_integral_examples() {
        for alg in AlgebraTag::ALL {
            let v = group_integral_rhs(&ExponentSpec::zero(alg, 4)).unwrap();
            assert!((v.to_complex() - c(1.0)).norm() < 1e-12);
        }
        let v = group_integral_rhs(&ExponentSpec::new(AlgebraTag::R, &[0.0, 1.0])).unwrap();
        assert!(close(v.re(), 1.0, 1e-13));
        let v = group_integral_rhs(&ExponentSpec::new(AlgebraTag::C, &[1.0]).with_mu(&[1.0])).unwrap();
        assert!(close(v.re(), 2.0, 1e-13));
        let bad = ExponentSpec::new(AlgebraTag::R, &[0.0, 0.0, -1.0]);
        assert!(group_integral_rhs(&bad).is_err());
    }

    #[test]
    fn disk_integral_examples() {
        for n in 2..6 {
            let v = disk_integral_jn(n, c(0.0), c(0.0)).unwrap().re();
            assert!(close(v, PI / (n as f64 - 1.0), 1e-14));
        }
        assert!(close(disk_integral_jn(2, c(1.0), c(1.0)).unwrap().re(), 1.5 * PI, 1e-13));
        assert!(close(disk_integral_jn(2, c(1.0), c(0.0)).unwrap().re(), PI, 1e-13));
    }

    /// `∫_0^1 ∫_0^{2π} (1+re^{iφ})^λ (1+re^{-iφ})^μ (1-r²)^{n-2} r dφ dr` for real λ = μ,
    /// folded onto `φ ∈ [0, π]` so the near-singular point sits at an endpoint.
    fn disk_quadrature(n: usize, lambda: f64) -> f64 {
        2.0 * integrate_2d(
            |r, phi| {
                let w = (1.0 + r * phi.cos()).powi(2) + (r * phi.sin()).powi(2);
                w.powf(lambda) * (1.0 - r * r).powi(n as i32 - 2) * r
            },
            0.0,
            1.0,
            |_| 0.0,
            |_| PI,
            1e-10,
        )
        .unwrap()
    }

    #[test]
    fn disk_integral_matches_polar_quadrature() {
        for n in 2..5 {
            let q = disk_quadrature(n, 0.0);
            assert!((q - disk_integral_jn(n, c(0.0), c(0.0)).unwrap().re()).abs() < 1e-6);
        }
        let q = disk_quadrature(3, 0.7);
        assert!((q - disk_integral_jn(3, c(0.7), c(0.7)).unwrap().re()).abs() < 1e-6);
    }

    #[test]
    fn theta_reduces_to_group_integral() {
        let specs = [
            ExponentSpec::new(AlgebraTag::R, &[0.4, 0.3, -0.2, 1.1]).with_theta(&[0.0; 4]),
            ExponentSpec::complex(
                &[Complex64::new(0.2, 0.5), Complex64::new(1.0, -0.3), c(0.4)],
                &[Complex64::new(0.2, -0.5), Complex64::new(0.1, 0.3), c(-0.7)],
            )
            .with_theta(&[0.0; 3]),
            ExponentSpec::new(AlgebraTag::H, &[1.5, -2.0, 0.7]).with_theta(&[0.0; 3]),
        ];
        for s in &specs {
            let a = group_integral_theta_rhs(s).unwrap().to_complex();
            let b = group_integral_rhs(s).unwrap().to_complex();
            assert!((a - b).norm() < 1e-12 * b.norm(), "{s:?}");
        }
    }

    #[test]
    fn theta_real_n3_beta_integral() {
        // only x_3 carries weight: E[(1-x²)^{1/2}] with x uniform on [-1,1] is π/4
        let s = ExponentSpec::new(AlgebraTag::R, &[0.0, 0.0, 0.0]).with_theta(&[0.0, 0.0, 1.0]);
        let v = group_integral_theta_rhs(&s).unwrap().re();
        let q = integrate(|x: f64| 0.5 * (1.0 - x * x).sqrt(), -1.0, 1.0, 1e-13).unwrap();
        assert!(close(v, q, 1e-12));
    }

    #[test]
    fn theta_rejects_nonzero_theta1() {
        let s = ExponentSpec::new(AlgebraTag::C, &[0.0, 0.0]).with_theta(&[1.0, 0.0]);
        assert!(group_integral_theta_rhs(&s).is_err());
    }

    #[test]
    fn ball_integral_reduces_to_constant() {
        for alg in AlgebraTag::ALL {
            for m in 1..=2 {
                let alpha = m as f64 + 1.7;
                let v = ball_integral_rhs(alg, m, alpha, &ExponentSpec::zero(alg, m)).unwrap().re();
                let cst = ball_constant(alg, m, ball_tau(alg, m, alpha)).unwrap().re();
                assert!(close(v, cst, 1e-12));
            }
        }
        for n in 2..6 {
            let v = ball_integral_rhs(AlgebraTag::C, 1, n as f64 - 1.0, &ExponentSpec::zero(AlgebraTag::C, 1)).unwrap();
            assert!(close(v.re(), PI / (n as f64 - 1.0), 1e-13));
        }
    }

    #[test]
    fn ball_integral_real_m1_quadrature() {
        for &(alpha, lambda) in &[(2.0, 1.0), (2.7, 0.8), (3.5, -0.3)] {
            let q = tanh_sinh_with_distances(
                |_, da, db| (da * db).powf((alpha - 2.0) / 2.0) * da.powf(lambda),
                -1.0,
                1.0,
                1e-13,
            )
            .unwrap()
            .value;
            let v = ball_integral_rhs(AlgebraTag::R, 1, alpha, &ExponentSpec::new(AlgebraTag::R, &[lambda])).unwrap();
            assert!(close(v.re(), q, 1e-10), "α={alpha} λ={lambda}: {} vs {q}", v.re());
        }
        let v = ball_integral_rhs(AlgebraTag::R, 1, 2.0, &ExponentSpec::new(AlgebraTag::R, &[1.0])).unwrap();
        assert!(close(v.re(), 2.0, 1e-13));
    }

    #[test]
    fn pickrell_examples() {
        let p = pickrell_product_rhs(|_| 0.7, 0.7, 30).unwrap();
        assert!((p.value.re() - 1.0).abs() < 1e-15);
        assert_eq!(p.tail_estimate, 0.0);
        let p = pickrell_product_rhs(|k| if k == 2 { 1.0 } else { 0.0 }, 0.0, 2).unwrap();
        assert!(close(p.value.re(), 1.0, 1e-13));
        let f = |k: usize| 0.5f64.powi(k as i32);
        let mut prev = pickrell_product_rhs(f, 0.0, 39).unwrap().value.re();
        let cur = pickrell_product_rhs(f, 0.0, 40).unwrap().value.re();
        assert!((cur - prev).abs() < 1e-6);
        prev = cur;
        assert!(prev.is_finite());
    }

    fn positive_lambda() -> impl Strategy<Value = f64> {
        -0.2f64..3.0
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(50))]

        #[test]
        fn recursion_real(ls in prop::collection::vec(positive_lambda(), 2..8)) {
            let spec = ExponentSpec::new(AlgebraTag::R, &ls);
            let n = spec.n();
            let full = group_integral_rhs(&spec).unwrap().to_complex();
            let prev = group_integral_rhs(&spec.truncated()).unwrap().to_complex();
            let f = theorem16_factor(AlgebraTag::R, n, spec.lambda_k(n), c(0.0)).unwrap().to_complex();
            prop_assert!((full - f * prev).norm() <= 1e-12 * full.norm());
        }

        #[test]
        fn recursion_complex(re in prop::collection::vec(-0.4f64..2.0, 2..7), im in prop::collection::vec(-1.0f64..1.0, 7)) {
            let n = re.len();
            let lambda: Vec<Complex64> = (0..n).map(|i| Complex64::new(re[i], im[i])).collect();
            let mu: Vec<Complex64> = (0..n).map(|i| Complex64::new(0.5 * re[i], im[(i + 3) % 7])).collect();
            let spec = ExponentSpec::complex(&lambda, &mu);
            let full = group_integral_rhs(&spec).unwrap().to_complex();
            let prev = group_integral_rhs(&spec.truncated()).unwrap().to_complex();
            let f = theorem16_factor(AlgebraTag::C, n, lambda[n - 1], mu[n - 1]).unwrap().to_complex();
            prop_assert!((full - f * prev).norm() <= 1e-12 * full.norm());
        }

        #[test]
        fn recursion_quaternion(ls in prop::collection::vec(-2.0f64..4.0, 2..7)) {
            let spec = ExponentSpec::new(AlgebraTag::H, &ls);
            let n = spec.n();
            let full = group_integral_rhs(&spec).unwrap().to_complex();
            let prev = group_integral_rhs(&spec.truncated()).unwrap().to_complex();
            let f = theorem16_factor(AlgebraTag::H, n, spec.lambda_k(n), c(0.0)).unwrap().to_complex();
            prop_assert!((full - f * prev).norm() <= 1e-12 * full.norm());
        }

        #[test]
        fn polynomial_2f1_matches_series(a in 1usize..4, b in -3.0f64..3.0, cc in 0.5f64..5.0) {
            let a = -(a as f64);
            let v = gauss_2f1_at_1(c(a), c(b), c(cc)).unwrap().re;
            let s = series_2f1(a, b, cc, 3);
            prop_assert!((v - s).abs() <= 1e-12 * s.abs().max(1.0));
            if cc - a - b > 0.0 && cc - b > 0.0 {
                let ratio = (statrs_ln_gamma(cc) + statrs_ln_gamma(cc - a - b) - statrs_ln_gamma(cc - a) - statrs_ln_gamma(cc - b)).exp();
                prop_assert!((v - ratio).abs() <= 1e-10 * ratio.abs().max(1.0));
            }
        }
    }
}
