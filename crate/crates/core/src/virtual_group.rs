//! The virtual orthogonal group, represented by its cube coordinates
//! `x_2, x_3, …` under Hua–Pickrell laws.
//!
//! Under the law with parameters `λ_k`, the coordinates are independent and
//! `(1 + x_k)/2 ~ Beta(λ_k + (k-1)/2, (k-1)/2)`.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::closedform::{pickrell_product_rhs, ExponentSpec, PickrellProduct};
use crate::error::{Error, Result};
use crate::haar::haar_unitary;
use crate::matlin::GroupElement;
use crate::montecarlo::{beta_cdf, haar_with_chain, run_shards, ComparisonReport, KsReport, McEstimate};
use crate::rng::RngStream;
use crate::scalar::{AlgebraTag, Group};
use crate::upsilon::{chain_scalars, chain_scalars_matrix, hua_integrand_chain, upsilon};

pub const DEFAULT_K_MAX: usize = 64;

/// Deviations below this are treated as zero in [`phi`].
pub const DEVIATION_EPS: f64 = 1e-15;

/// A summable deviation rule `d_k` added on top of explicit deviations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviationRule {
    /// `d_k = r^k`, `|r| < 1`.
    Geometric { ratio: f64 },
    /// `d_k = 1/k²`.
    Quadratic,
}

impl DeviationRule {
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "quadratic" {
            return Ok(DeviationRule::Quadratic);
        }
        if let Some(r) = s.strip_prefix("geometric:") {
            let ratio: f64 = r.trim().parse().map_err(|_| Error::Domain(format!("bad geometric ratio '{r}'")))?;
            return Ok(DeviationRule::Geometric { ratio });
        }
        Err(Error::Domain(format!("unknown deviation rule '{s}' (expected geometric:r or quadratic)")))
    }

    fn at(&self, k: usize) -> f64 {
        match *self {
            DeviationRule::Geometric { ratio } => ratio.powi(k as i32),
            DeviationRule::Quadratic => 1.0 / (k as f64 * k as f64),
        }
    }
}

impl fmt::Display for DeviationRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DeviationRule::Geometric { ratio } => write!(f, "geometric:{ratio}"),
            DeviationRule::Quadratic => f.write_str("quadratic"),
        }
    }
}

/// `λ_k = λ + d_k`, with `d_k` the sum of explicit deviations and an
/// optional rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaSequence {
    pub base: f64,
    #[serde(default)]
    pub deviations: BTreeMap<usize, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule: Option<DeviationRule>,
}

impl LambdaSequence {
    pub fn constant(base: f64) -> Self {
        LambdaSequence { base, deviations: BTreeMap::new(), rule: None }
    }

    pub fn with_deviation(mut self, k: usize, d: f64) -> Self {
        *self.deviations.entry(k).or_insert(0.0) += d;
        self
    }

    pub fn with_rule(mut self, rule: DeviationRule) -> Self {
        self.rule = Some(rule);
        self
    }

    /// Parses `k1:d1,k2:d2,…` (empty string: no deviations).
    pub fn parse_deviations(base: f64, s: &str) -> Result<Self> {
        let mut law = Self::constant(base);
        for item in s.split(',').map(str::trim).filter(|x| !x.is_empty()) {
            let (k, d) = item.split_once(':').ok_or_else(|| Error::Domain(format!("deviation '{item}' is not k:d")))?;
            let k: usize = k.trim().parse().map_err(|_| Error::Domain(format!("bad index in '{item}'")))?;
            let d: f64 = d.trim().parse().map_err(|_| Error::Domain(format!("bad value in '{item}'")))?;
            if k == 0 {
                return Err(Error::Domain("deviation indices start at 1".into()));
            }
            law = law.with_deviation(k, d);
        }
        Ok(law)
    }

    pub fn deviation(&self, k: usize) -> f64 {
        self.deviations.get(&k).copied().unwrap_or(0.0) + self.rule.map_or(0.0, |r| r.at(k))
    }

    pub fn lambda_k(&self, k: usize) -> f64 {
        self.base + self.deviation(k)
    }

    /// The same base law without deviations.
    pub fn base_law(&self) -> LambdaSequence {
        Self::constant(self.base)
    }

    pub fn validate(&self, k_max: usize) -> Result<()> {
        if !(self.base > -0.5) || !self.base.is_finite() {
            return Err(Error::Domain(format!("base λ = {} must exceed -1/2", self.base)));
        }
        if let Some(DeviationRule::Geometric { ratio }) = self.rule {
            if !(ratio.abs() < 1.0) {
                return Err(Error::Domain(format!("geometric ratio {ratio} is not summable")));
            }
        }
        if self.deviations.values().any(|d| !d.is_finite()) {
            return Err(Error::Domain("non-finite deviation".into()));
        }
        let top = k_max.max(self.deviations.keys().last().copied().unwrap_or(0));
        for k in 2..=top {
            let l = self.lambda_k(k);
            if !(l > -(k as f64 - 1.0) / 2.0) {
                return Err(Error::Domain(format!("λ_{k} = {l} must exceed -(k-1)/2")));
            }
        }
        Ok(())
    }

    /// Beta parameters of `(1 + x_k)/2`.
    pub fn beta_params(&self, k: usize) -> (f64, f64) {
        let h = (k as f64 - 1.0) / 2.0;
        (self.lambda_k(k) + h, h)
    }

    /// Exact product of the per-coordinate integrals up to `k_max`.
    pub fn closed_form(&self, k_max: usize) -> Result<PickrellProduct> {
        pickrell_product_rhs(|k| self.lambda_k(k), self.base, k_max)
    }
}

/// Cube coordinates `x_2..x_{k_max}` of a point of the virtual group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VirtualElement {
    pub k_max: usize,
    /// `coords[i] = x_{i+2}`.
    pub coords: Vec<f64>,
}

impl VirtualElement {
    pub fn x(&self, k: usize) -> f64 {
        self.coords[k - 2]
    }
}

/// Pre-built per-coordinate Beta samplers for a law.
pub struct VirtualSampler {
    k_max: usize,
    betas: Vec<Beta<f64>>,
}

impl VirtualSampler {
    pub fn new(law: &LambdaSequence, k_max: usize) -> Result<Self> {
        if k_max < 2 {
            return Err(Error::Domain(format!("k_max = {k_max} must be at least 2")));
        }
        law.validate(k_max)?;
        let betas = (2..=k_max)
            .map(|k| {
                let (a, b) = law.beta_params(k);
                Beta::new(a, b).map_err(|e| Error::Domain(format!("Beta({a}, {b}) for k = {k}: {e}")))
            })
            .collect::<Result<_>>()?;
        Ok(VirtualSampler { k_max, betas })
    }

    pub fn sample(&self, rng: &mut RngStream) -> VirtualElement {
        let coords = self.betas.iter().map(|b| 2.0 * b.sample(rng) - 1.0).collect();
        VirtualElement { k_max: self.k_max, coords }
    }
}

pub fn sample_virtual(law: &LambdaSequence, k_max: usize, rng: &mut RngStream) -> Result<VirtualElement> {
    Ok(VirtualSampler::new(law, k_max)?.sample(rng))
}

/// `Φ(x) = 2^{λ_1-λ} ∏_{j=2}^{k_max} (1 + x_j)^{λ_j-λ}`.
pub fn phi(element: &VirtualElement, law: &LambdaSequence) -> Result<f64> {
    let mut v = 2f64.powf(law.deviation(1));
    for k in 2..=element.k_max {
        let d = law.deviation(k);
        if d.abs() < DEVIATION_EPS {
            continue;
        }
        let base = 1.0 + element.x(k);
        if base <= 0.0 && d < 0.0 {
            return Err(Error::Domain(format!("Φ is infinite: x_{k} = -1 with negative deviation")));
        }
        v *= base.max(0.0).powf(d);
    }
    Ok(v)
}

/// Monte Carlo of `∫ Φ dν^λ` (coordinates from the base law) against the
/// truncated product.
pub fn phi_integral_mc(law: &LambdaSequence, k_max: usize, n_samples: u64, shards: usize, seed: u64) -> Result<ComparisonReport> {
    law.validate(k_max)?;
    let sampler = VirtualSampler::new(&law.base_law(), k_max)?;
    let parts = run_shards(n_samples, shards, seed, |rng, count| {
        let mut est = McEstimate::new();
        for _ in 0..count {
            est.push_real(phi(&sampler.sample(rng), law)?);
        }
        Ok(est)
    })?;
    let est = parts.iter().fold(McEstimate::new(), |a, p| a.merge(p));
    let cf = law.closed_form(k_max)?;
    let mut report = ComparisonReport::against_closed_form(format!("∫Φ dν^λ, λ={}, k_max={k_max}", law.base), est, cf.value);
    if est.mean.norm() > 0.0 && est.stderr() / est.mean.norm() > 0.5 {
        report.warnings.push("inconclusive: relative standard error above 0.5".into());
    }
    Ok(report)
}

/// One row of a truncation diagnostic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationRow {
    pub k: usize,
    pub mean: f64,
    pub stderr: f64,
    /// Change of the Monte Carlo mean since the previous grid point.
    pub delta: f64,
    pub closed_form: f64,
    pub closed_form_delta: f64,
}

/// Partial means of `Φ` truncated at each `k` of `k_grid`, from one common
/// set of samples.
pub fn truncation_diagnostic(law: &LambdaSequence, k_grid: &[usize], n_samples: u64, shards: usize, seed: u64) -> Result<Vec<TruncationRow>> {
    let mut grid = k_grid.to_vec();
    grid.sort_unstable();
    grid.dedup();
    let k_top = *grid.last().ok_or_else(|| Error::Domain("empty k grid".into()))?;
    if grid[0] < 2 {
        return Err(Error::Domain("k grid starts at 2".into()));
    }
    law.validate(k_top)?;
    let sampler = VirtualSampler::new(&law.base_law(), k_top)?;
    let parts = run_shards(n_samples, shards, seed, |rng, count| {
        let mut ests = vec![McEstimate::new(); grid.len()];
        for _ in 0..count {
            let x = sampler.sample(rng);
            let mut v = 2f64.powf(law.deviation(1));
            let mut gi = 0;
            for k in 2..=k_top {
                let d = law.deviation(k);
                if d.abs() >= DEVIATION_EPS {
                    v *= (1.0 + x.x(k)).max(0.0).powf(d);
                }
                if k == grid[gi] {
                    ests[gi].push_real(v);
                    gi += 1;
                }
            }
        }
        Ok(ests)
    })?;
    let mut rows: Vec<TruncationRow> = Vec::new();
    for (i, &k) in grid.iter().enumerate() {
        let est = parts.iter().fold(McEstimate::new(), |a, p| a.merge(&p[i]));
        let cf = law.closed_form(k)?.value.re();
        let (delta, cf_delta) = match rows.last() {
            Some(prev) => (est.mean.re - prev.mean, cf - prev.closed_form),
            None => (0.0, 0.0),
        };
        rows.push(TruncationRow { k, mean: est.mean.re, stderr: est.stderr(), delta, closed_form: cf, closed_form_delta: cf_delta });
    }
    Ok(rows)
}

/// Per-coordinate KS tests of [`sample_virtual`] against the Beta laws.
pub fn coordinate_ks(law: &LambdaSequence, k_max: usize, n_samples: u64, seed: u64) -> Result<Vec<KsReport>> {
    let sampler = VirtualSampler::new(law, k_max)?;
    let mut rng = RngStream::new(seed, 0);
    let mut cols = vec![Vec::with_capacity(n_samples as usize); k_max - 1];
    for _ in 0..n_samples {
        let x = sampler.sample(&mut rng);
        for (c, v) in cols.iter_mut().zip(&x.coords) {
            c.push(*v);
        }
    }
    (2..=k_max)
        .map(|k| {
            let (a, b) = law.beta_params(k);
            KsReport::one_sample(format!("x_{k} ~ 2 Beta({a}, {b}) - 1"), &cols[k - 2], |x| beta_cdf(a, b, (1.0 + x) / 2.0))
        })
        .collect()
}

/// Two-sample KS tests between the cube coordinates of Haar SO(n) samples
/// and coordinates drawn from the λ ≡ 0 law.
pub fn finite_level_consistency(n: usize, n_samples: u64, seed: u64) -> Result<Vec<KsReport>> {
    if n < 2 {
        return Err(Error::Domain("n must be at least 2".into()));
    }
    let mut rng = RngStream::new(seed, 0);
    let mut discarded = 0;
    let mut haar_cols = vec![Vec::with_capacity(n_samples as usize); n - 1];
    for _ in 0..n_samples {
        let (_, chain) = haar_with_chain(Group::SO, n, &mut rng, &mut discarded)?;
        for k in 2..=n {
            haar_cols[k - 2].push(chain.x(k).re());
        }
    }
    let sampler = VirtualSampler::new(&LambdaSequence::constant(0.0), n)?;
    let mut rng = RngStream::new(seed, 1);
    let mut virt_cols = vec![Vec::with_capacity(n_samples as usize); n - 1];
    for _ in 0..n_samples {
        let x = sampler.sample(&mut rng);
        for (c, v) in virt_cols.iter_mut().zip(&x.coords) {
            c.push(*v);
        }
    }
    (2..=n)
        .map(|k| KsReport::two_sample(format!("SO({n}) x_{k}: Haar cube coordinate vs virtual sampler"), &haar_cols[k - 2], &virt_cols[k - 2]))
        .collect()
}

/// `w(S) = ∏_j (1 + x_j(S))^{λ_j}` over SO(N) with real λ.
fn weight_of(s: &GroupElement, spec: &ExponentSpec) -> Result<f64> {
    Ok(hua_integrand_chain(&chain_scalars(s)?, spec).re)
}

/// The Radon–Nikodym factor `w(T⁻¹S) / w(S)` for `T: S ↦ diag(1,A) S diag(1,B)`,
/// computed twice: from the full chains, and from the `k x k` matrix
/// `Υ^n(S)` alone (only the last `k` coordinates move).
pub fn rn_chain_ratio(s: &GroupElement, a: &GroupElement, b: &GroupElement, spec: &ExponentSpec) -> Result<(f64, f64)> {
    let k = a.n();
    let n = s.n() - k;
    let back = a.inverse().embed_lower_right(n).mul(s)?.mul(&b.inverse().embed_lower_right(n))?;
    let full = weight_of(&back, spec)? / weight_of(s, spec)?;
    let small_spec = ExponentSpec { lambda: spec.lambda[..k].to_vec(), ..spec.clone() };
    let u = upsilon(s, n)?;
    let moved = &(a.inverse().matrix() * u.matrix()) * b.inverse().matrix();
    let num = hua_integrand_chain(&chain_scalars_matrix(&moved)?, &small_spec).re;
    let den = hua_integrand_chain(&chain_scalars(&u)?, &small_spec).re;
    Ok((full, num / den))
}

/// Test functions for quasi-invariance: `tr S`, `S_NN`, `S_NN²`.
fn qi_functions(s: &GroupElement) -> [f64; 3] {
    let m = s.matrix();
    let last = m.get(m.rows() - 1, m.cols() - 1).re();
    [m.trace().re(), last, last * last]
}

/// `E_ν[f(TS)] = E_ν[f(S) · w(T⁻¹S)/w(S)]` for the Hua–Pickrell measure
/// `ν ∝ w dσ` on SO(n + k), estimated with Haar samples weighted by `w`.
/// Each report holds the paired difference of the two sides (expected 0).
pub fn quasi_invariance_mc(
    lambda: &[f64],
    a: &GroupElement,
    b: &GroupElement,
    n_samples: u64,
    shards: usize,
    seed: u64,
) -> Result<Vec<ComparisonReport>> {
    let spec = ExponentSpec::new(AlgebraTag::R, lambda);
    spec.check_convergence()?;
    let size = spec.n();
    let k = a.n();
    if b.n() != k || k >= size || a.group() != Group::SO || b.group() != Group::SO {
        return Err(Error::dim("quasi_invariance_mc", "A, B must lie in SO(k) with k < N"));
    }
    let n = size - k;
    let (ta, tb) = (a.embed_lower_right(n), b.embed_lower_right(n));
    let (ia, ib) = (a.inverse().embed_lower_right(n), b.inverse().embed_lower_right(n));
    let parts = run_shards(n_samples, shards, seed, |rng, count| {
        let mut diffs = [McEstimate::new(); 3];
        let mut norm = McEstimate::new();
        for _ in 0..count {
            let s = haar_unitary(Group::SO, size, rng)?;
            let moved = ta.mul(&s)?.mul(&tb)?;
            let back = ia.mul(&s)?.mul(&ib)?;
            let (w, w_back) = match (weight_of(&s, &spec), weight_of(&back, &spec)) {
                (Ok(w), Ok(wb)) => (w, wb),
                (Err(e), _) | (_, Err(e)) if e.is_singular() => {
                    diffs[0].discarded += 1;
                    continue;
                }
                (Err(e), _) | (_, Err(e)) => return Err(e),
            };
            let f_moved = qi_functions(&moved);
            let f_here = qi_functions(&s);
            for i in 0..3 {
                diffs[i].push_real(w * f_moved[i] - w_back * f_here[i]);
            }
            norm.push_real(w);
        }
        Ok((diffs, norm))
    })?;
    let norm = parts.iter().fold(McEstimate::new(), |acc, p| acc.merge(&p.1)).mean.re;
    let names = ["tr S", "S_NN", "S_NN^2"];
    Ok((0..3)
        .map(|i| {
            let mut d = parts.iter().fold(McEstimate::new(), |acc, p| acc.merge(&p.0[i]));
            // express in units of the normalised measure
            d.mean /= norm;
            d.m2 /= norm * norm;
            ComparisonReport::against_value(
                format!("SO({size}), k={k}: E[f(TS)] - E[f(S) RN(S)], f = {}", names[i]),
                d,
                Complex64::new(0.0, 0.0),
            )
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::montecarlo::z_score;

    #[test]
    fn parse_laws() {
        let l = LambdaSequence::parse_deviations(1.0, "2:0.5, 5:-0.25").unwrap().with_rule(DeviationRule::parse("geometric:0.5").unwrap());
        assert_eq!(l.lambda_k(2), 1.0 + 0.5 + 0.25);
        assert_eq!(l.lambda_k(5), 1.0 - 0.25 + 0.5f64.powi(5));
        assert_eq!(l.lambda_k(7), 1.0 + 0.5f64.powi(7));
        assert!(LambdaSequence::parse_deviations(0.0, "2").is_err());
        assert!(DeviationRule::parse("cubic").is_err());
        assert!(LambdaSequence::constant(-0.6).validate(5).is_err());
        assert!(LambdaSequence::constant(0.0).with_deviation(3, -1.5).validate(5).is_err());
    }

    #[test]
    fn phi_examples() {
        let law = LambdaSequence::constant(0.4);
        let x = VirtualElement { k_max: 5, coords: vec![0.1, -0.3, 0.7, 0.2] };
        assert_eq!(phi(&x, &law).unwrap(), 1.0);
        let law = LambdaSequence::constant(0.0).with_deviation(2, 0.5).with_deviation(4, 1.5).with_deviation(1, 0.25);
        let ones = VirtualElement { k_max: 5, coords: vec![1.0; 4] };
        assert!((phi(&ones, &law).unwrap() - 2f64.powf(0.25 + 0.5 + 1.5)).abs() < 1e-14);
        let neg = LambdaSequence::constant(0.0).with_deviation(3, -0.5);
        let edge = VirtualElement { k_max: 3, coords: vec![0.0, -1.0] };
        assert!(phi(&edge, &neg).is_err());
    }

    #[test]
    fn phi_is_multiplicative_over_disjoint_supports() {
        let a = LambdaSequence::constant(0.5).with_deviation(2, 0.3).with_deviation(4, -0.2);
        let b = LambdaSequence::constant(0.5).with_deviation(3, 1.1).with_deviation(6, 0.7);
        let mut both = a.clone();
        for (k, d) in &b.deviations {
            both = both.with_deviation(*k, *d);
        }
        let mut rng = RngStream::new(1, 0);
        for _ in 0..100 {
            let x = sample_virtual(&LambdaSequence::constant(0.5), 8, &mut rng).unwrap();
            let lhs = phi(&x, &both).unwrap();
            let rhs = phi(&x, &a).unwrap() * phi(&x, &b).unwrap();
            assert!((lhs - rhs).abs() <= 1e-14 * lhs.abs());
        }
    }

    #[test]
    fn lambda2_mean() {
        // (1+x_2)/2 ~ Beta(3/2, 1/2): E x_2 = 1/2
        let law = LambdaSequence::constant(0.0).with_deviation(2, 1.0);
        let sampler = VirtualSampler::new(&law, 2).unwrap();
        let mut rng = RngStream::new(2, 0);
        let mut e = McEstimate::new();
        for _ in 0..50_000 {
            e.push_real(sampler.sample(&mut rng).x(2));
        }
        assert!(z_score(e.mean, Complex64::new(0.5, 0.0), e.stderr()) < 4.0);
    }

    #[test]
    fn zero_deviation_integral_is_exact() {
        let r = phi_integral_mc(&LambdaSequence::constant(1.3), 10, 1000, 2, 3).unwrap();
        assert_eq!(r.estimate.mean, Complex64::new(1.0, 0.0));
        assert_eq!(r.reference, Complex64::new(1.0, 0.0));
        assert!(r.pass);
    }

    #[test]
    fn truncation_zero_deviation() {
        let rows = truncation_diagnostic(&LambdaSequence::constant(0.0), &[2, 4, 8], 1000, 2, 1).unwrap();
        assert!(rows.iter().all(|r| r.delta == 0.0 && r.mean == 1.0));
    }

    #[test]
    fn rn_ratio_two_ways() {
        let mut rng = RngStream::new(5, 0);
        let spec = ExponentSpec::new(AlgebraTag::R, &[0.0, 0.7, 1.2, 0.4, 0.9]);
        for _ in 0..20 {
            let s = haar_unitary(Group::SO, 5, &mut rng).unwrap();
            let a = haar_unitary(Group::SO, 2, &mut rng).unwrap();
            let b = haar_unitary(Group::SO, 2, &mut rng).unwrap();
            let (full, small) = rn_chain_ratio(&s, &a, &b, &spec).unwrap();
            assert!((full - small).abs() <= 1e-9 * full.abs().max(1.0), "{full} vs {small}");
        }
    }
}
