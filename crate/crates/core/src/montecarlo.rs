//! Sharded Monte Carlo estimators and the statistical tests used to compare
//! them with closed forms.
//!
//! A job of `N` samples is split into `shards` pieces; shard `k` draws from
//! `RngStream::new(seed, k)` and the partial estimates are merged in shard
//! order, so results depend on `(seed, shards)` only, never on the number
//! of worker threads.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::closedform::{ball_constant, radial_density, ClosedFormValue, ExponentSpec};
use crate::error::{Error, Result};
use crate::haar::haar_unitary;
use crate::matlin::{block_upper_left, hermitian_pd_det, GroupElement, KMatrix};
use crate::quadrature::integrate_2d;
use crate::rng::RngStream;
use crate::scalar::{AlgebraTag, Group, Scalar};
use crate::upsilon::{chain_scalars, chain_scalars_matrix, hua_integrand_chain, theta_integrand_chain, upsilon, ChainScalars};

/// Default `|z|` threshold for comparisons.
pub const Z_THRESHOLD: f64 = 4.0;

/// Discard fraction above which a report carries a warning.
pub const DISCARD_WARN_RATE: f64 = 1e-3;

/// Streaming mean and variance (Welford), mergeable across shards.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: Complex64,
    /// `Σ |x_i - mean|²`.
    pub m2: f64,
    pub samples: u64,
    /// Draws rejected because a pivot was (numerically) singular.
    pub discarded: u64,
}

impl McEstimate {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: Complex64) {
        self.samples += 1;
        let delta = x - self.mean;
        self.mean += delta / self.samples as f64;
        let delta2 = x - self.mean;
        self.m2 += delta.re * delta2.re + delta.im * delta2.im;
    }

    pub fn push_real(&mut self, x: f64) {
        self.push(Complex64::new(x, 0.0))
    }

    /// Parallel combine (Chan et al.).
    pub fn merge(&self, other: &McEstimate) -> McEstimate {
        let (na, nb) = (self.samples as f64, other.samples as f64);
        let discarded = self.discarded + other.discarded;
        if self.samples == 0 {
            return McEstimate { discarded, ..*other };
        }
        if other.samples == 0 {
            return McEstimate { discarded, ..*self };
        }
        let n = na + nb;
        let delta = other.mean - self.mean;
        McEstimate {
            mean: self.mean + delta * (nb / n),
            m2: self.m2 + other.m2 + delta.norm_sqr() * na * nb / n,
            samples: self.samples + other.samples,
            discarded,
        }
    }

    /// Sample variance of `|x - mean|`.
    pub fn variance(&self) -> f64 {
        if self.samples < 2 {
            0.0
        } else {
            self.m2 / (self.samples - 1) as f64
        }
    }

    pub fn stderr(&self) -> f64 {
        if self.samples < 2 {
            0.0
        } else {
            (self.variance() / self.samples as f64).sqrt()
        }
    }

    pub fn discard_rate(&self) -> f64 {
        let total = self.samples + self.discarded;
        if total == 0 {
            0.0
        } else {
            self.discarded as f64 / total as f64
        }
    }
}

/// One Monte Carlo value compared with a reference value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub name: String,
    pub estimate: McEstimate,
    pub stderr: f64,
    pub reference: Complex64,
    /// Zero for exact references, the other side's error for two-sided tests.
    pub reference_stderr: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub closed_form: Option<ClosedFormValue>,
    pub z_score: f64,
    pub threshold: f64,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Relative gap below which a zero-variance estimate counts as exact.
pub const EXACT_REL_TOL: f64 = 1e-12;

/// `|a - b| / se`. With `se = 0` the estimate is an exact evaluation: the
/// score is 0 when `a` and `b` agree to rounding and infinite otherwise.
pub fn z_score(a: Complex64, b: Complex64, se: f64) -> f64 {
    let d = (a - b).norm();
    if se > 0.0 {
        d / se
    } else if d <= EXACT_REL_TOL * a.norm().max(b.norm()).max(1.0) {
        0.0
    } else {
        f64::INFINITY
    }
}

impl ComparisonReport {
    pub fn against_value(name: impl Into<String>, estimate: McEstimate, reference: Complex64) -> Self {
        let se = estimate.stderr();
        let z = z_score(estimate.mean, reference, se);
        let mut r = ComparisonReport {
            name: name.into(),
            estimate,
            stderr: se,
            reference,
            reference_stderr: 0.0,
            closed_form: None,
            z_score: z,
            threshold: Z_THRESHOLD,
            pass: z <= Z_THRESHOLD,
            warnings: Vec::new(),
        };
        r.warn_on_discards(&estimate);
        r
    }

    pub fn against_closed_form(name: impl Into<String>, estimate: McEstimate, cf: ClosedFormValue) -> Self {
        let mut r = Self::against_value(name, estimate, cf.to_complex());
        r.closed_form = Some(cf);
        r
    }

    /// Two independent estimates of the same quantity.
    pub fn two_sided(name: impl Into<String>, estimate: McEstimate, reference: McEstimate) -> Self {
        Self::two_sided_values(name, estimate, estimate.stderr(), reference.mean, reference.stderr())
    }

    /// Like [`Self::two_sided`] with explicitly supplied standard errors.
    pub fn two_sided_values(
        name: impl Into<String>,
        estimate: McEstimate,
        se: f64,
        reference: Complex64,
        reference_se: f64,
    ) -> Self {
        let z = z_score(estimate.mean, reference, se.hypot(reference_se));
        let mut r = ComparisonReport {
            name: name.into(),
            estimate,
            stderr: se,
            reference,
            reference_stderr: reference_se,
            closed_form: None,
            z_score: z,
            threshold: Z_THRESHOLD,
            pass: z <= Z_THRESHOLD,
            warnings: Vec::new(),
        };
        r.warn_on_discards(&estimate);
        r
    }

    fn warn_on_discards(&mut self, e: &McEstimate) {
        if e.discard_rate() > DISCARD_WARN_RATE {
            self.warnings.push(format!("discard rate {:.2e} exceeds {DISCARD_WARN_RATE:e}", e.discard_rate()));
        }
    }
}

/// Kolmogorov–Smirnov statistic and asymptotic p-value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KsReport {
    pub name: String,
    pub statistic: f64,
    pub p_value: f64,
    pub samples: usize,
    pub threshold: f64,
    pub pass: bool,
}

/// p-value threshold used for distribution-level checks.
pub const KS_P_THRESHOLD: f64 = 1e-3;

pub const KS_MIN_SAMPLES: usize = 100;

/// Survival function of the Kolmogorov distribution, `P(K > t)`.
pub fn kolmogorov_sf(t: f64) -> f64 {
    if t <= 0.0 {
        return 1.0;
    }
    if t < 1.18 {
        // P(K <= t) = √(2π)/t Σ exp(-(2k-1)²π²/(8t²))
        let s: f64 = (1..=20)
            .map(|k| {
                let a = (2 * k - 1) as f64 * std::f64::consts::PI;
                (-(a * a) / (8.0 * t * t)).exp()
            })
            .sum();
        (1.0 - (2.0 * std::f64::consts::PI).sqrt() / t * s).clamp(0.0, 1.0)
    } else {
        let s: f64 = (1..=100)
            .map(|k| {
                let k = k as f64;
                let sign = if k as u64 % 2 == 1 { 1.0 } else { -1.0 };
                sign * (-2.0 * k * k * t * t).exp()
            })
            .sum();
        (2.0 * s).clamp(0.0, 1.0)
    }
}

/// Effective-size corrected scaling `(√n + 0.12 + 0.11/√n) D`.
fn ks_p_value(d: f64, n_eff: f64) -> f64 {
    let sn = n_eff.sqrt();
    kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d)
}

/// One-sample KS test of `samples` against a continuous `cdf`.
pub fn ks_test(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<(f64, f64)> {
    let n = samples.len();
    if n < KS_MIN_SAMPLES {
        return Err(Error::Domain(format!("KS test needs at least {KS_MIN_SAMPLES} samples (got {n})")));
    }
    let mut xs = samples.to_vec();
    if xs.iter().any(|x| x.is_nan()) {
        return Err(Error::Domain("KS test: NaN sample".into()));
    }
    xs.sort_by(f64::total_cmp);
    let nf = n as f64;
    let mut d = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i + 1) as f64 / nf - f).max(f - i as f64 / nf);
    }
    Ok((d, ks_p_value(d, nf)))
}

/// Two-sample KS test.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    if a.len() < KS_MIN_SAMPLES || b.len() < KS_MIN_SAMPLES {
        return Err(Error::Domain(format!("KS test needs at least {KS_MIN_SAMPLES} samples per side")));
    }
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let (na, nb) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < xs.len() && j < ys.len() {
        let x = xs[i].min(ys[j]);
        while i < xs.len() && xs[i] <= x {
            i += 1;
        }
        while j < ys.len() && ys[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok((d, ks_p_value(d, na * nb / (na + nb))))
}

impl KsReport {
    pub fn one_sample(name: impl Into<String>, samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<Self> {
        let (statistic, p_value) = ks_test(samples, cdf)?;
        Ok(Self::from_parts(name, statistic, p_value, samples.len()))
    }

    pub fn two_sample(name: impl Into<String>, a: &[f64], b: &[f64]) -> Result<Self> {
        let (statistic, p_value) = ks_two_sample(a, b)?;
        Ok(Self::from_parts(name, statistic, p_value, a.len().min(b.len())))
    }

    fn from_parts(name: impl Into<String>, statistic: f64, p_value: f64, samples: usize) -> Self {
        KsReport { name: name.into(), statistic, p_value, samples, threshold: KS_P_THRESHOLD, pass: p_value >= KS_P_THRESHOLD }
    }
}

/// Regularised incomplete Beta `I_t(a, b)`, clamped to `t ∈ [0, 1]`.
pub fn beta_cdf(a: f64, b: f64, t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        beta_reg(a, b, t)
    }
}

/// Worker-thread cap from `HUA_LAB_THREADS` (unset: rayon's default).
pub fn thread_cap() -> Option<usize> {
    std::env::var("HUA_LAB_THREADS").ok()?.trim().parse().ok().filter(|&n| n > 0)
}

/// Runs `shards` independent pieces of a job of `total` units and returns
/// the per-shard results in shard order.
pub fn run_shards<T: Send>(
    total: u64,
    shards: usize,
    seed: u64,
    work: impl Fn(&mut RngStream, u64) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    let shards = shards.max(1);
    let per = total / shards as u64;
    let extra = total % shards as u64;
    let job = || {
        (0..shards)
            .into_par_iter()
            .map(|k| {
                let count = per + u64::from((k as u64) < extra);
                work(&mut RngStream::new(seed, k as u64), count)
            })
            .collect::<Result<Vec<T>>>()
    };
    match thread_cap() {
        Some(threads) => rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Numeric(format!("thread pool: {e}")))?
            .install(job),
        None => job(),
    }
}

fn merge_all(parts: &[McEstimate]) -> McEstimate {
    parts.iter().fold(McEstimate::new(), |acc, p| acc.merge(p))
}

/// Default number of shards.
pub const DEFAULT_SHARDS: usize = 16;

/// A Haar sample whose elimination chain exists; singular draws are counted
/// in `discarded` and redrawn.
pub fn haar_with_chain(group: Group, n: usize, rng: &mut RngStream, discarded: &mut u64) -> Result<(GroupElement, ChainScalars)> {
    loop {
        let g = haar_unitary(group, n, rng)?;
        match chain_scalars(&g) {
            Ok(c) => return Ok((g, c)),
            Err(e) if e.is_singular() => *discarded += 1,
            Err(e) => return Err(e),
        }
    }
}

fn group_mc(
    spec: &ExponentSpec,
    n_samples: u64,
    shards: usize,
    seed: u64,
    f: fn(&ChainScalars, &ExponentSpec) -> Complex64,
) -> Result<McEstimate> {
    spec.check_convergence()?;
    let group = spec.algebra.group();
    let n = spec.n();
    let parts = run_shards(n_samples, shards, seed, |rng, count| {
        let mut est = McEstimate::new();
        for _ in 0..count {
            let (_, chain) = haar_with_chain(group, n, rng, &mut est.discarded)?;
            est.push(f(&chain, spec));
        }
        Ok(est)
    })?;
    Ok(merge_all(&parts))
}

/// Haar average of the group integrand.
pub fn group_integral_mc(spec: &ExponentSpec, n_samples: u64, shards: usize, seed: u64) -> Result<McEstimate> {
    group_mc(spec, n_samples, shards, seed, hua_integrand_chain)
}

/// Haar average of the θ-weighted integrand.
pub fn theta_integral_mc(spec: &ExponentSpec, n_samples: u64, shards: usize, seed: u64) -> Result<McEstimate> {
    group_mc(spec, n_samples, shards, seed, theta_integrand_chain)
}

/// Largest `m δ` for which ball rejection sampling is attempted.
pub const BALL_MAX_M_DELTA: usize = 8;

/// Minimum acceptance rate for ball rejection sampling.
pub const BALL_MIN_ACCEPTANCE: f64 = 1e-4;

const BALL_MAX_DRAWS: u64 = 1_000_000;

fn ball_guard(algebra: AlgebraTag, m: usize) -> Result<()> {
    if m == 0 {
        return Err(Error::dim("ball", "m must be at least 1"));
    }
    if m * algebra.dim() > BALL_MAX_M_DELTA {
        return Err(Error::Feasibility(format!(
            "rejection sampling on B_{m}({algebra}) needs m·dim K <= {BALL_MAX_M_DELTA}; use a smaller m"
        )));
    }
    Ok(())
}

/// A uniform point of the matrix ball with `det(1 - Z*Z)` and the number of
/// cube draws it took.
#[derive(Debug, Clone, PartialEq)]
pub struct BallSample {
    pub z: KMatrix,
    pub defect_det: f64,
    pub draws: u64,
}

/// One cube draw; `Some(det(1 - Z*Z))` when it lies in the ball.
fn ball_draw(algebra: AlgebraTag, m: usize, rng: &mut RngStream) -> (KMatrix, Option<f64>) {
    let d = algebra.dim();
    let z = KMatrix::from_fn(algebra, m, m, |_, _| {
        let mut s = Scalar::ZERO;
        for c in &mut s.c[..d] {
            *c = 2.0 * rng.uniform() - 1.0;
        }
        s
    });
    let zz = &z.adjoint() * &z;
    let defect = hermitian_pd_det(&zz.identity_minus());
    (z, defect)
}

/// Uniform sample of `{Z : ‖Z‖ < 1}` by rejection from the cube `[-1,1]^{δm²}`.
pub fn ball_uniform_sample(algebra: AlgebraTag, m: usize, rng: &mut RngStream) -> Result<BallSample> {
    ball_guard(algebra, m)?;
    for draws in 1..=BALL_MAX_DRAWS {
        if let (z, Some(defect_det)) = ball_draw(algebra, m, rng) {
            return Ok(BallSample { z, defect_det, draws });
        }
    }
    Err(Error::Feasibility(format!(
        "no point of B_{m}({algebra}) in {BALL_MAX_DRAWS} draws: acceptance below {BALL_MIN_ACCEPTANCE:e}"
    )))
}

/// Result of a ball integral estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallEstimate {
    /// Estimate of the Lebesgue integral (cube volume times the mean over all draws).
    pub estimate: McEstimate,
    pub accepted: u64,
    pub draws: u64,
    pub acceptance_rate: f64,
}

/// `∫_{B_m(K)} det(1 - Z*Z)^{τ-1} ∏_p d_p(Z)^{λ_{m-p+1}} dZ`, where `d_p` are
/// the elimination pivots of `1 + Z` (so the product is
/// `∏_k det(1+[Z]_{m-k+1})^{λ_k-λ_{k-1}}`). `spec = None` means no λ weight.
///
/// Draws continue until `n_accepted` points of the ball have been seen.
pub fn ball_integral_mc(
    algebra: AlgebraTag,
    m: usize,
    tau: f64,
    spec: Option<&ExponentSpec>,
    n_accepted: u64,
    shards: usize,
    seed: u64,
) -> Result<BallEstimate> {
    ball_guard(algebra, m)?;
    if let Some(s) = spec {
        s.validate()?;
        if s.algebra != algebra || s.n() != m {
            return Err(Error::dim("ball_integral_mc", "spec must have size m over the same algebra"));
        }
    }
    let volume = 2f64.powi((algebra.dim() * m * m) as i32);
    let parts = run_shards(n_accepted, shards, seed, |rng, quota| {
        let mut est = McEstimate::new();
        let mut accepted = 0u64;
        let mut since_last = 0u64;
        while accepted < quota {
            let (z, defect) = ball_draw(algebra, m, rng);
            let Some(defect) = defect else {
                est.push_real(0.0);
                since_last += 1;
                if since_last >= BALL_MAX_DRAWS {
                    return Err(Error::Feasibility(format!("acceptance on B_{m}({algebra}) below {BALL_MIN_ACCEPTANCE:e}")));
                }
                continue;
            };
            since_last = 0;
            let mut v = Complex64::new(volume * defect.powf(tau - 1.0), 0.0);
            if let Some(s) = spec {
                match chain_scalars_matrix(&z) {
                    Ok(chain) => v *= hua_integrand_chain(&chain, s),
                    Err(e) if e.is_singular() => {
                        est.discarded += 1;
                        continue;
                    }
                    Err(e) => return Err(e),
                }
            }
            est.push(v);
            accepted += 1;
        }
        Ok((est, accepted))
    })?;
    let estimate = merge_all(&parts.iter().map(|p| p.0).collect::<Vec<_>>());
    let accepted: u64 = parts.iter().map(|p| p.1).sum();
    let draws = estimate.samples;
    Ok(BallEstimate { estimate, accepted, draws, acceptance_rate: accepted as f64 / draws.max(1) as f64 })
}

/// Reference value `∫_{B_m} det(1-Z*Z)^{τ-1} dZ` for [`ball_integral_mc`].
pub fn ball_reference(algebra: AlgebraTag, m: usize, tau: f64) -> Result<ClosedFormValue> {
    ball_constant(algebra, m, tau)
}

/// Streaming sums for a correlation coefficient.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSums {
    pub n: u64,
    pub sa: f64,
    pub sb: f64,
    pub saa: f64,
    pub sbb: f64,
    pub sab: f64,
}

impl CorrelationSums {
    pub fn push(&mut self, a: f64, b: f64) {
        self.n += 1;
        self.sa += a;
        self.sb += b;
        self.saa += a * a;
        self.sbb += b * b;
        self.sab += a * b;
    }

    pub fn merge(&self, o: &CorrelationSums) -> CorrelationSums {
        CorrelationSums {
            n: self.n + o.n,
            sa: self.sa + o.sa,
            sb: self.sb + o.sb,
            saa: self.saa + o.saa,
            sbb: self.sbb + o.sbb,
            sab: self.sab + o.sab,
        }
    }

    /// Pearson correlation, `None` if either side is constant.
    pub fn correlation(&self) -> Option<f64> {
        let n = self.n as f64;
        let va = self.saa / n - (self.sa / n).powi(2);
        let vb = self.sbb / n - (self.sb / n).powi(2);
        if !(va > 1e-14 && vb > 1e-14) {
            return None;
        }
        Some((self.sab / n - self.sa / n * self.sb / n) / (va * vb).sqrt())
    }
}

/// Everything [`pushforward_haar_test`] checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PushforwardReport {
    pub group: Group,
    pub n: usize,
    pub m: usize,
    pub moments: Vec<ComparisonReport>,
    pub ks: Vec<KsReport>,
    /// `√N · r` for a bounded statistic of `Υ^m(g)` against one of `[g]_m`;
    /// `None` when the first is constant (SO(1)).
    pub independence_z: Option<f64>,
    pub pass: bool,
}

/// Bounded statistics of a unitary matrix used for moment comparisons.
fn unitary_stats(h: &KMatrix) -> [f64; 4] {
    let tr = h.trace();
    let h11 = h.get(0, 0);
    [tr.re(), tr.norm_sqr(), h11.norm_sqr(), (h11 * h11).re()]
}

const UNITARY_STAT_NAMES: [&str; 4] = ["Re tr h", "|tr h|^2", "|h_11|^2", "Re h_11^2"];

/// Law of `(1 + g_11)/2` over SO(n) and of `|g_11|²` otherwise: Beta(a, b).
pub fn corner_entry_beta(group: Group, n: usize) -> (f64, f64) {
    let nf = n as f64;
    match group {
        Group::SO => ((nf - 1.0) / 2.0, (nf - 1.0) / 2.0),
        _ => {
            let d = group.algebra().delta();
            (d / 2.0, (nf - 1.0) * d / 2.0)
        }
    }
}

/// Expected moments of `ZᵀZ` for the `2 x 2` corner of SO(n), from the
/// singular-value density: `E tr ZᵀZ`, `E det ZᵀZ`, `E tr (ZᵀZ)²`.
pub fn corner2_moments_so(n: usize) -> Result<[f64; 3]> {
    let rho = |r1: f64, r2: f64| radial_density(AlgebraTag::R, n, 2, &[r1, r2]).unwrap_or(0.0);
    let tol = 1e-10;
    let z = integrate_2d(rho, 0.0, 1.0, |_| 0.0, |r1| r1, tol)?;
    let mom = |f: fn(f64, f64) -> f64| integrate_2d(|a, b| f(a, b) * rho(a, b), 0.0, 1.0, |_| 0.0, |r1| r1, tol);
    Ok([
        mom(|a, b| a * a + b * b)? / z,
        mom(|a, b| a * a * b * b)? / z,
        mom(|a, b| a.powi(4) + b.powi(4))? / z,
    ])
}

/// Checks that `Υ^m` pushes Haar forward to Haar, the law of the corner
/// block, and the independence of the two.
pub fn pushforward_haar_test(group: Group, n: usize, m: usize, n_samples: u64, shards: usize, seed: u64) -> Result<PushforwardReport> {
    if m == 0 || m >= n {
        return Err(Error::dim("pushforward_haar_test", format!("need 1 <= m < n (m={m}, n={n})")));
    }
    let keep_corner = m == 1 && n_samples as usize >= KS_MIN_SAMPLES;
    struct Part {
        pushed: [McEstimate; 4],
        direct: [McEstimate; 4],
        corner: Vec<f64>,
        corner2: [McEstimate; 3],
        second_moment: McEstimate,
        corr: CorrelationSums,
    }
    let parts = run_shards(n_samples, shards, seed, |rng, count| {
        let mut p = Part {
            pushed: [McEstimate::new(); 4],
            direct: [McEstimate::new(); 4],
            corner: Vec::new(),
            corner2: [McEstimate::new(); 3],
            second_moment: McEstimate::new(),
            corr: CorrelationSums::default(),
        };
        for _ in 0..count {
            let (g, h) = loop {
                let g = haar_unitary(group, n, rng)?;
                match upsilon(&g, m) {
                    Ok(h) => break (g, h),
                    Err(e) if e.is_singular() => p.pushed[0].discarded += 1,
                    Err(e) => return Err(e),
                }
            };
            let hs = unitary_stats(h.matrix());
            for (e, v) in p.pushed.iter_mut().zip(hs) {
                e.push_real(v);
            }
            let direct = haar_unitary(group, n - m, rng)?;
            for (e, v) in p.direct.iter_mut().zip(unitary_stats(direct.matrix())) {
                e.push_real(v);
            }
            let block = block_upper_left(g.matrix(), m)?;
            let b11 = block.get(0, 0);
            p.second_moment.push_real(b11.norm_sqr());
            if keep_corner {
                p.corner.push(if group == Group::SO { b11.re() } else { b11.norm_sqr() });
            }
            if m == 2 && group == Group::SO {
                let zz = &block.adjoint() * &block;
                let (a, b, d) = (zz.get(0, 0).re(), zz.get(1, 1).re(), zz.get(0, 1).re());
                p.corner2[0].push_real(a + b);
                p.corner2[1].push_real(a * b - d * d);
                p.corner2[2].push_real(a * a + b * b + 2.0 * d * d);
            }
            p.corr.push(hs[0], block.trace().re());
        }
        Ok(p)
    })?;

    let fold = |sel: &dyn Fn(&Part) -> McEstimate| merge_all(&parts.iter().map(sel).collect::<Vec<_>>());
    let mut moments = Vec::new();
    for i in 0..4 {
        let a = fold(&|p: &Part| p.pushed[i]);
        let b = fold(&|p: &Part| p.direct[i]);
        moments.push(ComparisonReport::two_sided(
            format!("{group}({n}) m={m}: {} of Υ^m(g) vs Haar {group}({})", UNITARY_STAT_NAMES[i], n - m),
            a,
            b,
        ));
    }
    moments.push(ComparisonReport::against_value(
        format!("{group}({n}): E|g_11|^2 = 1/n"),
        fold(&|p: &Part| p.second_moment),
        Complex64::new(1.0 / n as f64, 0.0),
    ));
    if m == 2 && group == Group::SO && n >= 4 {
        let expect = corner2_moments_so(n)?;
        let names = ["tr Z^T Z", "det Z^T Z", "tr (Z^T Z)^2"];
        for i in 0..3 {
            moments.push(ComparisonReport::against_value(
                format!("SO({n}) corner 2x2: E {}", names[i]),
                fold(&|p: &Part| p.corner2[i]),
                Complex64::new(expect[i], 0.0),
            ));
        }
    }

    let mut ks = Vec::new();
    if keep_corner {
        let corner: Vec<f64> = parts.iter().flat_map(|p| p.corner.iter().copied()).collect();
        let (a, b) = corner_entry_beta(group, n);
        let report = if group == Group::SO {
            KsReport::one_sample(format!("SO({n}): (1+g_11)/2 ~ Beta({a}, {b})"), &corner, |x| beta_cdf(a, b, (1.0 + x) / 2.0))?
        } else {
            KsReport::one_sample(format!("{group}({n}): |g_11|^2 ~ Beta({a}, {b})"), &corner, |x| beta_cdf(a, b, x))?
        };
        ks.push(report);
    }

    let corr = parts.iter().fold(CorrelationSums::default(), |acc, p| acc.merge(&p.corr));
    let independence_z = corr.correlation().map(|r| r.abs() * (corr.n as f64).sqrt());
    let pass = moments.iter().all(|r| r.pass) && ks.iter().all(|r| r.pass) && independence_z.is_none_or(|z| z <= Z_THRESHOLD);
    Ok(PushforwardReport { group, n, m, moments, ks, independence_z, pass })
}

/// Per-coordinate KS tests of the cube coordinates of Haar SO(n) against
/// `x_j ~ 2 Beta((j-1)/2, (j-1)/2) - 1`.
pub fn cube_law_ks(n: usize, n_samples: u64, shards: usize, seed: u64) -> Result<Vec<KsReport>> {
    if n < 2 {
        return Err(Error::dim("cube_law_ks", "n must be at least 2"));
    }
    let parts = run_shards(n_samples, shards, seed, |rng, count| {
        let mut cols = vec![Vec::with_capacity(count as usize); n - 1];
        let mut discarded = 0;
        for _ in 0..count {
            let (_, chain) = haar_with_chain(Group::SO, n, rng, &mut discarded)?;
            for (j, col) in (2..=n).zip(cols.iter_mut()) {
                col.push(chain.x(j).re());
            }
        }
        Ok(cols)
    })?;
    (2..=n)
        .map(|j| {
            let col: Vec<f64> = parts.iter().flat_map(|p| p[j - 2].iter().copied()).collect();
            let a = (j as f64 - 1.0) / 2.0;
            KsReport::one_sample(format!("SO({n}) x_{j} ~ 2 Beta({a}, {a}) - 1"), &col, |x| beta_cdf(a, a, (1.0 + x) / 2.0))
        })
        .collect()
}

/// Test functions for the consistency check: `Re tr h`, `Re h_11`,
/// `|h_11|²`, `Re h_11²`, `|tr h|²`.
pub fn consistency_test_functions(h: &KMatrix) -> [f64; 5] {
    let tr = h.trace();
    let h11 = h.get(0, 0);
    [tr.re(), h11.re(), h11.norm_sqr(), (h11 * h11).re(), tr.norm_sqr()]
}

pub const CONSISTENCY_FUNCTION_NAMES: [&str; 5] = ["Re tr h", "Re h_11", "|h_11|^2", "Re h_11^2", "|tr h|^2"];

/// Sums for a self-normalised importance-sampling ratio `Σ w f / Σ w`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct RatioSums {
    n: u64,
    sw: f64,
    sw2: f64,
    swf: [f64; 5],
    sw2f: [f64; 5],
    sw2f2: [f64; 5],
}

impl RatioSums {
    fn push(&mut self, w: f64, f: [f64; 5]) {
        self.n += 1;
        self.sw += w;
        self.sw2 += w * w;
        for i in 0..5 {
            self.swf[i] += w * f[i];
            self.sw2f[i] += w * w * f[i];
            self.sw2f2[i] += w * w * f[i] * f[i];
        }
    }

    fn merge(&self, o: &RatioSums) -> RatioSums {
        let mut r = *self;
        r.n += o.n;
        r.sw += o.sw;
        r.sw2 += o.sw2;
        for i in 0..5 {
            r.swf[i] += o.swf[i];
            r.sw2f[i] += o.sw2f[i];
            r.sw2f2[i] += o.sw2f2[i];
        }
        r
    }

    /// Ratio and its delta-method standard error `√(Σ w²(f-R)²) / Σ w`.
    fn ratio(&self, i: usize) -> (f64, f64) {
        let r = self.swf[i] / self.sw;
        let num = (self.sw2f2[i] - 2.0 * r * self.sw2f[i] + r * r * self.sw2).max(0.0);
        (r, num.sqrt() / self.sw)
    }
}

fn real_weight(spec: &ExponentSpec) -> Result<()> {
    if spec.algebra == AlgebraTag::C {
        for k in 1..=spec.n() {
            if (spec.lambda_k(k).conj() - spec.mu_k(k)).norm() > 0.0 {
                return Err(Error::Domain("the consistency test needs a positive weight: μ_k = conj(λ_k)".into()));
            }
        }
    }
    Ok(())
}

/// Compares the image under `Υ^1` of the weighted measure `w_n dσ_n` with
/// `w_{n-1} dσ_{n-1}` through five bounded test functions. The two sides use
/// disjoint random streams.
pub fn measure_consistency_test(group: Group, spec: &ExponentSpec, n_samples: u64, shards: usize, seed: u64) -> Result<Vec<ComparisonReport>> {
    spec.check_convergence()?;
    real_weight(spec)?;
    let n = spec.n();
    if n < 2 || spec.algebra != group.algebra() {
        return Err(Error::dim("measure_consistency_test", "need n >= 2 and a spec over the group's algebra"));
    }
    let small = spec.truncated();
    let shards = shards.max(1);
    let parts = run_shards(n_samples, shards, seed, |rng, count| {
        let mut lhs = RatioSums::default();
        let mut rhs = RatioSums::default();
        let mut discarded = 0u64;
        // the right-hand side uses a stream disjoint from every left-hand shard
        let mut rng2 = RngStream::new(rng.seed(), rng.stream_id() + (1u64 << 32));
        for _ in 0..count {
            let (g, chain) = haar_with_chain(group, n, rng, &mut discarded)?;
            let w = hua_integrand_chain(&chain, spec).re;
            let h = match upsilon(&g, 1) {
                Ok(h) => h,
                Err(e) if e.is_singular() => {
                    discarded += 1;
                    continue;
                }
                Err(e) => return Err(e),
            };
            lhs.push(w, consistency_test_functions(h.matrix()));
            let (h2, chain2) = haar_with_chain(group, n - 1, &mut rng2, &mut discarded)?;
            let w2 = hua_integrand_chain(&chain2, &small).re;
            rhs.push(w2, consistency_test_functions(h2.matrix()));
        }
        Ok((lhs, rhs, discarded))
    })?;
    let lhs = parts.iter().fold(RatioSums::default(), |a, p| a.merge(&p.0));
    let rhs = parts.iter().fold(RatioSums::default(), |a, p| a.merge(&p.1));
    let discarded: u64 = parts.iter().map(|p| p.2).sum();
    Ok((0..5)
        .map(|i| {
            let (a, sa) = lhs.ratio(i);
            let (b, sb) = rhs.ratio(i);
            let est = McEstimate { mean: Complex64::new(a, 0.0), m2: 0.0, samples: lhs.n, discarded };
            ComparisonReport::two_sided_values(
                format!("{group}({n}): weighted E[{}] of Υ^1(g) vs {group}({})", CONSISTENCY_FUNCTION_NAMES[i], n - 1),
                est,
                sa,
                Complex64::new(b, 0.0),
                sb,
            )
        })
        .collect())
}
