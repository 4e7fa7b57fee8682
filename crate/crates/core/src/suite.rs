//! The acceptance matrix: exact identities, integral checks against closed
//! forms, distributional tests and a determinism check, grouped into nine
//! numbered criteria.
//!
//! Every cell carries its own seed, derived from the suite seed, so a cell
//! can be rerun in isolation. Statistical cells that fail are rerun once with
//! a fresh seed before the failure is reported.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::RngCore;
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta as statrs_beta;
use statrs::function::gamma::ln_gamma;

use crate::closedform::{
    ball_constant, ball_integral_rhs, ball_tau, disk_integral_jn, gauss_2f1_at_1, group_integral_rhs, selberg,
    theorem16_factor, ExponentSpec,
};
use crate::error::{Error, Result};
use crate::haar::{gaussian_kmatrix, haar_unitary};
use crate::matlin::{
    block_lower_right, block_upper_left, det, dissipative_det_identity_check, frobenius_inverse, invert,
    FrobeniusPivot, KMatrix,
};
use crate::montecarlo::{
    ball_integral_mc, cube_law_ks, group_integral_mc, measure_consistency_test, pushforward_haar_test,
    ComparisonReport, KsReport, KS_P_THRESHOLD, Z_THRESHOLD,
};
use crate::quadrature::integrate_2d;
use crate::rng::RngStream;
use crate::scalar::{AlgebraTag, Group};
use crate::upsilon::{
    cayley_block_check, equivariance_check, multiplicativity_check, rel_err, rn_pointwise_check, upsilon_matrix,
};
use crate::virtual_group::{coordinate_ks, finite_level_consistency, phi_integral_mc, quasi_invariance_mc, DeviationRule, LambdaSequence};
use crate::BUILD_ID;

/// Residual bound for exact identities.
pub const IDENTITY_TOL: f64 = 1e-9;
/// Bound for closed-form recursions and constants.
pub const CLOSED_FORM_TOL: f64 = 1e-12;
/// Bound for quadrature cross-checks.
pub const QUADRATURE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    Quick,
    Full,
}

impl Profile {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "quick" => Ok(Profile::Quick),
            "full" => Ok(Profile::Full),
            other => Err(Error::Domain(format!("unknown profile '{other}' (expected quick or full)"))),
        }
    }
}

/// How a cell's value is judged against its threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Pass when `value < threshold`.
    Residual,
    /// Pass when `|value| <= threshold`.
    Z,
    /// Pass when `value >= threshold`.
    PValue,
}

impl Metric {
    fn passes(self, value: f64, threshold: f64) -> bool {
        match self {
            Metric::Residual => value < threshold,
            Metric::Z => value.abs() <= threshold,
            Metric::PValue => value >= threshold,
        }
    }
}

/// One acceptance cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub name: String,
    pub metric: Metric,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
    pub samples: u64,
    pub seed: u64,
    pub rerun: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<serde_json::Value>,
}

impl Cell {
    pub fn new(name: impl Into<String>, metric: Metric, value: f64, threshold: f64) -> Self {
        Cell {
            name: name.into(),
            metric,
            value,
            threshold,
            pass: value.is_finite() && metric.passes(value, threshold),
            samples: 0,
            seed: 0,
            rerun: false,
            error: None,
            detail: None,
        }
    }

    fn failed(name: impl Into<String>, metric: Metric, threshold: f64, err: &Error) -> Self {
        let mut c = Cell::new(name, metric, f64::NAN, threshold);
        c.error = Some(err.to_string());
        c
    }

    fn with_samples(mut self, samples: u64, seed: u64) -> Self {
        self.samples = samples;
        self.seed = seed;
        self
    }

    fn with_detail(mut self, detail: &impl Serialize) -> Self {
        self.detail = serde_json::to_value(detail).ok();
        self
    }

    pub fn from_comparison(r: &ComparisonReport, seed: u64) -> Self {
        let mut c = Cell::new(&r.name, Metric::Z, r.z_score, r.threshold)
            .with_samples(r.estimate.samples, seed)
            .with_detail(r);
        c.pass = r.pass;
        c
    }

    pub fn from_ks(r: &KsReport, seed: u64) -> Self {
        let mut c = Cell::new(&r.name, Metric::PValue, r.p_value, r.threshold)
            .with_samples(r.samples as u64, seed)
            .with_detail(r);
        c.pass = r.pass;
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub id: u8,
    pub title: String,
    pub pass: bool,
    pub cells: Vec<Cell>,
}

impl CriterionReport {
    fn new(id: u8, title: &str, cells: Vec<Cell>) -> Self {
        let pass = !cells.is_empty() && cells.iter().all(|c| c.pass);
        CriterionReport { id, title: title.to_string(), pass, cells }
    }

    /// The worst cell relative to its threshold, for summaries.
    pub fn worst(&self) -> Option<&Cell> {
        self.cells.iter().max_by(|a, b| badness(a).total_cmp(&badness(b)))
    }
}

fn badness(c: &Cell) -> f64 {
    if !c.value.is_finite() {
        return f64::INFINITY;
    }
    match c.metric {
        Metric::Residual | Metric::Z => c.value.abs() / c.threshold,
        Metric::PValue => c.threshold / c.value.max(f64::MIN_POSITIVE),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteOptions {
    pub profile: Profile,
    pub seed: u64,
    pub shards: usize,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions { profile: Profile::Quick, seed: 20_240_601, shards: crate::montecarlo::DEFAULT_SHARDS }
    }
}

impl SuiteOptions {
    fn mc_samples(&self) -> u64 {
        match self.profile {
            Profile::Quick => 100_000,
            Profile::Full => 1_000_000,
        }
    }

    /// Seed of cell `index` in criterion `criterion`.
    pub fn cell_seed(&self, criterion: u8, index: u64) -> u64 {
        RngStream::new(self.seed, (u64::from(criterion) << 32) | index).next_u64()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub schema: u32,
    pub build: String,
    pub options: SuiteOptions,
    pub pass: bool,
    pub criteria: Vec<CriterionReport>,
}

impl SuiteReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("suite reports serialize")
    }

    /// One CSV row per cell.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Numeric(format!("csv: {e}"));
        w.write_record(["criterion", "cell", "metric", "value", "threshold", "pass", "samples", "seed", "rerun", "error"])
            .map_err(io)?;
        for c in &self.criteria {
            for cell in &c.cells {
                let metric = match cell.metric {
                    Metric::Residual => "residual",
                    Metric::Z => "z",
                    Metric::PValue => "p_value",
                };
                w.write_record([
                    c.id.to_string(),
                    cell.name.clone(),
                    metric.to_string(),
                    format!("{:e}", cell.value),
                    format!("{:e}", cell.threshold),
                    cell.pass.to_string(),
                    cell.samples.to_string(),
                    cell.seed.to_string(),
                    cell.rerun.to_string(),
                    cell.error.clone().unwrap_or_default(),
                ])
                .map_err(io)?;
            }
        }
        w.flush().map_err(|e| Error::Numeric(format!("csv: {e}")))
    }

    /// Fixed-width summary, one line per criterion.
    pub fn summary_table(&self) -> String {
        let mut s = format!("{:<4}{:<48}{:>7}  {:<8}worst cell\n", "id", "criterion", "cells", "result");
        for c in &self.criteria {
            let worst = c.worst().map(|w| format!("{} ({:?} {:.3e})", w.name, w.metric, w.value)).unwrap_or_default();
            s.push_str(&format!(
                "{:<4}{:<48}{:>7}  {:<8}{}\n",
                c.id,
                c.title,
                c.cells.len(),
                if c.pass { "PASS" } else { "FAIL" },
                worst
            ));
        }
        s
    }
}

/// Runs `f` with the cell seed; if any resulting cell fails, runs it once
/// more with a fresh seed and keeps the second outcome.
fn with_rerun(seed: u64, f: impl Fn(u64) -> Vec<Cell>) -> Vec<Cell> {
    let first = f(seed);
    if first.iter().all(|c| c.pass) {
        return first;
    }
    let fresh = RngStream::new(seed, u64::MAX).next_u64();
    let mut second = f(fresh);
    for c in &mut second {
        c.rerun = true;
    }
    second
}

/// Unwraps a list of cells, turning an error into one failed cell.
fn cells_or_error(name: &str, metric: Metric, threshold: f64, r: Result<Vec<Cell>>) -> Vec<Cell> {
    r.unwrap_or_else(|e| vec![Cell::failed(name, metric, threshold, &e)])
}

/// Redraws on measure-zero singular events.
fn retry_singular<T>(rng: &mut RngStream, mut f: impl FnMut(&mut RngStream) -> Result<T>) -> Result<T> {
    for _ in 0..64 {
        match f(rng) {
            Err(e) if e.is_singular() => continue,
            other => return other,
        }
    }
    Err(Error::Numeric("64 consecutive singular draws".into()))
}

fn mat_rel(a: &KMatrix, b: &KMatrix) -> f64 {
    a.max_abs_diff(b) / a.max_abs().max(b.max_abs()).max(1.0)
}

/// `X` with `X + X*` positive definite.
fn dissipative_matrix(alg: AlgebraTag, n: usize, rng: &mut RngStream) -> KMatrix {
    let a = gaussian_kmatrix(alg, n, rng);
    let b = gaussian_kmatrix(alg, n, rng);
    let h = (&a.adjoint() * &a).scale(0.5 / n as f64).plus_identity().scale(0.5);
    let s = (&b - &b.adjoint()).scale(0.5);
    &h + &s
}

const IDENTITY_NAMES: [&str; 7] = [
    "range: Υ^m(g) unitary",
    "composition Υ^k Υ^m = Υ^(k+m)",
    "Cayley corner block",
    "equivariance",
    "Frobenius block inverse",
    "multiplicativity of det(1+[g]_p)",
    "dissipative determinant identity",
];

const RN_NAME: &str = "Radon-Nikodym pointwise determinant";

/// Residuals of all exact identities for one random instance of size `n`.
fn identity_residuals(group: Group, n: usize, rng: &mut RngStream) -> Result<[f64; 8]> {
    let alg = group.algebra();
    let mut r = [0.0; 8];
    let pick = |rng: &mut RngStream, lo: usize, hi: usize| lo + (rng.next_u64() % (hi - lo + 1) as u64) as usize;

    let (g, m) = retry_singular(rng, |rng| {
        let g = haar_unitary(group, n, rng)?;
        let m = pick(rng, 1, n - 1);
        upsilon_matrix(g.matrix(), m)?;
        Ok((g, m))
    })?;

    // range
    let h = upsilon_matrix(g.matrix(), m)?;
    r[0] = h.unitarity_residual();
    if group == Group::SO {
        r[0] = r[0].max((det(&h)?.re - 1.0).abs());
    }

    // composition
    if n >= 3 {
        let m1 = pick(rng, 1, n - 2);
        let k = pick(rng, 1, n - 1 - m1);
        let inner = upsilon_matrix(g.matrix(), m1)?;
        let lhs = upsilon_matrix(&inner, k)?;
        let rhs = upsilon_matrix(g.matrix(), m1 + k)?;
        r[1] = mat_rel(&lhs, &rhs);
    }

    // Cayley corner block
    let p = pick(rng, 1, n - 1);
    let (lhs, rhs) = cayley_block_check(&g, p)?;
    r[2] = mat_rel(&lhs, &rhs);

    // equivariance
    let a = haar_unitary(group, n - m, rng)?;
    let b = haar_unitary(group, n - m, rng)?;
    let (lhs, rhs) = equivariance_check(&g, m, &a, &b)?;
    r[3] = mat_rel(&lhs, &rhs);

    // Frobenius block inverse against the direct inverse
    let big = gaussian_kmatrix(alg, n, rng);
    let q = pick(rng, 1, n - 1);
    let blk_a = block_upper_left(&big, q)?;
    let blk_d = block_lower_right(&big, n - q)?;
    let blk_b = big.submatrix(0, q, q, n - q)?;
    let blk_c = big.submatrix(q, 0, n - q, q)?;
    let direct = invert(&big)?;
    for pivot in [FrobeniusPivot::A, FrobeniusPivot::D] {
        let inv = frobenius_inverse(&blk_a, &blk_b, &blk_c, &blk_d, pivot)?.assemble()?;
        r[4] = r[4].max(mat_rel(&inv, &direct));
    }

    // multiplicativity
    let p = pick(rng, m + 1, n);
    let (lhs, rhs) = multiplicativity_check(&g, m, p)?;
    r[5] = rel_err(lhs, rhs);

    // dissipative determinant identity
    let x = dissipative_matrix(alg, n, rng);
    let (lhs, rhs) = dissipative_det_identity_check(&x)?;
    r[6] = rel_err(Complex64::new(lhs, 0.0), Complex64::new(rhs, 0.0));

    // Radon-Nikodym pointwise identity on S = g, A, B of size n - m
    let (lhs, rhs) = rn_pointwise_check(&g, &a, &b)?;
    r[7] = rel_err(lhs, rhs);
    Ok(r)
}

/// Worst residual of every exact identity over `trials` random instances of
/// `group`; instance `t` has size `size(t)`.
pub fn identity_cells(group: Group, trials: usize, seed: u64, size: impl Fn(usize) -> usize) -> Vec<Cell> {
    let mut rng = RngStream::new(seed, 0);
    let mut worst = [0.0f64; 8];
    let mut error = None;
    for t in 0..trials {
        let n = size(t);
        if n < 2 {
            error = Some(Error::dim("identities", format!("need n >= 2, got {n}")));
            break;
        }
        match identity_residuals(group, n, &mut rng) {
            Ok(r) => {
                for (w, v) in worst.iter_mut().zip(r) {
                    // NaN must not hide behind max
                    *w = if v.is_nan() { f64::NAN } else { w.max(v) };
                }
            }
            Err(e) => {
                error = Some(e);
                break;
            }
        }
    }
    IDENTITY_NAMES
        .iter()
        .chain([&RN_NAME])
        .enumerate()
        .map(|(i, name)| {
            let label = format!("{group}: {name}");
            let cell = match &error {
                Some(e) => Cell::failed(label, Metric::Residual, IDENTITY_TOL, e),
                None => Cell::new(label, Metric::Residual, worst[i], IDENTITY_TOL),
            };
            cell.with_samples(trials as u64, seed)
        })
        .collect()
}

/// Criterion 1: exact identities on `trials` random instances per group, n in 2..=8.
pub fn criterion_identities(opts: &SuiteOptions, trials: usize) -> CriterionReport {
    let cells = Group::ALL
        .into_iter()
        .enumerate()
        .flat_map(|(gi, group)| identity_cells(group, trials, opts.cell_seed(1, gi as u64), |t| 2 + t % 7))
        .collect();
    CriterionReport::new(1, "exact identity suite", cells)
}

fn cx(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// The three exponent specs per algebra used for the group-integral matrix,
/// truncated to size `n <= 4`.
pub fn group_matrix_specs(alg: AlgebraTag, n: usize) -> Vec<ExponentSpec> {
    let cut = |v: &[f64]| v[..n].to_vec();
    let cutc = |v: &[Complex64]| v[..n].to_vec();
    match alg {
        AlgebraTag::R => vec![
            ExponentSpec::new(alg, &cut(&[0.0, 1.0, 0.5, 0.25])),
            ExponentSpec::new(alg, &cut(&[0.5, -0.2, 0.8, -0.5])),
            ExponentSpec::new(alg, &cut(&[1.0, 2.0, 1.5, 3.0])),
        ],
        AlgebraTag::C => {
            let real = [0.5, 1.0, 0.3, 0.8];
            let lam = [cx(0.4, 0.6), cx(1.0, -0.3), cx(0.2, 0.2), cx(0.5, -0.8)];
            let conj: Vec<Complex64> = lam.iter().map(|z| z.conj()).collect();
            let l3 = [cx(0.3, 0.2), cx(0.7, 0.0), cx(-0.1, 0.5), cx(1.2, 0.0)];
            let m3 = [cx(0.6, -0.4), cx(0.2, 0.3), cx(0.5, 0.0), cx(-0.2, -0.1)];
            vec![
                ExponentSpec::new(alg, &cut(&real)).with_mu(&cut(&real)),
                ExponentSpec::complex(&cutc(&lam), &cutc(&conj)),
                ExponentSpec::complex(&cutc(&l3), &cutc(&m3)),
            ]
        }
        AlgebraTag::H => vec![
            ExponentSpec::new(alg, &cut(&[0.5, 1.0, 0.3, 0.8])),
            ExponentSpec::new(alg, &cut(&[-0.3, 0.6, -0.4, 1.2])),
            ExponentSpec::new(alg, &cut(&[2.0, 1.0, 3.0, 0.5])),
        ],
    }
}

fn spec_label(spec: &ExponentSpec) -> String {
    let fmt = |v: &[Complex64]| {
        v.iter()
            .map(|z| if z.im == 0.0 { format!("{}", z.re) } else { format!("{}{:+}i", z.re, z.im) })
            .collect::<Vec<_>>()
            .join(",")
    };
    let lam: Vec<Complex64> = (1..=spec.n()).map(|k| spec.lambda_k(k)).collect();
    match &spec.mu {
        Some(mu) => format!("λ=({}) μ=({})", fmt(&lam), fmt(mu)),
        None => format!("λ=({})", fmt(&lam)),
    }
}

fn group_cell(spec: &ExponentSpec, samples: u64, shards: usize, seed: u64) -> Vec<Cell> {
    with_rerun(seed, |s| {
        let name = format!("{}({}) {}", spec.algebra.group(), spec.n(), spec_label(spec));
        let r = group_integral_rhs(spec).and_then(|cf| {
            let est = group_integral_mc(spec, samples, shards, s)?;
            Ok(ComparisonReport::against_closed_form(name.clone(), est, cf))
        });
        match r {
            Ok(r) => vec![Cell::from_comparison(&r, s)],
            Err(e) => vec![Cell::failed(name, Metric::Z, Z_THRESHOLD, &e).with_samples(samples, s)],
        }
    })
}

fn exact_cell(name: impl Into<String>, value: Result<Complex64>, expected: Complex64, tol: f64) -> Cell {
    let name = name.into();
    match value {
        Ok(v) => Cell::new(name, Metric::Residual, rel_err(v, expected), tol),
        Err(e) => Cell::failed(name, Metric::Residual, tol, &e),
    }
}

/// Criterion 2: group integrals against their closed form.
pub fn criterion_group_integrals(opts: &SuiteOptions) -> CriterionReport {
    let samples = opts.mc_samples();
    let sizes: &[usize] = match opts.profile {
        Profile::Quick => &[2],
        Profile::Full => &[2, 3, 4],
    };
    let mut cells = Vec::new();
    let mut idx = 0u64;
    let mut next_seed = || {
        idx += 1;
        opts.cell_seed(2, idx)
    };

    // anchors with hand-derived values
    let so2 = ExponentSpec::new(AlgebraTag::R, &[0.0, 1.0]);
    let u1 = ExponentSpec::new(AlgebraTag::C, &[1.0]).with_mu(&[1.0]);
    cells.push(exact_cell("anchor SO(2) λ=(0,1): closed form = 1", group_integral_rhs(&so2).map(|v| v.to_complex()), cx(1.0, 0.0), CLOSED_FORM_TOL));
    cells.push(exact_cell("anchor U(1) λ=μ=(1): closed form = 2", group_integral_rhs(&u1).map(|v| v.to_complex()), cx(2.0, 0.0), CLOSED_FORM_TOL));
    cells.extend(group_cell(&u1, samples, opts.shards, next_seed()));

    for alg in AlgebraTag::ALL {
        for &n in sizes {
            for spec in group_matrix_specs(alg, n) {
                cells.extend(group_cell(&spec, samples, opts.shards, next_seed()));
            }
        }
    }
    CriterionReport::new(2, "group integral matrix vs closed form", cells)
}

/// Specs for the measure-consistency check at n = 3.
pub fn consistency_specs() -> Vec<ExponentSpec> {
    let lam = [cx(0.5, 0.3), cx(0.4, 0.0), cx(1.0, -0.5)];
    let conj: Vec<Complex64> = lam.iter().map(|z| z.conj()).collect();
    vec![
        ExponentSpec::new(AlgebraTag::R, &[0.0, 0.5, 1.0]),
        ExponentSpec::complex(&lam, &conj),
        ExponentSpec::new(AlgebraTag::H, &[0.5, 1.0, 0.3]),
    ]
}

/// A random spec inside the convergence domain.
fn random_spec(alg: AlgebraTag, n: usize, rng: &mut RngStream) -> ExponentSpec {
    let draw = |rng: &mut RngStream, k: usize| -((k - 1) as f64) / 4.0 + 3.0 * rng.uniform();
    match alg {
        AlgebraTag::C => {
            let lam: Vec<Complex64> = (1..=n).map(|k| cx(draw(rng, k), 2.0 * rng.uniform() - 1.0)).collect();
            let mu: Vec<Complex64> = (1..=n).map(|k| cx(draw(rng, k), 2.0 * rng.uniform() - 1.0)).collect();
            ExponentSpec::complex(&lam, &mu)
        }
        _ => {
            let lam: Vec<f64> = (1..=n).map(|k| draw(rng, k)).collect();
            ExponentSpec::new(alg, &lam)
        }
    }
}

/// Criterion 3: consistency of the weighted measures under `Υ^1`, and the
/// product recursion of the closed form.
pub fn criterion_consistency(opts: &SuiteOptions) -> CriterionReport {
    let mut cells = Vec::new();
    let recursion_seed = opts.cell_seed(3, 0);
    let mut rng = RngStream::new(recursion_seed, 0);
    for i in 0..50 {
        let alg = AlgebraTag::ALL[i % 3];
        let n = 2 + (rng.next_u64() % 7) as usize;
        let spec = random_spec(alg, n, &mut rng);
        let name = format!("recursion #{i} {}({n})", alg.group());
        let r = (|| {
            let full = group_integral_rhs(&spec)?.to_complex();
            let prev = group_integral_rhs(&spec.truncated())?.to_complex();
            let f = theorem16_factor(alg, n, spec.lambda_k(n), spec.mu_k(n))?.to_complex();
            Ok((full, f * prev))
        })();
        cells.push(match r {
            Ok((a, b)) => Cell::new(name, Metric::Residual, rel_err(a, b), CLOSED_FORM_TOL),
            Err(e) => Cell::failed(name, Metric::Residual, CLOSED_FORM_TOL, &e),
        });
    }
    if opts.profile == Profile::Full {
        for (i, spec) in consistency_specs().iter().enumerate() {
            let group = spec.algebra.group();
            let seed = opts.cell_seed(3, 1 + i as u64);
            cells.extend(with_rerun(seed, |s| {
                cells_or_error(
                    &format!("{group}(3) consistency"),
                    Metric::Z,
                    Z_THRESHOLD,
                    measure_consistency_test(group, spec, opts.mc_samples(), opts.shards, s)
                        .map(|rs| rs.iter().map(|r| Cell::from_comparison(r, s)).collect()),
                )
            }));
        }
    }
    CriterionReport::new(3, "measure consistency and closed-form recursion", cells)
}

/// Criterion 4: pushforward of Haar under `Υ^m`, corner laws, cube law.
pub fn criterion_pushforward(opts: &SuiteOptions) -> CriterionReport {
    let samples = 100_000;
    let mut configs = vec![];
    for n in 3..=6 {
        configs.push((Group::SO, n, 1));
    }
    for n in 2..=4 {
        configs.push((Group::U, n, 1));
    }
    for n in 2..=3 {
        configs.push((Group::Sp, n, 1));
    }
    configs.push((Group::SO, 5, 2));
    configs.push((Group::SO, 6, 2));

    let mut cells = Vec::new();
    for (i, &(group, n, m)) in configs.iter().enumerate() {
        let seed = opts.cell_seed(4, i as u64);
        cells.extend(with_rerun(seed, |s| {
            let label = format!("{group}({n}) m={m}");
            cells_or_error(
                &label,
                Metric::Z,
                Z_THRESHOLD,
                pushforward_haar_test(group, n, m, samples, opts.shards, s).map(|rep| {
                    let mut out: Vec<Cell> = rep.moments.iter().map(|r| Cell::from_comparison(r, s)).collect();
                    out.extend(rep.ks.iter().map(|r| Cell::from_ks(r, s)));
                    if let Some(z) = rep.independence_z {
                        out.push(Cell::new(format!("{label}: independence √N|r|"), Metric::Z, z, Z_THRESHOLD).with_samples(samples, s));
                    }
                    out
                }),
            )
        }));
    }
    let seed = opts.cell_seed(4, 100);
    cells.extend(with_rerun(seed, |s| {
        cells_or_error(
            "SO(5) cube law",
            Metric::PValue,
            KS_P_THRESHOLD,
            cube_law_ks(5, samples, opts.shards, s).map(|rs| rs.iter().map(|r| Cell::from_ks(r, s)).collect()),
        )
    }));
    CriterionReport::new(4, "Haar pushforward, corner and cube laws", cells)
}

/// Closed-form reciprocals of the m = 1 ball constants, derived separately
/// for each algebra with `τ` tied to the ambient size `n`.
fn remark_constant_cells() -> Vec<Cell> {
    let mut cells = Vec::new();
    for n in 2..=10 {
        let nf = n as f64;
        let r = ball_constant(AlgebraTag::R, 1, (nf - 1.0) / 2.0).map(|v| cx(1.0 / v.re(), 0.0));
        let want = PI.powf(-0.5) * (ln_gamma(nf / 2.0) - ln_gamma((nf - 1.0) / 2.0)).exp();
        cells.push(exact_cell(format!("R m=1 τ=(n-1)/2, n={n}"), r, cx(want, 0.0), CLOSED_FORM_TOL));
        let c = ball_constant(AlgebraTag::C, 1, nf - 1.0).map(|v| cx(1.0 / v.re(), 0.0));
        cells.push(exact_cell(format!("C m=1 τ=n-1, n={n}"), c, cx((nf - 1.0) / PI, 0.0), CLOSED_FORM_TOL));
        let h = ball_constant(AlgebraTag::H, 1, 2.0 * nf - 2.0).map(|v| cx(1.0 / v.re(), 0.0));
        let want = (2.0 * nf - 2.0) * (2.0 * nf - 1.0) / (PI * PI);
        cells.push(exact_cell(format!("H m=1 τ=2n-2, n={n}"), h, cx(want, 0.0), CLOSED_FORM_TOL));
    }
    cells
}

fn ball_cell(alg: AlgebraTag, m: usize, tau: f64, spec: Option<(&ExponentSpec, f64)>, samples: u64, shards: usize, seed: u64) -> Vec<Cell> {
    with_rerun(seed, |s| {
        let name = match spec {
            None => format!("B_{m}({alg}) τ={tau}"),
            Some((sp, alpha)) => format!("B_{m}({alg}) α={alpha} {}", spec_label(sp)),
        };
        let r = (|| {
            let cf = match spec {
                None => ball_constant(alg, m, tau)?,
                Some((sp, alpha)) => ball_integral_rhs(alg, m, alpha, sp)?,
            };
            let est = ball_integral_mc(alg, m, tau, spec.map(|p| p.0), samples, shards, s)?;
            let mut rep = ComparisonReport::against_closed_form(name.clone(), est.estimate, cf);
            rep.warnings.push(format!("acceptance rate {:.4}, {} accepted of {} draws", est.acceptance_rate, est.accepted, est.draws));
            Ok(rep)
        })();
        match r {
            Ok(rep) => vec![Cell::from_comparison(&rep, s)],
            Err(e) => vec![Cell::failed(name, Metric::Z, Z_THRESHOLD, &e).with_samples(samples, s)],
        }
    })
}

/// Criterion 5: ball integrals against the Gamma-product constant.
pub fn criterion_ball_constant(opts: &SuiteOptions) -> CriterionReport {
    let mut cells = remark_constant_cells();
    if opts.profile == Profile::Full {
        let mut idx = 0;
        for (alg, m) in [(AlgebraTag::R, 1), (AlgebraTag::R, 2), (AlgebraTag::C, 1), (AlgebraTag::C, 2), (AlgebraTag::H, 1)] {
            for tau in [1.0, 1.5, 3.0] {
                idx += 1;
                cells.extend(ball_cell(alg, m, tau, None, opts.mc_samples(), opts.shards, opts.cell_seed(5, idx)));
            }
        }
    }
    CriterionReport::new(5, "ball constants", cells)
}

/// `(α, spec)` pairs for the weighted ball integrals.
pub fn ball_specs() -> Vec<(AlgebraTag, usize, f64, ExponentSpec)> {
    vec![
        (AlgebraTag::R, 1, 2.0, ExponentSpec::new(AlgebraTag::R, &[1.0])),
        (AlgebraTag::R, 1, 3.0, ExponentSpec::new(AlgebraTag::R, &[-0.3])),
        (AlgebraTag::C, 1, 1.5, ExponentSpec::complex(&[cx(0.5, 0.5)], &[cx(0.5, -0.5)])),
        (AlgebraTag::C, 1, 2.0, ExponentSpec::new(AlgebraTag::C, &[1.0]).with_mu(&[0.0])),
        (AlgebraTag::H, 1, 0.75, ExponentSpec::new(AlgebraTag::H, &[1.0])),
        (AlgebraTag::H, 1, 1.5, ExponentSpec::new(AlgebraTag::H, &[-0.4])),
        (AlgebraTag::R, 2, 3.0, ExponentSpec::new(AlgebraTag::R, &[0.5, 1.0])),
        (AlgebraTag::R, 2, 4.0, ExponentSpec::new(AlgebraTag::R, &[-0.2, 0.4])),
    ]
}

/// Criterion 6: weighted ball integrals against their closed form.
pub fn criterion_ball_integrals(opts: &SuiteOptions) -> CriterionReport {
    let mut cells = Vec::new();
    for (i, (alg, m, alpha, spec)) in ball_specs().iter().enumerate() {
        let tau = ball_tau(*alg, *m, *alpha);
        cells.extend(ball_cell(*alg, *m, tau, Some((spec, *alpha)), opts.mc_samples(), opts.shards, opts.cell_seed(6, i as u64)));
    }
    CriterionReport::new(6, "weighted ball integrals vs closed form", cells)
}

/// Truncated `2F1(a, b; c; 1)` for `a` a non-positive integer.
fn terminating_2f1(a: i32, b: f64, c: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    for k in 0..(-a) {
        let k = k as f64;
        term *= (a as f64 + k) * (b + k) / ((c + k) * (k + 1.0));
        sum += term;
    }
    sum
}

/// Criterion 7: hypergeometric, Selberg and disk-integral kit.
pub fn criterion_special_functions() -> CriterionReport {
    let mut cells = Vec::new();
    for a in [-1, -2, -3] {
        for b in [-2.5, -1.0, 0.3, 1.7, 4.0] {
            for c in [0.5, 1.0, 2.5, 6.0] {
                let v = gauss_2f1_at_1(cx(a as f64, 0.0), cx(b, 0.0), cx(c, 0.0));
                let want = terminating_2f1(a, b, c);
                let mut cell = exact_cell(format!("2F1({a}, {b}; {c}; 1)"), v, cx(want, 0.0), CLOSED_FORM_TOL);
                // absolute near zero
                if want.abs() < 1.0 {
                    if let Ok(v) = gauss_2f1_at_1(cx(a as f64, 0.0), cx(b, 0.0), cx(c, 0.0)) {
                        cell = Cell::new(cell.name, Metric::Residual, (v - want).norm(), CLOSED_FORM_TOL);
                    }
                }
                cells.push(cell);
            }
        }
    }
    for (a, b) in [(0.5, 0.5), (1.0, 1.0), (2.5, 0.7), (3.0, 4.5)] {
        let v = selberg(1, a, b, 0.8).map(|v| cx(v.re(), 0.0));
        cells.push(exact_cell(format!("selberg n=1 ({a}, {b}) = B({a}, {b})"), v, cx(statrs_beta(a, b), 0.0), CLOSED_FORM_TOL));
    }
    for (a, b, g) in [(1.0, 1.0, 0.5), (2.0, 1.5, 1.0), (1.5, 2.0, 2.0)] {
        let name = format!("selberg n=2 ({a}, {b}, {g}) vs quadrature");
        // symmetric integrand: twice the integral over t2 < t1
        let q = integrate_2d(
            |x, y| x.powf(a - 1.0) * (1.0 - x).powf(b - 1.0) * y.powf(a - 1.0) * (1.0 - y).powf(b - 1.0) * (x - y).powf(2.0 * g),
            0.0,
            1.0,
            |_| 0.0,
            |x| x,
            1e-10,
        )
        .map(|q| 2.0 * q);
        cells.push(match (selberg(2, a, b, g), q) {
            (Ok(v), Ok(q)) => Cell::new(name, Metric::Residual, (v.re() - q).abs(), QUADRATURE_TOL),
            (Err(e), _) | (_, Err(e)) => Cell::failed(name, Metric::Residual, QUADRATURE_TOL, &e),
        });
    }
    for n in 2..=5 {
        let name = format!("J_{n}(0, 0) vs polar quadrature");
        // folded onto φ in [0, π]
        let q = integrate_2d(|r, _| (1.0 - r * r).powi(n as i32 - 2) * r, 0.0, 1.0, |_| 0.0, |_| PI, 1e-10).map(|q| 2.0 * q);
        cells.push(match (disk_integral_jn(n, cx(0.0, 0.0), cx(0.0, 0.0)), q) {
            (Ok(v), Ok(q)) => Cell::new(name, Metric::Residual, (v.re() - q).abs(), QUADRATURE_TOL),
            (Err(e), _) | (_, Err(e)) => Cell::failed(name, Metric::Residual, QUADRATURE_TOL, &e),
        });
    }
    CriterionReport::new(7, "Gauss, Selberg and disk-integral kit", cells)
}

/// The three deviation laws for the infinite-product check.
pub fn pickrell_laws() -> Vec<LambdaSequence> {
    vec![
        LambdaSequence::constant(0.0).with_deviation(2, 1.0),
        LambdaSequence::constant(1.0).with_rule(DeviationRule::Geometric { ratio: 0.5 }),
        LambdaSequence::constant(0.5).with_rule(DeviationRule::Quadratic),
    ]
}

/// Criterion 8: virtual group coordinates, the Φ integral, quasi-invariance.
pub fn criterion_virtual(opts: &SuiteOptions) -> CriterionReport {
    let mut cells = Vec::new();
    let ks_samples = 100_000;
    for (i, base) in [0.0, 1.0, 2.5].into_iter().enumerate() {
        let seed = opts.cell_seed(8, i as u64);
        cells.extend(with_rerun(seed, |s| {
            cells_or_error(
                &format!("coordinates λ={base}"),
                Metric::PValue,
                KS_P_THRESHOLD,
                coordinate_ks(&LambdaSequence::constant(base), 10, ks_samples, s)
                    .map(|rs| rs.iter().map(|r| Cell::from_ks(r, s)).collect()),
            )
        }));
    }
    let seed = opts.cell_seed(8, 10);
    cells.extend(with_rerun(seed, |s| {
        cells_or_error(
            "finite-level SO(6) vs virtual",
            Metric::PValue,
            KS_P_THRESHOLD,
            finite_level_consistency(6, ks_samples, s).map(|rs| rs.iter().map(|r| Cell::from_ks(r, s)).collect()),
        )
    }));
    for (i, law) in pickrell_laws().iter().enumerate() {
        let seed = opts.cell_seed(8, 20 + i as u64);
        cells.extend(with_rerun(seed, |s| {
            cells_or_error(
                "phi integral",
                Metric::Z,
                Z_THRESHOLD,
                phi_integral_mc(law, 15, opts.mc_samples(), opts.shards, s).map(|r| vec![Cell::from_comparison(&r, s)]),
            )
        }));
    }
    let qi: [(&[f64], usize); 2] = [(&[0.0, 1.0, 0.5, 0.8], 2), (&[0.0, 0.5, 1.0, 0.3, 0.7], 2)];
    for (i, (lambda, k)) in qi.into_iter().enumerate() {
        let seed = opts.cell_seed(8, 30 + i as u64);
        cells.extend(with_rerun(seed, |s| {
            let r = (|| {
                let mut rng = RngStream::new(s, u64::MAX - 1);
                let a = haar_unitary(Group::SO, k, &mut rng)?;
                let b = haar_unitary(Group::SO, k, &mut rng)?;
                quasi_invariance_mc(lambda, &a, &b, opts.mc_samples(), opts.shards, s)
            })();
            cells_or_error(
                &format!("quasi-invariance SO({})", lambda.len()),
                Metric::Z,
                Z_THRESHOLD,
                r.map(|rs| rs.iter().map(|r| Cell::from_comparison(r, s)).collect()),
            )
        }));
    }
    CriterionReport::new(8, "virtual group: coordinates, Φ integral, quasi-invariance", cells)
}

/// A small but complete slice of the suite whose JSON is compared across
/// reruns and thread counts.
fn determinism_probe(opts: &SuiteOptions) -> Result<String> {
    let probe = SuiteOptions { profile: Profile::Quick, seed: opts.seed, shards: opts.shards };
    let spec = group_matrix_specs(AlgebraTag::C, 2).remove(1);
    let group = group_cell(&spec, 20_000, probe.shards, probe.cell_seed(9, 0));
    let phi = phi_integral_mc(&pickrell_laws()[1], 15, 20_000, probe.shards, probe.cell_seed(9, 1))?;
    let ball = ball_integral_mc(AlgebraTag::H, 1, 1.5, None, 20_000, probe.shards, probe.cell_seed(9, 2))?;
    let push = pushforward_haar_test(Group::U, 3, 1, 5_000, probe.shards, probe.cell_seed(9, 3))?;
    serde_json::to_string(&(group, phi, ball, push)).map_err(|e| Error::Numeric(e.to_string()))
}

/// Criterion 9: identical seeds and shard counts give byte-identical JSON,
/// whatever the number of worker threads.
pub fn criterion_determinism(opts: &SuiteOptions) -> CriterionReport {
    let name = "byte-identical JSON across reruns and thread counts";
    let run = || -> Result<Vec<String>> {
        let mut outs = vec![determinism_probe(opts)?, determinism_probe(opts)?];
        for threads in [1, 3] {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| Error::Numeric(format!("thread pool: {e}")))?;
            outs.push(pool.install(|| determinism_probe(opts))?);
        }
        Ok(outs)
    };
    let cell = match run() {
        Ok(outs) => {
            let mismatches = outs.iter().filter(|o| *o != &outs[0]).count();
            Cell::new(name, Metric::Residual, mismatches as f64, 0.5).with_samples(outs.len() as u64, opts.seed)
        }
        Err(e) => Cell::failed(name, Metric::Residual, 0.5, &e),
    };
    CriterionReport::new(9, "determinism", vec![cell])
}

/// Runs the profile: `quick` covers the identities, closed-form checks and
/// n <= 2 integrals at 10^5 samples; `full` runs the whole matrix.
pub fn run_suite(opts: &SuiteOptions) -> SuiteReport {
    let mut criteria = vec![
        criterion_identities(opts, 100),
        criterion_group_integrals(opts),
        criterion_consistency(opts),
    ];
    if opts.profile == Profile::Full {
        criteria.push(criterion_pushforward(opts));
    }
    criteria.push(criterion_ball_constant(opts));
    if opts.profile == Profile::Full {
        criteria.push(criterion_ball_integrals(opts));
    }
    criteria.push(criterion_special_functions());
    if opts.profile == Profile::Full {
        criteria.push(criterion_virtual(opts));
        criteria.push(criterion_determinism(opts));
    }
    let pass = criteria.iter().all(|c| c.pass);
    SuiteReport { schema: 1, build: BUILD_ID.to_string(), options: opts.clone(), pass, criteria }
}

/// Sanity guard used by tests: every default spec is inside the
/// finite-variance region.
pub fn default_specs_have_finite_variance() -> bool {
    let group_ok = AlgebraTag::ALL
        .into_iter()
        .flat_map(|a| (2..=4).flat_map(move |n| group_matrix_specs(a, n)))
        .chain(consistency_specs())
        .all(|s| s.check_convergence().is_ok() && s.has_finite_variance_margin());
    let ball_ok = ball_specs().iter().all(|(alg, m, alpha, _)| ball_tau(*alg, *m, *alpha) > 0.0);
    group_ok && ball_ok
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_specs_are_safe() {
        assert!(default_specs_have_finite_variance());
    }

    #[test]
    fn metric_rules() {
        assert!(Cell::new("a", Metric::Residual, 1e-10, 1e-9).pass);
        assert!(!Cell::new("a", Metric::Residual, 1e-9, 1e-9).pass);
        assert!(Cell::new("z", Metric::Z, -3.9, 4.0).pass);
        assert!(!Cell::new("z", Metric::Z, 4.1, 4.0).pass);
        assert!(Cell::new("p", Metric::PValue, 0.2, 1e-3).pass);
        assert!(!Cell::new("p", Metric::PValue, f64::NAN, 1e-3).pass);
    }

    #[test]
    fn rerun_happens_once_with_a_new_seed() {
        let seeds = std::sync::Mutex::new(Vec::new());
        let out = with_rerun(5, |s| {
            seeds.lock().unwrap().push(s);
            vec![Cell::new("x", Metric::Z, 10.0, 4.0)]
        });
        let seeds = seeds.into_inner().unwrap();
        assert_eq!(seeds.len(), 2);
        assert_ne!(seeds[0], seeds[1]);
        assert!(out[0].rerun && !out[0].pass);
    }

    #[test]
    fn identities_pass_small() {
        let opts = SuiteOptions::default();
        let rep = criterion_identities(&opts, 14);
        assert!(rep.pass, "{:#?}", rep.worst());
        assert_eq!(rep.cells.len(), 24);
    }

    #[test]
    fn identities_reject_tiny_n() {
        let cells = identity_cells(Group::U, 3, 1, |_| 1);
        assert!(cells.iter().all(|c| !c.pass && c.error.is_some()));
    }

    #[test]
    fn special_functions_pass() {
        let rep = criterion_special_functions();
        assert!(rep.pass, "{:#?}", rep.worst());
    }

    #[test]
    fn terminating_series_hand_values() {
        // 2F1(-1, b; c; 1) = 1 - b/c
        assert!((terminating_2f1(-1, 2.0, 4.0) - 0.5).abs() < 1e-15);
        assert!((terminating_2f1(-2, -2.0, 3.0) - 2.5).abs() < 1e-14);
    }

    #[test]
    fn csv_has_one_row_per_cell() {
        let opts = SuiteOptions::default();
        let report = SuiteReport {
            schema: 1,
            build: BUILD_ID.into(),
            options: opts.clone(),
            pass: true,
            criteria: vec![criterion_special_functions()],
        };
        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + report.criteria[0].cells.len());
    }

    #[test]
    fn cell_seeds_are_distinct() {
        let opts = SuiteOptions::default();
        let mut seen: Vec<u64> = (1..=9).flat_map(|c| (0..40).map(move |i| (c, i))).map(|(c, i)| opts.cell_seed(c, i)).collect();
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen.len(), 360);
    }
}
