//! Command-line front end. Every invocation is first turned into a
//! [`JobSpec`], which is what actually runs and what every report embeds.
//!
//! Exit codes: 0 when all checks pass, 1 when a check fails, 2 for usage and
//! domain errors.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::closedform::{
    ball_constant, ball_integral_rhs, ball_tau, disk_integral_jn, group_integral_rhs, group_integral_theta_rhs,
    ClosedFormValue, ExponentSpec,
};
use crate::error::{Error, Result};
use crate::haar::sample_haar;
use crate::montecarlo::{ball_integral_mc, group_integral_mc, theta_integral_mc, ComparisonReport, DEFAULT_SHARDS};
use crate::scalar::Group;
use crate::suite::{identity_cells, run_suite, Profile, SuiteOptions, SuiteReport, IDENTITY_TOL};
use crate::virtual_group::{phi_integral_mc, DeviationRule, LambdaSequence};
use crate::BUILD_ID;

pub const SCHEMA: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Sample,
    Eval,
    Verify,
    Suite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Haar,
    Identities,
    Group,
    GroupTheta,
    Ball,
    BallConstant,
    Pickrell,
    Jn,
}

fn default_shards() -> usize {
    DEFAULT_SHARDS
}

/// A complete, serializable description of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobSpec {
    pub command: Command,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<Family>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<Group>,
    /// Matrix size; the ball size `m` for the ball families.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub lambda: Vec<Complex64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<Vec<Complex64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub law: Option<LambdaSequence>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kmax: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<Profile>,
    #[serde(default = "default_shards")]
    pub shards: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    /// Deliberate fault for mutation testing.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inject_fault: Option<String>,
}

impl JobSpec {
    pub fn new(command: Command, family: Option<Family>) -> Self {
        JobSpec {
            command,
            family,
            group: None,
            n: None,
            lambda: Vec::new(),
            mu: None,
            theta: None,
            alpha: None,
            tau: None,
            law: None,
            kmax: None,
            count: None,
            trials: None,
            samples: None,
            profile: None,
            shards: DEFAULT_SHARDS,
            seed: 0,
            out: None,
            csv: None,
            inject_fault: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("job specs serialize")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Domain(format!("bad job spec: {e}")))
    }

    fn need<T: Copy>(&self, v: Option<T>, flag: &str) -> Result<T> {
        v.ok_or_else(|| Error::Domain(format!("{} needs --{flag}", self.describe())))
    }

    fn describe(&self) -> String {
        let cmd = match self.command {
            Command::Sample => "sample",
            Command::Eval => "eval",
            Command::Verify => "verify",
            Command::Suite => "suite",
        };
        match self.family.and_then(|f| f.to_possible_value()) {
            Some(f) => format!("{cmd} {}", f.get_name()),
            None => cmd.to_string(),
        }
    }

    fn group(&self) -> Result<Group> {
        self.need(self.group, "group")
    }

    /// The exponent spec from `--lambda/--mu/--theta`, checked against `--n`.
    pub fn exponent_spec(&self) -> Result<ExponentSpec> {
        let alg = self.group()?.algebra();
        if self.lambda.is_empty() {
            return Err(Error::Domain(format!("{} needs --lambda", self.describe())));
        }
        if let Some(n) = self.n {
            if n != self.lambda.len() {
                return Err(Error::dim("exponents", format!("--n {n} but {} λ values", self.lambda.len())));
            }
        }
        let spec = ExponentSpec { algebra: alg, lambda: self.lambda.clone(), mu: self.mu.clone(), theta: self.theta.clone() };
        spec.validate()?;
        Ok(spec)
    }

    fn size(&self) -> Result<usize> {
        match self.n {
            Some(n) => Ok(n),
            None if !self.lambda.is_empty() => Ok(self.lambda.len()),
            None => Err(Error::Domain(format!("{} needs --n", self.describe()))),
        }
    }

    fn law(&self) -> Result<&LambdaSequence> {
        self.law.as_ref().ok_or_else(|| Error::Domain(format!("{} needs --lambda-base", self.describe())))
    }
}

/// The JSON document written for every run. `result` is merged into the
/// top level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: u32,
    pub build: String,
    pub job: JobSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pass: Option<bool>,
    #[serde(flatten)]
    pub result: serde_json::Map<String, serde_json::Value>,
}

/// What a job produced, before anything is written.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: Report,
    /// Side files to write: `(path, contents)`.
    pub files: Vec<(PathBuf, String)>,
    /// Human summary for the diagnostic stream.
    pub summary: Option<String>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        match self.report.pass {
            Some(false) => 1,
            _ => 0,
        }
    }
}

fn object(v: impl Serialize) -> Result<serde_json::Map<String, serde_json::Value>> {
    match serde_json::to_value(v).map_err(|e| Error::Numeric(e.to_string()))? {
        serde_json::Value::Object(m) => Ok(m),
        other => {
            let mut m = serde_json::Map::new();
            m.insert("value".into(), other);
            Ok(m)
        }
    }
}

fn comparison_csv(reports: &[ComparisonReport]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Error::Numeric(format!("csv: {e}"));
    w.write_record(["name", "estimate_re", "estimate_im", "stderr", "reference_re", "reference_im", "z_score", "threshold", "pass", "samples"])
        .map_err(err)?;
    for r in reports {
        w.write_record([
            r.name.clone(),
            format!("{:e}", r.estimate.mean.re),
            format!("{:e}", r.estimate.mean.im),
            format!("{:e}", r.stderr),
            format!("{:e}", r.reference.re),
            format!("{:e}", r.reference.im),
            format!("{:e}", r.z_score),
            format!("{:e}", r.threshold),
            r.pass.to_string(),
            r.estimate.samples.to_string(),
        ])
        .map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Numeric(format!("csv: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::Numeric(e.to_string()))
}

fn closed_form(job: &JobSpec) -> Result<ClosedFormValue> {
    let family = job.family.ok_or_else(|| Error::Domain("eval needs --family".into()))?;
    match family {
        Family::Group => group_integral_rhs(&job.exponent_spec()?),
        Family::GroupTheta => group_integral_theta_rhs(&job.exponent_spec()?),
        Family::Ball => {
            let spec = job.exponent_spec()?;
            ball_integral_rhs(spec.algebra, spec.n(), job.need(job.alpha, "alpha")?, &spec)
        }
        Family::BallConstant => ball_constant(job.group()?.algebra(), job.size()?, job.need(job.tau, "tau")?),
        Family::Jn => {
            let n = job.need(job.n, "n")?;
            let one = |v: &[Complex64], flag: &str| match v {
                [x] => Ok(*x),
                _ => Err(Error::Domain(format!("eval jn needs exactly one --{flag} value"))),
            };
            let mu = job.mu.as_deref().unwrap_or(&[]);
            disk_integral_jn(n, one(&job.lambda, "lambda")?, one(mu, "mu")?)
        }
        Family::Pickrell => Ok(job.law()?.closed_form(job.need(job.kmax, "kmax")?)?.value),
        Family::Haar | Family::Identities => Err(Error::Domain(format!("no closed form for {}", job.describe()))),
    }
}

fn verify_integral(job: &JobSpec) -> Result<ComparisonReport> {
    let family = job.family.ok_or_else(|| Error::Domain("verify needs a family".into()))?;
    let samples = job.need(job.samples, "samples")?;
    let cf = closed_form(job)?;
    let name = job.describe();
    match family {
        Family::Group | Family::GroupTheta => {
            let spec = job.exponent_spec()?;
            let est = if family == Family::Group {
                group_integral_mc(&spec, samples, job.shards, job.seed)?
            } else {
                theta_integral_mc(&spec, samples, job.shards, job.seed)?
            };
            Ok(ComparisonReport::against_closed_form(name, est, cf))
        }
        Family::Ball | Family::BallConstant => {
            let alg = job.group()?.algebra();
            let m = job.size()?;
            let (tau, spec) = if family == Family::Ball {
                (ball_tau(alg, m, job.need(job.alpha, "alpha")?), Some(job.exponent_spec()?))
            } else {
                (job.need(job.tau, "tau")?, None)
            };
            let b = ball_integral_mc(alg, m, tau, spec.as_ref(), samples, job.shards, job.seed)?;
            let mut r = ComparisonReport::against_closed_form(name, b.estimate, cf);
            r.warnings.push(format!("acceptance rate {:.4}, {} accepted of {} draws", b.acceptance_rate, b.accepted, b.draws));
            Ok(r)
        }
        Family::Pickrell => phi_integral_mc(job.law()?, job.need(job.kmax, "kmax")?, samples, job.shards, job.seed),
        _ => Err(Error::Domain(format!("{} is not an integral family", job.describe()))),
    }
}

fn report(job: &JobSpec, pass: Option<bool>, mut result: serde_json::Map<String, serde_json::Value>) -> Report {
    // these keys belong to the envelope
    for key in ["schema", "build", "job", "pass"] {
        result.remove(key);
    }
    Report { schema: SCHEMA, build: BUILD_ID.to_string(), job: job.clone(), pass, result }
}

/// Runs a job without touching the filesystem or standard streams.
pub fn execute(job: &JobSpec) -> Result<Outcome> {
    let mut files = Vec::new();
    let mut summary = None;
    let rep = match (job.command, job.family) {
        (Command::Sample, Some(Family::Haar)) => {
            let group = job.group()?;
            let samples = sample_haar(group, job.need(job.n, "n")?, job.need(job.count, "count")?, job.seed, 0)?;
            let mut result = serde_json::Map::new();
            result.insert("count".into(), samples.len().into());
            match &job.out {
                Some(path) => {
                    let text = serde_json::to_string(&samples).map_err(|e| Error::Numeric(e.to_string()))?;
                    files.push((path.clone(), text));
                    result.insert("out".into(), path.display().to_string().into());
                }
                None => {
                    result.insert("samples".into(), serde_json::to_value(&samples).map_err(|e| Error::Numeric(e.to_string()))?);
                }
            }
            report(job, None, result)
        }
        (Command::Eval, Some(f)) if !matches!(f, Family::Haar | Family::Identities) => {
            let cf = closed_form(job)?;
            let mut result = object(cf)?;
            if f == Family::Pickrell {
                let p = job.law()?.closed_form(job.need(job.kmax, "kmax")?)?;
                result.insert("k_max".into(), p.k_max.into());
                result.insert("tail_estimate".into(), p.tail_estimate.into());
            }
            report(job, None, result)
        }
        (Command::Verify, Some(Family::Identities)) => {
            let n = job.need(job.n, "n")?;
            let cells = identity_cells(job.group()?, job.need(job.trials, "trials")?, job.seed, |_| n);
            if let Some(e) = cells.iter().find_map(|c| c.error.clone()) {
                return Err(Error::Domain(e));
            }
            let pass = cells.iter().all(|c| c.pass);
            let max = cells.iter().map(|c| c.value).fold(0.0, f64::max);
            let mut result = serde_json::Map::new();
            result.insert("tolerance".into(), IDENTITY_TOL.into());
            result.insert("max_residual".into(), max.into());
            result.insert("checks".into(), serde_json::to_value(&cells).map_err(|e| Error::Numeric(e.to_string()))?);
            report(job, Some(pass), result)
        }
        (Command::Verify, Some(f)) if !matches!(f, Family::Haar | Family::Jn) => {
            let r = verify_integral(job)?;
            if let Some(path) = &job.csv {
                files.push((path.clone(), comparison_csv(std::slice::from_ref(&r))?));
            }
            summary = Some(format!("{}: z = {:.3} ({})", r.name, r.z_score, if r.pass { "pass" } else { "FAIL" }));
            report(job, Some(r.pass), object(&r)?)
        }
        (Command::Suite, _) => {
            let opts = SuiteOptions { profile: job.profile.unwrap_or(Profile::Quick), seed: job.seed, shards: job.shards };
            let faulty = match job.inject_fault.as_deref() {
                None => false,
                Some("upsilon-sign") => true,
                Some(other) => return Err(Error::Domain(format!("unknown fault '{other}'"))),
            };
            crate::upsilon::set_sign_fault(faulty);
            let suite: SuiteReport = run_suite(&opts);
            crate::upsilon::set_sign_fault(false);
            if let Some(path) = &job.csv {
                let mut buf = Vec::new();
                suite.write_csv(&mut buf)?;
                files.push((path.clone(), String::from_utf8(buf).map_err(|e| Error::Numeric(e.to_string()))?));
            }
            summary = Some(suite.summary_table());
            let mut result = serde_json::Map::new();
            result.insert("criteria".into(), serde_json::to_value(&suite.criteria).map_err(|e| Error::Numeric(e.to_string()))?);
            report(job, Some(suite.pass), result)
        }
        _ => return Err(Error::Domain(format!("unsupported job: {}", job.describe()))),
    };
    Ok(Outcome { report: rep, files, summary })
}

#[derive(Parser, Debug)]
#[command(name = "hua-lab", version, about = "Haar sampling, Υ maps and Gamma-product integral verification")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Draw samples.
    Sample {
        #[command(subcommand)]
        what: SampleCmd,
    },
    /// Evaluate closed forms.
    Eval {
        #[command(subcommand)]
        what: EvalCmd,
    },
    /// Run verification jobs.
    Verify {
        #[command(subcommand)]
        what: VerifyCmd,
    },
    /// Run the acceptance suite.
    Suite(SuiteArgs),
    /// Run a job described by a JobSpec JSON file.
    Run {
        #[arg(long)]
        job: PathBuf,
    },
}

#[derive(Subcommand, Debug)]
enum SampleCmd {
    /// Haar-distributed elements of SO(n), U(n) or Sp(n).
    Haar {
        #[arg(long, value_parser = parse_group)]
        group: Group,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
enum EvalCmd {
    /// Right-hand side of an integral identity.
    Rhs {
        #[arg(long, value_enum)]
        family: Family,
        #[command(flatten)]
        exp: ExponentArgs,
        #[command(flatten)]
        law: LawArgs,
    },
}

#[derive(Subcommand, Debug)]
enum VerifyCmd {
    /// Exact identities on random instances.
    Identities {
        #[arg(long, value_parser = parse_group)]
        group: Group,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        json: bool,
    },
    /// Monte Carlo estimate against the closed form.
    Integral {
        #[arg(long, value_enum)]
        family: Family,
        #[command(flatten)]
        exp: ExponentArgs,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Infinite-product integral over the virtual group.
    Pickrell {
        #[command(flatten)]
        law: LawArgs,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct ExponentArgs {
    #[arg(long, value_parser = parse_group)]
    group: Option<Group>,
    #[arg(long)]
    n: Option<usize>,
    /// λ_1..λ_n, comma separated; complex values as `a+bi`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    lambda: Vec<Complex64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    mu: Option<Vec<Complex64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    theta: Option<Vec<f64>>,
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
}

#[derive(Args, Debug)]
struct LawArgs {
    #[arg(long, allow_hyphen_values = true)]
    lambda_base: Option<f64>,
    /// `k1:d1,k2:d2,...`
    #[arg(long, allow_hyphen_values = true)]
    deviations: Option<String>,
    /// `geometric:r` or `quadratic`.
    #[arg(long)]
    rule: Option<String>,
    #[arg(long)]
    kmax: Option<usize>,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long)]
    samples: u64,
    #[arg(long, default_value_t = DEFAULT_SHARDS)]
    shards: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// JSON goes to standard output in any case.
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct SuiteArgs {
    #[arg(long, default_value = "quick", value_parser = ["quick", "full"])]
    profile: String,
    #[arg(long, default_value_t = SuiteOptions::default().seed)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_SHARDS)]
    shards: usize,
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Write the JSON report here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, hide = true)]
    inject_fault: Option<String>,
}

fn parse_group(s: &str) -> std::result::Result<Group, String> {
    Group::parse(s).map_err(|e| e.to_string())
}

impl ExponentArgs {
    fn apply(self, job: &mut JobSpec) {
        job.group = self.group;
        job.n = self.n;
        job.lambda = self.lambda;
        job.mu = self.mu;
        job.theta = self.theta;
        job.alpha = self.alpha;
        job.tau = self.tau;
    }
}

impl LawArgs {
    fn apply(self, job: &mut JobSpec) -> Result<()> {
        job.kmax = self.kmax;
        let Some(base) = self.lambda_base else {
            if self.deviations.is_some() || self.rule.is_some() {
                return Err(Error::Domain("--deviations and --rule need --lambda-base".into()));
            }
            return Ok(());
        };
        let mut law = match self.deviations.as_deref() {
            Some(d) => LambdaSequence::parse_deviations(base, d)?,
            None => LambdaSequence::constant(base),
        };
        if let Some(r) = self.rule.as_deref() {
            law = law.with_rule(DeviationRule::parse(r)?);
        }
        job.law = Some(law);
        Ok(())
    }
}

impl RunArgs {
    fn apply(self, job: &mut JobSpec) {
        job.samples = Some(self.samples);
        job.shards = self.shards;
        job.seed = self.seed;
    }
}

fn job_from_cli(cli: Cli) -> Result<JobSpec> {
    Ok(match cli.cmd {
        Cmd::Sample { what: SampleCmd::Haar { group, n, count, seed, out } } => {
            let mut job = JobSpec::new(Command::Sample, Some(Family::Haar));
            job.group = Some(group);
            job.n = Some(n);
            job.count = Some(count);
            job.seed = seed;
            job.out = out;
            job
        }
        Cmd::Eval { what: EvalCmd::Rhs { family, exp, law } } => {
            let mut job = JobSpec::new(Command::Eval, Some(family));
            exp.apply(&mut job);
            law.apply(&mut job)?;
            job
        }
        Cmd::Verify { what: VerifyCmd::Identities { group, n, trials, seed, json: _ } } => {
            let mut job = JobSpec::new(Command::Verify, Some(Family::Identities));
            job.group = Some(group);
            job.n = Some(n);
            job.trials = Some(trials);
            job.seed = seed;
            job
        }
        Cmd::Verify { what: VerifyCmd::Integral { family, exp, run, csv } } => {
            if !matches!(family, Family::Group | Family::GroupTheta | Family::Ball | Family::BallConstant) {
                return Err(Error::Domain("verify integral --family must be group, group-theta, ball or ball-constant".into()));
            }
            let mut job = JobSpec::new(Command::Verify, Some(family));
            exp.apply(&mut job);
            run.apply(&mut job);
            job.csv = csv;
            job
        }
        Cmd::Verify { what: VerifyCmd::Pickrell { law, run, csv } } => {
            let mut job = JobSpec::new(Command::Verify, Some(Family::Pickrell));
            law.apply(&mut job)?;
            run.apply(&mut job);
            job.csv = csv;
            job
        }
        Cmd::Suite(a) => {
            let mut job = JobSpec::new(Command::Suite, None);
            job.profile = Some(Profile::parse(&a.profile)?);
            job.seed = a.seed;
            job.shards = a.shards;
            job.csv = a.csv;
            job.out = a.out;
            job.inject_fault = a.inject_fault;
            job
        }
        Cmd::Run { job } => {
            let text = std::fs::read_to_string(&job).map_err(|e| Error::Domain(format!("{}: {e}", job.display())))?;
            JobSpec::from_json(&text)?
        }
    })
}

/// Parses arguments into a job.
pub fn parse_job<I, T>(args: I) -> std::result::Result<JobSpec, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args)?;
    job_from_cli(cli).map_err(|e| clap::Error::raw(clap::error::ErrorKind::ValueValidation, format!("{e}\n")))
}

/// Runs a job, writing the report and side files; returns the exit code.
pub fn run(job: &JobSpec, stdout: &mut impl Write, stderr: &mut impl Write) -> i32 {
    let outcome = match execute(job) {
        Ok(o) => o,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return 2;
        }
    };
    for (path, text) in &outcome.files {
        if let Err(e) = std::fs::write(path, text) {
            let _ = writeln!(stderr, "error: cannot write {}: {e}", path.display());
            return 2;
        }
    }
    let json = serde_json::to_string_pretty(&outcome.report).expect("reports serialize");
    let written = match (&job.command, &job.out) {
        (Command::Suite, Some(path)) => std::fs::write(path, json + "\n").map_err(|e| format!("cannot write {}: {e}", path.display())),
        _ => writeln!(stdout, "{json}").map_err(|e| e.to_string()),
    };
    if let Err(e) = written {
        let _ = writeln!(stderr, "error: {e}");
        return 2;
    }
    if let Some(s) = &outcome.summary {
        let _ = write!(stderr, "{s}");
        if !s.ends_with('\n') {
            let _ = writeln!(stderr);
        }
    }
    outcome.exit_code()
}

/// Entry point for the binary.
pub fn main() -> i32 {
    let job = match parse_job(std::env::args_os()) {
        Ok(job) => job,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return if code == 0 { 0 } else { 2 };
        }
    };
    run(&job, &mut std::io::stdout().lock(), &mut std::io::stderr().lock())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn job(args: &str) -> JobSpec {
        parse_job(std::iter::once("hua-lab").chain(args.split_whitespace())).unwrap()
    }

    #[test]
    fn parses_complex_lists_and_negatives() {
        let j = job("eval rhs --family group --group u --n 2 --lambda 0.5+0.3i,-0.2 --mu 0.5-0.3i,-0.2");
        assert_eq!(j.lambda, vec![Complex64::new(0.5, 0.3), Complex64::new(-0.2, 0.0)]);
        assert_eq!(j.mu.as_ref().unwrap()[0], Complex64::new(0.5, -0.3));
        assert_eq!(j.group, Some(Group::U));
    }

    #[test]
    fn job_spec_round_trips_exactly() {
        let mut j = job("verify integral --family ball --group sp --n 1 --lambda 0.1 --alpha 0.75 --samples 1000 --seed 9 --shards 3");
        j.theta = Some(vec![0.1 + 0.2, 1.0 / 3.0]);
        let back = JobSpec::from_json(&j.to_json()).unwrap();
        assert_eq!(back, j);
        assert_eq!(back.to_json(), j.to_json());
        let p = job("verify pickrell --lambda-base 1 --deviations 2:0.5,3:-0.25 --rule geometric:0.5 --kmax 15 --samples 10");
        assert_eq!(JobSpec::from_json(&p.to_json()).unwrap(), p);
    }

    #[test]
    fn minimal_job_takes_cli_defaults() {
        let j = JobSpec::from_json(r#"{"command":"eval","family":"group","group":"so","n":2,"lambda":[[0,0],[1,0]]}"#).unwrap();
        assert_eq!(j, job("eval rhs --family group --group so --n 2 --lambda 0,1"));
    }

    #[test]
    fn circle_integral_evaluates_to_two() {
        let out = execute(&job("eval rhs --family group --group u --n 1 --lambda 1 --mu 1")).unwrap();
        let v = out.report.result["value"].as_array().unwrap();
        assert!((v[0].as_f64().unwrap() - 2.0).abs() < 1e-14);
        assert_eq!(out.report.result["formula_id"], "group_integral");
        assert_eq!(out.exit_code(), 0);
    }

    #[test]
    fn length_mismatch_is_a_domain_error() {
        let j = job("eval rhs --family group --group so --n 3 --lambda 0,1");
        assert!(matches!(execute(&j), Err(Error::Dimension { .. })));
    }

    #[test]
    fn missing_parameters_are_reported() {
        assert!(execute(&job("eval rhs --family ball --group so --lambda 1")).is_err());
        assert!(execute(&job("eval rhs --family pickrell --kmax 4")).is_err());
    }

    #[test]
    fn exit_codes_follow_pass_flag() {
        let j = job("verify integral --family group --group so --n 2 --lambda 0,1 --samples 20000 --seed 1 --shards 4");
        let o = execute(&j).unwrap();
        assert_eq!(o.report.pass, Some(true));
        assert_eq!(o.exit_code(), 0);
        let text = serde_json::to_string(&o.report).unwrap();
        assert_eq!(text.matches("\"pass\"").count(), 1);
        let back: Report = serde_json::from_str(&text).unwrap();
        assert_eq!(back.job, j);
        let mut rep = o.report.clone();
        rep.pass = Some(false);
        assert_eq!(Outcome { report: rep, files: vec![], summary: None }.exit_code(), 1);
    }

    #[test]
    fn bad_flags_do_not_parse() {
        assert!(parse_job(["hua-lab", "verify", "integral", "--family", "jn"]).is_err());
        assert!(parse_job(["hua-lab", "sample", "haar", "--group", "gl", "--n", "2", "--count", "1"]).is_err());
    }
}
