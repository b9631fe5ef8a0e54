//! The `biherm` command line.
//!
//! Exit codes: 0 pass, 1 parse or I/O failure, 2 classification refusal,
//! 3 positivity failure, 4 numerical failure or a failed check.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::certificate::{
    config_hash, plurisubharmonic_samples, resolve_time, run_certificate, CertificateConfig, Conventions,
    ExcludedSample, Pipeline, SCHEMA_VERSION,
};
use crate::deformation::positivity_sweep;
use crate::error::BihermError;
use crate::groups::{classify, fundamental_annulus_sample, real_type_check, CaseLabel, HopfGroupDocument, RealTypeReport};
use crate::inoue::{degree_sign_report, sample_points, InoueGroupData, InoueVerdict};
use crate::kernel::forms::min_eigenvalue;
use crate::oracle::{run_oracles, OracleResult};
use crate::parallel::{map_ordered, with_threads};
use crate::potentials::FlowSpec;
use crate::tolerances::Tolerances;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_PARSE: i32 = 1;
pub const EXIT_REFUSED: i32 = 2;
pub const EXIT_ANALYTIC: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

/// Environment variable capping the worker pool.
pub const THREADS_ENV: &str = "BIHERM_THREADS";

const INOUE_DEFAULT_SAMPLES: usize = 100;

#[derive(Debug, Parser)]
#[command(name = "biherm", version, about = "Strongly bihermitian structures on Hopf surfaces")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Classify group data into case (a), (b), (c) or a refusal.
    Classify(RunArgs),
    /// Build the structure at `t` (or `t*`) on seeded samples.
    Construct(RunArgs),
    /// CSV of the positivity margin and angle range over a t grid.
    Sweep(RunArgs),
    /// Full certificate report.
    Certify(RunArgs),
    /// Canonical-bundle weight checks on Inoue surfaces.
    Inoue(RunArgs),
    /// Closed-form oracle suite.
    Oracle(RunArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// JSON run config (with a "group" key) or bare group document.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long, conflicts_with = "t_grid", allow_hyphen_values = true)]
    pub t: Option<f64>,
    /// `a:b:step`, inclusive of `b`.
    #[arg(long, value_parser = parse_t_grid)]
    pub t_grid: Option<TGrid>,
    #[arg(long)]
    pub ode_tol: Option<f64>,
    #[arg(long)]
    pub fd_step: Option<f64>,
    /// Override one tolerance tier, repeatable.
    #[arg(long = "tol-tier", value_name = "NAME=X")]
    pub tol_tier: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TGrid(pub Vec<f64>);

pub fn parse_t_grid(s: &str) -> Result<TGrid, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [a, b, step] = parts.as_slice() else {
        return Err(format!("expected a:b:step, got {s:?}"));
    };
    let num = |x: &str| x.trim().parse::<f64>().map_err(|_| format!("{x:?} is not a number"));
    let (a, b, step) = (num(a)?, num(b)?, num(step)?);
    if !(a.is_finite() && b.is_finite() && step.is_finite() && step > 0.0 && b >= a) {
        return Err(format!("need finite a <= b and step > 0, got {s:?}"));
    }
    let n = ((b - a) / step + 1e-9).floor() as usize;
    if n > 100_000 {
        return Err(format!("{} grid points is too many", n + 1));
    }
    Ok(TGrid((0..=n).map(|k| ((a + k as f64 * step) * 1e12).round() / 1e12).collect()))
}

/// What a command produced: a report body and its exit code.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub body: String,
    pub code: i32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn parse(message: String) -> Self {
        Self { code: EXIT_PARSE, message }
    }
}

pub fn exit_code(e: &BihermError) -> i32 {
    match e {
        BihermError::InvalidInput(_) => EXIT_PARSE,
        BihermError::Refused(_) | BihermError::ConstraintViolation(_) | BihermError::NotFinite { .. } => EXIT_REFUSED,
        BihermError::NotPlurisubharmonic { .. } | BihermError::NotPositive { .. } => EXIT_ANALYTIC,
        BihermError::DegenerateForm { .. }
        | BihermError::SingularMetric { .. }
        | BihermError::AmbiguousRadialTime { .. }
        | BihermError::StepSizeUnderflow { .. } => EXIT_NUMERICAL,
    }
}

impl From<BihermError> for Failure {
    fn from(e: BihermError) -> Self {
        Self { code: exit_code(&e), message: e.to_string() }
    }
}

type CliResult<T> = Result<T, Failure>;

fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| Failure::parse(format!("{}: {e}", path.display())))
}

/// Parses a run config; a JSON object without a `"group"` key is taken as
/// a bare group document with default settings. Errors carry serde's line
/// and column.
pub fn parse_run_config(text: &str, origin: &str) -> CliResult<CertificateConfig> {
    let at = |e: serde_json::Error| Failure::parse(format!("{origin}: {e}"));
    let value: serde_json::Value = serde_json::from_str(text).map_err(at)?;
    if !value.is_object() {
        return Err(Failure::parse(format!("{origin}: expected a JSON object")));
    }
    if value.get("group").is_some() {
        serde_json::from_str(text).map_err(at)
    } else {
        let doc: HopfGroupDocument = serde_json::from_str(text).map_err(at)?;
        Ok(CertificateConfig::new(doc))
    }
}

fn apply_overrides(cfg: &mut CertificateConfig, args: &RunArgs) -> CliResult<()> {
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(n) = args.samples {
        cfg.samples = n;
    }
    if let Some(t) = args.t {
        cfg.t = Some(t);
    }
    if let Some(TGrid(g)) = &args.t_grid {
        cfg.t = None;
        cfg.t_grid = g.clone();
    }
    if let Some(x) = args.ode_tol {
        cfg.ode_tol = x;
    }
    if let Some(x) = args.fd_step {
        cfg.fd_step = x;
    }
    for o in &args.tol_tier {
        cfg.tolerances.apply_override(o)?;
    }
    cfg.validate()?;
    Ok(())
}

/// Reads `--config` and applies every flag on top of it.
pub fn load_config(args: &RunArgs) -> CliResult<CertificateConfig> {
    let path = args.config.as_ref().ok_or_else(|| Failure::parse("--config is required".into()))?;
    let mut cfg = parse_run_config(&read_text(path)?, &path.display().to_string())?;
    apply_overrides(&mut cfg, args)?;
    Ok(cfg)
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s
}

fn rows(m: &nalgebra::Matrix4<f64>) -> [[f64; 4]; 4] {
    std::array::from_fn(|i| std::array::from_fn(|j| m[(i, j)]))
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassifyReport {
    pub schema_version: u32,
    #[serde(flatten)]
    pub label: CaseLabel,
    pub real_type: Option<RealTypeReport>,
    pub params: HopfGroupDocument,
    pub seed: u64,
    pub tolerances: Tolerances,
    pub conventions: Conventions,
    pub config_hash: String,
}

pub fn cmd_classify(cfg: &CertificateConfig) -> CliResult<Outcome> {
    let data = cfg.group.to_data()?;
    let label = classify(&data);
    let code = if label.is_admissible() { EXIT_PASS } else { EXIT_REFUSED };
    let report = ClassifyReport {
        schema_version: SCHEMA_VERSION,
        label,
        real_type: real_type_check(&data).ok(),
        params: cfg.group.clone(),
        seed: cfg.seed,
        tolerances: cfg.tolerances,
        conventions: Conventions::default(),
        config_hash: config_hash(cfg),
    };
    Ok(Outcome { body: to_json(&report), code })
}

fn admissible(cfg: &CertificateConfig) -> CliResult<(crate::groups::HopfGroupData, CaseLabel)> {
    let data = cfg.group.to_data()?;
    let label = classify(&data);
    if !label.is_admissible() {
        return Err(BihermError::Refused(label.to_string()).into());
    }
    Ok((data, label))
}

#[derive(Debug, Clone, Serialize)]
pub struct ConstructedPoint {
    pub index: usize,
    pub x: [f64; 4],
    pub p: f64,
    pub min_metric_eigenvalue: f64,
    pub g: [[f64; 4]; 4],
    pub j_minus: [[f64; 4]; 4],
}

#[derive(Debug, Clone, Serialize)]
pub struct ConstructReport {
    pub schema_version: u32,
    pub params: HopfGroupDocument,
    pub case: CaseLabel,
    pub t: f64,
    pub t_source: String,
    pub n: usize,
    pub seed: u64,
    pub ode_tol: f64,
    pub tolerances: Tolerances,
    pub conventions: Conventions,
    pub config_hash: String,
    pub points: Vec<ConstructedPoint>,
    pub excluded_samples: Vec<ExcludedSample>,
}

pub fn cmd_construct(cfg: &CertificateConfig) -> CliResult<Outcome> {
    let (data, case) = admissible(cfg)?;
    let spec = FlowSpec::from_contraction(&data.contraction);
    let samples = fundamental_annulus_sample(cfg.seed, &data.contraction, cfg.samples);
    let good = plurisubharmonic_samples(&spec, &samples, cfg.execution)?;
    let (t, t_source) = resolve_time(&spec, &good, cfg)?;
    let pipeline = Pipeline { spec, t, ode_tol: cfg.ode_tol, psi_minus_perturbation: 0.0 };
    let built = map_ordered(&samples, cfg.execution, |_, x| pipeline.fields_adaptive(x).map(|(f, _)| f));
    let (mut points, mut excluded) = (Vec::new(), Vec::new());
    for (index, (x, r)) in samples.iter().zip(built).enumerate() {
        match r {
            Ok(f) => points.push(ConstructedPoint {
                index,
                x: x.coords,
                p: f.p,
                min_metric_eigenvalue: min_eigenvalue(&f.g),
                g: rows(&f.g),
                j_minus: rows(&f.j_minus),
            }),
            Err(e) => excluded.push(ExcludedSample { index, reason: e.to_string() }),
        }
    }
    let code = if points.is_empty() { EXIT_NUMERICAL } else { EXIT_PASS };
    let report = ConstructReport {
        schema_version: SCHEMA_VERSION,
        params: cfg.group.clone(),
        case,
        t,
        t_source: t_source.into(),
        n: cfg.samples,
        seed: cfg.seed,
        ode_tol: cfg.ode_tol,
        tolerances: cfg.tolerances,
        conventions: Conventions::default(),
        config_hash: config_hash(cfg),
        points,
        excluded_samples: excluded,
    };
    Ok(Outcome { body: to_json(&report), code })
}

/// Rows sorted by `t`; with `--t` the grid is that single time.
pub fn cmd_sweep(cfg: &CertificateConfig) -> CliResult<Outcome> {
    let (data, _) = admissible(cfg)?;
    let spec = FlowSpec::from_contraction(&data.contraction);
    let samples = fundamental_annulus_sample(cfg.seed, &data.contraction, cfg.samples);
    let good = plurisubharmonic_samples(&spec, &samples, cfg.execution)?;
    let grid = cfg.t.map_or_else(|| cfg.t_grid.clone(), |t| vec![t]);
    let table = positivity_sweep(&spec, &grid, &good, cfg.ode_tol, cfg.execution)?;
    let mut body = String::from("t,min_margin,argmin_sample_index,p_min,p_max\n");
    for r in &table {
        writeln!(body, "{},{},{},{},{}", r.t, r.min_margin, r.argmin_sample_index, r.p_min, r.p_max).unwrap();
    }
    Ok(Outcome { body, code: EXIT_PASS })
}

pub fn cmd_certify(cfg: &CertificateConfig) -> CliResult<Outcome> {
    let report = run_certificate(cfg)?;
    let code = if report.pass { EXIT_PASS } else { EXIT_NUMERICAL };
    Ok(Outcome { body: to_json(&report), code })
}

#[derive(Debug, Clone, Serialize)]
pub struct InoueReport {
    pub schema_version: u32,
    pub seed: u64,
    pub samples: usize,
    pub verdicts: Vec<InoueVerdict>,
}

/// With `--config`, one Inoue group document; otherwise the built-in
/// `S_M` and `S-` examples.
pub fn cmd_inoue(args: &RunArgs) -> CliResult<Outcome> {
    let groups = match &args.config {
        Some(path) => {
            let text = read_text(path)?;
            let doc: InoueGroupData =
                serde_json::from_str(&text).map_err(|e| Failure::parse(format!("{}: {e}", path.display())))?;
            vec![doc]
        }
        None => vec![InoueGroupData::example_sm(), InoueGroupData::example_s_minus()],
    };
    let seed = args.seed.unwrap_or(crate::certificate::DEFAULT_SEED);
    let n = args.samples.unwrap_or(INOUE_DEFAULT_SAMPLES);
    let points = sample_points(seed, n);
    let verdicts = groups.iter().map(|g| degree_sign_report(g, &points)).collect::<Result<Vec<_>, _>>()?;
    let code = if verdicts.iter().all(|v| v.canonical_degree_positive) { EXIT_PASS } else { EXIT_NUMERICAL };
    let report = InoueReport { schema_version: SCHEMA_VERSION, seed, samples: n, verdicts };
    Ok(Outcome { body: to_json(&report), code })
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleReport {
    pub schema_version: u32,
    pub seed: u64,
    pub oracles: Vec<OracleResult>,
    pub pass: bool,
}

pub fn cmd_oracle(args: &RunArgs) -> CliResult<Outcome> {
    let seed = args.seed.unwrap_or(crate::certificate::DEFAULT_SEED);
    let oracles = run_oracles(seed)?;
    let pass = oracles.iter().all(|o| o.pass);
    let report = OracleReport { schema_version: SCHEMA_VERSION, seed, oracles, pass };
    Ok(Outcome { body: to_json(&report), code: if pass { EXIT_PASS } else { EXIT_NUMERICAL } })
}

pub fn execute(command: &Command) -> CliResult<Outcome> {
    match command {
        Command::Classify(a) => cmd_classify(&load_config(a)?),
        Command::Construct(a) => cmd_construct(&load_config(a)?),
        Command::Sweep(a) => cmd_sweep(&load_config(a)?),
        Command::Certify(a) => cmd_certify(&load_config(a)?),
        Command::Inoue(a) => cmd_inoue(a),
        Command::Oracle(a) => cmd_oracle(a),
    }
}

fn out_path(command: &Command) -> Option<&Path> {
    match command {
        Command::Classify(a)
        | Command::Construct(a)
        | Command::Sweep(a)
        | Command::Certify(a)
        | Command::Inoue(a)
        | Command::Oracle(a) => a.out.as_deref(),
    }
}

fn thread_cap() -> Result<Option<usize>, String> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(format!("{THREADS_ENV} must be a positive integer, got {v:?}")),
        },
        Err(_) => Ok(None),
    }
}

/// Parses `args`, runs the command, writes the report and returns the exit
/// code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_PARSE } else { EXIT_PASS };
        }
    };
    let threads = match thread_cap() {
        Ok(t) => t,
        Err(m) => {
            eprintln!("biherm: {m}");
            return EXIT_PARSE;
        }
    };
    match with_threads(threads, || execute(&cli.command)) {
        Ok(out) => {
            match out_path(&cli.command) {
                Some(p) => {
                    if let Err(e) = std::fs::write(p, &out.body) {
                        eprintln!("biherm: {}: {e}", p.display());
                        return EXIT_PARSE;
                    }
                }
                None => print!("{}", out.body),
            }
            out.code
        }
        Err(f) => {
            eprintln!("biherm: {}", f.message);
            f.code
        }
    }
}
