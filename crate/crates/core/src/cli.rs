//! The `specdens` command line: flags or a JSON job file in, CSV or JSON
//! tables out.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::Error;
use crate::kernel::{density_grid, density_table, OrthonormalSystem};
use crate::limit_density::{ode_residual, DensityModel};
use crate::moments::{
    carleman_partial_sum, finite_moments, hankel_positive, lambda_det, limit_moments,
    moment_convergence_report,
};
use crate::perturbation::{perturbation_convergence_report, PerturbationSpec};
use crate::recurrence::recurrence_table;
use crate::scaling::{scaling_model, ScalingModel};
use crate::weights::WeightSpec;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Largest k accepted for moment tables.
pub const KMAX_CAP: usize = 12;
const DEFAULT_KMAX: usize = 8;
const DEFAULT_GRID: usize = 512;
const DEFAULT_N_LIST: [usize; 4] = [25, 50, 100, 200];
const DEFAULT_VALIDATE_TOL: f64 = 1e-10;
const DEFAULT_ODE_TOL: f64 = 1e-6;
const ODE_STEP: f64 = 1e-4;
// The difference quotient loses accuracy next to square-root edges and
// power-law points, so the check runs on the interior only.
const ODE_INTERIOR_MARGIN: f64 = 0.1;
const HANKEL_MAX_N: usize = 6;
const LAMBDA_DET_MAX_N: usize = 3;
const CARLEMAN_TERMS: usize = 20;
const GRAM_MAX_N: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Density,
    Moments,
    Converge,
    Perturb,
    Validate,
    OdeCheck,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Finite-N and limiting eigenvalue densities of unitary ensembles.
#[derive(Debug, Parser)]
#[command(name = "specdens", version)]
pub struct Args {
    /// What to compute; may instead come from the config file.
    #[arg(value_enum)]
    pub command: Option<Command>,
    /// JSON job file; flags given on the command line take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// hermite, laguerre, jacobi or genhermite.
    #[arg(long)]
    pub weight: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub beta: Option<f64>,
    #[arg(long = "N")]
    pub n: Option<usize>,
    #[arg(long = "N-list", value_delimiter = ',')]
    pub n_list: Option<Vec<usize>>,
    #[arg(long)]
    pub kmax: Option<usize>,
    #[arg(long)]
    pub grid: Option<usize>,
    /// Override the scaling exponent.
    #[arg(long, allow_negative_numbers = true)]
    pub lambda: Option<f64>,
    /// Override the limiting shift.
    #[arg(long, allow_negative_numbers = true)]
    pub b: Option<f64>,
    /// Perturbation coefficients c0,c1,... in ascending order.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub p: Option<Vec<f64>>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    pub tol: Option<f64>,
}

/// A job as read from a JSON file. Every field is optional so that flags can
/// fill the gaps.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobConfig {
    pub command: Option<Command>,
    pub weight: Option<serde_json::Value>,
    #[serde(rename = "N")]
    pub n: Option<usize>,
    #[serde(rename = "N_list")]
    pub n_list: Option<Vec<usize>>,
    pub k_max: Option<usize>,
    pub grid_points: Option<usize>,
    pub lambda: Option<f64>,
    pub b: Option<f64>,
    pub p_coeffs: Option<Vec<f64>>,
    pub output: Option<PathBuf>,
    pub format: Option<Format>,
    pub tol: Option<f64>,
}

impl JobConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Usage(format!("bad config: {e}")))
    }

    /// Flags win over the file.
    pub fn merge_flags(mut self, args: &Args) -> Result<Self, CliError> {
        if args.command.is_some() {
            self.command = args.command;
        }
        if args.weight.is_some() || args.alpha.is_some() || args.beta.is_some() {
            let mut w = match self.weight.take() {
                Some(serde_json::Value::Object(map)) => map,
                Some(other) => return Err(CliError::Usage(format!("weight must be an object, got {other}"))),
                None => serde_json::Map::new(),
            };
            if let Some(family) = &args.weight {
                if w.get("family").and_then(|f| f.as_str()) != Some(family.as_str()) {
                    w.clear();
                }
                w.insert("family".into(), json!(family));
            }
            if let Some(a) = args.alpha {
                w.insert("alpha".into(), json!(a));
            }
            if let Some(b) = args.beta {
                w.insert("beta".into(), json!(b));
            }
            self.weight = Some(serde_json::Value::Object(w));
        }
        macro_rules! take {
            ($flag:expr, $field:expr) => {
                if let Some(v) = $flag.clone() {
                    $field = Some(v);
                }
            };
        }
        take!(args.n, self.n);
        take!(args.n_list, self.n_list);
        take!(args.kmax, self.k_max);
        take!(args.grid, self.grid_points);
        take!(args.lambda, self.lambda);
        take!(args.b, self.b);
        take!(args.p, self.p_coeffs);
        take!(args.out, self.output);
        take!(args.format, self.format);
        take!(args.tol, self.tol);
        Ok(self)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("{0}")]
    Numerical(Error),
    #[error("cannot write output: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Numerical(_) | CliError::Io(_) => EXIT_NUMERICAL,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter(msg) => CliError::Usage(msg),
            other => CliError::Numerical(other),
        }
    }
}

/// A fully checked job.
#[derive(Debug, Clone)]
pub struct Job {
    pub command: Command,
    pub weight: WeightSpec,
    pub scaling: ScalingModel,
    pub n: Option<usize>,
    pub n_list: Vec<usize>,
    pub k_max: usize,
    pub grid_points: usize,
    pub p: Option<PerturbationSpec>,
    pub output: Option<PathBuf>,
    pub format: Format,
    pub tol: Option<f64>,
}

impl Job {
    pub fn from_config(config: JobConfig) -> Result<Self, CliError> {
        let command = config
            .command
            .ok_or_else(|| CliError::Usage("no command given".into()))?;
        let weight_json = config
            .weight
            .ok_or_else(|| CliError::Usage("no weight given (use --weight)".into()))?;
        let weight: WeightSpec = serde_json::from_value(weight_json)
            .map_err(|e| CliError::Usage(format!("bad weight: {e}")))?;
        let mut scaling = scaling_model(&weight)?;
        if let Some(lambda) = config.lambda {
            scaling = scaling.with_lambda(lambda)?;
        }
        if let Some(b) = config.b {
            scaling = scaling.with_b(b);
        }
        if config.n == Some(0) || config.n_list.as_ref().is_some_and(|l| l.contains(&0)) {
            return Err(CliError::Usage("N must be at least 1".into()));
        }
        let k_max = config.k_max.unwrap_or(DEFAULT_KMAX);
        if k_max > KMAX_CAP {
            return Err(CliError::Usage(format!("kmax must not exceed {KMAX_CAP}, got {k_max}")));
        }
        let grid_points = config.grid_points.unwrap_or(DEFAULT_GRID);
        if grid_points < 2 {
            return Err(CliError::Usage("grid needs at least 2 points".into()));
        }
        if let Some(tol) = config.tol {
            if !(tol > 0.0) || !tol.is_finite() {
                return Err(CliError::Usage(format!("tol must be positive, got {tol}")));
            }
        }
        let p = config.p_coeffs.map(PerturbationSpec::new).transpose()?;
        let needs_n = matches!(command, Command::Density | Command::Moments);
        if needs_n && config.n.is_none() {
            return Err(CliError::Usage(format!("{command:?} needs --N").to_lowercase()));
        }
        if command == Command::Perturb && p.is_none() {
            return Err(CliError::Usage("perturb needs --p".into()));
        }
        let n_list = match (config.n_list, config.n) {
            (Some(list), _) if !list.is_empty() => list,
            (Some(_), _) => return Err(CliError::Usage("N list is empty".into())),
            (None, Some(n)) => vec![n],
            (None, None) => DEFAULT_N_LIST.to_vec(),
        };
        Ok(Job {
            command,
            weight,
            scaling,
            n: config.n,
            n_list,
            k_max,
            grid_points,
            p,
            output: config.output,
            format: config.format.unwrap_or_default(),
            tol: config.tol,
        })
    }
}

/// Outcome of a command: the text to emit and whether the checks passed.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub text: String,
    pub failure: Option<String>,
}

impl Report {
    fn ok(text: String) -> Self {
        Report { text, failure: None }
    }
}

pub fn execute(job: &Job) -> Result<Report, CliError> {
    match job.command {
        Command::Density => density(job),
        Command::Moments => moments(job),
        Command::Converge => converge(job),
        Command::Perturb => perturb(job),
        Command::Validate => validate(job),
        Command::OdeCheck => ode_check(job),
    }
}

fn limit_model(scaling: &ScalingModel) -> Result<DensityModel, Error> {
    DensityModel::new(scaling.lambda, scaling.b_limit)
}

fn density(job: &Job) -> Result<Report, CliError> {
    let n = job.n.expect("checked in Job::from_config");
    let table = recurrence_table(&job.weight, n + 1)?;
    let system = OrthonormalSystem::new(job.weight.clone(), table);
    let grid = density_grid(&job.scaling, job.grid_points)?;
    let finite = density_table(&system, n, &job.scaling, grid)?;
    let model = limit_model(&job.scaling)?;
    // the limit may be infinite at isolated points such as 0
    let limit = finite
        .grid
        .iter()
        .map(|&x| match model.density(x) {
            Ok(v) => Ok(v),
            Err(Error::Singular { .. }) => Ok(f64::INFINITY),
            Err(e) => Err(e),
        })
        .collect::<Result<Vec<f64>, Error>>()?;
    let text = match job.format {
        Format::Csv => {
            let mut out = String::from("x,sigma,sigma_limit\n");
            for ((x, s), l) in finite.grid.iter().zip(&finite.values).zip(&limit) {
                writeln!(out, "{x:?},{s:?},{l:?}").unwrap();
            }
            out
        }
        Format::Json => json!({
            "N": n,
            "grid": finite.grid,
            "sigma": finite.values,
            "sigma_limit": limit.iter().map(|v| if v.is_finite() { json!(v) } else { json!("inf") }).collect::<Vec<_>>(),
        })
        .to_string(),
    };
    Ok(Report::ok(text))
}

fn moments(job: &Job) -> Result<Report, CliError> {
    let n = job.n.expect("checked in Job::from_config");
    let table = recurrence_table(&job.weight, n + job.k_max)?;
    let text = match job.format {
        Format::Csv => moment_convergence_report(&table, &job.scaling, &[n], job.k_max)?.to_csv(),
        Format::Json => {
            let finite = finite_moments(&table, &job.scaling, n, job.k_max)?;
            let limit = limit_moments(&job.scaling, job.k_max);
            json!({ "finite": finite, "limit": limit }).to_string()
        }
    };
    Ok(Report::ok(text))
}

fn converge(job: &Job) -> Result<Report, CliError> {
    let n_top = *job.n_list.iter().max().expect("non-empty list");
    let table = recurrence_table(&job.weight, n_top + job.k_max)?;
    let report = moment_convergence_report(&table, &job.scaling, &job.n_list, job.k_max)?;
    Ok(Report::ok(match job.format {
        Format::Csv => report.to_csv(),
        Format::Json => report.to_json(),
    }))
}

fn perturb(job: &Job) -> Result<Report, CliError> {
    let p = job.p.as_ref().expect("checked in Job::from_config");
    let report = perturbation_convergence_report(&job.weight, p, &job.scaling, &job.n_list, job.k_max)?;
    let failure = (!report.all_bounds_ok()).then(|| {
        let bad: Vec<String> = report
            .rows
            .iter()
            .filter(|r| !r.bound_ok)
            .map(|r| format!("(N={}, k={})", r.n, r.k))
            .collect();
        format!("theta exceeds its bound at {}", bad.join(" "))
    });
    let text = match job.format {
        Format::Csv => report.to_csv(),
        Format::Json => report.to_json(),
    };
    Ok(Report { text, failure })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct Check {
    name: &'static str,
    passed: Option<bool>,
    detail: String,
}

fn validate(job: &Job) -> Result<Report, CliError> {
    let scaling = &job.scaling;
    let limit = limit_moments(scaling, 2 * CARLEMAN_TERMS.max(HANKEL_MAX_N));
    let mut checks = Vec::new();

    let hankel = (0..=HANKEL_MAX_N).all(|n| hankel_positive(&limit, n));
    checks.push(Check {
        name: "hankel",
        passed: Some(hankel),
        detail: format!("n<={HANKEL_MAX_N}"),
    });

    // the moments are bounded by (3B)^{2k}, B = 1/2 + |b|
    let radius = 0.5 + scaling.b_limit.abs();
    let sums = (1..=CARLEMAN_TERMS)
        .map(|k| carleman_partial_sum(&limit, k))
        .collect::<Result<Vec<_>, _>>()?;
    let linear = sums
        .iter()
        .enumerate()
        .all(|(i, s)| *s >= (i + 1) as f64 / (3.0 * radius));
    checks.push(Check {
        name: "carleman",
        passed: Some(linear),
        detail: format!("K<={CARLEMAN_TERMS}, floor 1/(3B), B={radius:?}"),
    });

    if scaling.lambda > 0.0 {
        let dets = (0..=LAMBDA_DET_MAX_N)
            .map(|n| lambda_det(scaling.lambda, n))
            .collect::<Result<Vec<_>, _>>()?;
        checks.push(Check {
            name: "lambda_det",
            passed: Some(dets.iter().all(|d| *d > 0.0)),
            detail: format!("n<={LAMBDA_DET_MAX_N}"),
        });
    } else {
        checks.push(Check {
            name: "lambda_det",
            passed: None,
            detail: "lambda=0".into(),
        });
    }

    let n = job.n.unwrap_or(GRAM_MAX_N);
    let tol = job.tol.unwrap_or(DEFAULT_VALIDATE_TOL);
    let table = recurrence_table(&job.weight, n)?;
    let system = OrthonormalSystem::new(job.weight.clone(), table);
    let gram = system.gauss_gram(n, n)?;
    let worst = gram
        .iter()
        .enumerate()
        .flat_map(|(j, row)| row.iter().enumerate().map(move |(k, v)| (v - if j == k { 1.0 } else { 0.0 }).abs()))
        .fold(0.0f64, f64::max);
    checks.push(Check {
        name: "normalization",
        passed: Some(worst <= tol),
        detail: format!("N={n}, max deviation {worst:?}"),
    });

    let failed: Vec<&str> = checks
        .iter()
        .filter(|c| c.passed == Some(false))
        .map(|c| c.name)
        .collect();
    let text = match job.format {
        Format::Csv => {
            let mut out = String::new();
            for c in &checks {
                let verdict = match c.passed {
                    Some(true) => "PASS",
                    Some(false) => "FAIL",
                    None => "SKIP",
                };
                writeln!(out, "{}: {verdict} ({})", c.name, c.detail).unwrap();
            }
            out
        }
        Format::Json => serde_json::to_string(&checks).expect("checks serialize"),
    };
    Ok(Report {
        text,
        failure: (!failed.is_empty()).then(|| failed.join(", ")),
    })
}

fn ode_check(job: &Job) -> Result<Report, CliError> {
    let model = limit_model(&job.scaling)?;
    let tol = job.tol.unwrap_or(DEFAULT_ODE_TOL);
    let [lo, hi] = model.support;
    let margin = ODE_INTERIOR_MARGIN;
    let avoid = [0.0, model.b - 1.0, model.b + 1.0];
    let grid = density_grid(&job.scaling, job.grid_points)?;
    let mut rows = Vec::new();
    for x in grid {
        if x < lo + margin || x > hi - margin || avoid.iter().any(|c| (x - c).abs() < margin) {
            continue;
        }
        let r = ode_residual(|t| model.density(t), |t| model.source(t), model.lambda, x, ODE_STEP)?;
        rows.push((x, r));
    }
    let worst = rows.iter().fold(0.0f64, |m, (_, r)| m.max(*r));
    let text = match job.format {
        Format::Csv => {
            let mut out = String::from("x,residual\n");
            for (x, r) in &rows {
                writeln!(out, "{x:?},{r:?}").unwrap();
            }
            out
        }
        Format::Json => json!({
            "lambda": model.lambda,
            "b": model.b,
            "step": ODE_STEP,
            "max_residual": worst,
            "x": rows.iter().map(|r| r.0).collect::<Vec<_>>(),
            "residual": rows.iter().map(|r| r.1).collect::<Vec<_>>(),
        })
        .to_string(),
    };
    let failure = (worst > tol).then(|| format!("max ODE residual {worst:e} exceeds {tol:e}"));
    Ok(Report { text, failure })
}

/// Write `text` to `path` through a temporary file in the same directory, so
/// readers never see a partial file.
pub fn write_atomic(path: &Path, text: &str) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(text.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("SPECDENS_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t >= 1)
        .ok_or_else(|| CliError::Usage(format!("SPECDENS_THREADS must be a positive integer, got {raw:?}")))?;
    // a pool may already exist when called twice in one process
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    Ok(())
}

fn run_parsed(args: &Args) -> Result<(), CliError> {
    configure_threads()?;
    let config = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
            JobConfig::from_json(&text)?
        }
        None => JobConfig::default(),
    };
    let job = Job::from_config(config.merge_flags(args)?)?;
    let report = execute(&job)?;
    match &job.output {
        Some(path) => write_atomic(path, &report.text)?,
        None => std::io::stdout().lock().write_all(report.text.as_bytes())?,
    }
    match report.failure {
        Some(msg) => Err(CliError::Validation(msg)),
        None => Ok(()),
    }
}

/// Parse `argv`, run the job and return the process exit code. Diagnostics
/// go to stderr.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run_parsed(&args) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("specdens: {e}");
            e.exit_code()
        }
    }
}
