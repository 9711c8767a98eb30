//! Command-line front end: request parsing, command execution and report export.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use nlell_core::builtin::{builtin_document, builtin_example};
use nlell_core::certify::{
    certify_existence, certify_nonexistence, CertifyOptions, ExistenceCertificate, NonexistenceCertificate,
    NonexistenceMode, UserConstants, Verdict,
};
use nlell_core::elliptic::{principal_eigenpair, validate_operator, ValidationReport};
use nlell_core::grid::{Resolution, ScalarField};
use nlell_core::problem::{load_problem, Problem, ProblemSpec};
use nlell_core::solver::{multi_start_solve, parse_starts, Acceleration, SolveResult, SolverOptions, StartPreset};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] nlell_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid JSON in {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("usage error: {0}")]
    Usage(String),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.kind(),
            CliError::Io { .. } => "io",
            CliError::Json { .. } => "json",
            CliError::Usage(_) => "usage",
        }
    }

    /// Single-line machine-readable error record.
    pub fn record(&self) -> String {
        serde_json::json!({"error": {"kind": self.kind(), "message": self.to_string()}}).to_string()
    }
}

pub type CliResult<T> = Result<T, CliError>;

// ---------------------------------------------------------------------------
// Arguments
// ---------------------------------------------------------------------------

#[derive(Debug, Parser)]
#[command(name = "nlell", version, about = "Solver and hypothesis checker for nonlocal elliptic systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CommandName,
    #[command(flatten)]
    pub args: CommonArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandName {
    /// Multi-start fixed-point search.
    Solve,
    /// Check the existence hypotheses.
    CertifyExistence,
    /// Check the non-existence inequality.
    CertifyNonexistence,
    /// Principal eigenpair of each component operator.
    Eigen,
    /// Boundary lifts gamma_i.
    Lift,
    /// Print a built-in problem document.
    Example,
    /// Load and validate a problem.
    Validate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, clap::Args)]
pub struct CommonArgs {
    /// Built-in problem: ex-3.1, ex-3.2 or mean-field.
    #[arg(long, global = true, conflicts_with = "input")]
    pub example: Option<String>,
    /// Problem document (JSON).
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,
    /// Resolution `n` or `n,m` (disk: rings,angles; rectangle: cells in x,y).
    #[arg(long, global = true)]
    pub grid: Option<String>,
    #[arg(long, global = true, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long = "max-iter", global = true, default_value_t = 5000)]
    pub max_iter: usize,
    #[arg(long, global = true, default_value_t = 0.5)]
    pub damping: f64,
    /// none | anderson:<m>
    #[arg(long, global = true, default_value = "none")]
    pub accel: String,
    /// Comma-separated: zero, mid, top, random:<k>
    #[arg(long, global = true, default_value = "mid,top")]
    pub starts: String,
    #[arg(long, global = true, default_value_t = 9)]
    pub samples: usize,
    /// auto | constants:<path>
    #[arg(long, global = true, default_value = "auto")]
    pub mode: String,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Json)]
    pub format: OutputFormat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemSource {
    Example(String),
    Input(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub enum GridArg {
    Uniform(usize),
    Pair(usize, usize),
}

impl GridArg {
    pub fn parse(s: &str) -> CliResult<Self> {
        let bad = || CliError::Usage(format!("invalid --grid `{s}`; expected n or n,m"));
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let num = |p: &str| p.parse::<usize>().map_err(|_| bad());
        match parts.as_slice() {
            [n] => Ok(GridArg::Uniform(num(n)?)),
            [n, m] => Ok(GridArg::Pair(num(n)?, num(m)?)),
            _ => Err(bad()),
        }
    }

    fn resolution(&self, spec: &ProblemSpec) -> Resolution {
        match *self {
            GridArg::Uniform(n) => Resolution::uniform(&spec.domain, n),
            GridArg::Pair(n, m) => Resolution::new(n, m),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModeArg {
    Auto,
    Constants(PathBuf),
}

/// A fully validated command.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandRequest {
    pub command: CommandName,
    pub source: ProblemSource,
    pub grid: Option<GridArg>,
    pub solver: SolverOptions,
    pub certify: CertifyOptions,
    pub mode: ModeArg,
    pub format: OutputFormat,
    pub output: Option<PathBuf>,
}

impl CommandRequest {
    /// Builds a request from parsed arguments, validating every flag.
    pub fn from_cli(cli: Cli) -> CliResult<Self> {
        let a = cli.args;
        let source = match (a.example, a.input) {
            (Some(id), None) => ProblemSource::Example(id),
            (None, Some(p)) => ProblemSource::Input(p),
            _ => return Err(CliError::Usage("exactly one of --example or --input is required".into())),
        };
        let grid = a.grid.as_deref().map(GridArg::parse).transpose()?;
        let solver = SolverOptions {
            tol: a.tol,
            max_iter: a.max_iter,
            damping: a.damping,
            acceleration: a.accel.parse::<Acceleration>()?,
            starts: parse_starts(&a.starts)?,
            seed: a.seed,
        };
        solver.validate()?;
        let certify = CertifyOptions {
            samples: a.samples,
            seed: a.seed,
            ..CertifyOptions::default()
        };
        certify.validate()?;
        let mode = match a.mode.as_str() {
            "auto" => ModeArg::Auto,
            m => match m.strip_prefix("constants:") {
                Some(p) if !p.is_empty() => ModeArg::Constants(PathBuf::from(p)),
                _ => return Err(CliError::Usage(format!("invalid --mode `{m}`; expected auto or constants:<path>"))),
            },
        };
        if a.format == OutputFormat::Csv && cli.command == CommandName::Example {
            return Err(CliError::Usage("csv output is not available for `example`".into()));
        }
        Ok(Self {
            command: cli.command,
            source,
            grid,
            solver,
            certify,
            mode,
            format: a.format,
            output: a.output,
        })
    }

    pub fn parse_from<I, T>(args: I) -> CliResult<Self>
    where
        I: IntoIterator<Item = T>,
        T: Into<std::ffi::OsString> + Clone,
    {
        let cli = Cli::try_parse_from(args).map_err(|e| CliError::Usage(e.to_string()))?;
        Self::from_cli(cli)
    }
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool_version: String,
    pub command: CommandName,
    pub problem: ProblemSource,
    pub resolution: Option<Resolution>,
    pub nodes: Option<usize>,
    pub tol: f64,
    pub max_iter: usize,
    pub damping: f64,
    pub acceleration: Acceleration,
    pub starts: Vec<StartPreset>,
    pub samples: usize,
    pub seed: u64,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EigenReport {
    pub component: usize,
    pub r: f64,
    pub mu: f64,
    pub residual: f64,
    pub iterations: usize,
    pub phi: ScalarField,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LiftReport {
    pub component: usize,
    pub sup_norm: f64,
    pub gamma: ScalarField,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ReportBody {
    Solve {
        nodes: Vec<[f64; 2]>,
        results: Vec<SolveResult>,
    },
    Existence {
        certificate: ExistenceCertificate,
    },
    Nonexistence {
        certificate: NonexistenceCertificate,
    },
    Eigen {
        nodes: Vec<[f64; 2]>,
        components: Vec<EigenReport>,
    },
    Lift {
        nodes: Vec<[f64; 2]>,
        components: Vec<LiftReport>,
    },
    Example {
        id: String,
        document: serde_json::Value,
    },
    Validate {
        components: Vec<ValidationReport>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportDocument {
    pub provenance: Provenance,
    pub result: ReportBody,
}

/// Exit status of a completed command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success,
    /// A certificate verdict of FAIL or NOT-CERTIFIED.
    Verdict,
    NotConverged,
}

impl Status {
    pub fn code(self) -> i32 {
        match self {
            Status::Success => 0,
            Status::Verdict => 2,
            Status::NotConverged => 3,
        }
    }
}

/// Exit code used for tool errors.
pub const ERROR_EXIT: i32 = 1;

fn read(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn load_spec(source: &ProblemSource) -> CliResult<ProblemSpec> {
    Ok(match source {
        ProblemSource::Example(id) => builtin_example(id)?,
        ProblemSource::Input(p) => load_problem(&read(p)?)?,
    })
}

fn verdict_status(v: Verdict) -> Status {
    if v == Verdict::Pass {
        Status::Success
    } else {
        Status::Verdict
    }
}

/// Loads the problem, runs the command and assembles the report.
pub fn run_command(req: &CommandRequest) -> CliResult<(Status, ReportDocument)> {
    let started = Instant::now();
    let mut provenance = Provenance {
        tool_version: env!("CARGO_PKG_VERSION").into(),
        command: req.command,
        problem: req.source.clone(),
        resolution: None,
        nodes: None,
        tol: req.solver.tol,
        max_iter: req.solver.max_iter,
        damping: req.solver.damping,
        acceleration: req.solver.acceleration,
        starts: req.solver.starts.clone(),
        samples: req.certify.samples,
        seed: req.solver.seed,
        wall_time_s: 0.0,
    };
    if req.command == CommandName::Example {
        let ProblemSource::Example(id) = &req.source else {
            return Err(CliError::Usage("`example` requires --example <id>".into()));
        };
        let text = builtin_document(id)?;
        let document = serde_json::from_str(&text).map_err(|source| CliError::Json {
            path: id.clone(),
            source,
        })?;
        provenance.wall_time_s = started.elapsed().as_secs_f64();
        return Ok((
            Status::Success,
            ReportDocument {
                provenance,
                result: ReportBody::Example { id: id.clone(), document },
            },
        ));
    }
    let spec = load_spec(&req.source)?;
    let resolution = req.grid.as_ref().map(|g| g.resolution(&spec));
    let constants = match (&req.mode, req.command) {
        (ModeArg::Constants(p), CommandName::CertifyNonexistence) => {
            let c: UserConstants = serde_json::from_str(&read(p)?).map_err(|source| CliError::Json {
                path: p.display().to_string(),
                source,
            })?;
            Some(c)
        }
        _ => None,
    };
    let problem = Problem::new(spec, resolution)?;
    let grid = problem.grid();
    provenance.resolution = Some(grid.resolution());
    provenance.nodes = Some(grid.len());
    let nodes = || grid.nodes().to_vec();
    let (status, result) = match req.command {
        CommandName::Solve => {
            let results = multi_start_solve(&problem, &req.solver)?;
            let status = if results.iter().any(|r| r.converged) {
                Status::Success
            } else {
                Status::NotConverged
            };
            (status, ReportBody::Solve { nodes: nodes(), results })
        }
        CommandName::CertifyExistence => {
            let certificate = certify_existence(&problem, &req.certify)?;
            (verdict_status(certificate.verdict), ReportBody::Existence { certificate })
        }
        CommandName::CertifyNonexistence => {
            let mode = match constants {
                Some(c) => NonexistenceMode::UserConstants {
                    tau: c.tau,
                    theta: c.theta,
                },
                None => NonexistenceMode::AutoBound,
            };
            let certificate = certify_nonexistence(&problem, mode, &req.certify)?;
            (verdict_status(certificate.verdict), ReportBody::Nonexistence { certificate })
        }
        CommandName::Eigen => {
            let components = (0..problem.n())
                .map(|i| {
                    let e = principal_eigenpair(&problem.discrete(i).operator, req.certify.eigen_tol, req.certify.eigen_max_iter)?;
                    Ok(EigenReport {
                        component: i + 1,
                        r: e.r,
                        mu: e.mu,
                        residual: e.residual,
                        iterations: e.iterations,
                        phi: e.phi,
                    })
                })
                .collect::<CliResult<Vec<_>>>()?;
            (Status::Success, ReportBody::Eigen { nodes: nodes(), components })
        }
        CommandName::Lift => {
            let components = (0..problem.n())
                .map(|i| {
                    let gamma = problem.discrete(i).gamma.clone();
                    LiftReport {
                        component: i + 1,
                        sup_norm: gamma.sup_norm(),
                        gamma,
                    }
                })
                .collect();
            (Status::Success, ReportBody::Lift { nodes: nodes(), components })
        }
        CommandName::Validate => {
            let components = problem
                .spec()
                .components
                .iter()
                .map(|c| validate_operator(&c.operator, &c.boundary, grid))
                .collect::<Result<Vec<_>, _>>()?;
            (Status::Success, ReportBody::Validate { components })
        }
        CommandName::Example => unreachable!("handled above"),
    };
    provenance.wall_time_s = started.elapsed().as_secs_f64();
    Ok((status, ReportDocument { provenance, result }))
}

// ---------------------------------------------------------------------------
// Export
// ---------------------------------------------------------------------------

/// Formats with 17 significant digits.
fn num(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    format!("{v:.16e}")
}

fn field_table(out: &mut String, prefix: &str, nodes: &[[f64; 2]], fields: &[&ScalarField]) {
    out.push_str("x1,x2");
    for i in 1..=fields.len() {
        let _ = write!(out, ",{prefix}{i}");
    }
    out.push('\n');
    for (k, p) in nodes.iter().enumerate() {
        let _ = write!(out, "{},{}", num(p[0]), num(p[1]));
        for f in fields {
            let _ = write!(out, ",{}", num(f[k]));
        }
        out.push('\n');
    }
}

fn constants_table(rows: &[(String, usize, f64)]) -> String {
    let mut out = String::from("name,component,value\n");
    for (name, c, v) in rows {
        let _ = writeln!(out, "{name},{c},{}", num(*v));
    }
    out
}

fn existence_rows(cert: &ExistenceCertificate) -> Vec<(String, usize, f64)> {
    let mut rows = Vec::new();
    for (i, c) in cert.components.iter().enumerate() {
        let k = i + 1;
        if let Some(w) = c.w_interval {
            rows.push(("w_lower".into(), k, w.lo));
            rows.push(("w_upper".into(), k, w.hi));
        }
        for (name, v) in [
            ("lambda", c.lambda),
            ("eta", c.eta),
            ("rho", c.rho),
            ("f_min", c.f_min.value),
            ("M", c.m.value),
            ("h_min", c.h_min.value),
            ("h_bar", c.h_bar.value),
            ("K1_norm", c.k_one_norm),
            ("gamma_norm", c.gamma_norm),
            ("mu", c.mu),
            ("check", c.check),
            ("margin", c.margin),
        ] {
            rows.push((name.into(), k, v));
        }
    }
    if let Some(cc) = &cert.condition_c {
        for (name, v) in [("rho0", cc.rho0), ("delta", cc.delta), ("eigen_margin", cc.eigen_margin)] {
            rows.push((name.into(), cc.i0, v));
        }
    }
    rows
}

fn nonexistence_rows(cert: &NonexistenceCertificate) -> Vec<(String, usize, f64)> {
    let mut rows = Vec::new();
    for (i, c) in cert.components.iter().enumerate() {
        let k = i + 1;
        if let Some(w) = c.w_interval {
            rows.push(("w_lower".into(), k, w.lo));
            rows.push(("w_upper".into(), k, w.hi));
        }
        for (name, v) in [
            ("lambda", c.lambda),
            ("eta", c.eta),
            ("tau", c.tau.value),
            ("theta", c.theta.value),
            ("K1_norm", c.k_one_norm),
            ("gamma_norm", c.gamma_norm),
            ("check", c.check),
            ("margin", c.margin),
        ] {
            rows.push((name.into(), k, v));
        }
    }
    rows
}

/// Serialises a report as pretty JSON or as CSV (one row per grid node for
/// fields, one row per constant for certificates).
pub fn export_result(report: &ReportDocument, format: OutputFormat) -> CliResult<Vec<u8>> {
    match format {
        OutputFormat::Json => {
            let mut s = serde_json::to_string_pretty(report).map_err(|source| CliError::Json {
                path: "report".into(),
                source,
            })?;
            s.push('\n');
            Ok(s.into_bytes())
        }
        OutputFormat::Csv => {
            let mut out = String::new();
            match &report.result {
                ReportBody::Solve { nodes, results } => {
                    let best = results
                        .first()
                        .ok_or_else(|| CliError::Usage("no solve result to export".into()))?;
                    let fields: Vec<&ScalarField> = best.state.components().iter().collect();
                    field_table(&mut out, "u", nodes, &fields);
                }
                ReportBody::Eigen { nodes, components } => {
                    let fields: Vec<&ScalarField> = components.iter().map(|c| &c.phi).collect();
                    field_table(&mut out, "phi", nodes, &fields);
                }
                ReportBody::Lift { nodes, components } => {
                    let fields: Vec<&ScalarField> = components.iter().map(|c| &c.gamma).collect();
                    field_table(&mut out, "gamma", nodes, &fields);
                }
                ReportBody::Existence { certificate } => out = constants_table(&existence_rows(certificate)),
                ReportBody::Nonexistence { certificate } => out = constants_table(&nonexistence_rows(certificate)),
                ReportBody::Validate { components } => {
                    let rows: Vec<_> = components
                        .iter()
                        .enumerate()
                        .flat_map(|(i, r)| {
                            [
                                ("ellipticity_constant".to_string(), i + 1, r.ellipticity_constant),
                                ("min_zeroth_order".to_string(), i + 1, r.min_zeroth_order),
                                ("upwind_nodes".to_string(), i + 1, r.upwind_nodes.len() as f64),
                            ]
                        })
                        .collect();
                    out = constants_table(&rows);
                }
                ReportBody::Example { .. } => {
                    return Err(CliError::Usage("csv output is not available for `example`".into()))
                }
            }
            Ok(out.into_bytes())
        }
    }
}

/// One-line human summary written to stderr.
pub fn summary(status: Status, report: &ReportDocument) -> String {
    match &report.result {
        ReportBody::Solve { results, .. } => {
            let labels: Vec<String> = results
                .iter()
                .map(|r| format!("{}:{}(norm {:.6e}, residual {:.2e})", r.start, r.label(), r.norm, r.residual))
                .collect();
            format!("solve: {}", labels.join(" "))
        }
        ReportBody::Existence { certificate } => format!("existence: {}", certificate.verdict),
        ReportBody::Nonexistence { certificate } => format!("non-existence: {}", certificate.verdict),
        ReportBody::Eigen { components, .. } => {
            let mus: Vec<String> = components.iter().map(|c| format!("mu{} = {:.6}", c.component, c.mu)).collect();
            format!("eigen: {}", mus.join(", "))
        }
        ReportBody::Lift { .. } => "lift: done".into(),
        ReportBody::Example { id, .. } => format!("example: {id}"),
        ReportBody::Validate { .. } => format!("validate: ok (exit {})", status.code()),
    }
}

fn write_output(req: &CommandRequest, bytes: &[u8]) -> CliResult<()> {
    use std::io::Write;
    match &req.output {
        Some(p) => std::fs::write(p, bytes).map_err(|source| CliError::Io {
            path: p.display().to_string(),
            source,
        }),
        None => std::io::stdout().write_all(bytes).map_err(|source| CliError::Io {
            path: "<stdout>".into(),
            source,
        }),
    }
}

/// Parses arguments, runs the command, writes the report, and returns the exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) => {
            print!("{e}");
            return 0;
        }
        Err(e) => {
            let err = CliError::Usage(e.to_string().lines().next().unwrap_or_default().to_string());
            eprintln!("{}", err.record());
            return ERROR_EXIT;
        }
    };
    let run = || -> CliResult<i32> {
        let req = CommandRequest::from_cli(cli)?;
        let (status, report) = run_command(&req)?;
        let bytes = export_result(&report, req.format)?;
        write_output(&req, &bytes)?;
        eprintln!("{}", summary(status, &report));
        Ok(status.code())
    };
    match run() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{}", e.record());
            ERROR_EXIT
        }
    }
}
