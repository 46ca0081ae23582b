//! Command-line front end: `map check`, `field sample|verify`, `simulate`, `study`, `report`.

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde_json::json;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::AtomicBool;
use std::sync::Arc;

use crate::config::{parse_config, ConfigError, RunConfig};
use crate::conformal::{assumption_check, AssumptionSettings, ObstacleFamily};
use crate::fields::{HarmonicField, InitialVelocity, ShiftedInitialData, VectorField};
use crate::lab::{
    config_hash, evaluate, report_emit, safe_dt, ConvergenceReport, CriterionContext, LabError, Verdict, CRITERIA,
    NEAR_GROUP,
};
use crate::solver::{build_grid, simulate, GridSpec, RunRecord, Solver};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_VERDICT: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Verbosity {
    Quiet,
    Info,
    Debug,
}

#[derive(Debug, Parser)]
#[command(name = "thinflow", version, about = "Viscous flow past thin obstacles and their curve limit")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// JSON configuration; the reference configuration when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Single ε, overriding the configured list.
    #[arg(long, global = true)]
    pub eps: Option<f64>,
    /// Output directory, overriding the configured one.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, env = "THINFLOW_THREADS")]
    pub threads: Option<usize>,
    #[arg(long, global = true, value_enum, default_value = "info")]
    pub verbosity: Verbosity,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Checks of the exterior-map family.
    Map {
        #[command(subcommand)]
        action: MapAction,
    },
    /// Evaluation and checks of the initial velocity fields.
    Field {
        #[command(subcommand)]
        action: FieldAction,
    },
    /// One solver run at a single ε.
    Simulate,
    /// The acceptance criteria, all or a selection.
    Study {
        /// Criterion ids, e.g. `1,2,9`.
        #[arg(long, value_delimiter = ',')]
        criteria: Option<Vec<u32>>,
    },
    /// Re-reads an emitted report and prints its verdicts.
    Report {
        /// Directory holding `report.json`.
        #[arg(long)]
        input: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum MapAction {
    Check,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FieldKind {
    /// `H_ε`.
    Harmonic,
    /// `u₀^ε`.
    Initial,
    /// `K_ε[ω₀]`.
    Induced,
    /// `W₀^ε`.
    Shifted,
    /// `u₀` of the limit problem.
    Limit,
}

#[derive(Debug, Subcommand)]
pub enum FieldAction {
    /// CSV `x1,x2,u1,u2` on a rectangular grid of points.
    Sample {
        #[arg(long, value_enum, default_value = "initial")]
        field: FieldKind,
        /// `min,max,n` along x1.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = [-2.0, 2.0, 21.0])]
        x1: Vec<f64>,
        /// `min,max,n` along x2.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = [-2.0, 2.0, 21.0])]
        x2: Vec<f64>,
    },
    /// JSON verdicts of the field criteria (circulation, decay, blow-up, jump).
    Verify,
}

/// Error carrying the exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn numerical(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_NUMERICAL,
            message: message.into(),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::usage(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::usage(format!("i/o: {e}"))
    }
}

impl From<LabError> for CliError {
    fn from(e: LabError) -> Self {
        match e {
            LabError::Io(m) => CliError::usage(format!("i/o: {m}")),
            LabError::Invalid(m) => CliError::usage(m),
            other => CliError::numerical(other.to_string()),
        }
    }
}

pub fn init_logging(verbosity: Verbosity) {
    let level = match verbosity {
        Verbosity::Quiet => log::LevelFilter::Error,
        Verbosity::Info => log::LevelFilter::Info,
        Verbosity::Debug => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .try_init();
}

struct Session {
    config: RunConfig,
    hash: String,
    out: PathBuf,
    stop: Arc<AtomicBool>,
}

impl Session {
    fn new(global: &GlobalArgs, stop: Arc<AtomicBool>) -> Result<Self, CliError> {
        let mut config = match &global.config {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| CliError::usage(format!("{}: {e}", p.display())))?;
                parse_config(&text)?
            }
            None => RunConfig::reference(),
        };
        if let Some(out) = &global.out {
            config.output = out.display().to_string();
        }
        let hash = config_hash(&config_value(&config), &config.tolerances.to_map());
        Ok(Session {
            out: PathBuf::from(&config.output),
            config,
            hash,
            stop,
        })
    }

    fn epsilon(&self, global: &GlobalArgs) -> Result<f64, CliError> {
        match global.eps {
            Some(e) if e > 0.0 && e.is_finite() => Ok(e),
            Some(e) => Err(CliError::usage(format!("--eps must be positive, got {e}"))),
            None => Ok(self.config.eps_list[0]),
        }
    }

    fn create(&self, name: &str) -> Result<fs::File, CliError> {
        fs::create_dir_all(&self.out)?;
        Ok(fs::File::create(self.out.join(name))?)
    }

    fn write_json(&self, name: &str, mut value: serde_json::Value) -> Result<PathBuf, CliError> {
        value["config_hash"] = json!(self.hash);
        let mut f = self.create(name)?;
        writeln!(f, "{}", serde_json::to_string_pretty(&value).expect("json value serializes"))?;
        Ok(self.out.join(name))
    }
}

/// The configuration as echoed into reports and hashed; the output directory is left out.
fn config_value(config: &RunConfig) -> serde_json::Value {
    let mut v = serde_json::to_value(config).expect("configuration serializes");
    if let Some(m) = v.as_object_mut() {
        m.remove("output");
    }
    v
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
        }
    };
    run(cli, Arc::new(AtomicBool::new(false)))
}

/// Runs a parsed command; `stop` is raised by the Ctrl-C handler.
pub fn run(cli: Cli, stop: Arc<AtomicBool>) -> i32 {
    if let Some(n) = cli.global.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return EXIT_USAGE;
        }
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let result = Session::new(&cli.global, stop).and_then(|s| dispatch(&cli, &s));
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

fn dispatch(cli: &Cli, s: &Session) -> Result<i32, CliError> {
    match &cli.command {
        Command::Map { action: MapAction::Check } => map_check(cli, s),
        Command::Field {
            action: FieldAction::Sample { field, x1, x2 },
        } => field_sample(cli, s, *field, x1, x2),
        Command::Field { action: FieldAction::Verify } => verify(s, &[1, 2, 3, 4, 5], "field_verify"),
        Command::Simulate => simulate_one(cli, s),
        Command::Study { criteria } => {
            let ids = criteria.clone().unwrap_or_else(|| CRITERIA.iter().map(|c| c.0).collect());
            verify(s, &ids, "study")
        }
        Command::Report { input } => reread(input),
    }
}

fn verdict_code(pass: bool) -> i32 {
    if pass {
        EXIT_PASS
    } else {
        EXIT_VERDICT
    }
}

fn map_check(cli: &Cli, s: &Session) -> Result<i32, CliError> {
    let eps = match cli.global.eps {
        Some(_) => vec![s.epsilon(&cli.global)?],
        None => s.config.eps_list.clone(),
    };
    let r = assumption_check(s.config.base(), &eps, 4.0, AssumptionSettings::default())
        .map_err(|e| CliError::numerical(e.to_string()))?;
    let identity = r
        .rows
        .iter()
        .map(|row| (row.sup_relative_deviation - row.epsilon / (1.0 + row.epsilon)).abs())
        .fold(0.0, f64::max);
    let pass = identity <= s.config.tolerances.assumption_identity
        && (eps.len() < 2 || (r.relative_deviation_decreasing && r.l3_deviation_decreasing));
    let value = json!({
        "report": r,
        "identity_deviation": identity,
        "verdict": if pass { Verdict::Pass } else { Verdict::Fail },
    });
    println!("{}", serde_json::to_string_pretty(&value).expect("json value serializes"));
    s.write_json("map_check.json", value)?;
    Ok(verdict_code(pass))
}

fn axis(v: &[f64], name: &str) -> Result<Vec<f64>, CliError> {
    let &[a, b, n] = v else {
        return Err(CliError::usage(format!("--{name} needs min,max,n")));
    };
    if !(a.is_finite() && b.is_finite() && n >= 1.0 && n.fract() == 0.0) {
        return Err(CliError::usage(format!("--{name} needs min,max,n with integer n >= 1")));
    }
    let n = n as usize;
    Ok((0..n)
        .map(|i| if n == 1 { a } else { a + (b - a) * i as f64 / (n - 1) as f64 })
        .collect())
}

fn field_sample(cli: &Cli, s: &Session, kind: FieldKind, x1: &[f64], x2: &[f64]) -> Result<i32, CliError> {
    let (xs, ys) = (axis(x1, "x1")?, axis(x2, "x2")?);
    let flow = s.config.flow().map_err(|e| CliError::usage(e.to_string()))?;
    let family = ObstacleFamily::new(s.config.base(), s.epsilon(&cli.global)?).map_err(|e| CliError::usage(e.to_string()))?;
    let initial = || InitialVelocity::new(&flow, family).map_err(|e| CliError::numerical(e.to_string()));
    let field: Box<dyn VectorField> = match kind {
        FieldKind::Harmonic => Box::new(HarmonicField { family }),
        FieldKind::Initial => Box::new(initial()?),
        FieldKind::Induced => Box::new(initial()?.induced().clone()),
        FieldKind::Shifted => Box::new(
            ShiftedInitialData::new(&flow, family, s.config.settings().profile)
                .map_err(|e| CliError::numerical(e.to_string()))?,
        ),
        FieldKind::Limit => Box::new(
            InitialVelocity::limit(&flow, s.config.base()).map_err(|e| CliError::numerical(e.to_string()))?,
        ),
    };
    let limit = kind == FieldKind::Limit;
    let arc = s.config.base().arc();
    let mut f = std::io::BufWriter::new(s.create("field_sample.csv")?);
    writeln!(f, "# config_hash {}", s.hash)?;
    writeln!(f, "x1,x2,u1,u2")?;
    for &y in &ys {
        for &x in &xs {
            let z = Complex64::new(x, y);
            let outside = if limit { arc.distance(z) > 0.0 } else { family.is_exterior(z) };
            // points inside the obstacle (or on the curve) carry the zero extension
            let u = if outside {
                field.velocity(z).map_err(|e| CliError::numerical(format!("at {z}: {e}")))?
            } else {
                Complex64::new(0.0, 0.0)
            };
            writeln!(f, "{x},{y},{},{}", u.re, u.im)?;
        }
    }
    f.flush()?;
    log::info!("wrote {}", s.out.join("field_sample.csv").display());
    Ok(EXIT_PASS)
}

fn verify(s: &Session, ids: &[u32], stem: &str) -> Result<i32, CliError> {
    if let Some(bad) = ids.iter().find(|&&id| !CRITERIA.iter().any(|c| c.0 == id)) {
        return Err(CliError::usage(format!("no criterion {bad}; ids run from 1 to {}", CRITERIA.len())));
    }
    let study = s.config.study_config()?;
    let mut ctx = CriterionContext::new(study, s.config.tolerances);
    ctx.stop = Some(s.stop.clone());
    let mut report = ConvergenceReport::new(config_value(&s.config), s.config.tolerances.to_map());
    evaluate(&mut ctx, ids, &mut report);
    let dir = if stem == "study" { s.out.clone() } else { s.out.join(stem) };
    let files = report_emit(&report, &dir)?;
    for c in &report.criteria {
        println!("{}", c.summary_line());
    }
    for f in files {
        log::info!("wrote {}", f.display());
    }
    finish(&report)
}

fn finish(report: &ConvergenceReport) -> Result<i32, CliError> {
    if !report.complete {
        eprintln!("interrupted: partial report written");
    }
    let failures = report.failures();
    if !failures.is_empty() {
        eprintln!("{}", json!({ "config_hash": report.config_hash, "failures": failures }));
    }
    Ok(verdict_code(report.complete && failures.is_empty()))
}

fn reread(input: &Path) -> Result<i32, CliError> {
    let path = input.join("report.json");
    let text = fs::read_to_string(&path).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    let report: ConvergenceReport =
        serde_json::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    let recomputed = config_hash(&report.config, &report.tolerances);
    if recomputed != report.config_hash {
        return Err(CliError::usage(format!(
            "{}: config hash {} does not match its contents ({recomputed})",
            path.display(),
            report.config_hash
        )));
    }
    println!("config_hash {}", report.config_hash);
    for c in &report.criteria {
        println!("{}", c.summary_line());
    }
    finish(&report)
}

fn simulate_one(cli: &Cli, s: &Session) -> Result<i32, CliError> {
    let eps = s.epsilon(&cli.global)?;
    let mut config = s.config.clone();
    config.eps_list = vec![eps];
    config.validate()?;
    let study = s.config.study_config().ok();
    let flow = config.flow().map_err(|e| CliError::usage(e.to_string()))?;
    let spec = GridSpec {
        epsilon: eps,
        n_sigma: config.grid.n_sigma,
        n_theta: config.grid.n_theta,
        r_max: config.grid.r_max,
    };
    let grid = build_grid(spec).map_err(|e| CliError::numerical(e.to_string()))?;
    let mut solver_config = config.solver_config(eps);
    solver_config.dt = safe_dt(&grid, solver_config, &flow, config.study.cfl_safety)
        .map_err(|e| CliError::numerical(e.to_string()))?;
    let mut solver = Solver::new(grid, solver_config).map_err(|e| CliError::numerical(e.to_string()))?;
    let groups = match &study {
        Some(st) => st.groups()?,
        None => vec![(NEAR_GROUP.to_string(), crate::lab::ProbePatch::from(config.patch).nodes(&config.base().arc())?)],
    };
    let settings = config.settings();
    log::info!("simulating eps = {eps} with dt = {:e} to t = {}", solver_config.dt, solver_config.t_end);
    let (record, error) = match simulate(&mut solver, &flow, &groups, &settings, Some(&s.stop)) {
        Ok(r) => (r, None),
        Err(f) => (f.partial, Some(f.error.to_string())),
    };
    emit_run(s, &record, eps)?;
    let envelope = record.diagnostics.iter().all(|d| d.envelope_ok);
    let defect_ok = record.worst_stokes_defect <= s.config.tolerances.stokes_defect;
    let pass = error.is_none() && record.complete && envelope && defect_ok;
    let summary = json!({
        "epsilon": eps,
        "dt": solver_config.dt,
        "t_end": solver_config.t_end,
        "steps": record.steps,
        "complete": record.complete,
        "snapshots": record.snapshots.len(),
        "max_speed": record.snapshots.iter().flat_map(|sn| sn.velocities.iter().map(|u| u.norm())).fold(0.0, f64::max),
        "worst_stokes_defect": record.worst_stokes_defect,
        "envelope_never_violated": envelope,
        "error": error,
        "verdict": if pass { Verdict::Pass } else { Verdict::Fail },
    });
    println!("{}", serde_json::to_string_pretty(&summary).expect("json value serializes"));
    s.write_json("simulate.json", summary)?;
    if error.is_some() {
        return Ok(EXIT_NUMERICAL);
    }
    if !record.complete {
        eprintln!("interrupted: partial run written");
    }
    Ok(verdict_code(pass))
}

fn emit_run(s: &Session, record: &RunRecord, eps: f64) -> Result<(), CliError> {
    let mut f = std::io::BufWriter::new(s.create("diagnostics.csv")?);
    writeln!(f, "# config_hash {} epsilon {eps}", s.hash)?;
    record.write_diagnostics_csv(&mut f)?;
    f.flush()?;
    for g in &record.groups {
        let mut f = std::io::BufWriter::new(s.create(&format!("snapshots_{}.csv", g.name))?);
        writeln!(f, "# config_hash {} epsilon {eps}", s.hash)?;
        record.write_snapshot_csv(&g.name, &mut f)?;
        f.flush()?;
    }
    Ok(())
}
