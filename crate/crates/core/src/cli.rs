//! Command-line front end: `run`, `metrics`, `sweep` and `scenario emit`.
//!
//! Everything here is library code so it can be driven from tests; the
//! binary only forwards `argv` to [`main_with_args`] and exits with the
//! returned code.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::controller::Method;
use crate::error::FlockError;
use crate::sim::scenario::BUILTIN_NAMES;
use crate::sim::{builtin_scenario, compute_metrics, run, RunOutput, Scenario, SimOptions, TrajectoryRecord};

/// Default output directory when `--out` is not given.
pub const OUT_DIR_ENV: &str = "GRF_FLOCK_OUT";

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const METRICS_FILE: &str = "metrics.toml";
pub const MANIFEST_FILE: &str = "manifest.toml";
pub const BELIEFS_FILE: &str = "beliefs.jsonl";
pub const SWEEP_FILE: &str = "sweep.csv";

/// Bumped whenever the CSV or manifest layout changes.
pub const FORMAT_VERSION: u32 = 1;

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;
pub const EXIT_CHECK: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "grf-flock", version, about = "Predictive flocking on a Gibbs random field")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one episode and write trajectory, metrics and manifest.
    Run(RunArgs),
    /// Recompute the metrics of a recorded trajectory.
    Metrics(MetricsArgs),
    /// Run the heuristic controller over several cone widths.
    Sweep(SweepArgs),
    /// Built-in scenarios.
    Scenario {
        #[command(subcommand)]
        action: ScenarioAction,
    },
}

#[derive(Debug, Subcommand)]
pub enum ScenarioAction {
    /// Print a built-in scenario as TOML.
    Emit {
        name: String,
        /// Write to this file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the built-in scenario names.
    List,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Built-in scenario name or path to a scenario TOML file.
    #[arg(long, default_value = "doorway", conflicts_with = "from_manifest")]
    pub scenario: String,
    #[arg(long, default_value = "heuristic", conflicts_with = "from_manifest")]
    pub method: Method,
    #[arg(long, default_value_t = 0, conflicts_with = "from_manifest")]
    pub seed: u64,
    /// Replay the scenario, method and seed recorded in a manifest.
    #[arg(long)]
    pub from_manifest: Option<PathBuf>,
    #[arg(long, env = OUT_DIR_ENV, default_value = "out")]
    pub out: PathBuf,
    /// Override the scenario duration (s).
    #[arg(long)]
    pub duration: Option<f64>,
    /// Also write the per-decision beliefs as JSON lines.
    #[arg(long)]
    pub trace_beliefs: bool,
    /// Write 0 in the wall-time column so runs compare byte for byte.
    #[arg(long)]
    pub strip_timing: bool,
    /// Exit with status 4 if any safety constraint is violated.
    #[arg(long)]
    pub check: bool,
    /// Worker threads for the per-tick fan-out.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct MetricsArgs {
    /// Trajectory CSV written by `run`.
    pub trajectory: PathBuf,
    /// Manifest of the run; defaults to the one next to the trajectory.
    #[arg(long, conflicts_with = "scenario")]
    pub manifest: Option<PathBuf>,
    /// Scenario to evaluate against instead of a manifest.
    #[arg(long)]
    pub scenario: Option<String>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Exit with status 4 if the recorded run violates a safety constraint.
    #[arg(long)]
    pub check: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    /// Cone half-width fractions, each in (0, 1].
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.2,0.35,0.5,1.0")]
    pub values: Vec<f64>,
    #[arg(long, default_value = "doorway")]
    pub scenario: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub duration: Option<f64>,
    #[arg(long, env = OUT_DIR_ENV, default_value = "out")]
    pub out: PathBuf,
    #[arg(long)]
    pub threads: Option<usize>,
    /// Run the episodes concurrently (timings then include contention).
    #[arg(long)]
    pub parallel_episodes: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Parse(FlockError),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(FlockError),
    #[error("check failed: {0}")]
    Check(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) | CliError::Usage(_) => EXIT_PARSE,
            CliError::Runtime(_) => EXIT_RUNTIME,
            CliError::Check(_) => EXIT_CHECK,
        }
    }
}

fn runtime(e: impl Into<FlockError>) -> CliError {
    CliError::Runtime(e.into())
}

/// Everything needed to reproduce a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub tool_version: String,
    pub method: Method,
    pub seed: u64,
    pub strip_timing: bool,
    pub scenario: Scenario,
}

impl Manifest {
    pub fn new(method: Method, seed: u64, strip_timing: bool, scenario: Scenario) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            method,
            seed,
            strip_timing,
            scenario,
        }
    }

    pub fn to_toml_string(&self) -> crate::Result<String> {
        toml::to_string(self).map_err(|e| FlockError::InvalidParams(format!("cannot serialize manifest: {e}")))
    }

    pub fn from_toml_str(text: &str, source_name: &str) -> crate::Result<Self> {
        let m: Manifest = toml::from_str(text).map_err(|e| FlockError::parse(source_name, e.to_string()))?;
        if m.format_version != FORMAT_VERSION {
            return Err(FlockError::parse(
                source_name,
                format!("format_version {} is not supported (expected {FORMAT_VERSION})", m.format_version),
            ));
        }
        m.scenario.validate().map_err(|e| FlockError::parse(source_name, e.to_string()))?;
        Ok(m)
    }

    pub fn load(path: &Path) -> crate::Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| FlockError::parse(path.display().to_string(), format!("cannot read: {e}")))?;
        Self::from_toml_str(&text, &path.display().to_string())
    }
}

/// Resolves a built-in name or a scenario file path.
pub fn resolve_scenario(spec: &str) -> crate::Result<Scenario> {
    if BUILTIN_NAMES.contains(&spec) {
        return builtin_scenario(spec);
    }
    let path = Path::new(spec);
    if !path.exists() {
        return Err(FlockError::parse(
            spec,
            format!("not a built-in scenario ({}) or an existing file", BUILTIN_NAMES.join(", ")),
        ));
    }
    let text = fs::read_to_string(path).map_err(|e| FlockError::parse(spec, format!("cannot read: {e}")))?;
    Scenario::from_toml_str(&text, spec)
}

fn with_duration(mut s: Scenario, duration: Option<f64>) -> Result<Scenario, CliError> {
    if let Some(d) = duration {
        if !(d.is_finite() && d >= 0.0) {
            return Err(CliError::Usage(format!("--duration must be a non-negative number, got {d}")));
        }
        s.duration = d;
    }
    Ok(s)
}

/// Files written by [`cmd_run`].
#[derive(Clone, Debug)]
pub struct RunArtifacts {
    pub trajectory: PathBuf,
    pub metrics: PathBuf,
    pub manifest: PathBuf,
    pub beliefs: Option<PathBuf>,
    pub output: RunOutput,
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(runtime)
}

pub fn cmd_run(args: &RunArgs) -> Result<RunArtifacts, CliError> {
    let (scenario, method, seed) = match &args.from_manifest {
        Some(p) => {
            let m = Manifest::load(p).map_err(CliError::Parse)?;
            (m.scenario, m.method, m.seed)
        }
        None => (resolve_scenario(&args.scenario).map_err(CliError::Parse)?, args.method, args.seed),
    };
    let scenario = with_duration(scenario, args.duration)?;
    if args.threads == Some(0) {
        return Err(CliError::Usage("--threads must be at least 1".into()));
    }
    let opts = SimOptions {
        method,
        seed,
        threads: args.threads,
        trace_beliefs: args.trace_beliefs,
    };
    let mut output = run(&scenario, &opts).map_err(runtime)?;
    if args.strip_timing {
        // Reports are computed from what is on disk so the offline
        // recomputation matches.
        output.record = output.record.without_timing();
        output.metrics = compute_metrics(&output.record, &scenario).map_err(runtime)?;
    }

    fs::create_dir_all(&args.out).map_err(runtime)?;
    let trajectory = args.out.join(TRAJECTORY_FILE);
    let metrics = args.out.join(METRICS_FILE);
    let manifest = args.out.join(MANIFEST_FILE);
    output.record.write_csv(create(&trajectory)?, args.strip_timing).map_err(runtime)?;
    fs::write(&metrics, output.metrics.to_text()).map_err(runtime)?;
    let m = Manifest::new(method, seed, args.strip_timing, scenario);
    fs::write(&manifest, m.to_toml_string().map_err(runtime)?).map_err(runtime)?;
    let beliefs = if args.trace_beliefs {
        let path = args.out.join(BELIEFS_FILE);
        let mut w = create(&path)?;
        for b in &output.beliefs {
            serde_json::to_writer(&mut w, b).map_err(|e| runtime(std::io::Error::other(e)))?;
            w.write_all(b"\n").map_err(runtime)?;
        }
        w.flush().map_err(runtime)?;
        Some(path)
    } else {
        None
    };
    Ok(RunArtifacts {
        trajectory,
        metrics,
        manifest,
        beliefs,
        output,
    })
}

fn check_violations(count: usize) -> Result<(), CliError> {
    if count > 0 {
        Err(CliError::Check(format!("{count} safety violation(s)")))
    } else {
        Ok(())
    }
}

/// Loads a trajectory and recomputes its metrics report.
pub fn cmd_metrics(args: &MetricsArgs) -> Result<crate::sim::MetricsReport, CliError> {
    let scenario = match (&args.scenario, &args.manifest) {
        (Some(s), _) => resolve_scenario(s).map_err(CliError::Parse)?,
        (None, Some(m)) => Manifest::load(m).map_err(CliError::Parse)?.scenario,
        (None, None) => {
            let dir = args.trajectory.parent().unwrap_or(Path::new("."));
            let path = dir.join(MANIFEST_FILE);
            if !path.exists() {
                return Err(CliError::Usage(format!(
                    "no {MANIFEST_FILE} next to {}; pass --manifest or --scenario",
                    args.trajectory.display()
                )));
            }
            Manifest::load(&path).map_err(CliError::Parse)?.scenario
        }
    };
    let name = args.trajectory.display().to_string();
    let file = File::open(&args.trajectory).map_err(|e| CliError::Parse(FlockError::parse(&name, format!("cannot read: {e}"))))?;
    let record = TrajectoryRecord::read_csv(file, &name, scenario.dt()).map_err(CliError::Parse)?;
    compute_metrics(&record, &scenario).map_err(|e| match e {
        // A record that does not fit the scenario is bad input, not a crash.
        FlockError::InvalidParams(msg) => CliError::Parse(FlockError::parse(&name, msg)),
        other => CliError::Runtime(other),
    })
}

/// One row of the cone-width sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepRow {
    pub k_u: f64,
    pub mean_candidates: f64,
    pub t_cal_avg: f64,
    pub r_dev_avg: f64,
}

/// Runs `scenario` with the heuristic controller once per `k_u` value.
pub fn sweep_k_u(
    scenario: &Scenario,
    values: &[f64],
    seed: u64,
    threads: Option<usize>,
    parallel_episodes: bool,
) -> crate::Result<Vec<SweepRow>> {
    for &k in values {
        if !(k > 0.0 && k <= 1.0) {
            return Err(FlockError::InvalidParams(format!("k_u must lie in (0, 1], got {k}")));
        }
    }
    let episode = |k_u: f64| -> crate::Result<SweepRow> {
        let mut s = scenario.clone();
        for g in &mut s.groups {
            g.params.controller.k_u = k_u;
        }
        let out = run(
            &s,
            &SimOptions {
                method: Method::Heuristic,
                seed,
                threads,
                trace_beliefs: false,
            },
        )?;
        Ok(SweepRow {
            k_u,
            mean_candidates: out.stats.mean_candidates(),
            t_cal_avg: out.metrics.t_cal_avg,
            r_dev_avg: out.metrics.r_dev_avg,
        })
    };
    if parallel_episodes {
        values.par_iter().map(|&k| episode(k)).collect()
    } else {
        values.iter().map(|&k| episode(k)).collect()
    }
}

pub fn sweep_table(rows: &[SweepRow]) -> String {
    let mut s = String::from("k_u,mean_candidates,t_cal_avg,r_dev_avg\n");
    for r in rows {
        s += &format!("{},{},{},{}\n", r.k_u, r.mean_candidates, r.t_cal_avg, r.r_dev_avg);
    }
    s
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<Vec<SweepRow>, CliError> {
    let scenario = with_duration(resolve_scenario(&args.scenario).map_err(CliError::Parse)?, args.duration)?;
    if args.values.iter().any(|&k| !(k > 0.0 && k <= 1.0)) {
        return Err(CliError::Usage(format!("--values must lie in (0, 1], got {:?}", args.values)));
    }
    let rows = sweep_k_u(&scenario, &args.values, args.seed, args.threads, args.parallel_episodes).map_err(runtime)?;
    fs::create_dir_all(&args.out).map_err(runtime)?;
    fs::write(args.out.join(SWEEP_FILE), sweep_table(&rows)).map_err(runtime)?;
    Ok(rows)
}

/// Runs a parsed command, writing human-readable output to `stdout`.
pub fn execute(cli: &Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    let io = |e: std::io::Error| runtime(e);
    match &cli.command {
        Command::Run(args) => {
            let a = cmd_run(args)?;
            let m = &a.output.metrics;
            writeln!(stdout, "wrote {}", a.trajectory.display()).map_err(io)?;
            writeln!(stdout, "wrote {}", a.metrics.display()).map_err(io)?;
            writeln!(stdout, "wrote {}", a.manifest.display()).map_err(io)?;
            if let Some(b) = &a.beliefs {
                writeln!(stdout, "wrote {}", b.display()).map_err(io)?;
            }
            writeln!(
                stdout,
                "ticks={} r_dev_avg={:.4} u_avg={:.4} mean_candidates={:.1} violations={}",
                m.ticks,
                m.r_dev_avg,
                m.u_avg,
                a.output.stats.mean_candidates(),
                m.violations
            )
            .map_err(io)?;
            if args.check {
                check_violations(m.violations)?;
            }
        }
        Command::Metrics(args) => {
            let report = cmd_metrics(args)?;
            match &args.out {
                Some(p) => fs::write(p, report.to_text()).map_err(io)?,
                None => stdout.write_all(report.to_text().as_bytes()).map_err(io)?,
            }
            if args.check {
                check_violations(report.violations)?;
            }
        }
        Command::Sweep(args) => {
            let rows = cmd_sweep(args)?;
            writeln!(stdout, "{:>6} {:>12} {:>12} {:>10}", "k_u", "candidates", "t_cal(ms)", "r_dev_avg").map_err(io)?;
            for r in &rows {
                writeln!(
                    stdout,
                    "{:>6} {:>12.2} {:>12.4} {:>10.4}",
                    r.k_u,
                    r.mean_candidates,
                    r.t_cal_avg * 1e3,
                    r.r_dev_avg
                )
                .map_err(io)?;
            }
        }
        Command::Scenario { action } => match action {
            ScenarioAction::Emit { name, out } => {
                if !BUILTIN_NAMES.contains(&name.as_str()) {
                    return Err(CliError::Usage(format!(
                        "unknown scenario `{name}`; built-ins: {}",
                        BUILTIN_NAMES.join(", ")
                    )));
                }
                let text = builtin_scenario(name).and_then(|s| s.to_toml_string()).map_err(runtime)?;
                match out {
                    Some(p) => fs::write(p, text).map_err(io)?,
                    None => stdout.write_all(text.as_bytes()).map_err(io)?,
                }
            }
            ScenarioAction::List => {
                for n in BUILTIN_NAMES {
                    writeln!(stdout, "{n}").map_err(io)?;
                }
            }
        },
    }
    Ok(())
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code. Errors go to stderr.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_PARSE } else { EXIT_OK };
        }
    };
    let mut stdout = std::io::stdout().lock();
    match execute(&cli, &mut stdout) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = stdout.flush();
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
