//! Argument parsing and subcommand dispatch for the `pargrid` binary.
//!
//! ```text
//! pargrid bench  --kernel sar --workers 1,2,4 [--trials 3] [--out r.csv] [--plot r.svg] [--fraction 0.9]
//! pargrid verify --kernel batch --workers 1,2,3,4,8
//! pargrid amdahl --fraction 0.9 [--workers 1,2,4,8]
//! ```
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage error, 3 runtime
//! error.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use pargrid::bench::{
    amdahl_limit, amdahl_speedup, emit_plot, format_sig9, render_report, speedup_table,
    time_kernel, verify_kernel, BenchError, KernelConfig, KernelId, DEFAULT_SEED,
};
use pargrid::kernels::Partitioner;
use pargrid::{Backend, LaunchOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

/// Environment fallback for `--timeout-s`.
pub const TIMEOUT_ENV: &str = "PARGRID_TIMEOUT_S";
const DEFAULT_TIMEOUT_S: f64 = 60.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Bench,
    Verify,
    Amdahl,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub command: Command,
    /// Always set for `bench` and `verify`.
    pub kernel: Option<KernelId>,
    /// May be empty only for `amdahl`.
    pub workers: Vec<usize>,
    pub backend: Backend,
    pub trials: usize,
    pub config_path: Option<PathBuf>,
    pub output_path: Option<PathBuf>,
    pub plot_path: Option<PathBuf>,
    pub seed: u64,
    pub fraction: Option<f64>,
    pub timeout: Duration,
}

/// Rejected command line. `code` is 0 for `--help` and `--version`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UsageError {
    pub message: String,
    pub code: i32,
}

impl UsageError {
    fn new(message: impl Into<String>) -> Self {
        UsageError {
            message: message.into(),
            code: EXIT_USAGE,
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "pargrid",
    version,
    about = "SPMD kernels, parity checks and speedup benchmarks"
)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand, Debug)]
enum Sub {
    /// Time a kernel across worker counts and write a speedup CSV.
    Bench(Flags),
    /// Compare a kernel's parallel output with its serial reference.
    Verify(Flags),
    /// Print Amdahl bounds for a parallel fraction.
    Amdahl(Flags),
}

#[derive(Args, Debug)]
struct Flags {
    /// batch, sar, sqif-tp or sqif-dp
    #[arg(long)]
    kernel: Option<KernelId>,
    /// Comma-separated worker counts, e.g. 1,2,4,8
    #[arg(long, value_delimiter = ',', value_parser = parse_workers)]
    workers: Vec<usize>,
    /// inproc or socket
    #[arg(long, default_value_t = Backend::InProc)]
    backend: Backend,
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..))]
    trials: u64,
    /// key=value kernel configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    /// CSV destination (stdout when absent)
    #[arg(long)]
    out: Option<PathBuf>,
    /// SVG destination
    #[arg(long)]
    plot: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Parallel fraction in [0, 1]
    #[arg(long)]
    fraction: Option<f64>,
    /// Receive timeout in seconds (falls back to $PARGRID_TIMEOUT_S, then 60)
    #[arg(long = "timeout-s")]
    timeout_s: Option<f64>,
}

fn parse_workers(s: &str) -> Result<usize, String> {
    match s.trim().parse::<usize>() {
        Ok(0) => Err("worker counts must be ≥ 1".into()),
        Ok(p) => Ok(p),
        Err(e) => Err(format!("`{s}`: {e}")),
    }
}

fn parse_timeout(s: &str, source: &str) -> Result<Duration, UsageError> {
    match s.trim().parse::<f64>() {
        Ok(t) if t.is_finite() && t > 0.0 => Ok(Duration::from_secs_f64(t)),
        _ => Err(UsageError::new(format!(
            "{source}: `{s}` is not a positive number of seconds"
        ))),
    }
}

/// Parses `argv` (program name first), reading the timeout fallback from
/// the environment.
pub fn parse_args<I, T>(argv: I) -> Result<RunSpec, UsageError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    parse_args_with_env(argv, std::env::var(TIMEOUT_ENV).ok())
}

/// As [`parse_args`], with the timeout fallback supplied by the caller.
pub fn parse_args_with_env<I, T>(
    argv: I,
    env_timeout: Option<String>,
) -> Result<RunSpec, UsageError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(|e| UsageError {
        message: e.render().to_string(),
        code: if e.use_stderr() { EXIT_USAGE } else { EXIT_OK },
    })?;
    let (command, f) = match cli.command {
        Sub::Bench(f) => (Command::Bench, f),
        Sub::Verify(f) => (Command::Verify, f),
        Sub::Amdahl(f) => (Command::Amdahl, f),
    };
    let name = match command {
        Command::Bench => "bench",
        Command::Verify => "verify",
        Command::Amdahl => "amdahl",
    };
    match command {
        Command::Bench | Command::Verify => {
            if f.kernel.is_none() {
                return Err(UsageError::new(format!("{name} needs --kernel")));
            }
            if f.workers.is_empty() {
                return Err(UsageError::new(format!("{name} needs --workers")));
            }
        }
        Command::Amdahl => {
            if f.fraction.is_none() {
                return Err(UsageError::new("amdahl needs --fraction"));
            }
        }
    }
    if command == Command::Bench && !f.workers.contains(&1) {
        return Err(UsageError::new(
            "bench needs 1 in --workers as the speedup baseline",
        ));
    }
    if let Some(x) = f.fraction {
        if !(0.0..=1.0).contains(&x) {
            return Err(UsageError::new(format!("--fraction {x} is outside [0, 1]")));
        }
    }
    let timeout = match (f.timeout_s, env_timeout) {
        (Some(t), _) => parse_timeout(&t.to_string(), "--timeout-s")?,
        (None, Some(env)) => parse_timeout(&env, TIMEOUT_ENV)?,
        (None, None) => Duration::from_secs_f64(DEFAULT_TIMEOUT_S),
    };
    Ok(RunSpec {
        command,
        kernel: f.kernel,
        workers: f.workers,
        backend: f.backend,
        trials: f.trials as usize,
        config_path: f.config,
        output_path: f.out,
        plot_path: f.plot,
        seed: f.seed,
        fraction: f.fraction,
        timeout,
    })
}

/// Runs `spec` against the real stdout and stderr.
pub fn run(spec: &RunSpec) -> i32 {
    execute(
        spec,
        None,
        &mut std::io::stdout().lock(),
        &mut std::io::stderr().lock(),
    )
}

/// Runs `spec`, optionally with a replacement index partitioner for the
/// batch and task-parallel SQIF kernels.
pub fn execute(
    spec: &RunSpec,
    partitioner: Option<Partitioner>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> i32 {
    match dispatch(spec, partitioner, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_RUNTIME
        }
    }
}

fn dispatch(
    spec: &RunSpec,
    partitioner: Option<Partitioner>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32, BenchError> {
    if spec.command == Command::Amdahl {
        return amdahl(spec, out);
    }
    let kernel = spec.kernel.expect("parse_args requires --kernel");
    let cfg = match &spec.config_path {
        Some(path) => KernelConfig::load(path)?,
        None => KernelConfig::default(),
    }
    .with_seed(spec.seed);
    let opts = LaunchOptions::default().with_timeout(spec.timeout);
    match spec.command {
        Command::Bench => bench(spec, kernel, &cfg, &opts, out, err),
        Command::Verify => {
            let cases = verify_kernel(
                kernel,
                &cfg,
                &spec.workers,
                spec.backend,
                &opts,
                partitioner,
            )?;
            for c in &cases {
                writeln!(
                    out,
                    "{} {} P={} max_error={} tolerance={}",
                    c.verdict(),
                    c.kernel,
                    c.workers,
                    format_sig9(c.max_error),
                    format_sig9(c.tolerance)
                )
                .map_err(stdout_error)?;
            }
            Ok(if cases.iter().all(|c| c.passed) {
                EXIT_OK
            } else {
                EXIT_VERIFY_FAILED
            })
        }
        Command::Amdahl => unreachable!(),
    }
}

fn stdout_error(source: std::io::Error) -> BenchError {
    BenchError::Io {
        path: PathBuf::from("<stdout>"),
        source,
    }
}

fn bench(
    spec: &RunSpec,
    kernel: KernelId,
    cfg: &KernelConfig,
    opts: &LaunchOptions,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32, BenchError> {
    let mut records = Vec::new();
    for &p in &spec.workers {
        let recs = time_kernel(kernel, cfg, p, spec.trials, spec.backend, opts)?;
        let mean = recs.iter().map(|r| r.wall_time_s).sum::<f64>() / recs.len() as f64;
        let _ = writeln!(
            err,
            "{kernel} P={p}: mean {} s over {} trials",
            format_sig9(mean),
            recs.len()
        );
        records.extend(recs);
    }
    let rows = speedup_table(&records, spec.fraction)?;
    match &spec.output_path {
        Some(path) => pargrid::bench::write_report(&rows, path)?,
        None => out
            .write_all(render_report(&rows).as_bytes())
            .map_err(stdout_error)?,
    }
    if let Some(path) = &spec.plot_path {
        emit_plot(&rows, spec.fraction.filter(|&f| f < 1.0), path)?;
    }
    Ok(EXIT_OK)
}

fn amdahl(spec: &RunSpec, out: &mut dyn Write) -> Result<i32, BenchError> {
    let f = spec.fraction.expect("parse_args requires --fraction");
    let limit = if f < 1.0 {
        format_sig9(amdahl_limit(f)?)
    } else {
        "unbounded".to_string()
    };
    writeln!(out, "limit {limit}").map_err(stdout_error)?;
    for &p in &spec.workers {
        writeln!(out, "P={p} speedup {}", format_sig9(amdahl_speedup(f, p)?))
            .map_err(stdout_error)?;
    }
    Ok(EXIT_OK)
}
