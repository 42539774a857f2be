//! Command-line front end for the `unmask` library.

pub mod verify;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use unmask::gf::{Gf2m, RsCodeSpec};
use unmask::rsx::{run_experiment, write_records_csv, LogBase, RsExperimentConfig, DEFAULT_TRIALS};
use unmask::sched::{
    fixed_uniform_schedule, mean_batch_size_profile, sample_schedule, stream_rng, write_table_csv,
    CoeffTable, SchemeKind,
};

pub const EXIT_ARGS: i32 = 2;
pub const EXIT_VERIFY: i32 = 3;
pub const EXIT_CAPACITY: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Args(String),
    #[error("{0}")]
    Lib(#[from] unmask::Error),
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("{checks} check(s) hit the realization cap")]
    Capacity { checks: usize },
    #[error("{failed} verification check(s) failed")]
    Verify { failed: usize },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Args(_) => EXIT_ARGS,
            CliError::Verify { .. } => EXIT_VERIFY,
            CliError::Capacity { .. } | CliError::Lib(unmask::Error::Capacity { .. }) => {
                EXIT_CAPACITY
            }
            CliError::Lib(unmask::Error::Io { .. } | unmask::Error::Csv { .. })
            | CliError::Io { .. } => 1,
            CliError::Lib(_) => EXIT_ARGS,
        }
    }
}

/// Integers with optional `_` separators, e.g. `100_000`.
pub fn parse_num<T: FromStr>(s: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    s.replace('_', "")
        .parse::<T>()
        .map_err(|e| format!("`{s}`: {e}"))
}

fn parse_usize(s: &str) -> Result<usize, String> {
    parse_num(s)
}

fn parse_u64(s: &str) -> Result<u64, String> {
    parse_num(s)
}

fn parse_u128(s: &str) -> Result<u128, String> {
    parse_num(s)
}

#[derive(Parser, Debug)]
#[command(
    name = "unmask",
    version,
    about = "Randomized unmasking schedules: tables, checks, samples and RS experiments"
)]
pub struct Cli {
    /// Worker threads for Monte Carlo loops.
    #[arg(long, global = true, default_value = "1", value_parser = parse_usize)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Export the coefficient table as CSV.
    Coeffs(CoeffsArgs),
    /// Run the exact verification suite.
    Verify(verify::VerifyArgs),
    /// Sample one schedule and print its steps.
    Schedule(ScheduleArgs),
    /// Mean and spread of the batch size at every step.
    Profile(ProfileArgs),
    /// Expected KL on a Reed-Solomon code.
    Rs(RsArgs),
}

#[derive(Args, Debug)]
pub struct OutputArgs {
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write `<out>.manifest.json` describing the run.
    #[arg(long, requires = "out")]
    pub manifest: bool,
}

#[derive(Args, Debug)]
pub struct CoeffsArgs {
    /// tc or dtc.
    #[arg(long, default_value = "tc")]
    pub scheme: SchemeKind,
    #[arg(long = "L", value_parser = parse_usize)]
    pub len: usize,
    #[arg(long = "Kmax", value_parser = parse_usize)]
    pub k_max: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct ScheduleArgs {
    /// tc, dtc or fixed.
    #[arg(long)]
    pub scheme: SchemeKind,
    #[arg(long = "L", value_parser = parse_usize)]
    pub len: usize,
    #[arg(long = "K", value_parser = parse_usize)]
    pub k: usize,
    #[arg(long, value_parser = parse_u64)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ProfileArgs {
    /// tc or dtc.
    #[arg(long)]
    pub scheme: SchemeKind,
    #[arg(long = "L", value_parser = parse_usize)]
    pub len: usize,
    #[arg(long = "K", value_parser = parse_usize)]
    pub k: usize,
    #[arg(long, default_value = "10000", value_parser = parse_usize)]
    pub trials: usize,
    #[arg(long, value_parser = parse_u64)]
    pub seed: u64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct RsArgs {
    /// tc, dtc or fixed.
    #[arg(long)]
    pub scheme: SchemeKind,
    #[arg(long = "L", value_parser = parse_usize)]
    pub len: usize,
    /// Alphabet size, a power of two.
    #[arg(long, value_parser = parse_usize)]
    pub q: usize,
    /// Code dimension.
    #[arg(long, value_parser = parse_usize)]
    pub d: usize,
    /// One or more step counts, comma separated or repeated.
    #[arg(long = "K", value_parser = parse_usize, value_delimiter = ',', required = true)]
    pub k: Vec<usize>,
    #[arg(long, default_value_t = DEFAULT_TRIALS, value_parser = parse_usize)]
    pub trials: usize,
    /// Required for the tc and dtc schemes.
    #[arg(long, value_parser = parse_u64)]
    pub seed: Option<u64>,
    /// Also compute the exact expectation (O(K L^2)).
    #[arg(long)]
    pub exact_dp: bool,
    /// Report the summary on stderr in bits instead of nats.
    #[arg(long)]
    pub bits: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Serialize)]
struct Manifest {
    args: Vec<String>,
    seed: Option<u64>,
    git_describe: Option<String>,
    started: u64,
    finished: u64,
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn git_describe() -> Option<String> {
    let out = std::process::Command::new("git")
        .args(["describe", "--always", "--dirty"])
        .output()
        .ok()?;
    out.status
        .success()
        .then(|| String::from_utf8_lossy(&out.stdout).trim().to_string())
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Runs `write` against the chosen output and records a manifest if asked.
fn emit(
    output: Option<&Path>,
    manifest: bool,
    seed: Option<u64>,
    argv: &[String],
    started: u64,
    write: impl FnOnce(&mut dyn Write) -> Result<(), CliError>,
) -> Result<(), CliError> {
    match output {
        None => {
            let stdout = io::stdout();
            let mut w = BufWriter::new(stdout.lock());
            write(&mut w)?;
            w.flush().map_err(io_err(Path::new("<stdout>")))?;
        }
        Some(path) => {
            let file = File::create(path).map_err(io_err(path))?;
            let mut w = BufWriter::new(file);
            write(&mut w)?;
            w.flush().map_err(io_err(path))?;
            if manifest {
                let m = Manifest {
                    args: argv.to_vec(),
                    seed,
                    git_describe: git_describe(),
                    started,
                    finished: unix_now(),
                };
                let mpath = PathBuf::from(format!("{}.manifest.json", path.display()));
                let text = serde_json::to_string_pretty(&m).expect("manifest serializes");
                std::fs::write(&mpath, text + "\n").map_err(io_err(&mpath))?;
            }
        }
    }
    Ok(())
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Io {
        path: "<csv>".into(),
        source: e.into(),
    }
}

fn adaptive_only(kind: SchemeKind) -> Result<(), CliError> {
    if kind == SchemeKind::FixedUniform {
        return Err(CliError::Args(
            "this subcommand needs --scheme tc or dtc".into(),
        ));
    }
    Ok(())
}

pub fn cmd_coeffs(args: &CoeffsArgs, argv: &[String]) -> Result<(), CliError> {
    let started = unix_now();
    adaptive_only(args.scheme)?;
    let table = CoeffTable::build(args.scheme, args.len, args.k_max)?;
    emit(
        args.output.out.as_deref(),
        args.output.manifest,
        None,
        argv,
        started,
        |w| write_table_csv(&table, w).map_err(csv_err),
    )
}

pub fn cmd_schedule(args: &ScheduleArgs) -> Result<(), CliError> {
    let mut rng = stream_rng(args.seed, 0);
    let real = match args.scheme {
        SchemeKind::FixedUniform => fixed_uniform_schedule(args.k, args.len, &mut rng)?,
        kind => {
            let table = CoeffTable::build(kind, args.len, args.k)?;
            sample_schedule(&table, args.k, &(0..args.len).collect::<Vec<_>>(), &mut rng)?
        }
    };
    emit(args.out.as_deref(), false, Some(args.seed), &[], 0, |w| {
        for (k, step) in real.steps().iter().enumerate() {
            let mut shown: Vec<usize> = step.iter().map(|i| i + 1).collect();
            shown.sort_unstable();
            let line: Vec<String> = shown.iter().map(usize::to_string).collect();
            writeln!(w, "step {}: {}", k + 1, line.join(" "))
                .map_err(io_err(Path::new("<output>")))?;
        }
        Ok(())
    })
}

pub fn cmd_profile(args: &ProfileArgs, argv: &[String]) -> Result<(), CliError> {
    let started = unix_now();
    adaptive_only(args.scheme)?;
    let table = CoeffTable::build(args.scheme, args.len, args.k)?;
    let prof = mean_batch_size_profile(&table, args.k, args.len, args.trials, args.seed)?;
    emit(
        args.output.out.as_deref(),
        args.output.manifest,
        Some(args.seed),
        argv,
        started,
        |w| {
            let mut c = csv::Writer::from_writer(w);
            c.write_record(["step", "mean_size", "std_size"])
                .map_err(csv_err)?;
            for (k, s) in prof.iter().enumerate() {
                c.write_record([(k + 1).to_string(), s.mean.to_string(), s.std.to_string()])
                    .map_err(csv_err)?;
            }
            c.flush().map_err(io_err(Path::new("<output>")))
        },
    )
}

pub fn cmd_rs(args: &RsArgs, argv: &[String]) -> Result<(), CliError> {
    let started = unix_now();
    let seed = match (args.seed, args.scheme) {
        (Some(s), _) => s,
        (None, SchemeKind::FixedUniform) => 0,
        (None, _) => {
            return Err(CliError::Args(
                "--seed is required for the tc and dtc schemes".into(),
            ))
        }
    };
    if !args.q.is_power_of_two() || args.q < 2 {
        return Err(CliError::Args(format!(
            "--q must be a power of two, got {}",
            args.q
        )));
    }
    let field = Gf2m::new(args.q.trailing_zeros())?;
    let spec = RsCodeSpec::new(field, args.len, args.d)?;
    let mut config = RsExperimentConfig::new(spec, args.scheme, args.k.clone(), seed);
    config.trials = args.trials;
    config.exact_dp = args.exact_dp;
    config.log_base = if args.bits {
        LogBase::Bits
    } else {
        LogBase::Nats
    };
    let records = run_experiment(&config)?;
    emit(
        args.output.out.as_deref(),
        args.output.manifest,
        Some(seed),
        argv,
        started,
        |w| write_records_csv(&records, w).map_err(csv_err),
    )?;
    let unit = config.log_base;
    for r in &records {
        eprintln!(
            "{} K={}: mean {:.6} +- {:.6} {unit}, reference {:.6} {unit}",
            r.scheme,
            r.k,
            unit.from_nats(r.kl_mean),
            unit.from_nats(r.kl_stderr),
            unit.from_nats(r.theory)
        );
    }
    Ok(())
}

/// Parses `argv` and runs the chosen subcommand.
pub fn run(argv: Vec<String>) -> Result<(), CliError> {
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            std::process::exit(if code == 0 { 0 } else { EXIT_ARGS });
        }
    };
    if cli.threads == 0 {
        return Err(CliError::Args("--threads must be at least 1".into()));
    }
    // a second init (only possible in-process, e.g. from tests) keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global();
    match &cli.command {
        Command::Coeffs(a) => cmd_coeffs(a, &argv),
        Command::Verify(a) => verify::cmd_verify(a, &argv),
        Command::Schedule(a) => cmd_schedule(a),
        Command::Profile(a) => cmd_profile(a, &argv),
        Command::Rs(a) => cmd_rs(a, &argv),
    }
}
