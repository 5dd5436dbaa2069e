//! Command-line interface.
//!
//! Every subcommand reads/writes JSON channel files (`-` for stdin/stdout)
//! and reports failures as a single `error: <class>: <message>` line on
//! stderr. Exit codes: 0 success, 1 usage, 2 bad input or I/O, 3 numerical
//! failure.

use crate::channels::io::{read_channel_json, write_channel_json};
use crate::channels::{zoo, ChannelError, MinimalDims, QuantumChannel};
use crate::detection::{
    detect, maximize_ic, perturbation_curve, DetectConfig, DetectionError, EpsGrid,
};
use crate::harness::{boundary_check, run_campaign, ExperimentConfig, HarnessError, Mode};
use crate::numkernel::CMatrix;
use crate::sampling::{sample_channel, SamplingError, SeededStream};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use std::io::{Read, Write};
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "capdetect",
    version,
    about = "Detect positive coherent information of random quantum channels"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a Haar-random channel and write it as JSON.
    Sample(SampleArgs),
    /// Print dimensions and minimal dilation dimensions of a channel file.
    Inspect(InspectArgs),
    /// Run the positivity detector on a channel file.
    Detect(DetectArgs),
    /// Trace the coherent-information perturbation curve of a channel file.
    IcCurve(IcCurveArgs),
    /// Maximize coherent information over input states by gradient ascent.
    Maximize(MaximizeArgs),
    /// Run a Monte Carlo campaign and write records.csv + summary.json.
    Mc(McArgs),
    /// Check that flat-measure samples are interior and complement-positive.
    Boundary(BoundaryArgs),
    /// Write a named builtin channel as JSON.
    Builtin(BuiltinArgs),
}

#[derive(Args)]
struct SampleArgs {
    /// Input dimension.
    #[arg(long)]
    d: usize,
    /// Output dimension.
    #[arg(long)]
    dout: usize,
    /// Environment dimension.
    #[arg(long)]
    denv: usize,
    /// RNG seed.
    #[arg(long)]
    seed: u64,
    /// RNG stream id.
    #[arg(long, default_value_t = 0)]
    stream: u64,
    /// Output path, `-` for stdout.
    #[arg(long, default_value = "-")]
    out: String,
}

#[derive(Args)]
struct InspectArgs {
    /// Channel JSON file, `-` for stdin.
    file: String,
    #[arg(long, default_value = "-")]
    out: String,
}

#[derive(Args)]
struct DetectArgs {
    /// Channel JSON file, `-` for stdin.
    file: String,
    /// Seed for the witness search.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Random trials in the max-rank search.
    #[arg(long, default_value_t = 64)]
    tries: usize,
    /// Hill-climb steps if the trials fall short of max rank.
    #[arg(long, default_value_t = 200)]
    hill_steps: usize,
    #[arg(long, default_value = "-")]
    out: String,
}

#[derive(Args)]
struct IcCurveArgs {
    /// Channel JSON file, `-` for stdin.
    file: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-6)]
    eps_min: f64,
    #[arg(long, default_value_t = 1e-1)]
    eps_max: f64,
    #[arg(long, default_value_t = 48)]
    points: usize,
    /// Optional CSV dump of the raw curve (epsilon, ic_bits).
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long, default_value = "-")]
    out: String,
}

#[derive(Args)]
struct MaximizeArgs {
    /// Channel JSON file, `-` for stdin.
    file: String,
    #[arg(long, default_value_t = 4)]
    restarts: usize,
    #[arg(long, default_value_t = 300)]
    iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "-")]
    out: String,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Detect,
    SlopeCheck,
    SupportCheck,
    Maximize,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Detect => Mode::Detect,
            ModeArg::SlopeCheck => Mode::SlopeCheck,
            ModeArg::SupportCheck => Mode::SupportCheck,
            ModeArg::Maximize => Mode::Maximize,
        }
    }
}

#[derive(Args)]
struct McArgs {
    #[arg(long)]
    d: usize,
    #[arg(long)]
    dout: usize,
    #[arg(long)]
    denv: usize,
    /// Number of channels to sample.
    #[arg(long)]
    n: usize,
    #[arg(long)]
    seed: u64,
    /// Directory receiving records.csv and summary.json.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = ModeArg::Detect)]
    mode: ModeArg,
    #[arg(long, default_value_t = 64)]
    tries: usize,
    #[arg(long, default_value_t = 200)]
    hill_steps: usize,
    /// Worker threads, 0 = all cores.
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Restarts per sample in maximize mode.
    #[arg(long, default_value_t = 2)]
    restarts: usize,
    /// Ascent iterations per restart in maximize mode.
    #[arg(long, default_value_t = 200)]
    iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    eps_min: f64,
    #[arg(long, default_value_t = 1e-1)]
    eps_max: f64,
    #[arg(long, default_value_t = 48)]
    points: usize,
}

#[derive(Args)]
struct BoundaryArgs {
    #[arg(long)]
    d: usize,
    /// Number of flat-measure samples.
    #[arg(long)]
    n: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value = "-")]
    out: String,
}

#[derive(Clone, Copy, ValueEnum)]
enum BuiltinName {
    Identity,
    Erasure,
    Dephasing,
    Depolarizing,
    WernerHolevo,
}

#[derive(Args)]
struct BuiltinArgs {
    #[arg(long, value_enum)]
    name: BuiltinName,
    /// Dimension parameter.
    #[arg(long, default_value_t = 2)]
    d: usize,
    /// Probability parameter (erasure, dephasing, depolarizing).
    #[arg(long)]
    p: Option<f64>,
    #[arg(long, default_value = "-")]
    out: String,
}

enum CliError {
    Usage(String),
    Input(String),
    Numeric(String),
    Io(String),
}

impl CliError {
    fn class(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Input(_) => "input",
            CliError::Numeric(_) => "numeric",
            CliError::Io(_) => "io",
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Input(m) | CliError::Numeric(m) | CliError::Io(m) => m,
        }
    }

    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Input(_) | CliError::Io(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

fn channel_input_error(err: ChannelError) -> CliError {
    match err {
        ChannelError::Num(e) => CliError::Numeric(e.to_string()),
        other => CliError::Input(other.to_string()),
    }
}

fn channel_usage_error(err: ChannelError) -> CliError {
    match err {
        ChannelError::Num(e) => CliError::Numeric(e.to_string()),
        other => CliError::Usage(other.to_string()),
    }
}

fn detection_error(err: DetectionError) -> CliError {
    match err {
        DetectionError::BadGrid { .. } | DetectionError::GridTooCoarse { .. } => {
            CliError::Usage(err.to_string())
        }
        DetectionError::InvalidState { .. } => CliError::Input(err.to_string()),
        DetectionError::Channel(e) => channel_input_error(e),
        DetectionError::Num(e) => CliError::Numeric(e.to_string()),
    }
}

fn sampling_error(err: SamplingError) -> CliError {
    match err {
        SamplingError::DimensionViolation { .. } => CliError::Usage(err.to_string()),
        SamplingError::Channel(e) => channel_usage_error(e),
        other => CliError::Numeric(other.to_string()),
    }
}

fn harness_error(err: HarnessError) -> CliError {
    match err {
        HarnessError::InvalidConfig { .. } => CliError::Usage(err.to_string()),
        HarnessError::Io(e) => CliError::Io(e.to_string()),
        HarnessError::ThreadPool { .. } => CliError::Io(err.to_string()),
        HarnessError::Sampling(e) => sampling_error(e),
        HarnessError::Detection(e) => detection_error(e),
        HarnessError::Channel(e) => channel_input_error(e),
        HarnessError::Num(e) => CliError::Numeric(e.to_string()),
        HarnessError::UnexplainedInconclusive { .. } | HarnessError::InconclusiveBudget { .. } => {
            CliError::Numeric(err.to_string())
        }
    }
}

fn load_channel(path: &str) -> Result<QuantumChannel, CliError> {
    let mut reader: Box<dyn Read> = if path == "-" {
        Box::new(std::io::stdin())
    } else {
        Box::new(
            std::fs::File::open(path)
                .map_err(|e| CliError::Io(format!("cannot open {path}: {e}")))?,
        )
    };
    read_channel_json(&mut reader).map_err(channel_input_error)
}

fn open_output(target: &str) -> Result<Box<dyn Write>, CliError> {
    if target == "-" {
        Ok(Box::new(std::io::stdout()))
    } else {
        std::fs::File::create(target)
            .map(|f| Box::new(f) as Box<dyn Write>)
            .map_err(|e| CliError::Io(format!("cannot create {target}: {e}")))
    }
}

fn emit_json<T: Serialize>(value: &T, target: &str) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Io(format!("serialization failed: {e}")))?;
    let mut out = open_output(target)?;
    out.write_all(text.as_bytes())
        .and_then(|_| out.write_all(b"\n"))
        .map_err(|e| CliError::Io(format!("write failed: {e}")))
}

fn emit_channel(ch: &QuantumChannel, target: &str) -> Result<(), CliError> {
    let mut out = open_output(target)?;
    write_channel_json(ch, &mut out).map_err(|e| CliError::Io(e.to_string()))
}

#[derive(Serialize)]
struct InspectReport {
    d_in: usize,
    d_out: usize,
    d_env: usize,
    minimal_dims: MinimalDims,
}

fn cmd_sample(a: &SampleArgs) -> Result<(), CliError> {
    let ch = sample_channel(a.d, a.dout, a.denv, SeededStream::new(a.seed, a.stream))
        .map_err(sampling_error)?;
    emit_channel(&ch, &a.out)
}

fn cmd_inspect(a: &InspectArgs) -> Result<(), CliError> {
    let ch = load_channel(&a.file)?;
    let minimal_dims = ch.minimal_dims().map_err(channel_input_error)?;
    let report = InspectReport {
        d_in: ch.d_in(),
        d_out: ch.d_out(),
        d_env: ch.d_env(),
        minimal_dims,
    };
    emit_json(&report, &a.out)
}

fn cmd_detect(a: &DetectArgs) -> Result<(), CliError> {
    let ch = load_channel(&a.file)?;
    let cfg = DetectConfig {
        tries: a.tries,
        hill_steps: a.hill_steps,
        gap_threshold: 1e-7,
        stream: SeededStream::new(a.seed, 0),
    };
    let report = detect(&ch, &cfg).map_err(detection_error)?;
    emit_json(&report, &a.out)
}

fn cmd_ic_curve(a: &IcCurveArgs) -> Result<(), CliError> {
    let ch = load_channel(&a.file)?;
    let report = detect(&ch, &DetectConfig::new(SeededStream::new(a.seed, 0)))
        .map_err(detection_error)?;
    let psi = report.witness_psi.as_ref().ok_or_else(|| {
        CliError::Input("no witness state: the max-rank search produced no usable output".into())
    })?;
    let d = ch.d_in();
    let sigma = CMatrix::identity(d).scale(1.0 / d as f64);
    let grid = EpsGrid { eps_min: a.eps_min, eps_max: a.eps_max, points: a.points };
    let curve = perturbation_curve(&ch, psi, &sigma, &grid).map_err(detection_error)?;
    if let Some(csv_path) = &a.csv {
        let mut rows = String::from("epsilon,ic_bits\n");
        for (eps, ic) in curve.epsilons.iter().zip(&curve.ic_values) {
            rows.push_str(&format!("{eps},{ic}\n"));
        }
        std::fs::write(csv_path, rows)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", csv_path.display())))?;
    }
    emit_json(&curve, &a.out)
}

fn cmd_maximize(a: &MaximizeArgs) -> Result<(), CliError> {
    let ch = load_channel(&a.file)?;
    let outcome = maximize_ic(&ch, a.restarts, a.iters, SeededStream::new(a.seed, 0))
        .map_err(detection_error)?;
    emit_json(&outcome, &a.out)
}

fn cmd_mc(a: &McArgs) -> Result<(), CliError> {
    let mut cfg = ExperimentConfig::new(a.d, a.dout, a.denv, a.n, a.seed);
    cfg.mode = a.mode.into();
    cfg.tries = a.tries;
    cfg.hill_steps = a.hill_steps;
    cfg.threads = a.threads;
    cfg.maximize_restarts = a.restarts;
    cfg.maximize_iters = a.iters;
    cfg.eps_grid = EpsGrid { eps_min: a.eps_min, eps_max: a.eps_max, points: a.points };
    cfg.output_dir = Some(a.out.clone());
    let (_, summary) = run_campaign(&cfg).map_err(harness_error)?;
    println!(
        "mc: n={} d={} d_out={} d_env={} channel_positive={:.4} complement_positive={:.4} \
         inconclusive={:.4} anomalies={} -> {}",
        summary.n_samples,
        a.d,
        a.dout,
        a.denv,
        summary.fraction_channel_positive,
        summary.fraction_complement_positive,
        summary.fraction_inconclusive,
        summary.anomaly_count,
        a.out.display()
    );
    Ok(())
}

fn cmd_boundary(a: &BoundaryArgs) -> Result<(), CliError> {
    let summary = boundary_check(a.d, a.n, a.seed).map_err(harness_error)?;
    emit_json(&summary, &a.out)
}

fn cmd_builtin(a: &BuiltinArgs) -> Result<(), CliError> {
    let need_p = |name: &str| {
        a.p.ok_or_else(|| CliError::Usage(format!("builtin {name} requires --p")))
    };
    let ch = match a.name {
        BuiltinName::Identity => zoo::identity(a.d),
        BuiltinName::Erasure => {
            let p = need_p("erasure")?;
            zoo::erasure(a.d, p)
        }
        BuiltinName::Dephasing => {
            if a.d != 2 {
                return Err(CliError::Usage(format!(
                    "builtin dephasing is defined for --d 2, got {}",
                    a.d
                )));
            }
            let p = need_p("dephasing")?;
            zoo::dephasing(p)
        }
        BuiltinName::Depolarizing => {
            let p = need_p("depolarizing")?;
            zoo::depolarizing(a.d, p)
        }
        BuiltinName::WernerHolevo => zoo::werner_holevo(a.d),
    }
    .map_err(channel_usage_error)?;
    emit_channel(&ch, &a.out)
}

/// Parses and runs the CLI, returning the process exit code.
pub fn run(args: impl IntoIterator<Item = String>) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            if matches!(err.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{err}");
                return 0;
            }
            let first = err.to_string();
            let first = first.lines().next().unwrap_or("invalid arguments");
            let detail = first.strip_prefix("error: ").unwrap_or(first);
            eprintln!("error: usage: {detail}");
            return 1;
        }
    };
    let result = match &cli.command {
        Command::Sample(a) => cmd_sample(a),
        Command::Inspect(a) => cmd_inspect(a),
        Command::Detect(a) => cmd_detect(a),
        Command::IcCurve(a) => cmd_ic_curve(a),
        Command::Maximize(a) => cmd_maximize(a),
        Command::Mc(a) => cmd_mc(a),
        Command::Boundary(a) => cmd_boundary(a),
        Command::Builtin(a) => cmd_builtin(a),
    };
    match result {
        Ok(()) => 0,
        Err(err) => {
            let msg = err.message().replace('\n', "; ");
            eprintln!("error: {}: {}", err.class(), msg);
            err.code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> i32 {
        run(std::iter::once("capdetect".to_string()).chain(args.iter().map(|s| s.to_string())))
    }

    #[test]
    fn missing_subcommand_is_usage_error() {
        assert_eq!(run_args(&[]), 1);
    }

    #[test]
    fn unknown_flag_is_usage_error() {
        assert_eq!(run_args(&["sample", "--bogus"]), 1);
    }

    #[test]
    fn missing_file_is_io_error() {
        assert_eq!(run_args(&["inspect", "/nonexistent/channel.json"]), 2);
    }

    #[test]
    fn bad_sample_dimensions_are_usage_errors() {
        assert_eq!(
            run_args(&["sample", "--d", "9", "--dout", "2", "--denv", "2", "--seed", "1"]),
            1
        );
    }

    #[test]
    fn builtin_requires_probability_when_parameterized() {
        assert_eq!(run_args(&["builtin", "--name", "erasure", "--d", "2"]), 1);
    }

    #[test]
    fn help_exits_zero() {
        assert_eq!(run_args(&["--help"]), 0);
        assert_eq!(run_args(&["detect", "--help"]), 0);
    }
}
