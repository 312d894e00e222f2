//! Command-line front end for the seqseg library: segmentation of signal
//! files, synthetic signal generation, beta/alpha sensitivity sweeps and
//! scan benchmarks, all with reproducible seeds and machine-readable output.
//!
//! Exit codes: 0 on success, 2 on input or flag errors (including parse
//! failures), 1 on internal errors. Every run prints its fully-resolved
//! configuration as one JSON line on stderr so the run can be reproduced
//! exactly.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::NaiveDateTime;
use clap::{Args, Parser, Subcommand, ValueEnum};
use seqseg::segmenter::{
    default_minlength, default_t0, segment, NodeDecision, SegConfig, SegmentInfo,
};
use seqseg::signal::{load_signal, write_wav, RecordingMeta, Signal};
use seqseg::sim::{bench_resolution, bench_to_csv, simulate_signal, sweep, SimSpec};
use serde::Serialize;
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "seqseg",
    version,
    about = "Sequential Bayesian segmentation of 1-D signals by variance change points"
)]
struct Cli {
    /// Worker threads for the scan and chain parallelism; defaults to all
    /// available cores. Results do not depend on this value.
    #[arg(long, global = true, env = "SEQSEG_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Segment a signal file into variance-homogeneous intervals
    Segment(SegmentArgs),
    /// Generate a piecewise-stationary zero-mean Gaussian signal
    Simulate(SimulateArgs),
    /// Sweep beta/alpha grids over a synthetic signal and tabulate segment counts
    Sweep(SweepArgs),
    /// Time the change-point scan across signal sizes and grid resolutions
    Bench(BenchArgs),
}

/// MCMC and segmentation knobs shared by `segment` and `sweep`.
#[derive(Args)]
struct CoreArgs {
    /// Post burn-in MCMC samples per chain
    #[arg(long, default_value_t = 10_000, value_parser = at_least_one, env = "SEQSEG_MCITER")]
    mciter: usize,

    /// Burn-in MCMC samples per chain
    #[arg(long, default_value_t = 10_000, value_parser = at_least_one, env = "SEQSEG_MCBURN")]
    mcburn: usize,

    /// Independent MCMC chains per tested cut
    #[arg(long, default_value_t = 4, value_parser = at_least_one, env = "SEQSEG_NCHAINS")]
    nchains: usize,

    /// Warm-up steps before covariance adaptation [default: min(1000, mcburn/2)]
    #[arg(long, env = "SEQSEG_T0")]
    t0: Option<usize>,

    /// Minimum segment length in samples [default: half a second at the
    /// sampling rate, or 5512 when the rate is unknown]
    #[arg(long, env = "SEQSEG_MINLENGTH")]
    minlength: Option<usize>,

    /// Step of the cut-candidate grid, in samples
    #[arg(long, default_value_t = 1, value_parser = at_least_one, env = "SEQSEG_TRES")]
    tres: usize,
}

impl CoreArgs {
    /// Materializes a full segmentation config; `fs` feeds the minlength
    /// default when the flag is absent.
    fn resolve(&self, beta: f64, alpha: f64, seed: u64, fs: Option<f64>) -> SegConfig {
        SegConfig {
            beta,
            alpha,
            mciter: self.mciter,
            mcburn: self.mcburn,
            nchains: self.nchains,
            t0: self.t0.unwrap_or_else(|| default_t0(self.mcburn)),
            minlength: self.minlength.unwrap_or_else(|| default_minlength(fs)),
            tres: self.tres,
            seed,
        }
    }
}

#[derive(Args)]
struct SegmentArgs {
    /// Input signal: .wav, .csv/.txt (one value per line), or raw
    /// little-endian f64 for any other extension
    input: PathBuf,

    /// Output path; stdout when omitted
    #[arg(short, long, env = "SEQSEG_OUTPUT")]
    output: Option<PathBuf>,

    /// Output format
    #[arg(long, value_enum, default_value_t = SegmentFormat::Json, env = "SEQSEG_FORMAT")]
    format: SegmentFormat,

    /// Scale of the Laplace prior on the variance ratio, the main
    /// sensitivity knob
    #[arg(long, default_value_t = 0.01, value_parser = parse_beta, env = "SEQSEG_BETA")]
    beta: f64,

    /// Evidence threshold: a node splits when the mean evidence for
    /// homogeneity falls below this
    #[arg(long, default_value_t = 0.1, value_parser = parse_alpha, env = "SEQSEG_ALPHA")]
    alpha: f64,

    /// Seed for the MCMC streams
    #[arg(long, default_value_t = 0, env = "SEQSEG_SEED")]
    seed: u64,

    #[command(flatten)]
    core: CoreArgs,
}

#[derive(Args)]
struct SimulateArgs {
    /// Output file
    #[arg(short, long, env = "SEQSEG_OUTPUT")]
    output: PathBuf,

    /// Segment boundaries, comma separated, starting at 0; the last entry
    /// is the signal length
    #[arg(long, value_delimiter = ',', required = true)]
    boundaries: Vec<usize>,

    /// Per-segment variance factors, comma separated; one per segment
    #[arg(long, value_delimiter = ',', required = true)]
    deltas: Vec<f64>,

    /// Base standard deviation of a delta=1 segment (keep well below 1
    /// for WAV output, which clips at full scale)
    #[arg(long, default_value_t = 1.0)]
    sigma0: f64,

    /// Seed for the signal draws
    #[arg(long, default_value_t = 0, env = "SEQSEG_SEED")]
    seed: u64,

    /// Output encoding: 16-bit PCM WAV or raw little-endian f64
    #[arg(long, value_enum, default_value_t = SimFormat::F64, env = "SEQSEG_FORMAT")]
    format: SimFormat,

    /// Sampling rate written to WAV headers
    #[arg(long, default_value_t = 11_025, value_parser = clap::value_parser!(u32).range(1..))]
    fs: u32,
}

#[derive(Args)]
struct SweepArgs {
    /// Output path for the CSV report; stdout when omitted
    #[arg(short, long, env = "SEQSEG_OUTPUT")]
    output: Option<PathBuf>,

    /// Segment boundaries of the synthetic signal, comma separated
    #[arg(long, value_delimiter = ',', required = true)]
    boundaries: Vec<usize>,

    /// Per-segment variance factors, comma separated
    #[arg(long, value_delimiter = ',', required = true)]
    deltas: Vec<f64>,

    /// Base standard deviation of a delta=1 segment
    #[arg(long, default_value_t = 1.0)]
    sigma0: f64,

    /// Beta grid, comma separated
    #[arg(long, value_delimiter = ',', required = true, value_parser = parse_beta)]
    betas: Vec<f64>,

    /// Alpha grid, comma separated
    #[arg(long, value_delimiter = ',', required = true, value_parser = parse_alpha)]
    alphas: Vec<f64>,

    /// Segmentation runs per (beta, alpha) cell
    #[arg(long, default_value_t = 30, value_parser = at_least_one)]
    repeats: usize,

    /// Master seed; the signal and every run's seed derive from it, so the
    /// seed plus this command line reproduces the table exactly
    #[arg(long, env = "SEQSEG_SEED")]
    seed: u64,

    #[command(flatten)]
    core: CoreArgs,
}

#[derive(Args)]
struct BenchArgs {
    /// Output path for the CSV report; stdout when omitted
    #[arg(short, long, env = "SEQSEG_OUTPUT")]
    output: Option<PathBuf>,

    /// Signal sizes in samples, comma separated
    #[arg(long, value_delimiter = ',', required = true)]
    sizes: Vec<usize>,

    /// Grid steps to time, comma separated
    #[arg(long, value_delimiter = ',', required = true)]
    resolutions: Vec<usize>,

    /// Master seed for the synthetic benchmark signals
    #[arg(long, env = "SEQSEG_SEED")]
    seed: u64,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum SegmentFormat {
    Json,
    Csv,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum SimFormat {
    Wav,
    F64,
}

fn variant_name<T: ValueEnum>(v: T) -> String {
    v.to_possible_value()
        .expect("CLI enums have no skipped variants")
        .get_name()
        .to_string()
}

/// Evidence threshold parser; the open-interval bound is part of the
/// documented interface.
fn parse_alpha(s: &str) -> Result<f64, String> {
    let v: f64 = s
        .parse()
        .map_err(|e| format!("not a number ({e}); the threshold must lie in (0, 1)"))?;
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(format!("must lie in the open interval (0, 1), got {v}"))
    }
}

fn parse_beta(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("not a number ({e})"))?;
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(format!("must be a positive finite number, got {v}"))
    }
}

fn at_least_one(s: &str) -> Result<usize, String> {
    let v: usize = s.parse().map_err(|e| format!("not a count ({e})"))?;
    if v >= 1 {
        Ok(v)
    } else {
        Err("must be at least 1".into())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        // Ignore the error: the global pool can only have been initialized
        // by us, and only once.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                // Chains failing to initialize is the one failure that is
                // not attributable to the input.
                seqseg::Error::AllChainsInvalid(_) => ExitCode::from(1),
                _ => ExitCode::from(2),
            }
        }
    }
}

fn run(command: Command) -> seqseg::Result<()> {
    match command {
        Command::Segment(args) => cmd_segment(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Bench(args) => cmd_bench(args),
    }
}

/// One changepoint row of the segment report.
#[derive(Serialize)]
struct ChangepointOut {
    index: usize,
    /// Wall-clock time of the cut when the input carried a start timestamp.
    time: Option<NaiveDateTime>,
    /// Mean squared sample value of the segment ending at this cut.
    power: f64,
    /// Mean evidence for homogeneity at the node that split here.
    evidence: f64,
}

#[derive(Serialize)]
struct SegmentOutput<'a> {
    input: String,
    n: usize,
    fs: Option<f64>,
    origin: Option<NaiveDateTime>,
    warnings: &'a [String],
    config: &'a SegConfig,
    changepoints: Vec<ChangepointOut>,
    segments: &'a [SegmentInfo],
    decisions: &'a [NodeDecision],
}

fn cmd_segment(args: SegmentArgs) -> seqseg::Result<()> {
    let signal = load_signal(&args.input)?;
    let cfg = args
        .core
        .resolve(args.beta, args.alpha, args.seed, signal.fs());
    log_config(json!({
        "command": "segment",
        "input": args.input.display().to_string(),
        "output": args.output.as_ref().map(|p| p.display().to_string()),
        "format": variant_name(args.format),
        "threads": rayon::current_num_threads(),
        "config": cfg,
    }));
    for w in signal.warnings() {
        eprintln!("warning: {w}");
    }

    let result = segment(&signal, &cfg)?;
    let changepoints = changepoint_rows(&signal, &result);
    let text = match args.format {
        SegmentFormat::Json => {
            let out = SegmentOutput {
                input: args.input.display().to_string(),
                n: signal.n(),
                fs: signal.fs(),
                origin: signal.origin(),
                warnings: signal.warnings(),
                config: &cfg,
                changepoints,
                segments: &result.segments,
                decisions: &result.decisions,
            };
            let mut text = serde_json::to_string_pretty(&out).expect("segment report serializes");
            text.push('\n');
            text
        }
        SegmentFormat::Csv => {
            let mut text = String::from("index,time,power,evidence\n");
            for row in &changepoints {
                let time = row
                    .time
                    .map(|t| t.format("%Y-%m-%dT%H:%M:%S%.f").to_string())
                    .unwrap_or_default();
                text.push_str(&format!(
                    "{},{},{},{}\n",
                    row.index, time, row.power, row.evidence
                ));
            }
            text
        }
    };
    write_text(args.output.as_deref(), &text)
}

/// Joins changepoints with their timestamps, the power of the segment each
/// one closes, and the evidence of the split that produced it.
fn changepoint_rows(signal: &Signal, result: &seqseg::SegmentationResult) -> Vec<ChangepointOut> {
    let meta = match (signal.origin(), signal.fs()) {
        (Some(start_time), Some(fs)) => Some(RecordingMeta { start_time, fs }),
        _ => None,
    };
    result
        .changepoints
        .iter()
        .enumerate()
        .map(|(k, &index)| {
            let evidence = result
                .decisions
                .iter()
                .find(|d| d.cut == Some(index) && d.evidence.is_some())
                .and_then(|d| d.evidence)
                .expect("every changepoint comes from a split decision");
            ChangepointOut {
                index,
                time: meta.as_ref().map(|m| m.index_to_time(index)),
                // segments[k] is the segment that ends at changepoints[k].
                power: result.segments[k].power,
                evidence,
            }
        })
        .collect()
}

fn cmd_simulate(args: SimulateArgs) -> seqseg::Result<()> {
    let spec = SimSpec {
        boundaries: args.boundaries,
        deltas: args.deltas,
        sigma0: args.sigma0,
        seed: args.seed,
    };
    log_config(json!({
        "command": "simulate",
        "output": args.output.display().to_string(),
        "format": variant_name(args.format),
        "fs": args.fs,
        "spec": spec,
    }));
    let signal = simulate_signal(&spec)?;
    match args.format {
        SimFormat::Wav => write_wav(&args.output, signal.samples(), args.fs)?,
        SimFormat::F64 => {
            let mut bytes = Vec::with_capacity(8 * signal.n());
            for x in signal.samples() {
                bytes.extend_from_slice(&x.to_le_bytes());
            }
            fs::write(&args.output, bytes).map_err(|source| seqseg::Error::Io {
                path: args.output.clone(),
                source,
            })?;
        }
    }
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> seqseg::Result<()> {
    let spec = SimSpec {
        boundaries: args.boundaries,
        deltas: args.deltas,
        sigma0: args.sigma0,
        seed: args.seed,
    };
    // Grid cells overwrite beta/alpha; the first entries only seed the
    // validated template config.
    let cfg = args
        .core
        .resolve(args.betas[0], args.alphas[0], args.seed, None);
    cfg.validate()?;
    log_config(json!({
        "command": "sweep",
        "output": args.output.as_ref().map(|p| p.display().to_string()),
        "spec": spec,
        "betas": args.betas,
        "alphas": args.alphas,
        "repeats": args.repeats,
        "threads": rayon::current_num_threads(),
        "config": cfg,
    }));
    let report = sweep(&[spec], &args.betas, &args.alphas, args.repeats, &cfg, true)?;
    write_text(args.output.as_deref(), &report.to_csv())
}

fn cmd_bench(args: BenchArgs) -> seqseg::Result<()> {
    log_config(json!({
        "command": "bench",
        "output": args.output.as_ref().map(|p| p.display().to_string()),
        "sizes": args.sizes,
        "resolutions": args.resolutions,
        "seed": args.seed,
        "threads": rayon::current_num_threads(),
    }));
    let rows = bench_resolution(&args.sizes, &args.resolutions, args.seed)?;
    write_text(args.output.as_deref(), &bench_to_csv(&rows))
}

/// Prints the fully-resolved run configuration as one JSON line on stderr.
fn log_config(value: serde_json::Value) {
    eprintln!("config: {value}");
}

fn write_text(path: Option<&Path>, text: &str) -> seqseg::Result<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|source| seqseg::Error::Io {
            path: p.to_path_buf(),
            source,
        }),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|()| stdout.flush())
                .map_err(|source| seqseg::Error::Io {
                    path: PathBuf::from("<stdout>"),
                    source,
                })
        }
    }
}
