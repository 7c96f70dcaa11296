//! Command-line driver: configuration loading, flag overrides, dispatch,
//! and exit-code mapping.
//!
//! Usage shape: `zdsc <da|greedy|ncr|linear|opta|sweep> [--config FILE]
//! [--out DIR] [--seed N] [--csnr-db X] [--rho R] ...`. Flags override the
//! corresponding config keys; the subcommand always decides the method.

pub mod config;
pub mod output;
pub mod plot;
pub mod run;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use config::{RunConfig, RunMethod};
use run::{execute, RunError};

#[derive(Debug, Parser)]
#[command(
    name = "zdsc",
    about = "Zero-delay source-channel mapping design with decoder side information"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Deterministic annealing over piecewise-affine encoders.
    Da(CommonArgs),
    /// Greedy descent on the encoder table.
    Greedy(CommonArgs),
    /// Noisy-channel relaxation (decreasing-lambda homotopy).
    Ncr(CommonArgs),
    /// Linear encoder and matching MMSE decoder.
    Linear(CommonArgs),
    /// Theoretical distortion bound.
    Opta(CommonArgs),
    /// All methods across a range of channel SNRs.
    Sweep(CommonArgs),
}

impl Command {
    fn method(&self) -> RunMethod {
        match self {
            Command::Da(_) => RunMethod::Da,
            Command::Greedy(_) => RunMethod::Greedy,
            Command::Ncr(_) => RunMethod::Ncr,
            Command::Linear(_) => RunMethod::Linear,
            Command::Opta(_) => RunMethod::Opta,
            Command::Sweep(_) => RunMethod::Sweep,
        }
    }

    fn args(&self) -> &CommonArgs {
        match self {
            Command::Da(a)
            | Command::Greedy(a)
            | Command::Ncr(a)
            | Command::Linear(a)
            | Command::Opta(a)
            | Command::Sweep(a) => a,
        }
    }
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// JSON configuration file; flags below override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for result files.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Restart seed (replaces the config seed list).
    #[arg(long)]
    seed: Option<u64>,
    /// Channel SNR target in dB (alternative to --power).
    #[arg(long)]
    csnr_db: Option<f64>,
    /// Transmit power target (alternative to --csnr-db).
    #[arg(long)]
    power: Option<f64>,
    /// Correlation coefficient of source and side information.
    #[arg(long)]
    rho: Option<f64>,
    /// Source variance.
    #[arg(long)]
    sigma_x2: Option<f64>,
    /// Side information variance.
    #[arg(long)]
    sigma_z2: Option<f64>,
    /// Channel noise variance.
    #[arg(long)]
    sigma_n2: Option<f64>,
    /// Fixed power multiplier (skips the power-targeting search).
    #[arg(long)]
    lambda: Option<f64>,
    /// Skip SVG plot emission.
    #[arg(long)]
    no_plots: bool,
}

impl CommonArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(out) = &self.out {
            cfg.out_dir = out.clone();
        }
        if let Some(seed) = self.seed {
            cfg.seeds = vec![seed];
        }
        if let Some(v) = self.csnr_db {
            cfg.csnr_db = Some(v);
            cfg.power = None;
        }
        if let Some(v) = self.power {
            cfg.power = Some(v);
            cfg.csnr_db = None;
        }
        if let Some(v) = self.rho {
            cfg.rho = v;
        }
        if let Some(v) = self.sigma_x2 {
            cfg.sigma_x2 = v;
        }
        if let Some(v) = self.sigma_z2 {
            cfg.sigma_z2 = v;
        }
        if let Some(v) = self.sigma_n2 {
            cfg.sigma_n2 = v;
        }
        if let Some(v) = self.lambda {
            cfg.lambda = Some(v);
        }
        if self.no_plots {
            cfg.plots = false;
        }
    }
}

fn error_record(kind: &str, message: &str) -> String {
    serde_json::json!({ "error": { "kind": kind, "message": message } }).to_string()
}

/// Configure the global thread pool from ZDSC_THREADS (0 or unset = auto).
pub fn init_threads() {
    if let Ok(v) = std::env::var("ZDSC_THREADS") {
        if let Ok(n) = v.trim().parse::<usize>() {
            if n > 0 {
                // Ignore the error when a pool already exists (e.g. tests).
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

/// Full CLI entry point; returns the process exit code
/// (0 success, 2 configuration error, 3 numerical/runtime error).
pub fn run_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are successful exits.
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    init_threads();

    let common = cli.command.args();
    let mut cfg = match &common.config {
        Some(path) => match std::fs::read_to_string(path) {
            Ok(text) => match RunConfig::parse(&text) {
                Ok(cfg) => cfg,
                Err(e) => {
                    eprintln!("{}", error_record("config", &e.0));
                    return 2;
                }
            },
            Err(e) => {
                eprintln!(
                    "{}",
                    error_record("config", &format!("cannot read {}: {e}", path.display()))
                );
                return 2;
            }
        },
        None => RunConfig::default(),
    };
    cfg.method = Some(cli.command.method());
    common.apply(&mut cfg);

    if let Err(e) = cfg.validate() {
        eprintln!("{}", error_record("config", &e.0));
        return 2;
    }

    match execute(&cfg) {
        Ok(result) => {
            let summary = serde_json::json!({
                "method": result.method,
                "lambda": result.lambda,
                "snr_db": result.curve.as_ref().map(|c| c.snr_db),
                "effective_k": result.effective_k,
                "out_dir": cfg.out_dir,
                "wall_time_s": result.wall_time_s,
            });
            println!("{summary}");
            0
        }
        Err(RunError::Config(e)) => {
            eprintln!("{}", error_record("config", &e.0));
            2
        }
        Err(RunError::Runtime(msg)) => {
            let record = error_record("numerical", &msg);
            eprintln!("{record}");
            let _ = output::write_atomic(&cfg.out_dir.join("error.json"), record.as_bytes());
            3
        }
    }
}
