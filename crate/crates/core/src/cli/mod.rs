//! The `liplab` command line: synthesize a corpus, run the spectrogram codec,
//! train both networks, predict speech from frames and score it.
//!
//! stdout carries one JSON object per command; progress and diagnostics go to
//! stderr. Exit status is 0 on success, 1 on runtime or data errors and 2 on
//! usage errors.

mod commands;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, Parser, Subcommand};
use thiserror::Error;

use crate::audspec::{AudSpecError, AudSpecParams};
use crate::datapipe::DataError;
use crate::metrics::MetricError;
use crate::nets::NetError;
use crate::tensor::TensorError;
use crate::training::TrainError;

pub const THREADS_ENV: &str = "LIPLAB_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{}: {source}", path.display())]
    File { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Audio(#[from] AudSpecError),
    #[error(transparent)]
    Pipeline(#[from] DataError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "liplab", version, about = "Lip-to-speech toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic paired corpus with a manifest.
    Synth(SynthArgs),
    /// Auditory spectrogram codec.
    #[command(subcommand)]
    Audspec(AudspecCommand),
    /// Train the autoencoder or the lip reader.
    #[command(subcommand)]
    Train(TrainCommand),
    /// Reconstruct speech from a frame file.
    Predict(PredictArgs),
    /// Score test audio against references.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub count: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Seconds per sample, a multiple of 0.2.
    #[arg(long, default_value_t = 3.0)]
    pub duration: f64,
}

#[derive(Debug, Clone, Copy, Args)]
pub struct CodecArgs {
    #[arg(long, default_value_t = 10.0)]
    pub frmlen: f64,
    #[arg(long, default_value_t = 10.0)]
    pub tc: f64,
    #[arg(long, default_value_t = -2, allow_negative_numbers = true)]
    pub fac: i32,
    #[arg(long, default_value_t = -1, allow_negative_numbers = true)]
    pub shft: i32,
}

impl CodecArgs {
    fn params(&self) -> Result<AudSpecParams> {
        let p = AudSpecParams {
            frm_len: self.frmlen,
            tc: self.tc,
            fac: self.fac,
            shft: self.shft,
        };
        p.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(p)
    }
}

#[derive(Debug, Subcommand)]
pub enum AudspecCommand {
    /// WAV to AUDS.
    Encode {
        input: PathBuf,
        output: PathBuf,
        #[command(flatten)]
        codec: CodecArgs,
    },
    /// AUDS to WAV by iterative inversion.
    Decode {
        input: PathBuf,
        output: PathBuf,
        #[arg(long, default_value_t = 50, value_parser = clap::value_parser!(u64).range(1..))]
        iters: u64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Corpus directory holding manifest.json.
    #[arg(long)]
    pub data: PathBuf,
    /// JSON file overriding the training defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Checkpoint path; the sidecar and history are written next to it.
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum TrainCommand {
    Ae(TrainArgs),
    Lip {
        #[command(flatten)]
        args: TrainArgs,
        /// Trained autoencoder checkpoint providing the targets.
        #[arg(long)]
        ae: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub frames: PathBuf,
    #[arg(long)]
    pub lip: PathBuf,
    #[arg(long)]
    pub ae: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the decoded spectrogram as AUDS.
    #[arg(long)]
    pub auds: Option<PathBuf>,
    #[arg(long, default_value_t = 50, value_parser = clap::value_parser!(u64).range(1..))]
    pub iters: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long = "ref")]
    pub reference: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

/// Sidecar JSON path of a checkpoint.
pub fn sidecar_path(ckpt: &Path) -> PathBuf {
    let mut s = ckpt.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Training history CSV path of a checkpoint.
pub fn history_path(ckpt: &Path) -> PathBuf {
    let mut s = ckpt.as_os_str().to_owned();
    s.push(".history.csv");
    PathBuf::from(s)
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var(THREADS_ENV) else { return Ok(()) };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?;
    #[cfg(feature = "parallel")]
    {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = n;
    Ok(())
}

/// Usage line of the deepest subcommand named in `args`.
fn usage(args: &[OsString]) -> String {
    let mut cmd = Cli::command();
    cmd.build();
    for a in args.iter().skip(1) {
        match a.to_str().and_then(|s| cmd.find_subcommand(s)) {
            Some(sub) => cmd = sub.clone(),
            None => break,
        }
    }
    cmd.render_usage().to_string()
}

/// Parses `args` and runs the command; returns the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            if !e.use_stderr() {
                return 0;
            }
            let text = e.render().to_string();
            if !text.contains("Usage:") {
                eprintln!("\n{}", usage(&args));
            }
            return 2;
        }
    };
    match configure_threads().and_then(|_| commands::dispatch(cli.command)) {
        Ok(json) => {
            println!("{json}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
