//! The `paon` command-line tool.

mod ablate;
mod train;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

pub use ablate::{ablate, AblationCell, AblationReport};
pub use train::{train, TrainSummary};

use crate::checkpoint::Checkpoint;
use crate::data::synth::TextureSpec;
use crate::data::{load_png, save_png, Dataset};
use crate::error::{Error, Result};
use crate::eval::{evaluate, Upscaler};
use crate::network::Network;
use crate::tensor::{Shape, Tensor};

#[derive(Debug, Parser)]
#[command(name = "paon", version, about = "Padé neuron networks for single-image super-resolution")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a network; writes best.ckpt, final.ckpt and metrics.csv.
    Train(TrainArgs),
    /// Score a checkpoint (or bicubic interpolation) on a dataset.
    Eval(EvalArgs),
    /// Super-resolve one PNG.
    Sr(SrArgs),
    /// Train the variant / shifter / placement grid and write ablation.md.
    Ablate(AblateArgs),
    /// Print a checkpoint's config, parameter counts and shifter magnitudes.
    Inspect(InspectArgs),
    /// Write a synthetic texture dataset (`OUT/HR/*.png`).
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    /// Run file (TOML). Optional with --toy.
    pub config: Option<PathBuf>,
    /// Shrink to 1 block, 8 channels and 500 iterations; synthetic data unless the file names some.
    #[arg(long)]
    pub toy: bool,
    /// Continue from a checkpoint (usually final.ckpt).
    #[arg(long, value_name = "CKPT")]
    pub resume: Option<PathBuf>,
    /// Accept a checkpoint written by a different config.
    #[arg(long)]
    pub force: bool,
    /// Output directory (overrides out_dir in the file).
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Suppress progress lines.
    #[arg(long, short)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    /// Dataset root containing HR/ (and optionally LRx{2,4}/).
    pub dataset: PathBuf,
    #[arg(long, value_name = "FILE", required_unless_present = "bicubic", conflicts_with = "bicubic")]
    pub ckpt: Option<PathBuf>,
    /// Score bicubic interpolation instead of a network.
    #[arg(long)]
    pub bicubic: bool,
    /// Upscale factor; must match the checkpoint.
    #[arg(long, value_parser = ["2", "4"])]
    pub scale: Option<String>,
    /// Also write the table to this file.
    #[arg(long, value_name = "FILE")]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SrArgs {
    pub ckpt: PathBuf,
    pub input: PathBuf,
    pub output: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct AblateArgs {
    /// Run file (TOML); toy scale is always applied.
    pub config: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, short)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Args)]
pub struct InspectArgs {
    pub ckpt: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    pub out: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub count: usize,
    #[arg(long, default_value_t = 32)]
    pub size: usize,
    #[arg(long, default_value_t = 8)]
    pub max_freq: i32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Parses the process arguments, runs the command and maps errors to exit codes.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

pub fn run(command: &Command) -> Result<()> {
    match command {
        Command::Train(a) => train(a).map(|_| ()),
        Command::Eval(a) => {
            print!("{}", eval(a)?);
            Ok(())
        }
        Command::Sr(a) => sr(a),
        Command::Ablate(a) => {
            let report = ablate(a)?;
            print!("{}", report.markdown());
            Ok(())
        }
        Command::Inspect(a) => {
            print!("{}", inspect(&a.ckpt)?);
            Ok(())
        }
        Command::Synth(a) => synth(a),
    }
}

/// Returns the evaluation CSV (also written to `--csv` when given).
pub fn eval(a: &EvalArgs) -> Result<String> {
    let scale = a.scale.as_deref().map(|s| s.parse::<usize>().expect("validated by clap"));
    let ckpt = a.ckpt.as_deref().map(Checkpoint::load).transpose()?;
    let net = ckpt
        .as_ref()
        .map(|c| Network::new(c.experiment.network.clone()))
        .transpose()?;
    let up = match (&ckpt, &net) {
        (Some(c), Some(net)) => {
            let trained = net.config().upscale;
            if let Some(s) = scale.filter(|&s| s != trained) {
                return Err(Error::Config(format!("--scale {s} does not match the checkpoint's x{trained} network")));
            }
            Upscaler::Model {
                net,
                params: &c.snapshot.params,
            }
        }
        _ => Upscaler::Bicubic { scale: scale.unwrap_or(2) },
    };
    let ds = Dataset::load(&a.dataset, Some(up.scale()))?;
    let csv = evaluate(&up, &ds)?.to_csv();
    if let Some(path) = &a.csv {
        crate::io::write_atomic(path, csv.as_bytes())?;
    }
    Ok(csv)
}

pub fn sr(a: &SrArgs) -> Result<()> {
    let ckpt = Checkpoint::load(&a.ckpt)?;
    let net = Network::new(ckpt.experiment.network.clone())?;
    let lr = load_png(&a.input)?;
    let up = Upscaler::Model {
        net: &net,
        params: &ckpt.snapshot.params,
    };
    save_png(&up.upscale(&lr)?, &a.output)
}

/// Human-readable summary of a checkpoint.
pub fn inspect(path: &Path) -> Result<String> {
    let ckpt = Checkpoint::load(path)?;
    let net = Network::new(ckpt.experiment.network.clone())?;
    let params = &ckpt.snapshot.params;
    let mut out = String::new();
    let _ = writeln!(out, "# {}", path.display());
    let _ = writeln!(out, "iteration = {}", ckpt.snapshot.iteration);
    let _ = writeln!(out, "best_val_psnr = {:.6}", ckpt.snapshot.best_val_psnr);
    let _ = writeln!(out, "optimizer_step = {}", ckpt.snapshot.optim.step);
    let _ = writeln!(out, "\n{}", ckpt.experiment.canonical());
    let _ = writeln!(out, "layer,params");
    let counts = net.layer_counts();
    for (name, n) in &counts {
        let _ = writeln!(out, "{name},{n}");
    }
    let _ = writeln!(out, "total,{}", counts.iter().map(|(_, n)| n).sum::<usize>());
    let shifters = net.shifters();
    if !shifters.is_empty() {
        let _ = writeln!(out, "\nshifter,bound,max_abs_weight,max_abs_shift_at_zero_input");
        for (layer, s) in shifters {
            let w = params.get(&s.weight_name()).ok_or_else(|| missing(&s.weight_name()))?;
            let max_w = w.data().iter().fold(0f32, |m, v| m.max(v.abs()));
            let c = w.shape().c();
            let shifts = s.evaluate_shifts(params, &Tensor::zeros(Shape::new(1, c, 1, 1)))?;
            let max_s = shifts.data().iter().fold(0f32, |m, v| m.max(v.abs()));
            let _ = writeln!(out, "{layer},{},{max_w:.6},{max_s:.6}", s.bound());
        }
    }
    Ok(out)
}

fn missing(name: &str) -> Error {
    Error::Config(format!("checkpoint has no parameter {name}"))
}

pub fn synth(a: &SynthArgs) -> Result<()> {
    let spec = TextureSpec {
        size: a.size,
        max_freq: a.max_freq,
        ..TextureSpec::default()
    };
    if a.count == 0 || a.size < 4 || a.max_freq < 1 {
        return Err(Error::Usage("synth needs count >= 1, size >= 4 and max_freq >= 1".into()));
    }
    Dataset::synthetic("synth", a.seed, a.count, &spec).save(&a.out)
}
