use std::path::{Path, PathBuf};

use super::TrainArgs;
use crate::checkpoint::Checkpoint;
use crate::config::RunFile;
use crate::error::{Error, Result};
use crate::eval::{evaluate, Upscaler};
use crate::io::write_atomic;
use crate::network::Network;
use crate::training::{MetricRow, Snapshot, Trainer};

#[derive(Clone, Debug, PartialEq)]
pub struct TrainSummary {
    pub out_dir: PathBuf,
    pub iterations: u64,
    pub best_val_psnr: f64,
    /// Held-out PSNR of the best checkpoint and of bicubic, when a test set exists.
    pub test_psnr: Option<(f64, f64)>,
}

pub fn train(a: &TrainArgs) -> Result<TrainSummary> {
    let mut file = match &a.config {
        Some(path) => RunFile::load(path)?,
        None if a.toy => RunFile::default(),
        None => return Err(Error::Usage("train needs a config file unless --toy is given".into())),
    };
    if a.seed.is_some() {
        file.seed = a.seed;
    }
    let run = file.resolve(a.toy)?;
    let exp = &run.experiment;
    let out = a
        .out
        .clone()
        .or(run.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("runs").join(if a.toy { "toy" } else { "train" }));
    let net = Network::new(exp.network.clone())?;
    let splits = run.data.load(exp.network.upscale)?;
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let metrics_path = out.join("metrics.csv");
    let final_path = out.join("final.ckpt");
    let best_path = out.join("best.ckpt");

    let (mut trainer, mut log) = match &a.resume {
        Some(ckpt) => {
            let last = Checkpoint::load_matching(ckpt, exp, a.force)?.snapshot;
            let best = match best_path.exists() {
                true => Some(Checkpoint::load_matching(&best_path, exp, a.force)?.snapshot),
                false => None,
            }
            .filter(|b| b.iteration <= last.iteration);
            let log = resumed_log(&metrics_path, last.iteration)?;
            (Trainer::resume(&net, exp.train.clone(), last, best)?, log)
        }
        None => {
            let params = net.init_params(exp.train.seed);
            let log = format!("{}\n", MetricRow::CSV_HEADER);
            (Trainer::new(&net, exp.train.clone(), params)?, log)
        }
    };

    let save = |snap: &Snapshot, path: &Path| {
        Checkpoint {
            experiment: exp.clone(),
            snapshot: snap.clone(),
        }
        .save(path)
    };
    let total = exp.train.iterations;
    while !trainer.is_finished() {
        let row = trainer.step(&splits.train, &splits.val)?;
        log.push_str(&row.csv_line());
        log.push('\n');
        let Some(psnr) = row.val_psnr else { continue };
        if trainer.best().iteration == row.iter {
            save(trainer.best(), &best_path)?;
        }
        // The log and final.ckpt always describe the same iteration.
        save(trainer.last(), &final_path)?;
        write_atomic(&metrics_path, log.as_bytes())?;
        if !a.quiet {
            eprintln!("iter {}/{total}  loss {:.6}  lr {:.3e}  val {psnr:.3} dB", row.iter, row.loss, row.lr);
        }
    }
    // A resumed run that was already finished still leaves a complete set of files.
    if !best_path.exists() {
        save(trainer.best(), &best_path)?;
    }
    save(trainer.last(), &final_path)?;
    write_atomic(&metrics_path, log.as_bytes())?;

    let test_psnr = match &splits.test {
        Some(test) => {
            let best = trainer.best();
            let sr = evaluate(&Upscaler::Model { net: &net, params: &best.params }, test)?;
            let bicubic = evaluate(&Upscaler::Bicubic { scale: exp.network.upscale }, test)?;
            if !a.quiet {
                println!(
                    "{} test PSNR {:.3} dB (bicubic {:.3} dB, {:+.3} dB) on {} images",
                    exp.network.model.label(),
                    sr.mean_psnr,
                    bicubic.mean_psnr,
                    sr.mean_psnr - bicubic.mean_psnr,
                    test.len()
                );
            }
            Some((sr.mean_psnr, bicubic.mean_psnr))
        }
        None => None,
    };
    Ok(TrainSummary {
        out_dir: out,
        iterations: trainer.last().iteration,
        best_val_psnr: trainer.last().best_val_psnr,
        test_psnr,
    })
}

/// The existing log cut back to the rows up to `iteration`.
fn resumed_log(path: &Path, iteration: u64) -> Result<String> {
    let mut log = format!("{}\n", MetricRow::CSV_HEADER);
    let text = match path.exists() {
        true => std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?,
        false => String::new(),
    };
    let mut next = 1;
    for line in text.lines().skip(1) {
        let iter: u64 = line
            .split(',')
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Usage(format!("{}: malformed row {line:?}", path.display())))?;
        if iter > iteration {
            break;
        }
        if iter != next {
            return Err(Error::Usage(format!(
                "{}: expected iteration {next}, found {iter}",
                path.display()
            )));
        }
        next += 1;
        log.push_str(line);
        log.push('\n');
    }
    if next != iteration + 1 {
        return Err(Error::Usage(format!(
            "{} stops at iteration {}, the checkpoint is at {iteration}",
            path.display(),
            next - 1
        )));
    }
    Ok(log)
}
