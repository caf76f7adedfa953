use std::fmt::Write as _;
use std::path::PathBuf;

use super::AblateArgs;
use crate::config::RunFile;
use crate::error::{Error, Result};
use crate::eval::{mean_psnr, Upscaler};
use crate::io::write_atomic;
use crate::layers::Variant;
use crate::network::{Model, Network, Placement};
use crate::training::Trainer;

/// One trained configuration of the grid.
#[derive(Clone, Debug, PartialEq)]
pub struct AblationCell {
    pub variant: Variant,
    pub shift: bool,
    pub placement: Placement,
    pub psnr: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AblationReport {
    pub cells: Vec<AblationCell>,
    pub bicubic_psnr: f64,
    pub eval_set: String,
    pub iterations: u64,
}

pub const COLUMNS: [&str; 7] = ["No Shift", "Shift", "Paon-A", "Paon-S", "FL", "LL", "AL"];

impl AblationReport {
    /// PSNR of one grid cell.
    pub fn cell(&self, variant: Variant, shift: bool, placement: Placement) -> Option<f64> {
        self.cells
            .iter()
            .find(|c| c.variant == variant && c.shift == shift && c.placement == placement)
            .map(|c| c.psnr)
    }

    /// The seven summary columns. Every column varies one setting away from
    /// the reference configuration (Paon-S, shifter on, all layers).
    pub fn columns(&self) -> [(&'static str, f64); 7] {
        use Placement::*;
        use Variant::*;
        let keys = [
            (S, false, All),
            (S, true, All),
            (A, true, All),
            (S, true, All),
            (S, true, First),
            (S, true, Last),
            (S, true, All),
        ];
        std::array::from_fn(|i| {
            let (v, s, p) = keys[i];
            (COLUMNS[i], self.cell(v, s, p).unwrap_or(f64::NAN))
        })
    }

    pub fn markdown(&self) -> String {
        let mut out = String::new();
        let cols = self.columns();
        let _ = writeln!(out, "# Ablation ({} iterations, PSNR in dB on {})\n", self.iterations, self.eval_set);
        let _ = writeln!(out, "| {} |", COLUMNS.join(" | "));
        let _ = writeln!(out, "|{}", "---|".repeat(COLUMNS.len()));
        let row: Vec<String> = cols.iter().map(|(_, v)| format!("{v:.3}")).collect();
        let _ = writeln!(out, "| {} |\n", row.join(" | "));
        let _ = writeln!(out, "Columns use Paon-S with the shifter on in all block layers unless the header says otherwise.\n");
        let _ = writeln!(out, "| variant | shifter | placement | PSNR |");
        let _ = writeln!(out, "|---|---|---|---|");
        for c in &self.cells {
            let _ = writeln!(
                out,
                "| {:?} | {} | {} | {:.3} |",
                c.variant,
                if c.shift { "on" } else { "off" },
                placement_label(c.placement),
                c.psnr
            );
        }
        let _ = writeln!(out, "\nBicubic: {:.3} dB", self.bicubic_psnr);
        out
    }
}

fn placement_label(p: Placement) -> &'static str {
    match p {
        Placement::First => "FL",
        Placement::Last => "LL",
        Placement::All => "AL",
    }
}

/// Trains {A, S} x {shifter off, on} x {first, last, all layers} at toy
/// scale and writes `ablation.md`.
pub fn ablate(a: &AblateArgs) -> Result<AblationReport> {
    let mut file = match &a.config {
        Some(path) => RunFile::load(path)?,
        None => RunFile::default(),
    };
    match file.model {
        None | Some(Model::Padenet) => file.model = Some(Model::Padenet),
        Some(m) => {
            return Err(Error::Config(format!(
                "the ablation varies Padé neuron settings and needs model = \"padenet\", got {}",
                m.label()
            )))
        }
    }
    if a.seed.is_some() {
        file.seed = a.seed;
    }
    let run = file.resolve(true)?;
    let base = run.experiment;
    let splits = run.data.load(base.network.upscale)?;
    let eval_set = splits.test.as_ref().unwrap_or(&splits.val);
    let on_shift = base.network.shift.max(1);

    let mut cells = Vec::new();
    for variant in [Variant::A, Variant::S] {
        for shift in [false, true] {
            for placement in [Placement::First, Placement::Last, Placement::All] {
                let mut cfg = base.network.clone();
                cfg.variant = variant;
                cfg.shift = if shift { on_shift } else { -1 };
                cfg.placement = placement;
                let net = Network::new(cfg)?;
                let mut trainer = Trainer::new(&net, base.train.clone(), net.init_params(base.train.seed))?;
                trainer.run(&splits.train, &splits.val, |_| Ok(()))?;
                let params = &trainer.best().params;
                let psnr = mean_psnr(&Upscaler::Model { net: &net, params }, eval_set)?;
                if !a.quiet {
                    eprintln!(
                        "{variant:?} shifter {} {}: {psnr:.3} dB",
                        if shift { "on" } else { "off" },
                        placement_label(placement)
                    );
                }
                cells.push(AblationCell {
                    variant,
                    shift,
                    placement,
                    psnr,
                });
            }
        }
    }
    let report = AblationReport {
        cells,
        bicubic_psnr: mean_psnr(&Upscaler::Bicubic { scale: base.network.upscale }, eval_set)?,
        eval_set: eval_set.name.clone(),
        iterations: base.train.iterations,
    };
    let out = a
        .out
        .clone()
        .or(run.out_dir)
        .unwrap_or_else(|| PathBuf::from("runs/ablation"));
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    write_atomic(&out.join("ablation.md"), report.markdown().as_bytes())?;
    Ok(report)
}
