//! Training protocol: robust loss, Adan with cosine annealing, patch
//! sampling with augmentation and noise, and best-by-validation selection.

mod augment;
mod optim;

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use augment::{add_noise_snr, Augment, AugmentFlags};
pub use optim::{Adam, Adan, OptimState, Optimizer, OptimizerKind};

use crate::data::{resize_planes, Dataset};
use crate::error::{Error, Result};
use crate::eval::{mean_psnr, Upscaler};
use crate::network::Network;
use crate::params::Params;
use crate::tensor::{Shape, Tape, Tensor};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    /// HR patch side.
    pub patch: usize,
    pub batch: usize,
    pub iterations: u64,
    pub lr_init: f64,
    pub lr_final: f64,
    pub loss_alpha: f64,
    pub loss_scale: f64,
    /// SNR of the Gaussian noise added to LR patches; absent disables it.
    pub noise_snr_db: Option<f64>,
    pub optimizer: OptimizerKind,
    pub augment: AugmentFlags,
    /// Validation PSNR is measured every this many iterations and after the last.
    pub val_interval: u64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            patch: 64,
            batch: 25,
            iterations: 500_000,
            lr_init: 1e-3,
            lr_final: 1e-6,
            loss_alpha: 1.5,
            loss_scale: 2.0,
            noise_snr_db: Some(40.0),
            optimizer: OptimizerKind::Adan,
            augment: AugmentFlags::default(),
            val_interval: 1000,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Desk-scale schedule: 500 iterations on 16x16 patches.
    pub fn toy() -> Self {
        TrainConfig {
            patch: 16,
            iterations: 500,
            val_interval: 100,
            ..TrainConfig::default()
        }
    }

    pub fn validate(&self, upscale: usize) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.patch == 0 || self.patch % upscale != 0 {
            return bad(format!("patch {} must be a positive multiple of the upscale {upscale}", self.patch));
        }
        if self.batch == 0 || self.iterations == 0 || self.val_interval == 0 {
            return bad("batch, iterations and val_interval must be positive".into());
        }
        if !(self.lr_final >= 0.0 && self.lr_final < self.lr_init && self.lr_init.is_finite()) {
            return bad(format!(
                "learning rates need 0 <= lr_final < lr_init, got {} and {}",
                self.lr_final, self.lr_init
            ));
        }
        if !(self.loss_alpha.is_finite() && self.loss_scale > 0.0 && self.loss_scale.is_finite()) {
            return bad("loss_alpha must be finite and loss_scale positive".into());
        }
        if let Some(snr) = self.noise_snr_db {
            if snr.is_nan() {
                return bad("noise_snr_db must be a number".into());
            }
        }
        Ok(())
    }
}

/// Cosine annealing from `lr_init` at step 0 to `lr_final` at `total`.
pub fn cosine_lr(step: u64, total: u64, lr_init: f64, lr_final: f64) -> f64 {
    if total == 0 || step >= total {
        return if step == 0 { lr_init } else { lr_final };
    }
    let t = step as f64 / total as f64;
    lr_final + 0.5 * (lr_init - lr_final) * (1.0 + (PI * t).cos())
}

/// Mean robust loss `rho(pred - target, alpha, scale)` over all elements.
pub fn barron_loss(pred: &Tensor<f32>, target: &Tensor<f32>, alpha: f64, scale: f64) -> Result<f64> {
    if pred.shape() != target.shape() {
        return Err(Error::Usage(format!(
            "loss operands differ in shape: {} vs {}",
            pred.shape(),
            target.shape()
        )));
    }
    let mut tape = Tape::<f64>::new();
    let p = tape.constant(pred.cast());
    let t = tape.constant(target.cast());
    let l = tape.robust_loss(p, t, alpha, scale)?;
    tape.value(l).item()
}

/// Loss of the network on one batch and the gradient of every parameter.
pub fn loss_and_grads(
    net: &Network,
    params: &Params<f32>,
    lr: &Tensor<f32>,
    hr: &Tensor<f32>,
    alpha: f64,
    scale: f64,
) -> Result<(f64, Params<f32>)> {
    let mut tape = Tape::new();
    tape.set_check_finite(false);
    let vars = params.bind(&mut tape, true);
    let x = tape.constant(lr.clone());
    let y = tape.constant(hr.clone());
    let pred = net.forward(&mut tape, &vars, x)?;
    let loss = tape.robust_loss(pred, y, alpha as f32, scale as f32)?;
    let value = tape.value(loss).item()? as f64;
    if !value.is_finite() {
        let layer = tape
            .first_non_finite()
            .map(|(_, scope)| scope.unwrap_or("network").to_string())
            .unwrap_or_else(|| "network".into());
        return Err(Error::Numeric {
            detail: format!("loss became {value}; {layer} is the first layer with non-finite values"),
            layer,
        });
    }
    tape.backward(loss)?;
    Ok((value, params.grads(&tape, &vars)?))
}

/// Parameters, optimizer state and progress at one point of a run.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub params: Params<f32>,
    pub optim: OptimState,
    pub iteration: u64,
    /// Best validation PSNR seen up to this point (`-inf` before any).
    pub best_val_psnr: f64,
}

/// One line of the metrics log.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricRow {
    pub iter: u64,
    pub loss: f64,
    pub lr: f64,
    pub val_psnr: Option<f64>,
}

impl MetricRow {
    pub const CSV_HEADER: &'static str = "iter,loss,lr,val_psnr";

    pub fn csv_line(&self) -> String {
        let val = self.val_psnr.map(|v| format!("{v:.6}")).unwrap_or_default();
        format!("{},{:.9},{:.9e},{val}", self.iter, self.loss, self.lr)
    }
}

/// A training batch: LR inputs and HR targets in `[-1, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub lr: Tensor<f32>,
    pub hr: Tensor<f32>,
}

/// Draws the batch of iteration `iter`. The generator is derived from
/// `(seed, iter)` alone, so the draw does not depend on earlier iterations.
pub fn sample_batch(ds: &Dataset, cfg: &TrainConfig, upscale: usize, iter: u64) -> Result<Batch> {
    if ds.is_empty() {
        return Err(Error::Usage(format!("training set {} is empty", ds.name)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(iter);
    let p = cfg.patch;
    let mut items = Vec::with_capacity(cfg.batch);
    for _ in 0..cfg.batch {
        let img = &ds.samples[rng.random_range(0..ds.len())].hr;
        if img.width() < p || img.height() < p {
            return Err(Error::Usage(format!(
                "image {}x{} is smaller than the {p}x{p} patch",
                img.width(),
                img.height()
            )));
        }
        let x0 = rng.random_range(0..=img.width() - p);
        let y0 = rng.random_range(0..=img.height() - p);
        let patch = img.crop(x0, y0, p, p)?.to_tensor();
        let aug = Augment::sample(&mut rng, cfg.augment);
        items.push(aug.apply(&patch));
    }
    let hr = Tensor::stack(&items)?;
    let mut lr = resize_planes(&hr, p / upscale, p / upscale)?;
    if let Some(snr) = cfg.noise_snr_db {
        add_noise_snr(&mut lr, snr, &mut rng);
    }
    debug_assert_eq!(lr.shape(), Shape::new(cfg.batch, 3, p / upscale, p / upscale));
    Ok(Batch { lr, hr })
}

/// Drives the iteration loop of one run.
pub struct Trainer<'a> {
    net: &'a Network,
    cfg: TrainConfig,
    optimizer: Optimizer,
    current: Snapshot,
    best: Option<Snapshot>,
}

impl<'a> Trainer<'a> {
    pub fn new(net: &'a Network, cfg: TrainConfig, params: Params<f32>) -> Result<Self> {
        Self::resume(
            net,
            cfg,
            Snapshot {
                params,
                optim: OptimState::default(),
                iteration: 0,
                best_val_psnr: f64::NEG_INFINITY,
            },
            None,
        )
    }

    /// Continues from `last`; `best` is the best snapshot saved so far.
    pub fn resume(net: &'a Network, cfg: TrainConfig, last: Snapshot, best: Option<Snapshot>) -> Result<Self> {
        cfg.validate(net.config().upscale)?;
        if last.params.count() != net.param_count() {
            return Err(Error::Config(format!(
                "parameter table holds {} values, the network needs {}",
                last.params.count(),
                net.param_count()
            )));
        }
        let optimizer = Optimizer::new(cfg.optimizer);
        optimizer.check_state(&last.params, &last.optim)?;
        Ok(Trainer {
            net,
            cfg,
            optimizer,
            current: last,
            best,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn is_finished(&self) -> bool {
        self.current.iteration >= self.cfg.iterations
    }

    pub fn last(&self) -> &Snapshot {
        &self.current
    }

    /// The best snapshot by validation PSNR, or the current one if none was
    /// validated yet.
    pub fn best(&self) -> &Snapshot {
        self.best.as_ref().unwrap_or(&self.current)
    }

    pub fn lr_at(&self, iter: u64) -> f64 {
        cosine_lr(iter - 1, self.cfg.iterations - 1, self.cfg.lr_init, self.cfg.lr_final)
    }

    /// Runs one iteration: sample, forward, loss, backward, update and,
    /// when due, validation.
    pub fn step(&mut self, train: &Dataset, val: &Dataset) -> Result<MetricRow> {
        let iter = self.current.iteration + 1;
        let batch = sample_batch(train, &self.cfg, self.net.config().upscale, iter)?;
        let (loss, grads) = loss_and_grads(
            self.net,
            &self.current.params,
            &batch.lr,
            &batch.hr,
            self.cfg.loss_alpha,
            self.cfg.loss_scale,
        )?;
        let lr = self.lr_at(iter);
        self.optimizer
            .step(&mut self.current.params, &grads, lr, &mut self.current.optim)?;
        self.current.iteration = iter;

        let mut val_psnr = None;
        if iter % self.cfg.val_interval == 0 || iter == self.cfg.iterations {
            let up = Upscaler::Model {
                net: self.net,
                params: &self.current.params,
            };
            let psnr = mean_psnr(&up, val)?;
            val_psnr = Some(psnr);
            if psnr > self.current.best_val_psnr {
                self.current.best_val_psnr = psnr;
                self.best = Some(self.current.clone());
            }
        }
        Ok(MetricRow { iter, loss, lr, val_psnr })
    }

    /// Steps until the configured iteration count, reporting each row.
    pub fn run(&mut self, train: &Dataset, val: &Dataset, mut on_row: impl FnMut(&MetricRow) -> Result<()>) -> Result<()> {
        while !self.is_finished() {
            let row = self.step(train, val)?;
            on_row(&row)?;
        }
        Ok(())
    }
}
