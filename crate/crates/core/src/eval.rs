//! Super-resolve a dataset and score it with RGB PSNR and luma SSIM.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::data::metrics::{psnr_rgb, ssim_y};
use crate::data::{Dataset, ImageU8};
use crate::error::{Error, Result};
use crate::network::Network;
use crate::params::Params;

/// Something that turns an LR image into an HR estimate.
#[derive(Clone, Copy, Debug)]
pub enum Upscaler<'a> {
    Model { net: &'a Network, params: &'a Params<f32> },
    Bicubic { scale: usize },
}

impl Upscaler<'_> {
    pub fn scale(&self) -> usize {
        match self {
            Upscaler::Model { net, .. } => net.config().upscale,
            Upscaler::Bicubic { scale } => *scale,
        }
    }

    pub fn upscale(&self, lr: &ImageU8) -> Result<ImageU8> {
        match self {
            Upscaler::Model { net, params } => {
                let sr = net.infer(params, &lr.to_tensor())?;
                ImageU8::from_tensor(&sr, 0)
            }
            Upscaler::Bicubic { scale } => lr.upscale(*scale),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalRecord {
    pub dataset: String,
    pub image: String,
    pub psnr: f64,
    pub ssim: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub records: Vec<EvalRecord>,
    pub mean_psnr: f64,
    pub mean_ssim: f64,
}

impl EvalReport {
    /// `dataset,image,psnr,ssim` rows followed by a `MEAN` row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("dataset,image,psnr,ssim\n");
        for r in &self.records {
            let _ = writeln!(out, "{},{},{:.6},{:.6}", r.dataset, r.image, r.psnr, r.ssim);
        }
        let dataset = self.records.first().map_or("", |r| r.dataset.as_str());
        let _ = writeln!(out, "{dataset},MEAN,{:.6},{:.6}", self.mean_psnr, self.mean_ssim);
        out
    }
}

/// Scores every image of `ds`, in file-name order.
pub fn evaluate(up: &Upscaler, ds: &Dataset) -> Result<EvalReport> {
    if ds.is_empty() {
        return Err(Error::Usage(format!("dataset {} is empty", ds.name)));
    }
    let scale = up.scale();
    let records = (0..ds.len())
        .into_par_iter()
        .map(|i| {
            let (hr, lr) = ds.pair(i, scale)?;
            let sr = up.upscale(&lr)?;
            Ok(EvalRecord {
                dataset: ds.name.clone(),
                image: ds.samples[i].name.clone(),
                psnr: psnr_rgb(&hr, &sr)?,
                ssim: ssim_y(&hr, &sr)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let n = records.len() as f64;
    let mean_psnr = records.iter().map(|r| r.psnr).sum::<f64>() / n;
    let mean_ssim = records.iter().map(|r| r.ssim).sum::<f64>() / n;
    Ok(EvalReport {
        records,
        mean_psnr,
        mean_ssim,
    })
}

/// Mean RGB PSNR only; cheaper than [`evaluate`] for validation inside training.
pub fn mean_psnr(up: &Upscaler, ds: &Dataset) -> Result<f64> {
    let scale = up.scale();
    let scores = (0..ds.len())
        .into_par_iter()
        .map(|i| {
            let (hr, lr) = ds.pair(i, scale)?;
            psnr_rgb(&hr, &up.upscale(&lr)?)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(scores.iter().sum::<f64>() / scores.len().max(1) as f64)
}
