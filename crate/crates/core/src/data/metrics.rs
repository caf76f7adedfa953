//! RGB PSNR and luma SSIM on 8-bit images.

use super::ImageU8;
use crate::error::{Error, Result};

const WINDOW: usize = 11;
const SIGMA: f64 = 1.5;
const K1: f64 = 0.01;
const K2: f64 = 0.03;
const L: f64 = 255.0;

fn same_size(a: &ImageU8, b: &ImageU8) -> Result<()> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(Error::Usage(format!(
            "image sizes differ: {}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    Ok(())
}

/// `10 log10(255^2 / MSE)` over all RGB samples; identical images give
/// `f64::INFINITY`.
pub fn psnr_rgb(a: &ImageU8, b: &ImageU8) -> Result<f64> {
    same_size(a, b)?;
    let sse: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum();
    if sse == 0.0 {
        return Ok(f64::INFINITY);
    }
    let mse = sse / a.data().len() as f64;
    Ok(10.0 * (L * L / mse).log10())
}

/// Full-range BT.601 luma.
pub fn luma(img: &ImageU8) -> Vec<f64> {
    img.data()
        .chunks_exact(3)
        .map(|p| 0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64)
        .collect()
}

fn gaussian_window() -> [f64; WINDOW] {
    let mut g = [0.0; WINDOW];
    let r = (WINDOW / 2) as f64;
    for (i, v) in g.iter_mut().enumerate() {
        let d = i as f64 - r;
        *v = (-d * d / (2.0 * SIGMA * SIGMA)).exp();
    }
    let s: f64 = g.iter().sum();
    g.map(|v| v / s)
}

/// Separable valid-mode filtering of a `w x h` plane.
fn filter_valid(src: &[f64], w: usize, h: usize, g: &[f64; WINDOW]) -> Vec<f64> {
    let (ow, oh) = (w + 1 - WINDOW, h + 1 - WINDOW);
    let mut mid = vec![0.0; h * ow];
    for y in 0..h {
        for x in 0..ow {
            mid[y * ow + x] = (0..WINDOW).map(|k| g[k] * src[y * w + x + k]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..WINDOW).map(|k| g[k] * mid[(y + k) * ow + x]).sum();
        }
    }
    out
}

/// SSIM of the luma channels with an 11x11 Gaussian window (sigma 1.5),
/// averaged over window positions fully inside the image.
pub fn ssim_y(a: &ImageU8, b: &ImageU8) -> Result<f64> {
    same_size(a, b)?;
    let (w, h) = (a.width(), a.height());
    if w < WINDOW || h < WINDOW {
        return Err(Error::Usage(format!("SSIM needs at least {WINDOW}x{WINDOW} pixels, got {w}x{h}")));
    }
    if a == b {
        return Ok(1.0);
    }
    let (ya, yb) = (luma(a), luma(b));
    let g = gaussian_window();
    let prod = |p: &[f64], q: &[f64]| p.iter().zip(q).map(|(x, y)| x * y).collect::<Vec<_>>();
    let mu_a = filter_valid(&ya, w, h, &g);
    let mu_b = filter_valid(&yb, w, h, &g);
    let aa = filter_valid(&prod(&ya, &ya), w, h, &g);
    let bb = filter_valid(&prod(&yb, &yb), w, h, &g);
    let ab = filter_valid(&prod(&ya, &yb), w, h, &g);
    let (c1, c2) = ((K1 * L).powi(2), (K2 * L).powi(2));
    let total: f64 = (0..mu_a.len())
        .map(|i| {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let va = aa[i] - ma * ma;
            let vb = bb[i] - mb * mb;
            let cov = ab[i] - ma * mb;
            ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2))
        })
        .sum();
    Ok(total / mu_a.len() as f64)
}
