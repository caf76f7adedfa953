use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::tensor::{Shape, Tensor};

const A: f64 = -0.5;

/// Catmull-Rom cubic kernel (`a = -0.5`).
fn cubic(x: f64) -> f64 {
    let x = x.abs();
    if x <= 1.0 {
        ((A + 2.0) * x - (A + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((A * x - 5.0 * A) * x + 8.0 * A) * x - 4.0 * A
    } else {
        0.0
    }
}

/// Half-sample symmetric reflection into `0..n`.
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let m = i.rem_euclid(period);
    (if m < n { m } else { period - 1 - m }) as usize
}

/// Per-output-sample source indices and normalized weights along one axis.
fn taps(src: usize, dst: usize) -> Vec<Vec<(usize, f64)>> {
    let scale = dst as f64 / src as f64;
    // Downscaling widens the kernel so it also low-pass filters.
    let stretch = if scale < 1.0 { 1.0 / scale } else { 1.0 };
    let support = 2.0 * stretch;
    (0..dst)
        .map(|i| {
            let center = (i as f64 + 0.5) / scale - 0.5;
            let lo = (center - support).floor() as isize;
            let hi = (center + support).ceil() as isize;
            let mut taps: Vec<(usize, f64)> = (lo..=hi)
                .map(|j| (reflect(j, src), cubic((j as f64 - center) / stretch)))
                .filter(|&(_, w)| w != 0.0)
                .collect();
            let total: f64 = taps.iter().map(|t| t.1).sum();
            for t in &mut taps {
                t.1 /= total;
            }
            taps
        })
        .collect()
}

/// Bicubic resize of every plane of `t` to `out_h x out_w`, with
/// half-pixel-centre alignment and symmetric boundary reflection.
pub fn resize_planes(t: &Tensor<f32>, out_h: usize, out_w: usize) -> Result<Tensor<f32>> {
    let [n, c, h, w] = t.shape().0;
    if out_h == 0 || out_w == 0 {
        return Err(Error::Usage(format!("cannot resize {h}x{w} to {out_h}x{out_w}")));
    }
    if (out_h, out_w) == (h, w) {
        return Ok(t.clone());
    }
    let rows = taps(h, out_h);
    let cols = taps(w, out_w);
    let mut out = vec![0f32; n * c * out_h * out_w];
    out.par_chunks_mut(out_h * out_w)
        .zip(t.data().par_chunks(h * w))
        .for_each(|(dst, src)| {
            // Horizontal pass, then vertical.
            let mut mid = vec![0f64; h * out_w];
            for y in 0..h {
                for (x, tap) in cols.iter().enumerate() {
                    mid[y * out_w + x] = tap.iter().map(|&(j, wt)| wt * src[y * w + j] as f64).sum();
                }
            }
            for (y, tap) in rows.iter().enumerate() {
                for x in 0..out_w {
                    dst[y * out_w + x] = tap.iter().map(|&(j, wt)| wt * mid[j * out_w + x]).sum::<f64>() as f32;
                }
            }
        });
    Tensor::from_vec(Shape::new(n, c, out_h, out_w), out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_interpolates() {
        assert_eq!(cubic(0.0), 1.0);
        assert_eq!(cubic(1.0), 0.0);
        assert_eq!(cubic(2.0), 0.0);
        for i in 0..10 {
            let t = i as f64 / 10.0;
            let s: f64 = (-2..=2).map(|k| cubic(t - k as f64)).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn reflection_is_half_sample_symmetric() {
        let got: Vec<usize> = (-3..7).map(|i| reflect(i, 4)).collect();
        assert_eq!(got, vec![2, 1, 0, 0, 1, 2, 3, 3, 2, 1]);
    }
}
