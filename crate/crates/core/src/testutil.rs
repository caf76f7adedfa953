//! Independent reference implementations for unit tests.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::tensor::{Shape, Tensor};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Nested-loop circular convolution.
pub fn conv_ref(x: &Tensor<f64>, k: &Tensor<f64>, bias: Option<&Tensor<f64>>) -> Tensor<f64> {
    let [n, cin, h, w] = x.shape().0;
    let [cout, _, kh, kw] = k.shape().0;
    Tensor::from_fn(Shape::new(n, cout, h, w), |b, co, y, xx| {
        let mut acc = bias.map_or(0.0, |bs| bs.data()[co]);
        for ci in 0..cin {
            for ky in 0..kh {
                for kx in 0..kw {
                    let sy = (y as isize + ky as isize - (kh / 2) as isize).rem_euclid(h as isize) as usize;
                    let sx = (xx as isize + kx as isize - (kw / 2) as isize).rem_euclid(w as isize) as usize;
                    acc += k.at(co, ci, ky, kx) * x.at(b, ci, sy, sx);
                }
            }
        }
        acc
    })
}

/// Bilinear circular sampling of each channel at `(y - dy, x - dx)`.
pub fn translate_ref(x: &Tensor<f64>, shifts: &[(f64, f64)]) -> Tensor<f64> {
    let [_, _, h, w] = x.shape().0;
    Tensor::from_fn(x.shape(), |b, c, y, xx| {
        let (dy, dx) = shifts[c];
        let (py, px) = (y as f64 - dy, xx as f64 - dx);
        let (y0, x0) = (py.floor(), px.floor());
        let (fy, fx) = (py - y0, px - x0);
        let at = |yy: f64, xq: f64| {
            let yi = (yy as isize).rem_euclid(h as isize) as usize;
            let xi = (xq as isize).rem_euclid(w as isize) as usize;
            x.at(b, c, yi, xi)
        };
        (1.0 - fy) * (1.0 - fx) * at(y0, x0)
            + (1.0 - fy) * fx * at(y0, x0 + 1.0)
            + fy * (1.0 - fx) * at(y0 + 1.0, x0)
            + fy * fx * at(y0 + 1.0, x0 + 1.0)
    })
}

pub fn zip(a: &Tensor<f64>, b: &Tensor<f64>, f: impl Fn(f64, f64) -> f64) -> Tensor<f64> {
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::from_vec(a.shape(), data).unwrap()
}
