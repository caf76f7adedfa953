//! Raw forward and adjoint loops for the spatial operators.
//!
//! Work is split per output plane, and each plane is computed by a single
//! sequential loop, so results do not depend on the number of worker threads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Real, Shape, Tensor};

/// Boundary extension used by [`conv2d`](super::Tape::conv2d).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Padding {
    /// Periodic extension: indices wrap modulo the plane size.
    #[default]
    Circular,
    Zero,
}

fn wrap(i: isize, n: usize) -> usize {
    i.rem_euclid(n as isize) as usize
}

/// Extends every `(h, w)` plane by `(ph, pw)` on each side.
fn pad_planes<T: Real>(input: &Tensor<T>, ph: usize, pw: usize, padding: Padding) -> Vec<T> {
    let [_, _, h, w] = input.shape().0;
    let (hp, wp) = (h + 2 * ph, w + 2 * pw);
    let mut out = vec![T::zero(); input.shape().n() * input.shape().c() * hp * wp];
    out.par_chunks_mut(hp * wp)
        .zip(input.data().par_chunks(h * w))
        .for_each(|(dst, src)| {
            for yy in 0..hp {
                let sy = yy as isize - ph as isize;
                if padding == Padding::Zero && (sy < 0 || sy >= h as isize) {
                    continue;
                }
                let sy = wrap(sy, h);
                for xx in 0..wp {
                    let sx = xx as isize - pw as isize;
                    if padding == Padding::Zero && (sx < 0 || sx >= w as isize) {
                        continue;
                    }
                    dst[yy * wp + xx] = src[sy * w + wrap(sx, w)];
                }
            }
        });
    out
}

/// Same-size, stride-1 cross-correlation.
pub(crate) fn conv2d<T: Real>(
    input: &Tensor<T>,
    kernel: &Tensor<T>,
    bias: Option<&Tensor<T>>,
    padding: Padding,
) -> Tensor<T> {
    let [n, cin, h, w] = input.shape().0;
    let [cout, _, kh, kw] = kernel.shape().0;
    let (ph, pw) = (kh / 2, kw / 2);
    let (hp, wp) = (h + 2 * ph, w + 2 * pw);
    let padded = pad_planes(input, ph, pw, padding);
    let kdata = kernel.data();
    let mut out = Tensor::zeros(Shape::new(n, cout, h, w));
    out.data_mut()
        .par_chunks_mut(h * w)
        .enumerate()
        .for_each(|(plane, dst)| {
            let (b, co) = (plane / cout, plane % cout);
            if let Some(bias) = bias {
                dst.fill(bias.data()[co]);
            }
            for ci in 0..cin {
                let src = &padded[(b * cin + ci) * hp * wp..][..hp * wp];
                for ky in 0..kh {
                    for kx in 0..kw {
                        let wv = kdata[((co * cin + ci) * kh + ky) * kw + kx];
                        for y in 0..h {
                            let row = &src[(y + ky) * wp + kx..][..w];
                            let orow = &mut dst[y * w..][..w];
                            for (o, &v) in orow.iter_mut().zip(row) {
                                *o += wv * v;
                            }
                        }
                    }
                }
            }
        });
    out
}

/// Adjoint of [`conv2d`] with respect to its input.
pub(crate) fn conv2d_grad_input<T: Real>(
    grad_out: &Tensor<T>,
    kernel: &Tensor<T>,
    input_shape: Shape,
    padding: Padding,
) -> Tensor<T> {
    let [_, cin, h, w] = input_shape.0;
    let [cout, _, kh, kw] = kernel.shape().0;
    let (ph, pw) = (kh / 2, kw / 2);
    let (hp, wp) = (h + 2 * ph, w + 2 * pw);
    let kdata = kernel.data();
    let gdata = grad_out.data();
    let mut out = Tensor::zeros(input_shape);
    out.data_mut()
        .par_chunks_mut(h * w)
        .enumerate()
        .for_each(|(plane, dst)| {
            let (b, ci) = (plane / cin, plane % cin);
            let mut acc = vec![T::zero(); hp * wp];
            for co in 0..cout {
                let g = &gdata[(b * cout + co) * h * w..][..h * w];
                for ky in 0..kh {
                    for kx in 0..kw {
                        let wv = kdata[((co * cin + ci) * kh + ky) * kw + kx];
                        for y in 0..h {
                            let arow = &mut acc[(y + ky) * wp + kx..][..w];
                            for (a, &gv) in arow.iter_mut().zip(&g[y * w..][..w]) {
                                *a += wv * gv;
                            }
                        }
                    }
                }
            }
            for yy in 0..hp {
                let sy = yy as isize - ph as isize;
                if padding == Padding::Zero && (sy < 0 || sy >= h as isize) {
                    continue;
                }
                let sy = wrap(sy, h);
                for xx in 0..wp {
                    let sx = xx as isize - pw as isize;
                    if padding == Padding::Zero && (sx < 0 || sx >= w as isize) {
                        continue;
                    }
                    dst[sy * w + wrap(sx, w)] += acc[yy * wp + xx];
                }
            }
        });
    out
}

/// Adjoint of [`conv2d`] with respect to its kernel.
pub(crate) fn conv2d_grad_kernel<T: Real>(
    grad_out: &Tensor<T>,
    input: &Tensor<T>,
    kernel_shape: Shape,
    padding: Padding,
) -> Tensor<T> {
    let [n, cin, h, w] = input.shape().0;
    let [cout, _, kh, kw] = kernel_shape.0;
    let (ph, pw) = (kh / 2, kw / 2);
    let (hp, wp) = (h + 2 * ph, w + 2 * pw);
    let padded = pad_planes(input, ph, pw, padding);
    let gdata = grad_out.data();
    let mut out = Tensor::zeros(kernel_shape);
    out.data_mut()
        .par_chunks_mut(cin * kh * kw)
        .enumerate()
        .for_each(|(co, dst)| {
            for b in 0..n {
                let g = &gdata[(b * cout + co) * h * w..][..h * w];
                for ci in 0..cin {
                    let src = &padded[(b * cin + ci) * hp * wp..][..hp * wp];
                    for ky in 0..kh {
                        for kx in 0..kw {
                            let mut acc = T::zero();
                            for y in 0..h {
                                let row = &src[(y + ky) * wp + kx..][..w];
                                for (&gv, &v) in g[y * w..][..w].iter().zip(row) {
                                    acc += gv * v;
                                }
                            }
                            dst[(ci * kh + ky) * kw + kx] += acc;
                        }
                    }
                }
            }
        });
    out
}

/// Per-output-channel sum of `grad_out`, shaped `(1, C, 1, 1)`.
pub(crate) fn channel_sums<T: Real>(grad_out: &Tensor<T>) -> Tensor<T> {
    let [n, c, h, w] = grad_out.shape().0;
    let mut out = Tensor::zeros(Shape::new(1, c, 1, 1));
    for b in 0..n {
        for ch in 0..c {
            let plane = &grad_out.data()[(b * c + ch) * h * w..][..h * w];
            out.data_mut()[ch] += plane.iter().copied().sum::<T>();
        }
    }
    out
}

/// Depth-to-space: `(N, C*r*r, H, W) -> (N, C, rH, rW)`.
pub(crate) fn pixel_shuffle<T: Real>(input: &Tensor<T>, r: usize) -> Tensor<T> {
    let [n, crr, h, w] = input.shape().0;
    let c = crr / (r * r);
    Tensor::from_fn(Shape::new(n, c, h * r, w * r), |b, ch, y, x| {
        input.at(b, ch * r * r + (y % r) * r + (x % r), y / r, x / r)
    })
}

/// Space-to-depth, the exact inverse of [`pixel_shuffle`].
pub(crate) fn pixel_unshuffle<T: Real>(input: &Tensor<T>, r: usize) -> Tensor<T> {
    let [n, c, hr, wr] = input.shape().0;
    Tensor::from_fn(Shape::new(n, c * r * r, hr / r, wr / r), |b, ch, y, x| {
        let (base, sub) = (ch / (r * r), ch % (r * r));
        input.at(b, base, y * r + sub / r, x * r + sub % r)
    })
}

/// Integer offset and fractional weight for sampling at `-shift`.
fn split_shift<T: Real>(shift: T) -> (isize, T) {
    let t = -shift;
    let base = t.floor();
    (base.as_f64() as isize, t - base)
}

/// Bilinear circular translation; `shifts` is `(N, 2C, 1, 1)` holding
/// `(dy, dx)` per channel, and `out[y][x] = in[y - dy][x - dx]`.
pub(crate) fn translate<T: Real>(input: &Tensor<T>, shifts: &Tensor<T>) -> Tensor<T> {
    let [_, c, h, w] = input.shape().0;
    let sdata = shifts.data();
    let mut out = Tensor::zeros(input.shape());
    out.data_mut()
        .par_chunks_mut(h * w)
        .zip(input.data().par_chunks(h * w))
        .enumerate()
        .for_each(|(plane, (dst, src))| {
            let (b, ch) = (plane / c, plane % c);
            let (ky, fy) = split_shift(sdata[b * 2 * c + 2 * ch]);
            let (kx, fx) = split_shift(sdata[b * 2 * c + 2 * ch + 1]);
            let one = T::one();
            let weights = [
                (one - fy) * (one - fx),
                (one - fy) * fx,
                fy * (one - fx),
                fy * fx,
            ];
            for y in 0..h {
                let y0 = wrap(y as isize + ky, h);
                let y1 = wrap(y as isize + ky + 1, h);
                for x in 0..w {
                    let x0 = wrap(x as isize + kx, w);
                    let x1 = wrap(x as isize + kx + 1, w);
                    dst[y * w + x] = weights[0] * src[y0 * w + x0]
                        + weights[1] * src[y0 * w + x1]
                        + weights[2] * src[y1 * w + x0]
                        + weights[3] * src[y1 * w + x1];
                }
            }
        });
    out
}

/// Adjoints of [`translate`]: `(d input, d shifts)`.
pub(crate) fn translate_grads<T: Real>(
    grad_out: &Tensor<T>,
    input: &Tensor<T>,
    shifts: &Tensor<T>,
) -> (Tensor<T>, Tensor<T>) {
    let [_, c, h, w] = input.shape().0;
    let sdata = shifts.data();
    let mut gin = Tensor::zeros(input.shape());
    let mut gshift = Tensor::zeros(shifts.shape());
    let per_plane: Vec<(T, T)> = gin
        .data_mut()
        .par_chunks_mut(h * w)
        .zip(input.data().par_chunks(h * w))
        .zip(grad_out.data().par_chunks(h * w))
        .enumerate()
        .map(|(plane, ((dst, src), g))| {
            let (b, ch) = (plane / c, plane % c);
            let (ky, fy) = split_shift(sdata[b * 2 * c + 2 * ch]);
            let (kx, fx) = split_shift(sdata[b * 2 * c + 2 * ch + 1]);
            let one = T::one();
            let (mut d_ty, mut d_tx) = (T::zero(), T::zero());
            for y in 0..h {
                let y0 = wrap(y as isize + ky, h);
                let y1 = wrap(y as isize + ky + 1, h);
                for x in 0..w {
                    let x0 = wrap(x as isize + kx, w);
                    let x1 = wrap(x as isize + kx + 1, w);
                    let gv = g[y * w + x];
                    dst[y0 * w + x0] += (one - fy) * (one - fx) * gv;
                    dst[y0 * w + x1] += (one - fy) * fx * gv;
                    dst[y1 * w + x0] += fy * (one - fx) * gv;
                    dst[y1 * w + x1] += fy * fx * gv;
                    let (v00, v01) = (src[y0 * w + x0], src[y0 * w + x1]);
                    let (v10, v11) = (src[y1 * w + x0], src[y1 * w + x1]);
                    d_ty += gv * ((one - fx) * (v10 - v00) + fx * (v11 - v01));
                    d_tx += gv * ((one - fy) * (v01 - v00) + fy * (v11 - v10));
                }
            }
            // Sampling happens at -shift, hence the sign flip.
            (-d_ty, -d_tx)
        })
        .collect();
    for (plane, (dy, dx)) in per_plane.into_iter().enumerate() {
        let (b, ch) = (plane / c, plane % c);
        gshift.data_mut()[b * 2 * c + 2 * ch] = dy;
        gshift.data_mut()[b * 2 * c + 2 * ch + 1] = dx;
    }
    (gin, gshift)
}
