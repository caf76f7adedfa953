//! Dense 4D tensors and a tape-based reverse-mode differentiation engine.
//!
//! Everything is laid out as `(batch, channels, height, width)` in row-major
//! order. The element type is generic so that the same layer code runs in
//! `f32` for training and in `f64` for gradient checks.

mod kernels;
mod tape;

pub mod gradcheck;

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, NumAssign};

use crate::error::{Error, Result};

pub use kernels::Padding;
pub use tape::{rational_parts, Tape, Var};

/// Scalar element type of a [`Tensor`].
pub trait Real:
    Float
    + FloatConst
    + NumAssign
    + std::iter::Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    fn erf(self) -> Self;
    fn lit(v: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Real for f32 {
    fn erf(self) -> Self {
        libm::erff(self)
    }
    fn lit(v: f64) -> Self {
        v as f32
    }
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    fn erf(self) -> Self {
        libm::erf(self)
    }
    fn lit(v: f64) -> Self {
        v
    }
    fn as_f64(self) -> f64 {
        self
    }
}

/// `(n, c, h, w)` extents of a tensor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Shape(pub [usize; 4]);

impl Shape {
    pub const SCALAR: Shape = Shape([1, 1, 1, 1]);

    pub fn new(n: usize, c: usize, h: usize, w: usize) -> Self {
        Shape([n, c, h, w])
    }

    pub fn n(&self) -> usize {
        self.0[0]
    }
    pub fn c(&self) -> usize {
        self.0[1]
    }
    pub fn h(&self) -> usize {
        self.0[2]
    }
    pub fn w(&self) -> usize {
        self.0[3]
    }

    pub fn numel(&self) -> usize {
        self.0.iter().product()
    }

    /// Size of one `(h, w)` plane.
    pub fn plane(&self) -> usize {
        self.h() * self.w()
    }

    /// Shape produced by broadcasting `self` against `other`: every axis
    /// must either agree or be 1 on one side.
    pub fn broadcast(&self, other: &Shape) -> Option<Shape> {
        let mut out = [0; 4];
        for (i, slot) in out.iter_mut().enumerate() {
            let (a, b) = (self.0[i], other.0[i]);
            *slot = match (a, b) {
                _ if a == b => a,
                (1, _) => b,
                (_, 1) => a,
                _ => return None,
            };
        }
        Some(Shape(out))
    }

    pub(crate) fn strides(&self) -> [usize; 4] {
        let [_, c, h, w] = self.0;
        [c * h * w, h * w, w, 1]
    }
}

impl Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let [n, c, h, w] = self.0;
        write!(f, "{n}x{c}x{h}x{w}")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T = f32> {
    shape: Shape,
    data: Vec<T>,
}

impl<T: Real> Tensor<T> {
    pub fn from_vec(shape: Shape, data: Vec<T>) -> Result<Self> {
        if data.len() != shape.numel() {
            return Err(Error::shape(
                "tensor",
                format!("{} values do not fill shape {shape}", data.len()),
            ));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: Shape) -> Self {
        Self::full(shape, T::zero())
    }

    pub fn full(shape: Shape, value: T) -> Self {
        Tensor {
            shape,
            data: vec![value; shape.numel()],
        }
    }

    pub fn scalar(value: T) -> Self {
        Self::full(Shape::SCALAR, value)
    }

    /// Builds a tensor by evaluating `f(n, c, y, x)` at every index.
    pub fn from_fn(shape: Shape, mut f: impl FnMut(usize, usize, usize, usize) -> T) -> Self {
        let [n, c, h, w] = shape.0;
        let mut data = Vec::with_capacity(shape.numel());
        for i in 0..n {
            for j in 0..c {
                for y in 0..h {
                    for x in 0..w {
                        data.push(f(i, j, y, x));
                    }
                }
            }
        }
        Tensor { shape, data }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn index(&self, n: usize, c: usize, y: usize, x: usize) -> usize {
        let s = self.shape.strides();
        n * s[0] + c * s[1] + y * s[2] + x
    }

    pub fn at(&self, n: usize, c: usize, y: usize, x: usize) -> T {
        self.data[self.index(n, c, y, x)]
    }

    /// The single value of a `1x1x1x1` tensor.
    pub fn item(&self) -> Result<T> {
        if self.shape != Shape::SCALAR {
            return Err(Error::Usage(format!(
                "item() needs a scalar tensor, got {}",
                self.shape
            )));
        }
        Ok(self.data[0])
    }

    pub fn reshape(mut self, shape: Shape) -> Result<Self> {
        if shape.numel() != self.shape.numel() {
            return Err(Error::shape(
                "reshape",
                format!("cannot view {} as {shape}", self.shape),
            ));
        }
        self.shape = shape;
        Ok(self)
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Tensor {
            shape: self.shape,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn cast<U: Real>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape,
            data: self.data.iter().map(|v| U::lit(v.as_f64())).collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn sum(&self) -> T {
        self.data.iter().copied().sum()
    }

    pub fn norm(&self) -> T {
        self.data.iter().map(|&v| v * v).sum::<T>().sqrt()
    }

    /// Largest absolute elementwise difference; `None` when shapes differ.
    pub fn max_abs_diff(&self, other: &Tensor<T>) -> Option<T> {
        if self.shape != other.shape {
            return None;
        }
        Some(
            self.data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| (a - b).abs())
                .fold(T::zero(), T::max),
        )
    }

    /// Circularly rolls every plane by `(dy, dx)`: `out[y][x] = in[y - dy][x - dx]`.
    pub fn roll(&self, dy: isize, dx: isize) -> Self {
        let (h, w) = (self.shape.h() as isize, self.shape.w() as isize);
        let mut out = Tensor::zeros(self.shape);
        for (src, dst) in self
            .data
            .chunks(self.shape.plane().max(1))
            .zip(out.data.chunks_mut(self.shape.plane().max(1)))
        {
            for y in 0..h {
                for x in 0..w {
                    let sy = (y - dy).rem_euclid(h);
                    let sx = (x - dx).rem_euclid(w);
                    dst[(y * w + x) as usize] = src[(sy * w + sx) as usize];
                }
            }
        }
        out
    }

    /// Concatenates tensors along the batch axis.
    pub fn stack(items: &[Tensor<T>]) -> Result<Self> {
        let first = items
            .first()
            .ok_or_else(|| Error::Usage("cannot stack zero tensors".into()))?;
        let [_, c, h, w] = first.shape.0;
        let mut data = Vec::with_capacity(first.len() * items.len());
        let mut n = 0;
        for t in items {
            let [tn, tc, th, tw] = t.shape.0;
            if (tc, th, tw) != (c, h, w) {
                return Err(Error::shape(
                    "stack",
                    format!("{} does not match {}", t.shape, first.shape),
                ));
            }
            n += tn;
            data.extend_from_slice(&t.data);
        }
        Ok(Tensor {
            shape: Shape::new(n, c, h, w),
            data,
        })
    }

    /// Extracts batch entry `i` as a tensor with `n = 1`.
    pub fn batch_item(&self, i: usize) -> Self {
        let [_, c, h, w] = self.shape.0;
        let len = c * h * w;
        Tensor {
            shape: Shape::new(1, c, h, w),
            data: self.data[i * len..(i + 1) * len].to_vec(),
        }
    }
}
