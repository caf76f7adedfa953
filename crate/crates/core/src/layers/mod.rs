//! The neuron-model zoo: Padé approximant neurons (vanilla, absolute-value
//! and smoothed denominators), the learnable Shifter, and the per-layer
//! Padé activation unit.

mod paon;
mod pau;
mod shifter;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use paon::{Paon, PaonParts, SINGULARITY_EPS};
pub use pau::{fit_gelu, Pau, RationalFit};
pub use shifter::Shifter;

use crate::error::{Error, Result};
use crate::tensor::{Real, Shape, Tensor};

/// How the denominator of a Padé neuron is kept away from zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Plain `P_M / Q_N`. Can divide by (near) zero; experiments only.
    Vanilla,
    /// Denominator `1 + sum |w_nl * x^l|`, always at least 1.
    A,
    /// `(Q_N P_M + Q_{N-1} P_{M-1}) / (Q_N^2 + Q_{N-1}^2)`.
    S,
}

/// Where the order-`(M-1)/(N-1)` polynomials of [`Variant::S`] get their
/// coefficients.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LowerOrder {
    /// Truncations of `P_M`, `Q_N`: the same kernels without the top term.
    #[default]
    Shared,
    /// Separate kernels for the lower-order pair.
    Independent,
}

/// Structure of one Padé neuron layer.
#[derive(Clone, Debug, PartialEq)]
pub struct PaonSpec {
    /// Numerator degree `M >= 1`.
    pub num_degree: usize,
    /// Denominator degree `N >= 0`; `N = 0` fixes the denominator to 1.
    pub den_degree: usize,
    pub variant: Variant,
    pub kernel: [usize; 2],
    pub in_ch: usize,
    pub out_ch: usize,
    /// Shifter bound: negative disables the shifter, 0 allows unbounded
    /// shifts, `b > 0` restricts shifts to `[-b, b]`.
    pub shift: i32,
    pub lower_order: LowerOrder,
    /// Opt-in for [`Variant::Vanilla`].
    pub allow_vanilla: bool,
}

impl PaonSpec {
    /// A 3x3 `[M/N]` smoothed Padé neuron with the shifter off.
    pub fn new(num_degree: usize, den_degree: usize, in_ch: usize, out_ch: usize) -> Self {
        PaonSpec {
            num_degree,
            den_degree,
            variant: Variant::S,
            kernel: [3, 3],
            in_ch,
            out_ch,
            shift: -1,
            lower_order: LowerOrder::Shared,
            allow_vanilla: false,
        }
    }

    /// An ordinary convolution expressed as a `[1/0]` Padé neuron.
    pub fn conv(in_ch: usize, out_ch: usize) -> Self {
        Self::new(1, 0, in_ch, out_ch).with_variant(Variant::A)
    }

    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        if variant == Variant::Vanilla {
            self.allow_vanilla = true;
        }
        self
    }

    pub fn with_shift(mut self, shift: i32) -> Self {
        self.shift = shift;
        self
    }

    pub fn with_kernel(mut self, kh: usize, kw: usize) -> Self {
        self.kernel = [kh, kw];
        self
    }

    pub fn with_lower_order(mut self, lower_order: LowerOrder) -> Self {
        self.lower_order = lower_order;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_degree < 1 {
            return Err(Error::Config("numerator degree M must be at least 1".into()));
        }
        if self.kernel.iter().any(|k| k % 2 == 0) {
            return Err(Error::Config(format!(
                "kernel {:?} must have odd sides",
                self.kernel
            )));
        }
        if self.in_ch == 0 || self.out_ch == 0 {
            return Err(Error::Config("channel counts must be positive".into()));
        }
        if self.variant == Variant::S && self.num_degree.abs_diff(self.den_degree) > 1 {
            return Err(Error::Config(format!(
                "smoothed variant needs |M - N| <= 1, got [{}/{}]",
                self.num_degree, self.den_degree
            )));
        }
        if self.variant == Variant::Vanilla && !self.allow_vanilla {
            return Err(Error::Config(
                "vanilla Padé neurons can divide by zero; set allow_vanilla to use them".into(),
            ));
        }
        Ok(())
    }

    pub(crate) fn kernel_shape(&self, in_ch: usize) -> Shape {
        Shape::new(self.out_ch, in_ch, self.kernel[0], self.kernel[1])
    }

    fn kernel_len(&self) -> usize {
        self.out_ch * self.in_ch * self.kernel[0] * self.kernel[1]
    }

    /// Closed-form number of scalar parameters.
    pub fn param_count(&self) -> usize {
        let k = self.kernel_len();
        let mut total = self.num_degree * k + self.out_ch + self.den_degree * k;
        if self.variant == Variant::S && self.lower_order == LowerOrder::Independent {
            total += (self.num_degree - 1) * k + self.out_ch + self.den_degree.saturating_sub(1) * k;
        }
        if self.shift >= 0 {
            total += 2 * self.in_ch * self.in_ch + 2 * self.in_ch;
        }
        total
    }
}

/// Uniform `[-bound, bound)` tensor.
pub(crate) fn uniform<T: Real, R: Rng + ?Sized>(rng: &mut R, shape: Shape, bound: f64) -> Tensor<T> {
    Tensor::from_fn(shape, |_, _, _, _| {
        if bound == 0.0 {
            T::zero()
        } else {
            T::lit(rng.random_range(-bound..bound))
        }
    })
}
