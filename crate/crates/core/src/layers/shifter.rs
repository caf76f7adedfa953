use crate::error::{Error, Result};
use crate::params::{Bindings, Params};
use crate::tensor::{Padding, Real, Shape, Tape, Tensor, Var};

/// Learns one `(dy, dx)` translation per input channel from the input
/// itself: global average, 1x1 convolution, bounding activation, then a
/// bilinear circular resample.
#[derive(Clone, Debug, PartialEq)]
pub struct Shifter {
    name: String,
    channels: usize,
    bound: i32,
}

impl Shifter {
    /// `bound = 0` leaves shifts unbounded; `bound > 0` squashes them into
    /// `[-bound, bound]` with a scaled tanh.
    pub fn new(name: impl Into<String>, channels: usize, bound: i32) -> Result<Self> {
        if bound < 0 {
            return Err(Error::Config("a shifter needs a bound >= 0".into()));
        }
        Ok(Shifter {
            name: name.into(),
            channels,
            bound,
        })
    }

    pub fn weight_name(&self) -> String {
        format!("{}.weight", self.name)
    }

    pub fn bias_name(&self) -> String {
        format!("{}.bias", self.name)
    }

    pub fn bound(&self) -> i32 {
        self.bound
    }

    /// Zero weight and bias, so the module starts as the identity.
    pub fn init<T: Real>(&self, params: &mut Params<T>) {
        let c = self.channels;
        params.insert(self.weight_name(), Tensor::zeros(Shape::new(2 * c, c, 1, 1)));
        params.insert(self.bias_name(), Tensor::zeros(Shape::new(1, 2 * c, 1, 1)));
    }

    /// Per-sample shifts `(N, 2C, 1, 1)` for input `x`.
    pub fn shifts<T: Real>(&self, tape: &mut Tape<T>, vars: &Bindings, x: Var) -> Result<Var> {
        let w = vars.get(&self.weight_name())?;
        let b = vars.get(&self.bias_name())?;
        let pooled = tape.global_avg_pool(x);
        let raw = tape.conv2d(pooled, w, Some(b), Padding::Circular)?;
        Ok(if self.bound > 0 {
            let squashed = tape.tanh(raw);
            tape.scale(squashed, T::lit(self.bound as f64))
        } else {
            raw
        })
    }

    pub fn forward<T: Real>(&self, tape: &mut Tape<T>, vars: &Bindings, x: Var) -> Result<Var> {
        let s = self.shifts(tape, vars, x)?;
        tape.translate(x, s)
    }

    /// Shifts the module would apply to `x`, evaluated without gradients.
    pub fn evaluate_shifts(&self, params: &Params<f32>, x: &Tensor<f32>) -> Result<Tensor<f32>> {
        let mut tape = Tape::new();
        let vars = params.bind(&mut tape, false);
        let xv = tape.constant(x.clone());
        let s = self.shifts(&mut tape, &vars, xv)?;
        Ok(tape.value(s).clone())
    }
}
