use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{uniform, LowerOrder, PaonSpec, Shifter, Variant};
use crate::error::{Error, Result};
use crate::params::{Bindings, Params};
use crate::tensor::{Padding, Real, Shape, Tape, Tensor, Var};

/// Smallest denominator magnitude a vanilla Padé neuron accepts.
pub const SINGULARITY_EPS: f64 = 1e-6;

/// A convolutional Padé approximant neuron layer.
///
/// With shifted input `x`, the numerator is `P_M = w_0 + sum_k w_mk * x^k`
/// and the denominator terms are `w_nl * x^l`, combined according to the
/// layer's [`Variant`].
#[derive(Clone, Debug, PartialEq)]
pub struct Paon {
    name: String,
    spec: PaonSpec,
    shifter: Option<Shifter>,
}

impl Paon {
    pub fn new(name: impl Into<String>, spec: PaonSpec) -> Result<Self> {
        spec.validate()?;
        let name = name.into();
        let shifter = if spec.shift >= 0 {
            Some(Shifter::new(format!("{name}.shift"), spec.in_ch, spec.shift)?)
        } else {
            None
        };
        Ok(Paon {
            name,
            spec,
            shifter,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn spec(&self) -> &PaonSpec {
        &self.spec
    }

    pub fn shifter(&self) -> Option<&Shifter> {
        self.shifter.as_ref()
    }

    pub fn num_kernel_name(&self, k: usize) -> String {
        format!("{}.num.w{k}", self.name)
    }

    pub fn bias_name(&self) -> String {
        format!("{}.num.bias", self.name)
    }

    pub fn den_kernel_name(&self, l: usize) -> String {
        format!("{}.den.w{l}", self.name)
    }

    fn lower_num_name(&self, k: usize) -> String {
        format!("{}.low.num.w{k}", self.name)
    }

    fn lower_bias_name(&self) -> String {
        format!("{}.low.num.bias", self.name)
    }

    fn lower_den_name(&self, l: usize) -> String {
        format!("{}.low.den.w{l}", self.name)
    }

    fn independent_lower(&self) -> bool {
        self.spec.variant == Variant::S && self.spec.lower_order == LowerOrder::Independent
    }

    /// Adds this layer's parameters to `params`.
    ///
    /// The order-1 numerator kernel is uniform in `+-1/sqrt(fan_in)`, each
    /// further order is damped by another factor of 0.1, the bias and all
    /// denominator kernels start at zero, and the shifter starts at zero.
    pub fn init<T: Real, R: Rng + ?Sized>(&self, params: &mut Params<T>, rng: &mut R) {
        let s = &self.spec;
        let shape = s.kernel_shape(s.in_ch);
        let gain = 1.0 / ((s.in_ch * s.kernel[0] * s.kernel[1]) as f64).sqrt();
        let bias_shape = Shape::new(1, s.out_ch, 1, 1);
        for k in 1..=s.num_degree {
            let bound = gain * 0.1f64.powi(k as i32 - 1);
            params.insert(self.num_kernel_name(k), uniform(rng, shape, bound));
        }
        params.insert(self.bias_name(), Tensor::zeros(bias_shape));
        for l in 1..=s.den_degree {
            params.insert(self.den_kernel_name(l), Tensor::zeros(shape));
        }
        if self.independent_lower() {
            for k in 1..s.num_degree {
                let bound = gain * 0.1f64.powi(k as i32 - 1);
                params.insert(self.lower_num_name(k), uniform(rng, shape, bound));
            }
            params.insert(self.lower_bias_name(), Tensor::zeros(bias_shape));
            for l in 1..s.den_degree {
                params.insert(self.lower_den_name(l), Tensor::zeros(shape));
            }
        }
        if let Some(shifter) = &self.shifter {
            shifter.init(params);
        }
    }

    /// Fresh parameters drawn from a generator seeded with `seed`.
    pub fn init_params(&self, seed: u64) -> Params<f32> {
        let mut params = Params::new();
        self.init(&mut params, &mut ChaCha8Rng::seed_from_u64(seed));
        params
    }

    pub fn param_count(&self) -> usize {
        self.spec.param_count()
    }

    pub fn forward<T: Real>(&self, tape: &mut Tape<T>, vars: &Bindings, x: Var) -> Result<Var> {
        Ok(self.forward_parts(tape, vars, x)?.output)
    }

    /// Forward pass that also exposes the divisor actually applied.
    pub fn forward_parts<T: Real>(&self, tape: &mut Tape<T>, vars: &Bindings, x: Var) -> Result<PaonParts> {
        let name = self.name.clone();
        tape.with_scope(&name, |tape| self.forward_inner(tape, vars, x))
    }

    fn forward_inner<T: Real>(&self, tape: &mut Tape<T>, vars: &Bindings, x: Var) -> Result<PaonParts> {
        let s = &self.spec;
        let in_ch = tape.shape(x).c();
        if in_ch != s.in_ch {
            return Err(Error::shape(
                "paon",
                format!("{} expects {} input channels, got {in_ch}", self.name, s.in_ch),
            ));
        }
        let x = match &self.shifter {
            Some(shifter) => shifter.forward(tape, vars, x)?,
            None => x,
        };
        let top = s.num_degree.max(s.den_degree);
        let mut powers = vec![x];
        for k in 2..=top {
            powers.push(tape.pow(x, k as u32)?);
        }

        let bias = vars.get(&self.bias_name())?;
        let num_names: Vec<String> = (1..=s.num_degree).map(|k| self.num_kernel_name(k)).collect();
        // Partial sums: p_lower = P_{M-1}, p_full = P_M.
        let (p_lower, p_full) = numerator(tape, vars, &powers, &num_names, bias)?;

        let den_terms = (1..=s.den_degree)
            .map(|l| {
                let w = vars.get(&self.den_kernel_name(l))?;
                tape.conv2d(powers[l - 1], w, None, Padding::Circular)
            })
            .collect::<Result<Vec<_>>>()?;

        match s.variant {
            Variant::Vanilla => {
                let Some(sum) = sum_all(tape, &den_terms)? else {
                    return Ok(PaonParts::plain(p_full));
                };
                let q = tape.add_scalar(sum, T::one());
                self.check_singular(tape.value(q))?;
                PaonParts::ratio(tape, p_full, q)
            }
            Variant::A => {
                if den_terms.is_empty() {
                    return Ok(PaonParts::plain(p_full));
                }
                let abs: Vec<Var> = den_terms.iter().map(|&t| tape.abs(t)).collect();
                let sum = sum_all(tape, &abs)?.expect("non-empty");
                let d = tape.add_scalar(sum, T::one());
                PaonParts::ratio(tape, p_full, d)
            }
            Variant::S => {
                if s.den_degree == 0 {
                    // Q_{-1} vanishes, leaving P_M / Q_0 = P_M.
                    return Ok(PaonParts::plain(p_full));
                }
                let q_full = match sum_all(tape, &den_terms)? {
                    Some(v) => tape.add_scalar(v, T::one()),
                    None => unreachable!("den_degree >= 1"),
                };
                let (p_low, q_low) = if self.independent_lower() {
                    self.independent_lower_pair(tape, vars, &powers)?
                } else {
                    let q_low = match sum_all(tape, &den_terms[..s.den_degree - 1])? {
                        Some(v) => tape.add_scalar(v, T::one()),
                        None => tape.constant(Tensor::scalar(T::one())),
                    };
                    (p_lower, q_low)
                };
                let a = tape.mul(q_full, p_full)?;
                let b = tape.mul(q_low, p_low)?;
                let top = tape.add(a, b)?;
                let qq = tape.mul(q_full, q_full)?;
                let ll = tape.mul(q_low, q_low)?;
                let bottom = tape.add(qq, ll)?;
                PaonParts::ratio(tape, top, bottom)
            }
        }
    }

    fn independent_lower_pair<T: Real>(
        &self,
        tape: &mut Tape<T>,
        vars: &Bindings,
        powers: &[Var],
    ) -> Result<(Var, Var)> {
        let s = &self.spec;
        let bias = vars.get(&self.lower_bias_name())?;
        let names: Vec<String> = (1..s.num_degree).map(|k| self.lower_num_name(k)).collect();
        let p_low = if names.is_empty() {
            bias
        } else {
            numerator(tape, vars, powers, &names, bias)?.1
        };
        let terms = (1..s.den_degree)
            .map(|l| {
                let w = vars.get(&self.lower_den_name(l))?;
                tape.conv2d(powers[l - 1], w, None, Padding::Circular)
            })
            .collect::<Result<Vec<_>>>()?;
        let q_low = match sum_all(tape, &terms)? {
            Some(v) => tape.add_scalar(v, T::one()),
            None => tape.constant(Tensor::scalar(T::one())),
        };
        Ok((p_low, q_low))
    }

    fn check_singular<T: Real>(&self, q: &Tensor<T>) -> Result<()> {
        let eps = T::lit(SINGULARITY_EPS);
        if let Some(pos) = q.data().iter().position(|v| !(v.abs() >= eps)) {
            let [_, c, h, w] = q.shape().0;
            let (n, rem) = (pos / (c * h * w), pos % (c * h * w));
            let (ch, rem) = (rem / (h * w), rem % (h * w));
            return Err(Error::Numeric {
                layer: self.name.clone(),
                detail: format!(
                    "denominator {} below {SINGULARITY_EPS} at (n={n}, c={ch}, y={}, x={})",
                    q.data()[pos],
                    rem / w,
                    rem % w
                ),
            });
        }
        Ok(())
    }
}

/// Output of a Padé neuron together with its divisor (`None` when the
/// denominator is identically 1).
#[derive(Clone, Copy, Debug)]
pub struct PaonParts {
    pub output: Var,
    pub denominator: Option<Var>,
}

impl PaonParts {
    fn plain(output: Var) -> Self {
        PaonParts {
            output,
            denominator: None,
        }
    }

    fn ratio<T: Real>(tape: &mut Tape<T>, top: Var, bottom: Var) -> Result<Self> {
        Ok(PaonParts {
            output: tape.div(top, bottom)?,
            denominator: Some(bottom),
        })
    }
}

/// `(w_0 + sum_{k<K} w_k * x^k, w_0 + sum_{k<=K} w_k * x^k)` for `K = names.len()`.
fn numerator<T: Real>(
    tape: &mut Tape<T>,
    vars: &Bindings,
    powers: &[Var],
    names: &[String],
    bias: Var,
) -> Result<(Var, Var)> {
    let mut lower = bias;
    let mut acc: Option<Var> = None;
    for (i, name) in names.iter().enumerate() {
        let w = vars.get(name)?;
        let next = match acc {
            None => tape.conv2d(powers[i], w, Some(bias), Padding::Circular)?,
            Some(prev) => {
                let term = tape.conv2d(powers[i], w, None, Padding::Circular)?;
                tape.add(prev, term)?
            }
        };
        if i + 1 == names.len() {
            lower = acc.unwrap_or(bias);
        }
        acc = Some(next);
    }
    Ok((lower, acc.unwrap_or(bias)))
}

fn sum_all<T: Real>(tape: &mut Tape<T>, terms: &[Var]) -> Result<Option<Var>> {
    let mut iter = terms.iter().copied();
    let Some(mut acc) = iter.next() else {
        return Ok(None);
    };
    for t in iter {
        acc = tape.add(acc, t)?;
    }
    Ok(Some(acc))
}
