//! Central finite-difference gradient checks.
//!
//! The numeric side only ever evaluates forward passes, so it is independent
//! of the adjoint code it audits. Run it on `Tape<f64>` for tight tolerances.

use super::{Real, Shape, Tape, Tensor, Var};
use crate::error::{Error, Result};

/// Outcome of checking one input tensor.
#[derive(Clone, Debug)]
pub struct GradCheck {
    pub analytic: Tensor<f64>,
    pub numeric: Tensor<f64>,
    /// `|analytic - numeric| / max(|analytic|, |numeric|)` in the 2-norm,
    /// or 0 when both vanish.
    pub rel_error: f64,
}

fn rel_error(a: &Tensor<f64>, n: &Tensor<f64>) -> f64 {
    let diff: f64 = a
        .data()
        .iter()
        .zip(n.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    let scale = a.norm().max(n.norm());
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

fn evaluate<F>(inputs: &[Tensor<f64>], f: &F) -> Result<f64>
where
    F: Fn(&mut Tape<f64>, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.constant(t.clone())).collect();
    let loss = f(&mut tape, &vars)?;
    tape.value(loss).item()
}

/// Compares the tape's gradient of the scalar `f(inputs)` with central
/// differences of step `h` for every input tensor.
pub fn check<F>(inputs: &[Tensor<f64>], h: f64, f: F) -> Result<Vec<GradCheck>>
where
    F: Fn(&mut Tape<f64>, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.param(t.clone())).collect();
    let loss = f(&mut tape, &vars)?;
    tape.backward(loss)?;

    let mut reports = Vec::with_capacity(inputs.len());
    for (idx, var) in vars.iter().enumerate() {
        let analytic = tape
            .grad(*var)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(inputs[idx].shape()));
        let mut numeric = Tensor::zeros(inputs[idx].shape());
        let mut probe = inputs.to_vec();
        for e in 0..inputs[idx].len() {
            let orig = inputs[idx].data()[e];
            probe[idx].data_mut()[e] = orig + h;
            let up = evaluate(&probe, &f)?;
            probe[idx].data_mut()[e] = orig - h;
            let down = evaluate(&probe, &f)?;
            probe[idx].data_mut()[e] = orig;
            numeric.data_mut()[e] = (up - down) / (2.0 * h);
        }
        let rel_error = rel_error(&analytic, &numeric);
        reports.push(GradCheck {
            analytic,
            numeric,
            rel_error,
        });
    }
    Ok(reports)
}

/// `sum(weights * x)`, the usual way to reduce a tensor output to a scalar
/// loss that probes every output direction.
pub fn weighted_sum<T: Real>(tape: &mut Tape<T>, x: Var, weights: &Tensor<T>) -> Result<Var> {
    if tape.shape(x) != weights.shape() {
        return Err(Error::shape(
            "weighted_sum",
            format!("weights {} vs output {}", weights.shape(), tape.shape(x)),
        ));
    }
    let w = tape.constant(weights.clone());
    let prod = tape.mul(x, w)?;
    Ok(tape.sum(prod))
}

/// Uniform random tensor in `[lo, hi)` from a seeded generator.
pub fn random_tensor<T: Real, R: rand::Rng>(rng: &mut R, shape: Shape, lo: f64, hi: f64) -> Tensor<T> {
    Tensor::from_fn(shape, |_, _, _, _| T::lit(rng.random_range(lo..hi)))
}
