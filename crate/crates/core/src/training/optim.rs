use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::Params;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Adan,
    Adam,
}

/// Adaptive Nesterov momentum: first moments of the gradient and of the
/// gradient difference, and a second moment of the Nesterov-corrected
/// gradient `g + beta2 (g - g_prev)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Adan {
    pub betas: (f64, f64, f64),
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for Adan {
    fn default() -> Self {
        Adan {
            betas: (0.98, 0.92, 0.99),
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Adam {
    pub betas: (f64, f64),
    pub eps: f64,
}

impl Default for Adam {
    fn default() -> Self {
        Adam {
            betas: (0.9, 0.999),
            eps: 1e-8,
        }
    }
}

/// Per-parameter moment buffers, stored as a flat table named
/// `<slot>:<parameter>` so checkpoints can hold them verbatim.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct OptimState {
    pub step: u64,
    pub slots: Params<f32>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Optimizer {
    Adan(Adan),
    Adam(Adam),
}

impl Optimizer {
    pub fn new(kind: OptimizerKind) -> Self {
        match kind {
            OptimizerKind::Adan => Optimizer::Adan(Adan::default()),
            OptimizerKind::Adam => Optimizer::Adam(Adam::default()),
        }
    }

    fn slot_names(&self) -> &'static [&'static str] {
        match self {
            Optimizer::Adan(_) => &["exp_avg", "exp_avg_diff", "exp_avg_sq", "pre_grad"],
            Optimizer::Adam(_) => &["exp_avg", "exp_avg_sq"],
        }
    }

    /// Checks that a restored state has every buffer this optimizer needs.
    pub fn check_state(&self, params: &Params<f32>, state: &OptimState) -> Result<()> {
        if state.step == 0 {
            return Ok(());
        }
        for (name, t) in params.iter() {
            for slot in self.slot_names() {
                let key = format!("{slot}:{name}");
                match state.slots.get(&key) {
                    Some(s) if s.shape() == t.shape() => {}
                    _ => return Err(Error::Config(format!("optimizer state lacks {key}"))),
                }
            }
        }
        Ok(())
    }

    /// One update of every parameter that has a gradient.
    pub fn step(&self, params: &mut Params<f32>, grads: &Params<f32>, lr: f64, state: &mut OptimState) -> Result<()> {
        state.step += 1;
        let t = state.step as i32;
        for (name, p) in params.iter_mut() {
            let g = grads
                .get(name)
                .ok_or_else(|| Error::Config(format!("no gradient for parameter {name}")))?;
            if g.shape() != p.shape() {
                return Err(Error::shape(
                    "optimizer",
                    format!("{name}: parameter {} vs gradient {}", p.shape(), g.shape()),
                ));
            }
            let shape = p.shape();
            let slot = |s: &str| -> Tensor<f32> {
                state
                    .slots
                    .get(&format!("{s}:{name}"))
                    .cloned()
                    .unwrap_or_else(|| Tensor::zeros(shape))
            };
            match self {
                Optimizer::Adan(o) => {
                    let (b1, b2, b3) = o.betas;
                    let (mut m, mut d, mut v) = (slot("exp_avg"), slot("exp_avg_diff"), slot("exp_avg_sq"));
                    // The first step has no previous gradient: the difference is zero.
                    let prev = if t == 1 { g.clone() } else { slot("pre_grad") };
                    let bc1 = 1.0 - b1.powi(t);
                    let bc2 = 1.0 - b2.powi(t);
                    let bc3 = (1.0 - b3.powi(t)).sqrt();
                    let decay = 1.0 - lr * o.weight_decay;
                    for i in 0..p.len() {
                        let gi = g.data()[i] as f64;
                        let diff = gi - prev.data()[i] as f64;
                        let mi = b1 * m.data()[i] as f64 + (1.0 - b1) * gi;
                        let di = b2 * d.data()[i] as f64 + (1.0 - b2) * diff;
                        let u = gi + b2 * diff;
                        let vi = b3 * v.data()[i] as f64 + (1.0 - b3) * u * u;
                        let denom = vi.sqrt() / bc3 + o.eps;
                        let update = (mi / bc1 + b2 * di / bc2) / denom;
                        let pi = &mut p.data_mut()[i];
                        *pi = (*pi as f64 * decay - lr * update) as f32;
                        m.data_mut()[i] = mi as f32;
                        d.data_mut()[i] = di as f32;
                        v.data_mut()[i] = vi as f32;
                    }
                    state.slots.insert(format!("exp_avg:{name}"), m);
                    state.slots.insert(format!("exp_avg_diff:{name}"), d);
                    state.slots.insert(format!("exp_avg_sq:{name}"), v);
                    state.slots.insert(format!("pre_grad:{name}"), g.clone());
                }
                Optimizer::Adam(o) => {
                    let (b1, b2) = o.betas;
                    let (mut m, mut v) = (slot("exp_avg"), slot("exp_avg_sq"));
                    let bc1 = 1.0 - b1.powi(t);
                    let bc2 = (1.0 - b2.powi(t)).sqrt();
                    for i in 0..p.len() {
                        let gi = g.data()[i] as f64;
                        let mi = b1 * m.data()[i] as f64 + (1.0 - b1) * gi;
                        let vi = b2 * v.data()[i] as f64 + (1.0 - b2) * gi * gi;
                        let pi = &mut p.data_mut()[i];
                        *pi = (*pi as f64 - lr * (mi / bc1) / (vi.sqrt() / bc2 + o.eps)) as f32;
                        m.data_mut()[i] = mi as f32;
                        v.data_mut()[i] = vi as f32;
                    }
                    state.slots.insert(format!("exp_avg:{name}"), m);
                    state.slots.insert(format!("exp_avg_sq:{name}"), v);
                }
            }
        }
        Ok(())
    }
}
