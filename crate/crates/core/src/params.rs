//! Named parameter tensors and their binding onto a tape.

use indexmap::IndexMap;

use crate::error::{Error, Result};
use crate::tensor::{Real, Tape, Tensor, Var};

/// Ordered map from parameter name to tensor. Insertion order is the
/// canonical order used for serialization and flat parameter vectors.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Params<T = f32> {
    entries: IndexMap<String, Tensor<T>>,
}

/// Parameter names resolved to tape variables for one forward pass.
#[derive(Clone, Debug, Default)]
pub struct Bindings {
    vars: IndexMap<String, Var>,
}

impl Bindings {
    pub fn get(&self, name: &str) -> Result<Var> {
        self.vars
            .get(name)
            .copied()
            .ok_or_else(|| Error::Config(format!("parameter {name} is not bound")))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Var)> {
        self.vars.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

impl<T: Real> Params<T> {
    pub fn new() -> Self {
        Params {
            entries: IndexMap::new(),
        }
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor<T>) {
        self.entries.insert(name.into(), value);
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<T>> {
        self.entries.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor<T>> {
        self.entries.get_mut(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor<T>)> {
        self.entries.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn count(&self) -> usize {
        self.entries.values().map(Tensor::len).sum()
    }

    pub fn cast<U: Real>(&self) -> Params<U> {
        Params {
            entries: self
                .entries
                .iter()
                .map(|(k, v)| (k.clone(), v.cast()))
                .collect(),
        }
    }

    /// Records every parameter on `tape`, as trainable leaves when
    /// `trainable` is set and as constants otherwise.
    pub fn bind(&self, tape: &mut Tape<T>, trainable: bool) -> Bindings {
        let vars = self
            .entries
            .iter()
            .map(|(name, value)| {
                let v = if trainable {
                    tape.param(value.clone())
                } else {
                    tape.constant(value.clone())
                };
                (name.clone(), v)
            })
            .collect();
        Bindings { vars }
    }

    /// Names `vars` (one per parameter, in canonical order) with this
    /// table's names.
    pub fn rebind(&self, vars: &[Var]) -> Result<Bindings> {
        if vars.len() != self.entries.len() {
            return Err(Error::Usage(format!(
                "{} variables for {} parameters",
                vars.len(),
                self.entries.len()
            )));
        }
        let vars = self.entries.keys().cloned().zip(vars.iter().copied()).collect();
        Ok(Bindings { vars })
    }

    /// Reads the gradient of every bound parameter; parameters the backward
    /// pass never reached get zeros.
    pub fn grads(&self, tape: &Tape<T>, bindings: &Bindings) -> Result<Params<T>> {
        let mut out = Params::new();
        for (name, value) in &self.entries {
            let var = bindings.get(name)?;
            let g = tape
                .grad(var)
                .cloned()
                .unwrap_or_else(|| Tensor::zeros(value.shape()));
            out.insert(name.clone(), g);
        }
        Ok(out)
    }

    /// Flattens all parameters in canonical order.
    pub fn flatten(&self) -> Vec<T> {
        self.entries
            .values()
            .flat_map(|t| t.data().iter().copied())
            .collect()
    }
}
