use std::collections::BTreeMap;

use super::{Graph, Tensor, Var};
use crate::error::{Error, Result};

/// Named parameter tensors, iterated in name order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Params {
    tensors: BTreeMap<String, Tensor>,
}

impl Params {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor) {
        self.tensors.insert(name.into(), value);
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.tensors
            .get(name)
            .ok_or_else(|| Error::State(format!("missing parameter `{name}`")))
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.tensors.get_mut(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.tensors.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.tensors.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.keys().map(String::as_str)
    }

    pub fn numel(&self) -> usize {
        self.tensors.values().map(Tensor::numel).sum()
    }

    /// Parameters whose names start with `prefix`.
    pub fn subset(&self, prefix: &str) -> Params {
        Params {
            tensors: self
                .tensors
                .iter()
                .filter(|(k, _)| k.starts_with(prefix))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
        }
    }

    /// Copies every `from`-prefixed tensor to the same name under `to`.
    pub fn copy_prefix(&mut self, source: &Params, from: &str, to: &str) -> usize {
        let mut n = 0;
        for (k, v) in source.iter() {
            if let Some(rest) = k.strip_prefix(from) {
                self.insert(format!("{to}{rest}"), v.clone());
                n += 1;
            }
        }
        n
    }

    pub fn extend(&mut self, other: Params) {
        self.tensors.extend(other.tensors);
    }

    /// Records every tensor on `graph`, trainable or constant.
    pub fn record(&self, graph: &mut Graph, trainable: bool) -> BoundParams {
        let vars = self
            .tensors
            .iter()
            .map(|(k, v)| {
                let var = if trainable {
                    graph.param(v.clone())
                } else {
                    graph.constant(v.clone())
                };
                (k.clone(), var)
            })
            .collect();
        BoundParams { vars }
    }

    pub fn global_norm(&self) -> f64 {
        self.tensors
            .values()
            .map(Tensor::sum_squares)
            .sum::<f64>()
            .sqrt()
    }

    /// Elementwise `self += scale * other` over matching names.
    pub fn add_scaled(&mut self, other: &Params, scale: f64) -> Result<()> {
        for (k, v) in other.iter() {
            let dst = self
                .tensors
                .get_mut(k)
                .ok_or_else(|| Error::Shape(format!("no parameter `{k}` to accumulate into")))?;
            dst.same_shape(v, k)?;
            for (d, s) in dst.data_mut().iter_mut().zip(v.data()) {
                *d += scale * s;
            }
        }
        Ok(())
    }

    pub fn scale_in_place(&mut self, c: f64) {
        for v in self.tensors.values_mut() {
            v.data_mut().iter_mut().for_each(|x| *x *= c);
        }
    }

    pub fn zeros_like(&self) -> Params {
        Params {
            tensors: self
                .tensors
                .iter()
                .map(|(k, v)| (k.clone(), Tensor::zeros(v.shape())))
                .collect(),
        }
    }
}

impl FromIterator<(String, Tensor)> for Params {
    fn from_iter<I: IntoIterator<Item = (String, Tensor)>>(iter: I) -> Self {
        Params {
            tensors: iter.into_iter().collect(),
        }
    }
}

/// Parameters recorded on a particular tape.
#[derive(Clone, Debug, Default)]
pub struct BoundParams {
    vars: BTreeMap<String, Var>,
}

impl BoundParams {
    pub fn var(&self, name: &str) -> Result<Var> {
        self.vars
            .get(name)
            .copied()
            .ok_or_else(|| Error::State(format!("missing parameter `{name}`")))
    }

    pub fn merge(&mut self, other: BoundParams) {
        self.vars.extend(other.vars);
    }

    /// Collects gradients for every bound name into a [`Params`].
    pub fn gradients(&self, grads: &super::Gradients) -> Params {
        self.vars
            .iter()
            .map(|(k, &v)| (k.clone(), grads.get_or_zero(v)))
            .collect()
    }
}
