use std::collections::BTreeMap;
use std::rc::Rc;

use crate::autograd::{Gradients, Tape, Var};
use crate::error::{NnError, Result};
use crate::tensor::Tensor;

/// A named trainable tensor plus its accumulated gradient.
#[derive(Debug, Clone)]
pub struct Param {
    pub value: Tensor,
    pub grad: Tensor,
}

impl Param {
    pub fn new(value: Tensor) -> Self {
        let grad = Tensor::zeros(value.rows(), value.cols());
        Self { value, grad }
    }
}

/// Named parameter store. BTreeMap keeps iteration order deterministic,
/// which checkpointing and the optimizer rely on.
#[derive(Debug, Clone, Default)]
pub struct LayerParams {
    map: BTreeMap<String, Param>,
}

/// Tape-bound views of every parameter, produced by [`LayerParams::bind`].
pub struct BoundParams {
    map: BTreeMap<String, Var>,
}

impl BoundParams {
    pub fn var(&self, name: &str) -> &Var {
        self.map
            .get(name)
            .unwrap_or_else(|| panic!("unbound parameter: {name}"))
    }

    pub fn try_var(&self, name: &str) -> Option<&Var> {
        self.map.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Var)> {
        self.map.iter()
    }
}

impl LayerParams {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, value: Tensor) -> Result<()> {
        if self.map.contains_key(name) {
            return Err(NnError::DuplicateParam(name.to_string()));
        }
        self.map.insert(name.to_string(), Param::new(value));
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&Param> {
        self.map
            .get(name)
            .ok_or_else(|| NnError::UnknownParam(name.to_string()))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Param> {
        self.map
            .get_mut(name)
            .ok_or_else(|| NnError::UnknownParam(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.map.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.map.keys()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Param)> {
        self.map.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&String, &mut Param)> {
        self.map.iter_mut()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn zero_grads(&mut self) {
        for p in self.map.values_mut() {
            p.grad = Tensor::zeros(p.value.rows(), p.value.cols());
        }
    }

    /// Create tape leaves for every parameter.
    pub fn bind(&self, tape: &Rc<Tape>) -> BoundParams {
        let map = self
            .map
            .iter()
            .map(|(name, p)| (name.clone(), tape.leaf(p.value.clone())))
            .collect();
        BoundParams { map }
    }

    /// Add gradients from a backward pass into the store.
    pub fn accumulate(&mut self, bound: &BoundParams, grads: &Gradients) {
        for (name, var) in bound.iter() {
            if let Some(g) = grads.get(var) {
                self.map
                    .get_mut(name)
                    .expect("bound param missing from store")
                    .grad
                    .add_assign(g);
            }
        }
    }

    /// Total number of scalar entries across all parameters.
    pub fn scalar_count(&self) -> usize {
        self.map.values().map(|p| p.value.len()).sum()
    }
}
