//! Named parameters with gradient slots.
//!
//! Blocks hold [`ParamId`] handles; values and gradients live in one
//! [`ParamStore`]. Forward passes read through `&ParamStore`, backward passes
//! accumulate through `&mut ParamStore`. Gradient writes are not synchronized
//! internally — callers serialize them per parameter.

use crate::error::{Error, Result};
use crate::numerics::rng::Rng;
use crate::numerics::tensor::Tensor;

#[derive(Debug, Clone)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
    pub grad: Tensor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamId(usize);

#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    params: Vec<Param>,
}

impl ParamStore {
    pub fn new() -> Self {
        ParamStore { params: Vec::new() }
    }

    /// Registers a parameter. Names must be unique within the store.
    pub fn add(&mut self, name: &str, value: Tensor) -> ParamId {
        assert!(
            self.params.iter().all(|p| p.name != name),
            "duplicate parameter name {name}"
        );
        let grad = Tensor::zeros(value.shape());
        self.params.push(Param { name: name.to_string(), value, grad });
        ParamId(self.params.len() - 1)
    }

    /// Linear/conv weight init: uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)).
    pub fn add_uniform(&mut self, name: &str, shape: &[usize], fan_in: usize, rng: &mut Rng) -> ParamId {
        let bound = 1.0 / (fan_in as f64).sqrt();
        let value = Tensor::from_fn(shape, |_| rng.uniform(-bound, bound));
        self.add(name, value)
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].value
    }

    pub fn grad(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].grad
    }

    pub fn param(&self, id: ParamId) -> &Param {
        &self.params[id.0]
    }

    pub fn set_value(&mut self, id: ParamId, value: Tensor) {
        assert_eq!(self.params[id.0].value.shape(), value.shape());
        self.params[id.0].value = value;
    }

    pub fn accumulate(&mut self, id: ParamId, grad: &Tensor) -> Result<()> {
        let p = &mut self.params[id.0];
        if p.grad.shape() != grad.shape() {
            return Err(Error::ShapeMismatch {
                op: "accumulate",
                left: p.grad.shape().to_vec(),
                right: grad.shape().to_vec(),
            });
        }
        p.grad.add_assign(grad)
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.grad.data_mut().iter_mut().for_each(|v| *v = 0.0);
        }
    }

    /// Scales every gradient in place (batch averaging).
    pub fn scale_grads(&mut self, a: f64) {
        for p in &mut self.params {
            p.grad.data_mut().iter_mut().for_each(|v| *v *= a);
        }
    }

    /// Plain SGD: value -= lr * grad.
    pub fn sgd_step(&mut self, lr: f64) {
        for p in &mut self.params {
            for (v, g) in p.value.data_mut().iter_mut().zip(p.grad.data()) {
                *v -= lr * g;
            }
        }
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn ids(&self) -> Vec<ParamId> {
        (0..self.params.len()).map(ParamId).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param> {
        self.params.iter()
    }

    /// Total scalar entries across all parameters.
    pub fn total_entries(&self) -> usize {
        self.params.iter().map(|p| p.value.numel()).sum()
    }

    // Flat entry access, used by the finite-difference checker and checkpoints.

    pub fn entry(&self, id: ParamId, k: usize) -> f64 {
        self.params[id.0].value.data()[k]
    }

    pub fn set_entry(&mut self, id: ParamId, k: usize, v: f64) {
        self.params[id.0].value.data_mut()[k] = v;
    }

    pub fn grad_entry(&self, id: ParamId, k: usize) -> f64 {
        self.params[id.0].grad.data()[k]
    }
}
