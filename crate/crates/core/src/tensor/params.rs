use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::{Scalar, Tensor};
use crate::error::{Error, Result};
#[allow(unused_imports)]
use num_traits::Float;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParamId(pub usize);

/// Named parameter tensors with gradient accumulators.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore<T> {
    names: Vec<String>,
    values: Vec<Tensor<T>>,
    grads: Vec<Vec<T>>,
    accumulated: bool,
}

impl<T: Scalar> Default for ParamStore<T> {
    fn default() -> Self {
        ParamStore { names: Vec::new(), values: Vec::new(), grads: Vec::new(), accumulated: false }
    }
}

impl<T: Scalar> ParamStore<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor<T>) -> Result<ParamId> {
        let name = name.into();
        if self.names.contains(&name) {
            return Err(Error::DuplicateParameter(name));
        }
        self.grads.push(vec![T::zero(); value.numel()]);
        self.values.push(value);
        self.names.push(name);
        Ok(ParamId(self.names.len() - 1))
    }

    pub fn id(&self, name: &str) -> Result<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId).ok_or_else(|| Error::UnknownParameter(name.into()))
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor<T> {
        &self.values[id.0]
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor<T> {
        &mut self.values[id.0]
    }

    /// Replaces a tensor, keeping its shape.
    pub fn set(&mut self, id: ParamId, value: Tensor<T>) -> Result<()> {
        if value.shape() != self.values[id.0].shape() {
            return Err(Error::ShapeMismatch(alloc::format!(
                "parameter `{}` has shape {:?}, got {:?}",
                self.names[id.0],
                self.values[id.0].shape(),
                value.shape()
            )));
        }
        self.values[id.0] = value;
        Ok(())
    }

    pub fn grad(&self, id: ParamId) -> &[T] {
        &self.grads[id.0]
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.names.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.names.iter().map(String::as_str).zip(self.values.iter())
    }

    pub fn num_scalars(&self) -> usize {
        self.values.iter().map(Tensor::numel).sum()
    }

    pub fn zero_grad(&mut self) {
        self.grads.iter_mut().for_each(|g| g.fill(T::zero()));
        self.accumulated = false;
    }

    pub fn accumulate(&mut self, grads: &Gradients<T>) {
        for (acc, g) in self.grads.iter_mut().zip(&grads.per_param) {
            if let Some(g) = g {
                acc.iter_mut().zip(g).for_each(|(a, &b)| *a += b);
            }
        }
        self.accumulated = true;
    }

    pub fn has_accumulated(&self) -> bool {
        self.accumulated
    }

    pub(crate) fn parts_mut(&mut self) -> (&mut [Tensor<T>], &[Vec<T>]) {
        (&mut self.values, &self.grads)
    }

    pub fn cast<U: Scalar>(&self) -> ParamStore<U> {
        ParamStore {
            names: self.names.clone(),
            values: self.values.iter().map(Tensor::cast).collect(),
            grads: self.grads.iter().map(|g| g.iter().map(|v| U::lit(v.as_f64())).collect()).collect(),
            accumulated: self.accumulated,
        }
    }
}

/// Gradients from one backward pass; `None` for parameters outside the graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub per_param: Vec<Option<Vec<T>>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn get(&self, id: ParamId) -> Option<&[T]> {
        self.per_param.get(id.0).and_then(|g| g.as_deref())
    }
}

/// Uniform initialisation in `±√(6/(fan_in + fan_out))`, shape `[fan_in, fan_out]`.
pub fn glorot_uniform<T: Scalar, R: Rng + ?Sized>(fan_in: usize, fan_out: usize, rng: &mut R) -> Tensor<T> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let data = (0..fan_in * fan_out).map(|_| T::lit(rng.random_range(-limit..limit))).collect();
    Tensor { shape: vec![fan_in, fan_out], data }
}
