use std::sync::Arc;

use rand::Rng;

use crate::autodiff::{Tape, Var};
use crate::rng;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub usize);

#[derive(Debug, Clone)]
pub struct Param<T> {
    pub name: String,
    pub value: Arc<Tensor<T>>,
}

/// Flat, ordered collection of named learnable tensors.
#[derive(Debug, Clone, Default)]
pub struct ParamStore<T> {
    params: Vec<Param<T>>,
}

impl<T: Scalar> ParamStore<T> {
    pub fn new() -> Self {
        Self { params: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Param<T>)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn get(&self, id: ParamId) -> &Param<T> {
        &self.params[id.0]
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    /// Mutable access for optimizers; clones the buffer if a tape still
    /// holds a reference to it.
    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor<T> {
        Arc::make_mut(&mut self.params[id.0].value)
    }

    /// Every parameter buffer, mutably, in registration order.
    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut [T]> {
        self.params
            .iter_mut()
            .map(|p| Arc::make_mut(&mut p.value).data_mut())
    }

    pub fn set(&mut self, id: ParamId, value: Tensor<T>) {
        assert_eq!(
            value.shape(),
            self.params[id.0].value.shape(),
            "parameter shape"
        );
        self.params[id.0].value = Arc::new(value);
    }

    pub fn numel(&self) -> usize {
        self.params.iter().map(|p| p.value.numel()).sum()
    }

    /// `(name, element count)` for every parameter, in registration order.
    pub fn census(&self) -> Vec<(String, usize)> {
        self.params
            .iter()
            .map(|p| (p.name.clone(), p.value.numel()))
            .collect()
    }

    pub fn all_finite(&self) -> bool {
        self.params.iter().all(|p| p.value.all_finite())
    }

    pub fn bind<'t>(&self, tape: &'t Tape<T>, id: ParamId) -> Var<'t, T> {
        tape.param(id.0, &self.params[id.0].value)
    }

    fn push(&mut self, name: String, value: Tensor<T>) -> ParamId {
        debug_assert!(self.find(&name).is_none(), "duplicate parameter {name}");
        self.params.push(Param {
            name,
            value: Arc::new(value),
        });
        ParamId(self.params.len() - 1)
    }

    /// Glorot-uniform `[fan_in, fan_out]` weight drawn from the stream named
    /// after the parameter, so initialization is independent of which other
    /// parameters exist.
    pub fn glorot(&mut self, seed: u64, name: String, fan_in: usize, fan_out: usize) -> ParamId {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let mut stream = rng::stream(seed, &name, &[]);
        let data = (0..fan_in * fan_out)
            .map(|_| T::lit(stream.random_range(-limit..limit)))
            .collect();
        let value = Tensor::new(vec![fan_in, fan_out], data).expect("positive dims");
        self.push(name, value)
    }

    pub fn constant(&mut self, name: String, len: usize, value: T) -> ParamId {
        self.push(name, Tensor::full(&[len], value))
    }
}
