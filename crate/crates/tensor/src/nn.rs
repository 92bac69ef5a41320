//! Named parameter storage and the equalized-learning-rate layers used by
//! the style-based generator and its discriminators.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::tensor::{numel, Tensor};

/// Ordered map of named parameter tensors.
///
/// Cloning is cheap (tensors share their buffers) and yields an independent
/// snapshot: updates replace entries instead of writing through.
#[derive(Clone, Debug)]
pub struct ParamStore {
    entries: BTreeMap<String, Tensor>,
    trainable: bool,
}

impl Default for ParamStore {
    fn default() -> Self {
        Self::new()
    }
}

impl ParamStore {
    pub fn new() -> Self {
        Self {
            entries: BTreeMap::new(),
            trainable: true,
        }
    }

    pub fn insert(&mut self, name: impl Into<String>, data: Vec<f32>, shape: &[usize]) {
        let t = Tensor::from_shared(Arc::new(data), shape, self.trainable);
        self.entries.insert(name.into(), t);
    }

    pub fn insert_normal<R: Rng + ?Sized>(&mut self, name: impl Into<String>, shape: &[usize], std: f32, rng: &mut R) {
        let data = (0..numel(shape))
            .map(|_| rng.sample::<f32, _>(StandardNormal) * std)
            .collect();
        self.insert(name, data, shape);
    }

    pub fn insert_const(&mut self, name: impl Into<String>, shape: &[usize], value: f32) {
        self.insert(name, vec![value; numel(shape)], shape);
    }

    /// Parameter tensor by name. Model code treats a missing name as a bug.
    pub fn get(&self, name: &str) -> &Tensor {
        self.entries
            .get(name)
            .unwrap_or_else(|| panic!("parameter `{name}` not found"))
    }

    pub fn try_get(&self, name: &str) -> Option<&Tensor> {
        self.entries.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor)> {
        self.entries.iter()
    }

    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.entries.keys()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn num_scalars(&self) -> usize {
        self.entries.values().map(|t| t.numel()).sum()
    }

    pub fn is_trainable(&self) -> bool {
        self.trainable
    }

    /// Toggles gradient tracking for every entry without copying data.
    pub fn set_trainable(&mut self, trainable: bool) {
        if self.trainable == trainable {
            return;
        }
        self.trainable = trainable;
        for t in self.entries.values_mut() {
            *t = Tensor::from_shared(t.shared_data(), t.shape(), trainable);
        }
    }

    pub fn frozen(&self) -> ParamStore {
        let mut s = self.clone();
        s.set_trainable(false);
        s
    }

    /// Replaces the values of an existing entry, keeping its shape.
    pub fn set_data(&mut self, name: &str, data: Vec<f32>) {
        let old = self.get(name);
        assert_eq!(old.numel(), data.len(), "set_data size mismatch for `{name}`");
        let shape = old.shape().to_vec();
        let t = Tensor::from_shared(Arc::new(data), &shape, self.trainable);
        self.entries.insert(name.to_string(), t);
    }

    /// Entries whose names start with `prefix`, prefix kept.
    pub fn subset(&self, prefix: &str) -> ParamStore {
        ParamStore {
            entries: self
                .entries
                .iter()
                .filter(|(k, _)| k.starts_with(prefix))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
            trainable: self.trainable,
        }
    }

    /// Copies every entry of `other` into `self`, overwriting same names.
    pub fn extend_from(&mut self, other: &ParamStore) {
        for (k, v) in other.iter() {
            self.insert(k.clone(), v.to_vec(), v.shape());
        }
    }

    /// True when both stores hold the same names with the same shapes.
    pub fn same_layout(&self, other: &ParamStore) -> bool {
        self.entries.len() == other.entries.len()
            && self
                .entries
                .iter()
                .zip(other.entries.iter())
                .all(|((ka, va), (kb, vb))| ka == kb && va.shape() == vb.shape())
    }

    /// Bitwise equality of names, shapes and values.
    pub fn bit_eq(&self, other: &ParamStore) -> bool {
        self.same_layout(other)
            && self.entries.values().zip(other.entries.values()).all(|(a, b)| {
                a.data()
                    .iter()
                    .zip(b.data())
                    .all(|(x, y)| x.to_bits() == y.to_bits())
            })
    }
}

/// Fully connected layer with runtime weight scaling (equalized learning
/// rate). Weights are stored as N(0, 1/lr_mul) and multiplied by
/// `gain / sqrt(fan_in) * lr_mul` on use.
#[derive(Clone, Debug)]
pub struct Linear {
    pub name: String,
    pub in_dim: usize,
    pub out_dim: usize,
    pub gain: f32,
    pub lr_mul: f32,
}

impl Linear {
    pub fn new(name: impl Into<String>, in_dim: usize, out_dim: usize) -> Self {
        Self {
            name: name.into(),
            in_dim,
            out_dim,
            gain: 2f32.sqrt(),
            lr_mul: 1.0,
        }
    }

    pub fn with_gain(mut self, gain: f32) -> Self {
        self.gain = gain;
        self
    }

    pub fn with_lr_mul(mut self, lr_mul: f32) -> Self {
        self.lr_mul = lr_mul;
        self
    }

    fn weight_name(&self) -> String {
        format!("{}.weight", self.name)
    }

    fn bias_name(&self) -> String {
        format!("{}.bias", self.name)
    }

    pub fn init<R: Rng + ?Sized>(&self, store: &mut ParamStore, bias_init: f32, rng: &mut R) {
        store.insert_normal(self.weight_name(), &[self.out_dim, self.in_dim], 1.0 / self.lr_mul, rng);
        store.insert_const(self.bias_name(), &[self.out_dim], bias_init / self.lr_mul);
    }

    /// `x` is `[batch, in_dim]`.
    pub fn forward(&self, store: &ParamStore, x: &Tensor) -> Tensor {
        let scale = self.gain / (self.in_dim as f32).sqrt() * self.lr_mul;
        let w = store.get(&self.weight_name()).mul_scalar(scale);
        let b = store.get(&self.bias_name()).mul_scalar(self.lr_mul);
        x.matmul_bt(&w).add(&b)
    }
}

/// Square-kernel convolution with equalized learning rate and "same" padding.
#[derive(Clone, Debug)]
pub struct Conv2d {
    pub name: String,
    pub in_ch: usize,
    pub out_ch: usize,
    pub kernel: usize,
    pub gain: f32,
    pub bias: bool,
}

impl Conv2d {
    pub fn new(name: impl Into<String>, in_ch: usize, out_ch: usize, kernel: usize) -> Self {
        Self {
            name: name.into(),
            in_ch,
            out_ch,
            kernel,
            gain: 2f32.sqrt(),
            bias: true,
        }
    }

    pub fn with_gain(mut self, gain: f32) -> Self {
        self.gain = gain;
        self
    }

    pub fn without_bias(mut self) -> Self {
        self.bias = false;
        self
    }

    fn weight_name(&self) -> String {
        format!("{}.weight", self.name)
    }

    fn bias_name(&self) -> String {
        format!("{}.bias", self.name)
    }

    pub fn init<R: Rng + ?Sized>(&self, store: &mut ParamStore, rng: &mut R) {
        let k = self.kernel;
        store.insert_normal(self.weight_name(), &[self.out_ch, self.in_ch, k, k], 1.0, rng);
        if self.bias {
            store.insert_const(self.bias_name(), &[1, self.out_ch, 1, 1], 0.0);
        }
    }

    pub fn forward(&self, store: &ParamStore, x: &Tensor) -> Tensor {
        let fan_in = (self.in_ch * self.kernel * self.kernel) as f32;
        let w = store.get(&self.weight_name()).mul_scalar(self.gain / fan_in.sqrt());
        let y = x.conv2d(&w, self.kernel / 2);
        if self.bias {
            y.add(store.get(&self.bias_name()))
        } else {
            y
        }
    }
}
