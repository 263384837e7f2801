use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::hashing::WeightDigest;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Named parameter tensors, addressed by [`ParamId`] in registration order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Array2<f64>>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Array2<f64>) -> ParamId {
        self.names.push(name.into());
        self.values.push(value);
        ParamId(self.values.len() - 1)
    }

    pub fn get(&self, id: ParamId) -> &Array2<f64> {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Array2<f64> {
        &mut self.values[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub fn num_scalars(&self) -> usize {
        self.values.iter().map(Array2::len).sum()
    }

    /// SHA-256 over names, shapes and values.
    pub fn digest(&self) -> String {
        let mut d = WeightDigest::new();
        for (name, v) in self.names.iter().zip(&self.values) {
            d.bytes(name.as_bytes());
            d.bytes(&(v.nrows() as u64).to_le_bytes()).bytes(&(v.ncols() as u64).to_le_bytes());
            d.values(v.iter());
        }
        d.hex()
    }
}

/// Seeded weight initialisation: fan-in scaled uniform for linear maps,
/// constants for normalisation layers.
pub struct Initializer {
    rng: ChaCha8Rng,
}

impl Initializer {
    pub fn new(seed: u64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    /// `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
    pub fn fan_in_uniform(&mut self, rows: usize, cols: usize, fan_in: usize) -> Array2<f64> {
        let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
        self.uniform(rows, cols, bound)
    }

    pub fn uniform(&mut self, rows: usize, cols: usize, bound: f64) -> Array2<f64> {
        Array2::from_shape_simple_fn((rows, cols), || self.rng.random_range(-bound..=bound))
    }

    pub fn constant(rows: usize, cols: usize, value: f64) -> Array2<f64> {
        Array2::from_elem((rows, cols), value)
    }
}
