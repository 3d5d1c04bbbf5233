//! Named parameter tensors and their gradients.

use std::collections::HashMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::tensor::Matrix;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamStore {
    names: Vec<String>,
    tensors: Vec<Matrix>,
    index: HashMap<String, usize>,
}

#[derive(Debug, Clone, Copy)]
pub enum Init {
    Zeros,
    Ones,
    /// Uniform in `±sqrt(6 / (rows + cols))`.
    Xavier,
    Uniform(f64),
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn get(&self, i: usize) -> &Matrix {
        &self.tensors[i]
    }

    pub fn get_mut(&mut self, i: usize) -> &mut Matrix {
        &mut self.tensors[i]
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn lookup(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn tensors(&self) -> &[Matrix] {
        &self.tensors
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors.iter().map(Matrix::len).sum()
    }

    /// Inserts a tensor under a fresh name.
    pub fn insert(&mut self, name: &str, value: Matrix) -> usize {
        assert!(!self.index.contains_key(name), "duplicate parameter {name}");
        self.names.push(name.to_string());
        self.tensors.push(value);
        self.index.insert(name.to_string(), self.tensors.len() - 1);
        self.tensors.len() - 1
    }

    /// Returns the index of `name`, creating it with `init` if absent.
    /// Panics if an existing tensor has a different shape.
    pub fn param(&mut self, name: &str, rows: usize, cols: usize, init: Init, rng: &mut ChaCha8Rng) -> usize {
        if let Some(i) = self.lookup(name) {
            assert_eq!(self.tensors[i].shape(), (rows, cols), "shape mismatch for {name}");
            return i;
        }
        let data = match init {
            Init::Zeros => vec![0.0; rows * cols],
            Init::Ones => vec![1.0; rows * cols],
            Init::Xavier => {
                let a = (6.0 / (rows + cols) as f64).sqrt();
                (0..rows * cols).map(|_| rng.random_range(-a..a)).collect()
            }
            Init::Uniform(a) => (0..rows * cols).map(|_| rng.random_range(-a..a)).collect(),
        };
        self.insert(name, Matrix::from_vec(rows, cols, data))
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.iter().all(Matrix::is_finite)
    }

    /// Copies every tensor whose name starts with `from_prefix` into the
    /// tensor named with `to_prefix` instead. Returns how many were copied.
    pub fn copy_prefix(&mut self, source: &ParamStore, from_prefix: &str, to_prefix: &str) -> usize {
        let mut copied = 0;
        for (name, t) in source.names.iter().zip(&source.tensors) {
            let Some(rest) = name.strip_prefix(from_prefix) else { continue };
            if let Some(i) = self.lookup(&format!("{to_prefix}{rest}")) {
                if self.tensors[i].shape() == t.shape() {
                    self.tensors[i] = t.clone();
                    copied += 1;
                }
            }
        }
        copied
    }

    pub(crate) fn from_parts(names: Vec<String>, tensors: Vec<Matrix>) -> Self {
        let index = names.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
        Self { names, tensors, index }
    }
}

/// Gradient accumulator with one slot per parameter.
#[derive(Debug, Clone)]
pub struct Grads {
    pub tensors: Vec<Option<Matrix>>,
}

impl Grads {
    pub fn zeros_like(store: &ParamStore) -> Self {
        Self { tensors: vec![None; store.len()] }
    }

    pub fn accumulate(&mut self, i: usize, g: &Matrix) {
        match &mut self.tensors[i] {
            Some(acc) => acc.add_assign(g),
            slot => *slot = Some(g.clone()),
        }
    }

    pub fn merge(&mut self, other: &Grads) {
        for (i, g) in other.tensors.iter().enumerate() {
            if let Some(g) = g {
                self.accumulate(i, g);
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        for g in self.tensors.iter_mut().flatten() {
            g.scale(s);
        }
    }

    pub fn get(&self, i: usize) -> Option<&Matrix> {
        self.tensors[i].as_ref()
    }

    /// Gradient entry, treating untouched parameters as zero.
    pub fn entry(&self, i: usize, k: usize) -> f64 {
        self.tensors[i].as_ref().map_or(0.0, |g| g.data[k])
    }

    pub fn norm(&self) -> f64 {
        self.tensors.iter().flatten().flat_map(|g| g.data.iter()).map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.tensors.iter().flatten().all(|g| g.data.iter().all(|&v| v == 0.0))
    }
}
