use std::collections::BTreeMap;

use fnv::FnvHasher;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::hash::Hasher;

use super::graph::{Graph, Gradients, NodeId};
use super::tensor::{matrix_dims, Tensor};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Init {
    /// Uniform in `[-s, s]`, `s = sqrt(6 / (fan_in + fan_out))`.
    Glorot,
    Zeros,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub init: Init,
}

impl ParamSpec {
    pub fn new(name: impl Into<String>, shape: Vec<usize>, init: Init) -> Self {
        ParamSpec {
            name: name.into(),
            shape,
            init,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
struct Param {
    shape: Vec<usize>,
    value: Array2<f64>,
}

/// Named learnable tensors.
///
/// Values are held as `f64` matrices for computation but always sit on the
/// `f32` grid, so writing them out as 32-bit tensors is lossless.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    entries: BTreeMap<String, Param>,
}

/// Stable 64-bit hash used to derive per-name and per-token seeds.
pub fn stable_hash(seed: u64, key: &str) -> u64 {
    let mut h = FnvHasher::default();
    h.write_u64(seed);
    h.write(key.as_bytes());
    h.finish()
}

impl ParamStore {
    /// Each tensor draws from its own stream keyed by `(seed, name)`, so
    /// adding or removing a tensor never changes how the others start.
    pub fn init(specs: &[ParamSpec], seed: u64) -> Result<Self> {
        let mut store = ParamStore::default();
        for spec in specs {
            let (rows, cols) = matrix_dims(&spec.shape);
            if rows * cols == 0 {
                return Err(Error::shape("param init", format!("{} has shape {:?}", spec.name, spec.shape)));
            }
            let value = match spec.init {
                Init::Zeros => Array2::zeros((rows, cols)),
                Init::Glorot => {
                    let (fan_out, fan_in) = (rows, cols);
                    let s = (6.0 / (fan_in + fan_out) as f64).sqrt() as f32;
                    let mut rng = ChaCha8Rng::seed_from_u64(stable_hash(seed, &spec.name));
                    Array2::from_shape_fn((rows, cols), |_| f64::from(rng.random_range(-s..=s)))
                }
            };
            if store.entries.contains_key(&spec.name) {
                return Err(Error::InvalidArgument(format!("duplicate parameter {}", spec.name)));
            }
            store.entries.insert(
                spec.name.clone(),
                Param {
                    shape: spec.shape.clone(),
                    value,
                },
            );
        }
        Ok(store)
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

    pub fn num_values(&self) -> usize {
        self.entries.values().map(|p| p.value.len()).sum()
    }

    pub fn get(&self, name: &str) -> Option<&Array2<f64>> {
        self.entries.get(name).map(|p| &p.value)
    }

    pub fn shape(&self, name: &str) -> Option<&[usize]> {
        self.entries.get(name).map(|p| p.shape.as_slice())
    }

    /// Replaces a tensor's values, rounding to 32-bit storage.
    pub fn set(&mut self, name: &str, value: Array2<f64>) -> Result<()> {
        let p = self
            .entries
            .get_mut(name)
            .ok_or_else(|| Error::ParamMismatch(vec![format!("unknown tensor {name}")]))?;
        if p.value.dim() != value.dim() {
            return Err(Error::shape(
                "param set",
                format!("{name}: {:?} vs {:?}", p.value.dim(), value.dim()),
            ));
        }
        if value.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("update to {name}")));
        }
        p.value = value.mapv(|v| f64::from(v as f32));
        Ok(())
    }

    /// Registers (or reuses) the named tensor as a learnable graph leaf.
    pub fn node(&self, g: &mut Graph, name: &str) -> Result<NodeId> {
        let value = self
            .get(name)
            .ok_or_else(|| Error::ParamMismatch(vec![format!("missing tensor {name}")]))?;
        g.param(name, value)
    }

    pub fn to_tensors(&self) -> Result<Vec<(String, Tensor)>> {
        self.entries
            .iter()
            .map(|(name, p)| {
                let data: Vec<f64> = p.value.iter().copied().collect();
                Ok((name.clone(), Tensor::from_f64(p.shape.clone(), &data)?))
            })
            .collect()
    }

    pub fn from_tensors(tensors: Vec<(String, Tensor)>) -> Result<Self> {
        let mut store = ParamStore::default();
        for (name, t) in tensors {
            if store.entries.contains_key(&name) {
                return Err(Error::Checkpoint(format!("duplicate tensor {name}")));
            }
            store.entries.insert(
                name,
                Param {
                    shape: t.shape().to_vec(),
                    value: t.to_matrix(),
                },
            );
        }
        Ok(store)
    }

    /// Checks that names and shapes agree exactly with `specs`.
    pub fn check_against(&self, specs: &[ParamSpec]) -> Result<()> {
        let mut problems = Vec::new();
        for spec in specs {
            match self.shape(&spec.name) {
                None => problems.push(format!("missing tensor {}", spec.name)),
                Some(shape) if shape != spec.shape.as_slice() => problems.push(format!(
                    "tensor {} has shape {:?}, model expects {:?}",
                    spec.name, shape, spec.shape
                )),
                Some(_) => {}
            }
        }
        for name in self.names() {
            if !specs.iter().any(|s| s.name == name) {
                problems.push(format!("unknown tensor {name}"));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::ParamMismatch(problems))
        }
    }

    /// All values concatenated in name order.
    pub fn flatten(&self) -> Vec<f64> {
        self.entries
            .values()
            .flat_map(|p| p.value.iter().copied())
            .collect()
    }

    /// Inverse of [`flatten`](Self::flatten). Values are taken verbatim
    /// (no rounding), for finite-difference probing.
    pub fn with_flat(&self, flat: &[f64]) -> Result<Self> {
        if flat.len() != self.num_values() {
            return Err(Error::shape(
                "with_flat",
                format!("{} values for {}", flat.len(), self.num_values()),
            ));
        }
        let mut out = self.clone();
        let mut offset = 0;
        for p in out.entries.values_mut() {
            let n = p.value.len();
            p.value = Array2::from_shape_vec(p.value.dim(), flat[offset..offset + n].to_vec())
                .expect("length checked");
            offset += n;
        }
        Ok(out)
    }
}

/// Per-tensor gradients keyed by parameter name.
#[derive(Clone, Debug, Default)]
pub struct ParamGrads {
    grads: BTreeMap<String, Array2<f64>>,
}

impl ParamGrads {
    pub fn zeros_like(params: &ParamStore) -> Self {
        ParamGrads {
            grads: params
                .entries
                .iter()
                .map(|(n, p)| (n.clone(), Array2::zeros(p.value.dim())))
                .collect(),
        }
    }

    /// Adds the gradients of every parameter leaf in `graph`.
    pub fn accumulate(&mut self, graph: &Graph, grads: &Gradients) {
        for (name, id) in graph.params() {
            if let Some(g) = grads.get(*id) {
                match self.grads.get_mut(name) {
                    Some(acc) => *acc += g,
                    None => {
                        self.grads.insert(name.clone(), g.clone());
                    }
                }
            }
        }
    }

    pub fn get(&self, name: &str) -> Option<&Array2<f64>> {
        self.grads.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Array2<f64>)> {
        self.grads.iter().map(|(n, g)| (n.as_str(), g))
    }

    pub fn global_norm(&self) -> f64 {
        self.grads
            .values()
            .flat_map(|g| g.iter())
            .fold(0.0, |acc, v| acc + v * v)
            .sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        for g in self.grads.values_mut() {
            g.mapv_inplace(|v| v * factor);
        }
    }

    /// Flattened in the same name order as [`ParamStore::flatten`].
    pub fn flatten(&self, params: &ParamStore) -> Vec<f64> {
        params
            .entries
            .iter()
            .flat_map(|(name, p)| match self.grads.get(name) {
                Some(g) => g.iter().copied().collect::<Vec<_>>(),
                None => vec![0.0; p.value.len()],
            })
            .collect()
    }
}
