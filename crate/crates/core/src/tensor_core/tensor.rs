use ndarray::Array2;

use crate::error::{Error, Result};

/// Dense row-major tensor with 32-bit storage.
///
/// This is the on-disk and interchange representation of learnable
/// parameters. Computation happens on `f64` copies inside a [`Graph`].
///
/// [`Graph`]: super::Graph
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f32>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        if shape.is_empty() || shape.iter().any(|&d| d == 0) {
            return Err(Error::shape("tensor", format!("invalid shape {shape:?}")));
        }
        let len: usize = shape.iter().product();
        if len != data.len() {
            return Err(Error::shape(
                "tensor",
                format!("shape {shape:?} needs {len} values, got {}", data.len()),
            ));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("tensor data".into()));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Result<Self> {
        let len = shape.iter().product();
        Tensor::new(shape, vec![0.0; len])
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// The tensor viewed as a matrix; rank-1 tensors become a single row.
    pub fn to_matrix(&self) -> Array2<f64> {
        let (rows, cols) = matrix_dims(&self.shape);
        Array2::from_shape_vec(
            (rows, cols),
            self.data.iter().map(|&v| f64::from(v)).collect(),
        )
        .expect("tensor length checked at construction")
    }

    /// Rounds `values` to 32-bit storage. Fails on non-finite input.
    pub fn from_f64(shape: Vec<usize>, values: &[f64]) -> Result<Self> {
        Tensor::new(shape, values.iter().map(|&v| v as f32).collect())
    }
}

/// Rank 1 and 2 map directly; higher ranks fold leading axes into rows.
pub(crate) fn matrix_dims(shape: &[usize]) -> (usize, usize) {
    match shape {
        [n] => (1, *n),
        [r, c] => (*r, *c),
        _ => {
            let cols = *shape.last().unwrap_or(&1);
            (shape.iter().product::<usize>() / cols.max(1), cols)
        }
    }
}
