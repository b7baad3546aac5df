use std::collections::BTreeMap;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::tensor_core::{ParamGrads, ParamStore};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum OptimizerKind {
    Sgd,
    #[default]
    Adam,
}

impl std::str::FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sgd" => Ok(OptimizerKind::Sgd),
            "adam" => Ok(OptimizerKind::Adam),
            other => Err(Error::InvalidArgument(format!("unknown optimizer {other:?}"))),
        }
    }
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Plain SGD or Adam with bias correction.
#[derive(Clone, Debug)]
pub struct Optimizer {
    kind: OptimizerKind,
    learning_rate: f64,
    steps: u64,
    first: BTreeMap<String, Array2<f64>>,
    second: BTreeMap<String, Array2<f64>>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, learning_rate: f64) -> Result<Self> {
        if !(learning_rate > 0.0 && learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be positive, got {learning_rate}"
            )));
        }
        Ok(Optimizer {
            kind,
            learning_rate,
            steps: 0,
            first: BTreeMap::new(),
            second: BTreeMap::new(),
        })
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn step(&mut self, params: &mut ParamStore, grads: &ParamGrads) -> Result<()> {
        self.steps += 1;
        let t = self.steps as i32;
        for (name, grad) in grads.iter() {
            let current = params
                .get(name)
                .ok_or_else(|| Error::ParamMismatch(vec![format!("gradient for unknown tensor {name}")]))?;
            let update = match self.kind {
                OptimizerKind::Sgd => grad * self.learning_rate,
                OptimizerKind::Adam => {
                    let m = self
                        .first
                        .entry(name.to_string())
                        .or_insert_with(|| Array2::zeros(grad.dim()));
                    m.zip_mut_with(grad, |m, &g| *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g);
                    let v = self
                        .second
                        .entry(name.to_string())
                        .or_insert_with(|| Array2::zeros(grad.dim()));
                    v.zip_mut_with(grad, |v, &g| *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g);
                    let c1 = 1.0 - ADAM_BETA1.powi(t);
                    let c2 = 1.0 - ADAM_BETA2.powi(t);
                    let lr = self.learning_rate;
                    let mut u = m.clone();
                    u.zip_mut_with(v, |u, &v| *u = lr * (*u / c1) / ((v / c2).sqrt() + ADAM_EPS));
                    u
                }
            };
            let next = current - &update;
            params.set(name, next)?;
        }
        Ok(())
    }
}

/// Rescales `grads` to at most `max_norm` in global L2 norm. Returns the
/// norm before clipping.
pub fn clip_gradients(grads: &mut ParamGrads, max_norm: f64) -> f64 {
    let norm = grads.global_norm();
    if max_norm > 0.0 && norm > max_norm {
        grads.scale(max_norm / norm);
    }
    norm
}
