//! Dense tensors, a reverse-mode tape, and gradient verification.

mod grad_check;
mod graph;
mod lstm;
mod params;
mod tensor;

pub use grad_check::{grad_check, grad_check_with, relative_error, GradCheckReport};
pub use graph::{log_sum_exp, sigmoid, softmax, Gradients, Graph, NodeId};
pub use lstm::{lstm_cell_step, LstmParams};
pub use params::{stable_hash, Init, ParamGrads, ParamSpec, ParamStore};
pub use tensor::Tensor;
pub(crate) use graph::sum_f64;
