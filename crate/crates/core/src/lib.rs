//! Span-ranking coreference resolution in which every mention's
//! representation is refined by pointer attention over all candidate spans,
//! including the ones discarded at mention detection.

pub mod coref_scorer;
pub mod corpus;
pub mod encoder;
pub mod error;
pub mod ffnn;
pub mod mention_refine;
pub mod metrics;
pub mod model;
pub mod tensor_core;
pub mod training;

pub use error::{Error, Result};
