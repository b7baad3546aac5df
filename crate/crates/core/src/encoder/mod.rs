//! Token embeddings, bidirectional context encoding, head-finding
//! attention, and span representations.

pub mod char_cnn;
mod context;
mod embedding;
mod head;
mod span_rep;

pub use context::{encode_batch, encode_context};
pub use embedding::{embed_tokens, EmbeddingProvider};
pub use head::{head_attention, head_attention_batch, head_attention_from_logits, head_logits};
pub use span_rep::{build_span_rep, build_span_reps, FeatureProvider, SpanRep, ZeroFeatures};
