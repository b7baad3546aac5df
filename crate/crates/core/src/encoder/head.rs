use ndarray::Array2;

use crate::corpus::Span;
use crate::error::{Error, Result};
use crate::tensor_core::{Graph, NodeId};

/// Per-token head logits `w · h_t`, as a `[1, T]` row.
pub fn head_logits(g: &mut Graph, states: NodeId, w_head: NodeId) -> Result<NodeId> {
    g.matmul_t(w_head, states)
}

/// Softmax over the span's precomputed token logits, then the weighted sum
/// of the span's token vectors.
pub fn head_attention_from_logits(
    g: &mut Graph,
    span: Span,
    token_vectors: NodeId,
    logits: NodeId,
) -> Result<NodeId> {
    if span.start > span.end {
        return Err(Error::Empty("head_attention"));
    }
    let n = g.shape(token_vectors).0;
    if span.end >= n || g.shape(logits) != (1, n) {
        return Err(Error::shape(
            "head_attention",
            format!("span {span} over {n} tokens, logits {:?}", g.shape(logits)),
        ));
    }
    let idx: Vec<usize> = (span.start..=span.end).collect();
    if idx.len() == 1 {
        return g.gather_rows(token_vectors, &idx);
    }
    let span_logits = g.gather_elems(logits, &idx)?;
    let weights = g.softmax_rows(span_logits)?;
    let rows = g.gather_rows(token_vectors, &idx)?;
    g.matmul(weights, rows)
}

/// Head-finding attention for one span: logits are a learned projection
/// `w_head` (`[1, 2H]`) of the contextual states within the span.
pub fn head_attention(
    g: &mut Graph,
    span: Span,
    token_vectors: NodeId,
    states: NodeId,
    w_head: NodeId,
) -> Result<NodeId> {
    let logits = head_logits(g, states, w_head)?;
    head_attention_from_logits(g, span, token_vectors, logits)
}

/// Large enough that `exp` of a masked logit underflows to exactly zero.
const MASKED: f64 = -1e30;

/// Head vectors of many spans at once, `[spans, E]`: each span's softmax
/// runs over a row of `logits` with every token outside the span masked.
pub fn head_attention_batch(
    g: &mut Graph,
    spans: &[Span],
    token_vectors: NodeId,
    logits: NodeId,
) -> Result<NodeId> {
    if spans.is_empty() {
        return Err(Error::Empty("head_attention_batch"));
    }
    let n = g.shape(token_vectors).0;
    if g.shape(logits) != (1, n) {
        return Err(Error::shape(
            "head_attention_batch",
            format!("logits {:?} over {n} tokens", g.shape(logits)),
        ));
    }
    let mut mask = Array2::from_elem((spans.len(), n), MASKED);
    for (row, span) in spans.iter().enumerate() {
        if span.start > span.end {
            return Err(Error::Empty("head_attention"));
        }
        if span.end >= n {
            return Err(Error::shape("head_attention_batch", format!("span {span} over {n} tokens")));
        }
        for t in span.start..=span.end {
            mask[[row, t]] = 0.0;
        }
    }
    let mask = g.constant(mask)?;
    let masked = g.add_row(mask, logits)?;
    let weights = g.softmax_rows(masked)?;
    g.matmul(weights, token_vectors)
}
