use crate::corpus::{CandidateSpan, Document, Span};
use crate::error::{Error, Result};
use crate::tensor_core::{Graph, NodeId};

/// Syntactic feature vector for a span. The default provider emits zeros.
pub trait FeatureProvider: Send + Sync {
    fn width(&self) -> usize;
    fn features(&self, doc: &Document, span: Span) -> Vec<f64>;
}

#[derive(Clone, Copy, Debug, Default)]
pub struct ZeroFeatures {
    pub width: usize,
}

impl FeatureProvider for ZeroFeatures {
    fn width(&self) -> usize {
        self.width
    }

    fn features(&self, _doc: &Document, _span: Span) -> Vec<f64> {
        vec![0.0; self.width]
    }
}

/// Graph handles for `s = [h_start, h_end, head, feat]`.
#[derive(Clone, Copy, Debug)]
pub struct SpanRep {
    pub h_start: NodeId,
    pub h_end: NodeId,
    pub head: NodeId,
    pub feat: Option<NodeId>,
    pub s: NodeId,
}

pub fn build_span_rep(
    g: &mut Graph,
    span: Span,
    states: NodeId,
    head: NodeId,
    feat: Option<NodeId>,
) -> Result<SpanRep> {
    let h_start = g.gather_rows(states, &[span.start])?;
    let h_end = g.gather_rows(states, &[span.end])?;
    let mut parts = vec![h_start, h_end, head];
    parts.extend(feat);
    let s = g.concat_cols(&parts)?;
    Ok(SpanRep {
        h_start,
        h_end,
        head,
        feat,
        s,
    })
}

/// Every candidate's `s` stacked as rows, `[n, |s|]`. `heads` holds one
/// head vector per candidate, `feats` one feature row per candidate.
pub fn build_span_reps(
    g: &mut Graph,
    spans: &[CandidateSpan],
    states: NodeId,
    heads: NodeId,
    feats: Option<NodeId>,
) -> Result<NodeId> {
    if spans.is_empty() {
        return Err(Error::Empty("build_span_reps"));
    }
    let starts: Vec<usize> = spans.iter().map(|c| c.start()).collect();
    let ends: Vec<usize> = spans.iter().map(|c| c.end()).collect();
    let h_start = g.gather_rows(states, &starts)?;
    let h_end = g.gather_rows(states, &ends)?;
    let mut parts = vec![h_start, h_end, heads];
    parts.extend(feats);
    g.concat_cols(&parts)
}
