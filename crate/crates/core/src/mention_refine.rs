//! Mention scoring, pruning, pointer-network refinement over every
//! candidate span, and gated fusion of the base and refined mention
//! representations.

use std::cmp::Ordering;

use ndarray::Array2;

use crate::corpus::CandidateSpan;
use crate::error::{Error, Result};
use crate::ffnn::Ffnn;
use crate::tensor_core::{Graph, Init, NodeId, ParamSpec, ParamStore};

/// Mention scores `W_m · FFNN_m(s)` for every row of `spans`, `[n, 1]`.
pub fn mention_score(g: &mut Graph, spans: NodeId, ffnn: &Ffnn) -> Result<NodeId> {
    ffnn.forward(g, spans)
}

/// Keeps the `⌈ratio · doc_len⌉` best-scoring spans, skipping any span that
/// crosses an already kept one. Ties go to the earlier `(start, end)`.
/// Returns indices into `spans`, in document order.
pub fn prune_mentions(spans: &[CandidateSpan], scores: &[f64], ratio: f64, doc_len: usize) -> Vec<usize> {
    assert!(ratio > 0.0 && ratio <= 1.0, "mention ratio must lie in (0, 1], got {ratio}");
    assert_eq!(spans.len(), scores.len(), "one score per span");
    // the small offset keeps e.g. 0.7·10 from rounding up to 8
    let budget = ((ratio * doc_len as f64) - 1e-9).ceil().max(0.0) as usize;

    let mut order: Vec<usize> = (0..spans.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(Ordering::Equal)
            .then_with(|| spans[a].span.cmp(&spans[b].span))
    });

    let mut kept: Vec<usize> = Vec::with_capacity(budget);
    for idx in order {
        if kept.len() >= budget {
            break;
        }
        let span = spans[idx].span;
        if kept.iter().all(|&k| !spans[k].span.crosses(&span)) {
            kept.push(idx);
        }
    }
    kept.sort_by_key(|&k| spans[k].span);
    kept
}

/// Graph handles for `W_1`, `W_2` (`[hidden, |s|]`) and `V` (`[1, hidden]`).
#[derive(Clone, Copy, Debug)]
pub struct PointerParams {
    pub w_span: NodeId,
    pub w_mention: NodeId,
    pub v: NodeId,
}

impl PointerParams {
    pub fn specs(span_width: usize, hidden: usize) -> Vec<ParamSpec> {
        vec![
            ParamSpec::new("pointer.w_span", vec![hidden, span_width], Init::Glorot),
            ParamSpec::new("pointer.w_mention", vec![hidden, span_width], Init::Glorot),
            ParamSpec::new("pointer.v", vec![1, hidden], Init::Glorot),
        ]
    }

    pub fn bind(g: &mut Graph, store: &ParamStore) -> Result<Self> {
        Ok(PointerParams {
            w_span: store.node(g, "pointer.w_span")?,
            w_mention: store.node(g, "pointer.w_mention")?,
            v: store.node(g, "pointer.v")?,
        })
    }
}

/// Pointer attention from each mention row of `mentions` (`[k, d]`) over
/// every row of `all_spans` (`[n, d]`):
///
/// `u_{i,t} = V · tanh(W_1 s_t + W_2 m_i)`, `α_i = softmax(u_i)`,
/// `m'_i = Σ_t α_{i,t} s_t`.
///
/// Returns `(α [k, n], m' [k, d])`.
pub fn pointer_refine(
    g: &mut Graph,
    mentions: NodeId,
    all_spans: NodeId,
    params: &PointerParams,
) -> Result<(NodeId, NodeId)> {
    let (n, d) = g.shape(all_spans);
    if n == 0 {
        return Err(Error::Empty("pointer_refine"));
    }
    let (k, dm) = g.shape(mentions);
    if dm != d || g.shape(params.w_mention).1 != d || g.shape(params.w_span).1 != d {
        return Err(Error::shape(
            "pointer_refine",
            format!(
                "mentions {:?}, spans {:?}, W_1 {:?}, W_2 {:?}",
                g.shape(mentions),
                g.shape(all_spans),
                g.shape(params.w_span),
                g.shape(params.w_mention)
            ),
        ));
    }
    let keys = g.matmul_t(all_spans, params.w_span)?;
    let queries = g.matmul_t(mentions, params.w_mention)?;
    let mut logits = Vec::with_capacity(k);
    for i in 0..k {
        let q = g.gather_rows(queries, &[i])?;
        let pre = g.add_row(keys, q)?;
        let act = g.tanh(pre)?;
        logits.push(g.matmul_t(params.v, act)?);
    }
    let logits = g.concat_rows(&logits)?;
    let alpha = g.softmax_rows(logits)?;
    let refined = g.matmul(alpha, all_spans)?;
    Ok((alpha, refined))
}

/// `f = sigmoid(W_f [m, m'])`, `m* = f ∘ m + (1 − f) ∘ m'`, row-wise.
/// Returns `(f, m*)`.
pub fn gate_fuse(g: &mut Graph, base: NodeId, refined: NodeId, w_gate: NodeId) -> Result<(NodeId, NodeId)> {
    if g.shape(base) != g.shape(refined) {
        return Err(Error::shape(
            "gate_fuse",
            format!("m {:?} vs m' {:?}", g.shape(base), g.shape(refined)),
        ));
    }
    let d = g.shape(base).1;
    if g.shape(w_gate) != (d, 2 * d) {
        return Err(Error::shape(
            "gate_fuse",
            format!("W_f {:?} for width {d}", g.shape(w_gate)),
        ));
    }
    let both = g.concat_cols(&[base, refined])?;
    let z = g.matmul_t(both, w_gate)?;
    let gate = g.sigmoid(z)?;
    let keep = g.mul(gate, base)?;
    let rest = g.one_minus(gate)?;
    let take = g.mul(rest, refined)?;
    let fused = g.add(keep, take)?;
    Ok((gate, fused))
}

pub fn gate_spec(span_width: usize) -> ParamSpec {
    ParamSpec::new("gate.w", vec![span_width, 2 * span_width], Init::Glorot)
}

/// Per-coordinate gate values, each strictly inside `(0, 1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GateVec(Vec<f64>);

impl GateVec {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(bad) = values.iter().find(|v| !(**v > 0.0 && **v < 1.0)) {
            return Err(Error::InvalidArgument(format!("gate value {bad} outside (0, 1)")));
        }
        Ok(GateVec(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// The `k` highest-weight spans, heaviest first; ties go to the earlier span.
pub fn top_attended_spans(alpha: &[f64], spans: &[CandidateSpan], k: usize) -> Vec<(CandidateSpan, f64)> {
    assert!(k >= 1, "k must be at least 1");
    let mut order: Vec<usize> = (0..alpha.len().min(spans.len())).collect();
    order.sort_by(|&a, &b| {
        alpha[b]
            .partial_cmp(&alpha[a])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    order.into_iter().take(k).map(|i| (spans[i], alpha[i])).collect()
}

/// Values of the refinement stage for one document, in mention order.
#[derive(Clone, Debug)]
pub struct MentionSet {
    pub mentions: Vec<CandidateSpan>,
    /// Mention scores `S^m`.
    pub score: Vec<f64>,
    /// Candidate spans the pointer attends over (all of them unless capped).
    pub attended: Vec<CandidateSpan>,
    /// One row per mention over `attended`.
    pub alpha: Array2<f64>,
    pub m: Array2<f64>,
    pub m_prime: Array2<f64>,
    pub m_star: Array2<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Span;
    use ndarray::array;

    fn cands(spans: &[(usize, usize)]) -> Vec<CandidateSpan> {
        spans
            .iter()
            .enumerate()
            .map(|(i, &s)| CandidateSpan {
                span: s.into(),
                span_index: i,
            })
            .collect()
    }

    #[test]
    fn keeps_ceil_ratio_times_length() {
        let spans = cands(&(0..20).map(|i| (i, i)).collect::<Vec<_>>());
        let scores: Vec<f64> = (0..20).map(|i| (i * 7 % 20) as f64).collect();
        let kept = prune_mentions(&spans, &scores, 0.4, 10);
        assert_eq!(kept.len(), 4);
        assert!(kept.windows(2).all(|w| spans[w[0]].span < spans[w[1]].span));
        assert_eq!(prune_mentions(&spans, &scores, 0.7, 10).len(), 7);
    }

    #[test]
    fn ties_prefer_earlier_spans() {
        let spans = cands(&[(0, 0), (1, 1), (2, 2)]);
        let kept = prune_mentions(&spans, &[1.0, 2.0, 2.0], 0.25, 4);
        assert_eq!(kept, vec![1]);
    }

    #[test]
    fn full_ratio_keeps_non_crossing() {
        let spans = cands(&[(0, 1), (1, 2), (2, 2), (0, 2)]);
        let kept = prune_mentions(&spans, &[3.0, 2.0, 1.0, 0.0], 1.0, 4);
        // (1,2) crosses (0,1)
        let kept: Vec<Span> = kept.iter().map(|&k| spans[k].span).collect();
        assert_eq!(kept, vec![Span::new(0, 1), Span::new(0, 2), Span::new(2, 2)]);
    }

    fn pointer_store(d: usize, hidden: usize, seed: u64) -> ParamStore {
        ParamStore::init(&PointerParams::specs(d, hidden), seed).unwrap()
    }

    #[test]
    fn single_span_gets_all_weight() {
        let store = pointer_store(3, 4, 1);
        let mut g = Graph::new();
        let p = PointerParams::bind(&mut g, &store).unwrap();
        let s = g.constant(array![[0.2, -0.4, 1.0]]).unwrap();
        let (alpha, refined) = pointer_refine(&mut g, s, s, &p).unwrap();
        assert_eq!(g.value(alpha), &array![[1.0]]);
        assert_eq!(g.value(refined), &array![[0.2, -0.4, 1.0]]);
    }

    #[test]
    fn zero_v_is_uniform() {
        let mut store = pointer_store(2, 3, 1);
        store.set("pointer.v", Array2::zeros((1, 3))).unwrap();
        let mut g = Graph::new();
        let p = PointerParams::bind(&mut g, &store).unwrap();
        let s = g.constant(array![[1.0, 2.0], [3.0, 0.0], [-1.0, 1.0], [0.0, 5.0]]).unwrap();
        let m = g.gather_rows(s, &[1]).unwrap();
        let (alpha, refined) = pointer_refine(&mut g, m, s, &p).unwrap();
        assert!(g.value(alpha).iter().all(|&a| (a - 0.25).abs() < 1e-15));
        let r = g.value(refined);
        assert!((r[[0, 0]] - 0.75).abs() < 1e-12);
        assert!((r[[0, 1]] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn scalar_pointer_matches_hand_evaluation() {
        let mut store = pointer_store(1, 1, 0);
        store.set("pointer.w_span", array![[0.5]]).unwrap();
        store.set("pointer.w_mention", array![[-1.0]]).unwrap();
        store.set("pointer.v", array![[2.0]]).unwrap();
        let mut g = Graph::new();
        let p = PointerParams::bind(&mut g, &store).unwrap();
        let s = g.constant(array![[1.0], [3.0]]).unwrap();
        let m = g.constant(array![[0.25]]).unwrap();
        let (alpha, refined) = pointer_refine(&mut g, m, s, &p).unwrap();
        // u_t = 2 tanh(0.5 s_t − 0.25)
        let u1 = 2.0 * (0.5f64 - 0.25).tanh();
        let u2 = 2.0 * (1.5f64 - 0.25).tanh();
        let a1 = u1.exp() / (u1.exp() + u2.exp());
        let a = g.value(alpha);
        assert!((a[[0, 0]] - a1).abs() < 1e-12);
        assert!((a[[0, 1]] - (1.0 - a1)).abs() < 1e-12);
        assert!((g.value(refined)[[0, 0]] - (a1 * 1.0 + (1.0 - a1) * 3.0)).abs() < 1e-12);
    }

    #[test]
    fn pointer_errors() {
        let store = pointer_store(3, 2, 0);
        let mut g = Graph::new();
        let p = PointerParams::bind(&mut g, &store).unwrap();
        let empty = g.constant(Array2::zeros((0, 3))).unwrap();
        let m = g.row(&[1.0, 2.0, 3.0]).unwrap();
        assert!(matches!(pointer_refine(&mut g, m, empty, &p), Err(Error::Empty(_))));
        let narrow = g.row(&[1.0, 2.0]).unwrap();
        assert!(pointer_refine(&mut g, narrow, narrow, &p).is_err());
    }

    #[test]
    fn refine_and_fuse_gradients() {
        use crate::tensor_core::grad_check;
        let (k, n, d, h) = (2, 4, 3, 5);
        let rows = |g: &mut Graph, leaf: NodeId, offset: usize, count: usize, width: usize| -> Result<NodeId> {
            let parts = (0..count)
                .map(|r| g.slice_cols(leaf, offset + r * width, width))
                .collect::<Result<Vec<_>>>()?;
            g.concat_rows(&parts)
        };
        let sizes = [k * d, n * d, h * d, h * d, h, d * 2 * d];
        let total: usize = sizes.iter().sum();
        let point: Vec<f64> = (0..total).map(|i| ((i * 37 % 23) as f64 / 11.0 - 1.0) * 0.8).collect();
        let report = grad_check(
            |g, leaf| {
                let mut off = 0;
                let mentions = rows(g, leaf, off, k, d)?;
                off += sizes[0];
                let spans = rows(g, leaf, off, n, d)?;
                off += sizes[1];
                let w_span = rows(g, leaf, off, h, d)?;
                off += sizes[2];
                let w_mention = rows(g, leaf, off, h, d)?;
                off += sizes[3];
                let v = rows(g, leaf, off, 1, h)?;
                off += sizes[4];
                let w_gate = rows(g, leaf, off, d, 2 * d)?;
                let p = PointerParams { w_span, w_mention, v };
                let (_, refined) = pointer_refine(g, mentions, spans, &p)?;
                let (_, fused) = gate_fuse(g, mentions, refined, w_gate)?;
                let t = g.tanh(fused)?;
                g.sum(t)
            },
            &point,
            1e-5,
            1e-4,
        )
        .unwrap();
        assert!(report.passed(), "{report:?}");
    }

    #[test]
    fn zero_gate_averages() {
        let mut g = Graph::new();
        let m = g.row(&[4.0, -2.0]).unwrap();
        let mp = g.row(&[0.0, 6.0]).unwrap();
        let w = g.constant(Array2::zeros((2, 4))).unwrap();
        let (f, fused) = gate_fuse(&mut g, m, mp, w).unwrap();
        assert_eq!(g.value(f), &array![[0.5, 0.5]]);
        assert_eq!(g.value(fused), &array![[2.0, 2.0]]);
    }

    #[test]
    fn saturated_gate_keeps_base() {
        let mut g = Graph::new();
        let m = g.row(&[1.0, 1.0]).unwrap();
        let mp = g.row(&[-0.5, 0.25]).unwrap();
        let w = g.constant(Array2::from_elem((2, 4), 50.0)).unwrap();
        let (_, fused) = gate_fuse(&mut g, m, mp, w).unwrap();
        for v in g.value(fused) {
            assert!((v - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn quarter_gate() {
        // f = 0.25 needs logit ln(1/3); with m = [4], m' = [0]: W_f = [ln(1/3)/4, 0]
        let mut g = Graph::new();
        let m = g.row(&[4.0]).unwrap();
        let mp = g.row(&[0.0]).unwrap();
        let w = g.constant(array![[(1.0f64 / 3.0).ln() / 4.0, 0.0]]).unwrap();
        let (f, fused) = gate_fuse(&mut g, m, mp, w).unwrap();
        assert!((g.scalar(f) - 0.25).abs() < 1e-12);
        assert!((g.scalar(fused) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gate_width_mismatch() {
        let mut g = Graph::new();
        let m = g.row(&[4.0, 1.0]).unwrap();
        let mp = g.row(&[0.0]).unwrap();
        let w = g.constant(Array2::zeros((2, 4))).unwrap();
        assert!(gate_fuse(&mut g, m, mp, w).is_err());
    }

    #[test]
    fn gate_vec_range() {
        assert!(GateVec::new(vec![0.1, 0.9]).is_ok());
        assert!(GateVec::new(vec![0.0]).is_err());
        assert!(GateVec::new(vec![1.0]).is_err());
    }

    #[test]
    fn top_attended() {
        let spans = cands(&[(0, 0), (1, 1), (2, 2), (3, 3)]);
        let top = top_attended_spans(&[0.5, 0.3, 0.1, 0.1], &spans, 3);
        let idx: Vec<usize> = top.iter().map(|(c, _)| c.span_index).collect();
        assert_eq!(idx, vec![0, 1, 2]);
        assert_eq!(top_attended_spans(&[0.5, 0.3, 0.1, 0.1], &spans, 9).len(), 4);
        let uniform = top_attended_spans(&[0.25; 4], &spans, 2);
        assert_eq!(uniform.iter().map(|(c, _)| c.span_index).collect::<Vec<_>>(), vec![0, 1]);
    }

    #[test]
    fn mention_score_examples() {
        let specs = Ffnn::specs("ms", 3, 3, 2);
        let zero: Vec<ParamSpec> = specs.iter().cloned().map(|s| ParamSpec { init: Init::Zeros, ..s }).collect();
        let store = ParamStore::init(&zero, 0).unwrap();
        let mut g = Graph::new();
        let ffnn = Ffnn::bind(&mut g, &store, "ms", 2).unwrap();
        let s = g.row(&[0.3, 1.0, -2.0]).unwrap();
        let out = mention_score(&mut g, s, &ffnn).unwrap();
        assert_eq!(g.scalar(out), 0.0);

        // identity hidden layers, W_m = e_1
        let mut store = ParamStore::init(&specs, 0).unwrap();
        store.set("ms.l0.weight", Array2::eye(3)).unwrap();
        store.set("ms.l1.weight", Array2::eye(3)).unwrap();
        store.set("ms.out", array![[1.0, 0.0, 0.0]]).unwrap();
        let mut g = Graph::new();
        let ffnn = Ffnn::bind(&mut g, &store, "ms", 2).unwrap();
        let s = g.row(&[0.75, 1.0, 2.0]).unwrap();
        let out = mention_score(&mut g, s, &ffnn).unwrap();
        assert_eq!(g.scalar(out), 0.75);

        let bad = g.row(&[1.0, 2.0]).unwrap();
        assert!(mention_score(&mut g, bad, &ffnn).is_err());
    }

    #[test]
    fn mention_score_matches_matrix_chain() {
        let specs = Ffnn::specs("ms", 4, 5, 2);
        let store = ParamStore::init(&specs, 23).unwrap();
        let x = [0.3, -1.2, 0.8, 2.0];
        let mut g = Graph::new();
        let ffnn = Ffnn::bind(&mut g, &store, "ms", 2).unwrap();
        let s = g.row(&x).unwrap();
        let out = mention_score(&mut g, s, &ffnn).unwrap();

        // independent loop evaluation
        let layer = |input: &[f64], w: &Array2<f64>, b: &Array2<f64>| -> Vec<f64> {
            (0..w.nrows())
                .map(|r| {
                    let z: f64 = (0..w.ncols()).map(|c| w[[r, c]] * input[c]).sum::<f64>() + b[[0, r]];
                    z.max(0.0)
                })
                .collect()
        };
        let h0 = layer(&x, store.get("ms.l0.weight").unwrap(), store.get("ms.l0.bias").unwrap());
        let h1 = layer(&h0, store.get("ms.l1.weight").unwrap(), store.get("ms.l1.bias").unwrap());
        let w_out = store.get("ms.out").unwrap();
        let expected: f64 = h1.iter().enumerate().map(|(c, h)| w_out[[0, c]] * h).sum();
        assert!((g.scalar(out) - expected).abs() < 1e-12);
    }
}
