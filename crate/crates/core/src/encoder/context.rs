use crate::error::{Error, Result};
use crate::tensor_core::{Graph, LstmParams, NodeId};

/// Bidirectional LSTM over the rows of `tokens` (`[T, E]`).
///
/// Row `t` of the result is `[forward_t, backward_t]`, where the forward
/// state has read tokens `0..=t` and the backward state tokens `t..T`.
pub fn encode_context(
    g: &mut Graph,
    tokens: NodeId,
    forward: &LstmParams,
    backward: &LstmParams,
) -> Result<NodeId> {
    let steps = g.shape(tokens).0;
    if steps == 0 {
        return Err(Error::Empty("encode_context"));
    }
    let fwd = run_direction(g, tokens, forward, (0..steps).collect())?;
    let bwd = run_direction(g, tokens, backward, (0..steps).rev().collect())?;
    g.concat_cols(&[fwd, bwd])
}

/// Encodes each sequence independently.
pub fn encode_batch(
    g: &mut Graph,
    sequences: &[NodeId],
    forward: &LstmParams,
    backward: &LstmParams,
) -> Result<Vec<NodeId>> {
    sequences
        .iter()
        .map(|&s| encode_context(g, s, forward, backward))
        .collect()
}

/// States in position order, `[T, H]`.
fn run_direction(g: &mut Graph, tokens: NodeId, params: &LstmParams, order: Vec<usize>) -> Result<NodeId> {
    let projected = params.project_inputs(g, tokens)?;
    let zeros = vec![0.0; params.hidden];
    let mut h = g.row(&zeros)?;
    let mut c = g.row(&zeros)?;
    let mut states = vec![None; order.len()];
    for &t in &order {
        let x = g.gather_rows(projected, &[t])?;
        (h, c) = params.step_projected(g, x, h, c)?;
        states[t] = Some(h);
    }
    let states: Vec<NodeId> = states.into_iter().map(|s| s.expect("every step visited")).collect();
    g.concat_rows(&states)
}
