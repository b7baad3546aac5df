use crate::error::{Error, Result};
use crate::tensor_core::{sum_f64, Graph, NodeId};

use super::gold::GoldAntecedents;
use super::TrainConfig;

const NORMALIZATION_TOL: f64 = 1e-6;

fn check_rows(rows: &[Vec<f64>], gold: &GoldAntecedents) -> Result<()> {
    if rows.len() != gold.sets.len() {
        return Err(Error::shape(
            "loss",
            format!("{} rows, {} gold sets", rows.len(), gold.sets.len()),
        ));
    }
    for (i, row) in rows.iter().enumerate() {
        let total = sum_f64(row.iter().copied());
        if row.iter().any(|p| !(0.0..=1.0).contains(p)) || (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::InvalidArgument(format!(
                "probability row {i} is not normalized (sum {total})"
            )));
        }
    }
    Ok(())
}

/// Gold columns of each row, with the candidates taken to be every column
/// after the dummy.
fn gold_columns(gold: &GoldAntecedents, i: usize, row_len: usize) -> Vec<usize> {
    let candidates: Vec<usize> = (0..row_len - 1).collect();
    gold.columns(i, &candidates)
}

/// `Σ_i −log P_gold,i`, the marginal log-likelihood objective. Row `i`
/// holds `P(ε)` followed by one probability per candidate, and
/// `Antecedent::Mention(c)` in `gold.sets[i]` refers to column `c + 1`.
pub fn baseline_mll(rows: &[Vec<f64>], gold: &GoldAntecedents) -> Result<f64> {
    check_rows(rows, gold)?;
    let mut total = 0.0;
    for (i, row) in rows.iter().enumerate() {
        let p_gold = sum_f64(gold_columns(gold, i, row.len()).into_iter().map(|c| row[c]));
        total += -p_gold.ln();
    }
    Ok(total)
}

/// `Σ_i [−log P_gold,i + w · log max(1 − P_gold,i, ε_num)]`, the second
/// term only when enabled and the row has non-gold entries.
pub fn loss(rows: &[Vec<f64>], gold: &GoldAntecedents, config: &TrainConfig) -> Result<f64> {
    check_rows(rows, gold)?;
    let mut total = 0.0;
    for (i, row) in rows.iter().enumerate() {
        let cols = gold_columns(gold, i, row.len());
        let p_gold = sum_f64(cols.iter().map(|&c| row[c]));
        total += -p_gold.ln();
        if config.neg_term_enabled && cols.len() < row.len() {
            total += config.neg_term_weight * (1.0 - p_gold).max(config.prob_floor).ln();
        }
    }
    Ok(total)
}

/// Graph form of [`loss`] over unnormalized score rows (`[1, 1 + c_i]`,
/// dummy first), computed in log space. `gold_cols[i]` lists the gold
/// columns of row `i`. Returns `None` when no row contributes.
pub fn loss_node(
    g: &mut Graph,
    score_rows: &[NodeId],
    gold_cols: &[Vec<usize>],
    config: &TrainConfig,
) -> Result<Option<NodeId>> {
    let mut terms = Vec::with_capacity(score_rows.len());
    for (&row, cols) in score_rows.iter().zip(gold_cols) {
        let width = g.shape(row).1;
        if width == 1 {
            // only the dummy: P_gold = 1 and no non-gold entries
            continue;
        }
        let log_p = g.log_softmax_rows(row)?;
        let gold = g.gather_elems(log_p, cols)?;
        let log_gold = g.log_sum_exp(gold)?;
        let mut term = g.affine(log_gold, -1.0, 0.0)?;
        if config.neg_term_enabled && cols.len() < width {
            let others: Vec<usize> = (0..width).filter(|c| !cols.contains(c)).collect();
            let rest = g.gather_elems(log_p, &others)?;
            let log_rest = g.log_sum_exp(rest)?;
            let log_rest = g.clamp_min(log_rest, config.prob_floor.ln())?;
            let weighted = g.affine(log_rest, config.neg_term_weight, 0.0)?;
            term = g.add(term, weighted)?;
        }
        terms.push(term);
    }
    if terms.is_empty() {
        return Ok(None);
    }
    let stacked = g.concat_rows(&terms)?;
    Ok(Some(g.sum(stacked)?))
}

/// Graph form of [`baseline_mll`] over unnormalized score rows.
pub fn baseline_mll_node(g: &mut Graph, score_rows: &[NodeId], gold_cols: &[Vec<usize>]) -> Result<Option<NodeId>> {
    let mut terms = Vec::new();
    for (&row, cols) in score_rows.iter().zip(gold_cols) {
        if g.shape(row).1 == 1 {
            continue;
        }
        let log_p = g.log_softmax_rows(row)?;
        let gold = g.gather_elems(log_p, cols)?;
        let log_gold = g.log_sum_exp(gold)?;
        terms.push(g.affine(log_gold, -1.0, 0.0)?);
    }
    if terms.is_empty() {
        return Ok(None);
    }
    let stacked = g.concat_rows(&terms)?;
    Ok(Some(g.sum(stacked)?))
}
