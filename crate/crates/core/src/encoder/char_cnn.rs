//! Optional character CNN: 8-dim character embeddings, convolutions of
//! widths 3, 4 and 5 with 50 filters each, ReLU, max-pooled over positions.

use std::collections::BTreeMap;

use crate::error::Result;
use crate::tensor_core::{Graph, Init, NodeId, ParamSpec, ParamStore};

pub const CHAR_DIM: usize = 8;
pub const FILTERS: usize = 50;
pub const WINDOWS: [usize; 3] = [3, 4, 5];
/// Characters hash into this many rows; row 0 is padding.
pub const CHAR_BUCKETS: usize = 128;

pub fn output_width() -> usize {
    FILTERS * WINDOWS.len()
}

pub fn specs() -> Vec<ParamSpec> {
    let mut specs = vec![ParamSpec::new("char.embed", vec![CHAR_BUCKETS, CHAR_DIM], Init::Glorot)];
    for w in WINDOWS {
        specs.push(ParamSpec::new(format!("char.conv{w}.weight"), vec![FILTERS, w * CHAR_DIM], Init::Glorot));
        specs.push(ParamSpec::new(format!("char.conv{w}.bias"), vec![FILTERS], Init::Zeros));
    }
    specs
}

fn char_ids(token: &str) -> Vec<usize> {
    let mut ids: Vec<usize> = token
        .chars()
        .map(|c| 1 + (c as usize) % (CHAR_BUCKETS - 1))
        .collect();
    let min_len = *WINDOWS.iter().max().expect("windows");
    if ids.len() < min_len {
        ids.resize(min_len, 0);
    }
    ids
}

/// `[tokens, 150]` character features.
pub fn char_features(g: &mut Graph, store: &ParamStore, tokens: &[String]) -> Result<NodeId> {
    let embed = store.node(g, "char.embed")?;
    let mut filters = Vec::new();
    for w in WINDOWS {
        let weight = store.node(g, &format!("char.conv{w}.weight"))?;
        let bias = store.node(g, &format!("char.conv{w}.bias"))?;
        filters.push((w, weight, bias));
    }

    let mut unique: BTreeMap<&str, usize> = BTreeMap::new();
    for t in tokens {
        let next = unique.len();
        unique.entry(t.as_str()).or_insert(next);
    }
    let mut rows = vec![None; unique.len()];
    for (&token, &slot) in &unique {
        let chars = g.gather_rows(embed, &char_ids(token))?;
        let len = g.shape(chars).0;
        let mut pooled = Vec::with_capacity(filters.len());
        for &(w, weight, bias) in &filters {
            let positions = len - w + 1;
            let shifted = (0..w)
                .map(|o| g.gather_rows(chars, &(o..o + positions).collect::<Vec<_>>()))
                .collect::<Result<Vec<_>>>()?;
            let windows = g.concat_cols(&shifted)?;
            let conv = g.matmul_t(windows, weight)?;
            let conv = g.add_row(conv, bias)?;
            let act = g.relu(conv)?;
            pooled.push(g.max_rows(act)?);
        }
        rows[slot] = Some(g.concat_cols(&pooled)?);
    }
    let rows: Vec<NodeId> = rows.into_iter().map(|r| r.expect("every slot filled")).collect();
    let table = g.concat_rows(&rows)?;
    let index: Vec<usize> = tokens.iter().map(|t| unique[t.as_str()]).collect();
    g.gather_rows(table, &index)
}
