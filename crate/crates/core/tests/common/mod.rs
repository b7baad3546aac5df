//! Shared fixtures and brute-force metric oracles for the integration tests.

#![allow(dead_code)]

pub mod props;

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;

pub type Clusters = Vec<Vec<u32>>;

/// Groups mention ids by label; unlabeled mentions are left out.
pub fn clusters_from_labels(labels: &[Option<u8>]) -> Clusters {
    let mut groups: BTreeMap<u8, Vec<u32>> = BTreeMap::new();
    for (m, label) in labels.iter().enumerate() {
        if let Some(l) = label {
            groups.entry(*l).or_default().push(m as u32);
        }
    }
    groups.into_values().collect()
}

/// A clustering over mention ids `0..n` (`n ≤ max_mentions`) with at most
/// `max_clusters` clusters, singletons allowed.
pub fn clustering(max_mentions: usize, max_clusters: u8) -> impl Strategy<Value = Clusters> {
    prop::collection::vec(prop::option::weighted(0.8, 0..max_clusters), 0..=max_mentions)
        .prop_map(|labels| clusters_from_labels(&labels))
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Precision and recall with the shared convention: an empty denominator
/// gives 0 unless both are empty, which gives 1.
fn pr(p_num: f64, p_den: f64, r_num: f64, r_den: f64) -> (f64, f64) {
    if p_den == 0.0 && r_den == 0.0 {
        (1.0, 1.0)
    } else {
        (ratio(p_num, p_den), ratio(r_num, r_den))
    }
}

/// Connected components of `cluster` when two mentions are linked iff
/// `other` puts them in the same cluster.
fn components(cluster: &[u32], other: &Clusters) -> usize {
    let n = cluster.len();
    let same = |a: u32, b: u32| other.iter().any(|c| c.contains(&a) && c.contains(&b));
    let mut seen = vec![false; n];
    let mut count = 0;
    for s in 0..n {
        if seen[s] {
            continue;
        }
        count += 1;
        let mut stack = vec![s];
        seen[s] = true;
        while let Some(u) = stack.pop() {
            for v in 0..n {
                if !seen[v] && same(cluster[u], cluster[v]) {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
    }
    count
}

/// MUC by link-partition counting.
pub fn muc_oracle(gold: &Clusters, pred: &Clusters) -> (f64, f64) {
    let side = |key: &Clusters, other: &Clusters| {
        key.iter().fold((0.0, 0.0), |(num, den), k| {
            (num + (k.len() - components(k, other)) as f64, den + (k.len() - 1) as f64)
        })
    };
    let (r_num, r_den) = side(gold, pred);
    let (p_num, p_den) = side(pred, gold);
    pr(p_num, p_den, r_num, r_den)
}

/// B³ by per-mention overlap; a mention absent from the other side is a
/// singleton there.
pub fn b_cubed_oracle(gold: &Clusters, pred: &Clusters) -> (f64, f64) {
    let side = |key: &Clusters, other: &Clusters| {
        let mut num = 0.0;
        let mut den = 0.0;
        for k in key {
            let k_set: BTreeSet<u32> = k.iter().copied().collect();
            for m in k {
                let o_set: BTreeSet<u32> = other
                    .iter()
                    .find(|c| c.contains(m))
                    .map(|c| c.iter().copied().collect())
                    .unwrap_or_else(|| [*m].into());
                num += k_set.intersection(&o_set).count() as f64 / k_set.len() as f64;
                den += 1.0;
            }
        }
        (num, den)
    };
    let (r_num, r_den) = side(gold, pred);
    let (p_num, p_den) = side(pred, gold);
    pr(p_num, p_den, r_num, r_den)
}

pub fn phi4_oracle(a: &[u32], b: &[u32]) -> f64 {
    let common = a.iter().filter(|x| b.contains(x)).count();
    2.0 * common as f64 / (a.len() + b.len()) as f64
}

/// Best total similarity over every one-to-one partial alignment.
pub fn best_alignment(sims: &[Vec<f64>]) -> f64 {
    fn go(row: usize, sims: &[Vec<f64>], used: &mut Vec<bool>) -> f64 {
        if row == sims.len() {
            return 0.0;
        }
        let mut best = go(row + 1, sims, used);
        for c in 0..used.len() {
            if !used[c] {
                used[c] = true;
                best = best.max(sims[row][c] + go(row + 1, sims, used));
                used[c] = false;
            }
        }
        best
    }
    let cols = sims.first().map_or(0, Vec::len);
    go(0, sims, &mut vec![false; cols])
}

/// CEAF_φ4 by enumerating alignments.
pub fn ceaf_oracle(gold: &Clusters, pred: &Clusters) -> (f64, f64) {
    let sims: Vec<Vec<f64>> = gold
        .iter()
        .map(|k| pred.iter().map(|r| phi4_oracle(k, r)).collect())
        .collect();
    let total = best_alignment(&sims);
    pr(total, pred.len() as f64, total, gold.len() as f64)
}
