use std::collections::HashMap;

use crate::corpus::{Document, Span};

/// One member of a gold antecedent set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Antecedent {
    Dummy,
    /// Position of a preceding mention.
    Mention(usize),
}

/// `GOLD(i)` for every mention, never empty.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GoldAntecedents {
    pub sets: Vec<Vec<Antecedent>>,
}

impl GoldAntecedents {
    /// Column indices of `GOLD(i)` in a score row laid out as
    /// `[ε, candidates...]`.
    pub fn columns(&self, i: usize, candidates: &[usize]) -> Vec<usize> {
        self.sets[i]
            .iter()
            .map(|a| match a {
                Antecedent::Dummy => 0,
                Antecedent::Mention(j) => {
                    1 + candidates
                        .iter()
                        .position(|c| c == j)
                        .expect("gold antecedents are drawn from the candidates")
                }
            })
            .collect()
    }
}

/// Preceding gold-cluster mates of each mention among its candidate
/// antecedents (the `max_antecedents` nearest preceding mentions), matched
/// on exact boundaries. `{ε}` when there are none.
pub fn gold_antecedent_sets(doc: &Document, mentions: &[Span], max_antecedents: usize) -> GoldAntecedents {
    let cluster_of: HashMap<Span, usize> = doc
        .gold_clusters
        .iter()
        .enumerate()
        .flat_map(|(k, c)| c.iter().map(move |&s| (s, k)))
        .collect();
    let sets = mentions
        .iter()
        .enumerate()
        .map(|(i, span)| {
            let mates: Vec<Antecedent> = match cluster_of.get(span) {
                Some(&k) => (i.saturating_sub(max_antecedents)..i)
                    .filter(|&j| cluster_of.get(&mentions[j]) == Some(&k))
                    .map(Antecedent::Mention)
                    .collect(),
                None => Vec::new(),
            };
            if mates.is_empty() {
                vec![Antecedent::Dummy]
            } else {
                mates
            }
        })
        .collect();
    GoldAntecedents { sets }
}
