//! MUC, B³ and CEAF_φ4 clustering metrics and the CoNLL average.
//!
//! Each metric first produces additive [`MetricCounts`], so corpus scores
//! are micro-averages over documents. A ratio with a zero denominator is 0,
//! except that when both denominators vanish precision and recall are 1.

mod hungarian;

use std::collections::HashMap;
use std::hash::Hash;

use crate::error::{Error, Result};

pub use hungarian::max_weight_assignment;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    pub fn new(precision: f64, recall: f64) -> Self {
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Prf {
            precision,
            recall,
            f1,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MetricCounts {
    pub p_num: f64,
    pub p_den: f64,
    pub r_num: f64,
    pub r_den: f64,
}

impl MetricCounts {
    pub fn prf(&self) -> Prf {
        if self.p_den == 0.0 && self.r_den == 0.0 {
            return Prf::new(1.0, 1.0);
        }
        let ratio = |num: f64, den: f64| if den == 0.0 { 0.0 } else { num / den };
        Prf::new(ratio(self.p_num, self.p_den), ratio(self.r_num, self.r_den))
    }
}

impl std::ops::AddAssign for MetricCounts {
    fn add_assign(&mut self, o: Self) {
        self.p_num += o.p_num;
        self.p_den += o.p_den;
        self.r_num += o.r_num;
        self.r_den += o.r_den;
    }
}

/// Maps each mention to its cluster index; rejects a mention listed twice.
fn membership<T: Eq + Hash + Clone>(clusters: &[Vec<T>], side: &str) -> Result<HashMap<T, usize>> {
    let mut map = HashMap::new();
    for (k, cluster) in clusters.iter().enumerate() {
        for m in cluster {
            if map.insert(m.clone(), k).is_some() {
                return Err(Error::InvalidArgument(format!(
                    "{side} clusters overlap: a mention appears more than once"
                )));
            }
        }
    }
    Ok(map)
}

/// `Σ (|S| − |partition of S by other|)` and `Σ (|S| − 1)` over `key`.
fn muc_side<T: Eq + Hash + Clone>(key: &[Vec<T>], other: &HashMap<T, usize>) -> (f64, f64) {
    let (mut num, mut den) = (0.0, 0.0);
    for cluster in key {
        if cluster.is_empty() {
            continue;
        }
        let mut parts: Vec<Option<usize>> = Vec::new();
        let mut unmatched = 0;
        for m in cluster {
            match other.get(m) {
                Some(&k) if !parts.contains(&Some(k)) => parts.push(Some(k)),
                Some(_) => {}
                None => unmatched += 1,
            }
        }
        let partitions = parts.len() + unmatched;
        num += (cluster.len() - partitions) as f64;
        den += (cluster.len() - 1) as f64;
    }
    (num, den)
}

pub fn muc_counts<T: Eq + Hash + Clone>(gold: &[Vec<T>], pred: &[Vec<T>]) -> Result<MetricCounts> {
    let gold_of = membership(gold, "gold")?;
    let pred_of = membership(pred, "predicted")?;
    let (r_num, r_den) = muc_side(gold, &pred_of);
    let (p_num, p_den) = muc_side(pred, &gold_of);
    Ok(MetricCounts {
        p_num,
        p_den,
        r_num,
        r_den,
    })
}

pub fn muc<T: Eq + Hash + Clone>(gold: &[Vec<T>], pred: &[Vec<T>]) -> Result<Prf> {
    Ok(muc_counts(gold, pred)?.prf())
}

/// Sum over mentions of `key` of `|K(m) ∩ O(m)| / |K(m)|`, and the mention
/// count. Mentions missing from `other` are singletons there.
fn b_cubed_side<T: Eq + Hash + Clone>(key: &[Vec<T>], other: &HashMap<T, usize>) -> (f64, f64) {
    let (mut num, mut den) = (0.0, 0.0);
    for cluster in key {
        for m in cluster {
            let overlap = match other.get(m) {
                Some(&k) => cluster.iter().filter(|x| other.get(*x) == Some(&k)).count(),
                None => 1,
            };
            num += overlap as f64 / cluster.len() as f64;
            den += 1.0;
        }
    }
    (num, den)
}

pub fn b_cubed_counts<T: Eq + Hash + Clone>(gold: &[Vec<T>], pred: &[Vec<T>]) -> Result<MetricCounts> {
    let gold_of = membership(gold, "gold")?;
    let pred_of = membership(pred, "predicted")?;
    let (r_num, r_den) = b_cubed_side(gold, &pred_of);
    let (p_num, p_den) = b_cubed_side(pred, &gold_of);
    Ok(MetricCounts {
        p_num,
        p_den,
        r_num,
        r_den,
    })
}

pub fn b_cubed<T: Eq + Hash + Clone>(gold: &[Vec<T>], pred: &[Vec<T>]) -> Result<Prf> {
    Ok(b_cubed_counts(gold, pred)?.prf())
}

/// `φ4(K, R) = 2|K ∩ R| / (|K| + |R|)`
pub fn phi4<T: Eq + Hash>(a: &[T], b: &[T]) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 0.0;
    }
    let common = a.iter().filter(|x| b.contains(x)).count();
    2.0 * common as f64 / (a.len() + b.len()) as f64
}

pub fn ceaf_phi4_counts<T: Eq + Hash + Clone>(gold: &[Vec<T>], pred: &[Vec<T>]) -> Result<MetricCounts> {
    membership(gold, "gold")?;
    membership(pred, "predicted")?;
    let sims: Vec<Vec<f64>> = gold
        .iter()
        .map(|k| pred.iter().map(|r| phi4(k, r)).collect())
        .collect();
    let (total, _) = max_weight_assignment(&sims);
    Ok(MetricCounts {
        p_num: total,
        p_den: pred.len() as f64,
        r_num: total,
        r_den: gold.len() as f64,
    })
}

pub fn ceaf_phi4<T: Eq + Hash + Clone>(gold: &[Vec<T>], pred: &[Vec<T>]) -> Result<Prf> {
    Ok(ceaf_phi4_counts(gold, pred)?.prf())
}

/// Arithmetic mean of the three F1 scores.
pub fn conll_avg(f1_muc: f64, f1_b_cubed: f64, f1_ceaf: f64) -> f64 {
    (f1_muc + f1_b_cubed + f1_ceaf) / 3.0
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConllReport {
    pub muc: Prf,
    pub b_cubed: Prf,
    pub ceaf_phi4: Prf,
    pub average_f1: f64,
}

/// Accumulates per-document counts into corpus-level scores.
#[derive(Clone, Debug, Default)]
pub struct CorpusScorer {
    muc: MetricCounts,
    b_cubed: MetricCounts,
    ceaf: MetricCounts,
}

impl CorpusScorer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add<T: Eq + Hash + Clone>(&mut self, gold: &[Vec<T>], pred: &[Vec<T>]) -> Result<()> {
        self.muc += muc_counts(gold, pred)?;
        self.b_cubed += b_cubed_counts(gold, pred)?;
        self.ceaf += ceaf_phi4_counts(gold, pred)?;
        Ok(())
    }

    pub fn report(&self) -> ConllReport {
        let (muc, b_cubed, ceaf_phi4) = (self.muc.prf(), self.b_cubed.prf(), self.ceaf.prf());
        ConllReport {
            muc,
            b_cubed,
            ceaf_phi4,
            average_f1: conll_avg(muc.f1, b_cubed.f1, ceaf_phi4.f1),
        }
    }
}
