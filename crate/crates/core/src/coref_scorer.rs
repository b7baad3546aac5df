//! Pairwise features, antecedent scoring on fused mention representations,
//! antecedent distributions with a dummy, and greedy cluster decoding.

use crate::corpus::{CandidateSpan, Document, Span, NUM_GENRES};
use crate::error::{Error, Result};
use crate::ffnn::Ffnn;
use crate::tensor_core::{softmax, Graph, Init, NodeId, ParamSpec, ParamStore};

pub const DISTANCE_BUCKETS: usize = 9;

/// How the distance between two mentions is measured.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DistanceMode {
    /// Difference of positions in mention order.
    #[default]
    Mention,
    /// Difference of start tokens.
    Token,
}

/// Buckets `[1] [2] [3] [4] [5–7] [8–15] [16–31] [32–63] [64+]`.
/// Distance 0 (token mode, shared start) falls in the first bucket.
pub fn distance_bucket(distance: usize) -> usize {
    match distance {
        0..=4 => distance.saturating_sub(1),
        5..=7 => 4,
        8..=15 => 5,
        16..=31 => 6,
        32..=63 => 7,
        _ => 8,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PairFeatures {
    pub distance_bucket: usize,
    pub same_speaker: bool,
    pub genre: usize,
}

impl PairFeatures {
    /// `[distance one-hot (9), same_speaker, genre one-hot (7)]`
    pub fn to_vector(&self) -> Vec<f64> {
        let mut v = vec![0.0; DISTANCE_BUCKETS + 1 + NUM_GENRES];
        v[self.distance_bucket] = 1.0;
        v[DISTANCE_BUCKETS] = f64::from(u8::from(self.same_speaker));
        v[DISTANCE_BUCKETS + 1 + self.genre] = 1.0;
        v
    }
}

/// Features of mention `i` against a strictly preceding mention `j`,
/// both given as positions in `mentions`.
pub fn pair_features(
    i: usize,
    j: usize,
    mentions: &[CandidateSpan],
    doc: &Document,
    mode: DistanceMode,
) -> Result<PairFeatures> {
    if j >= i || i >= mentions.len() {
        return Err(Error::InvalidArgument(format!(
            "antecedent {j} does not precede mention {i} of {}",
            mentions.len()
        )));
    }
    let (si, sj) = (mentions[i].span, mentions[j].span);
    let distance = match mode {
        DistanceMode::Mention => i - j,
        DistanceMode::Token => si.start.saturating_sub(sj.start),
    };
    Ok(PairFeatures {
        distance_bucket: distance_bucket(distance),
        same_speaker: doc.speaker_of(si) == doc.speaker_of(sj),
        genre: doc.genre_id,
    })
}

pub fn feature_specs(width: usize) -> Vec<ParamSpec> {
    vec![
        ParamSpec::new("phi.distance", vec![DISTANCE_BUCKETS, width], Init::Glorot),
        ParamSpec::new("phi.speaker", vec![2, width], Init::Glorot),
        ParamSpec::new("phi.genre", vec![NUM_GENRES, width], Init::Glorot),
    ]
}

/// Learned embeddings of each pair's features, `[pairs, 3 · width]`.
pub fn embed_pair_features(g: &mut Graph, store: &ParamStore, feats: &[PairFeatures]) -> Result<NodeId> {
    let dist = store.node(g, "phi.distance")?;
    let speaker = store.node(g, "phi.speaker")?;
    let genre = store.node(g, "phi.genre")?;
    let d: Vec<usize> = feats.iter().map(|f| f.distance_bucket).collect();
    let s: Vec<usize> = feats.iter().map(|f| usize::from(f.same_speaker)).collect();
    let gn: Vec<usize> = feats.iter().map(|f| f.genre).collect();
    let d = g.gather_rows(dist, &d)?;
    let s = g.gather_rows(speaker, &s)?;
    let gn = g.gather_rows(genre, &gn)?;
    g.concat_cols(&[d, s, gn])
}

/// `W_a · FFNN_a([m*_i, m*_j, m*_i ∘ m*_j, φ(i,j)])` for each row triple,
/// `[pairs, 1]`.
pub fn antecedent_score(g: &mut Graph, fused_i: NodeId, fused_j: NodeId, phi: NodeId, ffnn: &Ffnn) -> Result<NodeId> {
    if g.shape(fused_i) != g.shape(fused_j) || g.shape(phi).0 != g.shape(fused_i).0 {
        return Err(Error::shape(
            "antecedent_score",
            format!(
                "m*_i {:?}, m*_j {:?}, φ {:?}",
                g.shape(fused_i),
                g.shape(fused_j),
                g.shape(phi)
            ),
        ));
    }
    let product = g.mul(fused_i, fused_j)?;
    let x = g.concat_cols(&[fused_i, fused_j, product, phi])?;
    ffnn.forward(g, x)
}

/// `S(i, j) = S^m_i + S^m_j + S^a_{i,j}`.
pub fn coref_score(mention_i: f64, mention_j: f64, antecedent: f64) -> f64 {
    mention_i + mention_j + antecedent
}

/// The dummy antecedent always scores zero.
pub const DUMMY_SCORE: f64 = 0.0;

/// Softmax over a score row whose first entry is the dummy.
pub fn antecedent_distribution(row: &[f64]) -> Result<Vec<f64>> {
    if row.is_empty() {
        return Err(Error::Empty("antecedent_distribution"));
    }
    softmax(row)
}

/// Scores for one mention. `candidates` are preceding mention positions in
/// increasing order; `scores` and `probs` have the dummy at index 0
/// followed by one entry per candidate.
#[derive(Clone, Debug, PartialEq)]
pub struct AntecedentRow {
    pub candidates: Vec<usize>,
    pub scores: Vec<f64>,
    pub probs: Vec<f64>,
}

impl AntecedentRow {
    /// Highest-scoring choice; ties go to the dummy, then the nearest
    /// candidate.
    pub fn best(&self) -> Option<usize> {
        let mut best = DUMMY_SCORE;
        let mut choice = None;
        for (k, &c) in self.candidates.iter().enumerate().rev() {
            if self.scores[k + 1] > best {
                best = self.scores[k + 1];
                choice = Some(c);
            }
        }
        choice
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorefScores {
    pub mention_scores: Vec<f64>,
    pub rows: Vec<AntecedentRow>,
}

impl CorefScores {
    pub fn best_antecedents(&self) -> Vec<Option<usize>> {
        self.rows.iter().map(AntecedentRow::best).collect()
    }
}

/// Disjoint clusters of at least two mentions each.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ClusterSet {
    pub clusters: Vec<Vec<Span>>,
}

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        DisjointSet {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut cur = x;
        while self.parent[cur] != root {
            let next = self.parent[cur];
            self.parent[cur] = root;
            cur = next;
        }
        root
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // keep the earlier mention as representative
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Transitive closure of the chosen links. Singletons are dropped;
/// clusters are ordered by their first mention.
pub fn decode_clusters(mentions: &[Span], choices: &[Option<usize>]) -> Result<ClusterSet> {
    if mentions.len() != choices.len() {
        return Err(Error::shape(
            "decode_clusters",
            format!("{} mentions, {} choices", mentions.len(), choices.len()),
        ));
    }
    let mut sets = DisjointSet::new(mentions.len());
    for (i, choice) in choices.iter().enumerate() {
        if let Some(j) = *choice {
            if j >= i {
                return Err(Error::InvalidArgument(format!(
                    "mention {i} links forward to {j}"
                )));
            }
            sets.union(i, j);
        }
    }
    let mut groups: Vec<Vec<Span>> = vec![Vec::new(); mentions.len()];
    for (i, &span) in mentions.iter().enumerate() {
        let root = sets.find(i);
        groups[root].push(span);
    }
    let mut clusters: Vec<Vec<Span>> = groups
        .into_iter()
        .filter(|c| c.len() >= 2)
        .map(|mut c| {
            c.sort();
            c
        })
        .collect();
    clusters.sort();
    Ok(ClusterSet { clusters })
}
