//! Seeded synthetic corpora in which every cluster's mentions share a
//! distinctive entity token.
//!
//! With `pronoun_mentions > 0`, the last mention of that many clusters is
//! replaced by [`PRONOUN`], and the cluster's entity token is repeated
//! `cue_distance` filler tokens before it in a non-mention cue phrase
//! (`CUE_MARKER entity`). The pronoun span itself carries no identity.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{validate_document, Document, Span, NUM_GENRES};
use crate::error::{Error, Result};

pub const PRONOUN: &str = "it";
pub const CUE_MARKER: &str = "about";
const DETERMINER: &str = "the";
const MIN_SENTENCE: usize = 6;
const MAX_SENTENCE: usize = 12;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SyntheticConfig {
    pub n_docs: usize,
    pub tokens_per_doc: usize,
    pub n_clusters: usize,
    pub mentions_per_cluster: usize,
    pub vocab_size: usize,
    pub pronoun_mentions: usize,
    pub cue_distance: usize,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_docs: 20,
            tokens_per_doc: 60,
            n_clusters: 2,
            mentions_per_cluster: 3,
            vocab_size: 50,
            pronoun_mentions: 0,
            cue_distance: 4,
        }
    }
}

impl SyntheticConfig {
    fn check(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Infeasible(m));
        if self.n_docs == 0 || self.tokens_per_doc == 0 || self.vocab_size == 0 {
            return bad("n_docs, tokens_per_doc and vocab_size must be positive".into());
        }
        if self.n_clusters > 0 && self.mentions_per_cluster < 2 {
            return bad("clusters need at least 2 mentions".into());
        }
        if self.pronoun_mentions > self.n_clusters {
            return bad(format!(
                "{} pronoun mentions but only {} clusters",
                self.pronoun_mentions, self.n_clusters
            ));
        }
        let worst = 2 * self.n_clusters * self.mentions_per_cluster
            + self.pronoun_mentions * (2 + self.cue_distance);
        if worst > self.tokens_per_doc {
            return bad(format!(
                "mentions need up to {worst} tokens but documents have {}",
                self.tokens_per_doc
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy)]
enum Form {
    Bare,
    Determined,
    Pronoun,
}

pub fn generate_synthetic(config: &SyntheticConfig, seed: u64) -> Result<Vec<Document>> {
    config.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..config.n_docs)
        .map(|i| {
            let doc = generate_one(config, &mut rng, format!("synth-{i:04}"));
            debug_assert!(validate_document(&doc).is_empty());
            Ok(doc)
        })
        .collect()
}

fn generate_one(config: &SyntheticConfig, rng: &mut ChaCha8Rng, doc_id: String) -> Document {
    let pool = (2 * config.n_clusters).max(20);
    let mut entity_ids: Vec<usize> = (0..pool).collect();
    entity_ids.shuffle(rng);
    let entities: Vec<String> = entity_ids[..config.n_clusters]
        .iter()
        .map(|k| format!("e{k}"))
        .collect();

    let mut order: Vec<usize> = (0..config.n_clusters)
        .flat_map(|c| std::iter::repeat_n(c, config.mentions_per_cluster))
        .collect();
    order.shuffle(rng);
    let mut forms: Vec<Form> = order
        .iter()
        .map(|_| if rng.random_bool(0.5) { Form::Bare } else { Form::Determined })
        .collect();
    let mut pronoun_clusters: Vec<usize> = (0..config.n_clusters).collect();
    pronoun_clusters.shuffle(rng);
    for &c in &pronoun_clusters[..config.pronoun_mentions] {
        let last = order.iter().rposition(|&o| o == c).expect("cluster has mentions");
        forms[last] = Form::Pronoun;
    }

    let used: usize = forms
        .iter()
        .map(|f| match f {
            Form::Bare => 1,
            Form::Determined => 2,
            Form::Pronoun => 3 + config.cue_distance,
        })
        .sum();
    let mut gaps = vec![0usize; order.len() + 1];
    for _ in 0..config.tokens_per_doc - used {
        let g = rng.random_range(0..gaps.len());
        gaps[g] += 1;
    }

    let mut tokens: Vec<String> = Vec::with_capacity(config.tokens_per_doc);
    // cut_ok[p]: a sentence may end after token p
    let mut cut_ok: Vec<bool> = Vec::with_capacity(config.tokens_per_doc);
    let mut clusters: Vec<Vec<Span>> = vec![Vec::new(); config.n_clusters];
    let push = |tokens: &mut Vec<String>, cut_ok: &mut Vec<bool>, tok: String, cut: bool| {
        tokens.push(tok);
        cut_ok.push(cut);
    };
    let filler = |rng: &mut ChaCha8Rng| format!("w{}", rng.random_range(0..config.vocab_size));

    for (k, (&cluster, &form)) in order.iter().zip(&forms).enumerate() {
        for _ in 0..gaps[k] {
            let t = filler(rng);
            push(&mut tokens, &mut cut_ok, t, true);
        }
        let entity = entities[cluster].clone();
        let start = tokens.len();
        match form {
            Form::Bare => push(&mut tokens, &mut cut_ok, entity, true),
            Form::Determined => {
                push(&mut tokens, &mut cut_ok, DETERMINER.into(), false);
                push(&mut tokens, &mut cut_ok, entity, true);
            }
            Form::Pronoun => {
                push(&mut tokens, &mut cut_ok, CUE_MARKER.into(), false);
                push(&mut tokens, &mut cut_ok, entity, true);
                for _ in 0..config.cue_distance {
                    let t = filler(rng);
                    push(&mut tokens, &mut cut_ok, t, true);
                }
                push(&mut tokens, &mut cut_ok, PRONOUN.into(), true);
            }
        }
        let end = tokens.len() - 1;
        let span = match form {
            Form::Pronoun => Span::new(end, end),
            _ => Span::new(start, end),
        };
        clusters[cluster].push(span);
    }
    for _ in 0..gaps[order.len()] {
        let t = filler(rng);
        push(&mut tokens, &mut cut_ok, t, true);
    }

    let n = tokens.len();
    let mut sentence_bounds = Vec::new();
    let mut start = 0;
    while start < n {
        let target = rng.random_range(MIN_SENTENCE..=MAX_SENTENCE);
        let mut end = (start + target - 1).min(n - 1);
        while end < n - 1 && !cut_ok[end] {
            end += 1;
        }
        if n - 1 - end < MIN_SENTENCE / 2 {
            end = n - 1;
        }
        sentence_bounds.push(Span::new(start, end));
        start = end + 1;
    }

    let mut speaker_ids = Vec::with_capacity(n);
    for s in &sentence_bounds {
        let speaker = rng.random_range(0..2i64);
        speaker_ids.extend(std::iter::repeat_n(speaker, s.width()));
    }
    let genre_id = rng.random_range(0..NUM_GENRES);

    Document {
        doc_id,
        tokens,
        sentence_bounds,
        speaker_ids,
        genre_id,
        gold_clusters: clusters.into_iter().filter(|c| !c.is_empty()).collect(),
    }
}
