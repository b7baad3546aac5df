//! The full resolver: encoder, mention scoring and pruning, pointer
//! refinement with gated fusion, antecedent scoring, loss and decoding.

use std::fmt;
use std::sync::Arc;

use log::warn;
use ndarray::Array2;

use crate::coref_scorer::{
    antecedent_distribution, antecedent_score, decode_clusters, embed_pair_features, feature_specs,
    pair_features, AntecedentRow, ClusterSet, CorefScores, DistanceMode, DUMMY_SCORE,
};
use crate::corpus::{enumerate_spans, gold_coverage, CandidateSpan, Document, Span};
use crate::encoder::{
    build_span_reps, char_cnn, embed_tokens, encode_context, head_attention_batch, head_logits, EmbeddingProvider,
    FeatureProvider, ZeroFeatures,
};
use crate::error::{Error, Result};
use crate::ffnn::Ffnn;
use crate::mention_refine::{
    gate_fuse, gate_spec, mention_score, pointer_refine, prune_mentions, top_attended_spans, MentionSet,
    PointerParams,
};
use crate::tensor_core::{Graph, Init, LstmParams, NodeId, ParamSpec, ParamStore};
use crate::training::{gold_antecedent_sets, loss_node, GoldAntecedents, TrainConfig};

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub embedding_dim: usize,
    pub lstm_hidden: usize,
    pub ffnn_hidden: usize,
    pub ffnn_depth: usize,
    pub pointer_hidden: usize,
    /// Width of the syntactic feature block of each span; 0 drops it.
    pub feature_width: usize,
    /// Width of each learned pair-feature embedding.
    pub phi_width: usize,
    pub max_span_width: usize,
    /// Fraction `λ` of the document length kept as mentions.
    pub mention_ratio: f64,
    /// Candidate antecedents per mention (the nearest preceding ones).
    pub max_antecedents: usize,
    /// Caps how many spans the pointer attends over, keeping the
    /// best-scoring ones. `None` attends over every candidate span.
    pub max_attended_spans: Option<usize>,
    pub distance_mode: DistanceMode,
    /// Pointer refinement and gated fusion; off scores antecedents on the
    /// base mention representations.
    pub refine: bool,
    pub char_cnn: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            embedding_dim: 32,
            lstm_hidden: 32,
            ffnn_hidden: 64,
            ffnn_depth: 2,
            pointer_hidden: 32,
            feature_width: 4,
            phi_width: 20,
            max_span_width: 10,
            mention_ratio: 0.4,
            max_antecedents: 50,
            max_attended_spans: None,
            distance_mode: DistanceMode::Mention,
            refine: true,
            char_cnn: false,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        for (name, v) in [
            ("embedding_dim", self.embedding_dim),
            ("lstm_hidden", self.lstm_hidden),
            ("ffnn_hidden", self.ffnn_hidden),
            ("pointer_hidden", self.pointer_hidden),
            ("phi_width", self.phi_width),
            ("max_span_width", self.max_span_width),
            ("max_antecedents", self.max_antecedents),
        ] {
            if v == 0 {
                problems.push(format!("{name} must be positive"));
            }
        }
        if !(self.mention_ratio > 0.0 && self.mention_ratio <= 1.0) {
            problems.push(format!("mention_ratio must lie in (0, 1], got {}", self.mention_ratio));
        }
        if self.max_attended_spans == Some(0) {
            problems.push("max_attended_spans must be positive".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(problems.join("; ")))
        }
    }

    /// Width of each token's input vector.
    pub fn token_width(&self) -> usize {
        self.embedding_dim + if self.char_cnn { char_cnn::output_width() } else { 0 }
    }

    /// `|s| = 2·(2H) + |x̂| + |feat|`
    pub fn span_width(&self) -> usize {
        4 * self.lstm_hidden + self.token_width() + self.feature_width
    }

    pub fn param_specs(&self) -> Vec<ParamSpec> {
        let d = self.span_width();
        let mut specs = Vec::new();
        specs.extend(LstmParams::specs("lstm.fwd", self.token_width(), self.lstm_hidden));
        specs.extend(LstmParams::specs("lstm.bwd", self.token_width(), self.lstm_hidden));
        specs.push(ParamSpec::new("head.w", vec![1, 2 * self.lstm_hidden], Init::Glorot));
        if self.char_cnn {
            specs.extend(char_cnn::specs());
        }
        specs.extend(Ffnn::specs("mention", d, self.ffnn_hidden, self.ffnn_depth));
        if self.refine {
            specs.extend(PointerParams::specs(d, self.pointer_hidden));
            specs.push(gate_spec(d));
        }
        specs.extend(feature_specs(self.phi_width));
        specs.extend(Ffnn::specs(
            "antecedent",
            3 * d + 3 * self.phi_width,
            self.ffnn_hidden,
            self.ffnn_depth,
        ));
        specs
    }
}

/// Per-document inputs that do not depend on the parameters.
#[derive(Clone, Debug)]
pub struct PreparedDoc {
    pub doc: Document,
    pub embeddings: Array2<f64>,
    pub spans: Vec<CandidateSpan>,
    pub features: Option<Array2<f64>>,
}

/// Outputs of one forward pass over a document.
#[derive(Clone, Debug)]
pub struct ForwardPass {
    pub mentions: MentionSet,
    pub scores: CorefScores,
    /// Score rows `[ε, candidates...]` as graph nodes, one per mention.
    pub score_rows: Vec<NodeId>,
    pub gold: Option<GoldAntecedents>,
    /// `None` when no mention has a candidate antecedent or no loss was
    /// requested.
    pub loss: Option<NodeId>,
}

#[derive(Clone)]
pub struct CorefModel {
    pub config: ModelConfig,
    pub params: ParamStore,
    embeddings: EmbeddingProvider,
    features: Arc<dyn FeatureProvider>,
}

impl fmt::Debug for CorefModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CorefModel")
            .field("config", &self.config)
            .field("tensors", &self.params.len())
            .finish()
    }
}

impl CorefModel {
    /// Fresh parameters drawn from `seed`.
    pub fn new(config: ModelConfig, embeddings: EmbeddingProvider, seed: u64) -> Result<Self> {
        config.validate()?;
        let params = ParamStore::init(&config.param_specs(), seed)?;
        Self::from_params(config, embeddings, params)
    }

    /// Existing parameters, which must match the configuration exactly.
    pub fn from_params(config: ModelConfig, embeddings: EmbeddingProvider, params: ParamStore) -> Result<Self> {
        config.validate()?;
        if embeddings.dim() != config.embedding_dim {
            return Err(Error::InvalidArgument(format!(
                "embeddings have width {}, configuration expects {}",
                embeddings.dim(),
                config.embedding_dim
            )));
        }
        params.check_against(&config.param_specs())?;
        let features = Arc::new(ZeroFeatures {
            width: config.feature_width,
        });
        Ok(CorefModel {
            config,
            params,
            embeddings,
            features,
        })
    }

    pub fn with_features(mut self, provider: Arc<dyn FeatureProvider>) -> Result<Self> {
        if provider.width() != self.config.feature_width {
            return Err(Error::InvalidArgument(format!(
                "feature provider width {} but feature_width is {}",
                provider.width(),
                self.config.feature_width
            )));
        }
        self.features = provider;
        Ok(self)
    }

    pub fn prepare(&self, doc: &Document) -> Result<PreparedDoc> {
        if doc.is_empty() {
            return Err(Error::Empty("document"));
        }
        let (_, unreachable) = gold_coverage(doc, self.config.max_span_width);
        if unreachable > 0 {
            warn!(
                "{}: {unreachable} gold mentions are wider than max_span_width {} and can never be predicted",
                doc.doc_id, self.config.max_span_width
            );
        }
        let spans = enumerate_spans(doc, self.config.max_span_width);
        let features = if self.config.feature_width > 0 {
            let mut m = Array2::zeros((spans.len(), self.config.feature_width));
            for (mut row, c) in m.rows_mut().into_iter().zip(&spans) {
                let f = self.features.features(doc, c.span);
                if f.len() != self.config.feature_width {
                    return Err(Error::shape(
                        "features",
                        format!("provider returned {} values for span {}", f.len(), c.span),
                    ));
                }
                row.assign(&ndarray::ArrayView1::from(&f));
            }
            Some(m)
        } else {
            None
        };
        Ok(PreparedDoc {
            doc: doc.clone(),
            embeddings: embed_tokens(doc, &self.embeddings),
            spans,
            features,
        })
    }

    pub fn forward(&self, g: &mut Graph, prep: &PreparedDoc, train: Option<&TrainConfig>) -> Result<ForwardPass> {
        self.forward_with(g, &self.params, prep, train)
    }

    /// Forward pass with explicit parameters; builds the loss when `train`
    /// is given.
    pub fn forward_with(
        &self,
        g: &mut Graph,
        params: &ParamStore,
        prep: &PreparedDoc,
        train: Option<&TrainConfig>,
    ) -> Result<ForwardPass> {
        let cfg = &self.config;
        let doc = &prep.doc;

        // token inputs and contextual states
        let mut tokens = g.constant(prep.embeddings.clone())?;
        if cfg.char_cnn {
            let chars = char_cnn::char_features(g, params, &doc.tokens)?;
            tokens = g.concat_cols(&[tokens, chars])?;
        }
        let fwd = LstmParams::bind(g, params, "lstm.fwd")?;
        let bwd = LstmParams::bind(g, params, "lstm.bwd")?;
        let states = encode_context(g, tokens, &fwd, &bwd)?;

        // span representations for every candidate
        let w_head = params.node(g, "head.w")?;
        let logits = head_logits(g, states, w_head)?;
        let span_list: Vec<Span> = prep.spans.iter().map(|c| c.span).collect();
        let heads = head_attention_batch(g, &span_list, tokens, logits)?;
        let feats = match &prep.features {
            Some(f) => Some(g.constant(f.clone())?),
            None => None,
        };
        let all_spans = build_span_reps(g, &prep.spans, states, heads, feats)?;

        // mention scores and pruning
        let mention_ffnn = Ffnn::bind(g, params, "mention", cfg.ffnn_depth)?;
        let span_scores = mention_score(g, all_spans, &mention_ffnn)?;
        let score_values: Vec<f64> = g.value(span_scores).iter().copied().collect();
        let kept = prune_mentions(&prep.spans, &score_values, cfg.mention_ratio, doc.len());
        let mentions: Vec<CandidateSpan> = kept.iter().map(|&k| prep.spans[k]).collect();
        let mention_spans: Vec<Span> = mentions.iter().map(|c| c.span).collect();
        let m = g.gather_rows(all_spans, &kept)?;
        let sm = g.gather_rows(span_scores, &kept)?;

        // refinement over all (or the best-scoring) candidate spans
        let (attended, alpha, m_prime, fused) = if cfg.refine {
            let attended_idx = attended_indices(&score_values, cfg.max_attended_spans);
            let targets = if attended_idx.len() == prep.spans.len() {
                all_spans
            } else {
                g.gather_rows(all_spans, &attended_idx)?
            };
            let pointer = PointerParams::bind(g, params)?;
            let (alpha, m_prime) = pointer_refine(g, m, targets, &pointer)?;
            let w_gate = params.node(g, "gate.w")?;
            let (_, fused) = gate_fuse(g, m, m_prime, w_gate)?;
            let attended: Vec<CandidateSpan> = attended_idx.iter().map(|&i| prep.spans[i]).collect();
            (attended, Some(alpha), m_prime, fused)
        } else {
            (Vec::new(), None, m, m)
        };

        // antecedent scores for every (mention, candidate) pair
        let k = mentions.len();
        let mut pair_i = Vec::new();
        let mut pair_j = Vec::new();
        let mut feats = Vec::new();
        let mut candidates: Vec<Vec<usize>> = Vec::with_capacity(k);
        for i in 0..k {
            let cands: Vec<usize> = (i.saturating_sub(cfg.max_antecedents)..i).collect();
            for &j in &cands {
                pair_i.push(i);
                pair_j.push(j);
                feats.push(pair_features(i, j, &mentions, doc, cfg.distance_mode)?);
            }
            candidates.push(cands);
        }
        let dummy = g.scalar_constant(DUMMY_SCORE)?;
        let column = if pair_i.is_empty() {
            dummy
        } else {
            let fi = g.gather_rows(fused, &pair_i)?;
            let fj = g.gather_rows(fused, &pair_j)?;
            let phi = embed_pair_features(g, params, &feats)?;
            let antecedent_ffnn = Ffnn::bind(g, params, "antecedent", cfg.ffnn_depth)?;
            let sa = antecedent_score(g, fi, fj, phi, &antecedent_ffnn)?;
            let smi = g.gather_rows(sm, &pair_i)?;
            let smj = g.gather_rows(sm, &pair_j)?;
            let both = g.add(smi, smj)?;
            let total = g.add(both, sa)?;
            g.concat_rows(&[dummy, total])?
        };
        let mut score_rows = Vec::with_capacity(k);
        let mut rows = Vec::with_capacity(k);
        let mut offset = 1;
        for cands in &candidates {
            let mut idx = vec![0];
            idx.extend(offset..offset + cands.len());
            offset += cands.len();
            let row = g.gather_elems(column, &idx)?;
            let scores: Vec<f64> = g.value(row).iter().copied().collect();
            rows.push(AntecedentRow {
                candidates: cands.clone(),
                probs: antecedent_distribution(&scores)?,
                scores,
            });
            score_rows.push(row);
        }

        let (gold, loss) = match train {
            Some(tc) => {
                let gold = gold_antecedent_sets(doc, &mention_spans, cfg.max_antecedents);
                let cols: Vec<Vec<usize>> = (0..k).map(|i| gold.columns(i, &candidates[i])).collect();
                let loss = loss_node(g, &score_rows, &cols, tc)?;
                (Some(gold), loss)
            }
            None => (None, None),
        };

        let value = |g: &Graph, id: NodeId| g.value(id).clone();
        let mention_scores: Vec<f64> = g.value(sm).iter().copied().collect();
        let mention_set = MentionSet {
            mentions,
            score: mention_scores.clone(),
            attended,
            alpha: alpha.map_or_else(|| Array2::zeros((k, 0)), |a| value(g, a)),
            m: value(g, m),
            m_prime: value(g, m_prime),
            m_star: value(g, fused),
        };
        Ok(ForwardPass {
            mentions: mention_set,
            scores: CorefScores {
                mention_scores,
                rows,
            },
            score_rows,
            gold,
            loss,
        })
    }

    /// Predicted clusters of size at least two.
    pub fn predict(&self, prep: &PreparedDoc) -> Result<ClusterSet> {
        let mut g = Graph::new();
        let pass = self.forward(&mut g, prep, None)?;
        let spans: Vec<Span> = pass.mentions.mentions.iter().map(|c| c.span).collect();
        decode_clusters(&spans, &pass.scores.best_antecedents())
    }

    /// For each kept mention, its predicted cluster (if any) and the `k`
    /// spans its pointer attention weighs most.
    pub fn inspect(&self, prep: &PreparedDoc, k: usize) -> Result<Vec<MentionInspection>> {
        if !self.config.refine {
            return Err(Error::InvalidArgument(
                "inspection needs refinement enabled".to_string(),
            ));
        }
        if k == 0 {
            return Err(Error::InvalidArgument("k must be at least 1".to_string()));
        }
        let mut g = Graph::new();
        let pass = self.forward(&mut g, prep, None)?;
        let spans: Vec<Span> = pass.mentions.mentions.iter().map(|c| c.span).collect();
        let clusters = decode_clusters(&spans, &pass.scores.best_antecedents())?;
        let ms = &pass.mentions;
        Ok(ms
            .mentions
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let alpha: Vec<f64> = ms.alpha.row(i).to_vec();
                MentionInspection {
                    span: c.span,
                    cluster: clusters.clusters.iter().position(|cl| cl.contains(&c.span)),
                    alpha_sum: alpha.iter().sum(),
                    top: top_attended_spans(&alpha, &ms.attended, k)
                        .into_iter()
                        .map(|(s, w)| (s.span, w))
                        .collect(),
                }
            })
            .collect())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MentionInspection {
    pub span: Span,
    pub cluster: Option<usize>,
    /// Total of the mention's full attention distribution.
    pub alpha_sum: f64,
    pub top: Vec<(Span, f64)>,
}

/// Every span index, or the `cap` best-scoring ones in document order.
fn attended_indices(scores: &[f64], cap: Option<usize>) -> Vec<usize> {
    match cap {
        Some(cap) if cap < scores.len() => {
            let mut order: Vec<usize> = (0..scores.len()).collect();
            order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
            order.truncate(cap);
            order.sort_unstable();
            order
        }
        _ => (0..scores.len()).collect(),
    }
}
