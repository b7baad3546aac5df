//! Gold antecedent sets, the dual positive/negative objective, optimizers,
//! the training loop and checkpoints.

mod checkpoint;
mod gold;
mod loss;
mod optim;

use std::ops::ControlFlow;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::metrics::{ConllReport, CorpusScorer};
use crate::model::{CorefModel, PreparedDoc};
use crate::tensor_core::{stable_hash, Graph, ParamGrads};

pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, FORMAT_VERSION, MAGIC};
pub use gold::{gold_antecedent_sets, Antecedent, GoldAntecedents};
pub use loss::{baseline_mll, baseline_mll_node, loss, loss_node};
pub use optim::{clip_gradients, Optimizer, OptimizerKind, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Adds `w · log max(1 − P_gold, ε_num)` to each mention's loss.
    pub neg_term_enabled: bool,
    pub neg_term_weight: f64,
    /// `ε_num`, the floor inside the second logarithm.
    pub prob_floor: f64,
    /// Global L2 norm limit; 0 disables clipping.
    pub gradient_clip_norm: f64,
    pub optimizer: OptimizerKind,
    /// Documents per parameter update.
    pub batch_size: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            epochs: 30,
            seed: 0,
            neg_term_enabled: true,
            neg_term_weight: 1.0,
            prob_floor: 1e-7,
            gradient_clip_norm: 5.0,
            optimizer: OptimizerKind::Adam,
            batch_size: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            problems.push(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if !(self.prob_floor > 0.0 && self.prob_floor < 0.5) {
            problems.push(format!("prob_floor must lie in (0, 0.5), got {}", self.prob_floor));
        }
        if !(self.neg_term_weight >= 0.0 && self.neg_term_weight.is_finite()) {
            problems.push(format!("neg_term_weight must be non-negative, got {}", self.neg_term_weight));
        }
        if !(self.gradient_clip_norm >= 0.0) {
            problems.push(format!("gradient_clip_norm must be non-negative, got {}", self.gradient_clip_norm));
        }
        if self.batch_size == 0 {
            problems.push("batch_size must be positive".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(problems.join("; ")))
        }
    }
}

/// Summed loss and gradients over `docs` at the model's current parameters.
pub fn loss_and_grads(model: &CorefModel, docs: &[&PreparedDoc], config: &TrainConfig) -> Result<(f64, ParamGrads)> {
    let mut grads = ParamGrads::zeros_like(&model.params);
    let mut total = 0.0;
    for prep in docs {
        let mut g = Graph::new();
        let pass = model.forward(&mut g, prep, Some(config))?;
        let Some(loss) = pass.loss else { continue };
        let value = g.scalar(loss);
        if !value.is_finite() {
            return Err(Error::NonFiniteLoss(prep.doc.doc_id.clone()));
        }
        let back = g.backward(loss)?;
        grads.accumulate(&g, &back);
        total += value;
    }
    if !grads.global_norm().is_finite() {
        let ids: Vec<&str> = docs.iter().map(|p| p.doc.doc_id.as_str()).collect();
        return Err(Error::NonFiniteLoss(format!("gradient of {}", ids.join(", "))));
    }
    Ok((total, grads))
}

/// One clipped update on the summed loss over `docs`. Returns the loss
/// before the update.
pub fn train_step(
    model: &mut CorefModel,
    docs: &[&PreparedDoc],
    optimizer: &mut Optimizer,
    config: &TrainConfig,
) -> Result<f64> {
    let (loss, mut grads) = loss_and_grads(model, docs, config)?;
    clip_gradients(&mut grads, config.gradient_clip_norm);
    optimizer.step(&mut model.params, &grads)?;
    Ok(loss)
}

/// One pass over `docs` in an order shuffled by `(seed, epoch)`. Returns
/// the mean per-document loss.
pub fn train_epoch(
    model: &mut CorefModel,
    docs: &[PreparedDoc],
    optimizer: &mut Optimizer,
    config: &TrainConfig,
    epoch: usize,
) -> Result<f64> {
    let mut order: Vec<usize> = (0..docs.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(stable_hash(config.seed, &format!("epoch{epoch}")));
    order.shuffle(&mut rng);
    let mut total = 0.0;
    for batch in order.chunks(config.batch_size) {
        let refs: Vec<&PreparedDoc> = batch.iter().map(|&i| &docs[i]).collect();
        total += train_step(model, &refs, optimizer, config)?;
    }
    Ok(if docs.is_empty() { 0.0 } else { total / docs.len() as f64 })
}

/// Corpus-level scores of the model's predictions against gold clusters.
pub fn evaluate(model: &CorefModel, docs: &[PreparedDoc]) -> Result<ConllReport> {
    let mut scorer = CorpusScorer::new();
    for prep in docs {
        let pred = model.predict(prep)?;
        scorer.add(&prep.doc.gold_clusters, &pred.clusters)?;
    }
    Ok(scorer.report())
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochStats {
    /// Starts at 1.
    pub epoch: usize,
    pub loss: f64,
    pub report: Option<ConllReport>,
}

/// Trains for `config.epochs` epochs, scoring on `dev` after each one.
/// `on_epoch` may stop training early by returning `Break`.
pub fn fit(
    model: &mut CorefModel,
    train: &[PreparedDoc],
    dev: Option<&[PreparedDoc]>,
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochStats) -> ControlFlow<()>,
) -> Result<Vec<EpochStats>> {
    config.validate()?;
    let mut optimizer = Optimizer::new(config.optimizer, config.learning_rate)?;
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        let loss = train_epoch(model, train, &mut optimizer, config, epoch)?;
        let report = dev.map(|d| evaluate(model, d)).transpose()?;
        let stats = EpochStats { epoch, loss, report };
        let flow = on_epoch(&stats);
        history.push(stats);
        if flow.is_break() {
            break;
        }
    }
    Ok(history)
}
