use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::{build_batch, loss_and_grad, FeatureCache};
use super::mining::{build_instances, MiningIndexes, NegativeConfig};
use super::{answer_text, QaExample, TrainingInstance};
use crate::corpus::{CorpusStore, SeparatorStyle};
use crate::encoder::{sub_seed, EncoderModel, LinearInit, Side, TruncationCaps, DEFAULT_BUCKETS, DEFAULT_DIM};
use crate::error::{Error, Result};
use crate::index::{Level, MipsIndex};
use crate::scalar::Scalar;
use crate::sparse::{has_answer, Bm25Params};

/// Cutoff used to pick the best checkpoint on the dev set.
pub const DEV_CUTOFF: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub lr: f64,
    /// Steps of linear learning-rate warmup from zero.
    pub warmup_steps: usize,
    /// Evaluate on the dev set every this many steps, in addition to every
    /// epoch end. Zero evaluates at epoch ends only.
    pub eval_steps: usize,
    pub seed: u64,
    pub dim: usize,
    pub buckets: usize,
    pub init: LinearInit,
    pub style: SeparatorStyle,
    pub negatives: NegativeConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 32,
            epochs: 10,
            lr: 2.0,
            warmup_steps: 0,
            eval_steps: 0,
            seed: 0,
            dim: DEFAULT_DIM,
            buckets: DEFAULT_BUCKETS,
            init: LinearInit::default(),
            style: SeparatorStyle::default(),
            negatives: NegativeConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return Err(Error::Config(format!(
                "lr must be finite and non-negative, got {}",
                self.lr
            )));
        }
        if self.dim == 0 || self.buckets == 0 {
            return Err(Error::Config("dim and buckets must be positive".into()));
        }
        Ok(())
    }

    /// Fresh trainable encoder for `level` using this config's shape and seed.
    pub fn new_model<S: Scalar>(&self, level: Level) -> EncoderModel<S> {
        let caps = match level {
            Level::Document => TruncationCaps::DOCUMENT,
            Level::Passage => TruncationCaps::PASSAGE,
        };
        EncoderModel::linear(self.dim, self.buckets, self.seed, caps, self.init)
    }

    fn lr_at(&self, step: usize) -> f64 {
        if self.warmup_steps > 0 && step < self.warmup_steps {
            self.lr * (step + 1) as f64 / self.warmup_steps as f64
        } else {
            self.lr
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<S> {
    /// Best checkpoint by dev accuracy, or the final model without a dev set.
    pub model: EncoderModel<S>,
    /// Mean batch loss at every step, before the update.
    pub losses: Vec<f64>,
    /// `(step, accuracy)` at every dev evaluation.
    pub dev_history: Vec<(usize, f64)>,
    pub best_step: usize,
    pub best_accuracy: Option<f64>,
}

/// Fraction of dev questions with an answer-bearing unit in the model's flat
/// top-`cutoff` over the whole store.
pub fn dev_accuracy<S: Scalar>(
    model: &EncoderModel<S>,
    dev: &[QaExample],
    store: &CorpusStore,
    level: Level,
    style: SeparatorStyle,
    cutoff: usize,
) -> Result<f64> {
    if dev.is_empty() {
        return Err(Error::EmptyDevSet);
    }
    let index = MipsIndex::build(store, model, level, style)?;
    let mut hits = 0usize;
    for ex in dev {
        let qv = model.encode(Side::Question, &ex.question);
        let found = index
            .search(&qv, cutoff, None)?
            .iter()
            .any(|h| answer_text(store, level, &h.unit_id).is_some_and(|t| has_answer(&t, &ex.answers)));
        hits += found as usize;
    }
    Ok(hits as f64 / dev.len() as f64)
}

/// Mini-batch SGD on the mean in-batch contrastive loss.
///
/// Batches are drawn from a seeded shuffle each epoch. With a non-empty dev
/// set the checkpoint with the best dev top-20 accuracy is returned, the
/// latest one on ties.
pub fn train<S: Scalar>(
    mut model: EncoderModel<S>,
    instances: &[TrainingInstance],
    dev: &[QaExample],
    store: &CorpusStore,
    level: Level,
    config: &TrainConfig,
) -> Result<TrainOutcome<S>> {
    config.validate()?;
    if !model.is_trainable() {
        return Err(Error::NotTrainable);
    }
    if instances.is_empty() {
        return Err(Error::NoTrainableInstances);
    }
    let cache = FeatureCache::build(&model, store, level, config.style, instances)?;
    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(config.seed, "train"));
    let mut order: Vec<usize> = (0..instances.len()).collect();

    let mut outcome = TrainOutcome {
        model: model.clone(),
        losses: Vec::new(),
        dev_history: Vec::new(),
        best_step: 0,
        best_accuracy: None,
    };
    let mut step = 0usize;
    let evaluate = |model: &EncoderModel<S>, step: usize, outcome: &mut TrainOutcome<S>| -> Result<()> {
        if dev.is_empty() || outcome.dev_history.last().is_some_and(|&(s, _)| s == step) {
            return Ok(());
        }
        let acc = dev_accuracy(model, dev, store, level, config.style, DEV_CUTOFF)?;
        log::info!("step {step}: dev top-{DEV_CUTOFF} = {acc:.4}");
        outcome.dev_history.push((step, acc));
        if outcome.best_accuracy.is_none_or(|best| acc >= best) {
            outcome.best_accuracy = Some(acc);
            outcome.best_step = step;
            outcome.model = model.clone();
        }
        Ok(())
    };

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            let refs: Vec<&TrainingInstance> = chunk.iter().map(|&i| &instances[i]).collect();
            let batch = build_batch(&refs, &cache)?;
            let (loss, grad) = loss_and_grad(&model, &batch)?;
            outcome.losses.push(loss.to_f64_lossy());
            model.apply_gradient(&grad, S::of(config.lr_at(step)));
            step += 1;
            if config.eval_steps > 0 && step.is_multiple_of(config.eval_steps) {
                evaluate(&model, step, &mut outcome)?;
            }
        }
        log::debug!("epoch {epoch} done at step {step}");
        evaluate(&model, step, &mut outcome)?;
    }
    if dev.is_empty() {
        outcome.model = model;
        outcome.best_step = step;
    }
    Ok(outcome)
}

/// Mines instances from a QA dataset and trains a fresh model on them.
pub fn train_from_dataset(
    config: &TrainConfig,
    dataset: &[QaExample],
    dev: &[QaExample],
    store: &CorpusStore,
    level: Level,
) -> Result<(TrainOutcome<f64>, Vec<TrainingInstance>)> {
    config.validate()?;
    let indexes = MiningIndexes::build(store, Bm25Params::default())?;
    let (instances, _) = build_instances(dataset, store, &indexes, level, config.negatives, config.seed)?;
    let outcome = train(config.new_model(level), &instances, dev, store, level, config)?;
    Ok((outcome, instances))
}
