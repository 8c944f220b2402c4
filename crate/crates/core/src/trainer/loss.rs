use std::collections::HashMap;

use rayon::prelude::*;

use super::{unit_text, TrainingInstance};
use crate::corpus::{CorpusStore, SeparatorStyle};
use crate::encoder::{ContrastiveBatch, EncoderModel, Features, LinearGradient, Side};
use crate::error::{Error, Result};
use crate::index::Level;
use crate::scalar::Scalar;

/// Featurized questions and units for a set of training instances.
///
/// Featurization depends only on the hashing seed and caps, never on the
/// weights, so a cache stays valid for the whole training run.
#[derive(Debug, Clone, Default)]
pub struct FeatureCache<S> {
    questions: HashMap<String, Features<S>>,
    units: HashMap<String, Features<S>>,
}

impl<S: Scalar> FeatureCache<S> {
    pub fn build(
        model: &EncoderModel<S>,
        store: &CorpusStore,
        level: Level,
        style: SeparatorStyle,
        instances: &[TrainingInstance],
    ) -> Result<Self> {
        let mut qs: Vec<&str> = instances.iter().map(|i| i.question.as_str()).collect();
        qs.sort_unstable();
        qs.dedup();
        let mut ids: Vec<&str> = instances
            .iter()
            .flat_map(|i| std::iter::once(i.positive_id.as_str()).chain(i.negatives.iter().map(|n| n.id.as_str())))
            .collect();
        ids.sort_unstable();
        ids.dedup();

        let questions = qs
            .par_iter()
            .map(|q| (q.to_string(), model.featurize(Side::Question, q)))
            .collect();
        let units = ids
            .par_iter()
            .map(|id| {
                let text = unit_text(store, level, id, style).ok_or_else(|| Error::UnknownUnit(id.to_string()))?;
                Ok((id.to_string(), model.featurize(Side::Context, &text)))
            })
            .collect::<Result<HashMap<_, _>>>()?;
        Ok(Self { questions, units })
    }

    pub fn question(&self, q: &str) -> Option<&Features<S>> {
        self.questions.get(q)
    }

    pub fn unit(&self, id: &str) -> Option<&Features<S>> {
        self.units.get(id)
    }
}

/// Lays out a batch: each instance contributes its positive followed by its
/// explicit negatives to one pool shared by every question in the batch.
pub fn build_batch<S: Scalar>(instances: &[&TrainingInstance], cache: &FeatureCache<S>) -> Result<ContrastiveBatch<S>> {
    if instances.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut batch = ContrastiveBatch {
        questions: Vec::with_capacity(instances.len()),
        pool: Vec::new(),
        positives: Vec::with_capacity(instances.len()),
    };
    let unit = |id: &str| {
        cache
            .unit(id)
            .cloned()
            .ok_or_else(|| Error::UnknownUnit(id.to_string()))
    };
    for inst in instances {
        let q = cache
            .question(&inst.question)
            .cloned()
            .ok_or_else(|| Error::MissingQuestion(inst.question.clone()))?;
        batch.questions.push(q);
        batch.positives.push(batch.pool.len());
        batch.pool.push(unit(&inst.positive_id)?);
        for n in &inst.negatives {
            batch.pool.push(unit(&n.id)?);
        }
    }
    Ok(batch)
}

fn mean_weights<S: Scalar>(batch: &ContrastiveBatch<S>) -> Vec<S> {
    let b = batch.questions.len();
    vec![S::one() / S::of(b as f64); b]
}

/// Mean over the batch of `-log softmax` of each positive against the pool.
pub fn contrastive_loss<S: Scalar>(model: &EncoderModel<S>, batch: &ContrastiveBatch<S>) -> Result<S> {
    // Running mean: a batch of identical terms averages to that term exactly.
    let mut mean = S::zero();
    for (k, t) in model.instance_losses(batch)?.into_iter().enumerate() {
        mean = mean + (t - mean) / S::of((k + 1) as f64);
    }
    Ok(mean)
}

/// Mean batch loss and its exact gradient.
pub fn loss_and_grad<S: Scalar>(
    model: &EncoderModel<S>,
    batch: &ContrastiveBatch<S>,
) -> Result<(S, LinearGradient<S>)> {
    model.grad_linear(batch, &mean_weights(batch))
}
