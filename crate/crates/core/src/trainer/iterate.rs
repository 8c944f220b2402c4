use rayon::prelude::*;

use super::{answer_text, NegativeTag, TrainingInstance};
use crate::corpus::CorpusStore;
use crate::encoder::{EncoderModel, Side};
use crate::error::Result;
use crate::index::MipsIndex;
use crate::scalar::Scalar;
use crate::sparse::has_answer;

/// Units ranked in the top `depth` by the previous-iteration model that are
/// neither the positive nor answer-bearing, one list per instance.
pub fn mine_iter_hard_negatives<S: Scalar>(
    model: &EncoderModel<S>,
    index: &MipsIndex<S>,
    instances: &[TrainingInstance],
    store: &CorpusStore,
    depth: usize,
) -> Result<Vec<Vec<String>>> {
    let level = index.level();
    instances
        .par_iter()
        .map(|inst| {
            let qv = model.encode(Side::Question, &inst.question);
            Ok(index
                .search(&qv, depth, None)?
                .into_iter()
                .filter(|h| h.unit_id != inst.positive_id)
                .filter(|h| !answer_text(store, level, &h.unit_id).is_some_and(|t| has_answer(&t, &inst.answers)))
                .map(|h| h.unit_id)
                .collect())
        })
        .collect()
}

/// Adds mined hard negatives to the previous iteration's instances. Ids
/// already present keep their original tag.
pub fn union_negatives(instances: &[TrainingInstance], hard: &[Vec<String>]) -> Vec<TrainingInstance> {
    instances
        .iter()
        .zip(hard)
        .map(|(inst, extra)| {
            let mut out = inst.clone();
            for id in extra {
                out.push_negative(id.clone(), NegativeTag::IterHard);
            }
            out
        })
        .collect()
}
