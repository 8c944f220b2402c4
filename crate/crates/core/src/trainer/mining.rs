use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{answer_text, NegativeTag, QaExample, TrainingInstance};
use crate::corpus::{CorpusStore, Passage};
use crate::encoder::{splitmix64, sub_seed};
use crate::error::{Error, Result};
use crate::index::Level;
use crate::sparse::{contains_run, has_answer, Bm25Index, Bm25Params};
use crate::text::normalize_tokens;

/// BM25 depth scanned for an answer-bearing positive.
pub const POSITIVE_DEPTH: usize = 100;

/// Prefix of the gold context used to locate its passage.
const CONTEXT_PREFIX_WORDS: usize = 100;
/// Minimum overlap when the context prefix starts inside a passage and runs
/// past its end.
const MIN_CONTEXT_OVERLAP: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Discard {
    /// No answer-bearing unit among the top BM25 hits.
    NoAnswerInBm25,
    /// The matched gold document has no passages.
    EmptyGoldDocument,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PositiveSelection {
    Gold(String),
    Bm25 { id: String, rank: usize },
    Discard(Discard),
}

impl PositiveSelection {
    pub fn id(&self) -> Option<&str> {
        match self {
            PositiveSelection::Gold(id) | PositiveSelection::Bm25 { id, .. } => Some(id),
            PositiveSelection::Discard(_) => None,
        }
    }
}

/// True when `ctx` (already truncated) lies inside `passage`, or starts inside
/// it and continues past its end with a long enough overlap.
fn context_in_passage(passage: &[String], ctx: &[String]) -> bool {
    if ctx.is_empty() {
        return false;
    }
    if contains_run(passage, ctx) {
        return true;
    }
    let need = ctx.len().min(MIN_CONTEXT_OVERLAP);
    (0..passage.len()).any(|o| {
        let tail = &passage[o..];
        tail.len() >= need && tail.len() < ctx.len() && ctx.starts_with(tail)
    })
}

fn gold_passage<'a>(store: &'a CorpusStore, doc_id: &str, context: &str) -> Option<&'a Passage> {
    let ctx: Vec<String> = normalize_tokens(context)
        .into_iter()
        .take(CONTEXT_PREFIX_WORDS)
        .collect();
    store
        .passages_of(doc_id)
        .iter()
        .filter_map(|id| store.passage(id))
        .find(|p| context_in_passage(&normalize_tokens(&p.text), &ctx))
}

/// Picks the positive unit for a question.
///
/// Gold supervision wins when it maps onto the store (exact title match, and
/// for passages the passage holding the start of the gold context). Otherwise
/// the best-ranked of the top BM25 hits that contains an answer is used; if
/// none does the question is discarded.
pub fn select_positive(ex: &QaExample, store: &CorpusStore, bm25: &Bm25Index, level: Level) -> PositiveSelection {
    if let Some(doc) = ex.gold_doc_title.as_deref().and_then(|t| store.document_by_title(t)) {
        match level {
            Level::Document => return PositiveSelection::Gold(doc.doc_id.clone()),
            Level::Passage => {
                if let Some(p) = ex
                    .gold_context
                    .as_deref()
                    .and_then(|c| gold_passage(store, &doc.doc_id, c))
                {
                    return PositiveSelection::Gold(p.passage_id.clone());
                }
            }
        }
    }
    for (rank, hit) in bm25.search(&ex.question, POSITIVE_DEPTH).into_iter().enumerate() {
        let text = answer_text(store, level, &hit.unit_id).unwrap_or_default();
        if has_answer(&text, &ex.answers) {
            return PositiveSelection::Bm25 {
                id: hit.unit_id,
                rank: rank + 1,
            };
        }
    }
    PositiveSelection::Discard(Discard::NoAnswerInBm25)
}

fn bm25_filtered(
    question: &str,
    answers: &[String],
    store: &CorpusStore,
    bm25: &Bm25Index,
    level: Level,
    exclude: &str,
    n: usize,
) -> Vec<String> {
    if n == 0 {
        return Vec::new();
    }
    bm25.search(question, bm25.len())
        .into_iter()
        .filter(|h| h.unit_id != exclude)
        .filter(|h| !has_answer(&answer_text(store, level, &h.unit_id).unwrap_or_default(), answers))
        .map(|h| h.unit_id)
        .take(n)
        .collect()
}

/// Top-`n` documents by BM25 over abstracts whose full text lacks every answer.
pub fn mine_abstract_negatives(
    ex: &QaExample,
    store: &CorpusStore,
    bm25_abstract: &Bm25Index,
    positive_doc: &str,
    n: usize,
) -> Vec<String> {
    bm25_filtered(
        &ex.question,
        &ex.answers,
        store,
        bm25_abstract,
        Level::Document,
        positive_doc,
        n,
    )
}

/// Top-`n` documents by BM25 over full text whose full text lacks every answer.
pub fn mine_alltext_negatives(
    ex: &QaExample,
    store: &CorpusStore,
    bm25_fulltext: &Bm25Index,
    positive_doc: &str,
    n: usize,
) -> Vec<String> {
    bm25_filtered(
        &ex.question,
        &ex.answers,
        store,
        bm25_fulltext,
        Level::Document,
        positive_doc,
        n,
    )
}

/// Top-`n` passages by BM25 over passage text that lack every answer.
pub fn mine_bm25_negatives(
    ex: &QaExample,
    store: &CorpusStore,
    bm25_passages: &Bm25Index,
    positive: &str,
    n: usize,
) -> Vec<String> {
    bm25_filtered(
        &ex.question,
        &ex.answers,
        store,
        bm25_passages,
        Level::Passage,
        positive,
        n,
    )
}

/// Answer-free passages from the positive's content leaf.
pub fn mine_insec_negatives<A: AsRef<str>>(positive: &Passage, store: &CorpusStore, answers: &[A]) -> Vec<String> {
    store
        .passages_of(&positive.doc_id)
        .iter()
        .filter_map(|id| store.passage(id))
        .filter(|p| p.leaf_id == positive.leaf_id && p.passage_id != positive.passage_id)
        .filter(|p| !has_answer(&p.text, answers))
        .map(|p| p.passage_id.clone())
        .collect()
}

/// Answer-free passages from the positive's document.
pub fn mine_indoc_negatives<A: AsRef<str>>(positive: &Passage, store: &CorpusStore, answers: &[A]) -> Vec<String> {
    store
        .passages_of(&positive.doc_id)
        .iter()
        .filter_map(|id| store.passage(id))
        .filter(|p| p.passage_id != positive.passage_id)
        .filter(|p| !has_answer(&p.text, answers))
        .map(|p| p.passage_id.clone())
        .collect()
}

/// Per-strategy negative counts; zero disables a strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct NegativeConfig {
    pub bm25: usize,
    #[serde(rename = "abstract")]
    pub abstract_neg: usize,
    pub alltext: usize,
    pub in_doc: usize,
    pub in_sec: usize,
}

impl Default for NegativeConfig {
    fn default() -> Self {
        Self {
            bm25: 1,
            abstract_neg: 1,
            alltext: 0,
            in_doc: 2,
            in_sec: 0,
        }
    }
}

/// BM25 indexes needed for positive selection and negative mining.
pub struct MiningIndexes {
    pub passages: Bm25Index,
    pub abstracts: Bm25Index,
    pub fulltext: Bm25Index,
}

impl MiningIndexes {
    pub fn build(store: &CorpusStore, params: Bm25Params) -> Result<Self> {
        Ok(Self {
            passages: Bm25Index::over_passages(store, params)?,
            abstracts: Bm25Index::over_abstracts(store, params)?,
            fulltext: Bm25Index::over_fulltext(store, params)?,
        })
    }
}

fn sample(mut ids: Vec<String>, cap: usize, rng: &mut ChaCha8Rng) -> Vec<String> {
    if ids.len() > cap {
        ids.shuffle(rng);
        ids.truncate(cap);
        ids.sort();
    }
    ids
}

/// Builds one training instance per question at `level`; discarded questions
/// are returned alongside with their reason.
pub fn build_instances(
    dataset: &[QaExample],
    store: &CorpusStore,
    indexes: &MiningIndexes,
    level: Level,
    negatives: NegativeConfig,
    seed: u64,
) -> Result<(Vec<TrainingInstance>, Vec<(String, Discard)>)> {
    let sampling = sub_seed(seed, "sampling");
    let results: Vec<std::result::Result<TrainingInstance, (String, Discard)>> = dataset
        .par_iter()
        .enumerate()
        .map(|(qi, ex)| {
            let positive_index = match level {
                Level::Document => &indexes.fulltext,
                Level::Passage => &indexes.passages,
            };
            let positive = match select_positive(ex, store, positive_index, level) {
                PositiveSelection::Discard(reason) => return Err((ex.question.clone(), reason)),
                sel => sel.id().expect("non-discard has id").to_string(),
            };
            let mut inst = TrainingInstance {
                question: ex.question.clone(),
                answers: ex.answers.clone(),
                positive_id: positive.clone(),
                negatives: Vec::new(),
                level,
            };
            let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(sampling ^ qi as u64));
            match level {
                Level::Document => {
                    for id in mine_abstract_negatives(ex, store, &indexes.abstracts, &positive, negatives.abstract_neg)
                    {
                        inst.push_negative(id, NegativeTag::Abstract);
                    }
                    for id in mine_alltext_negatives(ex, store, &indexes.fulltext, &positive, negatives.alltext) {
                        inst.push_negative(id, NegativeTag::Alltext);
                    }
                }
                Level::Passage => {
                    for id in mine_bm25_negatives(ex, store, &indexes.passages, &positive, negatives.bm25) {
                        inst.push_negative(id, NegativeTag::Bm25);
                    }
                    let p = store.passage(&positive).expect("positive from store");
                    if negatives.in_sec > 0 {
                        for id in sample(mine_insec_negatives(p, store, &ex.answers), negatives.in_sec, &mut rng) {
                            inst.push_negative(id, NegativeTag::InSec);
                        }
                    }
                    if negatives.in_doc > 0 {
                        for id in sample(mine_indoc_negatives(p, store, &ex.answers), negatives.in_doc, &mut rng) {
                            inst.push_negative(id, NegativeTag::InDoc);
                        }
                    }
                }
            }
            Ok(inst)
        })
        .collect();

    let mut instances = Vec::new();
    let mut discarded = Vec::new();
    for r in results {
        match r {
            Ok(i) => instances.push(i),
            Err((q, reason)) => {
                log::info!("discarding question {q:?}: {reason:?}");
                discarded.push((q, reason));
            }
        }
    }
    if instances.is_empty() && !dataset.is_empty() {
        return Err(Error::NoTrainableInstances);
    }
    Ok((instances, discarded))
}
