//! Training data construction, the in-batch contrastive objective, the
//! training loop and hard-negative mining for later iterations.

mod iterate;
mod loss;
mod mining;
mod train;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{document_summary, passage_representation, CorpusStore, SeparatorStyle};
use crate::error::{Error, Result};
use crate::index::Level;
use crate::io::{read_jsonl, write_jsonl, Header};

pub use iterate::{mine_iter_hard_negatives, union_negatives};
pub use loss::{build_batch, contrastive_loss, loss_and_grad, FeatureCache};
pub use mining::{
    build_instances, mine_abstract_negatives, mine_alltext_negatives, mine_bm25_negatives, mine_indoc_negatives,
    mine_insec_negatives, select_positive, Discard, MiningIndexes, NegativeConfig, PositiveSelection, POSITIVE_DEPTH,
};
pub use train::{dev_accuracy, train, train_from_dataset, TrainConfig, TrainOutcome};

pub const INSTANCE_FORMAT: &str = "training-instances";
pub const INSTANCE_VERSION: u32 = 1;

/// A question with its accepted answers and optional gold supervision.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaExample {
    pub question: String,
    pub answers: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_doc_title: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_context: Option<String>,
}

impl QaExample {
    pub fn new(question: impl Into<String>, answers: Vec<String>) -> Self {
        Self {
            question: question.into(),
            answers,
            gold_doc_title: None,
            gold_context: None,
        }
    }
}

/// Reads a QA dataset file, rejecting examples without answers.
pub fn load_dataset(path: &Path) -> Result<Vec<QaExample>> {
    let (_, examples): (_, Vec<QaExample>) = read_jsonl(path)?;
    for (i, ex) in examples.iter().enumerate() {
        if ex.answers.is_empty() {
            return Err(Error::Parse {
                line: i + 1,
                message: format!("question `{}` has no answers", ex.question),
            });
        }
    }
    Ok(examples)
}

/// Where a negative came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NegativeTag {
    Bm25,
    Abstract,
    Alltext,
    InDoc,
    InSec,
    IterHard,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Negative {
    pub id: String,
    pub tag: NegativeTag,
}

/// `(question, positive, negatives)` at one level.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingInstance {
    pub question: String,
    #[serde(default)]
    pub answers: Vec<String>,
    pub positive_id: String,
    pub negatives: Vec<Negative>,
    pub level: Level,
}

impl TrainingInstance {
    /// Appends a negative unless it is the positive or already present.
    pub fn push_negative(&mut self, id: String, tag: NegativeTag) {
        if id != self.positive_id && !self.negatives.iter().any(|n| n.id == id) {
            self.negatives.push(Negative { id, tag });
        }
    }
}

pub fn save_instances(path: &Path, instances: &[TrainingInstance], config_hash: Option<&str>) -> Result<()> {
    let header = Header::new(INSTANCE_FORMAT, INSTANCE_VERSION, config_hash);
    write_jsonl(path, Some(&header), instances)
}

pub fn load_instances(path: &Path) -> Result<Vec<TrainingInstance>> {
    let (header, instances) = read_jsonl(path)?;
    if let Some(h) = header {
        if h.format != INSTANCE_FORMAT {
            return Err(Error::Format(format!("expected {INSTANCE_FORMAT}, found {}", h.format)));
        }
    }
    Ok(instances)
}

/// Encoder input text of a unit: document summary or passage representation.
pub fn unit_text(store: &CorpusStore, level: Level, id: &str, style: SeparatorStyle) -> Option<String> {
    match level {
        Level::Document => store.document(id).map(|d| document_summary(d, style)),
        Level::Passage => store.passage(id).map(|p| passage_representation(p, style)),
    }
}

/// Text used for answer containment: full document text or passage text.
pub fn answer_text(store: &CorpusStore, level: Level, id: &str) -> Option<String> {
    match level {
        Level::Document => store.document(id).map(|d| d.full_text()),
        Level::Passage => store.passage(id).map(|p| p.text.clone()),
    }
}
