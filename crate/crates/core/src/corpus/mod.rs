//! Structured documents: title trees, summaries, passage splitting and the
//! immutable corpus store.

mod repr;
mod split;
mod tree;

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{read_lines, write_jsonl, Header};

pub use repr::{document_summary, linearize_toc, passage_representation, SeparatorStyle, CLS, SEP};
pub use split::{split_sections, split_text, DEFAULT_MAX_WORDS};
pub use tree::{parse_document, ContentLeaf, Document, RawRecord, RawSection, TitleNode, TitleTree};

/// A block of at most `max_words` words from a single content leaf.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Passage {
    pub passage_id: String,
    pub doc_id: String,
    pub leaf_id: usize,
    pub title_path: Vec<String>,
    pub text: String,
    pub word_count: usize,
}

/// One line of the optional passage dump.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PassageRecord {
    pub passage_id: String,
    pub doc_id: String,
    pub title_path: Vec<String>,
    pub text: String,
}

/// Documents and passages keyed by id. Immutable once built.
#[derive(Debug, Clone, Default)]
pub struct CorpusStore {
    documents: BTreeMap<String, Document>,
    passages: BTreeMap<String, Passage>,
    doc_to_passages: BTreeMap<String, Vec<String>>,
    max_words: usize,
}

impl CorpusStore {
    /// Builds a store from already-parsed documents, splitting each into
    /// passages. Fails on a repeated `doc_id`.
    pub fn from_documents(docs: Vec<Document>, max_words: usize) -> Result<Self> {
        let split: Vec<(Document, Vec<Passage>)> = docs
            .into_par_iter()
            .map(|mut d| {
                let ps = split_sections(&d, max_words);
                d.passages = ps.iter().map(|p| p.passage_id.clone()).collect();
                (d, ps)
            })
            .collect();

        let mut store = CorpusStore {
            max_words,
            ..Default::default()
        };
        for (doc, ps) in split {
            if store.documents.contains_key(&doc.doc_id) {
                return Err(Error::DuplicateDocId(doc.doc_id));
            }
            store.doc_to_passages.insert(doc.doc_id.clone(), doc.passages.clone());
            for p in ps {
                store.passages.insert(p.passage_id.clone(), p);
            }
            store.documents.insert(doc.doc_id.clone(), doc);
        }
        Ok(store)
    }

    pub fn from_records(records: &[RawRecord], max_words: usize) -> Result<Self> {
        let docs = records.par_iter().map(parse_document).collect::<Result<Vec<_>>>()?;
        Self::from_documents(docs, max_words)
    }

    /// Loads a line-delimited corpus file.
    pub fn load(path: &Path, max_words: usize) -> Result<Self> {
        let lines = read_lines(path)?;
        let docs = lines
            .par_iter()
            .map(|(line_no, line)| {
                let raw: RawRecord = serde_json::from_str(line).map_err(|e| Error::Parse {
                    line: *line_no,
                    message: e.to_string(),
                })?;
                parse_document(&raw).map_err(|e| match e {
                    Error::MalformedRecord(m) => Error::Parse {
                        line: *line_no,
                        message: m,
                    },
                    Error::EmptyDocument => Error::Parse {
                        line: *line_no,
                        message: "empty document".into(),
                    },
                    other => other,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_documents(docs, max_words)
    }

    pub fn max_words(&self) -> usize {
        self.max_words
    }

    pub fn num_documents(&self) -> usize {
        self.documents.len()
    }

    pub fn num_passages(&self) -> usize {
        self.passages.len()
    }

    pub fn document(&self, doc_id: &str) -> Option<&Document> {
        self.documents.get(doc_id)
    }

    pub fn passage(&self, passage_id: &str) -> Option<&Passage> {
        self.passages.get(passage_id)
    }

    /// Documents in ascending id order.
    pub fn documents(&self) -> impl Iterator<Item = &Document> {
        self.documents.values()
    }

    /// Passages in ascending id order.
    pub fn passages(&self) -> impl Iterator<Item = &Passage> {
        self.passages.values()
    }

    /// Passage ids of a document in document order.
    pub fn passages_of(&self, doc_id: &str) -> &[String] {
        self.doc_to_passages.get(doc_id).map(Vec::as_slice).unwrap_or(&[])
    }

    /// First document whose title equals `title` exactly.
    pub fn document_by_title(&self, title: &str) -> Option<&Document> {
        self.documents.values().find(|d| d.title == title)
    }

    pub fn dump_passages(&self, path: &Path, header: Option<&Header>) -> Result<()> {
        let records: Vec<PassageRecord> = self
            .documents
            .values()
            .flat_map(|d| d.passages.iter())
            .map(|id| {
                let p = &self.passages[id];
                PassageRecord {
                    passage_id: p.passage_id.clone(),
                    doc_id: p.doc_id.clone(),
                    title_path: p.title_path.clone(),
                    text: p.text.clone(),
                }
            })
            .collect();
        write_jsonl(path, header, &records)
    }
}

/// Loads a corpus file with the default 100-word passage bound.
pub fn load_corpus(path: &Path) -> Result<CorpusStore> {
    CorpusStore::load(path, DEFAULT_MAX_WORDS)
}
