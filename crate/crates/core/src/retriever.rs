//! Document-then-passage retrieval with score fusion.
//!
//! Serial reranking retrieves the top `k1` documents, scores every passage
//! they contain and ranks by `passage_score + lambda * doc_score`. The two
//! ablations either skip the fusion (`NoRerank`) or skip the pruning and fuse
//! over the whole corpus (`ParallelRerank`).

use std::cmp::Ordering;
use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::CorpusStore;
use crate::encoder::{EmbeddingVector, EncoderModel, Side};
use crate::error::{Error, Result};
use crate::index::{top_k, Level, MipsIndex};
use crate::scalar::Scalar;
use crate::sparse::has_answer;
use crate::trainer::QaExample;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredHit<S> {
    pub unit_id: String,
    pub score: S,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doc_score: Option<S>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub passage_score: Option<S>,
}

impl<S: Scalar> ScoredHit<S> {
    pub fn new(unit_id: impl Into<String>, score: S) -> Self {
        Self {
            unit_id: unit_id.into(),
            score,
            doc_score: None,
            passage_score: None,
        }
    }
}

/// Descending score, ascending unit id.
pub fn sort_hits<S: Scalar>(hits: &mut [ScoredHit<S>]) {
    hits.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.unit_id.cmp(&b.unit_id))
    });
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RerankMode {
    /// Top-k1 documents, their passages, fused scores.
    #[default]
    SerialRerank,
    /// Top-k1 documents, their passages, passage score only.
    NoRerank,
    /// All documents and all passages, fused scores.
    ParallelRerank,
}

impl std::str::FromStr for RerankMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "serial_rerank" | "serial" => Ok(Self::SerialRerank),
            "no_rerank" | "none" => Ok(Self::NoRerank),
            "parallel_rerank" | "parallel" => Ok(Self::ParallelRerank),
            other => Err(Error::Config(format!("unknown rerank mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetrievalConfig {
    pub k1: usize,
    pub k2: usize,
    pub lambda: f64,
    #[serde(default)]
    pub mode: RerankMode,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        Self {
            k1: 100,
            k2: 100,
            lambda: 1.0,
            mode: RerankMode::SerialRerank,
        }
    }
}

impl RetrievalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k1 == 0 || self.k2 == 0 {
            return Err(Error::Config("k1 and k2 must be at least 1".into()));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::Config(format!(
                "lambda must be finite and >= 0, got {}",
                self.lambda
            )));
        }
        Ok(())
    }
}

/// A candidate passage with both component scores.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate<S> {
    pub passage_row: usize,
    pub passage_score: S,
    pub doc_score: S,
}

/// Document and passage indexes plus the containment map between their rows.
#[derive(Debug, Clone)]
pub struct Hierarchy<S> {
    doc_index: MipsIndex<S>,
    passage_index: MipsIndex<S>,
    doc_passage_rows: Vec<Vec<usize>>,
    passage_doc_row: Vec<usize>,
}

impl<S: Scalar> Hierarchy<S> {
    /// Links the two indexes through `parent_of(passage_id) -> doc_id`.
    pub fn new<F>(doc_index: MipsIndex<S>, passage_index: MipsIndex<S>, parent_of: F) -> Result<Self>
    where
        F: Fn(&str) -> Option<String>,
    {
        if doc_index.level() != Level::Document || passage_index.level() != Level::Passage {
            return Err(Error::Config(
                "hierarchy needs a document index and a passage index".into(),
            ));
        }
        if doc_index.dim() != passage_index.dim() {
            return Err(Error::DimensionMismatch {
                expected: doc_index.dim(),
                actual: passage_index.dim(),
            });
        }
        let mut doc_passage_rows = vec![Vec::new(); doc_index.len()];
        let mut passage_doc_row = Vec::with_capacity(passage_index.len());
        for (row, pid) in passage_index.ids().iter().enumerate() {
            let doc = parent_of(pid).ok_or_else(|| Error::UnknownUnit(pid.clone()))?;
            let drow = doc_index.row_of(&doc).ok_or(Error::UnknownUnit(doc))?;
            doc_passage_rows[drow].push(row);
            passage_doc_row.push(drow);
        }
        Ok(Self {
            doc_index,
            passage_index,
            doc_passage_rows,
            passage_doc_row,
        })
    }

    pub fn from_store(doc_index: MipsIndex<S>, passage_index: MipsIndex<S>, store: &CorpusStore) -> Result<Self> {
        Self::new(doc_index, passage_index, |pid| {
            store.passage(pid).map(|p| p.doc_id.clone())
        })
    }

    pub fn doc_index(&self) -> &MipsIndex<S> {
        &self.doc_index
    }

    pub fn passage_index(&self) -> &MipsIndex<S> {
        &self.passage_index
    }

    pub fn num_documents(&self) -> usize {
        self.doc_index.len()
    }

    pub fn num_passages(&self) -> usize {
        self.passage_index.len()
    }

    pub fn doc_id_of_passage_row(&self, row: usize) -> &str {
        &self.doc_index.ids()[self.passage_doc_row[row]]
    }

    pub fn passage_rows_of_doc_row(&self, row: usize) -> &[usize] {
        &self.doc_passage_rows[row]
    }

    /// Top-`k1` documents as `(row, score)`.
    pub fn top_documents(&self, doc_q: &EmbeddingVector<S>, k1: usize) -> Result<Vec<(usize, S)>> {
        self.doc_index.top_rows(doc_q, k1, None)
    }

    pub fn retrieve_documents(&self, doc_q: &EmbeddingVector<S>, k1: usize) -> Result<Vec<ScoredHit<S>>> {
        Ok(self
            .top_documents(doc_q, k1)?
            .into_iter()
            .map(|(r, s)| ScoredHit::new(self.doc_index.ids()[r].clone(), s))
            .collect())
    }

    /// Passage rows of the given documents, in document-rank order.
    pub fn candidate_rows(&self, docs: &[(usize, S)]) -> Vec<usize> {
        docs.iter()
            .flat_map(|&(d, _)| self.doc_passage_rows[d].iter().copied())
            .collect()
    }

    /// Passages of the top-`k1` documents with their passage and document
    /// scores.
    pub fn candidates(
        &self,
        doc_q: &EmbeddingVector<S>,
        passage_q: &EmbeddingVector<S>,
        k1: usize,
    ) -> Result<Vec<Candidate<S>>> {
        let docs = self.top_documents(doc_q, k1)?;
        self.candidates_of(&docs, passage_q)
    }

    /// Passages of already-ranked documents, scored against `passage_q`.
    pub fn candidates_of(&self, docs: &[(usize, S)], passage_q: &EmbeddingVector<S>) -> Result<Vec<Candidate<S>>> {
        let mut out = Vec::new();
        for &(drow, dscore) in docs {
            let rows = &self.doc_passage_rows[drow];
            let pscores = self.passage_index.score_rows(passage_q, rows)?;
            out.extend(rows.iter().zip(pscores).map(|(&r, p)| Candidate {
                passage_row: r,
                passage_score: p,
                doc_score: dscore,
            }));
        }
        Ok(out)
    }

    /// Every passage with its passage score and its parent's document score.
    pub fn all_candidates(
        &self,
        doc_q: &EmbeddingVector<S>,
        passage_q: &EmbeddingVector<S>,
    ) -> Result<Vec<Candidate<S>>> {
        let dscores = self.doc_index.score_all(doc_q)?;
        let pscores = self.passage_index.score_all(passage_q)?;
        Ok(pscores
            .into_iter()
            .enumerate()
            .map(|(r, p)| Candidate {
                passage_row: r,
                passage_score: p,
                doc_score: dscores[self.passage_doc_row[r]],
            })
            .collect())
    }

    /// Top-`k2` candidates by fused score, or by passage score alone when
    /// `lambda` is `None`.
    pub fn rank(&self, candidates: Vec<Candidate<S>>, k2: usize, lambda: Option<S>) -> Vec<ScoredHit<S>> {
        let by_row: HashMap<usize, Candidate<S>> = candidates.iter().map(|c| (c.passage_row, *c)).collect();
        let scored: Vec<(usize, S)> = candidates
            .iter()
            .map(|c| {
                let s = match lambda {
                    Some(l) => c.passage_score + l * c.doc_score,
                    None => c.passage_score,
                };
                (c.passage_row, s)
            })
            .collect();
        top_k(scored, k2)
            .into_iter()
            .map(|(r, s)| {
                let c = by_row[&r];
                ScoredHit {
                    unit_id: self.passage_index.ids()[r].clone(),
                    score: s,
                    doc_score: Some(c.doc_score),
                    passage_score: Some(c.passage_score),
                }
            })
            .collect()
    }

    /// Ranked passages for precomputed query vectors.
    pub fn retrieve(
        &self,
        doc_q: &EmbeddingVector<S>,
        passage_q: &EmbeddingVector<S>,
        config: &RetrievalConfig,
    ) -> Result<Vec<ScoredHit<S>>> {
        config.validate()?;
        let lambda = S::of(config.lambda);
        Ok(match config.mode {
            RerankMode::SerialRerank => {
                self.rank(self.candidates(doc_q, passage_q, config.k1)?, config.k2, Some(lambda))
            }
            RerankMode::NoRerank => self.rank(self.candidates(doc_q, passage_q, config.k1)?, config.k2, None),
            RerankMode::ParallelRerank => self.rank(self.all_candidates(doc_q, passage_q)?, config.k2, Some(lambda)),
        })
    }

    /// Flat passage search over the whole corpus.
    pub fn flat_passages(&self, passage_q: &EmbeddingVector<S>, k: usize) -> Result<Vec<ScoredHit<S>>> {
        self.passage_index.search(passage_q, k, None)
    }
}

/// Text-level retriever: one encoder per level over a shared hierarchy.
pub struct Retriever<'a, S> {
    pub hierarchy: &'a Hierarchy<S>,
    pub doc_model: &'a EncoderModel<S>,
    pub passage_model: &'a EncoderModel<S>,
}

impl<'a, S: Scalar> Retriever<'a, S> {
    pub fn new(
        hierarchy: &'a Hierarchy<S>,
        doc_model: &'a EncoderModel<S>,
        passage_model: &'a EncoderModel<S>,
    ) -> Result<Self> {
        if doc_model.dim() != hierarchy.doc_index().dim() {
            return Err(Error::DimensionMismatch {
                expected: hierarchy.doc_index().dim(),
                actual: doc_model.dim(),
            });
        }
        if passage_model.dim() != hierarchy.passage_index().dim() {
            return Err(Error::DimensionMismatch {
                expected: hierarchy.passage_index().dim(),
                actual: passage_model.dim(),
            });
        }
        Ok(Self {
            hierarchy,
            doc_model,
            passage_model,
        })
    }

    /// Question embeddings for the document and passage levels.
    pub fn encode_question(&self, question: &str) -> (EmbeddingVector<S>, EmbeddingVector<S>) {
        (
            self.doc_model.encode(Side::Question, question),
            self.passage_model.encode(Side::Question, question),
        )
    }

    pub fn retrieve_documents(&self, question: &str, k1: usize) -> Result<Vec<ScoredHit<S>>> {
        let q = self.doc_model.encode(Side::Question, question);
        self.hierarchy.retrieve_documents(&q, k1)
    }

    pub fn retrieve(&self, question: &str, config: &RetrievalConfig) -> Result<Vec<ScoredHit<S>>> {
        let (dq, pq) = self.encode_question(question);
        self.hierarchy.retrieve(&dq, &pq, config)
    }

    pub fn flat_passages(&self, question: &str, k: usize) -> Result<Vec<ScoredHit<S>>> {
        let q = self.passage_model.encode(Side::Question, question);
        self.hierarchy.flat_passages(&q, k)
    }

    /// Retrieves every question in parallel and annotates the hits.
    pub fn retrieve_all(
        &self,
        dataset: &[QaExample],
        config: &RetrievalConfig,
        store: &CorpusStore,
    ) -> Result<Vec<QuestionResult>> {
        dataset
            .par_iter()
            .map(|ex| {
                let hits = self.retrieve(&ex.question, config)?;
                Ok(annotate(&ex.question, &hits, &ex.answers, store))
            })
            .collect()
    }

    /// Per-question candidates with answer flags, for lambda tuning.
    pub fn lambda_pools(&self, dev: &[QaExample], k1: usize, store: &CorpusStore) -> Result<Vec<Vec<PoolEntry>>> {
        dev.par_iter()
            .map(|ex| {
                let (dq, pq) = self.encode_question(&ex.question);
                let cands = self.hierarchy.candidates(&dq, &pq, k1)?;
                Ok(cands
                    .into_iter()
                    .map(|c| {
                        let id = &self.hierarchy.passage_index().ids()[c.passage_row];
                        let text = store.passage(id).map_or("", |p| p.text.as_str());
                        PoolEntry {
                            passage_row: c.passage_row,
                            passage_score: c.passage_score.to_f64_lossy(),
                            doc_score: c.doc_score.to_f64_lossy(),
                            has_answer: has_answer(text, &ex.answers),
                        }
                    })
                    .collect())
            })
            .collect()
    }

    /// Coarse-to-fine lambda search on a dev set; see [`tune_lambda`].
    pub fn tune_lambda(&self, dev: &[QaExample], k1: usize, store: &CorpusStore) -> Result<LambdaSearch> {
        if dev.is_empty() {
            return Err(Error::EmptyDevSet);
        }
        tune_lambda(&self.lambda_pools(dev, k1, store)?, TUNE_CUTOFF, (0.0, 2.0))
    }
}

/// One hit of the retrieval output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievedPassage {
    pub passage_id: String,
    pub doc_id: String,
    pub score: f64,
    pub passage_score: Option<f64>,
    pub doc_score: Option<f64>,
    pub rank: usize,
    pub has_answer: bool,
}

/// One line of the retrieval output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionResult {
    pub question: String,
    pub hits: Vec<RetrievedPassage>,
}

/// Attaches parent ids, ranks and answer flags to ranked passage hits.
pub fn annotate<S: Scalar, A: AsRef<str>>(
    question: &str,
    hits: &[ScoredHit<S>],
    answers: &[A],
    store: &CorpusStore,
) -> QuestionResult {
    let hits = hits
        .iter()
        .enumerate()
        .map(|(i, h)| {
            let passage = store.passage(&h.unit_id);
            RetrievedPassage {
                passage_id: h.unit_id.clone(),
                doc_id: passage.map(|p| p.doc_id.clone()).unwrap_or_default(),
                score: h.score.to_f64_lossy(),
                passage_score: h.passage_score.map(Scalar::to_f64_lossy),
                doc_score: h.doc_score.map(Scalar::to_f64_lossy),
                rank: i + 1,
                has_answer: passage.is_some_and(|p| has_answer(&p.text, answers)),
            }
        })
        .collect();
    QuestionResult {
        question: question.to_string(),
        hits,
    }
}

/// Cutoff optimised by lambda tuning.
pub const TUNE_CUTOFF: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoolEntry {
    pub passage_row: usize,
    pub passage_score: f64,
    pub doc_score: f64,
    pub has_answer: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaSearch {
    pub lambda: f64,
    pub accuracy: f64,
    pub coarse: Vec<(f64, f64)>,
    pub fine: Vec<(f64, f64)>,
}

/// Fraction of questions with an answer-bearing passage in the fused top
/// `cutoff`.
pub fn fused_accuracy(pools: &[Vec<PoolEntry>], lambda: f64, cutoff: usize) -> f64 {
    if pools.is_empty() {
        return 0.0;
    }
    let hits = pools
        .iter()
        .filter(|pool| {
            let scored: Vec<(usize, f64)> = pool
                .iter()
                .enumerate()
                .map(|(i, e)| (i, e.passage_score + lambda * e.doc_score))
                .collect();
            let mut scored = scored;
            scored.sort_by(|a, b| {
                b.1.partial_cmp(&a.1)
                    .unwrap_or(Ordering::Equal)
                    .then_with(|| pool[a.0].passage_row.cmp(&pool[b.0].passage_row))
            });
            scored.iter().take(cutoff).any(|&(i, _)| pool[i].has_answer)
        })
        .count();
    hits as f64 / pools.len() as f64
}

/// Grid search: step 0.1 over `bounds`, then step 0.01 within +-0.05 of the
/// coarse optimum. Ties go to the smaller lambda.
pub fn tune_lambda(pools: &[Vec<PoolEntry>], cutoff: usize, bounds: (f64, f64)) -> Result<LambdaSearch> {
    if pools.is_empty() {
        return Err(Error::EmptyDevSet);
    }
    let (lo, hi) = bounds;
    let lo_c = (lo * 100.0).round() as i64;
    let hi_c = (hi * 100.0).round() as i64;
    let eval = |centi: i64| {
        let l = centi as f64 / 100.0;
        (l, fused_accuracy(pools, l, cutoff))
    };
    let best_of = |pts: &[(f64, f64)]| {
        pts.iter()
            .copied()
            .fold(None, |best: Option<(f64, f64)>, p| match best {
                Some(b) if b.1 >= p.1 => Some(b),
                _ => Some(p),
            })
    };

    let coarse: Vec<(f64, f64)> = (lo_c..=hi_c).step_by(10).map(eval).collect();
    let (l1, _) = best_of(&coarse).expect("non-empty grid");
    let c1 = (l1 * 100.0).round() as i64;
    let fine: Vec<(f64, f64)> = ((c1 - 5).max(lo_c)..=(c1 + 5).min(hi_c)).map(eval).collect();
    let (lambda, accuracy) = best_of(&fine).expect("non-empty grid");
    Ok(LambdaSearch {
        lambda,
        accuracy,
        coarse,
        fine,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hierarchy(docs: &[(&str, Vec<f64>)], passages: &[(&str, &str, Vec<f64>)]) -> Hierarchy<f64> {
        let dim = docs[0].1.len();
        let di = MipsIndex::from_rows(
            Level::Document,
            dim,
            docs.iter().map(|(i, v)| (i.to_string(), v.clone())).collect(),
        )
        .unwrap();
        let pi = MipsIndex::from_rows(
            Level::Passage,
            dim,
            passages.iter().map(|(i, _, v)| (i.to_string(), v.clone())).collect(),
        )
        .unwrap();
        let parents: HashMap<String, String> = passages
            .iter()
            .map(|(p, d, _)| (p.to_string(), d.to_string()))
            .collect();
        Hierarchy::new(di, pi, |p| parents.get(p).cloned()).unwrap()
    }

    /// 4 documents, 10 passages, 2-D. Query (1, 1) everywhere: doc score =
    /// x + y of the doc row, passage score likewise.
    fn fixture() -> Hierarchy<f64> {
        hierarchy(
            &[
                ("A", vec![3.0, 0.0]),
                ("B", vec![0.5, 0.0]),
                ("C", vec![1.0, 0.0]),
                ("D", vec![0.0, 0.0]),
            ],
            &[
                ("A#0", "A", vec![0.0, 1.0]),
                ("A#1", "A", vec![0.0, 2.0]), // gold: passage rank 2, doc rank 1
                ("A#2", "A", vec![0.0, 0.5]),
                ("B#0", "B", vec![0.0, 2.5]), // distractor: best passage, weak doc
                ("B#1", "B", vec![0.0, 0.1]),
                ("C#0", "C", vec![0.0, 1.5]),
                ("C#1", "C", vec![0.0, 0.2]),
                ("D#0", "D", vec![0.0, 1.8]),
                ("D#1", "D", vec![0.0, 0.3]),
                ("D#2", "D", vec![0.0, 0.4]),
            ],
        )
    }

    fn q() -> EmbeddingVector<f64> {
        EmbeddingVector::new(vec![1.0, 1.0])
    }

    fn ids(h: &[ScoredHit<f64>]) -> Vec<&str> {
        h.iter().map(|x| x.unit_id.as_str()).collect()
    }

    #[test]
    fn fusion_promotes_gold_passage() {
        let h = fixture();
        let flat = h.flat_passages(&q(), 3).unwrap();
        assert_eq!(ids(&flat), vec!["B#0", "A#1", "D#0"]);
        let cfg = RetrievalConfig {
            k1: 4,
            k2: 3,
            lambda: 1.0,
            mode: RerankMode::SerialRerank,
        };
        let fused = h.retrieve(&q(), &q(), &cfg).unwrap();
        // A#1: 2 + 3 = 5, A#0: 1 + 3 = 4, A#2: 0.5 + 3 = 3.5, B#0: 2.5 + 0.5 = 3.
        assert_eq!(ids(&fused), vec!["A#1", "A#0", "A#2"]);
        for hit in &fused {
            assert_eq!(hit.score, hit.passage_score.unwrap() + 1.0 * hit.doc_score.unwrap());
        }
    }

    #[test]
    fn candidate_set_is_union_of_top_documents() {
        let h = fixture();
        let c = h.candidates(&q(), &q(), 2).unwrap();
        // Top docs A (3) and C (1).
        let mut rows: Vec<&str> = c
            .iter()
            .map(|c| h.passage_index().ids()[c.passage_row].as_str())
            .collect();
        rows.sort();
        assert_eq!(rows, vec!["A#0", "A#1", "A#2", "C#0", "C#1"]);
        let big = RetrievalConfig {
            k1: 2,
            k2: 100,
            lambda: 0.5,
            mode: RerankMode::SerialRerank,
        };
        assert_eq!(h.retrieve(&q(), &q(), &big).unwrap().len(), 5);
        for k1 in 1..=4 {
            let a = h.candidates(&q(), &q(), k1).unwrap();
            let b = h.candidates(&q(), &q(), k1 + 1).unwrap();
            assert!(a.iter().all(|x| b.iter().any(|y| y.passage_row == x.passage_row)));
        }
    }

    #[test]
    fn lambda_zero_equals_no_rerank_and_full_k1_equals_parallel() {
        let h = fixture();
        let serial0 = RetrievalConfig {
            k1: 2,
            k2: 10,
            lambda: 0.0,
            mode: RerankMode::SerialRerank,
        };
        let none = RetrievalConfig {
            mode: RerankMode::NoRerank,
            ..serial0
        };
        assert_eq!(
            ids(&h.retrieve(&q(), &q(), &serial0).unwrap()),
            ids(&h.retrieve(&q(), &q(), &none).unwrap())
        );
        let serial = RetrievalConfig {
            k1: 4,
            k2: 10,
            lambda: 0.7,
            mode: RerankMode::SerialRerank,
        };
        let par = RetrievalConfig {
            mode: RerankMode::ParallelRerank,
            ..serial
        };
        assert_eq!(
            h.retrieve(&q(), &q(), &serial).unwrap(),
            h.retrieve(&q(), &q(), &par).unwrap()
        );
    }

    #[test]
    fn duplicate_documents_tie_by_id() {
        let h = hierarchy(
            &[("y", vec![1.0]), ("x", vec![1.0])],
            &[("x#0", "x", vec![1.0]), ("y#0", "y", vec![1.0])],
        );
        let d = h.retrieve_documents(&EmbeddingVector::new(vec![1.0]), 2).unwrap();
        assert_eq!(ids(&d), vec!["x", "y"]);
    }

    #[test]
    fn config_validation() {
        let h = fixture();
        let bad = RetrievalConfig {
            k1: 0,
            ..Default::default()
        };
        assert!(h.retrieve(&q(), &q(), &bad).is_err());
        let bad = RetrievalConfig {
            lambda: -0.1,
            ..Default::default()
        };
        assert!(h.retrieve(&q(), &q(), &bad).is_err());
    }

    fn entry(row: usize, p: f64, d: f64, ans: bool) -> PoolEntry {
        PoolEntry {
            passage_row: row,
            passage_score: p,
            doc_score: d,
            has_answer: ans,
        }
    }

    #[test]
    fn all_tied_grid_returns_zero() {
        let pools = vec![vec![entry(0, 1.0, 0.0, true)]];
        let r = tune_lambda(&pools, 20, (0.0, 2.0)).unwrap();
        assert_eq!(r.lambda, 0.0);
        assert_eq!(r.coarse.len(), 21);
        assert_eq!(r.fine.len(), 6);
        assert!(matches!(tune_lambda(&[], 20, (0.0, 2.0)), Err(Error::EmptyDevSet)));
    }

    #[test]
    fn fine_pass_refines_coarse_optimum() {
        // Cutoff 1; row 1 carries the answer and leads for 0.53 < l < 0.655:
        // it needs 10 l > 5.3 to pass row 0 and 10 l > -7.205 + 21 l to stay
        // ahead of row 2. Coarse optimum 0.6, fine window [0.55, 0.65].
        let pool = vec![
            entry(0, 5.3, 0.0, false),
            entry(1, 0.0, 10.0, true),
            entry(2, -7.205, 21.0, false),
        ];
        let r = tune_lambda(&[pool], 1, (0.0, 2.0)).unwrap();
        let coarse_best: Vec<f64> = r.coarse.iter().filter(|p| p.1 == 1.0).map(|p| p.0).collect();
        assert_eq!(coarse_best, vec![0.6]);
        assert!((r.lambda - 0.55).abs() < 1e-12, "{r:?}");
        assert_eq!(r.accuracy, 1.0);
    }
}
