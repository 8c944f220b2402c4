//! Answer-containment accuracy and search timing.

use std::collections::{BTreeMap, HashMap};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::corpus::CorpusStore;
use crate::encoder::EmbeddingVector;
use crate::error::{Error, Result};
use crate::retriever::{Hierarchy, QuestionResult};
use crate::scalar::Scalar;
use crate::sparse::has_answer;
use crate::trainer::QaExample;

pub const REPORT_FORMAT: &str = "metrics-report";
pub const REPORT_VERSION: u32 = 1;

pub const DEFAULT_CUTOFFS: [usize; 3] = [1, 20, 100];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub per_cutoff: BTreeMap<usize, f64>,
    pub n_questions: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<TimingSummary>,
}

impl MetricsReport {
    /// True when accuracy never drops as the cutoff grows and stays in [0, 1].
    pub fn is_monotone(&self) -> bool {
        let v: Vec<f64> = self.per_cutoff.values().copied().collect();
        v.iter().all(|a| (0.0..=1.0).contains(a)) && v.windows(2).all(|w| w[0] <= w[1])
    }
}

fn first_hit_ranks<'a>(
    dataset: &'a [QaExample],
    results: impl Iterator<Item = (&'a str, Option<usize>)>,
) -> Result<Vec<Option<usize>>> {
    let mut index: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, ex) in dataset.iter().enumerate() {
        index.entry(ex.question.as_str()).or_default().push(i);
    }
    let mut used: HashMap<&str, usize> = HashMap::new();
    let mut ranks = vec![None; dataset.len()];
    for (question, rank) in results {
        let slots = index
            .get(question)
            .ok_or_else(|| Error::MissingQuestion(question.to_string()))?;
        // Repeated questions pair with dataset rows in order.
        let k = used.entry(question).or_default();
        if let Some(&row) = slots.get(*k) {
            ranks[row] = rank;
        }
        *k += 1;
    }
    Ok(ranks)
}

fn report(ranks: &[Option<usize>], cutoffs: &[usize]) -> MetricsReport {
    let n = ranks.len();
    let per_cutoff = cutoffs
        .iter()
        .map(|&k| {
            let hits = ranks.iter().filter(|r| r.is_some_and(|r| r <= k)).count();
            (k, if n == 0 { 0.0 } else { hits as f64 / n as f64 })
        })
        .collect();
    MetricsReport {
        per_cutoff,
        n_questions: n,
        timing: None,
    }
}

/// Fraction of dataset questions with an answer-bearing passage in the top
/// `k`, for every cutoff. Questions without results count as misses.
pub fn topk_accuracy(results: &[QuestionResult], dataset: &[QaExample], cutoffs: &[usize]) -> Result<MetricsReport> {
    let ranks = first_hit_ranks(
        dataset,
        results.iter().map(|r| {
            (
                r.question.as_str(),
                r.hits.iter().position(|h| h.has_answer).map(|p| p + 1),
            )
        }),
    )?;
    Ok(report(&ranks, cutoffs))
}

/// Ranked documents for one question.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocResult {
    pub question: String,
    pub doc_ids: Vec<String>,
}

impl DocResult {
    /// Distinct parent documents of a passage ranking, in first-seen order.
    pub fn from_passages(result: &QuestionResult) -> Self {
        let mut doc_ids: Vec<String> = Vec::new();
        for h in &result.hits {
            if !doc_ids.contains(&h.doc_id) {
                doc_ids.push(h.doc_id.clone());
            }
        }
        Self {
            question: result.question.clone(),
            doc_ids,
        }
    }
}

/// Document-level accuracy: a hit counts when the document's full text
/// contains an answer.
pub fn doc_topk_accuracy(
    results: &[DocResult],
    dataset: &[QaExample],
    store: &CorpusStore,
    cutoffs: &[usize],
) -> Result<MetricsReport> {
    let answers: HashMap<&str, &[String]> = dataset
        .iter()
        .map(|e| (e.question.as_str(), e.answers.as_slice()))
        .collect();
    let mut firsts = Vec::with_capacity(results.len());
    for r in results {
        let ans = answers
            .get(r.question.as_str())
            .ok_or_else(|| Error::MissingQuestion(r.question.clone()))?;
        let rank = r
            .doc_ids
            .iter()
            .position(|id| store.document(id).is_some_and(|d| has_answer(&d.full_text(), ans)))
            .map(|p| p + 1);
        firsts.push((r.question.as_str(), rank));
    }
    let ranks = first_hit_ranks(dataset, firsts.into_iter())?;
    Ok(report(&ranks, cutoffs))
}

/// Mean per-question search time of each stage, in milliseconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingSummary {
    pub doc_ms: f64,
    pub candidate_ms: f64,
    pub flat_ms: f64,
    /// `flat / (doc + candidate)`.
    pub speedup: f64,
    /// Mean share of passages scored in the candidate stage.
    pub mean_candidate_fraction: f64,
    pub mean_candidates: f64,
    pub n_questions: usize,
    pub repeats: usize,
    pub threads: usize,
}

/// Times document search, candidate passage scoring and a flat passage scan
/// over pre-encoded queries. One warm-up pass is discarded and `repeats`
/// measured passes are averaged; encoding is not timed.
pub fn time_stages<S: Scalar>(
    hierarchy: &Hierarchy<S>,
    queries: &[(EmbeddingVector<S>, EmbeddingVector<S>)],
    k1: usize,
    k2: usize,
    lambda: f64,
    repeats: usize,
) -> Result<TimingSummary> {
    if queries.is_empty() {
        return Err(Error::EmptyDevSet);
    }
    let repeats = repeats.max(1);
    let lambda = S::of(lambda);
    let (mut doc_t, mut cand_t, mut flat_t) = (0.0f64, 0.0f64, 0.0f64);
    let mut cand_total = 0usize;
    let mut sink = 0usize;
    for pass in 0..=repeats {
        let measured = pass > 0;
        for (dq, pq) in queries {
            let t0 = Instant::now();
            let docs = hierarchy.top_documents(dq, k1)?;
            let t1 = Instant::now();
            let cands = hierarchy.candidates_of(&docs, pq)?;
            let n_cands = cands.len();
            let hits = hierarchy.rank(cands, k2, Some(lambda));
            let t2 = Instant::now();
            let flat = hierarchy.passage_index().top_rows(pq, k2, None)?;
            let t3 = Instant::now();
            sink = sink.wrapping_add(hits.len() + flat.len());
            if measured {
                doc_t += (t1 - t0).as_secs_f64();
                cand_t += (t2 - t1).as_secs_f64();
                flat_t += (t3 - t2).as_secs_f64();
                cand_total += n_cands;
            }
        }
    }
    std::hint::black_box(sink);
    let n = (queries.len() * repeats) as f64;
    let ms = |t: f64| t * 1e3 / n;
    let mean_candidates = cand_total as f64 / n;
    let hier = doc_t + cand_t;
    Ok(TimingSummary {
        doc_ms: ms(doc_t),
        candidate_ms: ms(cand_t),
        flat_ms: ms(flat_t),
        speedup: if hier > 0.0 { flat_t / hier } else { f64::INFINITY },
        mean_candidate_fraction: mean_candidates / hierarchy.num_passages().max(1) as f64,
        mean_candidates,
        n_questions: queries.len(),
        repeats,
        threads: rayon::current_num_threads(),
    })
}

/// Versioned report file contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub format: String,
    pub version: u32,
    pub config_hash: Option<String>,
    pub config: serde_json::Value,
    pub passage: MetricsReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub document: Option<MetricsReport>,
}

impl ReportFile {
    pub fn new(
        config_hash: Option<String>,
        config: serde_json::Value,
        passage: MetricsReport,
        document: Option<MetricsReport>,
    ) -> Self {
        Self {
            format: REPORT_FORMAT.into(),
            version: REPORT_VERSION,
            config_hash,
            config,
            passage,
            document,
        }
    }
}
