//! BM25 over passages or documents, and answer-containment testing.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::CorpusStore;
use crate::error::{Error, Result};
use crate::retriever::ScoredHit;
use crate::text::normalize_tokens;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 1.2, b: 0.75 }
    }
}

/// Which text a BM25 index covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bm25Field {
    PassageText,
    DocAbstract,
    DocFulltext,
}

#[derive(Debug, Clone)]
pub struct Bm25Index {
    field: Bm25Field,
    params: Bm25Params,
    unit_ids: Vec<String>,
    lengths: Vec<usize>,
    avg_length: f64,
    postings: HashMap<String, Vec<(u32, u32)>>,
}

impl Bm25Index {
    /// Indexes `(unit_id, text)` pairs. Terms are lowercased,
    /// punctuation-stripped whitespace tokens.
    pub fn build<I, S, T>(field: Bm25Field, units: I, params: Bm25Params) -> Result<Self>
    where
        I: IntoIterator<Item = (S, T)>,
        S: Into<String>,
        T: AsRef<str>,
    {
        if !(params.k1 > 0.0) || !(0.0..=1.0).contains(&params.b) {
            return Err(Error::Config(format!(
                "bm25 requires k1 > 0 and 0 <= b <= 1, got k1={} b={}",
                params.k1, params.b
            )));
        }
        let mut seen = BTreeSet::new();
        let mut unit_ids = Vec::new();
        let mut lengths = Vec::new();
        let mut postings: HashMap<String, Vec<(u32, u32)>> = HashMap::new();
        for (id, text) in units {
            let id: String = id.into();
            if !seen.insert(id.clone()) {
                return Err(Error::DuplicateUnitId(id));
            }
            let idx = unit_ids.len() as u32;
            let tokens = normalize_tokens(text.as_ref());
            let mut tf: HashMap<String, u32> = HashMap::new();
            for t in &tokens {
                *tf.entry(t.clone()).or_default() += 1;
            }
            for (term, count) in tf {
                postings.entry(term).or_default().push((idx, count));
            }
            lengths.push(tokens.len());
            unit_ids.push(id);
        }
        let avg_length = if lengths.is_empty() {
            0.0
        } else {
            lengths.iter().sum::<usize>() as f64 / lengths.len() as f64
        };
        Ok(Self {
            field,
            params,
            unit_ids,
            lengths,
            avg_length,
            postings,
        })
    }

    /// Passage-text index over every passage in the store.
    pub fn over_passages(store: &CorpusStore, params: Bm25Params) -> Result<Self> {
        Self::build(
            Bm25Field::PassageText,
            store.passages().map(|p| (p.passage_id.clone(), p.text.clone())),
            params,
        )
    }

    /// Abstract-only document index.
    pub fn over_abstracts(store: &CorpusStore, params: Bm25Params) -> Result<Self> {
        Self::build(
            Bm25Field::DocAbstract,
            store.documents().map(|d| (d.doc_id.clone(), d.abstract_text.clone())),
            params,
        )
    }

    /// Full-text document index.
    pub fn over_fulltext(store: &CorpusStore, params: Bm25Params) -> Result<Self> {
        Self::build(
            Bm25Field::DocFulltext,
            store.documents().map(|d| (d.doc_id.clone(), d.full_text())),
            params,
        )
    }

    pub fn field(&self) -> Bm25Field {
        self.field
    }

    pub fn params(&self) -> Bm25Params {
        self.params
    }

    pub fn len(&self) -> usize {
        self.unit_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.unit_ids.is_empty()
    }

    pub fn avg_length(&self) -> f64 {
        self.avg_length
    }

    pub fn unit_length(&self, unit_id: &str) -> Option<usize> {
        self.unit_ids.iter().position(|u| u == unit_id).map(|i| self.lengths[i])
    }

    /// Distinct terms of one unit.
    pub fn terms_of(&self, unit_id: &str) -> BTreeSet<String> {
        let Some(idx) = self.unit_ids.iter().position(|u| u == unit_id) else {
            return BTreeSet::new();
        };
        self.postings
            .iter()
            .filter(|(_, list)| list.iter().any(|&(u, _)| u as usize == idx))
            .map(|(t, _)| t.clone())
            .collect()
    }

    fn idf(&self, df: usize) -> f64 {
        let n = self.unit_ids.len() as f64;
        let df = df as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    /// Top-`k` units by BM25; zero-score units are omitted and ties go to the
    /// smaller unit id. Each distinct query term counts once.
    pub fn search(&self, query: &str, k: usize) -> Vec<ScoredHit<f64>> {
        let terms: BTreeSet<String> = normalize_tokens(query).into_iter().collect();
        let Bm25Params { k1, b } = self.params;
        let mut scores: HashMap<u32, f64> = HashMap::new();
        for term in &terms {
            let Some(list) = self.postings.get(term) else {
                continue;
            };
            let idf = self.idf(list.len());
            for &(unit, tf) in list {
                let tf = tf as f64;
                let len = self.lengths[unit as usize] as f64;
                let norm = k1 * (1.0 - b + b * len / self.avg_length);
                *scores.entry(unit).or_default() += idf * tf * (k1 + 1.0) / (tf + norm);
            }
        }
        let mut hits: Vec<ScoredHit<f64>> = scores
            .into_iter()
            .filter(|&(_, s)| s > 0.0)
            .map(|(u, s)| ScoredHit::new(self.unit_ids[u as usize].clone(), s))
            .collect();
        crate::retriever::sort_hits(&mut hits);
        hits.truncate(k);
        hits
    }
}

/// True when the normalized tokens of any answer occur contiguously in the
/// normalized tokens of `text`.
pub fn has_answer<A: AsRef<str>>(text: &str, answers: &[A]) -> bool {
    let hay = normalize_tokens(text);
    answers.iter().any(|a| {
        let needle = normalize_tokens(a.as_ref());
        contains_run(&hay, &needle)
    })
}

pub(crate) fn contains_run(hay: &[String], needle: &[String]) -> bool {
    !needle.is_empty() && needle.len() <= hay.len() && hay.windows(needle.len()).any(|w| w == needle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toy() -> Bm25Index {
        Bm25Index::build(
            Bm25Field::PassageText,
            [("d1", "apple"), ("d2", "apple banana"), ("d3", "banana")],
            Bm25Params::default(),
        )
        .unwrap()
    }

    /// Scalar BM25 written out term by term, independent of the postings path.
    fn oracle_scores(units: &[(String, String)], query: &str, k1: f64, b: f64) -> Vec<(String, f64)> {
        let docs: Vec<Vec<String>> = units.iter().map(|(_, t)| normalize_tokens(t)).collect();
        let n = docs.len() as f64;
        let avg = docs.iter().map(|d| d.len()).sum::<usize>() as f64 / n;
        let mut q = normalize_tokens(query);
        q.sort();
        q.dedup();
        units
            .iter()
            .zip(&docs)
            .map(|((id, _), d)| {
                let mut s = 0.0;
                for term in &q {
                    let df = docs.iter().filter(|x| x.contains(term)).count() as f64;
                    let tf = d.iter().filter(|w| *w == term).count() as f64;
                    if tf == 0.0 {
                        continue;
                    }
                    let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
                    s += idf * (tf * (k1 + 1.0)) / (tf + k1 * (1.0 - b + b * d.len() as f64 / avg));
                }
                (id.clone(), s)
            })
            .collect()
    }

    #[test]
    fn average_length_and_terms() {
        let idx = toy();
        assert!((idx.avg_length() - 4.0 / 3.0).abs() < 1e-12);
        let terms: Vec<_> = idx.terms_of("d2").into_iter().collect();
        assert_eq!(terms, vec!["apple", "banana"]);
    }

    #[test]
    fn apple_query_matches_oracle() {
        let idx = toy();
        let hits = idx.search("apple", 10);
        assert_eq!(hits.len(), 2);
        assert_eq!(hits[0].unit_id, "d1");
        // Frozen from the scalar oracle: ln(1.6) * 2.2 / 1.975.
        assert!((hits[0].score - 0.523_548_3).abs() < 1e-6, "{}", hits[0].score);
        let units: Vec<(String, String)> = [("d1", "apple"), ("d2", "apple banana"), ("d3", "banana")]
            .iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect();
        let oracle = oracle_scores(&units, "apple", 1.2, 0.75);
        assert!((oracle[0].1 - hits[0].score).abs() < 1e-12);
    }

    #[test]
    fn empty_and_unmatched_queries() {
        let empty = Bm25Index::build(
            Bm25Field::PassageText,
            Vec::<(String, String)>::new(),
            Bm25Params::default(),
        )
        .unwrap();
        assert!(empty.search("apple", 5).is_empty());
        assert!(toy().search("cherry", 5).is_empty());
        assert_eq!(toy().search("apple banana", 100).len(), 3);
    }

    #[test]
    fn duplicate_ids_rejected() {
        let r = Bm25Index::build(Bm25Field::PassageText, [("a", "x"), ("a", "y")], Bm25Params::default());
        assert!(matches!(r, Err(Error::DuplicateUnitId(id)) if id == "a"));
    }

    #[test]
    fn answer_matching() {
        let text = "In 1953, James Watson and Francis Crick proposed the double helix.";
        assert!(has_answer(text, &["James Watson"]));
        assert!(!has_answer("Watson, James", &["James Watson"]));
        assert!(has_answer("the dna molecule", &["DNA."]));
        assert!(!has_answer("the dna molecule", &["..."]));
    }

    /// Plain nested-loop matcher over normalized tokens.
    fn naive_contains(text: &str, answer: &str) -> bool {
        let h = normalize_tokens(text);
        let n = normalize_tokens(answer);
        if n.is_empty() {
            return false;
        }
        for start in 0..h.len() {
            let mut ok = true;
            for j in 0..n.len() {
                if start + j >= h.len() || h[start + j] != n[j] {
                    ok = false;
                    break;
                }
            }
            if ok {
                return true;
            }
        }
        false
    }

    const WORDS: &[&str] = &["apple", "banana", "cherry", "date", "elder", "fig"];

    fn text_strategy(max: usize) -> impl Strategy<Value = String> {
        prop::collection::vec(0..WORDS.len(), 0..max)
            .prop_map(|ix| ix.into_iter().map(|i| WORDS[i]).collect::<Vec<_>>().join(" "))
    }

    proptest! {
        #[test]
        fn search_equals_exhaustive_scoring(
            texts in prop::collection::vec(text_strategy(8), 1..20),
            query in text_strategy(4),
        ) {
            let units: Vec<(String, String)> =
                texts.into_iter().enumerate().map(|(i, t)| (format!("u{i:02}"), t)).collect();
            let idx = Bm25Index::build(Bm25Field::PassageText, units.clone(), Bm25Params::default()).unwrap();
            let mut oracle: Vec<(String, f64)> =
                oracle_scores(&units, &query, 1.2, 0.75).into_iter().filter(|(_, s)| *s > 0.0).collect();
            oracle.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
            let hits = idx.search(&query, units.len());
            prop_assert_eq!(hits.len(), oracle.len());
            for (h, (id, s)) in hits.iter().zip(&oracle) {
                prop_assert!((h.score - s).abs() <= 1e-9 * s.abs().max(1.0));
                // Ids agree unless the oracle has a near-tie at this rank.
                if h.unit_id != *id {
                    prop_assert!((h.score - s).abs() < 1e-9);
                }
            }
        }

        #[test]
        fn has_answer_matches_naive_and_ignores_case(
            text in text_strategy(12),
            answer in text_strategy(3),
        ) {
            prop_assert_eq!(has_answer(&text, &[&answer]), naive_contains(&text, &answer));
            let shouted = text.to_uppercase().replace(' ', ", ");
            prop_assert_eq!(has_answer(&shouted, &[&answer]), has_answer(&text, &[&answer]));
            let dotted = format!("{}.", answer.to_uppercase());
            prop_assert_eq!(has_answer(&text, &[&dotted]), has_answer(&text, &[&answer]));
        }
    }
}
