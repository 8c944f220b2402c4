//! Synthetic corpora with planted answers, for tests and benchmarks.
//!
//! Every passage owns a set of key words and one answer token. Questions mix
//! the document's title words, a few of its topic words and a sample of the
//! passage's key words, never the answer. Optional distractor passages copy a
//! passage's key words and its document's title words into a different
//! document, without the answer.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{RawRecord, RawSection};
use crate::encoder::{sub_seed, EmbeddingVector};
use crate::error::Result;
use crate::index::{Level, MipsIndex};
use crate::retriever::{Hierarchy, PoolEntry};
use crate::trainer::QaExample;

const CONSONANTS: &[u8] = b"bdfgklmnprstvz";
const VOWELS: &[u8] = b"aeiou";

/// Pronounceable word for an integer; distinct integers give distinct words.
pub fn word(mut i: usize) -> String {
    let base = CONSONANTS.len() * VOWELS.len();
    let mut out = String::new();
    loop {
        let s = i % base;
        out.push(CONSONANTS[s / VOWELS.len()] as char);
        out.push(VOWELS[s % VOWELS.len()] as char);
        i /= base;
        if i == 0 {
            break;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedConfig {
    pub n_docs: usize,
    pub sections: usize,
    pub blocks_per_section: usize,
    /// Words per passage; also the splitting bound to load the corpus with.
    pub block_words: usize,
    pub key_words: usize,
    pub topic_words: usize,
    pub filler_pool: usize,
    /// Key words sampled into each question.
    pub question_keys: usize,
    pub train_per_passage: usize,
    pub n_dev: usize,
    pub n_test: usize,
    /// Fraction of passages that get a distractor copy in another document.
    pub distractor_rate: f64,
    pub seed: u64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        Self {
            n_docs: 200,
            sections: 3,
            blocks_per_section: 3,
            block_words: 50,
            key_words: 14,
            topic_words: 6,
            filler_pool: 400,
            question_keys: 5,
            train_per_passage: 6,
            n_dev: 100,
            n_test: 500,
            distractor_rate: 0.0,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone)]
struct Block {
    doc: usize,
    keys: Vec<String>,
    answer: String,
}

#[derive(Debug, Clone)]
pub struct PlantedTask {
    pub records: Vec<RawRecord>,
    pub train: Vec<QaExample>,
    pub dev: Vec<QaExample>,
    pub test: Vec<QaExample>,
    /// Indices into `test` whose gold passage has a distractor.
    pub distracted_test: Vec<usize>,
}

struct Vocab(usize);

impl Vocab {
    fn take(&mut self, n: usize) -> Vec<String> {
        let out = (self.0..self.0 + n).map(word).collect();
        self.0 += n;
        out
    }
}

fn block_text(parts: &[&[String]], filler: &[String], len: usize, rng: &mut ChaCha8Rng) -> String {
    let mut words: Vec<String> = parts.iter().flat_map(|p| p.iter().cloned()).collect();
    while words.len() < len {
        words.push(filler.choose(rng).expect("filler pool").clone());
    }
    words.truncate(len.max(1));
    words.shuffle(rng);
    words.join(" ")
}

pub fn planted(config: &PlantedConfig) -> PlantedTask {
    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(config.seed, "synth"));
    let mut vocab = Vocab(0);
    let filler = vocab.take(config.filler_pool);

    let mut titles = Vec::new();
    let mut topics = Vec::new();
    let mut blocks: Vec<Block> = Vec::new();
    let mut records = Vec::new();
    for d in 0..config.n_docs {
        let title = vocab.take(2);
        let topic = vocab.take(config.topic_words);
        let mut texts = Vec::new();
        for _ in 0..1 + config.sections * config.blocks_per_section {
            let keys = vocab.take(config.key_words);
            let answer = format!("{}{}", word(vocab.0), "q");
            vocab.0 += 1;
            let text = block_text(
                &[&keys, &topic, std::slice::from_ref(&answer)],
                &filler,
                config.block_words,
                &mut rng,
            );
            blocks.push(Block { doc: d, keys, answer });
            texts.push(text);
        }
        let mut it = texts.into_iter();
        let abstract_text = it.next().unwrap_or_default();
        let sections = (0..config.sections)
            .map(|s| RawSection {
                level: 1,
                title: format!("{} {}", word(vocab.0 + s), title[0]),
                text: (0..config.blocks_per_section)
                    .filter_map(|_| it.next())
                    .collect::<Vec<_>>()
                    .join(" "),
            })
            .collect();
        vocab.0 += config.sections;
        records.push(RawRecord {
            doc_id: format!("doc{d:05}"),
            title: title.join(" "),
            abstract_text,
            sections,
        });
        titles.push(title);
        topics.push(topic);
    }

    // Distractors: key words plus the gold title, in another document.
    let mut distracted = vec![false; blocks.len()];
    if config.distractor_rate > 0.0 && config.n_docs > 1 {
        for (b, block) in blocks.iter().enumerate() {
            if !rng.gen_bool(config.distractor_rate.min(1.0)) {
                continue;
            }
            let mut host = rng.gen_range(0..config.n_docs - 1);
            if host >= block.doc {
                host += 1;
            }
            let text = block_text(
                &[&block.keys, &titles[block.doc]],
                &filler,
                config.block_words,
                &mut rng,
            );
            records[host].sections.push(RawSection {
                level: 1,
                title: format!("{} notes", word(vocab.0)),
                text,
            });
            vocab.0 += 1;
            distracted[b] = true;
        }
    }

    let question = |b: &Block, rng: &mut ChaCha8Rng| -> String {
        let mut words: Vec<String> = titles[b.doc].clone();
        words.extend(topics[b.doc].choose_multiple(rng, 2.min(config.topic_words)).cloned());
        words.extend(
            b.keys
                .choose_multiple(rng, config.question_keys.min(b.keys.len()))
                .cloned(),
        );
        words.shuffle(rng);
        words.join(" ")
    };

    let mut train = Vec::new();
    for b in &blocks {
        for _ in 0..config.train_per_passage {
            let mut ex = QaExample::new(question(b, &mut rng), vec![b.answer.clone()]);
            ex.gold_doc_title = Some(records[b.doc].title.clone());
            ex.gold_context = Some(b.answer.clone());
            train.push(ex);
        }
    }
    let pick = |n: usize, rng: &mut ChaCha8Rng| -> Vec<usize> {
        let mut idx: Vec<usize> = (0..blocks.len()).collect();
        idx.shuffle(rng);
        idx.truncate(n);
        idx
    };
    let dev: Vec<QaExample> = pick(config.n_dev, &mut rng)
        .into_iter()
        .map(|b| QaExample::new(question(&blocks[b], &mut rng), vec![blocks[b].answer.clone()]))
        .collect();
    let test_blocks = pick(config.n_test, &mut rng);
    let test: Vec<QaExample> = test_blocks
        .iter()
        .map(|&b| QaExample::new(question(&blocks[b], &mut rng), vec![blocks[b].answer.clone()]))
        .collect();
    let distracted_test = test_blocks
        .iter()
        .enumerate()
        .filter(|(_, &b)| distracted[b])
        .map(|(i, _)| i)
        .collect();
    PlantedTask {
        records,
        train,
        dev,
        test,
        distracted_test,
    }
}

fn uniform_rows(n: usize, dim: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f32>> {
    (0..n)
        .map(|_| (0..dim).map(|_| rng.gen_range(-1.0f32..1.0)).collect())
        .collect()
}

/// Random document and passage embeddings with `per_doc` passages per
/// document, linked into a hierarchy.
pub fn random_hierarchy(n_docs: usize, per_doc: usize, dim: usize, seed: u64) -> Result<Hierarchy<f32>> {
    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(seed, "vectors"));
    let doc_ids: Vec<String> = (0..n_docs).map(|d| format!("d{d:07}")).collect();
    let docs = MipsIndex::from_rows(
        Level::Document,
        dim,
        doc_ids
            .iter()
            .cloned()
            .zip(uniform_rows(n_docs, dim, &mut rng))
            .collect(),
    )?;
    let pids: Vec<String> = doc_ids
        .iter()
        .flat_map(|d| (0..per_doc).map(move |p| format!("{d}#{p:04}")))
        .collect();
    let rows = uniform_rows(pids.len(), dim, &mut rng);
    let passages = MipsIndex::from_rows(Level::Passage, dim, pids.into_iter().zip(rows).collect())?;
    Hierarchy::new(docs, passages, |pid| pid.split('#').next().map(str::to_string))
}

/// Random `(doc_query, passage_query)` pairs.
pub fn random_queries(n: usize, dim: usize, seed: u64) -> Vec<(EmbeddingVector<f32>, EmbeddingVector<f32>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(seed, "queries"));
    (0..n)
        .map(|_| {
            let mut r = uniform_rows(2, dim, &mut rng).into_iter();
            (
                EmbeddingVector::new(r.next().unwrap()),
                EmbeddingVector::new(r.next().unwrap()),
            )
        })
        .collect()
}

/// Lambda-tuning pools where passage scores favour the answer-bearing entry
/// and document scores are large uniform noise.
pub fn noise_pools(n_questions: usize, pool_size: usize, seed: u64) -> Vec<Vec<PoolEntry>> {
    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(seed, "noise-pools"));
    (0..n_questions)
        .map(|_| {
            let gold = rng.gen_range(0..pool_size);
            (0..pool_size)
                .map(|r| PoolEntry {
                    passage_row: r,
                    passage_score: if r == gold {
                        rng.gen_range(1.5..2.5)
                    } else {
                        rng.gen_range(-1.0..1.0)
                    },
                    doc_score: rng.gen_range(-5.0..5.0),
                    has_answer: r == gold,
                })
                .collect()
        })
        .collect()
}
