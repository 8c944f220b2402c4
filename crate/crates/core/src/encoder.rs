//! Dual encoders over hashed bag-of-words features.
//!
//! Text is tokenized with the shared normalizer, truncated, hashed into `V`
//! buckets and l2-normalized. A `HashedBow` encoder projects the bucket vector
//! with a fixed seeded +-1 matrix; a `LinearTrainable` encoder multiplies it by
//! a learned `l x V` matrix, one per side.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{read_f64, read_hash_slot, read_u32, read_u64, write_hash_slot, write_u32, write_u64};
use crate::scalar::{dot, Scalar};
use crate::text::normalize_tokens;

pub const DEFAULT_BUCKETS: usize = 1 << 16;
pub const DEFAULT_DIM: usize = 64;

const CHECKPOINT_MAGIC: &[u8; 4] = b"HDCK";
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Question,
    Context,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderKind {
    HashedBow,
    LinearTrainable,
}

/// Starting weights for a trainable encoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinearInit {
    /// Both sides start as copies of the seeded random projection, so the
    /// untrained model scores like `HashedBow`.
    #[default]
    SharedProjection,
    /// Each side gets its own seeded projection.
    IndependentProjection,
    Zeros,
}

/// Word caps applied before encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruncationCaps {
    pub question: usize,
    pub context: usize,
}

impl TruncationCaps {
    pub const DOCUMENT: Self = Self {
        question: 80,
        context: 512,
    };
    pub const PASSAGE: Self = Self {
        question: 80,
        context: 280,
    };

    fn for_side(self, side: Side) -> usize {
        match side {
            Side::Question => self.question,
            Side::Context => self.context,
        }
    }
}

impl Default for TruncationCaps {
    fn default() -> Self {
        Self::PASSAGE
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector<S> {
    values: Vec<S>,
}

impl<S: Scalar> EmbeddingVector<S> {
    pub fn new(values: Vec<S>) -> Self {
        Self { values }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            values: vec![S::zero(); dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn as_slice(&self) -> &[S] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<S> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn cast<T: Scalar>(&self) -> EmbeddingVector<T> {
        EmbeddingVector::new(self.values.iter().map(|v| v.cast()).collect())
    }
}

/// Dot-product relevance.
pub fn score<S: Scalar>(a: &EmbeddingVector<S>, b: &EmbeddingVector<S>) -> Result<S> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            actual: b.dim(),
        });
    }
    Ok(dot(a.as_slice(), b.as_slice()))
}

/// Cosine similarity, zero if either vector is zero. Not used by default.
pub fn cosine<S: Scalar>(a: &EmbeddingVector<S>, b: &EmbeddingVector<S>) -> Result<S> {
    let d = score(a, b)?;
    let na = dot(a.as_slice(), a.as_slice()).sqrt();
    let nb = dot(b.as_slice(), b.as_slice()).sqrt();
    if na == S::zero() || nb == S::zero() {
        Ok(S::zero())
    } else {
        Ok(d / (na * nb))
    }
}

/// Sparse bucket vector, sorted by bucket.
pub type Features<S> = Vec<(u32, S)>;

pub(crate) fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

/// Derives a named sub-seed from a root seed.
pub fn sub_seed(seed: u64, name: &str) -> u64 {
    splitmix64(seed ^ fnv1a64(name.as_bytes()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderModel<S> {
    kind: EncoderKind,
    dim: usize,
    buckets: usize,
    seed: u64,
    caps: TruncationCaps,
    // Bucket-major: weights of bucket b live at [b * dim, (b + 1) * dim).
    question: Vec<S>,
    context: Vec<S>,
}

impl<S: Scalar> EncoderModel<S> {
    pub fn hashed(dim: usize, buckets: usize, seed: u64, caps: TruncationCaps) -> Self {
        assert!(dim > 0 && buckets > 0);
        Self {
            kind: EncoderKind::HashedBow,
            dim,
            buckets,
            seed,
            caps,
            question: Vec::new(),
            context: Vec::new(),
        }
    }

    pub fn linear(dim: usize, buckets: usize, seed: u64, caps: TruncationCaps, init: LinearInit) -> Self {
        assert!(dim > 0 && buckets > 0);
        let mut m = Self {
            kind: EncoderKind::LinearTrainable,
            dim,
            buckets,
            seed,
            caps,
            question: vec![S::zero(); dim * buckets],
            context: vec![S::zero(); dim * buckets],
        };
        let proj_seed = sub_seed(seed, "projection");
        let alt_seed = sub_seed(seed, "projection-context");
        match init {
            LinearInit::Zeros => {}
            LinearInit::SharedProjection | LinearInit::IndependentProjection => {
                let ctx_seed = if init == LinearInit::SharedProjection {
                    proj_seed
                } else {
                    alt_seed
                };
                let mut col = vec![S::zero(); dim];
                for b in 0..buckets {
                    projection_column(proj_seed, b as u32, &mut col);
                    m.question[b * dim..(b + 1) * dim].copy_from_slice(&col);
                    projection_column(ctx_seed, b as u32, &mut col);
                    m.context[b * dim..(b + 1) * dim].copy_from_slice(&col);
                }
            }
        }
        m
    }

    pub fn kind(&self) -> EncoderKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn buckets(&self) -> usize {
        self.buckets
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn caps(&self) -> TruncationCaps {
        self.caps
    }

    pub fn is_trainable(&self) -> bool {
        self.kind == EncoderKind::LinearTrainable
    }

    fn bucket_of(&self, token: &str) -> u32 {
        let h = splitmix64(fnv1a64(token.as_bytes()) ^ sub_seed(self.seed, "hashing"));
        (h % self.buckets as u64) as u32
    }

    /// Hashed, truncated, l2-normalized bucket counts.
    pub fn featurize(&self, side: Side, text: &str) -> Features<S> {
        let cap = self.caps.for_side(side);
        let mut counts: BTreeMap<u32, u32> = BTreeMap::new();
        for tok in normalize_tokens(text).iter().take(cap) {
            *counts.entry(self.bucket_of(tok)).or_default() += 1;
        }
        let norm = counts.values().map(|&c| (c as f64) * (c as f64)).sum::<f64>().sqrt();
        counts.into_iter().map(|(b, c)| (b, S::of(c as f64 / norm))).collect()
    }

    fn weights(&self, side: Side) -> &[S] {
        match side {
            Side::Question => &self.question,
            Side::Context => &self.context,
        }
    }

    /// Embedding of a precomputed feature vector.
    pub fn encode_features(&self, side: Side, features: &Features<S>) -> EmbeddingVector<S> {
        let mut out = vec![S::zero(); self.dim];
        match self.kind {
            EncoderKind::HashedBow => {
                let seed = sub_seed(self.seed, "projection");
                let mut col = vec![S::zero(); self.dim];
                for &(b, x) in features {
                    projection_column(seed, b, &mut col);
                    for (o, c) in out.iter_mut().zip(&col) {
                        *o = *o + *c * x;
                    }
                }
            }
            EncoderKind::LinearTrainable => {
                let w = self.weights(side);
                for &(b, x) in features {
                    let col = &w[b as usize * self.dim..(b as usize + 1) * self.dim];
                    for (o, c) in out.iter_mut().zip(col) {
                        *o = *o + *c * x;
                    }
                }
            }
        }
        EmbeddingVector::new(out)
    }

    pub fn encode(&self, side: Side, text: &str) -> EmbeddingVector<S> {
        self.encode_features(side, &self.featurize(side, text))
    }

    pub fn cast<T: Scalar>(&self) -> EncoderModel<T> {
        EncoderModel {
            kind: self.kind,
            dim: self.dim,
            buckets: self.buckets,
            seed: self.seed,
            caps: self.caps,
            question: self.question.iter().map(|v| v.cast()).collect(),
            context: self.context.iter().map(|v| v.cast()).collect(),
        }
    }

    /// Weight of `(row, bucket)` in the `l x V` matrix of one side.
    pub fn weight(&self, side: Side, row: usize, bucket: usize) -> S {
        self.weights(side)[bucket * self.dim + row]
    }

    pub fn set_weight(&mut self, side: Side, row: usize, bucket: usize, value: S) {
        let dim = self.dim;
        match side {
            Side::Question => self.question[bucket * dim + row] = value,
            Side::Context => self.context[bucket * dim + row] = value,
        }
    }

    /// Batch contrastive loss `sum_i w_i * (logsumexp(s_i) - s_i[pos_i])` where
    /// `s_i` scores question `i` against the whole shared pool.
    pub fn batch_loss(&self, batch: &ContrastiveBatch<S>, weights: &[S]) -> Result<S> {
        let (loss, _) = self.forward(batch, weights)?;
        Ok(loss)
    }

    /// Unweighted per-question loss terms of a batch.
    pub fn instance_losses(&self, batch: &ContrastiveBatch<S>) -> Result<Vec<S>> {
        let ones = vec![S::one(); batch.questions.len()];
        Ok(self.forward(batch, &ones)?.1.terms)
    }

    /// Loss and its exact gradient with respect to both weight matrices.
    pub fn grad_linear(&self, batch: &ContrastiveBatch<S>, weights: &[S]) -> Result<(S, LinearGradient<S>)> {
        if !self.is_trainable() {
            return Err(Error::NotTrainable);
        }
        let (loss, fwd) = self.forward(batch, weights)?;
        let dim = self.dim;
        let b = batch.questions.len();
        let p = batch.pool.len();

        // d loss / d q_i = sum_j G_ij c_j ; d loss / d c_j = sum_i G_ij q_i
        let mut dq = vec![vec![S::zero(); dim]; b];
        let mut dc = vec![vec![S::zero(); dim]; p];
        for i in 0..b {
            for j in 0..p {
                let g = fwd.g[i * p + j];
                if g == S::zero() {
                    continue;
                }
                let cj = fwd.pool_emb[j].as_slice();
                let qi = fwd.question_emb[i].as_slice();
                for r in 0..dim {
                    dq[i][r] = dq[i][r] + g * cj[r];
                    dc[j][r] = dc[j][r] + g * qi[r];
                }
            }
        }

        let mut grad = LinearGradient::new(dim);
        for (feats, d) in batch.questions.iter().zip(&dq) {
            accumulate(&mut grad.question, feats, d, dim);
        }
        for (feats, d) in batch.pool.iter().zip(&dc) {
            accumulate(&mut grad.context, feats, d, dim);
        }
        Ok((loss, grad))
    }

    fn forward(&self, batch: &ContrastiveBatch<S>, weights: &[S]) -> Result<(S, Forward<S>)> {
        if batch.questions.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let b = batch.questions.len();
        let p = batch.pool.len();
        if weights.len() != b || batch.positives.len() != b {
            return Err(Error::DimensionMismatch {
                expected: b,
                actual: weights.len().min(batch.positives.len()),
            });
        }
        let question_emb: Vec<_> = batch
            .questions
            .iter()
            .map(|f| self.encode_features(Side::Question, f))
            .collect();
        let pool_emb: Vec<_> = batch
            .pool
            .iter()
            .map(|f| self.encode_features(Side::Context, f))
            .collect();

        let mut loss = S::zero();
        let mut terms = Vec::with_capacity(b);
        let mut g = vec![S::zero(); b * p];
        let mut row = vec![S::zero(); p];
        for i in 0..b {
            for j in 0..p {
                row[j] = dot(question_emb[i].as_slice(), pool_emb[j].as_slice());
            }
            // Shifted by the row max: equal scores give exactly ln(p).
            let max = row.iter().copied().fold(S::neg_infinity(), S::max);
            let z: S = row.iter().map(|&s| (s - max).exp()).sum();
            let pos = batch.positives[i];
            let term = z.ln() - (row[pos] - max);
            terms.push(term);
            loss = loss + weights[i] * term;
            for j in 0..p {
                let soft = (row[j] - max).exp() / z;
                let target = if j == pos { S::one() } else { S::zero() };
                g[i * p + j] = weights[i] * (soft - target);
            }
        }
        Ok((
            loss,
            Forward {
                question_emb,
                pool_emb,
                g,
                terms,
            },
        ))
    }

    /// `W <- W - lr * grad` on the touched buckets.
    pub fn apply_gradient(&mut self, grad: &LinearGradient<S>, lr: S) {
        let dim = self.dim;
        for (side, map) in [(Side::Question, &grad.question), (Side::Context, &grad.context)] {
            let w = match side {
                Side::Question => &mut self.question,
                Side::Context => &mut self.context,
            };
            for (&bucket, g) in map {
                let col = &mut w[bucket as usize * dim..(bucket as usize + 1) * dim];
                for (c, gv) in col.iter_mut().zip(g) {
                    *c = *c - lr * *gv;
                }
            }
        }
    }

    /// Writes a versioned little-endian checkpoint. Trainable weights are
    /// stored as two row-major `l x V` f64 matrices, question side first.
    pub fn save(&self, path: &Path, config_hash: Option<&str>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(CHECKPOINT_MAGIC)?;
        write_u32(&mut w, CHECKPOINT_VERSION)?;
        write_u32(
            &mut w,
            match self.kind {
                EncoderKind::HashedBow => 0,
                EncoderKind::LinearTrainable => 1,
            },
        )?;
        write_u64(&mut w, self.dim as u64)?;
        write_u64(&mut w, self.buckets as u64)?;
        write_u64(&mut w, self.seed)?;
        write_u32(&mut w, self.caps.question as u32)?;
        write_u32(&mut w, self.caps.context as u32)?;
        write_hash_slot(&mut w, config_hash)?;
        if self.is_trainable() {
            for side in [Side::Question, Side::Context] {
                let m = self.weights(side);
                for r in 0..self.dim {
                    for b in 0..self.buckets {
                        w.write_all(&m[b * self.dim + r].to_f64_lossy().to_le_bytes())?;
                    }
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Loads a checkpoint, returning the model and the embedded config hash.
    pub fn load(path: &Path) -> Result<(Self, Option<String>)> {
        let mut r = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(Error::Format("not an encoder checkpoint".into()));
        }
        let version = read_u32(&mut r)?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Format(format!("unsupported checkpoint version {version}")));
        }
        let kind = match read_u32(&mut r)? {
            0 => EncoderKind::HashedBow,
            1 => EncoderKind::LinearTrainable,
            k => return Err(Error::Format(format!("unknown encoder kind {k}"))),
        };
        let dim = read_u64(&mut r)? as usize;
        let buckets = read_u64(&mut r)? as usize;
        let seed = read_u64(&mut r)?;
        let caps = TruncationCaps {
            question: read_u32(&mut r)? as usize,
            context: read_u32(&mut r)? as usize,
        };
        let hash = read_hash_slot(&mut r)?;
        if dim == 0 || buckets == 0 {
            return Err(Error::Format("zero dimension in checkpoint".into()));
        }
        let mut model = Self::hashed(dim, buckets, seed, caps);
        if kind == EncoderKind::LinearTrainable {
            model.kind = kind;
            for side in [Side::Question, Side::Context] {
                let mut m = vec![S::zero(); dim * buckets];
                for row in 0..dim {
                    for b in 0..buckets {
                        m[b * dim + row] = S::of(read_f64(&mut r)?);
                    }
                }
                match side {
                    Side::Question => model.question = m,
                    Side::Context => model.context = m,
                }
            }
        }
        Ok((model, hash))
    }
}

/// Fills `out` with column `bucket` of the seeded +-1/sqrt(l) projection.
fn projection_column<S: Scalar>(seed: u64, bucket: u32, out: &mut [S]) {
    let scale = S::of(1.0 / (out.len() as f64).sqrt());
    for (chunk, block) in out.chunks_mut(64).enumerate() {
        let bits = splitmix64(seed ^ splitmix64(((bucket as u64) << 16) | chunk as u64));
        for (r, v) in block.iter_mut().enumerate() {
            *v = if (bits >> r) & 1 == 1 { scale } else { -scale };
        }
    }
}

fn accumulate<S: Scalar>(target: &mut BTreeMap<u32, Vec<S>>, feats: &Features<S>, d: &[S], dim: usize) {
    for &(bucket, x) in feats {
        let col = target.entry(bucket).or_insert_with(|| vec![S::zero(); dim]);
        for (c, dv) in col.iter_mut().zip(d) {
            *c = *c + x * *dv;
        }
    }
}

struct Forward<S> {
    question_emb: Vec<EmbeddingVector<S>>,
    pool_emb: Vec<EmbeddingVector<S>>,
    /// d loss / d score, row-major `questions x pool`.
    g: Vec<S>,
    /// Unweighted `-log softmax` of each question's positive.
    terms: Vec<S>,
}

/// Featurized training batch: every question is scored against the whole
/// pool; `positives[i]` is the pool slot of question `i`'s positive.
#[derive(Debug, Clone, PartialEq)]
pub struct ContrastiveBatch<S> {
    pub questions: Vec<Features<S>>,
    pub pool: Vec<Features<S>>,
    pub positives: Vec<usize>,
}

/// Sparse gradient: one `l`-vector per touched bucket and side.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearGradient<S> {
    pub dim: usize,
    pub question: BTreeMap<u32, Vec<S>>,
    pub context: BTreeMap<u32, Vec<S>>,
}

impl<S: Scalar> LinearGradient<S> {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            question: BTreeMap::new(),
            context: BTreeMap::new(),
        }
    }

    /// Gradient entry for `(row, bucket)`, zero when untouched.
    pub fn get(&self, side: Side, row: usize, bucket: u32) -> S {
        let map = match side {
            Side::Question => &self.question,
            Side::Context => &self.context,
        };
        map.get(&bucket).map_or(S::zero(), |v| v[row])
    }

    pub fn squared_norm(&self) -> S {
        self.question
            .values()
            .chain(self.context.values())
            .flat_map(|v| v.iter())
            .map(|&x| x * x)
            .sum()
    }
}
