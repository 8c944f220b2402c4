//! Exact flat maximum-inner-product search.

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{document_summary, passage_representation, CorpusStore, SeparatorStyle};
use crate::encoder::{EmbeddingVector, EncoderModel, Side};
use crate::error::{Error, Result};
use crate::io::{
    read_f32, read_hash_slot, read_str, read_u32, read_u64, write_hash_slot, write_str, write_u32, write_u64,
};
use crate::retriever::ScoredHit;
use crate::scalar::{dot, Scalar};

const INDEX_MAGIC: &[u8; 4] = b"HDIX";
const INDEX_VERSION: u32 = 1;

/// Retrieval granularity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    #[serde(alias = "doc")]
    Document,
    Passage,
}

impl std::str::FromStr for Level {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "doc" | "document" => Ok(Level::Document),
            "passage" => Ok(Level::Passage),
            other => Err(Error::Config(format!("unknown level `{other}`"))),
        }
    }
}

/// Row-major embedding matrix with one row per unit, rows sorted by unit id.
#[derive(Debug, Clone, PartialEq)]
pub struct MipsIndex<S> {
    level: Level,
    dim: usize,
    ids: Vec<String>,
    matrix: Vec<S>,
    rows_by_id: HashMap<String, usize>,
}

/// Orders `(row, score)` by descending score, then ascending row.
fn by_score_then_row<S: Scalar>(a: &(usize, S), b: &(usize, S)) -> Ordering {
    b.1.partial_cmp(&a.1)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.0.cmp(&b.0))
}

impl<S: Scalar> MipsIndex<S> {
    /// Builds an index from `(id, vector)` pairs in any order.
    pub fn from_rows(level: Level, dim: usize, rows: Vec<(String, Vec<S>)>) -> Result<Self> {
        let mut rows = rows;
        rows.sort_by(|a, b| a.0.cmp(&b.0));
        let mut ids = Vec::with_capacity(rows.len());
        let mut matrix = Vec::with_capacity(rows.len() * dim);
        for (id, v) in rows {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: v.len(),
                });
            }
            if ids.last() == Some(&id) {
                return Err(Error::DuplicateUnitId(id));
            }
            ids.push(id);
            matrix.extend(v);
        }
        let rows_by_id = ids.iter().enumerate().map(|(i, id)| (id.clone(), i)).collect();
        Ok(Self {
            level,
            dim,
            ids,
            matrix,
            rows_by_id,
        })
    }

    /// Encodes every document summary or passage representation in the store
    /// with the context side of `model`.
    pub fn build(store: &CorpusStore, model: &EncoderModel<S>, level: Level, style: SeparatorStyle) -> Result<Self> {
        let texts: Vec<(String, String)> = match level {
            Level::Document => store
                .documents()
                .map(|d| (d.doc_id.clone(), document_summary(d, style)))
                .collect(),
            Level::Passage => store
                .passages()
                .map(|p| (p.passage_id.clone(), passage_representation(p, style)))
                .collect(),
        };
        let rows = texts
            .into_par_iter()
            .map(|(id, text)| (id, model.encode(Side::Context, &text).into_vec()))
            .collect();
        Self::from_rows(level, model.dim(), rows)
    }

    pub fn level(&self) -> Level {
        self.level
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn row_of(&self, id: &str) -> Option<usize> {
        self.rows_by_id.get(id).copied()
    }

    pub fn row(&self, i: usize) -> &[S] {
        &self.matrix[i * self.dim..(i + 1) * self.dim]
    }

    fn check_dim(&self, qv: &EmbeddingVector<S>) -> Result<()> {
        if qv.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: qv.dim(),
            });
        }
        Ok(())
    }

    /// Scores of every row, in row order.
    pub fn score_all(&self, qv: &EmbeddingVector<S>) -> Result<Vec<S>> {
        self.check_dim(qv)?;
        let q = qv.as_slice();
        Ok(self.matrix.chunks_exact(self.dim).map(|r| dot(q, r)).collect())
    }

    /// Scores of the given rows, in the given order.
    pub fn score_rows(&self, qv: &EmbeddingVector<S>, rows: &[usize]) -> Result<Vec<S>> {
        self.check_dim(qv)?;
        let q = qv.as_slice();
        Ok(rows.iter().map(|&r| dot(q, self.row(r))).collect())
    }

    /// Top-`k` `(row, score)` pairs among `rows` (all rows when `None`).
    pub fn top_rows(&self, qv: &EmbeddingVector<S>, k: usize, rows: Option<&[usize]>) -> Result<Vec<(usize, S)>> {
        let scored: Vec<(usize, S)> = match rows {
            None => self.score_all(qv)?.into_iter().enumerate().collect(),
            Some(rows) => rows.iter().copied().zip(self.score_rows(qv, rows)?).collect(),
        };
        Ok(top_k(scored, k))
    }

    /// Exact top-`k` by inner product, optionally restricted to a set of ids.
    /// Ties go to the smaller id. Unknown restriction ids are ignored.
    pub fn search(
        &self,
        qv: &EmbeddingVector<S>,
        k: usize,
        restrict: Option<&HashSet<String>>,
    ) -> Result<Vec<ScoredHit<S>>> {
        let rows: Option<Vec<usize>> = restrict.map(|set| {
            let mut rows: Vec<usize> = set.iter().filter_map(|id| self.row_of(id)).collect();
            rows.sort_unstable();
            rows
        });
        let top = self.top_rows(qv, k, rows.as_deref())?;
        Ok(top
            .into_iter()
            .map(|(r, s)| ScoredHit::new(self.ids[r].clone(), s))
            .collect())
    }

    pub fn cast<T: Scalar>(&self) -> MipsIndex<T> {
        MipsIndex {
            level: self.level,
            dim: self.dim,
            ids: self.ids.clone(),
            matrix: self.matrix.iter().map(|v| v.cast()).collect(),
            rows_by_id: self.rows_by_id.clone(),
        }
    }

    /// Header (magic, version, level, dim, count, config hash), id table,
    /// row-major float32 matrix; all little-endian.
    pub fn save(&self, path: &Path, config_hash: Option<&str>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(INDEX_MAGIC)?;
        write_u32(&mut w, INDEX_VERSION)?;
        write_u32(
            &mut w,
            match self.level {
                Level::Document => 0,
                Level::Passage => 1,
            },
        )?;
        write_u64(&mut w, self.dim as u64)?;
        write_u64(&mut w, self.ids.len() as u64)?;
        write_hash_slot(&mut w, config_hash)?;
        for id in &self.ids {
            write_str(&mut w, id)?;
        }
        for v in &self.matrix {
            let x: f32 = v.cast();
            w.write_all(&x.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<(Self, Option<String>)> {
        let mut r = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != INDEX_MAGIC {
            return Err(Error::Format("not an index file".into()));
        }
        let version = read_u32(&mut r)?;
        if version != INDEX_VERSION {
            return Err(Error::Format(format!("unsupported index version {version}")));
        }
        let level = match read_u32(&mut r)? {
            0 => Level::Document,
            1 => Level::Passage,
            l => return Err(Error::Format(format!("unknown level tag {l}"))),
        };
        let dim = read_u64(&mut r)? as usize;
        let count = read_u64(&mut r)? as usize;
        let hash = read_hash_slot(&mut r)?;
        let mut rows = Vec::with_capacity(count);
        for _ in 0..count {
            rows.push((read_str(&mut r)?, Vec::with_capacity(dim)));
        }
        for row in rows.iter_mut() {
            for _ in 0..dim {
                row.1.push(S::of(read_f32(&mut r)? as f64));
            }
        }
        Ok((Self::from_rows(level, dim, rows)?, hash))
    }
}

/// Selects the best `k` pairs by descending score, ties by ascending row.
pub fn top_k<S: Scalar>(mut scored: Vec<(usize, S)>, k: usize) -> Vec<(usize, S)> {
    if k == 0 || scored.is_empty() {
        return Vec::new();
    }
    if k < scored.len() {
        scored.select_nth_unstable_by(k - 1, by_score_then_row);
        scored.truncate(k);
    }
    scored.sort_unstable_by(by_score_then_row);
    scored
}
