//! Hierarchical dense retrieval for open-domain question answering.
//!
//! Documents are parsed into title trees, summarised for a document-level
//! dual encoder and split into section-local passages for a passage-level
//! dual encoder. At query time the top documents are retrieved first, their
//! passages are scored second, and the two relevance scores are fused:
//!
//! ```text
//! score(q, p) = passage_score(q, p) + lambda * doc_score(q, doc(p))
//! ```
//!
//! The numeric core (embeddings, encoders, indexes, losses, fusion) is generic
//! over [`Scalar`]; the aliases below pin the common concrete choices.

pub mod corpus;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod index;
pub mod io;
pub mod retriever;
pub mod scalar;
pub mod sparse;
pub mod synth;
pub mod text;
pub mod trainer;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub use corpus::{CorpusStore, Document, Passage, RawRecord, SeparatorStyle};
pub use encoder::{EmbeddingVector, EncoderKind, EncoderModel, Side};
pub use index::{Level, MipsIndex};
pub use retriever::{Hierarchy, RerankMode, RetrievalConfig, Retriever, ScoredHit};
pub use sparse::{has_answer, Bm25Index, Bm25Params};
pub use trainer::{QaExample, TrainingInstance};

/// Single-precision embedding, the on-disk index precision.
pub type Embedding = EmbeddingVector<f32>;
/// Double-precision embedding, used during training and gradient checks.
pub type Embedding64 = EmbeddingVector<f64>;
/// Single-precision encoder used for indexing and serving.
pub type Encoder = EncoderModel<f32>;
/// Double-precision encoder used for training.
pub type Encoder64 = EncoderModel<f64>;
/// Single-precision flat inner-product index.
pub type Index = MipsIndex<f32>;
/// Double-precision flat inner-product index.
pub type Index64 = MipsIndex<f64>;
/// Ranked hit with single-precision scores.
pub type Hit = ScoredHit<f32>;
/// Ranked hit with double-precision scores.
pub type Hit64 = ScoredHit<f64>;
