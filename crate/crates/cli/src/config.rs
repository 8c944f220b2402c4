//! Flat run configuration: TOML file, `--set` overrides and provenance hash.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use hierdense::corpus::DEFAULT_MAX_WORDS;
use hierdense::encoder::{LinearInit, DEFAULT_BUCKETS, DEFAULT_DIM};
use hierdense::eval::DEFAULT_CUTOFFS;
use hierdense::trainer::{NegativeConfig, TrainConfig};
use hierdense::{EncoderKind, Error, Level, RerankMode, Result, RetrievalConfig, SeparatorStyle};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Root of every named sub-seed. Mandatory.
    pub seed: u64,

    pub corpus: Option<PathBuf>,
    pub train_set: Option<PathBuf>,
    pub dev_set: Option<PathBuf>,
    pub test_set: Option<PathBuf>,
    #[serde(default = "d_model_dir")]
    pub model_dir: PathBuf,
    #[serde(default = "d_index_dir")]
    pub index_dir: PathBuf,
    #[serde(default = "d_output_dir")]
    pub output_dir: PathBuf,

    #[serde(default = "d_max_words")]
    pub max_words: usize,
    #[serde(default)]
    pub separator_style: SeparatorStyle,

    #[serde(default = "d_kind")]
    pub encoder_kind: EncoderKind,
    #[serde(default = "d_dim")]
    pub dim: usize,
    #[serde(default = "d_buckets")]
    pub buckets: usize,
    #[serde(default)]
    pub init: LinearInit,

    #[serde(default = "d_batch_size")]
    pub batch_size: usize,
    #[serde(default = "d_epochs")]
    pub epochs: usize,
    #[serde(default = "d_lr")]
    pub lr: f64,
    #[serde(default)]
    pub warmup_steps: usize,
    #[serde(default)]
    pub eval_steps: usize,
    #[serde(default = "d_one")]
    pub neg_bm25: usize,
    #[serde(default = "d_one")]
    pub neg_abstract: usize,
    #[serde(default)]
    pub neg_alltext: usize,
    #[serde(default = "d_in_doc")]
    pub neg_in_doc: usize,
    #[serde(default)]
    pub neg_in_sec: usize,
    /// Depth of the previous model's ranking mined by `iterate`.
    #[serde(default = "d_iter_depth")]
    pub iter_depth: usize,
    /// Checkpoint generation served by `index`, `retrieve`, `tune-lambda`,
    /// `time` and extended by `iterate`.
    #[serde(default = "d_one")]
    pub iteration: usize,

    #[serde(default = "d_k")]
    pub k1: usize,
    #[serde(default = "d_k")]
    pub k2: usize,
    #[serde(default = "d_lambda")]
    pub lambda: f64,
    #[serde(default)]
    pub mode: RerankMode,

    #[serde(default = "d_cutoffs")]
    pub cutoffs: Vec<usize>,
    #[serde(default = "d_repeats")]
    pub time_repeats: usize,
}

fn d_model_dir() -> PathBuf {
    "models".into()
}
fn d_index_dir() -> PathBuf {
    "indexes".into()
}
fn d_output_dir() -> PathBuf {
    "outputs".into()
}
fn d_max_words() -> usize {
    DEFAULT_MAX_WORDS
}
fn d_kind() -> EncoderKind {
    EncoderKind::LinearTrainable
}
fn d_dim() -> usize {
    DEFAULT_DIM
}
fn d_buckets() -> usize {
    DEFAULT_BUCKETS
}
fn d_batch_size() -> usize {
    TrainConfig::default().batch_size
}
fn d_epochs() -> usize {
    TrainConfig::default().epochs
}
fn d_lr() -> f64 {
    TrainConfig::default().lr
}
fn d_one() -> usize {
    1
}
fn d_in_doc() -> usize {
    NegativeConfig::default().in_doc
}
fn d_iter_depth() -> usize {
    10
}
fn d_k() -> usize {
    100
}
fn d_lambda() -> f64 {
    1.0
}
fn d_cutoffs() -> Vec<usize> {
    DEFAULT_CUTOFFS.to_vec()
}
fn d_repeats() -> usize {
    2
}

/// Parses `value` as a TOML scalar or array, falling back to a bare string.
fn override_value(value: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {value}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_string()))
}

impl RunConfig {
    /// Reads the optional config file, applies `key=value` overrides and
    /// validates the result. Relative paths from the file, defaults included,
    /// are taken relative to the file's directory; override paths are used
    /// as given.
    pub fn resolve(file: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut table = match file {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
                toml::from_str::<toml::Table>(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
            }
            None => toml::Table::new(),
        };
        let mut overridden = Vec::new();
        for kv in overrides {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override `{kv}` is not key=value")))?;
            table.insert(k.trim().to_string(), override_value(v.trim()));
            overridden.push(k.trim().to_string());
        }
        let mut config: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
        if let Some(base) = file.and_then(Path::parent) {
            config.rebase(base, &overridden);
        }
        config.validate()?;
        Ok(config)
    }

    fn rebase(&mut self, base: &Path, skip: &[String]) {
        let join = |key: &str, p: &mut PathBuf| {
            if p.is_relative() && !skip.iter().any(|k| k == key) {
                *p = base.join(&*p);
            }
        };
        for (key, p) in [
            ("corpus", &mut self.corpus),
            ("train_set", &mut self.train_set),
            ("dev_set", &mut self.dev_set),
            ("test_set", &mut self.test_set),
        ] {
            if let Some(p) = p {
                join(key, p);
            }
        }
        join("model_dir", &mut self.model_dir);
        join("index_dir", &mut self.index_dir);
        join("output_dir", &mut self.output_dir);
    }

    pub fn validate(&self) -> Result<()> {
        let paths: Vec<&Path> = [&self.corpus, &self.train_set, &self.dev_set, &self.test_set]
            .into_iter()
            .flatten()
            .map(PathBuf::as_path)
            .chain([
                self.model_dir.as_path(),
                self.index_dir.as_path(),
                self.output_dir.as_path(),
            ])
            .collect();
        for (i, a) in paths.iter().enumerate() {
            if paths[..i].contains(a) {
                return Err(Error::Config(format!("path {} is used twice", a.display())));
            }
        }
        if self.max_words == 0 {
            return Err(Error::Config("max_words must be at least 1".into()));
        }
        if self.iteration == 0 {
            return Err(Error::Config("iteration starts at 1".into()));
        }
        if self.cutoffs.is_empty() || self.cutoffs.contains(&0) {
            return Err(Error::Config("cutoffs must be non-empty and positive".into()));
        }
        self.train_config().validate()?;
        self.retrieval_config().validate()
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(json))
    }

    pub fn negatives(&self) -> NegativeConfig {
        NegativeConfig {
            bm25: self.neg_bm25,
            abstract_neg: self.neg_abstract,
            alltext: self.neg_alltext,
            in_doc: self.neg_in_doc,
            in_sec: self.neg_in_sec,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            batch_size: self.batch_size,
            epochs: self.epochs,
            lr: self.lr,
            warmup_steps: self.warmup_steps,
            eval_steps: self.eval_steps,
            seed: self.seed,
            dim: self.dim,
            buckets: self.buckets,
            init: self.init,
            style: self.separator_style,
            negatives: self.negatives(),
        }
    }

    pub fn retrieval_config(&self) -> RetrievalConfig {
        RetrievalConfig {
            k1: self.k1,
            k2: self.k2,
            lambda: self.lambda,
            mode: self.mode,
        }
    }

    pub fn require<'a>(&self, path: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
        path.as_deref()
            .ok_or_else(|| Error::Config(format!("`{key}` must be set for this command")))
    }

    pub fn passages_path(&self) -> PathBuf {
        self.output_dir.join("passages.jsonl")
    }

    pub fn instances_path(&self, level: Level, iteration: usize) -> PathBuf {
        self.output_dir
            .join(format!("instances-{}-it{iteration}.jsonl", level_name(level)))
    }

    pub fn train_log_path(&self, level: Level, iteration: usize) -> PathBuf {
        self.output_dir
            .join(format!("train-{}-it{iteration}.json", level_name(level)))
    }

    pub fn model_path(&self, level: Level, iteration: usize) -> PathBuf {
        self.model_dir.join(format!("{}-it{iteration}.ckpt", level_name(level)))
    }

    pub fn index_path(&self, level: Level) -> PathBuf {
        self.index_dir
            .join(format!("{}-it{}.index", level_name(level), self.iteration))
    }

    pub fn results_path(&self) -> PathBuf {
        self.output_dir.join("results.jsonl")
    }

    pub fn report_path(&self) -> PathBuf {
        self.output_dir.join("report.json")
    }

    pub fn lambda_path(&self) -> PathBuf {
        self.output_dir.join("lambda.json")
    }

    pub fn timing_path(&self) -> PathBuf {
        self.output_dir.join("timing.json")
    }

    /// Retrieval settings echoed into reports.
    pub fn echo(&self) -> serde_json::Value {
        serde_json::json!({
            "k1": self.k1,
            "k2": self.k2,
            "lambda": self.lambda,
            "mode": self.mode,
            "seed": self.seed,
            "iteration": self.iteration,
        })
    }
}

pub fn level_name(level: Level) -> &'static str {
    match level {
        Level::Document => "doc",
        Level::Passage => "passage",
    }
}
