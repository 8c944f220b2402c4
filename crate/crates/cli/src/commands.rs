//! One function per subcommand. Each returns a JSON summary for stdout.

use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use hierdense::encoder::TruncationCaps;
use hierdense::eval::{doc_topk_accuracy, time_stages, topk_accuracy, DocResult, ReportFile};
use hierdense::io::{read_jsonl, write_jsonl, Header};
use hierdense::retriever::{QuestionResult, TUNE_CUTOFF};
use hierdense::synth::{planted, PlantedConfig};
use hierdense::trainer::{
    build_instances, load_dataset, load_instances, mine_iter_hard_negatives, save_instances, train, union_negatives,
    MiningIndexes, TrainOutcome,
};
use hierdense::{
    Bm25Params, CorpusStore, EncoderKind, EncoderModel, Error, Hierarchy, Level, MipsIndex, QaExample, Retriever,
};

use crate::config::{level_name, RunConfig};
use crate::CliError;

pub const PASSAGES_FORMAT: &str = "passages";
pub const RESULTS_FORMAT: &str = "retrieval-results";
pub const TRAIN_LOG_FORMAT: &str = "train-log";
pub const LAMBDA_FORMAT: &str = "lambda-search";
pub const TIMING_FORMAT: &str = "timing-report";

type Out = Result<Value, CliError>;

pub struct Ctx {
    pub cfg: RunConfig,
    pub hash: String,
}

impl Ctx {
    pub fn new(cfg: RunConfig) -> Self {
        let hash = cfg.hash();
        Self { cfg, hash }
    }

    fn header(&self, format: &str) -> Header {
        Header::new(format, 1, Some(&self.hash))
    }

    fn store(&self) -> Result<CorpusStore, Error> {
        let path = self.cfg.require(&self.cfg.corpus, "corpus")?;
        at(path, CorpusStore::load(path, self.cfg.max_words))
    }

    fn dataset(&self, path: &Option<std::path::PathBuf>, key: &str) -> Result<Vec<QaExample>, Error> {
        let path = self.cfg.require(path, key)?;
        at(path, load_dataset(path))
    }

    fn dev(&self) -> Result<Vec<QaExample>, Error> {
        self.cfg
            .dev_set
            .as_deref()
            .map_or(Ok(Vec::new()), |p| at(p, load_dataset(p)))
    }

    fn require_trainable(&self) -> Result<(), Error> {
        if self.cfg.encoder_kind == EncoderKind::HashedBow {
            return Err(Error::Config(
                "hashed_bow encoders have no parameters; run `index` directly".into(),
            ));
        }
        Ok(())
    }

    /// Encoder used for indexing and queries at the configured iteration.
    fn serving_model(&self, level: Level) -> Result<EncoderModel<f32>, Error> {
        match self.cfg.encoder_kind {
            EncoderKind::HashedBow => {
                let caps = match level {
                    Level::Document => TruncationCaps::DOCUMENT,
                    Level::Passage => TruncationCaps::PASSAGE,
                };
                Ok(EncoderModel::hashed(
                    self.cfg.dim,
                    self.cfg.buckets,
                    self.cfg.seed,
                    caps,
                ))
            }
            EncoderKind::LinearTrainable => {
                let path = self.cfg.model_path(level, self.cfg.iteration);
                let (m, _) = at(&path, EncoderModel::<f64>::load(&path))?;
                Ok(m.cast())
            }
        }
    }

    fn hierarchy(&self, store: &CorpusStore) -> Result<Hierarchy<f32>, Error> {
        let load = |level| -> Result<MipsIndex<f32>, Error> {
            let path = self.cfg.index_path(level);
            let (idx, _) = at(&path, MipsIndex::load(&path))?;
            if idx.level() != level {
                return Err(Error::Format(format!(
                    "{} holds the wrong level",
                    self.cfg.index_path(level).display()
                )));
            }
            Ok(idx)
        };
        Hierarchy::from_store(load(Level::Document)?, load(Level::Passage)?, store)
    }
}

/// Names the file in I/O errors.
fn at<T>(path: &Path, r: Result<T, Error>) -> Result<T, Error> {
    r.map_err(|e| match e {
        Error::Io(io) => Error::Io(std::io::Error::new(io.kind(), format!("{}: {io}", path.display()))),
        other => other,
    })
}

fn ensure_parent(path: &Path) -> Result<(), Error> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Error> {
    ensure_parent(path)?;
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

fn write_lines<T: Serialize>(path: &Path, header: &Header, records: &[T]) -> Result<(), Error> {
    ensure_parent(path)?;
    write_jsonl(path, Some(header), records)
}

pub fn ingest(ctx: &Ctx) -> Out {
    let store = ctx.store()?;
    let path = ctx.cfg.passages_path();
    ensure_parent(&path)?;
    store.dump_passages(&path, Some(&ctx.header(PASSAGES_FORMAT)))?;
    Ok(json!({
        "documents": store.num_documents(),
        "passages": store.num_passages(),
        "output": path,
    }))
}

pub fn mine_negatives(ctx: &Ctx, levels: &[Level]) -> Out {
    let store = ctx.store()?;
    let dataset = ctx.dataset(&ctx.cfg.train_set, "train_set")?;
    let indexes = MiningIndexes::build(&store, Bm25Params::default())?;
    let mut summary = serde_json::Map::new();
    for &level in levels {
        let (instances, discards) =
            build_instances(&dataset, &store, &indexes, level, ctx.cfg.negatives(), ctx.cfg.seed)?;
        for (q, why) in &discards {
            log::info!("discarded at {} level ({why:?}): {q}", level_name(level));
        }
        let path = ctx.cfg.instances_path(level, 1);
        ensure_parent(&path)?;
        save_instances(&path, &instances, Some(&ctx.hash))?;
        summary.insert(
            level_name(level).into(),
            json!({ "instances": instances.len(), "discarded": discards.len(), "output": path }),
        );
    }
    Ok(Value::Object(summary))
}

#[derive(Serialize)]
struct TrainLog<'a> {
    format: &'a str,
    version: u32,
    config_hash: &'a str,
    level: Level,
    iteration: usize,
    instances: usize,
    best_step: usize,
    best_accuracy: Option<f64>,
    dev_history: &'a [(usize, f64)],
    losses: &'a [f64],
}

fn save_outcome(
    ctx: &Ctx,
    level: Level,
    iteration: usize,
    instances: usize,
    out: &TrainOutcome<f64>,
) -> Result<Value, Error> {
    let model_path = ctx.cfg.model_path(level, iteration);
    ensure_parent(&model_path)?;
    out.model.save(&model_path, Some(&ctx.hash))?;
    write_json(
        &ctx.cfg.train_log_path(level, iteration),
        &TrainLog {
            format: TRAIN_LOG_FORMAT,
            version: 1,
            config_hash: &ctx.hash,
            level,
            iteration,
            instances,
            best_step: out.best_step,
            best_accuracy: out.best_accuracy,
            dev_history: &out.dev_history,
            losses: &out.losses,
        },
    )?;
    Ok(json!({
        "instances": instances,
        "steps": out.losses.len(),
        "best_step": out.best_step,
        "best_dev_accuracy": out.best_accuracy,
        "final_loss": out.losses.last(),
        "output": model_path,
    }))
}

pub fn train_cmd(ctx: &Ctx, levels: &[Level]) -> Out {
    ctx.require_trainable()?;
    let store = ctx.store()?;
    let dev = ctx.dev()?;
    let tc = ctx.cfg.train_config();
    let mut summary = serde_json::Map::new();
    for &level in levels {
        let path = ctx.cfg.instances_path(level, 1);
        let instances = at(&path, load_instances(&path))?;
        let out = train(tc.new_model::<f64>(level), &instances, &dev, &store, level, &tc)?;
        summary.insert(
            level_name(level).into(),
            save_outcome(ctx, level, 1, instances.len(), &out)?,
        );
    }
    Ok(Value::Object(summary))
}

pub fn iterate(ctx: &Ctx, levels: &[Level]) -> Out {
    ctx.require_trainable()?;
    let store = ctx.store()?;
    let dev = ctx.dev()?;
    let tc = ctx.cfg.train_config();
    let n = ctx.cfg.iteration;
    let mut summary = serde_json::Map::new();
    for &level in levels {
        let model_path = ctx.cfg.model_path(level, n);
        let (model, _) = at(&model_path, EncoderModel::<f64>::load(&model_path))?;
        let inst_path = ctx.cfg.instances_path(level, n);
        let instances = at(&inst_path, load_instances(&inst_path))?;
        let index = MipsIndex::build(&store, &model, level, ctx.cfg.separator_style)?;
        let hard = mine_iter_hard_negatives(&model, &index, &instances, &store, ctx.cfg.iter_depth)?;
        let merged = union_negatives(&instances, &hard);
        let path = ctx.cfg.instances_path(level, n + 1);
        save_instances(&path, &merged, Some(&ctx.hash))?;
        let out = train(model, &merged, &dev, &store, level, &tc)?;
        let mut s = save_outcome(ctx, level, n + 1, merged.len(), &out)?;
        s["hard_negatives"] = json!(hard.iter().map(Vec::len).sum::<usize>());
        summary.insert(level_name(level).into(), s);
    }
    Ok(Value::Object(summary))
}

pub fn index(ctx: &Ctx) -> Out {
    let store = ctx.store()?;
    let mut summary = serde_json::Map::new();
    for level in [Level::Document, Level::Passage] {
        let model = ctx.serving_model(level)?;
        let idx = MipsIndex::build(&store, &model, level, ctx.cfg.separator_style)?;
        let path = ctx.cfg.index_path(level);
        ensure_parent(&path)?;
        idx.save(&path, Some(&ctx.hash))?;
        summary.insert(
            level_name(level).into(),
            json!({ "rows": idx.len(), "dim": idx.dim(), "output": path }),
        );
    }
    Ok(Value::Object(summary))
}

pub fn retrieve(ctx: &Ctx) -> Out {
    let store = ctx.store()?;
    let hierarchy = ctx.hierarchy(&store)?;
    let (dm, pm) = (ctx.serving_model(Level::Document)?, ctx.serving_model(Level::Passage)?);
    let retriever = Retriever::new(&hierarchy, &dm, &pm)?;
    let dataset = ctx.dataset(&ctx.cfg.test_set, "test_set")?;
    let results = retriever.retrieve_all(&dataset, &ctx.cfg.retrieval_config(), &store)?;
    let path = ctx.cfg.results_path();
    write_lines(&path, &ctx.header(RESULTS_FORMAT), &results)?;
    Ok(json!({ "n_questions": results.len(), "output": path }))
}

pub fn tune_lambda(ctx: &Ctx) -> Out {
    let store = ctx.store()?;
    let hierarchy = ctx.hierarchy(&store)?;
    let (dm, pm) = (ctx.serving_model(Level::Document)?, ctx.serving_model(Level::Passage)?);
    let retriever = Retriever::new(&hierarchy, &dm, &pm)?;
    let dev = ctx.dataset(&ctx.cfg.dev_set, "dev_set")?;
    let search = retriever.tune_lambda(&dev, ctx.cfg.k1, &store)?;
    let path = ctx.cfg.lambda_path();
    write_json(
        &path,
        &json!({
            "format": LAMBDA_FORMAT,
            "version": 1,
            "config_hash": ctx.hash,
            "k1": ctx.cfg.k1,
            "cutoff": TUNE_CUTOFF,
            "n_questions": dev.len(),
            "search": search,
        }),
    )?;
    Ok(json!({ "lambda": search.lambda, "accuracy": search.accuracy, "output": path }))
}

pub fn eval(ctx: &Ctx) -> Out {
    let results_path = ctx.cfg.results_path();
    let (header, results): (_, Vec<QuestionResult>) = at(&results_path, read_jsonl(&results_path))?;
    if let Some(h) = header {
        if h.format != RESULTS_FORMAT {
            return Err(Error::Format(format!("expected {RESULTS_FORMAT}, found {}", h.format)).into());
        }
    }
    let dataset = ctx.dataset(&ctx.cfg.test_set, "test_set")?;
    let passage = topk_accuracy(&results, &dataset, &ctx.cfg.cutoffs)?;
    let document = match &ctx.cfg.corpus {
        Some(_) => {
            let store = ctx.store()?;
            let docs: Vec<DocResult> = results.iter().map(DocResult::from_passages).collect();
            Some(doc_topk_accuracy(&docs, &dataset, &store, &ctx.cfg.cutoffs)?)
        }
        None => None,
    };
    for r in std::iter::once(&passage).chain(document.as_ref()) {
        if !r.is_monotone() {
            return Err(CliError::Internal("accuracy decreases with the cutoff".into()));
        }
    }
    let report = ReportFile::new(Some(ctx.hash.clone()), ctx.cfg.echo(), passage, document);
    let path = ctx.cfg.report_path();
    write_json(&path, &report)?;
    Ok(json!({ "passage": report.passage.per_cutoff, "n_questions": report.passage.n_questions, "output": path }))
}

pub fn time(ctx: &Ctx) -> Out {
    let store = ctx.store()?;
    let hierarchy = ctx.hierarchy(&store)?;
    let (dm, pm) = (ctx.serving_model(Level::Document)?, ctx.serving_model(Level::Passage)?);
    let retriever = Retriever::new(&hierarchy, &dm, &pm)?;
    let dataset = ctx.dataset(&ctx.cfg.test_set, "test_set")?;
    let queries: Vec<_> = dataset
        .iter()
        .map(|ex| retriever.encode_question(&ex.question))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| CliError::Internal(e.to_string()))?;
    let c = &ctx.cfg;
    let timing = pool.install(|| time_stages(&hierarchy, &queries, c.k1, c.k2, c.lambda, c.time_repeats))?;
    let path = c.timing_path();
    write_json(
        &path,
        &json!({
            "format": TIMING_FORMAT,
            "version": 1,
            "config_hash": ctx.hash,
            "config": c.echo(),
            "timing": timing,
        }),
    )?;
    Ok(json!({ "speedup": timing.speedup, "mean_candidate_fraction": timing.mean_candidate_fraction, "output": path }))
}

pub struct SynthArgs {
    pub docs: usize,
    pub train_per_passage: usize,
    pub dev: usize,
    pub test: usize,
    pub distractor_rate: f64,
    pub out: std::path::PathBuf,
}

/// Writes a planted corpus, its question sets and a matching run config.
pub fn synth(seed: u64, args: &SynthArgs) -> Out {
    if !(0.0..=1.0).contains(&args.distractor_rate) {
        return Err(Error::Config("distractor rate must lie in [0, 1]".into()).into());
    }
    let cfg = PlantedConfig {
        n_docs: args.docs,
        train_per_passage: args.train_per_passage,
        n_dev: args.dev,
        n_test: args.test,
        distractor_rate: args.distractor_rate,
        seed,
        ..Default::default()
    };
    let task = planted(&cfg);
    fs::create_dir_all(&args.out)?;
    write_jsonl(&args.out.join("corpus.jsonl"), None, &task.records)?;
    write_jsonl(&args.out.join("train.jsonl"), None, &task.train)?;
    write_jsonl(&args.out.join("dev.jsonl"), None, &task.dev)?;
    write_jsonl(&args.out.join("test.jsonl"), None, &task.test)?;
    let toml = format!(
        "seed = {seed}\ncorpus = \"corpus.jsonl\"\ntrain_set = \"train.jsonl\"\ndev_set = \"dev.jsonl\"\n\
         test_set = \"test.jsonl\"\nmax_words = {}\n",
        cfg.block_words
    );
    fs::write(args.out.join("run.toml"), toml)?;
    Ok(json!({
        "documents": task.records.len(),
        "train": task.train.len(),
        "dev": task.dev.len(),
        "test": task.test.len(),
        "output": args.out,
    }))
}
