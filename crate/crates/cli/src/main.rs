//! `hierdense` command-line pipeline.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use hierdense::{Error, Level};

use commands::{Ctx, SynthArgs};
use config::RunConfig;

const FORMATS: &str = "\
CONFIG (TOML, flat; `--set key=value` overrides any key; relative paths in the
file are relative to the file's directory):
  seed (required)                     root of every named sub-seed
  corpus, train_set, dev_set, test_set   input files
  model_dir, index_dir, output_dir    artifact directories (models, indexes, outputs)
  max_words=100  separator_style=token|comma
  encoder_kind=linear_trainable|hashed_bow  dim=64  buckets=65536
  init=shared_projection|independent_projection|zeros
  batch_size=32  epochs=10  lr=2.0  warmup_steps=0  eval_steps=0
  neg_bm25=1  neg_abstract=1  neg_alltext=0  neg_in_doc=2  neg_in_sec=0
  iter_depth=10  iteration=1
  k1=100  k2=100  lambda=1.0  mode=serial_rerank|no_rerank|parallel_rerank
  cutoffs=[1, 20, 100]  time_repeats=2

INPUT FILES (one JSON object per line):
  corpus     {\"doc_id\", \"title\", \"abstract\", \"sections\": [{\"level\", \"title\", \"text\"}]}
  datasets   {\"question\", \"answers\": [..], \"gold_doc_title\"?, \"gold_context\"?}

ARTIFACTS (every one embeds the SHA-256 config hash):
  output_dir/passages.jsonl               header line, then {passage_id, doc_id, title_path, text}
  output_dir/instances-<level>-it<n>.jsonl  header line, then {question, answers, positive_id,
                                          negatives: [{id, tag}], level}
  model_dir/<level>-it<n>.ckpt            binary little-endian encoder checkpoint
  output_dir/train-<level>-it<n>.json     losses, dev history and best step
  index_dir/<level>-it<n>.index           binary little-endian float32 index, rows sorted by id
  output_dir/results.jsonl                header line, then {question, hits: [{passage_id, doc_id,
                                          score, passage_score, doc_score, rank, has_answer}]}
  output_dir/lambda.json                  coarse and fine lambda grids and the chosen value
  output_dir/report.json                  per-cutoff top-k accuracy, passage and document level
  output_dir/timing.json                  per-stage search milliseconds and speedup

EXIT CODES: 0 ok, 2 config error, 3 data error, 4 internal invariant violation.
Errors are printed to stderr as one JSON line {\"error\", \"message\", \"exit_code\"}.";

#[derive(Parser)]
#[command(name = "hierdense", version, about = "Hierarchical dense retrieval pipeline", after_long_help = FORMATS)]
struct Cli {
    /// Run configuration file (TOML).
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,
    /// Override a config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Cap on worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Log more (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum LevelArg {
    Doc,
    Passage,
}

fn levels(arg: Option<LevelArg>) -> Vec<Level> {
    match arg {
        Some(LevelArg::Doc) => vec![Level::Document],
        Some(LevelArg::Passage) => vec![Level::Passage],
        None => vec![Level::Document, Level::Passage],
    }
}

#[derive(Subcommand)]
enum Command {
    /// Parse and split the corpus; dump its passages.
    Ingest,
    /// Select positives and mine negatives for the training set.
    MineNegatives {
        /// Only this level; both by default.
        #[arg(long)]
        level: Option<LevelArg>,
    },
    /// Train encoders on mined instances (iteration 1).
    Train {
        #[arg(long)]
        level: Option<LevelArg>,
    },
    /// Encode the corpus into document and passage indexes.
    Index,
    /// Retrieve passages for every test question.
    Retrieve,
    /// Pick the fusion weight on the dev set.
    TuneLambda,
    /// Top-k accuracy report for the results file.
    Eval,
    /// Per-stage search timing on the test questions.
    Time,
    /// Mine hard negatives with the current iteration and retrain from it.
    Iterate {
        #[arg(long)]
        level: Option<LevelArg>,
    },
    /// Write a planted synthetic corpus, question sets and run config.
    Synth {
        #[arg(long, default_value_t = 50)]
        docs: usize,
        #[arg(long, default_value_t = 6)]
        train_per_passage: usize,
        #[arg(long, default_value_t = 50)]
        dev: usize,
        #[arg(long, default_value_t = 100)]
        test: usize,
        #[arg(long, default_value_t = 0.0)]
        distractor_rate: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

/// CLI failure: a library error or a broken internal invariant.
#[derive(Debug)]
pub enum CliError {
    Core(Error),
    Usage(String),
    Internal(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(Error::Io(e))
    }
}

impl CliError {
    fn record(&self) -> (&'static str, String, u8) {
        match self {
            CliError::Core(e) => {
                let code = match e {
                    Error::Config(_) | Error::NotTrainable => 2,
                    Error::EmptyBatch => 4,
                    _ => 3,
                };
                (e.kind(), e.to_string(), code)
            }
            CliError::Usage(m) => ("usage", m.clone(), 2),
            CliError::Internal(m) => ("internal", m.clone(), 4),
        }
    }
}

fn error_line(kind: &str, message: &str, code: u8) -> String {
    serde_json::json!({ "error": kind, "message": message, "exit_code": code }).to_string()
}

fn run(cli: Cli) -> Result<serde_json::Value, CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let cfg = RunConfig::resolve(cli.config.as_deref(), &cli.overrides)?;
    if let Command::Synth {
        docs,
        train_per_passage,
        dev,
        test,
        distractor_rate,
        out,
    } = cli.command
    {
        let args = SynthArgs {
            docs,
            train_per_passage,
            dev,
            test,
            distractor_rate,
            out,
        };
        return commands::synth(cfg.seed, &args);
    }
    let ctx = Ctx::new(cfg);
    log::info!("config hash {}", ctx.hash);
    match cli.command {
        Command::Ingest => commands::ingest(&ctx),
        Command::MineNegatives { level } => commands::mine_negatives(&ctx, &levels(level)),
        Command::Train { level } => commands::train_cmd(&ctx, &levels(level)),
        Command::Index => commands::index(&ctx),
        Command::Retrieve => commands::retrieve(&ctx),
        Command::TuneLambda => commands::tune_lambda(&ctx),
        Command::Eval => commands::eval(&ctx),
        Command::Time => commands::time(&ctx),
        Command::Iterate { level } => commands::iterate(&ctx, &levels(level)),
        Command::Synth { .. } => unreachable!("handled above"),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{}", error_line("usage", e.to_string().trim(), 2));
            return ExitCode::from(2);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    std::panic::set_hook(Box::new(|info| {
        eprintln!("{}", error_line("internal", &info.to_string(), 4));
        std::process::exit(4);
    }));

    match run(cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            let (kind, message, code) = e.record();
            eprintln!("{}", error_line(kind, &message, code));
            ExitCode::from(code)
        }
    }
}
