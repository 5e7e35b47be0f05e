//! `precedent` — batch CLI for the two-stage case-law retrieval engine.
//!
//! Subcommands: `stats`, `index`, `retrieve`, `entail`, `evaluate`,
//! `dump-embeddings-template`. Runs are driven by named presets with
//! `--set key=value` overrides; every output file is written atomically and
//! run files carry their fully resolved configuration as `#` header lines.
//!
//! Exit codes: 0 success, 1 user error (bad flags, paths or data), 2
//! internal error.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::{info, warn};

use precedent_core::cascade::{
    self, run_task1_with_index, run_task2, write_run, PipelineConfig, ProviderKind, Task,
};
use precedent_core::corpus::{
    compute_stats_task1, compute_stats_task2, load_documents_dir, load_task1_queries,
    load_task2_corpus, CorpusStats, LabelSet,
};
use precedent_core::embedding::{
    load_paragraph_embeddings, load_word_vectors, AveragedNgramProvider, EmbeddingProvider,
    PrecomputedProvider,
};
use precedent_core::eval::{evaluate, per_query_table};
use precedent_core::lexical::{read_index, write_index};
use precedent_core::ranking::write_diagnostics;

#[derive(Parser)]
#[command(name = "precedent", version, about = "Two-stage case-law retrieval engine")]
struct Cli {
    /// Worker thread cap (0 = automatic).
    #[arg(long, global = true, env = "PRECEDENT_THREADS", default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct PresetArgs {
    /// Named configuration preset.
    #[arg(long)]
    preset: String,

    /// Override one resolved field, `key=value`; repeatable, last wins.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Corpus statistics: counts, relevant-label and word-length averages.
    Stats {
        /// Which corpus layout to read: task1 or task2.
        #[arg(long)]
        task: String,
        /// Task 1: directory of query `<case_id>.txt` files.
        #[arg(long)]
        queries: Option<PathBuf>,
        /// Task 1: directory of candidate `<case_id>.txt` files.
        #[arg(long)]
        candidates: Option<PathBuf>,
        /// Task 2: root directory of per-query subdirectories.
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Gold labels JSON (query id -> relevant ids).
        #[arg(long)]
        labels: Option<PathBuf>,
        /// Emit JSON instead of the table.
        #[arg(long)]
        json: bool,
    },

    /// Build the stage-1 index for a candidate corpus and save it.
    Index {
        #[command(flatten)]
        preset: PresetArgs,
        #[arg(long)]
        candidates: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },

    /// Case retrieval: BM25 candidate generation plus optional semantic
    /// re-ranking, one run file out.
    Retrieve {
        #[command(flatten)]
        preset: PresetArgs,
        #[arg(long)]
        queries: PathBuf,
        #[arg(long)]
        candidates: PathBuf,
        /// Index cache: reused when fresh, rebuilt (and rewritten) when
        /// absent or stale.
        #[arg(long)]
        index: Option<PathBuf>,
        /// Word-vector file (word2vec text format) for averaged-ngram runs.
        #[arg(long)]
        word_vectors: Option<PathBuf>,
        /// Skip underscore-joined bigram lookups when averaging.
        #[arg(long)]
        no_bigrams: bool,
        /// Paragraph-embedding TSV for precomputed runs.
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Directory for per-query stage-2 diagnostics TSVs.
        #[arg(long)]
        diagnostics: Option<PathBuf>,
    },

    /// Entailing-paragraph selection over per-query pools.
    Entail {
        #[command(flatten)]
        preset: PresetArgs,
        /// Root directory of per-query subdirectories.
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },

    /// Score a run file against gold labels.
    Evaluate {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        /// Write the JSON report here (otherwise printed).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also print the per-query breakdown table.
        #[arg(long)]
        per_query: bool,
    },

    /// List every (doc_id, unit_index, text) an external embedder must
    /// cover to serve a precomputed run over this corpus.
    DumpEmbeddingsTemplate {
        #[command(flatten)]
        preset: PresetArgs,
        #[arg(long)]
        queries: PathBuf,
        #[arg(long)]
        candidates: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Print to stdout, treating a closed pipe (e.g. `| head`) as a normal
/// exit instead of a panic.
macro_rules! outln {
    ($($arg:tt)*) => {
        emit(format!($($arg)*))
    };
}

fn emit(line: String) {
    use std::io::Write as _;
    let mut out = std::io::stdout().lock();
    let result = out.write_all(line.as_bytes()).and_then(|_| out.write_all(b"\n"));
    if let Err(e) = result {
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            std::process::exit(0);
        }
        eprintln!("error: cannot write to stdout: {e}");
        std::process::exit(1);
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = e.print();
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            std::process::exit(code);
        }
    };
    let code = match std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| execute(cli))) {
        Ok(Ok(())) => 0,
        Ok(Err(e)) => {
            eprintln!("error: {e:#}");
            1
        }
        Err(_) => {
            eprintln!("internal error; rerun with RUST_BACKTRACE=1 for a stack trace");
            2
        }
    };
    std::process::exit(code);
}

fn execute(cli: Cli) -> Result<()> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .context("configuring the thread pool")?;
    }
    match cli.command {
        Command::Stats {
            task,
            queries,
            candidates,
            corpus,
            labels,
            json,
        } => cmd_stats(&task, queries, candidates, corpus, labels, json),
        Command::Index {
            preset,
            candidates,
            out,
        } => cmd_index(&preset, &candidates, &out),
        Command::Retrieve {
            preset,
            queries,
            candidates,
            index,
            word_vectors,
            no_bigrams,
            embeddings,
            out,
            diagnostics,
        } => cmd_retrieve(
            &preset,
            &queries,
            &candidates,
            index.as_deref(),
            word_vectors.as_deref(),
            no_bigrams,
            embeddings.as_deref(),
            &out,
            diagnostics.as_deref(),
        ),
        Command::Entail {
            preset,
            corpus,
            out,
        } => cmd_entail(&preset, &corpus, &out),
        Command::Evaluate {
            run,
            labels,
            out,
            per_query,
        } => cmd_evaluate(&run, &labels, out.as_deref(), per_query),
        Command::DumpEmbeddingsTemplate {
            preset,
            queries,
            candidates,
            out,
        } => cmd_dump_template(&preset, &queries, &candidates, &out),
    }
}

/// Resolve preset + overrides, logging each application (last wins).
fn resolve_config(args: &PresetArgs) -> Result<PipelineConfig> {
    let mut config = PipelineConfig::preset(&args.preset)?;
    for kv in &args.overrides {
        let (key, value) = kv
            .split_once('=')
            .with_context(|| format!("override {kv:?} is not key=value"))?;
        let (key, value) = (key.trim(), value.trim());
        info!("override {key} = {value}");
        config.apply_override(key, value)?;
    }
    config.validate()?;
    Ok(config)
}

/// Write bytes to `path` atomically: temp file in the same directory, then
/// rename.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("creating a temp file next to {}", path.display()))?;
    tmp.write_all(bytes)?;
    tmp.persist(path)
        .with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

fn cmd_stats(
    task: &str,
    queries: Option<PathBuf>,
    candidates: Option<PathBuf>,
    corpus: Option<PathBuf>,
    labels: Option<PathBuf>,
    json: bool,
) -> Result<()> {
    let labels = match labels {
        Some(path) => LabelSet::from_json_file(&path)?,
        None => LabelSet::default(),
    };
    let stats: CorpusStats = match task {
        "task1" => {
            let queries_dir = queries.context("--queries is required for task1 stats")?;
            let candidates_dir = candidates.context("--candidates is required for task1 stats")?;
            let config = PipelineConfig::preset("task1-bm25")?;
            let queries = load_task1_queries(
                &queries_dir,
                &config.fragment_marker,
                config.context_before,
                config.context_after,
            )?;
            let candidates = load_documents_dir(&candidates_dir)?;
            compute_stats_task1(&queries, &candidates, &labels)?
        }
        "task2" => {
            let root = corpus.context("--corpus is required for task2 stats")?;
            let queries = load_task2_corpus(&root)?;
            compute_stats_task2(&queries, &labels)?
        }
        other => bail!("unknown task {other:?}; expected task1 or task2"),
    };

    if json {
        outln!("{}", serde_json::to_string_pretty(&stats)?);
        return Ok(());
    }
    outln!("{:<42} {:>12}", "# of queries", stats.query_count);
    outln!(
        "{:<42} {:>12}",
        "# of candidate cases/paragraphs", stats.candidate_count
    );
    if let Some(avg) = stats.avg_candidate_paragraphs_per_query {
        outln!(
            "{:<42} {:>12.3}",
            "avg # of candidate paragraphs per query", avg
        );
    }
    outln!(
        "{:<42} {:>12.3}",
        "avg # of relevant candidates/paragraphs", stats.avg_relevant
    );
    outln!(
        "{:<42} {:>12.2}",
        "avg query length (words)", stats.avg_query_words
    );
    outln!(
        "{:<42} {:>12.2}",
        "avg candidate length (words)", stats.avg_candidate_words
    );
    Ok(())
}

fn cmd_index(preset: &PresetArgs, candidates_dir: &Path, out: &Path) -> Result<()> {
    let config = resolve_config(preset)?;
    if config.task != Task::Task1 {
        bail!("index builds stage-1 artifacts; use a task1 preset");
    }
    let candidates = load_documents_dir(candidates_dir)?;
    let hash = cascade::stage1_corpus_hash(&candidates, &config);
    let index = cascade::build_stage1_index(&candidates, &config, &hash)?;
    let mut bytes = Vec::new();
    write_index(&mut bytes, &index)?;
    write_atomic(out, &bytes)?;
    outln!(
        "indexed {} units over {} candidates ({} terms) -> {}",
        index.docs().len(),
        candidates.len(),
        index.vocab().len(),
        out.display()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_retrieve(
    preset: &PresetArgs,
    queries_dir: &Path,
    candidates_dir: &Path,
    index_path: Option<&Path>,
    word_vectors: Option<&Path>,
    no_bigrams: bool,
    embeddings: Option<&Path>,
    out: &Path,
    diagnostics: Option<&Path>,
) -> Result<()> {
    let config = resolve_config(preset)?;
    if config.task != Task::Task1 {
        bail!("retrieve runs task1 presets; use `entail` for task2");
    }

    let queries = load_task1_queries(
        queries_dir,
        &config.fragment_marker,
        config.context_before,
        config.context_after,
    )?;
    let candidates = load_documents_dir(candidates_dir)?;
    let hash = cascade::stage1_corpus_hash(&candidates, &config);

    let index = match index_path {
        Some(path) if path.exists() => {
            let file = std::fs::File::open(path)
                .with_context(|| format!("opening index {}", path.display()))?;
            let cached = read_index(std::io::BufReader::new(file), path)?;
            if cached.corpus_hash() == hash {
                info!("reusing index cache {}", path.display());
                cached
            } else {
                warn!(
                    "index cache {} is stale (corpus or parameters changed); rebuilding",
                    path.display()
                );
                rebuild_cache(&candidates, &config, &hash, path)?
            }
        }
        Some(path) => rebuild_cache(&candidates, &config, &hash, path)?,
        None => cascade::build_stage1_index(&candidates, &config, &hash)?,
    };

    let provider: Option<Box<dyn EmbeddingProvider>> = match config.provider {
        ProviderKind::None => None,
        ProviderKind::AveragedNgram => {
            let path = word_vectors
                .context("this preset needs --word-vectors (word2vec text format)")?;
            let table = load_word_vectors(path)?;
            info!(
                "loaded {} word vectors (dim {})",
                table.len(),
                table.dimension
            );
            Some(Box::new(AveragedNgramProvider::new(table, !no_bigrams)))
        }
        ProviderKind::Precomputed => {
            let path = embeddings.context("this preset needs --embeddings (paragraph TSV)")?;
            let store = load_paragraph_embeddings(path)?;
            info!(
                "loaded {} paragraph embeddings (dim {})",
                store.len(),
                store.dimension
            );
            Some(Box::new(PrecomputedProvider::new(store)))
        }
    };

    let outcome =
        run_task1_with_index(&queries, &candidates, &index, provider.as_deref(), &config)?;

    let mut header = config.echo_lines();
    header.push(format!("corpus_hash = {hash}"));
    header.push(format!("preset = {}", preset.preset));
    header.sort();
    let mut bytes = Vec::new();
    write_run(&mut bytes, &outcome.run, &header)?;
    write_atomic(out, &bytes)?;

    if let (Some(dir), Some(diag)) = (diagnostics, &outcome.diagnostics) {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("creating diagnostics dir {}", dir.display()))?;
        for (query_id, scores) in diag {
            let mut buf = Vec::new();
            write_diagnostics(&mut buf, scores)?;
            write_atomic(&dir.join(format!("{query_id}.tsv")), &buf)?;
        }
    }
    outln!(
        "retrieved {} queries x top-{} -> {}",
        outcome.run.predictions.len(),
        config.predict_k,
        out.display()
    );
    Ok(())
}

fn rebuild_cache(
    candidates: &[precedent_core::Document],
    config: &PipelineConfig,
    hash: &str,
    path: &Path,
) -> Result<precedent_core::lexical::LexicalIndex> {
    let index = cascade::build_stage1_index(candidates, config, hash)?;
    let mut bytes = Vec::new();
    write_index(&mut bytes, &index)?;
    write_atomic(path, &bytes)?;
    info!("wrote index cache {}", path.display());
    Ok(index)
}

fn cmd_entail(preset: &PresetArgs, corpus: &Path, out: &Path) -> Result<()> {
    let config = resolve_config(preset)?;
    if config.task != Task::Task2 {
        bail!("entail runs task2 presets; use `retrieve` for task1");
    }
    let queries = load_task2_corpus(corpus)?;
    let run = run_task2(&queries, &config)?;

    let mut header = config.echo_lines();
    header.push(format!("preset = {}", preset.preset));
    header.sort();
    let mut bytes = Vec::new();
    write_run(&mut bytes, &run, &header)?;
    write_atomic(out, &bytes)?;
    outln!(
        "predicted {} queries x top-{} -> {}",
        run.predictions.len(),
        config.predict_k,
        out.display()
    );
    Ok(())
}

fn cmd_evaluate(
    run_path: &Path,
    labels_path: &Path,
    out: Option<&Path>,
    per_query: bool,
) -> Result<()> {
    let run = cascade::read_run(run_path)?;
    let labels = LabelSet::from_json_file(labels_path)?;
    let report = evaluate(&run, &labels)?;

    if per_query {
        emit(per_query_table(&report).trim_end().to_string());
    }
    outln!(
        "precision {:.4}  recall {:.4}  f1 {:.4}  (correct {} / retrieved {} / relevant {})",
        report.precision,
        report.recall,
        report.f1,
        report.correct,
        report.retrieved,
        report.relevant
    );
    let json = serde_json::to_string_pretty(&report.to_json())?;
    match out {
        Some(path) => write_atomic(path, format!("{json}\n").as_bytes())?,
        None => outln!("{json}"),
    }
    Ok(())
}

fn cmd_dump_template(
    preset: &PresetArgs,
    queries_dir: &Path,
    candidates_dir: &Path,
    out: &Path,
) -> Result<()> {
    let config = resolve_config(preset)?;
    let queries = load_task1_queries(
        queries_dir,
        &config.fragment_marker,
        config.context_before,
        config.context_after,
    )?;
    let candidates = load_documents_dir(candidates_dir)?;
    let units = cascade::embedding_units(&queries, &candidates);
    let mut bytes = Vec::new();
    for (doc_id, unit_index, text) in &units {
        writeln!(&mut bytes, "{doc_id}\t{unit_index}\t{text}")?;
    }
    write_atomic(out, &bytes)?;
    outln!("listed {} units -> {}", units.len(), out.display());
    Ok(())
}
