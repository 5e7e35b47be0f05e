//! End-to-end pipelines.
//!
//! Case retrieval runs in up to two stages: BM25 over the candidate corpus
//! (paragraph or whole-document units) prunes to the top `reduce_to` cases,
//! then an optional embedding provider re-ranks the survivors by max-pooled
//! paragraph-pair cosine similarity. Entailment runs a per-query BM25 over
//! that query's own paragraph pool. Named presets pin the parameter sets the
//! pipelines are normally run with.

mod runfile;

pub use runfile::{read_run, read_run_from, write_run};

use std::collections::{BTreeMap, BTreeSet};

use log::warn;
use rayon::prelude::*;

use crate::corpus::{Document, LabelSet, QueryCase, Sentence, Task2Query};
use crate::embedding::{EmbeddingProvider, TextUnit};
use crate::error::{Error, Result};
use crate::lexical::{
    prepare_terms, tokenize, BM25Params, DfBound, LexicalIndex, Norm, RankedUnit, WHOLE_DOC_UNIT,
};
use crate::ranking::{score_pair, top_k, DocScore, DEFAULT_MATRIX_CELL_CAP};

/// Minimum token-set Jaccard overlap for a base-case sentence to count as a
/// match for a fragment sentence.
pub const FRAGMENT_MATCH_THRESHOLD: f64 = 0.6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Task1,
    Task2,
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Task::Task1 => write!(f, "task1"),
            Task::Task2 => write!(f, "task2"),
        }
    }
}

/// Which embedding back-end stage 2 expects (`None` = pure lexical run).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProviderKind {
    None,
    AveragedNgram,
    Precomputed,
}

impl std::fmt::Display for ProviderKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ProviderKind::None => write!(f, "none"),
            ProviderKind::AveragedNgram => write!(f, "averaged-ngram"),
            ProviderKind::Precomputed => write!(f, "precomputed"),
        }
    }
}

/// How an entailment query is constructed from its case.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueryMode {
    /// The entailed fragment's sentences, verbatim.
    FragmentOnly,
    /// Locate fragment sentences in the base case and take `before` previous
    /// and `after` following sentences around every match.
    BaseWindow { before: usize, after: usize },
}

/// Unit granularity for the lexical stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Granularity {
    Paragraph,
    Document,
}

impl std::fmt::Display for Granularity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Granularity::Paragraph => write!(f, "paragraph"),
            Granularity::Document => write!(f, "document"),
        }
    }
}

/// Fully resolved pipeline configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub task: Task,
    pub stage1: BM25Params,
    /// Stage-1 survivors handed to stage 2.
    pub reduce_to: usize,
    pub provider: ProviderKind,
    pub predict_k: usize,
    pub query_mode: QueryMode,
    pub granularity: Granularity,
    /// Fragment-context window in sentences.
    pub context_before: usize,
    pub context_after: usize,
    pub fragment_marker: String,
    pub matrix_cell_cap: usize,
    pub run_tag: String,
}

fn task1_params() -> BM25Params {
    BM25Params {
        k1: 1.6,
        b: 0.99,
        ngram_min: 2,
        ngram_max: 6,
        max_df: DfBound::Fraction(0.90),
        min_df: DfBound::Absolute(1),
        remove_stopwords: true,
        norm: Norm::None,
    }
}

fn task2_params() -> BM25Params {
    BM25Params {
        k1: 1.6,
        b: 0.7,
        ngram_min: 1,
        ngram_max: 1,
        max_df: DfBound::Fraction(0.65),
        min_df: DfBound::Absolute(1),
        remove_stopwords: false,
        norm: Norm::None,
    }
}

impl PipelineConfig {
    pub const PRESETS: [&'static str; 5] = [
        "task1-bm25",
        "task1-reduced-sent2vec",
        "task1-reduced-sbert",
        "task2-fragment",
        "task2-basewindow",
    ];

    /// Resolve a named preset to its pinned configuration.
    pub fn preset(name: &str) -> Result<PipelineConfig> {
        let base_task1 = PipelineConfig {
            task: Task::Task1,
            stage1: task1_params(),
            reduce_to: 100,
            provider: ProviderKind::None,
            predict_k: 5,
            query_mode: QueryMode::FragmentOnly,
            granularity: Granularity::Paragraph,
            context_before: 3,
            context_after: 3,
            fragment_marker: crate::corpus::DEFAULT_FRAGMENT_MARKER.to_string(),
            matrix_cell_cap: DEFAULT_MATRIX_CELL_CAP,
            run_tag: name.to_string(),
        };
        let base_task2 = PipelineConfig {
            task: Task::Task2,
            stage1: task2_params(),
            reduce_to: 100,
            provider: ProviderKind::None,
            predict_k: 1,
            query_mode: QueryMode::FragmentOnly,
            granularity: Granularity::Paragraph,
            context_before: 3,
            context_after: 3,
            fragment_marker: crate::corpus::DEFAULT_FRAGMENT_MARKER.to_string(),
            matrix_cell_cap: DEFAULT_MATRIX_CELL_CAP,
            run_tag: name.to_string(),
        };
        match name {
            "task1-bm25" => Ok(base_task1),
            "task1-reduced-sent2vec" => Ok(PipelineConfig {
                provider: ProviderKind::AveragedNgram,
                ..base_task1
            }),
            "task1-reduced-sbert" => Ok(PipelineConfig {
                provider: ProviderKind::Precomputed,
                ..base_task1
            }),
            "task2-fragment" => Ok(base_task2),
            "task2-basewindow" => Ok(PipelineConfig {
                query_mode: QueryMode::BaseWindow {
                    before: 1,
                    after: 1,
                },
                ..base_task2
            }),
            other => Err(Error::InvalidConfig {
                message: format!(
                    "unknown preset {other:?}; valid presets: {}",
                    Self::PRESETS.join(", ")
                ),
            }),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.stage1.validate()?;
        if self.predict_k < 1 {
            return Err(Error::InvalidConfig {
                message: "predict_k must be >= 1".to_string(),
            });
        }
        if self.reduce_to < self.predict_k {
            return Err(Error::InvalidConfig {
                message: format!(
                    "reduce_to ({}) must be >= predict_k ({})",
                    self.reduce_to, self.predict_k
                ),
            });
        }
        if self.fragment_marker.is_empty() {
            return Err(Error::InvalidConfig {
                message: "fragment_marker must be non-empty".to_string(),
            });
        }
        Ok(())
    }

    /// Apply one `key=value` override on top of a preset. Later applications
    /// win; the caller logs them.
    pub fn apply_override(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| Error::InvalidConfig {
            message: format!("invalid {what} value {value:?} for override {key:?}"),
        };
        match key {
            "k1" => self.stage1.k1 = value.parse().map_err(|_| bad("float"))?,
            "b" => self.stage1.b = value.parse().map_err(|_| bad("float"))?,
            "ngram_min" => self.stage1.ngram_min = value.parse().map_err(|_| bad("integer"))?,
            "ngram_max" => self.stage1.ngram_max = value.parse().map_err(|_| bad("integer"))?,
            "max_df" => self.stage1.max_df = parse_df_bound(value).ok_or_else(|| bad("df bound"))?,
            "min_df" => self.stage1.min_df = parse_df_bound(value).ok_or_else(|| bad("df bound"))?,
            "remove_stopwords" => {
                self.stage1.remove_stopwords = value.parse().map_err(|_| bad("boolean"))?
            }
            "norm" => {
                self.stage1.norm = match value {
                    "none" => Norm::None,
                    "l1" => Norm::L1,
                    "l2" => Norm::L2,
                    _ => return Err(bad("norm")),
                }
            }
            "reduce_to" => self.reduce_to = value.parse().map_err(|_| bad("integer"))?,
            "predict_k" => self.predict_k = value.parse().map_err(|_| bad("integer"))?,
            "granularity" => {
                self.granularity = match value {
                    "paragraph" => Granularity::Paragraph,
                    "document" => Granularity::Document,
                    _ => return Err(bad("granularity")),
                }
            }
            "query_mode" => {
                self.query_mode = match value {
                    "fragment_only" => QueryMode::FragmentOnly,
                    "base_window" => QueryMode::BaseWindow {
                        before: 1,
                        after: 1,
                    },
                    _ => return Err(bad("query mode")),
                }
            }
            "window_before" => {
                let v: usize = value.parse().map_err(|_| bad("integer"))?;
                self.query_mode = match self.query_mode {
                    QueryMode::BaseWindow { after, .. } => QueryMode::BaseWindow { before: v, after },
                    QueryMode::FragmentOnly => QueryMode::BaseWindow { before: v, after: 1 },
                };
            }
            "window_after" => {
                let v: usize = value.parse().map_err(|_| bad("integer"))?;
                self.query_mode = match self.query_mode {
                    QueryMode::BaseWindow { before, .. } => QueryMode::BaseWindow { before, after: v },
                    QueryMode::FragmentOnly => QueryMode::BaseWindow { before: 1, after: v },
                };
            }
            "context_before" => self.context_before = value.parse().map_err(|_| bad("integer"))?,
            "context_after" => self.context_after = value.parse().map_err(|_| bad("integer"))?,
            "fragment_marker" => self.fragment_marker = value.to_string(),
            "matrix_cell_cap" => {
                self.matrix_cell_cap = value.parse().map_err(|_| bad("integer"))?
            }
            "run_tag" => self.run_tag = value.to_string(),
            other => {
                return Err(Error::InvalidConfig {
                    message: format!(
                        "unknown override key {other:?}; valid keys: b, context_after, \
                         context_before, fragment_marker, granularity, k1, matrix_cell_cap, \
                         max_df, min_df, ngram_max, ngram_min, norm, predict_k, query_mode, \
                         reduce_to, remove_stopwords, run_tag, window_after, window_before"
                    ),
                })
            }
        }
        Ok(())
    }

    /// `key = value` lines of the fully resolved configuration, sorted by
    /// key, for self-describing run files.
    pub fn echo_lines(&self) -> Vec<String> {
        let mut pairs: Vec<(String, String)> = vec![
            ("task".into(), self.task.to_string()),
            ("k1".into(), self.stage1.k1.to_string()),
            ("b".into(), self.stage1.b.to_string()),
            ("ngram_min".into(), self.stage1.ngram_min.to_string()),
            ("ngram_max".into(), self.stage1.ngram_max.to_string()),
            ("max_df".into(), self.stage1.max_df.to_string()),
            ("min_df".into(), self.stage1.min_df.to_string()),
            (
                "remove_stopwords".into(),
                self.stage1.remove_stopwords.to_string(),
            ),
            ("norm".into(), self.stage1.norm.to_string()),
            ("reduce_to".into(), self.reduce_to.to_string()),
            ("provider".into(), self.provider.to_string()),
            ("predict_k".into(), self.predict_k.to_string()),
            ("granularity".into(), self.granularity.to_string()),
            ("context_before".into(), self.context_before.to_string()),
            ("context_after".into(), self.context_after.to_string()),
            ("fragment_marker".into(), self.fragment_marker.clone()),
            ("matrix_cell_cap".into(), self.matrix_cell_cap.to_string()),
            ("run_tag".into(), self.run_tag.clone()),
        ];
        match self.query_mode {
            QueryMode::FragmentOnly => {
                pairs.push(("query_mode".into(), "fragment_only".into()));
            }
            QueryMode::BaseWindow { before, after } => {
                pairs.push(("query_mode".into(), "base_window".into()));
                pairs.push(("window_before".into(), before.to_string()));
                pairs.push(("window_after".into(), after.to_string()));
            }
        }
        pairs.sort();
        pairs
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}"))
            .collect()
    }
}

fn parse_df_bound(value: &str) -> Option<DfBound> {
    if let Ok(n) = value.parse::<usize>() {
        return Some(DfBound::Absolute(n));
    }
    value.parse::<f64>().ok().map(DfBound::Fraction)
}

/// One ranked prediction for a query.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub candidate_id: String,
    /// Numeric paragraph identity for entailment runs, when the pool file
    /// stem parses as an integer.
    pub paragraph_index: Option<i64>,
    pub score: f64,
}

/// Ranked predictions per query, deterministically ordered by query id.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub run_tag: String,
    pub predictions: BTreeMap<String, Vec<Prediction>>,
}

/// A case-retrieval run plus its stage-1 state for diagnostics.
#[derive(Debug)]
pub struct Task1Outcome {
    pub run: RunResult,
    /// Per query: stage-1 candidate ranking, best first, up to `reduce_to`.
    pub stage1: BTreeMap<String, Vec<(String, f64)>>,
    /// Per query: stage-2 pooled scores for every retained candidate, best
    /// first. Present only when a provider ran.
    pub diagnostics: Option<BTreeMap<String, Vec<DocScore>>>,
}

fn ensure_unique_ids<'a>(ids: impl Iterator<Item = &'a str>) -> Result<()> {
    let mut seen = BTreeSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(Error::DuplicateDocId { id: id.to_string() });
        }
    }
    Ok(())
}

/// Tokenized lexical units for the candidate corpus at a granularity.
fn candidate_units(
    candidates: &[Document],
    granularity: Granularity,
) -> Vec<(String, i32, Vec<String>)> {
    let mut units = Vec::new();
    for doc in candidates {
        if doc.paragraphs.is_empty() {
            warn!("candidate {:?} has no non-empty paragraphs; excluded", doc.id);
            continue;
        }
        match granularity {
            Granularity::Paragraph => {
                for p in &doc.paragraphs {
                    units.push((doc.id.clone(), p.index as i32, tokenize(&p.text)));
                }
            }
            Granularity::Document => {
                units.push((doc.id.clone(), WHOLE_DOC_UNIT, tokenize(&doc.raw_text)));
            }
        }
    }
    units
}

/// Collapse a unit ranking to a candidate-document ranking: each document
/// takes its best unit score; order is inherited from the unit ranking, so
/// documents sort by score descending with ascending-id tie-breaks.
fn aggregate_to_docs(ranked: &[RankedUnit], limit: usize) -> Vec<(String, f64)> {
    let mut seen: BTreeSet<&str> = BTreeSet::new();
    let mut docs = Vec::with_capacity(limit.min(ranked.len()));
    for unit in ranked {
        if docs.len() == limit {
            break;
        }
        if seen.insert(unit.doc_id.as_str()) {
            docs.push((unit.doc_id.clone(), unit.score));
        }
    }
    docs
}

/// Stage-1 query text: fragment contexts when present, whole document
/// otherwise (marker-free queries stay usable).
fn stage1_query_text(query: &QueryCase) -> String {
    let blocks = query.context_texts();
    if blocks.is_empty() {
        query.document.raw_text.clone()
    } else {
        blocks.join("\n")
    }
}

/// Stage-2 query units: one per fragment-context block, falling back to the
/// query's own paragraphs when it carries no marker.
fn stage2_query_units(query: &QueryCase) -> Vec<(i32, String)> {
    let blocks = query.context_texts();
    if !blocks.is_empty() {
        return blocks
            .into_iter()
            .enumerate()
            .map(|(i, text)| (i as i32, text))
            .collect();
    }
    warn!(
        "query {:?} has no fragment contexts; using its paragraphs as stage-2 units",
        query.id
    );
    query
        .document
        .paragraphs
        .iter()
        .map(|p| (p.index as i32, p.text.clone()))
        .collect()
}

/// Every unit an external embedder must cover for a precomputed run:
/// query context blocks first, then candidate paragraphs, with
/// whitespace-normalized single-line text.
pub fn embedding_units(
    queries: &[QueryCase],
    candidates: &[Document],
) -> Vec<(String, i32, String)> {
    let mut units = Vec::new();
    for query in queries {
        for (unit_index, text) in stage2_query_units(query) {
            units.push((query.id.clone(), unit_index, normalize_line(&text)));
        }
    }
    for doc in candidates {
        for p in &doc.paragraphs {
            units.push((doc.id.clone(), p.index as i32, normalize_line(&p.text)));
        }
    }
    units
}

fn normalize_line(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Content hash of a stage-1 index identity: candidate text, granularity
/// and the lexical parameters. Fields that only steer later stages
/// (provider, predict_k, run_tag, query windows) are deliberately outside
/// the hash so presets sharing a stage 1 share the cache.
pub fn stage1_corpus_hash(candidates: &[Document], config: &PipelineConfig) -> String {
    let p = &config.stage1;
    let mut parts: Vec<Vec<u8>> = Vec::with_capacity(candidates.len() * 2 + 2);
    parts.push(config.granularity.to_string().into_bytes());
    parts.push(
        format!(
            "k1={} b={} ngram={},{} max_df={} min_df={} stopwords={} norm={}",
            p.k1, p.b, p.ngram_min, p.ngram_max, p.max_df, p.min_df, p.remove_stopwords, p.norm
        )
        .into_bytes(),
    );
    for doc in candidates {
        parts.push(doc.id.clone().into_bytes());
        parts.push(doc.raw_text.clone().into_bytes());
    }
    crate::lexical::fingerprint(parts)
}

/// Build the stage-1 lexical index over the candidate corpus at the
/// configured granularity, stamped with the corpus hash.
pub fn build_stage1_index(
    candidates: &[Document],
    config: &PipelineConfig,
    corpus_hash: &str,
) -> Result<LexicalIndex> {
    config.stage1.validate()?;
    ensure_unique_ids(candidates.iter().map(|d| d.id.as_str()))?;
    let units = candidate_units(candidates, config.granularity);
    if units.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    LexicalIndex::build(units, &config.stage1, corpus_hash)
}

/// Run the case-retrieval pipeline.
///
/// Stage 1 ranks candidates by BM25 at the configured granularity and keeps
/// the top `reduce_to`. With a provider, stage 2 re-scores only those by
/// max-pooled paragraph-pair cosine similarity; without one, stage 1's top
/// `predict_k` is emitted directly.
pub fn run_task1(
    queries: &[QueryCase],
    candidates: &[Document],
    provider: Option<&dyn EmbeddingProvider>,
    config: &PipelineConfig,
) -> Result<Task1Outcome> {
    let index = build_stage1_index(candidates, config, "")?;
    run_task1_with_index(queries, candidates, &index, provider, config)
}

/// [`run_task1`] over a prebuilt (possibly cache-loaded) stage-1 index. The
/// index parameters must match the configuration.
pub fn run_task1_with_index(
    queries: &[QueryCase],
    candidates: &[Document],
    index: &LexicalIndex,
    provider: Option<&dyn EmbeddingProvider>,
    config: &PipelineConfig,
) -> Result<Task1Outcome> {
    config.validate()?;
    if config.task != Task::Task1 {
        return Err(Error::InvalidConfig {
            message: "run_task1 requires a task1 configuration".to_string(),
        });
    }
    if index.params() != &config.stage1 {
        return Err(Error::InvalidConfig {
            message: "index parameters do not match the configuration".to_string(),
        });
    }
    match (config.provider, provider.is_some()) {
        (ProviderKind::None, true) => {
            return Err(Error::InvalidConfig {
                message: "provider given but configuration says none".to_string(),
            })
        }
        (ProviderKind::None, false) => {}
        (_, false) => {
            return Err(Error::InvalidConfig {
                message: format!("configuration needs a {} provider", config.provider),
            })
        }
        (_, true) => {}
    }
    ensure_unique_ids(queries.iter().map(|q| q.id.as_str()))?;
    ensure_unique_ids(candidates.iter().map(|d| d.id.as_str()))?;
    let by_id: BTreeMap<&str, &Document> =
        candidates.iter().map(|d| (d.id.as_str(), d)).collect();

    type QueryOutcome = (String, Vec<(String, f64)>, Vec<DocScore>, Vec<Prediction>);
    let per_query: Vec<QueryOutcome> = queries
        .par_iter()
        .map(|query| {
            let tokens = tokenize(&stage1_query_text(query));
            let (terms, _) = prepare_terms(&tokens, &config.stage1);
            let ranked = index.rank(&terms, index.docs().len(), Some(query.id.as_str()));
            let stage1 = aggregate_to_docs(&ranked, config.reduce_to);

            let (scores, predictions) = match provider {
                None => {
                    let predictions = stage1
                        .iter()
                        .take(config.predict_k)
                        .map(|(id, score)| Prediction {
                            candidate_id: id.clone(),
                            paragraph_index: None,
                            score: *score,
                        })
                        .collect();
                    (Vec::new(), predictions)
                }
                Some(provider) => {
                    let query_units = stage2_query_units(query);
                    if query_units.is_empty() {
                        warn!(
                            "query {:?} has no text units to embed; emitting no predictions",
                            query.id
                        );
                        return Ok((query.id.clone(), stage1, Vec::new(), Vec::new()));
                    }
                    let query_vectors = query_units
                        .iter()
                        .map(|(unit_index, text)| {
                            provider.embed(&TextUnit {
                                doc_id: &query.id,
                                unit_index: *unit_index,
                                text,
                            })
                        })
                        .collect::<Result<Vec<_>>>()?;

                    let rescored = stage1
                        .par_iter()
                        .map(|(cand_id, _)| {
                            let doc = *by_id.get(cand_id.as_str()).ok_or_else(|| {
                                Error::InvalidConfig {
                                    message: format!(
                                        "index references candidate {cand_id:?} absent from the corpus"
                                    ),
                                }
                            })?;
                            let cand_vectors = doc
                                .paragraphs
                                .iter()
                                .map(|p| {
                                    provider.embed(&TextUnit {
                                        doc_id: &doc.id,
                                        unit_index: p.index as i32,
                                        text: &p.text,
                                    })
                                })
                                .collect::<Result<Vec<_>>>()?;
                            score_pair(
                                &query.id,
                                cand_id,
                                &query_vectors,
                                &cand_vectors,
                                config.matrix_cell_cap,
                            )
                        })
                        .collect::<Result<Vec<_>>>()?;

                    let ordered = top_k(rescored, usize::MAX);
                    let predictions = ordered
                        .iter()
                        .take(config.predict_k)
                        .map(|s| Prediction {
                            candidate_id: s.candidate_id.clone(),
                            paragraph_index: None,
                            score: s.score,
                        })
                        .collect();
                    (ordered, predictions)
                }
            };
            Ok((query.id.clone(), stage1, scores, predictions))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut run = RunResult {
        run_tag: config.run_tag.clone(),
        predictions: BTreeMap::new(),
    };
    let mut stage1_map = BTreeMap::new();
    let mut diagnostics = BTreeMap::new();
    for (query_id, stage1, scores, predictions) in per_query {
        run.predictions.insert(query_id.clone(), predictions);
        stage1_map.insert(query_id.clone(), stage1);
        if provider.is_some() {
            diagnostics.insert(query_id, scores);
        }
    }
    Ok(Task1Outcome {
        run,
        stage1: stage1_map,
        diagnostics: provider.is_some().then_some(diagnostics),
    })
}

fn jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 0.0;
    }
    let intersection = a.intersection(b).count();
    let union = a.len() + b.len() - intersection;
    if union == 0 {
        0.0
    } else {
        intersection as f64 / union as f64
    }
}

/// Construct the entailment query sentence sequence.
///
/// `FragmentOnly` returns the fragment's sentences verbatim. `BaseWindow`
/// locates each fragment sentence in the base case by maximal token-set
/// Jaccard overlap (threshold [`FRAGMENT_MATCH_THRESHOLD`]) and returns the
/// clamped `[-before, +after]` sentence windows around every match,
/// deduplicated in order. No match at all falls back to the fragment with a
/// logged warning.
pub fn build_task2_query(query: &Task2Query, mode: QueryMode) -> Vec<Sentence> {
    let fragment_sentences: Vec<Sentence> = query.fragment.sentences().cloned().collect();
    let QueryMode::BaseWindow { before, after } = mode else {
        return fragment_sentences;
    };

    let base_sentences: Vec<&Sentence> = query.base_case.sentences().collect();
    let base_tokens: Vec<BTreeSet<String>> = base_sentences
        .iter()
        .map(|s| tokenize(&s.text).into_iter().collect())
        .collect();

    let mut matched: BTreeSet<usize> = BTreeSet::new();
    for sentence in &fragment_sentences {
        let ftok: BTreeSet<String> = tokenize(&sentence.text).into_iter().collect();
        if ftok.is_empty() {
            continue;
        }
        let mut best = 0.0f64;
        let mut best_positions: Vec<usize> = Vec::new();
        for (pos, btok) in base_tokens.iter().enumerate() {
            let overlap = jaccard(&ftok, btok);
            if overlap > best {
                best = overlap;
                best_positions = vec![pos];
            } else if overlap == best && overlap > 0.0 {
                best_positions.push(pos);
            }
        }
        if best >= FRAGMENT_MATCH_THRESHOLD {
            matched.extend(best_positions);
        }
    }

    if matched.is_empty() {
        warn!(
            "query {:?}: no base-case sentence matches the fragment; falling back to fragment text",
            query.id
        );
        return fragment_sentences;
    }

    let mut indices: BTreeSet<usize> = BTreeSet::new();
    let last = base_sentences.len() - 1;
    for pos in matched {
        let lo = pos.saturating_sub(before);
        let hi = (pos + after).min(last);
        indices.extend(lo..=hi);
    }
    indices
        .into_iter()
        .map(|i| base_sentences[i].clone())
        .collect()
}

/// Run the entailing-paragraph pipeline: per query, BM25 over that query's
/// own paragraph pool against the constructed query text.
pub fn run_task2(queries: &[Task2Query], config: &PipelineConfig) -> Result<RunResult> {
    config.validate()?;
    if config.task != Task::Task2 {
        return Err(Error::InvalidConfig {
            message: "run_task2 requires a task2 configuration".to_string(),
        });
    }
    ensure_unique_ids(queries.iter().map(|q| q.id.as_str()))?;

    let per_query: Vec<(String, Vec<Prediction>)> = queries
        .par_iter()
        .map(|query| {
            if query.pool.is_empty() {
                return Err(Error::EmptyPool {
                    id: query.id.clone(),
                });
            }
            let sentences = build_task2_query(query, config.query_mode);
            let query_text = sentences
                .iter()
                .map(|s| s.text.as_str())
                .collect::<Vec<_>>()
                .join(" ");
            let tokens = tokenize(&query_text);
            let (terms, _) = prepare_terms(&tokens, &config.stage1);

            let units: Vec<(String, i32, Vec<String>)> = query
                .pool
                .iter()
                .map(|p| (p.id.clone(), WHOLE_DOC_UNIT, tokenize(&p.text)))
                .collect();
            let ranked = match LexicalIndex::build(units, &config.stage1, "") {
                Ok(index) => index.rank(&terms, config.predict_k, None),
                Err(Error::EmptyVocabulary { filters }) => {
                    // Degenerate pool (every term filtered): emit zero-score
                    // predictions in id order instead of failing the run.
                    warn!(
                        "query {:?}: empty vocabulary ({filters}); emitting zero scores",
                        query.id
                    );
                    let mut ids: Vec<&str> = query.pool.iter().map(|p| p.id.as_str()).collect();
                    ids.sort_unstable();
                    ids.into_iter()
                        .take(config.predict_k)
                        .map(|id| RankedUnit {
                            doc_id: id.to_string(),
                            unit_index: WHOLE_DOC_UNIT,
                            score: 0.0,
                        })
                        .collect()
                }
                Err(e) => return Err(e),
            };

            let predictions = ranked
                .into_iter()
                .map(|unit| Prediction {
                    paragraph_index: unit.doc_id.parse::<i64>().ok(),
                    candidate_id: unit.doc_id,
                    score: unit.score,
                })
                .collect();
            Ok((query.id.clone(), predictions))
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(RunResult {
        run_tag: config.run_tag.clone(),
        predictions: per_query.into_iter().collect(),
    })
}

/// Micro recall of the per-query top-`k` sets against the labels: pooled
/// hit count over pooled relevant count, over the labeled queries.
pub fn recall_at_k(
    stage1: &BTreeMap<String, Vec<(String, f64)>>,
    labels: &LabelSet,
    k: usize,
) -> f64 {
    let mut correct = 0usize;
    let mut relevant = 0usize;
    for (query_id, ranked) in stage1 {
        let Some(rel) = labels.relevant_for(query_id) else {
            continue;
        };
        relevant += rel.len();
        correct += ranked
            .iter()
            .take(k)
            .filter(|(id, _)| rel.contains(id))
            .count();
    }
    if relevant == 0 {
        0.0
    } else {
        correct as f64 / relevant as f64
    }
}
