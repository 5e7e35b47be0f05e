//! Corpus model: case documents segmented into paragraphs and sentences,
//! citation-marker context extraction, gold labels and corpus statistics.

mod load;
mod segment;

pub use load::{
    load_documents_dir, load_task1_queries, load_task2_corpus, PoolParagraph, Task2Query,
};
pub use segment::{segment_paragraphs, segment_sentences};

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lexical::tokenize;

/// Literal marker substituted for suppressed citations in query cases.
pub const DEFAULT_FRAGMENT_MARKER: &str = "FRAGMENT_SUPPRESSED";

/// One segmented sentence, positioned inside its paragraph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub paragraph_index: usize,
    pub index: usize,
    pub text: String,
}

/// One logical paragraph of a case document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Paragraph {
    pub doc_id: String,
    pub index: usize,
    pub sentences: Vec<Sentence>,
    pub text: String,
}

/// A case-law document with its segmented paragraphs.
#[derive(Debug, Clone)]
pub struct Document {
    pub id: String,
    pub raw_text: String,
    pub paragraphs: Vec<Paragraph>,
}

impl Document {
    /// Segment `raw_text` into paragraphs and sentences under `id`.
    pub fn parse(id: impl Into<String>, raw_text: impl Into<String>) -> Document {
        let id = id.into();
        let raw_text = raw_text.into();
        let mut paragraphs = segment::segment_paragraphs(&raw_text);
        for p in &mut paragraphs {
            p.doc_id.clone_from(&id);
        }
        Document {
            id,
            raw_text,
            paragraphs,
        }
    }

    /// All sentences in document order (paragraphs in order, sentences within).
    pub fn sentences(&self) -> impl Iterator<Item = &Sentence> {
        self.paragraphs.iter().flat_map(|p| p.sentences.iter())
    }

    /// Unigram word count under the lexical tokenizer.
    pub fn word_count(&self) -> usize {
        tokenize(&self.raw_text).len()
    }
}

/// Context blocks around every marker-bearing sentence.
///
/// One block per sentence containing `marker`, spanning `before` sentences
/// back and `after` sentences forward (clamped to the document), in document
/// order. Overlapping blocks are kept separate: each marker occurrence keeps
/// its own locality.
pub fn extract_fragment_contexts(
    doc: &Document,
    marker: &str,
    before: usize,
    after: usize,
) -> Vec<Vec<Sentence>> {
    if marker.is_empty() {
        return Vec::new();
    }
    let flat: Vec<&Sentence> = doc.sentences().collect();
    let mut blocks = Vec::new();
    for (i, sentence) in flat.iter().enumerate() {
        if !sentence.text.contains(marker) {
            continue;
        }
        let lo = i.saturating_sub(before);
        let hi = (i + after).min(flat.len() - 1);
        blocks.push(flat[lo..=hi].iter().map(|s| (*s).clone()).collect());
    }
    blocks
}

/// A query case together with its extracted fragment-marker contexts.
#[derive(Debug, Clone)]
pub struct QueryCase {
    pub id: String,
    pub document: Document,
    pub fragment_contexts: Vec<Vec<Sentence>>,
}

impl QueryCase {
    pub fn from_document(
        document: Document,
        marker: &str,
        before: usize,
        after: usize,
    ) -> QueryCase {
        let fragment_contexts = extract_fragment_contexts(&document, marker, before, after);
        QueryCase {
            id: document.id.clone(),
            document,
            fragment_contexts,
        }
    }

    /// Each context block flattened to a single text unit.
    pub fn context_texts(&self) -> Vec<String> {
        self.fragment_contexts
            .iter()
            .map(|block| {
                block
                    .iter()
                    .map(|s| s.text.as_str())
                    .collect::<Vec<_>>()
                    .join(" ")
            })
            .collect()
    }
}

/// Gold labels: query id to the set of relevant candidate ids.
///
/// For entailment pools the ids are paragraph file stems (a trailing `.txt`
/// in the labels file is stripped on load).
#[derive(Debug, Clone, Default)]
pub struct LabelSet {
    relevant: BTreeMap<String, BTreeSet<String>>,
}

impl LabelSet {
    pub fn from_map(relevant: BTreeMap<String, BTreeSet<String>>) -> LabelSet {
        LabelSet { relevant }
    }

    /// Load a JSON object mapping query id to an array of candidate ids or
    /// paragraph file names.
    pub fn from_json_file(path: &Path) -> Result<LabelSet> {
        let data = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let raw: BTreeMap<String, Vec<String>> =
            serde_json::from_str(&data).map_err(|e| Error::Json {
                path: path.to_path_buf(),
                source: e,
            })?;
        let mut relevant = BTreeMap::new();
        for (query, ids) in raw {
            if ids.is_empty() {
                return Err(Error::parse(
                    path,
                    0,
                    format!("query {query:?} has an empty relevant set"),
                ));
            }
            let set: BTreeSet<String> = ids.iter().map(|id| normalize_label_id(id)).collect();
            relevant.insert(query, set);
        }
        Ok(LabelSet { relevant })
    }

    pub fn relevant_for(&self, query_id: &str) -> Option<&BTreeSet<String>> {
        self.relevant.get(query_id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &BTreeSet<String>)> {
        self.relevant.iter()
    }

    pub fn len(&self) -> usize {
        self.relevant.len()
    }

    pub fn is_empty(&self) -> bool {
        self.relevant.is_empty()
    }
}

fn normalize_label_id(id: &str) -> String {
    id.strip_suffix(".txt").unwrap_or(id).to_string()
}

/// Corpus-level statistics over queries, candidates and labels.
#[derive(Debug, Clone, Serialize)]
pub struct CorpusStats {
    pub query_count: usize,
    pub candidate_count: usize,
    pub avg_relevant: f64,
    pub avg_query_words: f64,
    pub avg_candidate_words: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub avg_candidate_paragraphs_per_query: Option<f64>,
}

fn mean(values: impl IntoIterator<Item = usize>) -> f64 {
    let mut sum = 0usize;
    let mut count = 0usize;
    for v in values {
        sum += v;
        count += 1;
    }
    if count == 0 {
        0.0
    } else {
        sum as f64 / count as f64
    }
}

/// Statistics for a case-retrieval corpus (whole-case candidates).
///
/// Word counts use the lexical tokenizer at unigram level; averages are
/// arithmetic means. A label naming an unknown query or candidate id is an
/// error.
pub fn compute_stats_task1(
    queries: &[QueryCase],
    candidates: &[Document],
    labels: &LabelSet,
) -> Result<CorpusStats> {
    let query_ids: BTreeSet<&str> = queries.iter().map(|q| q.id.as_str()).collect();
    let candidate_ids: BTreeSet<&str> = candidates.iter().map(|d| d.id.as_str()).collect();
    for (query, relevant) in labels.iter() {
        if !query_ids.contains(query.as_str()) {
            return Err(Error::DanglingLabel { id: query.clone() });
        }
        for id in relevant {
            if !candidate_ids.contains(id.as_str()) {
                return Err(Error::DanglingLabel { id: id.clone() });
            }
        }
    }
    Ok(CorpusStats {
        query_count: queries.len(),
        candidate_count: candidates.len(),
        avg_relevant: mean(labels.iter().map(|(_, rel)| rel.len())),
        avg_query_words: mean(queries.iter().map(|q| q.document.word_count())),
        avg_candidate_words: mean(candidates.iter().map(|d| d.word_count())),
        avg_candidate_paragraphs_per_query: None,
    })
}

/// Statistics for an entailment corpus (per-query paragraph pools).
pub fn compute_stats_task2(queries: &[Task2Query], labels: &LabelSet) -> Result<CorpusStats> {
    let by_id: BTreeMap<&str, &Task2Query> =
        queries.iter().map(|q| (q.id.as_str(), q)).collect();
    for (query, relevant) in labels.iter() {
        let Some(q) = by_id.get(query.as_str()) else {
            return Err(Error::DanglingLabel { id: query.clone() });
        };
        for id in relevant {
            if !q.pool.iter().any(|p| &p.id == id) {
                return Err(Error::DanglingLabel {
                    id: format!("{query}/{id}"),
                });
            }
        }
    }
    let candidate_count = queries.iter().map(|q| q.pool.len()).sum();
    Ok(CorpusStats {
        query_count: queries.len(),
        candidate_count,
        avg_relevant: mean(labels.iter().map(|(_, rel)| rel.len())),
        avg_query_words: mean(queries.iter().map(|q| q.base_case.word_count())),
        avg_candidate_words: mean(
            queries
                .iter()
                .flat_map(|q| q.pool.iter().map(|p| tokenize(&p.text).len())),
        ),
        avg_candidate_paragraphs_per_query: Some(mean(queries.iter().map(|q| q.pool.len()))),
    })
}
