//! N-gram vocabulary construction with stopword and document-frequency
//! filtering, Okapi BM25 scoring, and a normalized TF-IDF vector view.
//!
//! A "document" here is whatever unit the caller indexes: a whole case or a
//! single paragraph. Document length `|D|` and `avgdl` are counted in
//! retained unigram tokens (post-stopword), regardless of the n-gram range.

mod serialize;
pub mod stopwords;

pub use serialize::{fingerprint, read_index, write_index};

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sentinel unit index for whole-document units.
pub const WHOLE_DOC_UNIT: i32 = -1;

/// Document-frequency bound: absolute count or proportion of the corpus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DfBound {
    Fraction(f64),
    Absolute(usize),
}

impl std::fmt::Display for DfBound {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DfBound::Fraction(v) => write!(f, "{v}"),
            DfBound::Absolute(n) => write!(f, "{n}"),
        }
    }
}

/// Normalization applied to TF-IDF vectors (never to BM25 scores).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    None,
    L1,
    L2,
}

impl std::fmt::Display for Norm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Norm::None => write!(f, "none"),
            Norm::L1 => write!(f, "l1"),
            Norm::L2 => write!(f, "l2"),
        }
    }
}

/// Free parameters of the BM25 scorer and the vocabulary filters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BM25Params {
    /// Term-frequency saturation.
    pub k1: f64,
    /// Length normalization in `[0, 1]`.
    pub b: f64,
    pub ngram_min: usize,
    pub ngram_max: usize,
    /// Terms with document frequency strictly above the resolved bound are
    /// dropped (corpus-specific stopwords).
    pub max_df: DfBound,
    /// Terms with document frequency strictly below the resolved bound are
    /// dropped (rare-term cutoff).
    pub min_df: DfBound,
    pub remove_stopwords: bool,
    pub norm: Norm,
}

impl Default for BM25Params {
    fn default() -> Self {
        BM25Params {
            k1: 1.6,
            b: 0.75,
            ngram_min: 1,
            ngram_max: 1,
            max_df: DfBound::Fraction(1.0),
            min_df: DfBound::Absolute(1),
            remove_stopwords: false,
            norm: Norm::None,
        }
    }
}

impl BM25Params {
    pub fn validate(&self) -> Result<()> {
        let fail = |message: String| Err(Error::InvalidConfig { message });
        if self.k1.is_nan() || self.k1 < 0.0 {
            return fail(format!("k1 must be >= 0, got {}", self.k1));
        }
        if !(0.0..=1.0).contains(&self.b) {
            return fail(format!("b must be in [0, 1], got {}", self.b));
        }
        if self.ngram_min < 1 || self.ngram_min > self.ngram_max {
            return fail(format!(
                "ngram range must satisfy 1 <= min <= max, got ({}, {})",
                self.ngram_min, self.ngram_max
            ));
        }
        if let DfBound::Fraction(v) = self.max_df {
            if !(v > 0.0 && v <= 1.0) {
                return fail(format!("fractional max_df must be in (0, 1], got {v}"));
            }
        }
        match self.min_df {
            DfBound::Fraction(v) if !(0.0..1.0).contains(&v) => {
                return fail(format!("fractional min_df must be in [0, 1), got {v}"));
            }
            DfBound::Absolute(0) => {
                return fail("absolute min_df must be >= 1".to_string());
            }
            _ => {}
        }
        Ok(())
    }

    /// Resolve both bounds to absolute document counts for a corpus of `n`.
    ///
    /// Fractions resolve conservatively: `max_df` floors (an upper bound may
    /// only tighten), `min_df` ceils (a lower bound may only tighten).
    pub fn resolve_df_bounds(&self, n: usize) -> (usize, usize) {
        let max_count = match self.max_df {
            DfBound::Fraction(v) => (v * n as f64).floor() as usize,
            DfBound::Absolute(c) => c,
        };
        let min_count = match self.min_df {
            DfBound::Fraction(v) => (v * n as f64).ceil() as usize,
            DfBound::Absolute(c) => c,
        };
        (min_count, max_count)
    }
}

/// Lowercased maximal runs of at least two alphanumeric characters.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    let mut current_chars = 0usize;
    for c in text.chars() {
        if c.is_alphanumeric() {
            current.extend(c.to_lowercase());
            current_chars += 1;
        } else {
            if current_chars >= 2 {
                tokens.push(std::mem::take(&mut current));
            } else {
                current.clear();
            }
            current_chars = 0;
        }
    }
    if current_chars >= 2 {
        tokens.push(current);
    }
    tokens
}

/// All contiguous n-grams for `n` in `[lo, hi]`, space-joined, ordered by
/// `n` then position.
pub fn ngrams<S: AsRef<str>>(tokens: &[S], lo: usize, hi: usize) -> Vec<String> {
    debug_assert!(lo >= 1 && lo <= hi);
    let mut out = Vec::new();
    if lo == 0 || lo > hi {
        return out;
    }
    for n in lo..=hi {
        if n > tokens.len() {
            break;
        }
        for window in tokens.windows(n) {
            let mut term = String::with_capacity(n * 8);
            for (i, tok) in window.iter().enumerate() {
                if i > 0 {
                    term.push(' ');
                }
                term.push_str(tok.as_ref());
            }
            out.push(term);
        }
    }
    out
}

/// Drop bundled stopwords when the params ask for it.
fn retained_tokens<'a>(tokens: &'a [String], params: &BM25Params) -> Vec<&'a str> {
    tokens
        .iter()
        .map(String::as_str)
        .filter(|t| !params.remove_stopwords || !stopwords::is_stopword(t))
        .collect()
}

/// Stopword filtering then n-gram formation: the term sequence a unit (or
/// query) contributes, plus its retained unigram length.
pub fn prepare_terms(tokens: &[String], params: &BM25Params) -> (Vec<String>, usize) {
    let kept = retained_tokens(tokens, params);
    let length = kept.len();
    (ngrams(&kept, params.ngram_min, params.ngram_max), length)
}

/// Per-term corpus statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TermStats {
    /// Number of documents containing the term.
    pub df: usize,
    /// `ln((N - df + 0.5) / (df + 0.5) + 1)`, strictly positive.
    pub idf: f64,
}

/// Inverse document frequency with the +1 floor that keeps it positive.
pub fn idf(doc_count: usize, df: usize) -> f64 {
    let n = doc_count as f64;
    let d = df as f64;
    ((n - d + 0.5) / (d + 0.5) + 1.0).ln()
}

/// The retained n-gram vocabulary with document frequencies.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    terms: std::collections::BTreeMap<String, TermStats>,
    /// Total number of indexed documents (units), Eq. 5's `N`.
    pub doc_count: usize,
    /// Mean retained-unigram document length.
    pub avgdl: f64,
    pub(crate) len_sum: u64,
}

impl Vocabulary {
    pub(crate) fn from_parts(
        terms: std::collections::BTreeMap<String, TermStats>,
        doc_count: usize,
        len_sum: u64,
    ) -> Vocabulary {
        Vocabulary {
            terms,
            doc_count,
            avgdl: len_sum as f64 / doc_count as f64,
            len_sum,
        }
    }

    pub fn stats(&self, term: &str) -> Option<&TermStats> {
        self.terms.get(term)
    }

    pub fn contains(&self, term: &str) -> bool {
        self.terms.contains_key(term)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Terms in ascending order with their stats.
    pub fn iter(&self) -> impl Iterator<Item = (&String, &TermStats)> {
        self.terms.iter()
    }
}

/// Build the vocabulary over tokenized documents.
///
/// Stopwords are removed before n-gram formation, so no retained n-gram
/// spans a removed stopword. A term survives iff
/// `resolved_min <= df <= resolved_max` (strict exclusion outside).
pub fn build_vocabulary(docs: &[Vec<String>], params: &BM25Params) -> Result<Vocabulary> {
    params.validate()?;
    if docs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let n = docs.len();
    let (min_count, max_count) = params.resolve_df_bounds(n);
    if min_count > max_count {
        // No document frequency can satisfy both bounds at this corpus size.
        return Err(Error::EmptyVocabulary {
            filters: format!(
                "resolved min_df ({min_count}) exceeds resolved max_df ({max_count}) for {n} documents"
            ),
        });
    }

    let mut df: HashMap<String, usize> = HashMap::new();
    let mut len_sum = 0u64;
    for tokens in docs {
        let (terms, length) = prepare_terms(tokens, params);
        len_sum += length as u64;
        let unique: HashSet<String> = terms.into_iter().collect();
        for term in unique {
            *df.entry(term).or_insert(0) += 1;
        }
    }

    let terms: std::collections::BTreeMap<String, TermStats> = df
        .into_iter()
        .filter(|&(_, d)| d >= min_count && d <= max_count)
        .map(|(term, d)| {
            (
                term,
                TermStats {
                    df: d,
                    idf: idf(n, d),
                },
            )
        })
        .collect();

    if terms.is_empty() {
        return Err(Error::EmptyVocabulary {
            filters: format!(
                "min_df={min_count}, max_df={max_count}, remove_stopwords={}, ngram_range=({}, {})",
                params.remove_stopwords, params.ngram_min, params.ngram_max
            ),
        });
    }
    Ok(Vocabulary::from_parts(terms, n, len_sum))
}

/// One indexed retrieval unit: a whole case or a single paragraph.
#[derive(Debug, Clone)]
pub struct IndexedDoc {
    pub doc_id: String,
    /// Paragraph position, or [`WHOLE_DOC_UNIT`] for whole-document units.
    pub unit_index: i32,
    term_freqs: HashMap<String, usize>,
    /// Retained unigram token count, Eq. 4's `|D|`.
    pub length: usize,
}

impl IndexedDoc {
    pub fn term_freq(&self, term: &str) -> usize {
        self.term_freqs.get(term).copied().unwrap_or(0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&String, &usize)> {
        self.term_freqs.iter()
    }

    pub fn distinct_terms(&self) -> usize {
        self.term_freqs.len()
    }
}

/// Index one unit under a vocabulary: counts only in-vocabulary terms.
pub fn index_unit(
    doc_id: impl Into<String>,
    unit_index: i32,
    tokens: &[String],
    vocab: &Vocabulary,
    params: &BM25Params,
) -> IndexedDoc {
    let (terms, length) = prepare_terms(tokens, params);
    let mut term_freqs: HashMap<String, usize> = HashMap::new();
    for term in terms {
        if vocab.contains(&term) {
            *term_freqs.entry(term).or_insert(0) += 1;
        }
    }
    IndexedDoc {
        doc_id: doc_id.into(),
        unit_index,
        term_freqs,
        length,
    }
}

/// Okapi BM25 score of one document for a query term sequence.
///
/// Terms outside the vocabulary or absent from the document contribute 0;
/// repeated query terms contribute once per occurrence.
pub fn bm25_score(
    query_terms: &[String],
    doc: &IndexedDoc,
    vocab: &Vocabulary,
    params: &BM25Params,
) -> f64 {
    let mut score = 0.0;
    for term in query_terms {
        let Some(stats) = vocab.stats(term) else {
            continue;
        };
        let f = doc.term_freq(term);
        if f == 0 {
            continue;
        }
        score += term_contribution(stats.idf, f as f64, doc.length, vocab.avgdl, params);
    }
    score
}

#[inline]
fn term_contribution(idf: f64, f: f64, length: usize, avgdl: f64, params: &BM25Params) -> f64 {
    let denom = f + params.k1 * (1.0 - params.b + params.b * length as f64 / avgdl);
    idf * (f * (params.k1 + 1.0)) / denom
}

/// One entry of a ranking: a unit and its score.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedUnit {
    pub doc_id: String,
    pub unit_index: i32,
    pub score: f64,
}

/// Rank all units for a query, descending by score with ties broken by
/// ascending `(doc_id, unit_index)`. Units owned by `exclude_doc_id` are
/// skipped so a query never retrieves itself.
pub fn bm25_rank(
    query_terms: &[String],
    index: &[IndexedDoc],
    vocab: &Vocabulary,
    params: &BM25Params,
    top_k: usize,
    exclude_doc_id: Option<&str>,
) -> Vec<RankedUnit> {
    let mut ranked: Vec<RankedUnit> = index
        .iter()
        .filter(|doc| exclude_doc_id != Some(doc.doc_id.as_str()))
        .map(|doc| RankedUnit {
            doc_id: doc.doc_id.clone(),
            unit_index: doc.unit_index,
            score: bm25_score(query_terms, doc, vocab, params),
        })
        .collect();
    sort_ranked(&mut ranked);
    ranked.truncate(top_k);
    ranked
}

fn sort_ranked(ranked: &mut [RankedUnit]) {
    ranked.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.doc_id.cmp(&b.doc_id))
            .then_with(|| a.unit_index.cmp(&b.unit_index))
    });
}

/// A built lexical index: vocabulary, units, and posting lists for fast
/// multi-query ranking. Immutable after construction.
#[derive(Debug)]
pub struct LexicalIndex {
    vocab: Vocabulary,
    docs: Vec<IndexedDoc>,
    postings: HashMap<String, Vec<(u32, u32)>>,
    params: BM25Params,
    corpus_hash: String,
}

impl LexicalIndex {
    /// Build vocabulary and postings over `(doc_id, unit_index, tokens)` units.
    pub fn build(
        units: Vec<(String, i32, Vec<String>)>,
        params: &BM25Params,
        corpus_hash: impl Into<String>,
    ) -> Result<LexicalIndex> {
        let token_seqs: Vec<Vec<String>> = units.iter().map(|(_, _, t)| t.clone()).collect();
        let vocab = build_vocabulary(&token_seqs, params)?;
        let docs: Vec<IndexedDoc> = units
            .into_iter()
            .map(|(id, unit, tokens)| index_unit(id, unit, &tokens, &vocab, params))
            .collect();
        Ok(Self::from_parts(vocab, docs, params.clone(), corpus_hash))
    }

    pub(crate) fn from_parts(
        vocab: Vocabulary,
        docs: Vec<IndexedDoc>,
        params: BM25Params,
        corpus_hash: impl Into<String>,
    ) -> LexicalIndex {
        let mut postings: HashMap<String, Vec<(u32, u32)>> = HashMap::new();
        for (pos, doc) in docs.iter().enumerate() {
            for (term, &tf) in &doc.term_freqs {
                postings
                    .entry(term.clone())
                    .or_default()
                    .push((pos as u32, tf as u32));
            }
        }
        for list in postings.values_mut() {
            list.sort_unstable_by_key(|&(pos, _)| pos);
        }
        LexicalIndex {
            vocab,
            docs,
            postings,
            params,
            corpus_hash: corpus_hash.into(),
        }
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn docs(&self) -> &[IndexedDoc] {
        &self.docs
    }

    pub fn params(&self) -> &BM25Params {
        &self.params
    }

    pub fn corpus_hash(&self) -> &str {
        &self.corpus_hash
    }

    /// Posting-list ranking; output is identical to [`bm25_rank`] over the
    /// same units (same formula, same accumulation order, same tie-break).
    pub fn rank(
        &self,
        query_terms: &[String],
        top_k: usize,
        exclude_doc_id: Option<&str>,
    ) -> Vec<RankedUnit> {
        let mut scores = vec![0.0f64; self.docs.len()];
        for term in query_terms {
            let Some(stats) = self.vocab.stats(term) else {
                continue;
            };
            let Some(list) = self.postings.get(term) else {
                continue;
            };
            for &(pos, tf) in list {
                let doc = &self.docs[pos as usize];
                scores[pos as usize] += term_contribution(
                    stats.idf,
                    tf as f64,
                    doc.length,
                    self.vocab.avgdl,
                    &self.params,
                );
            }
        }
        let mut ranked: Vec<RankedUnit> = self
            .docs
            .iter()
            .zip(scores)
            .filter(|(doc, _)| exclude_doc_id != Some(doc.doc_id.as_str()))
            .map(|(doc, score)| RankedUnit {
                doc_id: doc.doc_id.clone(),
                unit_index: doc.unit_index,
                score,
            })
            .collect();
        sort_ranked(&mut ranked);
        ranked.truncate(top_k);
        ranked
    }
}

/// A sparse TF-IDF vector keyed by term, deterministically ordered.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseVector {
    weights: std::collections::BTreeMap<String, f64>,
}

impl SparseVector {
    pub fn weight(&self, term: &str) -> f64 {
        self.weights.get(term).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &f64)> {
        self.weights.iter()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// TF-IDF view of an indexed unit: `weight(t) = f(t, D) * idf(t)`, then the
/// requested normalization. A zero vector stays zero.
pub fn tfidf_vector(doc: &IndexedDoc, vocab: &Vocabulary, norm: Norm) -> SparseVector {
    let mut weights: std::collections::BTreeMap<String, f64> = std::collections::BTreeMap::new();
    for (term, &tf) in &doc.term_freqs {
        if let Some(stats) = vocab.stats(term) {
            weights.insert(term.clone(), tf as f64 * stats.idf);
        }
    }
    let scale = match norm {
        Norm::None => 1.0,
        Norm::L1 => weights.values().map(|w| w.abs()).sum::<f64>(),
        Norm::L2 => weights.values().map(|w| w * w).sum::<f64>().sqrt(),
    };
    if scale > 0.0 && norm != Norm::None {
        for w in weights.values_mut() {
            *w /= scale;
        }
    }
    SparseVector { weights }
}
