//! Dense unit vectors from two back-ends: averaged n-gram word embeddings
//! (loaded from word2vec text files) and externally precomputed paragraph
//! vectors (loaded from TSV). Both sit behind [`EmbeddingProvider`] so the
//! cascade never cares which one produced a vector.

use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::lexical::tokenize;

/// Word (and optionally underscore-joined bigram) vectors of one dimension.
#[derive(Debug, Clone)]
pub struct WordVectorTable {
    pub dimension: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl WordVectorTable {
    pub fn from_entries(
        dimension: usize,
        entries: impl IntoIterator<Item = (String, Vec<f64>)>,
    ) -> Result<WordVectorTable> {
        let mut vectors = HashMap::new();
        for (term, vector) in entries {
            if vector.len() != dimension {
                return Err(Error::DimensionMismatch {
                    expected: dimension,
                    found: vector.len(),
                });
            }
            vectors.insert(term, vector);
        }
        Ok(WordVectorTable { dimension, vectors })
    }

    pub fn get(&self, term: &str) -> Option<&[f64]> {
        self.vectors.get(term).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

/// Parse a word2vec text file: a `count dim` header, then one
/// space-separated `term v1 .. vdim` row per line. Bigram terms join their
/// words with `_`.
///
/// Byte-level example (dim 3, one unigram and one bigram):
///
/// ```text
/// 2 3\n
/// court 0.1 -0.25 0.7\n
/// federal_court 0.0 0.5 1.25\n
/// ```
///
/// Errors name the offending line; a header/row-count mismatch is rejected.
pub fn load_word_vectors(path: &Path) -> Result<WordVectorTable> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_word_vectors(std::io::BufReader::new(file), path)
}

pub fn read_word_vectors<R: BufRead>(reader: R, origin: &Path) -> Result<WordVectorTable> {
    let mut lines = reader.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(origin, 1, "missing header line"))?;
    let header = header.map_err(|e| Error::io(origin, e))?;
    let mut parts = header.split_whitespace();
    let count: usize = parts
        .next()
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::parse(origin, 1, "header must be `count dim`"))?;
    let dimension: usize = parts
        .next()
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::parse(origin, 1, "header must be `count dim`"))?;
    if parts.next().is_some() {
        return Err(Error::parse(origin, 1, "header must be `count dim`"));
    }

    let mut vectors: HashMap<String, Vec<f64>> = HashMap::with_capacity(count);
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(origin, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let term = fields
            .next()
            .ok_or_else(|| Error::parse(origin, line_no, "missing term"))?;
        let values = fields
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| Error::parse(origin, line_no, format!("invalid float {v:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if values.len() != dimension {
            return Err(Error::parse(
                origin,
                line_no,
                format!("expected {dimension} values, found {}", values.len()),
            ));
        }
        vectors.insert(term.to_string(), values);
    }
    if vectors.len() != count {
        return Err(Error::parse(
            origin,
            1,
            format!("header declares {count} rows, file has {}", vectors.len()),
        ));
    }
    if vectors.is_empty() {
        return Err(Error::parse(origin, 1, "vector table is empty"));
    }
    Ok(WordVectorTable { dimension, vectors })
}

/// Mean of the in-vocabulary unigram vectors, plus in-vocabulary adjacent
/// bigram vectors when `use_bigrams` is set. Out-of-vocabulary items are
/// skipped; nothing in vocabulary yields the zero vector.
pub fn embed_average(tokens: &[String], table: &WordVectorTable, use_bigrams: bool) -> Vec<f64> {
    let mut acc = vec![0.0f64; table.dimension];
    let mut count = 0usize;
    for token in tokens {
        if let Some(v) = table.get(token) {
            add_assign(&mut acc, v);
            count += 1;
        }
    }
    if use_bigrams {
        for pair in tokens.windows(2) {
            let key = format!("{}_{}", pair[0], pair[1]);
            if let Some(v) = table.get(&key) {
                add_assign(&mut acc, v);
                count += 1;
            }
        }
    }
    if count > 0 {
        let n = count as f64;
        for x in &mut acc {
            *x /= n;
        }
    }
    acc
}

fn add_assign(acc: &mut [f64], v: &[f64]) {
    for (a, x) in acc.iter_mut().zip(v) {
        *a += x;
    }
}

/// Precomputed paragraph vectors keyed by `(doc_id, unit_index)`.
#[derive(Debug, Clone)]
pub struct ParagraphEmbeddingStore {
    pub dimension: usize,
    vectors: HashMap<(String, i32), Vec<f64>>,
}

impl ParagraphEmbeddingStore {
    pub fn get(&self, doc_id: &str, unit_index: i32) -> Option<&[f64]> {
        self.vectors
            .get(&(doc_id.to_string(), unit_index))
            .map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

/// Parse a paragraph-embedding TSV: `doc_id <TAB> unit_index <TAB> v1 .. vdim`
/// per line (values tab-separated), dimension fixed by the first record.
///
/// Byte-level example (dim 4; unit -1 is a whole-document vector):
///
/// ```text
/// case042\t0\t0.12\t-0.5\t0.0\t1.5\n
/// case042\t1\t0.08\t0.33\t-0.9\t0.25\n
/// case099\t-1\t1.0\t0.0\t0.0\t0.0\n
/// ```
///
/// Duplicate `(doc_id, unit_index)` keys and ragged dimensions are rejected
/// with the offending key or line.
pub fn load_paragraph_embeddings(path: &Path) -> Result<ParagraphEmbeddingStore> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_paragraph_embeddings(std::io::BufReader::new(file), path)
}

pub fn read_paragraph_embeddings<R: BufRead>(
    reader: R,
    origin: &Path,
) -> Result<ParagraphEmbeddingStore> {
    let mut vectors: HashMap<(String, i32), Vec<f64>> = HashMap::new();
    let mut dimension: Option<usize> = None;
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(origin, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 3 {
            return Err(Error::parse(
                origin,
                line_no,
                "expected doc_id, unit_index and at least one value",
            ));
        }
        let doc_id = fields[0].to_string();
        let unit_index: i32 = fields[1].parse().map_err(|_| {
            Error::parse(origin, line_no, format!("invalid unit index {:?}", fields[1]))
        })?;
        let values = fields[2..]
            .iter()
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| Error::parse(origin, line_no, format!("invalid float {v:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        match dimension {
            None => dimension = Some(values.len()),
            Some(d) if d != values.len() => {
                return Err(Error::parse(
                    origin,
                    line_no,
                    format!("expected {d} values, found {}", values.len()),
                ));
            }
            Some(_) => {}
        }
        if vectors.insert((doc_id.clone(), unit_index), values).is_some() {
            return Err(Error::DuplicateEmbedding { doc_id, unit_index });
        }
    }
    let dimension =
        dimension.ok_or_else(|| Error::parse(origin, 0, "file contains no records"))?;
    Ok(ParagraphEmbeddingStore { dimension, vectors })
}

/// Cosine similarity in `[-1, 1]`; zero-norm input returns 0 so empty or
/// fully out-of-vocabulary units rank last instead of crashing a run.
pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            found: v.len(),
        });
    }
    Ok(cosine_unchecked(u, v))
}

pub(crate) fn cosine_unchecked(u: &[f64], v: &[f64]) -> f64 {
    let mut dot = 0.0;
    let mut nu = 0.0;
    let mut nv = 0.0;
    for (a, b) in u.iter().zip(v) {
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        return 0.0;
    }
    dot / (nu.sqrt() * nv.sqrt())
}

/// One text unit to embed, addressed by its owner and position.
#[derive(Debug, Clone, Copy)]
pub struct TextUnit<'a> {
    pub doc_id: &'a str,
    pub unit_index: i32,
    pub text: &'a str,
}

/// A deterministic source of fixed-dimension unit vectors.
pub trait EmbeddingProvider: Sync + Send {
    fn name(&self) -> &str;
    fn dimension(&self) -> usize;
    fn embed(&self, unit: &TextUnit<'_>) -> Result<Vec<f64>>;
}

/// Averages word (and bigram) vectors over the unit's tokens.
pub struct AveragedNgramProvider {
    table: WordVectorTable,
    use_bigrams: bool,
}

impl AveragedNgramProvider {
    pub fn new(table: WordVectorTable, use_bigrams: bool) -> AveragedNgramProvider {
        AveragedNgramProvider { table, use_bigrams }
    }
}

impl EmbeddingProvider for AveragedNgramProvider {
    fn name(&self) -> &str {
        "averaged-ngram"
    }

    fn dimension(&self) -> usize {
        self.table.dimension
    }

    fn embed(&self, unit: &TextUnit<'_>) -> Result<Vec<f64>> {
        let tokens = tokenize(unit.text);
        Ok(embed_average(&tokens, &self.table, self.use_bigrams))
    }
}

/// Looks units up in a precomputed store; a missing key is an error naming
/// the unit, never a silent zero.
pub struct PrecomputedProvider {
    store: ParagraphEmbeddingStore,
}

impl PrecomputedProvider {
    pub fn new(store: ParagraphEmbeddingStore) -> PrecomputedProvider {
        PrecomputedProvider { store }
    }
}

impl EmbeddingProvider for PrecomputedProvider {
    fn name(&self) -> &str {
        "precomputed"
    }

    fn dimension(&self) -> usize {
        self.store.dimension
    }

    fn embed(&self, unit: &TextUnit<'_>) -> Result<Vec<f64>> {
        self.store
            .get(unit.doc_id, unit.unit_index)
            .map(<[f64]>::to_vec)
            .ok_or_else(|| Error::MissingEmbedding {
                doc_id: unit.doc_id.to_string(),
                unit_index: unit.unit_index,
            })
    }
}

/// Deterministic pseudo-random word vectors for tests and demos.
///
/// Components are uniform in `[-1, 1]` from a seeded ChaCha stream, so the
/// same `(terms, dimension, seed)` always produces the same table. Real
/// checkpoints are user-supplied files; nothing here is trained.
pub fn demo_word_vectors<S: AsRef<str>>(
    terms: &[S],
    dimension: usize,
    seed: u64,
) -> WordVectorTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut vectors = HashMap::with_capacity(terms.len());
    for term in terms {
        let v: Vec<f64> = (0..dimension).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        vectors.insert(term.as_ref().to_string(), v);
    }
    WordVectorTable { dimension, vectors }
}
