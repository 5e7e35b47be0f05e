//! Paragraph-pair similarity matrices, max-pooled document scores, and
//! top-k selection.
//!
//! A candidate's score is the single best cosine similarity over all
//! (query paragraph, candidate paragraph) pairs. Dense matrices are
//! materialized up to a cell cap (they make useful diagnostics); past the
//! cap a streaming maximum produces the identical [`DocScore`].

use std::io::{self, Write};

use crate::embedding::cosine_unchecked;
use crate::error::{Error, Result};

/// Default cap on materialized similarity-matrix cells.
pub const DEFAULT_MATRIX_CELL_CAP: usize = 4_000_000;

/// N x M cosine similarities between query rows and candidate columns.
#[derive(Debug, Clone)]
pub struct SimilarityMatrix {
    pub query_id: String,
    pub candidate_id: String,
    n_rows: usize,
    n_cols: usize,
    values: Vec<f64>,
}

impl SimilarityMatrix {
    pub fn rows(&self) -> usize {
        self.n_rows
    }

    pub fn cols(&self) -> usize {
        self.n_cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.n_cols + col]
    }

    /// Row-major entries.
    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().copied()
    }
}

/// A candidate's pooled score and the pair that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct DocScore {
    pub candidate_id: String,
    pub score: f64,
    pub argmax_pair: (usize, usize),
}

fn check_units(query_units: &[Vec<f64>], cand_units: &[Vec<f64>]) -> Result<()> {
    if query_units.is_empty() {
        return Err(Error::EmptyMatrixSide { side: "query" });
    }
    if cand_units.is_empty() {
        return Err(Error::EmptyMatrixSide { side: "candidate" });
    }
    let dim = query_units[0].len();
    for v in query_units.iter().chain(cand_units) {
        if v.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: v.len(),
            });
        }
    }
    Ok(())
}

/// Cosine similarity for every (query unit, candidate unit) pair.
pub fn pair_matrix(
    query_id: impl Into<String>,
    candidate_id: impl Into<String>,
    query_units: &[Vec<f64>],
    cand_units: &[Vec<f64>],
) -> Result<SimilarityMatrix> {
    check_units(query_units, cand_units)?;
    let n_rows = query_units.len();
    let n_cols = cand_units.len();
    let mut values = Vec::with_capacity(n_rows * n_cols);
    for q in query_units {
        for c in cand_units {
            values.push(cosine_unchecked(q, c));
        }
    }
    Ok(SimilarityMatrix {
        query_id: query_id.into(),
        candidate_id: candidate_id.into(),
        n_rows,
        n_cols,
        values,
    })
}

/// Global maximum entry; ties keep the first maximizer in row-major order.
pub fn max_pool(matrix: &SimilarityMatrix) -> DocScore {
    let mut best = f64::NEG_INFINITY;
    let mut best_pair = (0, 0);
    for row in 0..matrix.n_rows {
        for col in 0..matrix.n_cols {
            let v = matrix.get(row, col);
            if v > best {
                best = v;
                best_pair = (row, col);
            }
        }
    }
    DocScore {
        candidate_id: matrix.candidate_id.clone(),
        score: best,
        argmax_pair: best_pair,
    }
}

/// Pooled score without materializing the matrix when it would exceed
/// `cell_cap`. Identical output to `max_pool(pair_matrix(..))` either way.
pub fn score_pair(
    query_id: &str,
    candidate_id: &str,
    query_units: &[Vec<f64>],
    cand_units: &[Vec<f64>],
    cell_cap: usize,
) -> Result<DocScore> {
    let cells = query_units.len().saturating_mul(cand_units.len());
    if cells <= cell_cap {
        let matrix = pair_matrix(query_id, candidate_id, query_units, cand_units)?;
        return Ok(max_pool(&matrix));
    }
    check_units(query_units, cand_units)?;
    let mut best = f64::NEG_INFINITY;
    let mut best_pair = (0, 0);
    for (row, q) in query_units.iter().enumerate() {
        for (col, c) in cand_units.iter().enumerate() {
            let v = cosine_unchecked(q, c);
            if v > best {
                best = v;
                best_pair = (row, col);
            }
        }
    }
    Ok(DocScore {
        candidate_id: candidate_id.to_string(),
        score: best,
        argmax_pair: best_pair,
    })
}

/// Keep the best `k` scores, descending, ties broken by ascending
/// candidate id.
pub fn top_k(mut scores: Vec<DocScore>, k: usize) -> Vec<DocScore> {
    scores.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.candidate_id.cmp(&b.candidate_id))
    });
    scores.truncate(k);
    scores
}

/// Per-query diagnostics: one `candidate_id <TAB> score <TAB> row <TAB> col`
/// line per candidate, in the given order.
pub fn write_diagnostics<W: Write>(w: &mut W, scores: &[DocScore]) -> io::Result<()> {
    for s in scores {
        writeln!(
            w,
            "{}\t{:.6}\t{}\t{}",
            s.candidate_id, s.score, s.argmax_pair.0, s.argmax_pair.1
        )?;
    }
    Ok(())
}
