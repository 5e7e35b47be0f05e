//! Micro-averaged precision, recall and F-measure over a run against a
//! label set: counts are pooled over all queries before dividing. A macro
//! average is available as a cross-check but plays no role in scoring.

use std::collections::BTreeMap;

use log::warn;
use serde::Serialize;

use crate::cascade::RunResult;
use crate::corpus::LabelSet;
use crate::error::{Error, Result};

/// Pooled counts for one query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct QueryCounts {
    pub correct: usize,
    pub retrieved: usize,
    pub relevant: usize,
}

/// Micro-averaged report with per-query breakdowns.
#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub correct: usize,
    pub retrieved: usize,
    pub relevant: usize,
    pub per_query: BTreeMap<String, QueryCounts>,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f_measure(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Score a run against labels.
///
/// Predictions are set-valued per query: duplicates within one query are
/// counted once (with a warning). Every label query participates, so a query
/// missing from the run contributes zero retrieved. A run query absent from
/// the labels is an error naming it.
pub fn evaluate(run: &RunResult, labels: &LabelSet) -> Result<EvalReport> {
    for query_id in run.predictions.keys() {
        if labels.relevant_for(query_id).is_none() {
            return Err(Error::UnknownQuery {
                id: query_id.clone(),
            });
        }
    }

    let mut per_query = BTreeMap::new();
    for (query_id, relevant) in labels.iter() {
        let mut retrieved: Vec<&str> = Vec::new();
        if let Some(predictions) = run.predictions.get(query_id) {
            for p in predictions {
                if retrieved.contains(&p.candidate_id.as_str()) {
                    warn!(
                        "query {query_id:?}: duplicate prediction {:?} counted once",
                        p.candidate_id
                    );
                    continue;
                }
                retrieved.push(&p.candidate_id);
            }
        }
        let correct = retrieved
            .iter()
            .filter(|id| relevant.contains(**id))
            .count();
        per_query.insert(
            query_id.clone(),
            QueryCounts {
                correct,
                retrieved: retrieved.len(),
                relevant: relevant.len(),
            },
        );
    }

    let correct = per_query.values().map(|c| c.correct).sum();
    let retrieved = per_query.values().map(|c| c.retrieved).sum();
    let relevant = per_query.values().map(|c| c.relevant).sum();
    let precision = ratio(correct, retrieved);
    let recall = ratio(correct, relevant);
    Ok(EvalReport {
        precision,
        recall,
        f1: f_measure(precision, recall),
        correct,
        retrieved,
        relevant,
        per_query,
    })
}

impl EvalReport {
    /// Macro averages (mean of per-query metrics). Cross-check only; the
    /// scored metrics are the micro-averaged fields.
    pub fn macro_averages(&self) -> (f64, f64, f64) {
        if self.per_query.is_empty() {
            return (0.0, 0.0, 0.0);
        }
        let mut p_sum = 0.0;
        let mut r_sum = 0.0;
        let mut f_sum = 0.0;
        for counts in self.per_query.values() {
            let p = ratio(counts.correct, counts.retrieved);
            let r = ratio(counts.correct, counts.relevant);
            p_sum += p;
            r_sum += r;
            f_sum += f_measure(p, r);
        }
        let n = self.per_query.len() as f64;
        (p_sum / n, r_sum / n, f_sum / n)
    }

    /// JSON object with metrics rounded to four decimal places.
    pub fn to_json(&self) -> serde_json::Value {
        let round4 = |v: f64| (v * 10_000.0).round() / 10_000.0;
        serde_json::json!({
            "precision": round4(self.precision),
            "recall": round4(self.recall),
            "f1": round4(self.f1),
            "correct": self.correct,
            "retrieved": self.retrieved,
            "relevant": self.relevant,
        })
    }
}

/// Fixed-width per-query table, sorted by query id, with a totals row.
pub fn per_query_table(report: &EvalReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<24} {:>8} {:>9} {:>8} {:>9} {:>8} {:>8}\n",
        "query", "correct", "retrieved", "relevant", "precision", "recall", "f1"
    ));
    for (query_id, c) in &report.per_query {
        let p = ratio(c.correct, c.retrieved);
        let r = ratio(c.correct, c.relevant);
        out.push_str(&format!(
            "{:<24} {:>8} {:>9} {:>8} {:>9.4} {:>8.4} {:>8.4}\n",
            query_id,
            c.correct,
            c.retrieved,
            c.relevant,
            p,
            r,
            f_measure(p, r)
        ));
    }
    out.push_str(&format!(
        "{:<24} {:>8} {:>9} {:>8} {:>9.4} {:>8.4} {:>8.4}\n",
        "TOTAL",
        report.correct,
        report.retrieved,
        report.relevant,
        report.precision,
        report.recall,
        report.f1
    ));
    out
}
