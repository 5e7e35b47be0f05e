//! Run file format: optional `#`-prefixed header lines (the resolved
//! configuration echo), then one prediction per line:
//!
//! `query_id <TAB> candidate_id [<TAB> paragraph_index] <TAB> rank <TAB> score <TAB> run_tag`
//!
//! UTF-8, LF line endings, scores printed with six decimal places, ranks
//! 1-based per query.

use std::collections::BTreeMap;
use std::io::{self, BufRead, Write};
use std::path::Path;

use crate::cascade::{Prediction, RunResult};
use crate::error::{Error, Result};

/// Write a run with the given header lines (each emitted as `# <line>`).
pub fn write_run<W: Write>(w: &mut W, run: &RunResult, header: &[String]) -> io::Result<()> {
    for line in header {
        writeln!(w, "# {line}")?;
    }
    for (query_id, predictions) in &run.predictions {
        for (rank, p) in predictions.iter().enumerate() {
            match p.paragraph_index {
                Some(idx) => writeln!(
                    w,
                    "{}\t{}\t{}\t{}\t{:.6}\t{}",
                    query_id,
                    p.candidate_id,
                    idx,
                    rank + 1,
                    p.score,
                    run.run_tag
                )?,
                None => writeln!(
                    w,
                    "{}\t{}\t{}\t{:.6}\t{}",
                    query_id,
                    p.candidate_id,
                    rank + 1,
                    p.score,
                    run.run_tag
                )?,
            }
        }
    }
    Ok(())
}

/// Read a run file, ignoring header comments. Predictions keep rank order.
pub fn read_run(path: &Path) -> Result<RunResult> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_run_from(std::io::BufReader::new(file), path)
}

pub fn read_run_from<R: BufRead>(reader: R, origin: &Path) -> Result<RunResult> {
    let mut run_tag = String::new();
    let mut per_query: BTreeMap<String, Vec<(usize, Prediction)>> = BTreeMap::new();

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(origin, e))?;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let (query_id, candidate_id, paragraph_index, rank, score, tag) = match fields.len() {
            5 => (fields[0], fields[1], None, fields[2], fields[3], fields[4]),
            6 => (
                fields[0],
                fields[1],
                Some(fields[2]),
                fields[3],
                fields[4],
                fields[5],
            ),
            n => {
                return Err(Error::parse(
                    origin,
                    line_no,
                    format!("expected 5 or 6 tab-separated fields, found {n}"),
                ))
            }
        };
        let paragraph_index = match paragraph_index {
            Some(v) => Some(v.parse::<i64>().map_err(|_| {
                Error::parse(origin, line_no, format!("invalid paragraph index {v:?}"))
            })?),
            None => None,
        };
        let rank: usize = rank
            .parse()
            .map_err(|_| Error::parse(origin, line_no, format!("invalid rank {rank:?}")))?;
        let score: f64 = score
            .parse()
            .map_err(|_| Error::parse(origin, line_no, format!("invalid score {score:?}")))?;
        if run_tag.is_empty() {
            run_tag = tag.to_string();
        }
        per_query.entry(query_id.to_string()).or_default().push((
            rank,
            Prediction {
                candidate_id: candidate_id.to_string(),
                paragraph_index,
                score,
            },
        ));
    }

    let predictions = per_query
        .into_iter()
        .map(|(query, mut ranked)| {
            ranked.sort_by_key(|(rank, _)| *rank);
            (query, ranked.into_iter().map(|(_, p)| p).collect())
        })
        .collect();
    Ok(RunResult {
        run_tag,
        predictions,
    })
}
