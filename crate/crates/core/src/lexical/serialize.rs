//! Line-oriented index artifact: magic header, format version, corpus hash,
//! parameters, vocabulary (term/df — idf is recomputed) and per-unit
//! term-frequency postings.
//!
//! Floats are written in Rust's shortest round-trip decimal form and integer
//! state (length sums, document frequencies) exactly, so a reloaded index
//! scores bit-identically to the one that was dumped.

use std::collections::BTreeMap;
use std::io::{self, BufRead, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::lexical::{BM25Params, DfBound, IndexedDoc, LexicalIndex, Norm, Vocabulary};

const MAGIC: &str = "precedent-index";
const VERSION: u32 = 1;

/// SHA-256 hex digest over the given byte chunks, in order.
pub fn fingerprint<I, B>(parts: I) -> String
where
    I: IntoIterator<Item = B>,
    B: AsRef<[u8]>,
{
    let mut hasher = Sha256::new();
    for part in parts {
        hasher.update(part.as_ref());
        hasher.update([0u8]);
    }
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(64);
    for byte in digest {
        hex.push_str(&format!("{byte:02x}"));
    }
    hex
}

fn df_bound_str(bound: &DfBound) -> String {
    match bound {
        DfBound::Fraction(v) => format!("frac {v}"),
        DfBound::Absolute(n) => format!("abs {n}"),
    }
}

/// Dump an index. Unit ids must be tab- and newline-free (file stems are).
pub fn write_index<W: Write>(w: &mut W, index: &LexicalIndex) -> io::Result<()> {
    let params = index.params();
    let vocab = index.vocab();
    writeln!(w, "{MAGIC} {VERSION}")?;
    writeln!(w, "hash {}", index.corpus_hash())?;
    writeln!(w, "k1 {}", params.k1)?;
    writeln!(w, "b {}", params.b)?;
    writeln!(w, "ngram {} {}", params.ngram_min, params.ngram_max)?;
    writeln!(w, "max_df {}", df_bound_str(&params.max_df))?;
    writeln!(w, "min_df {}", df_bound_str(&params.min_df))?;
    writeln!(w, "stopwords {}", params.remove_stopwords)?;
    writeln!(w, "norm {}", params.norm)?;
    writeln!(w, "units {}", vocab.doc_count)?;
    writeln!(w, "lensum {}", vocab.len_sum)?;
    writeln!(w, "terms {}", vocab.len())?;

    let mut term_ids: BTreeMap<&str, usize> = BTreeMap::new();
    for (tid, (term, stats)) in vocab.iter().enumerate() {
        term_ids.insert(term.as_str(), tid);
        // idf is written in shortest round-trip form, so parsing it back
        // reproduces the exact f64.
        writeln!(w, "T\t{term}\t{}\t{}", stats.df, stats.idf)?;
    }

    writeln!(w, "docs {}", index.docs().len())?;
    for doc in index.docs() {
        if doc.doc_id.contains(['\t', '\n']) {
            return Err(io::Error::new(
                io::ErrorKind::InvalidData,
                format!("doc id {:?} contains a tab or newline", doc.doc_id),
            ));
        }
        let mut posting: Vec<(usize, usize)> = doc
            .terms()
            .map(|(term, &tf)| (term_ids[term.as_str()], tf))
            .collect();
        posting.sort_unstable();
        let posting_str = posting
            .iter()
            .map(|(tid, tf)| format!("{tid}:{tf}"))
            .collect::<Vec<_>>()
            .join(",");
        writeln!(
            w,
            "D\t{}\t{}\t{}\t{}",
            doc.doc_id, doc.unit_index, doc.length, posting_str
        )?;
    }
    writeln!(w, "end")?;
    Ok(())
}

struct LineReader<R> {
    inner: R,
    line_no: usize,
    path: std::path::PathBuf,
}

impl<R: BufRead> LineReader<R> {
    fn next_line(&mut self) -> Result<String> {
        let mut line = String::new();
        let n = self
            .inner
            .read_line(&mut line)
            .map_err(|e| Error::io(&self.path, e))?;
        if n == 0 {
            return Err(Error::parse(&self.path, self.line_no + 1, "unexpected end of file"));
        }
        self.line_no += 1;
        while line.ends_with('\n') || line.ends_with('\r') {
            line.pop();
        }
        Ok(line)
    }

    fn err(&self, message: impl Into<String>) -> Error {
        Error::parse(&self.path, self.line_no, message)
    }
}

fn parse_kv<'a>(line: &'a str, key: &str, r: &LineReader<impl BufRead>) -> Result<&'a str> {
    line.strip_prefix(key)
        .and_then(|rest| rest.strip_prefix(' '))
        .ok_or_else(|| r.err(format!("expected `{key} ...`, got {line:?}")))
}

fn parse_num<T: std::str::FromStr>(s: &str, what: &str, r: &LineReader<impl BufRead>) -> Result<T> {
    s.parse()
        .map_err(|_| r.err(format!("invalid {what}: {s:?}")))
}

fn parse_df_bound(s: &str, r: &LineReader<impl BufRead>) -> Result<DfBound> {
    match s.split_once(' ') {
        Some(("frac", v)) => Ok(DfBound::Fraction(parse_num(v, "fraction", r)?)),
        Some(("abs", v)) => Ok(DfBound::Absolute(parse_num(v, "count", r)?)),
        _ => Err(r.err(format!("invalid df bound: {s:?}"))),
    }
}

/// Load an index artifact written by [`write_index`].
pub fn read_index<R: BufRead>(reader: R, origin: &Path) -> Result<LexicalIndex> {
    let mut r = LineReader {
        inner: reader,
        line_no: 0,
        path: origin.to_path_buf(),
    };

    let header = r.next_line()?;
    match header.split_once(' ') {
        Some((MAGIC, v)) if v == VERSION.to_string() => {}
        Some((MAGIC, v)) => return Err(r.err(format!("unsupported format version {v}"))),
        _ => return Err(r.err("not a precedent index file")),
    }

    let line = r.next_line()?;
    let corpus_hash = parse_kv(&line, "hash", &r)?.to_string();
    let line = r.next_line()?;
    let k1: f64 = parse_num(parse_kv(&line, "k1", &r)?, "k1", &r)?;
    let line = r.next_line()?;
    let b: f64 = parse_num(parse_kv(&line, "b", &r)?, "b", &r)?;
    let line = r.next_line()?;
    let ngram = parse_kv(&line, "ngram", &r)?.to_string();
    let (lo, hi) = ngram
        .split_once(' ')
        .ok_or_else(|| r.err("invalid ngram line"))?;
    let ngram_min: usize = parse_num(lo, "ngram min", &r)?;
    let ngram_max: usize = parse_num(hi, "ngram max", &r)?;
    let line = r.next_line()?;
    let max_df = parse_df_bound(parse_kv(&line, "max_df", &r)?, &r)?;
    let line = r.next_line()?;
    let min_df = parse_df_bound(parse_kv(&line, "min_df", &r)?, &r)?;
    let line = r.next_line()?;
    let remove_stopwords: bool = parse_num(parse_kv(&line, "stopwords", &r)?, "stopwords", &r)?;
    let line = r.next_line()?;
    let norm = match parse_kv(&line, "norm", &r)? {
        "none" => Norm::None,
        "l1" => Norm::L1,
        "l2" => Norm::L2,
        other => return Err(r.err(format!("invalid norm: {other:?}"))),
    };
    let line = r.next_line()?;
    let units: usize = parse_num(parse_kv(&line, "units", &r)?, "unit count", &r)?;
    let line = r.next_line()?;
    let len_sum: u64 = parse_num(parse_kv(&line, "lensum", &r)?, "length sum", &r)?;
    let line = r.next_line()?;
    let term_count: usize = parse_num(parse_kv(&line, "terms", &r)?, "term count", &r)?;

    let params = BM25Params {
        k1,
        b,
        ngram_min,
        ngram_max,
        max_df,
        min_df,
        remove_stopwords,
        norm,
    };

    let mut terms = BTreeMap::new();
    let mut by_id: Vec<String> = Vec::with_capacity(term_count);
    for _ in 0..term_count {
        let line = r.next_line()?;
        let mut fields = line.split('\t');
        if fields.next() != Some("T") {
            return Err(r.err(format!("expected term line, got {line:?}")));
        }
        let term = fields
            .next()
            .ok_or_else(|| r.err("term line missing term"))?;
        let df: usize = parse_num(
            fields.next().ok_or_else(|| r.err("term line missing df"))?,
            "df",
            &r,
        )?;
        let idf: f64 = parse_num(
            fields.next().ok_or_else(|| r.err("term line missing idf"))?,
            "idf",
            &r,
        )?;
        if fields.next().is_some() {
            return Err(r.err("trailing fields on term line"));
        }
        by_id.push(term.to_string());
        terms.insert(term.to_string(), crate::lexical::TermStats { df, idf });
    }
    if terms.len() != term_count {
        return Err(r.err("duplicate terms in vocabulary section"));
    }
    let vocab = Vocabulary::from_parts(terms, units, len_sum);

    let line = r.next_line()?;
    let doc_count: usize = parse_num(parse_kv(&line, "docs", &r)?, "doc count", &r)?;
    if doc_count != units {
        return Err(r.err(format!("doc count {doc_count} != unit count {units}")));
    }
    let mut docs = Vec::with_capacity(doc_count);
    for _ in 0..doc_count {
        let line = r.next_line()?;
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 5 || fields[0] != "D" {
            return Err(r.err(format!("expected doc line, got {line:?}")));
        }
        let doc_id = fields[1].to_string();
        let unit_index: i32 = parse_num(fields[2], "unit index", &r)?;
        let length: usize = parse_num(fields[3], "length", &r)?;
        let mut term_freqs = std::collections::HashMap::new();
        if !fields[4].is_empty() {
            for pair in fields[4].split(',') {
                let (tid, tf) = pair
                    .split_once(':')
                    .ok_or_else(|| r.err(format!("invalid posting {pair:?}")))?;
                let tid: usize = parse_num(tid, "term id", &r)?;
                let tf: usize = parse_num(tf, "term frequency", &r)?;
                let term = by_id
                    .get(tid)
                    .ok_or_else(|| r.err(format!("term id {tid} out of range")))?;
                term_freqs.insert(term.clone(), tf);
            }
        }
        docs.push(IndexedDoc {
            doc_id,
            unit_index,
            term_freqs,
            length,
        });
    }
    let line = r.next_line()?;
    if line != "end" {
        return Err(r.err("missing end marker"));
    }

    Ok(LexicalIndex::from_parts(vocab, docs, params, corpus_hash))
}
