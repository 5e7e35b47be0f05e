//! Shared test support: an independent BM25 oracle and synthetic corpus
//! generators.
//!
//! The oracle evaluates the scoring formula directly from raw token
//! sequences, with its own document-frequency counting and no shared code
//! with the engine's vocabulary/posting machinery. Generators plant known
//! lexical signals so expected rankings are construction-guaranteed.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use precedent_core::corpus::{
    Document, LabelSet, PoolParagraph, QueryCase, Task2Query, DEFAULT_FRAGMENT_MARKER,
};

/// Direct evaluation of the BM25 formula over raw token documents: for each
/// query occurrence, df is counted by scanning every document and tf by
/// scanning the target document.
pub fn oracle_bm25_scores(query: &[String], docs: &[Vec<String>], k1: f64, b: f64) -> Vec<f64> {
    let n = docs.len() as f64;
    let total_len: usize = docs.iter().map(Vec::len).sum();
    let avgdl = total_len as f64 / n;

    // df per distinct query term, counted independently of the engine.
    let mut df: BTreeMap<&str, f64> = BTreeMap::new();
    for term in query {
        df.entry(term.as_str()).or_insert_with(|| {
            docs.iter()
                .filter(|doc| doc.iter().any(|t| t == term))
                .count() as f64
        });
    }

    docs.iter()
        .map(|doc| {
            let dl = doc.len() as f64;
            let mut score = 0.0;
            for term in query {
                let d = df[term.as_str()];
                if d == 0.0 {
                    continue;
                }
                let f = doc.iter().filter(|t| *t == term).count() as f64;
                if f == 0.0 {
                    continue;
                }
                let idf = ((n - d + 0.5) / (d + 0.5) + 1.0).ln();
                score += idf * (f * (k1 + 1.0)) / (f + k1 * (1.0 - b + b * dl / avgdl));
            }
            score
        })
        .collect()
}

/// Oracle ranking: indices sorted by score descending, ties by doc id.
pub fn oracle_ranking(scores: &[f64], ids: &[String]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .total_cmp(&scores[a])
            .then_with(|| ids[a].cmp(&ids[b]))
    });
    order
}

/// A random flat corpus for oracle-equivalence checks.
pub struct RandomCorpus {
    pub ids: Vec<String>,
    pub docs: Vec<Vec<String>>,
    pub query: Vec<String>,
    pub k1: f64,
    pub b: f64,
}

pub fn random_corpus(rng: &mut ChaCha8Rng) -> RandomCorpus {
    let vocab_size = rng.gen_range(5..=200);
    let pool: Vec<String> = (0..vocab_size).map(|i| format!("t{i:03}")).collect();
    let n_docs = rng.gen_range(1..=50);
    let docs: Vec<Vec<String>> = (0..n_docs)
        .map(|_| {
            let len = rng.gen_range(1..=40);
            (0..len)
                .map(|_| pool[rng.gen_range(0..pool.len())].clone())
                .collect()
        })
        .collect();
    let ids: Vec<String> = (0..n_docs).map(|i| format!("d{i:02}")).collect();
    let query_len = rng.gen_range(1..=12);
    let query: Vec<String> = (0..query_len)
        .map(|_| {
            if rng.gen_bool(0.85) {
                pool[rng.gen_range(0..pool.len())].clone()
            } else {
                format!("zz{:03}", rng.gen_range(0..999))
            }
        })
        .collect();
    RandomCorpus {
        ids,
        docs,
        query,
        k1: rng.gen_range(0.5..=2.0),
        b: rng.gen_range(0.0..=1.0),
    }
}

const BACKGROUND_POOL: usize = 400;

fn background_word(i: usize) -> String {
    format!("w{i:03}")
}

fn background_sentence(rng: &mut ChaCha8Rng, words: usize) -> String {
    // Capitalized lead word so the rule-based sentence splitter sees a
    // boundary; the tokenizer lowercases it back.
    let mut s = String::from("On");
    for _ in 0..words {
        s.push(' ');
        s.push_str(&background_word(rng.gen_range(0..BACKGROUND_POOL)));
    }
    s.push('.');
    s
}

fn background_paragraph(rng: &mut ChaCha8Rng) -> String {
    let sentences = rng.gen_range(2..=3);
    (0..sentences)
        .map(|_| {
            let words = rng.gen_range(6..=10);
            background_sentence(rng, words)
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Six planted tokens, unique to query `j`, contiguous wherever inserted.
pub fn planted_tokens(j: usize) -> Vec<String> {
    "abcdef".chars().map(|c| format!("q{j:03}{c}")).collect()
}

/// A synthetic case-retrieval corpus with construction-guaranteed relevance:
/// each query shares a unique rare 6-gram with exactly its relevant
/// candidates.
pub struct SyntheticTask1 {
    pub queries: Vec<QueryCase>,
    pub candidates: Vec<Document>,
    pub labels: LabelSet,
}

pub fn synthetic_task1(
    rng: &mut ChaCha8Rng,
    n_queries: usize,
    n_candidates: usize,
) -> SyntheticTask1 {
    let mut candidate_texts: Vec<Vec<String>> = (0..n_candidates)
        .map(|_| {
            let paras = rng.gen_range(2..=3);
            (0..paras).map(|_| background_paragraph(rng)).collect()
        })
        .collect();

    let mut labels = BTreeMap::new();
    let mut queries = Vec::with_capacity(n_queries);
    for j in 0..n_queries {
        let planted = planted_tokens(j).join(" ");
        let marker_paragraph = format!(
            "{} {DEFAULT_FRAGMENT_MARKER} {planted} considered below. {}",
            background_sentence(rng, 7),
            background_sentence(rng, 6)
        );
        let text = format!(
            "{}\n\n{}\n\n{}",
            background_paragraph(rng),
            marker_paragraph,
            background_paragraph(rng)
        );
        let doc = Document::parse(format!("q{j:03}"), text);
        queries.push(QueryCase::from_document(doc, DEFAULT_FRAGMENT_MARKER, 3, 3));

        let n_relevant = rng.gen_range(2..=4.min(n_candidates));
        let mut chosen = BTreeSet::new();
        while chosen.len() < n_relevant {
            chosen.insert(rng.gen_range(0..n_candidates));
        }
        let mut ids = BTreeSet::new();
        for &c in &chosen {
            candidate_texts[c].push(format!("Novel finding {planted} applies to this matter."));
            ids.insert(format!("c{c:04}"));
        }
        labels.insert(format!("q{j:03}"), ids);
    }

    let candidates: Vec<Document> = candidate_texts
        .into_iter()
        .enumerate()
        .map(|(i, paras)| Document::parse(format!("c{i:04}"), paras.join("\n\n")))
        .collect();

    SyntheticTask1 {
        queries,
        candidates,
        labels: LabelSet::from_map(labels),
    }
}

/// A synthetic entailment corpus where the gold paragraph holds the maximal
/// lexical overlap with the fragment. A fraction of queries carry a second
/// relevant paragraph with the second-highest overlap, so predicting two
/// paragraphs strictly trades precision for recall.
pub struct SyntheticTask2 {
    pub queries: Vec<Task2Query>,
    pub labels: LabelSet,
}

pub fn synthetic_task2(rng: &mut ChaCha8Rng, n_queries: usize) -> SyntheticTask2 {
    let mut queries = Vec::with_capacity(n_queries);
    let mut labels = BTreeMap::new();
    for j in 0..n_queries {
        let id = format!("q{j:03}");
        let fragment_tokens: Vec<String> = (0..10).map(|k| format!("f{j:03}x{k}")).collect();
        let fragment_text = format!("The decision holds that {}.", fragment_tokens.join(" "));

        let pool_size = rng.gen_range(6..=9);
        let mut pool = Vec::with_capacity(pool_size);
        let two_relevant = j % 3 == 0;
        for p in 0..pool_size {
            let pid = format!("{:03}", p + 1);
            let text = if p == 0 {
                // Gold: all ten fragment tokens.
                format!("It was held that {} in the result.", fragment_tokens.join(" "))
            } else if p == 1 && two_relevant {
                // Second relevant: six of ten fragment tokens.
                format!(
                    "Related reasoning covers {} among unrelated filler cud{j:03}a cud{j:03}b cud{j:03}c cud{j:03}d.",
                    fragment_tokens[..6].join(" ")
                )
            } else {
                // Noise: no fragment tokens at all.
                format!(
                    "Paragraph about nse{j:03}p{p}a nse{j:03}p{p}b nse{j:03}p{p}c nse{j:03}p{p}d nse{j:03}p{p}e nse{j:03}p{p}f and procedure."
                )
            };
            pool.push(PoolParagraph { id: pid, text });
        }

        let mut rel = BTreeSet::from(["001".to_string()]);
        if two_relevant {
            rel.insert("002".to_string());
        }
        labels.insert(id.clone(), rel);

        // The base case embeds the fragment sentence verbatim between filler
        // sentences, so base-window query construction finds a real match.
        let base_text = format!(
            "{} {} {} {} {}",
            background_sentence(rng, 8),
            background_sentence(rng, 7),
            fragment_text,
            background_sentence(rng, 8),
            background_sentence(rng, 7),
        );
        queries.push(Task2Query {
            id: id.clone(),
            fragment: Document::parse(format!("{id}#fragment"), fragment_text.clone()),
            base_case: Document::parse(format!("{id}#base"), base_text),
            pool,
        });
    }
    SyntheticTask2 {
        queries,
        labels: LabelSet::from_map(labels),
    }
}

/// All distinct unigram tokens appearing in the given documents.
pub fn corpus_token_set(queries: &[QueryCase], candidates: &[Document]) -> Vec<String> {
    let mut set = BTreeSet::new();
    for q in queries {
        set.extend(precedent_core::lexical::tokenize(&q.document.raw_text));
    }
    for c in candidates {
        set.extend(precedent_core::lexical::tokenize(&c.raw_text));
    }
    set.into_iter().collect()
}
