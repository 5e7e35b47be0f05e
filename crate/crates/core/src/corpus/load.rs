//! Directory loaders for the two corpus layouts.
//!
//! Case retrieval: a flat directory of `<case_id>.txt` files per side.
//! Entailment: one directory per query holding `entailed_fragment.txt`,
//! `base_case.txt` and a `paragraphs/` pool. File iteration is sorted so
//! loading is deterministic.

use std::path::Path;

use crate::corpus::{Document, QueryCase};
use crate::error::{Error, Result};

/// Load every `*.txt` file in `dir` as a document, sorted by file stem.
pub fn load_documents_dir(dir: &Path) -> Result<Vec<Document>> {
    let mut stems = txt_stems(dir)?;
    stems.sort();
    stems
        .into_iter()
        .map(|stem| {
            let path = dir.join(format!("{stem}.txt"));
            let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            Ok(Document::parse(stem, text))
        })
        .collect()
}

/// Load query cases and extract their fragment contexts in one pass.
pub fn load_task1_queries(
    dir: &Path,
    marker: &str,
    before: usize,
    after: usize,
) -> Result<Vec<QueryCase>> {
    Ok(load_documents_dir(dir)?
        .into_iter()
        .map(|doc| QueryCase::from_document(doc, marker, before, after))
        .collect())
}

/// One candidate paragraph from an entailment pool, identified by file stem.
#[derive(Debug, Clone)]
pub struct PoolParagraph {
    pub id: String,
    pub text: String,
}

/// An entailment query: fragment, base case and the candidate pool.
#[derive(Debug, Clone)]
pub struct Task2Query {
    pub id: String,
    pub fragment: Document,
    pub base_case: Document,
    pub pool: Vec<PoolParagraph>,
}

/// Load an entailment corpus rooted at `root`: one subdirectory per query.
pub fn load_task2_corpus(root: &Path) -> Result<Vec<Task2Query>> {
    let mut query_dirs: Vec<String> = Vec::new();
    for entry in std::fs::read_dir(root).map_err(|e| Error::io(root, e))? {
        let entry = entry.map_err(|e| Error::io(root, e))?;
        if entry.path().is_dir() {
            query_dirs.push(entry.file_name().to_string_lossy().into_owned());
        }
    }
    query_dirs.sort();

    let mut queries = Vec::with_capacity(query_dirs.len());
    for id in query_dirs {
        let dir = root.join(&id);
        let fragment_path = dir.join("entailed_fragment.txt");
        let base_path = dir.join("base_case.txt");
        let fragment_text =
            std::fs::read_to_string(&fragment_path).map_err(|e| Error::io(&fragment_path, e))?;
        let base_text =
            std::fs::read_to_string(&base_path).map_err(|e| Error::io(&base_path, e))?;

        let pool_dir = dir.join("paragraphs");
        let mut stems = txt_stems(&pool_dir)?;
        stems.sort();
        let pool = stems
            .into_iter()
            .map(|stem| {
                let path = pool_dir.join(format!("{stem}.txt"));
                let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
                Ok(PoolParagraph { id: stem, text })
            })
            .collect::<Result<Vec<_>>>()?;

        queries.push(Task2Query {
            id: id.clone(),
            fragment: Document::parse(format!("{id}#fragment"), fragment_text),
            base_case: Document::parse(format!("{id}#base"), base_text),
            pool,
        });
    }
    Ok(queries)
}

fn txt_stems(dir: &Path) -> Result<Vec<String>> {
    let mut stems = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        if path.extension().is_some_and(|ext| ext == "txt") {
            if let Some(stem) = path.file_stem() {
                stems.push(stem.to_string_lossy().into_owned());
            }
        }
    }
    Ok(stems)
}
