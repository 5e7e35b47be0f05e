//! Two-stage retrieval engine for case-law documents.
//!
//! The pipeline pairs a lexical first stage (Okapi BM25 over an n-gram
//! vocabulary with document-frequency pruning) with an optional semantic
//! second stage (paragraph-pair cosine similarity, max-pooled to a document
//! score). It covers two jobs:
//!
//! * **Case retrieval**: given a query case whose citations are replaced by a
//!   fragment marker, rank candidate cases and predict the cited ones.
//! * **Entailing-paragraph selection**: given an entailed fragment and a pool
//!   of candidate paragraphs, rank the paragraphs that support the decision.
//!
//! Modules map onto the pipeline: [`corpus`] loads and segments case text,
//! [`lexical`] builds vocabularies and scores with BM25, [`embedding`]
//! produces dense unit vectors, [`ranking`] aggregates paragraph-pair
//! similarities, [`cascade`] orchestrates end-to-end runs, and [`eval`]
//! computes micro-averaged precision/recall/F1.

pub mod cascade;
pub mod corpus;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod lexical;
pub mod ranking;

pub use cascade::{PipelineConfig, Prediction, RunResult};
pub use corpus::{Document, LabelSet, QueryCase};
pub use error::{Error, Result};
pub use eval::EvalReport;
pub use lexical::BM25Params;
