//! Local citation recommendation.
//!
//! A query (citation context plus the citing paper's metadata) runs through
//! three stages:
//!
//! 1. [`prefetch`]: cosine similarity over dense paper embeddings;
//! 2. [`enricher`]: the candidate pool grows with every candidate's
//!    outgoing citations, ordered by multiset frequency;
//! 3. [`reranker`]: a learned score over joint text relevance and the
//!    hyperbolic separation of taxonomy embeddings ([`taxonomy`],
//!    [`hypermath`]).
//!
//! [`matcher`] links free-text titles to corpus ids, and [`eval`] holds the
//! metrics, the ablation harness and a synthetic corpus generator.

pub mod config;
pub mod corpus;
pub mod embedder;
pub mod enricher;
pub mod error;
pub mod eval;
pub mod hashing;
pub mod hypermath;
pub mod matcher;
pub mod pipeline;
pub mod prefetch;
pub mod reranker;
pub mod taxonomy;

pub use error::{Error, Result};
