//! Entity embeddings for multi-table relational databases.
//!
//! The crate covers the whole path from typed CSV tables to evaluated
//! embeddings:
//!
//! * [`schema`] loads and validates tables, materializes the denormalized
//!   full join, and generates planted synthetic databases.
//! * [`corpus`] turns denormalized rows into token sentences, either one
//!   sentence per row or with probability- and rank-weighted sampling.
//! * [`sgns`] trains skip-gram with negative sampling on those sentences.
//! * [`kg`] compiles rows into a column-pair knowledge graph and trains TransH.
//! * [`seq`] embeds directors with an LSTM over their chronological filmography.
//! * [`eval`] computes link-based gold lists, ranking metrics, completion
//!   hit rates and paired significance tests.
//! * [`pipeline`] wires the stages together and records run manifests.

pub mod corpus;
pub mod error;
pub mod eval;
pub mod kg;
pub mod linalg;
pub mod pipeline;
pub mod rng;
pub mod schema;
pub mod seq;
pub mod sgns;

pub use error::{Error, Result};
