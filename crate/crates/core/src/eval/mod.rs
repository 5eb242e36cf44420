//! Evaluation: link-based gold lists, ranking metrics, database completion
//! and paired significance tests.

mod completion;
mod links;
mod metrics;
mod similarity;
mod stats;

use thiserror::Error;

pub use completion::{completion_eval, completion_tsv, CompletionMode, CompletionQuery, CompletionResult, COMPLETION_KS};
pub use links::{gold_list, milne_witten, LinkGraph};
pub use metrics::{grade, hit_rate_at_k, ndcg_at_k, precision_at_k, Gain};
pub use similarity::{
    gold_from_groups, gold_from_links, popular, similarity_eval, CandidateFilter, EvalReport, Metric, ModelReport,
    PairTest, QueryResult, Scorer, StoreScorer, RANK_DEPTH,
};
pub use stats::paired_ttest;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("unknown entity `{0}`")]
    UnknownEntity(String),
    #[error("invalid link graph: {0}")]
    InvalidGraph(String),
    #[error("paired samples differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least 2 paired samples, got {0}")]
    TooFewSamples(usize),
    #[error("no gold list for query `{0}`")]
    MissingGold(String),
    #[error("director pool has {pool} entries, need at least {needed}")]
    PoolTooSmall { pool: usize, needed: usize },
    #[error("unknown {what} `{value}`")]
    Unknown { what: &'static str, value: String },
}
