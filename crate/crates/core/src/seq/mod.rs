//! Temporal director embeddings from chronological movie sequences.
//!
//! A movie is the concatenation of frozen actor, role, genre, year and rank
//! vectors. A single-layer LSTM reads a director's movies in order and a
//! linear layer maps its state back to movie width; training maximizes the
//! softmax probability of the next movie against sampled negatives.

mod catalog;
mod io;
mod lstm;
mod train;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use catalog::{Catalog, FrozenTable, MovieRecord, PAD};
pub use lstm::{
    backward, embed, embed_backward, forward, joint_loss, select, step_loss, step_loss_grad, window_loss, Layout,
    MovieSample, Step, Window,
};
pub use train::{
    make_dataset, materialize, train, Dataset, DirectorSplit, EpochStats, RawWindow, SeqModel, TrainReport,
};

use crate::corpus::CorpusError;

#[derive(Debug, Error)]
pub enum SeqError {
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("misaligned inputs: {0}")]
    Alignment(String),
    #[error("missing data: {0}")]
    MissingData(String),
    #[error("no director has at least {0} movies")]
    NoEligibleDirectors(usize),
    #[error("director `{director}` has no movie in [{from}, {cutoff})")]
    NoQualifyingMovies { director: String, from: i64, cutoff: i64 },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Token(#[from] CorpusError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    /// Last-step loss, one random actor per movie.
    #[serde(rename = "plain")]
    Plain,
    /// Loss summed over every step.
    #[serde(rename = "joint")]
    Joint,
    /// Three sampled actors and roles, averaged.
    #[serde(rename = "actor-avg")]
    ActorAvg,
    /// Three sampled actors and roles, concatenated and mapped back to `d`.
    #[serde(rename = "actor-concat")]
    ActorConcat,
    /// The three most frequent actors of each movie, averaged.
    #[serde(rename = "popular")]
    Popular,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Plain,
        Variant::Joint,
        Variant::ActorAvg,
        Variant::ActorConcat,
        Variant::Popular,
    ];

    pub fn joint_loss(self) -> bool {
        self != Variant::Plain
    }

    pub fn code(self) -> u8 {
        match self {
            Variant::Plain => 0,
            Variant::Joint => 1,
            Variant::ActorAvg => 2,
            Variant::ActorConcat => 3,
            Variant::Popular => 4,
        }
    }

    pub fn from_code(c: u8) -> Option<Variant> {
        Variant::ALL.get(c as usize).copied()
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Plain => "plain",
            Variant::Joint => "joint",
            Variant::ActorAvg => "actor-avg",
            Variant::ActorConcat => "actor-concat",
            Variant::Popular => "popular",
        })
    }
}

impl FromStr for Variant {
    type Err = SeqError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variant::ALL
            .into_iter()
            .find(|v| v.to_string() == s)
            .ok_or_else(|| SeqError::InvalidConfig(format!("unknown variant `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SeqConfig {
    pub variant: Variant,
    pub negatives: usize,
    pub lr: f64,
    pub batch: usize,
    /// Hidden width; the embedding width when `None`.
    pub hidden: Option<usize>,
    pub seed: u64,
    /// Upper bound on epochs; early stopping usually ends sooner.
    pub epochs: usize,
    pub patience: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Draw fresh negatives at every step instead of once per window.
    pub resample_negatives: bool,
    pub min_movies: usize,
    pub window_years: i64,
}

impl Default for SeqConfig {
    fn default() -> Self {
        SeqConfig {
            variant: Variant::Joint,
            negatives: 5,
            lr: 0.001,
            batch: 1024,
            hidden: None,
            seed: 0,
            epochs: 100,
            patience: 3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            resample_negatives: false,
            min_movies: 6,
            window_years: 20,
        }
    }
}

impl SeqConfig {
    pub fn validate(&self) -> Result<(), SeqError> {
        let bad = |m: &str| Err(SeqError::InvalidConfig(m.into()));
        if self.negatives == 0 {
            return bad("negatives must be >= 1");
        }
        if self.batch == 0 || self.epochs == 0 {
            return bad("batch and epochs must be >= 1");
        }
        if self.hidden == Some(0) {
            return bad("hidden must be >= 1");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr must be positive");
        }
        if self.min_movies < 6 {
            return bad("min_movies must be >= 6 (four inputs, a target and a test movie)");
        }
        Ok(())
    }
}
