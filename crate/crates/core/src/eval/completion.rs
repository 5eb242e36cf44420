use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{hit_rate_at_k, EvalError};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CompletionMode {
    /// A uniform 20% of movies are withheld.
    #[serde(rename = "random20")]
    Random20,
    /// The latest 20% of movies by year are withheld, and directors are
    /// embedded from their preceding window only.
    #[serde(rename = "time")]
    Time,
}

impl FromStr for CompletionMode {
    type Err = EvalError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "random20" => Ok(CompletionMode::Random20),
            "time" | "timelast20" => Ok(CompletionMode::Time),
            other => Err(EvalError::Unknown {
                what: "completion mode",
                value: other.into(),
            }),
        }
    }
}

impl fmt::Display for CompletionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CompletionMode::Random20 => "random20",
            CompletionMode::Time => "time",
        })
    }
}

/// A withheld movie whose director must be recovered.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletionQuery {
    pub movie: String,
    pub year: i64,
    pub correct: String,
    /// Every true director of the movie, never drawn as a negative.
    pub directors: BTreeSet<String>,
}

pub const COMPLETION_KS: [usize; 4] = [1, 5, 10, 20];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionResult {
    pub model: String,
    pub mode: CompletionMode,
    pub negatives: usize,
    pub ks: Vec<usize>,
    pub hit_rates: Vec<f64>,
    /// `(movie, rank of the correct director)` per evaluated query.
    pub ranks: Vec<(String, usize)>,
    /// Queries without a scorable correct director or with too few
    /// scorable negatives.
    pub excluded: Vec<String>,
}

impl CompletionResult {
    pub fn hit_rate(&self, k: usize) -> Option<f64> {
        self.ks.iter().position(|&x| x == k).map(|i| self.hit_rates[i])
    }

    pub fn hits(&self, k: usize) -> usize {
        self.ranks.iter().filter(|(_, r)| *r <= k).count()
    }
}

/// Ranks each query's correct director among `negatives` uniformly drawn,
/// scorable, non-true directors from `pool`.
///
/// `score(query, director)` returns `None` when the director cannot be
/// embedded for that query. Rank is `1 + #{negatives scoring >= correct}`,
/// so ties count against the model.
pub fn completion_eval<S>(
    model: &str,
    mode: CompletionMode,
    queries: &[CompletionQuery],
    pool: &[String],
    negatives: usize,
    seed: u64,
    score: S,
) -> Result<CompletionResult, EvalError>
where
    S: Fn(&CompletionQuery, &str) -> Option<f64> + Sync,
{
    if pool.len() < negatives + 1 {
        return Err(EvalError::PoolTooSmall {
            pool: pool.len(),
            needed: negatives + 1,
        });
    }
    let ranked: Vec<Option<usize>> = queries
        .par_iter()
        .map(|q| {
            let correct = score(q, &q.correct)?;
            let mut r = rng::stream(seed, "completion", rng::fnv1a(q.movie.as_bytes()));
            let mut order: Vec<&String> = pool
                .iter()
                .filter(|d| !q.directors.contains(d.as_str()) && **d != q.correct)
                .collect();
            order.shuffle(&mut r);
            let mut beaten = 0;
            let mut taken = 0;
            for d in order {
                if taken == negatives {
                    break;
                }
                if let Some(s) = score(q, d) {
                    taken += 1;
                    if s >= correct {
                        beaten += 1;
                    }
                }
            }
            (taken == negatives).then_some(1 + beaten)
        })
        .collect();
    let mut ranks = Vec::new();
    let mut excluded = Vec::new();
    for (q, r) in queries.iter().zip(ranked) {
        match r {
            Some(r) => ranks.push((q.movie.clone(), r)),
            None => excluded.push(q.movie.clone()),
        }
    }
    let just: Vec<usize> = ranks.iter().map(|(_, r)| *r).collect();
    Ok(CompletionResult {
        model: model.to_string(),
        mode,
        negatives,
        ks: COMPLETION_KS.to_vec(),
        hit_rates: COMPLETION_KS.iter().map(|&k| hit_rate_at_k(&just, k)).collect(),
        ranks,
        excluded,
    })
}

/// `model` then hit rates at each k, one row per result.
pub fn completion_tsv(results: &[CompletionResult]) -> String {
    let mut out = String::from("model\tmode");
    for k in COMPLETION_KS {
        out.push_str(&format!("\thit@{k}"));
    }
    out.push_str("\tevaluated\texcluded\n");
    for r in results {
        out.push_str(&format!("{}\t{}", r.model, r.mode));
        for h in &r.hit_rates {
            out.push_str(&format!("\t{h:.4}"));
        }
        out.push_str(&format!("\t{}\t{}\n", r.ranks.len(), r.excluded.len()));
    }
    out
}
