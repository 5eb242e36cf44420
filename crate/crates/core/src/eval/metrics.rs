use std::collections::HashSet;

use serde::{Deserialize, Serialize};

/// Graded relevance of a 1-based gold rank: 5 for ranks 1-20, 4 for 21-40,
/// down to 1 for 81-100; 0 otherwise.
pub fn grade(rank: Option<usize>) -> u32 {
    match rank {
        Some(r @ 1..=100) => 5 - ((r - 1) / 20) as u32,
        _ => 0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gain {
    /// `grade`
    #[default]
    Linear,
    /// `2^grade - 1`
    Exponential,
}

impl std::str::FromStr for Gain {
    type Err = super::EvalError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "linear" => Ok(Gain::Linear),
            "exponential" => Ok(Gain::Exponential),
            other => Err(super::EvalError::Unknown {
                what: "gain",
                value: other.into(),
            }),
        }
    }
}

impl std::fmt::Display for Gain {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Gain::Linear => "linear",
            Gain::Exponential => "exponential",
        })
    }
}

impl Gain {
    fn apply(self, g: u32) -> f64 {
        match self {
            Gain::Linear => g as f64,
            Gain::Exponential => 2f64.powi(g as i32) - 1.0,
        }
    }
}

/// NDCG@k of `ranked` against an ordered gold list.
pub fn ndcg_at_k(ranked: &[String], gold: &[String], k: usize, gain: Gain) -> f64 {
    if gold.is_empty() || k == 0 {
        return 0.0;
    }
    let pos: std::collections::HashMap<&str, usize> =
        gold.iter().enumerate().map(|(i, g)| (g.as_str(), i + 1)).collect();
    let discount = |i: usize| ((i + 2) as f64).log2();
    let dcg: f64 = ranked
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, e)| gain.apply(grade(pos.get(e.as_str()).copied())) / discount(i))
        .sum();
    let idcg: f64 = (0..k.min(gold.len()))
        .map(|i| gain.apply(grade(Some(i + 1))) / discount(i))
        .sum();
    if idcg == 0.0 {
        0.0
    } else {
        (dcg / idcg).clamp(0.0, 1.0)
    }
}

/// `|top-k & relevant| / k`
pub fn precision_at_k(ranked: &[String], relevant: &HashSet<&str>, k: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let hits = ranked.iter().take(k).filter(|e| relevant.contains(e.as_str())).count();
    hits as f64 / k as f64
}

/// Fraction of 1-based ranks that are `<= k`.
pub fn hit_rate_at_k(ranks: &[usize], k: usize) -> f64 {
    if ranks.is_empty() {
        return 0.0;
    }
    ranks.iter().filter(|&&r| r <= k).count() as f64 / ranks.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn grades() {
        assert_eq!(grade(Some(1)), 5);
        assert_eq!(grade(Some(20)), 5);
        assert_eq!(grade(Some(21)), 4);
        assert_eq!(grade(Some(35)), 4);
        assert_eq!(grade(Some(100)), 1);
        assert_eq!(grade(Some(101)), 0);
        assert_eq!(grade(None), 0);
    }

    #[test]
    fn ndcg_examples() {
        let gold = s(&["a", "b", "c"]);
        assert!((ndcg_at_k(&gold, &gold, 3, Gain::Linear) - 1.0).abs() < 1e-12);
        let v = ndcg_at_k(&s(&["a", "x"]), &gold, 2, Gain::Linear);
        assert!((v - 0.6131471927654585).abs() < 1e-12);
        assert_eq!(ndcg_at_k(&gold, &[], 10, Gain::Linear), 0.0);
    }

    #[test]
    fn precision_examples() {
        let rel: HashSet<&str> = ["a", "b", "c"].into_iter().collect();
        assert_eq!(precision_at_k(&s(&["a", "b"]), &rel, 2), 1.0);
        let ranked = s(&["a", "x1", "b", "x2", "x3", "c", "x4", "x5", "x6", "x7"]);
        assert!((precision_at_k(&ranked, &rel, 10) - 0.3).abs() < 1e-15);
        assert_eq!(precision_at_k(&s(&["z"]), &rel, 1), 0.0);
    }

    #[test]
    fn hit_rates() {
        let ranks = [1, 5, 30, 100];
        assert_eq!(hit_rate_at_k(&ranks, 1), 0.25);
        assert_eq!(hit_rate_at_k(&ranks, 20), 0.5);
    }
}
