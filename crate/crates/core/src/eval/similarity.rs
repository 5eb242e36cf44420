use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{gold_list, ndcg_at_k, paired_ttest, precision_at_k, EvalError, Gain, LinkGraph};
use crate::sgns::EmbeddingStore;

/// Similarity between entity ids; `None` when either id is unknown.
pub trait Scorer: Sync {
    fn knows(&self, e: &str) -> bool;
    fn similarity(&self, a: &str, b: &str) -> Option<f64>;
}

/// Cosine over an embedding store whose tokens are `<prefix><id>`.
pub struct StoreScorer<'a> {
    pub store: &'a EmbeddingStore,
    pub prefix: String,
}

impl<'a> StoreScorer<'a> {
    pub fn new(store: &'a EmbeddingStore, prefix: impl Into<String>) -> Self {
        StoreScorer {
            store,
            prefix: prefix.into(),
        }
    }

    fn token(&self, e: &str) -> String {
        format!("{}{e}", self.prefix)
    }
}

impl Scorer for StoreScorer<'_> {
    fn knows(&self, e: &str) -> bool {
        self.store.contains(&self.token(e))
    }

    fn similarity(&self, a: &str, b: &str) -> Option<f64> {
        self.store.cosine(&self.token(a), &self.token(b)).ok()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CandidateFilter {
    /// Every candidate.
    #[default]
    None,
    /// Candidates present in the link graph.
    Wiki,
    /// Candidates with at least five movies.
    Min5Movies,
}

impl FromStr for CandidateFilter {
    type Err = EvalError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(CandidateFilter::None),
            "wiki" => Ok(CandidateFilter::Wiki),
            "min5movies" => Ok(CandidateFilter::Min5Movies),
            other => Err(EvalError::Unknown {
                what: "filter",
                value: other.into(),
            }),
        }
    }
}

impl fmt::Display for CandidateFilter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CandidateFilter::None => "none",
            CandidateFilter::Wiki => "wiki",
            CandidateFilter::Min5Movies => "min5movies",
        })
    }
}

impl CandidateFilter {
    pub fn apply(self, candidates: &[String], graph: &LinkGraph, movie_counts: &BTreeMap<String, usize>) -> Vec<String> {
        candidates
            .iter()
            .filter(|c| match self {
                CandidateFilter::None => true,
                CandidateFilter::Wiki => graph.contains(c),
                CandidateFilter::Min5Movies => movie_counts.get(c.as_str()).copied().unwrap_or(0) >= 5,
            })
            .cloned()
            .collect()
    }
}

/// The `n` entities with the most movies, ties by id.
pub fn popular(movie_counts: &BTreeMap<String, usize>, n: usize) -> Vec<String> {
    let mut v: Vec<(&String, usize)> = movie_counts.iter().map(|(k, c)| (k, *c)).collect();
    v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    v.into_iter().take(n).map(|(k, _)| k.clone()).collect()
}

/// Gold lists for every query present in the graph.
pub fn gold_from_links(queries: &[String], graph: &LinkGraph, n: usize) -> Result<BTreeMap<String, Vec<String>>, EvalError> {
    queries
        .iter()
        .filter(|q| graph.contains(q))
        .map(|q| Ok((q.clone(), gold_list(q, graph, n)?)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResult {
    pub query: String,
    pub prec10: f64,
    pub prec20: f64,
    pub ndcg10: f64,
    pub ndcg20: f64,
    /// Head of the model's ranking.
    pub top: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "Prec@10")]
    Prec10,
    #[serde(rename = "Prec@20")]
    Prec20,
    #[serde(rename = "NDCG@10")]
    Ndcg10,
    #[serde(rename = "NDCG@20")]
    Ndcg20,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Prec10, Metric::Prec20, Metric::Ndcg10, Metric::Ndcg20];

    pub fn of(self, q: &QueryResult) -> f64 {
        match self {
            Metric::Prec10 => q.prec10,
            Metric::Prec20 => q.prec20,
            Metric::Ndcg10 => q.ndcg10,
            Metric::Ndcg20 => q.ndcg20,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Prec10 => "Prec@10",
            Metric::Prec20 => "Prec@20",
            Metric::Ndcg10 => "NDCG@10",
            Metric::Ndcg20 => "NDCG@20",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub model: String,
    pub filter: CandidateFilter,
    pub queries: Vec<QueryResult>,
    /// Queries the scorer could not embed.
    pub skipped: Vec<String>,
}

impl ModelReport {
    pub fn mean(&self, m: Metric) -> f64 {
        if self.queries.is_empty() {
            return 0.0;
        }
        self.queries.iter().map(|q| m.of(q)).sum::<f64>() / self.queries.len() as f64
    }
}

/// How many ranked candidates each query keeps.
pub const RANK_DEPTH: usize = 100;

/// Ranks `candidates` against each query and scores the ranking against the
/// query's gold list.
pub fn similarity_eval<S: Scorer>(
    model: &str,
    scorer: &S,
    queries: &[String],
    gold: &BTreeMap<String, Vec<String>>,
    candidates: &[String],
    filter: CandidateFilter,
    gain: Gain,
) -> Result<ModelReport, EvalError> {
    if let Some(q) = queries.iter().find(|q| !gold.contains_key(q.as_str())) {
        return Err(EvalError::MissingGold(q.clone()));
    }
    let known: Vec<&String> = candidates.iter().filter(|c| scorer.knows(c)).collect();
    let results: Vec<Option<QueryResult>> = queries
        .par_iter()
        .map(|q| {
            if !scorer.knows(q) {
                return None;
            }
            let mut scored: Vec<(&str, f64)> = known
                .iter()
                .filter(|c| c.as_str() != q)
                .filter_map(|c| scorer.similarity(q, c).map(|s| (c.as_str(), s)))
                .collect();
            scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
            scored.truncate(RANK_DEPTH);
            let ranked: Vec<String> = scored.into_iter().map(|(c, _)| c.to_string()).collect();
            let g = &gold[q.as_str()];
            let relevant: HashSet<&str> = g.iter().map(String::as_str).collect();
            Some(QueryResult {
                query: q.clone(),
                prec10: precision_at_k(&ranked, &relevant, 10),
                prec20: precision_at_k(&ranked, &relevant, 20),
                ndcg10: ndcg_at_k(&ranked, g, 10, gain),
                ndcg20: ndcg_at_k(&ranked, g, 20, gain),
                top: ranked.into_iter().take(20).collect(),
            })
        })
        .collect();
    let mut report = ModelReport {
        model: model.to_string(),
        filter,
        queries: Vec::new(),
        skipped: Vec::new(),
    };
    for (q, r) in queries.iter().zip(results) {
        match r {
            Some(r) => report.queries.push(r),
            None => report.skipped.push(q.clone()),
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairTest {
    pub metric: Metric,
    pub a: String,
    pub b: String,
    pub t: f64,
    pub p: f64,
    /// Queries evaluated by both models.
    pub n: usize,
}

/// Per-model reports plus pairwise significance over shared queries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub models: Vec<ModelReport>,
    pub significance: Vec<PairTest>,
}

impl EvalReport {
    pub fn new(models: Vec<ModelReport>) -> Self {
        let mut significance = Vec::new();
        for metric in Metric::ALL {
            for i in 0..models.len() {
                for j in i + 1..models.len() {
                    let (a, b) = (&models[i], &models[j]);
                    let bq: BTreeMap<&str, &QueryResult> = b.queries.iter().map(|q| (q.query.as_str(), q)).collect();
                    let (xs, ys): (Vec<f64>, Vec<f64>) = a
                        .queries
                        .iter()
                        .filter_map(|q| bq.get(q.query.as_str()).map(|r| (metric.of(q), metric.of(r))))
                        .unzip();
                    if let Ok((t, p)) = paired_ttest(&xs, &ys) {
                        significance.push(PairTest {
                            metric,
                            a: a.model.clone(),
                            b: b.model.clone(),
                            t,
                            p,
                            n: xs.len(),
                        });
                    }
                }
            }
        }
        EvalReport { models, significance }
    }

    pub fn p_value(&self, metric: Metric, a: &str, b: &str) -> Option<f64> {
        self.significance
            .iter()
            .find(|s| s.metric == metric && ((s.a == a && s.b == b) || (s.a == b && s.b == a)))
            .map(|s| s.p)
    }

    /// One row per model with mean metrics.
    pub fn summary_tsv(&self) -> String {
        let mut out = String::from("model\tfilter\tPrec@10\tPrec@20\tNDCG@10\tNDCG@20\tqueries\tskipped\n");
        for m in &self.models {
            out.push_str(&format!("{}\t{}", m.model, m.filter));
            for metric in Metric::ALL {
                out.push_str(&format!("\t{:.4}", m.mean(metric)));
            }
            out.push_str(&format!("\t{}\t{}\n", m.queries.len(), m.skipped.len()));
        }
        out
    }

    /// One block per metric: a symmetric matrix of p-values, `**` marking
    /// p < 0.05 and `*` marking p < 0.10.
    pub fn significance_tsv(&self) -> String {
        let names: Vec<&str> = self.models.iter().map(|m| m.model.as_str()).collect();
        let mut out = String::new();
        for metric in Metric::ALL {
            out.push_str(&format!("{metric}\t{}\n", names.join("\t")));
            for a in &names {
                out.push_str(a);
                for b in &names {
                    let cell = if a == b {
                        "-".to_string()
                    } else {
                        match self.p_value(metric, a, b) {
                            Some(p) => {
                                let flag = if p < 0.05 {
                                    "**"
                                } else if p < 0.10 {
                                    "*"
                                } else {
                                    ""
                                };
                                format!("{p:.4}{flag}")
                            }
                            None => "na".into(),
                        }
                    };
                    out.push('\t');
                    out.push_str(&cell);
                }
                out.push('\n');
            }
            out.push('\n');
        }
        out
    }
}

/// Gold lists from a planted partition: each member's gold is the rest of
/// its group, sorted by id.
pub fn gold_from_groups(groups: &[Vec<String>]) -> BTreeMap<String, Vec<String>> {
    let mut out = BTreeMap::new();
    for g in groups {
        let sorted: BTreeSet<&String> = g.iter().collect();
        for q in g {
            out.insert(q.clone(), sorted.iter().filter(|x| **x != q).map(|x| (*x).clone()).collect());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Scores by gold position, so the ranking reproduces the gold list.
    struct GoldScorer<'a>(&'a BTreeMap<String, Vec<String>>);

    impl Scorer for GoldScorer<'_> {
        fn knows(&self, _: &str) -> bool {
            true
        }
        fn similarity(&self, a: &str, b: &str) -> Option<f64> {
            let g = self.0.get(a)?;
            Some(match g.iter().position(|x| x == b) {
                Some(i) => 1.0 - i as f64 / 1000.0,
                None => 0.0,
            })
        }
    }

    fn groups() -> Vec<Vec<String>> {
        (0..3)
            .map(|c| (0..25).map(|i| format!("e{c}_{i:02}")).collect())
            .collect()
    }

    #[test]
    fn gold_scorer_is_maximal() {
        let g = gold_from_groups(&groups());
        let all: Vec<String> = g.keys().cloned().collect();
        let r = similarity_eval("gold", &GoldScorer(&g), &all, &g, &all, CandidateFilter::None, Gain::Linear).unwrap();
        for m in Metric::ALL {
            assert!((r.mean(m) - 1.0).abs() < 1e-12, "{m}");
        }
    }

    #[test]
    fn missing_gold_is_an_error() {
        let g = gold_from_groups(&groups());
        let q = vec!["nope".to_string()];
        assert!(similarity_eval("x", &GoldScorer(&g), &q, &g, &q, CandidateFilter::None, Gain::Linear).is_err());
    }

    #[test]
    fn report_tables() {
        let g = gold_from_groups(&groups());
        let all: Vec<String> = g.keys().cloned().collect();
        let a = similarity_eval("a", &GoldScorer(&g), &all, &g, &all, CandidateFilter::None, Gain::Linear).unwrap();
        let mut b = a.clone();
        b.model = "b".into();
        b.queries[0].prec10 = 0.5;
        let rep = EvalReport::new(vec![a, b]);
        assert_eq!(rep.significance.len(), 4);
        assert!(rep.summary_tsv().starts_with("model\tfilter\tPrec@10"));
        assert!(rep.significance_tsv().contains("Prec@10\ta\tb\n"));
        assert_eq!(rep.p_value(Metric::Ndcg10, "a", "b"), Some(1.0));
    }

    #[test]
    fn popular_orders_by_count_then_id() {
        let counts: BTreeMap<String, usize> = [("b", 3), ("a", 3), ("c", 9)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        assert_eq!(popular(&counts, 2), ["c", "a"]);
    }
}
