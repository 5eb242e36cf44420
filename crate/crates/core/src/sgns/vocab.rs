use std::collections::HashMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;

use super::SgnsError;
use crate::rng::Rng;

/// Token vocabulary with dense indices ordered by descending frequency,
/// ties broken by token string.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocab {
    words: Vec<(String, u64)>,
    index: HashMap<String, usize>,
    pub min_count: u64,
}

impl Vocab {
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn index(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, i: usize) -> &str {
        &self.words[i].0
    }

    pub fn frequency(&self, i: usize) -> u64 {
        self.words[i].1
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.words.iter().map(|(t, _)| t.as_str())
    }

    pub fn total(&self) -> u64 {
        self.words.iter().map(|(_, f)| f).sum()
    }
}

pub fn build_vocab<'a, S, T>(sentences: S, min_count: u64) -> Result<Vocab, SgnsError>
where
    S: IntoIterator<Item = T>,
    T: IntoIterator<Item = &'a str>,
{
    let mut counts: HashMap<&str, u64> = HashMap::new();
    let mut any = false;
    for s in sentences {
        for t in s {
            any = true;
            *counts.entry(t).or_default() += 1;
        }
    }
    if !any {
        return Err(SgnsError::EmptyCorpus);
    }
    let mut words: Vec<(String, u64)> = counts
        .into_iter()
        .filter(|(_, c)| *c >= min_count)
        .map(|(t, c)| (t.to_string(), c))
        .collect();
    if words.is_empty() {
        return Err(SgnsError::EmptyVocab { min_count });
    }
    words.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let index = words
        .iter()
        .enumerate()
        .map(|(i, (t, _))| (t.clone(), i))
        .collect();
    Ok(Vocab {
        words,
        index,
        min_count,
    })
}

/// Draws token indices with probability proportional to `freq^power`.
#[derive(Debug, Clone)]
pub struct NegativeSampler {
    dist: WeightedIndex<f64>,
    weights: Vec<f64>,
}

impl NegativeSampler {
    pub fn new(vocab: &Vocab, power: f64) -> Result<Self, SgnsError> {
        if vocab.len() < 2 {
            return Err(SgnsError::VocabTooSmall(vocab.len()));
        }
        let raw: Vec<f64> = (0..vocab.len())
            .map(|i| (vocab.frequency(i) as f64).powf(power))
            .collect();
        let total: f64 = raw.iter().sum();
        let dist = WeightedIndex::new(&raw).map_err(|e| SgnsError::InvalidConfig(e.to_string()))?;
        Ok(NegativeSampler {
            dist,
            weights: raw.iter().map(|w| w / total).collect(),
        })
    }

    /// Normalized sampling probabilities.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn sample(&self, r: &mut Rng) -> usize {
        self.dist.sample(r)
    }

    /// Draws until the result differs from `target`.
    pub fn sample_excluding(&self, target: usize, r: &mut Rng) -> usize {
        loop {
            let i = self.dist.sample(r);
            if i != target {
                return i;
            }
        }
    }
}
