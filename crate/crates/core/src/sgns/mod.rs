//! Skip-gram with negative sampling.
//!
//! For a center token `c` and context token `o` with negatives `n_1..n_k`,
//! the pair loss is `-ln s(u_c . v_o) - sum_i ln s(-u_c . v_i)` where `s` is
//! the logistic function, `u` the input vectors and `v` the output vectors.
//! Training makes one SGD step per (center, context) pair with a learning
//! rate decaying linearly to 1% of its initial value.

mod store;
mod vocab;

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use store::EmbeddingStore;
pub use vocab::{build_vocab, NegativeSampler, Vocab};

use crate::corpus::Sentence;
use crate::linalg::{dot, sigmoid, softplus};
use crate::rng;

#[derive(Debug, Error)]
pub enum SgnsError {
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("no token reaches min count {min_count}")]
    EmptyVocab { min_count: u64 },
    #[error("negative sampling needs at least 2 tokens, vocabulary has {0}")]
    VocabTooSmall(usize),
    #[error("unknown token `{0}`")]
    UnknownToken(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Window {
    /// Every other token of the sentence is context.
    Full,
    Size(usize),
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Window::Full => f.write_str("full"),
            Window::Size(n) => write!(f, "{n}"),
        }
    }
}

impl FromStr for Window {
    type Err = SgnsError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "full" {
            return Ok(Window::Full);
        }
        match s.parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Window::Size(n)),
            _ => Err(SgnsError::InvalidConfig(format!("window `{s}` (expected `full` or a positive integer)"))),
        }
    }
}

impl Serialize for Window {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Window {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SgnsConfig {
    pub dim: usize,
    pub epochs: usize,
    pub window: Window,
    pub negatives: usize,
    pub alpha: f64,
    pub min_count: u64,
    pub seed: u64,
    pub workers: usize,
    /// Frequent-token subsampling threshold; off when `None`.
    pub subsample: Option<f64>,
    pub power: f64,
}

impl Default for SgnsConfig {
    fn default() -> Self {
        SgnsConfig {
            dim: 300,
            epochs: 10,
            window: Window::Full,
            negatives: 5,
            alpha: 0.025,
            min_count: 1,
            seed: 0,
            workers: 1,
            subsample: None,
            power: 0.75,
        }
    }
}

impl SgnsConfig {
    pub fn validate(&self) -> Result<(), SgnsError> {
        let bad = |m: &str| Err(SgnsError::InvalidConfig(m.to_string()));
        if self.dim == 0 {
            return bad("dim must be >= 1");
        }
        if self.epochs == 0 {
            return bad("epochs must be >= 1");
        }
        if self.negatives == 0 {
            return bad("negatives must be >= 1");
        }
        if self.workers == 0 {
            return bad("workers must be >= 1");
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad("alpha must be positive");
        }
        if let Window::Size(0) = self.window {
            return bad("window must be >= 1");
        }
        Ok(())
    }
}

/// Gradients of [`pair_loss`].
#[derive(Debug, Clone, PartialEq)]
pub struct PairGrads {
    pub center: Vec<f64>,
    pub context: Vec<f64>,
    pub negatives: Vec<Vec<f64>>,
}

/// `-ln s(u.v) - sum ln s(-u.v_i)` and its gradients.
pub fn pair_loss(center: &[f64], context: &[f64], negatives: &[&[f64]]) -> Result<(f64, PairGrads), SgnsError> {
    let d = center.len();
    if context.len() != d || negatives.iter().any(|n| n.len() != d) {
        return Err(SgnsError::InvalidConfig("vector lengths differ".into()));
    }
    let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
    if !finite(center) || !finite(context) || !negatives.iter().all(|n| finite(n)) {
        return Err(SgnsError::NonFinite("pair loss input".into()));
    }
    let pos = dot(center, context);
    // -ln s(x) = softplus(-x)
    let mut loss = softplus(-pos);
    let gp = sigmoid(pos) - 1.0;
    let mut g_center: Vec<f64> = context.iter().map(|v| gp * v).collect();
    let g_context: Vec<f64> = center.iter().map(|u| gp * u).collect();
    let mut g_negs = Vec::with_capacity(negatives.len());
    for n in negatives {
        let s = dot(center, n);
        loss += softplus(s);
        let gn = sigmoid(s);
        for (g, v) in g_center.iter_mut().zip(n.iter()) {
            *g += gn * v;
        }
        g_negs.push(center.iter().map(|u| gn * u).collect());
    }
    Ok((
        loss,
        PairGrads {
            center: g_center,
            context: g_context,
            negatives: g_negs,
        },
    ))
}

/// Ordered (center, context) positions for a sentence of length `len`.
pub fn context_pairs(len: usize, window: Window) -> impl Iterator<Item = (usize, usize)> {
    (0..len).flat_map(move |i| {
        let (lo, hi) = match window {
            Window::Full => (0, len),
            Window::Size(w) => (i.saturating_sub(w), (i + w + 1).min(len)),
        };
        (lo..hi).filter(move |&j| j != i).map(move |j| (i, j))
    })
}

fn pair_count(len: usize, window: Window) -> u64 {
    match window {
        Window::Full => (len * len.saturating_sub(1)) as u64,
        Window::Size(_) => context_pairs(len, window).count() as u64,
    }
}

/// Row-major matrix of `f64` stored as relaxed atomics so several workers
/// may update it without locks.
struct SharedMatrix {
    data: Vec<AtomicU64>,
    dim: usize,
}

impl SharedMatrix {
    fn from_values(values: &[f64], dim: usize) -> Self {
        SharedMatrix {
            data: values.iter().map(|v| AtomicU64::new(v.to_bits())).collect(),
            dim,
        }
    }

    fn read(&self, row: usize, out: &mut [f64]) {
        let base = row * self.dim;
        for (o, a) in out.iter_mut().zip(&self.data[base..base + self.dim]) {
            *o = f64::from_bits(a.load(Ordering::Relaxed));
        }
    }

    fn add(&self, row: usize, scale: f64, delta: &[f64]) {
        let base = row * self.dim;
        for (a, d) in self.data[base..base + self.dim].iter().zip(delta) {
            let cur = f64::from_bits(a.load(Ordering::Relaxed));
            a.store((cur + scale * d).to_bits(), Ordering::Relaxed);
        }
    }

    fn into_values(self) -> Vec<f64> {
        self.data
            .into_iter()
            .map(|a| f64::from_bits(a.into_inner()))
            .collect()
    }
}

/// Result of [`train`].
#[derive(Debug, Clone)]
pub struct SgnsModel {
    pub vocab: Vocab,
    /// Input vectors, used for retrieval.
    pub store: EmbeddingStore,
    /// Output (context) vectors, row-major.
    pub context: Vec<f64>,
    /// Mean loss of the frozen model on a fixed probe of pairs, after each epoch.
    pub epoch_losses: Vec<f64>,
    /// Running mean pair loss seen during each epoch's updates.
    pub train_losses: Vec<f64>,
}

struct Shared<'a> {
    input: SharedMatrix,
    output: SharedMatrix,
    sampler: NegativeSampler,
    cfg: &'a SgnsConfig,
    processed: AtomicU64,
    total_pairs: u64,
    keep_prob: Option<Vec<f64>>,
}

/// Loss sum and pair count for one worker's epoch slice.
fn run_slice(shared: &Shared, sentences: &[Vec<usize>], r: &mut rng::Rng) -> (f64, u64) {
    let d = shared.cfg.dim;
    let k = shared.cfg.negatives;
    let alpha0 = shared.cfg.alpha;
    let mut u = vec![0.0; d];
    let mut v = vec![0.0; d];
    let mut g_u = vec![0.0; d];
    let mut neg_ids = vec![0usize; k];
    let mut neg_vecs = vec![0.0; k * d];
    let mut kept = Vec::new();
    let (mut loss_sum, mut pairs) = (0.0, 0u64);
    for sentence in sentences {
        let s: &[usize] = match &shared.keep_prob {
            None => sentence,
            Some(keep) => {
                kept.clear();
                kept.extend(sentence.iter().copied().filter(|&t| r.random::<f64>() < keep[t]));
                &kept
            }
        };
        for (ci, oi) in context_pairs(s.len(), shared.cfg.window) {
            let (center, context) = (s[ci], s[oi]);
            let done = shared.processed.fetch_add(1, Ordering::Relaxed);
            let progress = (done as f64 / shared.total_pairs.max(1) as f64).min(1.0);
            let lr = alpha0 - (alpha0 - alpha0 / 100.0) * progress;

            shared.input.read(center, &mut u);
            shared.output.read(context, &mut v);
            for (j, id) in neg_ids.iter_mut().enumerate() {
                *id = shared.sampler.sample_excluding(context, r);
                shared.output.read(*id, &mut neg_vecs[j * d..(j + 1) * d]);
            }

            // same arithmetic as `pair_loss`, without allocation
            let pos = dot(&u, &v);
            loss_sum += softplus(-pos);
            let gp = sigmoid(pos) - 1.0;
            for (g, x) in g_u.iter_mut().zip(&v) {
                *g = gp * x;
            }
            for j in 0..k {
                let nv = &neg_vecs[j * d..(j + 1) * d];
                let sc = dot(&u, nv);
                loss_sum += softplus(sc);
                let gn = sigmoid(sc);
                for (g, x) in g_u.iter_mut().zip(nv) {
                    *g += gn * x;
                }
                shared.output.add(neg_ids[j], -lr * gn, &u);
            }
            shared.output.add(context, -lr * gp, &u);
            shared.input.add(center, -lr, &g_u);
            pairs += 1;
        }
    }
    (loss_sum, pairs)
}

/// Upper bound on the pairs scored after every epoch.
const PROBE_PAIRS: u64 = 100_000;

/// Fixed (center, context, negatives) pairs scored with frozen vectors.
/// The running loss is optimistic while the learning rate is high, since
/// later pairs of a long sentence profit from updates made on earlier ones.
struct Probe {
    pairs: Vec<(usize, usize)>,
    negatives: Vec<usize>,
}

impl Probe {
    fn new(encoded: &[Vec<usize>], per_epoch: u64, cfg: &SgnsConfig, sampler: &NegativeSampler) -> Self {
        let keep = (PROBE_PAIRS as f64 / per_epoch as f64).min(1.0);
        let mut r = rng::stream(cfg.seed, "sgns-probe", 0);
        let mut pairs = Vec::new();
        let mut negatives = Vec::new();
        for s in encoded {
            for (ci, oi) in context_pairs(s.len(), cfg.window) {
                if keep < 1.0 && r.random::<f64>() >= keep {
                    continue;
                }
                pairs.push((s[ci], s[oi]));
                negatives.extend((0..cfg.negatives).map(|_| sampler.sample_excluding(s[oi], &mut r)));
            }
        }
        Probe { pairs, negatives }
    }

    fn loss(&self, shared: &Shared) -> f64 {
        let d = shared.cfg.dim;
        let k = shared.cfg.negatives;
        let (mut u, mut v) = (vec![0.0; d], vec![0.0; d]);
        let mut total = 0.0;
        for (i, &(c, o)) in self.pairs.iter().enumerate() {
            shared.input.read(c, &mut u);
            shared.output.read(o, &mut v);
            total += softplus(-dot(&u, &v));
            for &n in &self.negatives[i * k..(i + 1) * k] {
                shared.output.read(n, &mut v);
                total += softplus(dot(&u, &v));
            }
        }
        total / self.pairs.len().max(1) as f64
    }
}

// Corpora arrive grouped by entity; visiting them in a fixed block order
// lets later blocks undo earlier ones, so each epoch walks a fresh order.
fn shuffle_epoch(sentences: &mut [Vec<usize>], seed: u64, epoch: usize) {
    sentences.shuffle(&mut rng::stream(seed, "sgns-order", epoch as u64));
}

/// Trains SGNS vectors on `sentences`.
pub fn train(sentences: &[Sentence], cfg: &SgnsConfig) -> Result<SgnsModel, SgnsError> {
    cfg.validate()?;
    let rendered: Vec<Vec<String>> = sentences
        .iter()
        .map(|s| s.iter().map(ToString::to_string).collect())
        .collect();
    train_tokens(&rendered, cfg)
}

/// [`train`] over already-rendered token strings.
pub fn train_tokens(sentences: &[Vec<String>], cfg: &SgnsConfig) -> Result<SgnsModel, SgnsError> {
    cfg.validate()?;
    let vocab = build_vocab(sentences.iter().map(|s| s.iter().map(String::as_str)), cfg.min_count)?;
    let sampler = NegativeSampler::new(&vocab, cfg.power)?;
    let mut encoded: Vec<Vec<usize>> = sentences
        .iter()
        .map(|s| s.iter().filter_map(|t| vocab.index(t)).collect::<Vec<_>>())
        .filter(|s| s.len() >= 2)
        .collect();
    let per_epoch: u64 = encoded.iter().map(|s| pair_count(s.len(), cfg.window)).sum();
    if per_epoch == 0 {
        return Err(SgnsError::EmptyCorpus);
    }

    let d = cfg.dim;
    let mut init = rng::stream(cfg.seed, "sgns-init", 0);
    let bound = 0.5 / d as f64;
    let input: Vec<f64> = (0..vocab.len() * d)
        .map(|_| init.random_range(-bound..bound))
        .collect();
    let keep_prob = cfg.subsample.map(|t| {
        let total = vocab.total() as f64;
        (0..vocab.len())
            .map(|i| {
                let f = vocab.frequency(i) as f64 / total;
                ((f / t).sqrt() + 1.0) * t / f
            })
            .collect()
    });
    let probe = Probe::new(&encoded, per_epoch, cfg, &sampler);
    let shared = Shared {
        input: SharedMatrix::from_values(&input, d),
        output: SharedMatrix::from_values(&vec![0.0; vocab.len() * d], d),
        sampler,
        cfg,
        processed: AtomicU64::new(0),
        total_pairs: per_epoch * cfg.epochs as u64,
        keep_prob,
    };

    let workers = cfg.workers.min(encoded.len()).max(1);
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let mut train_losses = Vec::with_capacity(cfg.epochs);
    if workers == 1 {
        let mut r = rng::stream(cfg.seed, "sgns", 0);
        for epoch in 0..cfg.epochs {
            shuffle_epoch(&mut encoded, cfg.seed, epoch);
            let (loss, pairs) = run_slice(&shared, &encoded, &mut r);
            train_losses.push(loss / pairs.max(1) as f64);
            epoch_losses.push(probe.loss(&shared));
        }
    } else {
        let chunk = encoded.len().div_ceil(workers);
        let mut rngs: Vec<rng::Rng> = (0..workers)
            .map(|w| rng::stream(cfg.seed, "sgns", w as u64))
            .collect();
        for epoch in 0..cfg.epochs {
            shuffle_epoch(&mut encoded, cfg.seed, epoch);
            let results: Vec<(f64, u64)> = std::thread::scope(|scope| {
                let handles: Vec<_> = encoded
                    .chunks(chunk)
                    .zip(rngs.iter_mut())
                    .map(|(part, r)| {
                        let shared = &shared;
                        scope.spawn(move || run_slice(shared, part, r))
                    })
                    .collect();
                handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
            });
            let (loss, pairs) = results
                .iter()
                .fold((0.0, 0u64), |(l, p), (a, b)| (l + a, p + b));
            train_losses.push(loss / pairs.max(1) as f64);
            epoch_losses.push(probe.loss(&shared));
        }
    }
    if let Some(bad) = epoch_losses.iter().chain(&train_losses).position(|l| !l.is_finite()) {
        return Err(SgnsError::NonFinite(format!("loss at epoch {}", bad + 1)));
    }

    let Shared { input, output, .. } = shared;
    let input = input.into_values();
    let context = output.into_values();
    let store = EmbeddingStore::new(vocab.tokens().map(str::to_string).collect(), d, input)?;
    Ok(SgnsModel {
        vocab,
        store,
        context,
        epoch_losses,
        train_losses,
    })
}
