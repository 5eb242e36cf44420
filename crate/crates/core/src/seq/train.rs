use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::lstm::{embed, forward, select, window_loss, Layout, Window};
use super::{Catalog, FrozenTable, MovieRecord, SeqConfig, SeqError, Variant};
use crate::linalg::cosine;
use crate::rng;

/// Movies of one director split chronologically.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectorSplit {
    pub director: String,
    pub train: Vec<usize>,
    pub valid: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub splits: Vec<DirectorSplit>,
}

/// A window over catalog movie indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawWindow {
    pub director: String,
    pub inputs: Vec<usize>,
    pub target: usize,
    pub negatives: Vec<Vec<usize>>,
}

/// Inputs per window; the target makes five movies.
const INPUTS: usize = 4;

/// Per-director chronological split of directors with at least
/// `min_movies` movies: the last `max(1, n/10)` movies are test, the
/// `n/10` before them validation, the rest training.
pub fn make_dataset(catalog: &Catalog, min_movies: usize) -> Result<Dataset, SeqError> {
    let mut splits = Vec::new();
    for d in catalog.directors() {
        let seq = catalog.sequence(d);
        let n = seq.len();
        if n < min_movies.max(INPUTS + 2) {
            continue;
        }
        let n_test = (n / 10).max(1);
        let n_valid = n / 10;
        let n_train = n - n_test - n_valid;
        splits.push(DirectorSplit {
            director: d.to_string(),
            train: seq[..n_train].to_vec(),
            valid: seq[n_train..n_train + n_valid].to_vec(),
            test: seq[n_train + n_valid..].to_vec(),
        });
    }
    if splits.is_empty() {
        return Err(SeqError::NoEligibleDirectors(min_movies));
    }
    Ok(Dataset { splits })
}

fn negatives_for(catalog: &Catalog, director: &str, k: usize, r: &mut rng::Rng) -> Result<Vec<usize>, SeqError> {
    let n = catalog.movies.len();
    let mut out = Vec::with_capacity(k);
    let mut tries = 0;
    while out.len() < k {
        tries += 1;
        if tries > 100 * k + 10_000 {
            return Err(SeqError::MissingData(format!("no movies outside `{director}` to sample")));
        }
        let m = r.random_range(0..n);
        if !catalog.directors_of(m).contains(director) {
            out.push(m);
        }
    }
    Ok(out)
}

fn negative_sets(
    catalog: &Catalog,
    director: &str,
    k: usize,
    per_step: bool,
    r: &mut rng::Rng,
) -> Result<Vec<Vec<usize>>, SeqError> {
    let sets = if per_step { INPUTS } else { 1 };
    (0..sets).map(|_| negatives_for(catalog, director, k, r)).collect()
}

impl Dataset {
    /// `max(1, |train| / 5)` windows per director, each five distinct train
    /// movies in chronological order: four inputs, then the target.
    pub fn train_windows(
        &self,
        catalog: &Catalog,
        negatives: usize,
        per_step: bool,
        r: &mut rng::Rng,
    ) -> Result<Vec<RawWindow>, SeqError> {
        let mut out = Vec::new();
        for s in &self.splits {
            let reps = (s.train.len() / (INPUTS + 1)).max(1);
            for _ in 0..reps {
                let mut pick: Vec<usize> = sample(r, s.train.len(), INPUTS + 1).into_vec();
                pick.sort_unstable();
                let movies: Vec<usize> = pick.iter().map(|&i| s.train[i]).collect();
                out.push(RawWindow {
                    director: s.director.clone(),
                    inputs: movies[..INPUTS].to_vec(),
                    target: movies[INPUTS],
                    negatives: negative_sets(catalog, &s.director, negatives, per_step, r)?,
                });
            }
        }
        Ok(out)
    }

    /// One window per held-out movie: its four chronological predecessors
    /// as inputs.
    pub fn held_out_windows(
        &self,
        catalog: &Catalog,
        test: bool,
        negatives: usize,
        per_step: bool,
        r: &mut rng::Rng,
    ) -> Result<Vec<RawWindow>, SeqError> {
        let mut out = Vec::new();
        for s in &self.splits {
            let all: Vec<usize> = s.train.iter().chain(&s.valid).chain(&s.test).copied().collect();
            let start = s.train.len() + if test { s.valid.len() } else { 0 };
            let targets = if test { &s.test } else { &s.valid };
            for (j, &m) in targets.iter().enumerate() {
                let pos = start + j;
                out.push(RawWindow {
                    director: s.director.clone(),
                    inputs: all[pos - INPUTS..pos].to_vec(),
                    target: m,
                    negatives: negative_sets(catalog, &s.director, negatives, per_step, r)?,
                });
            }
        }
        Ok(out)
    }
}

/// Draws the per-movie component choices of a raw window.
pub fn materialize(
    w: &RawWindow,
    catalog: &Catalog,
    table: &FrozenTable,
    variant: Variant,
    r: &mut rng::Rng,
) -> Window {
    let mut pick = |m: usize| select(&catalog.movies[m], catalog, table, variant, r);
    Window {
        inputs: w.inputs.iter().map(|&m| pick(m)).collect(),
        target: pick(w.target),
        negatives: w.negatives.iter().map(|set| set.iter().map(|&m| pick(m)).collect()).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    /// Frozen-model loss on training windows drawn once before the first epoch.
    pub train_loss: f64,
    /// Running mean over the epoch's minibatch updates.
    pub running_loss: f64,
    pub valid_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
    /// Epoch (0-based) whose parameters were kept.
    pub best_epoch: usize,
    pub stopped_early: bool,
    pub test_loss: Option<f64>,
}

/// Trained recurrent model together with its frozen token table.
#[derive(Debug, Clone, PartialEq)]
pub struct SeqModel {
    pub variant: Variant,
    pub layout: Layout,
    pub params: Vec<f64>,
    pub table: FrozenTable,
}

/// Windows per parallel gradient chunk; chunk sums are reduced in order,
/// so results do not depend on the thread count.
const CHUNK: usize = 16;

fn batch_loss(
    params: &[f64],
    l: &Layout,
    table: &FrozenTable,
    windows: &[Window],
    joint: bool,
    grad: Option<&mut [f64]>,
) -> Result<f64, SeqError> {
    let with_grad = grad.is_some();
    let parts: Vec<(f64, Vec<f64>)> = windows
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut g = if with_grad { vec![0.0; l.len()] } else { Vec::new() };
            let mut loss = 0.0;
            for w in chunk {
                loss += window_loss(params, l, table, w, joint, with_grad.then_some(g.as_mut_slice()))?;
            }
            Ok((loss, g))
        })
        .collect::<Result<_, SeqError>>()?;
    let mut total = 0.0;
    if let Some(grad) = grad {
        for (loss, g) in parts {
            total += loss;
            for (a, b) in grad.iter_mut().zip(g) {
                *a += b;
            }
        }
    } else {
        total = parts.iter().map(|p| p.0).sum();
    }
    Ok(total)
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn step(&mut self, params: &mut [f64], grad: &[f64], cfg: &SeqConfig) {
        self.t += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.t);
        let c2 = 1.0 - cfg.beta2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = cfg.beta1 * self.m[i] + (1.0 - cfg.beta1) * grad[i];
            self.v[i] = cfg.beta2 * self.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
            params[i] -= cfg.lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + cfg.eps);
        }
    }
}

fn mean(total: f64, n: usize) -> f64 {
    total / n.max(1) as f64
}

/// Minibatch Adam on the variant's loss with early stopping on validation
/// loss. The token table is never updated.
pub fn train(
    dataset: &Dataset,
    catalog: &Catalog,
    table: &FrozenTable,
    cfg: &SeqConfig,
) -> Result<(SeqModel, TrainReport), SeqError> {
    cfg.validate()?;
    let d = table.dim;
    let layout = Layout::new(d, cfg.hidden.unwrap_or(d), cfg.variant);
    let joint = cfg.variant.joint_loss();
    let per_step = cfg.resample_negatives;
    let mut params = layout.init(cfg.seed);

    let mut hr = rng::stream(cfg.seed, "seq-heldout", 0);
    let valid_raw = dataset.held_out_windows(catalog, false, cfg.negatives, per_step, &mut hr)?;
    let test_raw = dataset.held_out_windows(catalog, true, cfg.negatives, per_step, &mut hr)?;
    let valid: Vec<Window> = valid_raw
        .iter()
        .map(|w| materialize(w, catalog, table, cfg.variant, &mut hr))
        .collect();
    let test: Vec<Window> = test_raw
        .iter()
        .map(|w| materialize(w, catalog, table, cfg.variant, &mut hr))
        .collect();

    // fixed training windows, so successive epochs are scored on the same sample
    let mut pr = rng::stream(cfg.seed, "seq-probe", 0);
    let probe_raw = dataset.train_windows(catalog, cfg.negatives, per_step, &mut pr)?;
    let probe: Vec<Window> = probe_raw
        .iter()
        .map(|w| materialize(w, catalog, table, cfg.variant, &mut pr))
        .collect();

    let mut adam = Adam {
        m: vec![0.0; layout.len()],
        v: vec![0.0; layout.len()],
        t: 0,
    };
    let mut epochs = Vec::new();
    let mut best = (f64::INFINITY, 0usize, params.clone());
    let mut bad = 0;
    let mut stopped_early = false;
    for epoch in 0..cfg.epochs {
        let mut r = rng::stream(cfg.seed, "seq-epoch", epoch as u64);
        let raw = dataset.train_windows(catalog, cfg.negatives, per_step, &mut r)?;
        let mut windows: Vec<Window> = raw
            .iter()
            .map(|w| materialize(w, catalog, table, cfg.variant, &mut r))
            .collect();
        windows.shuffle(&mut r);
        let mut total = 0.0;
        for batch in windows.chunks(cfg.batch) {
            let mut grad = vec![0.0; layout.len()];
            total += batch_loss(&params, &layout, table, batch, joint, Some(&mut grad))?;
            let scale = 1.0 / batch.len() as f64;
            grad.iter_mut().for_each(|g| *g *= scale);
            if grad.iter().any(|g| !g.is_finite()) {
                return Err(SeqError::NonFinite(format!("gradient at epoch {}", epoch + 1)));
            }
            adam.step(&mut params, &grad, cfg);
        }
        let running_loss = mean(total, windows.len());
        let train_loss = mean(batch_loss(&params, &layout, table, &probe, joint, None)?, probe.len());
        if !(train_loss.is_finite() && running_loss.is_finite()) {
            return Err(SeqError::NonFinite(format!("loss at epoch {}", epoch + 1)));
        }
        let valid_loss = if valid.is_empty() {
            None
        } else {
            Some(mean(batch_loss(&params, &layout, table, &valid, joint, None)?, valid.len()))
        };
        epochs.push(EpochStats {
            train_loss,
            running_loss,
            valid_loss,
        });
        match valid_loss {
            Some(v) if v < best.0 => {
                best = (v, epoch, params.clone());
                bad = 0;
            }
            Some(_) => {
                bad += 1;
                if bad >= cfg.patience {
                    stopped_early = true;
                    break;
                }
            }
            None => best = (f64::INFINITY, epoch, params.clone()),
        }
    }
    let (_, best_epoch, params) = best;
    let test_loss = if test.is_empty() {
        None
    } else {
        Some(mean(batch_loss(&params, &layout, table, &test, joint, None)?, test.len()))
    };
    Ok((
        SeqModel {
            variant: cfg.variant,
            layout,
            params,
            table: table.clone(),
        },
        TrainReport {
            epochs,
            best_epoch,
            stopped_early,
            test_loss,
        },
    ))
}

impl SeqModel {
    pub fn movie_embedding(&self, movie: &MovieRecord, catalog: &Catalog, r: &mut rng::Rng) -> Vec<f64> {
        let s = select(movie, catalog, &self.table, self.variant, r);
        embed(&s, &self.table, &self.params, &self.layout)
    }

    /// Final projected state over `movies` in the given order.
    pub fn embed_sequence(&self, movies: &[&MovieRecord], catalog: &Catalog, r: &mut rng::Rng) -> Option<Vec<f64>> {
        if movies.is_empty() {
            return None;
        }
        let xs: Vec<Vec<f64>> = movies.iter().map(|m| self.movie_embedding(m, catalog, r)).collect();
        forward(&self.params, &self.layout, &xs).pop().map(|s| s.y)
    }

    /// Director embedding over the full chronological sequence.
    pub fn director_embedding(&self, director: &str, catalog: &Catalog, r: &mut rng::Rng) -> Option<Vec<f64>> {
        let movies: Vec<&MovieRecord> = catalog.sequence(director).iter().map(|&i| &catalog.movies[i]).collect();
        self.embed_sequence(&movies, catalog, r)
    }

    /// Director embedding from movies with year in `[cutoff - window, cutoff)`.
    pub fn time_sensitive_embed(
        &self,
        director: &str,
        cutoff: i64,
        window_years: i64,
        catalog: &Catalog,
        r: &mut rng::Rng,
    ) -> Result<Vec<f64>, SeqError> {
        let from = cutoff - window_years;
        let movies: Vec<&MovieRecord> = catalog
            .sequence(director)
            .iter()
            .map(|&i| &catalog.movies[i])
            .filter(|m| m.year >= from && m.year < cutoff)
            .collect();
        self.embed_sequence(&movies, catalog, r)
            .ok_or_else(|| SeqError::NoQualifyingMovies {
                director: director.to_string(),
                from,
                cutoff,
            })
    }

    /// Cosine between a director embedding and a movie embedding.
    pub fn score(director: &[f64], movie: &[f64]) -> f64 {
        cosine(director, movie)
    }
}
