//! Column-pair knowledge graphs and TransH.
//!
//! Every ordered pair of distinct non-null cells `(i, j)` in a view row
//! becomes a triple `(token_i, "<col_i>_<col_j>", token_j)`, with column
//! names qualified as `table.column`.
//!
//! TransH scores a triple by projecting head and tail onto the relation's
//! hyperplane (unit normal `w`) and translating by `d`:
//! `|h_p + d - t_p|^2` with `x_p = x - (w.x) w`. Lower is more plausible.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::io::{BufRead, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{cell_token, CorpusError};
use crate::error::FormatError;
use crate::linalg::{cosine, dot, norm};
use crate::rng;
use crate::schema::DenormalizedView;
use crate::sgns::EmbeddingStore;

#[derive(Debug, Error)]
pub enum KgError {
    #[error("empty view")]
    EmptyView,
    #[error("empty triple store")]
    EmptyStore,
    #[error("corruption needs at least 2 entities, store has {0}")]
    TooFewEntities(usize),
    #[error("unknown entity `{0}`")]
    UnknownEntity(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Token(#[from] CorpusError),
}

/// Deduplicated triples over interned entities and relations.
/// Tab-separated epoch log with a header row.
pub fn epochs_tsv(reports: &[EpochReport]) -> String {
    let mut t = String::from("epoch\tmean_loss\ttrain_loss\tmax_normal_violation\tmax_entity_norm\n");
    for (i, r) in reports.iter().enumerate() {
        t += &format!(
            "{}\t{}\t{}\t{}\t{}\n",
            i + 1,
            r.mean_loss,
            r.train_loss,
            r.max_normal_violation,
            r.max_entity_norm
        );
    }
    t
}

#[derive(Debug, Clone, PartialEq)]
pub struct TripleStore {
    entities: Vec<String>,
    relations: Vec<String>,
    /// Sorted `(head, relation, tail)` indices.
    triples: Vec<(usize, usize, usize)>,
    set: HashSet<(usize, usize, usize)>,
}

impl TripleStore {
    /// Builds a store from string triples; entities and relations are
    /// interned in sorted order and duplicates dropped.
    pub fn from_triples<I, S>(triples: I) -> Self
    where
        I: IntoIterator<Item = (S, S, S)>,
        S: Into<String>,
    {
        let raw: BTreeSet<(String, String, String)> = triples
            .into_iter()
            .map(|(h, r, t)| (h.into(), r.into(), t.into()))
            .collect();
        let entities: Vec<String> = raw
            .iter()
            .flat_map(|(h, _, t)| [h.clone(), t.clone()])
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let relations: Vec<String> = raw
            .iter()
            .map(|(_, r, _)| r.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let ei: HashMap<&str, usize> = entities.iter().enumerate().map(|(i, e)| (e.as_str(), i)).collect();
        let ri: HashMap<&str, usize> = relations.iter().enumerate().map(|(i, r)| (r.as_str(), i)).collect();
        let mut idx: Vec<(usize, usize, usize)> = raw
            .iter()
            .map(|(h, r, t)| (ei[h.as_str()], ri[r.as_str()], ei[t.as_str()]))
            .collect();
        idx.sort_unstable();
        let set = idx.iter().copied().collect();
        TripleStore {
            entities,
            relations,
            triples: idx,
            set,
        }
    }

    pub fn entities(&self) -> &[String] {
        &self.entities
    }

    pub fn relations(&self) -> &[String] {
        &self.relations
    }

    pub fn triples(&self) -> &[(usize, usize, usize)] {
        &self.triples
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn contains(&self, t: (usize, usize, usize)) -> bool {
        self.set.contains(&t)
    }

    pub fn entity_index(&self, e: &str) -> Option<usize> {
        self.entities.binary_search_by(|x| x.as_str().cmp(e)).ok()
    }

    /// Triples as strings, in store order.
    pub fn named(&self) -> impl Iterator<Item = (&str, &str, &str)> {
        self.triples.iter().map(|&(h, r, t)| {
            (
                self.entities[h].as_str(),
                self.relations[r].as_str(),
                self.entities[t].as_str(),
            )
        })
    }

    /// `head<TAB>relation<TAB>tail` per line.
    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for (h, r, t) in self.named() {
            writeln!(w, "{h}\t{r}\t{t}")?;
        }
        w.flush()
    }

    pub fn read_from<R: BufRead>(reader: R) -> crate::Result<Self> {
        let mut raw = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| crate::Error::io("<triples>", e))?;
            if line.is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split('\t').collect();
            if parts.len() != 3 || parts.iter().any(|p| p.is_empty()) {
                return Err(FormatError::Line {
                    what: "triples file",
                    line: i + 1,
                    message: "expected head<TAB>relation<TAB>tail".into(),
                }
                .into());
            }
            raw.push((parts[0].to_string(), parts[1].to_string(), parts[2].to_string()));
        }
        Ok(TripleStore::from_triples(raw))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> crate::Result<()> {
        let path = path.as_ref();
        let f = std::fs::File::create(path).map_err(|e| crate::Error::io(path, e))?;
        self.write_to(std::io::BufWriter::new(f))
            .map_err(|e| crate::Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> crate::Result<Self> {
        let path = path.as_ref();
        let f = std::fs::File::open(path).map_err(|e| crate::Error::io(path, e))?;
        Self::read_from(std::io::BufReader::new(f))
    }
}

/// Compiles every row of the view into column-pair triples.
pub fn build_kg(view: &DenormalizedView) -> Result<TripleStore, KgError> {
    if view.is_empty() {
        return Err(KgError::EmptyView);
    }
    let names: Vec<String> = view.columns.iter().map(|c| c.qualified()).collect();
    let per_row: Vec<Vec<(String, String, String)>> = view
        .rows
        .par_iter()
        .map(|row| {
            let mut cells = Vec::new();
            for (ci, cell) in row.iter().enumerate() {
                if let Some(v) = cell {
                    cells.push((ci, cell_token(&view.columns[ci].spec, v)?.to_string()));
                }
            }
            let mut out = Vec::with_capacity(cells.len() * cells.len().saturating_sub(1));
            for (i, a) in &cells {
                for (j, b) in &cells {
                    if i != j {
                        out.push((a.clone(), format!("{}_{}", names[*i], names[*j]), b.clone()));
                    }
                }
            }
            Ok(out)
        })
        .collect::<Result<_, CorpusError>>()?;
    Ok(TripleStore::from_triples(per_row.into_iter().flatten()))
}

/// `x - (w.x) w`
fn project(x: &[f64], w: &[f64]) -> Vec<f64> {
    let c = dot(w, x);
    x.iter().zip(w).map(|(xi, wi)| xi - c * wi).collect()
}

/// `|h_p + d - t_p|^2` with projections onto the plane with normal `w`.
pub fn transh_score(h: &[f64], d: &[f64], w: &[f64], t: &[f64]) -> Result<f64, KgError> {
    if [h, d, w, t].iter().any(|v| v.iter().any(|x| !x.is_finite())) {
        return Err(KgError::NonFinite("score input".into()));
    }
    let hp = project(h, w);
    let tp = project(t, w);
    Ok(hp
        .iter()
        .zip(d)
        .zip(&tp)
        .map(|((a, b), c)| {
            let r = a + b - c;
            r * r
        })
        .sum())
}

pub fn margin_loss(pos: f64, neg: f64, margin: f64) -> f64 {
    (pos + margin - neg).max(0.0)
}

/// Gradients of [`transh_score`] with respect to each argument.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreGrads {
    pub h: Vec<f64>,
    pub d: Vec<f64>,
    pub w: Vec<f64>,
    pub t: Vec<f64>,
}

/// Score and gradients. With `e = h - t`, `c = w.e` and `r = e - c w + d`:
/// `ds/dh = 2 (r - (w.r) w)`, `ds/dt = -ds/dh`, `ds/dd = 2 r`,
/// `ds/dw = -2 ((r.w) e + c r)`.
pub fn score_grads(h: &[f64], d: &[f64], w: &[f64], t: &[f64]) -> (f64, ScoreGrads) {
    let e: Vec<f64> = h.iter().zip(t).map(|(a, b)| a - b).collect();
    let c = dot(w, &e);
    let r: Vec<f64> = e.iter().zip(w).zip(d).map(|((ei, wi), di)| ei - c * wi + di).collect();
    let rw = dot(&r, w);
    let gh: Vec<f64> = r.iter().zip(w).map(|(ri, wi)| 2.0 * (ri - rw * wi)).collect();
    let gt = gh.iter().map(|x| -x).collect();
    let gd = r.iter().map(|x| 2.0 * x).collect();
    let gw = e.iter().zip(&r).map(|(ei, ri)| -2.0 * (rw * ei + c * ri)).collect();
    (
        dot(&r, &r),
        ScoreGrads {
            h: gh,
            d: gd,
            w: gw,
            t: gt,
        },
    )
}

/// Replaces head or tail (fair coin) with a uniform entity, retrying up to
/// 100 times to avoid a triple already in the store.
pub fn corrupt(
    triple: (usize, usize, usize),
    store: &TripleStore,
    r: &mut rng::Rng,
) -> Result<(usize, usize, usize), KgError> {
    let n = store.entities.len();
    if n < 2 {
        return Err(KgError::TooFewEntities(n));
    }
    let (h, rel, t) = triple;
    let head = r.random::<bool>();
    let mut candidate = triple;
    for _ in 0..100 {
        let e = r.random_range(0..n);
        candidate = if head { (e, rel, t) } else { (h, rel, e) };
        if !store.contains(candidate) {
            break;
        }
    }
    Ok(candidate)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TransHConfig {
    pub dim: usize,
    pub epochs: usize,
    pub lr: f64,
    pub margin: f64,
    pub seed: u64,
}

impl Default for TransHConfig {
    fn default() -> Self {
        TransHConfig {
            dim: 50,
            epochs: 1000,
            lr: 0.001,
            margin: 1.0,
            seed: 0,
        }
    }
}

impl TransHConfig {
    pub fn validate(&self) -> Result<(), KgError> {
        let bad = |m: &str| Err(KgError::InvalidConfig(m.into()));
        if self.dim == 0 {
            return bad("dim must be >= 1");
        }
        if !(self.margin > 0.0 && self.margin.is_finite()) {
            return bad("margin must be positive");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr must be positive");
        }
        Ok(())
    }
}

/// Per-epoch training record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    /// Frozen-model margin loss on a fixed probe of corrupted pairs.
    pub mean_loss: f64,
    /// Running margin loss seen during the epoch's updates.
    pub train_loss: f64,
    /// `max | |w_r| - 1 |` after the epoch.
    pub max_normal_violation: f64,
    /// `max |e|` after the epoch.
    pub max_entity_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransHModel {
    pub dim: usize,
    pub entities: Vec<String>,
    pub relations: Vec<String>,
    /// Row-major, one row per entity.
    pub entity_vecs: Vec<f64>,
    /// Row-major translations `d_r`.
    pub translations: Vec<f64>,
    /// Row-major unit normals `w_r`.
    pub normals: Vec<f64>,
}

fn row(m: &[f64], i: usize, d: usize) -> &[f64] {
    &m[i * d..(i + 1) * d]
}

fn row_mut(m: &mut [f64], i: usize, d: usize) -> &mut [f64] {
    &mut m[i * d..(i + 1) * d]
}

fn clip_unit(v: &mut [f64]) {
    let n = norm(v);
    if n > 1.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

fn normalize(v: &mut [f64]) {
    let n = norm(v);
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    } else if let Some(first) = v.first_mut() {
        *first = 1.0;
    }
}

impl TransHModel {
    fn entity(&self, i: usize) -> &[f64] {
        row(&self.entity_vecs, i, self.dim)
    }

    pub fn entity_vector(&self, e: &str) -> Option<&[f64]> {
        self.entities
            .binary_search_by(|x| x.as_str().cmp(e))
            .ok()
            .map(|i| self.entity(i))
    }

    pub fn score(&self, (h, r, t): (usize, usize, usize)) -> f64 {
        let d = self.dim;
        transh_score(
            self.entity(h),
            row(&self.translations, r, d),
            row(&self.normals, r, d),
            self.entity(t),
        )
        .unwrap_or(f64::INFINITY)
    }

    /// Normalizes `w_r`, projects `d_r` onto its plane and clips `e`.
    fn project_relation(&mut self, r: usize) {
        let d = self.dim;
        let w = row_mut(&mut self.normals, r, d);
        normalize(w);
        let w = row(&self.normals, r, d).to_vec();
        let dr = row_mut(&mut self.translations, r, d);
        let c = dot(&w, dr);
        dr.iter_mut().zip(&w).for_each(|(x, wi)| *x -= c * wi);
    }

    fn project_all(&mut self) {
        for r in 0..self.relations.len() {
            self.project_relation(r);
        }
        for e in 0..self.entities.len() {
            clip_unit(row_mut(&mut self.entity_vecs, e, self.dim));
        }
    }

    pub fn constraint_violations(&self) -> (f64, f64) {
        let d = self.dim;
        let wv = (0..self.relations.len())
            .map(|r| (norm(row(&self.normals, r, d)) - 1.0).abs())
            .fold(0.0, f64::max);
        let en = (0..self.entities.len())
            .map(|e| norm(self.entity(e)))
            .fold(0.0, f64::max);
        (wv, en)
    }

    pub fn entity_store(&self) -> Result<EmbeddingStore, KgError> {
        EmbeddingStore::new(self.entities.clone(), self.dim, self.entity_vecs.clone())
            .map_err(|e| KgError::InvalidConfig(e.to_string()))
    }

    /// Relation rows `d_r` followed by `w_r`.
    pub fn relation_store(&self) -> Result<EmbeddingStore, KgError> {
        let d = self.dim;
        let mut v = Vec::with_capacity(self.relations.len() * 2 * d);
        for r in 0..self.relations.len() {
            v.extend_from_slice(row(&self.translations, r, d));
            v.extend_from_slice(row(&self.normals, r, d));
        }
        EmbeddingStore::new(self.relations.clone(), 2 * d, v).map_err(|e| KgError::InvalidConfig(e.to_string()))
    }

    pub fn save(&self, entities: impl AsRef<Path>, relations: impl AsRef<Path>) -> crate::Result<()> {
        self.entity_store()?.save(entities)?;
        self.relation_store()?.save(relations)
    }

    pub fn load(entities: impl AsRef<Path>, relations: impl AsRef<Path>) -> crate::Result<Self> {
        let es = EmbeddingStore::load(entities)?;
        let rs = EmbeddingStore::load(relations)?;
        Self::from_stores(&es, &rs)
    }

    pub fn from_stores(es: &EmbeddingStore, rs: &EmbeddingStore) -> crate::Result<Self> {
        let d = es.dim();
        if rs.dim() != 2 * d {
            return Err(KgError::InvalidConfig(format!(
                "relation rows have {} values, expected {}",
                rs.dim(),
                2 * d
            ))
            .into());
        }
        let mut entities: Vec<(String, Vec<f64>)> = es
            .tokens()
            .iter()
            .map(|t| (t.clone(), es.vector(t).expect("own token").to_vec()))
            .collect();
        entities.sort_by(|a, b| a.0.cmp(&b.0));
        let mut relations: Vec<(String, Vec<f64>)> = rs
            .tokens()
            .iter()
            .map(|t| (t.clone(), rs.vector(t).expect("own token").to_vec()))
            .collect();
        relations.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(TransHModel {
            dim: d,
            entity_vecs: entities.iter().flat_map(|(_, v)| v.iter().copied()).collect(),
            entities: entities.into_iter().map(|(t, _)| t).collect(),
            translations: relations.iter().flat_map(|(_, v)| v[..d].iter().copied()).collect(),
            normals: relations.iter().flat_map(|(_, v)| v[d..].iter().copied()).collect(),
            relations: relations.into_iter().map(|(t, _)| t).collect(),
        })
    }
}

/// Cosine between two entity vectors.
pub fn entity_cosine(model: &TransHModel, a: &str, b: &str) -> Result<f64, KgError> {
    let va = model.entity_vector(a).ok_or_else(|| KgError::UnknownEntity(a.into()))?;
    let vb = model.entity_vector(b).ok_or_else(|| KgError::UnknownEntity(b.into()))?;
    Ok(cosine(va, vb))
}

/// Fresh model: uniform(-6/sqrt(d), 6/sqrt(d)) then constraint projection.
pub fn init_model(store: &TripleStore, dim: usize, seed: u64) -> TransHModel {
    let mut r = rng::stream(seed, "transh-init", 0);
    let bound = 6.0 / (dim as f64).sqrt();
    let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| r.random_range(-bound..bound)).collect() };
    let entity_vecs = draw(store.entities.len() * dim);
    let translations = draw(store.relations.len() * dim);
    let normals = draw(store.relations.len() * dim);
    let mut m = TransHModel {
        dim,
        entities: store.entities.clone(),
        relations: store.relations.clone(),
        entity_vecs,
        translations,
        normals,
    };
    m.project_all();
    m
}

/// One SGD step on the margin loss of a (positive, corrupted) pair.
/// Returns the loss before the step.
fn sgd_step(m: &mut TransHModel, pos: (usize, usize, usize), neg: (usize, usize, usize), margin: f64, lr: f64) -> f64 {
    let d = m.dim;
    let rel = pos.1;
    let (dr, wr) = (row(&m.translations, rel, d), row(&m.normals, rel, d));
    let (sp, gp) = score_grads(m.entity(pos.0), dr, wr, m.entity(pos.2));
    let (sn, gn) = score_grads(m.entity(neg.0), dr, wr, m.entity(neg.2));
    let loss = margin_loss(sp, sn, margin);
    if loss <= 0.0 {
        return 0.0;
    }
    let step = |dst: &mut [f64], g: &[f64], sign: f64| {
        dst.iter_mut().zip(g).for_each(|(x, gi)| *x -= lr * sign * gi);
    };
    step(row_mut(&mut m.translations, rel, d), &gp.d, 1.0);
    step(row_mut(&mut m.translations, rel, d), &gn.d, -1.0);
    step(row_mut(&mut m.normals, rel, d), &gp.w, 1.0);
    step(row_mut(&mut m.normals, rel, d), &gn.w, -1.0);
    step(row_mut(&mut m.entity_vecs, pos.0, d), &gp.h, 1.0);
    step(row_mut(&mut m.entity_vecs, pos.2, d), &gp.t, 1.0);
    step(row_mut(&mut m.entity_vecs, neg.0, d), &gn.h, -1.0);
    step(row_mut(&mut m.entity_vecs, neg.2, d), &gn.t, -1.0);
    m.project_relation(rel);
    for e in [pos.0, pos.2, neg.0, neg.2] {
        clip_unit(row_mut(&mut m.entity_vecs, e, d));
    }
    loss
}

/// Upper bound on the corrupted pairs scored after every epoch.
const PROBE_PAIRS: usize = 100_000;

type ProbePair = ((usize, usize, usize), (usize, usize, usize));

/// Fixed (positive, corrupted) pairs, so epochs are scored on the same sample.
fn probe_pairs(store: &TripleStore, seed: u64) -> Result<Vec<ProbePair>, KgError> {
    let mut r = rng::stream(seed, "transh-probe", 0);
    let n = store.len();
    let copies = (PROBE_PAIRS / n).clamp(1, 10);
    let keep = (PROBE_PAIRS as f64 / n as f64).min(1.0);
    let mut out = Vec::new();
    for &pos in &store.triples {
        if keep < 1.0 && r.random::<f64>() >= keep {
            continue;
        }
        for _ in 0..copies {
            out.push((pos, corrupt(pos, store, &mut r)?));
        }
    }
    Ok(out)
}

fn probe_loss(m: &TransHModel, probe: &[ProbePair], margin: f64) -> f64 {
    let d = m.dim;
    let score = |t: (usize, usize, usize)| {
        // non-finite parameters surface as a NaN loss
        transh_score(m.entity(t.0), row(&m.translations, t.1, d), row(&m.normals, t.1, d), m.entity(t.2))
            .unwrap_or(f64::NAN)
    };
    let total: f64 = probe.iter().map(|&(p, n)| margin_loss(score(p), score(n), margin)).sum();
    total / probe.len().max(1) as f64
}

/// Trains TransH; `on_epoch` sees each epoch's report as it completes.
pub fn train_transh_with<F>(store: &TripleStore, cfg: &TransHConfig, mut on_epoch: F) -> Result<TransHModel, KgError>
where
    F: FnMut(usize, &EpochReport),
{
    cfg.validate()?;
    if store.is_empty() {
        return Err(KgError::EmptyStore);
    }
    if store.entities.len() < 2 {
        return Err(KgError::TooFewEntities(store.entities.len()));
    }
    let mut m = init_model(store, cfg.dim, cfg.seed);
    let mut r = rng::stream(cfg.seed, "transh", 0);
    let mut order: Vec<usize> = (0..store.len()).collect();
    let probe = probe_pairs(store, cfg.seed)?;
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut r);
        let mut total = 0.0;
        for &i in &order {
            let pos = store.triples[i];
            let neg = corrupt(pos, store, &mut r)?;
            total += sgd_step(&mut m, pos, neg, cfg.margin, cfg.lr);
        }
        let train_loss = total / store.len() as f64;
        let mean_loss = probe_loss(&m, &probe, cfg.margin);
        if !(mean_loss.is_finite() && train_loss.is_finite()) {
            return Err(KgError::NonFinite(format!("loss at epoch {}", epoch + 1)));
        }
        let (max_normal_violation, max_entity_norm) = m.constraint_violations();
        on_epoch(
            epoch,
            &EpochReport {
                mean_loss,
                train_loss,
                max_normal_violation,
                max_entity_norm,
            },
        );
    }
    if m.entity_vecs.iter().chain(&m.translations).chain(&m.normals).any(|x| !x.is_finite()) {
        return Err(KgError::NonFinite("model parameters".into()));
    }
    Ok(m)
}

/// Trains TransH and returns the model with its per-epoch reports.
pub fn train_transh(store: &TripleStore, cfg: &TransHConfig) -> Result<(TransHModel, Vec<EpochReport>), KgError> {
    let mut reports = Vec::with_capacity(cfg.epochs);
    let m = train_transh_with(store, cfg, |_, rep| reports.push(rep.clone()))?;
    Ok((m, reports))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{ColumnKind, ColumnSpec, Value, ViewColumn};

    fn view(rows: Vec<Vec<Option<&str>>>, cols: &[&str]) -> DenormalizedView {
        DenormalizedView {
            root: "t".into(),
            columns: cols
                .iter()
                .map(|c| ViewColumn {
                    table: "t".into(),
                    spec: ColumnSpec {
                        name: c.to_string(),
                        kind: ColumnKind::Categorical,
                        namespace: c.to_string(),
                        discretize: None,
                    },
                })
                .collect(),
            rows: rows
                .into_iter()
                .map(|r| r.into_iter().map(|c| c.map(|s| Value::Text(s.into()))).collect())
                .collect(),
        }
    }

    #[test]
    fn pair_row_gives_both_directions() {
        let kg = build_kg(&view(vec![vec![Some("a"), Some("b")]], &["i1", "j1"])).unwrap();
        let got: Vec<_> = kg.named().collect();
        assert_eq!(got, [("i1=a", "t.i1_t.j1", "j1=b"), ("j1=b", "t.j1_t.i1", "i1=a")]);
    }

    #[test]
    fn triple_counts() {
        let kg = build_kg(&view(vec![vec![Some("a"), Some("b"), Some("c")]], &["x", "y", "z"])).unwrap();
        assert_eq!(kg.len(), 6);
        let kg = build_kg(&view(vec![vec![Some("a"), None]], &["x", "y"])).unwrap();
        assert_eq!(kg.len(), 0);
        // duplicate rows collapse
        let kg = build_kg(&view(vec![vec![Some("a"), Some("b")]; 3], &["x", "y"])).unwrap();
        assert_eq!(kg.len(), 2);
    }

    #[test]
    fn score_examples() {
        assert_eq!(transh_score(&[0.3, 0.1], &[0.0, 0.0], &[0.0, 1.0], &[0.3, 0.1]).unwrap(), 0.0);
        assert_eq!(transh_score(&[1.0, 0.0], &[-1.0, 0.0], &[0.0, 1.0], &[0.0, 0.0]).unwrap(), 0.0);
        assert!(transh_score(&[f64::NAN], &[0.0], &[1.0], &[0.0]).is_err());
    }

    #[test]
    fn margin_examples() {
        assert_eq!(margin_loss(0.0, 2.0, 1.0), 0.0);
        assert_eq!(margin_loss(1.0, 1.0, 1.0), 1.0);
    }

    #[test]
    fn corrupt_avoids_store() {
        let s = TripleStore::from_triples([("a", "r", "b"), ("c", "r", "c")]);
        let mut r = rng::seeded(1);
        for _ in 0..200 {
            let c = corrupt(s.triples()[0], &s, &mut r).unwrap();
            assert!(!s.contains(c));
        }
    }

    #[test]
    fn triples_file_round_trip() {
        let s = TripleStore::from_triples([("a", "r", "b"), ("b", "q", "a")]);
        let mut buf = Vec::new();
        s.write_to(&mut buf).unwrap();
        assert_eq!(TripleStore::read_from(buf.as_slice()).unwrap(), s);
        assert!(TripleStore::read_from("a\tb\n".as_bytes()).is_err());
    }

    #[test]
    fn entity_cosine_cases() {
        let m = TransHModel {
            dim: 2,
            entities: vec!["a".into(), "b".into(), "c".into()],
            relations: vec![],
            entity_vecs: vec![1.0, 0.0, 0.0, 1.0, 0.6, 0.8],
            translations: vec![],
            normals: vec![],
        };
        assert_eq!(entity_cosine(&m, "a", "a").unwrap(), 1.0);
        assert_eq!(entity_cosine(&m, "a", "b").unwrap(), 0.0);
        assert!((entity_cosine(&m, "a", "c").unwrap() - 0.6).abs() < 1e-12);
        assert!(entity_cosine(&m, "a", "zz").is_err());
    }

    #[test]
    fn init_satisfies_constraints() {
        let s = TripleStore::from_triples([("a", "r", "b"), ("b", "r2", "c")]);
        let m = init_model(&s, 8, 3);
        let (wv, en) = m.constraint_violations();
        assert!(wv < 1e-12 && en <= 1.0 + 1e-12);
        for r in 0..m.relations.len() {
            assert!(dot(row(&m.normals, r, 8), row(&m.translations, r, 8)).abs() < 1e-12);
        }
    }
}
