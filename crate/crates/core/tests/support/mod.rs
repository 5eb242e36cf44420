//! Independent oracles shared by the integration and acceptance tests.
//!
//! Nothing here calls the code under test for the quantity being checked;
//! each oracle is the slow, obvious computation.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{Binomial, ChiSquared, ContinuousCDF, DiscreteCDF, StudentsT};

use relemb_core::corpus::cell_token;
use relemb_core::schema::synth::{generate_synthetic, SynthParams};
use relemb_core::schema::{Database, DenormalizedView, Schema};
use relemb_core::seq::{window_loss, FrozenTable, Layout, MovieSample, Variant, Window, PAD};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_vec(r: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| r.random_range(-scale..scale)).collect()
}

/// `|a - b| / max(|a|, |b|)` over whole vectors.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    let scale = na.max(nb);
    if scale < 1e-12 {
        diff
    } else {
        diff / scale
    }
}

/// Central differences of `f` at `x`.
pub fn central_diff(x: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut p = x.to_vec();
    (0..x.len())
        .map(|i| {
            p[i] = x[i] + h;
            let up = f(&p);
            p[i] = x[i] - h;
            let down = f(&p);
            p[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

// ---------- relational oracles ----------

/// A qualified-name -> rendered-value map; `None` cells are left out.
pub type CanonRow = BTreeMap<String, String>;

/// A small synthetic database with some rows removed at random so that
/// inner joins have something to drop.
pub fn random_database(seed: u64) -> (Schema, Database) {
    let mut r = rng(seed);
    let clusters = r.random_range(1..=3);
    let params = SynthParams {
        directors: r.random_range(clusters..=8),
        clusters,
        genres: r.random_range(clusters.max(2)..=5),
        genres_per_director: 2,
        min_movies: 1,
        max_movies: r.random_range(1..=3),
        actors: r.random_range(4..=10),
        min_cast: 1,
        max_cast: 3,
        null_rank_rate: 0.3,
        ..SynthParams::default()
    };
    let s = generate_synthetic(seed, &params).expect("feasible params");
    let mut db = s.database;
    for rows in db.tables.values_mut() {
        let drop_rate = r.random_range(0.0..0.3);
        rows.retain(|_| r.random::<f64>() >= drop_rate);
    }
    (s.schema, db)
}

/// Nested-loop inner join over the join tree rooted at `root`, with every
/// edge's foreign-key column dropped.
pub fn nested_loop_join(schema: &Schema, db: &Database, root: &str) -> Vec<CanonRow> {
    // spanning tree by repeated scans over the edge list
    let mut joined = vec![root.to_string()];
    let mut tree = Vec::new();
    loop {
        let next = schema.joins.iter().find(|e| {
            let c = joined.contains(&e.child);
            let p = joined.contains(&e.parent);
            c != p
        });
        match next {
            Some(e) => {
                let new = if joined.contains(&e.child) { &e.parent } else { &e.child };
                joined.push(new.clone());
                tree.push(e.clone());
            }
            None => break,
        }
    }
    let cells = |table: &str, row: &[Option<relemb_core::schema::Value>]| -> Vec<(String, Option<String>)> {
        let spec = schema.table(table).unwrap();
        spec.columns
            .iter()
            .zip(row)
            .map(|(c, v)| (format!("{table}.{}", c.name), v.as_ref().map(|x| x.key())))
            .collect()
    };
    type Partial = BTreeMap<String, Option<String>>;
    let mut partial: Vec<Partial> = db.rows(root).iter().map(|r| cells(root, r).into_iter().collect()).collect();
    for (i, e) in tree.iter().enumerate() {
        let new = &joined[i + 1];
        let (known_col, new_col) = if new == &e.child {
            (format!("{}.{}", e.parent, e.parent_column), format!("{}.{}", e.child, e.child_column))
        } else {
            (format!("{}.{}", e.child, e.child_column), format!("{}.{}", e.parent, e.parent_column))
        };
        let mut out = Vec::new();
        for left in &partial {
            for right in db.rows(new) {
                let rc: Partial = cells(new, right).into_iter().collect();
                match (&left[&known_col], &rc[&new_col]) {
                    (Some(a), Some(b)) if a == b => {
                        let mut m = left.clone();
                        m.extend(rc);
                        out.push(m);
                    }
                    _ => {}
                }
            }
        }
        partial = out;
    }
    let dropped: HashSet<String> = tree.iter().map(|e| format!("{}.{}", e.child, e.child_column)).collect();
    let mut rows: Vec<CanonRow> = partial
        .into_iter()
        .map(|m| {
            m.into_iter()
                .filter(|(k, _)| !dropped.contains(k))
                .filter_map(|(k, v)| v.map(|v| (k, v)))
                .collect()
        })
        .collect();
    rows.sort();
    rows
}

pub fn canonical_view(view: &DenormalizedView) -> (BTreeSet<String>, Vec<CanonRow>) {
    let names: Vec<String> = view.columns.iter().map(|c| c.qualified()).collect();
    let mut rows: Vec<CanonRow> = view
        .rows
        .iter()
        .map(|r| {
            names
                .iter()
                .zip(r)
                .filter_map(|(n, v)| v.as_ref().map(|v| (n.clone(), v.key())))
                .collect()
        })
        .collect();
    rows.sort();
    (names.into_iter().collect(), rows)
}

/// Every ordered pair of distinct non-null cells of every row.
pub fn brute_force_triples(view: &DenormalizedView) -> BTreeSet<(String, String, String)> {
    let mut out = BTreeSet::new();
    for row in &view.rows {
        for (i, a) in row.iter().enumerate() {
            for (j, b) in row.iter().enumerate() {
                if let (true, Some(a), Some(b)) = (i != j, a, b) {
                    out.insert((
                        cell_token(&view.columns[i].spec, a).unwrap().to_string(),
                        format!("{}_{}", view.columns[i].qualified(), view.columns[j].qualified()),
                        cell_token(&view.columns[j].spec, b).unwrap().to_string(),
                    ));
                }
            }
        }
    }
    out
}

// ---------- statistics ----------

/// Pearson chi-square goodness of fit p-value.
pub fn chi_square_p(observed: &[u64], probs: &[f64]) -> f64 {
    let n: u64 = observed.iter().sum();
    let mut stat = 0.0;
    let mut cells = 0;
    for (&o, &p) in observed.iter().zip(probs) {
        if p == 0.0 {
            assert_eq!(o, 0, "zero-probability cell was drawn");
            continue;
        }
        let e = n as f64 * p;
        stat += (o as f64 - e).powi(2) / e;
        cells += 1;
    }
    ChiSquared::new((cells - 1) as f64).unwrap().sf(stat)
}

/// Paired t-test from the textbook formula.
pub fn paired_t_oracle(a: &[f64], b: &[f64]) -> (f64, f64) {
    let n = a.len() as f64;
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let t = mean / (var / n).sqrt();
    let dist = StudentsT::new(0.0, 1.0, n - 1.0).unwrap();
    (t, 2.0 * dist.sf(t.abs()))
}

/// `P(X >= k)` for `X ~ Binomial(n, p)`.
pub fn binomial_upper(k: u64, n: u64, p: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    Binomial::new(p, n).unwrap().sf(k - 1)
}

// ---------- ranking oracles ----------

pub fn mw_oracle(a: &BTreeSet<String>, b: &BTreeSet<String>, w: usize) -> f64 {
    let common = a.iter().filter(|x| b.contains(*x)).count();
    if common == 0 {
        return 0.0;
    }
    let (la, lb) = (a.len() as f64, b.len() as f64);
    let v = 1.0 - (la.max(lb).ln() - (common as f64).ln()) / ((w as f64).ln() - la.min(lb).ln());
    v.clamp(0.0, 1.0)
}

pub fn grade_oracle(rank: Option<usize>) -> u32 {
    match rank {
        Some(r) if (1..=20).contains(&r) => 5,
        Some(r) if (21..=40).contains(&r) => 4,
        Some(r) if (41..=60).contains(&r) => 3,
        Some(r) if (61..=80).contains(&r) => 2,
        Some(r) if (81..=100).contains(&r) => 1,
        _ => 0,
    }
}

pub fn ndcg_oracle(ranked: &[String], gold: &[String], k: usize, exponential: bool) -> f64 {
    let gain = |g: u32| if exponential { 2f64.powi(g as i32) - 1.0 } else { g as f64 };
    let mut dcg = 0.0;
    for (i, r) in ranked.iter().take(k).enumerate() {
        let rank = gold.iter().position(|g| g == r).map(|p| p + 1);
        dcg += gain(grade_oracle(rank)) / (i as f64 + 2.0).log2();
    }
    let mut ideal: Vec<f64> = (0..gold.len()).map(|i| gain(grade_oracle(Some(i + 1)))).collect();
    ideal.sort_by(|a, b| b.total_cmp(a));
    let idcg: f64 = ideal.iter().take(k).enumerate().map(|(i, g)| g / (i as f64 + 2.0).log2()).sum();
    if idcg == 0.0 {
        0.0
    } else {
        dcg / idcg
    }
}

pub fn precision_oracle(ranked: &[String], relevant: &[String], k: usize) -> f64 {
    let mut hits = 0;
    for e in ranked.iter().take(k) {
        if relevant.contains(e) {
            hits += 1;
        }
    }
    hits as f64 / k as f64
}

// ---------- recurrent loss fixtures ----------

/// A random frozen table of `rows` tokens plus padding.
pub fn random_table(r: &mut ChaCha8Rng, d: usize, rows: usize) -> FrozenTable {
    let mut tokens = vec![PAD.to_string()];
    let mut vectors = vec![0.0; d];
    for i in 0..rows {
        tokens.push(format!("tok={i}"));
        vectors.extend(uniform_vec(r, d, 1.0));
    }
    FrozenTable::new(d, tokens, vectors).unwrap()
}

pub fn random_sample(r: &mut ChaCha8Rng, rows: usize, variant: Variant) -> MovieSample {
    let slots = match variant {
        Variant::Plain | Variant::Joint => 1,
        _ => 3,
    };
    let mut id = || r.random_range(1..=rows);
    MovieSample {
        actors: (0..slots).map(|_| id()).collect(),
        roles: (0..slots).map(|_| id()).collect(),
        genre: id(),
        year: id(),
        rank: id(),
    }
}

/// A window of `len` inputs with `negatives` candidates, one set per step
/// when `per_step`.
pub fn random_window(r: &mut ChaCha8Rng, rows: usize, variant: Variant, len: usize, negatives: usize, per_step: bool) -> Window {
    let sets = if per_step { len } else { 1 };
    Window {
        inputs: (0..len).map(|_| random_sample(r, rows, variant)).collect(),
        target: random_sample(r, rows, variant),
        negatives: (0..sets)
            .map(|_| (0..negatives).map(|_| random_sample(r, rows, variant)).collect())
            .collect(),
    }
}

/// Relative error between the analytic and numeric gradient of one random
/// window loss at a random parameter point.
pub fn lstm_gradient_error(variant: Variant, seed: u64, d: usize, h: usize, len: usize, per_step: bool) -> f64 {
    let mut r = rng(seed);
    let table = random_table(&mut r, d, 12);
    let l = Layout::new(d, h, variant);
    let params: Vec<f64> = uniform_vec(&mut r, l.len(), 0.8);
    let w = random_window(&mut r, 12, variant, len, 5, per_step);
    let joint = variant.joint_loss();
    let mut grad = vec![0.0; l.len()];
    window_loss(&params, &l, &table, &w, joint, Some(&mut grad)).unwrap();
    let numeric = central_diff(&params, 1e-5, |p| window_loss(p, &l, &table, &w, joint, None).unwrap());
    rel_err(&grad, &numeric)
}

/// At most one increase, and that one below 5%.
pub fn mostly_decreasing(curve: &[f64]) -> Result<(), String> {
    let ups: Vec<(usize, f64)> = curve
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[1] > w[0])
        .map(|(i, w)| (i + 1, (w[1] - w[0]) / w[0].abs().max(1e-300)))
        .collect();
    match ups.as_slice() {
        [] => Ok(()),
        [(_, rise)] if *rise < 0.05 => Ok(()),
        _ => Err(format!("increases at {ups:?} in {curve:?}")),
    }
}
