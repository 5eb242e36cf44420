//! Planted synthetic movie databases.
//!
//! Directors are split into clusters. A cluster shares a genre-probability
//! profile with one dominant genre, an era (a window of release years), and
//! a preferred pool of actors. The generator is a pure function of the seed
//! and parameters.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::index::sample;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{Database, Schema, SchemaError, Value};
use crate::eval::LinkGraph;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthParams {
    pub directors: usize,
    pub clusters: usize,
    pub genres: usize,
    pub genres_per_director: usize,
    pub min_movies: usize,
    pub max_movies: usize,
    pub actors: usize,
    pub min_cast: usize,
    pub max_cast: usize,
    /// Probability that a cast slot is filled from the cluster's actor pool.
    pub actor_affinity: f64,
    pub year_start: i32,
    pub year_end: i32,
    pub era_width: i32,
    pub null_rank_rate: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            directors: 200,
            clusters: 10,
            genres: 20,
            genres_per_director: 4,
            min_movies: 6,
            max_movies: 12,
            actors: 600,
            min_cast: 2,
            max_cast: 4,
            actor_affinity: 0.7,
            year_start: 1950,
            year_end: 2020,
            era_width: 20,
            null_rank_rate: 0.05,
        }
    }
}

impl SynthParams {
    fn check(&self) -> Result<(), SchemaError> {
        let bad = |m: &str| Err(SchemaError::InfeasibleParams(m.to_string()));
        if self.directors == 0 || self.clusters == 0 {
            return bad("need at least one director and one cluster");
        }
        if self.clusters > self.directors {
            return bad("more clusters than directors");
        }
        if self.genres < self.clusters {
            return bad("each cluster needs its own dominant genre (genres < clusters)");
        }
        if self.genres_per_director == 0 || self.genres_per_director > self.genres {
            return bad("genres_per_director must be in 1..=genres");
        }
        if self.min_movies == 0 || self.min_movies > self.max_movies {
            return bad("movie count range is empty");
        }
        if self.min_cast == 0 || self.min_cast > self.max_cast || self.max_cast > self.actors {
            return bad("cast size range is empty or exceeds the actor count");
        }
        if self.actors < self.clusters {
            return bad("each cluster needs at least one actor");
        }
        if self.era_width < 0 || self.year_end - self.year_start < self.era_width {
            return bad("era window does not fit in the year range");
        }
        if !(0.0..=1.0).contains(&self.actor_affinity) || !(0.0..=1.0).contains(&self.null_rank_rate) {
            return bad("rates must lie in [0, 1]");
        }
        Ok(())
    }

    fn era_start(&self, cluster: usize) -> i32 {
        if self.clusters == 1 {
            return self.year_start;
        }
        let span = (self.year_end - self.year_start - self.era_width) as f64;
        self.year_start + (span * cluster as f64 / (self.clusters - 1) as f64).round() as i32
    }

    fn genre_weights(&self, cluster: usize) -> Vec<f64> {
        let mut w = vec![1.0; self.genres];
        for step in 1..=2 {
            let g = (cluster + step * self.clusters) % self.genres;
            if g != cluster {
                w[g] = 3.0;
            }
        }
        w[cluster] = 6.0;
        w
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDb {
    pub schema: Schema,
    pub database: Database,
    /// Planted cluster of every director id.
    pub clusters: BTreeMap<String, usize>,
    pub params: SynthParams,
    pub seed: u64,
}

const GENRES: [&str; 24] = [
    "Action", "Adventure", "Animation", "Biography", "Comedy", "Crime", "Documentary", "Drama",
    "Family", "Fantasy", "FilmNoir", "History", "Horror", "Music", "Musical", "Mystery",
    "Romance", "SciFi", "Short", "Sport", "Thriller", "War", "Western", "Adult",
];
const FIRST: [&str; 12] = [
    "Ada", "Bela", "Cruz", "Dana", "Emil", "Fern", "Gus", "Hana", "Ivo", "Juno", "Kit", "Lior",
];
const LAST: [&str; 12] = [
    "Abe", "Brandt", "Costa", "Dahl", "Eze", "Frost", "Gale", "Holm", "Ito", "Jung", "Kovac", "Lund",
];
const ROLES: [&str; 10] = [
    "Lead", "Sidekick", "Villain", "Mentor", "Narrator", "Detective", "Doctor", "Soldier", "Stranger",
    "Self",
];

fn genre_name(i: usize) -> String {
    if i < GENRES.len() {
        GENRES[i].to_string()
    } else {
        format!("Genre{i}")
    }
}

fn weighted_pick(weights: &[f64], r: &mut rng::Rng) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = r.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)
}

fn text(s: impl Into<String>) -> Option<Value> {
    Some(Value::Text(s.into()))
}

/// Generates a database conforming to the bundled IMDB-style schema.
pub fn generate_synthetic(seed: u64, params: &SynthParams) -> Result<SyntheticDb, SchemaError> {
    params.check()?;
    let schema = Schema::imdb();
    let mut r = rng::stream(seed, "synth", 0);
    let p = params;

    let mut t: BTreeMap<&str, Vec<Vec<Option<Value>>>> = BTreeMap::new();
    for name in [
        "actors", "directors", "directors_genres", "movies", "movies_directors", "movies_genres", "roles",
    ] {
        t.insert(name, Vec::new());
    }

    for a in 0..p.actors {
        let gender = if r.random::<bool>() { "F" } else { "M" };
        t.get_mut("actors").unwrap().push(vec![
            text(format!("a{a:05}")),
            text(FIRST[r.random_range(0..FIRST.len())]),
            text(LAST[r.random_range(0..LAST.len())]),
            text(gender),
        ]);
    }
    let pools: Vec<Vec<usize>> = (0..p.clusters)
        .map(|c| (0..p.actors).filter(|a| a % p.clusters == c).collect())
        .collect();

    let mut clusters = BTreeMap::new();
    let mut movie_no = 0usize;
    for d in 0..p.directors {
        let cluster = d % p.clusters;
        let id = format!("d{d:04}");
        clusters.insert(id.clone(), cluster);
        t.get_mut("directors").unwrap().push(vec![
            text(id.clone()),
            text(FIRST[r.random_range(0..FIRST.len())]),
            text(LAST[r.random_range(0..LAST.len())]),
        ]);

        // genre profile: the dominant genre plus weighted draws without replacement
        let base = p.genre_weights(cluster);
        let mut chosen = vec![cluster];
        let mut remaining = base.clone();
        remaining[cluster] = 0.0;
        while chosen.len() < p.genres_per_director {
            let g = weighted_pick(&remaining, &mut r);
            remaining[g] = 0.0;
            chosen.push(g);
        }
        let raw: Vec<f64> = chosen
            .iter()
            .map(|&g| base[g] * r.random_range(0.8..1.2))
            .collect();
        let total: f64 = raw.iter().sum();
        let probs: Vec<f64> = raw.iter().map(|x| x / total).collect();
        for (&g, &pr) in chosen.iter().zip(&probs) {
            t.get_mut("directors_genres").unwrap().push(vec![
                text(id.clone()),
                text(genre_name(g)),
                Some(Value::Real(pr)),
            ]);
        }

        let era = p.era_start(cluster);
        let n_movies = r.random_range(p.min_movies..=p.max_movies);
        for _ in 0..n_movies {
            let mid = format!("m{movie_no:05}");
            movie_no += 1;
            let year = r.random_range(era..=era + p.era_width);
            let rank = if r.random::<f64>() < p.null_rank_rate {
                None
            } else {
                Some(Value::Real((r.random_range(0.0..10.0f64) * 10.0).round() / 10.0))
            };
            t.get_mut("movies").unwrap().push(vec![
                text(mid.clone()),
                text(format!("Title {movie_no}")),
                Some(Value::Int(i64::from(year))),
                rank,
            ]);
            t.get_mut("movies_directors")
                .unwrap()
                .push(vec![text(id.clone()), text(mid.clone())]);

            let n_genres = if chosen.len() > 1 && r.random::<bool>() { 2 } else { 1 };
            let mut w = probs.clone();
            for _ in 0..n_genres {
                let gi = weighted_pick(&w, &mut r);
                w[gi] = 0.0;
                t.get_mut("movies_genres")
                    .unwrap()
                    .push(vec![text(mid.clone()), text(genre_name(chosen[gi]))]);
            }

            let cast = r.random_range(p.min_cast..=p.max_cast);
            let mut picked = BTreeSet::new();
            while picked.len() < cast {
                let a = if r.random::<f64>() < p.actor_affinity {
                    let pool = &pools[cluster];
                    pool[r.random_range(0..pool.len())]
                } else {
                    r.random_range(0..p.actors)
                };
                picked.insert(a);
            }
            for a in picked {
                t.get_mut("roles").unwrap().push(vec![
                    text(format!("a{a:05}")),
                    text(mid.clone()),
                    text(ROLES[r.random_range(0..ROLES.len())]),
                ]);
            }
        }
    }

    let database = Database {
        tables: t.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
    };
    Ok(SyntheticDb {
        schema,
        database,
        clusters,
        params: params.clone(),
        seed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinkParams {
    /// Fraction of directors that appear in the link graph.
    pub coverage: f64,
    pub pages_per_cluster: usize,
    pub global_pages: usize,
    pub cluster_links: usize,
    pub global_links: usize,
}

impl Default for LinkParams {
    fn default() -> Self {
        LinkParams {
            coverage: 0.5,
            pages_per_cluster: 30,
            global_pages: 300,
            cluster_links: 8,
            global_links: 3,
        }
    }
}

impl SyntheticDb {
    /// Directors grouped by planted cluster, ids sorted.
    pub fn cluster_members(&self) -> Vec<Vec<String>> {
        let mut out = vec![Vec::new(); self.params.clusters];
        for (id, c) in &self.clusters {
            out[*c].push(id.clone());
        }
        out
    }

    /// A link graph whose inlink overlap follows the planted clusters.
    pub fn link_graph(&self, params: &LinkParams) -> LinkGraph {
        let mut r = rng::stream(self.seed, "synth-links", 0);
        let cluster_pages = params.pages_per_cluster.max(params.cluster_links);
        let global_pages = params.global_pages.max(params.global_links);
        let mut inlinks = BTreeMap::new();
        for (id, &c) in &self.clusters {
            if r.random::<f64>() >= params.coverage {
                continue;
            }
            let mut links = BTreeSet::new();
            for i in sample(&mut r, cluster_pages, params.cluster_links) {
                links.insert(format!("p{c}_{i}"));
            }
            for i in sample(&mut r, global_pages, params.global_links) {
                links.insert(format!("g{i}"));
            }
            inlinks.insert(id.clone(), links);
        }
        let total = self.params.clusters * cluster_pages + global_pages + self.clusters.len();
        LinkGraph::new(total, inlinks).expect("synthetic link graph is valid")
    }
}
