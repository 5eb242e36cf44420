//! Stage building blocks shared by the pipeline and the CLI.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::io::{BufRead, Write};
use std::path::Path;

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::FormatError;
use crate::eval::{
    completion_eval, gold_from_links, popular, similarity_eval, CandidateFilter, CompletionMode, CompletionQuery,
    CompletionResult, EvalReport, Gain, LinkGraph, StoreScorer,
};
use crate::linalg::cosine;
use crate::rng;
use crate::schema::{Database, Schema, Value};
use crate::seq::{Catalog, MovieRecord, SeqModel};
use crate::sgns::EmbeddingStore;

/// A withheld movie.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HoldoutEntry {
    pub movie: String,
    pub year: i64,
    pub directors: Vec<String>,
}

/// Fraction of directed movies withheld by [`split_database`].
pub const HOLDOUT_FRACTION: f64 = 0.2;

fn movie_column(schema: &Schema, name: &str) -> crate::Result<usize> {
    schema
        .table("movies")
        .and_then(|t| t.column_index(name))
        .ok_or_else(|| crate::Error::Config(format!("schema has no `movies.{name}` column")))
}

/// Withholds 20% of the directed movies (uniformly, or the latest by
/// `(year, id)`) and removes them, and every row referencing them, from the
/// returned training database.
pub fn split_database(
    schema: &Schema,
    db: &Database,
    mode: CompletionMode,
    seed: u64,
) -> crate::Result<(Database, Vec<HoldoutEntry>)> {
    let id_c = movie_column(schema, "id")?;
    let year_c = movie_column(schema, "year")?;
    let md = schema
        .table("movies_directors")
        .ok_or_else(|| crate::Error::Config("schema has no `movies_directors` table".into()))?;
    let (md_d, md_m) = (
        md.column_index("director_id")
            .ok_or_else(|| crate::Error::Config("`movies_directors.director_id` missing".into()))?,
        md.column_index("movie_id")
            .ok_or_else(|| crate::Error::Config("`movies_directors.movie_id` missing".into()))?,
    );
    let mut directors: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for r in db.rows("movies_directors") {
        if let (Some(d), Some(m)) = (&r[md_d], &r[md_m]) {
            directors.entry(m.key()).or_default().insert(d.key());
        }
    }
    let mut movies: Vec<(i64, String)> = db
        .rows("movies")
        .iter()
        .filter_map(|r| {
            let id = r[id_c].as_ref()?.key();
            let year = r[year_c].as_ref().and_then(Value::as_i64)?;
            directors.contains_key(&id).then_some((year, id))
        })
        .collect();
    movies.sort();
    let n = (movies.len() as f64 * HOLDOUT_FRACTION).floor() as usize;
    let chosen: Vec<usize> = match mode {
        CompletionMode::Time => (movies.len() - n..movies.len()).collect(),
        CompletionMode::Random20 => {
            let mut r = rng::stream(seed, "split", 0);
            let mut v = sample(&mut r, movies.len(), n).into_vec();
            v.sort_unstable();
            v
        }
    };
    let held: HashSet<&str> = chosen.iter().map(|&i| movies[i].1.as_str()).collect();
    let mut train = db.clone();
    let movies_pk = &schema.table("movies").expect("checked above").columns[id_c].name;
    let drop = |table: &str, col: usize, train: &mut Database| {
        if let Some(rows) = train.tables.get_mut(table) {
            rows.retain(|r| r[col].as_ref().is_none_or(|v| !held.contains(v.key().as_str())));
        }
    };
    drop("movies", id_c, &mut train);
    for j in &schema.joins {
        if j.parent == "movies" && &j.parent_column == movies_pk {
            let c = schema
                .table(&j.child)
                .and_then(|t| t.column_index(&j.child_column))
                .expect("validated join");
            drop(&j.child, c, &mut train);
        }
    }
    let holdout = chosen
        .iter()
        .map(|&i| {
            let (year, id) = &movies[i];
            HoldoutEntry {
                movie: id.clone(),
                year: *year,
                directors: directors[id].iter().cloned().collect(),
            }
        })
        .collect();
    Ok((train, holdout))
}

pub fn write_holdout<W: Write>(entries: &[HoldoutEntry], mut w: W) -> std::io::Result<()> {
    writeln!(w, "movie\tyear\tdirectors")?;
    for e in entries {
        writeln!(w, "{}\t{}\t{}", e.movie, e.year, e.directors.join(","))?;
    }
    w.flush()
}

pub fn read_holdout<R: BufRead>(reader: R) -> crate::Result<Vec<HoldoutEntry>> {
    const WHAT: &str = "holdout file";
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| crate::Error::io(WHAT, e))?;
        if i == 0 {
            if line != "movie\tyear\tdirectors" {
                return Err(FormatError::BadHeader { what: WHAT, header: line }.into());
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let bad = |m: &str| FormatError::Line {
            what: WHAT,
            line: i + 1,
            message: m.into(),
        };
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 3 {
            return Err(bad("expected 3 fields").into());
        }
        let year = f[1].parse().map_err(|_| bad("bad year"))?;
        let directors: Vec<String> = f[2].split(',').filter(|s| !s.is_empty()).map(str::to_string).collect();
        if directors.is_empty() {
            return Err(bad("no director").into());
        }
        out.push(HoldoutEntry {
            movie: f[0].to_string(),
            year,
            directors,
        });
    }
    Ok(out)
}

pub fn save_holdout(entries: &[HoldoutEntry], path: impl AsRef<Path>) -> crate::Result<()> {
    let path = path.as_ref();
    let f = std::fs::File::create(path).map_err(|e| crate::Error::io(path, e))?;
    write_holdout(entries, std::io::BufWriter::new(f)).map_err(|e| crate::Error::io(path, e))
}

pub fn load_holdout(path: impl AsRef<Path>) -> crate::Result<Vec<HoldoutEntry>> {
    let path = path.as_ref();
    let f = std::fs::File::open(path).map_err(|e| crate::Error::io(path, e))?;
    read_holdout(std::io::BufReader::new(f))
}

/// One query per withheld movie; the first director is the answer.
pub fn completion_queries(holdout: &[HoldoutEntry]) -> Vec<CompletionQuery> {
    holdout
        .iter()
        .map(|e| CompletionQuery {
            movie: e.movie.clone(),
            year: e.year,
            correct: e.directors[0].clone(),
            directors: e.directors.iter().cloned().collect(),
        })
        .collect()
}

/// Mean vector of a movie's genre, cast, year and rank tokens.
pub fn token_movie_vector(store: &EmbeddingStore, movie: &MovieRecord) -> Option<Vec<f64>> {
    let tokens = movie
        .genres
        .iter()
        .chain(movie.cast.iter().flat_map(|(a, r)| [a, r]))
        .chain(std::iter::once(&movie.year_token))
        .chain(movie.rank_token.iter());
    let mut sum = vec![0.0; store.dim()];
    let mut n = 0usize;
    for t in tokens {
        if let Some(v) = store.vector(t) {
            sum.iter_mut().zip(v).for_each(|(s, x)| *s += x);
            n += 1;
        }
    }
    (n > 0).then(|| sum.into_iter().map(|s| s / n as f64).collect())
}

/// Completion with a token-embedding model: cosine between the director
/// token and the mean of the movie's attribute tokens.
#[allow(clippy::too_many_arguments)]
pub fn token_completion(
    model: &str,
    store: &EmbeddingStore,
    director_prefix: &str,
    full: &Catalog,
    mode: CompletionMode,
    queries: &[CompletionQuery],
    pool: &[String],
    negatives: usize,
    seed: u64,
) -> crate::Result<CompletionResult> {
    let movie_vecs: HashMap<&str, Vec<f64>> = queries
        .iter()
        .filter_map(|q| Some((q.movie.as_str(), token_movie_vector(store, full.movie(&q.movie)?)?)))
        .collect();
    Ok(completion_eval(model, mode, queries, pool, negatives, seed, |q, d| {
        let m = movie_vecs.get(q.movie.as_str())?;
        let dv = store.vector(&format!("{director_prefix}{d}"))?;
        Some(cosine(dv, m))
    })?)
}

/// Completion with a recurrent model. Directors are embedded from their
/// training movies: the whole sequence in random mode, the window
/// `[year - window_years, year)` in time mode.
#[allow(clippy::too_many_arguments)]
pub fn sequence_completion(
    model_name: &str,
    model: &SeqModel,
    train: &Catalog,
    full: &Catalog,
    mode: CompletionMode,
    queries: &[CompletionQuery],
    pool: &[String],
    negatives: usize,
    seed: u64,
    window_years: i64,
) -> crate::Result<CompletionResult> {
    let movie_vecs: HashMap<&str, Vec<f64>> = queries
        .par_iter()
        .filter_map(|q| {
            let m = full.movie(&q.movie)?;
            let mut r = rng::stream(seed, "seq-eval-movie", rng::fnv1a(q.movie.as_bytes()));
            Some((q.movie.as_str(), model.movie_embedding(m, full, &mut r)))
        })
        .collect();
    let cutoffs: BTreeSet<i64> = match mode {
        CompletionMode::Time => queries.iter().map(|q| q.year).collect(),
        CompletionMode::Random20 => [i64::MIN].into_iter().collect(),
    };
    let keys: Vec<(&String, i64)> = pool.iter().flat_map(|d| cutoffs.iter().map(move |&c| (d, c))).collect();
    let director_vecs: HashMap<(&str, i64), Vec<f64>> = keys
        .par_iter()
        .filter_map(|&(d, cutoff)| {
            let mut r = rng::stream(seed, "seq-eval-director", rng::fnv1a(d.as_bytes()) ^ cutoff as u64);
            let v = if cutoff == i64::MIN {
                model.director_embedding(d, train, &mut r)
            } else {
                model.time_sensitive_embed(d, cutoff, window_years, train, &mut r).ok()
            }?;
            Some(((d.as_str(), cutoff), v))
        })
        .collect();
    Ok(completion_eval(model_name, mode, queries, pool, negatives, seed, |q, d| {
        let m = movie_vecs.get(q.movie.as_str())?;
        let cutoff = if mode == CompletionMode::Time { q.year } else { i64::MIN };
        let dv = director_vecs.get(&(d, cutoff))?;
        Some(SeqModel::score(dv, m))
    })?)
}

/// Similarity evaluation of several token-embedding models against link
/// gold lists, over the `n_queries` most prolific directors in the graph.
#[allow(clippy::too_many_arguments)]
pub fn link_similarity(
    models: &[(String, &EmbeddingStore)],
    director_prefix: &str,
    graph: &LinkGraph,
    movie_counts: &BTreeMap<String, usize>,
    n_queries: usize,
    filter: CandidateFilter,
    gain: Gain,
) -> crate::Result<EvalReport> {
    let in_graph: BTreeMap<String, usize> = movie_counts
        .iter()
        .filter(|(d, _)| graph.contains(d))
        .map(|(d, c)| (d.clone(), *c))
        .collect();
    let queries = popular(&in_graph, n_queries);
    let gold = gold_from_links(&queries, graph, crate::eval::RANK_DEPTH)?;
    let all: Vec<String> = movie_counts.keys().cloned().collect();
    let candidates = filter.apply(&all, graph, movie_counts);
    let mut reports = Vec::new();
    for (name, store) in models {
        let scorer = StoreScorer::new(store, director_prefix);
        reports.push(similarity_eval(name, &scorer, &queries, &gold, &candidates, filter, gain)?);
    }
    Ok(EvalReport::new(reports))
}

/// Similarity evaluation against planted groups: every grouped entity is a
/// query and every other grouped entity a candidate.
pub fn group_similarity(
    models: &[(String, &EmbeddingStore)],
    prefix: &str,
    groups: &[Vec<String>],
    gain: Gain,
) -> crate::Result<EvalReport> {
    let gold = crate::eval::gold_from_groups(groups);
    let queries: Vec<String> = gold.keys().cloned().collect();
    let mut reports = Vec::new();
    for (name, store) in models {
        let scorer = StoreScorer::new(store, prefix);
        reports.push(similarity_eval(name, &scorer, &queries, &gold, &queries, CandidateFilter::None, gain)?);
    }
    Ok(EvalReport::new(reports))
}

/// `entity\tgroup` lines, grouped in order of first appearance of the label.
pub fn read_groups<R: BufRead>(reader: R) -> crate::Result<Vec<Vec<String>>> {
    const WHAT: &str = "group file";
    let mut labels: BTreeMap<String, usize> = BTreeMap::new();
    let mut groups: Vec<Vec<String>> = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| crate::Error::io(WHAT, e))?;
        if line.is_empty() {
            continue;
        }
        let Some((e, g)) = line.split_once('\t') else {
            return Err(FormatError::Line {
                what: WHAT,
                line: i + 1,
                message: "expected `entity<TAB>group`".into(),
            }
            .into());
        };
        let next = groups.len();
        let gi = *labels.entry(g.to_string()).or_insert(next);
        if gi == next {
            groups.push(Vec::new());
        }
        groups[gi].push(e.to_string());
    }
    Ok(groups)
}

pub fn write_groups<W: Write>(groups: &[Vec<String>], mut w: W) -> std::io::Result<()> {
    for (g, members) in groups.iter().enumerate() {
        for m in members {
            writeln!(w, "{m}\t{g}")?;
        }
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::synth::{generate_synthetic, SynthParams};

    #[test]
    fn split_withholds_a_fifth_and_its_rows() {
        let s = generate_synthetic(
            3,
            &SynthParams {
                directors: 20,
                clusters: 2,
                actors: 60,
                ..SynthParams::default()
            },
        )
        .unwrap();
        for mode in [CompletionMode::Random20, CompletionMode::Time] {
            let (train, held) = split_database(&s.schema, &s.database, mode, 1).unwrap();
            let total = s.database.rows("movies").len();
            assert_eq!(held.len(), total / 5);
            assert_eq!(train.rows("movies").len(), total - held.len());
            assert!(train.dangling_refs(&s.schema).is_empty());
            let ids: HashSet<&str> = held.iter().map(|h| h.movie.as_str()).collect();
            assert!(train.rows("roles").iter().all(|r| !ids.contains(r[1].as_ref().unwrap().key().as_str())));
            if mode == CompletionMode::Time {
                let latest_train = train.rows("movies").iter().map(|r| r[2].as_ref().unwrap().as_i64().unwrap()).max().unwrap();
                assert!(held.iter().all(|h| h.year >= latest_train));
            }
        }
    }

    #[test]
    fn holdout_round_trip() {
        let h = vec![HoldoutEntry {
            movie: "m1".into(),
            year: 1999,
            directors: vec!["d1".into(), "d2".into()],
        }];
        let mut buf = Vec::new();
        write_holdout(&h, &mut buf).unwrap();
        assert_eq!(read_holdout(buf.as_slice()).unwrap(), h);
        assert!(read_holdout("bad\n".as_bytes()).is_err());
    }

    #[test]
    fn groups_round_trip() {
        let g = vec![vec!["a".to_string(), "b".into()], vec!["c".into()]];
        let mut buf = Vec::new();
        write_groups(&g, &mut buf).unwrap();
        assert_eq!(read_groups(buf.as_slice()).unwrap(), g);
    }
}
