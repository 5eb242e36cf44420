//! Token sentences from denormalized rows.
//!
//! Three strategies are supported:
//!
//! * `base`: one sentence per view row, tokens in column order.
//! * `genre`: one sentence per director: the director token, `k` genres drawn
//!   with probability proportional to the director's genre probabilities,
//!   and the director's remaining attribute tokens, shuffled.
//! * `movierank`: the genre sentence plus `k` of the director's movies drawn
//!   proportionally to movie rank, shuffled.
//!
//! Each director gets its own random stream derived from the seed and the
//! director id, so output does not depend on worker count.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng;
use crate::schema::{ColumnKind, ColumnSpec, DenormalizedView, Discretizer, Row, Value};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("value {value} outside {range}")]
    OutOfRange { value: f64, range: &'static str },
    #[error("non-finite value")]
    NonFinite,
    #[error("director `{0}` has no genre with positive probability")]
    Ineligible(String),
    #[error("no movie with a positive rank for `{0}`")]
    NoRankedMovies(String),
    #[error("unknown view column `{0}`")]
    UnknownColumn(String),
    #[error("empty view")]
    EmptyView,
    #[error("bad token `{0}`: expected `namespace=value`")]
    BadToken(String),
    #[error("unknown strategy `{0}` (expected base, genre or movierank)")]
    UnknownStrategy(String),
}

/// A namespaced word, rendered `namespace=value`.
///
/// Values are escaped (`%`, whitespace and control characters become `%XX`)
/// so rendering is injective and never contains whitespace.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Token {
    namespace: String,
    value: String,
}

fn escape(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    for ch in raw.chars() {
        if ch == '%' || ch.is_whitespace() || ch.is_control() {
            let mut buf = [0u8; 4];
            for b in ch.encode_utf8(&mut buf).bytes() {
                out.push_str(&format!("%{b:02X}"));
            }
        } else {
            out.push(ch);
        }
    }
    out
}

impl Token {
    pub fn new(namespace: &str, raw_value: &str) -> Token {
        Token {
            namespace: namespace.to_string(),
            value: escape(raw_value),
        }
    }

    pub fn namespace(&self) -> &str {
        &self.namespace
    }

    /// The escaped value.
    pub fn value(&self) -> &str {
        &self.value
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}={}", self.namespace, self.value)
    }
}

impl FromStr for Token {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once('=') {
            Some((ns, v)) if !ns.is_empty() && !s.chars().any(char::is_whitespace) => Ok(Token {
                namespace: ns.to_string(),
                value: v.to_string(),
            }),
            _ => Err(CorpusError::BadToken(s.to_string())),
        }
    }
}

pub type Sentence = Vec<Token>;

fn round_half_up(x: f64) -> i64 {
    // the epsilon absorbs representation error in decimal ties such as 0.35 * 10
    (x + 0.5 + 1e-9).floor() as i64
}

pub fn round_rank(r: f64) -> Result<i64, CorpusError> {
    if !r.is_finite() {
        return Err(CorpusError::NonFinite);
    }
    if !(0.0..=10.0).contains(&r) {
        return Err(CorpusError::OutOfRange {
            value: r,
            range: "[0, 10]",
        });
    }
    Ok(round_half_up(r))
}

/// Nearest multiple of 0.1, in tenths.
pub fn round_prob(p: f64) -> Result<i64, CorpusError> {
    if !p.is_finite() {
        return Err(CorpusError::NonFinite);
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(CorpusError::OutOfRange {
            value: p,
            range: "[0, 1]",
        });
    }
    Ok(round_half_up(p * 10.0))
}

fn tenths(t: i64) -> String {
    format!("{}.{}", t / 10, t % 10)
}

/// `rank=<nearest integer>`
pub fn discretize_rank(r: f64) -> Result<Token, CorpusError> {
    Ok(Token::new("rank", &round_rank(r)?.to_string()))
}

/// `gprob=<nearest tenth>`
pub fn discretize_prob(p: f64) -> Result<Token, CorpusError> {
    Ok(Token::new("gprob", &tenths(round_prob(p)?)))
}

/// The token for one cell, discretizing numeric columns.
pub fn cell_token(column: &ColumnSpec, value: &Value) -> Result<Token, CorpusError> {
    let ns = &column.namespace;
    let rendered = match (column.discretize, value) {
        (Some(Discretizer::Rank), v) => round_rank(v.as_f64().ok_or(CorpusError::NonFinite)?)?.to_string(),
        (Some(Discretizer::Prob), v) => tenths(round_prob(v.as_f64().ok_or(CorpusError::NonFinite)?)?),
        (None, Value::Real(r)) if column.kind == ColumnKind::Real => {
            if !r.is_finite() {
                return Err(CorpusError::NonFinite);
            }
            round_half_up(*r).to_string()
        }
        (None, v) => v.to_string(),
    };
    Ok(Token::new(ns, &rendered))
}

/// One token per non-null cell, in view column order. `None` when fewer than
/// two cells are non-null.
pub fn row_to_sentence(row: &Row, columns: &[ColumnSpec]) -> Result<Option<Sentence>, CorpusError> {
    let mut out = Vec::with_capacity(row.len());
    for (cell, col) in row.iter().zip(columns) {
        if let Some(v) = cell {
            out.push(cell_token(col, v)?);
        }
    }
    Ok((out.len() >= 2).then_some(out))
}

/// A director's genres with their observed probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct GenreProfile {
    pub director: String,
    pub entries: Vec<(Token, f64)>,
}

impl GenreProfile {
    /// Normalized sampling weights `p_g / sum(p)`.
    pub fn weights(&self) -> Result<Vec<f64>, CorpusError> {
        normalized(self.entries.iter().map(|(_, p)| *p))
            .ok_or_else(|| CorpusError::Ineligible(self.director.clone()))
    }
}

fn normalized(weights: impl Iterator<Item = f64>) -> Option<Vec<f64>> {
    let w: Vec<f64> = weights.map(|x| if x.is_finite() && x > 0.0 { x } else { 0.0 }).collect();
    let total: f64 = w.iter().sum();
    (total > 0.0).then(|| w.iter().map(|x| x / total).collect())
}

fn draw<T: Clone>(items: &[T], weights: &[f64], k: usize, r: &mut rng::Rng) -> Vec<T> {
    let dist = WeightedIndex::new(weights).expect("weights are positive and finite");
    (0..k).map(|_| items[dist.sample(r)].clone()).collect()
}

/// `k` i.i.d. genre draws weighted by normalized probability.
pub fn genre_sample(profile: &GenreProfile, k: usize, r: &mut rng::Rng) -> Result<Vec<Token>, CorpusError> {
    let w = profile.weights()?;
    let genres: Vec<Token> = profile.entries.iter().map(|(g, _)| g.clone()).collect();
    Ok(draw(&genres, &w, k, r))
}

/// Rank-proportional weights over movies with a usable rank.
pub fn movierank_weights(movies: &[(Token, Option<f64>)]) -> Option<Vec<f64>> {
    normalized(movies.iter().map(|(_, r)| r.unwrap_or(0.0)))
}

/// `k` i.i.d. movie draws weighted by `rank / sum(ranks)`; null ranks never
/// drawn.
pub fn movierank_sample(
    director: &str,
    movies: &[(Token, Option<f64>)],
    k: usize,
    r: &mut rng::Rng,
) -> Result<Vec<Token>, CorpusError> {
    let w = movierank_weights(movies).ok_or_else(|| CorpusError::NoRankedMovies(director.to_string()))?;
    let items: Vec<Token> = movies.iter().map(|(m, _)| m.clone()).collect();
    Ok(draw(&items, &w, k, r))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Base,
    Genre,
    MovieRank,
}

impl FromStr for Strategy {
    type Err = CorpusError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "base" => Ok(Strategy::Base),
            "genre" => Ok(Strategy::Genre),
            "movierank" => Ok(Strategy::MovieRank),
            other => Err(CorpusError::UnknownStrategy(other.to_string())),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Base => "base",
            Strategy::Genre => "genre",
            Strategy::MovieRank => "movierank",
        })
    }
}

/// Which view columns play which role in the sampled strategies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingColumns {
    pub entity: String,
    pub profile_key: String,
    pub profile_weight: String,
    pub item: String,
    pub item_weight: String,
    /// Columns left out of sampled sentences.
    pub exclude: Vec<String>,
}

impl Default for SamplingColumns {
    fn default() -> Self {
        SamplingColumns {
            entity: "directors.id".into(),
            profile_key: "directors_genres.genre".into(),
            profile_weight: "directors_genres.prob".into(),
            item: "movies.id".into(),
            item_weight: "movies.rank".into(),
            exclude: vec!["directors.first_name".into(), "directors.last_name".into()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusConfig {
    pub strategy: Strategy,
    pub seed: u64,
    /// Draws per director for each sampled column.
    pub samples: usize,
    pub columns: SamplingColumns,
}

impl CorpusConfig {
    pub fn new(strategy: Strategy, seed: u64) -> Self {
        CorpusConfig {
            strategy,
            seed,
            samples: 6,
            columns: SamplingColumns::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub skipped_rows: usize,
    /// Directors without any positive genre probability.
    pub ineligible: Vec<String>,
    /// Directors left out of movie-rank draws (no ranked movie).
    pub unranked: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub sentences: Vec<Sentence>,
    pub strategy: Strategy,
    pub seed: u64,
    pub stats: CorpusStats,
}

struct DirectorRows<'a> {
    id: String,
    token: Token,
    rows: Vec<&'a Row>,
}

pub fn build_corpus(view: &DenormalizedView, config: &CorpusConfig) -> Result<Corpus, CorpusError> {
    if view.is_empty() {
        return Err(CorpusError::EmptyView);
    }
    let specs: Vec<ColumnSpec> = view.columns.iter().map(|c| c.spec.clone()).collect();
    let mut stats = CorpusStats::default();

    if config.strategy == Strategy::Base {
        let mut sentences = Vec::with_capacity(view.rows.len());
        for row in &view.rows {
            match row_to_sentence(row, &specs)? {
                Some(s) => sentences.push(s),
                None => stats.skipped_rows += 1,
            }
        }
        return Ok(Corpus {
            sentences,
            strategy: config.strategy,
            seed: config.seed,
            stats,
        });
    }

    let col = |q: &str| view.column_index(q).ok_or_else(|| CorpusError::UnknownColumn(q.to_string()));
    let cols = &config.columns;
    let entity = col(&cols.entity)?;
    let genre = col(&cols.profile_key)?;
    let gprob = col(&cols.profile_weight)?;
    let (item, item_weight) = if config.strategy == Strategy::MovieRank {
        (Some(col(&cols.item)?), Some(col(&cols.item_weight)?))
    } else {
        (None, None)
    };
    let mut skip: HashSet<usize> = HashSet::from([entity, genre, gprob]);
    // excluded columns absent from the view are simply not there to skip
    skip.extend(cols.exclude.iter().filter_map(|q| view.column_index(q)));

    // rows grouped by director, canonical order by id
    let mut groups: BTreeMap<String, DirectorRows> = BTreeMap::new();
    for row in &view.rows {
        let Some(v) = &row[entity] else {
            stats.skipped_rows += 1;
            continue;
        };
        let id = v.to_string();
        let token = cell_token(&specs[entity], v)?;
        groups
            .entry(id.clone())
            .or_insert_with(|| DirectorRows {
                id,
                token,
                rows: Vec::new(),
            })
            .rows
            .push(row);
    }
    let groups: Vec<DirectorRows> = groups.into_values().collect();

    enum Outcome {
        Sentence(Sentence, bool),
        Ineligible,
    }
    let outcomes: Vec<Result<Outcome, CorpusError>> = groups
        .par_iter()
        .map(|g| {
            let mut profile = GenreProfile {
                director: g.id.clone(),
                entries: Vec::new(),
            };
            let mut seen_genres = HashSet::new();
            let mut attrs = Vec::new();
            let mut seen_attrs = HashSet::new();
            let mut movies: Vec<(Token, Option<f64>)> = Vec::new();
            let mut seen_movies = HashSet::new();
            for row in &g.rows {
                if let (Some(gv), Some(pv)) = (&row[genre], &row[gprob]) {
                    let t = cell_token(&specs[genre], gv)?;
                    if seen_genres.insert(t.clone()) {
                        profile.entries.push((t, pv.as_f64().unwrap_or(0.0)));
                    }
                }
                for (ci, cell) in row.iter().enumerate() {
                    if skip.contains(&ci) {
                        continue;
                    }
                    if let Some(v) = cell {
                        let t = cell_token(&specs[ci], v)?;
                        if seen_attrs.insert(t.clone()) {
                            attrs.push(t);
                        }
                    }
                }
                if let (Some(ic), Some(wc)) = (item, item_weight) {
                    if let Some(mv) = &row[ic] {
                        let t = cell_token(&specs[ic], mv)?;
                        if seen_movies.insert(t.clone()) {
                            movies.push((t, row[wc].as_ref().and_then(Value::as_f64)));
                        }
                    }
                }
            }
            let mut r = rng::stream(config.seed, "corpus", rng::fnv1a(g.id.as_bytes()));
            let genres = match genre_sample(&profile, config.samples, &mut r) {
                Ok(gs) => gs,
                Err(CorpusError::Ineligible(_)) => return Ok(Outcome::Ineligible),
                Err(e) => return Err(e),
            };
            let mut sentence = Vec::with_capacity(1 + genres.len() + attrs.len() + config.samples);
            sentence.push(g.token.clone());
            sentence.extend(genres);
            sentence.extend(attrs);
            let mut unranked = false;
            if item.is_some() {
                match movierank_sample(&g.id, &movies, config.samples, &mut r) {
                    Ok(ms) => sentence.extend(ms),
                    Err(CorpusError::NoRankedMovies(_)) => unranked = true,
                    Err(e) => return Err(e),
                }
            }
            sentence.shuffle(&mut r);
            Ok(Outcome::Sentence(sentence, unranked))
        })
        .collect();

    let mut sentences = Vec::with_capacity(groups.len());
    for (g, outcome) in groups.iter().zip(outcomes) {
        match outcome? {
            Outcome::Sentence(s, unranked) => {
                if unranked {
                    stats.unranked.push(g.id.clone());
                }
                sentences.push(s);
            }
            Outcome::Ineligible => stats.ineligible.push(g.id.clone()),
        }
    }
    Ok(Corpus {
        sentences,
        strategy: config.strategy,
        seed: config.seed,
        stats,
    })
}

impl Corpus {
    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(Vec::len).sum()
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for s in &self.sentences {
            let line: Vec<String> = s.iter().map(Token::to_string).collect();
            writeln!(w, "{}", line.join(" "))?;
        }
        w.flush()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> crate::Result<()> {
        let path = path.as_ref();
        let f = std::fs::File::create(path).map_err(|e| crate::Error::io(path, e))?;
        self.write_to(std::io::BufWriter::new(f))
            .map_err(|e| crate::Error::io(path, e))
    }
}

/// Reads a corpus file: one sentence per line, tokens separated by spaces.
/// Blank lines are ignored.
pub fn read_sentences<R: BufRead>(reader: R) -> crate::Result<Vec<Sentence>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| crate::Error::io("<corpus>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let s: Result<Sentence, _> = line.split_whitespace().map(Token::from_str).collect();
        out.push(s.map_err(|e| crate::error::FormatError::Line {
            what: "corpus",
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

pub fn load_sentences(path: impl AsRef<Path>) -> crate::Result<Vec<Sentence>> {
    let path = path.as_ref();
    let f = std::fs::File::open(path).map_err(|e| crate::Error::io(path, e))?;
    read_sentences(std::io::BufReader::new(f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{ColumnKind, ViewColumn};
    use rand::SeedableRng;

    fn col(table: &str, name: &str, kind: ColumnKind, ns: &str, d: Option<Discretizer>) -> ViewColumn {
        ViewColumn {
            table: table.into(),
            spec: ColumnSpec {
                name: name.into(),
                kind,
                namespace: ns.into(),
                discretize: d,
            },
        }
    }

    fn text(s: &str) -> Option<Value> {
        Some(Value::Text(s.into()))
    }

    /// director / genre / prob / movie / year / rank / first name
    fn view(rows: Vec<Row>) -> DenormalizedView {
        DenormalizedView {
            root: "directors".into(),
            columns: vec![
                col("directors", "id", ColumnKind::Id, "director", None),
                col("directors", "first_name", ColumnKind::Categorical, "director_first", None),
                col("directors_genres", "genre", ColumnKind::Categorical, "genre", None),
                col("directors_genres", "prob", ColumnKind::Real, "gprob", Some(Discretizer::Prob)),
                col("movies", "id", ColumnKind::Id, "movie", None),
                col("movies", "year", ColumnKind::Year, "year", None),
                col("movies", "rank", ColumnKind::Real, "rank", Some(Discretizer::Rank)),
            ],
            rows,
        }
    }

    fn row(d: &str, g: &str, p: f64, m: &str, y: i64, r: Option<f64>) -> Row {
        vec![
            text(d),
            text("Ann"),
            text(g),
            Some(Value::Real(p)),
            text(m),
            Some(Value::Int(y)),
            r.map(Value::Real),
        ]
    }

    #[test]
    fn rank_rounding() {
        assert_eq!(discretize_rank(7.66).unwrap().to_string(), "rank=8");
        assert_eq!(discretize_rank(7.5).unwrap().to_string(), "rank=8");
        assert_eq!(discretize_rank(0.0).unwrap().to_string(), "rank=0");
        assert_eq!(discretize_rank(10.0).unwrap().to_string(), "rank=10");
        assert!(matches!(discretize_rank(10.01), Err(CorpusError::OutOfRange { .. })));
        assert!(discretize_rank(-0.1).is_err());
        assert!(discretize_rank(f64::NAN).is_err());
    }

    #[test]
    fn prob_rounding() {
        assert_eq!(discretize_prob(0.237).unwrap().to_string(), "gprob=0.2");
        assert_eq!(discretize_prob(0.25).unwrap().to_string(), "gprob=0.3");
        assert_eq!(discretize_prob(0.35).unwrap().to_string(), "gprob=0.4");
        assert_eq!(discretize_prob(1.0).unwrap().to_string(), "gprob=1.0");
        assert_eq!(discretize_prob(0.0).unwrap().to_string(), "gprob=0.0");
        assert!(discretize_prob(1.2).is_err());
    }

    #[test]
    fn token_escaping_is_injective() {
        let a = Token::new("movie_name", "The Big Sleep");
        let b = Token::new("movie_name", "The%20Big%20Sleep");
        assert_eq!(a.to_string(), "movie_name=The%20Big%20Sleep");
        assert_ne!(a.to_string(), b.to_string());
        assert!(!a.to_string().contains(' '));
        let parsed: Token = a.to_string().parse().unwrap();
        assert_eq!(parsed, a);
        assert_ne!(Token::new("genre", "2000"), Token::new("year", "2000"));
    }

    #[test]
    fn row_sentence_tokens() {
        let v = view(vec![row("d1", "Mystery", 0.6, "m1", 1999, None)]);
        let specs: Vec<ColumnSpec> = v.columns.iter().map(|c| c.spec.clone()).collect();
        let s = row_to_sentence(&v.rows[0], &specs).unwrap().unwrap();
        let words: Vec<String> = s.iter().map(Token::to_string).collect();
        // null rank omitted
        assert_eq!(
            words,
            ["director=d1", "director_first=Ann", "genre=Mystery", "gprob=0.6", "movie=m1", "year=1999"]
        );
        let sparse = vec![text("d1"), None, None, None, None, None, None];
        assert!(row_to_sentence(&sparse, &specs).unwrap().is_none());
    }

    #[test]
    fn genre_weights_from_profile() {
        let p = GenreProfile {
            director: "d".into(),
            entries: vec![
                (Token::new("genre", "Mystery"), 0.6),
                (Token::new("genre", "Comedy"), 0.2),
                (Token::new("genre", "Drama"), 0.7),
            ],
        };
        let w = p.weights().unwrap();
        let expect = [0.6 / 1.5, 0.2 / 1.5, 0.7 / 1.5];
        for (a, b) in w.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((w[0] - 0.4).abs() < 1e-12);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_genre_always_drawn() {
        let p = GenreProfile {
            director: "d".into(),
            entries: vec![(Token::new("genre", "Action"), 0.3)],
        };
        let mut r = rng::Rng::seed_from_u64(1);
        let draws = genre_sample(&p, 6, &mut r).unwrap();
        assert_eq!(draws.len(), 6);
        assert!(draws.iter().all(|t| t.value() == "Action"));
    }

    #[test]
    fn all_zero_profile_is_ineligible() {
        let p = GenreProfile {
            director: "d9".into(),
            entries: vec![(Token::new("genre", "Action"), 0.0)],
        };
        let mut r = rng::Rng::seed_from_u64(1);
        assert!(matches!(genre_sample(&p, 6, &mut r), Err(CorpusError::Ineligible(d)) if d == "d9"));
    }

    #[test]
    fn movierank_weights_normalize() {
        let movies = vec![(Token::new("movie", "m1"), Some(8.0)), (Token::new("movie", "m2"), Some(2.0))];
        let w = movierank_weights(&movies).unwrap();
        assert!((w[0] - 0.8).abs() < 1e-12 && (w[1] - 0.2).abs() < 1e-12);
        let single = vec![(Token::new("movie", "m1"), Some(3.0)), (Token::new("movie", "m2"), None)];
        assert_eq!(movierank_weights(&single).unwrap(), vec![1.0, 0.0]);
        let none = vec![(Token::new("movie", "m1"), None)];
        let mut r = rng::Rng::seed_from_u64(1);
        assert!(matches!(movierank_sample("d", &none, 6, &mut r), Err(CorpusError::NoRankedMovies(_))));
    }

    #[test]
    fn base_corpus_one_sentence_per_row_in_order() {
        let rows = (0..5).map(|i| row("d1", "Drama", 0.5, &format!("m{i}"), 2000 + i, Some(5.0))).collect();
        let v = view(rows);
        let c = build_corpus(&v, &CorpusConfig::new(Strategy::Base, 3)).unwrap();
        assert_eq!(c.sentences.len(), 5);
        assert_eq!(c.sentences[2][0].to_string(), "director=d1");
        assert_eq!(c.sentences[2][4].to_string(), "movie=m2");
    }

    fn three_genre_view() -> DenormalizedView {
        view(vec![
            row("d1", "Mystery", 0.6, "m1", 1990, Some(8.0)),
            row("d1", "Comedy", 0.2, "m1", 1990, Some(8.0)),
            row("d1", "Drama", 0.7, "m1", 1990, Some(8.0)),
            row("d1", "Mystery", 0.6, "m2", 1995, Some(2.0)),
            row("d1", "Comedy", 0.2, "m2", 1995, Some(2.0)),
            row("d1", "Drama", 0.7, "m2", 1995, Some(2.0)),
        ])
    }

    #[test]
    fn genre_sentence_has_six_genres_and_the_director() {
        let c = build_corpus(&three_genre_view(), &CorpusConfig::new(Strategy::Genre, 9)).unwrap();
        assert_eq!(c.sentences.len(), 1);
        let s = &c.sentences[0];
        assert_eq!(s.iter().filter(|t| t.namespace() == "genre").count(), 6);
        assert_eq!(s.iter().filter(|t| t.to_string() == "director=d1").count(), 1);
        // raw probabilities and excluded names are gone
        assert!(s.iter().all(|t| t.namespace() != "gprob" && t.namespace() != "director_first"));
        // distinct attribute tokens: 2 movies, 2 years, 2 ranks
        assert_eq!(s.len(), 1 + 6 + 6);
    }

    #[test]
    fn movierank_sentence_extends_genre_sentence() {
        let c = build_corpus(&three_genre_view(), &CorpusConfig::new(Strategy::MovieRank, 9)).unwrap();
        let s = &c.sentences[0];
        assert_eq!(s.iter().filter(|t| t.namespace() == "genre").count(), 6);
        // each movie once as an attribute plus six draws
        assert_eq!(s.iter().filter(|t| t.namespace() == "movie").count(), 2 + 6);
    }

    #[test]
    fn unranked_director_keeps_genre_sentence() {
        let v = view(vec![row("d1", "Drama", 1.0, "m1", 1990, None), row("d2", "Drama", 0.0, "m2", 1990, Some(3.0))]);
        let c = build_corpus(&v, &CorpusConfig::new(Strategy::MovieRank, 1)).unwrap();
        assert_eq!(c.sentences.len(), 1);
        assert_eq!(c.stats.unranked, ["d1"]);
        assert_eq!(c.stats.ineligible, ["d2"]);
    }

    #[test]
    fn corpus_is_deterministic_and_writes_lines() {
        let a = build_corpus(&three_genre_view(), &CorpusConfig::new(Strategy::MovieRank, 4)).unwrap();
        let b = build_corpus(&three_genre_view(), &CorpusConfig::new(Strategy::MovieRank, 4)).unwrap();
        assert_eq!(a, b);
        let mut buf = Vec::new();
        a.write_to(&mut buf).unwrap();
        let back = read_sentences(buf.as_slice()).unwrap();
        assert_eq!(back, a.sentences);
    }

    #[test]
    fn bad_corpus_line_reports_line_number() {
        let err = read_sentences("a=1 b=2\nnope\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }
}
