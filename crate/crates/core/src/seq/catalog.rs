use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use rand::Rng as _;

use super::SeqError;
use crate::corpus::cell_token;
use crate::rng;
use crate::schema::{ColumnSpec, Database, Schema, Value};
use crate::sgns::EmbeddingStore;

/// One movie with its component tokens rendered as in the corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct MovieRecord {
    pub id: String,
    pub year: i64,
    pub rank: Option<f64>,
    pub year_token: String,
    pub rank_token: Option<String>,
    pub genres: Vec<String>,
    /// `(actor token, role token)` per cast entry, sorted.
    pub cast: Vec<(String, String)>,
}

/// Movies indexed by id and by director, plus global actor popularity.
#[derive(Debug, Clone)]
pub struct Catalog {
    pub movies: Vec<MovieRecord>,
    index: HashMap<String, usize>,
    /// Director id to movie indices sorted by `(year, id)`.
    by_director: BTreeMap<String, Vec<usize>>,
    directors_of: Vec<BTreeSet<String>>,
    /// Actor token to number of distinct movies.
    popularity: HashMap<String, usize>,
    /// Namespaces of the five movie components.
    pub namespaces: [String; 5],
}

struct Cols<'a> {
    rows: &'a [Vec<Option<Value>>],
    specs: &'a [ColumnSpec],
    index: Vec<usize>,
}

fn table_cols<'a>(schema: &'a Schema, db: &'a Database, table: &str, cols: &[&str]) -> Result<Cols<'a>, SeqError> {
    let spec = schema
        .table(table)
        .ok_or_else(|| SeqError::MissingData(format!("table `{table}`")))?;
    let index = cols
        .iter()
        .map(|c| {
            spec.column_index(c)
                .ok_or_else(|| SeqError::MissingData(format!("column `{table}.{c}`")))
        })
        .collect::<Result<_, _>>()?;
    Ok(Cols {
        rows: db.rows(table),
        specs: &spec.columns,
        index,
    })
}

impl Cols<'_> {
    fn spec(&self, j: usize) -> &ColumnSpec {
        &self.specs[self.index[j]]
    }

    fn cell<'r>(&self, row: &'r [Option<Value>], j: usize) -> Option<&'r Value> {
        row[self.index[j]].as_ref()
    }

    fn token(&self, row: &[Option<Value>], j: usize) -> Result<Option<String>, SeqError> {
        match self.cell(row, j) {
            Some(v) => Ok(Some(cell_token(self.spec(j), v)?.to_string())),
            None => Ok(None),
        }
    }
}

impl Catalog {
    /// Builds the catalog from the `movies`, `movies_genres`, `roles` and
    /// `movies_directors` tables.
    pub fn from_database(schema: &Schema, db: &Database) -> Result<Catalog, SeqError> {
        let movies_t = table_cols(schema, db, "movies", &["id", "year", "rank"])?;
        let genres_t = table_cols(schema, db, "movies_genres", &["movie_id", "genre"])?;
        let roles_t = table_cols(schema, db, "roles", &["actor_id", "movie_id", "role"])?;
        let md_t = table_cols(schema, db, "movies_directors", &["director_id", "movie_id"])?;

        let mut movies = Vec::new();
        for row in movies_t.rows {
            let Some(id) = movies_t.cell(row, 0) else { continue };
            let Some(year) = movies_t.cell(row, 1).and_then(Value::as_i64) else {
                continue;
            };
            movies.push(MovieRecord {
                id: id.to_string(),
                year,
                rank: movies_t.cell(row, 2).and_then(Value::as_f64),
                year_token: movies_t.token(row, 1)?.expect("year is present"),
                rank_token: movies_t.token(row, 2)?,
                genres: Vec::new(),
                cast: Vec::new(),
            });
        }
        movies.sort_by(|a, b| a.id.cmp(&b.id));
        let index: HashMap<String, usize> = movies.iter().enumerate().map(|(i, m)| (m.id.clone(), i)).collect();

        for row in genres_t.rows {
            let (Some(m), Some(g)) = (genres_t.cell(row, 0), genres_t.token(row, 1)?) else {
                continue;
            };
            if let Some(&i) = index.get(&m.to_string()) {
                movies[i].genres.push(g);
            }
        }
        let mut popularity_sets: HashMap<String, HashSet<usize>> = HashMap::new();
        for row in roles_t.rows {
            let (Some(a), Some(m)) = (roles_t.token(row, 0)?, roles_t.cell(row, 1)) else {
                continue;
            };
            let Some(&i) = index.get(&m.to_string()) else { continue };
            let role = roles_t.token(row, 2)?.unwrap_or_default();
            popularity_sets.entry(a.clone()).or_default().insert(i);
            movies[i].cast.push((a, role));
        }
        for m in &mut movies {
            m.genres.sort();
            m.genres.dedup();
            m.cast.sort();
        }
        let mut by_director: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        let mut directors_of = vec![BTreeSet::new(); movies.len()];
        for row in md_t.rows {
            let (Some(d), Some(m)) = (md_t.cell(row, 0), md_t.cell(row, 1)) else {
                continue;
            };
            if let Some(&i) = index.get(&m.to_string()) {
                by_director.entry(d.to_string()).or_default().push(i);
                directors_of[i].insert(d.to_string());
            }
        }
        for seq in by_director.values_mut() {
            seq.sort_by(|&a, &b| (movies[a].year, &movies[a].id).cmp(&(movies[b].year, &movies[b].id)));
            seq.dedup();
        }
        let ns = |c: &Cols, j: usize| c.spec(j).namespace.clone();
        let namespaces = [
            ns(&roles_t, 0),
            ns(&roles_t, 2),
            ns(&genres_t, 1),
            ns(&movies_t, 1),
            ns(&movies_t, 2),
        ];
        Ok(Catalog {
            movies,
            index,
            by_director,
            directors_of,
            popularity: popularity_sets.into_iter().map(|(a, s)| (a, s.len())).collect(),
            namespaces,
        })
    }

    pub fn movie(&self, id: &str) -> Option<&MovieRecord> {
        self.index.get(id).map(|&i| &self.movies[i])
    }

    pub fn movie_index(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn directors(&self) -> impl Iterator<Item = &str> {
        self.by_director.keys().map(String::as_str)
    }

    /// Movie indices of a director in `(year, id)` order.
    pub fn sequence(&self, director: &str) -> &[usize] {
        self.by_director.get(director).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn directors_of(&self, movie: usize) -> &BTreeSet<String> {
        &self.directors_of[movie]
    }

    pub fn movie_counts(&self) -> BTreeMap<String, usize> {
        self.by_director.iter().map(|(d, v)| (d.clone(), v.len())).collect()
    }

    pub fn popularity(&self, actor: &str) -> usize {
        self.popularity.get(actor).copied().unwrap_or(0)
    }

    /// The `n` most frequent cast entries of a movie, ties by actor token.
    pub fn popular_cast(&self, movie: &MovieRecord, n: usize) -> Vec<(String, String)> {
        let mut cast = movie.cast.clone();
        cast.sort_by(|a, b| self.popularity(&b.0).cmp(&self.popularity(&a.0)).then_with(|| a.cmp(b)));
        cast.truncate(n);
        cast
    }
}

/// Frozen token vectors; row 0 is the all-zero padding vector.
#[derive(Debug, Clone, PartialEq)]
pub struct FrozenTable {
    pub dim: usize,
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    vectors: Vec<f64>,
}

pub const PAD: &str = "<pad>";

impl FrozenTable {
    pub fn new(dim: usize, tokens: Vec<String>, vectors: Vec<f64>) -> Result<Self, SeqError> {
        if tokens.first().map(String::as_str) != Some(PAD) || vectors.len() != tokens.len() * dim {
            return Err(SeqError::MissingData("malformed token table".into()));
        }
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Ok(FrozenTable {
            dim,
            tokens,
            index,
            vectors,
        })
    }

    /// Every store token in the catalog's component namespaces, plus
    /// uniform(-0.5/d, 0.5/d) vectors for catalog years the store lacks.
    pub fn build(store: &EmbeddingStore, catalog: &Catalog, seed: u64) -> FrozenTable {
        let d = store.dim();
        let mut tokens = vec![PAD.to_string()];
        let mut vectors = vec![0.0; d];
        let prefixes: Vec<String> = catalog.namespaces.iter().map(|n| format!("{n}=")).collect();
        let mut known: Vec<&String> = store
            .tokens()
            .iter()
            .filter(|t| prefixes.iter().any(|p| t.starts_with(p.as_str())))
            .collect();
        known.sort();
        for t in known {
            tokens.push(t.clone());
            vectors.extend_from_slice(store.vector(t).expect("own token"));
        }
        let years: BTreeSet<&String> = catalog.movies.iter().map(|m| &m.year_token).collect();
        let mut r = rng::stream(seed, "seq-years", 0);
        let bound = 0.5 / d as f64;
        for y in years {
            if !store.contains(y) {
                tokens.push(y.clone());
                vectors.extend((0..d).map(|_| r.random_range(-bound..bound)));
            }
        }
        FrozenTable::new(d, tokens, vectors).expect("padding row present")
    }

    /// Row of `token`, or the padding row.
    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(0)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn vectors(&self) -> &[f64] {
        &self.vectors
    }
}
