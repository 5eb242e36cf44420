//! Schema description, typed table loading, denormalization and synthetic
//! databases.
//!
//! A schema is a TOML document listing tables (each with typed columns and
//! one primary key) and primary-key/foreign-key join edges written as
//! `child.fk -> parent.pk`:
//!
//! ```toml
//! joins = ["movies_directors.director_id -> directors.id"]
//!
//! [[tables]]
//! name = "directors"
//! primary_key = "id"
//! columns = [
//!     { name = "id", kind = "id", token = "director" },
//!     { name = "first_name", kind = "categorical" },
//! ]
//! ```
//!
//! Column kinds are `id`, `categorical`, `integer`, `real` and `year`. Real
//! columns may carry `discretize = "rank"` (nearest integer in `[0, 10]`) or
//! `discretize = "prob"` (nearest tenth in `[0, 1]`). `token` sets the token
//! namespace; foreign keys inherit the namespace of the key they reference.

mod join;
pub mod synth;
mod table;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use join::{denormalize, denormalize_subset, DenormalizedView, ViewColumn};
pub use table::{load_database, load_table, write_database, Database, DanglingRef, Row, Value};

/// The IMDB-style movie schema shipped with the crate.
pub const IMDB_SCHEMA: &str = include_str!("../../schemas/imdb.toml");

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("schema parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("duplicate {what} name `{name}`")]
    DuplicateName { what: &'static str, name: String },
    #[error("empty {0} name")]
    EmptyName(&'static str),
    #[error("unknown table `{0}`")]
    UnknownTable(String),
    #[error("unknown column `{column}` in table `{table}`")]
    UnknownColumn { table: String, column: String },
    #[error("table `{0}` must declare a primary key")]
    MissingPrimaryKey(String),
    #[error("invalid join `{edge}`: {reason}")]
    InvalidJoin { edge: String, reason: String },
    #[error("invalid column `{column}`: {reason}")]
    InvalidColumn { column: String, reason: String },
    #[error("{table}: header mismatch: expected columns {expected:?}, found {found:?}")]
    HeaderMismatch {
        table: String,
        expected: Vec<String>,
        found: Vec<String>,
    },
    #[error("{table}: row {row}, column `{column}`: cannot parse `{value}` as {kind}")]
    BadCell {
        table: String,
        row: usize,
        column: String,
        value: String,
        kind: ColumnKind,
    },
    #[error("{table}: row {row}, column `{column}`: value {value} outside {range}")]
    OutOfRange {
        table: String,
        row: usize,
        column: String,
        value: f64,
        range: &'static str,
    },
    #[error("{table}: row {row}: null primary key")]
    NullPrimaryKey { table: String, row: usize },
    #[error("{table}: duplicate primary key `{key}` (rows {first} and {second})")]
    DuplicatePrimaryKey {
        table: String,
        key: String,
        first: usize,
        second: usize,
    },
    #[error("{table}: CSV error: {message}")]
    Csv { table: String, message: String },
    #[error("join graph reachable from `{0}` contains a cycle")]
    CyclicJoin(String),
    #[error("table `{table}` is not reachable from `{root}`")]
    Unreachable { root: String, table: String },
    #[error("infeasible synthetic parameters: {0}")]
    InfeasibleParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Id,
    Categorical,
    Integer,
    Real,
    Year,
}

impl fmt::Display for ColumnKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ColumnKind::Id => "id",
            ColumnKind::Categorical => "categorical",
            ColumnKind::Integer => "integer",
            ColumnKind::Real => "real",
            ColumnKind::Year => "year",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Discretizer {
    /// Nearest integer, values restricted to `[0, 10]`.
    Rank,
    /// Nearest multiple of 0.1, values restricted to `[0, 1]`.
    Prob,
}

impl Discretizer {
    pub fn range(&self) -> (f64, f64, &'static str) {
        match self {
            Discretizer::Rank => (0.0, 10.0, "[0, 10]"),
            Discretizer::Prob => (0.0, 1.0, "[0, 1]"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
    /// Token namespace used when the column's cells become words.
    pub namespace: String,
    pub discretize: Option<Discretizer>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableSpec {
    pub name: String,
    pub columns: Vec<ColumnSpec>,
    /// Column indices of the primary key (single column or composite).
    pub primary_key: Vec<usize>,
}

impl TableSpec {
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JoinEdge {
    pub child: String,
    pub child_column: String,
    pub parent: String,
    pub parent_column: String,
}

impl fmt::Display for JoinEdge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}.{} -> {}.{}",
            self.child, self.child_column, self.parent, self.parent_column
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Schema {
    pub tables: Vec<TableSpec>,
    pub joins: Vec<JoinEdge>,
}

impl Schema {
    pub fn table(&self, name: &str) -> Option<&TableSpec> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn table_index(&self, name: &str) -> Option<usize> {
        self.tables.iter().position(|t| t.name == name)
    }

    pub fn column_count(&self) -> usize {
        self.tables.iter().map(|t| t.columns.len()).sum()
    }

    pub fn imdb() -> Schema {
        load_schema(IMDB_SCHEMA).expect("bundled schema is valid")
    }

    pub fn from_file(path: impl AsRef<Path>) -> crate::Result<Schema> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| crate::Error::io(path, e))?;
        Ok(load_schema(&text)?)
    }

    /// Renders the schema back into the config format.
    pub fn to_config_text(&self) -> String {
        let inherited = self.inherited_namespaces();
        let config = SchemaConfig {
            joins: self.joins.iter().map(|j| j.to_string()).collect(),
            tables: self
                .tables
                .iter()
                .map(|t| TableConfig {
                    name: t.name.clone(),
                    primary_key: if t.primary_key.len() == 1 {
                        PrimaryKey::One(t.columns[t.primary_key[0]].name.clone())
                    } else {
                        PrimaryKey::Many(
                            t.primary_key
                                .iter()
                                .map(|&i| t.columns[i].name.clone())
                                .collect(),
                        )
                    },
                    columns: t
                        .columns
                        .iter()
                        .map(|c| {
                            let implied = inherited
                                .get(&(t.name.clone(), c.name.clone()))
                                .cloned()
                                .unwrap_or_else(|| c.name.clone());
                            ColumnConfig {
                                name: c.name.clone(),
                                kind: c.kind,
                                token: (c.namespace != implied).then(|| c.namespace.clone()),
                                discretize: c.discretize,
                            }
                        })
                        .collect(),
                })
                .collect(),
        };
        toml::to_string(&config).expect("schema config serializes")
    }

    /// Namespace each foreign-key column would inherit without an explicit
    /// `token`.
    fn inherited_namespaces(&self) -> BTreeMap<(String, String), String> {
        let mut out = BTreeMap::new();
        for j in &self.joins {
            if let Some(parent) = self.table(&j.parent) {
                if let Some(pc) = parent.column_index(&j.parent_column) {
                    out.insert(
                        (j.child.clone(), j.child_column.clone()),
                        parent.columns[pc].namespace.clone(),
                    );
                }
            }
        }
        out
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SchemaConfig {
    #[serde(default)]
    joins: Vec<String>,
    tables: Vec<TableConfig>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TableConfig {
    name: String,
    primary_key: PrimaryKey,
    columns: Vec<ColumnConfig>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum PrimaryKey {
    One(String),
    Many(Vec<String>),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ColumnConfig {
    name: String,
    kind: ColumnKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    token: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    discretize: Option<Discretizer>,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn parse_edge(raw: &str) -> Result<JoinEdge, SchemaError> {
    let bad = |reason: &str| SchemaError::InvalidJoin {
        edge: raw.to_string(),
        reason: reason.to_string(),
    };
    let (lhs, rhs) = raw
        .split_once("->")
        .ok_or_else(|| bad("expected `child.fk -> parent.pk`"))?;
    let split = |side: &str| -> Result<(String, String), SchemaError> {
        let (t, c) = side
            .trim()
            .split_once('.')
            .ok_or_else(|| bad("expected `table.column`"))?;
        if t.is_empty() || c.is_empty() {
            return Err(bad("expected `table.column`"));
        }
        Ok((t.to_string(), c.to_string()))
    };
    let (child, child_column) = split(lhs)?;
    let (parent, parent_column) = split(rhs)?;
    Ok(JoinEdge {
        child,
        child_column,
        parent,
        parent_column,
    })
}

fn valid_namespace(ns: &str) -> bool {
    !ns.is_empty() && !ns.contains('=') && !ns.chars().any(char::is_whitespace)
}

/// Parses and validates a schema config.
pub fn load_schema(text: &str) -> Result<Schema, SchemaError> {
    let config: SchemaConfig = toml::from_str(text).map_err(|e| SchemaError::Parse {
        line: e.span().map(|s| line_of(text, s.start)).unwrap_or(0),
        message: e.message().to_string(),
    })?;

    let mut table_names = BTreeSet::new();
    let mut tables = Vec::with_capacity(config.tables.len());
    let mut explicit_tokens = Vec::new();
    for t in &config.tables {
        if t.name.trim().is_empty() {
            return Err(SchemaError::EmptyName("table"));
        }
        if !table_names.insert(t.name.clone()) {
            return Err(SchemaError::DuplicateName {
                what: "table",
                name: t.name.clone(),
            });
        }
        let mut column_names = BTreeSet::new();
        let mut columns = Vec::with_capacity(t.columns.len());
        let mut tokens = Vec::with_capacity(t.columns.len());
        for c in &t.columns {
            if c.name.trim().is_empty() {
                return Err(SchemaError::EmptyName("column"));
            }
            if !column_names.insert(c.name.clone()) {
                return Err(SchemaError::DuplicateName {
                    what: "column",
                    name: format!("{}.{}", t.name, c.name),
                });
            }
            if c.discretize.is_some() && c.kind != ColumnKind::Real {
                return Err(SchemaError::InvalidColumn {
                    column: format!("{}.{}", t.name, c.name),
                    reason: "only real columns can be discretized".into(),
                });
            }
            if let Some(tok) = &c.token {
                if !valid_namespace(tok) {
                    return Err(SchemaError::InvalidColumn {
                        column: format!("{}.{}", t.name, c.name),
                        reason: format!("token namespace `{tok}` must be non-empty without `=` or whitespace"),
                    });
                }
            }
            columns.push(ColumnSpec {
                name: c.name.clone(),
                kind: c.kind,
                namespace: c.name.clone(),
                discretize: c.discretize,
            });
            tokens.push(c.token.clone());
        }
        let key_names: Vec<&String> = match &t.primary_key {
            PrimaryKey::One(k) => vec![k],
            PrimaryKey::Many(ks) => ks.iter().collect(),
        };
        if key_names.is_empty() {
            return Err(SchemaError::MissingPrimaryKey(t.name.clone()));
        }
        let mut primary_key = Vec::with_capacity(key_names.len());
        for k in key_names {
            let idx = columns
                .iter()
                .position(|c| &c.name == k)
                .ok_or_else(|| SchemaError::UnknownColumn {
                    table: t.name.clone(),
                    column: k.clone(),
                })?;
            if primary_key.contains(&idx) {
                return Err(SchemaError::DuplicateName {
                    what: "primary-key column",
                    name: k.clone(),
                });
            }
            primary_key.push(idx);
        }
        tables.push(TableSpec {
            name: t.name.clone(),
            columns,
            primary_key,
        });
        explicit_tokens.push(tokens);
    }

    let mut joins = Vec::with_capacity(config.joins.len());
    for raw in &config.joins {
        let edge = parse_edge(raw)?;
        let bad = |reason: String| SchemaError::InvalidJoin {
            edge: raw.clone(),
            reason,
        };
        let child = tables
            .iter()
            .find(|t| t.name == edge.child)
            .ok_or_else(|| SchemaError::UnknownTable(edge.child.clone()))?;
        let parent = tables
            .iter()
            .find(|t| t.name == edge.parent)
            .ok_or_else(|| SchemaError::UnknownTable(edge.parent.clone()))?;
        let cc = child
            .column_index(&edge.child_column)
            .ok_or_else(|| SchemaError::UnknownColumn {
                table: edge.child.clone(),
                column: edge.child_column.clone(),
            })?;
        let pc = parent
            .column_index(&edge.parent_column)
            .ok_or_else(|| SchemaError::UnknownColumn {
                table: edge.parent.clone(),
                column: edge.parent_column.clone(),
            })?;
        if parent.primary_key != [pc] {
            return Err(bad(format!(
                "`{}.{}` is not the single-column primary key of `{}`",
                edge.parent, edge.parent_column, edge.parent
            )));
        }
        let (ck, pk) = (child.columns[cc].kind, parent.columns[pc].kind);
        if ck != pk {
            return Err(bad(format!("column kinds differ ({ck} vs {pk})")));
        }
        if !matches!(ck, ColumnKind::Id | ColumnKind::Integer | ColumnKind::Categorical) {
            return Err(bad(format!("cannot join on {ck} columns")));
        }
        if joins.contains(&edge) {
            return Err(SchemaError::DuplicateName {
                what: "join",
                name: raw.clone(),
            });
        }
        joins.push(edge);
    }

    // Resolve namespaces: explicit token, else the referenced key's
    // namespace for foreign keys, else the column name.
    for (t, tokens) in tables.iter_mut().zip(&explicit_tokens) {
        for (c, tok) in t.columns.iter_mut().zip(tokens) {
            if let Some(tok) = tok {
                c.namespace = tok.clone();
            }
        }
    }
    let mut fk_namespace = Vec::new();
    for j in &joins {
        let parent = tables.iter().find(|t| t.name == j.parent).unwrap();
        let ns = parent.columns[parent.column_index(&j.parent_column).unwrap()]
            .namespace
            .clone();
        fk_namespace.push((j.child.clone(), j.child_column.clone(), ns));
    }
    for (ti, t) in tables.iter_mut().enumerate() {
        for (ci, c) in t.columns.iter_mut().enumerate() {
            if explicit_tokens[ti][ci].is_some() {
                continue;
            }
            if let Some((_, _, ns)) = fk_namespace
                .iter()
                .find(|(tn, cn, _)| *tn == t.name && *cn == c.name)
            {
                c.namespace = ns.clone();
            } else if !valid_namespace(&c.namespace) {
                return Err(SchemaError::InvalidColumn {
                    column: format!("{}.{}", t.name, c.name),
                    reason: "column name is not a valid token namespace; set `token`".into(),
                });
            }
        }
    }

    Ok(Schema { tables, joins })
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_TABLES: &str = r#"
joins = ["movies_directors.director_id -> directors.id"]

[[tables]]
name = "directors"
primary_key = "id"
columns = [
    { name = "id", kind = "id", token = "director" },
    { name = "first_name", kind = "categorical" },
]

[[tables]]
name = "movies_directors"
primary_key = ["director_id", "movie_id"]
columns = [
    { name = "director_id", kind = "id" },
    { name = "movie_id", kind = "id", token = "movie" },
]
"#;

    #[test]
    fn two_table_config_has_one_join() {
        let s = load_schema(TWO_TABLES).unwrap();
        assert_eq!(s.tables.len(), 2);
        assert_eq!(s.joins.len(), 1);
        assert_eq!(s.joins[0].to_string(), "movies_directors.director_id -> directors.id");
        // foreign key inherits the referenced namespace
        assert_eq!(s.table("movies_directors").unwrap().columns[0].namespace, "director");
    }

    #[test]
    fn join_on_missing_column_names_the_column() {
        let text = TWO_TABLES.replace("director_id -> directors.id", "director_id -> directors.ident");
        let err = load_schema(&text).unwrap_err();
        assert!(err.to_string().contains("ident"), "{err}");
    }

    #[test]
    fn join_on_missing_table() {
        let text = TWO_TABLES.replace("-> directors.id", "-> people.id");
        assert!(matches!(load_schema(&text), Err(SchemaError::UnknownTable(t)) if t == "people"));
    }

    #[test]
    fn duplicate_names_rejected() {
        let text = TWO_TABLES.replace("name = \"movies_directors\"", "name = \"directors\"");
        assert!(matches!(
            load_schema(&text),
            Err(SchemaError::DuplicateName { what: "table", .. })
        ));
        let text = TWO_TABLES.replace("\"first_name\"", "\"id\"");
        assert!(matches!(
            load_schema(&text),
            Err(SchemaError::DuplicateName { what: "column", .. })
        ));
    }

    #[test]
    fn parse_error_reports_line() {
        let text = "joins = []\n[[tables]]\nname = \"x\"\nprimary_key = \ncolumns = []\n";
        match load_schema(text) {
            Err(SchemaError::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bundled_imdb_schema_has_seven_tables_and_21_columns() {
        let s = Schema::imdb();
        assert_eq!(s.tables.len(), 7);
        assert_eq!(s.column_count(), 21);
        assert_eq!(s.joins.len(), 6);
    }

    #[test]
    fn config_text_round_trips() {
        let s = Schema::imdb();
        let again = load_schema(&s.to_config_text()).unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn discretize_only_on_real_columns() {
        let text = TWO_TABLES.replace(
            "{ name = \"first_name\", kind = \"categorical\" }",
            "{ name = \"first_name\", kind = \"categorical\", discretize = \"rank\" }",
        );
        assert!(matches!(load_schema(&text), Err(SchemaError::InvalidColumn { .. })));
    }
}
