use std::collections::{HashMap, VecDeque};

use super::table::{Database, Row};
use super::{ColumnSpec, Schema, SchemaError};

#[derive(Debug, Clone, PartialEq)]
pub struct ViewColumn {
    pub table: String,
    pub spec: ColumnSpec,
}

impl ViewColumn {
    pub fn qualified(&self) -> String {
        format!("{}.{}", self.table, self.spec.name)
    }
}

/// The materialized inner join of every table reachable from a root.
///
/// Foreign-key columns used by a join are coalesced into the primary key
/// they reference, so each entity appears once per row.
#[derive(Debug, Clone, PartialEq)]
pub struct DenormalizedView {
    pub root: String,
    pub columns: Vec<ViewColumn>,
    pub rows: Vec<Row>,
}

impl DenormalizedView {
    pub fn column_index(&self, qualified: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.qualified() == qualified)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// One BFS step: join `table` through `edge`.
#[derive(Debug, Clone)]
struct Step {
    table: usize,
    edge: Option<usize>,
}

/// BFS order of the tables reachable from `root`, restricted to `allowed`.
fn plan(schema: &Schema, root: usize, allowed: &[bool]) -> Result<Vec<Step>, SchemaError> {
    let n = schema.tables.len();
    let mut reached_by: Vec<Option<Option<usize>>> = vec![None; n];
    reached_by[root] = Some(None);
    let mut order = vec![Step {
        table: root,
        edge: None,
    }];
    let mut queue = VecDeque::from([root]);
    let cyclic = || SchemaError::CyclicJoin(schema.tables[root].name.clone());
    while let Some(u) = queue.pop_front() {
        let uname = &schema.tables[u].name;
        for (ei, e) in schema.joins.iter().enumerate() {
            if reached_by[u] == Some(Some(ei)) {
                continue;
            }
            let other = if &e.child == uname {
                &e.parent
            } else if &e.parent == uname {
                &e.child
            } else {
                continue;
            };
            let v = schema.table_index(other).unwrap();
            if !allowed[v] {
                continue;
            }
            if v == u || reached_by[v].is_some() {
                return Err(cyclic());
            }
            reached_by[v] = Some(Some(ei));
            order.push(Step {
                table: v,
                edge: Some(ei),
            });
            queue.push_back(v);
        }
    }
    Ok(order)
}

/// Full inner equi-join over every PK-FK edge reachable from `root_table`.
pub fn denormalize(
    db: &Database,
    schema: &Schema,
    root_table: &str,
) -> Result<DenormalizedView, SchemaError> {
    denormalize_subset(db, schema, root_table, None)
}

/// Like [`denormalize`], limited to `tables` (the root is always included).
/// Every requested table must be connected to the root through requested
/// tables.
pub fn denormalize_subset(
    db: &Database,
    schema: &Schema,
    root_table: &str,
    tables: Option<&[&str]>,
) -> Result<DenormalizedView, SchemaError> {
    let root = schema
        .table_index(root_table)
        .ok_or_else(|| SchemaError::UnknownTable(root_table.to_string()))?;
    let mut allowed = vec![tables.is_none(); schema.tables.len()];
    allowed[root] = true;
    if let Some(ts) = tables {
        for t in ts {
            let i = schema
                .table_index(t)
                .ok_or_else(|| SchemaError::UnknownTable(t.to_string()))?;
            allowed[i] = true;
        }
    }
    let steps = plan(schema, root, &allowed)?;
    if let Some(ts) = tables {
        for t in ts {
            let i = schema.table_index(t).unwrap();
            if !steps.iter().any(|s| s.table == i) {
                return Err(SchemaError::Unreachable {
                    root: root_table.to_string(),
                    table: t.to_string(),
                });
            }
        }
    }

    // Offsets of each joined table inside the wide (unprojected) row.
    let mut offset = vec![usize::MAX; schema.tables.len()];
    let mut width = 0;
    for s in &steps {
        offset[s.table] = width;
        width += schema.tables[s.table].columns.len();
    }
    let wide_col = |table: &str, column: &str| -> usize {
        let ti = schema.table_index(table).unwrap();
        offset[ti] + schema.tables[ti].column_index(column).unwrap()
    };

    let mut rows: Vec<Row> = db.rows(root_table).to_vec();
    let mut dropped = vec![false; width];
    for s in &steps[1..] {
        let e = &schema.joins[s.edge.unwrap()];
        let spec = &schema.tables[s.table];
        let (own_col, other) = if e.child == spec.name {
            (spec.column_index(&e.child_column).unwrap(), wide_col(&e.parent, &e.parent_column))
        } else {
            (spec.column_index(&e.parent_column).unwrap(), wide_col(&e.child, &e.child_column))
        };
        dropped[wide_col(&e.child, &e.child_column)] = true;

        let right = db.rows(&spec.name);
        let mut index: HashMap<String, Vec<usize>> = HashMap::new();
        for (i, r) in right.iter().enumerate() {
            if let Some(v) = &r[own_col] {
                index.entry(v.key()).or_default().push(i);
            }
        }
        let mut next = Vec::with_capacity(rows.len());
        for left in rows {
            let Some(v) = &left[other] else { continue };
            let Some(matches) = index.get(&v.key()) else {
                continue;
            };
            for &m in matches {
                let mut joined = Vec::with_capacity(left.len() + spec.columns.len());
                joined.extend_from_slice(&left);
                joined.extend_from_slice(&right[m]);
                next.push(joined);
            }
        }
        rows = next;
    }

    let mut columns = Vec::new();
    let mut keep = Vec::new();
    for s in &steps {
        let t = &schema.tables[s.table];
        for (ci, c) in t.columns.iter().enumerate() {
            let w = offset[s.table] + ci;
            if !dropped[w] {
                keep.push(w);
                columns.push(ViewColumn {
                    table: t.name.clone(),
                    spec: c.clone(),
                });
            }
        }
    }
    let rows = rows
        .into_iter()
        .map(|r| keep.iter().map(|&w| r[w].clone()).collect())
        .collect();
    Ok(DenormalizedView {
        root: root_table.to_string(),
        columns,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{load_schema, Value};

    fn text(s: &str) -> Option<Value> {
        Some(Value::Text(s.into()))
    }

    fn director_genre_db() -> (Schema, Database) {
        let schema = Schema::imdb();
        let mut db = Database::default();
        for t in &schema.tables {
            db.tables.insert(t.name.clone(), Vec::new());
        }
        db.tables
            .get_mut("directors")
            .unwrap()
            .push(vec![text("d1"), text("Ann"), text("Lee")]);
        db.tables.get_mut("directors_genres").unwrap().extend([
            vec![text("d1"), text("Drama"), Some(Value::Real(0.6))],
            vec![text("d1"), text("Comedy"), Some(Value::Real(0.4))],
            vec![text("d2"), text("Comedy"), Some(Value::Real(1.0))],
        ]);
        (schema, db)
    }

    #[test]
    fn director_with_two_genres_gives_two_rows() {
        let (schema, db) = director_genre_db();
        let v = denormalize_subset(&db, &schema, "directors", Some(&["directors_genres"])).unwrap();
        assert_eq!(v.rows.len(), 2);
        let names: Vec<String> = v.columns.iter().map(ViewColumn::qualified).collect();
        assert_eq!(
            names,
            [
                "directors.id",
                "directors.first_name",
                "directors.last_name",
                "directors_genres.genre",
                "directors_genres.prob"
            ]
        );
    }

    #[test]
    fn dangling_fk_contributes_no_rows() {
        let (schema, db) = director_genre_db();
        let v = denormalize_subset(&db, &schema, "directors_genres", Some(&["directors"])).unwrap();
        // d2 has no director row
        assert_eq!(v.rows.len(), 2);
        assert_eq!(v.columns[0].qualified(), "directors_genres.genre");
        assert_eq!(v.columns[2].qualified(), "directors.id");
    }

    #[test]
    fn full_join_bfs_order() {
        let (schema, db) = director_genre_db();
        let v = denormalize(&db, &schema, "directors").unwrap();
        // no movies, so the inner join is empty
        assert!(v.rows.is_empty());
        let tables: Vec<&str> = v.columns.iter().map(|c| c.table.as_str()).collect();
        let mut dedup = tables.clone();
        dedup.dedup();
        assert_eq!(dedup, ["directors", "directors_genres", "movies", "movies_genres", "roles", "actors"]);
        assert_eq!(v.columns.len(), 15);
    }

    #[test]
    fn unknown_and_unreachable_tables() {
        let (schema, db) = director_genre_db();
        assert!(matches!(
            denormalize(&db, &schema, "studios"),
            Err(SchemaError::UnknownTable(_))
        ));
        assert!(matches!(
            denormalize_subset(&db, &schema, "directors", Some(&["actors"])),
            Err(SchemaError::Unreachable { .. })
        ));
    }

    #[test]
    fn cycle_is_rejected() {
        let text = r#"
joins = ["b.a_id -> a.id", "c.b_id -> b.id", "c.a_id -> a.id"]
[[tables]]
name = "a"
primary_key = "id"
columns = [{ name = "id", kind = "id" }]
[[tables]]
name = "b"
primary_key = "id"
columns = [{ name = "id", kind = "id" }, { name = "a_id", kind = "id" }]
[[tables]]
name = "c"
primary_key = "id"
columns = [{ name = "id", kind = "id" }, { name = "a_id", kind = "id" }, { name = "b_id", kind = "id" }]
"#;
        let schema = load_schema(text).unwrap();
        let db = Database::default();
        assert!(matches!(denormalize(&db, &schema, "a"), Err(SchemaError::CyclicJoin(_))));
        // dropping c breaks the cycle
        assert!(denormalize_subset(&db, &schema, "a", Some(&["b"])).is_ok());
    }
}
