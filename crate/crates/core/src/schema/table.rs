use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use super::{ColumnKind, Schema, SchemaError, TableSpec};

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Text(String),
    Int(i64),
    Real(f64),
}

impl Value {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(i) => Some(*i as f64),
            Value::Real(r) => Some(*r),
            Value::Text(_) => None,
        }
    }

    pub fn as_i64(&self) -> Option<i64> {
        match self {
            Value::Int(i) => Some(*i),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Text(s) => Some(s),
            _ => None,
        }
    }

    /// Equality key used for joins and key uniqueness.
    pub fn key(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Text(s) => f.write_str(s),
            Value::Int(i) => write!(f, "{i}"),
            Value::Real(r) => write!(f, "{r}"),
        }
    }
}

/// One table row, cells in the order of the table's column specs.
pub type Row = Vec<Option<Value>>;

fn parse_cell(
    spec: &TableSpec,
    col: usize,
    raw: &str,
    row: usize,
) -> Result<Option<Value>, SchemaError> {
    if raw.is_empty() {
        return Ok(None);
    }
    let c = &spec.columns[col];
    let bad = || SchemaError::BadCell {
        table: spec.name.clone(),
        row,
        column: c.name.clone(),
        value: raw.to_string(),
        kind: c.kind,
    };
    let value = match c.kind {
        ColumnKind::Id | ColumnKind::Categorical => Value::Text(raw.to_string()),
        ColumnKind::Integer | ColumnKind::Year => {
            Value::Int(raw.trim().parse::<i64>().map_err(|_| bad())?)
        }
        ColumnKind::Real => {
            let v: f64 = raw.trim().parse().map_err(|_| bad())?;
            if !v.is_finite() {
                return Err(bad());
            }
            if let Some(d) = c.discretize {
                let (lo, hi, range) = d.range();
                if v < lo || v > hi {
                    return Err(SchemaError::OutOfRange {
                        table: spec.name.clone(),
                        row,
                        column: c.name.clone(),
                        value: v,
                        range,
                    });
                }
            }
            Value::Real(v)
        }
    };
    Ok(Some(value))
}

fn key_of(spec: &TableSpec, row: &Row) -> Option<String> {
    let mut parts = Vec::with_capacity(spec.primary_key.len());
    for &i in &spec.primary_key {
        parts.push(row[i].as_ref()?.key());
    }
    Some(parts.join(","))
}

/// Reads one CSV table. The header must name exactly the spec's columns, in
/// any order. Row numbers in errors are 1-based data rows.
pub fn load_table<R: Read>(reader: R, spec: &TableSpec) -> Result<Vec<Row>, SchemaError> {
    let csv_err = |e: csv::Error| SchemaError::Csv {
        table: spec.name.clone(),
        message: e.to_string(),
    };
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(str::to_string)
        .collect();
    let expected: Vec<String> = spec.columns.iter().map(|c| c.name.clone()).collect();
    let mut position = vec![usize::MAX; expected.len()];
    let mismatch = || SchemaError::HeaderMismatch {
        table: spec.name.clone(),
        expected: expected.clone(),
        found: header.clone(),
    };
    if header.len() != expected.len() {
        return Err(mismatch());
    }
    for (file_idx, name) in header.iter().enumerate() {
        let spec_idx = spec.column_index(name).ok_or_else(mismatch)?;
        if position[spec_idx] != usize::MAX {
            return Err(mismatch());
        }
        position[spec_idx] = file_idx;
    }

    let mut rows = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record.map_err(csv_err)?;
        let row_no = i + 1;
        let mut row = Vec::with_capacity(expected.len());
        for (col, &file_idx) in position.iter().enumerate() {
            row.push(parse_cell(spec, col, record.get(file_idx).unwrap_or(""), row_no)?);
        }
        let key = key_of(spec, &row).ok_or_else(|| SchemaError::NullPrimaryKey {
            table: spec.name.clone(),
            row: row_no,
        })?;
        if let Some(first) = seen.insert(key.clone(), row_no) {
            return Err(SchemaError::DuplicatePrimaryKey {
                table: spec.name.clone(),
                key,
                first,
                second: row_no,
            });
        }
        rows.push(row);
    }
    Ok(rows)
}

/// A foreign-key value with no matching primary key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DanglingRef {
    pub table: String,
    pub row: usize,
    pub column: String,
    pub value: String,
    pub references: String,
}

impl fmt::Display for DanglingRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} row {}: {} = `{}` has no match in {}",
            self.table, self.row, self.column, self.value, self.references
        )
    }
}

/// Typed rows for every table in a schema.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Database {
    pub tables: BTreeMap<String, Vec<Row>>,
}

impl Database {
    pub fn rows(&self, table: &str) -> &[Row] {
        self.tables.get(table).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn row_count(&self) -> usize {
        self.tables.values().map(Vec::len).sum()
    }

    /// Lists every non-null foreign-key value that does not resolve.
    pub fn dangling_refs(&self, schema: &Schema) -> Vec<DanglingRef> {
        let mut out = Vec::new();
        for j in &schema.joins {
            let (Some(child), Some(parent)) = (schema.table(&j.child), schema.table(&j.parent))
            else {
                continue;
            };
            let cc = child.column_index(&j.child_column).unwrap();
            let pc = parent.column_index(&j.parent_column).unwrap();
            let keys: HashSet<String> = self
                .rows(&j.parent)
                .iter()
                .filter_map(|r| r[pc].as_ref().map(Value::key))
                .collect();
            for (i, r) in self.rows(&j.child).iter().enumerate() {
                if let Some(v) = &r[cc] {
                    if !keys.contains(&v.key()) {
                        out.push(DanglingRef {
                            table: j.child.clone(),
                            row: i + 1,
                            column: j.child_column.clone(),
                            value: v.key(),
                            references: format!("{}.{}", j.parent, j.parent_column),
                        });
                    }
                }
            }
        }
        out
    }
}

/// Loads `<dir>/<table>.csv` for every table in the schema.
pub fn load_database(schema: &Schema, dir: impl AsRef<Path>) -> crate::Result<Database> {
    let dir = dir.as_ref();
    let mut db = Database::default();
    for t in &schema.tables {
        let path = dir.join(format!("{}.csv", t.name));
        let file = std::fs::File::open(&path).map_err(|e| crate::Error::io(&path, e))?;
        let rows = load_table(std::io::BufReader::new(file), t)?;
        db.tables.insert(t.name.clone(), rows);
    }
    Ok(db)
}

/// Writes every table as `<dir>/<table>.csv`.
pub fn write_database(schema: &Schema, db: &Database, dir: impl AsRef<Path>) -> crate::Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| crate::Error::io(dir, e))?;
    for t in &schema.tables {
        let path = dir.join(format!("{}.csv", t.name));
        let mut buf = Vec::new();
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            let io = |e: csv::Error| crate::Error::io(&path, std::io::Error::other(e));
            w.write_record(t.columns.iter().map(|c| c.name.as_str()))
                .map_err(io)?;
            for row in db.rows(&t.name) {
                w.write_record(
                    row.iter()
                        .map(|c| c.as_ref().map(Value::to_string).unwrap_or_default()),
                )
                .map_err(io)?;
            }
            w.flush().map_err(|e| crate::Error::io(&path, e))?;
        }
        let mut f = std::fs::File::create(&path).map_err(|e| crate::Error::io(&path, e))?;
        f.write_all(&buf).map_err(|e| crate::Error::io(&path, e))?;
    }
    Ok(())
}
