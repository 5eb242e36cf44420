use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};
use std::path::Path;

use super::EvalError;
use crate::error::FormatError;

/// Entities with their inlink sources, plus the total page count `W`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkGraph {
    total: usize,
    inlinks: BTreeMap<String, BTreeSet<String>>,
}

impl LinkGraph {
    pub fn new(total: usize, inlinks: BTreeMap<String, BTreeSet<String>>) -> Result<Self, EvalError> {
        if total < 2 {
            return Err(EvalError::InvalidGraph(format!("W = {total}, need at least 2")));
        }
        if total < inlinks.len() {
            return Err(EvalError::InvalidGraph(format!(
                "W = {total} is below the entity count {}",
                inlinks.len()
            )));
        }
        if let Some((e, _)) = inlinks.iter().find(|(_, s)| s.iter().any(|x| x.is_empty() || x.contains(','))) {
            return Err(EvalError::InvalidGraph(format!("bad inlink id for `{e}`")));
        }
        Ok(LinkGraph { total, inlinks })
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn len(&self) -> usize {
        self.inlinks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inlinks.is_empty()
    }

    pub fn contains(&self, e: &str) -> bool {
        self.inlinks.contains_key(e)
    }

    /// Entity ids in sorted order.
    pub fn entities(&self) -> impl Iterator<Item = &str> {
        self.inlinks.keys().map(String::as_str)
    }

    pub fn inlinks(&self, e: &str) -> Option<&BTreeSet<String>> {
        self.inlinks.get(e)
    }

    /// `W=<count>` header, then `entity<TAB>in1,in2,...` per entity.
    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "W={}", self.total)?;
        for (e, links) in &self.inlinks {
            let joined: Vec<&str> = links.iter().map(String::as_str).collect();
            writeln!(w, "{e}\t{}", joined.join(","))?;
        }
        w.flush()
    }

    pub fn read_from<R: BufRead>(reader: R) -> crate::Result<Self> {
        const WHAT: &str = "link graph";
        let mut lines = reader.lines();
        let header = match lines.next() {
            Some(l) => l.map_err(|e| crate::Error::io(WHAT, e))?,
            None => {
                return Err(FormatError::Truncated {
                    what: WHAT,
                    expected: "W=<count> header".into(),
                    found: "empty file".into(),
                }
                .into())
            }
        };
        let total: usize = header
            .strip_prefix("W=")
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| FormatError::BadHeader {
                what: WHAT,
                header: header.clone(),
            })?;
        let mut inlinks = BTreeMap::new();
        for (i, line) in lines.enumerate() {
            let line = line.map_err(|e| crate::Error::io(WHAT, e))?;
            if line.is_empty() {
                continue;
            }
            let (e, rest) = line.split_once('\t').unwrap_or((line.as_str(), ""));
            if e.is_empty() {
                return Err(FormatError::Line {
                    what: WHAT,
                    line: i + 2,
                    message: "empty entity id".into(),
                }
                .into());
            }
            let set: BTreeSet<String> = rest.split(',').filter(|s| !s.is_empty()).map(str::to_string).collect();
            if inlinks.insert(e.to_string(), set).is_some() {
                return Err(FormatError::Line {
                    what: WHAT,
                    line: i + 2,
                    message: format!("duplicate entity `{e}`"),
                }
                .into());
            }
        }
        Ok(LinkGraph::new(total, inlinks)?)
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

/// Inlink relatedness
/// `1 - (ln max(|A|,|B|) - ln |A&B|) / (ln W - ln min(|A|,|B|))`,
/// clamped to `[0, 1]`; 0 without overlap, 1 for `a == b`.
pub fn milne_witten(a: &str, b: &str, g: &LinkGraph) -> Result<f64, EvalError> {
    let sa = g.inlinks(a).ok_or_else(|| EvalError::UnknownEntity(a.into()))?;
    let sb = g.inlinks(b).ok_or_else(|| EvalError::UnknownEntity(b.into()))?;
    if a == b {
        return Ok(1.0);
    }
    let common = sa.intersection(sb).count();
    if common == 0 || sa.is_empty() || sb.is_empty() {
        return Ok(0.0);
    }
    let (la, lb) = (sa.len() as f64, sb.len() as f64);
    let denom = (g.total() as f64).ln() - la.min(lb).ln();
    if denom <= 0.0 {
        return Ok(1.0);
    }
    let raw = 1.0 - (la.max(lb).ln() - (common as f64).ln()) / denom;
    Ok(raw.clamp(0.0, 1.0))
}

/// Top `n` entities by relatedness to `query`: self and zero scores
/// excluded, ties by id.
pub fn gold_list(query: &str, g: &LinkGraph, n: usize) -> Result<Vec<String>, EvalError> {
    if !g.contains(query) {
        return Err(EvalError::UnknownEntity(query.into()));
    }
    let mut scored = Vec::new();
    for e in g.entities() {
        if e == query {
            continue;
        }
        let s = milne_witten(query, e, g)?;
        if s > 0.0 {
            scored.push((e, s));
        }
    }
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    scored.truncate(n);
    Ok(scored.into_iter().map(|(e, _)| e.to_string()).collect())
}
