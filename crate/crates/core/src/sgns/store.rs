use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::Path;

use super::SgnsError;
use crate::error::FormatError;
use crate::linalg;

/// Token vectors with cosine queries.
///
/// Text format: a `<count> <dim>` header, then `token v1 ... vd` per line
/// with six decimals.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    dim: usize,
    vectors: Vec<f64>,
}

impl EmbeddingStore {
    pub fn new(tokens: Vec<String>, dim: usize, vectors: Vec<f64>) -> Result<Self, SgnsError> {
        if vectors.len() != tokens.len() * dim {
            return Err(SgnsError::InvalidConfig(format!(
                "{} tokens of dim {dim} need {} values, got {}",
                tokens.len(),
                tokens.len() * dim,
                vectors.len()
            )));
        }
        if let Some(bad) = vectors.iter().position(|v| !v.is_finite()) {
            return Err(SgnsError::NonFinite(format!("vector of `{}`", tokens[bad / dim.max(1)])));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(SgnsError::InvalidConfig(format!("duplicate token `{t}`")));
            }
        }
        Ok(EmbeddingStore {
            tokens,
            index,
            dim,
            vectors,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
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

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn vector(&self, token: &str) -> Option<&[f64]> {
        self.index
            .get(token)
            .map(|&i| &self.vectors[i * self.dim..(i + 1) * self.dim])
    }

    fn vector_or_err(&self, token: &str) -> Result<&[f64], SgnsError> {
        self.vector(token)
            .ok_or_else(|| SgnsError::UnknownToken(token.to_string()))
    }

    pub fn cosine(&self, a: &str, b: &str) -> Result<f64, SgnsError> {
        Ok(linalg::cosine(self.vector_or_err(a)?, self.vector_or_err(b)?))
    }

    /// The `k` most cosine-similar tokens passing `filter`, query excluded,
    /// ties broken by token.
    pub fn top_k<F>(&self, query: &str, k: usize, filter: F) -> Result<Vec<(String, f64)>, SgnsError>
    where
        F: Fn(&str) -> bool,
    {
        let q = self.vector_or_err(query)?;
        let mut scored: Vec<(&str, f64)> = self
            .tokens
            .iter()
            .enumerate()
            .filter(|(_, t)| t.as_str() != query && filter(t))
            .map(|(i, t)| {
                (
                    t.as_str(),
                    linalg::cosine(q, &self.vectors[i * self.dim..(i + 1) * self.dim]),
                )
            })
            .collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        scored.truncate(k);
        Ok(scored.into_iter().map(|(t, s)| (t.to_string(), s)).collect())
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{} {}", self.tokens.len(), self.dim)?;
        let mut line = String::new();
        for (i, t) in self.tokens.iter().enumerate() {
            line.clear();
            line.push_str(t);
            for v in &self.vectors[i * self.dim..(i + 1) * self.dim] {
                line.push_str(&format!(" {v:.6}"));
            }
            writeln!(w, "{line}")?;
        }
        w.flush()
    }

    pub fn read_from<R: BufRead>(reader: R) -> crate::Result<Self> {
        const WHAT: &str = "embedding file";
        let mut lines = reader.lines();
        let header = match lines.next() {
            Some(l) => l.map_err(|e| crate::Error::io(WHAT, e))?,
            None => {
                return Err(FormatError::Truncated {
                    what: WHAT,
                    expected: "header".into(),
                    found: "empty file".into(),
                }
                .into())
            }
        };
        let bad_header = || FormatError::BadHeader {
            what: WHAT,
            header: header.clone(),
        };
        let mut parts = header.split_whitespace();
        let count: usize = parts.next().and_then(|s| s.parse().ok()).ok_or_else(bad_header)?;
        let dim: usize = parts.next().and_then(|s| s.parse().ok()).ok_or_else(bad_header)?;
        if parts.next().is_some() {
            return Err(bad_header().into());
        }
        let mut tokens = Vec::with_capacity(count);
        let mut vectors = Vec::with_capacity(count * dim);
        for (n, line) in lines.enumerate() {
            let line = line.map_err(|e| crate::Error::io(WHAT, e))?;
            if line.is_empty() {
                continue;
            }
            if tokens.len() == count {
                return Err(FormatError::Line {
                    what: WHAT,
                    line: n + 2,
                    message: format!("more than {count} vectors"),
                }
                .into());
            }
            let mut fields = line.split(' ');
            let token = fields.next().unwrap_or_default().to_string();
            let before = vectors.len();
            for f in fields {
                let v: f64 = f.parse().map_err(|_| FormatError::Line {
                    what: WHAT,
                    line: n + 2,
                    message: format!("bad number `{f}`"),
                })?;
                vectors.push(v);
            }
            if vectors.len() - before != dim {
                return Err(FormatError::Line {
                    what: WHAT,
                    line: n + 2,
                    message: format!("expected {dim} values, found {}", vectors.len() - before),
                }
                .into());
            }
            tokens.push(token);
        }
        if tokens.len() != count {
            return Err(FormatError::Truncated {
                what: WHAT,
                expected: format!("{count} vectors"),
                found: format!("{}", tokens.len()),
            }
            .into());
        }
        Ok(EmbeddingStore::new(tokens, dim, vectors)?)
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
