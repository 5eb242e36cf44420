//! Recurrent model files.
//!
//! Binary layout, little endian:
//!
//! ```text
//! magic "RELSEQ\0\0" | version u32 | variant u8 | d u32 | h u32
//! table rows u32 | per row: token length u32, token bytes, d f64
//! parameter count u64 | f64 values
//! ```

use std::io::{Read, Write};
use std::path::Path;

use super::{FrozenTable, Layout, SeqError, SeqModel, Variant};
use crate::error::FormatError;

const MAGIC: &[u8; 8] = b"RELSEQ\0\0";
const VERSION: u32 = 1;
const WHAT: &str = "sequence model";

fn truncated(expected: &str) -> crate::Error {
    FormatError::Truncated {
        what: WHAT,
        expected: expected.into(),
        found: "end of file".into(),
    }
    .into()
}

struct Reader<R> {
    inner: R,
}

impl<R: Read> Reader<R> {
    fn bytes<const N: usize>(&mut self, what: &str) -> crate::Result<[u8; N]> {
        let mut b = [0u8; N];
        self.inner.read_exact(&mut b).map_err(|_| truncated(what))?;
        Ok(b)
    }

    fn u32(&mut self, what: &str) -> crate::Result<u32> {
        Ok(u32::from_le_bytes(self.bytes(what)?))
    }

    fn u64(&mut self, what: &str) -> crate::Result<u64> {
        Ok(u64::from_le_bytes(self.bytes(what)?))
    }

    fn f64s(&mut self, n: usize, what: &str) -> crate::Result<Vec<f64>> {
        let mut out = Vec::with_capacity(n.min(1 << 24));
        for _ in 0..n {
            out.push(f64::from_le_bytes(self.bytes(what)?));
        }
        Ok(out)
    }
}

impl SeqModel {
    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&[self.variant.code()])?;
        w.write_all(&(self.layout.d as u32).to_le_bytes())?;
        w.write_all(&(self.layout.h as u32).to_le_bytes())?;
        w.write_all(&(self.table.len() as u32).to_le_bytes())?;
        for (i, t) in self.table.tokens().iter().enumerate() {
            w.write_all(&(t.len() as u32).to_le_bytes())?;
            w.write_all(t.as_bytes())?;
            for v in self.table.row(i) {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        w.write_all(&(self.params.len() as u64).to_le_bytes())?;
        for v in &self.params {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()
    }

    pub fn read_from<R: Read>(reader: R) -> crate::Result<Self> {
        let mut r = Reader { inner: reader };
        let magic: [u8; 8] = r.bytes("magic")?;
        if &magic != MAGIC {
            return Err(FormatError::BadHeader {
                what: WHAT,
                header: String::from_utf8_lossy(&magic).into_owned(),
            }
            .into());
        }
        let version = r.u32("version")?;
        if version != VERSION {
            return Err(FormatError::Version {
                what: WHAT,
                found: version,
                expected: VERSION,
            }
            .into());
        }
        let [code] = r.bytes::<1>("variant")?;
        let variant = Variant::from_code(code)
            .ok_or_else(|| SeqError::InvalidConfig(format!("unknown variant code {code}")))?;
        let d = r.u32("dim")? as usize;
        let h = r.u32("hidden")? as usize;
        let rows = r.u32("table size")? as usize;
        let mut tokens = Vec::with_capacity(rows.min(1 << 20));
        let mut vectors = Vec::new();
        for _ in 0..rows {
            let len = r.u32("token length")? as usize;
            let mut buf = vec![0u8; len];
            r.inner.read_exact(&mut buf).map_err(|_| truncated("token"))?;
            tokens.push(String::from_utf8(buf).map_err(|_| SeqError::MissingData("token is not UTF-8".into()))?);
            vectors.extend(r.f64s(d, "token vector")?);
        }
        let table = FrozenTable::new(d, tokens, vectors)?;
        let layout = Layout::new(d, h, variant);
        let n = r.u64("parameter count")? as usize;
        if n != layout.len() {
            return Err(SeqError::InvalidConfig(format!(
                "{n} parameters, layout needs {}",
                layout.len()
            ))
            .into());
        }
        let params = r.f64s(n, "parameters")?;
        let mut extra = [0u8; 1];
        if r.inner.read(&mut extra).map_err(|e| crate::Error::io(WHAT, e))? != 0 {
            return Err(FormatError::BadHeader {
                what: WHAT,
                header: "trailing bytes after parameters".into(),
            }
            .into());
        }
        Ok(SeqModel {
            variant,
            layout,
            params,
            table,
        })
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

    /// Human-readable dump of every matrix, one row per line.
    pub fn write_text<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let l = &self.layout;
        writeln!(w, "relemb-seq v{VERSION} variant={} d={} h={}", self.variant, l.d, l.h)?;
        writeln!(w, "table rows={}", self.table.len())?;
        for (i, t) in self.table.tokens().iter().enumerate() {
            write!(w, "{t}")?;
            for v in self.table.row(i) {
                write!(w, " {v}")?;
            }
            writeln!(w)?;
        }
        let mut blocks = vec![
            ("W_x", l.wx(), 4 * l.h, l.input()),
            ("W_h", l.wh(), 4 * l.h, l.h),
            ("b", l.b(), 1, 4 * l.h),
            ("P", l.p(), l.input(), l.h),
            ("p", l.pb(), 1, l.input()),
        ];
        if l.concat {
            blocks.push(("A_actor", l.a_actor(), l.d, 3 * l.d));
            blocks.push(("A_role", l.a_role(), l.d, 3 * l.d));
        }
        for (name, off, rows, cols) in blocks {
            writeln!(w, "{name} {rows}x{cols}")?;
            for r in 0..rows {
                let row: Vec<String> = self.params[off + r * cols..off + (r + 1) * cols]
                    .iter()
                    .map(f64::to_string)
                    .collect();
                writeln!(w, "{}", row.join(" "))?;
            }
        }
        w.flush()
    }
}
