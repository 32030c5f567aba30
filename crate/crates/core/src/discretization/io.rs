//! Field serialization.
//!
//! CSV layout (all numbers in shortest round-trip form):
//!
//! ```text
//! # config_hash=<hex>        (optional metadata line)
//! nx,ny,h
//! <nx>,<ny>,<h>
//! <ny rows of nx comma-separated values, row-major>
//! ```
//!
//! Binary layout, little-endian throughout:
//!
//! ```text
//! magic   8 bytes  "FBFIELD1"
//! nx      u64
//! ny      u64
//! h       f64
//! hashlen u32, followed by hashlen bytes of UTF-8 config hash
//! values  nx * ny f64, row-major
//! ```

use std::fmt::Write as _;
use std::io::{self, BufRead, Read, Write};

use thiserror::Error;

use super::field::Field;

pub const BINARY_MAGIC: &[u8; 8] = b"FBFIELD1";

#[derive(Debug, Error)]
pub enum FieldIoError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("malformed field file: {0}")]
    Schema(String),
}

/// A field together with its shape header.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldFile {
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
    pub config_hash: Option<String>,
    pub field: Field,
}

fn schema(msg: impl Into<String>) -> FieldIoError {
    FieldIoError::Schema(msg.into())
}

impl FieldFile {
    pub fn to_csv_string(&self) -> String {
        let mut s = String::new();
        if let Some(hash) = &self.config_hash {
            let _ = writeln!(s, "# config_hash={hash}");
        }
        let _ = writeln!(s, "nx,ny,h");
        let _ = writeln!(s, "{},{},{:?}", self.nx, self.ny, self.h);
        for row in self.field.chunks(self.nx) {
            let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            let _ = writeln!(s, "{}", line.join(","));
        }
        s
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<(), FieldIoError> {
        w.write_all(self.to_csv_string().as_bytes())?;
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self, FieldIoError> {
        let mut lines = r.lines();
        let mut config_hash = None;
        let mut first = lines.next().ok_or_else(|| schema("empty file"))??;
        if let Some(rest) = first.strip_prefix("# config_hash=") {
            config_hash = Some(rest.trim().to_string());
            first = lines.next().ok_or_else(|| schema("missing header"))??;
        }
        if first.trim() != "nx,ny,h" {
            return Err(schema(format!("expected header 'nx,ny,h', found '{first}'")));
        }
        let dims = lines.next().ok_or_else(|| schema("missing shape line"))??;
        let parts: Vec<&str> = dims.trim().split(',').collect();
        if parts.len() != 3 {
            return Err(schema("shape line must have three entries"));
        }
        let nx: usize = parts[0].parse().map_err(|_| schema("bad nx"))?;
        let ny: usize = parts[1].parse().map_err(|_| schema("bad ny"))?;
        let h: f64 = parts[2].parse().map_err(|_| schema("bad h"))?;
        if nx == 0 || ny == 0 {
            return Err(schema("empty shape"));
        }
        let mut values = Vec::with_capacity(nx * ny);
        for (row, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let before = values.len();
            for tok in line.split(',') {
                values.push(
                    tok.trim()
                        .parse::<f64>()
                        .map_err(|_| schema(format!("bad value '{tok}' in row {row}")))?,
                );
            }
            if values.len() - before != nx {
                return Err(schema(format!("row {row} has {} values, expected {nx}", values.len() - before)));
            }
        }
        if values.len() != nx * ny {
            return Err(schema(format!("expected {} values, found {}", nx * ny, values.len())));
        }
        Ok(FieldFile {
            nx,
            ny,
            h,
            config_hash,
            field: Field::from_vec(values),
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let hash = self.config_hash.as_deref().unwrap_or("").as_bytes();
        let mut out = Vec::with_capacity(36 + hash.len() + 8 * self.field.len());
        out.extend_from_slice(BINARY_MAGIC);
        out.extend_from_slice(&(self.nx as u64).to_le_bytes());
        out.extend_from_slice(&(self.ny as u64).to_le_bytes());
        out.extend_from_slice(&self.h.to_le_bytes());
        out.extend_from_slice(&(hash.len() as u32).to_le_bytes());
        out.extend_from_slice(hash);
        for v in self.field.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<(), FieldIoError> {
        w.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self, FieldIoError> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, FieldIoError> {
        let take = |off: &mut usize, n: usize| -> Result<&[u8], FieldIoError> {
            let s = bytes
                .get(*off..*off + n)
                .ok_or_else(|| schema("truncated binary field"))?;
            *off += n;
            Ok(s)
        };
        let mut off = 0;
        if take(&mut off, 8)? != BINARY_MAGIC {
            return Err(schema("bad magic"));
        }
        let nx = u64::from_le_bytes(take(&mut off, 8)?.try_into().unwrap()) as usize;
        let ny = u64::from_le_bytes(take(&mut off, 8)?.try_into().unwrap()) as usize;
        let h = f64::from_le_bytes(take(&mut off, 8)?.try_into().unwrap());
        let hl = u32::from_le_bytes(take(&mut off, 4)?.try_into().unwrap()) as usize;
        let hash = std::str::from_utf8(take(&mut off, hl)?)
            .map_err(|_| schema("config hash is not UTF-8"))?
            .to_string();
        let count = nx
            .checked_mul(ny)
            .ok_or_else(|| schema("shape overflow"))?;
        if bytes.len() - off != 8 * count {
            return Err(schema(format!(
                "expected {} value bytes, found {}",
                8 * count,
                bytes.len() - off
            )));
        }
        let values = bytes[off..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(FieldFile {
            nx,
            ny,
            h,
            config_hash: if hash.is_empty() { None } else { Some(hash) },
            field: Field::from_vec(values),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn file(values: Vec<f64>, nx: usize) -> FieldFile {
        let ny = values.len() / nx;
        FieldFile {
            nx,
            ny,
            h: 1.0 / 64.0,
            config_hash: Some("abc123".into()),
            field: Field::from_vec(values),
        }
    }

    proptest! {
        #[test]
        fn csv_and_binary_round_trip_bit_exactly(
            raw in proptest::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 1..8usize)
                .prop_flat_map(|row| (Just(row.len()), proptest::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), row.len() * 3)))
        ) {
            let (nx, values) = raw;
            let f = file(values, nx);
            let csv = FieldFile::read_csv(f.to_csv_string().as_bytes()).unwrap();
            let bin = FieldFile::from_bytes(&f.to_bytes()).unwrap();
            for g in [&csv, &bin] {
                prop_assert_eq!(g.nx, f.nx);
                prop_assert_eq!(g.ny, f.ny);
                prop_assert_eq!(g.h.to_bits(), f.h.to_bits());
                prop_assert_eq!(&g.config_hash, &f.config_hash);
                for (a, b) in g.field.iter().zip(f.field.iter()) {
                    prop_assert_eq!(a.to_bits(), b.to_bits());
                }
            }
        }
    }

    #[test]
    fn rejects_malformed_input() {
        assert!(FieldFile::read_csv("nx,ny\n1,1\n0\n".as_bytes()).is_err());
        assert!(FieldFile::read_csv("nx,ny,h\n2,1,0.5\n1.0\n".as_bytes()).is_err());
        let mut bytes = file(vec![1.0, 2.0], 2).to_bytes();
        bytes.pop();
        assert!(FieldFile::from_bytes(&bytes).is_err());
        assert!(FieldFile::from_bytes(b"NOTMAGIC").is_err());
    }

    #[test]
    fn csv_without_hash_line() {
        let f = FieldFile::read_csv("nx,ny,h\n2,1,0.5\n1.0,-0.0\n".as_bytes()).unwrap();
        assert_eq!(f.config_hash, None);
        assert_eq!(f.field.len(), 2);
        assert!(f.field[1].is_sign_negative());
    }
}
