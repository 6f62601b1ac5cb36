//! JSON conventions shared by the library and the CLI.
//!
//! Complex numbers are `[re, im]` pairs, matrices are lists of rows.
//! [`to_canonical_string`] emits key-sorted JSON with every float written
//! with 17 significant digits, so equal values always produce equal bytes.

use std::io;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::ser::Formatter;

use crate::linalg::{CMat, C64};

/// Serde adapter for a single matrix as a list of rows.
pub mod matrix {
    use super::*;

    pub fn serialize<S: Serializer>(m: &CMat, s: S) -> Result<S::Ok, S::Error> {
        rows_of(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<CMat, D::Error> {
        let rows = Vec::<Vec<C64>>::deserialize(d)?;
        from_rows(&rows).map_err(D::Error::custom)
    }
}

/// Serde adapter for a list of matrices.
pub mod matrices {
    use super::*;

    pub fn serialize<S: Serializer>(ms: &[CMat], s: S) -> Result<S::Ok, S::Error> {
        ms.iter().map(rows_of).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<CMat>, D::Error> {
        let all = Vec::<Vec<Vec<C64>>>::deserialize(d)?;
        all.iter().map(|rows| from_rows(rows).map_err(D::Error::custom)).collect()
    }
}

pub fn rows_of(m: &CMat) -> Vec<Vec<C64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

pub fn from_rows(rows: &[Vec<C64>]) -> Result<CMat, String> {
    let n = rows.len();
    let m = rows.first().map(|r| r.len()).unwrap_or(0);
    if rows.iter().any(|r| r.len() != m) {
        return Err("ragged matrix rows".into());
    }
    Ok(CMat::from_fn(n, m, |i, j| rows[i][j]))
}

/// Writes floats with 17 significant digits.
struct FixedPrecision;

impl Formatter for FixedPrecision {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        if value == 0.0 {
            // Normalize negative zero.
            return writer.write_all(b"0.0000000000000000e0");
        }
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }
}

/// Key-sorted JSON with fixed 17-significant-digit floats.
pub fn to_canonical_string<T: Serialize>(value: &T) -> serde_json::Result<String> {
    // `serde_json::Value` keeps object keys in a BTreeMap, which sorts them.
    let value = serde_json::to_value(value)?;
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, FixedPrecision);
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(out).expect("serde_json writes UTF-8"))
}
