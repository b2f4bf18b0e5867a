//! Field serialization: CSV (node, value) and a compact binary format.
//!
//! Binary layout: 16-byte magic, little-endian u64 count, then `count`
//! little-endian f64 values.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const FIELD_MAGIC: &[u8; 16] = b"WCRV-FIELD-v1\0\0\0";

pub fn write_csv<W: Write>(w: W, values: &[f64]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["node", "value"])?;
    for (i, v) in values.iter().enumerate() {
        wr.write_record([i.to_string(), format!("{v:e}")])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(r: R) -> Result<Vec<f64>> {
    let mut rd = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for (k, rec) in rd.records().enumerate() {
        let rec = rec?;
        let idx: usize = rec
            .get(0)
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| Error::FieldFormat(format!("row {k}: bad node index")))?;
        if idx != k {
            return Err(Error::FieldFormat(format!("row {k}: node index {idx} out of order")));
        }
        let v: f64 = rec
            .get(1)
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| Error::FieldFormat(format!("row {k}: bad value")))?;
        out.push(v);
    }
    Ok(out)
}

pub fn write_binary<W: Write>(mut w: W, values: &[f64]) -> Result<()> {
    w.write_all(FIELD_MAGIC)?;
    w.write_all(&(values.len() as u64).to_le_bytes())?;
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_binary<R: Read>(mut r: R) -> Result<Vec<f64>> {
    let mut magic = [0u8; 16];
    r.read_exact(&mut magic)?;
    if &magic != FIELD_MAGIC {
        return Err(Error::FieldFormat("bad magic header".into()));
    }
    let mut len = [0u8; 8];
    r.read_exact(&mut len)?;
    let n = u64::from_le_bytes(len) as usize;
    let mut buf = vec![0u8; 8 * n];
    r.read_exact(&mut buf).map_err(|_| Error::FieldFormat(format!("expected {n} values")))?;
    Ok(buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
}

/// Reads a field by extension: `.csv` or binary otherwise.
pub fn read_path(path: &Path) -> Result<Vec<f64>> {
    let f = std::fs::File::open(path)?;
    if path.extension().is_some_and(|e| e == "csv") {
        read_csv(f)
    } else {
        read_binary(std::io::BufReader::new(f))
    }
}

pub fn write_path(path: &Path, values: &[f64]) -> Result<()> {
    let f = std::fs::File::create(path)?;
    if path.extension().is_some_and(|e| e == "csv") {
        write_csv(f, values)
    } else {
        write_binary(std::io::BufWriter::new(f), values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_roundtrip_is_exact() {
        let v = vec![0.1, -2.5e-300, 1.0 / 3.0, 7.0];
        let mut buf = Vec::new();
        write_csv(&mut buf, &v).unwrap();
        assert_eq!(read_csv(&buf[..]).unwrap(), v);
    }

    #[test]
    fn binary_roundtrip_and_magic() {
        let v = vec![1.5, f64::MIN_POSITIVE, -0.0];
        let mut buf = Vec::new();
        write_binary(&mut buf, &v).unwrap();
        assert_eq!(&buf[..16], FIELD_MAGIC);
        assert_eq!(buf.len(), 16 + 8 + 24);
        assert_eq!(read_binary(&buf[..]).unwrap(), v);
        buf[0] = b'X';
        assert!(matches!(read_binary(&buf[..]), Err(Error::FieldFormat(_))));
    }
}
