use std::io::{Read, Write};

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::CorrelationMatrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const MAGIC: &[u8; 4] = b"CNCM";
const VERSION: u16 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum MatrixFormat {
    #[default]
    Csv,
    Json,
}

impl MatrixFormat {
    pub fn extension(self) -> &'static str {
        match self {
            MatrixFormat::Csv => "csv",
            MatrixFormat::Json => "json",
        }
    }
}

#[derive(Serialize, Deserialize)]
struct JsonMatrix {
    corner: String,
    labels: Vec<String>,
    values: Vec<Vec<f64>>,
}

/// Writes a square matrix with a label header row and label first column.
pub fn write_labeled_matrix<W: Write, T: Scalar>(
    writer: W,
    format: MatrixFormat,
    corner: &str,
    labels: &[String],
    values: ArrayView2<'_, T>,
) -> Result<()> {
    match format {
        MatrixFormat::Csv => {
            let mut w = csv::Writer::from_writer(writer);
            let mut header = vec![corner.to_string()];
            header.extend(labels.iter().cloned());
            w.write_record(&header)?;
            for (label, row) in labels.iter().zip(values.outer_iter()) {
                let mut rec = vec![label.clone()];
                rec.extend(row.iter().map(|v| v.to_string()));
                w.write_record(&rec)?;
            }
            w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        }
        MatrixFormat::Json => {
            let doc = JsonMatrix {
                corner: corner.to_string(),
                labels: labels.to_vec(),
                values: values
                    .outer_iter()
                    .map(|row| row.iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect())
                    .collect(),
            };
            serde_json::to_writer_pretty(writer, &doc)?;
        }
    }
    Ok(())
}

/// Reads back a CSV written by [`write_labeled_matrix`]; returns labels and values.
pub fn read_labeled_matrix_csv<R: Read, T: Scalar>(reader: R) -> Result<(Vec<String>, Array2<T>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let labels: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    let n = labels.len();
    let mut values = Array2::zeros((n, n));
    let mut rows = 0;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if i >= n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: i + 1,
            });
        }
        if &rec[0] != labels[i].as_str() {
            return Err(Error::Parse {
                location: format!("row {}", i + 2),
                message: format!(
                    "row label {:?} does not match column {:?}",
                    &rec[0], labels[i]
                ),
            });
        }
        for j in 0..n {
            let raw = rec.get(j + 1).ok_or_else(|| Error::Parse {
                location: format!("row {}", i + 2),
                message: "short row".into(),
            })?;
            let v: f64 = raw.parse().map_err(|_| Error::Parse {
                location: format!("row {}, column {}", i + 2, j + 2),
                message: format!("not a number: {raw:?}"),
            })?;
            values[[i, j]] = T::lit(v);
        }
        rows += 1;
    }
    if rows != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: rows,
        });
    }
    Ok((labels, values))
}

pub fn write_correlation_csv<W: Write, T: Scalar>(
    writer: W,
    c: &CorrelationMatrix<T>,
) -> Result<()> {
    write_labeled_matrix(writer, MatrixFormat::Csv, "ticker", c.tickers(), c.rho())
}

pub fn read_correlation_csv<R: Read, T: Scalar>(reader: R) -> Result<CorrelationMatrix<T>> {
    let (tickers, rho) = read_labeled_matrix_csv(reader)?;
    CorrelationMatrix::new(tickers, rho, None)
}

/// Compact binary cache entry: magic, version, window id, tickers, then
/// row-major little-endian f64 values.
pub fn write_binary_matrix<W: Write, T: Scalar>(mut w: W, c: &CorrelationMatrix<T>) -> Result<()> {
    let io = |e| Error::io("<binary matrix>", e);
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    let id = c.window_id().map_or(u64::MAX, |k| k as u64);
    buf.extend_from_slice(&id.to_le_bytes());
    buf.extend_from_slice(&(c.len() as u32).to_le_bytes());
    for t in c.tickers() {
        buf.extend_from_slice(&(t.len() as u32).to_le_bytes());
        buf.extend_from_slice(t.as_bytes());
    }
    for v in c.rho().iter() {
        buf.extend_from_slice(&v.to_f64().unwrap_or(f64::NAN).to_le_bytes());
    }
    w.write_all(&buf).map_err(io)
}

pub fn read_binary_matrix<R: Read, T: Scalar>(mut r: R) -> Result<CorrelationMatrix<T>> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)
        .map_err(|e| Error::io("<binary matrix>", e))?;
    let mut cur = Cursor {
        bytes: &bytes,
        pos: 0,
    };
    if cur.take(4)? != MAGIC {
        return Err(cur.err("bad magic"));
    }
    let version = u16::from_le_bytes(cur.take(2)?.try_into().expect("2 bytes"));
    if version != VERSION {
        return Err(cur.err("unsupported version"));
    }
    let id = cur.u64()?;
    let n = cur.u32()? as usize;
    let mut tickers = Vec::with_capacity(n);
    for _ in 0..n {
        let len = cur.u32()? as usize;
        let s = std::str::from_utf8(cur.take(len)?).map_err(|_| cur.err("ticker not UTF-8"))?;
        tickers.push(s.to_string());
    }
    let mut rho = Array2::zeros((n, n));
    for v in rho.iter_mut() {
        *v = T::lit(f64::from_le_bytes(
            cur.take(8)?.try_into().expect("8 bytes"),
        ));
    }
    if cur.pos != bytes.len() {
        return Err(cur.err("trailing bytes"));
    }
    let window_id = (id != u64::MAX).then_some(id as usize);
    CorrelationMatrix::new(tickers, rho, window_id)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| self.err("truncated"))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    fn err(&self, msg: &str) -> Error {
        Error::Parse {
            location: format!("binary matrix byte {}", self.pos),
            message: msg.into(),
        }
    }
}
