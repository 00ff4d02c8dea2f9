//! CSV export of logged records.

use crate::simulator::{TimeSeriesRecord, SIGNALS};
use std::io::{self, Write};
use thiserror::Error;

/// Writes a header and one row per record. Returns the number of bytes written.
pub fn write_csv<W: Write>(records: &[TimeSeriesRecord], dest: W) -> io::Result<usize> {
    if records.is_empty() {
        return Err(io::Error::new(io::ErrorKind::InvalidInput, "no records to write"));
    }
    let mut out = ::csv::WriterBuilder::new().terminator(::csv::Terminator::Any(b'\n')).from_writer(Counting { inner: dest, bytes: 0 });
    out.write_record(SIGNALS)?;
    for r in records {
        out.write_record(r.values.iter().map(|v| format!("{v:.16e}")))?;
    }
    out.flush()?;
    let counted = out.into_inner().map_err(|e| e.into_error())?;
    Ok(counted.bytes)
}

struct Counting<W> {
    inner: W,
    bytes: usize,
}

impl<W: Write> Write for Counting<W> {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.bytes += n;
        Ok(n)
    }

    fn flush(&mut self) -> io::Result<()> {
        self.inner.flush()
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum CsvError {
    #[error("header does not match the logged-signal schema")]
    Header,
    #[error("line {line}: {message}")]
    Row { line: usize, message: String },
}

/// Reads text produced by [`write_csv`].
pub fn read_csv(text: &str) -> Result<Vec<TimeSeriesRecord>, CsvError> {
    let mut reader = ::csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let header = reader.headers().map_err(|_| CsvError::Header)?;
    if !header.iter().eq(SIGNALS) {
        return Err(CsvError::Header);
    }
    reader
        .records()
        .enumerate()
        .map(|(k, row)| {
            let bad = |message: String| CsvError::Row { line: k + 2, message };
            let row = row.map_err(|e| bad(e.to_string()))?;
            let mut values = [0.0; SIGNALS.len()];
            for (v, f) in values.iter_mut().zip(&row) {
                *v = f.parse().map_err(|e| bad(format!("`{f}`: {e}")))?;
            }
            Ok(TimeSeriesRecord { values })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(seed: f64) -> TimeSeriesRecord {
        let mut values = [0.0; SIGNALS.len()];
        for (k, v) in values.iter_mut().enumerate() {
            *v = (seed + k as f64).sin() / 3.0 * 10f64.powi(k as i32 - 12);
        }
        TimeSeriesRecord { values }
    }

    #[test]
    fn three_records_four_lines() {
        let recs: Vec<_> = (0..3).map(|k| record(k as f64)).collect();
        let mut buf = Vec::new();
        let n = write_csv(&recs, &mut buf).unwrap();
        assert_eq!(n, buf.len());
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(!text.contains('\r'));
        assert_eq!(text.lines().next().unwrap().split(',').collect::<Vec<_>>(), SIGNALS);
    }

    #[test]
    fn round_trip_is_exact() {
        let recs: Vec<_> = (0..20).map(|k| record(k as f64 * 0.37)).collect();
        let mut buf = Vec::new();
        write_csv(&recs, &mut buf).unwrap();
        let back = read_csv(std::str::from_utf8(&buf).unwrap()).unwrap();
        for (a, b) in recs.iter().zip(&back) {
            for (x, y) in a.values.iter().zip(&b.values) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn empty_input_rejected() {
        assert!(write_csv(&[], Vec::new()).is_err());
    }
}
