//! Summary CSV: `run_id,instructions_executed,label_placeholder,<26 signals>,final`.
//! One row per interval entry, then one row with `final=1`. The column order
//! is part of the dataset contract.

use std::io::{Read, Write};

use thiserror::Error;

use super::collector::{StreamEntry, SummaryStream};
use super::signals::{Signal, SignalSummary, NUM_SIGNALS};

pub const LEADING_COLUMNS: [&str; 3] = ["run_id", "instructions_executed", "label_placeholder"];
pub const FINAL_COLUMN: &str = "final";

#[derive(Debug, Error)]
pub enum SummaryCsvError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("unexpected header: {0}")]
    Header(String),
    #[error("row {row}: {message}")]
    Row { row: usize, message: String },
}

pub fn header() -> Vec<&'static str> {
    LEADING_COLUMNS
        .into_iter()
        .chain(Signal::names())
        .chain(std::iter::once(FINAL_COLUMN))
        .collect()
}

/// One parsed CSV row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SummaryRow {
    pub run_id: String,
    pub instructions_executed: u64,
    /// `None` when the placeholder column is empty.
    pub label: Option<u8>,
    pub summary: SignalSummary,
    pub is_final: bool,
}

pub struct SummaryCsvWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> SummaryCsvWriter<W> {
    pub fn new(writer: W) -> Result<Self, SummaryCsvError> {
        let mut inner = csv::Writer::from_writer(writer);
        inner.write_record(header())?;
        Ok(SummaryCsvWriter { inner })
    }

    pub fn write_row(
        &mut self,
        run_id: &str,
        instructions_executed: u64,
        label: Option<u8>,
        summary: &SignalSummary,
        is_final: bool,
    ) -> Result<(), SummaryCsvError> {
        let mut record: Vec<String> = Vec::with_capacity(NUM_SIGNALS + 4);
        record.push(run_id.to_string());
        record.push(instructions_executed.to_string());
        record.push(label.map(|l| l.to_string()).unwrap_or_default());
        record.extend(summary.values().iter().map(|v| v.to_string()));
        record.push(if is_final { "1" } else { "0" }.to_string());
        self.inner.write_record(&record)?;
        Ok(())
    }

    /// Writes every interval entry and the final row of `stream`.
    pub fn write_stream(
        &mut self,
        run_id: &str,
        label: Option<u8>,
        stream: &SummaryStream,
    ) -> Result<(), SummaryCsvError> {
        for entry in &stream.entries {
            self.write_row(run_id, entry.instructions_executed, label, &entry.summary, false)?;
        }
        let total = stream.final_summary[Signal::InsCount] as u64;
        self.write_row(run_id, total, label, &stream.final_summary, true)
    }

    pub fn finish(mut self) -> Result<W, SummaryCsvError> {
        self.inner.flush()?;
        self.inner
            .into_inner()
            .map_err(|e| SummaryCsvError::Io(e.into_error()))
    }
}

pub fn read_rows<R: Read>(reader: R) -> Result<Vec<SummaryRow>, SummaryCsvError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let found: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if found != header() {
        return Err(SummaryCsvError::Header(found.join(",")));
    }
    let mut rows = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let bad = |message: String| SummaryCsvError::Row { row: i + 1, message };
        let int = |idx: usize| -> Result<i64, SummaryCsvError> {
            record[idx]
                .parse::<i64>()
                .map_err(|_| bad(format!("column {} is not an integer", header()[idx])))
        };
        let mut values = [0i64; NUM_SIGNALS];
        for (k, v) in values.iter_mut().enumerate() {
            *v = int(3 + k)?;
        }
        let label = match &record[2] {
            "" => None,
            "0" => Some(0),
            "1" => Some(1),
            other => return Err(bad(format!("bad label `{other}`"))),
        };
        rows.push(SummaryRow {
            run_id: record[0].to_string(),
            instructions_executed: u64::try_from(int(1)?)
                .map_err(|_| bad("negative instruction count".into()))?,
            label,
            summary: SignalSummary::from_values(values),
            is_final: int(3 + NUM_SIGNALS)? == 1,
        });
    }
    Ok(rows)
}

/// Reassembles the stream of one run from its rows (interval rows followed
/// by the final row).
pub fn stream_from_rows(rows: &[SummaryRow], interval_size: u64) -> Option<SummaryStream> {
    let (last, rest) = rows.split_last()?;
    if !last.is_final || rest.iter().any(|r| r.is_final) {
        return None;
    }
    Some(SummaryStream {
        interval_size,
        entries: rest
            .iter()
            .map(|r| StreamEntry {
                instructions_executed: r.instructions_executed,
                summary: r.summary,
            })
            .collect(),
        final_summary: last.summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_is_fixed() {
        let h = header();
        assert_eq!(h.len(), 30);
        assert_eq!(&h[..4], &["run_id", "instructions_executed", "label_placeholder", "InsCount"]);
        assert_eq!(h[28], "StoreAddrDiff");
        assert_eq!(h[29], "final");
    }

    #[test]
    fn writes_and_reads_back() {
        let mut values = *SignalSummary::default().values();
        values[0] = 12;
        let s = SignalSummary::from_values(values);
        let stream = SummaryStream {
            interval_size: 10,
            entries: vec![StreamEntry { instructions_executed: 10, summary: s }],
            final_summary: s,
        };
        let mut w = SummaryCsvWriter::new(Vec::new()).unwrap();
        w.write_stream("run-a", Some(1), &stream).unwrap();
        let bytes = w.finish().unwrap();
        let rows = read_rows(bytes.as_slice()).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1].instructions_executed, 12);
        assert!(rows[1].is_final);
        assert_eq!(rows[0].label, Some(1));
        assert_eq!(stream_from_rows(&rows, 10).unwrap(), stream);
    }
}
