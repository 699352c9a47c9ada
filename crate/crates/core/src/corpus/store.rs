//! On-disk corpus layout:
//!
//! ```text
//! <root>/corpus.json          metadata and build configuration
//! <root>/manifest.jsonl       one RunRecord per execution
//! <root>/summaries/<run>.csv  interval stream of each retained run
//! <root>/dataset.csv          final summary of each retained run, labeled
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::build::{Corpus, CorpusMeta, RunRecord};
use super::CorpusError;
use crate::instrument::csvio::{read_rows, stream_from_rows, SummaryCsvWriter};

pub const META_FILE: &str = "corpus.json";
pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const DATASET_FILE: &str = "dataset.csv";
pub const SUMMARY_DIR: &str = "summaries";

pub fn write_corpus(corpus: &Corpus, root: &Path) -> Result<(), CorpusError> {
    fs::create_dir_all(root.join(SUMMARY_DIR))?;
    let mut meta = serde_json::to_string_pretty(&corpus.meta)?;
    meta.push('\n');
    fs::write(root.join(META_FILE), meta)?;

    let mut manifest = BufWriter::new(fs::File::create(root.join(MANIFEST_FILE))?);
    for record in &corpus.records {
        serde_json::to_writer(&mut manifest, record)?;
        manifest.write_all(b"\n")?;
    }
    manifest.flush()?;

    let mut dataset = SummaryCsvWriter::new(BufWriter::new(fs::File::create(
        root.join(DATASET_FILE),
    )?))?;
    for record in corpus.retained() {
        let (Some(file), Some(stream)) = (&record.summary_file, corpus.streams.get(&record.run_id))
        else {
            continue;
        };
        let mut w = SummaryCsvWriter::new(BufWriter::new(fs::File::create(root.join(file))?))?;
        w.write_stream(&record.run_id, record.label, stream)?;
        w.finish()?.flush()?;
        let total = stream.final_summary[crate::instrument::Signal::InsCount] as u64;
        dataset.write_row(&record.run_id, total, record.label, &stream.final_summary, true)?;
    }
    dataset.finish()?.flush()?;
    Ok(())
}

pub fn load_corpus(root: &Path) -> Result<Corpus, CorpusError> {
    let meta: CorpusMeta = serde_json::from_str(&fs::read_to_string(root.join(META_FILE))?)?;
    let mut records = Vec::new();
    let manifest = BufReader::new(fs::File::open(root.join(MANIFEST_FILE))?);
    for line in manifest.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str::<RunRecord>(&line)?);
    }
    let mut streams = BTreeMap::new();
    for record in records.iter().filter(|r| r.retained()) {
        let file = record.summary_file.as_ref().ok_or_else(|| {
            CorpusError::Format(format!("run {} has no summary file", record.run_id))
        })?;
        let rows = read_rows(fs::File::open(root.join(file))?)?;
        if rows.iter().any(|r| r.run_id != record.run_id || r.label != record.label) {
            return Err(CorpusError::Format(format!(
                "{file}: rows do not match manifest entry {}",
                record.run_id
            )));
        }
        let stream = stream_from_rows(&rows, meta.config.interval)
            .ok_or_else(|| CorpusError::Format(format!("{file}: malformed stream")))?;
        streams.insert(record.run_id.clone(), stream);
    }
    let corpus = Corpus {
        meta,
        records,
        streams,
    };
    if corpus.retained().next().is_none() {
        return Err(CorpusError::EmptyCorpus);
    }
    Ok(corpus)
}
