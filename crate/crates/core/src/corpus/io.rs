use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::{Corpus, CorpusError, Entry, ExecutionOutcome, TestRecord};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Reads one JSON object per non-blank line.
fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, CorpusError> {
    let file = File::open(path).map_err(io_err(path))?;
    let label = path.display().to_string();
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line).map_err(|e| CorpusError::Malformed {
            file: label.clone(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(item);
    }
    Ok(out)
}

fn write_jsonl<'a, T: Serialize + 'a>(path: &Path, items: impl IntoIterator<Item = &'a T>) -> Result<(), CorpusError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    for item in items {
        let line = serde_json::to_string(item).expect("record types always serialize");
        writeln!(w, "{line}").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_records(path: &Path) -> Result<Vec<TestRecord>, CorpusError> {
    read_jsonl(path)
}

pub fn read_outcomes(path: &Path) -> Result<Vec<ExecutionOutcome>, CorpusError> {
    read_jsonl(path)
}

pub fn write_records<'a>(path: &Path, records: impl IntoIterator<Item = &'a TestRecord>) -> Result<(), CorpusError> {
    write_jsonl(path, records)
}

pub fn write_outcomes<'a>(
    path: &Path,
    outcomes: impl IntoIterator<Item = &'a ExecutionOutcome>,
) -> Result<(), CorpusError> {
    write_jsonl(path, outcomes)
}

pub fn write_corpus(corpus: &Corpus, records: &Path, outcomes: &Path) -> Result<(), CorpusError> {
    write_records(records, corpus.entries().iter().map(|e| &e.record))?;
    write_outcomes(outcomes, corpus.entries().iter().map(|e| &e.outcome))
}

/// Loads and joins a records file with its outcomes file by `record_id`.
/// The result keeps records-file order.
pub fn ingest_corpus(records_path: &Path, outcomes_path: &Path) -> Result<Corpus, CorpusError> {
    let records = read_records(records_path)?;
    let outcomes = read_outcomes(outcomes_path)?;
    join(records, outcomes)
}

pub(crate) fn join(records: Vec<TestRecord>, outcomes: Vec<ExecutionOutcome>) -> Result<Corpus, CorpusError> {
    let mut record_ids = HashSet::with_capacity(records.len());
    for r in &records {
        if !record_ids.insert(r.record_id.as_str()) {
            return Err(CorpusError::DuplicateId(r.record_id.clone()));
        }
    }
    let mut by_id: HashMap<String, ExecutionOutcome> = HashMap::with_capacity(outcomes.len());
    let mut missing_records = Vec::new();
    for o in outcomes {
        if !record_ids.contains(o.record_id.as_str()) {
            missing_records.push(o.record_id.clone());
        }
        if by_id.contains_key(&o.record_id) {
            return Err(CorpusError::DuplicateId(o.record_id));
        }
        by_id.insert(o.record_id.clone(), o);
    }
    let missing_outcomes: Vec<String> = records
        .iter()
        .filter(|r| !by_id.contains_key(&r.record_id))
        .map(|r| r.record_id.clone())
        .collect();
    if !missing_records.is_empty() || !missing_outcomes.is_empty() {
        return Err(CorpusError::Dangling {
            missing_records,
            missing_outcomes,
        });
    }
    let entries = records
        .into_iter()
        .map(|record| {
            let outcome = by_id.remove(&record.record_id).expect("joined above");
            Entry { record, outcome }
        })
        .collect();
    Corpus::new(entries)
}
