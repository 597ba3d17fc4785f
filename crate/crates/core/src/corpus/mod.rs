//! Test-case records, their execution outcomes, and corpus-level cleaning.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::text::normalize_ws;

mod io;
pub mod synthetic;

pub use io::{ingest_corpus, read_outcomes, read_records, write_corpus, write_outcomes, write_records};
pub use synthetic::{generate_synthetic_corpus, CountRange, FeatureShift, SyntheticCorpus, SyntheticSpec};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}:{line}: {message}")]
    Malformed { file: String, line: usize, message: String },
    #[error("duplicate record_id {0:?}")]
    DuplicateId(String),
    #[error("dangling record ids: outcomes without record {missing_records:?}, records without outcome {missing_outcomes:?}")]
    Dangling {
        missing_records: Vec<String>,
        missing_outcomes: Vec<String>,
    },
    #[error("record {id:?}: {reason}")]
    InvalidRecord { id: String, reason: String },
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleKind {
    ExpectNoException,
    ExpectException,
    Assertion,
}

impl OracleKind {
    pub const ALL: [OracleKind; 3] = [
        OracleKind::ExpectNoException,
        OracleKind::ExpectException,
        OracleKind::Assertion,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            OracleKind::ExpectNoException => "expect_no_exception",
            OracleKind::ExpectException => "expect_exception",
            OracleKind::Assertion => "assertion",
        }
    }
}

impl fmt::Display for OracleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which program version the test prefix was generated from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrefixProvenance {
    BuggyVersion,
    FixedVersion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestResult {
    Pass,
    Fail,
}

/// What made a test fail on one program version.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    Exception,
    Assertion,
    None,
}

/// One generated test case.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestRecord {
    pub record_id: String,
    pub bug_id: String,
    pub run_id: u32,
    pub prefix_source: String,
    pub oracle_kind: OracleKind,
    #[serde(default)]
    pub oracle_text: Option<String>,
    pub focal_method_name: String,
    pub focal_method_source: String,
    #[serde(default)]
    pub focal_docstring: String,
    pub prefix_provenance: PrefixProvenance,
}

impl TestRecord {
    /// Prefix followed by the assert statement, if any.
    pub fn full_source(&self) -> String {
        match self.oracle_text.as_deref() {
            Some(oracle) if !oracle.is_empty() => format!("{}\n{}", self.prefix_source, oracle),
            _ => self.prefix_source.clone(),
        }
    }

    fn validate(&self) -> Result<(), CorpusError> {
        if self.record_id.is_empty() {
            return Err(CorpusError::InvalidRecord {
                id: String::new(),
                reason: "empty record_id".into(),
            });
        }
        if self.oracle_kind == OracleKind::Assertion && self.oracle_text.as_deref().is_none_or(|t| t.trim().is_empty())
        {
            return Err(CorpusError::InvalidRecord {
                id: self.record_id.clone(),
                reason: "assertion oracle without oracle_text".into(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExecutionOutcome {
    pub record_id: String,
    pub buggy_result: TestResult,
    pub fixed_result: TestResult,
    #[serde(default)]
    pub raw_trace: Option<String>,
    #[serde(default)]
    pub compile_error: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub buggy_failure_kind: Option<FailureKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_failure_kind: Option<FailureKind>,
}

impl ExecutionOutcome {
    fn validate(&self) -> Result<(), CorpusError> {
        // Compile-error outcomes never reach classification, so their result
        // fields carry no meaning and no trace is demanded.
        if !self.compile_error
            && self.buggy_result == TestResult::Fail
            && self.raw_trace.as_deref().is_none_or(|t| t.trim().is_empty())
        {
            return Err(CorpusError::InvalidRecord {
                id: self.record_id.clone(),
                reason: "fails on the buggy version but has no raw_trace".into(),
            });
        }
        Ok(())
    }
}

/// A record joined with its outcome.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub record: TestRecord,
    pub outcome: ExecutionOutcome,
}

impl Entry {
    pub fn record_id(&self) -> &str {
        &self.record.record_id
    }
}

/// An immutable, validated list of entries plus the universe of bugs.
///
/// The bug universe is fixed at construction: filtering entries never
/// removes a bug, so bugs left without candidates still count in Found@K
/// denominators.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Corpus {
    entries: Vec<Entry>,
    bugs: Vec<String>,
}

impl Corpus {
    pub fn new(entries: Vec<Entry>) -> Result<Self, CorpusError> {
        let mut seen = HashSet::with_capacity(entries.len());
        let mut bugs = Vec::new();
        let mut bug_seen = HashSet::new();
        for e in &entries {
            if e.record.record_id != e.outcome.record_id {
                return Err(CorpusError::InvalidRecord {
                    id: e.record.record_id.clone(),
                    reason: format!("joined to outcome {:?}", e.outcome.record_id),
                });
            }
            e.record.validate()?;
            e.outcome.validate()?;
            if !seen.insert(e.record.record_id.as_str()) {
                return Err(CorpusError::DuplicateId(e.record.record_id.clone()));
            }
            if bug_seen.insert(e.record.bug_id.as_str()) {
                bugs.push(e.record.bug_id.clone());
            }
        }
        Ok(Self { entries, bugs })
    }

    /// Replaces the entries while keeping the bug universe. `entries` must be
    /// drawn from this corpus.
    fn with_entries(&self, entries: Vec<Entry>) -> Self {
        Self {
            entries,
            bugs: self.bugs.clone(),
        }
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<Entry> {
        self.entries
    }

    /// Every bug seen at construction, in order of first appearance.
    pub fn bug_ids(&self) -> &[String] {
        &self.bugs
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Distinct run ids present among the entries, ascending.
    pub fn run_ids(&self) -> Vec<u32> {
        self.entries
            .iter()
            .map(|e| e.record.run_id)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    pub fn filter(&self, mut keep: impl FnMut(&Entry) -> bool) -> Self {
        self.with_entries(self.entries.iter().filter(|e| keep(e)).cloned().collect())
    }

    /// Like [`Corpus::new`] but with an explicit bug universe, which must
    /// contain every bug referenced by `entries`.
    pub fn with_bug_universe(entries: Vec<Entry>, bugs: Vec<String>) -> Result<Self, CorpusError> {
        let mut corpus = Self::new(entries)?;
        let universe: HashSet<&str> = bugs.iter().map(String::as_str).collect();
        if let Some(stray) = corpus.bugs.iter().find(|b| !universe.contains(b.as_str())) {
            return Err(CorpusError::InvalidRecord {
                id: stray.clone(),
                reason: "bug missing from the supplied universe".into(),
            });
        }
        corpus.bugs = bugs;
        Ok(corpus)
    }
}

/// Dedup key of a record: bug, run, oracle kind and whitespace-normalized
/// full test source.
fn dedup_key(r: &TestRecord) -> (String, u32, OracleKind, String) {
    (
        r.bug_id.clone(),
        r.run_id,
        r.oracle_kind,
        normalize_ws(&r.full_source()),
    )
}

/// Removes repeated test cases within each (bug, run), keeping the first.
pub fn deduplicate(corpus: &Corpus) -> Corpus {
    let mut seen = HashSet::new();
    corpus.filter(|e| seen.insert(dedup_key(&e.record)))
}

/// Drops entries that failed to compile. Only the offending entries go;
/// the rest of their bug is kept.
pub fn filter_records(corpus: &Corpus) -> Corpus {
    corpus.filter(|e| !e.outcome.compile_error)
}

/// Keeps only entries whose prefix was generated from an admitted version.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProvenanceFilter {
    #[default]
    BuggyOnly,
    FixedOnly,
    All,
}

impl ProvenanceFilter {
    pub fn admits(self, p: PrefixProvenance) -> bool {
        match self {
            ProvenanceFilter::BuggyOnly => p == PrefixProvenance::BuggyVersion,
            ProvenanceFilter::FixedOnly => p == PrefixProvenance::FixedVersion,
            ProvenanceFilter::All => true,
        }
    }
}

pub fn filter_provenance(corpus: &Corpus, filter: ProvenanceFilter) -> Corpus {
    corpus.filter(|e| filter.admits(e.record.prefix_provenance))
}

/// Groups entry indices by (bug_id, run_id) in order of first appearance;
/// indices within a group keep corpus order.
pub fn group_by_bug_run(entries: &[Entry]) -> Vec<((String, u32), Vec<usize>)> {
    let mut slot: HashMap<(&str, u32), usize> = HashMap::new();
    let mut groups: Vec<((String, u32), Vec<usize>)> = Vec::new();
    for (i, e) in entries.iter().enumerate() {
        let key = (e.record.bug_id.as_str(), e.record.run_id);
        let at = *slot.entry(key).or_insert_with(|| {
            groups.push(((e.record.bug_id.clone(), e.record.run_id), Vec::new()));
            groups.len() - 1
        });
        groups[at].1.push(i);
    }
    groups
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;

    pub fn record(id: &str, bug: &str, prefix: &str, oracle: Option<&str>) -> TestRecord {
        TestRecord {
            record_id: id.into(),
            bug_id: bug.into(),
            run_id: 0,
            prefix_source: prefix.into(),
            oracle_kind: if oracle.is_some() {
                OracleKind::Assertion
            } else {
                OracleKind::ExpectNoException
            },
            oracle_text: oracle.map(Into::into),
            focal_method_name: "f".into(),
            focal_method_source: "int f() { return 1; }".into(),
            focal_docstring: String::new(),
            prefix_provenance: PrefixProvenance::BuggyVersion,
        }
    }

    pub fn outcome(id: &str, buggy: TestResult, fixed: TestResult) -> ExecutionOutcome {
        ExecutionOutcome {
            record_id: id.into(),
            buggy_result: buggy,
            fixed_result: fixed,
            raw_trace: (buggy == TestResult::Fail)
                .then(|| format!("Test::{id}\njava.lang.IllegalStateException: boom\n\tat A.b(A.java:1)")),
            compile_error: false,
            buggy_failure_kind: None,
            fixed_failure_kind: None,
        }
    }

    pub fn entry(id: &str, bug: &str, prefix: &str, oracle: Option<&str>) -> Entry {
        Entry {
            record: record(id, bug, prefix, oracle),
            outcome: outcome(id, TestResult::Fail, TestResult::Fail),
        }
    }
}
