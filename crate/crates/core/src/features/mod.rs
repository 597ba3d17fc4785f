//! Per-test ranking features computed over the failed tests of one bug.
//!
//! Every "number of test cases that ..." feature counts the test itself, so a
//! value of 1 means the property is unique within the bug.

use std::collections::HashMap;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::corpus::{OracleKind, TestRecord};
use crate::text::normalize_ws;
use crate::trace::{prefix_has_catch, ParsedTrace};

mod similarity;

pub use similarity::{tfidf_cosine, tokenize};

pub const FEATURE_COUNT: usize = 11;

/// Column names, in [`FeatureVector::to_array`] order.
pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "focal_method_name_count",
    "test_distinct_code_line",
    "is_exception",
    "is_no_exception",
    "test_prefix_exception",
    "trace_exception_count",
    "trace_exception_msg_count",
    "is_exp_trace_exception",
    "unexp_trace_e_count",
    "focal_unexp_trace_e_count",
    "test_doc_sim",
];

/// Exception names that signal a plain assertion failure.
pub const ASSERTION_EXCEPTIONS: [&str; 2] = ["AssertionFailedError", "AssertionError"];

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FeatureVector {
    pub focal_method_name_count: u32,
    pub test_distinct_code_line: u32,
    pub is_exception: bool,
    pub is_no_exception: bool,
    pub test_prefix_exception: bool,
    pub trace_exception_count: u32,
    pub trace_exception_msg_count: u32,
    pub is_exp_trace_exception: bool,
    pub unexp_trace_e_count: u32,
    pub focal_unexp_trace_e_count: u32,
    pub test_doc_sim: f64,
}

impl FeatureVector {
    pub fn to_array(&self) -> [f64; FEATURE_COUNT] {
        let b = |x: bool| if x { 1.0 } else { 0.0 };
        [
            f64::from(self.focal_method_name_count),
            f64::from(self.test_distinct_code_line),
            b(self.is_exception),
            b(self.is_no_exception),
            b(self.test_prefix_exception),
            f64::from(self.trace_exception_count),
            f64::from(self.trace_exception_msg_count),
            b(self.is_exp_trace_exception),
            f64::from(self.unexp_trace_e_count),
            f64::from(self.focal_unexp_trace_e_count),
            self.test_doc_sim,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FeatureError {
    #[error("failed set mixes groups: expected bug {expected_bug:?} run {expected_run}, found bug {bug:?} run {run}")]
    MixedGroup {
        expected_bug: String,
        expected_run: u32,
        bug: String,
        run: u32,
    },
}

/// True when the exception is an assertion failure or is named by the
/// focal method's source or docstring.
pub fn is_expected_exception(simple_name: &str, record: &TestRecord) -> bool {
    ASSERTION_EXCEPTIONS.contains(&simple_name)
        || (!simple_name.is_empty()
            && (record.focal_method_source.contains(simple_name) || record.focal_docstring.contains(simple_name)))
}

fn code_lines(source: &str) -> Vec<String> {
    source.lines().map(normalize_ws).filter(|l| !l.is_empty()).collect()
}

fn tally<'a>(keys: impl IntoIterator<Item = Option<&'a str>>) -> HashMap<&'a str, u32> {
    let mut counts = HashMap::new();
    for k in keys.into_iter().flatten() {
        *counts.entry(k).or_insert(0) += 1;
    }
    counts
}

/// Computes the feature vectors of one bug's failed tests, aligned with the
/// input. All entries must belong to the same (bug, run).
pub fn extract_features(failed: &[(&TestRecord, &ParsedTrace)]) -> Result<Vec<FeatureVector>, FeatureError> {
    let Some((first, _)) = failed.first() else {
        return Ok(Vec::new());
    };
    if let Some((odd, _)) = failed
        .iter()
        .find(|(r, _)| r.bug_id != first.bug_id || r.run_id != first.run_id)
    {
        return Err(FeatureError::MixedGroup {
            expected_bug: first.bug_id.clone(),
            expected_run: first.run_id,
            bug: odd.bug_id.clone(),
            run: odd.run_id,
        });
    }

    let expected: Vec<bool> = failed
        .iter()
        .map(|(r, t)| is_expected_exception(&t.exception_simple_name, r))
        .collect();
    let lines: Vec<Vec<String>> = failed.iter().map(|(r, _)| code_lines(&r.full_source())).collect();

    let focal = tally(failed.iter().map(|(r, _)| Some(r.focal_method_name.as_str())));
    let exception = tally(failed.iter().map(|(_, t)| Some(t.exception_simple_name.as_str())));
    let message = tally(failed.iter().map(|(_, t)| t.message.as_deref()));
    let unexpected = tally(
        failed
            .iter()
            .zip(&expected)
            .map(|((_, t), &exp)| (!exp).then_some(t.exception_simple_name.as_str())),
    );
    let mut focal_unexpected: HashMap<(&str, &str), u32> = HashMap::new();
    for ((r, t), &exp) in failed.iter().zip(&expected) {
        if !exp {
            *focal_unexpected
                .entry((r.focal_method_name.as_str(), t.exception_simple_name.as_str()))
                .or_insert(0) += 1;
        }
    }
    // Number of tests containing each line, counting a test once.
    let mut line_owners: HashMap<&str, u32> = HashMap::new();
    for ls in &lines {
        let mut mine: Vec<&str> = ls.iter().map(String::as_str).collect();
        mine.sort_unstable();
        mine.dedup();
        for l in mine {
            *line_owners.entry(l).or_insert(0) += 1;
        }
    }

    let vectors = failed
        .iter()
        .zip(&expected)
        .zip(&lines)
        .map(|(((r, t), &exp), ls)| {
            let name = t.exception_simple_name.as_str();
            FeatureVector {
                focal_method_name_count: focal[r.focal_method_name.as_str()],
                test_distinct_code_line: ls.iter().filter(|l| line_owners[l.as_str()] == 1).count() as u32,
                is_exception: r.oracle_kind == OracleKind::ExpectException,
                is_no_exception: r.oracle_kind == OracleKind::ExpectNoException,
                test_prefix_exception: prefix_has_catch(&r.prefix_source),
                trace_exception_count: exception[name],
                trace_exception_msg_count: t.message.as_deref().map_or(1, |m| message[m]),
                is_exp_trace_exception: exp,
                unexp_trace_e_count: if exp { 0 } else { unexpected[name] },
                focal_unexp_trace_e_count: if exp {
                    0
                } else {
                    focal_unexpected[&(r.focal_method_name.as_str(), name)]
                },
                test_doc_sim: tfidf_cosine(&r.full_source(), &r.focal_docstring),
            }
        })
        .collect();
    Ok(vectors)
}

/// Writes `record_id` and the eleven values per line, tab-separated.
pub fn write_feature_dump<'a, W: Write>(
    mut out: W,
    rows: impl IntoIterator<Item = (&'a str, &'a FeatureVector)>,
) -> io::Result<()> {
    for (id, v) in rows {
        write!(out, "{id}")?;
        for x in v.to_array() {
            write!(out, "\t{x}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}
