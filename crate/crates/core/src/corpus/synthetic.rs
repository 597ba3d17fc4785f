//! Seeded generator for desk-scale corpora with planted bug-finding tests.
//!
//! Every bug gets a small class with a handful of focal methods. False
//! positives are drawn from a narrow template space (shared code lines, a few
//! assertion messages, a common expected exception), so they look alike.
//! Planted true positives can be shifted away from that mass: a rare trace
//! exception, code lines no other test has, and identifiers echoing the focal
//! docstring.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::text::normalize_ws;

use super::{
    Corpus, CorpusError, Entry, ExecutionOutcome, FailureKind, OracleKind, PrefixProvenance, TestRecord, TestResult,
};

/// Inclusive count range, written `N` or `MIN..MAX`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountRange {
    pub min: usize,
    pub max: usize,
}

impl CountRange {
    pub const fn exactly(n: usize) -> Self {
        Self { min: n, max: n }
    }

    pub const fn between(min: usize, max: usize) -> Self {
        Self { min, max }
    }

    fn sample(&self, rng: &mut impl Rng) -> usize {
        rng.gen_range(self.min..=self.max)
    }
}

impl FromStr for CountRange {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parse = |v: &str| {
            v.trim()
                .parse::<usize>()
                .map_err(|_| CorpusError::InvalidSpec(format!("not a non-negative count: {v:?}")))
        };
        let range = match s.split_once("..") {
            Some((lo, hi)) => Self::between(parse(lo)?, parse(hi)?),
            None => Self::exactly(parse(s)?),
        };
        if range.min > range.max {
            return Err(CorpusError::InvalidSpec(format!("empty range {s:?}")));
        }
        Ok(range)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureShift {
    /// Planted TPs throw an exception no other test of the bug throws.
    pub rare_exception: bool,
    /// Planted TPs contain code lines found in no other test.
    pub distinct_lines: bool,
    /// Planted TPs reuse words from the focal docstring.
    pub doc_similar: bool,
    /// Fraction of FPs that fail with a secondary unexpected exception
    /// instead of the common one.
    pub fp_noise: f64,
}

impl Default for FeatureShift {
    fn default() -> Self {
        Self {
            rare_exception: true,
            distinct_lines: true,
            doc_similar: true,
            fp_noise: 0.1,
        }
    }
}

impl FeatureShift {
    pub fn none() -> Self {
        Self {
            rare_exception: false,
            distinct_lines: false,
            doc_similar: false,
            fp_noise: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub bugs: usize,
    /// Failed-on-buggy tests per bug, TPs included.
    pub failed_per_bug: CountRange,
    pub tp_per_bug: CountRange,
    /// Extra tests passing on both versions.
    pub passing_per_bug: usize,
    pub runs: u32,
    pub shift: FeatureShift,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            bugs: 50,
            failed_per_bug: CountRange::exactly(100),
            tp_per_bug: CountRange::between(1, 3),
            passing_per_bug: 0,
            runs: 1,
            shift: FeatureShift::default(),
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<(), CorpusError> {
        let bad = |m: String| Err(CorpusError::InvalidSpec(m));
        if self.failed_per_bug.min > self.failed_per_bug.max {
            return bad("failed_per_bug: min exceeds max".into());
        }
        if self.tp_per_bug.min > self.tp_per_bug.max {
            return bad("tp_per_bug: min exceeds max".into());
        }
        if self.tp_per_bug.max > self.failed_per_bug.min {
            return bad(format!(
                "tp_per_bug max {} exceeds failed_per_bug min {}",
                self.tp_per_bug.max, self.failed_per_bug.min
            ));
        }
        if self.runs == 0 {
            return bad("runs must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.shift.fp_noise) {
            return bad(format!("fp_noise {} outside [0, 1]", self.shift.fp_noise));
        }
        Ok(())
    }
}

/// Generated corpus plus the planted-TP labels.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub corpus: Corpus,
    /// `(record_id, is_tp)` for every record, in corpus order.
    pub truth: Vec<(String, bool)>,
}

impl SyntheticCorpus {
    /// Writes `records.jsonl`, `outcomes.jsonl` and `truth.tsv` into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<[PathBuf; 3], CorpusError> {
        fs::create_dir_all(dir).map_err(|source| CorpusError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        let records = dir.join("records.jsonl");
        let outcomes = dir.join("outcomes.jsonl");
        let truth = dir.join("truth.tsv");
        super::write_corpus(&self.corpus, &records, &outcomes)?;
        write_truth(&truth, &self.truth)?;
        Ok([records, outcomes, truth])
    }
}

pub fn write_truth(path: &Path, truth: &[(String, bool)]) -> Result<(), CorpusError> {
    let io = |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    for (id, tp) in truth {
        writeln!(w, "{id}\t{}", u8::from(*tp)).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_truth(path: &Path) -> Result<Vec<(String, bool)>, CorpusError> {
    let body = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut out = Vec::new();
    for (i, line) in body.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let malformed = || CorpusError::Malformed {
            file: path.display().to_string(),
            line: i + 1,
            message: "expected record_id<TAB>0|1".into(),
        };
        let (id, flag) = line.split_once('\t').ok_or_else(malformed)?;
        let tp = match flag {
            "0" => false,
            "1" => true,
            _ => return Err(malformed()),
        };
        out.push((id.to_string(), tp));
    }
    Ok(out)
}

const METHOD_NAMES: [&str; 6] = [
    "getValue",
    "setLimit",
    "append",
    "removeAt",
    "computeTotal",
    "parseEntry",
];

const DOC_WORDS: [&str; 16] = [
    "returns", "stored", "value", "limit", "index", "element", "total", "entry", "buffer", "negative", "range",
    "capacity", "current", "sum", "position", "length",
];

const RARE_EXCEPTIONS: [&str; 8] = [
    "java.lang.ArrayIndexOutOfBoundsException",
    "java.lang.ArithmeticException",
    "java.lang.ClassCastException",
    "java.lang.NegativeArraySizeException",
    "java.util.ConcurrentModificationException",
    "java.lang.StringIndexOutOfBoundsException",
    "java.util.NoSuchElementException",
    "java.lang.UnsupportedOperationException",
];

const SHARED_POOL: usize = 8;
const MAX_REDRAWS: usize = 1000;

struct BugTemplate {
    class: String,
    package: String,
    methods: Vec<FocalMethod>,
}

struct FocalMethod {
    name: &'static str,
    source: String,
    docstring: String,
    doc_words: Vec<&'static str>,
}

impl BugTemplate {
    fn new(bug: usize, rng: &mut ChaCha8Rng) -> Self {
        let class = format!("Widget{bug}");
        let methods = METHOD_NAMES
            .iter()
            .map(|&name| {
                let mut words: Vec<&'static str> = DOC_WORDS.choose_multiple(rng, 4).copied().collect();
                words.sort_unstable();
                let docstring = format!(
                    "/** Returns the {} {} for the given {} and {}. */",
                    words[0], words[1], words[2], words[3]
                );
                let source = format!(
                    "public int {name}(int arg) {{\n  if (closed) throw new IllegalStateException(\"closed\");\n  return state + arg;\n}}"
                );
                FocalMethod {
                    name,
                    source,
                    docstring,
                    doc_words: words,
                }
            })
            .collect();
        Self {
            package: format!("synth.p{bug}"),
            class,
            methods,
        }
    }

    fn test_name(&self, idx: usize) -> String {
        format!("{}.{}_ESTest::test{idx:03}", self.package, self.class)
    }

    fn test_frame(&self, idx: usize, line: usize) -> String {
        format!(
            "\tat {}.{}_ESTest.test{idx:03}({}_ESTest.java:{line})",
            self.package, self.class, self.class
        )
    }
}

struct Planned {
    record: TestRecord,
    outcome: ExecutionOutcome,
}

fn common_prefix(t: &BugTemplate, rng: &mut ChaCha8Rng, method: &FocalMethod) -> String {
    let setup = t.methods[1].name;
    format!(
        "{cls} {v} = new {cls}();\n{v}.{setup}({a});\nint int0 = {v}.{m}({b});",
        cls = t.class,
        v = "widget0",
        a = rng.gen_range(0..3),
        b = rng.gen_range(0..3),
        m = method.name,
    )
}

fn false_positive(t: &BugTemplate, rng: &mut ChaCha8Rng, idx: usize, shift: &FeatureShift, passing: bool) -> Planned {
    // Three methods carry most of the traffic.
    let method = &t.methods[rng.gen_range(0..3)];
    let mut prefix = common_prefix(t, rng, method);
    // A random subset of a small shared pool: every line recurs across many
    // tests, yet whole prefixes rarely repeat.
    for j in 0..SHARED_POOL {
        if rng.gen_bool(0.5) {
            let _ = write!(prefix, "\nwidget0.{}({j});", t.methods[j % 3].name);
        }
    }
    let roll: f64 = rng.gen();
    let want: u8 = rng.gen_range(0..2);
    let (kind, oracle_text) = if roll < 0.7 {
        (OracleKind::Assertion, Some(format!("assertEquals({want}, int0);")))
    } else if roll < 0.9 {
        (OracleKind::ExpectNoException, None)
    } else {
        (OracleKind::ExpectException, None)
    };
    let (trace, failure) = if passing {
        (None, FailureKind::None)
    } else if rng.gen_bool(shift.fp_noise) {
        (
            Some(format!(
                "{}\njava.lang.NullPointerException\n\tat {}.{}.{}({}.java:{})\n{}",
                t.test_name(idx),
                t.package,
                t.class,
                method.name,
                t.class,
                40 + rng.gen_range(0..3),
                t.test_frame(idx, 20)
            )),
            FailureKind::Exception,
        )
    } else {
        match kind {
            OracleKind::Assertion => (
                    Some(format!(
                        "{}\njunit.framework.AssertionFailedError: expected:<{want}> but was:<{}>\n\tat junit.framework.Assert.fail(Assert.java:57)\n\tat junit.framework.Assert.failNotEquals(Assert.java:329)\n{}",
                        t.test_name(idx),
                        2 + rng.gen_range(0..2),
                        t.test_frame(idx, 24)
                    )),
                FailureKind::Assertion,
            ),
            OracleKind::ExpectException => (
                Some(format!(
                    "{}\njunit.framework.AssertionFailedError: Expecting exception: IllegalStateException\n\tat junit.framework.Assert.fail(Assert.java:57)\n{}",
                    t.test_name(idx),
                    t.test_frame(idx, 22)
                )),
                FailureKind::Assertion,
            ),
            OracleKind::ExpectNoException => (
                Some(format!(
                    "{}\njava.lang.IllegalStateException: closed\n\tat {}.{}.{}({}.java:12)\n{}",
                    t.test_name(idx),
                    t.package,
                    t.class,
                    method.name,
                    t.class,
                    t.test_frame(idx, 21)
                )),
                FailureKind::Exception,
            ),
        }
    };
    let result = if passing { TestResult::Pass } else { TestResult::Fail };
    Planned {
        record: TestRecord {
            record_id: String::new(),
            bug_id: String::new(),
            run_id: 0,
            prefix_source: prefix,
            oracle_kind: kind,
            oracle_text,
            focal_method_name: method.name.to_string(),
            focal_method_source: method.source.clone(),
            focal_docstring: method.docstring.clone(),
            prefix_provenance: PrefixProvenance::BuggyVersion,
        },
        outcome: ExecutionOutcome {
            record_id: String::new(),
            buggy_result: result,
            fixed_result: result,
            raw_trace: trace,
            compile_error: false,
            buggy_failure_kind: Some(failure),
            fixed_failure_kind: Some(failure),
        },
    }
}

fn true_positive(t: &BugTemplate, rng: &mut ChaCha8Rng, idx: usize, nth: usize, shift: &FeatureShift) -> Planned {
    if !shift.rare_exception && !shift.distinct_lines && !shift.doc_similar {
        let mut p = false_positive(t, rng, idx, shift, false);
        p.outcome.fixed_result = TestResult::Pass;
        p.outcome.fixed_failure_kind = Some(FailureKind::None);
        return p;
    }
    // The faulty method is one the FP mass rarely touches.
    let method = &t.methods[3 + rng.gen_range(0..3)];
    let mut prefix = common_prefix(t, rng, method);
    if shift.distinct_lines {
        let n = 1000 + rng.gen_range(0..9000);
        let _ = write!(
            prefix,
            "\nint[] intArray{nth} = new int[{n}];\nintArray{nth}[{}] = widget0.{m}(-{n});",
            rng.gen_range(0..n),
            m = method.name
        );
    }
    if shift.doc_similar {
        let mut name = String::new();
        for (i, w) in method.doc_words.iter().enumerate() {
            if i == 0 {
                name.push_str(w);
            } else {
                name.push_str(&w[..1].to_ascii_uppercase());
                name.push_str(&w[1..]);
            }
        }
        let _ = write!(prefix, "\nint {name} = widget0.{}(int0);", method.name);
    }
    let (kind, oracle_text) = if rng.gen_bool(0.5) {
        (OracleKind::Assertion, Some("assertEquals(0, int0);".to_string()))
    } else {
        (OracleKind::ExpectNoException, None)
    };
    let (exception, failure) = if shift.rare_exception {
        let name = RARE_EXCEPTIONS[nth % RARE_EXCEPTIONS.len()];
        (
            format!(
                "{name}: Index {} out of bounds for length {}",
                rng.gen_range(10..99),
                nth + 1
            ),
            FailureKind::Exception,
        )
    } else {
        (
            format!(
                "junit.framework.AssertionFailedError: expected:<0> but was:<{}>",
                2 + rng.gen_range(0..2)
            ),
            FailureKind::Assertion,
        )
    };
    let trace = format!(
        "{}\n{exception}\n\tat {}.{}.{}({}.java:{})\n{}",
        t.test_name(idx),
        t.package,
        t.class,
        method.name,
        t.class,
        60 + nth,
        t.test_frame(idx, 30)
    );
    Planned {
        record: TestRecord {
            record_id: String::new(),
            bug_id: String::new(),
            run_id: 0,
            prefix_source: prefix,
            oracle_kind: kind,
            oracle_text,
            focal_method_name: method.name.to_string(),
            focal_method_source: method.source.clone(),
            focal_docstring: method.docstring.clone(),
            prefix_provenance: PrefixProvenance::BuggyVersion,
        },
        outcome: ExecutionOutcome {
            record_id: String::new(),
            buggy_result: TestResult::Fail,
            fixed_result: TestResult::Pass,
            raw_trace: Some(trace),
            compile_error: false,
            buggy_failure_kind: Some(failure),
            fixed_failure_kind: Some(FailureKind::None),
        },
    }
}

/// Builds a corpus that is a pure function of `(spec, seed)`.
pub fn generate_synthetic_corpus(spec: &SyntheticSpec, seed: u64) -> Result<SyntheticCorpus, CorpusError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entries = Vec::new();
    let mut truth = Vec::new();
    for bug in 0..spec.bugs {
        let template = BugTemplate::new(bug + 1, &mut rng);
        let bug_id = format!("Synth-{}", bug + 1);
        for run in 0..spec.runs {
            let failed = spec.failed_per_bug.sample(&mut rng);
            let tps = spec.tp_per_bug.sample(&mut rng).min(failed);
            // Slot roles: 0 = TP, 1 = FP, 2 = passing. Shuffled so corpus
            // order carries no signal.
            let mut roles: Vec<u8> = std::iter::repeat_n(0, tps)
                .chain(std::iter::repeat_n(1, failed - tps))
                .chain(std::iter::repeat_n(2, spec.passing_per_bug))
                .collect();
            roles.shuffle(&mut rng);
            let mut nth_tp = 0;
            let mut used = HashSet::new();
            for (idx, role) in roles.into_iter().enumerate() {
                if role == 0 {
                    nth_tp += 1;
                }
                // Redraw until the test survives deduplication.
                let mut planned;
                let mut tries = 0;
                loop {
                    planned = match role {
                        0 => true_positive(&template, &mut rng, idx, nth_tp - 1, &spec.shift),
                        1 => false_positive(&template, &mut rng, idx, &spec.shift, false),
                        _ => false_positive(&template, &mut rng, idx, &spec.shift, true),
                    };
                    tries += 1;
                    let key = (planned.record.oracle_kind, normalize_ws(&planned.record.full_source()));
                    if used.insert(key) || tries >= MAX_REDRAWS {
                        break;
                    }
                }
                let id = format!("{bug_id}-r{run}-t{idx:04}");
                planned.record.record_id = id.clone();
                planned.record.bug_id = bug_id.clone();
                planned.record.run_id = run;
                planned.outcome.record_id = id.clone();
                truth.push((id, role == 0));
                entries.push(Entry {
                    record: planned.record,
                    outcome: planned.outcome,
                });
            }
        }
    }
    Ok(SyntheticCorpus {
        corpus: Corpus::new(entries)?,
        truth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SyntheticSpec {
        SyntheticSpec {
            bugs: 2,
            failed_per_bug: CountRange::exactly(3),
            tp_per_bug: CountRange::exactly(1),
            ..SyntheticSpec::default()
        }
    }

    #[test]
    fn small_spec_echo() {
        let s = generate_synthetic_corpus(&small(), 7).unwrap();
        assert_eq!(s.corpus.len(), 6);
        assert_eq!(s.corpus.bug_ids(), ["Synth-1", "Synth-2"]);
        for bug in s.corpus.bug_ids() {
            let tps = s
                .truth
                .iter()
                .filter(|(id, tp)| *tp && id.starts_with(&format!("{bug}-")))
                .count();
            assert_eq!(tps, 1);
        }
        for e in s.corpus.entries() {
            assert_eq!(e.outcome.buggy_result, TestResult::Fail);
        }
    }

    #[test]
    fn truth_matches_outcomes() {
        let s = generate_synthetic_corpus(
            &SyntheticSpec {
                passing_per_bug: 4,
                ..small()
            },
            3,
        )
        .unwrap();
        for (e, (id, tp)) in s.corpus.entries().iter().zip(&s.truth) {
            assert_eq!(e.record_id(), id);
            let is_tp = e.outcome.buggy_result == TestResult::Fail && e.outcome.fixed_result == TestResult::Pass;
            assert_eq!(is_tp, *tp);
        }
    }

    #[test]
    fn same_seed_same_bytes() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let spec = small();
        let pa = generate_synthetic_corpus(&spec, 7).unwrap().write_to(a.path()).unwrap();
        let pb = generate_synthetic_corpus(&spec, 7).unwrap().write_to(b.path()).unwrap();
        for (x, y) in pa.iter().zip(&pb) {
            assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap());
        }
        let other = generate_synthetic_corpus(&spec, 8).unwrap();
        assert_ne!(other.corpus, generate_synthetic_corpus(&spec, 7).unwrap().corpus);
    }

    #[test]
    fn benchmark_sized_corpus() {
        let dir = tempfile::tempdir().unwrap();
        let s = generate_synthetic_corpus(&SyntheticSpec::default(), 11).unwrap();
        let [records, outcomes, truth] = s.write_to(dir.path()).unwrap();
        for p in [&records, &outcomes, &truth] {
            assert_eq!(fs::read_to_string(p).unwrap().lines().count(), 50 * 100);
        }
        let back = read_truth(&truth).unwrap();
        assert_eq!(back, s.truth);
        let per_bug_tp = back.iter().filter(|(_, tp)| *tp).count();
        assert!((50..=150).contains(&per_bug_tp));
    }

    #[test]
    fn ranges_parse() {
        assert_eq!("3".parse::<CountRange>().unwrap(), CountRange::exactly(3));
        assert_eq!("1..3".parse::<CountRange>().unwrap(), CountRange::between(1, 3));
        assert!("-1".parse::<CountRange>().is_err());
        assert!("3..1".parse::<CountRange>().is_err());
    }

    #[test]
    fn invalid_specs_rejected() {
        let too_many_tps = SyntheticSpec {
            tp_per_bug: CountRange::exactly(4),
            ..small()
        };
        assert!(generate_synthetic_corpus(&too_many_tps, 1).is_err());
        let zero_runs = SyntheticSpec { runs: 0, ..small() };
        assert!(generate_synthetic_corpus(&zero_runs, 1).is_err());
        let noise = SyntheticSpec {
            shift: FeatureShift {
                fp_noise: 1.5,
                ..FeatureShift::default()
            },
            ..small()
        };
        assert!(generate_synthetic_corpus(&noise, 1).is_err());
    }
}
