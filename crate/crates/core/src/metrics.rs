//! Outcome classes, bug-finding metrics and the NoException baseline.

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Entry, ExecutionOutcome, FailureKind, OracleKind, TestResult};
use crate::features::ASSERTION_EXCEPTIONS;
use crate::iforest::RankedList;
use crate::text::normalize_ws;
use crate::trace::parse_trace;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetricsError {
    #[error("record {0:?} has a compile error and cannot be classified")]
    CompileError(String),
    #[error("Found@K needs at least one bug")]
    NoBugs,
    #[error("K must be at least 1")]
    ZeroK,
    #[error("nothing to aggregate")]
    NoRuns,
}

/// Positive: fails on the buggy version. True: passes on the fixed one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OutcomeClass {
    #[serde(rename = "TP")]
    Tp,
    #[serde(rename = "FP")]
    Fp,
    #[serde(rename = "TN")]
    Tn,
    #[serde(rename = "FN")]
    Fn,
}

impl fmt::Display for OutcomeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutcomeClass::Tp => "TP",
            OutcomeClass::Fp => "FP",
            OutcomeClass::Tn => "TN",
            OutcomeClass::Fn => "FN",
        })
    }
}

fn class_of(buggy: TestResult, fixed: TestResult) -> OutcomeClass {
    use TestResult::{Fail, Pass};
    match (buggy, fixed) {
        (Fail, Pass) => OutcomeClass::Tp,
        (Fail, Fail) => OutcomeClass::Fp,
        (Pass, Pass) => OutcomeClass::Tn,
        (Pass, Fail) => OutcomeClass::Fn,
    }
}

pub fn classify(outcome: &ExecutionOutcome) -> Result<OutcomeClass, MetricsError> {
    if outcome.compile_error {
        return Err(MetricsError::CompileError(outcome.record_id.clone()));
    }
    Ok(class_of(outcome.buggy_result, outcome.fixed_result))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn add(&mut self, class: OutcomeClass) {
        match class {
            OutcomeClass::Tp => self.tp += 1,
            OutcomeClass::Fp => self.fp += 1,
            OutcomeClass::Tn => self.tn += 1,
            OutcomeClass::Fn => self.fn_ += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

impl FromIterator<OutcomeClass> for ConfusionCounts {
    fn from_iter<I: IntoIterator<Item = OutcomeClass>>(iter: I) -> Self {
        let mut c = Self::default();
        for class in iter {
            c.add(class);
        }
        c
    }
}

/// `fp / (fp + tn)`, or 0 when nothing is negative on the fixed version.
pub fn fpr(c: &ConfusionCounts) -> f64 {
    let denom = c.fp + c.tn;
    if denom == 0 {
        0.0
    } else {
        c.fp as f64 / denom as f64
    }
}

/// `tp / (tp + fp)`, or 0 when nothing failed on the buggy version.
pub fn precision(c: &ConfusionCounts) -> f64 {
    let denom = c.tp + c.fp;
    if denom == 0 {
        0.0
    } else {
        c.tp as f64 / denom as f64
    }
}

/// Number of distinct bugs with at least one TP.
pub fn bug_found<'a>(classified: impl IntoIterator<Item = (&'a str, OutcomeClass)>) -> usize {
    classified
        .into_iter()
        .filter(|(_, c)| *c == OutcomeClass::Tp)
        .map(|(bug, _)| bug)
        .collect::<HashSet<_>>()
        .len()
}

/// Rank of a bug's first bug-finding test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FirstTpRank {
    At(usize),
    /// No TP among the bug's ranked failed tests.
    Never,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BugRankOutcome {
    pub bug_id: String,
    pub first_tp_rank: FirstTpRank,
}

pub fn first_tp_rank(list: &RankedList, is_tp: impl Fn(&str) -> bool) -> FirstTpRank {
    list.entries
        .iter()
        .filter(|e| is_tp(&e.record_id))
        .map(|e| e.rank)
        .min()
        .map_or(FirstTpRank::Never, FirstTpRank::At)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoundAtK {
    pub k: usize,
    /// Bugs whose first TP is within the top `k`.
    pub count: usize,
    /// `count / n`.
    pub fraction: f64,
}

pub fn found_at_k(outcomes: &[BugRankOutcome], k: usize) -> Result<FoundAtK, MetricsError> {
    if k == 0 {
        return Err(MetricsError::ZeroK);
    }
    if outcomes.is_empty() {
        return Err(MetricsError::NoBugs);
    }
    let count = outcomes
        .iter()
        .filter(|o| matches!(o.first_tp_rank, FirstTpRank::At(r) if r <= k))
        .count();
    Ok(FoundAtK {
        k,
        count,
        fraction: count as f64 / outcomes.len() as f64,
    })
}

/// How a failure on one version came about, as NoException sees it.
fn buggy_failure_kind(o: &ExecutionOutcome) -> FailureKind {
    if o.buggy_result == TestResult::Pass {
        return FailureKind::None;
    }
    if let Some(kind) = o.buggy_failure_kind {
        return kind;
    }
    match o.raw_trace.as_deref().map(parse_trace) {
        Some(Ok(t)) if ASSERTION_EXCEPTIONS.contains(&t.exception_simple_name.as_str()) => FailureKind::Assertion,
        _ => FailureKind::Exception,
    }
}

fn fixed_failure_kind(o: &ExecutionOutcome) -> FailureKind {
    if o.fixed_result == TestResult::Pass {
        return FailureKind::None;
    }
    if let Some(kind) = o.fixed_failure_kind {
        return kind;
    }
    // No trace is recorded for the fixed version. A test failing on both
    // versions is taken to fail the same way; one failing only on the fixed
    // version is not attributed to the prefix.
    match buggy_failure_kind(o) {
        FailureKind::None => FailureKind::Assertion,
        kind => kind,
    }
}

/// Re-reads the corpus as if every test were its bare prefix with the
/// implicit "no exception is raised" oracle.
///
/// Entries sharing a normalized prefix within one (bug, run) collapse to the
/// first of them. The collapsed test fails on a version iff any member's
/// failure there was exception-driven; assertion failures and oracle
/// verdicts are ignored. The result keeps the input's bug universe.
pub fn no_exception_baseline(corpus: &Corpus) -> Corpus {
    struct Group {
        first: usize,
        buggy_raise: Option<usize>,
        fixed_raise: bool,
    }
    let entries = corpus.entries();
    let mut slot: HashMap<(&str, u32, String), usize> = HashMap::new();
    let mut groups: Vec<Group> = Vec::new();
    for (i, e) in entries.iter().enumerate() {
        if e.outcome.compile_error {
            continue;
        }
        let key = (
            e.record.bug_id.as_str(),
            e.record.run_id,
            normalize_ws(&e.record.prefix_source),
        );
        let g = *slot.entry(key).or_insert_with(|| {
            groups.push(Group {
                first: i,
                buggy_raise: None,
                fixed_raise: false,
            });
            groups.len() - 1
        });
        let g = &mut groups[g];
        if g.buggy_raise.is_none() && buggy_failure_kind(&e.outcome) == FailureKind::Exception {
            g.buggy_raise = Some(i);
        }
        g.fixed_raise |= fixed_failure_kind(&e.outcome) == FailureKind::Exception;
    }

    let collapsed = groups
        .into_iter()
        .map(|g| {
            let mut record = entries[g.first].record.clone();
            record.oracle_kind = OracleKind::ExpectNoException;
            record.oracle_text = None;
            let result = |raised: bool| if raised { TestResult::Fail } else { TestResult::Pass };
            let kind = |raised: bool| {
                if raised {
                    FailureKind::Exception
                } else {
                    FailureKind::None
                }
            };
            let outcome = ExecutionOutcome {
                record_id: record.record_id.clone(),
                buggy_result: result(g.buggy_raise.is_some()),
                fixed_result: result(g.fixed_raise),
                raw_trace: g.buggy_raise.and_then(|i| entries[i].outcome.raw_trace.clone()),
                compile_error: false,
                buggy_failure_kind: Some(kind(g.buggy_raise.is_some())),
                fixed_failure_kind: Some(kind(g.fixed_raise)),
            };
            Entry { record, outcome }
        })
        .collect();
    Corpus::with_bug_universe(collapsed, corpus.bug_ids().to_vec()).expect("collapsed entries come from a valid corpus")
}

/// Found@K at one K across ranking seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoundAtKSeries {
    pub k: usize,
    pub per_seed: Vec<FoundAtK>,
    pub mean_count: f64,
    pub mean_fraction: f64,
}

impl FoundAtKSeries {
    pub fn new(k: usize, per_seed: Vec<FoundAtK>) -> Self {
        let n = per_seed.len().max(1) as f64;
        Self {
            k,
            mean_count: per_seed.iter().map(|f| f.count as f64).sum::<f64>() / n,
            mean_fraction: per_seed.iter().map(|f| f.fraction).sum::<f64>() / n,
            per_seed,
        }
    }
}

/// Metrics of one prefix-generation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub run_id: u32,
    pub counts: ConfusionCounts,
    pub bug_found: usize,
    pub fpr: f64,
    pub precision: f64,
    /// Empty when no ranking was performed.
    pub found_at_k: Vec<FoundAtKSeries>,
}

impl RunMetrics {
    pub fn new(run_id: u32, counts: ConfusionCounts, bug_found: usize, found_at_k: Vec<FoundAtKSeries>) -> Self {
        Self {
            run_id,
            fpr: fpr(&counts),
            precision: precision(&counts),
            counts,
            bug_found,
            found_at_k,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanFoundAtK {
    pub k: usize,
    pub mean_count: f64,
    pub mean_fraction: f64,
}

/// Arithmetic means over runs (and, for Found@K, over ranking seeds).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateMetrics {
    pub runs: usize,
    pub tp: f64,
    pub fp: f64,
    pub tn: f64,
    #[serde(rename = "fn")]
    pub fn_: f64,
    pub bug_found: f64,
    pub fpr: f64,
    pub precision: f64,
    pub found_at_k: Vec<MeanFoundAtK>,
}

pub fn aggregate_runs(runs: &[RunMetrics]) -> Result<AggregateMetrics, MetricsError> {
    if runs.is_empty() {
        return Err(MetricsError::NoRuns);
    }
    let n = runs.len() as f64;
    let mean = |f: &dyn Fn(&RunMetrics) -> f64| runs.iter().map(f).sum::<f64>() / n;
    let ks: Vec<usize> = runs[0].found_at_k.iter().map(|s| s.k).collect();
    let found_at_k = ks
        .iter()
        .map(|&k| {
            let samples: Vec<&FoundAtK> = runs
                .iter()
                .flat_map(|r| r.found_at_k.iter().filter(|s| s.k == k).flat_map(|s| &s.per_seed))
                .collect();
            let m = samples.len().max(1) as f64;
            MeanFoundAtK {
                k,
                mean_count: samples.iter().map(|f| f.count as f64).sum::<f64>() / m,
                mean_fraction: samples.iter().map(|f| f.fraction).sum::<f64>() / m,
            }
        })
        .collect();
    Ok(AggregateMetrics {
        runs: runs.len(),
        tp: mean(&|r| r.counts.tp as f64),
        fp: mean(&|r| r.counts.fp as f64),
        tn: mean(&|r| r.counts.tn as f64),
        fn_: mean(&|r| r.counts.fn_ as f64),
        bug_found: mean(&|r| r.bug_found as f64),
        fpr: mean(&|r| r.fpr),
        precision: mean(&|r| r.precision),
        found_at_k,
    })
}
