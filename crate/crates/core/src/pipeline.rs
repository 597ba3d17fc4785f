//! End to end: ingest, filter, classify, rank, measure and report.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{
    deduplicate, filter_provenance, filter_records, group_by_bug_run, Corpus, CorpusError, OracleKind,
    PrefixProvenance, ProvenanceFilter,
};
use crate::features::{extract_features, write_feature_dump, FeatureError, FeatureVector};
use crate::iforest::{mean_scores, random_ranking, rank_by_scores, write_ranked_dump, ForestError, ForestParams};
use crate::metrics::{
    aggregate_runs, bug_found, classify, first_tp_rank, found_at_k, no_exception_baseline, BugRankOutcome,
    ConfusionCounts, FirstTpRank, FoundAtK, FoundAtKSeries, MetricsError, OutcomeClass, RunMetrics,
};
use crate::report::{
    compare_approaches, compare_rankings, render_text, ApproachReport, ConfigSummary, CorpusSummary, KindBreakdown,
    Report, RunReport, CONVENTIONS,
};
use crate::stats::StatsError;
use crate::text::fnv1a;
use crate::trace::{parse_trace, TraceError};
use crate::RankedList;

pub const DEFAULT_K: [usize; 4] = [1, 3, 5, 10];
pub const DEFAULT_SEEDS: usize = 10;
pub const THREADS_ENV: &str = "ORACLE_RANK_THREADS";

pub const REPORT_JSON: &str = "report.json";
pub const REPORT_TXT: &str = "report.txt";
pub const RANKED_TSV: &str = "ranked.tsv";
pub const FEATURES_TSV: &str = "features.tsv";

pub const GENERATED: &str = "generated";
pub const NO_EXCEPTION: &str = "no_exception";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RankingMethod {
    Iforest,
    Random,
    None,
}

impl RankingMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            RankingMethod::Iforest => "iforest",
            RankingMethod::Random => "random",
            RankingMethod::None => "none",
        }
    }
}

impl fmt::Display for RankingMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RankingMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "iforest" => Ok(RankingMethod::Iforest),
            "random" => Ok(RankingMethod::Random),
            "none" => Ok(RankingMethod::None),
            _ => Err(format!(
                "unknown ranking method {s:?} (expected iforest, random or none)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Strictly ascending, all at least 1.
    pub k_values: Vec<usize>,
    pub ranking: RankingMethod,
    pub seeds: Vec<u64>,
    pub baseline_noexception: bool,
    pub provenance: ProvenanceFilter,
    pub forest: ForestParams,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            k_values: DEFAULT_K.to_vec(),
            ranking: RankingMethod::Iforest,
            seeds: (0..DEFAULT_SEEDS as u64).collect(),
            baseline_noexception: false,
            provenance: ProvenanceFilter::BuggyOnly,
            forest: ForestParams::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: &str| Err(PipelineError::Config(m.to_string()));
        if self.k_values.is_empty() {
            return bad("at least one K is required");
        }
        if self.k_values.contains(&0) {
            return bad("K values must be at least 1");
        }
        if self.k_values.windows(2).any(|w| w[0] >= w[1]) {
            return bad("K values must be strictly ascending");
        }
        if self.ranking != RankingMethod::None && self.seeds.is_empty() {
            return bad("ranking needs at least one seed");
        }
        if self.forest.num_trees == 0 {
            return bad("num_trees must be at least 1");
        }
        if self.forest.subsample_size == Some(0) {
            return bad("subsample size must be at least 1");
        }
        Ok(())
    }

    fn summary(&self) -> ConfigSummary {
        ConfigSummary {
            k_values: self.k_values.clone(),
            ranking: self.ranking.as_str().to_string(),
            seeds: self.seeds.clone(),
            provenance: self.provenance,
            baseline_noexception: self.baseline_noexception,
            num_trees: self.forest.num_trees,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("record {record_id:?}: {source}")]
    Trace {
        record_id: String,
        #[source]
        source: TraceError,
    },
    #[error(transparent)]
    Features(#[from] FeatureError),
    #[error("ranking: {0}")]
    Ranking(#[from] ForestError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("statistics: {0}")]
    Stats(#[from] StatsError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl PipelineError {
    /// Pipeline stage the error came from.
    pub fn stage(&self) -> &'static str {
        match self {
            PipelineError::Config(_) => "config",
            PipelineError::Corpus(_) => "ingest",
            PipelineError::Trace { .. } => "trace parsing",
            PipelineError::Features(_) => "feature extraction",
            PipelineError::Ranking(_) => "ranking",
            PipelineError::Metrics(_) => "metrics",
            PipelineError::Stats(_) => "statistics",
            PipelineError::Io { .. } => "io",
        }
    }

    /// 1 for usage problems, 2 for bad data or I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 1,
            _ => 2,
        }
    }
}

/// Seed for one (bug, run) under a user seed, so that adding or removing a
/// bug leaves every other bug's forests unchanged.
pub fn derive_seed(seed: u64, bug_id: &str, run_id: u32) -> u64 {
    let mut bytes = seed.to_le_bytes().to_vec();
    bytes.extend_from_slice(bug_id.as_bytes());
    bytes.push(0);
    bytes.extend_from_slice(&run_id.to_le_bytes());
    fnv1a(&bytes)
}

/// Runs `f` on a pool sized by `threads`, else by `ORACLE_RANK_THREADS`,
/// else rayon's default. Results do not depend on the pool size.
pub fn with_thread_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    let threads = threads.or_else(|| std::env::var(THREADS_ENV).ok()?.trim().parse().ok());
    match threads.filter(|&n| n > 0) {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        },
        None => f(),
    }
}

/// Corpus after dedup, compile-error and provenance filtering.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub corpus: Corpus,
    pub summary: CorpusSummary,
    pub warnings: Vec<String>,
}

pub fn prepare(raw: &Corpus, filter: ProvenanceFilter) -> Prepared {
    let deduped = deduplicate(raw);
    let compiled = filter_records(&deduped);
    let corpus = filter_provenance(&compiled, filter);
    let mut warnings = Vec::new();
    let fixed = corpus
        .entries()
        .iter()
        .filter(|e| e.record.prefix_provenance == PrefixProvenance::FixedVersion)
        .count();
    if fixed > 0 {
        warnings.push(format!(
            "{fixed} record(s) have prefixes generated from the fixed version; they may encode the fix and inflate bug-finding results"
        ));
    }
    let summary = CorpusSummary {
        ingested: raw.len(),
        after_dedup: deduped.len(),
        after_compile_filter: compiled.len(),
        after_provenance_filter: corpus.len(),
        bugs: corpus.bug_ids().len(),
        runs: corpus.run_ids(),
    };
    Prepared {
        corpus,
        summary,
        warnings,
    }
}

/// Failed tests of one (bug, run) with their features.
struct Group<'a> {
    bug_id: &'a str,
    run_id: u32,
    ids: Vec<&'a str>,
    kinds: Vec<OracleKind>,
    tp: Vec<bool>,
    vectors: Vec<FeatureVector>,
}

/// Slot 0 is the whole list; slots 1.. follow `OracleKind::ALL`.
type FirstRanks = [FirstTpRank; 1 + OracleKind::ALL.len()];

struct GroupRanks {
    primary: Vec<FirstRanks>,
    random: Vec<FirstRanks>,
    consensus: RankedList,
}

fn kind_slot(kind: OracleKind) -> usize {
    1 + OracleKind::ALL.iter().position(|k| *k == kind).unwrap_or(0)
}

fn classify_all(corpus: &Corpus) -> Result<Vec<OutcomeClass>, PipelineError> {
    Ok(corpus
        .entries()
        .iter()
        .map(|e| classify(&e.outcome))
        .collect::<Result<_, _>>()?)
}

fn failed_groups<'a>(corpus: &'a Corpus, classes: &[OutcomeClass]) -> Result<Vec<Group<'a>>, PipelineError> {
    let entries = corpus.entries();
    let groups = group_by_bug_run(entries);
    groups
        .par_iter()
        .filter_map(|(_, idx)| {
            let failed: Vec<usize> = idx
                .iter()
                .copied()
                .filter(|&i| matches!(classes[i], OutcomeClass::Tp | OutcomeClass::Fp))
                .collect();
            (!failed.is_empty()).then_some(failed)
        })
        .map(|failed| {
            let traces = failed
                .iter()
                .map(|&i| {
                    let e = &entries[i];
                    parse_trace(e.outcome.raw_trace.as_deref().unwrap_or_default()).map_err(|source| {
                        PipelineError::Trace {
                            record_id: e.record.record_id.clone(),
                            source,
                        }
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            let pairs: Vec<_> = failed
                .iter()
                .zip(&traces)
                .map(|(&i, t)| (&entries[i].record, t))
                .collect();
            let vectors = extract_features(&pairs)?;
            let first = &entries[failed[0]].record;
            Ok(Group {
                bug_id: &first.bug_id,
                run_id: first.run_id,
                ids: failed.iter().map(|&i| entries[i].record.record_id.as_str()).collect(),
                kinds: failed.iter().map(|&i| entries[i].record.oracle_kind).collect(),
                tp: failed.iter().map(|&i| classes[i] == OutcomeClass::Tp).collect(),
                vectors,
            })
        })
        .collect()
}

fn first_ranks(list: &RankedList, g: &Group) -> FirstRanks {
    let pos: HashMap<&str, usize> = g.ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
    let mut out = [FirstTpRank::Never; 1 + OracleKind::ALL.len()];
    let mut seen = [0usize; 1 + OracleKind::ALL.len()];
    for e in &list.entries {
        let i = pos[e.record_id.as_str()];
        for slot in [0, kind_slot(g.kinds[i])] {
            seen[slot] += 1;
            if g.tp[i] && out[slot] == FirstTpRank::Never {
                out[slot] = FirstTpRank::At(seen[slot]);
            }
        }
    }
    out
}

fn rank_group(g: &Group, cfg: &PipelineConfig) -> Result<GroupRanks, PipelineError> {
    let derived: Vec<u64> = cfg.seeds.iter().map(|&s| derive_seed(s, g.bug_id, g.run_id)).collect();
    let mut primary = Vec::with_capacity(derived.len());
    let mut random = Vec::new();
    let consensus = match cfg.ranking {
        RankingMethod::Iforest => {
            let mut sums = vec![0.0; g.ids.len()];
            for &d in &derived {
                let scores = mean_scores(&g.vectors, &cfg.forest, &[d])?;
                primary.push(first_ranks(&rank_by_scores(g.bug_id, g.run_id, &g.ids, &scores), g));
                random.push(first_ranks(&random_ranking(g.bug_id, g.run_id, &g.ids, d), g));
                for (s, x) in sums.iter_mut().zip(&scores) {
                    *s += x;
                }
            }
            let k = derived.len() as f64;
            let mean: Vec<f64> = sums.into_iter().map(|s| s / k).collect();
            rank_by_scores(g.bug_id, g.run_id, &g.ids, &mean)
        }
        RankingMethod::Random => {
            for &d in &derived {
                primary.push(first_ranks(&random_ranking(g.bug_id, g.run_id, &g.ids, d), g));
            }
            random_ranking(g.bug_id, g.run_id, &g.ids, derived[0])
        }
        RankingMethod::None => RankedList::empty(g.bug_id, g.run_id),
    };
    Ok(GroupRanks {
        primary,
        random,
        consensus,
    })
}

/// Found@K series for one run and rank slot; bugs of the universe without
/// failed tests in this run count as never found.
fn series_for(
    universe: &[String],
    k_values: &[usize],
    seeds: usize,
    in_run: &[(&Group, &GroupRanks)],
    pick: impl Fn(&GroupRanks, usize) -> FirstTpRank,
) -> Result<Vec<FoundAtKSeries>, PipelineError> {
    let mut per_k: Vec<Vec<FoundAtK>> = vec![Vec::with_capacity(seeds); k_values.len()];
    for j in 0..seeds {
        let by_bug: HashMap<&str, FirstTpRank> = in_run.iter().map(|(g, r)| (g.bug_id, pick(r, j))).collect();
        let outcomes: Vec<BugRankOutcome> = universe
            .iter()
            .map(|b| BugRankOutcome {
                bug_id: b.clone(),
                first_tp_rank: by_bug.get(b.as_str()).copied().unwrap_or(FirstTpRank::Never),
            })
            .collect();
        for (slot, &k) in per_k.iter_mut().zip(k_values) {
            slot.push(found_at_k(&outcomes, k)?);
        }
    }
    Ok(k_values
        .iter()
        .zip(per_k)
        .map(|(&k, v)| FoundAtKSeries::new(k, v))
        .collect())
}

/// One approach's metrics, rankings and features.
#[derive(Debug, Clone)]
pub struct ApproachOutput {
    pub report: ApproachReport,
    pub consensus: Vec<RankedList>,
    pub features: Vec<(String, FeatureVector)>,
}

pub fn evaluate_approach(name: &str, corpus: &Corpus, cfg: &PipelineConfig) -> Result<ApproachOutput, PipelineError> {
    cfg.validate()?;
    let classes = classify_all(corpus)?;
    let groups = failed_groups(corpus, &classes)?;
    let ranks: Vec<GroupRanks> = groups
        .par_iter()
        .map(|g| rank_group(g, cfg))
        .collect::<Result<_, _>>()?;
    let universe = corpus.bug_ids();
    let ranked = cfg.ranking != RankingMethod::None;
    let seeds = if ranked { cfg.seeds.len() } else { 0 };

    let mut runs = Vec::new();
    let mut kind_runs: Vec<Vec<RunMetrics>> = vec![Vec::new(); OracleKind::ALL.len()];
    for run in corpus.run_ids() {
        let members: Vec<usize> = (0..corpus.len())
            .filter(|&i| corpus.entries()[i].record.run_id == run)
            .collect();
        let in_run: Vec<(&Group, &GroupRanks)> = groups.iter().zip(&ranks).filter(|(g, _)| g.run_id == run).collect();
        let tally = |keep: &dyn Fn(usize) -> bool| {
            let counts: ConfusionCounts = members.iter().filter(|&&i| keep(i)).map(|&i| classes[i]).collect();
            let found = bug_found(
                members
                    .iter()
                    .filter(|&&i| keep(i))
                    .map(|&i| (corpus.entries()[i].record.bug_id.as_str(), classes[i])),
            );
            (counts, found)
        };
        let series = |slot: usize, random: bool| -> Result<Vec<FoundAtKSeries>, PipelineError> {
            if !ranked {
                return Ok(Vec::new());
            }
            series_for(universe, &cfg.k_values, seeds, &in_run, |r, j| {
                if random {
                    r.random[j][slot]
                } else {
                    r.primary[j][slot]
                }
            })
        };

        let (counts, found) = tally(&|_| true);
        let consensus_found_at_k = if ranked {
            let outcomes: Vec<BugRankOutcome> = {
                let by_bug: HashMap<&str, FirstTpRank> = in_run
                    .iter()
                    .map(|(g, r)| {
                        let tp: HashMap<&str, bool> = g.ids.iter().copied().zip(g.tp.iter().copied()).collect();
                        (g.bug_id, first_tp_rank(&r.consensus, |id| tp[id]))
                    })
                    .collect();
                universe
                    .iter()
                    .map(|b| BugRankOutcome {
                        bug_id: b.clone(),
                        first_tp_rank: by_bug.get(b.as_str()).copied().unwrap_or(FirstTpRank::Never),
                    })
                    .collect()
            };
            cfg.k_values
                .iter()
                .map(|&k| found_at_k(&outcomes, k))
                .collect::<Result<_, _>>()?
        } else {
            Vec::new()
        };
        let random_found_at_k = if cfg.ranking == RankingMethod::Iforest {
            series(0, true)?
        } else {
            Vec::new()
        };
        runs.push(RunReport {
            metrics: RunMetrics::new(run, counts, found, series(0, false)?),
            consensus_found_at_k,
            random_found_at_k,
        });

        for (q, kind) in OracleKind::ALL.iter().enumerate() {
            let (counts, found) = tally(&|i| corpus.entries()[i].record.oracle_kind == *kind);
            kind_runs[q].push(RunMetrics::new(run, counts, found, series(q + 1, false)?));
        }
    }

    let metrics: Vec<RunMetrics> = runs.iter().map(|r| r.metrics.clone()).collect();
    let aggregate = if metrics.is_empty() {
        None
    } else {
        Some(aggregate_runs(&metrics)?)
    };
    let random_aggregate = if cfg.ranking == RankingMethod::Iforest && !runs.is_empty() {
        let as_random: Vec<RunMetrics> = runs
            .iter()
            .map(|r| RunMetrics {
                found_at_k: r.random_found_at_k.clone(),
                ..r.metrics.clone()
            })
            .collect();
        Some(aggregate_runs(&as_random)?)
    } else {
        None
    };
    let by_oracle_kind = OracleKind::ALL
        .iter()
        .zip(kind_runs)
        .map(|(kind, runs)| {
            let aggregate = if runs.is_empty() {
                None
            } else {
                Some(aggregate_runs(&runs)?)
            };
            Ok(KindBreakdown {
                oracle_kind: *kind,
                runs,
                aggregate,
            })
        })
        .collect::<Result<_, PipelineError>>()?;

    let consensus = if ranked {
        ranks.into_iter().map(|r| r.consensus).collect()
    } else {
        Vec::new()
    };
    let features = groups
        .iter()
        .flat_map(|g| g.ids.iter().zip(&g.vectors).map(|(id, v)| (id.to_string(), *v)))
        .collect();
    Ok(ApproachOutput {
        report: ApproachReport {
            name: name.to_string(),
            runs,
            aggregate,
            random_aggregate,
            by_oracle_kind,
        },
        consensus,
        features,
    })
}

/// Full evaluation of the generated oracles, optionally against the
/// NoException baseline.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub report: Report,
    pub ranked: Vec<RankedList>,
    pub features: Vec<(String, FeatureVector)>,
}

pub fn evaluate(raw: &Corpus, cfg: &PipelineConfig) -> Result<Evaluation, PipelineError> {
    cfg.validate()?;
    let prepared = prepare(raw, cfg.provenance);
    let main = evaluate_approach(GENERATED, &prepared.corpus, cfg)?;
    let mut approaches = vec![main.report];
    if cfg.baseline_noexception {
        let baseline = no_exception_baseline(&prepared.corpus);
        approaches.push(evaluate_approach(NO_EXCEPTION, &baseline, cfg)?.report);
    }
    let mut comparisons = Vec::new();
    if cfg.baseline_noexception {
        comparisons.extend(compare_approaches(&approaches[0], &approaches[1])?);
    }
    if cfg.ranking == RankingMethod::Iforest {
        for a in &approaches {
            comparisons.extend(compare_rankings(a)?);
        }
    }
    Ok(Evaluation {
        report: Report {
            config: cfg.summary(),
            conventions: CONVENTIONS.iter().map(|s| s.to_string()).collect(),
            warnings: prepared.warnings,
            corpus: prepared.summary,
            approaches,
            comparisons,
        },
        ranked: main.consensus,
        features: main.features,
    })
}

/// Consensus rankings of every (bug, run) with failed tests.
pub fn rank(raw: &Corpus, cfg: &PipelineConfig) -> Result<Vec<RankedList>, PipelineError> {
    if cfg.ranking == RankingMethod::None {
        return Err(PipelineError::Config("ranking method required".into()));
    }
    cfg.validate()?;
    let prepared = prepare(raw, cfg.provenance);
    let classes = classify_all(&prepared.corpus)?;
    let groups = failed_groups(&prepared.corpus, &classes)?;
    groups
        .par_iter()
        .map(|g| rank_group(g, cfg).map(|r| r.consensus))
        .collect()
}

pub fn report_json(report: &Report) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

/// One line per ranked test: bug, run, rank, record id, mean score.
pub fn ranked_tsv(lists: &[RankedList]) -> String {
    let mut buf = Vec::new();
    write_ranked_dump(&mut buf, lists).expect("writing to memory");
    String::from_utf8(buf).expect("utf-8")
}

/// One line per failed test: record id, then the eleven features.
pub fn features_tsv(rows: &[(String, FeatureVector)]) -> String {
    let mut buf = Vec::new();
    write_feature_dump(&mut buf, rows.iter().map(|(id, v)| (id.as_str(), v))).expect("writing to memory");
    String::from_utf8(buf).expect("utf-8")
}

/// Writes every file or none: on failure, files already written are removed.
pub fn write_all(dir: &Path, files: &[(&str, String)]) -> Result<Vec<PathBuf>, PipelineError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| PipelineError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io(dir))?;
    let mut written = Vec::new();
    for (name, body) in files {
        let path = dir.join(name);
        if let Err(e) = fs::write(&path, body) {
            for p in &written {
                let _ = fs::remove_file(p);
            }
            let _ = fs::remove_file(&path);
            return Err(io(&path)(e));
        }
        written.push(path);
    }
    Ok(written)
}

pub fn write_evaluation(eval: &Evaluation, dir: &Path) -> Result<Vec<PathBuf>, PipelineError> {
    let mut files = vec![
        (REPORT_JSON, report_json(&eval.report)),
        (REPORT_TXT, render_text(&eval.report)),
        (FEATURES_TSV, features_tsv(&eval.features)),
    ];
    if eval.report.config.ranking != RankingMethod::None.as_str() {
        files.push((RANKED_TSV, ranked_tsv(&eval.ranked)));
    }
    write_all(dir, &files)
}
