//! Evaluation report: machine-readable JSON plus an aligned text table.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::{OracleKind, ProvenanceFilter};
use crate::metrics::{AggregateMetrics, FoundAtK, FoundAtKSeries, RunMetrics};
use crate::stats::{compare, Comparison, StatsError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigSummary {
    pub k_values: Vec<usize>,
    pub ranking: String,
    pub seeds: Vec<u64>,
    pub provenance: ProvenanceFilter,
    pub baseline_noexception: bool,
    pub num_trees: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub ingested: usize,
    pub after_dedup: usize,
    pub after_compile_filter: usize,
    pub after_provenance_filter: usize,
    pub bugs: usize,
    pub runs: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    #[serde(flatten)]
    pub metrics: RunMetrics,
    /// Found@K of the score-averaged consensus ranking.
    pub consensus_found_at_k: Vec<FoundAtK>,
    /// Random-ranking Found@K under the same seeds; only for iforest.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub random_found_at_k: Vec<FoundAtKSeries>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KindBreakdown {
    pub oracle_kind: OracleKind,
    pub runs: Vec<RunMetrics>,
    pub aggregate: Option<AggregateMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproachReport {
    pub name: String,
    pub runs: Vec<RunReport>,
    /// `None` when the corpus holds no entries at all.
    pub aggregate: Option<AggregateMetrics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random_aggregate: Option<AggregateMetrics>,
    pub by_oracle_kind: Vec<KindBreakdown>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub config: ConfigSummary,
    pub conventions: Vec<String>,
    pub warnings: Vec<String>,
    pub corpus: CorpusSummary,
    pub approaches: Vec<ApproachReport>,
    pub comparisons: Vec<Comparison>,
}

pub const CONVENTIONS: [&str; 3] = [
    "fpr and precision are 0 when their denominator is 0",
    "found_at_k.count is the number of bugs whose first TP is within the top K; found_at_k.fraction divides it by the number of bugs",
    "aggregates are arithmetic means over runs and, for Found@K, over ranking seeds",
];

impl ApproachReport {
    pub fn approach_runs(&self) -> Vec<RunMetrics> {
        self.runs.iter().map(|r| r.metrics.clone()).collect()
    }
}

fn per_run(runs: &[RunMetrics], f: impl Fn(&RunMetrics) -> f64) -> Vec<f64> {
    runs.iter().map(f).collect()
}

/// Found@K counts paired by (run, seed index).
fn found_samples(series_of: impl Fn(usize) -> Option<Vec<f64>>, runs: usize) -> Option<Vec<f64>> {
    let mut all = Vec::new();
    for r in 0..runs {
        all.extend(series_of(r)?);
    }
    Some(all)
}

fn series_counts(series: &[FoundAtKSeries], k: usize) -> Option<Vec<f64>> {
    series
        .iter()
        .find(|s| s.k == k)
        .map(|s| s.per_seed.iter().map(|f| f.count as f64).collect())
}

/// Compares two approaches metric by metric. BugFound, Precision and FPR are
/// paired per run; Found@K counts per (run, seed).
pub fn compare_approaches(a: &ApproachReport, b: &ApproachReport) -> Result<Vec<Comparison>, StatsError> {
    let (ra, rb) = (a.approach_runs(), b.approach_runs());
    if ra.len() != rb.len() {
        return Err(StatsError::UnequalLengths(ra.len(), rb.len()));
    }
    if ra.is_empty() {
        return Ok(Vec::new());
    }
    let sides = |metric: &str, x: Vec<f64>, y: Vec<f64>| compare(metric, (&a.name, &x), (&b.name, &y));
    let mut rows = vec![
        sides(
            "bug_found",
            per_run(&ra, |r| r.bug_found as f64),
            per_run(&rb, |r| r.bug_found as f64),
        )?,
        sides(
            "precision",
            per_run(&ra, |r| r.precision),
            per_run(&rb, |r| r.precision),
        )?,
        sides("fpr", per_run(&ra, |r| r.fpr), per_run(&rb, |r| r.fpr))?,
    ];
    for s in &ra[0].found_at_k {
        let xa = found_samples(|i| series_counts(&ra[i].found_at_k, s.k), ra.len());
        let xb = found_samples(|i| series_counts(&rb[i].found_at_k, s.k), rb.len());
        if let (Some(xa), Some(xb)) = (xa, xb) {
            rows.push(sides(&format!("found@{}", s.k), xa, xb)?);
        }
    }
    Ok(rows)
}

/// Iforest against random ranking on the same approach and seeds.
pub fn compare_rankings(a: &ApproachReport) -> Result<Vec<Comparison>, StatsError> {
    let mut rows = Vec::new();
    let Some(first) = a.runs.first() else {
        return Ok(rows);
    };
    for s in &first.metrics.found_at_k {
        let xa = found_samples(|i| series_counts(&a.runs[i].metrics.found_at_k, s.k), a.runs.len());
        let xb = found_samples(|i| series_counts(&a.runs[i].random_found_at_k, s.k), a.runs.len());
        if let (Some(xa), Some(xb)) = (xa, xb) {
            rows.push(compare(
                &format!("found@{}", s.k),
                (&format!("{}+iforest", a.name), &xa),
                (&format!("{}+random", a.name), &xb),
            )?);
        }
    }
    Ok(rows)
}

/// Column-aligned text table; first row is the header.
fn table(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| {
            rows.iter()
                .filter_map(|r| r.get(c))
                .map(|s| s.chars().count())
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for (i, r) in rows.iter().enumerate() {
        let line: Vec<String> = r
            .iter()
            .enumerate()
            .map(|(c, s)| {
                if c == 0 {
                    format!("{s:<w$}", w = widths[c])
                } else {
                    format!("{s:>w$}", w = widths[c])
                }
            })
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
        if i == 0 {
            let total = widths.iter().sum::<usize>() + 2 * cols.saturating_sub(1);
            out.push_str(&"-".repeat(total));
            out.push('\n');
        }
    }
    out
}

fn metric_row(label: &str, ranking: &str, agg: &AggregateMetrics, ks: &[usize]) -> Vec<String> {
    let mut row = vec![
        label.to_string(),
        ranking.to_string(),
        format!("{:.1}", agg.tp),
        format!("{:.1}", agg.fp),
        format!("{:.1}", agg.tn),
        format!("{:.1}", agg.fn_),
        format!("{:.2}", agg.bug_found),
        format!("{:.2}%", agg.fpr * 100.0),
        format!("{:.2}%", agg.precision * 100.0),
    ];
    for k in ks {
        row.push(
            agg.found_at_k
                .iter()
                .find(|f| f.k == *k)
                .map_or_else(|| "-".to_string(), |f| format!("{:.2}", f.mean_count)),
        );
    }
    row
}

pub fn render_text(report: &Report) -> String {
    let ks = &report.config.k_values;
    let mut out = String::new();
    let c = &report.corpus;
    let _ = writeln!(
        out,
        "corpus: {} ingested, {} after dedup, {} after compile filter, {} after provenance filter ({}); {} bugs, {} runs",
        c.ingested,
        c.after_dedup,
        c.after_compile_filter,
        c.after_provenance_filter,
        serde_json::to_value(report.config.provenance).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
        c.bugs,
        c.runs.len()
    );
    let _ = writeln!(
        out,
        "ranking: {} over seeds {:?}; Found@K columns are mean bug counts",
        report.config.ranking, report.config.seeds
    );
    for w in &report.warnings {
        let _ = writeln!(out, "warning: {w}");
    }
    out.push('\n');

    let mut header: Vec<String> = [
        "Approach",
        "Ranking",
        "TP",
        "FP",
        "TN",
        "FN",
        "BugFound",
        "FPR",
        "Precision",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend(ks.iter().map(|k| format!("F@{k}")));
    let mut rows = vec![header.clone()];
    for a in &report.approaches {
        if let Some(agg) = &a.aggregate {
            rows.push(metric_row(&a.name, &report.config.ranking, agg, ks));
        }
        if let Some(agg) = &a.random_aggregate {
            rows.push(metric_row(&a.name, "random", agg, ks));
        }
    }
    out.push_str(&table(&rows));

    for a in &report.approaches {
        let _ = writeln!(out, "\nby oracle kind ({}):", a.name);
        let mut rows = vec![header.clone()];
        rows[0][0] = "OracleKind".into();
        for b in &a.by_oracle_kind {
            if let Some(agg) = &b.aggregate {
                rows.push(metric_row(b.oracle_kind.as_str(), &report.config.ranking, agg, ks));
            }
        }
        out.push_str(&table(&rows));
    }

    if !report.comparisons.is_empty() {
        out.push_str("\ncomparisons (Wilcoxon signed-rank, two-sided; Cliff's delta):\n");
        let mut rows = vec![[
            "Metric",
            "A",
            "B",
            "MeanA",
            "MeanB",
            "W",
            "p",
            "delta",
            "Magnitude",
            "Significant",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect::<Vec<_>>()];
        for c in &report.comparisons {
            rows.push(vec![
                c.metric.clone(),
                c.label_a.clone(),
                c.label_b.clone(),
                format!("{:.4}", c.mean_a),
                format!("{:.4}", c.mean_b),
                format!("{:.1}", c.statistic),
                format!("{:.4}", c.p_value),
                format!("{:.3}", c.delta),
                c.magnitude.as_str().to_string(),
                if c.significant { "yes" } else { "no" }.to_string(),
            ]);
        }
        out.push_str(&table(&rows));
    }
    out
}
