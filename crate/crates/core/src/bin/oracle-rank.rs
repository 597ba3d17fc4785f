use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use oracle_rank::corpus::{
    generate_synthetic_corpus, ingest_corpus, CountRange, FeatureShift, ProvenanceFilter, SyntheticSpec,
};
use oracle_rank::iforest::ForestParams;
use oracle_rank::pipeline::{
    self, ranked_tsv, with_thread_pool, write_all, PipelineConfig, PipelineError, RankingMethod, RANKED_TSV,
};
use oracle_rank::report::{compare_approaches, Report};

#[derive(Parser)]
#[command(
    name = "oracle-rank",
    version,
    about = "Evaluate generated test oracles by the bugs they find"
)]
struct Cli {
    /// Worker threads (defaults to ORACLE_RANK_THREADS, then the CPU count).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute TP/FP/TN/FN, BugFound, FPR, Precision and Found@K.
    Evaluate(EvaluateArgs),
    /// Rank each bug's failed tests and write ranked.tsv.
    Rank(CorpusArgs),
    /// Write a synthetic corpus with known ground truth.
    Gen(GenArgs),
    /// Compare two approaches from report.json files.
    StatsCompare(CompareArgs),
}

#[derive(Args)]
struct CorpusArgs {
    #[arg(long)]
    records: PathBuf,
    #[arg(long)]
    outcomes: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    /// Comma-separated cut-offs.
    #[arg(long, value_delimiter = ',', default_values_t = pipeline::DEFAULT_K)]
    k: Vec<usize>,
    #[arg(long, default_value = "iforest")]
    ranking: RankingMethod,
    /// Comma-separated seeds, or a count N meaning 0..N.
    #[arg(long, default_value = "10")]
    seeds: String,
    #[arg(long, default_value = "buggy", value_parser = parse_provenance)]
    provenance: ProvenanceFilter,
    #[arg(long, default_value_t = 100)]
    trees: usize,
    /// Points per tree; defaults to min(256, n).
    #[arg(long)]
    subsample: Option<usize>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    /// Also evaluate the prefixes alone under the implicit no-exception oracle.
    #[arg(long)]
    baseline_noexception: bool,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 50)]
    bugs: usize,
    /// Failed tests per bug: N or MIN..MAX.
    #[arg(long, default_value = "100")]
    failed: CountRange,
    /// Bug-finding tests per bug: N or MIN..MAX.
    #[arg(long, default_value = "1..3")]
    tp: CountRange,
    #[arg(long, default_value_t = 0)]
    passing: usize,
    #[arg(long, default_value_t = 1)]
    runs: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Make bug-finding tests indistinguishable from the rest.
    #[arg(long)]
    no_shift: bool,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    #[arg(long, default_value = pipeline::GENERATED)]
    a_approach: String,
    #[arg(long, default_value = pipeline::GENERATED)]
    b_approach: String,
    /// Also write the comparisons as JSON here.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_provenance(s: &str) -> Result<ProvenanceFilter, String> {
    match s {
        "buggy" => Ok(ProvenanceFilter::BuggyOnly),
        "fixed" => Ok(ProvenanceFilter::FixedOnly),
        "all" => Ok(ProvenanceFilter::All),
        _ => Err(format!("expected buggy, fixed or all, got {s:?}")),
    }
}

fn parse_seeds(s: &str) -> Result<Vec<u64>, PipelineError> {
    let bad = || PipelineError::Config(format!("bad --seeds {s:?}: expected a count or a comma-separated list"));
    let s = s.trim();
    if !s.contains(',') {
        let n: u64 = s.parse().map_err(|_| bad())?;
        return Ok((0..n).collect());
    }
    s.split(',').map(|p| p.trim().parse().map_err(|_| bad())).collect()
}

fn config(args: &CorpusArgs, baseline: bool) -> Result<PipelineConfig, PipelineError> {
    let mut k = args.k.clone();
    k.sort_unstable();
    k.dedup();
    Ok(PipelineConfig {
        k_values: k,
        ranking: args.ranking,
        seeds: parse_seeds(&args.seeds)?,
        baseline_noexception: baseline,
        provenance: args.provenance,
        forest: ForestParams {
            num_trees: args.trees,
            subsample_size: args.subsample,
        },
    })
}

fn warn(report: &Report) {
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
}

fn evaluate(args: &EvaluateArgs) -> Result<(), PipelineError> {
    let cfg = config(&args.corpus, args.baseline_noexception)?;
    cfg.validate()?;
    let corpus = ingest_corpus(&args.corpus.records, &args.corpus.outcomes)?;
    let eval = pipeline::evaluate(&corpus, &cfg)?;
    warn(&eval.report);
    pipeline::write_evaluation(&eval, &args.corpus.out_dir)?;
    print!("{}", oracle_rank::report::render_text(&eval.report));
    Ok(())
}

fn rank(args: &CorpusArgs) -> Result<(), PipelineError> {
    let cfg = config(args, false)?;
    if cfg.ranking == RankingMethod::None {
        return Err(PipelineError::Config("ranking method required".into()));
    }
    cfg.validate()?;
    let corpus = ingest_corpus(&args.records, &args.outcomes)?;
    let lists = pipeline::rank(&corpus, &cfg)?;
    let written = write_all(&args.out_dir, &[(RANKED_TSV, ranked_tsv(&lists))])?;
    println!("ranked {} (bug, run) groups into {}", lists.len(), written[0].display());
    Ok(())
}

fn gen(args: &GenArgs) -> Result<(), PipelineError> {
    let spec = SyntheticSpec {
        bugs: args.bugs,
        failed_per_bug: args.failed,
        tp_per_bug: args.tp,
        passing_per_bug: args.passing,
        runs: args.runs,
        shift: if args.no_shift {
            FeatureShift::none()
        } else {
            FeatureShift::default()
        },
    };
    spec.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
    let synth = generate_synthetic_corpus(&spec, args.seed)?;
    let paths = synth.write_to(&args.out_dir)?;
    for p in paths {
        println!("{}", p.display());
    }
    Ok(())
}

fn load_report(path: &Path) -> Result<Report, PipelineError> {
    let text = std::fs::read_to_string(path).map_err(|source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| PipelineError::Io {
        path: path.to_path_buf(),
        source: std::io::Error::new(std::io::ErrorKind::InvalidData, e),
    })
}

fn stats_compare(args: &CompareArgs) -> Result<(), PipelineError> {
    let pick = |path: &Path, name: &str| -> Result<_, PipelineError> {
        load_report(path)?
            .approaches
            .into_iter()
            .find(|a| a.name == name)
            .ok_or_else(|| PipelineError::Config(format!("{} has no approach {name:?}", path.display())))
    };
    let a = pick(&args.a, &args.a_approach)?;
    let mut b = pick(&args.b, &args.b_approach)?;
    if a.name == b.name {
        b.name = format!("{}'", b.name);
    }
    let rows = compare_approaches(&a, &b)?;
    for c in &rows {
        println!(
            "{}\t{}={:.4}\t{}={:.4}\tW={}\tp={:.4}\tdelta={:.3}\t{}\t{}",
            c.metric,
            c.label_a,
            c.mean_a,
            c.label_b,
            c.mean_b,
            c.statistic,
            c.p_value,
            c.delta,
            c.magnitude.as_str(),
            if c.significant {
                "significant"
            } else {
                "not significant"
            }
        );
    }
    if let Some(out) = &args.out {
        let mut json = serde_json::to_string_pretty(&rows).expect("comparisons serialize");
        json.push('\n');
        std::fs::write(out, json).map_err(|source| PipelineError::Io {
            path: out.clone(),
            source,
        })?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let result = with_thread_pool(cli.threads, || match &cli.command {
        Command::Evaluate(a) => evaluate(a),
        Command::Rank(a) => rank(a),
        Command::Gen(a) => gen(a),
        Command::StatsCompare(a) => stats_compare(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}: {e}", e.stage());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
