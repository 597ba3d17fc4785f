use std::io::{self, Write};

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ForestError, ForestParams, IsolationForest};
use crate::features::FeatureVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedEntry {
    pub record_id: String,
    pub anomaly_score: f64,
    /// 1-based.
    pub rank: usize,
}

/// Failed tests of one (bug, run), most suspicious first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedList {
    pub bug_id: String,
    pub run_id: u32,
    pub entries: Vec<RankedEntry>,
}

impl RankedList {
    pub fn empty(bug_id: &str, run_id: u32) -> Self {
        Self {
            bug_id: bug_id.to_string(),
            run_id,
            entries: Vec::new(),
        }
    }

    pub fn rank_of(&self, record_id: &str) -> Option<usize> {
        self.entries.iter().find(|e| e.record_id == record_id).map(|e| e.rank)
    }
}

/// Orders by score, highest first. Equal scores keep input order.
pub fn rank_by_scores(bug_id: &str, run_id: u32, ids: &[&str], scores: &[f64]) -> RankedList {
    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    RankedList {
        bug_id: bug_id.to_string(),
        run_id,
        entries: order
            .into_iter()
            .enumerate()
            .map(|(pos, i)| RankedEntry {
                record_id: ids[i].to_string(),
                anomaly_score: scores[i],
                rank: pos + 1,
            })
            .collect(),
    }
}

/// Anomaly score of every vector averaged over one forest per seed.
pub fn mean_scores(vectors: &[FeatureVector], params: &ForestParams, seeds: &[u64]) -> Result<Vec<f64>, ForestError> {
    if seeds.is_empty() {
        return Err(ForestError::NoSeeds);
    }
    if vectors.is_empty() {
        return Ok(Vec::new());
    }
    let rows: Vec<_> = vectors.iter().map(FeatureVector::to_array).collect();
    let mut sums = vec![0.0; rows.len()];
    for &seed in seeds {
        let forest = IsolationForest::fit(&rows, params, seed)?;
        for (s, row) in sums.iter_mut().zip(&rows) {
            *s += forest.score(row);
        }
    }
    let k = seeds.len() as f64;
    Ok(sums.into_iter().map(|s| s / k).collect())
}

/// Consensus ranking: mean anomaly score over `seeds`, then descending.
pub fn rank_failed_tests(
    bug_id: &str,
    run_id: u32,
    ids: &[&str],
    vectors: &[FeatureVector],
    params: &ForestParams,
    seeds: &[u64],
) -> Result<RankedList, ForestError> {
    if ids.len() != vectors.len() {
        return Err(ForestError::Misaligned {
            ids: ids.len(),
            vectors: vectors.len(),
        });
    }
    let scores = mean_scores(vectors, params, seeds)?;
    Ok(rank_by_scores(bug_id, run_id, ids, &scores))
}

/// Uniform random permutation; every score is 0.
pub fn random_ranking(bug_id: &str, run_id: u32, ids: &[&str], seed: u64) -> RankedList {
    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    RankedList {
        bug_id: bug_id.to_string(),
        run_id,
        entries: order
            .into_iter()
            .enumerate()
            .map(|(pos, i)| RankedEntry {
                record_id: ids[i].to_string(),
                anomaly_score: 0.0,
                rank: pos + 1,
            })
            .collect(),
    }
}

/// `bug_id\trun_id\trank\trecord_id\tmean_score`, sorted by bug, run, rank.
pub fn write_ranked_dump<W: Write>(mut out: W, lists: &[RankedList]) -> io::Result<()> {
    let mut sorted: Vec<&RankedList> = lists.iter().collect();
    sorted.sort_by(|a, b| (&a.bug_id, a.run_id).cmp(&(&b.bug_id, b.run_id)));
    for list in sorted {
        for e in &list.entries {
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}",
                list.bug_id, list.run_id, e.rank, e.record_id, e.anomaly_score
            )?;
        }
    }
    Ok(())
}
