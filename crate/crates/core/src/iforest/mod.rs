//! Isolation Forest anomaly scoring and per-bug ranking of failed tests.
//!
//! Each tree isolates points by recursive axis-aligned random splits on a
//! subsample drawn without replacement. Points that are isolated after few
//! splits get short path lengths and therefore high anomaly scores.

use rand::seq::index;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

mod rank;

pub use rank::{
    mean_scores, random_ranking, rank_by_scores, rank_failed_tests, write_ranked_dump, RankedEntry, RankedList,
};

const EULER_GAMMA: f64 = 0.577_215_664_9;

pub const DEFAULT_TREES: usize = 100;
pub const DEFAULT_MAX_SUBSAMPLE: usize = 256;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ForestError {
    #[error("cannot fit an isolation forest on zero points")]
    Empty,
    #[error("row {row} has {found} features, expected {expected}")]
    Ragged { row: usize, expected: usize, found: usize },
    #[error("row {row} contains a non-finite value")]
    NonFinite { row: usize },
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("ranking needs at least one seed")]
    NoSeeds,
    #[error("{ids} record ids but {vectors} feature vectors")]
    Misaligned { ids: usize, vectors: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestParams {
    pub num_trees: usize,
    /// `None` means `min(256, n)`.
    pub subsample_size: Option<usize>,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            num_trees: DEFAULT_TREES,
            subsample_size: None,
        }
    }
}

/// Average path length of an unsuccessful search in a binary search tree
/// of `m` nodes; normalizes path lengths.
pub fn average_path_length(m: usize) -> f64 {
    if m <= 1 {
        return 0.0;
    }
    let m = m as f64;
    2.0 * ((m - 1.0).ln() + EULER_GAMMA) - 2.0 * (m - 1.0) / m
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        size: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsolationTree {
    /// Arena; the root is `nodes[0]`.
    nodes: Vec<Node>,
}

impl IsolationTree {
    fn grow(data: &[&[f64]], sample: Vec<usize>, height_limit: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut tree = IsolationTree { nodes: Vec::new() };
        tree.build(data, sample, 0, height_limit, rng);
        tree
    }

    fn build(
        &mut self,
        data: &[&[f64]],
        sample: Vec<usize>,
        depth: usize,
        height_limit: usize,
        rng: &mut ChaCha8Rng,
    ) -> usize {
        let at = self.nodes.len();
        self.nodes.push(Node::Leaf { size: sample.len() });
        if depth >= height_limit || sample.len() <= 1 {
            return at;
        }
        let dims = data[sample[0]].len();
        let spread: Vec<(usize, f64, f64)> = (0..dims)
            .filter_map(|f| {
                let (lo, hi) = sample.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                    let x = data[i][f];
                    (lo.min(x), hi.max(x))
                });
                (hi > lo).then_some((f, lo, hi))
            })
            .collect();
        if spread.is_empty() {
            return at;
        }
        let (feature, lo, hi) = spread[rng.gen_range(0..spread.len())];
        let threshold = open_uniform(rng, lo, hi);
        let (left, right): (Vec<usize>, Vec<usize>) = sample.into_iter().partition(|&i| data[i][feature] < threshold);
        let left = self.build(data, left, depth + 1, height_limit, rng);
        let right = self.build(data, right, depth + 1, height_limit, rng);
        self.nodes[at] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        at
    }

    /// Depth at which `x` lands plus the expected remaining depth of its leaf.
    pub fn path_length(&self, x: &[f64]) -> f64 {
        let mut at = 0;
        let mut depth = 0usize;
        loop {
            match &self.nodes[at] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if x[*feature] < *threshold { *left } else { *right };
                    depth += 1;
                }
                Node::Leaf { size } => return depth as f64 + average_path_length(*size),
            }
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    /// Longest root-to-leaf edge count.
    pub fn height(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
                Node::Leaf { .. } => 0,
            }
        }
        walk(&self.nodes, 0)
    }
}

/// Uniform draw strictly inside `(lo, hi)`.
fn open_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    for _ in 0..16 {
        let t = lo + (hi - lo) * rng.gen::<f64>();
        if t > lo && t < hi {
            return t;
        }
    }
    // Only reachable when lo and hi are adjacent-ish floats.
    let mid = lo + (hi - lo) / 2.0;
    if mid > lo && mid < hi {
        mid
    } else {
        hi
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsolationForest {
    trees: Vec<IsolationTree>,
    num_trees: usize,
    subsample_size: usize,
    seed: u64,
}

fn check_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Vec<&[f64]>, ForestError> {
    let first = rows.first().ok_or(ForestError::Empty)?.as_ref().len();
    rows.iter()
        .enumerate()
        .map(|(row, r)| {
            let r = r.as_ref();
            if r.len() != first {
                Err(ForestError::Ragged {
                    row,
                    expected: first,
                    found: r.len(),
                })
            } else if r.iter().any(|x| !x.is_finite()) {
                Err(ForestError::NonFinite { row })
            } else {
                Ok(r)
            }
        })
        .collect()
}

impl IsolationForest {
    /// Fits a forest. The result depends only on `(rows, params, seed)`.
    pub fn fit<R: AsRef<[f64]>>(rows: &[R], params: &ForestParams, seed: u64) -> Result<Self, ForestError> {
        let data = check_rows(rows)?;
        let n = data.len();
        if params.num_trees == 0 {
            return Err(ForestError::InvalidParam("num_trees must be at least 1".into()));
        }
        let subsample_size = match params.subsample_size {
            None => n.min(DEFAULT_MAX_SUBSAMPLE),
            Some(0) => return Err(ForestError::InvalidParam("subsample_size must be at least 1".into())),
            Some(s) if s > n => {
                return Err(ForestError::InvalidParam(format!(
                    "subsample_size {s} exceeds {n} points"
                )))
            }
            Some(s) => s,
        };
        let height_limit = (subsample_size as f64).log2().ceil() as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let trees = (0..params.num_trees)
            .map(|_| {
                let sample = index::sample(&mut rng, n, subsample_size).into_vec();
                IsolationTree::grow(&data, sample, height_limit, &mut rng)
            })
            .collect();
        Ok(Self {
            trees,
            num_trees: params.num_trees,
            subsample_size,
            seed,
        })
    }

    pub fn trees(&self) -> &[IsolationTree] {
        &self.trees
    }

    pub fn subsample_size(&self) -> usize {
        self.subsample_size
    }

    pub fn num_trees(&self) -> usize {
        self.num_trees
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn height_limit(&self) -> usize {
        (self.subsample_size as f64).log2().ceil() as usize
    }

    pub fn mean_path_length(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.path_length(x)).sum::<f64>() / self.trees.len() as f64
    }

    /// Anomaly score `2^(-E[h(x)] / c(subsample_size))`, in `(0, 1)`.
    /// A single-point subsample has no normalizer; every point then scores 0.5.
    pub fn score(&self, x: &[f64]) -> f64 {
        let c = average_path_length(self.subsample_size);
        if c == 0.0 {
            return 0.5;
        }
        (-self.mean_path_length(x) / c).exp2()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> Vec<[f64; 3]> {
        (0..n)
            .map(|i| [i as f64, (i % 7) as f64, ((i * 31) % 11) as f64])
            .collect()
    }

    #[test]
    fn c_of_two() {
        assert!((average_path_length(2) - 0.154_431_329_8).abs() < 1e-10);
        assert_eq!(average_path_length(1), 0.0);
        assert_eq!(average_path_length(0), 0.0);
    }

    #[test]
    fn score_is_half_at_normalizer() {
        // E[h] = c(psi) gives exponent -1.
        let c = average_path_length(256);
        assert_eq!((-c / c).exp2(), 0.5);
    }

    #[test]
    fn single_point_is_a_leaf() {
        let f = IsolationForest::fit(&[[1.0, 2.0]], &ForestParams::default(), 3).unwrap();
        assert_eq!(f.subsample_size(), 1);
        for t in f.trees() {
            assert_eq!(t.nodes(), [Node::Leaf { size: 1 }]);
        }
        assert_eq!(f.score(&[1.0, 2.0]), 0.5);
    }

    #[test]
    fn default_subsample_is_capped() {
        let f = IsolationForest::fit(&grid(300), &ForestParams::default(), 1).unwrap();
        assert_eq!(f.subsample_size(), 256);
        assert_eq!(f.num_trees(), 100);
        let f = IsolationForest::fit(&grid(40), &ForestParams::default(), 1).unwrap();
        assert_eq!(f.subsample_size(), 40);
    }

    #[test]
    fn deterministic_per_seed() {
        let a = IsolationForest::fit(&grid(50), &ForestParams::default(), 9).unwrap();
        let b = IsolationForest::fit(&grid(50), &ForestParams::default(), 9).unwrap();
        let c = IsolationForest::fit(&grid(50), &ForestParams::default(), 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn height_and_thresholds_respect_limits() {
        let data = grid(300);
        let f = IsolationForest::fit(&data, &ForestParams::default(), 5).unwrap();
        assert_eq!(f.height_limit(), 8);
        for t in f.trees() {
            assert!(t.height() <= 8);
            for n in t.nodes() {
                if let Node::Split { feature, threshold, .. } = n {
                    let lo = data.iter().map(|r| r[*feature]).fold(f64::INFINITY, f64::min);
                    let hi = data.iter().map(|r| r[*feature]).fold(f64::NEG_INFINITY, f64::max);
                    assert!(*threshold > lo && *threshold < hi);
                }
            }
        }
    }

    #[test]
    fn constant_data_never_splits() {
        let f = IsolationForest::fit(&[[4.0, 4.0]; 10], &ForestParams::default(), 2).unwrap();
        for t in f.trees() {
            assert_eq!(t.nodes().len(), 1);
        }
        assert!((f.score(&[4.0, 4.0]) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn two_points_one_differing_dimension_score_equally() {
        let data = [[0.0, 1.0, 5.0], [0.0, 1.0, 9.0]];
        let f = IsolationForest::fit(&data, &ForestParams::default(), 4).unwrap();
        assert_eq!(f.mean_path_length(&data[0]), 1.0);
        assert_eq!(f.score(&data[0]), f.score(&data[1]));
    }

    #[test]
    fn scores_are_open_unit_interval() {
        let data = grid(64);
        let f = IsolationForest::fit(&data, &ForestParams::default(), 8).unwrap();
        for x in data.iter().chain([[1e6, -1e6, 0.0]].iter()) {
            let s = f.score(x);
            assert!(s > 0.0 && s < 1.0, "{s}");
        }
    }

    #[test]
    fn duplicated_mass_is_deeper_than_far_point() {
        let mut data = vec![[1.0, 1.0, 1.0]; 60];
        data.push([2.0, 0.0, 3.0]);
        let f = IsolationForest::fit(&data, &ForestParams::default(), 12).unwrap();
        assert!(f.mean_path_length(&[1.0, 1.0, 1.0]) >= f.mean_path_length(&[50.0, -50.0, 80.0]));
        assert!(f.score(&[50.0, -50.0, 80.0]) > f.score(&[1.0, 1.0, 1.0]));
    }

    #[test]
    fn bad_inputs() {
        let empty: [[f64; 2]; 0] = [];
        assert_eq!(
            IsolationForest::fit(&empty, &ForestParams::default(), 0),
            Err(ForestError::Empty)
        );
        let ragged = vec![vec![1.0, 2.0], vec![1.0]];
        assert!(matches!(
            IsolationForest::fit(&ragged, &ForestParams::default(), 0),
            Err(ForestError::Ragged { row: 1, .. })
        ));
        assert!(matches!(
            IsolationForest::fit(&[[f64::NAN]], &ForestParams::default(), 0),
            Err(ForestError::NonFinite { row: 0 })
        ));
        let too_big = ForestParams {
            subsample_size: Some(5),
            ..ForestParams::default()
        };
        assert!(IsolationForest::fit(&grid(3), &too_big, 0).is_err());
    }
}
