//! Paired significance testing and effect sizes.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

/// Two-sided significance level.
pub const ALPHA: f64 = 0.05;

/// Largest effective sample size for which the exact null distribution is
/// used; larger samples fall back to the normal approximation.
pub const EXACT_MAX_N: usize = 25;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StatsError {
    #[error("paired samples differ in length ({0} vs {1})")]
    UnequalLengths(usize, usize),
    #[error("sample is empty")]
    Empty,
    #[error("sample contains NaN")]
    NaN,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// `min(W+, W-)`.
    pub statistic: f64,
    pub p_value: f64,
    /// Pairs left after dropping zero differences.
    pub n_effective: usize,
    pub exact: bool,
}

/// Average ranks (1-based) of `values`, which must be sorted ascending.
fn average_ranks(sorted: &[f64]) -> Vec<f64> {
    let mut ranks = vec![0.0; sorted.len()];
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        ranks[i..=j].fill(r);
        i = j + 1;
    }
    ranks
}

/// Wilcoxon signed-rank test on paired samples, two-sided.
///
/// Zero differences are dropped; tied magnitudes get average ranks. With at
/// most [`EXACT_MAX_N`] non-zero differences the p-value comes from the exact
/// permutation distribution of the signed ranks (ties included), otherwise
/// from the normal approximation with tie and continuity corrections.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<WilcoxonResult, StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::UnequalLengths(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(StatsError::Empty);
    }
    let mut diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    if diffs.iter().any(|d| d.is_nan()) {
        return Err(StatsError::NaN);
    }
    diffs.retain(|&d| d != 0.0);
    let n = diffs.len();
    if n == 0 {
        return Ok(WilcoxonResult {
            statistic: 0.0,
            p_value: 1.0,
            n_effective: 0,
            exact: true,
        });
    }
    diffs.sort_by(|x, y| x.abs().total_cmp(&y.abs()));
    let magnitudes: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = average_ranks(&magnitudes);
    let w_plus: f64 = diffs
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d > 0.0)
        .fold(0.0, |s, (_, r)| s + r);
    let total = (n * (n + 1)) as f64 / 2.0;
    let statistic = w_plus.min(total - w_plus);

    if n <= EXACT_MAX_N {
        // Average ranks are multiples of 1/2, so doubled ranks are integers.
        let doubled: Vec<usize> = ranks.iter().map(|r| (r * 2.0).round() as usize).collect();
        let max_sum: usize = doubled.iter().sum();
        let mut ways = vec![0u64; max_sum + 1];
        ways[0] = 1;
        let mut reach = 0;
        for &r in &doubled {
            for s in (0..=reach).rev() {
                if ways[s] != 0 {
                    ways[s + r] += ways[s];
                }
            }
            reach += r;
        }
        let cutoff = (statistic * 2.0).round() as usize;
        let tail: u64 = ways[..=cutoff].iter().sum();
        let p = 2.0 * tail as f64 / (1u64 << n) as f64;
        return Ok(WilcoxonResult {
            statistic,
            p_value: p.min(1.0),
            n_effective: n,
            exact: true,
        });
    }

    let nf = n as f64;
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && magnitudes[j + 1] == magnitudes[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let mean = nf * (nf + 1.0) / 4.0;
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    let dev = (mean - statistic - 0.5).max(0.0);
    let p = if var > 0.0 {
        erfc(dev / var.sqrt() / std::f64::consts::SQRT_2)
    } else {
        1.0
    };
    Ok(WilcoxonResult {
        statistic,
        p_value: p.min(1.0),
        n_effective: n,
        exact: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Magnitude {
    Negligible,
    Small,
    Medium,
    Large,
}

impl Magnitude {
    pub fn of(delta: f64) -> Self {
        let d = delta.abs();
        if d < 0.147 {
            Magnitude::Negligible
        } else if d < 0.33 {
            Magnitude::Small
        } else if d < 0.474 {
            Magnitude::Medium
        } else {
            Magnitude::Large
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Magnitude::Negligible => "negligible",
            Magnitude::Small => "small",
            Magnitude::Medium => "medium",
            Magnitude::Large => "large",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectSize {
    pub delta: f64,
    pub magnitude: Magnitude,
    /// Cross pairs `(x, y)` with `x > y`.
    pub greater: u64,
    /// Cross pairs with `x < y`.
    pub less: u64,
    pub pairs: u64,
}

/// Cliff's delta of `a` against `b`: the share of cross pairs where `a`
/// wins minus the share where it loses.
pub fn cliffs_delta(a: &[f64], b: &[f64]) -> Result<EffectSize, StatsError> {
    if a.is_empty() || b.is_empty() {
        return Err(StatsError::Empty);
    }
    if a.iter().chain(b).any(|x| x.is_nan()) {
        return Err(StatsError::NaN);
    }
    let mut sorted = b.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len() as u64;
    let (mut greater, mut less) = (0u64, 0u64);
    for &x in a {
        greater += sorted.partition_point(|&y| y < x) as u64;
        less += m - sorted.partition_point(|&y| y <= x) as u64;
    }
    let pairs = a.len() as u64 * m;
    let delta = (greater as f64 - less as f64) / pairs as f64;
    Ok(EffectSize {
        delta,
        magnitude: Magnitude::of(delta),
        greater,
        less,
        pairs,
    })
}

/// One row of a side-by-side comparison of paired metric samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub metric: String,
    pub label_a: String,
    pub label_b: String,
    pub mean_a: f64,
    pub mean_b: f64,
    pub statistic: f64,
    pub p_value: f64,
    pub delta: f64,
    pub magnitude: Magnitude,
    pub significant: bool,
}

pub fn compare(
    metric: &str,
    (label_a, a): (&str, &[f64]),
    (label_b, b): (&str, &[f64]),
) -> Result<Comparison, StatsError> {
    let w = wilcoxon_signed_rank(a, b)?;
    let e = cliffs_delta(a, b)?;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok(Comparison {
        metric: metric.to_string(),
        label_a: label_a.to_string(),
        label_b: label_b.to_string(),
        mean_a: mean(a),
        mean_b: mean(b),
        statistic: w.statistic,
        p_value: w.p_value,
        delta: e.delta,
        magnitude: e.magnitude,
        significant: w.p_value < ALPHA,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn all_positive_five() {
        let a = [2.0, 4.0, 6.0, 8.0, 10.0];
        let b = [1.0, 2.0, 3.0, 4.0, 5.0];
        let w = wilcoxon_signed_rank(&a, &b).unwrap();
        assert_eq!(w.statistic, 0.0);
        assert_eq!(w.p_value, 2.0 / 32.0);
        assert!(w.exact);
    }

    #[test]
    fn identical_samples() {
        let a = [1.0, 2.0, 3.0];
        let w = wilcoxon_signed_rank(&a, &a).unwrap();
        assert_eq!(w.p_value, 1.0);
        assert_eq!(w.n_effective, 0);
    }

    #[test]
    fn length_mismatch() {
        assert_eq!(
            wilcoxon_signed_rank(&[1.0], &[1.0, 2.0]),
            Err(StatsError::UnequalLengths(1, 2))
        );
        assert_eq!(wilcoxon_signed_rank(&[], &[]), Err(StatsError::Empty));
    }

    #[test]
    fn zeros_are_dropped() {
        let a = [1.0, 5.0, 3.0, 9.0];
        let b = [1.0, 4.0, 1.0, 6.0];
        let w = wilcoxon_signed_rank(&a, &b).unwrap();
        assert_eq!(w.n_effective, 3);
        assert_eq!(w.p_value, 2.0 / 8.0);
    }

    #[test]
    fn cliffs_examples() {
        let e = cliffs_delta(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
        assert_eq!((e.delta, e.magnitude), (-1.0, Magnitude::Large));
        let e = cliffs_delta(&[3.0, 3.0], &[3.0, 3.0]).unwrap();
        assert_eq!((e.delta, e.magnitude), (0.0, Magnitude::Negligible));
        let e = cliffs_delta(&[1.0, 4.0, 5.0], &[2.0, 3.0, 6.0]).unwrap();
        assert_eq!((e.greater, e.less), (4, 5));
        assert_eq!(e.delta, -1.0 / 9.0);
        assert_eq!(e.magnitude, Magnitude::Negligible);
        assert_eq!(cliffs_delta(&[], &[1.0]), Err(StatsError::Empty));
    }

    #[test]
    fn bands() {
        assert_eq!(Magnitude::of(0.1469), Magnitude::Negligible);
        assert_eq!(Magnitude::of(0.147), Magnitude::Small);
        assert_eq!(Magnitude::of(-0.33), Magnitude::Medium);
        assert_eq!(Magnitude::of(0.474), Magnitude::Large);
        assert_eq!(Magnitude::of(0.4739), Magnitude::Medium);
    }

    #[test]
    fn comparison_row() {
        let c = compare(
            "found@5",
            ("iforest", &[5.0, 6.0, 7.0, 8.0, 9.0]),
            ("random", &[1.0, 1.0, 2.0, 2.0, 3.0]),
        )
        .unwrap();
        assert_eq!(c.mean_a, 7.0);
        assert_eq!(c.p_value, 0.0625);
        assert!(!c.significant);
        assert_eq!(c.magnitude, Magnitude::Large);
    }

    proptest! {
        #[test]
        fn cliffs_antisymmetric(a in proptest::collection::vec(-5i32..5, 1..20), b in proptest::collection::vec(-5i32..5, 1..20)) {
            let a: Vec<f64> = a.into_iter().map(f64::from).collect();
            let b: Vec<f64> = b.into_iter().map(f64::from).collect();
            let ab = cliffs_delta(&a, &b).unwrap();
            let ba = cliffs_delta(&b, &a).unwrap();
            prop_assert_eq!(ab.delta, -ba.delta);
            prop_assert!((-1.0..=1.0).contains(&ab.delta));
        }

        #[test]
        fn shift_invariant(pairs in proptest::collection::vec((-50i32..50, -50i32..50), 1..30), shift in -100i32..100) {
            let a: Vec<f64> = pairs.iter().map(|p| f64::from(p.0)).collect();
            let b: Vec<f64> = pairs.iter().map(|p| f64::from(p.1)).collect();
            let sa: Vec<f64> = a.iter().map(|x| x + f64::from(shift)).collect();
            let sb: Vec<f64> = b.iter().map(|x| x + f64::from(shift)).collect();
            prop_assert_eq!(wilcoxon_signed_rank(&a, &b).unwrap(), wilcoxon_signed_rank(&sa, &sb).unwrap());
            prop_assert_eq!(cliffs_delta(&a, &b).unwrap(), cliffs_delta(&sa, &sb).unwrap());
        }
    }
}
