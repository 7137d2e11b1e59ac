//! Weight schemes, rank counts and tie-averaged utilities.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{check_finite, invalid, Error, Result};
use crate::math;
use crate::MAX_LAMBDA;

/// The predefined weights `w_1..w_λ` assigned to ranks, best first.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightScheme {
    weights: Vec<f64>,
    monotone: bool,
}

impl WeightScheme {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() || weights.len() > MAX_LAMBDA {
            return Err(Error::PopulationSize(weights.len()));
        }
        check_finite(&weights)?;
        let monotone =
            weights.windows(2).all(|p| p[0] >= p[1]) && weights[0] > weights[weights.len() - 1];
        Ok(Self { weights, monotone })
    }

    /// Truncation selection: `w_i = 1/μ` for `i ≤ μ`, zero otherwise.
    pub fn truncation(lambda: usize, mu: usize) -> Result<Self> {
        if mu == 0 || mu > lambda {
            return Err(invalid("truncation requires 1 <= mu <= lambda"));
        }
        let mut w = vec![0.0; lambda];
        w[..mu].fill(1.0 / mu as f64);
        Self::new(w)
    }

    /// Default scheme: truncation with `μ = ⌊λ/2⌋`.
    pub fn default_for(lambda: usize) -> Result<Self> {
        Self::truncation(lambda, lambda / 2)
    }

    /// Every rank gets the same weight `c`.
    pub fn equal(lambda: usize, c: f64) -> Result<Self> {
        Self::new(vec![c; lambda])
    }

    /// Positive log-rank weights `max(0, ln((λ+1)/2) - ln i)`, normalized to
    /// sum to one.
    pub fn log_rank(lambda: usize) -> Result<Self> {
        if lambda < 2 {
            return Err(Error::PopulationSize(lambda));
        }
        let top = math::ln((lambda as f64 + 1.0) / 2.0);
        let raw: Vec<f64> = (1..=lambda)
            .map(|i| (top - math::ln(i as f64)).max(0.0))
            .collect();
        let total: f64 = raw.iter().sum();
        Self::new(raw.into_iter().map(|w| w / total).collect())
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn lambda(&self) -> usize {
        self.weights.len()
    }

    /// `w_i ≥ w_{i+1}` for all `i` and `w_1 > w_λ`.
    pub fn is_monotone(&self) -> bool {
        self.monotone
    }

    pub fn require_monotone(&self) -> Result<()> {
        if self.monotone {
            Ok(())
        } else {
            Err(Error::NotMonotone)
        }
    }

    pub fn sum(&self) -> f64 {
        let mut s = math::CompensatedSum::default();
        for &w in &self.weights {
            s.add(w);
        }
        s.total()
    }

    /// True when every weight is identical.
    pub fn is_constant(&self) -> bool {
        self.weights.iter().all(|&w| w == self.weights[0])
    }
}

/// `strict[i] = #{j : v_j < v_i}`, `weak[i] = #{j : v_j ≤ v_i}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RankCounts {
    pub strict: Vec<usize>,
    pub weak: Vec<usize>,
}

fn cmp_finite(a: &f64, b: &f64) -> Ordering {
    a.partial_cmp(b).unwrap_or(Ordering::Equal)
}

/// Strict and weak rank counts of each value among all values. Ties use
/// exact equality.
pub fn rank_counts(values: &[f64]) -> Result<RankCounts> {
    if values.is_empty() {
        return Err(invalid("rank_counts needs at least one value"));
    }
    check_finite(values)?;
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| cmp_finite(&values[a], &values[b]));
    let mut strict = vec![0; n];
    let mut weak = vec![0; n];
    let mut start = 0;
    while start < n {
        let v = values[order[start]];
        let mut end = start + 1;
        while end < n && values[order[end]] == v {
            end += 1;
        }
        for &i in &order[start..end] {
            strict[i] = start;
            weak[i] = end;
        }
        start = end;
    }
    Ok(RankCounts { strict, weak })
}

/// Utility of each value: the weights of the ranks it occupies, averaged
/// over ties. Without ties this is `w_{rank}`.
pub fn utilities(values: &[f64], scheme: &WeightScheme) -> Result<Vec<f64>> {
    if values.len() != scheme.lambda() {
        return Err(Error::LengthMismatch {
            expected: scheme.lambda(),
            got: values.len(),
        });
    }
    let ranks = rank_counts(values)?;
    Ok(utilities_from_ranks(&ranks, scheme))
}

/// Like [`utilities`] for precomputed rank counts of a population of size λ.
pub fn utilities_from_ranks(ranks: &RankCounts, scheme: &WeightScheme) -> Vec<f64> {
    let w = scheme.weights();
    ranks
        .strict
        .iter()
        .zip(&ranks.weak)
        .map(|(&lo, &hi)| {
            if hi - lo == 1 {
                w[lo]
            } else {
                let tied = &w[lo..hi];
                tied.iter().sum::<f64>() / tied.len() as f64
            }
        })
        .collect()
}

/// `N_w = λ² · max_k w_k²`.
pub fn n_w_constant(scheme: &WeightScheme) -> f64 {
    let lambda = scheme.lambda() as f64;
    let max_sq = scheme
        .weights()
        .iter()
        .map(|w| w * w)
        .fold(0.0_f64, f64::max);
    lambda * lambda * max_sq
}
