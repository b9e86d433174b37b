//! Average ranks, the Friedman test and the Nemenyi critical difference.

use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::{Error, Result};

/// Studentized-range-based critical values `q_{0.05}` for k = 2..=10
/// methods (Demšar 2006, Table 5a).
const NEMENYI_Q_05: [f64; 9] = [1.960, 2.343, 2.569, 2.728, 2.850, 2.949, 3.031, 3.102, 3.164];

pub const SIGNIFICANCE_LEVEL: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct RankSummary {
    /// Average rank per method, in the column order of the input.
    pub average_ranks: Vec<f64>,
    pub n_datasets: usize,
    pub friedman_statistic: f64,
    pub critical_value: f64,
    pub nemenyi_cd: f64,
    pub significant: bool,
}

/// Ranks of `values` in ascending order (1 = smallest), ties averaged.
pub fn rank_row(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Average over rows (datasets) of the per-row ranks of each column (method).
pub fn average_ranks(losses: &[Vec<f64>]) -> Result<Vec<f64>> {
    let k = losses.first().map(Vec::len).ok_or_else(|| Error::InsufficientData("no datasets to rank".into()))?;
    let mut sums = vec![0.0; k];
    for row in losses {
        if row.len() != k {
            return Err(Error::Dimension {
                expected: k,
                got: row.len(),
            });
        }
        for (s, r) in sums.iter_mut().zip(rank_row(row)) {
            *s += r;
        }
    }
    Ok(sums.into_iter().map(|s| s / losses.len() as f64).collect())
}

/// `12N / (k(k+1)) * (sum R_j^2 - k(k+1)^2 / 4)`.
pub fn friedman_statistic(average_ranks: &[f64], n_datasets: usize) -> f64 {
    let k = average_ranks.len() as f64;
    let n = n_datasets as f64;
    let sum_sq: f64 = average_ranks.iter().map(|r| r * r).sum();
    12.0 * n / (k * (k + 1.0)) * (sum_sq - k * (k + 1.0).powi(2) / 4.0)
}

pub fn nemenyi_q(k: usize) -> Result<f64> {
    if !(2..=10).contains(&k) {
        return Err(Error::Config(format!("Nemenyi table covers 2..=10 methods, got {k}")));
    }
    Ok(NEMENYI_Q_05[k - 2])
}

/// `q_k * sqrt(k(k+1) / (6N))`.
pub fn nemenyi_cd(k: usize, n_datasets: usize) -> Result<f64> {
    let kf = k as f64;
    Ok(nemenyi_q(k)? * (kf * (kf + 1.0) / (6.0 * n_datasets as f64)).sqrt())
}

/// Friedman test against the chi-square distribution with `k - 1` degrees of
/// freedom, plus the Nemenyi critical difference. Only the 0.05 level is
/// tabulated for Nemenyi.
pub fn friedman_nemenyi(average_ranks: &[f64], n_datasets: usize, level: f64) -> Result<RankSummary> {
    let k = average_ranks.len();
    if k < 2 || n_datasets < 2 {
        return Err(Error::InsufficientData(format!(
            "Friedman test needs k >= 2 and N >= 2 (k = {k}, N = {n_datasets})"
        )));
    }
    if level != SIGNIFICANCE_LEVEL {
        return Err(Error::Config(format!("only level {SIGNIFICANCE_LEVEL} is supported")));
    }
    let cd = nemenyi_cd(k, n_datasets)?;
    let chi = ChiSquared::new((k - 1) as f64).map_err(|e| Error::Config(e.to_string()))?;
    let critical_value = chi.inverse_cdf(1.0 - level);
    let statistic = friedman_statistic(average_ranks, n_datasets);
    Ok(RankSummary {
        average_ranks: average_ranks.to_vec(),
        n_datasets,
        friedman_statistic: statistic,
        critical_value,
        nemenyi_cd: cd,
        significant: statistic > critical_value,
    })
}

/// Ranks and tests a datasets-by-methods loss matrix.
pub fn rank_summary(losses: &[Vec<f64>]) -> Result<RankSummary> {
    let ranks = average_ranks(losses)?;
    friedman_nemenyi(&ranks, losses.len(), SIGNIFICANCE_LEVEL)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn tie_averaging() {
        assert_eq!(rank_row(&[1.0, 2.0, 2.0]), vec![1.0, 2.5, 2.5]);
        assert_eq!(rank_row(&[3.0, 3.0, 3.0, 3.0]), vec![2.5; 4]);
        assert_eq!(average_ranks(&[vec![0.1, 0.2], vec![0.3, 0.9]]).unwrap(), vec![1.0, 2.0]);
    }

    #[test]
    fn perfectly_ordered_ranks() {
        let rows: Vec<Vec<f64>> = (0..20).map(|_| vec![1.0, 2.0, 3.0, 4.0, 5.0]).collect();
        let s = rank_summary(&rows).unwrap();
        assert_eq!(s.friedman_statistic, 80.0);
        assert!(s.significant);
        assert!((s.nemenyi_cd - 2.728 * 0.5).abs() < 1e-12);
        // chi-square 0.95 quantile, 4 degrees of freedom
        assert!((s.critical_value - 9.487729).abs() < 1e-5);
    }

    #[test]
    fn all_tied() {
        let rows = vec![vec![0.5; 6]; 7];
        let s = rank_summary(&rows).unwrap();
        assert!(s.friedman_statistic.abs() < 1e-12);
        assert!(!s.significant);
        assert!(s.average_ranks.iter().all(|&r| r == 3.5));
    }

    #[test]
    fn errors() {
        assert!(nemenyi_q(11).is_err());
        assert!(friedman_nemenyi(&[1.0, 2.0], 1, 0.05).is_err());
        assert!(friedman_nemenyi(&[1.0, 2.0], 5, 0.1).is_err());
        assert!(average_ranks(&[]).is_err());
    }

    proptest! {
        #[test]
        fn rank_sums_and_monotone_invariance(
            rows in prop::collection::vec(prop::collection::vec(0u8..6, 4), 2..12),
        ) {
            let losses: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|&v| v as f64).collect()).collect();
            let ranks = average_ranks(&losses).unwrap();
            let k = 4.0;
            prop_assert!((ranks.iter().sum::<f64>() - k * (k + 1.0) / 2.0).abs() < 1e-9);
            let moved: Vec<Vec<f64>> = losses.iter().map(|r| r.iter().map(|v| (v * 3.0 + 1.0).exp()).collect()).collect();
            let a = rank_summary(&losses).unwrap().friedman_statistic;
            let b = rank_summary(&moved).unwrap().friedman_statistic;
            prop_assert_eq!(a, b);
        }
    }
}
