//! Least squares and rank statistics over benchmark results.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FitError {
    #[error("fit refused: need at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("fit refused: all x values are equal (degenerate design matrix)")]
    Degenerate,
    #[error("fit refused: non-finite input")]
    NonFinite,
}

/// `y = intercept + slope * x` by ordinary least squares.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub intercept: f64,
    pub slope: f64,
    pub intercept_stderr: f64,
    pub slope_stderr: f64,
    pub r_squared: f64,
    pub n: usize,
}

impl LinearFit {
    pub fn predict(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }

    /// The x at which the fitted line reaches `y`; `None` for a flat line.
    pub fn solve_for(&self, y: f64) -> Option<f64> {
        (self.slope != 0.0).then(|| (y - self.intercept) / self.slope)
    }

    /// Slope more than `k` standard errors above zero.
    pub fn slope_positive_at(&self, k: f64) -> bool {
        self.slope > k * self.slope_stderr
    }
}

pub fn fit_linear(points: &[(f64, f64)]) -> Result<LinearFit, FitError> {
    let n = points.len();
    if n < 3 {
        return Err(FitError::TooFewPoints(n));
    }
    if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(FitError::NonFinite);
    }
    let nf = n as f64;
    let x_mean = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let y_mean = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = points.iter().map(|(x, _)| (x - x_mean).powi(2)).sum();
    if sxx == 0.0 {
        return Err(FitError::Degenerate);
    }
    let sxy: f64 = points.iter().map(|(x, y)| (x - x_mean) * (y - y_mean)).sum();
    let syy: f64 = points.iter().map(|(_, y)| (y - y_mean).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;
    let sse: f64 = points
        .iter()
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let sigma2 = sse / (nf - 2.0);
    let r_squared = if syy > 0.0 { (1.0 - sse / syy).clamp(0.0, 1.0) } else { 1.0 };
    Ok(LinearFit {
        intercept,
        slope,
        intercept_stderr: (sigma2 * (1.0 / nf + x_mean * x_mean / sxx)).sqrt(),
        slope_stderr: (sigma2 / sxx).sqrt(),
        r_squared,
        n,
    })
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[mid] } else { (v[mid - 1] + v[mid]) / 2.0 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankSumMethod {
    Exact,
    Normal,
}

/// Two-sided Mann-Whitney rank-sum test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankSum {
    /// U statistic of the first sample.
    pub u: f64,
    pub p_value: f64,
    pub method: RankSumMethod,
}

/// Largest `n1 * n2` for which the exact null distribution is used.
const EXACT_LIMIT: usize = 400;

/// Exact when samples are small and tie-free, otherwise the normal
/// approximation with tie correction and continuity correction.
pub fn rank_sum(a: &[f64], b: &[f64]) -> Option<RankSum> {
    let (n1, n2) = (a.len(), b.len());
    if n1 == 0 || n2 == 0 || a.iter().chain(b).any(|v| !v.is_finite()) {
        return None;
    }
    let mut pooled: Vec<(f64, bool)> = a.iter().map(|&v| (v, true)).chain(b.iter().map(|&v| (v, false))).collect();
    pooled.sort_by(|x, y| x.0.total_cmp(&y.0));

    let n = pooled.len();
    let mut rank_sum_a = 0.0;
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && pooled[j + 1].0 == pooled[i].0 {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        let rank = (i + j) as f64 / 2.0 + 1.0;
        rank_sum_a += rank * pooled[i..=j].iter().filter(|p| p.1).count() as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let (f1, f2) = (n1 as f64, n2 as f64);
    let u1 = rank_sum_a - f1 * (f1 + 1.0) / 2.0;
    let u_max = u1.max(f1 * f2 - u1);

    if tie_term == 0.0 && n1 * n2 <= EXACT_LIMIT {
        let counts = u_distribution(n1, n2);
        let total: f64 = counts.iter().sum();
        let upper: f64 = counts[u_max as usize..].iter().sum();
        return Some(RankSum {
            u: u1,
            p_value: (2.0 * upper / total).min(1.0),
            method: RankSumMethod::Exact,
        });
    }

    let nf = f1 + f2;
    let mean = f1 * f2 / 2.0;
    let variance = f1 * f2 / 12.0 * ((nf + 1.0) - tie_term / (nf * (nf - 1.0)));
    let p_value = if variance > 0.0 {
        let z = (u_max - mean - 0.5) / variance.sqrt();
        let normal = Normal::new(0.0, 1.0).expect("standard normal");
        (2.0 * (1.0 - normal.cdf(z))).clamp(0.0, 1.0)
    } else {
        1.0
    };
    Some(RankSum {
        u: u1,
        p_value,
        method: RankSumMethod::Normal,
    })
}

/// Number of rank arrangements giving each value of U, for sizes `n1`, `n2`.
fn u_distribution(n1: usize, n2: usize) -> Vec<f64> {
    let max_u = n1 * n2;
    // table[i][j] is the count vector for sizes (i, j), built row by row.
    let mut prev: Vec<Vec<f64>> = (0..=n2).map(|_| vec![1.0]).collect();
    for i in 1..=n1 {
        let mut row: Vec<Vec<f64>> = Vec::with_capacity(n2 + 1);
        row.push(vec![1.0]);
        for j in 1..=n2 {
            // last element from sample one: it beats all j of sample two
            let mut counts = vec![0.0; i * j + 1];
            for (u, c) in prev[j].iter().enumerate() {
                counts[u + j] += c;
            }
            for (u, c) in row[j - 1].iter().enumerate() {
                counts[u] += c;
            }
            row.push(counts);
        }
        prev = row;
    }
    let mut dist = prev.swap_remove(n2);
    dist.resize(max_u + 1, 0.0);
    dist
}
