//! Classical order-blind two-sample tests: Wilcoxon rank-sum and
//! two-sample Kolmogorov–Smirnov.

use std::f64::consts::PI;

use serde::Serialize;
use statrs::function::erf::erfc;

use crate::{Error, Result};

/// Largest sample size (per side) for which the rank-sum p-value is computed
/// from the exact permutation distribution.
pub const WILCOXON_EXACT_MAX: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestReport {
    pub statistic: f64,
    pub p_value: f64,
    pub method: &'static str,
}

/// Mid-ranks (1-based) of `values`, plus the tie groups' sizes.
fn mid_ranks(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let rank = (i + j + 2) as f64 / 2.0;
        for &k in &idx[i..=j] {
            ranks[k] = rank;
        }
        ties.push(j - i + 1);
        i = j + 1;
    }
    (ranks, ties)
}

fn check_samples(x: &[f64], y: &[f64]) -> Result<()> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::domain("both samples must be non-empty"));
    }
    if x.iter().chain(y).any(|v| v.is_nan()) {
        return Err(Error::domain("samples contain NaN"));
    }
    Ok(())
}

fn normal_two_sided(z: f64) -> f64 {
    erfc(z.abs() / std::f64::consts::SQRT_2).min(1.0)
}

/// Two-sided rank-sum test. The statistic is the standardized rank sum of
/// `x` (tie-corrected variance). For samples of at most
/// [`WILCOXON_EXACT_MAX`] each, the p-value comes from the exact permutation
/// distribution of the mid-rank sum; otherwise from the normal
/// approximation without continuity correction.
pub fn wilcoxon_rank_sum(x: &[f64], y: &[f64]) -> Result<TestReport> {
    check_samples(x, y)?;
    let (n1, n2) = (x.len(), y.len());
    let n = n1 + n2;
    let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    let (ranks, ties) = mid_ranks(&pooled);
    let w: f64 = ranks[..n1].iter().sum();
    let mean = n1 as f64 * (n as f64 + 1.0) / 2.0;
    let tie_term: f64 =
        ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / (n as f64 * (n as f64 - 1.0)).max(1.0);
    let var = n1 as f64 * n2 as f64 / 12.0 * ((n as f64 + 1.0) - tie_term);
    let z = if var > 0.0 { (w - mean) / var.sqrt() } else { 0.0 };

    if n1.max(n2) <= WILCOXON_EXACT_MAX {
        return Ok(TestReport { statistic: z, p_value: exact_rank_sum_p(&ranks, n1, w), method: "wilcoxon-exact" });
    }
    let p = if var > 0.0 { normal_two_sided(z) } else { 1.0 };
    Ok(TestReport { statistic: z, p_value: p, method: "wilcoxon-normal" })
}

/// P(|W - E W| >= |w - E W|) over all ways of choosing `n1` of the pooled
/// mid-ranks. Ranks are doubled to make them integers.
fn exact_rank_sum_p(ranks: &[f64], n1: usize, w: f64) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let max_sum: usize = doubled.iter().sum();
    // ways[k][s]: subsets of size k with doubled sum s
    let mut ways = vec![vec![0.0f64; max_sum + 1]; n1 + 1];
    ways[0][0] = 1.0;
    for (seen, &r) in doubled.iter().enumerate() {
        for k in (1..=n1.min(seen + 1)).rev() {
            let (lo, hi) = ways.split_at_mut(k);
            for s in (r..=max_sum).rev() {
                hi[0][s] += lo[k - 1][s - r];
            }
        }
    }
    let total: f64 = ways[n1].iter().sum();
    let center = n1 as f64 * (ranks.len() as f64 + 1.0);
    let observed = (2.0 * w - center).abs();
    let extreme: f64 = ways[n1]
        .iter()
        .enumerate()
        .filter(|(s, _)| (*s as f64 - center).abs() >= observed - 1e-9)
        .map(|(_, c)| c)
        .sum();
    (extreme / total).min(1.0)
}

/// Survival function of the Kolmogorov distribution, `P(K > lambda)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // theta-function form converges fast for small arguments
        let l2 = lambda * lambda;
        let cdf = (2.0 * PI).sqrt() / lambda
            * (1..=10)
                .map(|k| {
                    let odd = (2 * k - 1) as f64;
                    (-(odd * odd) * PI * PI / (8.0 * l2)).exp()
                })
                .sum::<f64>();
        return (1.0 - cdf).clamp(0.0, 1.0);
    }
    let sf = 2.0
        * (1..=100)
            .map(|k| {
                let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                sign * (-2.0 * (k * k) as f64 * lambda * lambda).exp()
            })
            .sum::<f64>();
    sf.clamp(0.0, 1.0)
}

/// Two-sample KS: `D = sup |F_x - F_y|` over the pooled points, p-value from
/// the asymptotic Kolmogorov distribution at `sqrt(n_x n_y / (n_x + n_y)) · D`.
pub fn ks_two_sample(x: &[f64], y: &[f64]) -> Result<TestReport> {
    check_samples(x, y)?;
    let mut xs = x.to_vec();
    let mut ys = y.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let (nx, ny) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < xs.len() && j < ys.len() {
        let v = xs[i].min(ys[j]);
        while i < xs.len() && xs[i] <= v {
            i += 1;
        }
        while j < ys.len() && ys[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / nx - j as f64 / ny).abs());
    }
    let en = (nx * ny / (nx + ny)).sqrt();
    Ok(TestReport { statistic: d, p_value: kolmogorov_sf(en * d), method: "ks-asymptotic" })
}
