//! k-means over the rows of a distance matrix, with clusters ranked into
//! severity levels by the mean of their centroid.

use rand::Rng;

use crate::closeness::SENTINEL;
use crate::streams::stream;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAssignment {
    pub labels: Vec<usize>,
    /// `level_order[c]` is the severity rank of cluster `c` (0 = lowest).
    pub level_order: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    /// Within-cluster sum of squares after initialization and each Lloyd step.
    pub objective_history: Vec<f64>,
}

impl ClusterAssignment {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    pub fn severity(&self, row: usize) -> usize {
        self.level_order[self.labels[row]]
    }

    pub fn inertia(&self) -> f64 {
        self.objective_history.last().copied().unwrap_or(0.0)
    }
}

/// Name of a severity rank; three clusters map to low/moderate/high.
pub fn severity_name(rank: usize, k: usize) -> String {
    match (k, rank) {
        (3, 0) => "low".into(),
        (3, 1) => "moderate".into(),
        (3, 2) => "high".into(),
        _ => rank.to_string(),
    }
}

/// Replaces sentinel entries by the mean of the non-sentinel entries in the
/// same column (0 when the whole column is sentinel).
pub fn impute_sentinels(matrix: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let cols = matrix.first().map_or(0, |r| r.len());
    let means: Vec<f64> = (0..cols)
        .map(|j| {
            let vals: Vec<f64> = matrix.iter().map(|r| r[j]).filter(|&v| v != SENTINEL).collect();
            if vals.is_empty() {
                0.0
            } else {
                vals.iter().sum::<f64>() / vals.len() as f64
            }
        })
        .collect();
    matrix.iter().map(|r| r.iter().zip(&means).map(|(&v, &m)| if v == SENTINEL { m } else { v }).collect()).collect()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    centroids.iter().enumerate().map(|(c, ctr)| (c, sq_dist(point, ctr))).fold((0, f64::INFINITY), |best, cur| {
        if cur.1 < best.1 {
            cur
        } else {
            best
        }
    })
}

fn plus_plus_init<R: Rng>(rows: &[Vec<f64>], k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut centroids = vec![rows[rng.random_range(0..rows.len())].clone()];
    while centroids.len() < k {
        let d2: Vec<f64> = rows.iter().map(|r| nearest(r, &centroids).1).collect();
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut idx = rows.len() - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    idx = i;
                    break;
                }
                target -= w;
            }
            idx
        } else {
            rng.random_range(0..rows.len())
        };
        centroids.push(rows[pick].clone());
    }
    centroids
}

/// Lloyd's algorithm with k-means++ seeding on the rows of `matrix`.
/// Sentinel entries are imputed first (see [`impute_sentinels`]). An empty
/// cluster is re-seeded with the row farthest from its current centroid.
pub fn kmeans_rows(matrix: &[Vec<f64>], k: usize, seed: u64, max_iter: usize) -> Result<ClusterAssignment> {
    let n = matrix.len();
    if k < 1 {
        return Err(Error::domain("k must be at least 1"));
    }
    if k > n {
        return Err(Error::domain(format!("k = {k} exceeds the {n} rows")));
    }
    if max_iter < 1 {
        return Err(Error::domain("max_iter must be at least 1"));
    }
    let width = matrix[0].len();
    if matrix.iter().any(|r| r.len() != width) {
        return Err(Error::domain("rows have different lengths"));
    }
    let rows = impute_sentinels(matrix);
    let mut rng = stream(seed, 0);
    let mut centroids = plus_plus_init(&rows, k, &mut rng);

    let assign = |centroids: &[Vec<f64>]| -> (Vec<usize>, f64) {
        let mut labels = Vec::with_capacity(n);
        let mut wss = 0.0;
        for r in &rows {
            let (c, d) = nearest(r, centroids);
            labels.push(c);
            wss += d;
        }
        (labels, wss)
    };

    let (mut labels, wss) = assign(&centroids);
    let mut history = vec![wss];
    for _ in 0..max_iter {
        let mut sums = vec![vec![0.0; width]; k];
        let mut sizes = vec![0usize; k];
        for (r, &c) in rows.iter().zip(&labels) {
            sizes[c] += 1;
            sums[c].iter_mut().zip(r).for_each(|(s, v)| *s += v);
        }
        for c in 0..k {
            if sizes[c] > 0 {
                centroids[c] = sums[c].iter().map(|s| s / sizes[c] as f64).collect();
            }
        }
        for c in 0..k {
            if sizes[c] == 0 {
                let far = (0..n)
                    .max_by(|&a, &b| {
                        sq_dist(&rows[a], &centroids[labels[a]]).total_cmp(&sq_dist(&rows[b], &centroids[labels[b]]))
                    })
                    .expect("non-empty");
                centroids[c] = rows[far].clone();
            }
        }
        let (next, wss) = assign(&centroids);
        history.push(wss);
        let stable = next == labels;
        labels = next;
        if stable {
            break;
        }
    }

    let means: Vec<f64> = centroids.iter().map(|c| c.iter().sum::<f64>() / width.max(1) as f64).collect();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| means[a].total_cmp(&means[b]).then(a.cmp(&b)));
    let mut level_order = vec![0; k];
    for (rank, &c) in order.iter().enumerate() {
        level_order[c] = rank;
    }
    Ok(ClusterAssignment { labels, level_order, centroids, objective_history: history })
}
