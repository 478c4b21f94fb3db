//! OSPA error and cardinality statistics.

use serde::{Deserialize, Serialize};

/// OSPA parameters: cutoff `c` in meters and order `p >= 1`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct OspaParams {
    pub cutoff: f64,
    pub order: f64,
}

impl Default for OspaParams {
    fn default() -> Self {
        OspaParams {
            cutoff: 30.0,
            order: 1.0,
        }
    }
}

/// Minimum-cost one-to-one assignment of the smaller side of a rectangular
/// non-negative cost matrix.
///
/// Returns the matched `(row, column)` pairs and the total assigned cost.
/// Shortest-augmenting-path implementation with potentials, `O(k² · max)`.
pub fn optimal_assignment(cost: &[Vec<f64>]) -> (Vec<(usize, usize)>, f64) {
    let rows = cost.len();
    let cols = if rows == 0 { 0 } else { cost[0].len() };
    if rows == 0 || cols == 0 {
        return (Vec::new(), 0.0);
    }
    if rows > cols {
        let transposed: Vec<Vec<f64>> = (0..cols)
            .map(|j| (0..rows).map(|i| cost[i][j]).collect())
            .collect();
        let (pairs, total) = optimal_assignment(&transposed);
        return (pairs.into_iter().map(|(r, c)| (c, r)).collect(), total);
    }

    let n = rows;
    let m = cols;
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; m + 1];
    let mut assigned_row = vec![0usize; m + 1]; // column -> row (1-based, 0 = free)
    let mut path = vec![0usize; m + 1];

    for i in 1..=n {
        assigned_row[0] = i;
        let mut j0 = 0usize;
        let mut min_slack = vec![f64::INFINITY; m + 1];
        let mut visited = vec![false; m + 1];
        loop {
            visited[j0] = true;
            let i0 = assigned_row[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=m {
                if visited[j] {
                    continue;
                }
                let slack = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if slack < min_slack[j] {
                    min_slack[j] = slack;
                    path[j] = j0;
                }
                if min_slack[j] < delta {
                    delta = min_slack[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if visited[j] {
                    u[assigned_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_slack[j] -= delta;
                }
            }
            j0 = j1;
            if assigned_row[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = path[j0];
            assigned_row[j0] = assigned_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut pairs = Vec::with_capacity(n);
    let mut total = 0.0;
    for j in 1..=m {
        if assigned_row[j] != 0 {
            pairs.push((assigned_row[j] - 1, j - 1));
            total += cost[assigned_row[j] - 1][j - 1];
        }
    }
    pairs.sort_unstable();
    (pairs, total)
}

/// OSPA distance between two finite sets of planar positions: cutoff-clamped
/// localization cost under the optimal assignment plus the cardinality
/// penalty, normalized by the larger cardinality.
pub fn ospa(est: &[[f64; 2]], truth: &[[f64; 2]], params: &OspaParams) -> f64 {
    let (smaller, larger) = if est.len() <= truth.len() {
        (est, truth)
    } else {
        (truth, est)
    };
    let n = larger.len();
    if n == 0 {
        return 0.0;
    }
    let c = params.cutoff;
    let p = params.order;
    if smaller.is_empty() {
        return c;
    }
    let cost: Vec<Vec<f64>> = smaller
        .iter()
        .map(|a| {
            larger
                .iter()
                .map(|b| {
                    let d = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
                    d.min(c).powf(p)
                })
                .collect()
        })
        .collect();
    let (_, assigned) = optimal_assignment(&cost);
    let total = assigned + c.powf(p) * (n - smaller.len()) as f64;
    (total / n as f64).powf(1.0 / p)
}

/// Per-step estimated and true cardinalities.
pub fn cardinality_error_series<A, B>(
    estimates: &[Vec<A>],
    truth: &[Vec<B>],
) -> Vec<(usize, usize)> {
    debug_assert_eq!(estimates.len(), truth.len());
    estimates
        .iter()
        .zip(truth.iter())
        .map(|(e, t)| (e.len(), t.len()))
        .collect()
}
