//! Rectangular assignment with an unmatched-element cost.
//!
//! Solves `min Σ_matched C[i][j] + c_um · (#unmatched rows + #unmatched cols)`
//! by embedding the `n × m` matrix in an `(n + m)` square problem with one
//! dummy column per row and one dummy row per column, then running the
//! shortest-augmenting-path Hungarian method on it.

use crate::error::{domain, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// Matched `(row, col)` pairs, sorted by row.
    pub pairs: Vec<(usize, usize)>,
    pub unmatched_rows: Vec<usize>,
    pub unmatched_cols: Vec<usize>,
    /// Matched costs plus the unmatched penalties.
    pub total_cost: f64,
}

pub fn assign(costs: &[Vec<f64>], unmatched_cost: f64) -> Result<Assignment> {
    if !(unmatched_cost.is_finite() && unmatched_cost > 0.0) {
        return domain(format!("unmatched cost {unmatched_cost} must be positive"));
    }
    let n = costs.len();
    let m = costs.first().map_or(0, Vec::len);
    if costs.iter().any(|r| r.len() != m) {
        return domain("cost matrix rows have different lengths");
    }
    if costs.iter().flatten().any(|c| !(c.is_finite() && *c >= 0.0)) {
        return domain("costs must be finite and non-negative");
    }
    if n == 0 || m == 0 {
        return Ok(Assignment {
            pairs: Vec::new(),
            unmatched_rows: (0..n).collect(),
            unmatched_cols: (0..m).collect(),
            total_cost: unmatched_cost * (n + m) as f64,
        });
    }

    // Any entry above the all-unmatched total can never be optimal.
    let forbidden = 1.0 + 2.0 * unmatched_cost * (n + m) as f64 + costs.iter().flatten().sum::<f64>();
    let size = n + m;
    let mut square = vec![0.0; size * size];
    for i in 0..size {
        for j in 0..size {
            square[i * size + j] = match (i < n, j < m) {
                (true, true) => costs[i][j],
                (true, false) => {
                    if j - m == i {
                        unmatched_cost
                    } else {
                        forbidden
                    }
                }
                (false, true) => {
                    if i - n == j {
                        unmatched_cost
                    } else {
                        forbidden
                    }
                }
                (false, false) => 0.0,
            };
        }
    }
    let row_to_col = hungarian(&square, size);

    let mut pairs = Vec::new();
    let mut unmatched_rows = Vec::new();
    let mut col_used = vec![false; m];
    for (i, &j) in row_to_col.iter().enumerate().take(n) {
        if j < m {
            pairs.push((i, j));
            col_used[j] = true;
        } else {
            unmatched_rows.push(i);
        }
    }
    let unmatched_cols: Vec<usize> = (0..m).filter(|&j| !col_used[j]).collect();
    let total_cost = pairs.iter().map(|&(i, j)| costs[i][j]).sum::<f64>()
        + unmatched_cost * (unmatched_rows.len() + unmatched_cols.len()) as f64;
    Ok(Assignment { pairs, unmatched_rows, unmatched_cols, total_cost })
}

/// Minimum-cost perfect matching on a dense `size × size` matrix.
/// Returns the column assigned to each row.
fn hungarian(cost: &[f64], size: usize) -> Vec<usize> {
    let at = |i: usize, j: usize| cost[(i - 1) * size + (j - 1)];
    let mut u = vec![0.0; size + 1];
    let mut v = vec![0.0; size + 1];
    // p[j]: row matched to column j (1-based, 0 = none).
    let mut p = vec![0usize; size + 1];
    let mut way = vec![0usize; size + 1];

    for i in 1..=size {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; size + 1];
        let mut used = vec![false; size + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=size {
                if used[j] {
                    continue;
                }
                let cur = at(i0, j) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=size {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut row_to_col = vec![0; size];
    for j in 1..=size {
        if p[j] > 0 {
            row_to_col[p[j] - 1] = j - 1;
        }
    }
    row_to_col
}
