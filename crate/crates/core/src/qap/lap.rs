//! Dense linear assignment (shortest augmenting path Hungarian method).
//!
//! After the O(k³) solve, the dual potentials identify every optimal
//! assignment as a perfect matching on zero-reduced-cost edges; the
//! lexicographically smallest of those is extracted greedily with
//! alternating-path checks.

use ndarray::Array2;

use crate::error::{Error, Result};

/// Returns `perm` with `perm[row] = col` minimizing `Σ cost[row][perm[row]]`.
pub fn solve_lap(cost: &Array2<f64>) -> Result<Vec<usize>> {
    let (rows, cols) = cost.dim();
    if rows != cols {
        return Err(Error::invalid(format!(
            "assignment cost must be square, got {rows}×{cols}"
        )));
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(Error::invalid("assignment cost has non-finite entries"));
    }
    let k = rows;
    if k == 0 {
        return Ok(Vec::new());
    }
    let (assignment, u, v) = hungarian(cost);
    let scale = cost.iter().fold(1.0f64, |m, c| m.max(c.abs()));
    let tol = 1e-9 * scale;
    let tight = |i: usize, j: usize| cost[[i, j]] - u[i + 1] - v[j + 1] <= tol;
    Ok(lexicographic_min(k, assignment, tight))
}

/// Returns (row → col, row potentials, col potentials), 1-indexed potentials.
fn hungarian(cost: &Array2<f64>) -> (Vec<usize>, Vec<f64>, Vec<f64>) {
    let n = cost.nrows();
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[[i0 - 1, j - 1]] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
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

    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    (assignment, u, v)
}

/// Lexicographically smallest perfect matching using only `tight` edges,
/// starting from the perfect matching `col_of`.
fn lexicographic_min(k: usize, mut col_of: Vec<usize>, tight: impl Fn(usize, usize) -> bool) -> Vec<usize> {
    let mut row_of = vec![0usize; k];
    for (r, &c) in col_of.iter().enumerate() {
        row_of[c] = r;
    }
    let adj: Vec<Vec<usize>> = (0..k).map(|i| (0..k).filter(|&j| tight(i, j)).collect()).collect();
    let mut fixed_col = vec![false; k];

    for i in 0..k {
        for &j in &adj[i] {
            if fixed_col[j] {
                continue;
            }
            if col_of[i] == j {
                break;
            }
            // row r gives up column j; some alternating path must end at i's old column
            let r = row_of[j];
            let target = col_of[i];
            let mut visited = vec![false; k];
            visited[j] = true;
            let mut path = Vec::new();
            if augment(r, target, &adj, &fixed_col, &row_of, &mut visited, &mut path) {
                for &(row, col) in &path {
                    col_of[row] = col;
                    row_of[col] = row;
                }
                col_of[i] = j;
                row_of[j] = i;
                break;
            }
        }
        debug_assert!(tight(i, col_of[i]));
        fixed_col[col_of[i]] = true;
    }
    col_of
}

fn augment(
    row: usize,
    target: usize,
    adj: &[Vec<usize>],
    fixed_col: &[bool],
    row_of: &[usize],
    visited: &mut [bool],
    path: &mut Vec<(usize, usize)>,
) -> bool {
    for &c in &adj[row] {
        if fixed_col[c] || visited[c] {
            continue;
        }
        visited[c] = true;
        if c == target || augment(row_of[c], target, adj, fixed_col, row_of, visited, path) {
            path.push((row, c));
            return true;
        }
    }
    false
}
