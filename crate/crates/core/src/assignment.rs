//! Exact linear assignment (Hungarian method with row potentials).

use serde::{Deserialize, Serialize};

use crate::error::{arg_err, QapError, Result};
use crate::matrix::Matrix;
use crate::qap::Permutation;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssignmentResult {
    pub sigma: Permutation,
    /// `Σ_i K[i, σ(i)]`, recomputed from the input.
    pub cost: f64,
}

/// Minimizes `Σ_i K[i, σ(i)]` over permutations in O(n^3).
///
/// Rows are inserted in order and ties resolve to the lowest column index, so
/// the result is deterministic.
pub fn solve_lap(k: &Matrix) -> Result<AssignmentResult> {
    if !k.is_square() {
        return arg_err("assignment cost matrix must be square");
    }
    if !k.is_finite() {
        return Err(QapError::NonFinite);
    }
    let n = k.rows();
    if n == 0 {
        return Ok(AssignmentResult {
            sigma: Permutation::identity(0),
            cost: 0.0,
        });
    }
    // 1-based potentials; column 0 is a sentinel
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut col_owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        col_owner[0] = row;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = col_owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = k[(i0 - 1, j - 1)] - u[i0] - v[j];
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
                    u[col_owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if col_owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            col_owner[j0] = col_owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut map = vec![0usize; n];
    for j in 1..=n {
        map[col_owner[j] - 1] = j - 1;
    }
    let sigma = Permutation::new(map)?;
    let cost = (0..n).map(|i| k[(i, sigma.apply(i))]).sum();
    Ok(AssignmentResult { sigma, cost })
}

/// Nearest permutation to `X` in the sense of maximizing `Σ_i X[i, σ(i)]`.
pub fn round_to_permutation(x: &Matrix) -> Result<Permutation> {
    let cost = x.map(|v| 1.0 - v);
    Ok(solve_lap(&cost)?.sigma)
}

/// `max_ij |X_ij - P_ij|` for the permutation matrix `P` of `sigma`.
pub fn permutation_deviation(x: &Matrix, sigma: &Permutation) -> f64 {
    let p = sigma.to_matrix();
    (x - &p).max_abs()
}
