//! Exhaustive assignment search.

use crate::{Matrix, OracleError};

/// Global optimum over all permutations, visiting them in lexicographic
/// order and replacing the incumbent only on strict improvement, so the
/// lexicographically smallest optimal permutation wins.
///
/// `tol` decides ties: a candidate must beat the incumbent by more than
/// `tol` to replace it.
pub fn brute_assignment_tol(cost: &Matrix, tol: f64) -> Result<(Vec<usize>, f64), OracleError> {
    let n = cost.len();
    if n > 8 {
        return Err(OracleError::TooLarge(format!("{n}x{n} has {n}! permutations")));
    }
    if cost.iter().any(|r| r.len() != n) {
        return Err(OracleError::Invalid("cost matrix is not square".into()));
    }
    if n == 0 {
        return Ok((Vec::new(), 0.0));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best_perm = perm.clone();
    let mut best = f64::INFINITY;
    loop {
        let mut total = 0.0;
        for (j, &k) in perm.iter().enumerate() {
            total += cost[j][k];
        }
        if total < best - tol {
            best = total;
            best_perm = perm.clone();
        }
        if !next_permutation(&mut perm) {
            break;
        }
    }
    Ok((best_perm, best))
}

pub fn brute_assignment(cost: &Matrix) -> Result<(Vec<usize>, f64), OracleError> {
    brute_assignment_tol(cost, 0.0)
}

fn next_permutation(p: &mut [usize]) -> bool {
    let n = p.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// Largest mean |entry| over permutations, by exhaustion. Used for max_corr.
pub fn brute_max_mean_abs(corr: &Matrix) -> Result<f64, OracleError> {
    let n = corr.len();
    if n > 8 {
        return Err(OracleError::TooLarge(format!("{n}x{n}")));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = f64::NEG_INFINITY;
    loop {
        let mut s = 0.0;
        for (j, &k) in perm.iter().enumerate() {
            s += corr[k][j].abs();
        }
        best = best.max(s / n as f64);
        if !next_permutation(&mut perm) {
            break;
        }
    }
    Ok(best)
}
