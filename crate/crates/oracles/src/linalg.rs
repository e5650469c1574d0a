//! Dense helpers: determinant, linear solve, least-squares residual.

use crate::{Matrix, OracleError};

/// Determinant by Gaussian elimination with partial pivoting.
pub fn det(a: &Matrix) -> f64 {
    let n = a.len();
    let mut m = a.clone();
    let mut det = 1.0;
    for c in 0..n {
        let piv = (c..n)
            .max_by(|&i, &j| m[i][c].abs().partial_cmp(&m[j][c].abs()).unwrap())
            .unwrap();
        if m[piv][c] == 0.0 {
            return 0.0;
        }
        if piv != c {
            m.swap(piv, c);
            det = -det;
        }
        det *= m[c][c];
        for r in (c + 1)..n {
            let f = m[r][c] / m[c][c];
            for k in c..n {
                m[r][k] -= f * m[c][k];
            }
        }
    }
    det
}

/// Solve A x = b (A square, nonsingular).
pub fn solve(a: &Matrix, b: &[f64]) -> Result<Vec<f64>, OracleError> {
    let n = a.len();
    let mut m: Matrix = a
        .iter()
        .zip(b)
        .map(|(row, &bi)| {
            let mut r = row.clone();
            r.push(bi);
            r
        })
        .collect();
    for c in 0..n {
        let piv = (c..n)
            .max_by(|&i, &j| m[i][c].abs().partial_cmp(&m[j][c].abs()).unwrap())
            .unwrap();
        if m[piv][c].abs() < 1e-300 {
            return Err(OracleError::Invalid("singular system".into()));
        }
        m.swap(piv, c);
        for r in 0..n {
            if r != c {
                let f = m[r][c] / m[c][c];
                for k in c..=n {
                    m[r][k] -= f * m[c][k];
                }
            }
        }
    }
    Ok((0..n).map(|i| m[i][n] / m[i][i]).collect())
}

/// Fit `y ≈ x B + c` by least squares (normal equations) and return
/// ‖residual‖_F / ‖y − mean(y)‖_F.
pub fn affine_fit_relative_residual(x: &Matrix, y: &Matrix) -> Result<f64, OracleError> {
    let n = x.len();
    let p = x[0].len() + 1;
    let q = y[0].len();
    let design: Matrix = x
        .iter()
        .map(|r| {
            let mut v = r.clone();
            v.push(1.0);
            v
        })
        .collect();
    let mut gram = vec![vec![0.0; p]; p];
    for a in 0..p {
        for b in 0..p {
            for i in 0..n {
                gram[a][b] += design[i][a] * design[i][b];
            }
        }
    }
    let mut resid_sq = 0.0;
    let mut total_sq = 0.0;
    for col in 0..q {
        let mut rhs = vec![0.0; p];
        for a in 0..p {
            for i in 0..n {
                rhs[a] += design[i][a] * y[i][col];
            }
        }
        let beta = solve(&gram, &rhs)?;
        let mean = y.iter().map(|r| r[col]).sum::<f64>() / n as f64;
        for i in 0..n {
            let fit: f64 = (0..p).map(|a| design[i][a] * beta[a]).sum();
            resid_sq += (y[i][col] - fit).powi(2);
            total_sq += (y[i][col] - mean).powi(2);
        }
    }
    Ok((resid_sq / total_sq).sqrt())
}
