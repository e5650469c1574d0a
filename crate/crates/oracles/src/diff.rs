//! Central finite differences.

use crate::{Matrix, OracleError};

/// `(f(θ + h e_k) - f(θ - h e_k)) / 2h` for every coordinate k.
pub fn fd_gradient<F>(mut f: F, theta: &[f64], h: f64) -> Result<Vec<f64>, OracleError>
where
    F: FnMut(&[f64]) -> f64,
{
    if !(h > 0.0) {
        return Err(OracleError::Invalid(format!("step must be positive, got {h}")));
    }
    let mut probe = theta.to_vec();
    let mut grad = Vec::with_capacity(theta.len());
    for k in 0..theta.len() {
        probe[k] = theta[k] + h;
        let up = f(&probe);
        probe[k] = theta[k] - h;
        let down = f(&probe);
        probe[k] = theta[k];
        if !up.is_finite() || !down.is_finite() {
            return Err(OracleError::NonFinite(k));
        }
        grad.push((up - down) / (2.0 * h));
    }
    Ok(grad)
}

/// Jacobian J[i][k] = ∂f_i/∂x_k by central differences.
pub fn fd_jacobian<F>(mut f: F, x: &[f64], h: f64) -> Result<Matrix, OracleError>
where
    F: FnMut(&[f64]) -> Vec<f64>,
{
    if !(h > 0.0) {
        return Err(OracleError::Invalid(format!("step must be positive, got {h}")));
    }
    let m = f(x).len();
    let mut jac = vec![vec![0.0; x.len()]; m];
    let mut probe = x.to_vec();
    for k in 0..x.len() {
        probe[k] = x[k] + h;
        let up = f(&probe);
        probe[k] = x[k] - h;
        let down = f(&probe);
        probe[k] = x[k];
        for i in 0..m {
            if !up[i].is_finite() || !down[i].is_finite() {
                return Err(OracleError::NonFinite(k));
            }
            jac[i][k] = (up[i] - down[i]) / (2.0 * h);
        }
    }
    Ok(jac)
}

/// Elementwise relative error with a floor on the denominator.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, b)| (a - b).abs() / a.abs().max(b.abs()).max(floor))
        .fold(0.0, f64::max)
}
