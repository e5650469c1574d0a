//! Small dense kernels: one-sided Jacobi SVD, symmetric eigenvalues and
//! Haar-distributed orthogonal matrices.

use ndarray::{Array1, Array2};

use crate::error::{Result, WicaError};
use crate::rng::RngStream;

const MAX_SWEEPS: usize = 80;

/// Thin SVD `a = u · diag(s) · vᵀ` of a square matrix.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: Array2<f64>,
    pub s: Array1<f64>,
    pub v: Array2<f64>,
}

/// One-sided (Hestenes) Jacobi SVD. Singular values are returned in the
/// order the columns converge to, not sorted.
pub fn jacobi_svd(a: &Array2<f64>) -> Result<Svd> {
    let (m, n) = a.dim();
    if m != n {
        return Err(WicaError::Dimension(format!("jacobi_svd expects a square matrix, got {m}x{n}")));
    }
    let mut u = a.clone();
    let mut v = Array2::<f64>::eye(n);
    let tol = 4.0 * n as f64 * f64::EPSILON;
    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for i in 0..m {
                    alpha += u[(i, p)] * u[(i, p)];
                    beta += u[(i, q)] * u[(i, q)];
                    gamma += u[(i, p)] * u[(i, q)];
                }
                if gamma == 0.0 || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let (up, uq) = (u[(i, p)], u[(i, q)]);
                    u[(i, p)] = c * up - s * uq;
                    u[(i, q)] = s * up + c * uq;
                }
                for i in 0..n {
                    let (vp, vq) = (v[(i, p)], v[(i, q)]);
                    v[(i, p)] = c * vp - s * vq;
                    v[(i, q)] = s * vp + c * vq;
                }
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(WicaError::Numerical(format!(
            "Jacobi SVD did not converge in {MAX_SWEEPS} sweeps"
        )));
    }
    let mut s = Array1::<f64>::zeros(n);
    for k in 0..n {
        let norm = u.column(k).dot(&u.column(k)).sqrt();
        s[k] = norm;
        if norm > 0.0 {
            u.column_mut(k).mapv_inplace(|x| x / norm);
        }
    }
    Ok(Svd { u, s, v })
}

/// `U Vᵀ` from the SVD of a d×d standard-normal matrix.
pub fn sample_haar_orthogonal(d: usize, rng: &mut RngStream) -> Result<Array2<f64>> {
    if d < 2 {
        return Err(WicaError::InvalidParameter(format!("orthogonal sampling needs d >= 2, got {d}")));
    }
    let a = Array2::from_shape_fn((d, d), |_| rng.normal());
    let svd = jacobi_svd(&a)?;
    let smax = svd.s.iter().cloned().fold(0.0, f64::max);
    if svd.s.iter().any(|&x| !(x > smax * 1e-14)) {
        return Err(WicaError::Numerical("sampled Gaussian matrix is numerically singular".into()));
    }
    Ok(svd.u.dot(&svd.v.t()))
}

/// `max |QᵀQ − I|`.
pub fn orthogonality_error(q: &Array2<f64>) -> f64 {
    let g = q.t().dot(q);
    let n = g.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - target).abs());
        }
    }
    worst
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn symmetric_eigenvalues(a: &Array2<f64>) -> Result<Array1<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(WicaError::Dimension("symmetric_eigenvalues expects a square matrix".into()));
    }
    let mut m = a.clone();
    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)] * m[(i, j)])
            .sum();
        let scale: f64 = m.iter().map(|x| x * x).sum::<f64>().max(f64::MIN_POSITIVE);
        if off <= 1e-30 * scale {
            let mut ev: Vec<f64> = (0..n).map(|i| m[(i, i)]).collect();
            ev.sort_by(f64::total_cmp);
            return Ok(Array1::from(ev));
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if m[(p, q)] == 0.0 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * m[(p, q)]);
                let t = theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[(k, p)], m[(k, q)]);
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[(p, k)], m[(q, k)]);
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
            }
        }
    }
    Err(WicaError::Numerical("symmetric eigenvalue iteration did not converge".into()))
}
