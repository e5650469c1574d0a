//! Loop-based statistics.

use crate::Matrix;

pub fn loop_weighted_mean(x: &Matrix, w: &[f64]) -> Vec<f64> {
    let d = x[0].len();
    let mut total = 0.0;
    for wi in w {
        total += wi;
    }
    let mut m = vec![0.0; d];
    for k in 0..d {
        let mut acc = 0.0;
        for i in 0..x.len() {
            acc += w[i] * x[i][k];
        }
        m[k] = acc / total;
    }
    m
}

pub fn loop_weighted_cov(x: &Matrix, w: &[f64]) -> Matrix {
    let d = x[0].len();
    let m = loop_weighted_mean(x, w);
    let mut total = 0.0;
    for wi in w {
        total += wi;
    }
    let mut c = vec![vec![0.0; d]; d];
    for a in 0..d {
        for b in 0..d {
            let mut acc = 0.0;
            for i in 0..x.len() {
                acc += w[i] * (x[i][a] - m[a]) * (x[i][b] - m[b]);
            }
            c[a][b] = acc / total;
        }
    }
    c
}

/// Textbook two-pass Pearson correlation.
pub fn two_pass_pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for i in 0..a.len() {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    sab / (saa * sbb).sqrt()
}

/// Average ranks by counting: rank = 1 + #smaller + (#equal - 1)/2. O(n²).
pub fn counting_ranks(a: &[f64]) -> Vec<f64> {
    a.iter()
        .map(|&v| {
            let less = a.iter().filter(|&&u| u < v).count() as f64;
            let equal = a.iter().filter(|&&u| u == v).count() as f64;
            1.0 + less + (equal - 1.0) / 2.0
        })
        .collect()
}

pub fn counting_spearman(a: &[f64], b: &[f64]) -> f64 {
    two_pass_pearson(&counting_ranks(a), &counting_ranks(b))
}

/// Full multivariate N(p, I) density.
pub fn gaussian_density(x: &[f64], p: &[f64]) -> f64 {
    let d = x.len() as f64;
    let mut sq = 0.0;
    for k in 0..x.len() {
        sq += (x[k] - p[k]) * (x[k] - p[k]);
    }
    (2.0 * std::f64::consts::PI).powf(-d / 2.0) * (-0.5 * sq).exp()
}

/// wii at one point, straight from the definition with un-shifted
/// normalized-density weights. Only usable where weights do not underflow.
pub fn direct_wii_at_point(y: &Matrix, p: &[f64]) -> f64 {
    let w: Vec<f64> = y.iter().map(|r| gaussian_density(r, p)).collect();
    let z = loop_weighted_cov(y, &w);
    let d = z.len();
    let mut acc = 0.0;
    for i in 0..d {
        for j in (i + 1)..d {
            acc += 2.0 * z[i][j] * z[i][j] / (z[i][i] * z[i][i] + z[j][j] * z[j][j]);
        }
    }
    acc * 2.0 / (d * (d - 1)) as f64
}

/// Population-std normalization, column by column.
pub fn loop_normalize(x: &Matrix) -> Matrix {
    let n = x.len();
    let d = x[0].len();
    let mut out = x.clone();
    for k in 0..d {
        let mut m = 0.0;
        for r in x {
            m += r[k];
        }
        m /= n as f64;
        let mut v = 0.0;
        for r in x {
            v += (r[k] - m) * (r[k] - m);
        }
        let s = (v / n as f64).sqrt();
        for i in 0..n {
            out[i][k] = (x[i][k] - m) / s;
        }
    }
    out
}

/// Kolmogorov-Smirnov statistic of samples against Uniform[0, 1).
pub fn ks_uniform(samples: &[f64]) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = s.len() as f64;
    let mut dmax: f64 = 0.0;
    for (i, &v) in s.iter().enumerate() {
        let lo = i as f64 / n;
        let hi = (i + 1) as f64 / n;
        dmax = dmax.max((v - lo).abs()).max((hi - v).abs());
    }
    dmax
}

/// Asymptotic 1% critical value of the one-sample KS statistic.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.6276 / (n as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counting_ranks_average_ties() {
        assert_eq!(counting_ranks(&[1.0, 2.0, 2.0, 4.0]), vec![1.0, 2.5, 2.5, 4.0]);
    }

    #[test]
    fn weighted_mean_hand_values() {
        let x = vec![vec![0.0], vec![2.0]];
        assert_eq!(loop_weighted_mean(&x, &[3.0, 1.0]), vec![0.5]);
    }

    #[test]
    fn ks_of_regular_grid_is_small() {
        let s: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        assert!(ks_uniform(&s) <= 0.0005 + 1e-12);
    }
}
