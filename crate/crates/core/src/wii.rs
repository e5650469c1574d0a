//! Weighted independence index.
//!
//! A sample is reweighted by an unnormalized unit-covariance Gaussian centred
//! at a weighting point p. For independent components every such reweighting
//! keeps the components independent, so the weighted covariance Z stays
//! diagonal. The index at p averages, over component pairs,
//!
//! ```text
//! c_ij = 2 z_ij² / (z_ii² + z_jj²)
//! ```
//!
//! which lies in [0, 1] and never exceeds the squared weighted correlation.
//! The multi-point index is the mean over several points, each drawn as the
//! mean of d random rows of the componentwise-normalized sample.

use ndarray::{Array1, Array2, ArrayView1};

use crate::dataset::Dataset;
use crate::error::{Result, WicaError};
use crate::rng::RngStream;
use crate::stats::{weighted_cov, WeightedSample};

/// Centre of a Gaussian reweighting.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightingPoint(Array1<f64>);

impl WeightingPoint {
    pub fn new(p: Array1<f64>) -> Result<Self> {
        if p.iter().any(|v| !v.is_finite()) {
            return Err(WicaError::InvalidParameter(format!("weighting point {p} is not finite")));
        }
        Ok(Self(p))
    }

    pub fn origin(d: usize) -> Self {
        Self(Array1::zeros(d))
    }

    pub fn view(&self) -> ArrayView1<'_, f64> {
        self.0.view()
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.dot(&self.0)
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.0.to_vec()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WiiConfig {
    /// Weighting points per evaluation.
    pub num_points: usize,
    /// A point is collapsed when the weight mass outside its heaviest sample
    /// (after rescaling that sample's weight to 1) drops below this.
    pub min_effective_weight: f64,
}

impl WiiConfig {
    pub const DEFAULT_MIN_EFFECTIVE_WEIGHT: f64 = 1e-12;

    pub fn new(num_points: usize) -> Result<Self> {
        if num_points < 1 {
            return Err(WicaError::InvalidParameter("num_points must be at least 1".into()));
        }
        Ok(Self {
            num_points,
            min_effective_weight: Self::DEFAULT_MIN_EFFECTIVE_WEIGHT,
        })
    }

    /// `num_points = d`, as in one training step.
    pub fn for_dim(d: usize) -> Self {
        Self {
            num_points: d.max(1),
            min_effective_weight: Self::DEFAULT_MIN_EFFECTIVE_WEIGHT,
        }
    }
}

/// `log w_i = −‖y_i − p‖² / 2` (unnormalized unit Gaussian).
pub fn gaussian_log_weights(y: &Dataset, p: &WeightingPoint) -> Result<Array1<f64>> {
    if y.ncols() != p.dim() {
        return Err(WicaError::Dimension(format!(
            "weighting point has {} coordinates, data has {} columns",
            p.dim(),
            y.ncols()
        )));
    }
    let pv = p.view();
    Ok(y.view()
        .rows()
        .into_iter()
        .map(|row| {
            let sq: f64 = row.iter().zip(pv.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
            -0.5 * sq
        })
        .collect())
}

/// Weights from log-weights, shifted so the largest weight is exactly 1.
/// Also returns the mass carried by all samples except the heaviest one.
pub fn shifted_weights(log_w: &Array1<f64>) -> (Array1<f64>, f64) {
    let (arg, max) = log_w
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    let w = log_w.mapv(|v| (v - max).exp());
    let residual = w.iter().enumerate().filter(|&(i, _)| i != arg).map(|(_, v)| v).sum();
    (w, residual)
}

/// `2 z_ij² / (z_ii² + z_jj²)`; zero when both variances vanish.
pub fn pair_dependence(z: &Array2<f64>, i: usize, j: usize) -> f64 {
    let den = z[(i, i)] * z[(i, i)] + z[(j, j)] * z[(j, j)];
    if den > 0.0 {
        2.0 * z[(i, j)] * z[(i, j)] / den
    } else {
        0.0
    }
}

/// Mean of `pair_dependence` over all pairs i < j of a weighted covariance.
pub fn index_from_cov(z: &Array2<f64>) -> f64 {
    let d = z.nrows();
    let mut acc = 0.0;
    for i in 0..d {
        for j in (i + 1)..d {
            acc += pair_dependence(z, i, j);
        }
    }
    2.0 * acc / (d * (d - 1)) as f64
}

/// Weighted covariance of `y` reweighted around `p`, with the collapse guard.
pub fn weighted_cov_at_point(y: &Dataset, p: &WeightingPoint, cfg: &WiiConfig) -> Result<Array2<f64>> {
    let log_w = gaussian_log_weights(y, p)?;
    let (w, residual) = shifted_weights(&log_w);
    if !(residual >= cfg.min_effective_weight) {
        return Err(WicaError::WeightCollapse {
            point: p.to_vec(),
            residual_mass: residual,
        });
    }
    weighted_cov(&WeightedSample::new(y.view(), w.view())?)
}

/// Index of `y` weighted around a single point.
pub fn wii_at_point(y: &Dataset, p: &WeightingPoint, cfg: &WiiConfig) -> Result<f64> {
    let z = weighted_cov_at_point(y, p, cfg)?;
    Ok(index_from_cov(&z))
}

/// `count` points, each the mean of `d` distinct rows drawn uniformly.
pub fn sample_weighting_points(y: &Dataset, count: usize, rng: &mut RngStream) -> Result<Vec<WeightingPoint>> {
    let (n, d) = (y.nrows(), y.ncols());
    if n < d {
        return Err(WicaError::InsufficientData(format!(
            "need at least {d} rows to draw weighting points, got {n}"
        )));
    }
    Ok((0..count).map(|_| sample_one_point(y, rng)).collect())
}

pub(crate) fn sample_one_point(y: &Dataset, rng: &mut RngStream) -> WeightingPoint {
    let (n, d) = (y.nrows(), y.ncols());
    let rows = rng.choose_distinct(n, d);
    let mut p = Array1::<f64>::zeros(d);
    for &r in &rows {
        p += &y.row(r);
    }
    WeightingPoint(p / d as f64)
}

/// Mean of the single-point indices. Collapsed points are skipped; the call
/// fails only when every point collapses.
pub fn wii_multi(y: &Dataset, points: &[WeightingPoint], cfg: &WiiConfig) -> Result<f64> {
    if points.is_empty() {
        return Err(WicaError::InvalidParameter("no weighting points given".into()));
    }
    let mut sum = 0.0;
    let mut used = 0usize;
    let mut last_collapse = None;
    for p in points {
        match wii_at_point(y, p, cfg) {
            Ok(v) => {
                sum += v;
                used += 1;
            }
            Err(e @ WicaError::WeightCollapse { .. }) => last_collapse = Some(e),
            Err(e) => return Err(e),
        }
    }
    match (used, last_collapse) {
        (0, Some(e)) => Err(e),
        _ => Ok(sum / used as f64),
    }
}

/// Normalize `x` componentwise, draw `cfg.num_points` weighting points from
/// the normalized sample and return the multi-point index.
pub fn wii_index(x: &Dataset, cfg: &WiiConfig, rng: &mut RngStream) -> Result<f64> {
    let need = x.ncols().max(2);
    if x.nrows() < need {
        return Err(WicaError::InsufficientData(format!(
            "wii_index needs at least {need} rows, got {}",
            x.nrows()
        )));
    }
    let y = x.normalized()?;
    let points = sample_weighting_points(&y, cfg.num_points, rng)?;
    wii_multi(&y, &points, cfg)
}

/// `exp(−‖p‖² / 6)`: the fraction of a standard-normal population that keeps
/// nontrivial weight under N(p, I), normalized to 1 at p = 0.
pub fn concentration_p(p: &WeightingPoint) -> f64 {
    (-p.norm_sq() / 6.0).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;
    use wica_oracles::stats as oracle;

    fn normal_data(seed: u64, n: usize, d: usize) -> Dataset {
        let mut rng = RngStream::new(seed);
        Dataset::new(Array2::from_shape_fn((n, d), |_| rng.normal())).unwrap()
    }

    fn rows(y: &Dataset) -> Vec<Vec<f64>> {
        y.view().rows().into_iter().map(|r| r.to_vec()).collect()
    }

    #[test]
    fn log_weights_examples() {
        let y = Dataset::new(array![[1.0, 2.0], [2.0, 3.0], [1.0, 2.0 + 2f64.sqrt()]]).unwrap();
        let p = WeightingPoint::new(array![1.0, 2.0]).unwrap();
        let lw = gaussian_log_weights(&y, &p).unwrap();
        assert_eq!(lw[0], 0.0);
        assert!((lw[1] + 1.0).abs() < 1e-15);
        assert!((lw[2] + 1.0).abs() < 1e-15);
        assert!(gaussian_log_weights(&y, &WeightingPoint::origin(3)).is_err());
    }

    #[test]
    fn log_weights_proportional_to_density() {
        let y = normal_data(3, 20, 3);
        let p = WeightingPoint::new(array![0.3, -0.2, 0.5]).unwrap();
        let lw = gaussian_log_weights(&y, &p).unwrap();
        let dens: Vec<f64> = rows(&y).iter().map(|r| oracle::gaussian_density(r, &p.to_vec())).collect();
        let ratio0 = lw[0].exp() / dens[0];
        for i in 0..20 {
            let r = lw[i].exp() / dens[i];
            assert!((r / ratio0 - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn identical_columns_give_one() {
        let mut rng = RngStream::new(1);
        let v: Vec<f64> = (0..200).map(|_| rng.normal()).collect();
        let y = Dataset::new(Array2::from_shape_fn((200, 2), |(i, _)| v[i])).unwrap();
        let w = wii_at_point(&y, &WeightingPoint::new(array![0.2, 0.1]).unwrap(), &WiiConfig::for_dim(2)).unwrap();
        assert!((w - 1.0).abs() < 1e-12);
    }

    #[test]
    fn independent_normal_is_small() {
        let y = normal_data(10, 10_000, 2);
        let w = wii_at_point(&y, &WeightingPoint::origin(2), &WiiConfig::for_dim(2)).unwrap();
        assert!(w < 0.02, "{w}");
    }

    #[test]
    fn six_points_hand_unrolled() {
        let pts = [[0.5, 1.0], [-1.0, 0.2], [0.3, -0.7], [1.5, 0.4], [-0.2, -1.1], [0.0, 0.6]];
        let y = Dataset::from_rows(&pts.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap();
        // weights
        let w: Vec<f64> = pts.iter().map(|r| (-(r[0] * r[0] + r[1] * r[1]) / 2.0).exp()).collect();
        let sw = w[0] + w[1] + w[2] + w[3] + w[4] + w[5];
        let mx = (w[0] * pts[0][0] + w[1] * pts[1][0] + w[2] * pts[2][0] + w[3] * pts[3][0] + w[4] * pts[4][0] + w[5] * pts[5][0]) / sw;
        let my = (w[0] * pts[0][1] + w[1] * pts[1][1] + w[2] * pts[2][1] + w[3] * pts[3][1] + w[4] * pts[4][1] + w[5] * pts[5][1]) / sw;
        let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
        for i in 0..6 {
            let (a, b) = (pts[i][0] - mx, pts[i][1] - my);
            sxx += w[i] * a * a;
            syy += w[i] * b * b;
            sxy += w[i] * a * b;
        }
        let (zxx, zyy, zxy) = (sxx / sw, syy / sw, sxy / sw);
        let expected = 2.0 * zxy * zxy / (zxx * zxx + zyy * zyy);
        let got = wii_at_point(&y, &WeightingPoint::origin(2), &WiiConfig::for_dim(2)).unwrap();
        assert!((got - expected).abs() < 1e-14, "{got} vs {expected}");
    }

    #[test]
    fn collapse_is_detected() {
        let y = Dataset::new(array![[0.0, 0.0], [100.0, 0.0], [0.0, 100.0]]).unwrap();
        let cfg = WiiConfig::for_dim(2);
        let err = wii_at_point(&y, &WeightingPoint::origin(2), &cfg).unwrap_err();
        assert!(matches!(err, WicaError::WeightCollapse { ref point, .. } if point == &vec![0.0, 0.0]));
        assert!(wii_multi(&y, &[WeightingPoint::origin(2)], &cfg).is_err());
    }

    #[test]
    fn high_dimension_does_not_underflow() {
        // ‖y_i − p‖² ≈ 1600, far below exp's range without the shift
        let y = normal_data(4, 2000, 1600);
        let p = sample_weighting_points(&y, 1, &mut RngStream::new(1)).unwrap();
        assert!((-0.5 * 1600.0f64).exp() == 0.0);
        let v = wii_at_point(&y, &p[0], &WiiConfig::for_dim(1600)).unwrap();
        assert!(v.is_finite() && (0.0..=1.0).contains(&v));
    }

    #[test]
    fn multi_point_means() {
        let y = normal_data(6, 300, 3);
        let cfg = WiiConfig::for_dim(3);
        let a = WeightingPoint::new(array![0.1, 0.2, -0.3]).unwrap();
        let b = WeightingPoint::new(array![-0.5, 0.0, 0.4]).unwrap();
        let va = wii_at_point(&y, &a, &cfg).unwrap();
        let vb = wii_at_point(&y, &b, &cfg).unwrap();
        assert_eq!(wii_multi(&y, std::slice::from_ref(&a), &cfg).unwrap(), va);
        assert!((wii_multi(&y, &[a.clone(), b.clone()], &cfg).unwrap() - (va + vb) / 2.0).abs() < 1e-15);
        // a collapsed point is skipped
        let far = WeightingPoint::new(array![80.0, 80.0, 80.0]).unwrap();
        assert_eq!(wii_multi(&y, &[a, far], &cfg).unwrap(), va);
        assert!(wii_multi(&y, &[], &cfg).is_err());
    }

    #[test]
    fn independent_multi_point_is_small() {
        let y = normal_data(12, 10_000, 2).normalized().unwrap();
        let pts = sample_weighting_points(&y, 20, &mut RngStream::new(3)).unwrap();
        assert!(wii_multi(&y, &pts, &WiiConfig::for_dim(2)).unwrap() < 0.02);
    }

    #[test]
    fn every_point_small_on_independent_data() {
        let y = normal_data(13, 10_000, 2).normalized().unwrap();
        let cfg = WiiConfig::for_dim(2);
        for p in sample_weighting_points(&y, 100, &mut RngStream::new(9)).unwrap() {
            let v = wii_at_point(&y, &p, &cfg).unwrap();
            assert!(v < 0.02, "point {:?} gave {v}", p.to_vec());
        }
    }

    #[test]
    fn constant_rows_give_constant_points() {
        let y = Dataset::new(Array2::from_shape_fn((10, 3), |(_, j)| j as f64 + 0.5)).unwrap();
        for p in sample_weighting_points(&y, 5, &mut RngStream::new(0)).unwrap() {
            assert_eq!(p.to_vec(), vec![0.5, 1.5, 2.5]);
        }
        let small = Dataset::new(Array2::zeros((2, 3))).unwrap();
        assert!(sample_weighting_points(&small, 1, &mut RngStream::new(0)).is_err());
    }

    #[test]
    fn point_distribution_matches_mean_of_d_rows() {
        let y = normal_data(21, 50_000, 4);
        let pts = sample_weighting_points(&y, 10_000, &mut RngStream::new(22)).unwrap();
        let n = pts.len() as f64;
        for k in 0..4 {
            let m = pts.iter().map(|p| p.view()[k]).sum::<f64>() / n;
            let v = pts.iter().map(|p| (p.view()[k] - m).powi(2)).sum::<f64>() / n;
            assert!((v - 0.25).abs() < 0.025, "coordinate {k} variance {v}");
        }
        let msq = pts.iter().map(WeightingPoint::norm_sq).sum::<f64>() / n;
        assert!((msq - 1.0).abs() < 0.1, "mean squared norm {msq}");
    }

    #[test]
    fn wii_index_affine_invariant_and_deterministic() {
        let mut rng = RngStream::new(30);
        let x = Dataset::new(Array2::from_shape_fn((2000, 3), |_| rng.uniform())).unwrap();
        let cfg = WiiConfig::new(10).unwrap();
        let a = wii_index(&x, &cfg, &mut RngStream::new(5)).unwrap();
        let b = wii_index(&x, &cfg, &mut RngStream::new(5)).unwrap();
        assert_eq!(a, b);
        let scaled = Dataset::new(Array2::from_shape_fn((2000, 3), |(i, j)| {
            x.values()[(i, j)] * [3.0, 0.2, 7.5][j] + [1.0, -4.0, 0.0][j]
        }))
        .unwrap();
        let c = wii_index(&scaled, &cfg, &mut RngStream::new(5)).unwrap();
        assert!((a - c).abs() < 1e-10);
    }

    #[test]
    fn concentration_examples() {
        assert_eq!(concentration_p(&WeightingPoint::origin(3)), 1.0);
        let p = WeightingPoint::new(array![2.0, 1.0, 1.0]).unwrap();
        assert!((concentration_p(&p) - 0.36787944117144233).abs() < 1e-15);
    }

    #[test]
    fn concentration_matches_quadrature() {
        let base = wica_oracles::quadrature::quadrature_p([0.0, 0.0], 8.0, 0.05).unwrap();
        assert!((base - 0.75).abs() < 1e-4);
        let mut rng = RngStream::new(77);
        for _ in 0..5 {
            let p = [rng.normal(), rng.normal()];
            let q = wica_oracles::quadrature::quadrature_p(p, 8.0, 0.05).unwrap() / 0.75;
            let c = concentration_p(&WeightingPoint::new(array![p[0], p[1]]).unwrap());
            assert!((q / c - 1.0).abs() < 1e-3, "{p:?}: {q} vs {c}");
        }
    }

    proptest! {
        #[test]
        fn index_in_unit_interval_and_below_rho_sq(seed in 0u64..5000) {
            let mut rng = RngStream::new(seed);
            let n = 40;
            let mix = rng.normal();
            let x = Array2::from_shape_fn((n, 3), |_| rng.normal());
            let mut x = x;
            for i in 0..n {
                x[(i, 1)] += mix * x[(i, 0)];
            }
            let w = Array1::from_shape_fn(n, |_| rng.uniform());
            let z = weighted_cov(&WeightedSample::new(x.view(), w.view()).unwrap()).unwrap();
            let v = index_from_cov(&z);
            prop_assert!((0.0..=1.0).contains(&v));
            for i in 0..3 {
                for j in (i + 1)..3 {
                    let rho_sq = z[(i, j)] * z[(i, j)] / (z[(i, i)] * z[(j, j)]);
                    prop_assert!(pair_dependence(&z, i, j) <= rho_sq + 1e-12);
                }
            }
        }

        #[test]
        fn weight_rescaling_leaves_index_unchanged(seed in 0u64..5000, shift in -50.0f64..50.0) {
            let y = normal_data(seed, 60, 2);
            let p = WeightingPoint::new(array![0.3, -0.1]).unwrap();
            let lw = gaussian_log_weights(&y, &p).unwrap();
            let (w1, _) = shifted_weights(&lw);
            let (w2, _) = shifted_weights(&lw.mapv(|v| v + shift));
            let z1 = weighted_cov(&WeightedSample::new(y.view(), w1.view()).unwrap()).unwrap();
            let z2 = weighted_cov(&WeightedSample::new(y.view(), (&w1 * 3.7).view()).unwrap()).unwrap();
            prop_assert!((index_from_cov(&z1) - index_from_cov(&z2)).abs() < 1e-12);
            prop_assert!((&w1 - &w2).iter().all(|e| e.abs() < 1e-12));
        }
    }
}
