//! Weighted moments and correlation coefficients.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::dataset::Dataset;
use crate::error::{Result, WicaError};

/// Columns whose standard deviation falls below this are divided by
/// `std + NORMALIZE_EPS` instead of `std`.
pub const NORMALIZE_EPS: f64 = 1e-8;

/// Divisor used for a column with (population) standard deviation `std`.
#[inline]
pub fn normalization_scale(std: f64) -> f64 {
    if std < NORMALIZE_EPS {
        std + NORMALIZE_EPS
    } else {
        std
    }
}

/// Per-column mean and population standard deviation.
pub fn column_moments(x: ArrayView2<'_, f64>) -> (Array1<f64>, Array1<f64>) {
    let n = x.nrows() as f64;
    let mean = x.sum_axis(Axis(0)) / n;
    let mut var = Array1::<f64>::zeros(x.ncols());
    for row in x.rows() {
        for (k, v) in row.iter().enumerate() {
            let c = v - mean[k];
            var[k] += c * c;
        }
    }
    let std = var.mapv(|v| (v / n).sqrt());
    (mean, std)
}

/// Standardize every column to mean 0 and standard deviation 1.
pub fn normalize_componentwise(x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    if x.nrows() < 2 {
        return Err(WicaError::InsufficientData(format!(
            "componentwise normalization needs at least 2 rows, got {}",
            x.nrows()
        )));
    }
    let (mean, std) = column_moments(x);
    let scale = std.mapv(normalization_scale);
    let mut out = x.to_owned();
    for mut row in out.rows_mut() {
        for (k, v) in row.iter_mut().enumerate() {
            *v = (*v - mean[k]) / scale[k];
        }
    }
    Ok(out)
}

/// A sample paired with one nonnegative weight per row.
#[derive(Debug, Clone, Copy)]
pub struct WeightedSample<'a> {
    data: ArrayView2<'a, f64>,
    weights: ArrayView1<'a, f64>,
}

impl<'a> WeightedSample<'a> {
    pub fn new(data: ArrayView2<'a, f64>, weights: ArrayView1<'a, f64>) -> Result<Self> {
        if weights.len() != data.nrows() {
            return Err(WicaError::Dimension(format!(
                "{} weights for {} rows",
                weights.len(),
                data.nrows()
            )));
        }
        if let Some((i, w)) = weights.iter().enumerate().find(|(_, w)| !(**w >= 0.0) || !w.is_finite()) {
            return Err(WicaError::InvalidParameter(format!(
                "weight {i} is {w}; weights must be finite and nonnegative"
            )));
        }
        Ok(Self { data, weights })
    }

    pub fn data(&self) -> ArrayView2<'a, f64> {
        self.data
    }

    pub fn weights(&self) -> ArrayView1<'a, f64> {
        self.weights
    }

    pub fn total(&self) -> Result<f64> {
        let total = self.weights.sum();
        if total > 0.0 {
            Ok(total)
        } else {
            Err(WicaError::DegenerateWeights { total })
        }
    }
}

/// `Σ w_i x_i / Σ w_i`.
pub fn weighted_mean(ws: &WeightedSample<'_>) -> Result<Array1<f64>> {
    let total = ws.total()?;
    let mut acc = Array1::<f64>::zeros(ws.data.ncols());
    for (row, &w) in ws.data.rows().into_iter().zip(ws.weights.iter()) {
        acc.scaled_add(w, &row);
    }
    Ok(acc / total)
}

/// `Σ w_i (x_i − m)(x_i − m)ᵀ / Σ w_i`, no Bessel correction.
///
/// The upper triangle is computed and mirrored, so the result is exactly
/// symmetric.
pub fn weighted_cov(ws: &WeightedSample<'_>) -> Result<Array2<f64>> {
    let total = ws.total()?;
    let mean = weighted_mean(ws)?;
    let centered = &ws.data - &mean.view().insert_axis(Axis(0));
    let scaled = &centered * &ws.weights.view().insert_axis(Axis(1));
    let mut cov = scaled.t().dot(&centered) / total;
    let d = cov.nrows();
    for a in 0..d {
        for b in (a + 1)..d {
            cov[(b, a)] = cov[(a, b)];
        }
    }
    Ok(cov)
}

/// Biased (divide-by-N) covariance: `weighted_cov` with unit weights.
pub fn biased_cov(x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let ones = Array1::<f64>::ones(x.nrows());
    weighted_cov(&WeightedSample::new(x, ones.view())?)
}

/// Centered columns and their sums of squares.
fn centered_columns(x: ArrayView2<'_, f64>, input: &'static str) -> Result<(Array2<f64>, Array1<f64>)> {
    let n = x.nrows() as f64;
    let mean = x.sum_axis(Axis(0)) / n;
    let c = &x - &mean.view().insert_axis(Axis(0));
    let ss = Array1::from_iter(c.columns().into_iter().map(|col| col.dot(&col)));
    if let Some(k) = ss.iter().position(|v| !(*v > 0.0)) {
        return Err(WicaError::DegenerateColumn { input, column: k });
    }
    Ok((c, ss))
}

// r = <a, b> / sqrt(<a, a><b, b>), which is exactly 1 for a = b.
fn correlation_of_centered(a: &Array2<f64>, sa: &Array1<f64>, b: &Array2<f64>, sb: &Array1<f64>) -> Array2<f64> {
    // Column dots use the same summation as the sums of squares.
    Array2::from_shape_fn((a.ncols(), b.ncols()), |(j, k)| {
        (a.column(j).dot(&b.column(k)) / (sa[j] * sb[k]).sqrt()).clamp(-1.0, 1.0)
    })
}

/// Entry (j, k) is the Pearson correlation of `z` column j with `s` column k.
pub fn pearson_corr_matrix(z: &Dataset, s: &Dataset) -> Result<Array2<f64>> {
    pearson_corr_views(z.view(), s.view())
}

pub(crate) fn pearson_corr_views(z: ArrayView2<'_, f64>, s: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    if z.nrows() != s.nrows() {
        return Err(WicaError::Dimension(format!(
            "row counts differ: {} vs {}",
            z.nrows(),
            s.nrows()
        )));
    }
    let (zc, zs) = centered_columns(z, "z")?;
    let (sc, ss) = centered_columns(s, "s")?;
    Ok(correlation_of_centered(&zc, &zs, &sc, &ss))
}

/// Ranks starting at 1; tied values share the mean of their rank range.
pub fn average_ranks(a: ArrayView1<'_, f64>) -> Array1<f64> {
    let n = a.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i].total_cmp(&a[j]));
    let mut ranks = Array1::<f64>::zeros(n);
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && a[order[end]] == a[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1 ..= end
        let r = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = r;
        }
        start = end;
    }
    ranks
}

/// Spearman's rank correlation with average-rank tie handling.
pub fn spearman_corr(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> Result<f64> {
    if a.len() != b.len() {
        return Err(WicaError::Dimension(format!("lengths differ: {} vs {}", a.len(), b.len())));
    }
    if a.len() < 2 {
        return Err(WicaError::InsufficientData("spearman needs at least 2 samples".into()));
    }
    let ra = average_ranks(a).insert_axis(Axis(1));
    let rb = average_ranks(b).insert_axis(Axis(1));
    let (ra, sa) = centered_columns(ra.view(), "a")?;
    let (rb, sb) = centered_columns(rb.view(), "b")?;
    Ok(correlation_of_centered(&ra, &sa, &rb, &sb)[(0, 0)])
}

/// Spearman correlations of every column pair, ranking each column once.
pub(crate) fn spearman_corr_views(z: ArrayView2<'_, f64>, s: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let rank_cols = |x: ArrayView2<'_, f64>| {
        let mut r = Array2::<f64>::zeros(x.dim());
        for (k, col) in x.columns().into_iter().enumerate() {
            r.column_mut(k).assign(&average_ranks(col));
        }
        r
    };
    pearson_corr_views(rank_cols(z).view(), rank_cols(s).view())
}
