//! Synthetic source signals.
//!
//! Every generator is deterministic in its [`SourceSpec`] and returns
//! componentwise-normalized data.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Result, WicaError};
use crate::rng::RngStream;

/// Largest lattice (total rows) that `generate` will build.
pub const LATTICE_MAX_ROWS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    /// Regular grid with `n` points per axis (`n^d` rows).
    Lattice,
    /// i.i.d. U(−1, 1) columns.
    Uniform,
    /// i.i.d. Laplace(0, 1) columns.
    Laplace,
    /// Column k is `sin(ω_k t + φ_k)` on a uniform time grid.
    SineMixture,
    /// Uncorrelated but dependent 2-D sample on two mirrored arcs.
    Fig1Dependent,
}

impl SourceKind {
    fn allowed_params(self) -> &'static [&'static str] {
        match self {
            SourceKind::Lattice | SourceKind::Uniform | SourceKind::Laplace => &[],
            SourceKind::SineMixture => &["t_max", "omega_min", "omega_max", "min_gap"],
            SourceKind::Fig1Dependent => &["half_angle", "radial_noise"],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    pub kind: SourceKind,
    pub d: usize,
    pub n: usize,
    pub seed: u64,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

impl SourceSpec {
    pub fn new(kind: SourceKind, d: usize, n: usize, seed: u64) -> Self {
        Self {
            kind,
            d,
            n,
            seed,
            params: BTreeMap::new(),
        }
    }

    pub fn with_param(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }

    fn param(&self, key: &str, default: f64) -> f64 {
        self.params.get(key).copied().unwrap_or(default)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(WicaError::InvalidParameter(format!("n must be >= 2, got {}", self.n)));
        }
        if self.d < 2 {
            return Err(WicaError::InvalidParameter(format!("d must be >= 2, got {}", self.d)));
        }
        if self.kind == SourceKind::Fig1Dependent && self.d != 2 {
            return Err(WicaError::InvalidParameter(format!("fig1_dependent is 2-D, got d = {}", self.d)));
        }
        let allowed = self.kind.allowed_params();
        for (k, v) in &self.params {
            if !allowed.contains(&k.as_str()) {
                return Err(WicaError::InvalidParameter(format!(
                    "unknown parameter '{k}' for {:?} (allowed: {allowed:?})",
                    self.kind
                )));
            }
            if !v.is_finite() {
                return Err(WicaError::InvalidParameter(format!("parameter '{k}' is not finite")));
            }
        }
        Ok(())
    }

    /// Number of rows `generate` will produce.
    pub fn rows(&self) -> Result<usize> {
        match self.kind {
            SourceKind::Lattice => match u32::try_from(self.d).ok().and_then(|d| self.n.checked_pow(d)) {
                Some(r) if r <= LATTICE_MAX_ROWS => Ok(r),
                _ => Err(WicaError::InvalidParameter(format!(
                    "lattice {}^{} exceeds {LATTICE_MAX_ROWS} rows",
                    self.n, self.d
                ))),
            },
            _ => Ok(self.n),
        }
    }
}

pub fn generate(spec: &SourceSpec) -> Result<Dataset> {
    spec.validate()?;
    let rows = spec.rows()?;
    let mut rng = RngStream::new(spec.seed);
    let raw = match spec.kind {
        SourceKind::Lattice => lattice(spec.n, spec.d),
        SourceKind::Uniform => Array2::from_shape_fn((rows, spec.d), |_| 2.0 * rng.uniform() - 1.0),
        SourceKind::Laplace => Array2::from_shape_fn((rows, spec.d), |_| laplace(&mut rng)),
        SourceKind::SineMixture => sine_mixture(spec, &mut rng)?,
        SourceKind::Fig1Dependent => two_arcs(spec, &mut rng)?,
    };
    Dataset::new(raw)?.normalized()
}

fn lattice(n: usize, d: usize) -> Array2<f64> {
    let rows = n.pow(d as u32);
    let step = 2.0 / (n - 1) as f64;
    Array2::from_shape_fn((rows, d), |(i, k)| {
        // column 0 varies slowest
        let idx = (i / n.pow((d - 1 - k) as u32)) % n;
        -1.0 + step * idx as f64
    })
}

fn laplace(rng: &mut RngStream) -> f64 {
    // inverse CDF on u in (−1/2, 1/2)
    let u = rng.uniform() - 0.5;
    let a = (1.0 - 2.0 * u.abs()).max(f64::MIN_POSITIVE);
    -u.signum() * a.ln()
}

fn sine_mixture(spec: &SourceSpec, rng: &mut RngStream) -> Result<Array2<f64>> {
    let t_max = spec.param("t_max", 2000.0);
    let lo = spec.param("omega_min", 0.5);
    let hi = spec.param("omega_max", 3.0);
    let gap = spec.param("min_gap", 0.1);
    if !(t_max > 0.0 && lo > 0.0 && hi > lo && gap >= 0.0) {
        return Err(WicaError::InvalidParameter(
            "sine_mixture needs t_max > 0, 0 < omega_min < omega_max, min_gap >= 0".into(),
        ));
    }
    if gap * (spec.d as f64 - 1.0) >= hi - lo {
        return Err(WicaError::InvalidParameter(format!(
            "cannot place {} frequencies {gap} apart in [{lo}, {hi}]",
            spec.d
        )));
    }
    let mut omegas: Vec<f64> = Vec::with_capacity(spec.d);
    let mut attempts = 0;
    while omegas.len() < spec.d {
        attempts += 1;
        if attempts > 10_000 {
            return Err(WicaError::Numerical("could not draw well-separated frequencies".into()));
        }
        let w = lo + (hi - lo) * rng.uniform();
        if omegas.iter().all(|o| (o - w).abs() >= gap) {
            omegas.push(w);
        }
    }
    let phases: Vec<f64> = (0..spec.d).map(|_| 2.0 * PI * rng.uniform()).collect();
    let dt = t_max / spec.n as f64;
    Ok(Array2::from_shape_fn((spec.n, spec.d), |(i, k)| (omegas[k] * i as f64 * dt + phases[k]).sin()))
}

fn two_arcs(spec: &SourceSpec, rng: &mut RngStream) -> Result<Array2<f64>> {
    // angle θ ∈ [−α, α] on the right arc, mirrored to the left arc with
    // probability 1/2; symmetric in x ↦ −x and y ↦ −y, so Pearson is zero,
    // while x² + y² ≈ 1 ties the components together.
    let alpha = spec.param("half_angle", PI / 3.0);
    let noise = spec.param("radial_noise", 0.05);
    if !(alpha > 0.0 && alpha < PI / 2.0 && (0.0..1.0).contains(&noise)) {
        return Err(WicaError::InvalidParameter(
            "fig1_dependent needs 0 < half_angle < π/2 and 0 <= radial_noise < 1".into(),
        ));
    }
    let mut out = Array2::zeros((spec.n, 2));
    for mut row in out.rows_mut() {
        let theta = alpha * (2.0 * rng.uniform() - 1.0);
        let r = 1.0 + noise * (2.0 * rng.uniform() - 1.0);
        let side = if rng.uniform() < 0.5 { -1.0 } else { 1.0 };
        row[0] = side * r * theta.cos();
        row[1] = r * theta.sin();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{column_moments, pearson_corr_matrix};
    use crate::wii::{wii_index, WiiConfig};

    fn max_offdiag_abs_corr(x: &Dataset) -> f64 {
        let r = pearson_corr_matrix(x, x).unwrap();
        let d = r.nrows();
        (0..d)
            .flat_map(|i| (0..d).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| r[(i, j)].abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn lattice_three_by_three() {
        let x = generate(&SourceSpec::new(SourceKind::Lattice, 2, 3, 0)).unwrap();
        assert_eq!(x.nrows(), 9);
        // raw grid {−1,0,1} has population std sqrt(2/3)
        let s = 1.0 / (2.0f64 / 3.0).sqrt();
        let v = [-s, 0.0, s];
        for i in 0..9 {
            assert!((x.values()[(i, 0)] - v[i / 3]).abs() < 1e-12);
            assert!((x.values()[(i, 1)] - v[i % 3]).abs() < 1e-12);
        }
        assert!(x.values()[(0, 0)] < 0.0 && x.values()[(2, 1)] > 0.0);
    }

    #[test]
    fn lattice_cap_and_validation() {
        assert!(generate(&SourceSpec::new(SourceKind::Lattice, 3, 101, 0)).is_err());
        assert!(SourceSpec::new(SourceKind::Lattice, 2, 1000, 0).rows().is_ok());
        assert!(SourceSpec::new(SourceKind::Lattice, 64, 1000, 0).rows().is_err());
        assert!(generate(&SourceSpec::new(SourceKind::Uniform, 1, 10, 0)).is_err());
        assert!(generate(&SourceSpec::new(SourceKind::Uniform, 2, 1, 0)).is_err());
        assert!(generate(&SourceSpec::new(SourceKind::Fig1Dependent, 3, 100, 0)).is_err());
        let bad = SourceSpec::new(SourceKind::Uniform, 2, 10, 0).with_param("t_max", 1.0);
        assert!(matches!(generate(&bad), Err(WicaError::InvalidParameter(_))));
    }

    #[test]
    fn outputs_are_normalized_and_deterministic() {
        for kind in [
            SourceKind::Lattice,
            SourceKind::Uniform,
            SourceKind::Laplace,
            SourceKind::SineMixture,
            SourceKind::Fig1Dependent,
        ] {
            let n = if kind == SourceKind::Lattice { 20 } else { 500 };
            let spec = SourceSpec::new(kind, 2, n, 17);
            let x = generate(&spec).unwrap();
            let (mean, std) = column_moments(x.view());
            assert!(mean.iter().all(|m| m.abs() < 1e-12), "{kind:?}");
            assert!(std.iter().all(|s| (s - 1.0).abs() < 1e-6), "{kind:?}");
            assert_eq!(generate(&spec).unwrap(), x);
        }
        let a = generate(&SourceSpec::new(SourceKind::Laplace, 3, 100, 1)).unwrap();
        let b = generate(&SourceSpec::new(SourceKind::Laplace, 3, 100, 2)).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn uniform_columns_are_uncorrelated() {
        let x = generate(&SourceSpec::new(SourceKind::Uniform, 3, 100_000, 41)).unwrap();
        assert!(max_offdiag_abs_corr(&x) < 0.01);
    }

    #[test]
    fn sine_frequencies_are_distinct() {
        let x = generate(&SourceSpec::new(SourceKind::SineMixture, 4, 20_000, 3)).unwrap();
        assert!(max_offdiag_abs_corr(&x) < 0.05);
        let tight = SourceSpec::new(SourceKind::SineMixture, 4, 100, 3).with_param("min_gap", 1.0);
        assert!(generate(&tight).is_err());
    }

    #[test]
    fn fig1_is_uncorrelated_but_dependent() {
        let cfg = WiiConfig::new(100).unwrap();
        let x = generate(&SourceSpec::new(SourceKind::Fig1Dependent, 2, 10_000, 9)).unwrap();
        assert!(max_offdiag_abs_corr(&x) < 0.02);
        let u = generate(&SourceSpec::new(SourceKind::Uniform, 2, 10_000, 9)).unwrap();
        let wu = wii_index(&u, &cfg, &mut RngStream::new(1)).unwrap();
        let wf = wii_index(&x, &cfg, &mut RngStream::new(1)).unwrap();
        assert!(wf >= 10.0 * wu, "fig1 {wf} vs uniform {wu}");
        let r2 = x.view().rows().into_iter().map(|r| r[0] * r[0]).collect::<Vec<_>>();
        assert!(r2.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn spec_json_round_trip() {
        let spec = SourceSpec::new(SourceKind::SineMixture, 3, 64, 5).with_param("t_max", 100.0);
        let text = serde_json::to_string(&spec).unwrap();
        assert!(text.contains("\"sine_mixture\""));
        assert_eq!(serde_json::from_str::<SourceSpec>(&text).unwrap(), spec);
        let minimal: SourceSpec = serde_json::from_str(r#"{"kind":"lattice","d":2,"n":4,"seed":0}"#).unwrap();
        assert!(minimal.params.is_empty());
    }
}
