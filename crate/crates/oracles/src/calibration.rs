//! Monte Carlo calibration of the independence thresholds used in tests.

use serde::{Deserialize, Serialize};

use crate::assignment::brute_max_mean_abs;
use crate::sampler::OracleRng;
use crate::stats::{counting_spearman, direct_wii_at_point, loop_normalize};
use crate::Matrix;

/// A measured null statistic together with the threshold it supports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRecord {
    pub name: String,
    pub seed: u64,
    pub sample_size: usize,
    pub distribution: String,
    pub trials: usize,
    pub mean: f64,
    pub max: f64,
    pub threshold: f64,
}

impl CalibrationRecord {
    pub fn supports_threshold(&self) -> bool {
        self.max < self.threshold
    }
}

fn draw(rng: &mut OracleRng, distribution: &str, n: usize, d: usize) -> Matrix {
    match distribution {
        "normal" => rng.normal_rows(n, d),
        "uniform" => rng.uniform_rows(n, d, -1.0, 1.0),
        other => panic!("unknown calibration distribution {other}"),
    }
}

/// wii of independent 2-D data at `points` weighting points, each the mean
/// of two distinct random rows of the normalized sample.
pub fn calibrate_wii(distribution: &str, n: usize, points: usize, seed: u64, threshold: f64) -> CalibrationRecord {
    let mut rng = OracleRng::new(seed);
    let y = loop_normalize(&draw(&mut rng, distribution, n, 2));
    let mut values = Vec::with_capacity(points);
    for _ in 0..points {
        let a = (rng.next_u64() % n as u64) as usize;
        let mut b = a;
        while b == a {
            b = (rng.next_u64() % n as u64) as usize;
        }
        let p = [(y[a][0] + y[b][0]) / 2.0, (y[a][1] + y[b][1]) / 2.0];
        values.push(direct_wii_at_point(&y, &p));
    }
    CalibrationRecord {
        name: format!("wii_independent_{distribution}"),
        seed,
        sample_size: n,
        distribution: distribution.into(),
        trials: points,
        mean: values.iter().sum::<f64>() / points as f64,
        max: values.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        threshold,
    }
}

/// OTS between independent random n×d pairs (1 − optimal mean Spearman
/// distance), computed from counting ranks and exhaustive assignment.
pub fn calibrate_ots_null(n: usize, d: usize, trials: usize, seed: u64, threshold: f64) -> CalibrationRecord {
    let mut rng = OracleRng::new(seed);
    let mut values = Vec::with_capacity(trials);
    for _ in 0..trials {
        let z = draw(&mut rng, "uniform", n, d);
        let s = draw(&mut rng, "uniform", n, d);
        let col = |m: &Matrix, k: usize| m.iter().map(|r| r[k]).collect::<Vec<f64>>();
        let corr: Matrix = (0..d)
            .map(|j| (0..d).map(|k| counting_spearman(&col(&z, j), &col(&s, k))).collect())
            .collect();
        values.push(brute_max_mean_abs(&corr).unwrap());
    }
    CalibrationRecord {
        name: "ots_independent_null".into(),
        seed,
        sample_size: n,
        distribution: "uniform".into(),
        trials,
        mean: values.iter().sum::<f64>() / trials as f64,
        max: values.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        threshold,
    }
}
