//! Invertible nonlinear mixing for benchmarks.
//!
//! Each stage rotates the sample by a Haar-random orthogonal matrix and then
//! applies an additive coupling: the coordinates are split into a first half
//! of ⌈d/2⌉ and a second half of ⌊d/2⌋, and one half is shifted by a frozen
//! random tanh network of the other,
//!
//! ```text
//! odd stage:  (a, b) -> (a, b + φ(a))
//! even stage: (a, b) -> (a + φ(b), b)
//! ```
//!
//! Every stage has unit Jacobian determinant and an exact inverse.

use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Result, WicaError};
use crate::linalg::{orthogonality_error, sample_haar_orthogonal};
use crate::rng::RngStream;

pub const DEFAULT_HIDDEN: usize = 16;

/// Which half a stage shifts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    /// Second half shifted by φ(first half).
    Odd,
    /// First half shifted by φ(second half).
    Even,
}

impl Parity {
    /// Parity of the 1-indexed stage `t`.
    pub fn of_stage(t: usize) -> Parity {
        if t % 2 == 1 {
            Parity::Odd
        } else {
            Parity::Even
        }
    }
}

/// Frozen two-hidden-layer tanh network with a linear output.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingNet {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
    pub w3: Array2<f64>,
    pub b3: Array1<f64>,
}

impl CouplingNet {
    /// Weights drawn N(0, 1/fan_in), biases zero.
    pub fn random(input: usize, hidden: usize, output: usize, rng: &mut RngStream) -> Self {
        let mut layer = |fan_in: usize, fan_out: usize| {
            let sd = (1.0 / fan_in as f64).sqrt();
            Array2::from_shape_fn((fan_in, fan_out), |_| sd * rng.normal())
        };
        let w1 = layer(input, hidden);
        let w2 = layer(hidden, hidden);
        let w3 = layer(hidden, output);
        Self {
            w1,
            b1: Array1::zeros(hidden),
            w2,
            b2: Array1::zeros(hidden),
            w3,
            b3: Array1::zeros(output),
        }
    }

    /// Net that outputs `value` everywhere (all weights zero).
    pub fn constant(input: usize, hidden: usize, value: Array1<f64>) -> Self {
        let output = value.len();
        Self {
            w1: Array2::zeros((input, hidden)),
            b1: Array1::zeros(hidden),
            w2: Array2::zeros((hidden, hidden)),
            b2: Array1::zeros(hidden),
            w3: Array2::zeros((hidden, output)),
            b3: value,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w1.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.w3.ncols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w1.ncols()
    }

    pub fn forward(&self, u: ArrayView2<'_, f64>) -> Array2<f64> {
        let h1 = (u.dot(&self.w1) + &self.b1).mapv_into(f64::tanh);
        let h2 = (h1.dot(&self.w2) + &self.b2).mapv_into(f64::tanh);
        h2.dot(&self.w3) + &self.b3
    }

    fn validate(&self, input: usize, output: usize, ctx: &str) -> Result<()> {
        let h = self.w1.ncols();
        let checks = [
            ("w1", self.w1.dim(), (input, h)),
            ("w2", self.w2.dim(), (h, h)),
            ("w3", self.w3.dim(), (h, output)),
            ("b1", (self.b1.len(), 1), (h, 1)),
            ("b2", (self.b2.len(), 1), (h, 1)),
            ("b3", (self.b3.len(), 1), (output, 1)),
        ];
        for (name, got, want) in checks {
            if got != want {
                return Err(WicaError::Dimension(format!(
                    "{ctx}.phi.{name}: shape {got:?}, expected {want:?}"
                )));
            }
        }
        let finite = [&self.w1, &self.w2, &self.w3].iter().all(|m| m.iter().all(|v| v.is_finite()))
            && [&self.b1, &self.b2, &self.b3].iter().all(|b| b.iter().all(|v| v.is_finite()));
        if !finite {
            return Err(WicaError::InvalidParameter(format!("{ctx}.phi has non-finite parameters")));
        }
        Ok(())
    }
}

/// One isometry followed by one additive coupling.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingStage {
    q: Array2<f64>,
    phi: CouplingNet,
    parity: Parity,
}

fn split_point(d: usize) -> usize {
    d.div_ceil(2)
}

impl MixingStage {
    pub fn new(q: Array2<f64>, phi: CouplingNet, parity: Parity) -> Result<Self> {
        Self::checked(q, phi, parity, "stage")
    }

    fn checked(q: Array2<f64>, phi: CouplingNet, parity: Parity, ctx: &str) -> Result<Self> {
        let d = q.nrows();
        if q.ncols() != d || d < 2 {
            return Err(WicaError::Dimension(format!("{ctx}.q: shape {:?} is not d x d, d >= 2", q.dim())));
        }
        let err = orthogonality_error(&q);
        if !(err <= 1e-10) {
            return Err(WicaError::InvalidParameter(format!("{ctx}.q is not orthogonal (error {err:e})")));
        }
        let (first, second) = (split_point(d), d - split_point(d));
        let (input, output) = match parity {
            Parity::Odd => (first, second),
            Parity::Even => (second, first),
        };
        phi.validate(input, output, ctx)?;
        Ok(Self { q, phi, parity })
    }

    pub fn dim(&self) -> usize {
        self.q.nrows()
    }

    pub fn q(&self) -> &Array2<f64> {
        &self.q
    }

    pub fn phi(&self) -> &CouplingNet {
        &self.phi
    }

    pub fn parity(&self) -> Parity {
        self.parity
    }

    fn check(&self, x: &Dataset) -> Result<()> {
        if x.ncols() != self.dim() {
            return Err(WicaError::Dimension(format!(
                "stage expects {} columns, got {}",
                self.dim(),
                x.ncols()
            )));
        }
        Ok(())
    }

    fn couple(&self, y: &mut Array2<f64>, sign: f64) {
        let h = split_point(self.dim());
        let (mut first, mut second) = y.view_mut().split_at(Axis(1), h);
        match self.parity {
            Parity::Odd => second.scaled_add(sign, &self.phi.forward(first.view())),
            Parity::Even => first.scaled_add(sign, &self.phi.forward(second.view())),
        }
    }

    pub fn forward(&self, x: &Dataset) -> Result<Dataset> {
        self.check(x)?;
        let mut y = x.view().dot(&self.q.t());
        self.couple(&mut y, 1.0);
        Dataset::new(y)
    }

    pub fn inverse(&self, y: &Dataset) -> Result<Dataset> {
        self.check(y)?;
        let mut x = y.values().clone();
        self.couple(&mut x, -1.0);
        Dataset::new(x.dot(&self.q))
    }
}

pub fn stage_forward(stage: &MixingStage, x: &Dataset) -> Result<Dataset> {
    stage.forward(x)
}

pub fn stage_inverse(stage: &MixingStage, y: &Dataset) -> Result<Dataset> {
    stage.inverse(y)
}

/// An ordered, immutable stack of mixing stages.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingPipeline {
    d: usize,
    seed: u64,
    hidden: usize,
    stages: Vec<MixingStage>,
}

/// Build `iterations` stages with alternating parity (stage 1 odd).
pub fn build_pipeline(d: usize, iterations: usize, hidden: usize, rng: &mut RngStream) -> Result<MixingPipeline> {
    if d < 2 {
        return Err(WicaError::InvalidParameter(format!("mixing needs d >= 2, got {d}")));
    }
    if iterations < 1 {
        return Err(WicaError::InvalidParameter("mixing needs at least 1 iteration".into()));
    }
    if hidden < 1 {
        return Err(WicaError::InvalidParameter("coupling nets need at least 1 hidden unit".into()));
    }
    let (first, second) = (split_point(d), d - split_point(d));
    let mut stages = Vec::with_capacity(iterations);
    for t in 1..=iterations {
        let q = sample_haar_orthogonal(d, rng)?;
        let parity = Parity::of_stage(t);
        let phi = match parity {
            Parity::Odd => CouplingNet::random(first, hidden, second, rng),
            Parity::Even => CouplingNet::random(second, hidden, first, rng),
        };
        stages.push(MixingStage { q, phi, parity });
    }
    Ok(MixingPipeline {
        d,
        seed: rng.seed(),
        hidden,
        stages,
    })
}

impl MixingPipeline {
    /// The pipeline determined by `(d, iterations, hidden, seed)`.
    pub fn from_seed(d: usize, iterations: usize, hidden: usize, seed: u64) -> Result<Self> {
        build_pipeline(d, iterations, hidden, &mut RngStream::new(seed))
    }

    pub fn from_stages(seed: u64, stages: Vec<MixingStage>) -> Result<Self> {
        let first = stages
            .first()
            .ok_or_else(|| WicaError::InvalidParameter("pipeline needs at least one stage".into()))?;
        let (d, hidden) = (first.dim(), first.phi.hidden_dim());
        for (i, st) in stages.iter().enumerate() {
            if st.dim() != d {
                return Err(WicaError::Dimension(format!("stages[{i}] has dimension {}, expected {d}", st.dim())));
            }
            if st.parity != Parity::of_stage(i + 1) {
                return Err(WicaError::InvalidParameter(format!(
                    "stages[{i}] has parity {:?}; parities must alternate starting with odd",
                    st.parity
                )));
            }
        }
        Ok(Self { d, seed, hidden, stages })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn stages(&self) -> &[MixingStage] {
        &self.stages
    }

    pub fn mix(&self, s: &Dataset) -> Result<Dataset> {
        let mut x = s.clone();
        for st in &self.stages {
            x = st.forward(&x)?;
        }
        Ok(x)
    }

    pub fn unmix_exact(&self, x: &Dataset) -> Result<Dataset> {
        let mut s = x.clone();
        for st in self.stages.iter().rev() {
            s = st.inverse(&s)?;
        }
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&PipelineFile::from(self)).expect("pipeline serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: PipelineFile =
            serde_json::from_str(text).map_err(|e| WicaError::Parse(format!("pipeline JSON: {e}")))?;
        file.into_pipeline()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| WicaError::Io(format!("{}: {e}", path.display())))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| WicaError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            WicaError::Parse(m) => WicaError::Parse(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}

pub fn mix(p: &MixingPipeline, s: &Dataset) -> Result<Dataset> {
    p.mix(s)
}

pub fn unmix_exact(p: &MixingPipeline, x: &Dataset) -> Result<Dataset> {
    p.unmix_exact(x)
}

pub fn save_pipeline(p: &MixingPipeline, path: impl AsRef<Path>) -> Result<()> {
    p.save(path)
}

pub fn load_pipeline(path: impl AsRef<Path>) -> Result<MixingPipeline> {
    MixingPipeline::load(path)
}

// On-disk layout: matrices as row lists, weights stored input-major
// (w[i][j] connects input i to unit j).

pub(crate) fn to_rows(m: &Array2<f64>) -> Vec<Vec<f64>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

pub(crate) fn from_rows(rows: Vec<Vec<f64>>, cols_if_empty: usize, ctx: &str) -> Result<Array2<f64>> {
    let n = rows.len();
    let c = rows.first().map_or(cols_if_empty, Vec::len);
    if rows.iter().any(|r| r.len() != c) {
        return Err(WicaError::Parse(format!("{ctx}: ragged matrix rows")));
    }
    Array2::from_shape_vec((n, c), rows.into_iter().flatten().collect())
        .map_err(|e| WicaError::Parse(format!("{ctx}: {e}")))
}

#[derive(Serialize, Deserialize)]
struct NetFile {
    w1: Vec<Vec<f64>>,
    b1: Vec<f64>,
    w2: Vec<Vec<f64>>,
    b2: Vec<f64>,
    w3: Vec<Vec<f64>>,
    b3: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct StageFile {
    q: Vec<Vec<f64>>,
    phi: NetFile,
    parity: Parity,
}

#[derive(Serialize, Deserialize)]
struct PipelineFile {
    d: usize,
    seed: u64,
    #[serde(default)]
    hidden: Option<usize>,
    stages: Vec<StageFile>,
}

impl From<&MixingPipeline> for PipelineFile {
    fn from(p: &MixingPipeline) -> Self {
        PipelineFile {
            d: p.d,
            seed: p.seed,
            hidden: Some(p.hidden),
            stages: p
                .stages
                .iter()
                .map(|st| StageFile {
                    q: to_rows(&st.q),
                    phi: NetFile {
                        w1: to_rows(&st.phi.w1),
                        b1: st.phi.b1.to_vec(),
                        w2: to_rows(&st.phi.w2),
                        b2: st.phi.b2.to_vec(),
                        w3: to_rows(&st.phi.w3),
                        b3: st.phi.b3.to_vec(),
                    },
                    parity: st.parity,
                })
                .collect(),
        }
    }
}

impl PipelineFile {
    fn into_pipeline(self) -> Result<MixingPipeline> {
        let d = self.d;
        let mut stages = Vec::with_capacity(self.stages.len());
        for (i, st) in self.stages.into_iter().enumerate() {
            let ctx = format!("stages[{i}]");
            let hidden = st.phi.b1.len();
            let phi = CouplingNet {
                w1: from_rows(st.phi.w1, hidden, &format!("{ctx}.phi.w1"))?,
                b1: Array1::from(st.phi.b1),
                w2: from_rows(st.phi.w2, hidden, &format!("{ctx}.phi.w2"))?,
                b2: Array1::from(st.phi.b2),
                w3: from_rows(st.phi.w3, st.phi.b3.len(), &format!("{ctx}.phi.w3"))?,
                b3: Array1::from(st.phi.b3),
            };
            let q = from_rows(st.q, d, &format!("{ctx}.q"))?;
            if q.nrows() != d {
                return Err(WicaError::Parse(format!("{ctx}.q: expected {d} rows, found {}", q.nrows())));
            }
            let stage = MixingStage::checked(q, phi, st.parity, &ctx).map_err(|e| WicaError::Parse(e.to_string()))?;
            stages.push(stage);
        }
        let pipeline = MixingPipeline::from_stages(self.seed, stages).map_err(|e| WicaError::Parse(e.to_string()))?;
        if let Some(h) = self.hidden {
            if h != pipeline.hidden {
                return Err(WicaError::Parse(format!("hidden: declared {h}, stages use {}", pipeline.hidden)));
            }
        }
        Ok(pipeline)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use wica_oracles::diff::fd_jacobian;
    use wica_oracles::linalg::{affine_fit_relative_residual, det};

    fn normal_data(rng: &mut RngStream, n: usize, d: usize) -> Dataset {
        Dataset::new(Array2::from_shape_fn((n, d), |_| rng.normal())).unwrap()
    }

    fn max_abs_diff(a: &Dataset, b: &Dataset) -> f64 {
        (a.values() - b.values()).iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    #[test]
    fn zero_net_identity_is_identity() {
        let phi = CouplingNet::constant(1, 4, array![0.0]);
        let st = MixingStage::new(Array2::eye(2), phi, Parity::Odd).unwrap();
        let x = Dataset::new(array![[1.0, 2.0], [-3.0, 0.5]]).unwrap();
        assert_eq!(st.forward(&x).unwrap(), x);
        assert_eq!(st.inverse(&x).unwrap(), x);
    }

    #[test]
    fn constant_net_shifts_active_half() {
        let phi = CouplingNet::constant(1, 3, array![0.75]);
        let st = MixingStage::new(Array2::eye(2), phi.clone(), Parity::Odd).unwrap();
        let x = Dataset::new(array![[1.0, 2.0], [-3.0, 0.5]]).unwrap();
        assert_eq!(st.forward(&x).unwrap().values(), &array![[1.0, 2.75], [-3.0, 1.25]]);
        let st = MixingStage::new(Array2::eye(2), phi, Parity::Even).unwrap();
        assert_eq!(st.forward(&x).unwrap().values(), &array![[1.75, 2.0], [-2.25, 0.5]]);
    }

    #[test]
    fn stage_rejects_bad_shapes() {
        let phi = CouplingNet::constant(2, 3, array![0.0]);
        assert!(MixingStage::new(Array2::eye(3), phi.clone(), Parity::Even).is_err());
        assert!(MixingStage::new(Array2::eye(3), phi.clone(), Parity::Odd).is_ok());
        assert!(MixingStage::new(array![[1.0, 1.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]], phi, Parity::Odd).is_err());
        let st = MixingStage::new(Array2::eye(2), CouplingNet::constant(1, 2, array![0.0]), Parity::Odd).unwrap();
        let x = Dataset::new(Array2::zeros((2, 3))).unwrap();
        assert!(st.forward(&x).is_err());
        assert!(st.inverse(&x).is_err());
    }

    #[test]
    fn construction_contract() {
        let mut rng = RngStream::new(1);
        let p = build_pipeline(3, 1, 8, &mut rng).unwrap();
        assert_eq!(p.stages().len(), 1);
        assert_eq!(p.stages()[0].parity(), Parity::Odd);
        let p = build_pipeline(5, 6, 8, &mut rng).unwrap();
        for (i, st) in p.stages().iter().enumerate() {
            assert_eq!(st.parity(), Parity::of_stage(i + 1));
            assert!(orthogonality_error(st.q()) <= 1e-10);
        }
        // odd d: stage 1 maps 3 -> 2, stage 2 maps 2 -> 3
        assert_eq!((p.stages()[0].phi().input_dim(), p.stages()[0].phi().output_dim()), (3, 2));
        assert_eq!((p.stages()[1].phi().input_dim(), p.stages()[1].phi().output_dim()), (2, 3));
        assert!(build_pipeline(1, 3, 8, &mut rng).is_err());
        assert!(build_pipeline(2, 0, 8, &mut rng).is_err());
        assert!(build_pipeline(2, 3, 0, &mut rng).is_err());
    }

    #[test]
    fn same_seed_same_pipeline() {
        let a = MixingPipeline::from_seed(4, 7, 16, 99).unwrap();
        let b = MixingPipeline::from_seed(4, 7, 16, 99).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, MixingPipeline::from_seed(4, 7, 16, 100).unwrap());
    }

    #[test]
    fn stage_round_trips() {
        let mut rng = RngStream::new(2);
        let p = build_pipeline(6, 2, 16, &mut rng).unwrap();
        let x = normal_data(&mut rng, 100, 6);
        for st in p.stages() {
            let y = st.forward(&x).unwrap();
            assert!(max_abs_diff(&st.inverse(&y).unwrap(), &x) < 1e-9);
            let z = st.inverse(&x).unwrap();
            assert!(max_abs_diff(&st.forward(&z).unwrap(), &x) < 1e-9);
        }
    }

    #[test]
    fn stage_jacobian_has_unit_determinant() {
        let mut rng = RngStream::new(3);
        let p = build_pipeline(4, 4, 16, &mut rng).unwrap();
        for st in p.stages() {
            for _ in 0..5 {
                let x0: Vec<f64> = (0..4).map(|_| rng.normal()).collect();
                let f = |x: &[f64]| {
                    let ds = Dataset::new(Array2::from_shape_vec((1, 4), x.to_vec()).unwrap()).unwrap();
                    st.forward(&ds).unwrap().values().row(0).to_vec()
                };
                let j = fd_jacobian(f, &x0, 1e-5).unwrap();
                assert!((det(&j).abs() - 1.0).abs() < 1e-4, "det {}", det(&j));
            }
        }
    }

    #[test]
    fn pipeline_round_trip_deep() {
        let mut rng = RngStream::new(4);
        let p = build_pipeline(10, 50, DEFAULT_HIDDEN, &mut rng).unwrap();
        let s = normal_data(&mut rng, 1000, 10);
        let x = p.mix(&s).unwrap();
        assert!(max_abs_diff(&p.unmix_exact(&x).unwrap(), &s) < 1e-6);
        assert_eq!(p.mix(&s).unwrap(), x);
    }

    #[test]
    fn single_stage_pipeline_equals_stage_forward() {
        let p = MixingPipeline::from_seed(3, 1, 8, 5).unwrap();
        let s = normal_data(&mut RngStream::new(6), 20, 3);
        assert_eq!(p.mix(&s).unwrap(), stage_forward(&p.stages()[0], &s).unwrap());
    }

    #[test]
    fn mixing_is_nonlinear() {
        let mut rng = RngStream::new(8);
        let p = build_pipeline(2, 10, DEFAULT_HIDDEN, &mut rng).unwrap();
        let s = normal_data(&mut rng, 2000, 2);
        let x = p.mix(&s).unwrap();
        let rows = |d: &Dataset| d.view().rows().into_iter().map(|r| r.to_vec()).collect::<Vec<_>>();
        let resid = affine_fit_relative_residual(&rows(&s), &rows(&x)).unwrap();
        assert!(resid > 0.05, "relative residual {resid}");
    }

    #[test]
    fn lattice_stays_non_degenerate() {
        // Lower band from the non-degeneracy requirement; the upper envelope
        // is the recorded maximum over 40 seeds at this depth and width.
        let n = 30;
        let grid: Vec<Vec<f64>> = (0..n * n)
            .map(|i| vec![-1.0 + 2.0 * (i / n) as f64 / (n - 1) as f64, -1.0 + 2.0 * (i % n) as f64 / (n - 1) as f64])
            .collect();
        let s = Dataset::from_rows(&grid).unwrap().normalized().unwrap();
        for seed in 0..20 {
            let p = MixingPipeline::from_seed(2, 70, DEFAULT_HIDDEN, seed).unwrap();
            let x = p.mix(&s).unwrap();
            let (_, std) = crate::stats::column_moments(x.view());
            for v in std.mapv(|s| s * s) {
                assert!((0.1..=100.0).contains(&v), "seed {seed}: variance {v}");
            }
        }
    }

    #[test]
    fn json_round_trip_is_lossless() {
        let p = MixingPipeline::from_seed(5, 4, 6, 77).unwrap();
        let back = MixingPipeline::from_json(&p.to_json()).unwrap();
        assert_eq!(back, p);
        let s = normal_data(&mut RngStream::new(1), 50, 5);
        assert_eq!(back.mix(&s).unwrap(), p.mix(&s).unwrap());
        assert_eq!(back, MixingPipeline::from_seed(5, 4, 6, back.seed()).unwrap());
    }

    #[test]
    fn save_load_and_malformed_files() {
        let dir = std::env::temp_dir().join(format!("wica-mixer-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("pipe.json");
        let p = MixingPipeline::from_seed(4, 3, 8, 12).unwrap();
        save_pipeline(&p, &path).unwrap();
        assert_eq!(load_pipeline(&path).unwrap(), p);

        let text = p.to_json();
        std::fs::write(&path, &text[..text.len() / 2]).unwrap();
        let err = load_pipeline(&path).unwrap_err();
        assert!(matches!(err, WicaError::Parse(ref m) if m.contains("line")), "{err}");

        let bad = text.replacen("\"odd\"", "\"even\"", 1);
        assert!(matches!(MixingPipeline::from_json(&bad), Err(WicaError::Parse(_))));
        let bad = text.replacen("\"w1\":[[", "\"w1\":[[1.0,", 1);
        let err = MixingPipeline::from_json(&bad).unwrap_err();
        assert!(err.to_string().contains("stages[0].phi.w1"), "{err}");
        std::fs::remove_dir_all(&dir).ok();
    }
}
