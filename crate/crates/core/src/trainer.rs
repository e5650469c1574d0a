//! Autoencoder training with a weighted-independence penalty.
//!
//! The cost of a minibatch `X` is
//!
//! ```text
//! cost = rec_error(X) + β · wii(normalize(E X))
//! ```
//!
//! where `E` is the encoder, `D` the decoder and `rec_error` is the mean (or
//! sum) over rows of `‖x − D(E x)‖²`. Gradients are computed in closed form
//! through every step, with the weighting points held fixed.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Result, WicaError};
use crate::mixer::{from_rows, to_rows};
use crate::nn::{flatten_layers, Activation, Layer, MlpParams, Optimizer, OptimizerKind};
use crate::rng::RngStream;
use crate::stats::{column_moments, normalization_scale, weighted_mean, WeightedSample};
use crate::wii::{
    gaussian_log_weights, index_from_cov, sample_one_point, shifted_weights, weighted_cov_at_point, WeightingPoint,
    WiiConfig,
};

/// How squared reconstruction errors are aggregated over a batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum RecNormalization {
    /// Divide by the batch size.
    #[default]
    Mean,
    /// Plain sum over the batch.
    Sum,
}

/// Resampling attempts for a collapsed weighting point within one step.
pub const POINT_RESAMPLES: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub beta: f64,
    pub batch_size: usize,
    pub steps: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Points per step; `None` means one per latent dimension.
    pub num_weighting_points: Option<usize>,
    pub optimizer: OptimizerKind,
    /// Trace every `log_every` steps (and the last one).
    pub log_every: usize,
    pub rec_normalization: RecNormalization,
    /// Hidden widths shared by encoder and decoder.
    pub hidden: Vec<usize>,
    pub min_effective_weight: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            beta: 1.0,
            batch_size: 256,
            steps: 5000,
            learning_rate: 1e-3,
            seed: 0,
            num_weighting_points: None,
            optimizer: OptimizerKind::Adam,
            log_every: 100,
            rec_normalization: RecNormalization::Mean,
            hidden: vec![128, 128, 128],
            min_effective_weight: WiiConfig::DEFAULT_MIN_EFFECTIVE_WEIGHT,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(WicaError::InvalidParameter(m));
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return bad(format!("beta must be finite and >= 0, got {}", self.beta));
        }
        if self.batch_size < 2 {
            return bad(format!("batch_size must be >= 2, got {}", self.batch_size));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate must be > 0, got {}", self.learning_rate));
        }
        if self.num_weighting_points == Some(0) {
            return bad("num_weighting_points must be >= 1".into());
        }
        if self.log_every == 0 {
            return bad("log_every must be >= 1".into());
        }
        if self.hidden.contains(&0) {
            return bad(format!("hidden widths must be positive, got {:?}", self.hidden));
        }
        if !(self.min_effective_weight >= 0.0) {
            return bad("min_effective_weight must be >= 0".into());
        }
        Ok(())
    }

    pub fn points_per_step(&self, d: usize) -> usize {
        self.num_weighting_points.unwrap_or(d)
    }

    fn wii_config(&self, d: usize) -> WiiConfig {
        WiiConfig {
            num_points: self.points_per_step(d),
            min_effective_weight: self.min_effective_weight,
        }
    }
}

/// Encoder `R^d → R^d` and decoder `R^d → R^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct AutoEncoderModel {
    encoder: MlpParams,
    decoder: MlpParams,
}

impl AutoEncoderModel {
    pub fn new(encoder: MlpParams, decoder: MlpParams) -> Result<Self> {
        let d = encoder.input_dim();
        if encoder.output_dim() != d || decoder.input_dim() != d || decoder.output_dim() != d {
            return Err(WicaError::Dimension(format!(
                "encoder {:?} and decoder {:?} must both map d -> d",
                encoder.sizes(),
                decoder.sizes()
            )));
        }
        Ok(Self { encoder, decoder })
    }

    /// Fresh model with the given hidden widths, weights N(0, 1/fan_in).
    pub fn random(d: usize, hidden: &[usize], rng: &mut RngStream) -> Result<Self> {
        let mut sizes = vec![d];
        sizes.extend_from_slice(hidden);
        sizes.push(d);
        let encoder = MlpParams::random(&sizes, rng)?;
        let decoder = MlpParams::random(&sizes, rng)?;
        Self::new(encoder, decoder)
    }

    /// Linear encoder `x ↦ x·w` with a linear decoder `x ↦ x·w⁻¹` supplied
    /// by the caller.
    pub fn linear(encoder_w: Array2<f64>, decoder_w: Array2<f64>) -> Result<Self> {
        Self::new(MlpParams::linear(encoder_w)?, MlpParams::linear(decoder_w)?)
    }

    pub fn dim(&self) -> usize {
        self.encoder.input_dim()
    }

    pub fn encoder(&self) -> &MlpParams {
        &self.encoder
    }

    pub fn decoder(&self) -> &MlpParams {
        &self.decoder
    }

    pub fn param_count(&self) -> usize {
        self.encoder.param_count() + self.decoder.param_count()
    }

    /// Encoder parameters followed by decoder parameters.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        self.encoder.flatten_into(&mut out);
        self.decoder.flatten_into(&mut out);
        out
    }

    pub fn assign_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(WicaError::Dimension(format!(
                "model has {} parameters, got {}",
                self.param_count(),
                flat.len()
            )));
        }
        let k = self.encoder.assign_flat(flat);
        self.decoder.assign_flat(&flat[k..]);
        Ok(())
    }

    pub fn encode(&self, x: &Dataset) -> Result<Dataset> {
        mlp_forward(&self.encoder, x)
    }

    pub fn reconstruct(&self, x: &Dataset) -> Result<Dataset> {
        let z = self.encoder.forward(x.view())?;
        Dataset::new(self.decoder.forward(z.view())?)
    }

    pub fn to_json(&self, config: Option<&TrainConfig>) -> String {
        let file = ModelFile {
            d: self.dim(),
            encoder: NetFile::from(&self.encoder),
            decoder: NetFile::from(&self.decoder),
            config: config.cloned(),
        };
        serde_json::to_string(&file).expect("model serializes")
    }

    /// Model and the training configuration echoed with it, if any.
    pub fn from_json(text: &str) -> Result<(Self, Option<TrainConfig>)> {
        let file: ModelFile = serde_json::from_str(text).map_err(|e| WicaError::Parse(format!("model JSON: {e}")))?;
        let encoder = file.encoder.into_mlp("encoder")?;
        let decoder = file.decoder.into_mlp("decoder")?;
        let model = Self::new(encoder, decoder).map_err(|e| WicaError::Parse(e.to_string()))?;
        if model.dim() != file.d {
            return Err(WicaError::Parse(format!("d: declared {}, networks use {}", file.d, model.dim())));
        }
        Ok((model, file.config))
    }

    pub fn save(&self, path: impl AsRef<Path>, config: Option<&TrainConfig>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json(config)).map_err(|e| WicaError::Io(format!("{}: {e}", path.display())))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<(Self, Option<TrainConfig>)> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| WicaError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            WicaError::Parse(m) => WicaError::Parse(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct LayerFile {
    w: Vec<Vec<f64>>,
    b: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct NetFile {
    hidden_activation: Activation,
    output_activation: Activation,
    layers: Vec<LayerFile>,
}

impl From<&MlpParams> for NetFile {
    fn from(m: &MlpParams) -> Self {
        NetFile {
            hidden_activation: m.hidden_activation(),
            output_activation: m.output_activation(),
            layers: m
                .layers()
                .iter()
                .map(|l| LayerFile {
                    w: to_rows(&l.w),
                    b: l.b.to_vec(),
                })
                .collect(),
        }
    }
}

impl NetFile {
    fn into_mlp(self, ctx: &str) -> Result<MlpParams> {
        let mut layers = Vec::with_capacity(self.layers.len());
        for (i, l) in self.layers.into_iter().enumerate() {
            let w = from_rows(l.w, l.b.len(), &format!("{ctx}.layers[{i}].w"))?;
            layers.push(Layer { w, b: Array1::from(l.b) });
        }
        MlpParams::new(layers, self.hidden_activation, self.output_activation)
            .map_err(|e| WicaError::Parse(format!("{ctx}: {e}")))
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    d: usize,
    encoder: NetFile,
    decoder: NetFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    config: Option<TrainConfig>,
}

pub fn mlp_forward(m: &MlpParams, x: &Dataset) -> Result<Dataset> {
    Dataset::new(m.forward(x.view())?)
}

pub fn encode(model: &AutoEncoderModel, x: &Dataset) -> Result<Dataset> {
    model.encode(x)
}

fn aggregate(sq_sum: f64, rows: usize, norm: RecNormalization) -> f64 {
    match norm {
        RecNormalization::Mean => sq_sum / rows as f64,
        RecNormalization::Sum => sq_sum,
    }
}

/// Mean over rows of `‖x − D(E x)‖²`.
pub fn rec_error(model: &AutoEncoderModel, x: &Dataset) -> Result<f64> {
    rec_error_with(model, x, RecNormalization::Mean)
}

pub fn rec_error_with(model: &AutoEncoderModel, x: &Dataset, norm: RecNormalization) -> Result<f64> {
    let xh = model.reconstruct(x)?;
    let sq = (x.values() - xh.values()).mapv(|v| v * v).sum();
    Ok(aggregate(sq, x.nrows(), norm))
}

/// The three parts of the cost of one batch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub total: f64,
    pub rec: f64,
    pub wii: f64,
}

/// Gradient with the model's layer shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGradient {
    pub encoder: Vec<Layer>,
    pub decoder: Vec<Layer>,
}

impl ModelGradient {
    /// Same order as [`AutoEncoderModel::flatten`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        flatten_layers(&self.encoder, &mut out);
        flatten_layers(&self.decoder, &mut out);
        out
    }

    pub fn norm(&self) -> f64 {
        self.flatten().iter().map(|g| g * g).sum::<f64>().sqrt()
    }
}

/// Forward pass of one batch with everything the backward pass needs.
struct Pass {
    enc: crate::nn::ForwardCache,
    dec: crate::nn::ForwardCache,
    /// Normalized encoder output.
    y: Dataset,
    mean: Array1<f64>,
    std: Array1<f64>,
}

impl Pass {
    fn run(model: &AutoEncoderModel, x: &Dataset) -> Result<Self> {
        if x.ncols() != model.dim() {
            return Err(WicaError::Dimension(format!(
                "model expects {} columns, got {}",
                model.dim(),
                x.ncols()
            )));
        }
        if x.nrows() < 2 {
            return Err(WicaError::InsufficientData("a batch needs at least 2 rows".into()));
        }
        let enc = model.encoder.forward_cached(x.view())?;
        let z = enc.output();
        if z.iter().any(|v| !v.is_finite()) {
            return Err(WicaError::Numerical("encoder produced non-finite output".into()));
        }
        let dec = model.decoder.forward_cached(z.view())?;
        let (mean, std) = column_moments(z.view());
        let y = Dataset::new(z.clone())?.normalized()?;
        Ok(Self { enc, dec, y, mean, std })
    }
}

fn check_points(points: &[WeightingPoint], d: usize) -> Result<()> {
    if points.is_empty() {
        return Err(WicaError::InvalidParameter("no weighting points given".into()));
    }
    if let Some(p) = points.iter().find(|p| p.dim() != d) {
        return Err(WicaError::Dimension(format!("weighting point has {} coordinates, latent has {d}", p.dim())));
    }
    Ok(())
}

/// Index at one point and its gradient with respect to the normalized
/// sample, scaled by `scale`.
fn wii_point_backward(y: &Dataset, p: &WeightingPoint, cfg: &WiiConfig, scale: f64) -> Result<(f64, Array2<f64>)> {
    let c = weighted_cov_at_point(y, p, cfg)?;
    let value = index_from_cov(&c);
    let d = c.nrows();
    let pairs = (d * (d - 1) / 2) as f64;

    // ∂(index)/∂C on the entries the index reads: C_ij (i < j) and C_ii.
    let mut gc = Array2::<f64>::zeros((d, d));
    let k = scale / pairs;
    for i in 0..d {
        for j in (i + 1)..d {
            let a = c[(i, j)];
            let den = c[(i, i)] * c[(i, i)] + c[(j, j)] * c[(j, j)];
            if den > 0.0 {
                gc[(i, j)] += k * 4.0 * a / den;
                let f = -k * 4.0 * a * a / (den * den);
                gc[(i, i)] += f * c[(i, i)];
                gc[(j, j)] += f * c[(j, j)];
            }
        }
    }

    let log_w = gaussian_log_weights(y, p)?;
    let (w, _) = shifted_weights(&log_w);
    let ws = WeightedSample::new(y.view(), w.view())?;
    let total = ws.total()?;
    let m = weighted_mean(&ws)?;
    let u = y.values() - &m.view().insert_axis(Axis(0));
    let gsym = &gc + &gc.t();
    let inner_gc: f64 = (&gc * &c).sum();

    // C = Σ w_n u_n u_nᵀ / W; the mean's own dependence drops out because
    // Σ w_n u_n = 0.
    let ug = u.dot(&gsym);
    let mut gy = &ug * &w.view().insert_axis(Axis(1)) / total;
    let ugu = (&u.dot(&gc) * &u).sum_axis(Axis(1));
    let g_w = (ugu - inner_gc) / total;

    // w_n = exp(−‖y_n − p‖²/2 − shift); shifting does not change C.
    let g_logw = &g_w * &w;
    let diff = y.values() - &p.view().insert_axis(Axis(0));
    gy.scaled_add(-1.0, &(&diff * &g_logw.view().insert_axis(Axis(1))));
    Ok((value, gy))
}

/// Pull a gradient on the normalized sample back to the raw encoder output.
fn normalization_backward(z: &Array2<f64>, mean: &Array1<f64>, std: &Array1<f64>, gy: &Array2<f64>) -> Array2<f64> {
    let n = z.nrows() as f64;
    let mut gz = Array2::<f64>::zeros(z.dim());
    for k in 0..z.ncols() {
        let s = normalization_scale(std[k]);
        let g = gy.column(k);
        let zc = z.column(k).mapv(|v| v - mean[k]);
        let gbar = g.sum() / n;
        let proj = g.dot(&zc);
        let coef = if std[k] > 0.0 { proj / (s * s * n * std[k]) } else { 0.0 };
        let mut col = gz.column_mut(k);
        for i in 0..z.nrows() {
            col[i] = (g[i] - gbar) / s - coef * zc[i];
        }
    }
    gz
}

fn evaluate(
    model: &AutoEncoderModel,
    x: &Dataset,
    pass: &Pass,
    points: &[WeightingPoint],
    cfg: &TrainConfig,
    want_grad: bool,
) -> Result<(CostBreakdown, Option<ModelGradient>)> {
    let d = model.dim();
    check_points(points, d)?;
    let wcfg = cfg.wii_config(d);
    let xh = pass.dec.output();
    let resid = x.values() - xh;
    let rec = aggregate(resid.mapv(|v| v * v).sum(), x.nrows(), cfg.rec_normalization);

    let per_point = cfg.beta / points.len() as f64;
    let mut wii_sum = 0.0;
    let mut gy = Array2::<f64>::zeros(pass.y.values().dim());
    for p in points {
        let (v, g) = wii_point_backward(&pass.y, p, &wcfg, per_point)?;
        wii_sum += v;
        if want_grad {
            gy += &g;
        }
    }
    let wii = wii_sum / points.len() as f64;
    let cost = CostBreakdown {
        total: rec + cfg.beta * wii,
        rec,
        wii,
    };
    if !want_grad {
        return Ok((cost, None));
    }

    let rec_scale = match cfg.rec_normalization {
        RecNormalization::Mean => 2.0 / x.nrows() as f64,
        RecNormalization::Sum => 2.0,
    };
    let g_xh = resid * (-rec_scale);
    let (dec_grads, g_z_dec) = model.decoder.backward(&pass.dec, &g_xh);
    let mut g_z = normalization_backward(pass.enc.output(), &pass.mean, &pass.std, &gy);
    g_z += &g_z_dec;
    let (enc_grads, _) = model.encoder.backward(&pass.enc, &g_z);
    Ok((
        cost,
        Some(ModelGradient {
            encoder: enc_grads,
            decoder: dec_grads,
        }),
    ))
}

/// Cost of `x` at the given points (on the normalized encoder output).
pub fn wica_cost(
    model: &AutoEncoderModel,
    x: &Dataset,
    points: &[WeightingPoint],
    cfg: &TrainConfig,
) -> Result<CostBreakdown> {
    let pass = Pass::run(model, x)?;
    Ok(evaluate(model, x, &pass, points, cfg, false)?.0)
}

/// Exact gradient of `wica_cost(..).total` with respect to every parameter.
pub fn cost_gradient(
    model: &AutoEncoderModel,
    x: &Dataset,
    points: &[WeightingPoint],
    cfg: &TrainConfig,
) -> Result<ModelGradient> {
    Ok(cost_and_gradient(model, x, points, cfg)?.1)
}

pub fn cost_and_gradient(
    model: &AutoEncoderModel,
    x: &Dataset,
    points: &[WeightingPoint],
    cfg: &TrainConfig,
) -> Result<(CostBreakdown, ModelGradient)> {
    let pass = Pass::run(model, x)?;
    let (cost, grad) = evaluate(model, x, &pass, points, cfg, true)?;
    Ok((cost, grad.expect("gradient requested")))
}

/// One logged step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub step: usize,
    pub rec_error: f64,
    pub wii: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainTrace {
    pub beta: f64,
    pub records: Vec<TraceRecord>,
}

impl TrainTrace {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,rec_error,wii,total\n");
        for r in &self.records {
            let _ = writeln!(out, "{},{},{},{}", r.step, r.rec_error, r.wii, r.total);
        }
        out
    }
}

fn point_is_usable(y: &Dataset, p: &WeightingPoint, min_effective_weight: f64) -> Result<bool> {
    let (_, residual) = shifted_weights(&gaussian_log_weights(y, p)?);
    Ok(residual >= min_effective_weight)
}

fn draw_points(y: &Dataset, count: usize, cfg: &TrainConfig, rng: &mut RngStream) -> Result<Vec<WeightingPoint>> {
    let mut points = Vec::with_capacity(count);
    for _ in 0..count {
        let mut attempt = 0;
        loop {
            let p = sample_one_point(y, rng);
            if point_is_usable(y, &p, cfg.min_effective_weight)? {
                points.push(p);
                break;
            }
            attempt += 1;
            if attempt > POINT_RESAMPLES {
                let (_, residual_mass) = shifted_weights(&gaussian_log_weights(y, &p)?);
                return Err(WicaError::WeightCollapse {
                    point: p.to_vec(),
                    residual_mass,
                });
            }
        }
    }
    Ok(points)
}

/// Fresh model for `(d, cfg)`, exactly as `train` initializes it.
pub fn initial_model(d: usize, cfg: &TrainConfig) -> Result<AutoEncoderModel> {
    AutoEncoderModel::random(d, &cfg.hidden, &mut RngStream::new(cfg.seed).derive("init"))
}

/// Minibatch training from the seeded initial model.
pub fn train(x: &Dataset, cfg: &TrainConfig) -> Result<(AutoEncoderModel, TrainTrace)> {
    cfg.validate()?;
    let (n, d) = (x.nrows(), x.ncols());
    if n < cfg.batch_size {
        return Err(WicaError::InsufficientData(format!(
            "batch_size {} exceeds the {n} available rows",
            cfg.batch_size
        )));
    }
    if cfg.batch_size < d {
        return Err(WicaError::InvalidParameter(format!(
            "batch_size {} is smaller than d = {d}; weighting points need d distinct rows",
            cfg.batch_size
        )));
    }
    let root = RngStream::new(cfg.seed);
    let mut model = initial_model(d, cfg)?;
    let mut batch_rng = root.derive("batch");
    let mut point_rng = root.derive("points");
    let mut params = model.flatten();
    let mut opt = Optimizer::new(cfg.optimizer, cfg.learning_rate, params.len())?;
    let mut trace = TrainTrace {
        beta: cfg.beta,
        records: Vec::new(),
    };
    let count = cfg.points_per_step(d);
    let diverged = |step: usize, e: WicaError| match e {
        WicaError::Numerical(reason) => WicaError::TrainingDiverged { step, reason },
        other => other,
    };

    for step in 0..cfg.steps {
        let rows = batch_rng.choose_distinct(n, cfg.batch_size);
        let xb = x.select_rows(&rows);
        let pass = Pass::run(&model, &xb).map_err(|e| diverged(step, e))?;
        let points = draw_points(&pass.y, count, cfg, &mut point_rng)?;
        let (cost, grad) = evaluate(&model, &xb, &pass, &points, cfg, true)?;
        if !cost.total.is_finite() {
            return Err(WicaError::TrainingDiverged {
                step,
                reason: format!("non-finite loss (rec {}, wii {})", cost.rec, cost.wii),
            });
        }
        if step % cfg.log_every == 0 || step + 1 == cfg.steps {
            trace.records.push(TraceRecord {
                step,
                rec_error: cost.rec,
                wii: cost.wii,
                total: cost.total,
            });
        }
        let g = grad.expect("gradient requested").flatten();
        opt.step(&mut params, &g).map_err(|e| diverged(step, e))?;
        model.assign_flat(&params)?;
    }
    Ok((model, trace))
}
