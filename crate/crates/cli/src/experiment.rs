//! Single runs of the generate → mix → train → encode → score loop, and
//! grids of them.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use wica::datagen::{generate, SourceKind, SourceSpec};
use wica::metrics::{score, ScoreReport};
use wica::mixer::{MixingPipeline, DEFAULT_HIDDEN};
use wica::trainer::{train, TrainConfig};
use wica::{Dataset, RngStream, WicaError};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingConfig {
    pub iterations: usize,
    #[serde(default = "default_hidden")]
    pub hidden: usize,
    pub seed: u64,
}

fn default_hidden() -> usize {
    DEFAULT_HIDDEN
}

pub const MEASURES: [&str; 2] = ["ots", "max_corr"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    #[serde(default = "default_measures")]
    pub measures: Vec<String>,
}

fn default_measures() -> Vec<String> {
    MEASURES.iter().map(|m| m.to_string()).collect()
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            measures: default_measures(),
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> CliResult<()> {
        if self.measures.is_empty() {
            return Err(CliError::Usage("eval.measures is empty".into()));
        }
        for m in &self.measures {
            if !MEASURES.contains(&m.as_str()) {
                return Err(CliError::Usage(format!("unknown measure '{m}' (known: {MEASURES:?})")));
            }
        }
        Ok(())
    }
}

/// One fully seeded run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub source: SourceSpec,
    pub mixing: MixingConfig,
    pub training: TrainConfig,
    #[serde(default)]
    pub eval: EvalConfig,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

/// What each stage of a run produced.
pub struct RunArtifacts {
    pub sources: Dataset,
    pub pipeline: MixingPipeline,
    pub mixed: Dataset,
    pub retrieved: Dataset,
    pub report: ScoreReport,
}

/// The same chain of operations the individual subcommands perform, so a
/// run here and a chain of `generate`, `mix`, `train`, `encode`, `score`
/// agree bit for bit.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunArtifacts, WicaError> {
    let sources = generate(&cfg.source)?;
    let pipeline = MixingPipeline::from_seed(cfg.source.d, cfg.mixing.iterations, cfg.mixing.hidden, cfg.mixing.seed)?;
    let mixed = pipeline.mix(&sources.normalized()?)?;
    let x = mixed.normalized()?;
    let (model, _) = train(&x, &cfg.training)?;
    let retrieved = model.encode(&x)?;
    let report = score(&retrieved, &sources)?;
    Ok(RunArtifacts {
        sources,
        pipeline,
        mixed,
        retrieved,
        report,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceTemplate {
    pub kind: SourceKind,
    pub n: usize,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingTemplate {
    #[serde(default = "default_hidden")]
    pub hidden: usize,
}

impl Default for MixingTemplate {
    fn default() -> Self {
        Self { hidden: DEFAULT_HIDDEN }
    }
}

/// A dims × mixes × seeds grid sharing one source family and trainer setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub source: SourceTemplate,
    #[serde(default)]
    pub mixing: MixingTemplate,
    #[serde(default)]
    pub training: TrainConfig,
    #[serde(default)]
    pub eval: EvalConfig,
    pub dims: Vec<usize>,
    pub mixes: Vec<usize>,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

/// One grid cell, with the seeds it derived.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRun {
    pub d: usize,
    pub mixes: usize,
    pub seed: u64,
    pub source_seed: u64,
    pub mixing_seed: u64,
    pub train_seed: u64,
    pub outcome: Result<(f64, f64), String>,
    #[serde(skip)]
    pub numerical_failure: bool,
}

impl BenchConfig {
    pub fn validate(&self) -> CliResult<()> {
        if self.dims.is_empty() || self.mixes.is_empty() || self.seeds.is_empty() {
            return Err(CliError::Usage("dims, mixes and seeds must all be non-empty".into()));
        }
        self.eval.validate()?;
        self.training.validate()?;
        Ok(())
    }

    /// Cells in sorted (d, mixes, seed) order, each with its run seed.
    pub fn cells(&self) -> Vec<(u64, ExperimentConfig)> {
        let mut dims = self.dims.clone();
        let mut mixes = self.mixes.clone();
        let mut seeds = self.seeds.clone();
        dims.sort_unstable();
        dims.dedup();
        mixes.sort_unstable();
        mixes.dedup();
        seeds.sort_unstable();
        seeds.dedup();
        let mut out = Vec::new();
        for &d in &dims {
            for &m in &mixes {
                for &seed in &seeds {
                    let mut rng = RngStream::new(seed).derive(&format!("bench/d{d}/m{m}"));
                    let source = SourceSpec {
                        kind: self.source.kind,
                        d,
                        n: self.source.n,
                        seed: rng.next_seed(),
                        params: self.source.params.clone(),
                    };
                    let mixing = MixingConfig {
                        iterations: m,
                        hidden: self.mixing.hidden,
                        seed: rng.next_seed(),
                    };
                    let training = TrainConfig {
                        seed: rng.next_seed(),
                        ..self.training.clone()
                    };
                    out.push((
                        seed,
                        ExperimentConfig {
                            source,
                            mixing,
                            training,
                            eval: self.eval.clone(),
                            output_dir: None,
                        },
                    ));
                }
            }
        }
        out
    }
}

/// Threads for the grid: `WICA_LAB_THREADS` if set, else rayon's default.
pub fn bench_threads() -> CliResult<usize> {
    match std::env::var("WICA_LAB_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(CliError::Usage(format!("WICA_LAB_THREADS must be a positive integer, got '{v}'"))),
        },
        Err(_) => Ok(0),
    }
}

pub fn run_bench(cfg: &BenchConfig, threads: usize) -> CliResult<Vec<BenchRun>> {
    cfg.validate()?;
    let cells = cfg.cells();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    let runs = pool.install(|| {
        cells
            .par_iter()
            .map(|(seed, cell)| {
                let result = run_experiment(cell);
                BenchRun {
                    d: cell.source.d,
                    mixes: cell.mixing.iterations,
                    seed: *seed,
                    source_seed: cell.source.seed,
                    mixing_seed: cell.mixing.seed,
                    train_seed: cell.training.seed,
                    numerical_failure: matches!(&result, Err(e) if e.is_numerical()),
                    outcome: result.map(|a| (a.report.ots, a.report.max_corr)).map_err(|e| e.to_string()),
                }
            })
            .collect::<Vec<_>>()
    });
    Ok(runs)
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn runs_csv(runs: &[BenchRun]) -> String {
    let mut out = String::from("d,mixes,seed,source_seed,mixing_seed,train_seed,status,ots,max_corr\n");
    for r in runs {
        let (status, ots, mc) = match &r.outcome {
            Ok((o, m)) => ("ok".to_string(), o.to_string(), m.to_string()),
            Err(e) => (format!("error: {e}"), String::new(), String::new()),
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.d,
            r.mixes,
            r.seed,
            r.source_seed,
            r.mixing_seed,
            r.train_seed,
            csv_field(&status),
            ots,
            mc
        );
    }
    out
}

/// One row per (d, mixes) with mean and sample standard deviation of each
/// requested measure over the successful runs.
pub fn summary_csv(runs: &[BenchRun], measures: &[String]) -> String {
    let mut out = String::from("d,mixes,runs,failed");
    for m in measures {
        let _ = write!(out, ",{m}_mean,{m}_std");
    }
    out.push('\n');
    let mut groups: BTreeMap<(usize, usize), Vec<&BenchRun>> = BTreeMap::new();
    for r in runs {
        groups.entry((r.d, r.mixes)).or_default().push(r);
    }
    for ((d, mixes), rs) in groups {
        let ok: Vec<(f64, f64)> = rs.iter().filter_map(|r| r.outcome.as_ref().ok().copied()).collect();
        let _ = write!(out, "{d},{mixes},{},{}", rs.len(), rs.len() - ok.len());
        for m in measures {
            let vals: Vec<f64> = ok.iter().map(|&(o, mc)| if m == "ots" { o } else { mc }).collect();
            let (mean, std) = mean_std(&vals);
            let _ = write!(out, ",{mean},{std}");
        }
        out.push('\n');
    }
    out
}
