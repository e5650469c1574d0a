//! `wica-lab`: generate sources, mix them, train, score and benchmark from
//! the command line. Every artifact gets a `*.manifest.json` companion.

pub mod error;
pub mod experiment;
pub mod manifest;
pub mod plot;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use wica::datagen::{generate, SourceKind, SourceSpec};
use wica::metrics::score;
use wica::mixer::{MixingPipeline, DEFAULT_HIDDEN};
use wica::nn::OptimizerKind;
use wica::trainer::{train, AutoEncoderModel, RecNormalization, TrainConfig};
use wica::wii::{wii_index, WiiConfig};
use wica::{Dataset, RngStream};

use crate::error::{CliError, CliResult};
use crate::experiment::{bench_threads, run_bench, runs_csv, summary_csv, BenchConfig, MixingConfig};
use crate::manifest::{manifest_path_for, Manifest};

#[derive(Debug, Parser)]
#[command(name = "wica-lab", version, about = "Weighted nonlinear ICA experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write synthetic sources as CSV.
    Generate(GenerateArgs),
    /// Normalize a dataset and push it through a random invertible mixing.
    Mix(MixArgs),
    /// Invert a saved mixing pipeline.
    UnmixExact(UnmixArgs),
    /// Train the autoencoder and save the model.
    Train(TrainArgs),
    /// Encode a dataset with a trained model.
    Encode(EncodeArgs),
    /// Score retrieved components against true sources.
    Score(ScoreArgs),
    /// Weighted independence index of a dataset.
    Wii(WiiArgs),
    /// Run a dims × mixes × seeds grid.
    Bench(BenchArgs),
    /// Scatter points and marginal histograms for plotting.
    PlotData(PlotArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// SourceSpec JSON; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_parser = parse_kind)]
    pub kind: Option<SourceKind>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Kind-specific parameter, `key=value`; repeatable.
    #[arg(long = "param", value_parser = parse_param)]
    pub params: Vec<(String, f64)>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct MixArgs {
    /// MixingConfig JSON (`iterations`, `hidden`, `seed`).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
    /// Where to save the pipeline JSON.
    #[arg(long)]
    pub pipeline: PathBuf,
    /// Skip componentwise normalization of the input.
    #[arg(long)]
    pub raw: bool,
}

#[derive(Debug, Args)]
pub struct UnmixArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub pipeline: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// TrainConfig JSON; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub input: PathBuf,
    /// Where to save the model JSON.
    #[arg(long)]
    pub model: PathBuf,
    /// Optional trace CSV (`step,rec_error,wii,total`).
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Weighting points per step (default: d).
    #[arg(long)]
    pub points: Option<usize>,
    #[arg(long)]
    pub log_every: Option<usize>,
    #[arg(long, value_parser = parse_rec_norm)]
    pub rec_normalization: Option<RecNormalization>,
    #[arg(long, value_parser = parse_optimizer)]
    pub optimizer: Option<OptimizerKind>,
    /// Hidden widths, comma separated (e.g. `128,128,128`).
    #[arg(long, value_delimiter = ',')]
    pub hidden: Option<Vec<usize>>,
    #[arg(long)]
    pub raw: bool,
}

#[derive(Debug, Args)]
pub struct EncodeArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub raw: bool,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Retrieved components (CSV).
    pub z: PathBuf,
    /// True sources (CSV).
    pub s: PathBuf,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Leave the correlation matrices out of the report.
    #[arg(long)]
    pub no_matrices: bool,
}

#[derive(Debug, Args)]
pub struct WiiArgs {
    pub data: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub points: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides `output_dir` from the config.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = plot::DEFAULT_BINS)]
    pub bins: usize,
}

fn parse_kind(s: &str) -> Result<SourceKind, String> {
    serde_json::from_value(serde_json::Value::String(s.replace('-', "_")))
        .map_err(|_| format!("unknown source kind '{s}' (lattice, uniform, laplace, sine_mixture, fig1_dependent)"))
}

fn parse_rec_norm(s: &str) -> Result<RecNormalization, String> {
    serde_json::from_value(serde_json::Value::String(s.into())).map_err(|_| format!("expected mean or sum, got '{s}'"))
}

fn parse_optimizer(s: &str) -> Result<OptimizerKind, String> {
    serde_json::from_value(serde_json::Value::String(s.into())).map_err(|_| format!("expected adam or sgd, got '{s}'"))
}

fn parse_param(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected key=value, got '{s}'"))?;
    let v: f64 = v.trim().parse().map_err(|_| format!("parameter '{k}' needs a number, got '{v}'"))?;
    Ok((k.trim().to_string(), v))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

/// JSON value of a config file, or an empty object.
fn read_config_value(path: Option<&Path>) -> CliResult<serde_json::Value> {
    match path {
        Some(p) => read_json(p),
        None => Ok(serde_json::Value::Object(Default::default())),
    }
}

fn set<T: Serialize>(v: &mut serde_json::Value, key: &str, value: Option<T>) {
    if let (Some(x), Some(obj)) = (value, v.as_object_mut()) {
        obj.insert(key.into(), serde_json::to_value(x).expect("serializable"));
    }
}

fn from_value<T: DeserializeOwned>(v: serde_json::Value, what: &str) -> CliResult<T> {
    serde_json::from_value(v).map_err(|e| CliError::Usage(format!("{what}: {e}")))
}

fn read_dataset(path: &Path) -> CliResult<Dataset> {
    Ok(Dataset::read_csv(path)?)
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn maybe_normalize(x: Dataset, raw: bool) -> CliResult<Dataset> {
    Ok(if raw { x } else { x.normalized()? })
}

pub fn source_spec(args: &GenerateArgs) -> CliResult<SourceSpec> {
    let mut v = read_config_value(args.config.as_deref())?;
    set(&mut v, "kind", args.kind);
    set(&mut v, "d", args.d);
    set(&mut v, "n", args.n);
    set(&mut v, "seed", args.seed);
    if !args.params.is_empty() {
        let obj = v.as_object_mut().ok_or_else(|| CliError::Usage("config must be a JSON object".into()))?;
        let params = obj.entry("params").or_insert_with(|| serde_json::json!({}));
        for (k, val) in &args.params {
            params
                .as_object_mut()
                .ok_or_else(|| CliError::Usage("params must be an object".into()))?
                .insert(k.clone(), serde_json::json!(val));
        }
    }
    let spec: SourceSpec = from_value(v, "source spec (need kind, d, n, seed)")?;
    spec.validate()?;
    Ok(spec)
}

fn cmd_generate(args: &GenerateArgs) -> CliResult<()> {
    let spec = source_spec(args)?;
    let s = generate(&spec)?;
    write_text(&args.out, &s.to_csv_string())?;
    Manifest::new("generate", &spec)
        .seed("source", spec.seed)
        .output(&args.out)?
        .write(&manifest_path_for(&args.out))
}

pub fn mixing_config(args: &MixArgs) -> CliResult<MixingConfig> {
    let mut v = read_config_value(args.config.as_deref())?;
    set(&mut v, "iterations", args.iterations);
    set(&mut v, "hidden", args.hidden);
    set(&mut v, "seed", args.seed);
    if let Some(obj) = v.as_object_mut() {
        obj.entry("hidden").or_insert_with(|| serde_json::json!(DEFAULT_HIDDEN));
    }
    from_value(v, "mixing config (need iterations, seed)")
}

fn cmd_mix(args: &MixArgs) -> CliResult<()> {
    let cfg = mixing_config(args)?;
    let s = maybe_normalize(read_dataset(&args.input)?, args.raw)?;
    let pipeline = MixingPipeline::from_seed(s.ncols(), cfg.iterations, cfg.hidden, cfg.seed)?;
    let x = pipeline.mix(&s)?;
    write_text(&args.out, &x.to_csv_string())?;
    write_text(&args.pipeline, &pipeline.to_json())?;
    #[derive(Serialize)]
    struct Echo<'a> {
        mixing: &'a MixingConfig,
        normalize_input: bool,
    }
    let echo = Echo {
        mixing: &cfg,
        normalize_input: !args.raw,
    };
    Manifest::new("mix", &echo)
        .seed("mixing", cfg.seed)
        .input(&args.input)?
        .output(&args.out)?
        .output(&args.pipeline)?
        .write(&manifest_path_for(&args.out))
}

fn cmd_unmix(args: &UnmixArgs) -> CliResult<()> {
    let pipeline = MixingPipeline::load(&args.pipeline)?;
    let x = read_dataset(&args.input)?;
    let s = pipeline.unmix_exact(&x)?;
    write_text(&args.out, &s.to_csv_string())?;
    Manifest::new("unmix-exact", &serde_json::json!({ "d": pipeline.dim(), "stages": pipeline.stages().len() }))
        .seed("mixing", pipeline.seed())
        .input(&args.input)?
        .input(&args.pipeline)?
        .output(&args.out)?
        .write(&manifest_path_for(&args.out))
}

pub fn train_config(args: &TrainArgs) -> CliResult<TrainConfig> {
    let mut v = read_config_value(args.config.as_deref())?;
    set(&mut v, "beta", args.beta);
    set(&mut v, "steps", args.steps);
    set(&mut v, "batch_size", args.batch_size);
    set(&mut v, "learning_rate", args.learning_rate);
    set(&mut v, "seed", args.seed);
    set(&mut v, "num_weighting_points", args.points);
    set(&mut v, "log_every", args.log_every);
    set(&mut v, "rec_normalization", args.rec_normalization);
    set(&mut v, "optimizer", args.optimizer);
    set(&mut v, "hidden", args.hidden.clone());
    let cfg: TrainConfig = from_value(v, "training config")?;
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_train(args: &TrainArgs) -> CliResult<()> {
    let cfg = train_config(args)?;
    let x = maybe_normalize(read_dataset(&args.input)?, args.raw)?;
    let (model, trace) = train(&x, &cfg)?;
    if let Some(dir) = args.model.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    model.save(&args.model, Some(&cfg))?;
    let mut m = Manifest::new("train", &cfg).seed("training", cfg.seed).input(&args.input)?.output(&args.model)?;
    if let Some(t) = &args.trace {
        write_text(t, &trace.to_csv())?;
        m = m.output(t)?;
    }
    m.write(&manifest_path_for(&args.model))
}

fn cmd_encode(args: &EncodeArgs) -> CliResult<()> {
    let (model, cfg) = AutoEncoderModel::load(&args.model)?;
    let x = maybe_normalize(read_dataset(&args.input)?, args.raw)?;
    let z = model.encode(&x)?;
    write_text(&args.out, &z.to_csv_string())?;
    let mut m = Manifest::new("encode", &serde_json::json!({ "normalize_input": !args.raw }));
    if let Some(c) = cfg {
        m = m.seed("training", c.seed);
    }
    m.input(&args.model)?.input(&args.input)?.output(&args.out)?.write(&manifest_path_for(&args.out))
}

fn cmd_score(args: &ScoreArgs) -> CliResult<()> {
    let z = read_dataset(&args.z)?;
    let s = read_dataset(&args.s)?;
    let mut report = score(&z, &s)?;
    if args.no_matrices {
        report = report.without_matrices();
    }
    let text = report.to_json() + "\n";
    match &args.out {
        Some(out) => {
            write_text(out, &text)?;
            Manifest::new("score", &serde_json::json!({ "matrices": !args.no_matrices }))
                .input(&args.z)?
                .input(&args.s)?
                .output(out)?
                .write(&manifest_path_for(out))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct WiiReport {
    pub wii: f64,
    pub points: usize,
    pub seed: u64,
    pub rows: usize,
    pub cols: usize,
}

fn cmd_wii(args: &WiiArgs) -> CliResult<()> {
    let x = read_dataset(&args.data)?;
    let cfg = WiiConfig::new(args.points)?;
    let wii = wii_index(&x, &cfg, &mut RngStream::new(args.seed))?;
    let report = WiiReport {
        wii,
        points: args.points,
        seed: args.seed,
        rows: x.nrows(),
        cols: x.ncols(),
    };
    let text = serde_json::to_string_pretty(&report).expect("serializes") + "\n";
    match &args.out {
        Some(out) => {
            write_text(out, &text)?;
            Manifest::new("wii", &serde_json::json!({ "points": args.points }))
                .seed("points", args.seed)
                .input(&args.data)?
                .output(out)?
                .write(&manifest_path_for(out))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_bench(args: &BenchArgs) -> CliResult<()> {
    let mut cfg: BenchConfig = read_json(&args.config)?;
    if let Some(dir) = &args.out_dir {
        cfg.output_dir = Some(dir.clone());
    }
    let dir = cfg
        .output_dir
        .clone()
        .ok_or_else(|| CliError::Usage("bench needs --out-dir or output_dir in the config".into()))?;
    let runs = run_bench(&cfg, bench_threads()?)?;
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let runs_path = dir.join("runs.csv");
    let summary_path = dir.join("summary.csv");
    write_text(&runs_path, &runs_csv(&runs))?;
    write_text(&summary_path, &summary_csv(&runs, &cfg.eval.measures))?;
    let mut seeds = BTreeMap::new();
    for r in &runs {
        let key = format!("d{}/m{}/s{}", r.d, r.mixes, r.seed);
        seeds.insert(format!("{key}/source"), r.source_seed);
        seeds.insert(format!("{key}/mixing"), r.mixing_seed);
        seeds.insert(format!("{key}/training"), r.train_seed);
    }
    let mut m = Manifest::new("bench", &cfg).input(&args.config)?.output(&runs_path)?.output(&summary_path)?;
    m.seeds = seeds;
    m.write(&dir.join("manifest.json"))?;
    let failed: Vec<&experiment::BenchRun> = runs.iter().filter(|r| r.outcome.is_err()).collect();
    for r in &failed {
        if let Err(e) = &r.outcome {
            eprintln!("run d={} mixes={} seed={} failed: {e}", r.d, r.mixes, r.seed);
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::BenchFailures {
            failed: failed.len(),
            total: runs.len(),
            numerical: failed.iter().all(|r| r.numerical_failure),
        })
    }
}

fn cmd_plot(args: &PlotArgs) -> CliResult<()> {
    let x = read_dataset(&args.input)?;
    let scatter = args.out_dir.join("scatter.csv");
    let marginals = args.out_dir.join("marginals.csv");
    write_text(&scatter, &plot::scatter_csv(&x))?;
    write_text(&marginals, &plot::marginals_csv(&x, args.bins)?)?;
    Manifest::new("plot-data", &serde_json::json!({ "bins": args.bins }))
        .input(&args.input)?
        .output(&scatter)?
        .output(&marginals)?
        .write(&args.out_dir.join("manifest.json"))
}

pub fn run(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Mix(a) => cmd_mix(a),
        Command::UnmixExact(a) => cmd_unmix(a),
        Command::Train(a) => cmd_train(a),
        Command::Encode(a) => cmd_encode(a),
        Command::Score(a) => cmd_score(a),
        Command::Wii(a) => cmd_wii(a),
        Command::Bench(a) => cmd_bench(a),
        Command::PlotData(a) => cmd_plot(a),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn parses_params_and_kinds() {
        assert_eq!(parse_param("t_max=5").unwrap(), ("t_max".into(), 5.0));
        assert!(parse_param("t_max").is_err());
        assert_eq!(parse_kind("sine-mixture").unwrap(), SourceKind::SineMixture);
        assert!(parse_kind("gauss").is_err());
    }

    #[test]
    fn flags_override_config() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("t.json");
        std::fs::write(&cfg, r#"{"beta": 0.5, "steps": 10, "hidden": [8]}"#).unwrap();
        let cli = Cli::try_parse_from([
            "wica-lab",
            "train",
            "--config",
            cfg.to_str().unwrap(),
            "--input",
            "x.csv",
            "--model",
            "m.json",
            "--steps",
            "20",
            "--hidden",
            "4,4",
        ])
        .unwrap();
        let Command::Train(args) = &cli.command else { panic!() };
        let t = train_config(args).unwrap();
        assert_eq!((t.beta, t.steps, t.hidden.clone()), (0.5, 20, vec![4, 4]));
        assert_eq!(t.batch_size, 256);
    }
}
