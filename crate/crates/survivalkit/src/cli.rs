//! Batch command-line front end.
//!
//! `simulate → featurize → fit → predict → evaluate → importance`, each a
//! pure function of its input files, flags and seed. Settings resolve as
//! flags, then the `--config` JSON file, then built-in defaults; the
//! resolved settings are echoed into every evaluation summary.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use survivalkit_core::churn::{extract_all, segment_players, FeatureConfig, Segment, DEFAULT_FEATURES};
use survivalkit_core::cox::{fit_cox, CoxConfig};
use survivalkit_core::ctree::TreeConfig;
use survivalkit_core::evaluation::{
    bootstrap_cv_error_with, brier_curve, calibration_pairs, default_horizon, roc_auc, time_grid, BootstrapConfig,
    ModelSpec,
};
use survivalkit_core::forest::{
    assess_risk, fit_binary_forest_with, fit_forest_with, variable_importance, BinaryDataset, ForestConfig,
    ImportanceConfig, Resampling,
};
use survivalkit_core::survival::{kaplan_meier, median_survival};
use survivalkit_core::synthetic::{event_log_stream, sample_survival, CohortSpec, HazardSpec};
use survivalkit_core::SurvivalCurve;

use crate::error::{Error, Result};
use crate::format::ModelDocument;
use crate::io::{self, LoadedDataset, PredictionRow};
use crate::parallel::RayonExecutor;

#[derive(Debug, Parser)]
#[command(name = "survivalkit", version, about = "Survival analysis of player churn")]
pub struct Cli {
    /// JSON file with default settings; flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a censored sample or a player event log from a spec file.
    Simulate(SimulateArgs),
    /// Turn an event log into churn labels and player features.
    Featurize(FeaturizeArgs),
    /// Fit a model to a feature file.
    Fit(FitArgs),
    /// Predict median survival and at-risk flags.
    Predict(PredictArgs),
    /// Score a model by IPCW Brier scores.
    Evaluate(EvaluateArgs),
    /// Permutation importance of a fitted survival forest.
    Importance(ImportanceArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Km,
    Cox,
    Forest,
    BinaryForest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// Score a fitted model JSON on the input rows.
    Holdout,
    /// Refit on bootstrap samples, score on the rows each sample left out.
    BootstrapCv,
}

fn parse_segment(s: &str) -> std::result::Result<Segment, String> {
    s.parse().map_err(|e: survivalkit_core::Error| e.to_string())
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Simulation spec JSON.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Overrides the spec's seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct FeaturizeArgs {
    /// Event-log CSV.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub inactivity_days: Option<u32>,
    /// Last observed day (YYYY-MM-DD); defaults to the last event date.
    #[arg(long)]
    pub observation_end: Option<NaiveDate>,
    /// Payer-spend quantile from which payers count as whales.
    #[arg(long)]
    pub whale_quantile: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ModelArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    /// Keep only rows of this segment (whale, payer, non_payer).
    #[arg(long, value_parser = parse_segment)]
    pub segment: Option<Segment>,
    #[arg(long)]
    pub n_trees: Option<usize>,
    /// Significance level for splitting.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Covariates tried per node; defaults to ceil(sqrt(p)).
    #[arg(long)]
    pub mtry: Option<usize>,
    #[arg(long)]
    pub min_node_size: Option<usize>,
    #[arg(long)]
    pub min_split_size: Option<usize>,
    /// Comma-separated covariates to use; defaults to every covariate column.
    #[arg(long, value_delimiter = ',')]
    pub features: Option<Vec<String>>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Feature CSV.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub model: ModelKind,
    /// Model JSON.
    #[arg(long)]
    pub output: PathBuf,
    #[command(flatten)]
    pub params: ModelArgs,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Model JSON.
    #[arg(long)]
    pub model: PathBuf,
    /// Feature CSV.
    #[arg(long)]
    pub input: PathBuf,
    /// Predictions CSV.
    #[arg(long)]
    pub output: PathBuf,
    /// At-risk threshold on median survival, in days.
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Also write one survival-curve CSV per row into this directory.
    #[arg(long)]
    pub curves_dir: Option<PathBuf>,
    #[arg(long, value_parser = parse_segment)]
    pub segment: Option<Segment>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Feature CSV.
    #[arg(long)]
    pub input: PathBuf,
    /// A model JSON (holdout) or one of km, cox, forest (bootstrap-cv).
    #[arg(long)]
    pub model: String,
    /// Output directory.
    #[arg(long)]
    pub output: PathBuf,
    /// Defaults to holdout for a model file, bootstrap-cv otherwise.
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    #[arg(long)]
    pub n_boot: Option<usize>,
    /// Brier integration horizon; defaults to the 95th percentile of times.
    #[arg(long)]
    pub horizon: Option<f64>,
    #[command(flatten)]
    pub params: ModelArgs,
}

#[derive(Debug, Args)]
pub struct ImportanceArgs {
    /// Survival-forest JSON.
    #[arg(long)]
    pub model: PathBuf,
    /// The forest's training feature CSV.
    #[arg(long)]
    pub input: PathBuf,
    /// Importance CSV.
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub n_repeats: Option<usize>,
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long, value_parser = parse_segment)]
    pub segment: Option<Segment>,
}

/// Optional settings, as read from `--config` or collected from flags.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub seed: Option<u64>,
    pub segment: Option<Segment>,
    pub n_trees: Option<usize>,
    pub alpha: Option<f64>,
    pub mtry: Option<usize>,
    pub min_node_size: Option<usize>,
    pub min_split_size: Option<usize>,
    pub n_boot: Option<usize>,
    pub horizon: Option<f64>,
    pub n_repeats: Option<usize>,
    pub inactivity_days: Option<u32>,
    pub whale_quantile: Option<f64>,
    pub observation_end: Option<NaiveDate>,
    pub features: Option<Vec<String>>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_reader(io::open(path)?)?)
    }

    /// Field-wise `self` where set, else `fallback`.
    fn or(self, fallback: ConfigFile) -> ConfigFile {
        ConfigFile {
            seed: self.seed.or(fallback.seed),
            segment: self.segment.or(fallback.segment),
            n_trees: self.n_trees.or(fallback.n_trees),
            alpha: self.alpha.or(fallback.alpha),
            mtry: self.mtry.or(fallback.mtry),
            min_node_size: self.min_node_size.or(fallback.min_node_size),
            min_split_size: self.min_split_size.or(fallback.min_split_size),
            n_boot: self.n_boot.or(fallback.n_boot),
            horizon: self.horizon.or(fallback.horizon),
            n_repeats: self.n_repeats.or(fallback.n_repeats),
            inactivity_days: self.inactivity_days.or(fallback.inactivity_days),
            whale_quantile: self.whale_quantile.or(fallback.whale_quantile),
            observation_end: self.observation_end.or(fallback.observation_end),
            features: self.features.or(fallback.features),
        }
    }
}

impl From<&ModelArgs> for ConfigFile {
    fn from(a: &ModelArgs) -> Self {
        ConfigFile {
            seed: a.seed,
            segment: a.segment,
            n_trees: a.n_trees,
            alpha: a.alpha,
            mtry: a.mtry,
            min_node_size: a.min_node_size,
            min_split_size: a.min_split_size,
            features: a.features.clone(),
            ..ConfigFile::default()
        }
    }
}

/// Fully resolved settings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Settings {
    pub seed: u64,
    pub segment: Option<Segment>,
    pub n_trees: usize,
    pub alpha: f64,
    pub mtry: Option<usize>,
    pub min_node_size: usize,
    pub min_split_size: usize,
    pub n_boot: usize,
    pub horizon: Option<f64>,
    pub n_repeats: usize,
    pub inactivity_days: u32,
    pub whale_quantile: f64,
    pub observation_end: Option<NaiveDate>,
    pub features: Option<Vec<String>>,
}

impl From<ConfigFile> for Settings {
    fn from(c: ConfigFile) -> Self {
        let tree = TreeConfig::default();
        Settings {
            seed: c.seed.unwrap_or(0),
            segment: c.segment,
            n_trees: c.n_trees.unwrap_or(ForestConfig::default().n_trees),
            alpha: c.alpha.unwrap_or(tree.alpha),
            mtry: c.mtry,
            min_node_size: c.min_node_size.unwrap_or(tree.min_node_size),
            min_split_size: c.min_split_size.unwrap_or(tree.min_split_size),
            n_boot: c.n_boot.unwrap_or(BootstrapConfig::default().n_boot),
            horizon: c.horizon,
            n_repeats: c.n_repeats.unwrap_or(ImportanceConfig::default().n_repeats),
            inactivity_days: c.inactivity_days.unwrap_or(FeatureConfig::default().inactivity_days),
            whale_quantile: c.whale_quantile.unwrap_or(0.9),
            observation_end: c.observation_end,
            features: c.features,
        }
    }
}

impl Settings {
    pub fn forest_config(&self) -> ForestConfig {
        ForestConfig {
            n_trees: self.n_trees,
            tree: TreeConfig {
                alpha: self.alpha,
                min_node_size: self.min_node_size,
                min_split_size: self.min_split_size,
                mtry: self.mtry,
                rng_seed: self.seed,
            },
            resampling: Resampling::default(),
            rng_seed: self.seed,
        }
    }
}

/// Spec file for `simulate`, tagged by `"type"`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SimulationSpec {
    Survival(HazardSpec),
    EventLog(CohortSpec),
}

#[derive(Debug, Serialize)]
struct Summary<'a> {
    model: &'a str,
    mode: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    ibs: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ibs_replicate_mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ibs_replicate_sd: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    auc: Option<f64>,
    n_boot: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    horizon: Option<f64>,
    truncated: bool,
    n: usize,
    n_calibration_pairs: usize,
    config: &'a Settings,
}

pub fn run(cli: Cli) -> Result<()> {
    let file = match &cli.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    match cli.command {
        Command::Simulate(a) => simulate(&a),
        Command::Featurize(a) => {
            let flags = ConfigFile {
                inactivity_days: a.inactivity_days,
                observation_end: a.observation_end,
                whale_quantile: a.whale_quantile,
                ..ConfigFile::default()
            };
            featurize(&a, &flags.or(file).into())
        }
        Command::Fit(a) => fit(&a, &ConfigFile::from(&a.params).or(file).into()),
        Command::Predict(a) => {
            let flags = ConfigFile {
                horizon: a.horizon,
                segment: a.segment,
                ..ConfigFile::default()
            };
            predict(&a, &flags.or(file).into())
        }
        Command::Evaluate(a) => {
            let flags = ConfigFile {
                n_boot: a.n_boot,
                horizon: a.horizon,
                ..ConfigFile::from(&a.params)
            };
            evaluate(&a, &flags.or(file).into())
        }
        Command::Importance(a) => {
            let flags = ConfigFile {
                seed: a.seed,
                n_repeats: a.n_repeats,
                horizon: a.horizon,
                segment: a.segment,
                ..ConfigFile::default()
            };
            importance(&a, &flags.or(file).into())
        }
    }
}

fn finish(mut w: impl Write, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

fn simulate(a: &SimulateArgs) -> Result<()> {
    let spec: SimulationSpec = serde_json::from_reader(io::open(&a.input)?)?;
    let out = io::create(&a.output)?;
    match spec {
        SimulationSpec::Survival(mut s) => {
            s.seed = a.seed.unwrap_or(s.seed);
            io::write_dataset(out, &sample_survival(&s)?, None)
        }
        SimulationSpec::EventLog(mut c) => {
            c.seed = a.seed.unwrap_or(c.seed);
            let mut w = io::EventWriter::new(out)?;
            for (_, events) in event_log_stream(&c)? {
                for e in &events {
                    w.write(e)?;
                }
            }
            w.finish()
        }
    }
}

fn featurize(a: &FeaturizeArgs, s: &Settings) -> Result<()> {
    let events = io::read_events(io::open(&a.input)?)?;
    let last = events
        .iter()
        .map(|e| e.timestamp.date())
        .max()
        .ok_or_else(|| Error::Usage("event log is empty".into()))?;
    let config = FeatureConfig {
        inactivity_days: s.inactivity_days,
        ..FeatureConfig::default()
    };
    let mut rows = extract_all(&events, s.observation_end.unwrap_or(last), &config)?;
    segment_players(&mut rows, s.whale_quantile);
    let out = io::create(&a.output)?;
    io::write_feature_rows(out, &rows, &DEFAULT_FEATURES)
}

fn load_input(path: &Path, segment: Option<Segment>) -> Result<LoadedDataset> {
    let loaded = io::read_dataset_path(path)?;
    match segment {
        Some(s) => loaded.filter_segment(s),
        None => Ok(loaded),
    }
}

/// Selects `expected` from the input's covariates, in that order. Every
/// expected column must be present; others are dropped with a warning.
fn align(loaded: LoadedDataset, expected: &[String]) -> Result<LoadedDataset> {
    let names = loaded.data.feature_names();
    let missing: Vec<&str> = expected
        .iter()
        .filter(|f| !names.contains(f))
        .map(String::as_str)
        .collect();
    if !missing.is_empty() {
        return Err(Error::Schema(format!(
            "input lacks [{}]; model expects [{}], input has [{}]",
            missing.join(","),
            expected.join(","),
            names.join(",")
        )));
    }
    let extra: Vec<&str> = names
        .iter()
        .filter(|n| !expected.contains(n))
        .map(String::as_str)
        .collect();
    if !extra.is_empty() {
        log::warn!("ignoring input columns not used by the model: {}", extra.join(","));
    }
    let order: Vec<usize> = expected
        .iter()
        .map(|f| names.iter().position(|n| n == f).expect("checked above"))
        .collect();
    Ok(LoadedDataset {
        data: loaded.data.select_features(&order)?,
        ..loaded
    })
}

/// The input restricted to `--features` when given.
fn training_input(path: &Path, s: &Settings) -> Result<LoadedDataset> {
    let loaded = load_input(path, s.segment)?;
    match &s.features {
        Some(features) => align(loaded, features),
        None => Ok(loaded),
    }
}

fn fit(a: &FitArgs, s: &Settings) -> Result<()> {
    let loaded = training_input(&a.input, s)?;
    let data = &loaded.data;
    let exec = RayonExecutor::from_env()?;
    let doc = match a.model {
        ModelKind::Km => ModelDocument::Km {
            feature_names: data.feature_names().to_vec(),
            curve: kaplan_meier(data)?,
        },
        ModelKind::Cox => ModelDocument::Cox(fit_cox(data, &CoxConfig::default()).map_err(|e| {
            let constant = constant_columns(data);
            match e {
                survivalkit_core::Error::Collinear if !constant.is_empty() => {
                    Error::Usage(format!("collinear covariates: constant columns {}", constant.join(",")))
                }
                e => e.into(),
            }
        })?),
        ModelKind::Forest => ModelDocument::Forest(fit_forest_with(data, &s.forest_config(), &exec)?),
        ModelKind::BinaryForest => ModelDocument::BinaryForest(fit_binary_forest_with(
            &BinaryDataset::from_survival(data),
            &s.forest_config(),
            &exec,
        )?),
    };
    doc.save(&a.output)
}

fn constant_columns(data: &survivalkit_core::SurvivalDataset) -> Vec<String> {
    let obs = data.observations();
    data.feature_names()
        .iter()
        .enumerate()
        .filter(|(j, _)| obs.iter().all(|o| o.covariates[*j] == obs[0].covariates[*j]))
        .map(|(_, name)| name.clone())
        .collect()
}

fn survival_prediction(doc: &ModelDocument, x: &[f64]) -> Result<SurvivalCurve> {
    Ok(match doc {
        ModelDocument::Km { curve, .. } => curve.clone(),
        ModelDocument::Cox(m) => m.predict_survival(x)?,
        ModelDocument::Forest(f) => f.predict(x)?,
        ModelDocument::BinaryForest(_) => {
            return Err(Error::Usage("a binary forest predicts probabilities, not curves".into()))
        }
    })
}

fn predict(a: &PredictArgs, s: &Settings) -> Result<()> {
    let doc = ModelDocument::load(&a.model)?;
    let loaded = align(load_input(&a.input, s.segment)?, doc.feature_names())?;
    let ids = loaded.row_ids();
    let obs = loaded.data.observations();
    let out = io::create(&a.output)?;

    if let ModelDocument::BinaryForest(f) = &doc {
        let probs = obs.iter().map(|o| f.predict(&o.covariates)).collect::<survivalkit_core::Result<Vec<_>>>()?;
        return io::write_binary_predictions(out, &ids, &probs);
    }
    let horizon = s.horizon.unwrap_or(30.0);
    if !(horizon > 0.0) {
        return Err(Error::Usage("--horizon must be positive".into()));
    }
    if let Some(dir) = &a.curves_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut rows = Vec::with_capacity(obs.len());
    for (id, o) in ids.iter().zip(obs) {
        let curve = survival_prediction(&doc, &o.covariates)?;
        let risk = assess_risk(&curve, horizon);
        let curve_file = match &a.curves_dir {
            Some(dir) => {
                let path = dir.join(format!("{id}.csv"));
                let w = io::create(&path)?;
                io::write_curve(w, &curve)?;
                Some(path.display().to_string())
            }
            None => None,
        };
        rows.push(PredictionRow {
            player_id: id.clone(),
            median_survival: risk.median,
            at_risk: risk.at_risk,
            curve_file,
        });
    }
    io::write_predictions(out, &rows)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut w = io::create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    finish(w, path)
}

fn evaluate(a: &EvaluateArgs, s: &Settings) -> Result<()> {
    let model_path = Path::new(&a.model);
    let mode = a.mode.unwrap_or(if model_path.is_file() { Mode::Holdout } else { Mode::BootstrapCv });
    fs::create_dir_all(&a.output).map_err(|e| Error::io(&a.output, e))?;

    match mode {
        Mode::BootstrapCv => {
            let loaded = training_input(&a.input, s)?;
            let kind = ModelKind::from_str(&a.model, true).map_err(|_| {
                Error::Usage(format!("bootstrap-cv needs a model kind (km, cox, forest), got {:?}", a.model))
            })?;
            let spec = match kind {
                ModelKind::Km => ModelSpec::KaplanMeier,
                ModelKind::Cox => ModelSpec::Cox(CoxConfig::default()),
                ModelKind::Forest => ModelSpec::Forest(s.forest_config()),
                ModelKind::BinaryForest => {
                    return Err(Error::Usage("bootstrap-cv supports km, cox and forest".into()))
                }
            };
            let data = &loaded.data;
            let horizon = s.horizon.unwrap_or_else(|| default_horizon(data));
            let grid = time_grid(horizon, 100);
            let config = BootstrapConfig {
                n_boot: s.n_boot,
                seed: s.seed,
                ..BootstrapConfig::default()
            };
            let exec = RayonExecutor::from_env()?;
            let res = bootstrap_cv_error_with(&spec, data, &config, &grid, &exec)?;
            let calibration = calibration_pairs(&res.held_out_medians(data.len()), data)?;

            io::write_error_curve(io::create(&a.output.join("error_curve.csv"))?, &res.mean)?;
            io::write_calibration(io::create(&a.output.join("calibration.csv"))?, &calibration)?;
            let path = a.output.join("replicate_ibs.csv");
            let mut w = csv::Writer::from_writer(io::create(&path)?);
            w.write_record(["replicate", "ibs"])?;
            for (b, ibs) in res.ibs.iter().enumerate() {
                w.write_record([b.to_string(), ibs.to_string()])?;
            }
            w.flush().map_err(|e| Error::io(&path, e))?;

            let m = res.ibs.len() as f64;
            let mean = res.ibs.iter().sum::<f64>() / m;
            let sd = (res.ibs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0).max(1.0)).sqrt();
            write_json(
                &a.output.join("summary.json"),
                &Summary {
                    model: spec.name(),
                    mode: "bootstrap-cv",
                    ibs: Some(res.mean.ibs),
                    ibs_replicate_mean: Some(mean),
                    ibs_replicate_sd: Some(sd),
                    auc: None,
                    n_boot: s.n_boot,
                    horizon: Some(horizon),
                    truncated: res.mean.truncated,
                    n: data.len(),
                    n_calibration_pairs: calibration.rows.len(),
                    config: s,
                },
            )
        }
        Mode::Holdout => {
            let doc = ModelDocument::load(model_path)?;
            let loaded = align(load_input(&a.input, s.segment)?, doc.feature_names())?;
            let data = &loaded.data;
            let obs = data.observations();
            if let ModelDocument::BinaryForest(f) = &doc {
                let scores = obs.iter().map(|o| f.predict(&o.covariates)).collect::<survivalkit_core::Result<Vec<_>>>()?;
                let labels: Vec<bool> = obs.iter().map(|o| o.event).collect();
                return write_json(
                    &a.output.join("summary.json"),
                    &Summary {
                        model: doc.kind(),
                        mode: "holdout",
                        ibs: None,
                        ibs_replicate_mean: None,
                        ibs_replicate_sd: None,
                        auc: Some(roc_auc(&scores, &labels)?),
                        n_boot: 0,
                        horizon: None,
                        truncated: false,
                        n: data.len(),
                        n_calibration_pairs: 0,
                        config: s,
                    },
                );
            }
            let curves = obs
                .iter()
                .map(|o| survival_prediction(&doc, &o.covariates))
                .collect::<Result<Vec<_>>>()?;
            let horizon = s.horizon.unwrap_or_else(|| default_horizon(data));
            let error = brier_curve(&curves, data, &time_grid(horizon, 100))?;
            let medians: Vec<Option<f64>> = curves.iter().map(median_survival).collect();
            let calibration = calibration_pairs(&medians, data)?;
            io::write_error_curve(io::create(&a.output.join("error_curve.csv"))?, &error)?;
            io::write_calibration(io::create(&a.output.join("calibration.csv"))?, &calibration)?;
            write_json(
                &a.output.join("summary.json"),
                &Summary {
                    model: doc.kind(),
                    mode: "holdout",
                    ibs: Some(error.ibs),
                    ibs_replicate_mean: None,
                    ibs_replicate_sd: None,
                    auc: None,
                    n_boot: 0,
                    horizon: Some(horizon),
                    truncated: error.truncated,
                    n: data.len(),
                    n_calibration_pairs: calibration.rows.len(),
                    config: s,
                },
            )
        }
    }
}

fn importance(a: &ImportanceArgs, s: &Settings) -> Result<()> {
    let doc = ModelDocument::load(&a.model)?;
    let ModelDocument::Forest(forest) = &doc else {
        return Err(Error::Usage(format!("importance needs a forest model, got {}", doc.kind())));
    };
    let loaded = align(load_input(&a.input, s.segment)?, &forest.feature_names)?;
    let config = ImportanceConfig {
        n_repeats: s.n_repeats,
        seed: s.seed,
        horizon: s.horizon,
        ..ImportanceConfig::default()
    };
    let report = variable_importance(forest, &loaded.data, &config)?;
    io::write_importance(io::create(&a.output)?, &report)
}
