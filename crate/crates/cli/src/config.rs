//! Resolved run configuration and the manifest written next to every output.

use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};

use qglime_core::dataset::CaseId;
use qglime_core::ensemble::EnsembleConfig;
use qglime_core::hsic::SurrogateKind;
use qglime_core::metrics::MetricsConfig;
use qglime_core::perturb::Strategy;
use qglime_core::train::TrainConfig;

use crate::exit::usage;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlanConfig {
    pub eps: f64,
    pub delta: f64,
    pub graphs: u64,
    pub stats: u64,
}

impl Default for PlanConfig {
    fn default() -> Self {
        Self { eps: 0.1, delta: 0.05, graphs: 1, stats: 1 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Perturbation,
    Surrogate,
    Measurement,
    Lambda,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum MeasurementRegime {
    /// One surrogate, one measurement pass per perturbation.
    SingleShot,
    /// The configured ensemble.
    MultiShot,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationConfig {
    pub axes: Vec<Axis>,
    pub strategies: Vec<Strategy>,
    pub surrogates: Vec<SurrogateKind>,
    pub measurements: Vec<MeasurementRegime>,
    pub lambdas: Vec<f64>,
}

impl Default for AblationConfig {
    fn default() -> Self {
        Self {
            axes: vec![Axis::Perturbation, Axis::Surrogate, Axis::Measurement, Axis::Lambda],
            strategies: vec![Strategy::RandomNode, Strategy::RandomWalk],
            surrogates: vec![SurrogateKind::HsicL1, SurrogateKind::HsicGroup, SurrogateKind::Logistic],
            measurements: vec![MeasurementRegime::SingleShot, MeasurementRegime::MultiShot],
            lambdas: vec![1.0, 1e-1, 1e-2, 1e-3, 1e-4],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub case: CaseId,
    /// Root of every random stream.
    pub seed: u64,
    pub dataset: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub explanations: Option<PathBuf>,
    pub out: PathBuf,
    /// Only the first `max_graphs` test graphs are explained or evaluated.
    pub max_graphs: Option<usize>,
    pub dump_perturbations: bool,
    pub random_explainer: bool,
    pub method: Option<String>,
    /// Top-k used by fidelity and consensus; defaults to the case's target count.
    pub metric_k: Option<usize>,
    pub train: TrainConfig,
    pub ensemble: EnsembleConfig,
    pub metrics: MetricsConfig,
    pub plan: PlanConfig,
    pub ablation: AblationConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            case: CaseId::Case1,
            seed: 0,
            dataset: None,
            checkpoint: None,
            explanations: None,
            out: PathBuf::from("out"),
            max_graphs: None,
            dump_perturbations: false,
            random_explainer: false,
            method: None,
            metric_k: None,
            train: TrainConfig::default(),
            ensemble: EnsembleConfig::default(),
            metrics: MetricsConfig::default(),
            plan: PlanConfig::default(),
            ablation: AblationConfig::default(),
        }
    }
}

impl RunConfig {
    /// Reads a config file; a manifest is accepted and its `config` used.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| usage(format!("config {}: {e}", path.display())))?;
        let config = match (value.get("command"), value.get("config")) {
            (Some(_), Some(inner)) => inner.clone(),
            _ => value,
        };
        serde_json::from_value(config).map_err(|e| usage(format!("config {}: {e}", path.display())))
    }

    /// Pushes the root seed into every stage and fills case-dependent defaults.
    pub fn resolve(&mut self) {
        self.train.seed = self.seed;
        self.ensemble.seed = self.seed;
        self.metrics.seed = self.seed;
        let k = *self.metric_k.get_or_insert(self.case.default_k());
        self.metrics.fidelity_k = k;
        self.metrics.consensus_k = k;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub config: RunConfig,
}

impl Manifest {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        Self { command: command.to_string(), version: env!("CARGO_PKG_VERSION").to_string(), config: config.clone() }
    }
}
