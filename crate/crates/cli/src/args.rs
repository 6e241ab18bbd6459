//! Command-line flags. Every override mirrors a config field, kebab-cased.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use qglime_core::dataset::CaseId;
use qglime_core::hsic::SurrogateKind;
use qglime_core::perturb::{ElementKind, Strategy};
use qglime_core::sim::{GradientMethod, Measurement};

use crate::config::{Axis, MeasurementRegime, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "qglime", version, about = "Train, explain and evaluate quantum graph classifiers")]
pub struct Cli {
    /// Worker threads; never changes outputs.
    #[arg(long, global = true, env = "QGLIME_JOBS")]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a benchmark dataset.
    GenData {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = parse_case)]
        case: Option<CaseId>,
    },
    /// Train the classifier on a dataset.
    Train {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Explain every test graph with a surrogate ensemble.
    Explain {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        ensemble: EnsembleArgs,
        /// Also write each surrogate's masks and outputs.
        #[arg(long)]
        dump_perturbations: bool,
    },
    /// Score explanations (and optionally the random baseline).
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        inputs: Inputs,
        /// Directory of explanation files written by `explain`.
        #[arg(long)]
        explanations: Option<PathBuf>,
        #[arg(long)]
        random_explainer: bool,
        /// Row label for the explanations; defaults to their surrogate kind.
        #[arg(long)]
        method: Option<String>,
        #[command(flatten)]
        metrics: MetricArgs,
        #[arg(long)]
        shots: Option<u32>,
        #[arg(long, conflicts_with = "shots")]
        exact: bool,
    },
    /// Minimum ensemble size for a DKW guarantee.
    Plan {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        graphs: Option<u64>,
        #[arg(long)]
        stats: Option<u64>,
    },
    /// Sweep perturbation, surrogate, measurement and penalty settings.
    Ablate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        ensemble: EnsembleArgs,
        #[command(flatten)]
        metrics: MetricArgs,
        #[arg(long, value_delimiter = ',')]
        axes: Option<Vec<Axis>>,
        #[arg(long, value_delimiter = ',')]
        strategies: Option<Vec<StrategyArg>>,
        #[arg(long, value_delimiter = ',')]
        surrogates: Option<Vec<SurrogateArg>>,
        #[arg(long, value_delimiter = ',')]
        measurements: Option<Vec<MeasurementRegime>>,
        #[arg(long, value_delimiter = ',')]
        lambdas: Option<Vec<f64>>,
    },
    /// Per-element label-flip probabilities under single removals.
    FlipTest {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        ensemble: EnsembleArgs,
    },
}

#[derive(Args, Debug)]
pub struct Common {
    /// JSON config or a previous run's manifest.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct Inputs {
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub max_graphs: Option<usize>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub num_layers: Option<usize>,
    #[arg(long)]
    pub gradient: Option<GradientArg>,
    /// Train on sampled rather than exact marginals.
    #[arg(long)]
    pub train_shots: Option<u32>,
}

#[derive(Args, Debug)]
pub struct EnsembleArgs {
    #[arg(long)]
    pub num_surrogates: Option<usize>,
    #[arg(long)]
    pub surrogate: Option<SurrogateArg>,
    #[arg(long)]
    pub perturb: Option<StrategyArg>,
    #[arg(long)]
    pub element_kind: Option<ElementArg>,
    #[arg(long)]
    pub num_perturbations: Option<usize>,
    #[arg(long)]
    pub removal_count: Option<usize>,
    #[arg(long)]
    pub walk_length: Option<usize>,
    #[arg(long)]
    pub exhaustive: bool,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub shots: Option<u32>,
    #[arg(long, conflicts_with = "shots")]
    pub exact: bool,
    #[arg(long)]
    pub flip_trials: Option<usize>,
    #[arg(long)]
    pub indecision_eps: Option<f64>,
    #[arg(long)]
    pub shared_perturbations: bool,
    #[arg(long, value_delimiter = ',')]
    pub tip_ks: Option<Vec<usize>>,
}

#[derive(Args, Debug)]
pub struct MetricArgs {
    #[arg(long)]
    pub metric_k: Option<usize>,
    #[arg(long)]
    pub fidelity_trials: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub one_ks: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub both_ks: Option<Vec<usize>>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum SurrogateArg {
    HsicL1,
    HsicGroup,
    Logistic,
}

impl From<SurrogateArg> for SurrogateKind {
    fn from(a: SurrogateArg) -> Self {
        match a {
            SurrogateArg::HsicL1 => SurrogateKind::HsicL1,
            SurrogateArg::HsicGroup => SurrogateKind::HsicGroup,
            SurrogateArg::Logistic => SurrogateKind::Logistic,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum StrategyArg {
    RandomNode,
    RandomWalk,
}

impl From<StrategyArg> for Strategy {
    fn from(a: StrategyArg) -> Self {
        match a {
            StrategyArg::RandomNode => Strategy::RandomNode,
            StrategyArg::RandomWalk => Strategy::RandomWalk,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ElementArg {
    Nodes,
    Edges,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum GradientArg {
    Adjoint,
    ParameterShift,
}

fn parse_case(s: &str) -> Result<CaseId, String> {
    s.parse().map_err(|e: qglime_core::Error| e.to_string())
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl Common {
    pub fn apply(&self, cfg: &mut RunConfig) {
        set(&mut cfg.seed, self.seed);
        set(&mut cfg.out, self.out.clone());
    }
}

impl Inputs {
    pub fn apply(&self, cfg: &mut RunConfig) {
        if self.dataset.is_some() {
            cfg.dataset = self.dataset.clone();
        }
        if self.checkpoint.is_some() {
            cfg.checkpoint = self.checkpoint.clone();
        }
        if self.max_graphs.is_some() {
            cfg.max_graphs = self.max_graphs;
        }
    }
}

impl TrainArgs {
    pub fn apply(&self, cfg: &mut RunConfig) {
        let t = &mut cfg.train;
        set(&mut t.epochs, self.epochs);
        set(&mut t.learning_rate, self.learning_rate);
        set(&mut t.batch_size, self.batch_size);
        set(&mut t.num_layers, self.num_layers);
        set(
            &mut t.gradient,
            self.gradient.map(|g| match g {
                GradientArg::Adjoint => GradientMethod::Adjoint,
                GradientArg::ParameterShift => GradientMethod::ParameterShift,
            }),
        );
        set(&mut t.measurement, self.train_shots.map(Measurement::Shots));
    }
}

pub fn measurement(shots: Option<u32>, exact: bool) -> Option<Measurement> {
    if exact {
        Some(Measurement::Exact)
    } else {
        shots.map(Measurement::Shots)
    }
}

impl EnsembleArgs {
    pub fn apply(&self, cfg: &mut RunConfig) {
        let e = &mut cfg.ensemble;
        set(&mut e.num_surrogates, self.num_surrogates);
        set(&mut e.surrogate, self.surrogate.map(Into::into));
        set(&mut e.perturb.strategy, self.perturb.map(Into::into));
        set(
            &mut e.perturb.element_kind,
            self.element_kind.map(|k| match k {
                ElementArg::Nodes => ElementKind::Nodes,
                ElementArg::Edges => ElementKind::Edges,
            }),
        );
        set(&mut e.perturb.num_perturbations, self.num_perturbations);
        set(&mut e.perturb.removal_count, self.removal_count);
        set(&mut e.perturb.walk_length, self.walk_length);
        e.perturb.exhaustive |= self.exhaustive;
        set(&mut e.lambda, self.lambda);
        if let Some(m) = measurement(self.shots, self.exact) {
            e.measurement = m;
            cfg.metrics.measurement = m;
        }
        set(&mut e.flip_trials, self.flip_trials);
        set(&mut e.indecision_eps, self.indecision_eps);
        e.shared_perturbations |= self.shared_perturbations;
        set(&mut e.tip_ks, self.tip_ks.clone());
    }
}

impl MetricArgs {
    pub fn apply(&self, cfg: &mut RunConfig) {
        if self.metric_k.is_some() {
            cfg.metric_k = self.metric_k;
        }
        set(&mut cfg.metrics.fidelity_trials, self.fidelity_trials);
        set(&mut cfg.metrics.one_ks, self.one_ks.clone());
        set(&mut cfg.metrics.both_ks, self.both_ks.clone());
    }
}
