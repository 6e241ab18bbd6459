//! Surrogate ensembles: many local surrogates, each fit on its own
//! perturbations and measurement draws, summarized into uncertainty-aware
//! attributions.

mod aggregate;
mod dkw;

pub use aggregate::{column_means, indecision_fraction, iqr_ci, percentile, tip, top_k};
pub use dkw::{ecdf_sup_deviation, plan_dkw, plan_dkw_simultaneous, DkwPlan};

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::hsic::{
    build_groups, fit_hsic_group, fit_hsic_l1, fit_logistic, KernelConfig, SolverConfig, SurrogateFit, SurrogateKind,
};
use crate::perturb::{self, element_count, evaluate_row, evaluate_with_cache, ElementKind, PerturbConfig, PerturbationSet, StateCache};
use crate::seed::{self, stream};
use crate::sim::{EduQgcModel, Measurement};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnsembleConfig {
    pub num_surrogates: usize,
    pub surrogate: SurrogateKind,
    pub perturb: PerturbConfig,
    pub lambda: f64,
    pub measurement: Measurement,
    pub kernel: KernelConfig,
    pub solver: SolverConfig,
    pub indecision_eps: f64,
    /// Every surrogate reuses the same perturbation rows; only measurement
    /// draws differ.
    pub shared_perturbations: bool,
    pub flip_trials: usize,
    pub tip_ks: Vec<usize>,
    pub seed: u64,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            num_surrogates: 30,
            surrogate: SurrogateKind::HsicL1,
            perturb: PerturbConfig::default(),
            lambda: 1e-2,
            measurement: Measurement::Shots(2000),
            kernel: KernelConfig::default(),
            solver: SolverConfig::default(),
            indecision_eps: 0.1,
            shared_perturbations: false,
            flip_trials: 50,
            tip_ks: vec![1, 3],
            seed: 0,
        }
    }
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_surrogates == 0 {
            return Err(Error::Config("at least one surrogate is required".into()));
        }
        if !(self.lambda > 0.0) {
            return Err(Error::Config(format!("penalty must be positive, got {}", self.lambda)));
        }
        if let Measurement::Shots(0) = self.measurement {
            return Err(Error::Config("shots must be at least 1".into()));
        }
        if !(self.indecision_eps >= 0.0) {
            return Err(Error::Config(format!("indecision width must be non-negative, got {}", self.indecision_eps)));
        }
        Ok(())
    }
}

/// One surrogate's training data plus its own draw of the base graph's
/// class probability.
#[derive(Clone, Debug, PartialEq)]
pub struct SurrogateSample {
    pub perturbations: PerturbationSet,
    pub base_prediction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleExplanation {
    pub graph_id: u64,
    pub m: usize,
    pub scores: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    pub tip_k: BTreeMap<String, Vec<f64>>,
    pub iqr: Vec<f64>,
    pub ci90: Vec<[f64; 2]>,
    pub flip: Vec<f64>,
    pub indecision: f64,
    pub nonconverged_rows: Vec<usize>,
    pub base_predictions: Vec<f64>,
    pub element_kind: ElementKind,
    pub surrogate: SurrogateKind,
}

impl EnsembleExplanation {
    #[allow(clippy::too_many_arguments)]
    pub fn from_scores(
        graph_id: u64,
        element_kind: ElementKind,
        surrogate: SurrogateKind,
        scores: Vec<Vec<f64>>,
        flip: Vec<f64>,
        base_predictions: Vec<f64>,
        indecision_eps: f64,
        tip_ks: &[usize],
        nonconverged_rows: Vec<usize>,
    ) -> Result<Self> {
        let n = scores.first().map_or(0, Vec::len);
        if scores.is_empty() || scores.iter().any(|r| r.len() != n) {
            return Err(Error::Dimension("score matrix must be non-empty and rectangular".into()));
        }
        let mut tip_k = BTreeMap::new();
        for &k in tip_ks.iter().filter(|&&k| k >= 1 && k <= n) {
            tip_k.insert(k.to_string(), tip(&scores, k)?);
        }
        let (iqr, ci90) = iqr_ci(&scores);
        Ok(Self {
            graph_id,
            m: scores.len(),
            mean: column_means(&scores),
            indecision: indecision_fraction(&base_predictions, indecision_eps),
            scores,
            tip_k,
            iqr,
            ci90,
            flip,
            nonconverged_rows,
            base_predictions,
            element_kind,
            surrogate,
        })
    }

    pub fn num_elements(&self) -> usize {
        self.mean.len()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

fn graph_root(config: &EnsembleConfig, g: &Graph) -> u64 {
    seed::derive(config.seed, g.id)
}

fn surrogate_root(root: u64, i: usize) -> u64 {
    seed::derive2(root, stream::SURROGATE, i as u64)
}

/// Perturbs and measures the graph once per surrogate. Perturbation and
/// measurement seeds derive from `(seed, graph id, surrogate index)`.
pub fn sample_ensemble(g: &Graph, model: &EduQgcModel, config: &EnsembleConfig) -> Result<Vec<SurrogateSample>> {
    config.validate()?;
    let root = graph_root(config, g);
    let kind = config.perturb.element_kind;
    let sets = (0..config.num_surrogates)
        .map(|i| {
            let pseed = if config.shared_perturbations {
                seed::derive(root, stream::PERTURB)
            } else {
                seed::derive(surrogate_root(root, i), stream::PERTURB)
            };
            perturb::perturb(g, &config.perturb, pseed)
        })
        .collect::<Result<Vec<_>>>()?;
    let base_row = vec![1u8; element_count(g, kind)];
    let mut cache = StateCache::default();
    cache.warm(
        model,
        g,
        kind,
        sets.iter().flat_map(|s| s.z.iter().map(Vec::as_slice)).chain(std::iter::once(base_row.as_slice())),
    )?;
    sets.into_par_iter()
        .enumerate()
        .map(|(i, mut pset)| {
            let sroot = surrogate_root(root, i);
            evaluate_with_cache(&mut pset, model, config.measurement, seed::derive(sroot, stream::MEASURE), &cache)?;
            let base_prediction = evaluate_row(
                &cache,
                model,
                g,
                kind,
                &base_row,
                config.measurement,
                seed::derive(sroot, stream::BASE_MEASURE),
            )?;
            Ok(SurrogateSample { perturbations: pset, base_prediction })
        })
        .collect()
}

pub fn fit_surrogate(g: &Graph, sample: &SurrogateSample, config: &EnsembleConfig) -> Result<SurrogateFit> {
    let p = &sample.perturbations;
    match config.surrogate {
        SurrogateKind::HsicL1 => fit_hsic_l1(&p.z, &p.outputs, config.lambda, &config.kernel, &config.solver),
        SurrogateKind::HsicGroup => {
            let groups = build_groups(g, p.element_kind);
            fit_hsic_group(&p.z, &p.outputs, config.lambda, &groups, &config.kernel, &config.solver)
        }
        SurrogateKind::Logistic => fit_logistic(&p.z, &p.outputs, &config.solver),
    }
}

/// Fits one surrogate per sample (in parallel) and aggregates. `flip` is
/// passed through so several surrogate settings can share one flip pass.
pub fn explain_from_samples(
    g: &Graph,
    samples: &[SurrogateSample],
    config: &EnsembleConfig,
    flip: Vec<f64>,
) -> Result<EnsembleExplanation> {
    config.validate()?;
    if samples.is_empty() {
        return Err(Error::Config("no surrogate samples".into()));
    }
    let fits = samples.par_iter().map(|s| fit_surrogate(g, s, config)).collect::<Result<Vec<_>>>()?;
    let nonconverged = fits.iter().enumerate().filter(|(_, f)| !f.converged).map(|(i, _)| i).collect();
    EnsembleExplanation::from_scores(
        g.id,
        samples[0].perturbations.element_kind,
        config.surrogate,
        fits.into_iter().map(|f| f.alpha).collect(),
        flip,
        samples.iter().map(|s| s.base_prediction).collect(),
        config.indecision_eps,
        &config.tip_ks,
        nonconverged,
    )
}

pub fn explain(g: &Graph, model: &EduQgcModel, config: &EnsembleConfig) -> Result<EnsembleExplanation> {
    let samples = sample_ensemble(g, model, config)?;
    let flip = flip_probabilities(g, model, config)?;
    explain_from_samples(g, &samples, config, flip)
}

fn single_removal(g: &Graph, kind: ElementKind, element: usize) -> Result<Vec<u8>> {
    let n = element_count(g, kind);
    if element >= n {
        return Err(Error::InvalidElement { index: element, count: n });
    }
    if kind == ElementKind::Nodes && n == 1 {
        return Err(Error::EmptyGraph { nodes: 1, removed: 1 });
    }
    let mut row = vec![1u8; n];
    row[element] = 0;
    Ok(row)
}

#[allow(clippy::too_many_arguments)]
fn flip_from_cache(
    cache: &StateCache,
    g: &Graph,
    model: &EduQgcModel,
    kind: ElementKind,
    element: usize,
    trials: usize,
    measurement: Measurement,
    seed: u64,
) -> Result<f64> {
    let row = single_removal(g, kind, element)?;
    if trials == 0 {
        return Ok(0.0);
    }
    let baseline = model.forward_exact(g)?.label();
    let mut flips = 0;
    for t in 0..trials {
        let p = evaluate_row(cache, model, g, kind, &row, measurement, seed::derive(seed, t as u64))?;
        if u8::from(p >= 0.5) != baseline {
            flips += 1;
        }
    }
    Ok(flips as f64 / trials as f64)
}

/// Fraction of `trials` measurement draws in which removing `element`
/// changes the label relative to the exact label of the intact graph.
pub fn flip_probability(
    g: &Graph,
    model: &EduQgcModel,
    kind: ElementKind,
    element: usize,
    trials: usize,
    measurement: Measurement,
    seed: u64,
) -> Result<f64> {
    flip_from_cache(&StateCache::default(), g, model, kind, element, trials, measurement, seed)
}

/// Flip probability of every element, seeded per graph and element.
pub fn flip_probabilities(g: &Graph, model: &EduQgcModel, config: &EnsembleConfig) -> Result<Vec<f64>> {
    let kind = config.perturb.element_kind;
    let n = element_count(g, kind);
    if kind == ElementKind::Nodes && n == 1 {
        return Ok(vec![0.0]);
    }
    let rows = (0..n).map(|e| single_removal(g, kind, e)).collect::<Result<Vec<_>>>()?;
    let mut cache = StateCache::default();
    cache.warm(model, g, kind, rows.iter().map(Vec::as_slice))?;
    let root = graph_root(config, g);
    (0..n)
        .into_par_iter()
        .map(|e| {
            let s = seed::derive2(root, stream::FLIP, e as u64);
            flip_from_cache(&cache, g, model, kind, e, config.flip_trials, config.measurement, s)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::make_wheel;

    fn small_config(m: usize) -> EnsembleConfig {
        EnsembleConfig {
            num_surrogates: m,
            perturb: PerturbConfig { num_perturbations: 24, ..PerturbConfig::default() },
            measurement: Measurement::Shots(300),
            flip_trials: 5,
            seed: 4,
            ..EnsembleConfig::default()
        }
    }

    #[test]
    fn single_surrogate_collapses() {
        let g = make_wheel(6, 2, 1).unwrap();
        let model = EduQgcModel::init(2, 3);
        let e = explain(&g, &model, &small_config(1)).unwrap();
        assert_eq!(e.m, 1);
        assert_eq!(e.mean, e.scores[0]);
        assert!(e.iqr.iter().all(|&v| v == 0.0));
        assert!(e.tip_k["1"].iter().all(|&t| t == 0.0 || t == 1.0));
        assert_eq!(e.tip_k["1"].iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn exact_shared_perturbations_give_identical_rows() {
        let g = make_wheel(6, 0, 2).unwrap();
        let model = EduQgcModel::init(2, 5);
        let cfg = EnsembleConfig { shared_perturbations: true, measurement: Measurement::Exact, ..small_config(5) };
        let e = explain(&g, &model, &cfg).unwrap();
        assert!(e.scores.iter().all(|r| r == &e.scores[0]));
        assert!(e.iqr.iter().all(|&v| v == 0.0));
        assert!(e.base_predictions.iter().all(|&p| p == e.base_predictions[0]));
    }

    #[test]
    fn explanations_are_deterministic_and_round_trip() {
        let g = make_wheel(5, 1, 3).unwrap().with_id(12);
        let model = EduQgcModel::init(2, 7);
        let cfg = small_config(4);
        let a = explain(&g, &model, &cfg).unwrap();
        let b = explain(&g, &model, &cfg).unwrap();
        assert_eq!(a, b);
        let text = a.to_json().unwrap();
        assert!(text.starts_with(r#"{"graph_id":12,"m":4,"scores":[["#));
        let back = EnsembleExplanation::from_json(&text).unwrap();
        let recomputed = column_means(&back.scores);
        for (x, y) in recomputed.iter().zip(&a.mean) {
            assert!((x - y).abs() <= 1e-12);
        }
        assert_eq!(back, a);
        // surrogates differ once measurement and perturbations are resampled
        assert!(a.scores.iter().any(|r| r != &a.scores[0]));
    }

    #[test]
    fn every_surrogate_kind_runs() {
        let g = make_wheel(5, 0, 3).unwrap();
        let model = EduQgcModel::init(2, 7);
        let samples = sample_ensemble(&g, &model, &small_config(3)).unwrap();
        for kind in [SurrogateKind::HsicL1, SurrogateKind::HsicGroup, SurrogateKind::Logistic] {
            let cfg = EnsembleConfig { surrogate: kind, ..small_config(3) };
            let e = explain_from_samples(&g, &samples, &cfg, vec![]).unwrap();
            assert_eq!(e.surrogate, kind);
            assert!(e.scores.iter().flatten().all(|&a| a >= 0.0));
        }
    }

    #[test]
    fn exact_flip_is_zero_or_one() {
        let g = make_wheel(5, 0, 3).unwrap();
        let model = EduQgcModel::init(2, 7);
        let base = model.forward_exact(&g).unwrap().label();
        for v in 0..6 {
            let f = flip_probability(&g, &model, ElementKind::Nodes, v, 7, Measurement::Exact, 0).unwrap();
            let removed = model.forward_exact(&g.remove_nodes(&[v]).unwrap()).unwrap().label();
            assert_eq!(f, if removed == base { 0.0 } else { 1.0 });
        }
        assert!(flip_probability(&g, &model, ElementKind::Nodes, 6, 7, Measurement::Exact, 0).is_err());
    }

    #[test]
    fn invalid_config_is_rejected() {
        let g = make_wheel(5, 0, 3).unwrap();
        let model = EduQgcModel::init(2, 7);
        assert!(explain(&g, &model, &small_config(0)).is_err());
        let cfg = EnsembleConfig { lambda: 0.0, ..small_config(2) };
        assert!(explain(&g, &model, &cfg).is_err());
    }
}
