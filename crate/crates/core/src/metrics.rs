//! Dataset-level explanation metrics and the random-explainer baseline.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::{tip, top_k, EnsembleExplanation};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::perturb::ElementKind;
use crate::seed::{self, stream};
use crate::sim::{EduQgcModel, GraphCircuit, Measurement, OutcomeSampler};

/// Attribution of one graph: mean scores and, for ensembles, the full
/// surrogate-by-element matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Attribution {
    pub graph_id: u64,
    pub element_kind: ElementKind,
    pub mean: Vec<f64>,
    pub scores: Option<Vec<Vec<f64>>>,
}

impl From<&EnsembleExplanation> for Attribution {
    fn from(e: &EnsembleExplanation) -> Self {
        Self { graph_id: e.graph_id, element_kind: e.element_kind, mean: e.mean.clone(), scores: Some(e.scores.clone()) }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TopKVariant {
    /// Any target among the top `k`.
    One(usize),
    /// Every target among the top `k` (needs at least two targets).
    Both(usize),
}

impl TopKVariant {
    pub fn name(self) -> String {
        match self {
            TopKVariant::One(k) => format!("one@{k}"),
            TopKVariant::Both(k) => format!("both@{k}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

/// Population mean and standard deviation; NaN for an empty slice.
pub fn mean_std(values: &[f64]) -> MeanStd {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    MeanStd { mean, std: var.sqrt() }
}

fn node_targets(g: &Graph, kind: ElementKind) -> Result<&[usize]> {
    if kind != ElementKind::Nodes {
        return Err(Error::Targets("target metrics need node attributions".into()));
    }
    if g.targets().is_empty() {
        return Err(Error::Targets(format!("graph {} has no targets", g.id)));
    }
    Ok(g.targets())
}

/// 1 when the variant's condition holds for this graph's mean scores.
pub fn topk_hit(mean: &[f64], g: &Graph, kind: ElementKind, variant: TopKVariant) -> Result<f64> {
    let targets = node_targets(g, kind)?;
    let hit = match variant {
        TopKVariant::One(k) => {
            let top = top_k(mean, k);
            targets.iter().any(|t| top.contains(t))
        }
        TopKVariant::Both(k) => {
            if targets.len() < 2 {
                return Err(Error::Targets(format!("both@{k} needs two targets, graph {} has one", g.id)));
            }
            let top = top_k(mean, k);
            targets.iter().all(|t| top.contains(t))
        }
    };
    Ok(f64::from(u8::from(hit)))
}

pub fn topk_accuracy(items: &[(&Attribution, &Graph)], variant: TopKVariant) -> Result<MeanStd> {
    let hits = items.iter().map(|(a, g)| topk_hit(&a.mean, g, a.element_kind, variant)).collect::<Result<Vec<_>>>()?;
    Ok(mean_std(&hits))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FidelityMode {
    /// Keep only the top `k` elements.
    Plus,
    /// Remove the top `k` elements.
    Minus,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidelityScore {
    /// Fraction of stochastic evaluations whose label matches the exact
    /// label of the intact graph.
    pub agreement: f64,
    /// `1 − |p_intact − mean p_intervened|`.
    pub probability_agreement: f64,
}

/// `None` when the intervention would leave no nodes.
#[allow(clippy::too_many_arguments)]
pub fn fidelity_graph(
    g: &Graph,
    mean: &[f64],
    kind: ElementKind,
    model: &EduQgcModel,
    k: usize,
    mode: FidelityMode,
    measurement: Measurement,
    trials: usize,
    seed: u64,
) -> Result<Option<FidelityScore>> {
    let n = mean.len();
    let top = top_k(mean, k.min(n));
    let removed: Vec<usize> = match mode {
        FidelityMode::Minus => top,
        FidelityMode::Plus => (0..n).filter(|i| !top.contains(i)).collect(),
    };
    let intervened = match kind {
        ElementKind::Nodes => {
            if removed.len() >= g.num_nodes() {
                return Ok(None);
            }
            g.remove_nodes(&removed)?
        }
        ElementKind::Edges => g.remove_edges(&removed)?,
    };
    let base = model.forward_exact(g)?;
    let state = GraphCircuit::new(&intervened)?.final_state(&model.params);
    let probs: Vec<f64> = match measurement {
        Measurement::Exact => vec![model.readout.probability(&state.marginals()); trials.max(1)],
        Measurement::Shots(0) => return Err(Error::Config("shots must be at least 1".into())),
        Measurement::Shots(s) => {
            let sampler = OutcomeSampler::new(&state);
            (0..trials.max(1))
                .map(|t| model.forward_sampled(&sampler, s, seed::derive(seed, t as u64)).class_probability)
                .collect()
        }
    };
    let agree = probs.iter().filter(|&&p| u8::from(p >= 0.5) == base.label()).count() as f64 / probs.len() as f64;
    let mean_p = probs.iter().sum::<f64>() / probs.len() as f64;
    Ok(Some(FidelityScore { agreement: agree, probability_agreement: 1.0 - (base.class_probability - mean_p).abs() }))
}

/// `1 − |{i : s_i ≥ 0.1·max s}| / N`; all-zero scores give 0.
pub fn sparsity(mean: &[f64]) -> f64 {
    if mean.is_empty() {
        return 0.0;
    }
    let max = mean.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let kept = mean.iter().filter(|&&s| s >= 0.1 * max).count();
    1.0 - kept as f64 / mean.len() as f64
}

/// Mean over targets of their top-`k` inclusion probability.
pub fn consensus_graph(scores: &[Vec<f64>], targets: &[usize], k: usize) -> Result<f64> {
    if targets.is_empty() {
        return Err(Error::Targets("consensus needs at least one target".into()));
    }
    let n = scores.first().map_or(0, Vec::len);
    let t = tip(scores, k.min(n))?;
    Ok(targets.iter().map(|&i| t[i]).sum::<f64>() / targets.len() as f64)
}

pub fn consensus(items: &[(&Attribution, &Graph)], k: usize) -> Result<f64> {
    let per = items
        .iter()
        .map(|(a, g)| {
            let scores = a.scores.as_ref().ok_or_else(|| Error::Config("consensus needs a score matrix".into()))?;
            consensus_graph(scores, node_targets(g, a.element_kind)?, k)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per.iter().sum::<f64>() / per.len() as f64)
}

/// Mean target score over mean non-target score; `+∞` when every
/// non-target scores zero.
pub fn relative_importance(mean: &[f64], targets: &[usize]) -> Result<f64> {
    let non: Vec<f64> = (0..mean.len()).filter(|i| !targets.contains(i)).map(|i| mean[i]).collect();
    if targets.is_empty() || non.is_empty() {
        return Err(Error::Targets("relative importance needs targets and non-targets".into()));
    }
    let t = targets.iter().map(|&i| mean[i]).sum::<f64>() / targets.len() as f64;
    let u = non.iter().sum::<f64>() / non.len() as f64;
    Ok(if u > 0.0 { t / u } else { f64::INFINITY })
}

/// I.i.d. Uniform(0, 1) node scores, seeded per graph.
pub fn random_explainer(g: &Graph, seed: u64) -> Attribution {
    let mut rng = seed::rng(seed::derive2(seed, stream::RANDOM_EXPLAINER, g.id));
    Attribution {
        graph_id: g.id,
        element_kind: ElementKind::Nodes,
        mean: (0..g.num_nodes()).map(|_| rng.random::<f64>()).collect(),
        scores: None,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricsConfig {
    pub one_ks: Vec<usize>,
    pub both_ks: Vec<usize>,
    pub fidelity_k: usize,
    pub consensus_k: usize,
    pub fidelity_trials: usize,
    pub measurement: Measurement,
    pub seed: u64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            one_ks: vec![1, 3, 2, 6],
            both_ks: vec![2, 6],
            fidelity_k: 1,
            consensus_k: 1,
            fidelity_trials: 20,
            measurement: Measurement::Shots(2000),
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphMetrics {
    pub graph_id: u64,
    pub topk: BTreeMap<String, f64>,
    pub fid_minus: Option<FidelityScore>,
    pub fid_plus: Option<FidelityScore>,
    pub sparsity: f64,
    pub consensus: Option<f64>,
    pub relative_importance: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub metric: String,
    pub mean: f64,
    pub std: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: String,
    pub rows: Vec<MetricRow>,
    pub per_graph: Vec<GraphMetrics>,
}

impl MethodReport {
    pub fn get(&self, metric: &str) -> Option<&MetricRow> {
        self.rows.iter().find(|r| r.metric == metric)
    }
}

fn graph_metrics(a: &Attribution, g: &Graph, model: &EduQgcModel, cfg: &MetricsConfig) -> Result<GraphMetrics> {
    let targets = node_targets(g, a.element_kind)?;
    let mut topk = BTreeMap::new();
    for &k in &cfg.one_ks {
        topk.insert(TopKVariant::One(k).name(), topk_hit(&a.mean, g, a.element_kind, TopKVariant::One(k))?);
    }
    if targets.len() >= 2 {
        for &k in &cfg.both_ks {
            topk.insert(TopKVariant::Both(k).name(), topk_hit(&a.mean, g, a.element_kind, TopKVariant::Both(k))?);
        }
    }
    let fseed = seed::derive2(cfg.seed, stream::FIDELITY, g.id);
    let fid = |mode, s| fidelity_graph(g, &a.mean, a.element_kind, model, cfg.fidelity_k, mode, cfg.measurement, cfg.fidelity_trials, s);
    Ok(GraphMetrics {
        graph_id: g.id,
        topk,
        fid_minus: fid(FidelityMode::Minus, seed::derive(fseed, 0))?,
        fid_plus: fid(FidelityMode::Plus, seed::derive(fseed, 1))?,
        sparsity: sparsity(&a.mean),
        consensus: a.scores.as_ref().map(|s| consensus_graph(s, targets, cfg.consensus_k)).transpose()?,
        relative_importance: Some(relative_importance(&a.mean, targets)?),
    })
}

/// Every metric for one explanation method over a set of test graphs.
/// Graphs are matched to attributions by id.
pub fn evaluate_method(
    method: &str,
    attributions: &[Attribution],
    graphs: &[Graph],
    model: &EduQgcModel,
    cfg: &MetricsConfig,
) -> Result<MethodReport> {
    let by_id: BTreeMap<u64, &Graph> = graphs.iter().map(|g| (g.id, g)).collect();
    let pairs = attributions
        .iter()
        .map(|a| {
            let g = by_id.get(&a.graph_id).ok_or_else(|| Error::Targets(format!("no graph with id {}", a.graph_id)))?;
            if g.num_nodes() != a.mean.len() && a.element_kind == ElementKind::Nodes {
                return Err(Error::Dimension(format!("graph {} has {} nodes, attribution {}", g.id, g.num_nodes(), a.mean.len())));
            }
            Ok((a, *g))
        })
        .collect::<Result<Vec<_>>>()?;
    if pairs.is_empty() {
        return Err(Error::Config("no attributions to evaluate".into()));
    }
    let per_graph = pairs.par_iter().map(|(a, g)| graph_metrics(a, g, model, cfg)).collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    let mut push = |metric: &str, values: Vec<f64>| {
        if !values.is_empty() {
            let ms = mean_std(&values);
            rows.push(MetricRow { metric: metric.to_string(), mean: ms.mean, std: ms.std });
        }
    };
    let names: Vec<String> = cfg
        .one_ks
        .iter()
        .map(|&k| TopKVariant::One(k).name())
        .chain(cfg.both_ks.iter().map(|&k| TopKVariant::Both(k).name()))
        .collect();
    for name in &names {
        let vals: Vec<f64> = per_graph.iter().filter_map(|m| m.topk.get(name).copied()).collect();
        if vals.len() == per_graph.len() {
            push(name, vals);
        }
    }
    push("fid_minus", per_graph.iter().filter_map(|m| m.fid_minus.map(|f| f.agreement)).collect());
    push("fid_plus", per_graph.iter().filter_map(|m| m.fid_plus.map(|f| f.agreement)).collect());
    push("fid_minus_prob", per_graph.iter().filter_map(|m| m.fid_minus.map(|f| f.probability_agreement)).collect());
    push("fid_plus_prob", per_graph.iter().filter_map(|m| m.fid_plus.map(|f| f.probability_agreement)).collect());
    push("sparsity", per_graph.iter().map(|m| m.sparsity).collect());
    push("consensus", per_graph.iter().filter_map(|m| m.consensus).collect());
    let ri: Vec<f64> = per_graph.iter().filter_map(|m| m.relative_importance).collect();
    push("relative_importance", ri.iter().cloned().filter(|v| v.is_finite()).collect());
    let infinite = ri.iter().filter(|v| !v.is_finite()).count() as f64;
    push("relative_importance_infinite", vec![infinite]);
    Ok(MethodReport { method: method.to_string(), rows, per_graph })
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub methods: Vec<MethodReport>,
}

impl MetricsReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,metric,mean,std\n");
        for m in &self.methods {
            for r in &m.rows {
                out.push_str(&format!("{},{},{},{}\n", m.method, r.metric, r.mean, r.std));
            }
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn method(&self, name: &str) -> Option<&MethodReport> {
        self.methods.iter().find(|m| m.method == name)
    }
}
