//! Structure-preserving perturbations of a single graph, encoded as a binary
//! retention matrix `Z` (1 = element kept) over nodes or edges.

use std::collections::HashMap;
use std::sync::Arc;

use rand::seq::index;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::seed;
use crate::sim::{EduQgcModel, GraphCircuit, Measurement, OutcomeSampler};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElementKind {
    Nodes,
    Edges,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    RandomNode,
    RandomWalk,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PerturbConfig {
    pub strategy: Strategy,
    pub element_kind: ElementKind,
    pub num_perturbations: usize,
    pub removal_count: usize,
    pub walk_length: usize,
    /// Cycle through every `removal_count`-subset in lexicographic order
    /// instead of sampling (random-node strategy only).
    pub exhaustive: bool,
}

impl Default for PerturbConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::RandomNode,
            element_kind: ElementKind::Nodes,
            num_perturbations: 64,
            removal_count: 2,
            walk_length: 4,
            exhaustive: false,
        }
    }
}

pub fn element_count(g: &Graph, kind: ElementKind) -> usize {
    match kind {
        ElementKind::Nodes => g.num_nodes(),
        ElementKind::Edges => g.num_edges(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSet {
    pub base_graph: Graph,
    pub element_kind: ElementKind,
    /// Row-major, `p` rows by `|A|` columns.
    pub z: Vec<Vec<u8>>,
    pub perturbed_graphs: Vec<Graph>,
    /// Class probability per row; empty until evaluated.
    pub outputs: Vec<f64>,
    pub seed: u64,
}

impl PerturbationSet {
    pub fn num_rows(&self) -> usize {
        self.z.len()
    }

    pub fn num_elements(&self) -> usize {
        element_count(&self.base_graph, self.element_kind)
    }

    /// Column `j` of `Z` as reals.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.z.iter().map(|row| f64::from(row[j])).collect()
    }
}

/// Removes the zero-marked elements of `row` from `base`.
pub fn rebuild(base: &Graph, kind: ElementKind, row: &[u8]) -> Result<Graph> {
    let removed: Vec<usize> = row.iter().enumerate().filter(|(_, &z)| z == 0).map(|(i, _)| i).collect();
    match kind {
        ElementKind::Nodes => base.remove_nodes(&removed),
        ElementKind::Edges => base.remove_edges(&removed),
    }
}

fn check_config(g: &Graph, config: &PerturbConfig) -> Result<usize> {
    let n = element_count(g, config.element_kind);
    if config.removal_count == 0 || config.removal_count >= n {
        return Err(Error::Config(format!(
            "removal count {} must lie in 1..{n} for a graph with {n} elements",
            config.removal_count
        )));
    }
    if config.num_perturbations == 0 {
        return Err(Error::Config("at least one perturbation is required".into()));
    }
    Ok(n)
}

fn assemble(g: &Graph, kind: ElementKind, removals: Vec<Vec<usize>>, seed: u64) -> Result<PerturbationSet> {
    let n = element_count(g, kind);
    let mut z = Vec::with_capacity(removals.len());
    let mut graphs = Vec::with_capacity(removals.len());
    for removed in removals {
        let mut row = vec![1u8; n];
        for i in removed {
            row[i] = 0;
        }
        graphs.push(rebuild(g, kind, &row)?);
        z.push(row);
    }
    Ok(PerturbationSet { base_graph: g.clone(), element_kind: kind, z, perturbed_graphs: graphs, outputs: Vec::new(), seed })
}

/// Lexicographic successor of a sorted `k`-subset of `0..n`.
fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    for i in (0..k).rev() {
        if c[i] < n - k + i {
            c[i] += 1;
            for j in i + 1..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Each row removes a uniformly random `r`-subset of elements.
pub fn perturb_random(g: &Graph, config: &PerturbConfig, seed: u64) -> Result<PerturbationSet> {
    let n = check_config(g, config)?;
    let r = config.removal_count;
    let removals = if config.exhaustive {
        let mut all = Vec::new();
        let mut c: Vec<usize> = (0..r).collect();
        loop {
            all.push(c.clone());
            if !next_combination(&mut c, n) {
                break;
            }
        }
        (0..config.num_perturbations).map(|i| all[i % all.len()].clone()).collect()
    } else {
        let mut rng = seed::rng(seed);
        (0..config.num_perturbations).map(|_| index::sample(&mut rng, n, r).into_vec()).collect()
    };
    assemble(g, config.element_kind, removals, seed)
}

fn walk_nodes(adj: &[Vec<usize>], r: usize, steps: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut at = rng.random_range(0..adj.len());
    let mut visited = vec![at];
    for _ in 0..steps {
        if visited.len() == r || adj[at].is_empty() {
            break;
        }
        at = adj[at][rng.random_range(0..adj[at].len())];
        if !visited.contains(&at) {
            visited.push(at);
        }
    }
    visited
}

fn walk_edges(g: &Graph, r: usize, steps: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut incident = vec![Vec::new(); g.num_nodes()];
    for (e, &(u, v)) in g.edges().iter().enumerate() {
        incident[u].push((e, v));
        incident[v].push((e, u));
    }
    let (u0, v0) = g.edges()[rng.random_range(0..g.num_edges())];
    let mut at = if rng.random_bool(0.5) { u0 } else { v0 };
    let mut taken = Vec::new();
    for _ in 0..steps {
        if taken.len() == r {
            break;
        }
        let (e, next) = incident[at][rng.random_range(0..incident[at].len())];
        if !taken.contains(&e) {
            taken.push(e);
        }
        at = next;
    }
    taken
}

/// Each row removes the first `r` distinct elements visited by a random walk
/// of at most `walk_length` steps from a uniformly random start.
pub fn perturb_random_walk(g: &Graph, config: &PerturbConfig, seed: u64) -> Result<PerturbationSet> {
    check_config(g, config)?;
    let r = config.removal_count;
    let mut rng = seed::rng(seed);
    let removals = match config.element_kind {
        ElementKind::Nodes => {
            let adj = g.adjacency();
            (0..config.num_perturbations).map(|_| walk_nodes(&adj, r, config.walk_length, &mut rng)).collect()
        }
        ElementKind::Edges => {
            (0..config.num_perturbations).map(|_| walk_edges(g, r, config.walk_length, &mut rng)).collect()
        }
    };
    assemble(g, config.element_kind, removals, seed)
}

pub fn perturb(g: &Graph, config: &PerturbConfig, seed: u64) -> Result<PerturbationSet> {
    match config.strategy {
        Strategy::RandomNode => perturb_random(g, config, seed),
        Strategy::RandomWalk => perturb_random_walk(g, config, seed),
    }
}

/// Final state of one perturbed graph: its outcome distribution for shot
/// sampling and its exact marginals.
pub struct CachedState {
    pub sampler: OutcomeSampler,
    pub marginals: Vec<f64>,
}

/// Memo of final states keyed by retention row. Shot draws stay fresh per
/// call; only the deterministic statevector is reused.
#[derive(Default)]
pub struct StateCache {
    states: HashMap<Vec<u8>, Arc<CachedState>>,
}

fn simulate(model: &EduQgcModel, base: &Graph, kind: ElementKind, row: &[u8]) -> Result<CachedState> {
    let g = rebuild(base, kind, row)?;
    let state = GraphCircuit::new(&g)?.final_state(&model.params);
    Ok(CachedState { sampler: OutcomeSampler::new(&state), marginals: state.marginals() })
}

impl StateCache {
    /// Simulates every row not yet cached, in parallel.
    pub fn warm<'a>(
        &mut self,
        model: &EduQgcModel,
        base: &Graph,
        kind: ElementKind,
        rows: impl IntoIterator<Item = &'a [u8]>,
    ) -> Result<()> {
        let mut missing: Vec<&[u8]> = rows.into_iter().filter(|r| !self.states.contains_key(*r)).collect();
        missing.sort_unstable();
        missing.dedup();
        let built: Vec<Result<CachedState>> = missing.par_iter().map(|r| simulate(model, base, kind, r)).collect();
        for (row, state) in missing.into_iter().zip(built) {
            self.states.insert(row.to_vec(), Arc::new(state?));
        }
        Ok(())
    }

    pub fn get(&self, row: &[u8]) -> Option<&Arc<CachedState>> {
        self.states.get(row)
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Class probability of `row`'s graph: exact, or from `shots` fresh draws
/// under `seed`. Rows missing from the cache are simulated on the spot.
pub fn evaluate_row(
    cache: &StateCache,
    model: &EduQgcModel,
    base: &Graph,
    kind: ElementKind,
    row: &[u8],
    measurement: Measurement,
    seed: u64,
) -> Result<f64> {
    let fresh;
    let state = match cache.get(row) {
        Some(s) => s.as_ref(),
        None => {
            fresh = simulate(model, base, kind, row)?;
            &fresh
        }
    };
    Ok(match measurement {
        Measurement::Exact => model.readout.probability(&state.marginals),
        Measurement::Shots(0) => return Err(Error::Config("shots must be at least 1".into())),
        Measurement::Shots(s) => model.forward_sampled(&state.sampler, s, seed).class_probability,
    })
}

/// Fills `outputs`; row `i` draws its shots from `derive(seed, i)`.
pub fn evaluate_perturbations(
    mut pset: PerturbationSet,
    model: &EduQgcModel,
    measurement: Measurement,
    seed: u64,
) -> Result<PerturbationSet> {
    let mut cache = StateCache::default();
    cache.warm(model, &pset.base_graph, pset.element_kind, pset.z.iter().map(Vec::as_slice))?;
    evaluate_with_cache(&mut pset, model, measurement, seed, &cache)?;
    Ok(pset)
}

pub fn evaluate_with_cache(
    pset: &mut PerturbationSet,
    model: &EduQgcModel,
    measurement: Measurement,
    seed: u64,
    cache: &StateCache,
) -> Result<()> {
    pset.outputs = pset
        .z
        .iter()
        .enumerate()
        .map(|(i, row)| {
            evaluate_row(cache, model, &pset.base_graph, pset.element_kind, row, measurement, seed::derive(seed, i as u64))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(())
}

/// Audit dump: `Z` rows and outputs, enough to refit surrogates offline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationDump {
    pub graph_id: u64,
    pub element_kind: ElementKind,
    pub seed: u64,
    pub z: Vec<Vec<u8>>,
    pub outputs: Vec<f64>,
}

impl From<&PerturbationSet> for PerturbationDump {
    fn from(p: &PerturbationSet) -> Self {
        Self {
            graph_id: p.base_graph.id,
            element_kind: p.element_kind,
            seed: p.seed,
            z: p.z.clone(),
            outputs: p.outputs.clone(),
        }
    }
}
