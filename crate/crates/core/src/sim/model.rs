//! EDU-QGC classifier: layer-shared controlled-phase edges and ZYZ node
//! rotations on |+⟩^⊗n, followed by a shared per-node MLP, mean pooling and a
//! logistic output.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, MAX_NODES};
use crate::seed;

use super::statevector::{self, OutcomeSampler, Statevector};

pub const HIDDEN_UNITS: usize = 32;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EduQgcParams {
    /// `(a, b, c)` per layer: node gate Rz(c)·Ry(b)·Rz(a), shared by all nodes.
    pub node_angles: Vec<[f64; 3]>,
    /// Controlled-phase angle per layer, shared by all edges.
    pub edge_phases: Vec<f64>,
}

impl EduQgcParams {
    pub fn zeros(num_layers: usize) -> Self {
        Self { node_angles: vec![[0.0; 3]; num_layers], edge_phases: vec![0.0; num_layers] }
    }

    pub fn num_layers(&self) -> usize {
        self.node_angles.len()
    }

    /// Flattened as `[a, b, c, θ]` per layer.
    pub fn to_vec(&self) -> Vec<f64> {
        self.node_angles
            .iter()
            .zip(&self.edge_phases)
            .flat_map(|(n, &e)| [n[0], n[1], n[2], e])
            .collect()
    }

    pub fn from_slice(values: &[f64]) -> Self {
        assert_eq!(values.len() % 4, 0, "four parameters per layer");
        let node_angles = values.chunks_exact(4).map(|c| [c[0], c[1], c[2]]).collect();
        let edge_phases = values.chunks_exact(4).map(|c| c[3]).collect();
        Self { node_angles, edge_phases }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReadoutNetwork {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

impl ReadoutNetwork {
    pub fn hidden(&self) -> usize {
        self.w1.len()
    }

    pub fn node_score(&self, marginal: f64) -> f64 {
        self.w1
            .iter()
            .zip(&self.b1)
            .zip(&self.w2)
            .map(|((w1, b1), w2)| w2 * (w1 * marginal + b1).tanh())
            .sum::<f64>()
            + self.b2
    }

    pub fn logit(&self, marginals: &[f64]) -> f64 {
        marginals.iter().map(|&m| self.node_score(m)).sum::<f64>() / marginals.len() as f64
    }

    pub fn probability(&self, marginals: &[f64]) -> f64 {
        sigmoid(self.logit(marginals))
    }

    /// Gradient of the logit with respect to the readout weights, and with
    /// respect to each marginal, each scaled by `upstream`.
    pub fn backward(&self, marginals: &[f64], upstream: f64) -> (ReadoutNetwork, Vec<f64>) {
        let h = self.hidden();
        let scale = upstream / marginals.len() as f64;
        let mut grad = ReadoutNetwork { w1: vec![0.0; h], b1: vec![0.0; h], w2: vec![0.0; h], b2: upstream };
        let mut d_marg = Vec::with_capacity(marginals.len());
        for &m in marginals {
            let mut dm = 0.0;
            for j in 0..h {
                let t = (self.w1[j] * m + self.b1[j]).tanh();
                let dpre = self.w2[j] * (1.0 - t * t);
                grad.w2[j] += scale * t;
                grad.w1[j] += scale * dpre * m;
                grad.b1[j] += scale * dpre;
                dm += dpre * self.w1[j];
            }
            d_marg.push(scale * dm);
        }
        (grad, d_marg)
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EduQgcModel {
    pub params: EduQgcParams,
    pub readout: ReadoutNetwork,
}

/// How a graph is measured.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measurement {
    Exact,
    Shots(u32),
}

impl Measurement {
    pub fn shots(self) -> Option<u32> {
        match self {
            Measurement::Exact => None,
            Measurement::Shots(s) => Some(s),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelOutput {
    pub class_probability: f64,
    pub per_node_marginals: Vec<f64>,
    /// `None` in exact mode.
    pub shots_used: Option<u32>,
}

impl ModelOutput {
    pub fn label(&self) -> u8 {
        u8::from(self.class_probability >= 0.5)
    }
}

/// Graph-dependent data reused by every circuit evaluation on that graph.
#[derive(Clone, Debug)]
pub struct GraphCircuit {
    num_qubits: usize,
    edges: Vec<(usize, usize)>,
    /// Number of edges with both endpoints set, per basis state.
    edge_counts: Vec<u8>,
}

impl GraphCircuit {
    pub fn new(g: &Graph) -> Result<Self> {
        let n = g.num_nodes();
        if n > MAX_NODES {
            return Err(Error::QubitBudget { nodes: n, budget: MAX_NODES });
        }
        let masks: Vec<usize> = g.edges().iter().map(|&(u, v)| (1 << u) | (1 << v)).collect();
        let edge_counts = (0..1usize << n)
            .map(|x| masks.iter().filter(|&&m| x & m == m).count() as u8)
            .collect();
        Ok(Self { num_qubits: n, edges: g.edges().to_vec(), edge_counts })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub(crate) fn edge_counts(&self) -> &[u8] {
        &self.edge_counts
    }

    pub(crate) fn phase_table(&self, theta: f64) -> Vec<Complex64> {
        (0..=self.edges.len()).map(|k| Complex64::from_polar(1.0, theta * k as f64)).collect()
    }

    pub fn final_state(&self, params: &EduQgcParams) -> Statevector {
        self.run(params, None)
    }

    /// Runs the circuit with one gate occurrence's angle offset by `shift.1`.
    pub(crate) fn run(&self, params: &EduQgcParams, shift: Option<(Occurrence, f64)>) -> Statevector {
        let mut state = Statevector::uniform(self.num_qubits);
        for layer in 0..params.num_layers() {
            state.apply_counted_phase(&self.edge_counts, &self.phase_table(params.edge_phases[layer]));
            if let Some((Occurrence::Edge { layer: l, edge }, delta)) = shift {
                if l == layer {
                    let (u, v) = self.edges[edge];
                    state.apply_controlled_phase(u, v, delta);
                }
            }
            let [a, b, c] = params.node_angles[layer];
            let shared = statevector::zyz(a, b, c);
            for node in 0..self.num_qubits {
                match shift {
                    Some((Occurrence::Node { layer: l, node: v, angle }, delta)) if l == layer && v == node => {
                        let mut abc = [a, b, c];
                        abc[angle] += delta;
                        state.apply_single(node, &statevector::zyz(abc[0], abc[1], abc[2]));
                    }
                    _ => state.apply_single(node, &shared),
                }
            }
        }
        state
    }
}

/// A single appearance of a shared parameter in the circuit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Occurrence {
    Node { layer: usize, node: usize, angle: usize },
    Edge { layer: usize, edge: usize },
}

impl EduQgcModel {
    /// Node angles ~ U(−0.1, 0.1), edge phases ~ U(0.1, 0.5), readout weights
    /// ~ U(−1, 1) for the first layer and U(−1/√h, 1/√h) for the second.
    pub fn init(num_layers: usize, seed: u64) -> Self {
        let mut rng = seed::rng(seed);
        let node_angles = (0..num_layers)
            .map(|_| std::array::from_fn(|_| rng.random_range(-0.1..0.1)))
            .collect();
        let edge_phases = (0..num_layers).map(|_| rng.random_range(0.1..0.5)).collect();
        let bound = 1.0 / (HIDDEN_UNITS as f64).sqrt();
        let readout = ReadoutNetwork {
            w1: (0..HIDDEN_UNITS).map(|_| rng.random_range(-1.0..1.0)).collect(),
            b1: (0..HIDDEN_UNITS).map(|_| rng.random_range(-1.0..1.0)).collect(),
            w2: (0..HIDDEN_UNITS).map(|_| rng.random_range(-bound..bound)).collect(),
            b2: 0.0,
        };
        Self { params: EduQgcParams { node_angles, edge_phases }, readout }
    }

    pub fn forward_exact(&self, g: &Graph) -> Result<ModelOutput> {
        Ok(self.forward_exact_compiled(&GraphCircuit::new(g)?))
    }

    pub fn forward_exact_compiled(&self, circuit: &GraphCircuit) -> ModelOutput {
        let marginals = circuit.final_state(&self.params).marginals();
        self.output_from_marginals(marginals, None)
    }

    pub fn forward_shots(&self, g: &Graph, shots: u32, seed: u64) -> Result<ModelOutput> {
        if shots == 0 {
            return Err(Error::Config("shots must be at least 1".into()));
        }
        let state = GraphCircuit::new(g)?.final_state(&self.params);
        Ok(self.forward_sampled(&OutcomeSampler::new(&state), shots, seed))
    }

    pub fn forward_sampled(&self, sampler: &OutcomeSampler, shots: u32, seed: u64) -> ModelOutput {
        let marginals = sampler.sample_marginals(shots, &mut seed::rng(seed));
        self.output_from_marginals(marginals, Some(shots))
    }

    pub fn forward(&self, g: &Graph, measurement: Measurement, seed: u64) -> Result<ModelOutput> {
        match measurement {
            Measurement::Exact => self.forward_exact(g),
            Measurement::Shots(s) => self.forward_shots(g, s, seed),
        }
    }

    pub fn output_from_marginals(&self, marginals: Vec<f64>, shots_used: Option<u32>) -> ModelOutput {
        ModelOutput {
            class_probability: self.readout.probability(&marginals),
            per_node_marginals: marginals,
            shots_used,
        }
    }
}

/// Relabels `g` by `perm` (old node `i` becomes `perm[i]`).
pub fn apply_permutation(g: &Graph, perm: &[usize]) -> Result<Graph> {
    g.permuted(perm)
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    version: u32,
    num_layers: usize,
    node_angles: Vec<[f64; 3]>,
    edge_phases: Vec<f64>,
    readout: ReadoutNetwork,
}

impl EduQgcModel {
    pub fn to_checkpoint_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&CheckpointFile {
            version: 1,
            num_layers: self.params.num_layers(),
            node_angles: self.params.node_angles.clone(),
            edge_phases: self.params.edge_phases.clone(),
            readout: self.readout.clone(),
        })?)
    }

    pub fn from_checkpoint_json(text: &str) -> Result<Self> {
        let f: CheckpointFile = serde_json::from_str(text)?;
        if f.version != 1 {
            return Err(Error::Config(format!("unsupported checkpoint version {}", f.version)));
        }
        if f.node_angles.len() != f.num_layers || f.edge_phases.len() != f.num_layers {
            return Err(Error::Dimension(format!(
                "checkpoint declares {} layers but stores {} node and {} edge entries",
                f.num_layers,
                f.node_angles.len(),
                f.edge_phases.len()
            )));
        }
        let h = f.readout.w1.len();
        if f.readout.b1.len() != h || f.readout.w2.len() != h {
            return Err(Error::Dimension("readout weight lengths disagree".into()));
        }
        Ok(Self {
            params: EduQgcParams { node_angles: f.node_angles, edge_phases: f.edge_phases },
            readout: f.readout,
        })
    }
}
