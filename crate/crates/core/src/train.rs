//! Minibatch Adam training of the classifier on binary cross-entropy.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::seed::{self, stream};
use crate::sim::{
    bce_loss, loss_and_gradient, EduQgcModel, GradientMethod, GraphCircuit, Measurement, ModelGradient,
    OutcomeSampler, ReadoutNetwork,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub batch_size: usize,
    pub num_layers: usize,
    pub measurement: Measurement,
    pub gradient: GradientMethod,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            learning_rate: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            batch_size: 16,
            num_layers: 2,
            measurement: Measurement::Exact,
            gradient: GradientMethod::Adjoint,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        if self.batch_size == 0 || self.num_layers == 0 {
            return Err(Error::Config("batch size and layer count must be at least 1".into()));
        }
        if let Measurement::Shots(0) = self.measurement {
            return Err(Error::Config("shots must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub test_acc: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochMetrics>,
    pub final_test_accuracy: f64,
}

impl TrainReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,train_acc,test_acc\n");
        for e in &self.epochs {
            out.push_str(&format!("{},{},{},{}\n", e.epoch, e.train_loss, e.train_acc, e.test_acc));
        }
        out
    }
}

fn flatten(model: &EduQgcModel) -> Vec<f64> {
    let r = &model.readout;
    let mut v = model.params.to_vec();
    v.extend(&r.w1);
    v.extend(&r.b1);
    v.extend(&r.w2);
    v.push(r.b2);
    v
}

fn flatten_gradient(g: &ModelGradient) -> Vec<f64> {
    flatten(&EduQgcModel { params: g.quantum.clone(), readout: g.readout.clone() })
}

fn unflatten(values: &[f64], num_layers: usize, hidden: usize) -> EduQgcModel {
    let q = 4 * num_layers;
    let (quantum, rest) = values.split_at(q);
    EduQgcModel {
        params: crate::sim::EduQgcParams::from_slice(quantum),
        readout: ReadoutNetwork {
            w1: rest[..hidden].to_vec(),
            b1: rest[hidden..2 * hidden].to_vec(),
            w2: rest[2 * hidden..3 * hidden].to_vec(),
            b2: rest[3 * hidden],
        },
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(n: usize) -> Self {
        Self { m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], cfg: &TrainConfig) {
        self.t += 1;
        let bc1 = 1.0 - cfg.beta1.powi(self.t);
        let bc2 = 1.0 - cfg.beta2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = cfg.beta1 * self.m[i] + (1.0 - cfg.beta1) * grad[i];
            self.v[i] = cfg.beta2 * self.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.eps);
        }
    }
}

/// Mean exact-mode BCE loss and accuracy over `graphs`.
pub fn evaluate(model: &EduQgcModel, circuits: &[GraphCircuit], graphs: &[Graph]) -> (f64, f64) {
    if graphs.is_empty() {
        return (0.0, 0.0);
    }
    let stats: Vec<(f64, bool)> = circuits
        .par_iter()
        .zip(graphs)
        .map(|(c, g)| {
            let out = model.forward_exact_compiled(c);
            (bce_loss(out.class_probability, g.label), out.label() == g.label)
        })
        .collect();
    let n = graphs.len() as f64;
    (
        stats.iter().map(|s| s.0).sum::<f64>() / n,
        stats.iter().filter(|s| s.1).count() as f64 / n,
    )
}

pub fn train(dataset: &Dataset, config: &TrainConfig) -> Result<(EduQgcModel, TrainReport)> {
    let init = EduQgcModel::init(config.num_layers, seed::derive(config.seed, stream::INIT));
    train_from(dataset, config, init)
}

pub fn train_from(dataset: &Dataset, config: &TrainConfig, init: EduQgcModel) -> Result<(EduQgcModel, TrainReport)> {
    config.validate()?;
    let compile = |gs: &[Graph]| gs.par_iter().map(GraphCircuit::new).collect::<Result<Vec<_>>>();
    let train_circuits = compile(&dataset.train)?;
    let test_circuits = compile(&dataset.test)?;

    let layers = init.params.num_layers();
    let hidden = init.readout.hidden();
    let mut theta = flatten(&init);
    let mut adam = Adam::new(theta.len());
    let mut model = init;
    let mut epochs = Vec::with_capacity(config.epochs);
    let mut order: Vec<usize> = (0..dataset.train.len()).collect();

    for epoch in 1..=config.epochs {
        order.shuffle(&mut seed::rng(seed::derive2(config.seed, stream::SHUFFLE, epoch as u64)));
        let shot_root = seed::derive2(config.seed, stream::TRAIN_SHOTS, epoch as u64);
        for batch in order.chunks(config.batch_size) {
            let grads: Vec<(f64, ModelGradient)> = batch
                .par_iter()
                .map(|&i| {
                    let circuit = &train_circuits[i];
                    let marginals = config.measurement.shots().map(|s| {
                        let sampler = OutcomeSampler::new(&circuit.final_state(&model.params));
                        sampler.sample_marginals(s, &mut seed::rng(seed::derive(shot_root, i as u64)))
                    });
                    let (loss, _, g) =
                        loss_and_gradient(circuit, &model, dataset.train[i].label, config.gradient, marginals);
                    (loss, g)
                })
                .collect();
            let mut total = ModelGradient::zeros_like(&model);
            for (loss, g) in &grads {
                if !loss.is_finite() {
                    return Err(Error::Divergence { epoch, detail: format!("non-finite batch loss {loss}") });
                }
                total.add_scaled(g, 1.0 / batch.len() as f64);
            }
            let flat = flatten_gradient(&total);
            if flat.iter().any(|x| !x.is_finite()) {
                return Err(Error::Divergence { epoch, detail: "non-finite gradient".into() });
            }
            adam.step(&mut theta, &flat, config);
            model = unflatten(&theta, layers, hidden);
        }
        let (train_loss, train_acc) = evaluate(&model, &train_circuits, &dataset.train);
        if !train_loss.is_finite() {
            return Err(Error::Divergence { epoch, detail: format!("train loss {train_loss}") });
        }
        let (_, test_acc) = evaluate(&model, &test_circuits, &dataset.test);
        epochs.push(EpochMetrics { epoch, train_loss, train_acc, test_acc });
    }
    let final_test_accuracy = match epochs.last() {
        Some(e) => e.test_acc,
        None => evaluate(&model, &test_circuits, &dataset.test).1,
    };
    Ok((model, TrainReport { epochs, final_test_accuracy }))
}
