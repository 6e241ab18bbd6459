//! Gradients of the classifier loss.
//!
//! Quantum parameters are shared across every node (or edge) of a layer, so
//! the derivative of a shared angle is the sum over its gate occurrences. The
//! two-term shift rule is exact per occurrence: Rz/Ry have generators σ/2 and
//! the controlled phase has generator |11⟩⟨11|, both with eigenvalue gap 1,
//! giving f′ = ½[f(+π/2) − f(−π/2)].
//!
//! The adjoint pass computes the same quantity for a weighted sum of
//! marginals in one backward sweep and is what training uses.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::graph::Graph;

use super::model::{sigmoid, EduQgcModel, EduQgcParams, GraphCircuit, Occurrence, ReadoutNetwork};
use super::statevector::{self, Gate, Statevector};

const CLAMP: f64 = 1e-7;

/// Binary cross-entropy with the probability clamped to `[1e−7, 1 − 1e−7]`.
pub fn bce_loss(p: f64, y: u8) -> f64 {
    let p = p.clamp(CLAMP, 1.0 - CLAMP);
    if y == 1 {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientMethod {
    ParameterShift,
    Adjoint,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelGradient {
    pub quantum: EduQgcParams,
    pub readout: ReadoutNetwork,
}

impl ModelGradient {
    pub fn zeros_like(model: &EduQgcModel) -> Self {
        let h = model.readout.hidden();
        Self {
            quantum: EduQgcParams::zeros(model.params.num_layers()),
            readout: ReadoutNetwork { w1: vec![0.0; h], b1: vec![0.0; h], w2: vec![0.0; h], b2: 0.0 },
        }
    }

    /// `self += scale * other`
    pub fn add_scaled(&mut self, other: &ModelGradient, scale: f64) {
        let mut q = self.quantum.to_vec();
        for (a, b) in q.iter_mut().zip(other.quantum.to_vec()) {
            *a += scale * b;
        }
        self.quantum = EduQgcParams::from_slice(&q);
        let r = &mut self.readout;
        for (a, b) in r.w1.iter_mut().zip(&other.readout.w1) {
            *a += scale * b;
        }
        for (a, b) in r.b1.iter_mut().zip(&other.readout.b1) {
            *a += scale * b;
        }
        for (a, b) in r.w2.iter_mut().zip(&other.readout.w2) {
            *a += scale * b;
        }
        r.b2 += scale * other.readout.b2;
    }
}

/// d(Σ_v weights[v]·P(v=1))/dθ for every shared quantum parameter, by shifting
/// each gate occurrence separately.
pub fn parameter_shift(circuit: &GraphCircuit, params: &EduQgcParams, weights: &[f64]) -> EduQgcParams {
    let objective = |occ: Occurrence, delta: f64| -> f64 {
        let m = circuit.run(params, Some((occ, delta))).marginals();
        m.iter().zip(weights).map(|(a, w)| a * w).sum()
    };
    let shift = |occ: Occurrence| 0.5 * (objective(occ, FRAC_PI_2) - objective(occ, -FRAC_PI_2));

    let mut grad = EduQgcParams::zeros(params.num_layers());
    for layer in 0..params.num_layers() {
        for node in 0..circuit.num_qubits() {
            for angle in 0..3 {
                grad.node_angles[layer][angle] += shift(Occurrence::Node { layer, node, angle });
            }
        }
        for edge in 0..circuit.edges().len() {
            grad.edge_phases[layer] += shift(Occurrence::Edge { layer, edge });
        }
    }
    grad
}

fn apply_weighted_observable(state: &Statevector, weights: &[f64]) -> Statevector {
    let amps = state
        .amplitudes()
        .iter()
        .enumerate()
        .map(|(x, &a)| {
            let mut o = 0.0;
            let mut bits = x;
            while bits != 0 {
                o += weights[bits.trailing_zeros() as usize];
                bits &= bits - 1;
            }
            a * o
        })
        .collect();
    Statevector::from_amplitudes(amps)
}

/// Im⟨λ|Pφ⟩ for a Pauli `P ∈ {Y, Z}` on `qubit`.
fn pauli_overlap_im(lambda: &Statevector, phi: &Statevector, qubit: usize, pauli_y: bool) -> f64 {
    let stride = 1usize << qubit;
    let mut acc = Complex64::new(0.0, 0.0);
    for (lb, pb) in lambda.amplitudes().chunks_exact(2 * stride).zip(phi.amplitudes().chunks_exact(2 * stride)) {
        let (l0, l1) = lb.split_at(stride);
        let (p0, p1) = pb.split_at(stride);
        for i in 0..stride {
            if pauli_y {
                // Y(φ0, φ1) = (−iφ1, iφ0)
                acc += l0[i].conj() * Complex64::new(p1[i].im, -p1[i].re)
                    + l1[i].conj() * Complex64::new(-p0[i].im, p0[i].re);
            } else {
                acc += l0[i].conj() * p0[i] - l1[i].conj() * p1[i];
            }
        }
    }
    acc.im
}

/// Same quantity as [`parameter_shift`], from one forward and one backward sweep.
pub fn adjoint(circuit: &GraphCircuit, params: &EduQgcParams, weights: &[f64]) -> EduQgcParams {
    let n = circuit.num_qubits();
    let mut phi = circuit.final_state(params);
    let mut lambda = apply_weighted_observable(&phi, weights);
    let mut grad = EduQgcParams::zeros(params.num_layers());

    let apply_both = |phi: &mut Statevector, lambda: &mut Statevector, q: usize, g: &Gate| {
        phi.apply_single(q, g);
        lambda.apply_single(q, g);
    };

    for layer in (0..params.num_layers()).rev() {
        let [a, b, c] = params.node_angles[layer];
        let (rz_a, ry_b, rz_c) = (statevector::rz(-a), statevector::ry(-b), statevector::rz(-c));
        for q in (0..n).rev() {
            // dE/dθ = 2·Im⟨λ|Gφ⟩ with G = σ/2 for the rotation gates
            grad.node_angles[layer][2] += pauli_overlap_im(&lambda, &phi, q, false);
            apply_both(&mut phi, &mut lambda, q, &rz_c);
            grad.node_angles[layer][1] += pauli_overlap_im(&lambda, &phi, q, true);
            apply_both(&mut phi, &mut lambda, q, &ry_b);
            grad.node_angles[layer][0] += pauli_overlap_im(&lambda, &phi, q, false);
            apply_both(&mut phi, &mut lambda, q, &rz_a);
        }
        // exp(iθN) has generator −N
        let counts = circuit.edge_counts();
        let overlap: f64 = lambda
            .amplitudes()
            .iter()
            .zip(phi.amplitudes())
            .zip(counts)
            .map(|((l, p), &k)| (l.conj() * p).im * f64::from(k))
            .sum();
        grad.edge_phases[layer] -= 2.0 * overlap;
        let undo = circuit.phase_table(-params.edge_phases[layer]);
        phi.apply_counted_phase(counts, &undo);
        lambda.apply_counted_phase(counts, &undo);
    }
    grad
}

/// BCE loss for one labeled graph and its gradient over every model parameter.
///
/// `marginals` overrides the exact marginals (shot-based training); the
/// quantum Jacobian is always exact.
pub fn loss_and_gradient(
    circuit: &GraphCircuit,
    model: &EduQgcModel,
    label: u8,
    method: GradientMethod,
    marginals: Option<Vec<f64>>,
) -> (f64, f64, ModelGradient) {
    let marginals = marginals.unwrap_or_else(|| circuit.final_state(&model.params).marginals());
    let logit = model.readout.logit(&marginals);
    let p = sigmoid(logit);
    let loss = bce_loss(p, label);
    let (readout, d_marg) = model.readout.backward(&marginals, p - f64::from(label));
    let quantum = match method {
        GradientMethod::ParameterShift => parameter_shift(circuit, &model.params, &d_marg),
        GradientMethod::Adjoint => adjoint(circuit, &model.params, &d_marg),
    };
    (loss, p, ModelGradient { quantum, readout })
}

/// Parameter-shift gradient of the BCE loss over the quantum parameters.
pub fn quantum_gradient(g: &Graph, model: &EduQgcModel, label: u8) -> Result<EduQgcParams> {
    let circuit = GraphCircuit::new(g)?;
    Ok(loss_and_gradient(&circuit, model, label, GradientMethod::ParameterShift, None).2.quantum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{make_cycle, make_wheel};

    fn loss_at(circuit: &GraphCircuit, model: &EduQgcModel, label: u8) -> f64 {
        let m = circuit.final_state(&model.params).marginals();
        bce_loss(model.readout.probability(&m), label)
    }

    #[test]
    fn bce_values() {
        assert!((bce_loss(0.5, 1) - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((bce_loss(0.9, 0) - 2.302_585_092_994_045).abs() < 1e-9);
        assert!(bce_loss(1.0, 1) <= 1.62e-7);
        assert!(bce_loss(0.0, 0) <= 1.62e-7);
        assert!(bce_loss(0.0, 1).is_finite());
    }

    #[test]
    fn phase_rotations_have_no_gradient_at_zero() {
        let g = make_cycle(5).unwrap();
        let mut model = EduQgcModel::init(2, 4);
        model.params = EduQgcParams::zeros(2);
        let grad = quantum_gradient(&g, &model, 1).unwrap();
        for layer in &grad.node_angles {
            assert!(layer[0].abs() < 1e-9 && layer[2].abs() < 1e-9, "{layer:?}");
        }
    }

    #[test]
    fn shift_rule_matches_finite_differences() {
        let g = make_wheel(4, 2, 3).unwrap();
        let circuit = GraphCircuit::new(&g).unwrap();
        let model = EduQgcModel::init(2, 21);
        let (_, _, grad) = loss_and_gradient(&circuit, &model, 1, GradientMethod::ParameterShift, None);
        let base = model.params.to_vec();
        let h = 1e-5;
        for (i, analytic) in grad.quantum.to_vec().into_iter().enumerate() {
            let mut plus = model.clone();
            let mut minus = model.clone();
            let mut v = base.clone();
            v[i] += h;
            plus.params = EduQgcParams::from_slice(&v);
            v[i] -= 2.0 * h;
            minus.params = EduQgcParams::from_slice(&v);
            let fd = (loss_at(&circuit, &plus, 1) - loss_at(&circuit, &minus, 1)) / (2.0 * h);
            assert!((fd - analytic).abs() < 1e-6, "param {i}: fd {fd} vs shift {analytic}");
        }
    }

    #[test]
    fn adjoint_agrees_with_shift_rule() {
        let g = make_wheel(5, 0, 8).unwrap();
        let circuit = GraphCircuit::new(&g).unwrap();
        let model = EduQgcModel::init(2, 2);
        let weights: Vec<f64> = (0..g.num_nodes()).map(|v| 0.3 - 0.1 * v as f64).collect();
        let a = adjoint(&circuit, &model.params, &weights).to_vec();
        let b = parameter_shift(&circuit, &model.params, &weights).to_vec();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-10, "{a:?} vs {b:?}");
        }
    }

    /// Two nodes, one edge, one layer with node gate Ry(b) only:
    /// ψ = (Ry(b)⊗Ry(b))·CP(θ)|++⟩. Writing s = sin b, c = cos b, the marginal
    /// of either qubit is P(1) = ½ + ¼·s·(1 + cos θ), so dP/dθ = −¼·s·sin θ.
    #[test]
    fn edge_phase_derivative_matches_closed_form() {
        let g = Graph::new(0, 2, [(0, 1)], 0, []).unwrap();
        let circuit = GraphCircuit::new(&g).unwrap();
        for &(b, theta) in &[(0.7, 0.4), (1.3, -2.1), (2.9, 1.0)] {
            let params = EduQgcParams { node_angles: vec![[0.0, b, 0.0]], edge_phases: vec![theta] };
            let m = circuit.final_state(&params).marginals();
            let closed = 0.5 + 0.25 * f64::sin(b) * (1.0 + f64::cos(theta));
            assert!((m[0] - closed).abs() < 1e-12 && (m[1] - closed).abs() < 1e-12);
            let grad = parameter_shift(&circuit, &params, &[1.0, 0.0]);
            let expected = -0.25 * f64::sin(b) * f64::sin(theta);
            assert!((grad.edge_phases[0] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn readout_gradient_matches_finite_differences() {
        let model = EduQgcModel::init(2, 13);
        let marg = [0.2, 0.55, 0.71, 0.43];
        let (grad, dm) = model.readout.backward(&marg, 1.0);
        let h = 1e-5;
        for j in 0..model.readout.hidden() {
            let mut p = model.readout.clone();
            let mut q = model.readout.clone();
            p.w1[j] += h;
            q.w1[j] -= h;
            let d = (p.logit(&marg) - q.logit(&marg)) / (2.0 * h);
            assert!((d - grad.w1[j]).abs() <= 1e-6 * d.abs().max(1.0));
            let mut p = model.readout.clone();
            let mut q = model.readout.clone();
            p.w2[j] += h;
            q.w2[j] -= h;
            let d = (p.logit(&marg) - q.logit(&marg)) / (2.0 * h);
            assert!((d - grad.w2[j]).abs() <= 1e-6 * d.abs().max(1.0));
        }
        for v in 0..marg.len() {
            let mut p = marg;
            let mut q = marg;
            p[v] += h;
            q[v] -= h;
            let d = (model.readout.logit(&p) - model.readout.logit(&q)) / (2.0 * h);
            assert!((d - dm[v]).abs() <= 1e-6 * d.abs().max(1.0));
        }
    }
}
