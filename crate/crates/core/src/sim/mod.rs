//! Statevector simulation of the equivariant quantum graph classifier.

pub mod gradient;
pub mod model;
pub mod statevector;

pub use gradient::{bce_loss, loss_and_gradient, quantum_gradient, GradientMethod, ModelGradient};
pub use model::{
    apply_permutation, sigmoid, EduQgcModel, EduQgcParams, GraphCircuit, Measurement, ModelOutput,
    ReadoutNetwork, HIDDEN_UNITS,
};
pub use statevector::{OutcomeSampler, Statevector};
