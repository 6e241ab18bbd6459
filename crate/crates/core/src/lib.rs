//! Uncertainty-aware explanations for quantum graph classifiers.
//!
//! The crate trains a statevector-simulated equivariant quantum graph circuit
//! on synthetic wheel/cycle tasks and explains its shot-noisy predictions with
//! an ensemble of HSIC-lasso surrogates fit on node-removal perturbations.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dataset;
pub mod ensemble;
pub mod error;
pub mod graph;
pub mod hsic;
pub mod metrics;
pub mod perturb;
pub mod seed;
pub mod sim;
pub mod train;

pub use error::{Error, Result};
