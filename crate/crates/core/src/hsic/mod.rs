//! HSIC lasso surrogates over perturbation masks, plus a logistic baseline.
//!
//! Both HSIC solvers work on the quadratic expansion of
//! `½‖L − Σ α_ν K_ν‖²_F`: with `Q_{μν} = tr(K_μ K_ν)` and `c_ν = tr(K_ν L)`
//! the smooth part is `½(‖L‖² − 2cᵀα + αᵀQα)`.

mod group;
mod kernel;
mod lasso;
mod logistic;

pub use group::{build_groups, fit_hsic_group, fit_hsic_group_problem, GroupStructure};
pub use kernel::{
    center_normalize, gaussian_gram, hsic, median_bandwidth, normalized_gram, Bandwidth, GramMatrix, KernelConfig,
};
pub use lasso::{fit_hsic_l1, fit_hsic_l1_problem, l1_kkt_residual};
pub use logistic::{fit_logistic, train_logistic, LogisticModel, LOGISTIC_REG};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurrogateKind {
    HsicL1,
    HsicGroup,
    Logistic,
}

impl std::fmt::Display for SurrogateKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SurrogateKind::HsicL1 => "hsic_l1",
            SurrogateKind::HsicGroup => "hsic_group",
            SurrogateKind::Logistic => "logistic",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Relative objective change between sweeps.
    pub tol: f64,
    /// Optimality residual required alongside `tol`.
    pub kkt_tol: f64,
    pub max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { tol: 1e-8, kkt_tol: 1e-7, max_iter: 10_000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurrogateFit {
    pub kind: SurrogateKind,
    pub alpha: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Single-class targets (logistic) or no usable columns.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub degenerate: bool,
    /// Objective after every iteration.
    #[serde(skip)]
    pub history: Vec<f64>,
}

/// Quadratic form of an HSIC regression. Columns whose normalized Gram
/// degenerates are inactive and pinned at zero.
#[derive(Clone, Debug, PartialEq)]
pub struct HsicProblem {
    n: usize,
    q: Vec<f64>,
    c: Vec<f64>,
    active: Vec<bool>,
    output_norm_sq: f64,
}

impl HsicProblem {
    pub fn from_samples(z: &[Vec<u8>], outputs: &[f64], kernel: &KernelConfig) -> Result<Self> {
        let p = z.len();
        if outputs.len() != p {
            return Err(Error::Dimension(format!("{p} mask rows but {} outputs", outputs.len())));
        }
        if p < 2 {
            return Err(Error::InvalidSize(format!("need at least 2 samples, got {p}")));
        }
        let n = z[0].len();
        if z.iter().any(|r| r.len() != n) {
            return Err(Error::Dimension("mask rows have different lengths".into()));
        }
        if z.iter().all(|r| r == &z[0]) {
            return Err(Error::InvalidSize("mask matrix needs at least 2 distinct rows".into()));
        }
        let grams = (0..n)
            .map(|j| {
                let col: Vec<f64> = z.iter().map(|r| f64::from(r[j])).collect();
                normalized_gram(&col, kernel.input)
            })
            .collect::<Result<Vec<_>>>()?;
        let l = normalized_gram(outputs, kernel.output)?;
        Self::from_grams(&grams, &l)
    }

    pub fn from_grams(grams: &[GramMatrix], output: &GramMatrix) -> Result<Self> {
        let n = grams.len();
        let active: Vec<bool> = grams.iter().map(|k| !k.is_degenerate()).collect();
        let mut q = vec![0.0; n * n];
        let mut c = vec![0.0; n];
        for i in 0..n {
            if !active[i] {
                continue;
            }
            c[i] = hsic(&grams[i], output)?;
            for j in 0..=i {
                if active[j] {
                    let v = hsic(&grams[i], &grams[j])?;
                    q[i * n + j] = v;
                    q[j * n + i] = v;
                }
            }
        }
        let output_norm_sq = if output.is_degenerate() { 0.0 } else { hsic(output, output)? };
        Ok(Self { n, q, c, active, output_norm_sq })
    }

    /// Direct construction; `q` must be symmetric positive semidefinite.
    pub fn from_parts(q: Vec<f64>, c: Vec<f64>, output_norm_sq: f64) -> Result<Self> {
        let n = c.len();
        if q.len() != n * n {
            return Err(Error::Dimension(format!("Q has {} entries, expected {}", q.len(), n * n)));
        }
        let active = (0..n).map(|i| q[i * n + i] > 0.0).collect();
        Ok(Self { n, q, c, active, output_norm_sq })
    }

    pub fn num_elements(&self) -> usize {
        self.n
    }

    pub fn q(&self, i: usize, j: usize) -> f64 {
        self.q[i * self.n + j]
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    pub fn is_active(&self, i: usize) -> bool {
        self.active[i]
    }

    /// `½‖L − Σ α_ν K_ν‖²_F` through the expansion.
    pub fn smooth(&self, alpha: &[f64]) -> f64 {
        let mut quad = 0.0;
        for i in 0..self.n {
            let row = &self.q[i * self.n..(i + 1) * self.n];
            quad += alpha[i] * row.iter().zip(alpha).map(|(a, b)| a * b).sum::<f64>();
        }
        let lin: f64 = self.c.iter().zip(alpha).map(|(a, b)| a * b).sum();
        0.5 * (self.output_norm_sq - 2.0 * lin + quad)
    }

    /// `Qα − c`.
    pub fn gradient(&self, alpha: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let row = &self.q[i * self.n..(i + 1) * self.n];
                row.iter().zip(alpha).map(|(a, b)| a * b).sum::<f64>() - self.c[i]
            })
            .collect()
    }

    /// Largest eigenvalue of `Q` restricted to active columns.
    pub fn lipschitz(&self) -> f64 {
        let idx: Vec<usize> = (0..self.n).filter(|&i| self.active[i]).collect();
        if idx.is_empty() {
            return 0.0;
        }
        let m = DMatrix::from_fn(idx.len(), idx.len(), |a, b| self.q(idx[a], idx[b]));
        m.symmetric_eigenvalues().max()
    }
}

fn relative_change(old: f64, new: f64) -> f64 {
    (old - new).abs() / old.abs().max(new.abs()).max(1e-12)
}
