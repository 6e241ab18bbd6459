//! Non-negative HSIC lasso by cyclic projected coordinate descent.

use super::{relative_change, HsicProblem, KernelConfig, SolverConfig, SurrogateFit, SurrogateKind};
use crate::error::{Error, Result};

pub fn fit_hsic_l1(
    z: &[Vec<u8>],
    outputs: &[f64],
    lambda: f64,
    kernel: &KernelConfig,
    solver: &SolverConfig,
) -> Result<SurrogateFit> {
    fit_hsic_l1_problem(&HsicProblem::from_samples(z, outputs, kernel)?, lambda, solver)
}

/// Largest violation of the optimality conditions for
/// `smooth(α) + λΣα`, `α ≥ 0`: `|∇_ν| ` on the support, `max(0, −∇_ν)` off it.
pub fn l1_kkt_residual(problem: &HsicProblem, alpha: &[f64], lambda: f64) -> f64 {
    let g = problem.gradient(alpha);
    (0..alpha.len())
        .filter(|&i| problem.is_active(i))
        .map(|i| {
            let d = g[i] + lambda;
            if alpha[i] > 0.0 {
                d.abs()
            } else {
                (-d).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

pub fn fit_hsic_l1_problem(problem: &HsicProblem, lambda: f64, solver: &SolverConfig) -> Result<SurrogateFit> {
    if !(lambda > 0.0) {
        return Err(Error::Config(format!("penalty must be positive, got {lambda}")));
    }
    let n = problem.num_elements();
    let objective = |a: &[f64]| problem.smooth(a) + lambda * a.iter().sum::<f64>();
    let mut alpha = vec![0.0; n];
    let mut grad = problem.gradient(&alpha);
    let mut current = objective(&alpha);
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    while iterations < solver.max_iter {
        iterations += 1;
        for i in (0..n).filter(|&i| problem.is_active(i)) {
            let next = (alpha[i] - (grad[i] + lambda) / problem.q(i, i)).max(0.0);
            let delta = next - alpha[i];
            if delta != 0.0 {
                alpha[i] = next;
                for (j, g) in grad.iter_mut().enumerate() {
                    *g += delta * problem.q(j, i);
                }
            }
        }
        grad = problem.gradient(&alpha);
        let value = objective(&alpha);
        history.push(value);
        let change = relative_change(current, value);
        current = value;
        if change < solver.tol && l1_kkt_residual(problem, &alpha, lambda) <= solver.kkt_tol {
            converged = true;
            break;
        }
    }
    Ok(SurrogateFit {
        kind: SurrogateKind::HsicL1,
        alpha,
        objective: current,
        iterations,
        converged,
        degenerate: (0..n).all(|i| !problem.is_active(i)),
        history,
    })
}
