//! Overlapping-group HSIC lasso through latent group copies and monotone
//! FISTA. Each group owns a copy of its members' coefficients and
//! `α_ν = Σ_{π ∋ ν} copy_{π,ν}`, so the penalty separates over groups.

use serde::{Deserialize, Serialize};

use super::{relative_change, HsicProblem, KernelConfig, SolverConfig, SurrogateFit, SurrogateKind};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::perturb::ElementKind;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupStructure {
    groups: Vec<Vec<usize>>,
}

impl GroupStructure {
    pub fn new(groups: Vec<Vec<usize>>, num_elements: usize) -> Result<Self> {
        let mut covered = vec![false; num_elements];
        for g in &groups {
            if g.is_empty() {
                return Err(Error::Config("empty group".into()));
            }
            for &i in g {
                if i >= num_elements {
                    return Err(Error::InvalidElement { index: i, count: num_elements });
                }
                covered[i] = true;
            }
        }
        if let Some(i) = covered.iter().position(|c| !c) {
            return Err(Error::Config(format!("element {i} belongs to no group")));
        }
        Ok(Self { groups })
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn max_overlap(&self, num_elements: usize) -> usize {
        let mut count = vec![0usize; num_elements];
        self.groups.iter().flatten().for_each(|&i| count[i] += 1);
        count.into_iter().max().unwrap_or(0)
    }
}

/// Nodes: closed 1-hop neighbourhood of each node. Edges: the edges incident
/// to each non-isolated node.
pub fn build_groups(g: &Graph, kind: ElementKind) -> GroupStructure {
    let groups = match kind {
        ElementKind::Nodes => g
            .adjacency()
            .into_iter()
            .enumerate()
            .map(|(v, mut nb)| {
                nb.push(v);
                nb.sort_unstable();
                nb
            })
            .collect(),
        ElementKind::Edges => {
            let mut inc = vec![Vec::new(); g.num_nodes()];
            for (e, &(u, v)) in g.edges().iter().enumerate() {
                inc[u].push(e);
                inc[v].push(e);
            }
            inc.into_iter().filter(|x| !x.is_empty()).collect()
        }
    };
    let n = match kind {
        ElementKind::Nodes => g.num_nodes(),
        ElementKind::Edges => g.num_edges(),
    };
    GroupStructure::new(groups, n).expect("neighbourhood groups cover every element")
}

pub fn fit_hsic_group(
    z: &[Vec<u8>],
    outputs: &[f64],
    lambda: f64,
    groups: &GroupStructure,
    kernel: &KernelConfig,
    solver: &SolverConfig,
) -> Result<SurrogateFit> {
    fit_hsic_group_problem(&HsicProblem::from_samples(z, outputs, kernel)?, lambda, groups, solver)
}

struct Latent<'a> {
    problem: &'a HsicProblem,
    blocks: Vec<Vec<usize>>,
    lambda: f64,
}

impl Latent<'_> {
    fn collapse(&self, v: &[f64]) -> Vec<f64> {
        let mut alpha = vec![0.0; self.problem.num_elements()];
        for (&i, x) in self.blocks.iter().flatten().zip(v) {
            alpha[i] += x;
        }
        alpha
    }

    fn penalty(&self, v: &[f64]) -> f64 {
        let mut at = 0;
        let mut total = 0.0;
        for b in &self.blocks {
            total += v[at..at + b.len()].iter().map(|x| x * x).sum::<f64>().sqrt();
            at += b.len();
        }
        self.lambda * total
    }

    fn objective(&self, v: &[f64]) -> f64 {
        self.problem.smooth(&self.collapse(v)) + self.penalty(v)
    }

    fn gradient(&self, v: &[f64]) -> Vec<f64> {
        let g = self.problem.gradient(&self.collapse(v));
        self.blocks.iter().flatten().map(|&i| g[i]).collect()
    }

    /// Non-negative projection then group soft-threshold at `step·λ`.
    fn prox(&self, w: &mut [f64], step: f64) {
        let mut at = 0;
        for b in &self.blocks {
            let block = &mut w[at..at + b.len()];
            block.iter_mut().for_each(|x| *x = x.max(0.0));
            let norm = block.iter().map(|x| x * x).sum::<f64>().sqrt();
            let scale = if norm > 0.0 { (1.0 - step * self.lambda / norm).max(0.0) } else { 0.0 };
            block.iter_mut().for_each(|x| *x *= scale);
            at += b.len();
        }
    }

    fn step_from(&self, y: &[f64], step: f64) -> Vec<f64> {
        let g = self.gradient(y);
        let mut z: Vec<f64> = y.iter().zip(&g).map(|(a, b)| a - step * b).collect();
        self.prox(&mut z, step);
        z
    }

    /// Infinity norm of the proximal-gradient mapping at `v`.
    fn residual(&self, v: &[f64], step: f64) -> f64 {
        let z = self.step_from(v, step);
        v.iter().zip(&z).map(|(a, b)| (a - b).abs() / step).fold(0.0, f64::max)
    }
}

pub fn fit_hsic_group_problem(
    problem: &HsicProblem,
    lambda: f64,
    groups: &GroupStructure,
    solver: &SolverConfig,
) -> Result<SurrogateFit> {
    if !(lambda > 0.0) {
        return Err(Error::Config(format!("penalty must be positive, got {lambda}")));
    }
    let n = problem.num_elements();
    if groups.groups().iter().flatten().any(|&i| i >= n) {
        return Err(Error::Dimension(format!("groups reference elements beyond {n}")));
    }
    let blocks: Vec<Vec<usize>> = groups
        .groups()
        .iter()
        .map(|g| g.iter().cloned().filter(|&i| problem.is_active(i)).collect::<Vec<_>>())
        .filter(|g| !g.is_empty())
        .collect();
    let latent = Latent { problem, blocks, lambda };
    let dim: usize = latent.blocks.iter().map(Vec::len).sum();
    let lq = problem.lipschitz();
    if dim == 0 || lq <= 0.0 {
        let alpha = vec![0.0; n];
        let objective = problem.smooth(&alpha);
        return Ok(SurrogateFit {
            kind: SurrogateKind::HsicGroup,
            alpha,
            objective,
            iterations: 0,
            converged: true,
            degenerate: true,
            history: vec![objective],
        });
    }
    let overlap = GroupStructure { groups: latent.blocks.clone() }.max_overlap(n);
    let step = 1.0 / (lq * overlap as f64);

    let mut x = vec![0.0; dim];
    let mut y = x.clone();
    let mut t = 1.0f64;
    let mut current = latent.objective(&x);
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    while iterations < solver.max_iter {
        iterations += 1;
        let z = latent.step_from(&y, step);
        let fz = latent.objective(&z);
        let prev = x.clone();
        let value = if fz <= current {
            x = z.clone();
            fz
        } else {
            current
        };
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        for i in 0..dim {
            y[i] = x[i] + (t / t_next) * (z[i] - x[i]) + ((t - 1.0) / t_next) * (x[i] - prev[i]);
        }
        t = t_next;
        history.push(value);
        let change = relative_change(current, value);
        current = value;
        if change < solver.tol && latent.residual(&x, step) <= solver.kkt_tol {
            converged = true;
            break;
        }
    }
    Ok(SurrogateFit {
        kind: SurrogateKind::HsicGroup,
        alpha: latent.collapse(&x),
        objective: current,
        iterations,
        converged,
        degenerate: false,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{make_cycle, make_wheel};
    use crate::seed;
    use rand::Rng;

    fn random_problem(seed: u64, n: usize, p: usize) -> HsicProblem {
        let mut rng = seed::rng(seed);
        loop {
            let z: Vec<Vec<u8>> = (0..p).map(|_| (0..n).map(|_| rng.random_bool(0.5) as u8).collect()).collect();
            let y: Vec<f64> = (0..p).map(|_| rng.random::<f64>()).collect();
            if let Ok(prob) = HsicProblem::from_samples(&z, &y, &KernelConfig::default()) {
                return prob;
            }
        }
    }

    #[test]
    fn neighbourhood_groups() {
        let w = make_wheel(4, 0, 0).unwrap();
        let groups = build_groups(&w, ElementKind::Nodes);
        assert_eq!(groups.groups()[0], vec![0, 1, 2, 3, 4]);
        let c = make_cycle(4).unwrap();
        assert!(build_groups(&c, ElementKind::Nodes).groups().iter().all(|g| g.len() == 3));
        let e = build_groups(&c, ElementKind::Edges);
        assert_eq!(e.groups().len(), 4);
        assert!(e.groups().iter().all(|g| g.len() == 2));
    }

    #[test]
    fn structure_validation() {
        assert!(GroupStructure::new(vec![vec![0], vec![]], 1).is_err());
        assert!(GroupStructure::new(vec![vec![0]], 2).is_err());
        assert!(GroupStructure::new(vec![vec![0, 2]], 2).is_err());
        let g = GroupStructure::new(vec![vec![0, 1], vec![1, 2]], 3).unwrap();
        assert_eq!(g.max_overlap(3), 2);
    }

    #[test]
    fn huge_penalty_gives_zero() {
        let prob = random_problem(2, 4, 20);
        let groups = GroupStructure::new(vec![vec![0, 1], vec![1, 2, 3]], 4).unwrap();
        let fit = fit_hsic_group_problem(&prob, 10.0, &groups, &SolverConfig::default()).unwrap();
        assert!(fit.alpha.iter().all(|&a| a == 0.0));
        assert!(fit.converged);
    }

    /// One group over two elements: `α = t·(cos φ, sin φ)` and the best `t`
    /// for a direction is `max(0, cᵀu − λ)/uᵀQu`, leaving a 1-D search.
    fn one_group_oracle(prob: &HsicProblem, lambda: f64) -> f64 {
        let value = |phi: f64| {
            let u = [phi.cos(), phi.sin()];
            let cu = prob.c()[0] * u[0] + prob.c()[1] * u[1];
            let quq = prob.q(0, 0) * u[0] * u[0] + 2.0 * prob.q(0, 1) * u[0] * u[1] + prob.q(1, 1) * u[1] * u[1];
            let t = ((cu - lambda) / quq).max(0.0);
            let a = [t * u[0], t * u[1]];
            prob.smooth(&a) + lambda * t
        };
        let (mut lo, mut hi) = (0.0, std::f64::consts::FRAC_PI_2);
        let mut best = (f64::INFINITY, 0.0);
        for _ in 0..6 {
            for k in 0..=200 {
                let phi = lo + (hi - lo) * k as f64 / 200.0;
                let v = value(phi);
                if v < best.0 {
                    best = (v, phi);
                }
            }
            let w = (hi - lo) / 100.0;
            lo = (best.1 - w).max(0.0);
            hi = (best.1 + w).min(std::f64::consts::FRAC_PI_2);
        }
        best.0
    }

    #[test]
    fn single_group_matches_line_search() {
        for s in 0..10 {
            let prob = random_problem(100 + s, 2, 8);
            let groups = GroupStructure::new(vec![vec![0, 1]], 2).unwrap();
            for lambda in [1e-3, 1e-2, 5e-2] {
                let fit = fit_hsic_group_problem(&prob, lambda, &groups, &SolverConfig::default()).unwrap();
                let oracle = one_group_oracle(&prob, lambda);
                assert!((fit.objective - oracle).abs() < 1e-5, "seed {s}: {} vs {oracle}", fit.objective);
            }
        }
    }

    #[test]
    fn orthogonal_blocks_keep_silent_group_at_zero() {
        // elements {0,1} carry the signal, {2,3} are orthogonal and uncorrelated
        let q = vec![
            1.0, 0.3, 0.0, 0.0, //
            0.3, 1.0, 0.0, 0.0, //
            0.0, 0.0, 1.0, 0.2, //
            0.0, 0.0, 0.2, 1.0,
        ];
        let prob = HsicProblem::from_parts(q, vec![0.6, 0.4, 0.0, 0.0], 1.0).unwrap();
        let groups = GroupStructure::new(vec![vec![0, 1], vec![2, 3]], 4).unwrap();
        let fit = fit_hsic_group_problem(&prob, 0.05, &groups, &SolverConfig::default()).unwrap();
        assert!(fit.converged);
        assert!(fit.alpha[0] > 0.0 && fit.alpha[1] > 0.0);
        assert_eq!(fit.alpha[2], 0.0);
        assert_eq!(fit.alpha[3], 0.0);
    }

    #[test]
    fn objective_never_increases() {
        for s in 0..20 {
            let prob = random_problem(s, 5, 30);
            let groups = GroupStructure::new(vec![vec![0, 1, 2], vec![2, 3], vec![3, 4, 0]], 5).unwrap();
            let fit = fit_hsic_group_problem(&prob, 1e-2, &groups, &SolverConfig::default()).unwrap();
            assert!(fit.alpha.iter().all(|&a| a >= 0.0));
            for w in fit.history.windows(2) {
                assert!(w[1] <= w[0]);
            }
            assert!(fit.converged, "seed {s} after {} iterations", fit.iterations);
        }
    }
}
