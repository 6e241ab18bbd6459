//! L2-regularized logistic regression on mask rows: the linear baseline.

use nalgebra::DMatrix;

use super::{relative_change, SolverConfig, SurrogateFit, SurrogateKind};
use crate::error::{Error, Result};
use crate::sim::sigmoid;

pub const LOGISTIC_REG: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
    pub converged: bool,
    pub history: Vec<f64>,
}

impl LogisticModel {
    pub fn decision(&self, x: &[f64]) -> f64 {
        self.bias + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }
}

fn loss_and_grad(x: &[Vec<f64>], y: &[f64], w: &[f64], b: f64, reg: f64) -> (f64, Vec<f64>, f64) {
    let p = x.len() as f64;
    let mut loss = 0.0;
    let mut gw = vec![0.0; w.len()];
    let mut gb = 0.0;
    for (row, &t) in x.iter().zip(y) {
        let s = b + row.iter().zip(w).map(|(a, c)| a * c).sum::<f64>();
        // log(1 + e^s) − t·s, computed stably
        loss += s.max(0.0) + (-s.abs()).exp().ln_1p() - t * s;
        let r = sigmoid(s) - t;
        gb += r;
        for (g, a) in gw.iter_mut().zip(row) {
            *g += r * a;
        }
    }
    loss /= p;
    gb /= p;
    for (g, wi) in gw.iter_mut().zip(w) {
        *g = *g / p + reg * wi;
    }
    loss += 0.5 * reg * w.iter().map(|v| v * v).sum::<f64>();
    (loss, gw, gb)
}

/// Nesterov-accelerated gradient descent with function-value restarts.
pub fn train_logistic(x: &[Vec<f64>], y: &[f64], reg: f64, solver: &SolverConfig) -> Result<LogisticModel> {
    let p = x.len();
    if p == 0 || y.len() != p {
        return Err(Error::Dimension(format!("{p} rows but {} labels", y.len())));
    }
    let n = x[0].len();
    let design = DMatrix::from_fn(p, n + 1, |i, j| if j == n { 1.0 } else { x[i][j] });
    let gram = design.transpose() * &design / p as f64;
    let lip = 0.25 * gram.symmetric_eigenvalues().max() + reg;
    let step = 1.0 / lip;

    let mut w = vec![0.0; n];
    let mut b = 0.0;
    let (mut yw, mut yb) = (w.clone(), b);
    let mut t = 1.0f64;
    let (mut current, _, _) = loss_and_grad(x, y, &w, b, reg);
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < solver.max_iter {
        iterations += 1;
        let (_, gw, gb) = loss_and_grad(x, y, &yw, yb, reg);
        let nw: Vec<f64> = yw.iter().zip(&gw).map(|(a, g)| a - step * g).collect();
        let nb = yb - step * gb;
        let (value, gw2, gb2) = loss_and_grad(x, y, &nw, nb, reg);
        if value > current {
            // restart momentum from the last accepted point
            yw = w.clone();
            yb = b;
            t = 1.0;
            continue;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let beta = (t - 1.0) / t_next;
        yw = nw.iter().zip(&w).map(|(a, o)| a + beta * (a - o)).collect();
        yb = nb + beta * (nb - b);
        t = t_next;
        w = nw;
        b = nb;
        let change = relative_change(current, value);
        current = value;
        history.push(value);
        let gmax = gw2.iter().fold(gb2.abs(), |m, g| m.max(g.abs()));
        if change < solver.tol && gmax < solver.kkt_tol {
            converged = true;
            break;
        }
    }
    Ok(LogisticModel { weights: w, bias: b, iterations, converged, history })
}

/// Scores are coefficient magnitudes; targets are binarized at 0.5.
pub fn fit_logistic(z: &[Vec<u8>], outputs: &[f64], solver: &SolverConfig) -> Result<SurrogateFit> {
    if z.len() != outputs.len() || z.is_empty() {
        return Err(Error::Dimension(format!("{} mask rows but {} outputs", z.len(), outputs.len())));
    }
    let n = z[0].len();
    let labels: Vec<f64> = outputs.iter().map(|&o| if o >= 0.5 { 1.0 } else { 0.0 }).collect();
    if labels.iter().all(|&l| l == labels[0]) {
        return Ok(SurrogateFit {
            kind: SurrogateKind::Logistic,
            alpha: vec![1.0 / n as f64; n],
            objective: 0.0,
            iterations: 0,
            converged: true,
            degenerate: true,
            history: Vec::new(),
        });
    }
    let x: Vec<Vec<f64>> = z.iter().map(|r| r.iter().map(|&v| f64::from(v)).collect()).collect();
    let m = train_logistic(&x, &labels, LOGISTIC_REG, solver)?;
    Ok(SurrogateFit {
        kind: SurrogateKind::Logistic,
        alpha: m.weights.iter().map(|w| w.abs()).collect(),
        objective: m.history.last().copied().unwrap_or(f64::NAN),
        iterations: m.iterations,
        converged: m.converged,
        degenerate: false,
        history: m.history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use rand::Rng;

    #[test]
    fn perfect_predictor_dominates() {
        let mut rng = seed::rng(8);
        let z: Vec<Vec<u8>> = (0..60).map(|_| (0..6).map(|_| rng.random_bool(0.5) as u8).collect()).collect();
        let y: Vec<f64> = z.iter().map(|r| if r[4] == 1 { 0.8 } else { 0.3 }).collect();
        let fit = fit_logistic(&z, &y, &SolverConfig::default()).unwrap();
        let best = (0..6).max_by(|&a, &b| fit.alpha[a].total_cmp(&fit.alpha[b])).unwrap();
        assert_eq!(best, 4);
        assert!(fit.alpha.iter().all(|&a| a >= 0.0));
    }

    #[test]
    fn single_class_is_degenerate() {
        let z = vec![vec![1, 0, 1], vec![0, 1, 1]];
        let fit = fit_logistic(&z, &[0.9, 0.7], &SolverConfig::default()).unwrap();
        assert!(fit.degenerate);
        assert_eq!(fit.alpha, vec![1.0 / 3.0; 3]);
    }

    /// OR of two bits. A perceptron started at zero with unit rate, cycling
    /// the points in order, settles by hand at w = (1, 1), b = 0 with the
    /// convention "predict 1 iff w·x + b > 0"; (0,0) then needs b ≤ 0 and
    /// the others b > −1. The logistic boundary must classify identically.
    #[test]
    fn separable_or_matches_perceptron() {
        let x = vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]];
        let y = vec![0.0, 1.0, 1.0, 1.0];
        let (pw, pb) = ([1.0, 1.0], 0.0);
        let m = train_logistic(&x, &y, LOGISTIC_REG, &SolverConfig::default()).unwrap();
        for row in &x {
            let perceptron = pw[0] * row[0] + pw[1] * row[1] + pb > 0.0;
            assert_eq!(m.decision(row) > 0.0, perceptron, "{row:?}");
        }
        assert!(m.converged);
    }

    #[test]
    fn loss_gradient_matches_finite_differences() {
        let x = vec![vec![1.0, 0.0, 1.0], vec![0.0, 1.0, 1.0], vec![1.0, 1.0, 0.0]];
        let y = vec![1.0, 0.0, 1.0];
        let w = vec![0.3, -0.7, 0.2];
        let b = 0.1;
        let (_, gw, gb) = loss_and_grad(&x, &y, &w, b, 0.05);
        let h = 1e-6;
        for i in 0..3 {
            let mut up = w.clone();
            up[i] += h;
            let mut dn = w.clone();
            dn[i] -= h;
            let fd = (loss_and_grad(&x, &y, &up, b, 0.05).0 - loss_and_grad(&x, &y, &dn, b, 0.05).0) / (2.0 * h);
            assert!((fd - gw[i]).abs() < 1e-8);
        }
        let fd = (loss_and_grad(&x, &y, &w, b + h, 0.05).0 - loss_and_grad(&x, &y, &w, b - h, 0.05).0) / (2.0 * h);
        assert!((fd - gb).abs() < 1e-8);
    }
}
