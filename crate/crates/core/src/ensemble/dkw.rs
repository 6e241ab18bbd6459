//! Minimum ensemble sizes from the Dvoretzky–Kiefer–Wolfowitz inequality.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `ceil(x)`, treating values within 1e-9 (relative) of an integer as that
/// integer so equality cases of the bound are not bumped up by rounding.
fn snapped_ceil(x: f64) -> u64 {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * x.abs().max(1.0) {
        r as u64
    } else {
        x.ceil() as u64
    }
}

fn check(eps: f64, delta: f64) -> Result<()> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Config(format!("epsilon must be positive, got {eps}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Config(format!("delta must lie in (0, 1), got {delta}")));
    }
    Ok(())
}

/// Smallest `m` with `2·exp(−2mε²) ≤ δ`.
pub fn plan_dkw(eps: f64, delta: f64) -> Result<u64> {
    check(eps, delta)?;
    Ok(snapped_ceil((2.0 / delta).ln() / (2.0 * eps * eps)))
}

/// Union bound over `n_graphs × k_statistics` CDFs.
pub fn plan_dkw_simultaneous(eps: f64, delta: f64, n_graphs: u64, k_statistics: u64) -> Result<u64> {
    check(eps, delta)?;
    if n_graphs == 0 || k_statistics == 0 {
        return Err(Error::Config("graph and statistic counts must be at least 1".into()));
    }
    let events = n_graphs as f64 * k_statistics as f64;
    Ok(snapped_ceil((2.0 * events / delta).ln() / (2.0 * eps * eps)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DkwPlan {
    pub eps: f64,
    pub delta: f64,
    pub n_graphs: u64,
    pub k_statistics: u64,
    pub m_min_single: u64,
    pub m_min_simultaneous: u64,
}

impl DkwPlan {
    pub fn new(eps: f64, delta: f64, n_graphs: u64, k_statistics: u64) -> Result<Self> {
        Ok(Self {
            eps,
            delta,
            n_graphs,
            k_statistics,
            m_min_single: plan_dkw(eps, delta)?,
            m_min_simultaneous: plan_dkw_simultaneous(eps, delta, n_graphs, k_statistics)?,
        })
    }
}

/// `sup_x |F_m(x) − F(x)|` for a continuous `cdf`, evaluated at the jumps of
/// the empirical CDF (tied samples form a single jump).
pub fn ecdf_sup_deviation(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let m = xs.len() as f64;
    let mut worst = 0.0f64;
    let mut i = 0;
    while i < xs.len() {
        let mut j = i;
        while j + 1 < xs.len() && xs[j + 1] == xs[i] {
            j += 1;
        }
        let f = cdf(xs[i]);
        worst = worst.max((f - i as f64 / m).abs()).max(((j + 1) as f64 / m - f).abs());
        i = j + 1;
    }
    worst
}
