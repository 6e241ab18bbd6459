//! Cross-product sweeps over explanation settings, one metrics report per cell.

use std::path::Path;

use serde::Serialize;

use qglime_core::ensemble::{explain_from_samples, sample_ensemble, EnsembleConfig};
use qglime_core::hsic::SurrogateKind;
use qglime_core::metrics::{evaluate_method, Attribution};
use qglime_core::perturb::Strategy;

use crate::commands::{load_dataset, load_model, test_graphs, Outputs};
use crate::config::{AblationConfig, Axis, MeasurementRegime, RunConfig};
use crate::exit::usage;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Cell {
    pub name: String,
    pub perturbation: Strategy,
    pub surrogate: SurrogateKind,
    pub measurement: MeasurementRegime,
    pub lambda: f64,
}

impl Cell {
    pub fn config(&self, base: &EnsembleConfig) -> EnsembleConfig {
        let mut c = base.clone();
        c.perturb.strategy = self.perturbation;
        c.surrogate = self.surrogate;
        c.lambda = self.lambda;
        if self.measurement == MeasurementRegime::SingleShot {
            c.num_surrogates = 1;
        }
        c
    }
}

fn label<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default()
}

/// Cells of the requested axes; axes not requested stay at the base
/// setting. The logistic surrogate has no penalty, so it gets one cell
/// instead of one per penalty value.
pub fn cells(base: &EnsembleConfig, ab: &AblationConfig) -> Vec<Cell> {
    let on = |a| ab.axes.contains(&a);
    let strategies = if on(Axis::Perturbation) { ab.strategies.clone() } else { vec![base.perturb.strategy] };
    let surrogates = if on(Axis::Surrogate) { ab.surrogates.clone() } else { vec![base.surrogate] };
    let regimes = if on(Axis::Measurement) { ab.measurements.clone() } else { vec![MeasurementRegime::MultiShot] };
    let lambdas = if on(Axis::Lambda) { ab.lambdas.clone() } else { vec![base.lambda] };
    let mut out = Vec::new();
    for &perturbation in &strategies {
        for &surrogate in &surrogates {
            for &measurement in &regimes {
                let ls = if surrogate == SurrogateKind::Logistic { vec![base.lambda] } else { lambdas.clone() };
                for lambda in ls {
                    let name = format!(
                        "{}-{}-{}-lambda{:e}",
                        label(&perturbation),
                        surrogate,
                        label(&measurement),
                        lambda
                    );
                    out.push(Cell { name, perturbation, surrogate, measurement, lambda });
                }
            }
        }
    }
    out
}

#[derive(Serialize)]
struct CellStatus<'a> {
    #[serde(flatten)]
    cell: &'a Cell,
    error: Option<String>,
}

pub fn ablate_cmd(mut cfg: RunConfig) -> anyhow::Result<()> {
    let ds = load_dataset(&mut cfg)?;
    let model = load_model(&cfg)?;
    cfg.resolve();
    cfg.ensemble.validate()?;
    let cells = cells(&cfg.ensemble, &cfg.ablation);
    if cells.is_empty() {
        return Err(usage("the ablation matrix is empty"));
    }
    let graphs = test_graphs(&ds, &cfg);
    let mut attrs: Vec<Vec<Attribution>> = vec![Vec::new(); cells.len()];
    let mut errors: Vec<Option<String>> = vec![None; cells.len()];

    // Samples depend only on the perturbation strategy; every other axis
    // refits the same draws.
    for g in graphs {
        let mut strategies: Vec<Strategy> = cells.iter().map(|c| c.perturbation).collect();
        strategies.dedup();
        for s in strategies {
            let mut scfg = cfg.ensemble.clone();
            scfg.perturb.strategy = s;
            let samples = sample_ensemble(g, &model, &scfg);
            for (i, cell) in cells.iter().enumerate().filter(|(_, c)| c.perturbation == s) {
                if errors[i].is_some() {
                    continue;
                }
                let result = samples.as_ref().map_err(|e| e.to_string()).and_then(|samples| {
                    let used = match cell.measurement {
                        MeasurementRegime::SingleShot => &samples[..1],
                        MeasurementRegime::MultiShot => &samples[..],
                    };
                    explain_from_samples(g, used, &cell.config(&cfg.ensemble), Vec::new()).map_err(|e| e.to_string())
                });
                match result {
                    Ok(e) => attrs[i].push(Attribution::from(&e)),
                    Err(e) => errors[i] = Some(format!("graph {}: {e}", g.id)),
                }
            }
        }
    }

    let mut out = Outputs::default();
    let mut csv = String::from("cell,perturbation,surrogate,measurement,lambda,metric,mean,std\n");
    for (i, cell) in cells.iter().enumerate() {
        if errors[i].is_some() {
            continue;
        }
        match evaluate_method(&cell.name, &attrs[i], graphs, &model, &cfg.metrics) {
            Ok(report) => {
                for r in &report.rows {
                    csv.push_str(&format!(
                        "{},{},{},{},{},{},{},{}\n",
                        cell.name,
                        label(&cell.perturbation),
                        cell.surrogate,
                        label(&cell.measurement),
                        cell.lambda,
                        r.metric,
                        r.mean,
                        r.std
                    ));
                }
                out.add(Path::new("cells").join(format!("{}.json", cell.name)), serde_json::to_string(&report)?);
            }
            Err(e) => errors[i] = Some(e.to_string()),
        }
    }
    let status: Vec<CellStatus> = cells.iter().zip(&errors).map(|(cell, e)| CellStatus { cell, error: e.clone() }).collect();
    let failed = errors.iter().filter(|e| e.is_some()).count();
    for s in status.iter().filter(|s| s.error.is_some()) {
        eprintln!("cell {} failed: {}", s.cell.name, s.error.as_deref().unwrap_or_default());
        out.note(format!("cell {} failed", s.cell.name));
    }
    print!("{csv}");
    out.add("ablation.csv", csv);
    out.add("ablation.json", serde_json::to_string(&status)?);
    out.note(format!("{} cells, {failed} failed", cells.len()));
    out.commit("ablate", &cfg)
}
