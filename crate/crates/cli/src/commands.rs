//! One function per subcommand. Inputs are read and every result computed
//! before anything is written, so a failing run leaves no partial outputs.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::Context;
use serde::Serialize;

use qglime_core::dataset::{generate_dataset, Dataset};
use qglime_core::ensemble::{
    explain, explain_from_samples, flip_probabilities, percentile, sample_ensemble, DkwPlan, EnsembleExplanation,
};
use qglime_core::graph::Graph;
use qglime_core::metrics::{evaluate_method, random_explainer, Attribution, MetricsReport};
use qglime_core::perturb::PerturbationDump;
use qglime_core::sim::EduQgcModel;
use qglime_core::train::train;

use crate::config::{Manifest, RunConfig};
use crate::exit::usage;

/// Files produced by a command, kept in memory until the run succeeds.
#[derive(Default)]
pub struct Outputs {
    files: Vec<(PathBuf, String)>,
    notes: Vec<String>,
}

impl Outputs {
    pub fn add(&mut self, rel: impl Into<PathBuf>, contents: String) {
        self.files.push((rel.into(), contents));
    }

    pub fn note(&mut self, line: impl Into<String>) {
        self.notes.push(line.into());
    }

    /// Writes the files, the manifest and the timestamped `run.log` sidecar.
    pub fn commit(self, command: &str, cfg: &RunConfig) -> anyhow::Result<()> {
        let out = &cfg.out;
        let started = timestamp();
        for (rel, contents) in &self.files {
            write_file(&out.join(rel), contents)?;
        }
        let manifest = serde_json::to_string_pretty(&Manifest::new(command, cfg))?;
        write_file(&out.join("run-manifest.json"), &(manifest + "\n"))?;
        let mut log = String::new();
        log.push_str(&format!("{started} {command} start\n"));
        for n in &self.notes {
            log.push_str(&format!("{started} {command} {n}\n"));
        }
        log.push_str(&format!("{} {command} wrote {} files\n", timestamp(), self.files.len() + 1));
        let path = out.join("run.log");
        let previous = fs::read_to_string(&path).unwrap_or_default();
        write_file(&path, &(previous + &log))
    }
}

fn timestamp() -> String {
    let d = SystemTime::now().duration_since(UNIX_EPOCH).unwrap_or_default();
    format!("{}.{:03}", d.as_secs(), d.subsec_millis())
}

fn write_file(path: &Path, contents: &str) -> anyhow::Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn read_file(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

pub fn load_dataset(cfg: &mut RunConfig) -> anyhow::Result<Dataset> {
    let path = cfg.dataset.clone().ok_or_else(|| usage("--dataset is required"))?;
    let ds = Dataset::from_json(&read_file(&path)?).with_context(|| format!("parsing dataset {}", path.display()))?;
    cfg.case = ds.case_id;
    Ok(ds)
}

pub fn load_model(cfg: &RunConfig) -> anyhow::Result<EduQgcModel> {
    let path = cfg.checkpoint.clone().ok_or_else(|| usage("--checkpoint is required"))?;
    EduQgcModel::from_checkpoint_json(&read_file(&path)?).with_context(|| format!("parsing checkpoint {}", path.display()))
}

pub fn test_graphs<'a>(ds: &'a Dataset, cfg: &RunConfig) -> &'a [Graph] {
    let n = cfg.max_graphs.map_or(ds.test.len(), |m| m.min(ds.test.len()));
    &ds.test[..n]
}

fn graph_file(id: u64) -> String {
    format!("graph-{id:06}.json")
}

pub fn gen_data(cfg: RunConfig) -> anyhow::Result<()> {
    let ds = generate_dataset(cfg.case, cfg.seed);
    let mut out = Outputs::default();
    out.note(format!("{} train / {} test graphs", ds.train.len(), ds.test.len()));
    out.add("dataset.json", ds.to_json()?);
    println!("{} graphs ({} train, {} test)", ds.train.len() + ds.test.len(), ds.train.len(), ds.test.len());
    out.commit("gen-data", &cfg)
}

pub fn train_cmd(mut cfg: RunConfig) -> anyhow::Result<()> {
    let ds = load_dataset(&mut cfg)?;
    cfg.resolve();
    let (model, report) = train(&ds, &cfg.train)?;
    let mut out = Outputs::default();
    out.add("checkpoint.json", model.to_checkpoint_json()?);
    out.add("train_log.csv", report.to_csv());
    out.note(format!("final test accuracy {}", report.final_test_accuracy));
    println!("test accuracy {:.4}", report.final_test_accuracy);
    out.commit("train", &cfg)
}

pub fn explain_cmd(mut cfg: RunConfig) -> anyhow::Result<()> {
    let ds = load_dataset(&mut cfg)?;
    let model = load_model(&cfg)?;
    cfg.resolve();
    cfg.ensemble.validate()?;
    let mut out = Outputs::default();
    let mut nonconverged = 0;
    for g in test_graphs(&ds, &cfg) {
        let e = if cfg.dump_perturbations {
            let samples = sample_ensemble(g, &model, &cfg.ensemble)?;
            let dumps: Vec<PerturbationDump> = samples.iter().map(|s| (&s.perturbations).into()).collect();
            out.add(Path::new("perturbations").join(graph_file(g.id)), serde_json::to_string(&dumps)?);
            explain_from_samples(g, &samples, &cfg.ensemble, flip_probabilities(g, &model, &cfg.ensemble)?)?
        } else {
            explain(g, &model, &cfg.ensemble)?
        };
        nonconverged += e.nonconverged_rows.len();
        out.add(Path::new("explanations").join(graph_file(g.id)), e.to_json()?);
    }
    let n = test_graphs(&ds, &cfg).len();
    out.note(format!("{n} graphs explained, {nonconverged} surrogate fits hit the iteration cap"));
    println!("explained {n} graphs ({nonconverged} non-converged fits)");
    out.commit("explain", &cfg)
}

fn read_explanations(dir: &Path) -> anyhow::Result<Vec<EnsembleExplanation>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    let mut all = paths
        .iter()
        .map(|p| EnsembleExplanation::from_json(&read_file(p)?).with_context(|| format!("parsing {}", p.display())))
        .collect::<anyhow::Result<Vec<_>>>()?;
    if all.is_empty() {
        anyhow::bail!("no explanation files in {}", dir.display());
    }
    all.sort_by_key(|e| e.graph_id);
    Ok(all)
}

pub fn evaluate_cmd(mut cfg: RunConfig) -> anyhow::Result<()> {
    if cfg.explanations.is_none() && !cfg.random_explainer {
        return Err(usage("nothing to evaluate: pass --explanations and/or --random-explainer"));
    }
    let ds = load_dataset(&mut cfg)?;
    let model = load_model(&cfg)?;
    cfg.resolve();
    let all: Vec<Graph> = ds.train.iter().chain(&ds.test).cloned().collect();
    let mut report = MetricsReport::default();
    if let Some(dir) = &cfg.explanations {
        let mut exps = read_explanations(dir)?;
        if let Some(m) = cfg.max_graphs {
            exps.truncate(m);
        }
        let method = match &cfg.method {
            Some(m) => m.clone(),
            None => {
                let kind = exps[0].surrogate;
                if exps.iter().any(|e| e.surrogate != kind) {
                    return Err(usage("explanations mix surrogate kinds; pass --method"));
                }
                kind.to_string()
            }
        };
        let attrs: Vec<Attribution> = exps.iter().map(Attribution::from).collect();
        report.methods.push(evaluate_method(&method, &attrs, &all, &model, &cfg.metrics)?);
    }
    if cfg.random_explainer {
        let attrs: Vec<Attribution> = test_graphs(&ds, &cfg).iter().map(|g| random_explainer(g, cfg.seed)).collect();
        report.methods.push(evaluate_method("random", &attrs, &all, &model, &cfg.metrics)?);
    }
    let csv = report.to_csv();
    print!("{csv}");
    let mut out = Outputs::default();
    out.add("metrics.csv", csv);
    out.add("metrics.json", report.to_json()?);
    out.commit("evaluate", &cfg)
}

pub fn plan_cmd(cfg: RunConfig) -> anyhow::Result<()> {
    let p = &cfg.plan;
    let plan = DkwPlan::new(p.eps, p.delta, p.graphs, p.stats)?;
    let text = serde_json::to_string_pretty(&plan)?;
    println!("{text}");
    let mut out = Outputs::default();
    out.add("plan.json", text + "\n");
    out.commit("plan", &cfg)
}

#[derive(Serialize)]
struct FlipSummary {
    graph_id: u64,
    target_flip: f64,
    median_other_flip: f64,
}

pub fn flip_test_cmd(mut cfg: RunConfig) -> anyhow::Result<()> {
    let ds = load_dataset(&mut cfg)?;
    let model = load_model(&cfg)?;
    cfg.resolve();
    cfg.ensemble.validate()?;
    let mut csv = String::from("graph_id,element,is_target,flip_probability\n");
    let mut summary = Vec::new();
    for g in test_graphs(&ds, &cfg) {
        let flips = flip_probabilities(g, &model, &cfg.ensemble)?;
        let targets = g.targets();
        for (i, f) in flips.iter().enumerate() {
            csv.push_str(&format!("{},{},{},{}\n", g.id, i, u8::from(targets.contains(&i)), f));
        }
        if targets.is_empty() || targets.len() == flips.len() {
            continue;
        }
        let target_flip = targets.iter().map(|&t| flips[t]).sum::<f64>() / targets.len() as f64;
        let mut others: Vec<f64> = (0..flips.len()).filter(|i| !targets.contains(i)).map(|i| flips[i]).collect();
        others.sort_by(f64::total_cmp);
        summary.push(FlipSummary { graph_id: g.id, target_flip, median_other_flip: percentile(&others, 0.5) });
    }
    println!("{} graphs with targets", summary.len());
    let mut out = Outputs::default();
    out.add("flip.csv", csv);
    out.add("flip_summary.json", serde_json::to_string(&summary)?);
    out.commit("flip-test", &cfg)
}
