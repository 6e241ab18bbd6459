use std::process::ExitCode;

use clap::Parser;

mod ablate;
mod args;
mod commands;
mod config;
mod exit;

use args::{Cli, Command, Common};
use config::RunConfig;
use exit::usage;

fn base(common: &Common) -> anyhow::Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    common.apply(&mut cfg);
    Ok(cfg)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(usage("--jobs must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global()?;
    }
    match cli.command {
        Command::GenData { common, case } => {
            let mut cfg = base(&common)?;
            if let Some(c) = case {
                cfg.case = c;
            }
            commands::gen_data(cfg)
        }
        Command::Train { common, inputs, train } => {
            let mut cfg = base(&common)?;
            inputs.apply(&mut cfg);
            train.apply(&mut cfg);
            commands::train_cmd(cfg)
        }
        Command::Explain { common, inputs, ensemble, dump_perturbations } => {
            let mut cfg = base(&common)?;
            inputs.apply(&mut cfg);
            ensemble.apply(&mut cfg);
            cfg.dump_perturbations |= dump_perturbations;
            commands::explain_cmd(cfg)
        }
        Command::Evaluate { common, inputs, explanations, random_explainer, method, metrics, shots, exact } => {
            let mut cfg = base(&common)?;
            inputs.apply(&mut cfg);
            metrics.apply(&mut cfg);
            if explanations.is_some() {
                cfg.explanations = explanations;
            }
            cfg.random_explainer |= random_explainer;
            if method.is_some() {
                cfg.method = method;
            }
            if let Some(m) = args::measurement(shots, exact) {
                cfg.metrics.measurement = m;
            }
            commands::evaluate_cmd(cfg)
        }
        Command::Plan { common, eps, delta, graphs, stats } => {
            let mut cfg = base(&common)?;
            let p = &mut cfg.plan;
            p.eps = eps.unwrap_or(p.eps);
            p.delta = delta.unwrap_or(p.delta);
            p.graphs = graphs.unwrap_or(p.graphs);
            p.stats = stats.unwrap_or(p.stats);
            commands::plan_cmd(cfg)
        }
        Command::Ablate { common, inputs, ensemble, metrics, axes, strategies, surrogates, measurements, lambdas } => {
            let mut cfg = base(&common)?;
            inputs.apply(&mut cfg);
            ensemble.apply(&mut cfg);
            metrics.apply(&mut cfg);
            let ab = &mut cfg.ablation;
            if let Some(a) = axes {
                ab.axes = a;
            }
            if let Some(s) = strategies {
                ab.strategies = s.into_iter().map(Into::into).collect();
            }
            if let Some(s) = surrogates {
                ab.surrogates = s.into_iter().map(Into::into).collect();
            }
            if let Some(m) = measurements {
                ab.measurements = m;
            }
            if let Some(l) = lambdas {
                ab.lambdas = l;
            }
            ablate::ablate_cmd(cfg)
        }
        Command::FlipTest { common, inputs, ensemble } => {
            let mut cfg = base(&common)?;
            inputs.apply(&mut cfg);
            ensemble.apply(&mut cfg);
            commands::flip_test_cmd(cfg)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit::code_for(&e))
        }
    }
}
