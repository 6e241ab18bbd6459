//! Trains a classifier on one benchmark case and prints the per-epoch log.
//!
//! `cargo run --release -p qglime-core --example train_case -- 1 [seed]`

use qglime_core::dataset::{generate_dataset, CaseId};
use qglime_core::train::{train, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let case: CaseId = args.next().unwrap_or_else(|| "1".into()).parse()?;
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(0);
    let data = generate_dataset(case, seed);
    let start = std::time::Instant::now();
    let (_, report) = train(&data, &TrainConfig { seed, ..TrainConfig::default() })?;
    print!("{}", report.to_csv());
    eprintln!("trained in {:.1?}", start.elapsed());
    Ok(())
}
