//! Drives the file-based stages the `orch` binary exposes, in a scratch
//! directory: generate, preprocess, train, evaluate and report. The dataset
//! and DQN budget are far below the reference run's, so the DQN's scores
//! here say nothing about its reference performance; see `experiment`.

use warehouse_orch::config::RunConfig;
use warehouse_orch::stages::{self, TrainTarget, Workdir};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = std::env::temp_dir().join(format!("orch-stages-{}", std::process::id()));
    let wd = Workdir::new(&root)?;
    let mut cfg = RunConfig::default();
    cfg.n_records = 1_500;
    cfg.shift_size = 60;
    cfg.gamma = 0.8;
    cfg.hidden_width = 32;
    cfg.epsilon_end = 0.1;
    cfg.batch_size = 32;
    cfg.train_steps = 30_000;
    cfg.epsilon_decay_steps = 15_000;
    cfg.checkpoint_every = 5_000;

    stages::generate(&wd, &cfg, stages::DATASET.as_ref())?;
    stages::preprocess_stage(&wd, &cfg, stages::DATASET.as_ref())?;
    stages::train(&wd, &cfg, TrainTarget::All)?;
    stages::evaluate(&wd, &cfg)?;
    print!("{}", stages::report(&wd)?);

    let mut files: Vec<_> = std::fs::read_dir(&root)?.map(|e| e.map(|e| e.file_name())).collect::<Result<_, _>>()?;
    files.sort();
    println!("files in {}: {files:?}", root.display());
    std::fs::remove_dir_all(&root)?;
    Ok(())
}
