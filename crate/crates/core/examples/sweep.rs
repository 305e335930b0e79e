//! Reruns the whole pipeline at several schema widths and prints each
//! policy's recovery accuracy per width. The budget is small enough to run
//! in about a minute, so absolute DQN scores are not meaningful here; the
//! acceptance suite runs the full-size sweep.

use warehouse_orch::config::RunConfig;
use warehouse_orch::eval::sweep_csv;
use warehouse_orch::pipeline::schema_sweep;

fn main() -> Result<(), Box<dyn std::error::Error>> {
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
    let points = schema_sweep(&cfg, &[100, 500, 900])?;
    print!("{}", sweep_csv(&points));
    Ok(())
}
