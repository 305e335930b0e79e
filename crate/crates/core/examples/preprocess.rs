//! Cleans and encodes a generated dataset: imputation, outlier capping,
//! correlation pruning and key-feature ranking, then the shift-level split.

use warehouse_orch::config::RunConfig;
use warehouse_orch::datagen::generate_dataset;
use warehouse_orch::pipeline::prepare;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = RunConfig::default();
    cfg.n_records = 3_000;
    cfg.fields = 300;
    let ds = generate_dataset(&cfg.gen_config())?;
    let prepared = prepare(&ds.records, &cfg)?;
    let stats = &prepared.pre.stats;
    println!("priority mode {:?}, imputed {} records", stats.priority_mode, stats.imputed_records.len());
    println!("quantity cap {:.1}, planned p99 {:.1} min", stats.quantity_cap, stats.planned_p99);
    println!("{} columns pruned for correlation", stats.removed_columns.len());
    println!("{} key features, first ten:", stats.key_features.len());
    for name in stats.key_features.iter().take(10) {
        println!("  {name}");
    }
    println!(
        "{} train shifts, {} test shifts, {} folds",
        prepared.split.train_indices.len(),
        prepared.split.test_indices.len(),
        prepared.split.folds.len()
    );
    Ok(())
}
