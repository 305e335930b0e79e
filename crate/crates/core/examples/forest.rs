//! Fits the random-forest disruption classifier on training rows and scores
//! it on the held-out rows.

use warehouse_orch::config::RunConfig;
use warehouse_orch::datagen::generate_dataset;
use warehouse_orch::eval::{metrics, ConfusionCounts};
use warehouse_orch::forest::forest_predict;
use warehouse_orch::pipeline::{prepare, train_forest_stage};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = RunConfig::default();
    cfg.n_records = 4_000;
    cfg.fields = 120;
    let prepared = prepare(&generate_dataset(&cfg.gen_config())?.records, &cfg)?;
    let forest = train_forest_stage(&prepared, &cfg)?;
    let depth = forest.trees.iter().map(|t| t.depth()).max().unwrap_or(0);
    println!("{} trees, deepest {depth}", forest.trees.len());
    let mut confusion = ConfusionCounts::default();
    for row in prepared.rows_of(&prepared.split.test_indices) {
        let (flagged, _) = forest_predict(&forest, &prepared.feature_row(row))?;
        confusion.record(flagged, prepared.pre.records[row].truth.disrupted);
    }
    let m = metrics(&confusion)?;
    println!("test rows {}: {confusion:?}", confusion.total());
    println!("precision {:.3} recall {:.3} f1 {:.3}", m.precision, m.recall, m.f1);
    Ok(())
}
