//! Generates a small dataset, prints its manifest and one record as JSON.

use warehouse_orch::datagen::{generate_dataset, record_to_json, GenConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = GenConfig { n_records: 2_000, field_count: 120, seed: 7, ..GenConfig::default() };
    let ds = generate_dataset(&cfg)?;
    println!("{} records, {} disrupted", ds.manifest.n_records, ds.manifest.disrupted());
    println!("record types      {:?}", ds.manifest.record_types);
    println!("disruption types  {:?}", ds.manifest.disruption_types);
    println!("languages         {:?}", ds.manifest.languages);
    let first_disrupted = ds.records.iter().find(|r| r.truth.disrupted).ok_or("no disrupted record")?;
    let json = record_to_json(first_disrupted);
    println!("first disrupted record ({} bytes of JSON):", json.len());
    println!("{}...", &json[..json.len().min(400)]);
    Ok(())
}
