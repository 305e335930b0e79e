//! Runs the full pipeline once and prints per-policy recovery, AUC and
//! completion time. Any `key=value` argument overrides the reference config.

use std::time::Instant;

use warehouse_orch::config::RunConfig;
use warehouse_orch::pipeline;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = RunConfig::reference();
    for arg in std::env::args().skip(1) {
        let (k, v) = arg.split_once('=').ok_or("arguments are key=value")?;
        cfg.set(k, v)?;
    }
    let t = Instant::now();
    let out = pipeline::run(&cfg)?;
    println!("elapsed {:.1}s, {} train steps", t.elapsed().as_secs_f64(), out.dqn.log.steps);
    let truth: std::collections::HashMap<u64, _> =
        out.prepared.pre.records.iter().map(|r| (r.record_id, r.truth.disruption_type)).collect();
    for r in out.evaluation.all() {
        println!(
            "{:<7} recovery {:.4} ({}/{})  auc {:.3}  mean completion {:.1}",
            r.policy,
            r.recovery_accuracy(),
            r.recovered_disrupted,
            r.total_disrupted,
            r.auc,
            r.mean_completion_minutes
        );
        let c = &r.confusion;
        println!("    confusion tp {} fp {} fn {} tn {}", c.tp, c.fp, c.fn_, c.tn);
        let mut minutes = std::collections::BTreeMap::new();
        for t in &r.tasks {
            let e = minutes.entry(format!("{:?}", truth[&t.record_id])).or_insert((0i64, 0i64));
            e.0 += t.completion_minutes;
            e.1 += 1;
        }
        for (k, (sum, n)) in minutes {
            println!("    {k:<18} mean completion {:.2} over {n}", sum as f64 / n as f64);
        }
        let mut rows = std::collections::BTreeMap::new();
        for t in r.tasks.iter().filter(|t| t.truth_disrupted) {
            let kind = truth[&t.record_id];
            let e = rows.entry(format!("{kind:?}")).or_insert([0u32; 4]);
            e[0] += 1;
            e[1] += u32::from(t.flagged);
            e[2] += u32::from(t.deadline_met);
            e[3] += u32::from(t.recovered);
        }
        for (k, [n, f, m, rec]) in rows {
            println!("    {k:<18} n {n:>3}  flagged {f:>3}  met {m:>3}  recovered {rec:>3}");
        }
    }
    Ok(())
}
