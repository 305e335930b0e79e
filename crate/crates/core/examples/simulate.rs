//! Plays one shift through the warehouse simulator with the rule policy,
//! then compares its first decisions with the exhaustive-lookahead oracle.

use warehouse_orch::config::RunConfig;
use warehouse_orch::datagen::generate_dataset;
use warehouse_orch::pipeline::{prepare, scenario};
use warehouse_orch::policy::{Policy, RulePolicy};
use warehouse_orch::sim::{oracle_best_action, reset, run_episode};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = RunConfig::default();
    cfg.n_records = 2_000;
    cfg.fields = 120;
    let prepared = prepare(&generate_dataset(&cfg.gen_config())?.records, &cfg)?;
    let params = scenario(&prepared, &cfg);
    let shift = prepared.test_shifts().remove(0);
    let rule = RulePolicy { config: cfg.rule_config() };

    let log = run_episode(reset(&shift, &params)?, |s| rule.decide(s).expect("rule decides"))?;
    let met = log.outcomes.iter().filter(|o| o.deadline_met).count();
    println!(
        "{} tasks, {} deadlines met, reward {:.2}, {} simulated minutes",
        log.tasks_presented, met, log.total_reward, log.total_simulated_minutes
    );

    let mut state = reset(&shift[..5], &params)?;
    while !state.is_done() {
        let chosen = rule.decide(&state)?;
        let best = oracle_best_action(&state, 3)?;
        println!("clock {:>4}  rule {chosen:?}  oracle {best:?}", state.clock);
        state.step(chosen)?;
    }
    Ok(())
}
