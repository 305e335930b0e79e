//! Scheduling policies: the rule-based scheduler, the forest classifier
//! wrapped as a policy, and the greedy DQN.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::domain::ActionSpec;
use crate::dqn::{argmax, q_margin_of, QNetwork};
use crate::error::{Error, Result};
use crate::sim::WarehouseState;

pub trait Policy {
    fn name(&self) -> &str;
    /// Action for the head task of `state`.
    fn decide(&self, state: &WarehouseState) -> Result<ActionSpec>;
    /// Flagging score of the head task, higher meaning more likely
    /// disrupted. Used for ROC analysis at the task's first decision.
    fn flag_score(&self, state: &WarehouseState) -> Result<f64>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RulePolicyConfig {
    pub remediate_on_equipment_flag: bool,
    pub surge_threshold: usize,
}

impl Default for RulePolicyConfig {
    fn default() -> Self {
        RulePolicyConfig { remediate_on_equipment_flag: true, surge_threshold: 5 }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RulePolicy {
    pub config: RulePolicyConfig,
}

fn required_flag_down(state: &WarehouseState) -> bool {
    state.head_record().is_some_and(|r| state.equipment_flags[r.record_type.required_equipment().index()])
}

fn any_flag_down(state: &WarehouseState) -> bool {
    state.equipment_flags.iter().any(|&f| f)
}

fn assign_or_defer(state: &WarehouseState) -> ActionSpec {
    state.first_idle_worker().map_or(ActionSpec::Defer, ActionSpec::AssignWorker)
}

impl Policy for RulePolicy {
    fn name(&self) -> &str {
        "rule"
    }

    fn decide(&self, state: &WarehouseState) -> Result<ActionSpec> {
        let head = state.head().ok_or(crate::error::SimError::EmptyQueue)?;
        let progress = state.progress(head);
        if self.config.remediate_on_equipment_flag && required_flag_down(state) && !progress.rerouted {
            return Ok(ActionSpec::RerouteTask);
        }
        if state.arrivals_last_10min >= self.config.surge_threshold && !progress.expedited {
            return Ok(ActionSpec::ExpediteTask);
        }
        Ok(assign_or_defer(state))
    }

    fn flag_score(&self, state: &WarehouseState) -> Result<f64> {
        Ok(if self.decide(state)?.is_remediation() { 1.0 } else { 0.0 })
    }
}

/// Forest verdicts per record id, computed from the record feature matrix.
/// A positive verdict reroutes the task when any equipment flag is down,
/// then expedites it.
#[derive(Debug, Clone)]
pub struct ForestPolicy {
    pub predictions: HashMap<u64, (bool, f64)>,
}

impl ForestPolicy {
    fn verdict(&self, state: &WarehouseState) -> Result<(bool, f64)> {
        let r = state.head_record().ok_or(crate::error::SimError::EmptyQueue)?;
        self.predictions
            .get(&r.record_id)
            .copied()
            .ok_or_else(|| Error::MissingInput(format!("no forest prediction for record {}", r.record_id)))
    }
}

impl Policy for ForestPolicy {
    fn name(&self) -> &str {
        "forest"
    }

    fn decide(&self, state: &WarehouseState) -> Result<ActionSpec> {
        let (disrupted, _) = self.verdict(state)?;
        let progress = state.progress(state.head().expect("verdict found a head"));
        if disrupted && any_flag_down(state) && !progress.rerouted {
            return Ok(ActionSpec::RerouteTask);
        }
        if disrupted && !progress.expedited {
            return Ok(ActionSpec::ExpediteTask);
        }
        Ok(assign_or_defer(state))
    }

    fn flag_score(&self, state: &WarehouseState) -> Result<f64> {
        Ok(self.verdict(state)?.1)
    }
}

/// Greedy policy of a trained Q-network.
#[derive(Debug, Clone)]
pub struct DqnPolicy {
    pub network: QNetwork,
}

impl DqnPolicy {
    pub fn q_values(&self, state: &WarehouseState) -> Result<Vec<f64>> {
        Ok(self.network.q_values(&state.observe()?)?)
    }
}

impl Policy for DqnPolicy {
    fn name(&self) -> &str {
        "dqn"
    }

    fn decide(&self, state: &WarehouseState) -> Result<ActionSpec> {
        let q = self.q_values(state)?;
        let action = ActionSpec::from_index(argmax(&q), state.workers.len());
        Ok(state.canonical_action(action))
    }

    fn flag_score(&self, state: &WarehouseState) -> Result<f64> {
        Ok(q_margin_of(&self.q_values(state)?))
    }
}
