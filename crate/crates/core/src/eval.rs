//! Policy evaluation: confusion counts, recovery, ROC/AUC, the error heatmap
//! and processing-time reduction.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::domain::{Language, Priority, RecordType};
use crate::error::{EvalError, Result};
use crate::policy::Policy;
use crate::sim::{ScenarioParams, WarehouseState};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn record(&mut self, flagged: bool, disrupted: bool) {
        match (flagged, disrupted) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// No task was flagged, so precision is reported as 0.
    pub undefined_precision: bool,
}

pub fn metrics(c: &ConfusionCounts) -> Result<Metrics, EvalError> {
    let n = c.total();
    if n == 0 {
        return Err(EvalError::EmptyCounts);
    }
    let accuracy = (c.tp + c.tn) as f64 / n as f64;
    let undefined_precision = c.tp + c.fp == 0;
    let precision = if undefined_precision { 0.0 } else { c.tp as f64 / (c.tp + c.fp) as f64 };
    let recall = if c.tp + c.fn_ == 0 { 0.0 } else { c.tp as f64 / (c.tp + c.fn_) as f64 };
    let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
    Ok(Metrics { accuracy, precision, recall, f1, undefined_precision })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

/// ROC curve from a descending threshold sweep over distinct scores, with
/// tied scores entering together, and its trapezoidal area. The first point
/// is `(0, 0)` at threshold `+inf`.
pub fn roc(scores: &[f64], labels: &[bool]) -> Result<(Vec<RocPoint>, f64), EvalError> {
    if scores.len() != labels.len() {
        return Err(EvalError::LengthMismatch);
    }
    let pos = labels.iter().filter(|&&l| l).count() as f64;
    let neg = labels.len() as f64 - pos;
    if pos == 0.0 || neg == 0.0 {
        return Err(EvalError::SingleClassLabels);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![RocPoint { threshold: f64::INFINITY, fpr: 0.0, tpr: 0.0 }];
    let (mut tp, mut fp) = (0.0, 0.0);
    let mut auc = 0.0;
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        while i < order.len() && scores[order[i]] == threshold {
            if labels[order[i]] {
                tp += 1.0;
            } else {
                fp += 1.0;
            }
            i += 1;
        }
        let prev = *points.last().expect("starts with origin");
        let p = RocPoint { threshold, fpr: fp / neg, tpr: tp / pos };
        auc += (p.fpr - prev.fpr) * (p.tpr + prev.tpr) / 2.0;
        points.push(p);
    }
    Ok((points, auc))
}

/// 100 x (baseline - policy) / baseline.
pub fn time_reduction(policy_mean: f64, baseline_mean: f64) -> Result<f64, EvalError> {
    if baseline_mean <= 0.0 {
        return Err(EvalError::ZeroBaseline);
    }
    Ok(100.0 * (baseline_mean - policy_mean) / baseline_mean)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldCategory {
    Priority,
    Location,
    Quantity,
    Timing,
    Equipment,
}

impl FieldCategory {
    pub const ALL: [FieldCategory; 5] =
        [FieldCategory::Priority, FieldCategory::Location, FieldCategory::Quantity, FieldCategory::Timing, FieldCategory::Equipment];

    pub fn label(self) -> &'static str {
        match self {
            FieldCategory::Priority => "priority",
            FieldCategory::Location => "location",
            FieldCategory::Quantity => "quantity",
            FieldCategory::Timing => "timing",
            FieldCategory::Equipment => "equipment",
        }
    }
}

/// What the scheduler could see about a task at its first decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskEvidence {
    pub required_flag_down: bool,
    pub arrivals_last_10min: usize,
    pub spanish: bool,
    pub rush_priority: bool,
    pub quantity_capped: bool,
}

/// Category blamed for a mis-handled disrupted task: the first evidence
/// field present at its first decision, in the order priority (a Spanish
/// or rush priority token), equipment (required flag down), timing (recent
/// arrivals at or above the surge threshold), quantity (capped outlier);
/// location otherwise.
pub fn attribute(e: &TaskEvidence, surge_threshold: usize) -> FieldCategory {
    if e.spanish || e.rush_priority {
        FieldCategory::Priority
    } else if e.required_flag_down {
        FieldCategory::Equipment
    } else if e.arrivals_last_10min >= surge_threshold {
        FieldCategory::Timing
    } else if e.quantity_capped {
        FieldCategory::Quantity
    } else {
        FieldCategory::Location
    }
}

/// Per-task line of an evaluation, in completion order of the episodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub record_id: u64,
    pub record_type: RecordType,
    pub flagged: bool,
    pub truth_disrupted: bool,
    pub recovered: bool,
    pub deadline_met: bool,
    pub score: f64,
    pub completion_minutes: i64,
    pub evidence: TaskEvidence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub policy: String,
    pub confusion: ConfusionCounts,
    pub recovered_disrupted: u64,
    pub total_disrupted: u64,
    pub roc_points: Vec<RocPoint>,
    pub auc: f64,
    pub mean_completion_minutes: f64,
    /// `heatmap[record_type][category]` counts of mis-handled disrupted tasks.
    pub heatmap: [[u64; 5]; 3],
    pub tasks_presented: u64,
    pub tasks: Vec<TaskRecord>,
}

impl EvalResult {
    pub fn recovery_accuracy(&self) -> f64 {
        if self.total_disrupted == 0 {
            return 0.0;
        }
        self.recovered_disrupted as f64 / self.total_disrupted as f64
    }

    pub fn metrics(&self) -> Result<Metrics, EvalError> {
        metrics(&self.confusion)
    }

    pub fn heatmap_total(&self) -> u64 {
        self.heatmap.iter().flatten().sum()
    }

    /// Confusion, heatmap and task totals reconcile with the per-task log.
    pub fn check_conservation(&self) -> Result<(), EvalError> {
        let n = self.tasks.len() as u64;
        let mut recount = ConfusionCounts::default();
        for t in &self.tasks {
            recount.record(t.flagged, t.truth_disrupted);
        }
        let recovered = self.tasks.iter().filter(|t| t.recovered).count() as u64;
        let checks = [
            (self.confusion.total() == n, "confusion total differs from task count"),
            (self.tasks_presented == n, "task count differs from tasks presented"),
            (recount == self.confusion, "confusion differs from per-task recount"),
            (recovered == self.recovered_disrupted, "recovered count differs from per-task recount"),
            (self.recovered_disrupted <= self.total_disrupted, "more recoveries than disruptions"),
            (self.total_disrupted == self.confusion.tp + self.confusion.fn_, "disrupted total differs from tp + fn"),
            (
                self.heatmap_total() == self.total_disrupted - self.recovered_disrupted,
                "heatmap total differs from mis-handled disrupted count",
            ),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, msg)) => Err(EvalError::Conservation(msg.to_string())),
            None => Ok(()),
        }
    }
}

/// Options that affect what the evaluator records but not the dynamics.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    pub surge_threshold: usize,
    pub quantity_cap: f64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions { surge_threshold: 5, quantity_cap: f64::INFINITY }
    }
}

fn evidence(state: &WarehouseState, opts: &EvalOptions) -> TaskEvidence {
    let r = state.head_record().expect("decision state has a head");
    TaskEvidence {
        required_flag_down: state.equipment_flags[r.record_type.required_equipment().index()],
        arrivals_last_10min: state.arrivals_last_10min,
        spanish: r.language == Language::Es,
        rush_priority: matches!(r.priority, Some(Priority::High | Priority::Urgent)),
        quantity_capped: r.quantity as f64 >= opts.quantity_cap,
    }
}

/// Runs `policy` greedily over every shift and aggregates the outcomes.
pub fn evaluate_policy(
    policy: &dyn Policy,
    shifts: &[Vec<crate::domain::TransactionRecord>],
    params: &ScenarioParams,
    opts: &EvalOptions,
) -> Result<EvalResult> {
    if shifts.iter().all(Vec::is_empty) {
        return Err(EvalError::EmptyTestSplit.into());
    }
    let params = std::sync::Arc::new(params.clone());
    let mut tasks = Vec::new();
    let mut presented = 0u64;
    for shift in shifts.iter().filter(|s| !s.is_empty()) {
        let mut state = WarehouseState::new(shift.clone(), std::sync::Arc::clone(&params))?;
        presented += state.tasks_presented() as u64;
        let mut first_seen: HashMap<u64, (f64, TaskEvidence)> = HashMap::new();
        while !state.is_done() {
            let head = state.head_record().expect("decision state has a head").record_id;
            if !first_seen.contains_key(&head) {
                first_seen.insert(head, (policy.flag_score(&state)?, evidence(&state, opts)));
            }
            let action = policy.decide(&state)?;
            let out = state.step(action)?;
            for o in out.info {
                let (score, evidence) = first_seen.remove(&o.record_id).expect("started tasks were decided on");
                tasks.push(TaskRecord {
                    record_id: o.record_id,
                    record_type: o.record_type,
                    flagged: o.remediated,
                    truth_disrupted: o.truth_disrupted,
                    recovered: o.recovered(),
                    deadline_met: o.deadline_met,
                    score,
                    completion_minutes: o.completion_minutes(),
                    evidence,
                });
            }
        }
    }
    let result = aggregate(policy.name(), tasks, presented, opts)?;
    result.check_conservation()?;
    Ok(result)
}

/// Builds an [`EvalResult`] from per-task records.
pub fn aggregate(policy: &str, tasks: Vec<TaskRecord>, presented: u64, opts: &EvalOptions) -> Result<EvalResult, EvalError> {
    let mut confusion = ConfusionCounts::default();
    let mut heatmap = [[0u64; 5]; 3];
    for t in &tasks {
        confusion.record(t.flagged, t.truth_disrupted);
        if t.truth_disrupted && !t.recovered {
            let cat = attribute(&t.evidence, opts.surge_threshold);
            heatmap[t.record_type.index()][FieldCategory::ALL.iter().position(|&c| c == cat).expect("listed")] += 1;
        }
    }
    let scores: Vec<f64> = tasks.iter().map(|t| t.score).collect();
    let labels: Vec<bool> = tasks.iter().map(|t| t.truth_disrupted).collect();
    let (roc_points, auc) = match roc(&scores, &labels) {
        Ok(r) => r,
        Err(EvalError::SingleClassLabels) => (Vec::new(), f64::NAN),
        Err(e) => return Err(e),
    };
    let mean_completion_minutes = if tasks.is_empty() {
        0.0
    } else {
        tasks.iter().map(|t| t.completion_minutes as f64).sum::<f64>() / tasks.len() as f64
    };
    Ok(EvalResult {
        policy: policy.to_string(),
        confusion,
        recovered_disrupted: tasks.iter().filter(|t| t.recovered).count() as u64,
        total_disrupted: tasks.iter().filter(|t| t.truth_disrupted).count() as u64,
        roc_points,
        auc,
        mean_completion_minutes,
        heatmap,
        tasks_presented: presented,
        tasks,
    })
}

/// Fraction of decision states where `policy` picks the same action as the
/// exhaustive oracle, following the policy's own trajectory.
pub fn oracle_agreement(
    policy: &dyn Policy,
    scenarios: &[Vec<crate::domain::TransactionRecord>],
    params: &ScenarioParams,
    horizon: usize,
) -> Result<(usize, usize)> {
    let (mut matched, mut total) = (0, 0);
    for scenario in scenarios {
        let mut state = crate::sim::reset(scenario, params)?;
        while !state.is_done() {
            let chosen = policy.decide(&state)?;
            if chosen == crate::sim::oracle_best_action(&state, horizon)? {
                matched += 1;
            }
            total += 1;
            state.step(chosen)?;
        }
    }
    Ok((matched, total))
}

fn fmt_f(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.6}")
    } else {
        "nan".to_string()
    }
}

/// Row of metrics.csv.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub policy: String,
    pub accuracy_cls: f64,
    pub accuracy_recovery: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub auc: f64,
    pub mean_completion: f64,
    pub time_reduction_pct: f64,
}

/// Metrics rows with time reduction measured against `baseline`.
pub fn metrics_rows(results: &[&EvalResult], baseline: &EvalResult) -> Result<Vec<MetricsRow>> {
    results
        .iter()
        .map(|r| {
            let m = r.metrics()?;
            Ok(MetricsRow {
                policy: r.policy.clone(),
                accuracy_cls: m.accuracy,
                accuracy_recovery: r.recovery_accuracy(),
                precision: m.precision,
                recall: m.recall,
                f1: m.f1,
                auc: r.auc,
                mean_completion: r.mean_completion_minutes,
                time_reduction_pct: time_reduction(r.mean_completion_minutes, baseline.mean_completion_minutes)?,
            })
        })
        .collect()
}

pub fn metrics_csv(rows: &[MetricsRow]) -> String {
    let mut out = "policy,accuracy_cls,accuracy_recovery,precision,recall,f1,auc,mean_completion,time_reduction_pct\n".to_string();
    for r in rows {
        let vals = [r.accuracy_cls, r.accuracy_recovery, r.precision, r.recall, r.f1, r.auc, r.mean_completion, r.time_reduction_pct];
        let joined: Vec<String> = vals.iter().map(|&v| fmt_f(v)).collect();
        writeln!(out, "{},{}", r.policy, joined.join(",")).expect("writing to a string");
    }
    out
}

pub fn roc_csv(points: &[RocPoint]) -> String {
    let mut out = "threshold,fpr,tpr\n".to_string();
    for p in points {
        let threshold = if p.threshold.is_infinite() { "inf".to_string() } else { fmt_f(p.threshold) };
        writeln!(out, "{threshold},{},{}", fmt_f(p.fpr), fmt_f(p.tpr)).expect("writing to a string");
    }
    out
}

pub fn heatmap_csv(heatmap: &[[u64; 5]; 3]) -> String {
    let mut out = "record_type,field_category,count\n".to_string();
    for rt in RecordType::ALL {
        for (j, cat) in FieldCategory::ALL.iter().enumerate() {
            writeln!(out, "{},{},{}", rt.plural_label(), cat.label(), heatmap[rt.index()][j]).expect("writing to a string");
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub field_count: usize,
    pub policy: String,
    pub accuracy: f64,
}

/// Sorted by field count, then policy in the order given.
pub fn sweep_csv(points: &[SweepPoint]) -> String {
    let mut out = "field_count,policy,accuracy\n".to_string();
    for p in points {
        writeln!(out, "{},{},{}", p.field_count, p.policy, fmt_f(p.accuracy)).expect("writing to a string");
    }
    out
}
