//! End-to-end pipeline: generate, preprocess, split into shifts, train the
//! DQN and the forest, and evaluate all three policies.

use std::collections::HashMap;

use crate::datagen::{generate_dataset, Dataset, GenConfig};
use crate::domain::{DisruptionType, TransactionRecord};
use crate::dqn::{grid_search, train_dqn_with, GridRow, Hyperparams, QNetwork, TrainingLog};
use crate::encode::{state_dim, EMBEDDING_BUCKETS, EMBEDDING_DIM};
use crate::error::Result;
use crate::eval::{evaluate_policy, EvalOptions, EvalResult, SweepPoint};
use crate::forest::{forest_predict, train_forest, Forest, ForestConfig};
use crate::policy::{DqnPolicy, ForestPolicy, RulePolicy, RulePolicyConfig};
use crate::preprocess::{preprocess, split, PreprocessOptions, Preprocessed, SplitSpec};
use crate::rng::stream_rng;
use crate::sim::{ScenarioParams, ShiftEnv};

pub use crate::config::RunConfig;

/// Preprocessed data cut into shifts with a shift-level split.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub pre: Preprocessed,
    pub split: SplitSpec,
    pub shift_size: usize,
}

impl Prepared {
    pub fn n_shifts(&self) -> usize {
        self.pre.records.len().div_ceil(self.shift_size)
    }

    pub fn shift_rows(&self, shift: usize) -> std::ops::Range<usize> {
        let start = shift * self.shift_size;
        start..(start + self.shift_size).min(self.pre.records.len())
    }

    pub fn shift(&self, shift: usize) -> Vec<TransactionRecord> {
        self.pre.records[self.shift_rows(shift)].to_vec()
    }

    pub fn shifts(&self, indices: &[usize]) -> Vec<Vec<TransactionRecord>> {
        indices.iter().map(|&s| self.shift(s)).collect()
    }

    pub fn train_shifts(&self) -> Vec<Vec<TransactionRecord>> {
        self.shifts(&self.split.train_indices)
    }

    pub fn test_shifts(&self) -> Vec<Vec<TransactionRecord>> {
        self.shifts(&self.split.test_indices)
    }

    /// Record rows of the given shifts.
    pub fn rows_of(&self, shifts: &[usize]) -> Vec<usize> {
        shifts.iter().flat_map(|&s| self.shift_rows(s)).collect()
    }

    pub fn feature_row(&self, row: usize) -> Vec<f64> {
        self.pre.features.numeric_row(row, &self.pre.levels)
    }
}

/// Shift-level stratification label: the shift contains an order surge.
pub fn shift_labels(records: &[TransactionRecord], shift_size: usize) -> Vec<bool> {
    records
        .chunks(shift_size)
        .map(|c| c.iter().any(|r| r.truth.disruption_type == DisruptionType::OrderSurge))
        .collect()
}

pub fn prepare(records: &[TransactionRecord], cfg: &RunConfig) -> Result<Prepared> {
    let pre = preprocess(records, &cfg.preprocess_options())?;
    prepare_from(pre, cfg)
}

pub fn prepare_from(pre: Preprocessed, cfg: &RunConfig) -> Result<Prepared> {
    let labels = shift_labels(&pre.records, cfg.shift_size);
    let split = split(&labels, cfg.train_frac, cfg.folds, cfg.seed)?;
    Ok(Prepared { pre, split, shift_size: cfg.shift_size })
}

pub fn scenario(prepared: &Prepared, cfg: &RunConfig) -> ScenarioParams {
    cfg.scenario(prepared.pre.stats.planned_p99)
}

pub fn initial_network(cfg: &RunConfig, hp: &Hyperparams, seed: u64) -> QNetwork {
    let dense = state_dim(cfg.n_workers) - EMBEDDING_DIM;
    let n_actions = crate::domain::ActionSpec::count(cfg.n_workers);
    QNetwork::new(EMBEDDING_BUCKETS, EMBEDDING_DIM, dense, n_actions, hp, &mut stream_rng(seed, "dqn-init"))
}

/// Trains a DQN on the given shifts. With `cfg.checkpoint_every > 0` the
/// network is scored greedily on the training shifts at every checkpoint
/// and the best one is returned: highest recovery, then lowest mean
/// completion, then the earliest.
pub fn train_on(
    shifts: Vec<Vec<TransactionRecord>>,
    params: &ScenarioParams,
    cfg: &RunConfig,
    hp: &Hyperparams,
    opts: &EvalOptions,
) -> Result<(QNetwork, TrainingLog)> {
    let mut env = ShiftEnv::new(shifts.clone(), params.clone())?;
    let mut best: Option<((f64, f64), QNetwork)> = None;
    let (last, log) = train_dqn_with(&mut env, initial_network(cfg, hp, cfg.seed), hp, cfg.seed, cfg.checkpoint_every, |_, net| {
        let res = evaluate_policy(&DqnPolicy { network: net.clone() }, &shifts, params, opts)?;
        let score = (res.recovery_accuracy(), -res.mean_completion_minutes);
        if best.as_ref().is_none_or(|(b, _)| score > *b) {
            best = Some((score, net.clone()));
        }
        Ok(())
    })?;
    Ok((best.map_or(last, |(_, net)| net), log))
}

#[derive(Debug, Clone)]
pub struct DqnTraining {
    pub network: QNetwork,
    pub log: TrainingLog,
    pub hyperparams: Hyperparams,
    pub grid: Vec<GridRow>,
}

/// Grid search over the configured grid when it has more than one point,
/// then a final fit on all training shifts with the chosen hyperparameters.
pub fn train_dqn_stage(prepared: &Prepared, cfg: &RunConfig) -> Result<DqnTraining> {
    let params = scenario(prepared, cfg);
    let grid = cfg.grid();
    let opts = cfg.eval_options(prepared);
    let (hp, table) = if grid.len() > 1 {
        grid_search(&grid, prepared.split.folds.len(), |hp, k| {
            let train = prepared.shifts(&prepared.split.fold_train(k));
            let (net, _) = train_on(train, &params, cfg, hp, &opts)?;
            let val = prepared.shifts(&prepared.split.folds[k]);
            let res = evaluate_policy(&DqnPolicy { network: net }, &val, &params, &opts)?;
            Ok(res.recovery_accuracy())
        })?
    } else {
        (grid[0].clone(), Vec::new())
    };
    let (network, log) = train_on(prepared.train_shifts(), &params, cfg, &hp, &opts)?;
    Ok(DqnTraining { network, log, hyperparams: hp, grid: table })
}

pub fn train_forest_stage(prepared: &Prepared, cfg: &RunConfig) -> Result<Forest> {
    let rows = prepared.rows_of(&prepared.split.train_indices);
    let x: Vec<Vec<f64>> = rows.iter().map(|&r| prepared.feature_row(r)).collect();
    let y: Vec<bool> = rows.iter().map(|&r| prepared.pre.records[r].truth.disrupted).collect();
    Ok(train_forest(&x, &y, &cfg.forest_config(), cfg.seed)?)
}

pub fn forest_policy(prepared: &Prepared, forest: &Forest) -> Result<ForestPolicy> {
    let mut predictions = HashMap::new();
    for (row, r) in prepared.pre.records.iter().enumerate() {
        predictions.insert(r.record_id, forest_predict(forest, &prepared.feature_row(row))?);
    }
    Ok(ForestPolicy { predictions })
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub dqn: EvalResult,
    pub forest: EvalResult,
    pub rule: EvalResult,
}

impl Evaluation {
    pub fn all(&self) -> [&EvalResult; 3] {
        [&self.dqn, &self.forest, &self.rule]
    }
}

pub fn evaluate_stage(prepared: &Prepared, cfg: &RunConfig, network: &QNetwork, forest: &Forest) -> Result<Evaluation> {
    let params = scenario(prepared, cfg);
    let test = prepared.test_shifts();
    let opts = cfg.eval_options(prepared);
    let dqn = evaluate_policy(&DqnPolicy { network: network.clone() }, &test, &params, &opts)?;
    let forest = evaluate_policy(&forest_policy(prepared, forest)?, &test, &params, &opts)?;
    let rule = evaluate_policy(&RulePolicy { config: cfg.rule_config() }, &test, &params, &opts)?;
    Ok(Evaluation { dqn, forest, rule })
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub dataset: Dataset,
    pub prepared: Prepared,
    pub dqn: DqnTraining,
    pub forest: Forest,
    pub evaluation: Evaluation,
}

/// Every stage in memory with the given configuration.
pub fn run(cfg: &RunConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let dataset = generate_dataset(&cfg.gen_config())?;
    let prepared = prepare(&dataset.records, cfg)?;
    let dqn = train_dqn_stage(&prepared, cfg)?;
    let forest = train_forest_stage(&prepared, cfg)?;
    let evaluation = evaluate_stage(&prepared, cfg, &dqn.network, &forest)?;
    Ok(RunOutput { dataset, prepared, dqn, forest, evaluation })
}

/// Reruns the pipeline at each field count and records recovery accuracy
/// per policy, in ascending field-count order.
pub fn schema_sweep(cfg: &RunConfig, field_counts: &[usize]) -> Result<Vec<SweepPoint>> {
    let mut counts = field_counts.to_vec();
    counts.sort_unstable();
    counts.dedup();
    let mut points = Vec::new();
    for fields in counts {
        let point_cfg = RunConfig { fields, ..cfg.clone() };
        let out = run(&point_cfg)?;
        for r in out.evaluation.all() {
            points.push(SweepPoint { field_count: fields, policy: r.policy.clone(), accuracy: r.recovery_accuracy() });
        }
    }
    Ok(points)
}

impl RunConfig {
    pub fn gen_config(&self) -> GenConfig {
        GenConfig {
            n_records: self.n_records,
            disruption_rate: self.disruption_rate,
            multilingual_rate: self.multilingual_rate,
            missing_rate: self.missing_rate,
            outlier_rate: self.outlier_rate,
            field_count: self.fields,
            n_workers: self.n_workers,
            seed: self.seed,
        }
    }

    pub fn preprocess_options(&self) -> PreprocessOptions {
        PreprocessOptions {
            cap_pct: self.cap_pct,
            r_threshold: self.r_threshold,
            key_feature_count: self.key_features,
            normalize_language: self.normalize_language,
        }
    }

    pub fn scenario(&self, planned_p99: f64) -> ScenarioParams {
        ScenarioParams {
            downtime_multiplier: self.downtime_multiplier,
            reroute_minutes: self.reroute_minutes,
            surge_wait_factor: self.surge_wait_factor,
            defer_positions: self.defer_positions,
            decision_cap: self.decision_cap,
            discount_minutes: self.discount_minutes,
            normalize_language: self.normalize_language,
            ..ScenarioParams::new(self.n_workers, planned_p99, self.seed)
        }
    }

    pub fn hyperparams(&self) -> Hyperparams {
        Hyperparams {
            learning_rate: self.learning_rate,
            gamma: self.gamma,
            epsilon_start: self.epsilon_start,
            epsilon_end: self.epsilon_end,
            epsilon_decay_steps: self.epsilon_decay_steps,
            batch_size: self.batch_size,
            target_sync_every: self.target_sync_every,
            train_steps: self.train_steps,
            hidden_layers: self.hidden_layers,
            hidden_width: self.hidden_width,
            replay_capacity: self.replay_capacity,
            grad_clip_norm: self.grad_clip_norm,
        }
    }

    /// Cartesian product of the grid axes around the base hyperparameters,
    /// learning rate varying slowest.
    pub fn grid(&self) -> Vec<Hyperparams> {
        let base = self.hyperparams();
        let rates = if self.grid_learning_rates.is_empty() { vec![base.learning_rate] } else { self.grid_learning_rates.clone() };
        let widths = if self.grid_hidden_widths.is_empty() { vec![base.hidden_width] } else { self.grid_hidden_widths.clone() };
        let layers = if self.grid_hidden_layers.is_empty() { vec![base.hidden_layers] } else { self.grid_hidden_layers.clone() };
        let mut out = Vec::new();
        for &learning_rate in &rates {
            for &hidden_layers in &layers {
                for &hidden_width in &widths {
                    out.push(Hyperparams { learning_rate, hidden_layers, hidden_width, ..base.clone() });
                }
            }
        }
        out
    }

    pub fn forest_config(&self) -> ForestConfig {
        ForestConfig {
            n_trees: self.forest_trees,
            max_depth: self.forest_max_depth,
            min_samples_split: self.forest_min_samples_split,
            class_balanced: self.forest_class_balanced,
        }
    }

    pub fn rule_config(&self) -> RulePolicyConfig {
        RulePolicyConfig { remediate_on_equipment_flag: true, surge_threshold: self.surge_threshold }
    }

    pub fn eval_options(&self, prepared: &Prepared) -> EvalOptions {
        EvalOptions { surge_threshold: self.surge_threshold, quantity_cap: prepared.pre.stats.quantity_cap }
    }
}
