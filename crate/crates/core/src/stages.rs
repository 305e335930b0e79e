//! File-backed pipeline stages behind the `orch` command. Every stage reads
//! and writes fixed file names inside a working directory.
//!
//! | stage      | reads                                  | writes |
//! |------------|----------------------------------------|--------|
//! | generate   |                                        | `dataset.jsonl`, `dataset.manifest.json` |
//! | preprocess | `dataset.jsonl`                        | `prepared.jsonl`, `matrix.csv`, `matrix.sidecar.json`, `split.json` |
//! | train      | preprocess outputs                     | `dqn.checkpoint.json`, `forest.json`, `training_log.json` |
//! | evaluate   | preprocess outputs, both models        | `metrics.csv`, `roc_<policy>.csv`, `heatmap.csv`, `q_values.csv`, `evaluation.json` |
//! | sweep      |                                        | `sweep.csv` |
//! | report     | `metrics.csv`, optional `sweep.csv`    | `report.txt` |

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::datagen::{generate_dataset, read_dataset, record_from_json, write_dataset, write_jsonl};
use crate::domain::ActionSpec;
use crate::dqn::{argmax, load_checkpoint, save_checkpoint, Checkpoint, QNetwork, CHECKPOINT_SCHEMA_VERSION};
use crate::encode::layout;
use crate::error::{Error, ModelError, Result};
use crate::eval::{evaluate_policy, heatmap_csv, metrics_csv, metrics_rows, roc_csv, sweep_csv, EvalResult};
use crate::forest::{load_forest, save_forest, Forest};
use crate::pipeline::{forest_policy, scenario, train_dqn_stage, train_forest_stage, Prepared, RunConfig};
use crate::policy::{DqnPolicy, RulePolicy};
use crate::preprocess::{preprocess, read_matrix, write_matrix, Preprocessed, SplitSpec};
use crate::sim::{ScenarioParams, WarehouseState};

pub const DATASET: &str = "dataset.jsonl";
pub const PREPARED: &str = "prepared.jsonl";
pub const MATRIX: &str = "matrix.csv";
pub const SIDECAR: &str = "matrix.sidecar.json";
pub const SPLIT: &str = "split.json";
pub const DQN_CHECKPOINT: &str = "dqn.checkpoint.json";
pub const FOREST_CHECKPOINT: &str = "forest.json";
pub const TRAINING_LOG: &str = "training_log.json";
pub const METRICS: &str = "metrics.csv";
pub const HEATMAP: &str = "heatmap.csv";
pub const Q_VALUES: &str = "q_values.csv";
pub const EVALUATION: &str = "evaluation.json";
pub const SWEEP: &str = "sweep.csv";
pub const REPORT: &str = "report.txt";

pub const SPLIT_SCHEMA_VERSION: u32 = 1;

/// Field counts swept when none are given.
pub const DEFAULT_SWEEP_FIELDS: [usize; 5] = [100, 300, 500, 700, 900];

pub fn roc_file(policy: &str) -> String {
    format!("roc_{policy}.csv")
}

/// Process exit code for a failed stage: 2 config, 3 missing input,
/// 4 schema version, 1 anything else.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Gen(_) => 2,
        Error::MissingInput(_) => 3,
        Error::Model(ModelError::SchemaVersion { .. }) => 4,
        Error::Model(ModelError::InvalidHyperparams(_)) => 2,
        _ => 1,
    }
}

#[derive(Debug, Clone)]
pub struct Workdir {
    pub root: PathBuf,
}

impl Workdir {
    pub fn new(root: impl Into<PathBuf>) -> Result<Workdir> {
        let root = root.into();
        std::fs::create_dir_all(&root)?;
        Ok(Workdir { root })
    }

    /// `name` under the working directory; absolute paths pass through.
    pub fn path(&self, name: impl AsRef<Path>) -> PathBuf {
        self.root.join(name)
    }

    fn input(&self, name: impl AsRef<Path>) -> Result<PathBuf> {
        let p = self.path(name);
        if p.exists() {
            Ok(p)
        } else {
            Err(Error::MissingInput(p.display().to_string()))
        }
    }

    fn write(&self, name: impl AsRef<Path>, text: &str) -> Result<PathBuf> {
        let p = self.path(name);
        std::fs::write(&p, text)?;
        Ok(p)
    }
}

pub fn generate(wd: &Workdir, cfg: &RunConfig, out: &Path) -> Result<PathBuf> {
    let ds = generate_dataset(&cfg.gen_config())?;
    let path = wd.path(out);
    write_dataset(&ds, &path)?;
    Ok(path)
}

#[derive(Serialize, Deserialize)]
struct SplitFile {
    schema_version: u32,
    shift_size: usize,
    split: SplitSpec,
}

pub fn preprocess_stage(wd: &Workdir, cfg: &RunConfig, input: &Path) -> Result<Prepared> {
    let ds = read_dataset(&wd.input(input)?)?;
    let prepared = crate::pipeline::prepare_from(preprocess(&ds.records, &cfg.preprocess_options())?, cfg)?;
    let mut out = BufWriter::new(File::create(wd.path(PREPARED))?);
    write_jsonl(&prepared.pre.records, &mut out)?;
    out.flush()?;
    write_matrix(&prepared.pre, &layout(cfg.n_workers), &wd.path(MATRIX), &wd.path(SIDECAR))?;
    let split = SplitFile { schema_version: SPLIT_SCHEMA_VERSION, shift_size: prepared.shift_size, split: prepared.split.clone() };
    wd.write(SPLIT, &(serde_json::to_string_pretty(&split)? + "\n"))?;
    Ok(prepared)
}

/// Rebuilds the preprocess stage's result from its files.
pub fn load_prepared(wd: &Workdir) -> Result<Prepared> {
    let records_path = wd.input(PREPARED)?;
    let split_path = wd.input(SPLIT)?;
    let matrix = read_matrix(&wd.input(MATRIX)?, &wd.input(SIDECAR)?)?;
    let value: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(split_path)?)?;
    let found = value.get("schema_version").and_then(serde_json::Value::as_u64).unwrap_or(0) as u32;
    if found != SPLIT_SCHEMA_VERSION {
        return Err(ModelError::SchemaVersion { expected: SPLIT_SCHEMA_VERSION, found }.into());
    }
    let split: SplitFile = serde_json::from_value(value)?;
    let mut records = Vec::new();
    for line in BufReader::new(File::open(records_path)?).lines() {
        let line = line?;
        if !line.trim().is_empty() {
            records.push(record_from_json(&line)?);
        }
    }
    if records.len() != matrix.features.row_count {
        return Err(Error::Format("prepared records and matrix rows differ in count".into()));
    }
    let pre = Preprocessed {
        records,
        features: matrix.features,
        levels: matrix.levels,
        stats: matrix.stats,
        options: matrix.options,
    };
    Ok(Prepared { pre, split: split.split, shift_size: split.shift_size })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainTarget {
    Dqn,
    Forest,
    All,
}

impl std::str::FromStr for TrainTarget {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dqn" => Ok(TrainTarget::Dqn),
            "forest" => Ok(TrainTarget::Forest),
            "all" => Ok(TrainTarget::All),
            _ => Err(Error::Config(format!("policy: unknown policy `{s}` (expected dqn, forest or all)"))),
        }
    }
}

pub fn train(wd: &Workdir, cfg: &RunConfig, target: TrainTarget) -> Result<()> {
    let prepared = load_prepared(wd)?;
    if target != TrainTarget::Forest {
        let trained = train_dqn_stage(&prepared, cfg)?;
        let ckpt = Checkpoint {
            schema_version: CHECKPOINT_SCHEMA_VERSION,
            seed: cfg.seed,
            steps: trained.log.steps,
            hyperparams: trained.hyperparams.clone(),
            network: trained.network,
        };
        save_checkpoint(&wd.path(DQN_CHECKPOINT), &ckpt)?;
        let log = serde_json::json!({ "training": trained.log, "grid": trained.grid });
        wd.write(TRAINING_LOG, &(serde_json::to_string(&log)? + "\n"))?;
    }
    if target != TrainTarget::Dqn {
        save_forest(&wd.path(FOREST_CHECKPOINT), &train_forest_stage(&prepared, cfg)?)?;
    }
    Ok(())
}

pub fn load_network(wd: &Workdir) -> Result<QNetwork> {
    Ok(load_checkpoint(&wd.input(DQN_CHECKPOINT)?)?.network)
}

pub fn load_forest_model(wd: &Workdir) -> Result<Forest> {
    load_forest(&wd.input(FOREST_CHECKPOINT)?)
}

fn action_label(a: ActionSpec) -> String {
    match a {
        ActionSpec::AssignWorker(i) => format!("assign_{i}"),
        ActionSpec::RerouteTask => "reroute".into(),
        ActionSpec::ExpediteTask => "expedite".into(),
        ActionSpec::Defer => "defer".into(),
    }
}

/// Q-values and the chosen action at every greedy DQN decision over
/// `shifts`, one row per decision.
pub fn q_value_log(network: &QNetwork, shifts: &[Vec<crate::domain::TransactionRecord>], params: &ScenarioParams) -> Result<String> {
    let n_actions = params.n_actions();
    let mut out = String::from("shift,clock,record_id,action");
    for i in 0..n_actions {
        write!(out, ",q_{}", action_label(ActionSpec::from_index(i, params.n_workers()))).expect("writing to a string");
    }
    out.push('\n');
    let policy = DqnPolicy { network: network.clone() };
    let params = std::sync::Arc::new(params.clone());
    for (s, shift) in shifts.iter().enumerate().filter(|(_, s)| !s.is_empty()) {
        let mut state = WarehouseState::new(shift.clone(), std::sync::Arc::clone(&params))?;
        while !state.is_done() {
            let q = policy.q_values(&state)?;
            let action = state.canonical_action(ActionSpec::from_index(argmax(&q), state.workers.len()));
            let id = state.head_record().expect("decision state has a head").record_id;
            write!(out, "{s},{},{id},{}", state.clock, action_label(action)).expect("writing to a string");
            for v in q {
                write!(out, ",{v}").expect("writing to a string");
            }
            out.push('\n');
            state.step(action)?;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvaluationFile {
    pub results: Vec<EvalResult>,
}

/// Evaluates DQN, forest and rule on the test shifts and writes every
/// evaluation artifact. Returns results in that order.
pub fn evaluate(wd: &Workdir, cfg: &RunConfig) -> Result<Vec<EvalResult>> {
    let prepared = load_prepared(wd)?;
    let network = load_network(wd)?;
    let forest = load_forest_model(wd)?;
    let params = scenario(&prepared, cfg);
    let test = prepared.test_shifts();
    let opts = cfg.eval_options(&prepared);
    let results = vec![
        evaluate_policy(&DqnPolicy { network: network.clone() }, &test, &params, &opts)?,
        evaluate_policy(&forest_policy(&prepared, &forest)?, &test, &params, &opts)?,
        evaluate_policy(&RulePolicy { config: cfg.rule_config() }, &test, &params, &opts)?,
    ];
    let refs: Vec<&EvalResult> = results.iter().collect();
    wd.write(METRICS, &metrics_csv(&metrics_rows(&refs, &results[2])?))?;
    for r in &results {
        wd.write(roc_file(&r.policy), &roc_csv(&r.roc_points))?;
    }
    wd.write(HEATMAP, &heatmap_csv(&results[0].heatmap))?;
    wd.write(Q_VALUES, &q_value_log(&network, &test, &params)?)?;
    let file = EvaluationFile { results: results.clone() };
    wd.write(EVALUATION, &(serde_json::to_string(&file)? + "\n"))?;
    Ok(results)
}

pub fn sweep(wd: &Workdir, cfg: &RunConfig, field_counts: &[usize]) -> Result<Vec<crate::eval::SweepPoint>> {
    for &f in field_counts {
        RunConfig { fields: f, ..cfg.clone() }.validate()?;
    }
    let points = crate::pipeline::schema_sweep(cfg, field_counts)?;
    wd.write(SWEEP, &sweep_csv(&points))?;
    Ok(points)
}

fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Format(e.to_string()))?;
    let header = reader.headers().map_err(|e| Error::Format(e.to_string()))?.iter().map(String::from).collect();
    let rows = reader
        .records()
        .map(|r| r.map(|r| r.iter().map(String::from).collect()).map_err(|e| Error::Format(e.to_string())))
        .collect::<Result<_>>()?;
    Ok((header, rows))
}

/// A policy comparison table from `metrics.csv`, plus the sweep curve when
/// `sweep.csv` exists. Written to `report.txt` and returned.
pub fn report(wd: &Workdir) -> Result<String> {
    let (header, rows) = read_table(&wd.input(METRICS)?)?;
    let col = |name: &str| {
        header.iter().position(|h| h == name).ok_or_else(|| Error::Format(format!("metrics.csv lacks column `{name}`")))
    };
    let cols = [
        ("recovery", col("accuracy_recovery")?),
        ("accuracy", col("accuracy_cls")?),
        ("precision", col("precision")?),
        ("recall", col("recall")?),
        ("f1", col("f1")?),
        ("auc", col("auc")?),
        ("minutes", col("mean_completion")?),
        ("reduction%", col("time_reduction_pct")?),
    ];
    let policy = col("policy")?;
    let mut out = String::from("Policy comparison on the test shifts\n\n");
    write!(out, "{:<8}", "policy").expect("writing to a string");
    for (name, _) in &cols {
        write!(out, " {name:>10}").expect("writing to a string");
    }
    out.push('\n');
    for row in &rows {
        write!(out, "{:<8}", row[policy]).expect("writing to a string");
        for (_, i) in &cols {
            let v: f64 = row[*i].parse().unwrap_or(f64::NAN);
            write!(out, " {v:>10.4}").expect("writing to a string");
        }
        out.push('\n');
    }
    let sweep_path = wd.path(SWEEP);
    if sweep_path.exists() {
        let (_, points) = read_table(&sweep_path)?;
        out.push_str("\nRecovery accuracy by field count\n\n");
        let mut policies: Vec<&str> = Vec::new();
        for p in &points {
            if !policies.contains(&p[1].as_str()) {
                policies.push(&p[1]);
            }
        }
        write!(out, "{:<8}", "fields").expect("writing to a string");
        for p in &policies {
            write!(out, " {p:>10}").expect("writing to a string");
        }
        out.push('\n');
        for chunk in points.chunks(policies.len().max(1)) {
            write!(out, "{:<8}", chunk[0][0]).expect("writing to a string");
            for p in chunk {
                let v: f64 = p[2].parse().unwrap_or(f64::NAN);
                write!(out, " {v:>10.4}").expect("writing to a string");
            }
            out.push('\n');
        }
    }
    wd.write(REPORT, &out)?;
    Ok(out)
}
