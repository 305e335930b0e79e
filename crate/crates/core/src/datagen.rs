//! Deterministic synthetic logistics-execution corpus.
//!
//! Records are generated in four passes over a base population, each pass
//! drawing from its own seed stream: disruptions, multilingual labels,
//! missing priorities and outlier order quantities. Schema width is padded
//! with categorical and numeric extra fields, some of them noisy copies of
//! core fields.
//!
//! Observation model for disruptions (the label itself stays hidden):
//! - equipment downtime sets the flag of the record's required equipment with
//!   probability 0.9; every other flag on every record fires with 0.05;
//! - order surges arrive as groups of at least five simultaneous records and
//!   are mostly rush orders (urgent/high priority);
//! - downtime concentrates on a few faulty equipment units. The unit is
//!   visible in the task id's low-order bucket, not in any flag.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::ser::SerializeMap;
use serde::{Deserialize, Serialize, Serializer};

use crate::domain::{
    DisruptionType, Evidence, FieldValue, GroundTruth, Language, Priority, RecordType, TaskId, TransactionRecord,
    CORE_FIELD_COUNT,
};
use crate::error::{Error, GenError, Result};
use crate::lexicon::Lexicon;
use crate::rng::{stream_rng, StreamRng};

pub const MAX_FIELD_COUNT: usize = 900;

pub const EMBEDDING_BUCKETS: usize = 64;
const FAULTY_UNITS: usize = 2;
const FAULTY_SHARE: f64 = 0.95;
const DOWNTIME_SHARE: f64 = 0.6;
/// Chance that a downtime record shows any equipment flag.
pub const FLAG_GIVEN_DOWNTIME: f64 = 0.9;
/// Part of `FLAG_GIVEN_DOWNTIME` where the flag lands on the required
/// equipment; the rest lands on one of the other two units.
pub const FLAG_ON_REQUIRED: f64 = 0.75;
pub const FLAG_BACKGROUND: f64 = 0.02;
pub const SURGE_MIN_BURST: usize = 5;
const SURGE_MAX_BURST: usize = 8;

pub const PLANNED_MINUTES: (f64, f64) = (20.0, 60.0);
pub const NORMAL_QUANTITY: (i64, i64) = (1, 50);
pub const OUTLIER_QUANTITY: (i64, i64) = (800, 1200);
/// Deadline = arrival + planned * factor + buffer.
pub const DEADLINE_FACTOR: f64 = 1.5;
pub const DEADLINE_BUFFER: f64 = 5.0;
/// Target worker utilisation of the arrival process.
const LOAD: f64 = 0.3;

const CATEGORICAL_SHARE: f64 = 0.7;
const DUPLICATE_SHARE: f64 = 0.1;
const CATEGORICAL_LEVELS: usize = 8;
/// Numeric padding columns are uniform on `[0, scale)` with the scale
/// log-uniform on this range, so their variances span several decades.
const NUMERIC_SCALE_LOG10: (f64, f64) = (-2.0, 1.0);

const ROUTINE_PRIORITY: [f64; 4] = [0.3, 0.4, 0.2, 0.1];
const RUSH_PRIORITY: [f64; 4] = [0.05, 0.15, 0.3, 0.5];
const STATUS_TOKENS: [&str; 4] = ["open", "pick", "pack", "ship"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub n_records: usize,
    pub disruption_rate: f64,
    pub multilingual_rate: f64,
    pub missing_rate: f64,
    pub outlier_rate: f64,
    pub field_count: usize,
    pub n_workers: usize,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            n_records: 300_000,
            disruption_rate: 0.05,
            multilingual_rate: 0.10,
            missing_rate: 0.03,
            outlier_rate: 0.01,
            field_count: 900,
            n_workers: 8,
            seed: 0,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<(), GenError> {
        if self.n_records == 0 {
            return Err(GenError::InvalidConfig("n_records must be positive".into()));
        }
        if self.n_workers == 0 {
            return Err(GenError::InvalidConfig("n_workers must be positive".into()));
        }
        for (name, rate) in [
            ("disruption_rate", self.disruption_rate),
            ("multilingual_rate", self.multilingual_rate),
            ("missing_rate", self.missing_rate),
            ("outlier_rate", self.outlier_rate),
        ] {
            if !(0.0..=1.0).contains(&rate) {
                return Err(GenError::InvalidConfig(format!("{name} must lie in [0, 1], got {rate}")));
            }
        }
        check_field_count(self.field_count)
    }
}

fn check_field_count(field_count: usize) -> Result<(), GenError> {
    if (CORE_FIELD_COUNT..=MAX_FIELD_COUNT).contains(&field_count) {
        Ok(())
    } else {
        Err(GenError::FieldCountOutOfRange(field_count))
    }
}

/// Returns a config whose records are padded to `field_count` total fields.
pub fn scale_schema(cfg: &GenConfig, field_count: usize) -> Result<GenConfig, GenError> {
    check_field_count(field_count)?;
    Ok(GenConfig { field_count, ..cfg.clone() })
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub n_records: usize,
    pub record_types: BTreeMap<String, usize>,
    pub disruption_types: BTreeMap<String, usize>,
    pub languages: BTreeMap<String, usize>,
}

impl Manifest {
    pub fn recompute(records: &[TransactionRecord]) -> Manifest {
        let mut m = Manifest { n_records: records.len(), ..Manifest::default() };
        for t in RecordType::ALL {
            m.record_types.insert(format!("{t:?}"), 0);
        }
        for d in [DisruptionType::None, DisruptionType::EquipmentDowntime, DisruptionType::OrderSurge] {
            m.disruption_types.insert(format!("{d:?}"), 0);
        }
        m.languages.insert("EN".into(), 0);
        m.languages.insert("ES".into(), 0);
        for r in records {
            *m.record_types.get_mut(&format!("{:?}", r.record_type)).unwrap() += 1;
            *m.disruption_types.get_mut(&format!("{:?}", r.truth.disruption_type)).unwrap() += 1;
            let lang = match r.language {
                Language::En => "EN",
                Language::Es => "ES",
            };
            *m.languages.get_mut(lang).unwrap() += 1;
        }
        m
    }

    pub fn disrupted(&self) -> usize {
        self.disruption_types.iter().filter(|(k, _)| k.as_str() != "None").map(|(_, v)| v).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub records: Vec<TransactionRecord>,
    pub config: GenConfig,
    pub manifest: Manifest,
}

/// Count of records an injector touches for a given rate.
pub fn rate_count(n: usize, rate: f64) -> usize {
    ((n as f64) * rate).round() as usize
}

fn draw_priority(rng: &mut StreamRng, weights: &[f64; 4]) -> Priority {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (p, w) in Priority::ALL.into_iter().zip(weights) {
        acc += w;
        if u < acc {
            return p;
        }
    }
    Priority::Urgent
}

/// Equipment unit (0..64) for a bin location, visible in the task id bucket.
fn unit_of(aisle: u32, rack: u32) -> u64 {
    u64::from((aisle - 1) * 8 + (rack - 1))
}

fn deadline_for(timestamp: i64, planned: f64) -> i64 {
    timestamp + (planned * DEADLINE_FACTOR + DEADLINE_BUFFER).ceil() as i64
}

fn base_records(cfg: &GenConfig) -> Vec<TransactionRecord> {
    let n = cfg.n_records;
    let mut rng = stream_rng(cfg.seed, "base");
    let n_inventory = rate_count(n, 0.25);
    let n_order = rate_count(n, 0.25);
    let n_task = n - n_inventory - n_order;
    let mut types: Vec<RecordType> = std::iter::repeat(RecordType::Task)
        .take(n_task)
        .chain(std::iter::repeat(RecordType::Inventory).take(n_inventory))
        .chain(std::iter::repeat(RecordType::Order).take(n_order))
        .collect();
    types.shuffle(&mut rng);

    let mean_planned = (PLANNED_MINUTES.0 + PLANNED_MINUTES.1) / 2.0;
    let mean_gap = mean_planned / (cfg.n_workers as f64 * LOAD);
    let mut clock = 0.0f64;
    types
        .into_iter()
        .enumerate()
        .map(|(i, record_type)| {
            if i > 0 {
                let u: f64 = rng.gen();
                clock += -mean_gap * (1.0 - u).ln();
            }
            let timestamp = clock.floor() as i64;
            let aisle = rng.gen_range(1..=8u32);
            let rack = rng.gen_range(1..=8u32);
            let bin = rng.gen_range(1..=40u32);
            let serial = rng.gen_range(1_000_000_000_000u64..10_000_000_000_000_000);
            let planned = (rng.gen_range(PLANNED_MINUTES.0..PLANNED_MINUTES.1) * 10.0).round() / 10.0;
            TransactionRecord {
                record_id: i as u64 + 1,
                record_type,
                task_id: TaskId::from_value(serial * EMBEDDING_BUCKETS as u64 + unit_of(aisle, rack)),
                timestamp,
                priority: Some(draw_priority(&mut rng, &ROUTINE_PRIORITY)),
                location: format!("A{aisle}-R{rack}-B{bin}"),
                quantity: rng.gen_range(NORMAL_QUANTITY.0..=NORMAL_QUANTITY.1),
                planned_minutes: planned,
                deadline: deadline_for(timestamp, planned),
                language: Language::En,
                status_label: STATUS_TOKENS[rng.gen_range(0..STATUS_TOKENS.len())].to_string(),
                evidence: Evidence { equipment_flags: [false; 3], burst_size: 1 },
                extra_fields: Vec::new(),
                truth: GroundTruth::CLEAN,
            }
        })
        .collect()
}

/// Picks `k` distinct indices, preferring those in `preferred` for the first
/// `k_preferred` draws.
fn pick_indices(
    rng: &mut StreamRng,
    n: usize,
    taken: &[bool],
    preferred: &dyn Fn(usize) -> bool,
    k_preferred: usize,
    k: usize,
) -> Vec<usize> {
    let mut pool: Vec<usize> = (0..n).filter(|&i| !taken[i] && preferred(i)).collect();
    pool.shuffle(rng);
    let mut chosen: Vec<usize> = pool.into_iter().take(k_preferred.min(k)).collect();
    let mut mark = taken.to_vec();
    for &i in &chosen {
        mark[i] = true;
    }
    let mut rest: Vec<usize> = (0..n).filter(|&i| !mark[i]).collect();
    rest.shuffle(rng);
    chosen.extend(rest.into_iter().take(k - chosen.len()));
    chosen
}

/// Partitions `total` into group sizes between the surge bounds; a remainder
/// too small for its own group joins the previous one.
fn burst_sizes(rng: &mut StreamRng, total: usize) -> Vec<usize> {
    let mut sizes = Vec::new();
    let mut left = total;
    while left > 0 {
        let size = rng.gen_range(SURGE_MIN_BURST..=SURGE_MAX_BURST).min(left);
        if size < SURGE_MIN_BURST && !sizes.is_empty() {
            *sizes.last_mut().unwrap() += size;
        } else {
            sizes.push(size);
        }
        left -= size;
    }
    sizes
}

/// Marks exactly `round(rate * n)` records disrupted (60% downtime, 40%
/// surge) and draws the noisy evidence for every record.
pub fn inject_disruptions(records: &mut [TransactionRecord], rate: f64, seed: u64) {
    let n = records.len();
    let mut rng = stream_rng(seed, "disruptions");
    let k = rate_count(n, rate).min(n);
    let k_down = ((k as f64) * DOWNTIME_SHARE).round() as usize;
    let k_surge = k - k_down;

    let mut units: Vec<usize> = (0..EMBEDDING_BUCKETS).collect();
    units.shuffle(&mut rng);
    let faulty: Vec<usize> = units[..FAULTY_UNITS].to_vec();

    let mut taken = vec![false; n];
    let in_faulty = |i: usize| faulty.contains(&records[i].task_id.bucket(EMBEDDING_BUCKETS));
    let k_faulty = ((k_down as f64) * FAULTY_SHARE).round() as usize;
    let down = pick_indices(&mut rng, n, &taken, &in_faulty, k_faulty, k_down);
    for &i in &down {
        taken[i] = true;
    }
    let is_order = |i: usize| records[i].record_type == RecordType::Order;
    let mut surge = pick_indices(&mut rng, n, &taken, &is_order, k_surge, k_surge);
    surge.sort_unstable();

    for &i in &down {
        records[i].truth = GroundTruth::of(DisruptionType::EquipmentDowntime);
        records[i].priority = Some(draw_priority(&mut rng, &RUSH_PRIORITY));
    }
    let mut offset = 0;
    for size in burst_sizes(&mut rng, surge.len()) {
        let group = &surge[offset..offset + size];
        offset += size;
        let anchor = records[group[rng.gen_range(0..size)]].timestamp;
        for &i in group {
            let r = &mut records[i];
            r.truth = GroundTruth::of(DisruptionType::OrderSurge);
            r.timestamp = anchor;
            r.deadline = deadline_for(anchor, r.planned_minutes);
            r.priority = Some(draw_priority(&mut rng, &RUSH_PRIORITY));
        }
    }

    for r in records.iter_mut() {
        let flags = &mut r.evidence.equipment_flags;
        if r.truth.disruption_type == DisruptionType::EquipmentDowntime {
            *flags = [false; 3];
            let required = r.record_type.required_equipment().index();
            let u: f64 = rng.gen();
            if u < FLAG_ON_REQUIRED {
                flags[required] = true;
            } else if u < FLAG_GIVEN_DOWNTIME {
                flags[(required + rng.gen_range(1..3)) % 3] = true;
            }
        } else {
            for flag in flags.iter_mut() {
                *flag = rng.gen::<f64>() < FLAG_BACKGROUND;
            }
        }
    }
}

/// Switches `round(rate * n)` records to Spanish labels.
pub fn inject_multilingual(records: &mut [TransactionRecord], rate: f64, seed: u64) {
    let mut rng = stream_rng(seed, "multilingual");
    let lexicon = Lexicon::shipped();
    let k = rate_count(records.len(), rate).min(records.len());
    let mut idx: Vec<usize> = (0..records.len()).collect();
    idx.shuffle(&mut rng);
    for r in records.iter_mut() {
        r.language = Language::En;
    }
    for &i in &idx[..k] {
        let r = &mut records[i];
        r.language = Language::Es;
        if let Some(es) = lexicon.spanish_for(&r.status_label) {
            r.status_label = es.to_string();
        }
    }
}

/// Removes the priority of `round(rate * n)` records.
pub fn inject_missing(records: &mut [TransactionRecord], rate: f64, seed: u64) {
    let mut rng = stream_rng(seed, "missing");
    let k = rate_count(records.len(), rate).min(records.len());
    let mut idx: Vec<usize> = (0..records.len()).collect();
    idx.shuffle(&mut rng);
    for &i in &idx[..k] {
        records[i].priority = None;
    }
}

/// Gives `round(rate * n)` Order records a bulk quantity. Capped at the
/// number of Order records available.
pub fn inject_outliers(records: &mut [TransactionRecord], rate: f64, seed: u64) {
    let mut rng = stream_rng(seed, "outliers");
    let k = rate_count(records.len(), rate);
    let mut orders: Vec<usize> =
        (0..records.len()).filter(|&i| records[i].record_type == RecordType::Order).collect();
    orders.shuffle(&mut rng);
    for &i in orders.iter().take(k) {
        records[i].quantity = rng.gen_range(OUTLIER_QUANTITY.0..=OUTLIER_QUANTITY.1);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum PaddingKind {
    Categorical,
    Numeric(f64),
    /// Noisy copy of a core numeric field.
    Duplicate(CoreNumeric),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CoreNumeric {
    Quantity,
    Planned,
    Slack,
}

fn padding_layout(seed: u64, n_pad: usize) -> Vec<PaddingKind> {
    let mut rng = stream_rng(seed, "schema-layout");
    let n_dup = rate_count(n_pad, DUPLICATE_SHARE);
    let n_rest = n_pad - n_dup;
    let n_cat = rate_count(n_rest, CATEGORICAL_SHARE);
    let sources = [CoreNumeric::Quantity, CoreNumeric::Planned, CoreNumeric::Slack];
    let mut kinds: Vec<PaddingKind> = (0..n_dup)
        .map(|i| PaddingKind::Duplicate(sources[i % sources.len()]))
        .chain(std::iter::repeat(PaddingKind::Categorical).take(n_cat))
        .chain((0..n_rest - n_cat).map(|_| PaddingKind::Numeric(0.0)))
        .collect();
    kinds.shuffle(&mut rng);
    for k in &mut kinds {
        if let PaddingKind::Numeric(scale) = k {
            *scale = 10f64.powf(rng.gen_range(NUMERIC_SCALE_LOG10.0..NUMERIC_SCALE_LOG10.1));
        }
    }
    kinds
}

pub fn padding_field_name(position: usize) -> String {
    format!("x{position:03}")
}

fn pad_schema(records: &mut [TransactionRecord], cfg: &GenConfig) {
    let n_pad = cfg.field_count - CORE_FIELD_COUNT;
    if n_pad == 0 {
        return;
    }
    let layout = padding_layout(cfg.seed, n_pad);
    let names: Vec<String> = (0..n_pad).map(|j| padding_field_name(CORE_FIELD_COUNT + j)).collect();
    let mut rng = stream_rng(cfg.seed, "schema-values");
    for r in records.iter_mut() {
        let slack = (r.deadline - r.timestamp) as f64;
        r.extra_fields = layout
            .iter()
            .zip(&names)
            .map(|(kind, name)| {
                let value = match kind {
                    PaddingKind::Categorical => {
                        FieldValue::Cat(format!("L{}", rng.gen_range(0..CATEGORICAL_LEVELS)))
                    }
                    PaddingKind::Numeric(scale) => FieldValue::Num(round3(rng.gen_range(0.0..*scale))),
                    PaddingKind::Duplicate(src) => {
                        let base = match src {
                            CoreNumeric::Quantity => r.quantity as f64,
                            CoreNumeric::Planned => r.planned_minutes,
                            CoreNumeric::Slack => slack,
                        };
                        FieldValue::Num(round3(base * (1.0 + rng.gen_range(-0.05..0.05))))
                    }
                };
                (name.clone(), value)
            })
            .collect();
    }
}

fn round3(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

fn finalize_bursts(records: &mut [TransactionRecord]) {
    let mut start = 0;
    while start < records.len() {
        let ts = records[start].timestamp;
        let end = start + records[start..].iter().take_while(|r| r.timestamp == ts).count();
        for r in &mut records[start..end] {
            r.evidence.burst_size = (end - start) as u32;
        }
        start = end;
    }
}

pub fn generate_dataset(cfg: &GenConfig) -> Result<Dataset, GenError> {
    cfg.validate()?;
    let mut records = base_records(cfg);
    inject_disruptions(&mut records, cfg.disruption_rate, cfg.seed);
    inject_multilingual(&mut records, cfg.multilingual_rate, cfg.seed);
    inject_missing(&mut records, cfg.missing_rate, cfg.seed);
    inject_outliers(&mut records, cfg.outlier_rate, cfg.seed);
    records.sort_by_key(|r| (r.timestamp, r.record_id));
    finalize_bursts(&mut records);
    pad_schema(&mut records, cfg);
    let manifest = Manifest::recompute(&records);
    Ok(Dataset { records, config: cfg.clone(), manifest })
}

// ---------------------------------------------------------------------------
// JSON Lines format

/// Key order on disk: record_id, record_type, task_id, timestamp, priority,
/// location, quantity, planned_minutes, deadline, language, status_label,
/// evidence, extra_fields, truth.
#[derive(Serialize, Deserialize)]
struct RecordLine {
    record_id: u64,
    record_type: RecordType,
    task_id: TaskId,
    timestamp: i64,
    priority: Option<String>,
    location: String,
    quantity: i64,
    planned_minutes: f64,
    deadline: i64,
    language: Language,
    status_label: String,
    evidence: Evidence,
    #[serde(serialize_with = "ordered_fields", deserialize_with = "read_ordered_fields")]
    extra_fields: Vec<(String, FieldValue)>,
    truth: GroundTruth,
}

fn ordered_fields<S: Serializer>(fields: &[(String, FieldValue)], s: S) -> std::result::Result<S::Ok, S::Error> {
    let mut map = s.serialize_map(Some(fields.len()))?;
    for (k, v) in fields {
        map.serialize_entry(k, v)?;
    }
    map.end()
}

fn read_ordered_fields<'de, D: serde::Deserializer<'de>>(
    d: D,
) -> std::result::Result<Vec<(String, FieldValue)>, D::Error> {
    struct Visitor;
    impl<'de> serde::de::Visitor<'de> for Visitor {
        type Value = Vec<(String, FieldValue)>;
        fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
            f.write_str("an object of extra fields")
        }
        fn visit_map<A: serde::de::MapAccess<'de>>(self, mut map: A) -> std::result::Result<Self::Value, A::Error> {
            let mut out = Vec::new();
            while let Some(entry) = map.next_entry()? {
                out.push(entry);
            }
            Ok(out)
        }
    }
    d.deserialize_map(Visitor)
}

impl From<&TransactionRecord> for RecordLine {
    fn from(r: &TransactionRecord) -> Self {
        RecordLine {
            record_id: r.record_id,
            record_type: r.record_type,
            task_id: r.task_id,
            timestamp: r.timestamp,
            priority: r.observable().priority_token().map(str::to_string),
            location: r.location.clone(),
            quantity: r.quantity,
            planned_minutes: r.planned_minutes,
            deadline: r.deadline,
            language: r.language,
            status_label: r.status_label.clone(),
            evidence: r.evidence,
            extra_fields: r.extra_fields.clone(),
            truth: r.truth,
        }
    }
}

impl RecordLine {
    fn into_record(self) -> Result<TransactionRecord> {
        let priority = match self.priority {
            None => None,
            Some(tok) => Some(
                Priority::from_token(Lexicon::shipped().normalize(&tok))
                    .ok_or_else(|| Error::Format(format!("unknown priority token `{tok}`")))?,
            ),
        };
        Ok(TransactionRecord {
            record_id: self.record_id,
            record_type: self.record_type,
            task_id: self.task_id,
            timestamp: self.timestamp,
            priority,
            location: self.location,
            quantity: self.quantity,
            planned_minutes: self.planned_minutes,
            deadline: self.deadline,
            language: self.language,
            status_label: self.status_label,
            evidence: self.evidence,
            extra_fields: self.extra_fields,
            truth: self.truth,
        })
    }
}

pub fn record_to_json(r: &TransactionRecord) -> String {
    serde_json::to_string(&RecordLine::from(r)).expect("record serializes")
}

pub fn record_from_json(line: &str) -> Result<TransactionRecord> {
    serde_json::from_str::<RecordLine>(line)?.into_record()
}

pub fn write_jsonl(records: &[TransactionRecord], out: &mut impl Write) -> std::io::Result<()> {
    for r in records {
        out.write_all(record_to_json(r).as_bytes())?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn manifest_path(dataset_path: &Path) -> std::path::PathBuf {
    let stem = dataset_path.file_stem().and_then(|s| s.to_str()).unwrap_or("dataset");
    dataset_path.with_file_name(format!("{stem}.manifest.json"))
}

#[derive(Serialize, Deserialize)]
struct ManifestFile {
    schema_version: u32,
    config: GenConfig,
    counts: Manifest,
}

pub const DATASET_SCHEMA_VERSION: u32 = 1;

/// Writes `<path>` as JSONL and `<stem>.manifest.json` alongside.
pub fn write_dataset(ds: &Dataset, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_jsonl(&ds.records, &mut out)?;
    out.flush()?;
    let manifest = ManifestFile { schema_version: DATASET_SCHEMA_VERSION, config: ds.config.clone(), counts: ds.manifest.clone() };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    std::fs::write(manifest_path(path), text)?;
    Ok(())
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let mpath = manifest_path(path);
    if !path.exists() {
        return Err(Error::MissingInput(path.display().to_string()));
    }
    if !mpath.exists() {
        return Err(Error::MissingInput(mpath.display().to_string()));
    }
    let manifest: ManifestFile = serde_json::from_str(&std::fs::read_to_string(&mpath)?)?;
    if manifest.schema_version != DATASET_SCHEMA_VERSION {
        return Err(crate::error::ModelError::SchemaVersion {
            expected: DATASET_SCHEMA_VERSION,
            found: manifest.schema_version,
        }
        .into());
    }
    let mut records = Vec::new();
    for line in BufReader::new(File::open(path)?).lines() {
        let line = line?;
        if !line.trim().is_empty() {
            records.push(record_from_json(&line)?);
        }
    }
    let recount = Manifest::recompute(&records);
    if recount != manifest.counts {
        return Err(Error::Format("manifest counts disagree with records".into()));
    }
    Ok(Dataset { records, config: manifest.config, manifest: manifest.counts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::validate_record;
    use proptest::prelude::*;

    fn small(n: usize, seed: u64) -> GenConfig {
        GenConfig { n_records: n, field_count: 40, seed, ..GenConfig::default() }
    }

    fn serialized(ds: &Dataset) -> Vec<u8> {
        let mut buf = Vec::new();
        write_jsonl(&ds.records, &mut buf).unwrap();
        buf
    }

    #[test]
    fn full_scale_disruption_count() {
        assert_eq!(rate_count(300_000, 0.05), 15_000);
        assert_eq!(rate_count(10_000, 0.03), 300);
    }

    #[test]
    fn zero_disruption_rate() {
        let ds = generate_dataset(&GenConfig { disruption_rate: 0.0, ..small(1000, 3) }).unwrap();
        assert_eq!(ds.records.iter().filter(|r| r.truth.disrupted).count(), 0);
    }

    #[test]
    fn generation_is_byte_identical() {
        let cfg = GenConfig { n_records: 10_000, field_count: 30, seed: 7, ..GenConfig::default() };
        let a = generate_dataset(&cfg).unwrap();
        let b = generate_dataset(&cfg).unwrap();
        assert_eq!(serialized(&a), serialized(&b));
    }

    #[test]
    fn record_type_mix() {
        let ds = generate_dataset(&small(1001, 1)).unwrap();
        assert_eq!(ds.manifest.record_types["Inventory"], 250);
        assert_eq!(ds.manifest.record_types["Order"], 250);
        assert_eq!(ds.manifest.record_types["Task"], 501);
    }

    #[test]
    fn disruption_split_sixty_forty() {
        let mut records = base_records(&small(1000, 11));
        inject_disruptions(&mut records, 0.05, 11);
        let down = records.iter().filter(|r| r.truth.disruption_type == DisruptionType::EquipmentDowntime).count();
        let surge = records.iter().filter(|r| r.truth.disruption_type == DisruptionType::OrderSurge).count();
        assert_eq!((down, surge), (30, 20));
    }

    #[test]
    fn full_disruption_rate() {
        let mut records = base_records(&small(200, 2));
        inject_disruptions(&mut records, 1.0, 2);
        assert!(records.iter().all(|r| r.truth.disrupted));
    }

    #[test]
    fn different_seeds_same_counts() {
        let base = base_records(&small(1000, 5));
        let mut a = base.clone();
        let mut b = base;
        inject_disruptions(&mut a, 0.05, 100);
        inject_disruptions(&mut b, 0.05, 200);
        let ids = |rs: &[TransactionRecord]| rs.iter().filter(|r| r.truth.disrupted).map(|r| r.record_id).collect::<Vec<_>>();
        assert_eq!(ids(&a).len(), ids(&b).len());
        assert_ne!(ids(&a), ids(&b));
    }

    #[test]
    fn surges_arrive_in_bursts() {
        let ds = generate_dataset(&GenConfig { n_records: 5000, field_count: 14, seed: 9, ..GenConfig::default() }).unwrap();
        for r in ds.records.iter().filter(|r| r.truth.disruption_type == DisruptionType::OrderSurge) {
            assert!(r.evidence.burst_size as usize >= SURGE_MIN_BURST);
        }
    }

    #[test]
    fn multilingual_counts_and_lexicon() {
        let mut records = base_records(&small(1000, 4));
        inject_multilingual(&mut records, 0.10, 4);
        let es: Vec<_> = records.iter().filter(|r| r.language == Language::Es).collect();
        assert_eq!(es.len(), 100);
        let lex = Lexicon::shipped();
        for r in es {
            assert!(!lex.is_english(&r.status_label) || r.status_label == "normal");
            assert!(lex.is_english(lex.normalize(&r.status_label)));
        }
        let mut none = base_records(&small(500, 4));
        inject_multilingual(&mut none, 0.0, 4);
        assert!(none.iter().all(|r| r.language == Language::En));
    }

    #[test]
    fn missing_targets_priority_only() {
        let cfg = small(10_000, 8);
        let mut records = base_records(&cfg);
        let before = records.clone();
        inject_missing(&mut records, 0.03, 8);
        assert_eq!(records.iter().filter(|r| r.priority.is_none()).count(), 300);
        for (a, b) in records.iter().zip(&before) {
            assert_eq!(TransactionRecord { priority: b.priority, ..a.clone() }, *b);
        }
        let mut again = before.clone();
        inject_missing(&mut again, 0.03, 8);
        assert_eq!(again, records);
        let mut zero = before;
        inject_missing(&mut zero, 0.0, 8);
        assert!(zero.iter().all(|r| r.priority.is_some()));
    }

    #[test]
    fn outliers_only_on_orders() {
        let cfg = small(10_000, 12);
        let mut records = base_records(&cfg);
        let before = records.clone();
        inject_outliers(&mut records, 0.01, 12);
        assert_eq!(records.iter().filter(|r| r.quantity >= 800).count(), 100);
        for (a, b) in records.iter().zip(&before) {
            if a.record_type != RecordType::Order {
                assert_eq!(a.quantity, b.quantity);
            }
        }
        let mut none = before;
        inject_outliers(&mut none, 0.0, 12);
        assert!(none.iter().map(|r| r.quantity).max().unwrap() <= 50);
    }

    #[test]
    fn schema_scaling_bounds() {
        let cfg = GenConfig::default();
        assert!(scale_schema(&cfg, 14).is_ok());
        assert_eq!(scale_schema(&cfg, 13), Err(GenError::FieldCountOutOfRange(13)));
        assert_eq!(scale_schema(&cfg, 901), Err(GenError::FieldCountOutOfRange(901)));

        let core = generate_dataset(&GenConfig { n_records: 50, field_count: 14, ..cfg.clone() }).unwrap();
        assert!(core.records.iter().all(|r| r.extra_fields.is_empty()));
        let wide = generate_dataset(&GenConfig { n_records: 20, field_count: 900, ..cfg.clone() }).unwrap();
        assert!(wide.records.iter().all(|r| r.extra_fields.len() == 886 && r.field_count() == 900));
        let hundred = generate_dataset(&scale_schema(&GenConfig { n_records: 20, ..cfg }, 100).unwrap()).unwrap();
        assert!(hundred.records.iter().all(|r| r.field_count() == 100));
    }

    #[test]
    fn padding_mix() {
        let layout = padding_layout(1, 886);
        let dup = layout.iter().filter(|k| matches!(k, PaddingKind::Duplicate(_))).count();
        let cat = layout.iter().filter(|k| **k == PaddingKind::Categorical).count();
        assert_eq!(dup, 89);
        assert_eq!(cat, rate_count(886 - 89, 0.7));
    }

    #[test]
    fn core_fields_independent_of_schema_width() {
        let a = generate_dataset(&GenConfig { n_records: 300, field_count: 100, ..GenConfig::default() }).unwrap();
        let b = generate_dataset(&GenConfig { n_records: 300, field_count: 900, ..GenConfig::default() }).unwrap();
        for (x, y) in a.records.iter().zip(&b.records) {
            assert_eq!(TransactionRecord { extra_fields: vec![], ..x.clone() }, TransactionRecord { extra_fields: vec![], ..y.clone() });
        }
    }

    #[test]
    fn generated_records_validate() {
        let ds = generate_dataset(&small(2000, 21)).unwrap();
        assert!(ds.records.iter().all(|r| validate_record(r).ok));
    }

    #[test]
    fn evidence_model_chi_square() {
        let ds = generate_dataset(&GenConfig { n_records: 40_000, field_count: 14, seed: 5, ..GenConfig::default() }).unwrap();
        let mut down = [0usize; 2];
        let mut down_required = [0usize; 2];
        let mut clean = [0usize; 2];
        for r in &ds.records {
            let required = r.evidence.equipment_down(r.record_type.required_equipment()) as usize;
            let any = r.evidence.equipment_flags.iter().any(|&f| f) as usize;
            match r.truth.disruption_type {
                DisruptionType::EquipmentDowntime => {
                    down[any] += 1;
                    down_required[required] += 1;
                }
                DisruptionType::None => clean[required] += 1,
                DisruptionType::OrderSurge => {}
            }
        }
        // One-degree-of-freedom goodness of fit against the stated rates; 6.635 is the p=0.01 cutoff.
        let chi = |counts: [usize; 2], p: f64| {
            let n = (counts[0] + counts[1]) as f64;
            let e1 = n * p;
            let e0 = n - e1;
            (counts[1] as f64 - e1).powi(2) / e1 + (counts[0] as f64 - e0).powi(2) / e0
        };
        assert!(chi(down, FLAG_GIVEN_DOWNTIME) < 6.635, "downtime flags {down:?}");
        assert!(chi(down_required, FLAG_ON_REQUIRED) < 6.635, "required flags {down_required:?}");
        assert!(chi(clean, FLAG_BACKGROUND) < 6.635, "clean flags {clean:?}");
    }

    #[test]
    fn jsonl_keys_in_documented_order() {
        let ds = generate_dataset(&small(3, 1)).unwrap();
        let line = record_to_json(&ds.records[0]);
        let keys = ["record_id", "record_type", "task_id", "timestamp", "priority", "location", "quantity",
            "planned_minutes", "deadline", "language", "status_label", "evidence", "extra_fields", "truth"];
        let positions: Vec<usize> = keys.iter().map(|k| line.find(&format!("\"{k}\"")).unwrap()).collect();
        assert!(positions.windows(2).all(|w| w[0] < w[1]), "{line}");
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        let ds = generate_dataset(&GenConfig { multilingual_rate: 0.5, ..small(300, 2) }).unwrap();
        write_dataset(&ds, &path).unwrap();
        assert!(dir.path().join("d.manifest.json").exists());
        let back = read_dataset(&path).unwrap();
        assert_eq!(back, ds);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn manifest_and_rates_hold(n in 1usize..600, d in 0.0f64..1.0, m in 0.0f64..1.0, miss in 0.0f64..1.0, seed in any::<u64>()) {
            let cfg = GenConfig { n_records: n, disruption_rate: d, multilingual_rate: m, missing_rate: miss,
                outlier_rate: 0.01, field_count: 20, n_workers: 4, seed };
            let ds = generate_dataset(&cfg).unwrap();
            prop_assert_eq!(ds.records.len(), n);
            prop_assert_eq!(&Manifest::recompute(&ds.records), &ds.manifest);
            prop_assert_eq!(ds.manifest.disrupted(), rate_count(n, d));
            prop_assert_eq!(ds.manifest.languages["ES"], rate_count(n, m));
            prop_assert_eq!(ds.records.iter().filter(|r| r.priority.is_none()).count(), rate_count(n, miss));
            let mut ids: Vec<u64> = ds.records.iter().map(|r| r.record_id).collect();
            ids.sort_unstable();
            ids.dedup();
            prop_assert_eq!(ids.len(), n);
        }
    }
}
