//! Shared vocabulary: task identifiers, transaction records, scheduler actions
//! and record validation.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::TaskIdError;

pub const TASK_ID_LEN: usize = 18;

/// Number of fields every record carries before schema padding.
pub const CORE_FIELD_COUNT: usize = 14;

/// An 18-digit decimal task identifier. Treated as an opaque digit string.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TaskId([u8; TASK_ID_LEN]);

pub fn parse_task_id(text: &str) -> Result<TaskId, TaskIdError> {
    let bytes = text.as_bytes();
    if bytes.len() != TASK_ID_LEN {
        return Err(TaskIdError::WrongLength(bytes.len()));
    }
    if let Some(pos) = bytes.iter().position(|b| !b.is_ascii_digit()) {
        return Err(TaskIdError::NonDigitCharacter(pos));
    }
    let mut digits = [0u8; TASK_ID_LEN];
    digits.copy_from_slice(bytes);
    Ok(TaskId(digits))
}

impl TaskId {
    /// Builds an id from a value below 10^18, zero padded.
    pub fn from_value(value: u64) -> TaskId {
        assert!(value < 1_000_000_000_000_000_000, "task id value exceeds 18 digits");
        let text = format!("{value:018}");
        parse_task_id(&text).expect("zero-padded value is a valid task id")
    }

    pub fn as_str(&self) -> &str {
        std::str::from_utf8(&self.0).expect("task id holds ascii digits")
    }

    pub fn value(&self) -> u64 {
        self.0.iter().fold(0u64, |acc, d| acc * 10 + u64::from(d - b'0'))
    }

    /// Hash bucket used for the learned task embedding.
    pub fn bucket(&self, buckets: usize) -> usize {
        (self.value() % buckets as u64) as usize
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Debug for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TaskId({})", self.as_str())
    }
}

impl FromStr for TaskId {
    type Err = TaskIdError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_task_id(s)
    }
}

impl Serialize for TaskId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for TaskId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        parse_task_id(&text).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RecordType {
    Task,
    Inventory,
    Order,
}

impl RecordType {
    pub const ALL: [RecordType; 3] = [RecordType::Task, RecordType::Inventory, RecordType::Order];

    pub fn index(self) -> usize {
        match self {
            RecordType::Task => 0,
            RecordType::Inventory => 1,
            RecordType::Order => 2,
        }
    }

    /// Equipment a record of this type needs to be serviced.
    pub fn required_equipment(self) -> Equipment {
        match self {
            RecordType::Task => Equipment::Conveyor,
            RecordType::Inventory => Equipment::Forklift,
            RecordType::Order => Equipment::Scanner,
        }
    }

    pub fn plural_label(self) -> &'static str {
        match self {
            RecordType::Task => "Tasks",
            RecordType::Inventory => "Inventory",
            RecordType::Order => "Orders",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Equipment {
    Conveyor,
    Forklift,
    Scanner,
}

impl Equipment {
    pub fn index(self) -> usize {
        match self {
            Equipment::Conveyor => 0,
            Equipment::Forklift => 1,
            Equipment::Scanner => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Priority {
    Low,
    Normal,
    High,
    Urgent,
}

impl Priority {
    pub const ALL: [Priority; 4] = [Priority::Low, Priority::Normal, Priority::High, Priority::Urgent];

    pub fn index(self) -> usize {
        match self {
            Priority::Low => 0,
            Priority::Normal => 1,
            Priority::High => 2,
            Priority::Urgent => 3,
        }
    }

    /// Canonical English token.
    pub fn token(self) -> &'static str {
        match self {
            Priority::Low => "low",
            Priority::Normal => "normal",
            Priority::High => "high",
            Priority::Urgent => "urgent",
        }
    }

    pub fn from_token(token: &str) -> Option<Priority> {
        Priority::ALL.into_iter().find(|p| p.token() == token)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Language {
    #[serde(rename = "EN")]
    En,
    #[serde(rename = "ES")]
    Es,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DisruptionType {
    None,
    EquipmentDowntime,
    OrderSurge,
}

/// Categorical-or-numeric padding value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FieldValue {
    Num(f64),
    Cat(String),
}

/// Observable evidence attached to a record: noisy equipment flags
/// (conveyor, forklift, scanner) and the size of the simultaneous-arrival
/// group the record came in with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Evidence {
    pub equipment_flags: [bool; 3],
    pub burst_size: u32,
}

impl Evidence {
    pub fn equipment_down(&self, equipment: Equipment) -> bool {
        self.equipment_flags[equipment.index()]
    }
}

/// Ground-truth disruption label. Never part of the observable view.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub disrupted: bool,
    pub disruption_type: DisruptionType,
}

impl GroundTruth {
    pub const CLEAN: GroundTruth = GroundTruth { disrupted: false, disruption_type: DisruptionType::None };

    pub fn of(kind: DisruptionType) -> GroundTruth {
        GroundTruth { disrupted: kind != DisruptionType::None, disruption_type: kind }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransactionRecord {
    pub record_id: u64,
    pub record_type: RecordType,
    pub task_id: TaskId,
    /// Minutes since scenario epoch.
    pub timestamp: i64,
    pub priority: Option<Priority>,
    pub location: String,
    pub quantity: i64,
    pub planned_minutes: f64,
    pub deadline: i64,
    pub language: Language,
    pub status_label: String,
    pub evidence: Evidence,
    pub extra_fields: Vec<(String, FieldValue)>,
    pub truth: GroundTruth,
}

/// Record view with the ground-truth label stripped. Feature encoders only
/// ever receive this.
#[derive(Debug, Clone, Copy)]
pub struct ObservableRecord<'a> {
    pub record_id: u64,
    pub record_type: RecordType,
    pub task_id: TaskId,
    pub timestamp: i64,
    pub priority: Option<Priority>,
    pub location: &'a str,
    pub quantity: i64,
    pub planned_minutes: f64,
    pub deadline: i64,
    pub language: Language,
    pub status_label: &'a str,
    pub evidence: Evidence,
    pub extra_fields: &'a [(String, FieldValue)],
}

impl TransactionRecord {
    pub fn observable(&self) -> ObservableRecord<'_> {
        ObservableRecord {
            record_id: self.record_id,
            record_type: self.record_type,
            task_id: self.task_id,
            timestamp: self.timestamp,
            priority: self.priority,
            location: &self.location,
            quantity: self.quantity,
            planned_minutes: self.planned_minutes,
            deadline: self.deadline,
            language: self.language,
            status_label: &self.status_label,
            evidence: self.evidence,
            extra_fields: &self.extra_fields,
        }
    }

    /// Core fields plus padding fields.
    pub fn field_count(&self) -> usize {
        CORE_FIELD_COUNT + self.extra_fields.len()
    }
}

impl ObservableRecord<'_> {
    /// Priority as its surface token in the record's language, if present.
    pub fn priority_token(&self) -> Option<&'static str> {
        self.priority.map(|p| match self.language {
            Language::En => p.token(),
            Language::Es => crate::lexicon::to_spanish(p.token()).unwrap_or(p.token()),
        })
    }
}

/// The scheduler's decision vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ActionSpec {
    AssignWorker(usize),
    RerouteTask,
    ExpediteTask,
    Defer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionClass {
    Standard,
    Remediation,
}

impl ActionSpec {
    pub fn class(self) -> ActionClass {
        match self {
            ActionSpec::RerouteTask | ActionSpec::ExpediteTask => ActionClass::Remediation,
            ActionSpec::AssignWorker(_) | ActionSpec::Defer => ActionClass::Standard,
        }
    }

    pub fn is_remediation(self) -> bool {
        self.class() == ActionClass::Remediation
    }

    /// Number of actions for a scenario with `n_workers` workers.
    pub fn count(n_workers: usize) -> usize {
        n_workers + 3
    }

    /// All actions in enumeration order: assignments by worker index, then
    /// reroute, expedite, defer.
    pub fn enumerate(n_workers: usize) -> Vec<ActionSpec> {
        (0..ActionSpec::count(n_workers)).map(|i| ActionSpec::from_index(i, n_workers)).collect()
    }

    pub fn index(self, n_workers: usize) -> usize {
        match self {
            ActionSpec::AssignWorker(i) => i,
            ActionSpec::RerouteTask => n_workers,
            ActionSpec::ExpediteTask => n_workers + 1,
            ActionSpec::Defer => n_workers + 2,
        }
    }

    pub fn from_index(index: usize, n_workers: usize) -> ActionSpec {
        match index {
            i if i < n_workers => ActionSpec::AssignWorker(i),
            i if i == n_workers => ActionSpec::RerouteTask,
            i if i == n_workers + 1 => ActionSpec::ExpediteTask,
            i if i == n_workers + 2 => ActionSpec::Defer,
            _ => panic!("action index {index} out of range for {n_workers} workers"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub violations: Vec<(String, String)>,
}

impl ValidationReport {
    pub fn contains(&self, field: &str, rule: &str) -> bool {
        self.violations.iter().any(|(f, r)| f == field && r == rule)
    }
}

fn is_bin_code(location: &str) -> bool {
    let parts: Vec<&str> = location.split('-').collect();
    if parts.len() != 3 {
        return false;
    }
    parts.iter().zip(['A', 'R', 'B']).all(|(part, prefix)| {
        let mut chars = part.chars();
        chars.next() == Some(prefix) && {
            let rest = chars.as_str();
            !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit())
        }
    })
}

/// Checks every record invariant and reports each violation as data.
pub fn validate_record(r: &TransactionRecord) -> ValidationReport {
    let mut violations = Vec::new();
    let mut push = |field: &str, rule: &str| violations.push((field.to_string(), rule.to_string()));

    if parse_task_id(r.task_id.as_str()).is_err() {
        push("task_id", "eighteen_digits");
    }
    if r.quantity < 0 {
        push("quantity", "non_negative");
    }
    if !(r.planned_minutes.is_finite() && r.planned_minutes > 0.0) {
        push("planned_minutes", "positive");
    }
    if r.deadline < r.timestamp {
        push("deadline", "not_before_timestamp");
    }
    if !is_bin_code(&r.location) {
        push("location", "bin_code");
    }
    if r.truth.disrupted != (r.truth.disruption_type != DisruptionType::None) {
        push("truth_disruption_type", "consistency");
    }
    let mut seen = HashSet::new();
    if !r.extra_fields.iter().all(|(k, _)| seen.insert(k.as_str())) {
        push("extra_fields", "unique_keys");
    }
    ValidationReport { ok: violations.is_empty(), violations }
}
