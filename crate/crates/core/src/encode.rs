//! State-vector encoding for the scheduler.
//!
//! Layout, in order:
//!
//! | span                 | width      |
//! |----------------------|------------|
//! | task_embedding       | 8          |
//! | priority_onehot      | 4          |
//! | record_type_onehot   | 3          |
//! | equipment_flags      | 3          |
//! | queue_stats          | 2          |
//! | time_to_deadline     | 1          |
//! | processing_time_norm | 1          |
//! | remediation_status   | 2          |
//! | worker_idle          | n_workers  |
//!
//! The embedding span is looked up from a learned table at forward time, so
//! an [`Observation`] carries the bucket index plus the dense remainder.

use serde::{Deserialize, Serialize};

use crate::domain::{ObservableRecord, Priority};
use crate::error::PreprocessError;
use crate::lexicon::Lexicon;
use crate::preprocess::observed_priority;

pub const EMBEDDING_DIM: usize = 8;
pub const EMBEDDING_BUCKETS: usize = crate::datagen::EMBEDDING_BUCKETS;
pub const MAX_QUEUE: usize = 64;
/// Arrival counts in the ten-minute window saturate here.
pub const MAX_RECENT_ARRIVALS: usize = 10;
pub const DEADLINE_HORIZON_MINUTES: f64 = 480.0;

const FIXED_SPANS: [(&str, usize); 8] = [
    ("task_embedding", EMBEDDING_DIM),
    ("priority_onehot", 4),
    ("record_type_onehot", 3),
    ("equipment_flags", 3),
    ("queue_stats", 2),
    ("time_to_deadline", 1),
    ("processing_time_norm", 1),
    ("remediation_status", 2),
];

/// Named spans for a scenario with `n_workers` workers.
pub fn layout(n_workers: usize) -> Vec<(String, usize)> {
    FIXED_SPANS
        .iter()
        .map(|(n, w)| (n.to_string(), *w))
        .chain(std::iter::once(("worker_idle".to_string(), n_workers)))
        .collect()
}

pub fn state_dim(n_workers: usize) -> usize {
    layout(n_workers).iter().map(|(_, w)| w).sum()
}

/// Offset of a named span in the full state vector.
pub fn span(n_workers: usize, name: &str) -> std::ops::Range<usize> {
    let mut start = 0;
    for (n, w) in layout(n_workers) {
        if n == name {
            return start..start + w;
        }
        start += w;
    }
    panic!("unknown span {name}")
}

/// Scheduler observation: the embedding bucket of the head task plus the
/// dense spans that follow the embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub bucket: Option<usize>,
    pub dense: Vec<f64>,
}

impl Observation {
    pub fn dense_only(dense: Vec<f64>) -> Observation {
        Observation { bucket: None, dense }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub values: Vec<f64>,
}

/// Everything about the warehouse the encoder may look at besides the head
/// record itself.
#[derive(Debug, Clone)]
pub struct EncodeContext<'a> {
    pub equipment_flags: [bool; 3],
    pub queue_len: usize,
    pub arrivals_last_10min: usize,
    pub clock: i64,
    pub rerouted: bool,
    pub expedited: bool,
    pub worker_idle: &'a [bool],
    pub planned_p99: f64,
    pub normalize_language: bool,
}

fn norm_count(count: usize, cap: usize) -> f64 {
    count.min(cap) as f64 / cap as f64
}

/// Dense part of the state for the head record. Ground truth is not
/// reachable from an [`ObservableRecord`].
pub fn encode_observation(r: &ObservableRecord<'_>, ctx: &EncodeContext<'_>) -> Result<Observation, PreprocessError> {
    let priority = observed_priority(r.priority_token(), ctx.normalize_language, Lexicon::shipped())
        .ok_or(PreprocessError::MissingPriority(r.record_id))?;
    let mut dense = Vec::with_capacity(state_dim(ctx.worker_idle.len()) - EMBEDDING_DIM);
    dense.extend(Priority::ALL.iter().map(|p| f64::from(u8::from(*p == priority))));
    dense.extend((0..3).map(|i| f64::from(u8::from(i == r.record_type.index()))));
    dense.extend(ctx.equipment_flags.iter().map(|&f| f64::from(u8::from(f))));
    dense.push(norm_count(ctx.queue_len, MAX_QUEUE));
    dense.push(norm_count(ctx.arrivals_last_10min, MAX_RECENT_ARRIVALS));
    dense.push(((r.deadline - ctx.clock) as f64 / DEADLINE_HORIZON_MINUTES).clamp(0.0, 1.0));
    dense.push((r.planned_minutes / ctx.planned_p99).min(1.0));
    dense.push(f64::from(u8::from(ctx.rerouted)));
    dense.push(f64::from(u8::from(ctx.expedited)));
    dense.extend(ctx.worker_idle.iter().map(|&i| f64::from(u8::from(i))));
    Ok(Observation { bucket: Some(r.task_id.bucket(EMBEDDING_BUCKETS)), dense })
}

/// Learned `buckets x dim` lookup table for task ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingTable {
    pub buckets: usize,
    pub dim: usize,
    pub weights: Vec<f64>,
}

impl EmbeddingTable {
    pub fn zeros(buckets: usize, dim: usize) -> EmbeddingTable {
        EmbeddingTable { buckets, dim, weights: vec![0.0; buckets * dim] }
    }

    pub fn row(&self, bucket: usize) -> &[f64] {
        &self.weights[bucket * self.dim..(bucket + 1) * self.dim]
    }

    pub fn row_mut(&mut self, bucket: usize) -> &mut [f64] {
        &mut self.weights[bucket * self.dim..(bucket + 1) * self.dim]
    }

    /// Full state vector: embedding row followed by the dense spans.
    pub fn assemble(&self, obs: &Observation) -> StateVector {
        let mut values = Vec::with_capacity(self.dim + obs.dense.len());
        match obs.bucket {
            Some(b) if self.dim > 0 => values.extend_from_slice(self.row(b)),
            _ => values.extend(std::iter::repeat(0.0).take(self.dim)),
        }
        values.extend_from_slice(&obs.dense);
        StateVector { values }
    }
}

/// Encodes the head record into a full state vector.
pub fn encode_state(
    r: &ObservableRecord<'_>,
    ctx: &EncodeContext<'_>,
    emb: &EmbeddingTable,
) -> Result<StateVector, PreprocessError> {
    Ok(emb.assemble(&encode_observation(r, ctx)?))
}
