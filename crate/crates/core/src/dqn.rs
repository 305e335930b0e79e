//! Deep Q-learning: Q-network over a learned task embedding plus dense
//! state, experience replay, a periodically synced target network and a
//! linear epsilon schedule.

use std::path::Path;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::ActionSpec;
use crate::encode::{EmbeddingTable, Observation};
use crate::error::{ModelError, Result, SimError};
use crate::nn::{Mlp, MlpGrads, Trace};
use crate::rng::{stream_rng, StreamRng};

pub const CHECKPOINT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub learning_rate: f64,
    pub gamma: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub epsilon_decay_steps: u64,
    pub batch_size: usize,
    pub target_sync_every: u64,
    pub train_steps: u64,
    pub hidden_layers: usize,
    pub hidden_width: usize,
    pub replay_capacity: usize,
    pub grad_clip_norm: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            learning_rate: 0.01,
            gamma: 0.95,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay_steps: 10_000,
            batch_size: 64,
            target_sync_every: 500,
            train_steps: 20_000,
            hidden_layers: 5,
            hidden_width: 64,
            replay_capacity: 50_000,
            grad_clip_norm: 5.0,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::InvalidHyperparams(m.to_string()));
        if !(0.0..1.0).contains(&self.gamma) {
            return bad("gamma must be in [0, 1)");
        }
        for e in [self.epsilon_start, self.epsilon_end] {
            if !(0.0..=1.0).contains(&e) {
                return bad("epsilon must be in [0, 1]");
            }
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.batch_size == 0 || self.replay_capacity == 0 || self.target_sync_every == 0 {
            return bad("batch_size, replay_capacity and target_sync_every must be positive");
        }
        if self.hidden_width == 0 {
            return bad("hidden_width must be positive");
        }
        Ok(())
    }

    /// Linear from `epsilon_start` to `epsilon_end` over the decay steps,
    /// then constant.
    pub fn epsilon(&self, step: u64) -> f64 {
        if self.epsilon_decay_steps == 0 || step >= self.epsilon_decay_steps {
            return self.epsilon_end;
        }
        let frac = step as f64 / self.epsilon_decay_steps as f64;
        self.epsilon_start + (self.epsilon_end - self.epsilon_start) * frac
    }
}

/// Q-network: an optional task-embedding lookup feeding an MLP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QNetwork {
    pub embedding: EmbeddingTable,
    pub mlp: Mlp,
}

pub struct QGrads {
    mlp: MlpGrads,
    embedding: Vec<f64>,
}

impl QNetwork {
    /// `dense_dim` is the observation width after the embedding span.
    pub fn new(
        buckets: usize,
        embedding_dim: usize,
        dense_dim: usize,
        n_actions: usize,
        hp: &Hyperparams,
        rng: &mut StreamRng,
    ) -> QNetwork {
        let mut dims = vec![embedding_dim + dense_dim];
        dims.extend(std::iter::repeat(hp.hidden_width).take(hp.hidden_layers));
        dims.push(n_actions);
        let mlp = Mlp::new(&dims, rng);
        let mut embedding = EmbeddingTable::zeros(buckets, embedding_dim);
        for w in &mut embedding.weights {
            *w = rng.gen_range(-0.1..=0.1);
        }
        QNetwork { embedding, mlp }
    }

    pub fn n_actions(&self) -> usize {
        self.mlp.output_dim()
    }

    fn input(&self, obs: &Observation) -> Result<Vec<f64>, ModelError> {
        if let Some(b) = obs.bucket {
            if b >= self.embedding.buckets.max(1) {
                return Err(ModelError::DimensionMismatch { expected: self.embedding.buckets, got: b });
            }
        }
        Ok(self.embedding.assemble(obs).values)
    }

    pub fn q_values(&self, obs: &Observation) -> Result<Vec<f64>, ModelError> {
        self.mlp.forward(&self.input(obs)?)
    }

    pub fn zero_grads(&self) -> QGrads {
        QGrads { mlp: self.mlp.zero_grads(), embedding: vec![0.0; self.embedding.weights.len()] }
    }

    /// Accumulates gradients of a loss whose derivative w.r.t. the Q-values
    /// at `obs` is `d_q`.
    pub fn accumulate(&self, obs: &Observation, d_q: &[f64], grads: &mut QGrads) -> Result<(), ModelError> {
        let trace = self.trace(obs)?;
        self.accumulate_traced(obs, &trace, d_q, grads);
        Ok(())
    }

    pub fn trace(&self, obs: &Observation) -> Result<Trace, ModelError> {
        self.mlp.forward_trace(&self.input(obs)?)
    }

    /// Like [`QNetwork::accumulate`] with a trace from [`QNetwork::trace`].
    pub fn accumulate_traced(&self, obs: &Observation, trace: &Trace, d_q: &[f64], grads: &mut QGrads) {
        let d_in = self.mlp.backward(trace, d_q, &mut grads.mlp);
        if let Some(b) = obs.bucket {
            let dim = self.embedding.dim;
            for (g, d) in grads.embedding[b * dim..(b + 1) * dim].iter_mut().zip(&d_in[..dim]) {
                *g += d;
            }
        }
    }

    /// Scales gradients to global norm `clip` if larger, then takes one SGD step.
    pub fn apply(&mut self, grads: &mut QGrads, lr: f64, clip: f64) {
        let norm = (grads.mlp.sum_sq() + grads.embedding.iter().map(|g| g * g).sum::<f64>()).sqrt();
        if clip > 0.0 && norm > clip {
            let f = clip / norm;
            grads.mlp.scale(f);
            grads.embedding.iter_mut().for_each(|g| *g *= f);
        }
        self.mlp.apply(&grads.mlp, lr);
        for (w, g) in self.embedding.weights.iter_mut().zip(&grads.embedding) {
            *w -= lr * g;
        }
    }

    /// Flattened parameters: MLP weights and biases, then the embedding table.
    pub fn params(&self) -> Vec<f64> {
        let m = &self.mlp;
        m.weights.iter().chain(&m.biases).flatten().chain(&self.embedding.weights).copied().collect()
    }
}

impl QGrads {
    pub fn flat(&self) -> Vec<f64> {
        let m = &self.mlp;
        m.weights.iter().chain(&m.biases).flatten().chain(&self.embedding).copied().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experience {
    pub state: Observation,
    pub action: usize,
    pub reward: f64,
    pub next_state: Observation,
    pub done: bool,
    /// Discount exponent of the step: the bootstrap term is scaled by
    /// `gamma^elapsed`.
    pub elapsed: f64,
}

/// Fixed-capacity ring that overwrites the oldest experience when full.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Experience>,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> ReplayBuffer {
        ReplayBuffer { capacity, items: Vec::with_capacity(capacity.min(1 << 16)), next: 0 }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&mut self, e: Experience) {
        if self.items.len() < self.capacity {
            self.items.push(e);
        } else {
            self.items[self.next] = e;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    /// Experiences from oldest to newest.
    pub fn iter_ordered(&self) -> impl Iterator<Item = &Experience> {
        let split = if self.items.len() < self.capacity { 0 } else { self.next };
        self.items[split..].iter().chain(&self.items[..split])
    }

    /// Uniform sample without replacement.
    pub fn sample<R: Rng>(&self, n: usize, rng: &mut R) -> Vec<&Experience> {
        sample(rng, self.items.len(), n.min(self.items.len())).into_iter().map(|i| &self.items[i]).collect()
    }
}

/// One TD update on `batch`; returns the mean squared TD error before the
/// update.
pub fn train_step(net: &mut QNetwork, target: &QNetwork, batch: &[&Experience], hp: &Hyperparams) -> Result<f64, ModelError> {
    if batch.is_empty() {
        return Err(ModelError::EmptyBatch);
    }
    let n = batch.len() as f64;
    let mut grads = net.zero_grads();
    let mut loss = 0.0;
    for e in batch {
        let y = if e.done {
            e.reward
        } else {
            let next = target.q_values(&e.next_state)?;
            e.reward + hp.gamma.powf(e.elapsed) * next.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        };
        let trace = net.trace(&e.state)?;
        let q = trace.output();
        let err = q[e.action] - y;
        loss += err * err / n;
        if err != 0.0 {
            let mut d_q = vec![0.0; q.len()];
            d_q[e.action] = 2.0 * err / n;
            net.accumulate_traced(&e.state, &trace, &d_q, &mut grads);
        }
    }
    if loss > 0.0 {
        net.apply(&mut grads, hp.learning_rate, hp.grad_clip_norm);
    }
    Ok(loss)
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Epsilon-greedy choice over `q`.
pub fn act_on<R: Rng>(q: &[f64], epsilon: f64, rng: &mut R) -> usize {
    if epsilon > 0.0 && rng.gen::<f64>() < epsilon {
        rng.gen_range(0..q.len())
    } else {
        argmax(q)
    }
}

pub fn act<R: Rng>(net: &QNetwork, obs: &Observation, epsilon: f64, rng: &mut R) -> Result<usize, ModelError> {
    Ok(act_on(&net.q_values(obs)?, epsilon, rng))
}

/// Best remediation Q minus best standard Q, for a scheduler network whose
/// outputs follow [`ActionSpec::enumerate`].
pub fn q_margin(net: &QNetwork, obs: &Observation) -> Result<f64, ModelError> {
    Ok(q_margin_of(&net.q_values(obs)?))
}

pub fn q_margin_of(q: &[f64]) -> f64 {
    let n_workers = q.len() - 3;
    let (mut remediation, mut standard) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for (i, &v) in q.iter().enumerate() {
        if ActionSpec::from_index(i, n_workers).is_remediation() {
            remediation = remediation.max(v);
        } else {
            standard = standard.max(v);
        }
    }
    remediation - standard
}

/// Result of one environment step.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    /// Ignored by learners when `done`.
    pub observation: Observation,
    pub reward: f64,
    pub done: bool,
    /// Time the step took in discount periods; a plain MDP uses 1.
    pub elapsed: f64,
}

/// An episodic environment with a discrete action set.
pub trait Environment {
    fn n_actions(&self) -> usize;
    /// Starts episode number `episode` and returns its first observation.
    fn reset(&mut self, episode: u64) -> std::result::Result<Observation, SimError>;
    fn step(&mut self, action: usize) -> std::result::Result<Transition, SimError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub episode_returns: Vec<f64>,
    pub losses: Vec<f64>,
    pub steps: u64,
    pub target_syncs: u64,
}

/// Trains from a fresh network built by `init`.
pub fn train_dqn<E: Environment>(
    env: &mut E,
    init: QNetwork,
    hp: &Hyperparams,
    seed: u64,
) -> Result<(QNetwork, TrainingLog)> {
    train_dqn_with(env, init, hp, seed, 0, |_, _| Ok(()))
}

/// [`train_dqn`] that also hands the online network to `checkpoint` after
/// every `every` steps (never when `every` is 0). The callback does not
/// influence training.
pub fn train_dqn_with<E, F>(
    env: &mut E,
    init: QNetwork,
    hp: &Hyperparams,
    seed: u64,
    every: u64,
    mut checkpoint: F,
) -> Result<(QNetwork, TrainingLog)>
where
    E: Environment,
    F: FnMut(u64, &QNetwork) -> Result<()>,
{
    hp.validate()?;
    let mut rng = stream_rng(seed, "dqn-train");
    let mut net = init;
    let mut target = net.clone();
    let mut replay = ReplayBuffer::new(hp.replay_capacity);
    let mut log = TrainingLog { episode_returns: vec![], losses: vec![], steps: 0, target_syncs: 0 };
    let mut episode = 0;
    let mut obs = None;
    let mut ret = 0.0;
    while log.steps < hp.train_steps {
        let state = match obs.take() {
            Some(o) => o,
            None => {
                ret = 0.0;
                episode += 1;
                env.reset(episode - 1)?
            }
        };
        let action = act(&net, &state, hp.epsilon(log.steps), &mut rng)?;
        let Transition { observation: next_state, reward, done, elapsed } = env.step(action)?;
        ret += reward;
        if done {
            log.episode_returns.push(ret);
        } else {
            obs = Some(next_state.clone());
        }
        replay.push(Experience { state, action, reward, next_state, done, elapsed });
        log.steps += 1;
        if replay.len() >= hp.batch_size {
            let batch = replay.sample(hp.batch_size, &mut rng);
            log.losses.push(train_step(&mut net, &target, &batch, hp)?);
        }
        if log.steps % hp.target_sync_every == 0 {
            target = net.clone();
            log.target_syncs += 1;
        }
        if every > 0 && log.steps % every == 0 {
            checkpoint(log.steps, &net)?;
        }
    }
    Ok((net, log))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub hyperparams: Hyperparams,
    pub fold_scores: Vec<f64>,
    pub mean_score: f64,
}

/// Scores every grid point on every fold with `score(hp, fold)` and picks
/// the highest mean; ties go to the earlier grid point. Points run on
/// separate threads and the table keeps grid order.
pub fn grid_search<F>(grid: &[Hyperparams], n_folds: usize, score: F) -> Result<(Hyperparams, Vec<GridRow>)>
where
    F: Fn(&Hyperparams, usize) -> Result<f64> + Sync,
{
    if grid.is_empty() {
        return Err(ModelError::EmptyGrid.into());
    }
    let rows: Vec<Result<GridRow>> = std::thread::scope(|s| {
        let handles: Vec<_> = grid
            .iter()
            .map(|hp| {
                let score = &score;
                s.spawn(move || {
                    let fold_scores = (0..n_folds).map(|k| score(hp, k)).collect::<Result<Vec<f64>>>()?;
                    let mean_score = fold_scores.iter().sum::<f64>() / fold_scores.len().max(1) as f64;
                    Ok(GridRow { hyperparams: hp.clone(), fold_scores, mean_score })
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("grid worker panicked")).collect()
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (i, r) in rows.iter().enumerate() {
        if r.mean_score > rows[best].mean_score {
            best = i;
        }
    }
    Ok((rows[best].hyperparams.clone(), rows))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub schema_version: u32,
    pub seed: u64,
    pub steps: u64,
    pub hyperparams: Hyperparams,
    pub network: QNetwork,
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    std::fs::write(path, serde_json::to_string(ckpt)? + "\n")?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let text = std::fs::read_to_string(path)?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let found = value.get("schema_version").and_then(serde_json::Value::as_u64).unwrap_or(0) as u32;
    if found != CHECKPOINT_SCHEMA_VERSION {
        return Err(ModelError::SchemaVersion { expected: CHECKPOINT_SCHEMA_VERSION, found }.into());
    }
    Ok(serde_json::from_value(value)?)
}


#[cfg(test)]
mod chain_tests {
    use super::*;

    /// States 0..=3 in a line; 3 is the goal. Right moves toward it (reward 1
    /// on arrival), left moves back, and left from 0 ends the episode with 0.5.
    struct Chain {
        state: usize,
    }

    fn one_hot(s: usize) -> Observation {
        Observation::dense_only((0..4).map(|i| f64::from(u8::from(i == s))).collect())
    }

    impl Environment for Chain {
        fn n_actions(&self) -> usize {
            2
        }
        fn reset(&mut self, episode: u64) -> std::result::Result<Observation, SimError> {
            self.state = (episode % 3) as usize;
            Ok(one_hot(self.state))
        }
        fn step(&mut self, action: usize) -> std::result::Result<Transition, SimError> {
            let (reward, done) = match (action, self.state) {
                (0, 0) => (0.5, true),
                (0, s) => {
                    self.state = s - 1;
                    (0.0, false)
                }
                (_, 2) => {
                    self.state = 3;
                    (1.0, true)
                }
                (_, s) => {
                    self.state = s + 1;
                    (0.0, false)
                }
            };
            Ok(Transition { observation: one_hot(self.state), reward, done, elapsed: 1.0 })
        }
    }

    #[test]
    fn chain_greedy_policy_matches_value_iteration() {
        let gamma = 0.9;
        let mut q = [[0.0f64; 2]; 3];
        for _ in 0..200 {
            let v = |s: usize, q: &[[f64; 2]; 3]| q[s][0].max(q[s][1]);
            let prev = q;
            for s in 0..3 {
                q[s][0] = if s == 0 { 0.5 } else { gamma * v(s - 1, &prev) };
                q[s][1] = if s == 2 { 1.0 } else { gamma * v(s + 1, &prev) };
            }
        }
        let hp = Hyperparams { gamma, train_steps: 5_000, epsilon_decay_steps: 2_000, epsilon_end: 0.3, batch_size: 32, ..Hyperparams::default() };
        let init = QNetwork::new(0, 0, 4, 2, &hp, &mut stream_rng(1, "chain-init"));
        let (net, _) = train_dqn(&mut Chain { state: 0 }, init, &hp, 1).unwrap();
        for s in 0..3 {
            let learned = net.q_values(&one_hot(s)).unwrap();
            assert_eq!(argmax(&learned), argmax(&q[s]), "state {s}: {learned:?} vs {:?}", q[s]);
        }
    }
}
