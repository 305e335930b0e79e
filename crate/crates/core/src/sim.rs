//! Event-driven warehouse environment.
//!
//! The environment asks for one decision whenever the task at the head of the
//! queue can be served (some worker is idle). Between decisions the clock
//! jumps to the next arrival or worker-free event.
//!
//! Dynamics:
//! - service time is `planned * worker_speed`; equipment downtime doubles it
//!   unless the task was rerouted, and rerouting adds five minutes;
//! - order surges add a staging wait of `planned * surge_wait_factor`, halved
//!   by expediting;
//! - assigning a busy worker costs 0.2 and leaves the task at the head;
//! - deferring moves the head task back three places;
//! - a task that has been the decision subject `decision_cap` times without
//!   starting is handed to the first idle worker.
//!
//! Rewards: +1 when a started task will meet its deadline, -1 when it will
//! miss, -0.1 per remediation, -0.2 per invalid assignment, and -0.01 per
//! 10 minutes the started task spent queued (at most -0.1).

use std::collections::{BTreeMap, VecDeque};
use std::sync::Arc;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::domain::{ActionSpec, DisruptionType, RecordType, TaskId, TransactionRecord};
use crate::encode::{encode_observation, EncodeContext, Observation};
use crate::dqn::{Environment, Transition};
use crate::error::SimError;
use crate::rng::stream_rng;

pub const REWARD_MET: f64 = 1.0;
pub const REWARD_MISSED: f64 = -1.0;
pub const COST_REMEDIATION: f64 = 0.1;
pub const COST_INVALID_ASSIGN: f64 = 0.2;
pub const WAIT_PENALTY_PER_BLOCK: f64 = 0.01;
pub const WAIT_BLOCK_MINUTES: i64 = 10;
pub const MAX_WAIT_PENALTY: f64 = 0.1;
pub const REWARD_MIN: f64 = -1.2;
pub const REWARD_MAX: f64 = 1.0;

const WORKER_SPEEDS: [f64; 3] = [0.9, 1.0, 1.1];
const MAX_ORACLE_SEQUENCES: u64 = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioParams {
    /// Service-time multipliers in draw order.
    pub worker_speeds: Vec<f64>,
    pub downtime_multiplier: f64,
    pub reroute_minutes: f64,
    pub surge_wait_factor: f64,
    pub defer_positions: usize,
    pub decision_cap: u32,
    /// Simulated minutes per discount period for learners.
    pub discount_minutes: f64,
    pub planned_p99: f64,
    pub normalize_language: bool,
    pub seed: u64,
}

impl ScenarioParams {
    /// Draws worker speeds once for the scenario.
    pub fn new(n_workers: usize, planned_p99: f64, seed: u64) -> ScenarioParams {
        let mut rng = stream_rng(seed, "worker-speeds");
        let worker_speeds: Vec<f64> =
            (0..n_workers).map(|_| *WORKER_SPEEDS.choose(&mut rng).expect("non-empty")).collect();
        ScenarioParams {
            worker_speeds,
            downtime_multiplier: 2.0,
            reroute_minutes: 5.0,
            surge_wait_factor: 1.0,
            defer_positions: 3,
            decision_cap: 6,
            discount_minutes: 5.0,
            planned_p99,
            normalize_language: true,
            seed,
        }
    }

    pub fn n_workers(&self) -> usize {
        self.worker_speeds.len()
    }

    pub fn n_actions(&self) -> usize {
        ActionSpec::count(self.n_workers())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Worker {
    pub busy_until: i64,
    pub assigned_task: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TaskProgress {
    pub arrival: i64,
    pub deadline: i64,
    pub rerouted: bool,
    pub expedited: bool,
    pub decisions: u32,
    pub started: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskOutcome {
    pub record_id: u64,
    pub task_id: TaskId,
    pub record_type: RecordType,
    pub arrival: i64,
    pub started_at: i64,
    pub completed_at: i64,
    pub deadline: i64,
    pub deadline_met: bool,
    pub remediated: bool,
    pub rerouted: bool,
    pub expedited: bool,
    pub forced: bool,
    pub truth_disrupted: bool,
    pub truth_disruption_type: DisruptionType,
}

impl TaskOutcome {
    pub fn completion_minutes(&self) -> i64 {
        self.completed_at - self.arrival
    }

    pub fn recovered(&self) -> bool {
        self.remediated && self.truth_disrupted && self.deadline_met
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub reward: f64,
    pub done: bool,
    pub info: Vec<TaskOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub outcomes: Vec<TaskOutcome>,
    pub total_reward: f64,
    pub total_simulated_minutes: i64,
    pub tasks_presented: usize,
}

#[derive(Debug, Clone)]
pub struct WarehouseState {
    pub clock: i64,
    pub task_queue: VecDeque<usize>,
    pub workers: Vec<Worker>,
    pub equipment_flags: [bool; 3],
    pub inventory_levels: BTreeMap<String, i64>,
    pub arrivals_last_10min: usize,
    records: Arc<[TransactionRecord]>,
    params: Arc<ScenarioParams>,
    progress: Vec<TaskProgress>,
    next_arrival: usize,
    arrival_window_start: usize,
    done: bool,
}

/// Rebases the slice so the first arrival happens at minute 0 and builds
/// the initial state.
pub fn reset(slice: &[TransactionRecord], params: &ScenarioParams) -> Result<WarehouseState, SimError> {
    WarehouseState::new(slice.to_vec(), Arc::new(params.clone()))
}

impl WarehouseState {
    pub fn new(mut records: Vec<TransactionRecord>, params: Arc<ScenarioParams>) -> Result<WarehouseState, SimError> {
        if records.is_empty() {
            return Err(SimError::EmptySlice);
        }
        records.sort_by_key(|r| (r.timestamp, r.record_id));
        let origin = records[0].timestamp;
        let progress = records
            .iter()
            .map(|r| TaskProgress { arrival: r.timestamp - origin, deadline: r.deadline - origin, ..Default::default() })
            .collect();
        let mut state = WarehouseState {
            clock: 0,
            task_queue: VecDeque::new(),
            workers: vec![Worker::default(); params.n_workers()],
            equipment_flags: [false; 3],
            inventory_levels: BTreeMap::new(),
            arrivals_last_10min: 0,
            records: records.into(),
            params,
            progress,
            next_arrival: 0,
            arrival_window_start: 0,
            done: false,
        };
        state.admit_arrivals();
        state.refresh_observables();
        Ok(state)
    }

    pub fn params(&self) -> &ScenarioParams {
        &self.params
    }

    pub fn records(&self) -> &[TransactionRecord] {
        &self.records
    }

    pub fn tasks_presented(&self) -> usize {
        self.records.len()
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn head(&self) -> Option<usize> {
        self.task_queue.front().copied()
    }

    pub fn head_record(&self) -> Option<&TransactionRecord> {
        self.head().map(|i| &self.records[i])
    }

    pub fn progress(&self, task: usize) -> &TaskProgress {
        &self.progress[task]
    }

    pub fn worker_idle(&self, i: usize) -> bool {
        self.workers[i].busy_until <= self.clock
    }

    pub fn idle_workers(&self) -> Vec<bool> {
        (0..self.workers.len()).map(|i| self.worker_idle(i)).collect()
    }

    pub fn first_idle_worker(&self) -> Option<usize> {
        (0..self.workers.len()).find(|&i| self.worker_idle(i))
    }

    /// Workers with the same speed are interchangeable, so an assignment to
    /// an idle worker is relabelled to the lowest-index idle worker of that
    /// speed. Other actions are returned unchanged.
    pub fn canonical_action(&self, action: ActionSpec) -> ActionSpec {
        match action {
            ActionSpec::AssignWorker(i) if i < self.workers.len() && self.worker_idle(i) => {
                let speed = self.params.worker_speeds[i];
                let j = (0..i).find(|&j| self.worker_idle(j) && self.params.worker_speeds[j] == speed).unwrap_or(i);
                ActionSpec::AssignWorker(j)
            }
            other => other,
        }
    }

    fn admit_arrivals(&mut self) {
        while self.next_arrival < self.records.len() && self.progress[self.next_arrival].arrival <= self.clock {
            self.task_queue.push_back(self.next_arrival);
            self.next_arrival += 1;
        }
        while self.arrival_window_start < self.next_arrival
            && self.progress[self.arrival_window_start].arrival <= self.clock - crate::preprocess::ROLLING_WINDOW_MINUTES
        {
            self.arrival_window_start += 1;
        }
        self.arrivals_last_10min = self.next_arrival - self.arrival_window_start;
    }

    fn refresh_observables(&mut self) {
        self.equipment_flags = self.head_record().map_or([false; 3], |r| r.evidence.equipment_flags);
        for w in &mut self.workers {
            if w.busy_until <= self.clock {
                w.assigned_task = None;
            }
        }
    }

    /// Moves the clock to the next state that needs a decision, or to the end
    /// of the episode.
    fn advance(&mut self) {
        loop {
            self.admit_arrivals();
            if !self.task_queue.is_empty() && self.first_idle_worker().is_some() {
                break;
            }
            let next_arrival = self.progress.get(self.next_arrival).map(|p| p.arrival);
            let next_free = self.workers.iter().map(|w| w.busy_until).filter(|&t| t > self.clock).min();
            match (next_arrival, next_free) {
                (None, None) => {
                    self.done = true;
                    break;
                }
                (a, f) => {
                    self.clock = a.into_iter().chain(f).min().expect("at least one event");
                }
            }
        }
        self.refresh_observables();
    }

    fn service_minutes(&self, task: usize, worker: usize) -> i64 {
        let r = &self.records[task];
        let p = &self.progress[task];
        let mut service = r.planned_minutes * self.params.worker_speeds[worker];
        if r.truth.disruption_type == DisruptionType::EquipmentDowntime && !p.rerouted {
            service *= self.params.downtime_multiplier;
        }
        if p.rerouted {
            service += self.params.reroute_minutes;
        }
        if r.truth.disruption_type == DisruptionType::OrderSurge {
            let wait = r.planned_minutes * self.params.surge_wait_factor;
            service += if p.expedited { wait / 2.0 } else { wait };
        }
        service.ceil() as i64
    }

    fn start(&mut self, task: usize, worker: usize, forced: bool) -> (f64, TaskOutcome) {
        let completed_at = self.clock + self.service_minutes(task, worker);
        self.workers[worker] = Worker { busy_until: completed_at, assigned_task: Some(task) };
        let p = &mut self.progress[task];
        p.started = true;
        let r = &self.records[task];
        let deadline_met = completed_at <= p.deadline;
        let waited = self.clock - p.arrival;
        let wait_penalty = (WAIT_PENALTY_PER_BLOCK * (waited / WAIT_BLOCK_MINUTES) as f64).min(MAX_WAIT_PENALTY);
        let reward = if deadline_met { REWARD_MET } else { REWARD_MISSED } - wait_penalty;
        let zone = r.location.split('-').next().unwrap_or("").to_string();
        let delta = match r.record_type {
            RecordType::Inventory => r.quantity,
            RecordType::Order => -r.quantity,
            RecordType::Task => 0,
        };
        *self.inventory_levels.entry(zone).or_insert(0) += delta;
        let outcome = TaskOutcome {
            record_id: r.record_id,
            task_id: r.task_id,
            record_type: r.record_type,
            arrival: p.arrival,
            started_at: self.clock,
            completed_at,
            deadline: p.deadline,
            deadline_met,
            remediated: p.rerouted || p.expedited,
            rerouted: p.rerouted,
            expedited: p.expedited,
            forced,
            truth_disrupted: r.truth.disrupted,
            truth_disruption_type: r.truth.disruption_type,
        };
        (reward, outcome)
    }

    /// Applies `action` to the head task and advances to the next decision.
    pub fn step(&mut self, action: ActionSpec) -> Result<StepOutcome, SimError> {
        let head = self.head().ok_or(SimError::EmptyQueue)?;
        let n_workers = self.workers.len();
        let mut reward = 0.0;
        let mut info = Vec::new();
        self.progress[head].decisions += 1;
        match action {
            ActionSpec::AssignWorker(i) if i >= n_workers => {
                self.progress[head].decisions -= 1;
                return Err(SimError::InvalidWorkerIndex { index: i, workers: n_workers });
            }
            ActionSpec::AssignWorker(i) => {
                if self.worker_idle(i) {
                    self.task_queue.pop_front();
                    let (r, outcome) = self.start(head, i, false);
                    reward += r;
                    info.push(outcome);
                } else {
                    reward -= COST_INVALID_ASSIGN;
                }
            }
            ActionSpec::RerouteTask => {
                self.progress[head].rerouted = true;
                reward -= COST_REMEDIATION;
            }
            ActionSpec::ExpediteTask => {
                self.progress[head].expedited = true;
                reward -= COST_REMEDIATION;
            }
            ActionSpec::Defer => {
                let to = self.params.defer_positions.min(self.task_queue.len() - 1);
                self.task_queue.pop_front();
                self.task_queue.insert(to, head);
            }
        }
        if !self.progress[head].started && self.progress[head].decisions >= self.params.decision_cap {
            let worker = self.first_idle_worker().expect("decision points have an idle worker");
            let pos = self.task_queue.iter().position(|&t| t == head).expect("unstarted task is queued");
            self.task_queue.remove(pos);
            let (r, outcome) = self.start(head, worker, true);
            reward += r;
            info.push(outcome);
        }
        self.advance();
        if self.done {
            self.clock = self.clock.max(self.workers.iter().map(|w| w.busy_until).max().unwrap_or(0));
        }
        Ok(StepOutcome { reward, done: self.done, info })
    }

    /// Scheduler view of the head task.
    pub fn observe(&self) -> Result<Observation, SimError> {
        let head = self.head().ok_or(SimError::EmptyQueue)?;
        let r = &self.records[head];
        let p = &self.progress[head];
        let idle = self.idle_workers();
        let ctx = EncodeContext {
            equipment_flags: self.equipment_flags,
            queue_len: self.task_queue.len(),
            arrivals_last_10min: self.arrivals_last_10min,
            clock: self.clock,
            rerouted: p.rerouted,
            expedited: p.expedited,
            worker_idle: &idle,
            planned_p99: self.params.planned_p99,
            normalize_language: self.params.normalize_language,
        };
        // Deadlines inside the observation are relative to the rebased clock.
        let mut view = r.observable();
        view.deadline = p.deadline;
        view.timestamp = p.arrival;
        encode_observation(&view, &ctx).map_err(|_| SimError::MissingPriority(r.record_id))
    }
}

/// First action of the best-scoring action sequence of length up to
/// `horizon`, found by exhaustive rollout on clones of `state`. Ties go to
/// the earlier sequence in enumeration order.
pub fn oracle_best_action(state: &WarehouseState, horizon: usize) -> Result<ActionSpec, SimError> {
    if state.head().is_none() {
        return Err(SimError::EmptyQueue);
    }
    let n_actions = state.params.n_actions() as u64;
    let total: u64 = (1..=horizon as u32).map(|h| n_actions.saturating_pow(h)).sum();
    if total > MAX_ORACLE_SEQUENCES {
        return Err(SimError::StateTooLarge(total));
    }
    let n_workers = state.workers.len();
    let mut best: Option<(f64, ActionSpec)> = None;
    for first in ActionSpec::enumerate(n_workers) {
        let mut s = state.clone();
        let out = s.step(first)?;
        let value = out.reward + if out.done { 0.0 } else { best_return(&s, horizon.saturating_sub(1)) };
        if best.map_or(true, |(b, _)| value > b + 1e-12) {
            best = Some((value, first));
        }
    }
    Ok(best.expect("at least one action").1)
}

fn best_return(state: &WarehouseState, depth: usize) -> f64 {
    if depth == 0 || state.is_done() {
        return 0.0;
    }
    ActionSpec::enumerate(state.workers.len())
        .into_iter()
        .map(|a| {
            let mut s = state.clone();
            let out = s.step(a).expect("decision state has a head task");
            out.reward + if out.done { 0.0 } else { best_return(&s, depth - 1) }
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Cuts a time-ordered record list into consecutive episodes ("shifts").
pub fn shifts(records: &[TransactionRecord], shift_size: usize) -> Vec<Vec<TransactionRecord>> {
    records.chunks(shift_size.max(1)).map(<[TransactionRecord]>::to_vec).collect()
}

/// Runs one episode with `decide` choosing every action.
pub fn run_episode(
    state: WarehouseState,
    mut decide: impl FnMut(&WarehouseState) -> ActionSpec,
) -> Result<EpisodeLog, SimError> {
    let mut state = state;
    let mut log = EpisodeLog {
        outcomes: Vec::new(),
        total_reward: 0.0,
        total_simulated_minutes: 0,
        tasks_presented: state.tasks_presented(),
    };
    while !state.is_done() {
        let action = decide(&state);
        let out = state.step(action)?;
        log.total_reward += out.reward;
        log.outcomes.extend(out.info);
    }
    log.total_simulated_minutes = state.clock;
    Ok(log)
}

/// Training environment that replays shifts as episodes. Episode `k`
/// plays shift `order[k % n]`, where `order` is a seeded permutation that is
/// redrawn for every pass over the shifts.
pub struct ShiftEnv {
    shifts: Vec<Vec<TransactionRecord>>,
    params: Arc<ScenarioParams>,
    state: Option<WarehouseState>,
    order: Vec<usize>,
    pass: Option<u64>,
}

impl ShiftEnv {
    pub fn new(shifts: Vec<Vec<TransactionRecord>>, params: ScenarioParams) -> Result<ShiftEnv, SimError> {
        if shifts.is_empty() || shifts.iter().any(Vec::is_empty) {
            return Err(SimError::EmptySlice);
        }
        let order = (0..shifts.len()).collect();
        Ok(ShiftEnv { shifts, params: Arc::new(params), state: None, order, pass: None })
    }

    pub fn state(&self) -> Option<&WarehouseState> {
        self.state.as_ref()
    }
}

impl Environment for ShiftEnv {
    fn n_actions(&self) -> usize {
        self.params.n_actions()
    }

    fn reset(&mut self, episode: u64) -> Result<Observation, SimError> {
        let n = self.shifts.len() as u64;
        let pass = episode / n;
        if self.pass != Some(pass) {
            self.order = (0..self.shifts.len()).collect();
            self.order.shuffle(&mut crate::rng::indexed_rng(self.params.seed, "shift-order", pass));
            self.pass = Some(pass);
        }
        let shift = self.order[(episode % n) as usize];
        let state = WarehouseState::new(self.shifts[shift].clone(), Arc::clone(&self.params))?;
        let obs = state.observe()?;
        self.state = Some(state);
        Ok(obs)
    }

    /// Steps are discounted by simulated time, counting at least one minute
    /// per decision, so zero-time decisions (remediations, invalid
    /// assignments, defers) cost little discount but never none.
    fn step(&mut self, action: usize) -> Result<Transition, SimError> {
        let state = self.state.as_mut().ok_or(SimError::EmptyQueue)?;
        let action = ActionSpec::from_index(action, state.workers.len());
        let before = state.clock;
        let out = state.step(action)?;
        let observation = if out.done { Observation::dense_only(Vec::new()) } else { state.observe()? };
        let elapsed = (state.clock - before).max(1) as f64 / self.params.discount_minutes;
        Ok(Transition { observation, reward: out.reward, done: out.done, elapsed })
    }
}
