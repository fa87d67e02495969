//! Discrete-event job-shop environment.
//!
//! The agent is queried only at decision points: clock times at which at
//! least one job's next operation can start (its predecessor has finished and
//! its machine is idle). Every query assigns one job; the agent is re-queried
//! at the same clock until nothing is eligible, then the clock jumps straight
//! to the earliest future completion time that makes something eligible.
//! There is no idle action, so reachable schedules are exactly the non-delay
//! schedules.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dispatch;
use crate::instance::{Instance, Time};
use crate::schedule::{Assignment, Schedule};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EnvError {
    #[error("episode already finished; call reset")]
    EpisodeFinished,
    #[error("action {action} out of range for {n_jobs} jobs")]
    ActionOutOfRange { action: usize, n_jobs: usize },
    #[error("deadlock at clock {clock}: nothing running and operations remain")]
    Deadlock { clock: Time },
    #[error("schedule incomplete: {assigned} of {total} operations assigned")]
    Incomplete { assigned: usize, total: usize },
    #[error("instance shape {found:?} does not match environment shape {expected:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
}

/// Time ceiling for an episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RolloutBudget {
    /// Twice the best SPT/MWKR/FIFO/LPT makespan, computed at reset.
    Auto,
    Fixed(Time),
    /// No ceiling; the final reward then uses the achieved makespan as budget.
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub rollout_budget: RolloutBudget,
    /// Multiplier applied to the terminal reward.
    pub final_reward_scale: f64,
    pub final_reward_offset: i64,
    /// Early termination when cumulative occupancy drops below this value.
    pub occupancy_threshold: Option<f64>,
    /// Truncate after this many invalid actions; `None` means `10 * n * m`.
    pub invalid_action_limit: Option<u64>,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            rollout_budget: RolloutBudget::Auto,
            final_reward_scale: 1.0,
            final_reward_offset: 100,
            occupancy_threshold: None,
            invalid_action_limit: None,
        }
    }
}

impl EnvConfig {
    /// No budget, no occupancy cut-off: used by the dispatching rules and the oracle.
    pub fn unbounded() -> Self {
        Self {
            rollout_budget: RolloutBudget::Unbounded,
            ..Self::default()
        }
    }
}

/// Mutable simulation state.
///
/// A machine is idle at the current clock iff `machine_busy_until <= clock`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimState {
    pub clock: Time,
    pub machine_busy_until: Vec<Time>,
    pub machine_current_job: Vec<Option<usize>>,
    /// Index of each job's next unassigned operation (`m` once finished).
    pub job_next_op: Vec<usize>,
    /// Completion time of each job's last assigned operation.
    pub job_ready_at: Vec<Time>,
    pub assignments: Vec<Assignment>,
    /// Busy time of each machine within `[0, clock)`.
    pub busy_time_accum: Vec<Time>,
    pub episode_step_count: u64,
    pub invalid_action_count: u64,
}

impl SimState {
    pub fn new(n_jobs: usize, n_machines: usize) -> Self {
        Self {
            clock: 0,
            machine_busy_until: vec![0; n_machines],
            machine_current_job: vec![None; n_machines],
            job_next_op: vec![0; n_jobs],
            job_ready_at: vec![0; n_jobs],
            assignments: Vec::with_capacity(n_jobs * n_machines),
            busy_time_accum: vec![0; n_machines],
            episode_step_count: 0,
            invalid_action_count: 0,
        }
    }

    pub fn is_complete(&self, instance: &Instance) -> bool {
        self.assignments.len() == instance.n_operations()
    }
}

fn job_eligible_at(state: &SimState, instance: &Instance, job: usize, t: Time) -> bool {
    let next = state.job_next_op[job];
    next < instance.n_machines()
        && state.job_ready_at[job] <= t
        && state.machine_busy_until[instance.operation(job, next).machine] <= t
}

/// Jobs whose next operation can start at the current clock.
pub fn eligible_jobs(state: &SimState, instance: &Instance) -> Vec<bool> {
    (0..instance.n_jobs())
        .map(|j| job_eligible_at(state, instance, j, state.clock))
        .collect()
}

/// Jumps the clock to the earliest completion time of a running operation at
/// which some job becomes eligible, skipping completion times that unlock
/// nothing. Returns the new clock.
pub fn advance_clock(state: &mut SimState, instance: &Instance) -> Result<Time, EnvError> {
    let now = state.clock;
    let mut candidates: Vec<Time> = state
        .machine_busy_until
        .iter()
        .copied()
        .filter(|&t| t > now)
        .collect();
    candidates.sort_unstable();
    candidates.dedup();
    let target = candidates
        .into_iter()
        .find(|&t| (0..instance.n_jobs()).any(|j| job_eligible_at(state, instance, j, t)))
        .ok_or(EnvError::Deadlock { clock: now })?;
    for (machine, &busy_until) in state.machine_busy_until.iter().enumerate() {
        if busy_until > now {
            state.busy_time_accum[machine] += busy_until.min(target) - now;
        }
        if busy_until <= target {
            state.machine_current_job[machine] = None;
        }
    }
    state.clock = target;
    Ok(target)
}

/// Terminal reward `(budget + offset - makespan) * scale`.
pub fn final_reward(makespan: Time, rollout_budget: Time, config: &EnvConfig) -> f64 {
    (rollout_budget as f64 + config.final_reward_offset as f64 - makespan as f64)
        * config.final_reward_scale
}

/// Cumulative machine utilisation over `[0, clock)`; 1.0 at clock 0.
pub fn occupancy(state: &SimState) -> f64 {
    if state.clock == 0 {
        return 1.0;
    }
    let busy: Time = state.busy_time_accum.iter().sum();
    busy as f64 / (state.machine_busy_until.len() as f64 * state.clock as f64)
}

/// Makespan of a completed episode.
pub fn makespan(state: &SimState, instance: &Instance) -> Result<Time, EnvError> {
    if !state.is_complete(instance) {
        return Err(EnvError::Incomplete {
            assigned: state.assignments.len(),
            total: instance.n_operations(),
        });
    }
    Ok(state.assignments.iter().map(|a| a.end).max().unwrap_or(0))
}

/// Six-part state plus the action mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub machine_status: Vec<bool>,
    pub operation_progress: Vec<f64>,
    pub jobs_remaining: Vec<f64>,
    /// Row-major `n x m`: operation started (running or completed).
    pub operation_matrix: Vec<bool>,
    pub job_available: Vec<bool>,
    pub machine_processing: Vec<f64>,
    pub action_mask: Vec<bool>,
}

/// Length of [`Observation::features`] for an `n_jobs x n_machines` instance.
pub fn observation_dim(n_jobs: usize, n_machines: usize) -> usize {
    3 * n_machines + 2 * n_jobs + n_jobs * n_machines
}

impl Observation {
    fn build(state: &SimState, instance: &Instance, mask: &[bool]) -> Self {
        let (n, m) = (instance.n_jobs(), instance.n_machines());
        let max_d = instance.max_duration().max(1) as f64;
        let clock = state.clock;
        let busy: Vec<bool> = state.machine_busy_until.iter().map(|&t| t > clock).collect();
        let operation_progress = state
            .machine_busy_until
            .iter()
            .map(|&t| t.saturating_sub(clock) as f64 / max_d)
            .collect();
        let jobs_remaining = state
            .job_next_op
            .iter()
            .map(|&k| (m - k) as f64 / m as f64)
            .collect();
        let mut operation_matrix = vec![false; n * m];
        for (j, &k) in state.job_next_op.iter().enumerate() {
            operation_matrix[j * m..j * m + k].fill(true);
        }
        let machine_processing = state
            .machine_current_job
            .iter()
            .zip(&busy)
            .map(|(job, &b)| match job {
                Some(j) if b => (*j + 1) as f64 / n as f64,
                _ => 0.0,
            })
            .collect();
        Self {
            machine_status: busy,
            operation_progress,
            jobs_remaining,
            operation_matrix,
            job_available: mask.to_vec(),
            machine_processing,
            action_mask: mask.to_vec(),
        }
    }

    pub fn dim(&self) -> usize {
        observation_dim(self.jobs_remaining.len(), self.machine_status.len())
    }

    /// Flattened feature vector, every entry in `[0, 1]`.
    pub fn features(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.write_features(&mut out);
        out
    }

    pub fn write_features(&self, out: &mut [f64]) {
        let b = |x: &bool| if *x { 1.0 } else { 0.0 };
        let parts = self
            .machine_status
            .iter()
            .map(b)
            .chain(self.operation_progress.iter().copied())
            .chain(self.jobs_remaining.iter().copied())
            .chain(self.operation_matrix.iter().map(b))
            .chain(self.job_available.iter().map(b))
            .chain(self.machine_processing.iter().copied());
        for (slot, v) in out.iter_mut().zip(parts) {
            *slot = v;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruncationReason {
    RolloutBudget,
    Occupancy,
    InvalidActions,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    pub clock: Time,
    pub makespan_so_far: Time,
    pub occupancy: f64,
    pub invalid: bool,
    pub truncation: Option<TruncationReason>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Observation,
    pub reward: f64,
    pub done: bool,
    pub truncated: bool,
    pub info: StepInfo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub clock: Time,
    pub mask: Vec<bool>,
    pub action: usize,
    pub reward: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
enum Status {
    Running,
    Done,
    Truncated(TruncationReason),
}

/// Single-owner environment bound to one instance at a time.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JobShopEnv {
    instance: Instance,
    config: EnvConfig,
    budget: Option<Time>,
    state: SimState,
    mask: Vec<bool>,
    status: Status,
    trace: Option<Vec<TraceEntry>>,
}

impl JobShopEnv {
    /// Creates the environment and resets it onto `instance`.
    pub fn new(instance: Instance, config: EnvConfig) -> Self {
        let (n, m) = (instance.n_jobs(), instance.n_machines());
        let mut env = Self {
            instance,
            config,
            budget: None,
            state: SimState::new(n, m),
            mask: vec![false; n],
            status: Status::Running,
            trace: None,
        };
        env.reset();
        env
    }

    pub fn enable_trace(&mut self) {
        self.trace = Some(Vec::new());
    }

    pub fn trace(&self) -> Option<&[TraceEntry]> {
        self.trace.as_deref()
    }

    /// Starts a new episode on the current instance.
    pub fn reset(&mut self) -> Observation {
        let (n, m) = (self.instance.n_jobs(), self.instance.n_machines());
        self.budget = match self.config.rollout_budget {
            RolloutBudget::Fixed(t) => Some(t),
            RolloutBudget::Unbounded => None,
            RolloutBudget::Auto => Some(2 * dispatch::best_rule_makespan(&self.instance)),
        };
        self.state = SimState::new(n, m);
        self.status = Status::Running;
        if let Some(trace) = &mut self.trace {
            trace.clear();
        }
        self.mask = eligible_jobs(&self.state, &self.instance);
        self.observation()
    }

    /// Swaps in a same-shaped instance (e.g. a perturbed routing) and resets.
    pub fn reset_with_instance(&mut self, instance: Instance) -> Result<Observation, EnvError> {
        let expected = (self.instance.n_jobs(), self.instance.n_machines());
        let found = (instance.n_jobs(), instance.n_machines());
        if expected != found {
            return Err(EnvError::ShapeMismatch { expected, found });
        }
        self.instance = instance;
        Ok(self.reset())
    }

    pub fn instance(&self) -> &Instance {
        &self.instance
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    /// The resolved rollout budget of the current episode.
    pub fn rollout_budget(&self) -> Option<Time> {
        self.budget
    }

    pub fn action_mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn clock(&self) -> Time {
        self.state.clock
    }

    pub fn is_done(&self) -> bool {
        self.status == Status::Done
    }

    pub fn is_truncated(&self) -> bool {
        matches!(self.status, Status::Truncated(_))
    }

    pub fn is_finished(&self) -> bool {
        self.status != Status::Running
    }

    pub fn observation_dim(&self) -> usize {
        observation_dim(self.instance.n_jobs(), self.instance.n_machines())
    }

    pub fn observation(&self) -> Observation {
        Observation::build(&self.state, &self.instance, &self.mask)
    }

    pub fn occupancy(&self) -> f64 {
        occupancy(&self.state)
    }

    pub fn makespan(&self) -> Result<Time, EnvError> {
        makespan(&self.state, &self.instance)
    }

    pub fn schedule(&self) -> Schedule {
        Schedule::new(self.instance.name(), self.state.assignments.clone())
    }

    fn invalid_limit(&self) -> u64 {
        self.config
            .invalid_action_limit
            .unwrap_or(10 * self.instance.n_operations() as u64)
    }

    fn assign(&mut self, job: usize) {
        let state = &mut self.state;
        let op = state.job_next_op[job];
        let o = self.instance.operation(job, op);
        let start = state.clock;
        let end = start + o.duration;
        state.assignments.push(Assignment {
            job,
            op,
            machine: o.machine,
            start,
            end,
        });
        state.machine_busy_until[o.machine] = end;
        state.machine_current_job[o.machine] = Some(job);
        state.job_next_op[job] = op + 1;
        state.job_ready_at[job] = end;
    }

    /// Applies one sub-action: assign `action`'s next operation at the current clock.
    pub fn step(&mut self, action: usize) -> Result<StepResult, EnvError> {
        if self.is_finished() {
            return Err(EnvError::EpisodeFinished);
        }
        let n = self.instance.n_jobs();
        if action >= n {
            return Err(EnvError::ActionOutOfRange { action, n_jobs: n });
        }
        self.state.episode_step_count += 1;
        let clock_before = self.state.clock;
        let mask_before = self.trace.as_ref().map(|_| self.mask.clone());
        let valid = self.mask[action];
        let mut reward = 0.0;

        if !valid {
            self.state.invalid_action_count += 1;
            if self.state.invalid_action_count > self.invalid_limit() {
                self.status = Status::Truncated(TruncationReason::InvalidActions);
            }
        } else {
            self.assign(action);
            reward = 1.0;
            if self.state.is_complete(&self.instance) {
                self.status = Status::Done;
                self.mask = vec![false; n];
                let ms = makespan(&self.state, &self.instance)?;
                let budget = self.budget.unwrap_or(ms);
                reward += final_reward(ms, budget, &self.config);
            } else {
                self.mask = eligible_jobs(&self.state, &self.instance);
                if !self.mask.iter().any(|&b| b) {
                    advance_clock(&mut self.state, &self.instance)?;
                    self.mask = eligible_jobs(&self.state, &self.instance);
                    self.check_truncation();
                }
            }
        }

        if let (Some(trace), Some(mask)) = (&mut self.trace, mask_before) {
            trace.push(TraceEntry {
                clock: clock_before,
                mask,
                action,
                reward,
            });
        }

        let truncation = match self.status {
            Status::Truncated(r) => Some(r),
            _ => None,
        };
        Ok(StepResult {
            observation: self.observation(),
            reward,
            done: self.status == Status::Done,
            truncated: truncation.is_some(),
            info: StepInfo {
                clock: self.state.clock,
                makespan_so_far: self.state.job_ready_at.iter().copied().max().unwrap_or(0),
                occupancy: self.occupancy(),
                invalid: !valid,
                truncation,
            },
        })
    }

    /// Budget and occupancy checks, run after every clock jump.
    fn check_truncation(&mut self) {
        let clock = self.state.clock;
        if let Some(budget) = self.budget {
            if clock > budget {
                self.status = Status::Truncated(TruncationReason::RolloutBudget);
                return;
            }
        }
        if let Some(threshold) = self.config.occupancy_threshold {
            let warm = self.budget.map_or(0, |b| b / 10);
            if clock >= warm && self.occupancy() < threshold {
                self.status = Status::Truncated(TruncationReason::Occupancy);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::fixtures::worked;
    use crate::instance::{parse_standard, Operation};

    fn env(inst: Instance) -> JobShopEnv {
        JobShopEnv::new(inst, EnvConfig::unbounded())
    }

    #[test]
    fn reset_worked() {
        let e = env(worked());
        assert_eq!(e.action_mask(), &[true, true]);
        assert_eq!(e.clock(), 0);
        let obs = e.observation();
        assert_eq!(obs.jobs_remaining, vec![1.0, 1.0]);
        assert_eq!(obs.machine_status, vec![false; 3]);
    }

    #[test]
    fn reset_single_op() {
        let e = env(parse_standard("1 1\n0 5\n").unwrap());
        assert_eq!(e.action_mask(), &[true]);
        assert_eq!(e.observation().jobs_remaining, vec![1.0]);
    }

    #[test]
    fn shared_first_machine_masks_out_after_assignment() {
        let inst = Instance::new(
            "collide",
            vec![
                vec![Operation::new(0, 3), Operation::new(1, 2)],
                vec![Operation::new(0, 4), Operation::new(1, 1)],
                vec![Operation::new(1, 5), Operation::new(0, 1)],
            ],
        )
        .unwrap();
        let mut e = env(inst);
        assert_eq!(e.action_mask(), &[true, true, true]);
        e.step(1).unwrap();
        assert_eq!(e.clock(), 0);
        assert_eq!(e.action_mask(), &[false, false, true]);
        e.step(2).unwrap();
        // Nothing else can start at 0; M0 frees at 4.
        assert_eq!(e.clock(), 4);
        assert_eq!(e.action_mask(), &[true, false, false]);
    }

    #[test]
    fn first_step_worked() {
        let mut e = env(worked());
        let r = e.step(0).unwrap();
        assert_eq!(r.reward, 1.0);
        assert_eq!(e.clock(), 0);
        assert_eq!(e.action_mask(), &[false, true]);
        assert_eq!(
            e.state().assignments[0],
            Assignment {
                job: 0,
                op: 0,
                machine: 2,
                start: 0,
                end: 10
            }
        );
        let obs = r.observation;
        assert_eq!(obs.machine_status, vec![false, false, true]);
        assert!((obs.operation_progress[2] - 10.0 / 27.0).abs() < 1e-12);
        assert!((obs.machine_processing[2] - 0.5).abs() < 1e-12);
        assert_eq!(obs.operation_matrix, vec![true, false, false, false, false, false]);
    }

    #[test]
    fn eligibility_and_clock_jumps_follow_worked_trace() {
        let mut e = env(worked());
        e.step(0).unwrap();
        e.step(1).unwrap();
        assert_eq!(e.clock(), 10);
        assert_eq!(e.action_mask(), &[true, false]);
        let occ = e.occupancy();
        assert!((occ - 20.0 / 30.0).abs() < 1e-12);
        e.step(0).unwrap();
        // O_12 runs on M1 until 37; at 20 J2 moves onto M3.
        assert_eq!(e.clock(), 20);
        assert_eq!(e.action_mask(), &[false, true]);
        e.step(1).unwrap();
        // 32 unlocks nothing (M1 busy until 37), so the clock skips to 37.
        assert_eq!(e.clock(), 37);
        assert_eq!(e.action_mask(), &[true, true]);
    }

    #[test]
    fn ineligible_action_is_zero_reward_noop() {
        let mut e = env(worked());
        e.step(0).unwrap();
        let before = e.state().clone();
        let r = e.step(0).unwrap();
        assert_eq!(r.reward, 0.0);
        assert!(r.info.invalid);
        assert!(!r.done && !r.truncated);
        assert_eq!(e.state().clock, before.clock);
        assert_eq!(e.state().assignments, before.assignments);
        assert_eq!(e.state().invalid_action_count, 1);
    }

    #[test]
    fn invalid_limit_truncates() {
        let mut cfg = EnvConfig::unbounded();
        cfg.invalid_action_limit = Some(2);
        let mut e = JobShopEnv::new(worked(), cfg);
        e.step(0).unwrap();
        assert!(!e.step(0).unwrap().truncated);
        assert!(!e.step(0).unwrap().truncated);
        let r = e.step(0).unwrap();
        assert!(r.truncated && !r.done);
        assert_eq!(r.info.truncation, Some(TruncationReason::InvalidActions));
        assert_eq!(e.step(1), Err(EnvError::EpisodeFinished));
    }

    #[test]
    fn greedy_episode_worked() {
        let mut e = env(worked());
        let mut total = 0.0;
        let mut steps = 0;
        loop {
            let a = e.action_mask().iter().position(|&b| b).unwrap();
            let r = e.step(a).unwrap();
            total += r.reward;
            steps += 1;
            if r.done {
                break;
            }
        }
        assert_eq!(steps, 6);
        // Unbounded budget: terminal reward is (makespan + 100 - makespan) * 1.
        assert_eq!(total, 6.0 + 100.0);
        assert_eq!(e.makespan().unwrap(), 51);
        let mut got: Vec<_> = e
            .state()
            .assignments
            .iter()
            .map(|a| (a.job, a.machine, a.start, a.end))
            .collect();
        got.sort();
        assert_eq!(
            got,
            vec![
                (0, 0, 10, 37),
                (0, 1, 37, 51),
                (0, 2, 0, 10),
                (1, 0, 37, 49),
                (1, 1, 0, 20),
                (1, 2, 20, 32)
            ]
        );
        e.schedule().validate(&worked()).unwrap();
    }

    #[test]
    fn makespan_before_completion_is_error() {
        let e = env(worked());
        assert!(matches!(e.makespan(), Err(EnvError::Incomplete { .. })));
    }

    #[test]
    fn final_reward_cases() {
        let cfg = EnvConfig::default();
        assert_eq!(final_reward(51, 51, &cfg), 100.0);
        assert_eq!(final_reward(1352, 2000, &cfg), 748.0);
        let zero = EnvConfig {
            final_reward_scale: 0.0,
            ..EnvConfig::default()
        };
        assert_eq!(final_reward(1234, 10, &zero), 0.0);
    }

    #[test]
    fn occupancy_cases() {
        let mut s = SimState::new(1, 2);
        assert_eq!(occupancy(&s), 1.0);
        s.clock = 8;
        s.busy_time_accum = vec![8, 0];
        assert_eq!(occupancy(&s), 0.5);
        s.busy_time_accum = vec![8, 8];
        assert_eq!(occupancy(&s), 1.0);
    }

    #[test]
    fn single_running_op_advance() {
        let inst = parse_standard("1 2\n0 5 1 3\n").unwrap();
        let mut e = env(inst);
        e.step(0).unwrap();
        assert_eq!(e.clock(), 5);
    }

    #[test]
    fn advance_without_running_ops_is_deadlock() {
        let inst = worked();
        let mut s = SimState::new(2, 3);
        assert_eq!(advance_clock(&mut s, &inst), Err(EnvError::Deadlock { clock: 0 }));
    }

    #[test]
    fn all_finished_means_nothing_eligible() {
        let mut e = env(worked());
        while !e.is_finished() {
            let a = e.action_mask().iter().position(|&b| b).unwrap();
            e.step(a).unwrap();
        }
        assert_eq!(eligible_jobs(e.state(), e.instance()), vec![false, false]);
    }

    #[test]
    fn budget_truncation_has_no_final_reward() {
        let cfg = EnvConfig {
            rollout_budget: RolloutBudget::Fixed(15),
            ..EnvConfig::default()
        };
        let mut e = JobShopEnv::new(worked(), cfg);
        e.step(0).unwrap();
        e.step(1).unwrap();
        let r = e.step(0).unwrap();
        assert_eq!(e.clock(), 20);
        assert!(r.truncated && !r.done);
        assert_eq!(r.reward, 1.0);
        assert_eq!(r.info.truncation, Some(TruncationReason::RolloutBudget));
    }

    #[test]
    fn occupancy_threshold_truncates() {
        let cfg = EnvConfig {
            rollout_budget: RolloutBudget::Fixed(1000),
            occupancy_threshold: Some(0.9),
            ..EnvConfig::default()
        };
        let mut e = JobShopEnv::new(worked(), cfg);
        e.step(0).unwrap();
        e.step(1).unwrap();
        // clock 10 < warm-up (100): no check yet.
        assert!(!e.is_finished());
        let cfg = EnvConfig {
            rollout_budget: RolloutBudget::Fixed(50),
            occupancy_threshold: Some(0.9),
            ..EnvConfig::default()
        };
        let mut e = JobShopEnv::new(worked(), cfg);
        e.step(0).unwrap();
        let r = e.step(1).unwrap();
        assert!(r.truncated);
        assert_eq!(r.info.truncation, Some(TruncationReason::Occupancy));
    }

    #[test]
    fn auto_budget_is_twice_best_rule() {
        let e = JobShopEnv::new(worked(), EnvConfig::default());
        assert_eq!(e.rollout_budget(), Some(102));
    }

    #[test]
    fn trace_records_steps() {
        let mut e = env(worked());
        e.enable_trace();
        e.step(0).unwrap();
        e.step(0).unwrap();
        let t = e.trace().unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t[0].mask, vec![true, true]);
        assert_eq!(t[1].mask, vec![false, true]);
        assert_eq!(t[1].reward, 0.0);
    }

    #[test]
    fn features_in_unit_interval() {
        let mut e = env(worked());
        while !e.is_finished() {
            let f = e.observation().features();
            assert_eq!(f.len(), e.observation_dim());
            assert!(f.iter().all(|v| (0.0..=1.0).contains(v)));
            let a = e.action_mask().iter().rposition(|&b| b).unwrap();
            e.step(a).unwrap();
        }
    }
}
