//! Priority dispatching rules and exhaustive oracles for tiny instances.
//!
//! Every rule drives the same [`JobShopEnv`] the learner uses, so the rules
//! build non-delay schedules under identical semantics.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{EnvConfig, JobShopEnv, SimState};
use crate::instance::{Instance, Time};
use crate::schedule::{Assignment, Schedule};

pub const DEFAULT_ORACLE_LIMIT: usize = 12;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DispatchError {
    #[error("instance has {ops} operations, exhaustive search is capped at {limit}")]
    TooLarge { ops: usize, limit: usize },
    #[error("unknown rule '{0}' (expected spt|lpt|fifo|mwkr|random)")]
    UnknownRule(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RuleKind {
    /// Shortest next operation.
    Spt,
    /// Longest next operation.
    Lpt,
    /// Longest-waiting job (earliest ready time).
    Fifo,
    /// Most work remaining, counting the next operation.
    Mwkr,
    /// Uniform over eligible jobs.
    Random,
}

impl RuleKind {
    pub const ALL: [RuleKind; 5] = [
        RuleKind::Spt,
        RuleKind::Lpt,
        RuleKind::Fifo,
        RuleKind::Mwkr,
        RuleKind::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RuleKind::Spt => "spt",
            RuleKind::Lpt => "lpt",
            RuleKind::Fifo => "fifo",
            RuleKind::Mwkr => "mwkr",
            RuleKind::Random => "random",
        }
    }
}

impl fmt::Display for RuleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RuleKind {
    type Err = DispatchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RuleKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| DispatchError::UnknownRule(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    LowestJobId,
    Random(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rule {
    pub kind: RuleKind,
    pub tie_break: TieBreak,
}

impl Rule {
    pub fn new(kind: RuleKind) -> Self {
        Self {
            kind,
            tie_break: TieBreak::LowestJobId,
        }
    }

    /// RANDOM dispatching seeded with `seed`.
    pub fn random(seed: u64) -> Self {
        Self {
            kind: RuleKind::Random,
            tie_break: TieBreak::Random(seed),
        }
    }

    pub fn with_seed(kind: RuleKind, seed: u64) -> Self {
        match kind {
            RuleKind::Random => Self::random(seed),
            _ => Self::new(kind),
        }
    }

    /// Higher is preferred.
    fn priority(&self, instance: &Instance, state: &SimState, job: usize) -> i128 {
        let next = state.job_next_op[job];
        let d = instance.operation(job, next).duration as i128;
        match self.kind {
            RuleKind::Spt => -d,
            RuleKind::Lpt => d,
            RuleKind::Fifo => -(state.job_ready_at[job] as i128),
            RuleKind::Mwkr => instance.remaining_work(job, next) as i128,
            RuleKind::Random => 0,
        }
    }

    /// Picks among the eligible jobs of `mask`.
    pub fn choose(
        &self,
        instance: &Instance,
        state: &SimState,
        mask: &[bool],
        rng: &mut ChaCha8Rng,
    ) -> usize {
        let eligible = mask.iter().enumerate().filter(|(_, &b)| b).map(|(j, _)| j);
        let best = eligible
            .clone()
            .map(|j| self.priority(instance, state, j))
            .max()
            .expect("at least one eligible job at a decision point");
        let ties: Vec<usize> = eligible
            .filter(|&j| self.priority(instance, state, j) == best)
            .collect();
        match self.tie_break {
            TieBreak::Random(_) if ties.len() > 1 => ties[rng.gen_range(0..ties.len())],
            _ => ties[0],
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.tie_break {
            TieBreak::LowestJobId => write!(f, "{}", self.kind),
            TieBreak::Random(seed) => write!(f, "{}(seed={seed})", self.kind),
        }
    }
}

/// Runs one episode choosing the rule's preferred eligible job at every query.
pub fn dispatch(instance: &Instance, rule: Rule) -> Schedule {
    let seed = match rule.tie_break {
        TieBreak::Random(s) => s,
        TieBreak::LowestJobId => 0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut env = JobShopEnv::new(instance.clone(), EnvConfig::unbounded());
    while !env.is_finished() {
        let job = rule.choose(env.instance(), env.state(), env.action_mask(), &mut rng);
        env.step(job).expect("rule picks an eligible job");
    }
    env.schedule()
}

/// Best makespan over SPT, MWKR, FIFO and LPT with lowest-id tie-breaking.
pub fn best_rule_makespan(instance: &Instance) -> Time {
    [RuleKind::Spt, RuleKind::Mwkr, RuleKind::Fifo, RuleKind::Lpt]
        .into_iter()
        .map(|k| dispatch(instance, Rule::new(k)).makespan())
        .min()
        .expect("four rules")
}

fn check_limit(instance: &Instance, limit: usize) -> Result<(), DispatchError> {
    let ops = instance.n_operations();
    if ops > limit {
        return Err(DispatchError::TooLarge { ops, limit });
    }
    Ok(())
}

/// Calls `visit` on every completed episode reachable through the environment,
/// i.e. every distinct sequence of masked actions.
pub fn enumerate_schedules(
    instance: &Instance,
    limit: usize,
    mut visit: impl FnMut(&JobShopEnv),
) -> Result<u64, DispatchError> {
    check_limit(instance, limit)?;
    fn walk(env: &JobShopEnv, visit: &mut dyn FnMut(&JobShopEnv), leaves: &mut u64) {
        if env.is_done() {
            *leaves += 1;
            visit(env);
            return;
        }
        for (job, _) in env.action_mask().iter().enumerate().filter(|(_, &b)| b) {
            let mut child = env.clone();
            child.step(job).expect("masked action is valid");
            walk(&child, visit, leaves);
        }
    }
    let env = JobShopEnv::new(instance.clone(), EnvConfig::unbounded());
    let mut leaves = 0;
    walk(&env, &mut visit, &mut leaves);
    Ok(leaves)
}

/// Admissible bound on the final makespan of any completion of `state`.
/// Unassigned operations can only start at or after the current clock.
fn partial_bound(instance: &Instance, state: &SimState) -> Time {
    let clock = state.clock;
    let mut machine_left = vec![0; instance.n_machines()];
    let mut bound = 0;
    for job in 0..instance.n_jobs() {
        let next = state.job_next_op[job];
        let left = instance.remaining_work(job, next);
        let end = if left > 0 { state.job_ready_at[job].max(clock) + left } else { state.job_ready_at[job] };
        bound = bound.max(end);
        for op in next..instance.n_machines() {
            let o = instance.operation(job, op);
            machine_left[o.machine] += o.duration;
        }
    }
    for (busy, left) in state.machine_busy_until.iter().zip(machine_left) {
        bound = bound.max(if left > 0 { (*busy).max(clock) + left } else { *busy });
    }
    bound
}

/// Minimum makespan over all environment-reachable (non-delay) schedules,
/// with one witnessing schedule.
pub fn brute_force_optimum(instance: &Instance, limit: usize) -> Result<(Time, Schedule), DispatchError> {
    check_limit(instance, limit)?;
    fn walk(env: &JobShopEnv, best: &mut Option<(Time, Schedule)>) {
        if env.is_done() {
            let ms = env.makespan().expect("done");
            if best.as_ref().is_none_or(|(b, _)| ms < *b) {
                *best = Some((ms, env.schedule()));
            }
            return;
        }
        if let Some((b, _)) = best {
            if partial_bound(env.instance(), env.state()) >= *b {
                return;
            }
        }
        for (job, _) in env.action_mask().iter().enumerate().filter(|(_, &b)| b) {
            let mut child = env.clone();
            child.step(job).expect("masked action is valid");
            walk(&child, best);
        }
    }
    let env = JobShopEnv::new(instance.clone(), EnvConfig::unbounded());
    let mut best = None;
    walk(&env, &mut best);
    Ok(best.expect("every instance has at least one schedule"))
}

/// Minimum makespan over all active schedules (Giffler-Thompson branching),
/// which always contains an optimal schedule. Unlike the environment it may
/// leave a machine idle while work is waiting.
pub fn active_optimum(instance: &Instance, limit: usize) -> Result<(Time, Schedule), DispatchError> {
    check_limit(instance, limit)?;
    struct Node {
        next: Vec<usize>,
        job_ready: Vec<Time>,
        machine_free: Vec<Time>,
        placed: Vec<Assignment>,
    }
    fn walk(inst: &Instance, node: &mut Node, best: &mut Option<(Time, Vec<Assignment>)>) {
        let (n, m) = (inst.n_jobs(), inst.n_machines());
        if node.placed.len() == n * m {
            let ms = node.placed.iter().map(|a| a.end).max().unwrap_or(0);
            if best.as_ref().is_none_or(|(b, _)| ms < *b) {
                *best = Some((ms, node.placed.clone()));
            }
            return;
        }
        let earliest = |node: &Node, j: usize| {
            let o = inst.operation(j, node.next[j]);
            node.job_ready[j].max(node.machine_free[o.machine])
        };
        let open: Vec<usize> = (0..n).filter(|&j| node.next[j] < m).collect();
        if let Some((b, _)) = best {
            let bound = open
                .iter()
                .map(|&j| earliest(node, j) + inst.remaining_work(j, node.next[j]))
                .max()
                .unwrap_or(0);
            if bound >= *b {
                return;
            }
        }
        let (star, c_star) = open
            .iter()
            .map(|&j| (j, earliest(node, j) + inst.operation(j, node.next[j]).duration))
            .min_by_key(|&(j, c)| (c, j))
            .expect("unfinished job");
        let machine = inst.operation(star, node.next[star]).machine;
        let conflict: Vec<usize> = open
            .iter()
            .copied()
            .filter(|&j| inst.operation(j, node.next[j]).machine == machine && earliest(node, j) < c_star)
            .collect();
        for j in conflict {
            let op = node.next[j];
            let o = inst.operation(j, op);
            let start = earliest(node, j);
            let saved = (node.job_ready[j], node.machine_free[machine]);
            node.next[j] += 1;
            node.job_ready[j] = start + o.duration;
            node.machine_free[machine] = start + o.duration;
            node.placed.push(Assignment {
                job: j,
                op,
                machine,
                start,
                end: start + o.duration,
            });
            walk(inst, node, best);
            node.placed.pop();
            node.next[j] -= 1;
            (node.job_ready[j], node.machine_free[machine]) = saved;
        }
    }
    let mut node = Node {
        next: vec![0; instance.n_jobs()],
        job_ready: vec![0; instance.n_jobs()],
        machine_free: vec![0; instance.n_machines()],
        placed: Vec::new(),
    };
    let mut best = None;
    walk(instance, &mut node, &mut best);
    let (ms, placed) = best.expect("at least one active schedule");
    Ok((ms, Schedule::new(instance.name(), placed)))
}

/// Best non-delay makespan next to the true optimum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NonDelayGap {
    pub non_delay: Time,
    pub active: Time,
}

impl NonDelayGap {
    pub fn restricts_optimum(&self) -> bool {
        self.active < self.non_delay
    }
}

/// Compares the environment-reachable optimum with the unrestricted one.
pub fn non_delay_gap(instance: &Instance, limit: usize) -> Result<NonDelayGap, DispatchError> {
    let (non_delay, _) = brute_force_optimum(instance, limit)?;
    let (active, _) = active_optimum(instance, limit)?;
    Ok(NonDelayGap { non_delay, active })
}
