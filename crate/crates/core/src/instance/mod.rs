//! Static job-shop problem data.
//!
//! An [`Instance`] holds `n_jobs` jobs, each a fixed routing through every one
//! of the `n_machines` machines exactly once. Operations are indexed by
//! `(job, position)`; machine ids are 0-based.

mod bounds;
mod parse;
mod random;

pub use bounds::{canonical_name, lower_bound, BoundSource, Bounds, LiteratureBounds};
pub use parse::{parse, parse_standard, parse_taillard, Format, ParseError};
pub use random::generate_random;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Integral time units. All benchmark sets use integer durations.
pub type Time = u64;

/// One step of a job's routing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Operation {
    pub machine: usize,
    pub duration: Time,
}

impl Operation {
    pub fn new(machine: usize, duration: Time) -> Self {
        Self { machine, duration }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InstanceError {
    #[error("instance must have at least one job and one machine (got {n_jobs}x{n_machines})")]
    EmptyDimensions { n_jobs: usize, n_machines: usize },
    #[error("job {job} has {found} operations, expected {expected}")]
    WrongOperationCount {
        job: usize,
        expected: usize,
        found: usize,
    },
    #[error("job {job}: machine id {machine} out of range (instance has {n_machines} machines)")]
    MachineOutOfRange {
        job: usize,
        machine: usize,
        n_machines: usize,
    },
    #[error("job {job}: duplicate machine {machine} within job")]
    DuplicateMachine { job: usize, machine: usize },
    #[error("job {job}, position {position}: duration must be positive")]
    NonPositiveDuration { job: usize, position: usize },
    #[error("invalid duration range {low}..={high}: must be non-empty and positive")]
    InvalidDurationRange { low: Time, high: Time },
}

/// A validated job-shop instance. Immutable after construction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    name: String,
    n_jobs: usize,
    n_machines: usize,
    jobs: Vec<Vec<Operation>>,
}

impl Instance {
    /// Builds an instance from per-job routings, checking every invariant.
    pub fn new(name: impl Into<String>, jobs: Vec<Vec<Operation>>) -> Result<Self, InstanceError> {
        let n_jobs = jobs.len();
        let n_machines = jobs.first().map_or(0, Vec::len);
        if n_jobs == 0 || n_machines == 0 {
            return Err(InstanceError::EmptyDimensions { n_jobs, n_machines });
        }
        for (job, ops) in jobs.iter().enumerate() {
            validate_job(job, ops, n_machines)?;
        }
        Ok(Self {
            name: name.into(),
            n_jobs,
            n_machines,
            jobs,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn n_jobs(&self) -> usize {
        self.n_jobs
    }

    pub fn n_machines(&self) -> usize {
        self.n_machines
    }

    pub fn n_operations(&self) -> usize {
        self.n_jobs * self.n_machines
    }

    pub fn jobs(&self) -> &[Vec<Operation>] {
        &self.jobs
    }

    pub fn job(&self, job: usize) -> &[Operation] {
        &self.jobs[job]
    }

    pub fn operation(&self, job: usize, position: usize) -> Operation {
        self.jobs[job][position]
    }

    pub fn max_duration(&self) -> Time {
        self.jobs
            .iter()
            .flatten()
            .map(|op| op.duration)
            .max()
            .unwrap_or(0)
    }

    /// Sum of durations of job `job` from `position` to the end of its routing.
    pub fn remaining_work(&self, job: usize, position: usize) -> Time {
        self.jobs[job][position.min(self.n_machines)..]
            .iter()
            .map(|op| op.duration)
            .sum()
    }

    pub fn job_load(&self, job: usize) -> Time {
        self.remaining_work(job, 0)
    }

    pub fn machine_loads(&self) -> Vec<Time> {
        let mut loads = vec![0; self.n_machines];
        for op in self.jobs.iter().flatten() {
            loads[op.machine] += op.duration;
        }
        loads
    }

    /// Serializes in the OR-Library "standard" layout.
    pub fn to_standard_string(&self) -> String {
        let mut out = format!("{} {}\n", self.n_jobs, self.n_machines);
        for ops in &self.jobs {
            let row: Vec<String> = ops
                .iter()
                .map(|op| format!("{} {}", op.machine, op.duration))
                .collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }

    /// Serializes in the Taillard layout (duration matrix, then 1-based machine matrix).
    pub fn to_taillard_string(&self) -> String {
        let mut out = format!("{} {}\n", self.n_jobs, self.n_machines);
        for ops in &self.jobs {
            let row: Vec<String> = ops.iter().map(|op| op.duration.to_string()).collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        for ops in &self.jobs {
            let row: Vec<String> = ops.iter().map(|op| (op.machine + 1).to_string()).collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn to_format_string(&self, format: Format) -> String {
        match format {
            Format::Standard => self.to_standard_string(),
            Format::Taillard => self.to_taillard_string(),
        }
    }
}

fn validate_job(job: usize, ops: &[Operation], n_machines: usize) -> Result<(), InstanceError> {
    if ops.len() != n_machines {
        return Err(InstanceError::WrongOperationCount {
            job,
            expected: n_machines,
            found: ops.len(),
        });
    }
    let mut seen = vec![false; n_machines];
    for (position, op) in ops.iter().enumerate() {
        if op.machine >= n_machines {
            return Err(InstanceError::MachineOutOfRange {
                job,
                machine: op.machine,
                n_machines,
            });
        }
        if std::mem::replace(&mut seen[op.machine], true) {
            return Err(InstanceError::DuplicateMachine {
                job,
                machine: op.machine,
            });
        }
        if op.duration == 0 {
            return Err(InstanceError::NonPositiveDuration { job, position });
        }
    }
    Ok(())
}
