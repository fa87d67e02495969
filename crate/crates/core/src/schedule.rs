//! Completed (or partial) schedules and their canonical text record.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::{Instance, Time};

/// One operation placed on the time line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Assignment {
    pub job: usize,
    pub op: usize,
    pub machine: usize,
    pub start: Time,
    pub end: Time,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub instance: String,
    pub assignments: Vec<Assignment>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScheduleViolation {
    #[error("schedule has {found} assignments, instance has {expected} operations")]
    Incomplete { expected: usize, found: usize },
    #[error("operation ({job}, {op}) does not exist or is scheduled twice")]
    UnknownOrDuplicate { job: usize, op: usize },
    #[error("operation ({job}, {op}) runs on machine {found}, routing requires {expected}")]
    WrongMachine {
        job: usize,
        op: usize,
        expected: usize,
        found: usize,
    },
    #[error("operation ({job}, {op}) spans {length} time units, duration is {duration}")]
    Interrupted {
        job: usize,
        op: usize,
        length: i128,
        duration: Time,
    },
    #[error("machine {machine}: operations of jobs {first} and {second} overlap")]
    MachineOverlap {
        machine: usize,
        first: usize,
        second: usize,
    },
    #[error("job {job}: operation {op} starts at {start} before its predecessor ends at {ready}")]
    Precedence {
        job: usize,
        op: usize,
        start: Time,
        ready: Time,
    },
}

/// Serialized form: `{"instance", "makespan", "assignments": [{"job","op","machine","start","end"}]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleRecord {
    pub instance: String,
    pub makespan: Time,
    pub assignments: Vec<Assignment>,
}

impl Schedule {
    pub fn new(instance: impl Into<String>, assignments: Vec<Assignment>) -> Self {
        Self {
            instance: instance.into(),
            assignments,
        }
    }

    /// Latest end time over all assignments (0 when empty).
    pub fn makespan(&self) -> Time {
        self.assignments.iter().map(|a| a.end).max().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    /// Assignments ordered by `(machine, start)`.
    pub fn sorted_by_machine(&self) -> Vec<Assignment> {
        let mut sorted = self.assignments.clone();
        sorted.sort_by_key(|a| (a.machine, a.start, a.job));
        sorted
    }

    pub fn to_record(&self) -> ScheduleRecord {
        ScheduleRecord {
            instance: self.instance.clone(),
            makespan: self.makespan(),
            assignments: self.sorted_by_machine(),
        }
    }

    pub fn to_record_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_record()).expect("schedule record serializes") + "\n"
    }

    /// Checks completeness, fixed routing, atomicity, machine exclusivity and
    /// job precedence against `instance`.
    pub fn validate(&self, instance: &Instance) -> Result<(), ScheduleViolation> {
        let (n, m) = (instance.n_jobs(), instance.n_machines());
        if self.assignments.len() != n * m {
            return Err(ScheduleViolation::Incomplete {
                expected: n * m,
                found: self.assignments.len(),
            });
        }
        let mut slot: Vec<Option<Assignment>> = vec![None; n * m];
        for a in &self.assignments {
            if a.job >= n || a.op >= m || slot[a.job * m + a.op].is_some() {
                return Err(ScheduleViolation::UnknownOrDuplicate { job: a.job, op: a.op });
            }
            let expected = instance.operation(a.job, a.op);
            if expected.machine != a.machine {
                return Err(ScheduleViolation::WrongMachine {
                    job: a.job,
                    op: a.op,
                    expected: expected.machine,
                    found: a.machine,
                });
            }
            if a.end < a.start || a.end - a.start != expected.duration {
                return Err(ScheduleViolation::Interrupted {
                    job: a.job,
                    op: a.op,
                    length: a.end as i128 - a.start as i128,
                    duration: expected.duration,
                });
            }
            slot[a.job * m + a.op] = Some(*a);
        }
        for job in 0..n {
            for op in 1..m {
                let prev = slot[job * m + op - 1].expect("complete");
                let cur = slot[job * m + op].expect("complete");
                if cur.start < prev.end {
                    return Err(ScheduleViolation::Precedence {
                        job,
                        op,
                        start: cur.start,
                        ready: prev.end,
                    });
                }
            }
        }
        let sorted = self.sorted_by_machine();
        for pair in sorted.windows(2) {
            if pair[0].machine == pair[1].machine && pair[1].start < pair[0].end {
                return Err(ScheduleViolation::MachineOverlap {
                    machine: pair[0].machine,
                    first: pair[0].job,
                    second: pair[1].job,
                });
            }
        }
        Ok(())
    }
}

impl From<ScheduleRecord> for Schedule {
    fn from(record: ScheduleRecord) -> Self {
        Schedule::new(record.instance, record.assignments)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::fixtures::worked;

    fn a(job: usize, op: usize, machine: usize, start: Time, end: Time) -> Assignment {
        Assignment {
            job,
            op,
            machine,
            start,
            end,
        }
    }

    fn greedy_worked() -> Schedule {
        Schedule::new(
            "worked",
            vec![
                a(0, 0, 2, 0, 10),
                a(1, 0, 1, 0, 20),
                a(0, 1, 0, 10, 37),
                a(1, 1, 2, 20, 32),
                a(0, 2, 1, 37, 51),
                a(1, 2, 0, 37, 49),
            ],
        )
    }

    #[test]
    fn valid_schedule() {
        let s = greedy_worked();
        assert_eq!(s.makespan(), 51);
        s.validate(&worked()).unwrap();
    }

    #[test]
    fn detects_each_violation() {
        let inst = worked();
        let mut s = greedy_worked();
        s.assignments.pop();
        assert!(matches!(s.validate(&inst), Err(ScheduleViolation::Incomplete { .. })));

        let mut s = greedy_worked();
        s.assignments[5] = a(1, 2, 1, 51, 63);
        assert!(matches!(s.validate(&inst), Err(ScheduleViolation::WrongMachine { .. })));

        let mut s = greedy_worked();
        s.assignments[5] = a(1, 2, 0, 37, 50);
        assert!(matches!(s.validate(&inst), Err(ScheduleViolation::Interrupted { .. })));

        let mut s = greedy_worked();
        s.assignments[3] = a(1, 1, 2, 19, 31);
        assert!(matches!(s.validate(&inst), Err(ScheduleViolation::Precedence { .. })));

        let mut s = greedy_worked();
        s.assignments[5] = a(1, 2, 0, 36, 48);
        assert!(matches!(s.validate(&inst), Err(ScheduleViolation::MachineOverlap { .. })));

        let mut s = greedy_worked();
        s.assignments[5] = a(1, 1, 2, 20, 32);
        assert!(matches!(s.validate(&inst), Err(ScheduleViolation::UnknownOrDuplicate { .. })));
    }

    #[test]
    fn record_field_names_and_order() {
        let text = greedy_worked().to_record_string();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["instance"], "worked");
        assert_eq!(v["makespan"], 51);
        let rows = v["assignments"].as_array().unwrap();
        assert_eq!(rows.len(), 6);
        let keys: Vec<_> = rows[0].as_object().unwrap().keys().cloned().collect();
        for k in ["job", "op", "machine", "start", "end"] {
            assert!(keys.contains(&k.to_string()));
        }
        let order: Vec<(u64, u64)> = rows
            .iter()
            .map(|r| (r["machine"].as_u64().unwrap(), r["start"].as_u64().unwrap()))
            .collect();
        let mut sorted = order.clone();
        sorted.sort();
        assert_eq!(order, sorted);
        let back: ScheduleRecord = serde_json::from_str(&text).unwrap();
        assert_eq!(Schedule::from(back).makespan(), 51);
    }
}
