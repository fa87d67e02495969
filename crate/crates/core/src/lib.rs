//! Job-shop scheduling toolkit: a discrete-event environment with
//! eligibility-driven decision points, classical dispatching rules, an
//! order-swapping perturbation for generalization, and a PPO learner.

pub mod cli;
pub mod dispatch;
pub mod env;
pub mod instance;
pub mod osm;
pub mod ppo;
pub mod schedule;

pub use dispatch::{dispatch, Rule, RuleKind, TieBreak};
pub use env::{EnvConfig, JobShopEnv, Observation, RolloutBudget, StepResult};
pub use instance::{Format, Instance, Operation, Time};
pub use osm::{OsmConfig, OsmState};
pub use schedule::{Assignment, Schedule};
