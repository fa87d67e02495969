//! Proximal policy optimization over the job-shop environment.
//!
//! Everything runs in `f64`. The actor maps an observation to one logit per
//! job, the critic to a scalar value; both are two tanh hidden layers wide.

mod buffer;
mod config;
mod dist;
mod loss;
mod net;
mod optim;
mod trainer;
mod update;

pub use buffer::{compute_advantages, normalize_advantages, RolloutBuffer, StepEnd};
pub use config::TrainerConfig;
pub use dist::{greedy_masked, masked_entropy, masked_log_softmax, sample_masked};
pub use loss::{ppo_loss, LossConfig, LossStats, Minibatch};
pub use net::{policy_forward, Layer, Mlp, MlpCache, PolicyParams};
pub use optim::{clip_grad_norm, default_n_steps, lr_at, Adam};
pub use trainer::{
    evaluate, log_to_csv, train, BestSchedule, Checkpoint, EvalMode, EvalResult, LogRow, TrainOutcome, Trainer, CHECKPOINT_FORMAT,
    CHECKPOINT_VERSION, LOG_HEADER,
};
pub use update::{ppo_update, TrainingBatch, UpdateMetrics};

use thiserror::Error;

use crate::env::EnvError;
use crate::osm::OsmError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PpoError {
    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("action mask has no eligible entry")]
    EmptyMask,
    #[error("rollout buffer is empty")]
    EmptyBuffer,
    #[error("rollout buffer holds {len} of {capacity} transitions")]
    IncompleteBuffer { len: usize, capacity: usize },
    #[error("rollout ends mid-episode without a bootstrap value")]
    MissingBootstrap,
    #[error("invalid trainer config `{field}`: {detail}")]
    InvalidConfig { field: &'static str, detail: String },
    #[error("non-finite value at step {step} (update {update}): {detail}")]
    NonFinite { step: u64, update: u64, detail: String },
    #[error("policy shaped for {expected:?} (obs_dim, n_jobs) cannot run an instance shaped {found:?}")]
    PolicyShape {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Osm(#[from] OsmError),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}
