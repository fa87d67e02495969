//! Rollout collection, the update loop, evaluation and checkpoints.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::buffer::{RolloutBuffer, StepEnd};
use super::config::TrainerConfig;
use super::dist::{greedy_masked, sample_masked};
use super::net::{policy_forward, PolicyParams};
use super::optim::{default_n_steps, lr_at, Adam};
use super::update::{ppo_update, TrainingBatch, UpdateMetrics};
use super::PpoError;
use crate::env::{EnvConfig, JobShopEnv};
use crate::instance::{Instance, Time};
use crate::osm::{OsmConfig, OsmState};
use crate::schedule::Schedule;

pub const LOG_HEADER: &str = "step,episode,makespan,reward,ep_length,occupancy,lr,clip_fraction,approx_kl";
pub const CHECKPOINT_FORMAT: &str = "jobshop-ppo-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// One finished episode. `makespan` is absent for truncated episodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub step: u64,
    pub episode: u64,
    pub makespan: Option<Time>,
    pub reward: f64,
    pub ep_length: u64,
    pub occupancy: f64,
    pub lr: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
}

impl LogRow {
    /// Comma-separated line matching [`LOG_HEADER`]; floats print in shortest round-trip form.
    pub fn to_csv(&self) -> String {
        let makespan = self.makespan.map(|m| m.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.step,
            self.episode,
            makespan,
            self.reward,
            self.ep_length,
            self.occupancy,
            self.lr,
            self.clip_fraction,
            self.approx_kl
        )
    }

    pub fn from_csv(line: &str) -> Option<Self> {
        let f: Vec<&str> = line.trim().split(',').collect();
        if f.len() != 9 {
            return None;
        }
        Some(Self {
            step: f[0].parse().ok()?,
            episode: f[1].parse().ok()?,
            makespan: if f[2].is_empty() { None } else { Some(f[2].parse().ok()?) },
            reward: f[3].parse().ok()?,
            ep_length: f[4].parse().ok()?,
            occupancy: f[5].parse().ok()?,
            lr: f[6].parse().ok()?,
            clip_fraction: f[7].parse().ok()?,
            approx_kl: f[8].parse().ok()?,
        })
    }
}

/// Best complete schedule seen on the unperturbed instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestSchedule {
    pub makespan: Time,
    pub step: u64,
    pub schedule: Schedule,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct EnvSlot {
    env: JobShopEnv,
    reward: f64,
    length: u64,
    swaps: usize,
}

/// Resumable training state. Serializing it mid-run and continuing from the
/// deserialized copy reproduces the uninterrupted run exactly.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trainer {
    config: TrainerConfig,
    env_config: EnvConfig,
    osm_config: OsmConfig,
    n_steps: usize,
    params: PolicyParams,
    optimizer: Adam,
    osm: OsmState,
    slots: Vec<EnvSlot>,
    action_rng: ChaCha8Rng,
    shuffle_rng: ChaCha8Rng,
    global_step: u64,
    episodes: u64,
    updates: u64,
    last_metrics: Option<UpdateMetrics>,
    best: Option<BestSchedule>,
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

impl Trainer {
    pub fn new(
        instance: Instance,
        env_config: EnvConfig,
        config: TrainerConfig,
        osm_config: OsmConfig,
    ) -> Result<Self, PpoError> {
        config.validate()?;
        osm_config.validate()?;
        let n_steps = config.n_steps.unwrap_or_else(|| default_n_steps(&instance));
        let env = JobShopEnv::new(instance.clone(), env_config.clone());
        let params = PolicyParams::new(
            env.observation_dim(),
            instance.n_jobs(),
            &config.hidden,
            &mut stream_rng(config.seed, 0),
        );
        let optimizer = Adam::new(&params, config.adam_eps);
        let slots = (0..config.n_envs)
            .map(|_| EnvSlot {
                env: env.clone(),
                reward: 0.0,
                length: 0,
                swaps: 0,
            })
            .collect();
        Ok(Self {
            action_rng: stream_rng(config.seed, 1),
            shuffle_rng: stream_rng(config.seed, 2),
            n_steps,
            params,
            optimizer,
            osm: OsmState::new(instance),
            slots,
            global_step: 0,
            episodes: 0,
            updates: 0,
            last_metrics: None,
            best: None,
            config,
            env_config,
            osm_config,
        })
    }

    pub fn config(&self) -> &TrainerConfig {
        &self.config
    }

    pub fn env_config(&self) -> &EnvConfig {
        &self.env_config
    }

    pub fn osm_config(&self) -> &OsmConfig {
        &self.osm_config
    }

    pub fn params(&self) -> &PolicyParams {
        &self.params
    }

    pub fn osm_state(&self) -> &OsmState {
        &self.osm
    }

    pub fn base_instance(&self) -> &Instance {
        self.osm.base_instance()
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn global_step(&self) -> u64 {
        self.global_step
    }

    pub fn episodes(&self) -> u64 {
        self.episodes
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn last_metrics(&self) -> Option<&UpdateMetrics> {
        self.last_metrics.as_ref()
    }

    pub fn best(&self) -> Option<&BestSchedule> {
        self.best.as_ref()
    }

    pub fn is_complete(&self) -> bool {
        self.global_step >= self.config.total_steps
    }

    fn non_finite(&self, detail: String) -> PpoError {
        PpoError::NonFinite {
            step: self.global_step,
            update: self.updates,
            detail,
        }
    }

    fn evaluate_state(&self, obs: &[f64]) -> Result<(Vec<f64>, f64), PpoError> {
        let (logits, value) = policy_forward(&self.params, obs)?;
        if !value.is_finite() || logits.iter().any(|l| !l.is_finite()) {
            return Err(self.non_finite(format!("forward pass produced value {value}, logits {logits:?}")));
        }
        Ok((logits, value))
    }

    /// Collects one rollout, runs one update and returns the episodes finished meanwhile.
    ///
    /// On a non-finite loss or parameter the pre-update parameters and optimizer
    /// state are restored before the error is returned.
    pub fn run_update(&mut self) -> Result<Vec<LogRow>, PpoError> {
        let per_env = (self.n_steps / self.slots.len()).max(1);
        let n_jobs = self.base_instance().n_jobs();
        let obs_dim = self.params.obs_dim();
        let mut buffers: Vec<RolloutBuffer> = (0..self.slots.len())
            .map(|_| RolloutBuffer::new(obs_dim, n_jobs, per_env))
            .collect();
        let mut rows = Vec::new();
        let mut obs = vec![0.0; obs_dim];

        for _ in 0..per_env {
            for e in 0..self.slots.len() {
                self.slots[e].env.observation().write_features(&mut obs);
                let mask = self.slots[e].env.action_mask().to_vec();
                let (logits, value) = self.evaluate_state(&obs)?;
                let (action, log_prob) = sample_masked(&logits, &mask, &mut self.action_rng)?;
                let res = self.slots[e].env.step(action)?;
                self.global_step += 1;
                let slot = &mut self.slots[e];
                slot.reward += res.reward;
                slot.length += 1;
                let end = if res.done {
                    StepEnd::Terminal
                } else if res.truncated {
                    let bootstrap = self.evaluate_state(&res.observation.features())?.1;
                    StepEnd::Truncated { bootstrap }
                } else {
                    StepEnd::Continue
                };
                buffers[e].push(&obs, &mask, action, log_prob, res.reward, value, end);
                if end != StepEnd::Continue {
                    rows.push(self.finish_episode(e)?);
                }
            }
        }
        for (e, buf) in buffers.iter_mut().enumerate() {
            if buf.ends.last() == Some(&StepEnd::Continue) {
                self.slots[e].env.observation().write_features(&mut obs);
                buf.last_value = Some(self.evaluate_state(&obs)?.1);
            }
        }

        let batch = TrainingBatch::from_buffers(&buffers, &self.config)?;
        let lr = lr_at(self.global_step, &self.config);
        let snapshot = (self.params.clone(), self.optimizer.clone());
        let outcome = ppo_update(
            &mut self.params,
            &mut self.optimizer,
            &batch,
            &self.config,
            lr,
            &mut self.shuffle_rng,
        );
        let failure = match outcome {
            Ok(m) if self.params.is_finite() => {
                self.last_metrics = Some(m);
                None
            }
            Ok(_) => Some("parameters became non-finite".to_string()),
            Err(PpoError::NonFinite { detail, .. }) => Some(detail),
            Err(e) => return Err(e),
        };
        if let Some(detail) = failure {
            (self.params, self.optimizer) = snapshot;
            return Err(self.non_finite(detail));
        }
        self.updates += 1;
        Ok(rows)
    }

    fn finish_episode(&mut self, e: usize) -> Result<LogRow, PpoError> {
        let slot = &mut self.slots[e];
        let makespan = if slot.env.is_done() {
            Some(slot.env.makespan()?)
        } else {
            None
        };
        if let (Some(ms), 0) = (makespan, slot.swaps) {
            if self.best.as_ref().is_none_or(|b| ms < b.makespan) {
                self.best = Some(BestSchedule {
                    makespan: ms,
                    step: self.global_step,
                    schedule: slot.env.schedule(),
                });
            }
        }
        let (clip_fraction, approx_kl) = self
            .last_metrics
            .map_or((0.0, 0.0), |m| (m.clip_fraction, m.approx_kl));
        let row = LogRow {
            step: self.global_step,
            episode: self.episodes,
            makespan,
            reward: slot.reward,
            ep_length: slot.length,
            occupancy: slot.env.occupancy(),
            lr: lr_at(self.global_step, &self.config),
            clip_fraction,
            approx_kl,
        };
        self.episodes += 1;
        self.osm.on_episode_end();
        let swaps = self.osm.swap_count(&self.osm_config);
        let next = self.osm.next_instance(&self.osm_config, self.config.seed);
        let slot = &mut self.slots[e];
        if swaps == 0 && slot.swaps == 0 {
            slot.env.reset();
        } else {
            slot.env.reset_with_instance(next)?;
        }
        slot.swaps = swaps;
        slot.reward = 0.0;
        slot.length = 0;
        Ok(row)
    }

    /// Runs updates until `total_steps` transitions have been collected.
    pub fn run(&mut self, mut on_rows: impl FnMut(&[LogRow])) -> Result<(), PpoError> {
        while !self.is_complete() {
            let rows = self.run_update()?;
            on_rows(&rows);
        }
        Ok(())
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            trainer: self.clone(),
        }
    }

    pub fn checkpoint_string(&self) -> String {
        serde_json::to_string(&self.to_checkpoint()).expect("trainer state serializes")
    }

    pub fn from_checkpoint_str(text: &str) -> Result<Self, PpoError> {
        let ck: Checkpoint = serde_json::from_str(text).map_err(|e| PpoError::Checkpoint(e.to_string()))?;
        if ck.format != CHECKPOINT_FORMAT || ck.version != CHECKPOINT_VERSION {
            return Err(PpoError::Checkpoint(format!(
                "unsupported checkpoint {} v{}",
                ck.format, ck.version
            )));
        }
        Ok(ck.trainer)
    }
}

/// Versioned on-disk form of a [`Trainer`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub trainer: Trainer,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: PolicyParams,
    pub log: Vec<LogRow>,
    pub best: Option<BestSchedule>,
    pub last_metrics: Option<UpdateMetrics>,
}

/// Trains from scratch until `trainer_config.total_steps`.
pub fn train(
    instance: &Instance,
    env_config: &EnvConfig,
    trainer_config: &TrainerConfig,
    osm_config: &OsmConfig,
) -> Result<TrainOutcome, PpoError> {
    let mut trainer = Trainer::new(
        instance.clone(),
        env_config.clone(),
        trainer_config.clone(),
        *osm_config,
    )?;
    let mut log = Vec::new();
    trainer.run(|rows| log.extend_from_slice(rows))?;
    Ok(TrainOutcome {
        params: trainer.params.clone(),
        best: trainer.best.clone(),
        last_metrics: trainer.last_metrics,
        log,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalMode {
    /// Argmax of the masked logits; one deterministic episode.
    Greedy,
    /// Stochastic episodes from the masked policy.
    Sample,
}

impl fmt::Display for EvalMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EvalMode::Greedy => "greedy",
            EvalMode::Sample => "sample",
        })
    }
}

impl FromStr for EvalMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "greedy" => Ok(EvalMode::Greedy),
            "sample" => Ok(EvalMode::Sample),
            other => Err(format!("unknown evaluation mode `{other}` (expected greedy or sample)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub mode: EvalMode,
    pub makespans: Vec<Time>,
    pub best_makespan: Time,
    pub mean_makespan: f64,
    /// Schedule achieving `best_makespan`.
    pub schedule: Schedule,
}

/// Rolls the policy out on `instance` without a rollout budget.
pub fn evaluate(
    params: &PolicyParams,
    instance: &Instance,
    episodes: usize,
    mode: EvalMode,
    seed: u64,
) -> Result<EvalResult, PpoError> {
    let mut env = JobShopEnv::new(instance.clone(), EnvConfig::unbounded());
    let found = (env.observation_dim(), instance.n_jobs());
    let expected = (params.obs_dim(), params.n_actions());
    if found != expected {
        return Err(PpoError::PolicyShape { expected, found });
    }
    let runs = match mode {
        EvalMode::Greedy => 1,
        EvalMode::Sample => episodes.max(1),
    };
    let mut rng = stream_rng(seed, 3);
    let mut obs = vec![0.0; expected.0];
    let mut makespans = Vec::with_capacity(runs);
    let mut best: Option<(Time, Schedule)> = None;
    for _ in 0..runs {
        env.reset();
        while !env.is_finished() {
            env.observation().write_features(&mut obs);
            let (logits, _) = policy_forward(params, &obs)?;
            let action = match mode {
                EvalMode::Greedy => greedy_masked(&logits, env.action_mask())?,
                EvalMode::Sample => sample_masked(&logits, env.action_mask(), &mut rng)?.0,
            };
            env.step(action)?;
        }
        let ms = env.makespan()?;
        makespans.push(ms);
        if best.as_ref().is_none_or(|(b, _)| ms < *b) {
            best = Some((ms, env.schedule()));
        }
    }
    let (best_makespan, schedule) = best.expect("at least one episode");
    let mean_makespan = makespans.iter().sum::<Time>() as f64 / makespans.len() as f64;
    Ok(EvalResult {
        mode,
        makespans,
        best_makespan,
        mean_makespan,
        schedule,
    })
}

/// Renders rows as a complete CSV document with header.
pub fn log_to_csv(rows: &[LogRow]) -> String {
    let mut out = String::from(LOG_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(out, "{}", r.to_csv());
    }
    out
}
