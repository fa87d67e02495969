//! Run manifests: everything needed to re-execute a command bit-exactly.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::overrides::Settings;
use crate::dispatch::RuleKind;
use crate::instance::{Format, Time};
use crate::ppo::EvalMode;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const TOOL: &str = "jobshop";

/// How a makespan is produced for a comparison column or a solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Rule(RuleKind),
    Checkpoint(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedMethod {
    pub name: String,
    pub method: Method,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "subcommand", rename_all = "lowercase")]
pub enum Command {
    Parse {
        instances: Vec<PathBuf>,
    },
    Solve {
        instance: PathBuf,
        method: Method,
        mode: EvalMode,
        episodes: usize,
    },
    Train {
        instance: Option<PathBuf>,
        resume: Option<PathBuf>,
        checkpoint_every: u64,
    },
    Evaluate {
        instances: Vec<PathBuf>,
        checkpoint: PathBuf,
        mode: EvalMode,
        episodes: usize,
    },
    Compare {
        instances: Vec<PathBuf>,
        methods: Vec<NamedMethod>,
        mode: EvalMode,
        episodes: usize,
        bounds: Option<PathBuf>,
    },
    Perturb {
        instance: PathBuf,
        swaps: Option<usize>,
        tau: Option<f64>,
        training_phase: Option<u64>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Parse { .. } => "parse",
            Command::Solve { .. } => "solve",
            Command::Train { .. } => "train",
            Command::Evaluate { .. } => "evaluate",
            Command::Compare { .. } => "compare",
            Command::Perturb { .. } => "perturb",
        }
    }

    pub fn instances(&self) -> Vec<PathBuf> {
        match self {
            Command::Parse { instances } | Command::Evaluate { instances, .. } | Command::Compare { instances, .. } => {
                instances.clone()
            }
            Command::Solve { instance, .. } | Command::Perturb { instance, .. } => vec![instance.clone()],
            Command::Train { instance, .. } => instance.iter().cloned().collect(),
        }
    }
}

/// A fully resolved command: no defaults or files left to consult.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Invocation {
    pub command: Command,
    pub format: Format,
    pub seed: u64,
    pub settings: Settings,
}

/// Result figures compared on replay; never contains timestamps.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub makespan: Option<Time>,
    pub lower_bound: Option<Time>,
    /// `100 * (makespan - lower_bound) / lower_bound`.
    pub gap_percent: Option<f64>,
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub details: serde_json::Value,
}

impl Summary {
    pub fn with_makespan(makespan: Time, lower_bound: Time) -> Self {
        Self {
            makespan: Some(makespan),
            lower_bound: Some(lower_bound),
            gap_percent: (lower_bound > 0).then(|| 100.0 * super::report::gap(makespan, lower_bound)),
            details: serde_json::Value::Null,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub argv: Vec<String>,
    pub instances: Vec<PathBuf>,
    pub invocation: Invocation,
    pub started_at: String,
    pub finished_at: String,
    pub exit_code: i32,
    pub summary: Summary,
    /// Files written next to the manifest, in write order.
    pub outputs: Vec<String>,
}
