//! The `jobshop` command line.
//!
//! Exit codes: 0 success, 1 unreadable or malformed input (or an absent
//! comparison cell), 2 usage or configuration error, 3 training aborted on a
//! non-finite value. Every command writes a `manifest.json` into `--out`
//! from which `jobshop replay` re-executes it.

mod commands;
mod manifest;
mod overrides;
mod report;

pub use commands::{
    diff_outputs, execute, load_instance, load_policy, schedule_from_record, Outcome, BEST_SCHEDULE_FILE, CHECKPOINT_FILE,
    COMPARISON_CSV_FILE, COMPARISON_TEXT_FILE, EVALUATION_FILE, PERTURBED_FILE, SCHEDULE_FILE, SWAPS_FILE, TRAIN_LOG_FILE,
};
pub use manifest::{Command, Invocation, Method, NamedMethod, RunManifest, Summary, MANIFEST_FILE, TOOL};
pub use overrides::Settings;
pub use report::{format_gap, gap, ComparisonRow, ComparisonTable};

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::SystemTime;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::dispatch::RuleKind;
use crate::instance::{canonical_name, Format};
use crate::ppo::EvalMode;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NON_FINITE: i32 = 3;

pub const DEFAULT_OUT: &str = "jobshop-out";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }

    pub fn io(path: &Path, err: std::io::Error) -> Self {
        Self::input(format!("{}: {err}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

#[derive(Debug, Parser)]
#[command(name = "jobshop", version, about = "Job-shop scheduling: dispatching rules, PPO training and benchmark reports")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Sub,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// Instance file layout; never guessed from content.
    #[arg(long, global = true, default_value = "std", value_parser = parse_format)]
    format: Format,
    /// Seed for training, sampling, RANDOM dispatch and perturbation (overrides trainer.seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for results and the run manifest.
    #[arg(long, global = true, default_value = DEFAULT_OUT)]
    out: PathBuf,
    /// File of `key = value` settings, e.g. `trainer.gamma = 0.9`.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Single `key=value` setting, applied after --config; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn parse_format(s: &str) -> Result<Format, String> {
    s.parse()
}

fn parse_mode(s: &str) -> Result<EvalMode, String> {
    s.parse()
}

fn parse_rule(s: &str) -> Result<RuleKind, String> {
    s.parse().map_err(|e: crate::dispatch::DispatchError| e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Toggle {
    On,
    Off,
}

#[derive(Debug, Args)]
struct PolicyArgs {
    /// greedy (one deterministic episode) or sample.
    #[arg(long, default_value = "greedy", value_parser = parse_mode)]
    mode: EvalMode,
    /// Episodes per instance in sample mode.
    #[arg(long, default_value_t = 1)]
    episodes: usize,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// Validate instance files.
    Parse {
        #[arg(required = true)]
        instances: Vec<PathBuf>,
    },
    /// Build one schedule with a dispatching rule or a trained policy.
    Solve {
        instance: PathBuf,
        #[arg(long, value_parser = parse_rule, conflicts_with = "checkpoint")]
        rule: Option<RuleKind>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[command(flatten)]
        policy: PolicyArgs,
    },
    /// Train a PPO policy on one instance.
    Train {
        instance: Option<PathBuf>,
        /// Continue from a checkpoint; its stored settings take precedence.
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Total environment steps (trainer.total_steps).
        #[arg(long)]
        steps: Option<u64>,
        /// Order swapping during training.
        #[arg(long, value_enum)]
        osm: Option<Toggle>,
        /// Swap rate; implies --osm on unless --osm off is given.
        #[arg(long)]
        osm_tau: Option<f64>,
        /// Write checkpoint.json every this many updates.
        #[arg(long, default_value_t = 50)]
        checkpoint_every: u64,
    },
    /// Roll a trained policy out on instances.
    Evaluate {
        #[arg(required = true)]
        instances: Vec<PathBuf>,
        #[arg(long, required = true)]
        checkpoint: PathBuf,
        #[command(flatten)]
        policy: PolicyArgs,
    },
    /// Tabulate makespans and lower-bound gaps of rules and policies.
    Compare {
        #[arg(required = true)]
        instances: Vec<PathBuf>,
        /// Comma-separated rules, e.g. `spt,mwkr`.
        #[arg(long, value_delimiter = ',', value_parser = parse_rule)]
        rule: Vec<RuleKind>,
        /// `NAME=PATH` or `PATH` (named after the file stem); repeatable.
        #[arg(long)]
        checkpoint: Vec<String>,
        /// `name,lower_bound[,known_optimum]` table replacing the bundled one.
        #[arg(long)]
        bounds: Option<PathBuf>,
        #[command(flatten)]
        policy: PolicyArgs,
    },
    /// Apply order swaps to an instance.
    Perturb {
        instance: PathBuf,
        #[arg(long, conflicts_with_all = ["tau", "tp"])]
        swaps: Option<usize>,
        #[arg(long, requires = "tp")]
        tau: Option<f64>,
        /// Training phase (episodes elapsed) used with --tau.
        #[arg(long, requires = "tau")]
        tp: Option<u64>,
    },
    /// Re-execute a manifest and check the outputs are byte-identical.
    Replay {
        manifest: PathBuf,
    },
}

/// Absolute form of an existing path; others are kept verbatim so the error surfaces later.
fn absolute(path: PathBuf) -> PathBuf {
    fs::canonicalize(&path).unwrap_or(path)
}

fn resolve_settings(global: &GlobalArgs) -> Result<Settings, CliError> {
    let mut settings = Settings::default();
    if let Some(path) = &global.config {
        let text = fs::read_to_string(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        settings
            .apply_file(&text)
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    }
    for s in &global.set {
        settings.apply(s).map_err(CliError::config)?;
    }
    Ok(settings)
}

fn resolve(global: &GlobalArgs, sub: Sub) -> Result<Invocation, CliError> {
    let mut settings = resolve_settings(global)?;
    if let Some(seed) = global.seed {
        settings.trainer.seed = seed;
    }
    let command = match sub {
        Sub::Parse { instances } => Command::Parse {
            instances: instances.into_iter().map(absolute).collect(),
        },
        Sub::Solve {
            instance,
            rule,
            checkpoint,
            policy,
        } => {
            let method = match (rule, checkpoint) {
                (Some(r), None) => Method::Rule(r),
                (None, Some(c)) => Method::Checkpoint(absolute(c)),
                _ => return Err(CliError::config("solve needs exactly one of --rule or --checkpoint")),
            };
            Command::Solve {
                instance: absolute(instance),
                method,
                mode: policy.mode,
                episodes: policy.episodes,
            }
        }
        Sub::Train {
            instance,
            resume,
            steps,
            osm,
            osm_tau,
            checkpoint_every,
        } => {
            if let Some(ck) = &resume {
                let stored = commands::load_trainer(ck)?;
                settings = Settings {
                    env: stored.env_config().clone(),
                    trainer: stored.config().clone(),
                    osm: *stored.osm_config(),
                };
                if global.seed.is_some() || steps.is_some() || osm.is_some() || osm_tau.is_some() {
                    log::warn!("settings stored in {} take precedence over command-line overrides", ck.display());
                }
            } else if let Some(steps) = steps {
                settings.trainer.total_steps = steps;
            }
            if resume.is_none() {
                if let Some(tau) = osm_tau {
                    settings.osm.tau = tau;
                    settings.osm.enabled = true;
                }
                if let Some(t) = osm {
                    settings.osm.enabled = t == Toggle::On;
                }
            }
            settings.osm.validate().map_err(|e| CliError::config(e.to_string()))?;
            settings
                .trainer
                .validate()
                .map_err(|e| CliError::config(e.to_string()))?;
            if instance.is_none() && resume.is_none() {
                return Err(CliError::config("train needs an instance or --resume"));
            }
            Command::Train {
                instance: instance.map(absolute),
                resume: resume.map(absolute),
                checkpoint_every,
            }
        }
        Sub::Evaluate {
            instances,
            checkpoint,
            policy,
        } => Command::Evaluate {
            instances: instances.into_iter().map(absolute).collect(),
            checkpoint: absolute(checkpoint),
            mode: policy.mode,
            episodes: policy.episodes,
        },
        Sub::Compare {
            instances,
            rule,
            checkpoint,
            bounds,
            policy,
        } => {
            let mut methods: Vec<NamedMethod> = rule
                .into_iter()
                .map(|r| NamedMethod {
                    name: r.name().to_string(),
                    method: Method::Rule(r),
                })
                .collect();
            for entry in checkpoint {
                let (name, path) = match entry.split_once('=') {
                    Some((n, p)) => (n.to_string(), PathBuf::from(p)),
                    None => (canonical_name(&entry), PathBuf::from(&entry)),
                };
                methods.push(NamedMethod {
                    name,
                    method: Method::Checkpoint(absolute(path)),
                });
            }
            if methods.is_empty() {
                return Err(CliError::config("compare needs at least one --rule or --checkpoint"));
            }
            let mut names: Vec<&str> = methods.iter().map(|m| m.name.as_str()).collect();
            names.sort_unstable();
            if names.windows(2).any(|w| w[0] == w[1]) {
                return Err(CliError::config("compare method names must be distinct"));
            }
            Command::Compare {
                instances: instances.into_iter().map(absolute).collect(),
                methods,
                mode: policy.mode,
                episodes: policy.episodes,
                bounds: bounds.map(absolute),
            }
        }
        Sub::Perturb { instance, swaps, tau, tp } => {
            if swaps.is_none() && tau.is_none() {
                return Err(CliError::config("perturb needs either --swaps or both --tau and --tp"));
            }
            Command::Perturb {
                instance: absolute(instance),
                swaps,
                tau,
                training_phase: tp,
            }
        }
        Sub::Replay { .. } => unreachable!("replay is dispatched before resolution"),
    };
    Ok(Invocation {
        command,
        format: global.format,
        seed: settings.trainer.seed,
        settings,
    })
}

fn now() -> String {
    humantime::format_rfc3339_millis(SystemTime::now()).to_string()
}

/// Executes `inv` into `out` and records the manifest there.
pub fn run_invocation(inv: &Invocation, argv: &[String], out: &Path) -> Result<(RunManifest, i32), CliError> {
    let started_at = now();
    let outcome = execute(inv, out)?;
    let manifest = RunManifest {
        tool: TOOL.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        subcommand: inv.command.name().to_string(),
        argv: argv.to_vec(),
        instances: inv.command.instances(),
        invocation: inv.clone(),
        started_at,
        finished_at: now(),
        exit_code: outcome.exit_code,
        summary: outcome.summary,
        outputs: outcome.outputs,
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    commands::write_atomic(&out.join(MANIFEST_FILE), &text)?;
    Ok((manifest, outcome.exit_code))
}

pub fn read_manifest(path: &Path) -> Result<RunManifest, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

/// Re-executes the manifest at `path` into `out` and compares summaries and outputs.
pub fn replay(path: &Path, argv: &[String], out: &Path) -> Result<i32, CliError> {
    let original = read_manifest(path)?;
    let original_dir = path.parent().unwrap_or(Path::new("."));
    if fs::canonicalize(original_dir).ok() == fs::canonicalize(out).ok() {
        return Err(CliError::config("replay --out must differ from the manifest's directory"));
    }
    let (fresh, _) = run_invocation(&original.invocation, argv, out)?;
    let mut problems = Vec::new();
    if fresh.exit_code != original.exit_code {
        problems.push(format!("exit code {} vs {}", fresh.exit_code, original.exit_code));
    }
    if fresh.summary != original.summary {
        problems.push("summary differs".to_string());
    }
    if fresh.outputs != original.outputs {
        problems.push(format!("output sets differ: {:?} vs {:?}", fresh.outputs, original.outputs));
    }
    let differing = diff_outputs(original_dir, out, &original.outputs).map_err(|e| CliError::io(original_dir, e))?;
    problems.extend(differing.into_iter().map(|f| format!("{f} differs")));
    if problems.is_empty() {
        println!("replay: identical ({} output file(s), summary matches)", original.outputs.len());
        Ok(EXIT_OK)
    } else {
        for p in &problems {
            eprintln!("replay mismatch: {p}");
        }
        Ok(EXIT_INPUT)
    }
}

/// Parses `argv` (including the program name) and runs it; returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<String>,
{
    let argv: Vec<String> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Sub::Replay { manifest } => {
            let out = if cli.global.out.as_os_str() == DEFAULT_OUT {
                manifest.parent().unwrap_or(Path::new(".")).join("replay")
            } else {
                cli.global.out.clone()
            };
            replay(&manifest, &argv, &out)
        }
        sub => resolve(&cli.global, sub).and_then(|inv| run_invocation(&inv, &argv, &cli.global.out).map(|(_, code)| code)),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}
