//! Execution of resolved invocations. Every command writes only into `out`.

use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde_json::json;

use super::manifest::{Command, Invocation, Method, NamedMethod, Summary};
use super::report::{format_gap, ComparisonRow, ComparisonTable};
use super::{CliError, EXIT_INPUT, EXIT_NON_FINITE, EXIT_OK};
use crate::dispatch::{dispatch, Rule};
use crate::instance::{canonical_name, parse, BoundSource, Bounds, Format, Instance, LiteratureBounds};
use crate::osm::{episode_seed, perturb_with_swaps, swap_count};
use crate::ppo::{evaluate, EvalMode, PolicyParams, PpoError, Trainer, LOG_HEADER};
use crate::schedule::Schedule;

pub const SCHEDULE_FILE: &str = "schedule.json";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const TRAIN_LOG_FILE: &str = "train_log.csv";
pub const BEST_SCHEDULE_FILE: &str = "best_schedule.json";
pub const EVALUATION_FILE: &str = "evaluation.json";
pub const COMPARISON_TEXT_FILE: &str = "comparison.txt";
pub const COMPARISON_CSV_FILE: &str = "comparison.csv";
pub const PERTURBED_FILE: &str = "perturbed.txt";
pub const SWAPS_FILE: &str = "swaps.txt";

/// What a finished command reports back for its manifest.
#[derive(Debug)]
pub struct Outcome {
    pub exit_code: i32,
    pub summary: Summary,
    pub outputs: Vec<String>,
}

impl Outcome {
    fn ok(summary: Summary, outputs: Vec<String>) -> Self {
        Self {
            exit_code: EXIT_OK,
            summary,
            outputs,
        }
    }
}

/// Tracks the files a command writes; each write replaces the file atomically.
struct OutDir<'a> {
    dir: &'a Path,
    written: Vec<String>,
}

impl<'a> OutDir<'a> {
    fn new(dir: &'a Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Self { dir, written: Vec::new() })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn note(&mut self, name: &str) {
        if !self.written.iter().any(|w| w == name) {
            self.written.push(name.to_string());
        }
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        write_atomic(&self.path(name), contents)?;
        self.note(name);
        Ok(())
    }
}

pub(crate) fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents).map_err(|e| CliError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

pub fn load_instance(path: &Path, format: Format) -> Result<Instance, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse(&text, format)
        .map(|i| i.with_name(canonical_name(&path.to_string_lossy())))
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

pub fn load_policy(path: &Path) -> Result<PolicyParams, CliError> {
    load_trainer(path).map(|t| t.params().clone())
}

pub(crate) fn load_trainer(path: &Path) -> Result<Trainer, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    Trainer::from_checkpoint_str(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn shape_error(instance: &Instance, err: PpoError) -> CliError {
    match err {
        PpoError::PolicyShape { .. } => CliError::config(format!("{}: {err}", instance.name())),
        other => CliError::input(format!("{}: {other}", instance.name())),
    }
}

/// Runs `inv`, writing results into `out`; `Err` means nothing useful was produced.
pub fn execute(inv: &Invocation, out: &Path) -> Result<Outcome, CliError> {
    match &inv.command {
        Command::Parse { instances } => cmd_parse(inv, instances, out),
        Command::Solve {
            instance,
            method,
            mode,
            episodes,
        } => cmd_solve(inv, instance, method, *mode, *episodes, out),
        Command::Train {
            instance,
            resume,
            checkpoint_every,
        } => cmd_train(inv, instance.as_deref(), resume.as_deref(), *checkpoint_every, out),
        Command::Evaluate {
            instances,
            checkpoint,
            mode,
            episodes,
        } => cmd_evaluate(inv, instances, checkpoint, *mode, *episodes, out),
        Command::Compare {
            instances,
            methods,
            mode,
            episodes,
            bounds,
        } => cmd_compare(inv, instances, methods, *mode, *episodes, bounds.as_deref(), out),
        Command::Perturb {
            instance,
            swaps,
            tau,
            training_phase,
        } => cmd_perturb(inv, instance, *swaps, *tau, *training_phase, out),
    }
}

fn cmd_parse(inv: &Invocation, paths: &[PathBuf], out: &Path) -> Result<Outcome, CliError> {
    OutDir::new(out)?;
    let bounds = LiteratureBounds::bundled();
    let mut exit_code = EXIT_OK;
    let mut details = Vec::new();
    let mut last_bound = None;
    for path in paths {
        match load_instance(path, inv.format) {
            Ok(inst) => {
                let b = bounds.resolve(&inst);
                println!(
                    "{}: ok {} {}x{} ({} operations, lower bound {})",
                    path.display(),
                    inst.name(),
                    inst.n_jobs(),
                    inst.n_machines(),
                    inst.n_operations(),
                    b.lower
                );
                last_bound = Some(b.lower);
                details.push(json!({"instance": inst.name(), "ok": true, "n_jobs": inst.n_jobs(),
                    "n_machines": inst.n_machines(), "lower_bound": b.lower}));
            }
            Err(e) => {
                eprintln!("error: {}", e.message);
                exit_code = e.code;
                details.push(json!({"instance": path.display().to_string(), "ok": false, "error": e.message}));
            }
        }
    }
    let summary = Summary {
        lower_bound: if paths.len() == 1 { last_bound } else { None },
        details: json!(details),
        ..Summary::default()
    };
    Ok(Outcome {
        exit_code,
        summary,
        outputs: Vec::new(),
    })
}

fn cmd_solve(
    inv: &Invocation,
    path: &Path,
    method: &Method,
    mode: EvalMode,
    episodes: usize,
    out: &Path,
) -> Result<Outcome, CliError> {
    let inst = load_instance(path, inv.format)?;
    let schedule = match method {
        Method::Rule(kind) => dispatch(&inst, Rule::with_seed(*kind, inv.seed)),
        Method::Checkpoint(ck) => {
            let params = load_policy(ck)?;
            evaluate(&params, &inst, episodes, mode, inv.seed)
                .map_err(|e| shape_error(&inst, e))?
                .schedule
        }
    };
    schedule
        .validate(&inst)
        .map_err(|e| CliError::input(format!("internal error: invalid schedule: {e}")))?;
    let bounds = LiteratureBounds::bundled().resolve(&inst);
    let ms = schedule.makespan();
    println!("makespan: {ms}");
    println!("{}", bound_line(&bounds, ms));
    let mut dir = OutDir::new(out)?;
    dir.write(SCHEDULE_FILE, &schedule.to_record_string())?;
    Ok(Outcome::ok(Summary::with_makespan(ms, bounds.lower), dir.written))
}

fn bound_line(bounds: &Bounds, makespan: crate::instance::Time) -> String {
    format!(
        "lower bound: {} ({}), gap: {}",
        bounds.lower,
        source_name(bounds.source),
        format_gap(bounds.gap(makespan))
    )
}

fn source_name(source: BoundSource) -> &'static str {
    match source {
        BoundSource::Computed => "computed",
        BoundSource::File => "file",
        BoundSource::Literature => "literature",
    }
}

fn cmd_train(
    inv: &Invocation,
    instance: Option<&Path>,
    resume: Option<&Path>,
    checkpoint_every: u64,
    out: &Path,
) -> Result<Outcome, CliError> {
    let s = &inv.settings;
    let mut trainer = match resume {
        Some(ck) => {
            let t = load_trainer(ck)?;
            if let Some(path) = instance {
                let inst = load_instance(path, inv.format)?;
                if inst.jobs() != t.base_instance().jobs() {
                    return Err(CliError::config(format!(
                        "{} does not match the instance stored in {}",
                        path.display(),
                        ck.display()
                    )));
                }
            }
            t
        }
        None => {
            let path = instance.ok_or_else(|| CliError::config("train needs an instance or --resume"))?;
            let inst = load_instance(path, inv.format)?;
            Trainer::new(inst, s.env.clone(), s.trainer.clone(), s.osm).map_err(|e| CliError::config(e.to_string()))?
        }
    };
    let mut dir = OutDir::new(out)?;
    let log_path = dir.path(TRAIN_LOG_FILE);
    let mut log = if resume.is_some() && log_path.exists() {
        OpenOptions::new().append(true).open(&log_path)
    } else {
        File::create(&log_path).and_then(|mut f| writeln!(f, "{LOG_HEADER}").map(|_| f))
    }
    .map_err(|e| CliError::io(&log_path, e))?;
    dir.note(TRAIN_LOG_FILE);

    let every = checkpoint_every.max(1);
    let mut aborted = None;
    while !trainer.is_complete() {
        match trainer.run_update() {
            Ok(rows) => {
                let text: String = rows.iter().map(|r| r.to_csv() + "\n").collect();
                log.write_all(text.as_bytes()).map_err(|e| CliError::io(&log_path, e))?;
                if trainer.updates() % every == 0 {
                    log.flush().map_err(|e| CliError::io(&log_path, e))?;
                    dir.write(CHECKPOINT_FILE, &trainer.checkpoint_string())?;
                    log::info!(
                        "step {}/{} episodes {} best {}",
                        trainer.global_step(),
                        trainer.config().total_steps,
                        trainer.episodes(),
                        trainer.best().map_or_else(|| "-".to_string(), |b| b.makespan.to_string())
                    );
                }
            }
            Err(e @ PpoError::NonFinite { .. }) => {
                aborted = Some(e);
                break;
            }
            Err(e) => return Err(CliError::input(e.to_string())),
        }
    }
    log.flush().map_err(|e| CliError::io(&log_path, e))?;
    // After an abort the trainer already holds the last finite parameters.
    dir.write(CHECKPOINT_FILE, &trainer.checkpoint_string())?;
    if let Some(best) = trainer.best() {
        dir.write(BEST_SCHEDULE_FILE, &best.schedule.to_record_string())?;
    }

    let bounds = LiteratureBounds::bundled().resolve(trainer.base_instance());
    let mut summary = match trainer.best() {
        Some(b) => Summary::with_makespan(b.makespan, bounds.lower),
        None => Summary {
            lower_bound: Some(bounds.lower),
            ..Summary::default()
        },
    };
    summary.details = json!({
        "global_step": trainer.global_step(),
        "episodes": trainer.episodes(),
        "updates": trainer.updates(),
        "tau": trainer.osm_config().tau,
        "osm_enabled": trainer.osm_config().enabled,
    });
    match &summary.makespan {
        Some(ms) => println!("best makespan: {ms}\n{}", bound_line(&bounds, *ms)),
        None => println!("no complete episode within the rollout budget"),
    }
    let exit_code = match aborted {
        Some(e) => {
            eprintln!("error: training aborted: {e}; checkpoint holds the last finite parameters");
            EXIT_NON_FINITE
        }
        None => EXIT_OK,
    };
    Ok(Outcome {
        exit_code,
        summary,
        outputs: dir.written,
    })
}

fn cmd_evaluate(
    inv: &Invocation,
    paths: &[PathBuf],
    checkpoint: &Path,
    mode: EvalMode,
    episodes: usize,
    out: &Path,
) -> Result<Outcome, CliError> {
    let params = load_policy(checkpoint)?;
    let bounds = LiteratureBounds::bundled();
    let mut dir = OutDir::new(out)?;
    let mut results = Vec::new();
    let mut exit_code = EXIT_OK;
    let mut single = None;
    for path in paths {
        let inst = match load_instance(path, inv.format) {
            Ok(i) => i,
            Err(e) => {
                eprintln!("error: {}", e.message);
                exit_code = exit_code.max(e.code);
                continue;
            }
        };
        let r = match evaluate(&params, &inst, episodes, mode, inv.seed) {
            Ok(r) => r,
            Err(e) => {
                let e = shape_error(&inst, e);
                eprintln!("error: {}", e.message);
                exit_code = exit_code.max(e.code);
                continue;
            }
        };
        let b = bounds.resolve(&inst);
        println!(
            "{}: best {} mean {:.2} over {} {} episode(s), lower bound {}, gap {}",
            inst.name(),
            r.best_makespan,
            r.mean_makespan,
            r.makespans.len(),
            mode,
            b.lower,
            format_gap(b.gap(r.best_makespan))
        );
        dir.write(&format!("schedule_{}.json", inst.name()), &r.schedule.to_record_string())?;
        single = Some(Summary::with_makespan(r.best_makespan, b.lower));
        results.push(json!({
            "instance": inst.name(),
            "mode": mode,
            "makespans": r.makespans,
            "best_makespan": r.best_makespan,
            "mean_makespan": r.mean_makespan,
            "lower_bound": b.lower,
        }));
    }
    dir.write(EVALUATION_FILE, &(serde_json::to_string_pretty(&results).expect("json") + "\n"))?;
    let mut summary = match (paths.len(), single) {
        (1, Some(s)) => s,
        _ => Summary::default(),
    };
    summary.details = json!(results);
    Ok(Outcome {
        exit_code,
        summary,
        outputs: dir.written,
    })
}

fn cmd_compare(
    inv: &Invocation,
    paths: &[PathBuf],
    methods: &[NamedMethod],
    mode: EvalMode,
    episodes: usize,
    bounds_file: Option<&Path>,
    out: &Path,
) -> Result<Outcome, CliError> {
    let bounds = match bounds_file {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            LiteratureBounds::parse(&text, BoundSource::File).map_err(CliError::input)?
        }
        None => LiteratureBounds::bundled(),
    };
    let mut exit_code = EXIT_OK;
    let mut fail = |e: CliError| {
        eprintln!("error: {}", e.message);
        exit_code = exit_code.max(e.code);
    };
    let policies: Vec<Option<PolicyParams>> = methods
        .iter()
        .map(|m| match &m.method {
            Method::Rule(_) => None,
            Method::Checkpoint(p) => load_policy(p).map_err(&mut fail).ok(),
        })
        .collect();
    let mut rows = Vec::with_capacity(paths.len());
    for path in paths {
        let inst = match load_instance(path, inv.format) {
            Ok(i) => i,
            Err(e) => {
                fail(e);
                rows.push(ComparisonRow::absent(canonical_name(&path.to_string_lossy()), methods.len()));
                continue;
            }
        };
        let b = bounds.resolve(&inst);
        let mut row = ComparisonRow {
            instance: inst.name().to_string(),
            size: Some((inst.n_jobs(), inst.n_machines())),
            makespans: Vec::with_capacity(methods.len()),
            lower_bound: Some(b.lower),
            bound_source: Some(b.source),
        };
        for (m, policy) in methods.iter().zip(&policies) {
            let cell = match (&m.method, policy) {
                (Method::Rule(kind), _) => Some(dispatch(&inst, Rule::with_seed(*kind, inv.seed)).makespan()),
                (Method::Checkpoint(_), Some(params)) => evaluate(params, &inst, episodes, mode, inv.seed)
                    .map(|r| r.best_makespan)
                    .map_err(|e| fail(shape_error(&inst, e)))
                    .ok(),
                (Method::Checkpoint(_), None) => None,
            };
            row.makespans.push(cell);
        }
        rows.push(row);
    }
    if exit_code == EXIT_OK && rows.iter().any(|r| !r.is_complete()) {
        exit_code = EXIT_INPUT;
    }
    let table = ComparisonTable {
        methods: methods.iter().map(|m| m.name.clone()).collect(),
        rows,
    };
    let text = table.to_text();
    print!("{text}");
    let mut dir = OutDir::new(out)?;
    dir.write(COMPARISON_TEXT_FILE, &text)?;
    dir.write(COMPARISON_CSV_FILE, &table.to_csv())?;
    let summary = Summary {
        details: serde_json::to_value(&table).expect("table serializes"),
        ..Summary::default()
    };
    Ok(Outcome {
        exit_code,
        summary,
        outputs: dir.written,
    })
}

fn cmd_perturb(
    inv: &Invocation,
    path: &Path,
    swaps: Option<usize>,
    tau: Option<f64>,
    training_phase: Option<u64>,
    out: &Path,
) -> Result<Outcome, CliError> {
    let base = load_instance(path, inv.format)?;
    let (n, m) = (base.n_jobs(), base.n_machines());
    let (k, seed) = match (swaps, tau, training_phase) {
        (Some(k), None, None) => (k, inv.seed),
        (None, Some(tau), Some(tp)) => {
            if !(tau.is_finite() && tau >= 0.0) {
                return Err(CliError::config(format!("--tau must be a finite value >= 0, got {tau}")));
            }
            (swap_count(tp, tau, n, m), episode_seed(inv.seed, tp))
        }
        _ => return Err(CliError::config("perturb needs either --swaps or both --tau and --tp")),
    };
    let (perturbed, applied) = perturb_with_swaps(&base, k, seed);
    let text = perturbed.to_standard_string();
    let mut diff = format!("# {} ({n}x{m}), swaps: {}\n", base.name(), applied.len());
    for s in &applied {
        let (a, b) = (base.operation(s.job, s.first), base.operation(s.job, s.second));
        diff.push_str(&format!(
            "job {} positions {} <-> {}: (M{} {}) <-> (M{} {})\n",
            s.job, s.first, s.second, a.machine, a.duration, b.machine, b.duration
        ));
    }
    print!("{text}");
    eprintln!("swaps: {}", applied.len());
    let mut dir = OutDir::new(out)?;
    dir.write(PERTURBED_FILE, &text)?;
    dir.write(SWAPS_FILE, &diff)?;
    let summary = Summary {
        details: json!({ "swaps": applied.len() }),
        ..Summary::default()
    };
    Ok(Outcome::ok(summary, dir.written))
}

/// Reports whether two output directories hold byte-identical copies of `files`.
pub fn diff_outputs(a: &Path, b: &Path, files: &[String]) -> io::Result<Vec<String>> {
    let mut differing = Vec::new();
    for f in files {
        let (x, y) = (fs::read(a.join(f)), fs::read(b.join(f)));
        match (x, y) {
            (Ok(x), Ok(y)) if x == y => {}
            (Err(e), _) if e.kind() != io::ErrorKind::NotFound => return Err(e),
            _ => differing.push(f.clone()),
        }
    }
    Ok(differing)
}

/// Loads a schedule record back for inspection tools and tests.
pub fn schedule_from_record(text: &str) -> Result<Schedule, serde_json::Error> {
    let rec: crate::schedule::ScheduleRecord = serde_json::from_str(text)?;
    Ok(Schedule::new(rec.instance, rec.assignments))
}
