use jobshop::dispatch::brute_force_optimum;
use jobshop::instance::generate_random;
use jobshop::ppo::{evaluate, train, EvalMode, LogRow, PpoError, Trainer, TrainerConfig};
use jobshop::{EnvConfig, Instance, OsmConfig};

fn small_config(total_steps: u64, seed: u64) -> TrainerConfig {
    TrainerConfig {
        total_steps,
        seed,
        hidden: vec![32, 32],
        ..TrainerConfig::default()
    }
}

fn inst(n: usize, m: usize, seed: u64) -> Instance {
    generate_random(n, m, 1..=10, seed).unwrap()
}

fn run(instance: &Instance, cfg: &TrainerConfig, osm: &OsmConfig) -> Vec<LogRow> {
    train(instance, &EnvConfig::default(), cfg, osm).unwrap().log
}

#[test]
fn seeded_runs_are_identical() {
    let i = inst(3, 3, 1);
    let cfg = small_config(3_000, 7);
    let a = run(&i, &cfg, &OsmConfig::with_tau(0.5));
    let b = run(&i, &cfg, &OsmConfig::with_tau(0.5));
    assert!(!a.is_empty());
    assert_eq!(a, b);
}

#[test]
fn zero_tau_matches_disabled_osm() {
    let i = inst(3, 3, 2);
    let cfg = small_config(3_000, 3);
    let off = train(&i, &EnvConfig::default(), &cfg, &OsmConfig::disabled()).unwrap();
    let zero = train(&i, &EnvConfig::default(), &cfg, &OsmConfig::with_tau(0.0)).unwrap();
    assert_eq!(off.log, zero.log);
    assert_eq!(off.params, zero.params);
}

#[test]
fn osm_changes_training_when_active() {
    let i = inst(3, 3, 2);
    let cfg = small_config(3_000, 3);
    let off = run(&i, &cfg, &OsmConfig::disabled());
    let on = run(&i, &cfg, &OsmConfig::with_tau(1.0));
    assert_ne!(off, on);
}

#[test]
fn checkpoint_resume_is_bit_compatible() {
    let i = inst(3, 3, 4);
    let cfg = small_config(2_560, 11);
    let osm = OsmConfig::with_tau(0.2);

    let mut straight = Trainer::new(i.clone(), EnvConfig::default(), cfg.clone(), osm).unwrap();
    let mut full_log = Vec::new();
    straight.run(|r| full_log.extend_from_slice(r)).unwrap();

    let mut first = Trainer::new(i, EnvConfig::default(), cfg, osm).unwrap();
    let mut log = Vec::new();
    for _ in 0..17 {
        log.extend(first.run_update().unwrap());
    }
    let text = first.checkpoint_string();
    drop(first);
    let mut resumed = Trainer::from_checkpoint_str(&text).unwrap();
    resumed.run(|r| log.extend_from_slice(r)).unwrap();

    assert_eq!(log, full_log);
    assert_eq!(resumed.params(), straight.params());
    assert_eq!(resumed.checkpoint_string(), straight.checkpoint_string());
}

#[test]
fn rejects_foreign_checkpoints() {
    assert!(matches!(Trainer::from_checkpoint_str("{}"), Err(PpoError::Checkpoint(_))));
    let t = Trainer::new(inst(2, 2, 0), EnvConfig::default(), small_config(64, 0), OsmConfig::disabled()).unwrap();
    let bumped = t.checkpoint_string().replace("\"version\":1", "\"version\":99");
    assert!(matches!(Trainer::from_checkpoint_str(&bumped), Err(PpoError::Checkpoint(_))));
}

#[test]
fn exploding_learning_rate_aborts_with_last_finite_params() {
    let i = inst(3, 3, 5);
    let cfg = TrainerConfig {
        lr_start: 1e300,
        lr_end: 1e300,
        max_grad_norm: 1e300,
        ..small_config(50_000, 1)
    };
    let mut t = Trainer::new(i, EnvConfig::default(), cfg, OsmConfig::disabled()).unwrap();
    let err = loop {
        match t.run_update() {
            Ok(_) => assert!(!t.is_complete(), "training never diverged"),
            Err(e) => break e,
        }
    };
    assert!(matches!(err, PpoError::NonFinite { .. }), "{err}");
    assert!(t.params().is_finite());
}

#[test]
fn invalid_configs_are_rejected() {
    let i = inst(2, 2, 0);
    for cfg in [
        TrainerConfig { clip_epsilon: 1.0, ..TrainerConfig::default() },
        TrainerConfig { gamma: 0.0, ..TrainerConfig::default() },
        TrainerConfig { lr_end: 1.0, ..TrainerConfig::default() },
        TrainerConfig { n_envs: 3, n_steps: Some(64), ..TrainerConfig::default() },
    ] {
        assert!(matches!(
            Trainer::new(i.clone(), EnvConfig::default(), cfg, OsmConfig::disabled()),
            Err(PpoError::InvalidConfig { .. })
        ));
    }
}

#[test]
fn parallel_envs_fill_the_same_horizon() {
    let i = inst(3, 3, 6);
    let cfg = TrainerConfig {
        n_envs: 4,
        n_steps: Some(64),
        ..small_config(640, 2)
    };
    let mut t = Trainer::new(i, EnvConfig::default(), cfg, OsmConfig::disabled()).unwrap();
    t.run(|_| {}).unwrap();
    assert_eq!(t.global_step(), 640);
    assert_eq!(t.updates(), 10);
}

#[test]
fn metrics_respect_clip_identity_and_bounds() {
    let i = inst(3, 3, 8);
    let mut t = Trainer::new(i, EnvConfig::default(), small_config(6_400, 4), OsmConfig::disabled()).unwrap();
    while !t.is_complete() {
        t.run_update().unwrap();
        let m = t.last_metrics().unwrap();
        assert!(m.max_bound_excess <= 0.0);
        assert!(m.initial_objective_gap <= 1e-12, "{}", m.initial_objective_gap);
        assert_eq!(m.initial_clip_fraction, 0.0);
    }
}

#[test]
fn greedy_evaluation_is_deterministic_and_shape_checked() {
    let i = inst(3, 3, 9);
    let out = train(&i, &EnvConfig::default(), &small_config(1_000, 0), &OsmConfig::disabled()).unwrap();
    let a = evaluate(&out.params, &i, 1, EvalMode::Greedy, 0).unwrap();
    let b = evaluate(&out.params, &i, 1, EvalMode::Greedy, 1).unwrap();
    assert_eq!(a, b);
    a.schedule.validate(&i).unwrap();
    let s = evaluate(&out.params, &i, 20, EvalMode::Sample, 3).unwrap();
    assert_eq!(s.makespans.len(), 20);
    assert!(s.best_makespan as f64 <= s.mean_makespan);
    assert!(matches!(
        evaluate(&out.params, &inst(4, 3, 0), 1, EvalMode::Greedy, 0),
        Err(PpoError::PolicyShape { .. })
    ));
}

#[test]
fn tiny_instance_reaches_the_optimum() {
    let i = inst(2, 2, 12);
    let (opt, _) = brute_force_optimum(&i, 12).unwrap();
    let out = train(&i, &EnvConfig::default(), &small_config(5_000, 0), &OsmConfig::disabled()).unwrap();
    assert_eq!(out.best.unwrap().makespan, opt);
    assert!(out.log.iter().filter_map(|r| r.makespan).all(|m| m >= opt));
}
