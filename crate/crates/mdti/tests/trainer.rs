use mdti::config::TrainConfig;
use mdti::{checkpoint, trainer};
use mdti_traj::{generate_synthetic, split_dataset, GeneratorConfig, GridSpec, RoadNetwork,
    TrajectorySample};

fn desk_config() -> TrainConfig {
    TrainConfig {
        batch_size: 8,
        epochs: 3,
        lr: 1e-3,
        warmup_epochs: 1,
        min_lr: 1e-5,
        dim: 32,
        dropout: 0.0,
        t_segments: 8,
        k_patterns: 4,
        seed: 5,
        gat_hidden: 16,
        heads: 2,
        road_layers: 1,
        d_lm: 32,
        generator: GeneratorConfig {
            trips: 48,
            grid_rows: 16,
            grid_cols: 16,
            lattice_rows: 4,
            lattice_cols: 4,
            min_segments: 3,
            max_segments: 6,
            ..GeneratorConfig::default()
        },
        ..TrainConfig::default()
    }
}

fn desk_data(cfg: &TrainConfig) -> (Vec<TrajectorySample>, Vec<TrajectorySample>, Vec<TrajectorySample>, RoadNetwork, GridSpec) {
    let (samples, net, spec) = generate_synthetic(&cfg.generator, cfg.seed).unwrap();
    let (train, val, test) = split_dataset(samples, (0.6, 0.2, 0.2), cfg.seed).unwrap();
    (train, val, test, net, spec)
}

#[test]
fn pretrain_losses_decrease() {
    let cfg = desk_config();
    let (train, val, _, net, spec) = desk_data(&cfg);
    let (_, log) = trainer::pretrain(&cfg, &train, &val, &net, &spec, None).unwrap();
    assert_eq!(log.epochs.len(), cfg.epochs);
    let first = &log.epochs[0];
    let last = log.epochs.last().unwrap();
    assert!(
        last.train_total < first.train_total,
        "total {} -> {}",
        first.train_total,
        last.train_total
    );
    for e in &log.epochs {
        assert!(e.train_cl.is_finite() && e.train_mlm.is_finite());
        assert!(e.val_total.is_finite());
    }
}

#[test]
fn same_seed_reproduces_parameters_bitwise() {
    let cfg = desk_config();
    let (train, val, _, net, spec) = desk_data(&cfg);
    let (m1, log1) = trainer::pretrain(&cfg, &train, &val, &net, &spec, None).unwrap();
    let (m2, log2) = trainer::pretrain(&cfg, &train, &val, &net, &spec, None).unwrap();
    for ((n1, p1), (n2, p2)) in m1.params.iter().zip(m2.params.iter()) {
        assert_eq!(n1, n2);
        for (a, b) in p1.value.data().iter().zip(p2.value.data()) {
            assert_eq!(a.to_bits(), b.to_bits(), "param {n1} differs");
        }
    }
    assert_eq!(
        serde_json::to_string(&log1).unwrap(),
        serde_json::to_string(&log2).unwrap()
    );
}

#[test]
fn single_objective_ablations_train() {
    let (train, val, _, net, spec) = desk_data(&desk_config());
    for weights in [(1.0, 0.0), (0.0, 1.0)] {
        let cfg = TrainConfig {
            loss_weights: weights,
            epochs: 1,
            warmup_epochs: 0,
            ..desk_config()
        };
        let (_, log) = trainer::pretrain(&cfg, &train, &val, &net, &spec, None).unwrap();
        assert!(log.epochs[0].train_total.is_finite(), "weights {weights:?}");
    }
}

#[test]
fn best_checkpoint_written_and_loadable() {
    let cfg = desk_config();
    let (train, val, _, net, spec) = desk_data(&cfg);
    let dir = tempfile::tempdir().unwrap();
    trainer::pretrain(&cfg, &train, &val, &net, &spec, Some(dir.path())).unwrap();
    let (model, loaded_cfg) = checkpoint::load(dir.path()).unwrap();
    assert_eq!(loaded_cfg, cfg);
    assert_eq!(model.vocab, net.segments.len());
}

#[test]
fn frozen_finetune_touches_only_the_head() {
    let cfg = TrainConfig {
        epochs: 2,
        warmup_epochs: 1,
        ..desk_config()
    };
    let (train, val, _, net, spec) = desk_data(&cfg);
    let (mut model, _) = trainer::pretrain(&cfg, &train, &val, &net, &spec, None).unwrap();
    let before: Vec<(String, Vec<u64>)> = model
        .params
        .iter()
        .map(|(n, p)| (n.clone(), p.value.data().iter().map(|v| v.to_bits()).collect()))
        .collect();
    trainer::finetune_tte(&mut model, &cfg, &train, &net, &spec, true).unwrap();
    let mut head_changed = false;
    for (name, bits) in &before {
        let now: Vec<u64> = model
            .params
            .get(name)
            .unwrap()
            .value
            .data()
            .iter()
            .map(|v| v.to_bits())
            .collect();
        if name.starts_with("tte.") {
            head_changed |= &now != bits;
        } else {
            assert_eq!(&now, bits, "frozen param {name} moved");
        }
    }
    assert!(head_changed);
}

#[test]
fn finetune_mae_decreases() {
    let cfg = TrainConfig {
        epochs: 4,
        warmup_epochs: 1,
        lr: 3e-3,
        ..desk_config()
    };
    let (train, val, _, net, spec) = desk_data(&cfg);
    let (mut model, _) = trainer::pretrain(
        &TrainConfig { epochs: 1, warmup_epochs: 0, ..cfg.clone() },
        &train,
        &val,
        &net,
        &spec,
        None,
    )
    .unwrap();
    let maes = trainer::finetune_tte(&mut model, &cfg, &train, &net, &spec, false).unwrap();
    assert!(
        maes.last().unwrap() < &maes[0],
        "mae {} -> {}",
        maes[0],
        maes.last().unwrap()
    );
}

#[test]
fn evaluate_reports_metrics_and_hash() {
    let cfg = TrainConfig { epochs: 1, warmup_epochs: 0, ..desk_config() };
    let (train, val, test, net, spec) = desk_data(&cfg);
    let (model, _) = trainer::pretrain(&cfg, &train, &val, &net, &spec, None).unwrap();
    let report = trainer::evaluate(&model, &cfg, &test, &net, &spec, "test").unwrap();
    assert_eq!(report.n, test.len());
    assert_eq!(report.config_hash, cfg.hash());
    assert!(report.mae.is_finite() && report.rmse >= report.mae && report.mape > 0.0);
    // JSON round-trip is exact
    let json = serde_json::to_string(&report).unwrap();
    let back: trainer::EvalReport = serde_json::from_str(&json).unwrap();
    assert_eq!(back, report);
}

#[test]
fn evaluate_rejects_empty_split() {
    let cfg = TrainConfig { epochs: 1, warmup_epochs: 0, ..desk_config() };
    let (train, val, _, net, spec) = desk_data(&cfg);
    let (model, _) = trainer::pretrain(&cfg, &train, &val, &net, &spec, None).unwrap();
    assert!(trainer::evaluate(&model, &cfg, &[], &net, &spec, "test").is_err());
}

#[test]
fn truncation_keeps_prefix_and_label() {
    let cfg = desk_config();
    let (train, ..) = desk_data(&cfg);
    let long = train
        .iter()
        .max_by_key(|s| s.gps.points.len())
        .unwrap();
    let n = 6;
    let cut = trainer::truncate_sample(long, n);
    assert_eq!(cut.gps.points.len(), n.min(long.gps.points.len()));
    assert_eq!(cut.grid.cells.len(), cut.gps.points.len());
    assert_eq!(cut.gps.points, long.gps.points[..cut.gps.points.len()]);
    assert_eq!(cut.travel_time, long.travel_time);
    let cutoff = cut.gps.points.last().unwrap().t;
    assert!(cut.road.timestamps.iter().all(|&t| t <= cutoff));
    assert!(!cut.road.segments.is_empty());
    assert_eq!(cut.road.segments, long.road.segments[..cut.road.segments.len()]);
}

#[test]
fn truncation_passes_short_samples_through() {
    let cfg = desk_config();
    let (train, ..) = desk_data(&cfg);
    let s = &train[0];
    let same = trainer::truncate_sample(s, s.gps.points.len() + 10);
    assert_eq!(&same, s);
}
