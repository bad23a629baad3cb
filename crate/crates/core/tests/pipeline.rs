use systematicity::experiment::{
    compare_run_dir, execute, read_history, read_manifest, read_matrix_csv, run, write_dataset, DatasetSpec,
    ExperimentConfig, RunSpec, TrainSpec,
};
use systematicity::metrics::Verdict;
use systematicity::net::{train, LearningRule, RulePreset, TrainConfig};
use systematicity::{build_dataset, Architecture, DatasetParams, Depth, FeatureChoice};

fn small_config() -> ExperimentConfig {
    ExperimentConfig::from_toml_str(
        r#"
name = "pipeline"
seed = 11
repeats = 3

[dataset]
n_x = 2
n_y = 1
k_x = 2
k_y = 1
r = 1.0

[train]
epsilon = 0.005
epochs = 3000
record_every = 25
hidden_width = 24

[[runs]]
label = "dense"
arch = "dense"

[[runs]]
label = "split"
arch = "fully-partitioned"
"#,
    )
    .unwrap()
}

#[test]
fn bundle_round_trips_through_disk() {
    let cfg = small_config();
    let dir = tempfile::tempdir().unwrap();
    let (outcome, manifest) = run(&cfg, dir.path()).unwrap();
    assert_eq!(manifest.runs, ["dense", "split"]);
    assert_eq!(read_manifest(dir.path()).unwrap(), manifest);

    for r in &outcome.runs {
        let disk = compare_run_dir(&dir.path().join(&r.spec.label)).unwrap();
        let mem = r.deviation.as_ref().unwrap();
        assert_eq!(&disk, mem);
        assert_eq!(
            read_history(&dir.path().join(&r.spec.label).join("history.csv")).unwrap(),
            r.mean
        );
        assert!(
            mem.max_mode_deviation() < 5e-2 && mem.max_norm_deviation() < 5e-2,
            "{}",
            mem.to_key_value()
        );
    }
    assert_eq!(outcome.run("split").unwrap().summary.verdict, Verdict::Systematic);
    assert_eq!(outcome.run("dense").unwrap().summary.verdict, Verdict::NonSystematic);

    let d = outcome.dataset.as_ref().unwrap();
    assert_eq!(read_matrix_csv(&dir.path().join("dataset/input.csv")).unwrap(), d.input);
    let written = std::fs::read_to_string(dir.path().join("config.toml")).unwrap();
    assert_eq!(ExperimentConfig::from_toml_str(&written).unwrap(), cfg);
}

#[test]
fn truncated_bundle_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    run(&small_config(), dir.path()).unwrap();
    std::fs::remove_file(dir.path().join("split/predicted.csv")).unwrap();
    assert!(read_manifest(dir.path()).is_err());
    assert!(compare_run_dir(&dir.path().join("split")).is_err());
}

#[test]
fn repeats_average_and_spread() {
    let out = execute(&small_config()).unwrap();
    let r = out.run("dense").unwrap();
    assert_eq!(r.repeats.len(), 3);
    let seeds: Vec<u64> = r.repeats.iter().map(|s| s.seed).collect();
    assert_eq!(seeds, [11, 12, 13]);
    let mean0 = r.repeats.iter().map(|s| s.initial_loss).sum::<f64>() / 3.0;
    assert!((r.mean[0].loss - mean0).abs() < 1e-12);
    assert!(r.std[0].loss > 0.0);
    let spread = r.std.last().unwrap().norms.comp_comp;
    assert!(spread < 1e-3, "{spread}");
}

#[test]
fn stripped_dataset_matches_identity_only_inputs() {
    let cfg = ExperimentConfig {
        dataset: Some(DatasetSpec {
            strip_compositional_input: true,
            ..DatasetSpec::from_params(DatasetParams::new(3, 0, 1, 1, 2.0).unwrap())
        }),
        train: TrainSpec {
            epochs: 200,
            ..TrainSpec::default()
        },
        runs: vec![RunSpec::new("dense", Architecture::Dense)],
        ..small_config()
    };
    let out = execute(&cfg).unwrap();
    let d = out.dataset.unwrap();
    assert_eq!(d.input.nrows(), 8);
    assert!(d.layout.comp_input_rows.is_empty());
}

#[test]
fn dataset_files_match_memory() {
    let d = build_dataset(
        DatasetParams::new(3, 2, 1, 2, 1.5).unwrap(),
        FeatureChoice::SeededRandom,
        4,
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_dataset(&d, dir.path()).unwrap();
    assert_eq!(read_matrix_csv(&dir.path().join("output.csv")).unwrap(), d.output);
}

#[test]
fn non_gd_rules_learn_the_same_map() {
    let d = build_dataset(
        DatasetParams::new(2, 1, 2, 1, 1.0).unwrap(),
        FeatureChoice::DeterministicFirst,
        0,
    )
    .unwrap();
    let cfg = TrainConfig {
        epsilon: 0.01,
        epochs: 4000,
        hidden_width: Some(16),
        record_every: 4000,
        ..TrainConfig::default()
    };
    let final_norms = |rule: LearningRule| {
        let net = systematicity::net::init_network(&d, Architecture::Dense, Depth::Deep, &cfg).unwrap();
        train(net, &d, &rule, &cfg).unwrap().last().norms.to_array()
    };
    let gd = final_norms(LearningRule::gradient_descent());
    for p in [
        RulePreset::AntiHebbian,
        RulePreset::ContrastiveHebbian,
        RulePreset::Hebbian,
        RulePreset::QuasiPredictiveCoding,
    ] {
        let n = final_norms(LearningRule::preset(p));
        for k in 0..4 {
            assert!((n[k] - gd[k]).abs() < 5e-2, "{p}: {n:?} vs {gd:?}");
        }
    }
}
