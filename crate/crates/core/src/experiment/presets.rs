//! Named, ready-to-run experiment configurations.

use super::config::{DatasetSpec, ExperimentConfig, RankSpec, RunSpec, SplitSpec, TrainSpec};
use crate::arch::Architecture;
use crate::dataset::DatasetParams;
use crate::error::{Error, Result};
use crate::net::{Pi0Estimate, RulePreset};

pub const PRESETS: &[(&str, &str)] = &[
    (
        "fig3",
        "deep and shallow dense networks on (n_x, n_y, k_x, k_y, r) = (3, 1, 3, 1, 1)",
    ),
    (
        "fig5-split",
        "dense, output-partitioned and fully-partitioned deep networks on the fig3 dataset",
    ),
    ("appendixA-A", "3:5 train/test split on (3, 2, 0, 0, 0), 50 repeats"),
    (
        "appendixA-B",
        "3:5 train/test split on identity-only inputs over 8 examples (k_x = k_y = 1, r = 2), 50 repeats",
    ),
    ("appendixA-C", "3:5 train/test split on (3, 2, 1, 1, 2), 50 repeats"),
    ("appendixA-D", "3:5 train/test split on (3, 0, 1, 1, 2), 50 repeats"),
    ("appendixA-E", "3:5 train/test split on (3, 2, 1, 0, 2), 50 repeats"),
    (
        "appendixG-sweep",
        "imperfect partitions left-k for k = 0..3 on (3, 1, 3, 3, 1)",
    ),
    (
        "appendixH",
        "gradient descent and four Hebbian-family rules on the fig3 dataset",
    ),
    (
        "rank-tables",
        "Monte-Carlo and exact full-rank probabilities for 3 and 4 features",
    ),
];

pub fn list_presets() -> Vec<(&'static str, &'static str)> {
    PRESETS.to_vec()
}

fn params(n_x: usize, n_y: usize, k_x: usize, k_y: usize, r: f64) -> DatasetParams {
    DatasetParams { n_x, n_y, k_x, k_y, r }
}

fn base(name: &str, description: &str) -> ExperimentConfig {
    ExperimentConfig {
        name: name.to_string(),
        description: description.to_string(),
        seed: 0,
        repeats: 1,
        pi0: Pi0Estimate::GrowingMode,
        pi0_value: None,
        dataset: None,
        train: TrainSpec::default(),
        split: None,
        runs: Vec::new(),
        rank: None,
    }
}

fn theory_train() -> TrainSpec {
    TrainSpec {
        epsilon: 0.002,
        epochs: 7500,
        init_std: 1e-3,
        record_every: 10,
        hidden_width: Some(100),
    }
}

fn appendix_a(name: &str, description: &str, p: DatasetParams, strip: bool) -> ExperimentConfig {
    let mut c = base(name, description);
    c.repeats = 50;
    let mut ds = DatasetSpec::from_params(p);
    ds.strip_compositional_input = strip;
    c.dataset = Some(ds);
    c.train = TrainSpec {
        epsilon: 0.02,
        epochs: 1500,
        init_std: 1e-3,
        record_every: 5,
        hidden_width: Some(50),
    };
    c.split = Some(SplitSpec { n_train: 3 });
    c.runs = vec![RunSpec::new("dense", Architecture::Dense)];
    c
}

/// Looks up a preset by name. `appendixA-datasetA` style names are accepted.
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let canonical = match name.strip_prefix("appendixA-dataset") {
        Some(rest) => format!("appendixA-{rest}"),
        None => name.to_string(),
    };
    let description = PRESETS
        .iter()
        .find(|(n, _)| *n == canonical)
        .map(|(_, d)| *d)
        .ok_or_else(|| Error::UnknownPreset(name.to_string()))?;
    let name = canonical.as_str();
    let cfg = match name {
        "fig3" => {
            let mut c = base(name, description);
            c.dataset = Some(DatasetSpec::from_params(DatasetParams::fig3()));
            c.train = theory_train();
            c.runs = vec![
                RunSpec::new("deep", Architecture::Dense),
                RunSpec::new("shallow", Architecture::Shallow),
            ];
            c
        }
        "fig5-split" => {
            let mut c = base(name, description);
            c.dataset = Some(DatasetSpec::from_params(DatasetParams::fig3()));
            c.train = theory_train();
            c.runs = vec![
                RunSpec::new("dense", Architecture::Dense),
                RunSpec::new("output-partitioned", Architecture::OutputPartitioned),
                RunSpec::new("fully-partitioned", Architecture::FullyPartitioned),
            ];
            c
        }
        "appendixA-A" => appendix_a(name, description, params(3, 2, 0, 0, 0.0), false),
        "appendixA-B" => appendix_a(name, description, params(3, 0, 1, 1, 2.0), true),
        "appendixA-C" => appendix_a(name, description, params(3, 2, 1, 1, 2.0), false),
        "appendixA-D" => appendix_a(name, description, params(3, 0, 1, 1, 2.0), false),
        "appendixA-E" => appendix_a(name, description, params(3, 2, 1, 0, 2.0), false),
        "appendixG-sweep" => {
            let mut c = base(name, description);
            c.dataset = Some(DatasetSpec::from_params(params(3, 1, 3, 3, 1.0)));
            c.train = theory_train();
            c.runs = (0..=3)
                .map(|k| {
                    RunSpec::new(
                        &format!("left-{k}"),
                        Architecture::ImperfectPartition {
                            k_y_left: k,
                            k_y_right: 3 - k,
                        },
                    )
                })
                .collect();
            c
        }
        "appendixH" => {
            let mut c = base(name, description);
            c.dataset = Some(DatasetSpec::from_params(DatasetParams::fig3()));
            c.train = theory_train();
            c.runs = [
                RulePreset::GradientDescent,
                RulePreset::AntiHebbian,
                RulePreset::ContrastiveHebbian,
                RulePreset::Hebbian,
                RulePreset::QuasiPredictiveCoding,
            ]
            .into_iter()
            .map(|r| RunSpec::new(r.name(), Architecture::Dense).with_rule(r))
            .collect();
            c
        }
        "rank-tables" => {
            let mut c = base(name, description);
            c.rank = Some(RankSpec {
                features: vec![3, 4],
                trials: 5000,
                sizes: None,
            });
            c
        }
        _ => unreachable!("preset table and match arms disagree"),
    };
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_listed_preset_builds() {
        for (name, _) in list_presets() {
            let c = preset(name).unwrap();
            assert_eq!(c.name, name);
            let back = ExperimentConfig::from_toml_str(&c.to_toml_string().unwrap()).unwrap();
            assert_eq!(back, c);
        }
    }

    #[test]
    fn aliases_and_unknown_names() {
        assert_eq!(preset("appendixA-datasetA").unwrap().name, "appendixA-A");
        assert!(matches!(preset("fig9"), Err(Error::UnknownPreset(_))));
    }

    #[test]
    fn appendix_a_settings() {
        let c = preset("appendixA-A").unwrap();
        assert_eq!(c.repeats, 50);
        assert_eq!(c.train.epsilon, 0.02);
        assert_eq!(c.train.init_std, 1e-3);
        assert_eq!(c.train.hidden_width, Some(50));
        assert_eq!(c.split, Some(SplitSpec { n_train: 3 }));
    }
}
