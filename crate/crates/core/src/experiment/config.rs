use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::arch::{Architecture, Depth};
use crate::dataset::{build_dataset, Dataset, DatasetParams, FeatureChoice};
use crate::error::{Error, Result};
use crate::net::{LearningRule, Pi0Estimate, RulePreset, TrainConfig, DEFAULT_ETA, DEFAULT_GAMMA_SMALL};
use crate::rank_mc::MAX_MC_FEATURES;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub n_x: usize,
    pub n_y: usize,
    pub k_x: usize,
    pub k_y: usize,
    pub r: f64,
    #[serde(default)]
    pub feature_choice: FeatureChoice,
    /// Drop the sign-pattern input rows, leaving identity-only inputs over
    /// the same `2^n_x` examples. Requires `n_y = 0`.
    #[serde(default)]
    pub strip_compositional_input: bool,
}

impl DatasetSpec {
    pub fn from_params(p: DatasetParams) -> Self {
        DatasetSpec {
            n_x: p.n_x,
            n_y: p.n_y,
            k_x: p.k_x,
            k_y: p.k_y,
            r: p.r,
            feature_choice: FeatureChoice::DeterministicFirst,
            strip_compositional_input: false,
        }
    }

    pub fn params(&self) -> DatasetParams {
        DatasetParams {
            n_x: self.n_x,
            n_y: self.n_y,
            k_x: self.k_x,
            k_y: self.k_y,
            r: self.r,
        }
    }

    pub fn build(&self, seed: u64) -> Result<Dataset> {
        let d = build_dataset(self.params(), self.feature_choice, seed)?;
        Ok(if self.strip_compositional_input {
            d.without_compositional_input()
        } else {
            d
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSpec {
    pub epsilon: f64,
    pub epochs: usize,
    pub init_std: f64,
    pub record_every: usize,
    pub hidden_width: Option<usize>,
}

impl Default for TrainSpec {
    fn default() -> Self {
        let c = TrainConfig::default();
        TrainSpec {
            epsilon: c.epsilon,
            epochs: c.epochs,
            init_std: c.init_std,
            record_every: c.record_every,
            hidden_width: c.hidden_width,
        }
    }
}

impl TrainSpec {
    pub fn config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            epsilon: self.epsilon,
            epochs: self.epochs,
            init_std: self.init_std,
            seed,
            record_every: self.record_every,
            hidden_width: self.hidden_width,
        }
    }
}

fn default_rule() -> RulePreset {
    RulePreset::GradientDescent
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub label: String,
    pub arch: Architecture,
    #[serde(default)]
    pub depth: Depth,
    #[serde(default = "default_rule")]
    pub rule: RulePreset,
    /// Small `γ` of the Hebbian presets, or `γ` itself for `custom`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// `|η|` of the Hebbian presets, or `η` itself for `custom`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
}

impl RunSpec {
    pub fn new(label: &str, arch: Architecture) -> Self {
        RunSpec {
            label: label.to_string(),
            arch,
            depth: if arch == Architecture::Shallow {
                Depth::Shallow
            } else {
                Depth::Deep
            },
            rule: RulePreset::GradientDescent,
            gamma: None,
            eta: None,
        }
    }

    pub fn with_rule(mut self, rule: RulePreset) -> Self {
        self.rule = rule;
        self
    }

    pub fn learning_rule(&self) -> LearningRule {
        LearningRule::preset_with(
            self.rule,
            self.gamma.unwrap_or(DEFAULT_GAMMA_SMALL),
            self.eta.unwrap_or(DEFAULT_ETA),
        )
    }

    pub fn effective_depth(&self) -> Depth {
        if self.arch == Architecture::Shallow {
            Depth::Shallow
        } else {
            self.depth
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSpec {
    pub n_train: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RankSpec {
    pub features: Vec<usize>,
    pub trials: usize,
    /// Sample sizes to evaluate; every size from 1 to `2^n` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sizes: Option<Vec<usize>>,
}

impl RankSpec {
    pub fn sizes_for(&self, n: usize) -> Vec<usize> {
        match &self.sizes {
            Some(s) => s.iter().copied().filter(|&k| k <= 1 << n).collect(),
            None => (1..=1 << n).collect(),
        }
    }
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub repeats: usize,
    #[serde(default)]
    pub pi0: Pi0Estimate,
    /// Fixed initial strength for every mode, overriding `pi0`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pi0_value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<DatasetSpec>,
    #[serde(default)]
    pub train: TrainSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<SplitSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub runs: Vec<RunSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank: Option<RankSpec>,
}

/// Command-line overrides applied on top of a preset or config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub epochs: Option<usize>,
    pub lr: Option<f64>,
    pub arch: Option<Architecture>,
    pub rule: Option<RulePreset>,
    pub repeats: Option<usize>,
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(s).map_err(|e| Error::config("config", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&s)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config("config", e.to_string()))
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(e) = o.epochs {
            self.train.epochs = e;
        }
        if let Some(lr) = o.lr {
            self.train.epsilon = lr;
        }
        if let Some(r) = o.repeats {
            self.repeats = r;
        }
        for run in &mut self.runs {
            if let Some(a) = o.arch {
                run.arch = a;
                if a == Architecture::Shallow {
                    run.depth = Depth::Shallow;
                }
            }
            if let Some(r) = o.rule {
                run.rule = r;
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.trim().is_empty() {
            return Err(Error::config("name", "must not be empty"));
        }
        if self.repeats == 0 {
            return Err(Error::config("repeats", "must be at least 1"));
        }
        if let Some(v) = self.pi0_value {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config("pi0_value", format!("must be positive, got {v}")));
            }
        }
        if self.runs.is_empty() && self.rank.is_none() {
            return Err(Error::config(
                "runs",
                "nothing to do: give at least one run or a rank table",
            ));
        }

        if !self.runs.is_empty() {
            let ds = self
                .dataset
                .as_ref()
                .ok_or_else(|| Error::config("dataset", "training runs need a dataset"))?;
            let params = ds.params();
            params.validate().map_err(|e| Error::config("dataset", e.to_string()))?;
            if ds.strip_compositional_input && ds.n_y != 0 {
                return Err(Error::config(
                    "dataset.strip_compositional_input",
                    "compositional outputs need compositional inputs (set n_y = 0)",
                ));
            }
            let t = &self.train;
            t.config(0)
                .validate()
                .map_err(|e| Error::config("train", e.to_string()))?;
            if t.epsilon == 0.0 {
                return Err(Error::config("train.epsilon", "must be positive"));
            }
            if let Some(s) = self.split {
                if s.n_train == 0 || s.n_train > params.patterns() {
                    return Err(Error::config(
                        "split.n_train",
                        format!("must lie in 1..={}, got {}", params.patterns(), s.n_train),
                    ));
                }
            }

            let mut labels = HashSet::new();
            for (i, run) in self.runs.iter().enumerate() {
                let field = |f: &str| format!("runs[{i}].{f}");
                let ok_label = !run.label.is_empty()
                    && run
                        .label
                        .chars()
                        .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_');
                if !ok_label {
                    return Err(Error::config(
                        field("label"),
                        format!("`{}` must be a non-empty [A-Za-z0-9_-] name", run.label),
                    ));
                }
                if !labels.insert(run.label.as_str()) {
                    return Err(Error::config(
                        field("label"),
                        format!("duplicate label `{}`", run.label),
                    ));
                }
                run.arch
                    .validate(&params)
                    .map_err(|e| Error::config(field("arch"), e.to_string()))?;
                if run.effective_depth() == Depth::Shallow && run.rule != RulePreset::GradientDescent {
                    return Err(Error::config(field("rule"), "shallow networks only support gd"));
                }
                if run.arch.is_modular() && ds.strip_compositional_input {
                    return Err(Error::config(
                        field("arch"),
                        "modular architectures need compositional inputs",
                    ));
                }
                if run.rule == RulePreset::Custom && (run.gamma.is_none() || run.eta.is_none()) {
                    return Err(Error::config(field("rule"), "custom rules need both gamma and eta"));
                }
            }
        }

        if let Some(r) = &self.rank {
            if r.trials == 0 {
                return Err(Error::config("rank.trials", "must be at least 1"));
            }
            if r.features.is_empty() {
                return Err(Error::config("rank.features", "must list at least one feature count"));
            }
            for &n in &r.features {
                if n == 0 || n > MAX_MC_FEATURES {
                    return Err(Error::config(
                        "rank.features",
                        format!("feature counts must lie in 1..={MAX_MC_FEATURES}, got {n}"),
                    ));
                }
            }
            if let Some(sizes) = &r.sizes {
                if sizes.contains(&0) {
                    return Err(Error::config("rank.sizes", "sample sizes must be positive"));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
name = "demo"
seed = 3
repeats = 2

[dataset]
n_x = 3
n_y = 1
k_x = 1
k_y = 2
r = 1.0

[train]
epsilon = 0.01
epochs = 100

[[runs]]
label = "dense"
arch = "dense"

[[runs]]
label = "imperfect"
arch = "imperfect:1:1"
rule = "hebbian"
eta = 0.01
"#;

    #[test]
    fn parses_and_round_trips() {
        let cfg = ExperimentConfig::from_toml_str(SAMPLE).unwrap();
        assert_eq!(cfg.runs.len(), 2);
        assert_eq!(
            cfg.runs[1].arch,
            Architecture::ImperfectPartition {
                k_y_left: 1,
                k_y_right: 1
            }
        );
        assert_eq!(cfg.runs[1].learning_rule().eta, 0.01);
        assert_eq!(cfg.train.init_std, TrainSpec::default().init_std);
        let again = ExperimentConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn field_level_errors() {
        let bad = SAMPLE.replace("imperfect:1:1", "imperfect:1:3");
        match ExperimentConfig::from_toml_str(&bad) {
            Err(Error::Config { field, .. }) => assert_eq!(field, "runs[1].arch"),
            other => panic!("{other:?}"),
        }
        let bad = SAMPLE.replace("repeats = 2", "repeats = 0");
        assert!(
            matches!(ExperimentConfig::from_toml_str(&bad), Err(Error::Config { field, .. }) if field == "repeats")
        );
        let bad = SAMPLE.replace("epochs = 100", "epochs = 100\nbogus = 1");
        assert!(ExperimentConfig::from_toml_str(&bad).is_err());
    }

    #[test]
    fn overrides_apply_to_every_run() {
        let mut cfg = ExperimentConfig::from_toml_str(SAMPLE).unwrap();
        cfg.apply(&Overrides {
            lr: Some(0.5),
            arch: Some(Architecture::Dense),
            rule: Some(RulePreset::GradientDescent),
            ..Overrides::default()
        });
        assert_eq!(cfg.train.epsilon, 0.5);
        assert!(cfg.runs.iter().all(|r| r.arch == Architecture::Dense));
        cfg.validate().unwrap();
    }
}
