use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, RunSpec};
use crate::arch::Depth;
use crate::dataset::{numerical_rank, split, Dataset};
use crate::error::{Error, Result};
use crate::metrics::{default_verdict, deviation_of_records, DeviationReport, NormPartition, PredictedCurves, Verdict};
use crate::net::{estimate_pi0, init_network, train_with, Pi0Estimate, Probe, TrainingRecord};
use crate::rank_mc::{enumerate_full_rank_probability, estimate_full_rank_probability, RankTrial, MAX_ENUM_FEATURES};
use crate::theory::ModalBasis;

/// Outcome of one repeat, reduced to what the bundle reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatSummary {
    pub repeat: usize,
    pub seed: u64,
    /// Whether the training columns span the compositional input space.
    /// `None` without a split or without compositional inputs.
    pub train_full_rank: Option<bool>,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub initial_test_loss: Option<f64>,
    pub final_test_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub label: String,
    pub final_loss: f64,
    pub final_test_loss: Option<f64>,
    pub initial_test_loss: Option<f64>,
    /// Mean final test loss over repeats whose training sample has full
    /// compositional rank.
    pub final_test_loss_full_rank: Option<f64>,
    pub full_rank_repeats: Option<usize>,
    pub final_norms: NormPartition,
    pub verdict: Verdict,
    pub max_mode_deviation: Option<f64>,
    pub max_norm_deviation: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub spec: RunSpec,
    /// Per-epoch means over repeats.
    pub mean: Vec<TrainingRecord>,
    /// Per-epoch population standard deviations over repeats.
    pub std: Vec<TrainingRecord>,
    /// Theory curves averaged over repeats; absent for split runs.
    pub predicted: Option<PredictedCurves>,
    pub deviation: Option<DeviationReport>,
    pub repeats: Vec<RepeatSummary>,
    pub summary: RunSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankRow {
    pub n_features: usize,
    pub sample_size: usize,
    pub estimate: f64,
    pub std_error: f64,
    pub exact: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub config: ExperimentConfig,
    pub dataset: Option<Dataset>,
    pub runs: Vec<RunOutcome>,
    pub rank: Vec<RankRow>,
}

struct RepeatResult {
    records: Vec<TrainingRecord>,
    predicted: Option<PredictedCurves>,
    summary: RepeatSummary,
}

/// Runs every configured training run and rank table in memory.
pub fn execute(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    config.validate()?;
    let dataset = match &config.dataset {
        Some(ds) if !config.runs.is_empty() => Some(ds.build(config.seed)?),
        _ => None,
    };
    let runs = match &dataset {
        Some(d) => config
            .runs
            .iter()
            .map(|spec| execute_run(config, d, spec))
            .collect::<Result<Vec<_>>>()?,
        None => Vec::new(),
    };
    let rank = match &config.rank {
        Some(r) => rank_rows(r, config.seed)?,
        None => Vec::new(),
    };
    Ok(ExperimentOutcome {
        config: config.clone(),
        dataset,
        runs,
        rank,
    })
}

fn rank_rows(spec: &super::config::RankSpec, seed: u64) -> Result<Vec<RankRow>> {
    let mut rows = Vec::new();
    for &n in &spec.features {
        for k in spec.sizes_for(n) {
            let est = estimate_full_rank_probability(&RankTrial {
                n_features: n,
                sample_size: k,
                trials: spec.trials,
                seed: seed.wrapping_add((n as u64) << 32 | k as u64),
            })?;
            let exact = if n <= MAX_ENUM_FEATURES {
                Some(enumerate_full_rank_probability(n, k)?)
            } else {
                None
            };
            rows.push(RankRow {
                n_features: n,
                sample_size: k,
                estimate: est.probability,
                std_error: est.std_error,
                exact,
            });
        }
    }
    Ok(rows)
}

fn repeat_seed(base: u64, repeat: usize) -> u64 {
    base.wrapping_add(repeat as u64)
}

fn execute_repeat(config: &ExperimentConfig, d: &Dataset, spec: &RunSpec, repeat: usize) -> Result<RepeatResult> {
    let seed = repeat_seed(config.seed, repeat);
    let cfg = config.train.config(seed);
    let depth = spec.effective_depth();
    let net = init_network(d, spec.arch, depth, &cfg)?;

    let (train_batch, test_batch, full_rank) = match config.split {
        Some(s) => {
            let (tr, te) = split(d, s.n_train, seed)?;
            let n_comp = d.layout.comp_input_rows.len();
            let full_rank = (n_comp > 0).then(|| {
                let omega = d.omega_x().select_columns(&tr);
                numerical_rank(&omega, 1e-8) == n_comp
            });
            (d.batch(&tr), Some(d.batch(&te)), full_rank)
        }
        None => (d.full_batch(), None, None),
    };

    // Theory only describes training on the whole dataset.
    let basis = if config.split.is_none() {
        Some(ModalBasis::new(d, spec.arch)?)
    } else {
        None
    };
    let predicted = match &basis {
        Some(b) => {
            let pi0 = match config.pi0_value {
                Some(v) => vec![v; b.n_modes()],
                None => {
                    let how = match (config.pi0, depth) {
                        (Pi0Estimate::GrowingMode, Depth::Shallow) => Pi0Estimate::Projection,
                        (h, _) => h,
                    };
                    estimate_pi0(&net, b, how, cfg.init_std)?
                }
            };
            let tau = 1.0 / (d.patterns() as f64 * cfg.epsilon);
            let times: Vec<f64> = record_epochs(cfg.epochs, cfg.record_every)
                .into_iter()
                .map(|e| e as f64)
                .collect();
            Some(PredictedCurves::from_modes(b, depth, &pi0, tau, &times)?)
        }
        None => None,
    };

    let probe = Probe {
        test: test_batch.as_ref(),
        basis: basis.as_ref(),
    };
    let history = train_with(net, &train_batch, &spec.learning_rule(), &cfg, probe)?;
    let first = &history.records[0];
    let last = history.last();
    let summary = RepeatSummary {
        repeat,
        seed,
        train_full_rank: full_rank,
        initial_loss: first.loss,
        final_loss: last.loss,
        initial_test_loss: first.test_loss,
        final_test_loss: last.test_loss,
    };
    Ok(RepeatResult {
        records: history.records,
        predicted,
        summary,
    })
}

/// Epochs at which training records a snapshot.
pub fn record_epochs(epochs: usize, every: usize) -> Vec<usize> {
    let mut v: Vec<usize> = (0..=epochs).step_by(every.max(1)).collect();
    if v.last() != Some(&epochs) {
        v.push(epochs);
    }
    v
}

fn run_repeats(config: &ExperimentConfig, d: &Dataset, spec: &RunSpec) -> Result<Vec<RepeatResult>> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..config.repeats)
            .into_par_iter()
            .map(|i| execute_repeat(config, d, spec, i))
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..config.repeats)
            .map(|i| execute_repeat(config, d, spec, i))
            .collect()
    }
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn aggregate(results: &[RepeatResult]) -> (Vec<TrainingRecord>, Vec<TrainingRecord>) {
    let n_rec = results[0].records.len();
    let n_modes = results[0].records[0].modes.len();
    let mut mean = Vec::with_capacity(n_rec);
    let mut std = Vec::with_capacity(n_rec);
    for k in 0..n_rec {
        let recs = || results.iter().map(move |r| &r.records[k]);
        let (lm, ls) = mean_std(recs().map(|r| r.loss));
        let test = recs()
            .all(|r| r.test_loss.is_some())
            .then(|| mean_std(recs().map(|r| r.test_loss.unwrap_or(0.0))));
        let modes: Vec<(f64, f64)> = (0..n_modes).map(|i| mean_std(recs().map(|r| r.modes[i]))).collect();
        let norms: Vec<(f64, f64)> = (0..4)
            .map(|j| mean_std(recs().map(|r| r.norms.to_array()[j])))
            .collect();
        let epoch = results[0].records[k].epoch;
        mean.push(TrainingRecord {
            epoch,
            loss: lm,
            test_loss: test.map(|t| t.0),
            modes: modes.iter().map(|m| m.0).collect(),
            norms: NormPartition::from_array([norms[0].0, norms[1].0, norms[2].0, norms[3].0]),
        });
        std.push(TrainingRecord {
            epoch,
            loss: ls,
            test_loss: test.map(|t| t.1),
            modes: modes.iter().map(|m| m.1).collect(),
            norms: NormPartition::from_array([norms[0].1, norms[1].1, norms[2].1, norms[3].1]),
        });
    }
    (mean, std)
}

fn average_predictions(results: &[RepeatResult]) -> Option<PredictedCurves> {
    let preds: Vec<&PredictedCurves> = results.iter().map(|r| r.predicted.as_ref()).collect::<Option<_>>()?;
    let n = preds.len() as f64;
    let mut out = preds[0].clone();
    let avg = |get: &dyn Fn(&PredictedCurves) -> &Vec<f64>, dst: &mut Vec<f64>| {
        for (k, v) in dst.iter_mut().enumerate() {
            *v = preds.iter().map(|p| get(p)[k]).sum::<f64>() / n;
        }
    };
    for i in 0..out.modes.len() {
        avg(&|p| &p.modes[i], &mut out.modes[i]);
    }
    avg(&|p| &p.norms.comp_comp, &mut out.norms.comp_comp);
    avg(&|p| &p.norms.noncomp_comp, &mut out.norms.noncomp_comp);
    avg(&|p| &p.norms.comp_noncomp, &mut out.norms.comp_noncomp);
    avg(&|p| &p.norms.noncomp_noncomp, &mut out.norms.noncomp_noncomp);
    Some(out)
}

fn execute_run(config: &ExperimentConfig, d: &Dataset, spec: &RunSpec) -> Result<RunOutcome> {
    let results = run_repeats(config, d, spec)?;
    let (mean, std) = aggregate(&results);
    let predicted = average_predictions(&results);
    let deviation = match &predicted {
        Some(p) => Some(deviation_of_records(&mean, p)?),
        None => None,
    };
    let repeats: Vec<RepeatSummary> = results.into_iter().map(|r| r.summary).collect();

    let last = mean
        .last()
        .ok_or_else(|| Error::Consistency("empty training history".into()))?;
    let full: Vec<&RepeatSummary> = repeats.iter().filter(|r| r.train_full_rank == Some(true)).collect();
    let has_rank_flag = repeats.iter().any(|r| r.train_full_rank.is_some());
    let final_test_loss_full_rank =
        (!full.is_empty()).then(|| full.iter().filter_map(|r| r.final_test_loss).sum::<f64>() / full.len() as f64);
    let summary = RunSummary {
        label: spec.label.clone(),
        final_loss: last.loss,
        final_test_loss: last.test_loss,
        initial_test_loss: mean[0].test_loss,
        final_test_loss_full_rank,
        full_rank_repeats: has_rank_flag.then_some(full.len()),
        final_norms: last.norms,
        verdict: default_verdict(&last.norms),
        max_mode_deviation: deviation
            .as_ref()
            .filter(|d| !d.modes.is_empty())
            .map(|d| d.max_mode_deviation()),
        max_norm_deviation: deviation.as_ref().map(|d| d.max_norm_deviation()),
    };
    Ok(RunOutcome {
        spec: spec.clone(),
        mean,
        std,
        predicted,
        deviation,
        repeats,
        summary,
    })
}

impl ExperimentOutcome {
    pub fn run(&self, label: &str) -> Option<&RunOutcome> {
        self.runs.iter().find(|r| r.spec.label == label)
    }
}
