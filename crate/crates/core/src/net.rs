//! Full-batch training of shallow and one-hidden-layer linear networks.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::arch::{Architecture, Depth, ModuleSpec};
use crate::dataset::{rows_of, Batch, BlockLayout, Dataset};
use crate::error::{Error, Result};
use crate::metrics::{partitioned_norms, NormPartition};
use crate::theory::ModalBasis;

/// Loss above which training is aborted.
pub const DIVERGENCE_LOSS: f64 = 1e6;

pub const DEFAULT_GAMMA_SMALL: f64 = 1e-3;
pub const DEFAULT_ETA: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RulePreset {
    GradientDescent,
    AntiHebbian,
    ContrastiveHebbian,
    Hebbian,
    QuasiPredictiveCoding,
    Custom,
}

impl RulePreset {
    pub const NAMED: [RulePreset; 5] = [
        RulePreset::GradientDescent,
        RulePreset::AntiHebbian,
        RulePreset::ContrastiveHebbian,
        RulePreset::Hebbian,
        RulePreset::QuasiPredictiveCoding,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RulePreset::GradientDescent => "gd",
            RulePreset::AntiHebbian => "anti-hebbian",
            RulePreset::ContrastiveHebbian => "contrastive-hebbian",
            RulePreset::Hebbian => "hebbian",
            RulePreset::QuasiPredictiveCoding => "quasi-predictive-coding",
            RulePreset::Custom => "custom",
        }
    }
}

impl fmt::Display for RulePreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RulePreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gd" | "gradient-descent" => Ok(RulePreset::GradientDescent),
            "anti-hebbian" => Ok(RulePreset::AntiHebbian),
            "contrastive-hebbian" => Ok(RulePreset::ContrastiveHebbian),
            "hebbian" => Ok(RulePreset::Hebbian),
            "quasi-predictive-coding" | "qpc" => Ok(RulePreset::QuasiPredictiveCoding),
            "custom" => Ok(RulePreset::Custom),
            _ => Err(Error::config("rule", format!("unrecognised learning rule `{s}`"))),
        }
    }
}

/// A point `(γ, η)` in the two-parameter rule family. `γ` weights the
/// output-correlation term on `W2`, `η` the Hebbian term on `W1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearningRule {
    pub gamma: f64,
    pub eta: f64,
    pub preset: RulePreset,
}

impl Default for LearningRule {
    fn default() -> Self {
        LearningRule::gradient_descent()
    }
}

impl LearningRule {
    pub fn gradient_descent() -> Self {
        LearningRule {
            gamma: 0.0,
            eta: 0.0,
            preset: RulePreset::GradientDescent,
        }
    }

    pub fn preset(p: RulePreset) -> Self {
        Self::preset_with(p, DEFAULT_GAMMA_SMALL, DEFAULT_ETA)
    }

    /// Named preset with explicit values for the small `γ` and for `|η|`.
    /// `Custom` takes them verbatim.
    pub fn preset_with(p: RulePreset, gamma_small: f64, eta_mag: f64) -> Self {
        let (gamma, eta) = match p {
            RulePreset::GradientDescent => (0.0, 0.0),
            RulePreset::AntiHebbian => (gamma_small, -eta_mag.abs()),
            RulePreset::ContrastiveHebbian => (1.0, 0.0),
            RulePreset::Hebbian => (gamma_small, eta_mag.abs()),
            RulePreset::QuasiPredictiveCoding => (-1.0, 0.0),
            RulePreset::Custom => (gamma_small, eta_mag),
        };
        LearningRule { gamma, eta, preset: p }
    }

    pub fn custom(gamma: f64, eta: f64) -> Self {
        Self::preset_with(RulePreset::Custom, gamma, eta)
    }

    pub fn is_gradient_descent(&self) -> bool {
        self.gamma == 0.0 && self.eta == 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epsilon: f64,
    pub epochs: usize,
    pub init_std: f64,
    pub seed: u64,
    pub record_every: usize,
    /// Hidden units per module; `None` uses the smallest admissible width.
    pub hidden_width: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epsilon: 0.005,
            epochs: 2000,
            init_std: 1e-3,
            seed: 0,
            record_every: 1,
            hidden_width: None,
        }
    }
}

impl TrainConfig {
    /// `ε = 0` is accepted and freezes the network.
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::param(
                "epsilon",
                format!("must be finite and >= 0, got {}", self.epsilon),
            ));
        }
        if !(self.init_std > 0.0 && self.init_std.is_finite()) {
            return Err(Error::param(
                "init_std",
                format!("must be positive, got {}", self.init_std),
            ));
        }
        if self.record_every == 0 {
            return Err(Error::param("record_every", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Weights {
    Shallow { w: DMatrix<f64> },
    Deep { w1: DMatrix<f64>, w2: DMatrix<f64> },
}

impl Weights {
    pub fn map(&self) -> DMatrix<f64> {
        match self {
            Weights::Shallow { w } => w.clone(),
            Weights::Deep { w1, w2 } => w2 * w1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Module {
    pub spec: ModuleSpec,
    pub weights: Weights,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    pub arch: Architecture,
    pub depth: Depth,
    /// Zero for shallow networks.
    pub hidden_width: usize,
    pub layout: BlockLayout,
    pub modules: Vec<Module>,
}

/// Smallest hidden width each module of `arch` needs on `d`.
pub fn required_hidden_width(d: &Dataset, arch: Architecture) -> Result<usize> {
    let mods = arch.modules(&d.params, &d.layout)?;
    let need = if arch == Architecture::Dense {
        d.patterns()
    } else {
        mods.iter().map(|m| m.shape.io_rank()).max().unwrap_or(0)
    };
    Ok(need.max(1))
}

pub fn init_network(d: &Dataset, arch: Architecture, depth: Depth, cfg: &TrainConfig) -> Result<NetworkState> {
    cfg.validate()?;
    let specs = arch.modules(&d.params, &d.layout)?;
    let depth = if arch == Architecture::Shallow {
        Depth::Shallow
    } else {
        depth
    };

    let hidden_width = match depth {
        Depth::Shallow => 0,
        Depth::Deep => {
            let need = required_hidden_width(d, arch)?;
            let h = cfg.hidden_width.unwrap_or(need);
            if h < need {
                return Err(Error::HiddenWidth {
                    arch: arch.to_string(),
                    width: h,
                    required: need,
                });
            }
            h
        }
    };

    let normal = Normal::new(0.0, cfg.init_std).map_err(|e| Error::param("init_std", e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut sample = |r: usize, c: usize| DMatrix::from_fn(r, c, |_, _| normal.sample(&mut rng));

    let modules = specs
        .into_iter()
        .map(|spec| {
            let (n_in, n_out) = (spec.input_rows.len(), spec.output_rows.len());
            let weights = match depth {
                Depth::Shallow => Weights::Shallow { w: sample(n_out, n_in) },
                Depth::Deep => {
                    let w1 = sample(hidden_width, n_in);
                    let w2 = sample(n_out, hidden_width);
                    Weights::Deep { w1, w2 }
                }
            };
            Module { spec, weights }
        })
        .collect();

    Ok(NetworkState {
        arch,
        depth,
        hidden_width,
        layout: d.layout.clone(),
        modules,
    })
}

impl NetworkState {
    pub fn input_dim(&self) -> usize {
        self.layout.input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layout.output_dim()
    }

    /// `ŷ = M x` for every column of `input`.
    pub fn predict(&self, input: &DMatrix<f64>) -> DMatrix<f64> {
        effective_map(self) * input
    }

    /// Mean squared error summed over outputs, `‖Y − Ŷ‖²_F / N`.
    pub fn loss(&self, batch: &Batch) -> f64 {
        if batch.is_empty() {
            return 0.0;
        }
        (&batch.output - self.predict(&batch.input)).norm_squared() / batch.len() as f64
    }
}

/// The network's overall linear map, each module's product placed in its
/// block and zeros wherever no module connects.
pub fn effective_map(net: &NetworkState) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(net.output_dim(), net.input_dim());
    for module in &net.modules {
        let s = &module.spec;
        m.view_mut(
            (s.output_rows.start, s.input_rows.start),
            (s.output_rows.len(), s.input_rows.len()),
        )
        .copy_from(&module.weights.map());
    }
    m
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingRecord {
    pub epoch: usize,
    pub loss: f64,
    pub test_loss: Option<f64>,
    /// Empty unless a modal basis probe was supplied.
    pub modes: Vec<f64>,
    pub norms: NormPartition,
}

#[derive(Debug, Clone)]
pub struct TrainingHistory {
    pub records: Vec<TrainingRecord>,
    pub final_state: NetworkState,
}

impl TrainingHistory {
    pub fn epochs(&self) -> Vec<usize> {
        self.records.iter().map(|r| r.epoch).collect()
    }

    pub fn last(&self) -> &TrainingRecord {
        self.records.last().expect("history always holds the initial record")
    }
}

/// Extra observables recorded during training.
#[derive(Debug, Clone, Copy, Default)]
pub struct Probe<'a> {
    pub test: Option<&'a Batch>,
    pub basis: Option<&'a ModalBasis>,
}

/// Trains on the full dataset, recording mode strengths whenever the
/// closed-form SVDs of the network's modules exist.
pub fn train(net: NetworkState, d: &Dataset, rule: &LearningRule, cfg: &TrainConfig) -> Result<TrainingHistory> {
    let basis = ModalBasis::new(d, net.arch).ok();
    let probe = Probe {
        test: None,
        basis: basis.as_ref(),
    };
    train_with(net, &d.full_batch(), rule, cfg, probe)
}

pub fn train_with(
    mut net: NetworkState,
    batch: &Batch,
    rule: &LearningRule,
    cfg: &TrainConfig,
    probe: Probe<'_>,
) -> Result<TrainingHistory> {
    cfg.validate()?;
    if batch.input.nrows() != net.input_dim() || batch.output.nrows() != net.output_dim() {
        return Err(Error::dim(
            "training batch",
            format!("{} inputs / {} outputs", net.input_dim(), net.output_dim()),
            format!("{} inputs / {} outputs", batch.input.nrows(), batch.output.nrows()),
        ));
    }
    if net.depth == Depth::Shallow && !rule.is_gradient_descent() {
        return Err(Error::config(
            "rule",
            format!("{} needs a hidden layer; shallow networks only support gd", rule.preset),
        ));
    }

    let inputs: Vec<DMatrix<f64>> = net
        .modules
        .iter()
        .map(|m| rows_of(&batch.input, &m.spec.input_rows))
        .collect();
    let outputs: Vec<DMatrix<f64>> = net
        .modules
        .iter()
        .map(|m| rows_of(&batch.output, &m.spec.output_rows))
        .collect();
    let yyt: Vec<DMatrix<f64>> = outputs.iter().map(|y| y * y.transpose()).collect();

    let mut records = Vec::with_capacity(cfg.epochs / cfg.record_every + 2);
    records.push(record(&net, 0, batch, probe)?);

    for epoch in 1..=cfg.epochs {
        for (i, module) in net.modules.iter_mut().enumerate() {
            step(&mut module.weights, &inputs[i], &outputs[i], &yyt[i], rule, cfg.epsilon);
        }
        if epoch % cfg.record_every == 0 || epoch == cfg.epochs {
            records.push(record(&net, epoch, batch, probe)?);
        }
    }

    Ok(TrainingHistory {
        records,
        final_state: net,
    })
}

fn record(net: &NetworkState, epoch: usize, batch: &Batch, probe: Probe<'_>) -> Result<TrainingRecord> {
    let map = effective_map(net);
    let loss = if batch.is_empty() {
        0.0
    } else {
        (&batch.output - &map * &batch.input).norm_squared() / batch.len() as f64
    };
    if !loss.is_finite() || loss > DIVERGENCE_LOSS {
        return Err(Error::Divergence { epoch, loss });
    }
    let test_loss = probe
        .test
        .filter(|t| !t.is_empty())
        .map(|t| (&t.output - &map * &t.input).norm_squared() / t.len() as f64);
    let modes = match probe.basis {
        Some(b) => b.mode_values(&map)?,
        None => Vec::new(),
    };
    Ok(TrainingRecord {
        epoch,
        loss,
        test_loss,
        modes,
        norms: partitioned_norms(&map, &net.layout)?,
    })
}

fn step(weights: &mut Weights, x: &DMatrix<f64>, y: &DMatrix<f64>, yyt: &DMatrix<f64>, rule: &LearningRule, eps: f64) {
    match weights {
        Weights::Shallow { w } => {
            let err = y - &*w * x;
            *w += (err * x.transpose()) * eps;
        }
        Weights::Deep { w1, w2 } => {
            let h = &*w1 * x;
            let y_hat = &*w2 * &h;
            let err = y - &y_hat;

            let mut d2 = &err * h.transpose();
            if rule.gamma != 0.0 {
                let corr = yyt - &y_hat * y_hat.transpose();
                d2 += (corr * &*w2) * rule.gamma;
            }

            let mut d1 = w2.transpose() * &err * x.transpose();
            if rule.eta > 0.0 {
                let hxt = &h * x.transpose();
                let decay = &h * h.transpose() * &*w1;
                d1 += (hxt - decay) * rule.eta;
            } else if rule.eta < 0.0 {
                let mut hxt = &h * x.transpose();
                for (n, mut row) in hxt.row_iter_mut().enumerate() {
                    let scale = 1.0 / (1.0 - w1.row(n).norm_squared());
                    row *= scale;
                }
                d1 += hxt * rule.eta;
            }

            *w2 += d2 * eps;
            *w1 += d1 * eps;
        }
    }
}

/// How a per-mode initial strength is read off an initialised network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pi0Estimate {
    /// `diag(Uᵀ M V)` of the initial map.
    Projection,
    /// Strength of the growing combination of the two layers,
    /// `‖W1 v + W2ᵀ u‖² / 4`. Deep networks only.
    #[default]
    GrowingMode,
    /// The expected value of the growing-mode estimate under the init
    /// distribution, `h σ² / 2`, for every mode (zero for shallow nets).
    Expected,
}

/// Per-mode initial strengths for theory overlays. Deep estimates are
/// clamped below at `1e-12`.
pub fn estimate_pi0(net: &NetworkState, basis: &ModalBasis, how: Pi0Estimate, init_std: f64) -> Result<Vec<f64>> {
    let clamp = |v: f64| if net.depth == Depth::Deep { v.max(1e-12) } else { v };
    match how {
        Pi0Estimate::Projection => Ok(basis.mode_values(&effective_map(net))?.into_iter().map(clamp).collect()),
        Pi0Estimate::Expected => {
            let v = match net.depth {
                Depth::Deep => net.hidden_width as f64 * init_std * init_std / 2.0,
                Depth::Shallow => 0.0,
            };
            Ok(vec![clamp(v); basis.n_modes()])
        }
        Pi0Estimate::GrowingMode => {
            if net.modules.len() != basis.modules.len() {
                return Err(Error::dim("pi0 modules", basis.modules.len(), net.modules.len()));
            }
            let mut out = Vec::with_capacity(basis.n_modes());
            for (module, mb) in net.modules.iter().zip(&basis.modules) {
                let Weights::Deep { w1, w2 } = &module.weights else {
                    return Err(Error::param("pi0", "growing-mode estimate needs a hidden layer"));
                };
                let a = w1 * &mb.svd.v_matrix;
                let b = w2.transpose() * &mb.svd.u_matrix;
                out.extend((0..mb.svd.n_modes()).map(|i| clamp((a.column(i) + b.column(i)).norm_squared() / 4.0)));
            }
            Ok(out)
        }
    }
}
