use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use systematicity::experiment::{
    compare_run_dir, list_presets, predicted_csv, preset, read_manifest, run, write_dataset, ExperimentConfig,
    Overrides, RankSpec,
};
use systematicity::metrics::PredictedCurves;
use systematicity::net::RulePreset;
use systematicity::theory::ModalBasis;
use systematicity::{build_dataset, Architecture, DatasetParams, Depth, FeatureChoice};

#[derive(Parser)]
#[command(
    name = "systematicity",
    version,
    about = "Learning dynamics of linear neural modules on compositional datasets"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List the built-in presets.
    Presets,
    /// Write a dataset as input.csv, output.csv and meta.txt.
    GenDataset {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Closed-form mode and norm trajectories as (t, id, value) CSV.
    Theory {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value = "dense")]
        arch: Architecture,
        #[arg(long, default_value_t = 0.002)]
        lr: f64,
        #[arg(long, default_value_t = 7500)]
        epochs: usize,
        #[arg(long, default_value_t = 10)]
        every: usize,
        /// Initial strength of every mode.
        #[arg(long, default_value_t = 1e-3)]
        pi0: f64,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train from a config file or preset and write a bundle.
    Train {
        /// TOML experiment config.
        config: Option<PathBuf>,
        #[command(flatten)]
        exp: ExpArgs,
    },
    /// Run a preset and write its bundle.
    Reproduce {
        #[command(flatten)]
        exp: ExpArgs,
    },
    /// Recompute simulated-vs-predicted deviations of a bundle.
    Compare {
        bundle: PathBuf,
        /// Exit with failure if any deviation exceeds this.
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Full-rank probabilities of sampled sign patterns as CSV.
    Rank {
        #[arg(long, value_delimiter = ',', default_value = "3,4")]
        features: Vec<usize>,
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
        #[arg(long, default_value_t = 5000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct DataArgs {
    #[arg(long, default_value_t = 3)]
    n_x: usize,
    #[arg(long, default_value_t = 1)]
    n_y: usize,
    #[arg(long, default_value_t = 3)]
    k_x: usize,
    #[arg(long, default_value_t = 1)]
    k_y: usize,
    #[arg(long, default_value_t = 1.0)]
    r: f64,
    #[arg(long, default_value = "deterministic-first", value_parser = parse_choice)]
    features: FeatureChoice,
}

impl DataArgs {
    fn params(&self) -> Result<DatasetParams> {
        Ok(DatasetParams::new(self.n_x, self.n_y, self.k_x, self.k_y, self.r)?)
    }
}

fn parse_choice(s: &str) -> Result<FeatureChoice, String> {
    match s {
        "deterministic-first" => Ok(FeatureChoice::DeterministicFirst),
        "seeded-random" => Ok(FeatureChoice::SeededRandom),
        _ => Err(format!("expected deterministic-first or seeded-random, got `{s}`")),
    }
}

#[derive(Args)]
struct ExpArgs {
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    /// Replaces the architecture of every run.
    #[arg(long)]
    arch: Option<Architecture>,
    /// Replaces the learning rule of every run.
    #[arg(long)]
    rule: Option<RulePreset>,
    #[arg(long)]
    repeats: Option<usize>,
}

impl ExpArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            epochs: self.epochs,
            lr: self.lr,
            arch: self.arch,
            rule: self.rule,
            repeats: self.repeats,
        }
    }
}

fn run_experiment(mut cfg: ExperimentConfig, exp: &ExpArgs) -> Result<()> {
    cfg.apply(&exp.overrides());
    cfg.validate()?;
    let (outcome, manifest) = run(&cfg, &exp.out)?;
    println!("wrote {} artifacts to {}", manifest.artifacts.len(), exp.out.display());
    for r in &outcome.runs {
        let s = &r.summary;
        let mut line = format!("{}: final_loss={:.4e} verdict={}", s.label, s.final_loss, s.verdict);
        if let Some(v) = s.final_test_loss {
            line += &format!(" test_loss={v:.4e}");
        }
        if let Some(v) = s.max_mode_deviation {
            line += &format!(" max_mode_dev={v:.3e}");
        }
        if let Some(v) = s.max_norm_deviation {
            line += &format!(" max_norm_dev={v:.3e}");
        }
        println!("{line}");
    }
    Ok(())
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn execute(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Presets => {
            for (name, desc) in list_presets() {
                println!("{name:<16} {desc}");
            }
        }
        Command::GenDataset { data, out, seed } => {
            let d = build_dataset(data.params()?, data.features, seed)?;
            for p in write_dataset(&d, &out)? {
                println!("{}", p.display());
            }
        }
        Command::Theory {
            data,
            arch,
            lr,
            epochs,
            every,
            pi0,
            out,
        } => {
            if lr.is_nan() || lr <= 0.0 || every == 0 {
                bail!("--lr must be positive and --every at least 1");
            }
            let d = build_dataset(data.params()?, data.features, 0)?;
            let basis = ModalBasis::new(&d, arch)?;
            let depth = if arch == Architecture::Shallow {
                Depth::Shallow
            } else {
                Depth::Deep
            };
            let tau = 1.0 / (d.patterns() as f64 * lr);
            let times: Vec<f64> = systematicity::experiment::record_epochs(epochs, every)
                .into_iter()
                .map(|e| e as f64)
                .collect();
            let curves = PredictedCurves::from_modes(&basis, depth, &vec![pi0; basis.n_modes()], tau, &times)?;
            write_or_print(out.as_deref(), &predicted_csv(&curves))?;
        }
        Command::Train { config, exp } => {
            let cfg = match (&config, &exp.preset) {
                (Some(path), None) => ExperimentConfig::from_file(path)?,
                (None, Some(name)) => preset(name)?,
                _ => bail!("give exactly one of a config file or --preset"),
            };
            run_experiment(cfg, &exp)?;
        }
        Command::Reproduce { exp } => {
            let Some(name) = &exp.preset else {
                bail!("--preset is required");
            };
            run_experiment(preset(name)?, &exp)?;
        }
        Command::Compare { bundle, tol } => {
            let manifest = read_manifest(&bundle)?;
            let mut ok = true;
            let mut compared = 0;
            for label in &manifest.runs {
                let dir = bundle.join(label);
                if !dir.join("predicted.csv").is_file() {
                    continue;
                }
                compared += 1;
                let report = compare_run_dir(&dir)?;
                println!("[{label}]");
                print!("{}", report.to_key_value());
                if let Some(t) = tol {
                    let worst = report.max_mode_deviation().max(report.max_norm_deviation());
                    if worst.is_nan() || worst >= t {
                        println!("{label}: deviation {worst:.3e} exceeds {t:.3e}");
                        ok = false;
                    }
                }
            }
            if compared == 0 {
                bail!("bundle has no runs with predictions");
            }
            return Ok(ok);
        }
        Command::Rank {
            features,
            sizes,
            trials,
            seed,
            out,
        } => {
            let cfg = ExperimentConfig {
                name: "rank".into(),
                seed,
                rank: Some(RankSpec {
                    features,
                    trials,
                    sizes,
                }),
                ..preset("rank-tables")?
            };
            cfg.validate()?;
            let outcome = systematicity::experiment::execute(&cfg)?;
            let mut text = String::from("n_features,sample_size,estimate,std_error,exact_if_available\n");
            for r in &outcome.rank {
                let exact = r.exact.map(|v| v.to_string()).unwrap_or_default();
                text += &format!(
                    "{},{},{},{},{}\n",
                    r.n_features, r.sample_size, r.estimate, r.std_error, exact
                );
            }
            write_or_print(out.as_deref(), &text)?;
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
