//! Observables extracted from network maps and comparisons against theory.

use std::fmt::{self, Write as _};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::arch::Depth;
use crate::dataset::{BlockLayout, Dataset};
use crate::error::{Error, Result};
use crate::net::{TrainingHistory, TrainingRecord};
use crate::theory::{deep_mode, shallow_mode, AnalyticSVD, ModalBasis, NormCurves};

/// Frobenius norms of the four blocks of an input-output map.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NormPartition {
    /// Compositional input to compositional output.
    pub comp_comp: f64,
    /// Non-compositional input to compositional output.
    pub noncomp_comp: f64,
    /// Compositional input to non-compositional output.
    pub comp_noncomp: f64,
    pub noncomp_noncomp: f64,
}

impl NormPartition {
    pub fn to_array(self) -> [f64; 4] {
        [
            self.comp_comp,
            self.noncomp_comp,
            self.comp_noncomp,
            self.noncomp_noncomp,
        ]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        NormPartition {
            comp_comp: a[0],
            noncomp_comp: a[1],
            comp_noncomp: a[2],
            noncomp_noncomp: a[3],
        }
    }

    /// Frobenius norm of the whole map.
    pub fn total(&self) -> f64 {
        self.to_array().iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

fn block_norm(m: &DMatrix<f64>, rows: &std::ops::Range<usize>, cols: &std::ops::Range<usize>) -> f64 {
    if rows.is_empty() || cols.is_empty() {
        return 0.0;
    }
    m.view((rows.start, cols.start), (rows.len(), cols.len())).norm()
}

pub fn partitioned_norms(map: &DMatrix<f64>, layout: &BlockLayout) -> Result<NormPartition> {
    let want = (layout.output_dim(), layout.input_dim());
    if map.shape() != want {
        return Err(Error::dim(
            "partitioned_norms",
            format!("{want:?}"),
            format!("{:?}", map.shape()),
        ));
    }
    Ok(NormPartition {
        comp_comp: block_norm(map, &layout.comp_output_rows, &layout.comp_input_rows),
        noncomp_comp: block_norm(map, &layout.comp_output_rows, &layout.noncomp_input_rows),
        comp_noncomp: block_norm(map, &layout.noncomp_output_rows, &layout.comp_input_rows),
        noncomp_noncomp: block_norm(map, &layout.noncomp_output_rows, &layout.noncomp_input_rows),
    })
}

/// Strength of `map` along each analytic singular pair: `diag(Uᵀ M V)`.
pub fn empirical_mode_values(map: &DMatrix<f64>, svd: &AnalyticSVD) -> Result<Vec<f64>> {
    let want = (svd.u_matrix.nrows(), svd.v_matrix.nrows());
    if map.shape() != want {
        return Err(Error::dim(
            "empirical_mode_values",
            format!("{want:?}"),
            format!("{:?}", map.shape()),
        ));
    }
    let mv = map * &svd.v_matrix;
    Ok((0..svd.n_modes())
        .map(|i| svd.u_matrix.column(i).dot(&mv.column(i)))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Systematic,
    NonSystematic,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Systematic => "systematic",
            Verdict::NonSystematic => "non-systematic",
        })
    }
}

/// Relative threshold used by [`default_verdict`].
pub const DEFAULT_RELATIVE_TOL: f64 = 1e-3;

/// Systematic iff both cross-block norms fall below `tol` while the
/// compositional block exceeds it.
pub fn systematicity_verdict(p: &NormPartition, tol: f64) -> Result<Verdict> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::param("tol", format!("must be positive, got {tol}")));
    }
    let sys = p.noncomp_comp < tol && p.comp_noncomp < tol && p.comp_comp > tol;
    Ok(if sys {
        Verdict::Systematic
    } else {
        Verdict::NonSystematic
    })
}

/// Verdict with tolerance `1e-3 · comp_comp`. A map with no compositional
/// block is never systematic.
pub fn default_verdict(p: &NormPartition) -> Verdict {
    let tol = DEFAULT_RELATIVE_TOL * p.comp_comp;
    if tol > 0.0 {
        systematicity_verdict(p, tol).unwrap_or(Verdict::NonSystematic)
    } else {
        Verdict::NonSystematic
    }
}

/// Theory curves on a time grid: one trajectory per analytic mode plus the
/// four partitioned norms. `modes` may be empty when only norms are known.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PredictedCurves {
    pub times: Vec<f64>,
    pub modes: Vec<Vec<f64>>,
    pub norms: NormCurves,
}

impl PredictedCurves {
    /// Per-mode trajectories from per-mode initial strengths, with norms
    /// read off the reconstructed map `Σ U diag(π) Vᵀ`.
    pub fn from_modes(basis: &ModalBasis, depth: Depth, pi0: &[f64], tau: f64, times: &[f64]) -> Result<Self> {
        if pi0.len() != basis.n_modes() {
            return Err(Error::dim("pi0", basis.n_modes(), pi0.len()));
        }
        let modes: Vec<Vec<f64>> = basis
            .modes()
            .zip(pi0)
            .map(|(m, &p0)| {
                times
                    .iter()
                    .map(|&t| match depth {
                        Depth::Deep if m.delta > 0.0 => deep_mode(m.lambda, m.delta, p0.max(1e-12), tau, t),
                        Depth::Shallow if m.delta > 0.0 => shallow_mode(m.lambda, m.delta, p0, tau, t),
                        _ => p0,
                    })
                    .collect()
            })
            .collect();

        let mut norms = NormCurves::default();
        let mut values = vec![0.0; modes.len()];
        for (k, &t) in times.iter().enumerate() {
            for (v, m) in values.iter_mut().zip(&modes) {
                *v = m[k];
            }
            let p = partitioned_norms(&basis.reconstruct(&values)?, &basis.layout)?;
            norms.times.push(t);
            norms.comp_comp.push(p.comp_comp);
            norms.noncomp_comp.push(p.noncomp_comp);
            norms.comp_noncomp.push(p.comp_noncomp);
            norms.noncomp_noncomp.push(p.noncomp_noncomp);
        }
        Ok(PredictedCurves {
            times: times.to_vec(),
            modes,
            norms,
        })
    }

    pub fn from_norms(norms: NormCurves) -> Self {
        PredictedCurves {
            times: norms.times.clone(),
            modes: Vec::new(),
            norms,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesDeviation {
    pub id: String,
    pub max_abs: f64,
    pub epoch: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DeviationReport {
    pub modes: Vec<SeriesDeviation>,
    pub norms: Vec<SeriesDeviation>,
}

impl DeviationReport {
    pub fn max_mode_deviation(&self) -> f64 {
        self.modes.iter().map(|d| d.max_abs).fold(0.0, f64::max)
    }

    pub fn max_norm_deviation(&self) -> f64 {
        self.norms.iter().map(|d| d.max_abs).fold(0.0, f64::max)
    }

    pub fn all(&self) -> impl Iterator<Item = &SeriesDeviation> {
        self.modes.iter().chain(&self.norms)
    }

    pub fn to_key_value(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "max_mode_deviation = {:.6e}", self.max_mode_deviation());
        let _ = writeln!(s, "max_norm_deviation = {:.6e}", self.max_norm_deviation());
        for d in self.all() {
            let _ = writeln!(s, "{} = {:.6e} @ epoch {}", d.id, d.max_abs, d.epoch);
        }
        s
    }
}

fn series_deviation(id: String, epochs: &[usize], sim: impl Iterator<Item = f64>, pred: &[f64]) -> SeriesDeviation {
    let mut best = SeriesDeviation {
        id,
        max_abs: 0.0,
        epoch: epochs.first().copied().unwrap_or(0),
    };
    for ((&e, s), &p) in epochs.iter().zip(sim).zip(pred) {
        let d = (s - p).abs();
        if d > best.max_abs || d.is_nan() {
            best.max_abs = d;
            best.epoch = e;
        }
    }
    best
}

/// Max-abs deviation of every simulated series from its prediction. The
/// prediction grid must match the recorded epochs.
pub fn deviation(history: &TrainingHistory, predicted: &PredictedCurves) -> Result<DeviationReport> {
    deviation_of_records(&history.records, predicted)
}

/// [`deviation`] over bare records, e.g. averages across repeats.
pub fn deviation_of_records(records: &[TrainingRecord], predicted: &PredictedCurves) -> Result<DeviationReport> {
    let epochs: Vec<usize> = records.iter().map(|r| r.epoch).collect();
    let grid_ok = epochs.len() == predicted.times.len()
        && epochs
            .iter()
            .zip(&predicted.times)
            .all(|(&e, &t)| (e as f64 - t).abs() < 1e-9);
    if !grid_ok || predicted.norms.len() != epochs.len() {
        return Err(Error::dim(
            "deviation time grid",
            format!("{} recorded epochs", epochs.len()),
            format!("{} predicted times", predicted.times.len()),
        ));
    }

    let mut report = DeviationReport::default();
    if !predicted.modes.is_empty() {
        let n_modes = records.first().map_or(0, |r| r.modes.len());
        if n_modes != predicted.modes.len() {
            return Err(Error::dim("deviation modes", predicted.modes.len(), n_modes));
        }
        for (i, pred) in predicted.modes.iter().enumerate() {
            let sim = records.iter().map(|r| r.modes[i]);
            report
                .modes
                .push(series_deviation(format!("mode_{}", i + 1), &epochs, sim, pred));
        }
    }
    for (k, (id, pred)) in NormCurves::IDS.iter().zip(predicted.norms.series()).enumerate() {
        let sim = records.iter().map(|r| r.norms.to_array()[k]);
        report
            .norms
            .push(series_deviation(format!("norm_{id}"), &epochs, sim, pred));
    }
    Ok(report)
}

/// Least-squares map `Σyx (Σx)⁺`, the fixed point of gradient descent from
/// small initialisation.
pub fn least_squares_map(d: &Dataset) -> Result<DMatrix<f64>> {
    let cov = d.covariances();
    let pinv = cov
        .sigma_x
        .pseudo_inverse(1e-10)
        .map_err(|e| Error::Consistency(format!("pseudo-inverse failed: {e}")))?;
    Ok(cov.sigma_yx * pinv)
}
