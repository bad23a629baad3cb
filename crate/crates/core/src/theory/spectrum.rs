//! Distinct singular values of the dataset covariances and the closed-form
//! trajectories of each mode under gradient flow.

use serde::{Deserialize, Serialize};

use crate::arch::ModuleShape;
use crate::dataset::DatasetParams;
use crate::error::{Error, Result};

/// Which family of singular directions a mode belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModeGroup {
    /// Pattern features copied into the output (λ1, δ1).
    Selected,
    /// Pattern features not copied into the output (λ2, δ1).
    Unselected,
    /// The complement of the pattern features in example space (λ3, δ2).
    Complement,
}

impl ModeGroup {
    pub const ALL: [ModeGroup; 3] = [ModeGroup::Selected, ModeGroup::Unselected, ModeGroup::Complement];

    pub fn index(self) -> usize {
        match self {
            ModeGroup::Selected => 0,
            ModeGroup::Unselected => 1,
            ModeGroup::Complement => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeSpectrum {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub pi1_star: f64,
    pub pi2_star: f64,
    /// Undefined when `δ2 = 0` (no identity input blocks).
    pub pi3_star: Option<f64>,
    pub mult1: usize,
    pub mult2: usize,
    pub mult3: usize,
}

impl ModeSpectrum {
    pub fn lambda(&self, g: ModeGroup) -> f64 {
        [self.lambda1, self.lambda2, self.lambda3][g.index()]
    }

    pub fn delta(&self, g: ModeGroup) -> f64 {
        match g {
            ModeGroup::Selected | ModeGroup::Unselected => self.delta1,
            ModeGroup::Complement => self.delta2,
        }
    }

    pub fn multiplicity(&self, g: ModeGroup) -> usize {
        [self.mult1, self.mult2, self.mult3][g.index()]
    }

    pub fn asymptote(&self, g: ModeGroup) -> Option<f64> {
        match g {
            ModeGroup::Selected => Some(self.pi1_star),
            ModeGroup::Unselected => Some(self.pi2_star),
            ModeGroup::Complement => self.pi3_star,
        }
    }
}

pub fn mode_spectrum(params: &DatasetParams) -> ModeSpectrum {
    shape_spectrum(&ModuleShape::from_params(params))
}

/// Spectrum of the effective dataset a module sees.
pub fn shape_spectrum(s: &ModuleShape) -> ModeSpectrum {
    let p = s.patterns as f64;
    let r2 = s.r * s.r;
    let a = s.k_x as f64 * r2 + p;
    let b = s.k_y as f64 * r2 + p;

    let lambda1 = (a * b).sqrt() / p;
    let lambda2 = (a * s.k_y as f64 * r2).sqrt() / p;
    let lambda3 = ((s.k_x * s.k_y) as f64).sqrt() * r2 / p;
    let delta1 = a / p;
    let delta2 = s.k_x as f64 * r2 / p;

    let mult = |lambda: f64, count: usize| if lambda > 0.0 { count } else { 0 };
    ModeSpectrum {
        lambda1,
        lambda2,
        lambda3,
        delta1,
        delta2,
        pi1_star: lambda1 / delta1,
        pi2_star: lambda2 / delta1,
        pi3_star: (delta2 > 0.0).then(|| lambda3 / delta2),
        mult1: mult(lambda1, s.comp_out),
        mult2: mult(lambda2, s.comp_in - s.comp_out),
        mult3: mult(lambda3, s.patterns - s.comp_in),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryConfig {
    /// Mode strength at initialisation.
    pub pi0: f64,
    /// Learning time constant `1 / (2^n_x ε)`, in epochs.
    pub tau: f64,
    pub epsilon: f64,
}

impl TrajectoryConfig {
    pub fn new(epsilon: f64, n_x: usize, pi0: f64) -> Result<Self> {
        Self::with_patterns(epsilon, 1 << n_x, pi0)
    }

    pub fn with_patterns(epsilon: f64, patterns: usize, pi0: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::param("epsilon", format!("must be positive, got {epsilon}")));
        }
        if !(pi0 > 0.0 && pi0.is_finite()) {
            return Err(Error::param("pi0", format!("must be positive, got {pi0}")));
        }
        Ok(TrajectoryConfig {
            pi0,
            tau: 1.0 / (patterns as f64 * epsilon),
            epsilon,
        })
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta.is_finite() {
        Ok(())
    } else {
        Err(Error::param(
            "delta",
            format!("input eigenvalue must be positive, got {delta}"),
        ))
    }
}

/// Two-layer (one hidden layer) trajectory of a single mode.
pub fn deep_mode_value(lambda: f64, delta: f64, cfg: &TrajectoryConfig, t: f64) -> Result<f64> {
    check_delta(delta)?;
    Ok(deep_mode(lambda, delta, cfg.pi0, cfg.tau, t))
}

/// Single-layer trajectory of a single mode.
pub fn shallow_mode_value(lambda: f64, delta: f64, cfg: &TrajectoryConfig, t: f64) -> Result<f64> {
    check_delta(delta)?;
    Ok(shallow_mode(lambda, delta, cfg.pi0, cfg.tau, t))
}

/// Sigmoidal trajectory `π*/(1 − (1 − π*/π0)·exp(−2λt/τ))`. Modes with no
/// input-output correlation are taken to have decayed to zero for `t > 0`.
pub(crate) fn deep_mode(lambda: f64, delta: f64, pi0: f64, tau: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return pi0;
    }
    if lambda <= 0.0 {
        return 0.0;
    }
    let target = lambda / delta;
    let decay = (-2.0 * lambda * t / tau).exp();
    target / (1.0 - (1.0 - target / pi0) * decay)
}

pub(crate) fn shallow_mode(lambda: f64, delta: f64, pi0: f64, tau: f64, t: f64) -> f64 {
    let decay = (-delta * t / tau).exp();
    lambda / delta * (1.0 - decay) + pi0 * decay
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn fig3_spectrum() {
        let s = mode_spectrum(&DatasetParams::fig3());
        assert_abs_diff_eq!(s.lambda1, 99f64.sqrt() / 8.0, epsilon = 1e-14);
        assert_abs_diff_eq!(s.lambda2, 11f64.sqrt() / 8.0, epsilon = 1e-14);
        assert_abs_diff_eq!(s.lambda3, 3f64.sqrt() / 8.0, epsilon = 1e-14);
        assert_abs_diff_eq!(s.delta1, 1.375, epsilon = 1e-14);
        assert_abs_diff_eq!(s.delta2, 0.375, epsilon = 1e-14);
        assert_abs_diff_eq!(s.pi1_star, 0.904534, epsilon = 1e-6);
        assert_abs_diff_eq!(s.pi2_star, 0.301511, epsilon = 1e-6);
        assert_abs_diff_eq!(s.pi3_star.unwrap(), 0.577350, epsilon = 1e-6);
        assert_eq!((s.mult1, s.mult2, s.mult3), (1, 2, 5));
    }

    #[test]
    fn purely_compositional_spectrum() {
        let s = mode_spectrum(&DatasetParams::new(3, 2, 0, 0, 1.0).unwrap());
        assert_eq!(s.lambda1, 1.0);
        assert_eq!(s.delta1, 1.0);
        assert_eq!(s.pi1_star, 1.0);
        assert_eq!(s.lambda2, 0.0);
        assert_eq!(s.lambda3, 0.0);
        assert_eq!(s.delta2, 0.0);
        assert!(s.pi3_star.is_none());
        assert_eq!((s.mult1, s.mult2, s.mult3), (2, 0, 0));
    }

    #[test]
    fn full_selection_has_no_second_mode() {
        let s = mode_spectrum(&DatasetParams::new(3, 3, 1, 1, 1.0).unwrap());
        assert_eq!(s.mult2, 0);
        assert_eq!(s.mult1 + s.mult3, 8);
    }

    #[test]
    fn deep_trajectory_limits() {
        let cfg = TrajectoryConfig::new(0.01, 3, 1e-3).unwrap();
        let (l, d) = (1.2437, 1.375);
        assert_eq!(deep_mode_value(l, d, &cfg, 0.0).unwrap(), 1e-3);
        let late = deep_mode_value(l, d, &cfg, 10.0 * cfg.tau / l).unwrap();
        assert_abs_diff_eq!(late, l / d, epsilon = 1e-4);
        assert_eq!(deep_mode_value(0.0, 0.375, &cfg, 100.0).unwrap(), 0.0);
        assert!(deep_mode_value(l, 0.0, &cfg, 1.0).is_err());
    }

    #[test]
    fn shallow_trajectory_limits() {
        let cfg = TrajectoryConfig::new(0.01, 3, 1e-3).unwrap();
        let (l, d) = (1.2437, 1.375);
        assert_eq!(shallow_mode_value(l, d, &cfg, 0.0).unwrap(), 1e-3);
        let late = shallow_mode_value(l, d, &cfg, 40.0 * cfg.tau).unwrap();
        assert_abs_diff_eq!(late, l / d, epsilon = 1e-9);

        let fixed = TrajectoryConfig::new(0.01, 3, l / d).unwrap();
        for t in [0.0, 3.0, 50.0, 1e4] {
            assert_abs_diff_eq!(shallow_mode_value(l, d, &fixed, t).unwrap(), l / d, epsilon = 1e-14);
        }
        assert!(shallow_mode_value(l, -1.0, &cfg, 1.0).is_err());
    }

    #[test]
    fn tau_matches_learning_rate() {
        let cfg = TrajectoryConfig::new(0.02, 3, 1e-3).unwrap();
        assert_abs_diff_eq!(cfg.tau * cfg.epsilon * 8.0, 1.0, epsilon = 1e-14);
        assert!(TrajectoryConfig::new(0.0, 3, 1e-3).is_err());
        assert!(TrajectoryConfig::new(0.1, 3, 0.0).is_err());
    }
}
