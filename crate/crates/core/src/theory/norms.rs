//! Predicted time courses of the four partitioned Frobenius norms.
//!
//! Every mode's contribution to a block of the network map is `π²` times the
//! squared norm of the matching sub-blocks of `u` and `v`, so each squared
//! block norm is a fixed linear combination of the per-group `π²`. Modular
//! networks add their modules' squared norms.

use serde::{Deserialize, Serialize};

use super::spectrum::{deep_mode, shallow_mode, shape_spectrum, ModeGroup, TrajectoryConfig};
use crate::arch::{Architecture, Depth, ModuleShape};
use crate::dataset::DatasetParams;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct NormCurves {
    pub times: Vec<f64>,
    pub comp_comp: Vec<f64>,
    pub noncomp_comp: Vec<f64>,
    pub comp_noncomp: Vec<f64>,
    pub noncomp_noncomp: Vec<f64>,
}

impl NormCurves {
    pub const IDS: [&'static str; 4] = ["comp_comp", "noncomp_comp", "comp_noncomp", "noncomp_noncomp"];

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// The four curves in the order of [`NormCurves::IDS`].
    pub fn series(&self) -> [&[f64]; 4] {
        [
            &self.comp_comp,
            &self.noncomp_comp,
            &self.comp_noncomp,
            &self.noncomp_noncomp,
        ]
    }

    fn push(&mut self, t: f64, sq: [f64; 4]) {
        self.times.push(t);
        self.comp_comp.push(sq[0].max(0.0).sqrt());
        self.noncomp_comp.push(sq[1].max(0.0).sqrt());
        self.comp_noncomp.push(sq[2].max(0.0).sqrt());
        self.noncomp_noncomp.push(sq[3].max(0.0).sqrt());
    }
}

/// Squared block norms contributed by one mode of unit strength in `group`,
/// ordered as [`NormCurves::IDS`].
pub fn group_block_weights(s: &ModuleShape, group: ModeGroup) -> [f64; 4] {
    let p = s.patterns as f64;
    let r2 = s.r * s.r;
    let gx = s.k_x as f64 * r2;
    let gy = s.k_y as f64 * r2;
    let a = gx + p;
    let b = gy + p;
    match group {
        ModeGroup::Selected => {
            let ab = a * b;
            [p * p / ab, p * gx / ab, p * gy / ab, gx * gy / ab]
        }
        ModeGroup::Unselected => [0.0, 0.0, p / a, gx / a],
        ModeGroup::Complement => [0.0, 0.0, 0.0, 1.0],
    }
}

/// Squared block norms of a module whose modes in each group share the
/// strength `values[group.index()]`.
pub fn module_squared_norms(s: &ModuleShape, values: [f64; 3]) -> [f64; 4] {
    let spec = shape_spectrum(s);
    let mut out = [0.0; 4];
    for g in ModeGroup::ALL {
        let m = spec.multiplicity(g) as f64;
        if m == 0.0 {
            continue;
        }
        let w = group_block_weights(s, g);
        let v2 = values[g.index()].powi(2);
        for (o, wi) in out.iter_mut().zip(w) {
            *o += m * wi * v2;
        }
    }
    out
}

/// Module shapes an architecture decomposes into, including modules that
/// carry no modes.
pub fn module_shapes(params: &DatasetParams, arch: Architecture) -> Result<Vec<ModuleShape>> {
    params.validate()?;
    Ok(arch
        .modules(params, &params.layout())?
        .into_iter()
        .map(|m| m.shape)
        .collect())
}

/// Per-group trajectory values of a module at time `t`.
pub fn module_group_values(s: &ModuleShape, depth: Depth, cfg: &TrajectoryConfig, t: f64) -> [f64; 3] {
    let spec = shape_spectrum(s);
    let mut out = [0.0; 3];
    for g in ModeGroup::ALL {
        if spec.multiplicity(g) == 0 {
            continue;
        }
        let (l, d) = (spec.lambda(g), spec.delta(g));
        out[g.index()] = match depth {
            Depth::Deep => deep_mode(l, d, cfg.pi0, cfg.tau, t),
            Depth::Shallow => shallow_mode(l, d, cfg.pi0, cfg.tau, t),
        };
    }
    out
}

/// Predicted partitioned norms for `arch` at each time in `times`.
/// `Architecture::Shallow` uses the single-layer trajectories; every other
/// architecture uses the two-layer ones.
pub fn predicted_norms(
    params: &DatasetParams,
    arch: Architecture,
    cfg: &TrajectoryConfig,
    times: &[f64],
) -> Result<NormCurves> {
    let depth = if arch == Architecture::Shallow {
        Depth::Shallow
    } else {
        Depth::Deep
    };
    predicted_norms_with_depth(params, arch, depth, cfg, times)
}

pub fn predicted_norms_with_depth(
    params: &DatasetParams,
    arch: Architecture,
    depth: Depth,
    cfg: &TrajectoryConfig,
    times: &[f64],
) -> Result<NormCurves> {
    let shapes = module_shapes(params, arch)?;
    let expected_tau = 1.0 / (params.patterns() as f64 * cfg.epsilon);
    if (cfg.tau - expected_tau).abs() > 1e-9 * expected_tau {
        return Err(Error::param(
            "tau",
            format!("tau = {} does not match 1/(2^n_x eps) = {expected_tau}", cfg.tau),
        ));
    }
    let mut curves = NormCurves::default();
    for &t in times {
        let mut sq = [0.0; 4];
        for s in &shapes {
            let v = module_group_values(s, depth, cfg, t);
            for (acc, x) in sq.iter_mut().zip(module_squared_norms(s, v)) {
                *acc += x;
            }
        }
        curves.push(t, sq);
    }
    Ok(curves)
}

/// Converged norms (every mode at its asymptote).
pub fn asymptotic_norms(params: &DatasetParams, arch: Architecture) -> Result<[f64; 4]> {
    let mut sq = [0.0; 4];
    for s in module_shapes(params, arch)? {
        let spec = shape_spectrum(&s);
        let mut v = [0.0; 3];
        for g in ModeGroup::ALL {
            if spec.multiplicity(g) > 0 {
                v[g.index()] = spec.asymptote(g).unwrap_or(0.0);
            }
        }
        for (acc, x) in sq.iter_mut().zip(module_squared_norms(&s, v)) {
            *acc += x;
        }
    }
    Ok(sq.map(f64::sqrt))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cfg() -> TrajectoryConfig {
        TrajectoryConfig::new(0.01, 3, 1e-3).unwrap()
    }

    #[test]
    fn dense_fig3_asymptote() {
        let n = asymptotic_norms(&DatasetParams::fig3(), Architecture::Dense).unwrap();
        assert_abs_diff_eq!(n[0], 8.0 / 11.0, epsilon = 1e-12);
        let c = predicted_norms(&DatasetParams::fig3(), Architecture::Dense, &cfg(), &[1e5]).unwrap();
        assert_abs_diff_eq!(c.comp_comp[0], 8.0 / 11.0, epsilon = 1e-9);
        assert!(c.noncomp_comp[0] > 0.1);
    }

    #[test]
    fn fully_partitioned_has_no_cross_terms() {
        let p = DatasetParams::new(3, 1, 2, 2, 1.5).unwrap();
        let times: Vec<f64> = (0..50).map(|i| i as f64 * 10.0).collect();
        let c = predicted_norms(&p, Architecture::FullyPartitioned, &cfg(), &times).unwrap();
        assert!(c.noncomp_comp.iter().all(|&v| v == 0.0));
        assert!(c.comp_noncomp.iter().all(|&v| v == 0.0));
        let late = predicted_norms(&p, Architecture::FullyPartitioned, &cfg(), &[1e5]).unwrap();
        assert_abs_diff_eq!(late.comp_comp[0], 1.0, epsilon = 1e-9);
    }

    #[test]
    fn norms_vanish_at_small_init() {
        let c = TrajectoryConfig::new(0.01, 3, 1e-6).unwrap();
        let n = predicted_norms(&DatasetParams::fig3(), Architecture::Dense, &c, &[0.0]).unwrap();
        for s in n.series() {
            assert!(s[0] < 1e-5);
        }
    }

    #[test]
    fn imperfect_extremes_recover_dense_and_output_partitioned() {
        let p = DatasetParams::new(3, 2, 2, 3, 1.0).unwrap();
        let times: Vec<f64> = (0..40).map(|i| i as f64 * 7.0).collect();
        let dense = predicted_norms(&p, Architecture::Dense, &cfg(), &times).unwrap();
        let left = Architecture::ImperfectPartition {
            k_y_left: 3,
            k_y_right: 0,
        };
        assert_eq!(predicted_norms(&p, left, &cfg(), &times).unwrap(), dense);

        let split = predicted_norms(&p, Architecture::OutputPartitioned, &cfg(), &times).unwrap();
        let right = Architecture::ImperfectPartition {
            k_y_left: 0,
            k_y_right: 3,
        };
        assert_eq!(predicted_norms(&p, right, &cfg(), &times).unwrap(), split);
    }

    #[test]
    fn rejects_bad_partition_and_tau() {
        let p = DatasetParams::fig3();
        let bad = Architecture::ImperfectPartition {
            k_y_left: 2,
            k_y_right: 2,
        };
        assert!(predicted_norms(&p, bad, &cfg(), &[0.0]).is_err());
        let wrong_n = TrajectoryConfig::new(0.01, 4, 1e-3).unwrap();
        assert!(predicted_norms(&p, Architecture::Dense, &wrong_n, &[0.0]).is_err());
    }

    #[test]
    fn shallow_uses_single_layer_trajectory() {
        let p = DatasetParams::fig3();
        let c = cfg();
        let t = 5.0;
        let deep = predicted_norms(&p, Architecture::Dense, &c, &[t]).unwrap();
        let shallow = predicted_norms(&p, Architecture::Shallow, &c, &[t]).unwrap();
        assert!(shallow.comp_comp[0] > deep.comp_comp[0]);
    }
}
