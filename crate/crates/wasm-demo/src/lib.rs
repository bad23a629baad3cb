//! Browser bindings: closed-form mode and norm curves, converged norms per
//! architecture, and full-rank sampling probabilities. Every export returns
//! a JSON string.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use systematicity::metrics::PredictedCurves;
use systematicity::rank_mc::{
    enumerate_full_rank_probability, estimate_full_rank_probability, RankTrial, MAX_ENUM_FEATURES,
};
use systematicity::theory::{asymptotic_norms, ModalBasis, ModeGroup, NormCurves};
use systematicity::{build_dataset, Architecture, DatasetParams, Depth, FeatureChoice};

#[derive(Debug, Serialize)]
pub struct GroupCurve {
    pub group: &'static str,
    pub lambda: f64,
    pub delta: f64,
    pub multiplicity: usize,
    pub values: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct Trajectories {
    pub times: Vec<f64>,
    pub groups: Vec<GroupCurve>,
    pub norms: Vec<(&'static str, Vec<f64>)>,
}

#[derive(Debug, Serialize)]
pub struct ArchNorms {
    pub arch: String,
    pub norms: [f64; 4],
    pub systematic: bool,
}

#[derive(Debug, Serialize)]
pub struct RankPoint {
    pub sample_size: usize,
    pub estimate: f64,
    pub std_error: f64,
    pub exact: Option<f64>,
}

fn group_name(g: ModeGroup) -> &'static str {
    match g {
        ModeGroup::Selected => "selected",
        ModeGroup::Unselected => "unselected",
        ModeGroup::Complement => "complement",
    }
}

fn params(n_x: usize, n_y: usize, k_x: usize, k_y: usize, r: f64) -> Result<DatasetParams, String> {
    DatasetParams::new(n_x, n_y, k_x, k_y, r).map_err(|e| e.to_string())
}

/// Mode strengths grouped by distinct singular value, plus the four
/// partitioned norms, on `points` evenly spaced epochs.
#[allow(clippy::too_many_arguments)]
pub fn trajectories(
    p: DatasetParams,
    arch: &str,
    lr: f64,
    epochs: f64,
    pi0: f64,
    points: usize,
) -> Result<Trajectories, String> {
    let arch: Architecture = arch.parse().map_err(|e: systematicity::Error| e.to_string())?;
    if !(lr > 0.0 && epochs > 0.0 && pi0 > 0.0) || points < 2 {
        return Err("lr, epochs and pi0 must be positive and points at least 2".into());
    }
    let d = build_dataset(p, FeatureChoice::DeterministicFirst, 0).map_err(|e| e.to_string())?;
    let basis = ModalBasis::new(&d, arch).map_err(|e| e.to_string())?;
    let depth = if arch == Architecture::Shallow {
        Depth::Shallow
    } else {
        Depth::Deep
    };
    let tau = 1.0 / (d.patterns() as f64 * lr);
    let times: Vec<f64> = (0..points).map(|i| epochs * i as f64 / (points - 1) as f64).collect();
    let curves = PredictedCurves::from_modes(&basis, depth, &vec![pi0; basis.n_modes()], tau, &times)
        .map_err(|e| e.to_string())?;

    let mut groups: Vec<GroupCurve> = Vec::new();
    for (m, values) in basis.modes().zip(curves.modes) {
        let name = group_name(m.group);
        match groups
            .iter_mut()
            .find(|g| g.group == name && g.lambda == m.lambda && g.delta == m.delta)
        {
            Some(g) => g.multiplicity += 1,
            None => groups.push(GroupCurve {
                group: name,
                lambda: m.lambda,
                delta: m.delta,
                multiplicity: 1,
                values,
            }),
        }
    }
    let norms = NormCurves::IDS
        .iter()
        .zip(curves.norms.series())
        .map(|(id, s)| (*id, s.to_vec()))
        .collect();
    Ok(Trajectories { times, groups, norms })
}

/// Converged partitioned norms for every architecture the dataset admits.
pub fn architecture_norms(p: DatasetParams) -> Result<Vec<ArchNorms>, String> {
    let mut archs = vec![Architecture::Dense];
    if p.n_y > 0 && p.k_y > 0 {
        archs.push(Architecture::OutputPartitioned);
        if p.k_x > 0 {
            archs.push(Architecture::FullyPartitioned);
        }
        archs.extend((1..p.k_y).map(|l| Architecture::ImperfectPartition {
            k_y_left: l,
            k_y_right: p.k_y - l,
        }));
    }
    archs
        .into_iter()
        .map(|a| {
            let norms = asymptotic_norms(&p, a).map_err(|e| e.to_string())?;
            let cross = norms[1].max(norms[2]);
            Ok(ArchNorms {
                arch: a.to_string(),
                systematic: cross <= 1e-3 * norms[0].max(f64::MIN_POSITIVE),
                norms,
            })
        })
        .collect()
}

/// Probability that `k` distinct sign patterns of `n` features span the
/// space, for every `k` from 1 to `2^n`.
pub fn rank_curve(n: usize, trials: usize, seed: u64) -> Result<Vec<RankPoint>, String> {
    (1..=1usize << n.min(16))
        .map(|k| {
            let est = estimate_full_rank_probability(&RankTrial {
                n_features: n,
                sample_size: k,
                trials,
                seed: seed.wrapping_add(k as u64),
            })
            .map_err(|e| e.to_string())?;
            let exact = if n <= MAX_ENUM_FEATURES {
                Some(enumerate_full_rank_probability(n, k).map_err(|e| e.to_string())?)
            } else {
                None
            };
            Ok(RankPoint {
                sample_size: k,
                estimate: est.probability,
                std_error: est.std_error,
                exact,
            })
        })
        .collect()
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsValue> {
    r.and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string()))
        .map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = modeTrajectories)]
#[allow(clippy::too_many_arguments)]
pub fn mode_trajectories(
    n_x: usize,
    n_y: usize,
    k_x: usize,
    k_y: usize,
    r: f64,
    arch: &str,
    lr: f64,
    epochs: f64,
    pi0: f64,
    points: usize,
) -> Result<String, JsValue> {
    to_js(params(n_x, n_y, k_x, k_y, r).and_then(|p| trajectories(p, arch, lr, epochs, pi0, points)))
}

#[wasm_bindgen(js_name = architectureNorms)]
pub fn architecture_norms_js(n_x: usize, n_y: usize, k_x: usize, k_y: usize, r: f64) -> Result<String, JsValue> {
    to_js(params(n_x, n_y, k_x, k_y, r).and_then(architecture_norms))
}

#[wasm_bindgen(js_name = rankProbabilities)]
pub fn rank_probabilities(n: usize, trials: usize, seed: u32) -> Result<String, JsValue> {
    to_js(rank_curve(n, trials, seed as u64))
}
