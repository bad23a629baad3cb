//! Closed-form results: spectra, mode trajectories, SVD factors, norm curves
//! and the three-feature rank probability.

mod basis;
mod norms;
mod rank;
mod spectrum;
mod svd;

pub use basis::{module_dataset, ModalBasis, ModuleBasis};
pub use norms::{
    asymptotic_norms, group_block_weights, module_group_values, module_shapes, module_squared_norms, predicted_norms,
    predicted_norms_with_depth, NormCurves,
};
pub use rank::exact_rank_probability_3features;
pub(crate) use spectrum::{deep_mode, shallow_mode};
pub use spectrum::{
    deep_mode_value, mode_spectrum, shallow_mode_value, shape_spectrum, ModeGroup, ModeSpectrum, TrajectoryConfig,
};
pub use svd::{analytic_svd, AnalyticSVD, ModeInfo, RECONSTRUCTION_TOL};
