//! Datasets, closed-form learning dynamics and simulated training for linear
//! networks on mixtures of compositional and non-compositional structure.

pub mod arch;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod net;
pub mod rank_mc;
pub mod theory;

pub use arch::{Architecture, Depth, ModuleShape, ModuleSpec};
pub use dataset::{build_dataset, covariances, split, Batch, BlockLayout, Dataset, DatasetParams, FeatureChoice};
pub use error::{Error, Result};
