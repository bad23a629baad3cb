//! Analytic singular directions of every module of an architecture.
//!
//! Each module trains on the rows it connects, which form a dataset of the
//! same family (possibly with its compositional input removed), so each gets
//! its own closed-form SVD. Modes are numbered module by module.

use nalgebra::DMatrix;

use super::svd::{analytic_svd, AnalyticSVD, ModeInfo};
use crate::arch::{Architecture, ModuleSpec};
use crate::dataset::{rows_of, BlockLayout, Dataset, DatasetParams};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct ModuleBasis {
    pub spec: ModuleSpec,
    pub svd: AnalyticSVD,
}

#[derive(Debug, Clone)]
pub struct ModalBasis {
    pub arch: Architecture,
    pub layout: BlockLayout,
    pub modules: Vec<ModuleBasis>,
}

fn overlap(outer: &std::ops::Range<usize>, inner: &std::ops::Range<usize>) -> std::ops::Range<usize> {
    let start = inner.start.max(outer.start);
    let end = inner.end.min(outer.end).max(start);
    start - outer.start..end - outer.start
}

/// The dataset a module sees, with a layout relative to its own rows.
pub fn module_dataset(d: &Dataset, spec: &ModuleSpec) -> Dataset {
    let layout = BlockLayout {
        comp_input_rows: overlap(&spec.input_rows, &d.layout.comp_input_rows),
        noncomp_input_rows: overlap(&spec.input_rows, &d.layout.noncomp_input_rows),
        comp_output_rows: overlap(&spec.output_rows, &d.layout.comp_output_rows),
        noncomp_output_rows: overlap(&spec.output_rows, &d.layout.noncomp_output_rows),
    };
    let s = spec.shape;
    let has_comp_out = !layout.comp_output_rows.is_empty();
    Dataset {
        input: rows_of(&d.input, &spec.input_rows),
        output: rows_of(&d.output, &spec.output_rows),
        params: DatasetParams {
            n_x: d.params.n_x,
            n_y: layout.comp_output_rows.len(),
            k_x: s.k_x,
            k_y: s.k_y,
            r: s.r,
        },
        selected_features: if has_comp_out {
            d.selected_features.clone()
        } else {
            Vec::new()
        },
        layout,
    }
}

impl ModalBasis {
    pub fn new(d: &Dataset, arch: Architecture) -> Result<Self> {
        let modules = arch
            .modules(&d.params, &d.layout)?
            .into_iter()
            .map(|spec| {
                let svd = analytic_svd(&module_dataset(d, &spec))?;
                Ok(ModuleBasis { spec, svd })
            })
            .collect::<Result<_>>()?;
        Ok(ModalBasis {
            arch,
            layout: d.layout.clone(),
            modules,
        })
    }

    pub fn n_modes(&self) -> usize {
        self.modules.iter().map(|m| m.svd.n_modes()).sum()
    }

    pub fn modes(&self) -> impl Iterator<Item = &ModeInfo> {
        self.modules.iter().flat_map(|m| m.svd.modes.iter())
    }

    pub fn asymptotes(&self) -> Vec<f64> {
        self.modules.iter().flat_map(|m| m.svd.asymptotes()).collect()
    }

    /// `diag(U_mᵀ M_m V_m)` for each module block `M_m` of a full map.
    pub fn mode_values(&self, map: &DMatrix<f64>) -> Result<Vec<f64>> {
        let want = (self.layout.output_dim(), self.layout.input_dim());
        if map.shape() != want {
            return Err(Error::dim(
                "mode_values",
                format!("{want:?}"),
                format!("{:?}", map.shape()),
            ));
        }
        let mut out = Vec::with_capacity(self.n_modes());
        for m in &self.modules {
            let s = &m.spec;
            let block = map.view(
                (s.output_rows.start, s.input_rows.start),
                (s.output_rows.len(), s.input_rows.len()),
            );
            let mv = block * &m.svd.v_matrix;
            out.extend((0..m.svd.n_modes()).map(|i| m.svd.u_matrix.column(i).dot(&mv.column(i))));
        }
        Ok(out)
    }

    /// The full map with strength `values[i]` along mode `i` and nothing else.
    pub fn reconstruct(&self, values: &[f64]) -> Result<DMatrix<f64>> {
        if values.len() != self.n_modes() {
            return Err(Error::dim("reconstruct", self.n_modes(), values.len()));
        }
        let mut map = DMatrix::zeros(self.layout.output_dim(), self.layout.input_dim());
        let mut offset = 0;
        for m in &self.modules {
            let k = m.svd.n_modes();
            let mut us = m.svd.u_matrix.clone();
            for (i, mut col) in us.column_iter_mut().enumerate() {
                col *= values[offset + i];
            }
            offset += k;
            let s = &m.spec;
            map.view_mut(
                (s.output_rows.start, s.input_rows.start),
                (s.output_rows.len(), s.input_rows.len()),
            )
            .copy_from(&(us * m.svd.v_matrix.transpose()));
        }
        Ok(map)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{build_dataset, FeatureChoice};
    use crate::metrics::{least_squares_map, partitioned_norms};
    use crate::theory::asymptotic_norms;

    #[test]
    fn every_architecture_has_a_basis() {
        let p = DatasetParams::new(3, 1, 2, 3, 1.0).unwrap();
        let d = build_dataset(p, FeatureChoice::DeterministicFirst, 0).unwrap();
        for arch in [
            Architecture::Dense,
            Architecture::OutputPartitioned,
            Architecture::FullyPartitioned,
            Architecture::ImperfectPartition {
                k_y_left: 1,
                k_y_right: 2,
            },
        ] {
            let b = ModalBasis::new(&d, arch).unwrap();
            let converged = b.reconstruct(&b.asymptotes()).unwrap();
            let norms = partitioned_norms(&converged, &d.layout).unwrap().to_array();
            let expected = asymptotic_norms(&p, arch).unwrap();
            for k in 0..4 {
                assert!(
                    (norms[k] - expected[k]).abs() < 1e-9,
                    "{arch}: {norms:?} vs {expected:?}"
                );
            }
            let back = b.mode_values(&converged).unwrap();
            for (x, y) in back.iter().zip(b.asymptotes()) {
                assert!((x - y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn dense_basis_matches_least_squares() {
        let d = build_dataset(DatasetParams::fig3(), FeatureChoice::DeterministicFirst, 0).unwrap();
        let b = ModalBasis::new(&d, Architecture::Dense).unwrap();
        let m = b.reconstruct(&b.asymptotes()).unwrap();
        assert!((m - least_squares_map(&d).unwrap()).norm() < 1e-9);
    }
}
