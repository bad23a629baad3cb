//! Closed-form singular value decompositions `Σyx = U S Vᵀ`, `Σx = V D Vᵀ`.
//!
//! The singular vectors are assembled block-wise from the pattern matrices:
//!
//! ```text
//! A = (Ω_y Ω_xᵀ)ᵀ Ω_y Ω_xᵀ      (n_x × n_x, P²·diag(selected))
//! B = Ω_yᵀ Ω_y Ω_xᵀ             (P × n_x, selected columns of P·Ω_xᵀ)
//! C = Ω_xᵀ Ω_x Ω_xᵀ = P·Ω_xᵀ    (P × n_x)
//! T H Pᵀ = svd( (k_x k_y)^-½ (I − Ω_xᵀ Ω_x / P) )
//! ```
//!
//! Only the `P − n_x` nonzero singular triplets of the last factorisation are
//! kept; they span the part of example space the pattern rows do not reach.

use nalgebra::{DMatrix, DVector};

use super::spectrum::{shape_spectrum, ModeGroup, ModeSpectrum};
use crate::arch::ModuleShape;
use crate::dataset::{covariances, Dataset};
use crate::error::{Error, Result};

/// Residual above which the assembled factors are rejected.
pub const RECONSTRUCTION_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeInfo {
    pub group: ModeGroup,
    pub lambda: f64,
    pub delta: f64,
}

#[derive(Debug, Clone)]
pub struct AnalyticSVD {
    pub u_matrix: DMatrix<f64>,
    pub s_matrix: DMatrix<f64>,
    pub v_matrix: DMatrix<f64>,
    pub d_matrix: DMatrix<f64>,
    pub a_mat: DMatrix<f64>,
    pub b_mat: DMatrix<f64>,
    pub c_mat: DMatrix<f64>,
    pub t_mat: DMatrix<f64>,
    pub h_mat: DMatrix<f64>,
    pub p_mat: DMatrix<f64>,
    /// One entry per column of `U`/`V`: pattern features first, then the complement.
    pub modes: Vec<ModeInfo>,
    pub spectrum: ModeSpectrum,
}

/// Closed-form SVD of a dataset in the family. A dataset whose compositional
/// input rows have been removed (and that has no compositional outputs) is
/// accepted too; all of its modes are then complement modes.
pub fn analytic_svd(d: &Dataset) -> Result<AnalyticSVD> {
    let params = d.params;
    let n_x = d.layout.comp_input_rows.len();
    let n_y = d.layout.comp_output_rows.len();
    if (n_x != 0 && n_x != params.n_x) || n_y != params.n_y || (n_x == 0 && n_y != 0) {
        return Err(Error::param(
            "dataset",
            "closed-form SVD needs the dataset's block layout to match its parameters",
        ));
    }
    let (k_x, k_y) = (params.k_x, params.k_y);
    let p = params.patterns();
    let pf = p as f64;
    let r = params.r;
    let r2 = r * r;
    let kxf = k_x as f64;
    let kyf = k_y as f64;

    let omega_x = d.omega_x();
    let omega_y = d.omega_y();
    let oyox = &omega_y * omega_x.transpose();
    let a_mat = oyox.transpose() * &oyox;
    let b_mat = omega_y.transpose() * &omega_y * omega_x.transpose();
    let c_mat = omega_x.transpose() * &omega_x * omega_x.transpose();

    let spectrum = shape_spectrum(&ModuleShape {
        comp_in: n_x,
        ..ModuleShape::from_params(&params)
    });
    let ModeSpectrum {
        lambda1,
        lambda2,
        lambda3,
        delta1,
        delta2,
        ..
    } = spectrum;

    // Complement factorisation. The (k_x k_y)^-½ scale only matters when both
    // identity families exist; otherwise factor the bare projector.
    let h_scale = if k_x > 0 && k_y > 0 {
        1.0 / (kxf * kyf).sqrt()
    } else {
        1.0
    };
    let projector = DMatrix::<f64>::identity(p, p) - omega_x.transpose() * &omega_x / pf;
    let svd = (&projector * h_scale).svd(true, true);
    let (u_full, vt_full) = match (svd.u, svd.v_t) {
        (Some(u), Some(vt)) => (u, vt),
        _ => return Err(Error::Consistency("complement SVD did not converge".into())),
    };
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > 0.5 * h_scale)
        .collect();
    if keep.len() != p - n_x {
        return Err(Error::Consistency(format!(
            "complement has rank {} instead of {}",
            keep.len(),
            p - n_x
        )));
    }
    let t_mat = u_full.select_columns(&keep);
    let p_mat = vt_full.select_rows(&keep).transpose();
    let h_mat = DMatrix::from_diagonal(&DVector::from_iterator(
        keep.len(),
        keep.iter().map(|&i| svd.singular_values[i]),
    ));

    let n_complement = if k_x > 0 { p - n_x } else { 0 };
    let m = n_x + n_complement;
    let d_in = d.input.nrows();
    let d_out = d.output.nrows();

    // Right singular vectors.
    let mut v = DMatrix::zeros(d_in, m);
    let comp_scale = (pf / (kxf * r2 + pf)).sqrt();
    v.view_mut((0, 0), (n_x, n_x))
        .copy_from(&(DMatrix::<f64>::identity(n_x, n_x) * comp_scale));
    if k_x > 0 {
        let cross = omega_x.transpose() * (r2 / (pf * (kxf * r2 + pf))).sqrt();
        let comp = &p_mat / kxf.sqrt();
        for b in 0..k_x {
            let row = n_x + b * p;
            v.view_mut((row, 0), (p, n_x)).copy_from(&cross);
            v.view_mut((row, n_x), (p, n_complement)).copy_from(&comp);
        }
    }

    // Left singular vectors.
    let mut u = DMatrix::zeros(d_out, m);
    u.view_mut((0, 0), (n_y, n_x))
        .copy_from(&(&oyox / (pf * (kyf * r2 + pf)).sqrt()));
    if k_y > 0 {
        let selected = &b_mat * (r2 / (pf.powi(3) * (kyf * r2 + pf))).sqrt();
        let unselected = (&c_mat - &b_mat) / (pf.powi(3) * kyf).sqrt();
        let block = selected + unselected;
        let comp = &t_mat / kyf.sqrt();
        for b in 0..k_y {
            let row = n_y + b * p;
            u.view_mut((row, 0), (p, n_x)).copy_from(&block);
            if n_complement > 0 {
                u.view_mut((row, n_x), (p, n_complement)).copy_from(&comp);
            }
        }
    }

    let sel_proj = &a_mat / (pf * pf);
    let mut s = DMatrix::zeros(m, m);
    s.view_mut((0, 0), (n_x, n_x))
        .copy_from(&(&sel_proj * lambda1 + (DMatrix::<f64>::identity(n_x, n_x) - &sel_proj) * lambda2));
    let mut dm = DMatrix::zeros(m, m);
    dm.view_mut((0, 0), (n_x, n_x))
        .copy_from(&(DMatrix::<f64>::identity(n_x, n_x) * delta1));
    for i in n_x..m {
        s[(i, i)] = lambda3;
        dm[(i, i)] = delta2;
    }

    let modes = (0..m)
        .map(|i| {
            if i >= n_x {
                ModeInfo {
                    group: ModeGroup::Complement,
                    lambda: lambda3,
                    delta: delta2,
                }
            } else if d.selected_features.contains(&i) {
                ModeInfo {
                    group: ModeGroup::Selected,
                    lambda: lambda1,
                    delta: delta1,
                }
            } else {
                ModeInfo {
                    group: ModeGroup::Unselected,
                    lambda: lambda2,
                    delta: delta1,
                }
            }
        })
        .collect();

    let out = AnalyticSVD {
        u_matrix: u,
        s_matrix: s,
        v_matrix: v,
        d_matrix: dm,
        a_mat,
        b_mat,
        c_mat,
        t_mat,
        h_mat,
        p_mat,
        modes,
        spectrum,
    };

    let (res_yx, res_x) = out.reconstruction_residuals(d);
    if res_yx > RECONSTRUCTION_TOL || res_x > RECONSTRUCTION_TOL {
        return Err(Error::Consistency(format!(
            "closed-form SVD residuals |USV'-Syx| = {res_yx:e}, |VDV'-Sx| = {res_x:e}"
        )));
    }
    Ok(out)
}

impl AnalyticSVD {
    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }

    /// Frobenius residuals of `U S Vᵀ − Σyx` and `V D Vᵀ − Σx`.
    pub fn reconstruction_residuals(&self, d: &Dataset) -> (f64, f64) {
        let cov = covariances(d);
        let yx = &self.u_matrix * &self.s_matrix * self.v_matrix.transpose() - &cov.sigma_yx;
        let x = &self.v_matrix * &self.d_matrix * self.v_matrix.transpose() - &cov.sigma_x;
        (yx.norm(), x.norm())
    }

    /// Frobenius residuals of `UᵀU − I` and `VᵀV − I`. Columns of `U` that
    /// belong to zero singular values (no identity output blocks) are
    /// excluded, since those directions do not exist in output space.
    pub fn orthonormality_residuals(&self) -> (f64, f64) {
        let active: Vec<usize> = (0..self.n_modes()).filter(|&i| self.modes[i].lambda > 0.0).collect();
        let ua = self.u_matrix.select_columns(&active);
        let u_res = (ua.transpose() * &ua - DMatrix::identity(active.len(), active.len())).norm();
        let m = self.n_modes();
        let v_res = (self.v_matrix.transpose() * &self.v_matrix - DMatrix::identity(m, m)).norm();
        (u_res, v_res)
    }

    /// Asymptotic strengths `λ/δ` per mode.
    pub fn asymptotes(&self) -> Vec<f64> {
        self.modes.iter().map(|m| m.lambda / m.delta).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{build_dataset, DatasetParams, FeatureChoice};

    fn svd_for(n_x: usize, n_y: usize, k_x: usize, k_y: usize, r: f64) -> (Dataset, AnalyticSVD) {
        let p = DatasetParams::new(n_x, n_y, k_x, k_y, r).unwrap();
        let d = build_dataset(p, FeatureChoice::DeterministicFirst, 0).unwrap();
        let s = analytic_svd(&d).unwrap();
        (d, s)
    }

    #[test]
    fn fig3_reconstructs() {
        let (d, s) = svd_for(3, 1, 3, 1, 1.0);
        let (a, b) = s.reconstruction_residuals(&d);
        assert!(a < 1e-9 && b < 1e-9, "{a} {b}");
        let (u, v) = s.orthonormality_residuals();
        assert!(u < 1e-9 && v < 1e-9, "{u} {v}");
        assert_eq!(s.n_modes(), 8);
    }

    #[test]
    fn smallest_complete_case_has_expected_input_eigenvalues() {
        let (_, s) = svd_for(1, 1, 1, 1, 1.0);
        let diag: Vec<f64> = s.d_matrix.diagonal().iter().copied().collect();
        assert_eq!(diag.len(), 2);
        assert!((diag[0] - 1.5).abs() < 1e-12);
        assert!((diag[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn random_feature_choice_reconstructs() {
        let p = DatasetParams::new(4, 2, 2, 1, 2.0).unwrap();
        let d = build_dataset(p, FeatureChoice::SeededRandom, 3).unwrap();
        let s = analytic_svd(&d).unwrap();
        let (a, b) = s.reconstruction_residuals(&d);
        assert!(a < 1e-9 && b < 1e-9);
    }

    #[test]
    fn degenerate_blocks_use_reduced_forms() {
        for (kx, ky) in [(0, 0), (0, 2), (2, 0)] {
            let (d, s) = svd_for(3, 2, kx, ky, 2.0);
            let (a, b) = s.reconstruction_residuals(&d);
            assert!(a < 1e-9 && b < 1e-9, "k=({kx},{ky}): {a} {b}");
            let (u, v) = s.orthonormality_residuals();
            assert!(u < 1e-9 && v < 1e-9, "k=({kx},{ky}): {u} {v}");
        }
    }

    #[test]
    fn identity_only_input_has_only_complement_modes() {
        let p = DatasetParams::new(3, 0, 2, 1, 1.5).unwrap();
        let d = build_dataset(p, FeatureChoice::DeterministicFirst, 0)
            .unwrap()
            .without_compositional_input();
        let s = analytic_svd(&d).unwrap();
        assert_eq!(s.n_modes(), 8);
        assert!(s.modes.iter().all(|m| m.group == ModeGroup::Complement));
        let (a, b) = s.reconstruction_residuals(&d);
        assert!(a < 1e-9 && b < 1e-9);
    }

    #[test]
    fn helper_identities() {
        let (d, s) = svd_for(3, 2, 1, 1, 1.0);
        let p = 8.0;
        // Ω_y Ω_xᵀ A = P² Ω_y Ω_xᵀ and B A = P² B
        let oyox = d.omega_y() * d.omega_x().transpose();
        assert!((&oyox * &s.a_mat - &oyox * (p * p)).norm() < 1e-9);
        assert!((&s.b_mat * &s.a_mat - &s.b_mat * (p * p)).norm() < 1e-9);
        // Bᵀ B + (C − B)ᵀ (C − B) = P³ I
        let cb = &s.c_mat - &s.b_mat;
        let lhs = s.b_mat.transpose() * &s.b_mat + cb.transpose() * cb;
        assert!((lhs - DMatrix::identity(3, 3) * p.powi(3)).norm() < 1e-9);
    }
}
