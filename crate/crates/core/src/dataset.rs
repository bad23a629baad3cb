//! The parametric family of compositional / non-compositional datasets.
//!
//! Examples are stored as columns. The input stacks the `n_x` sign-pattern
//! rows (every one of the `2^n_x` binary patterns appears exactly once) on
//! top of `k_x` blocks of `r·I`. The output stacks `n_y` copies of distinct
//! pattern rows on top of `k_y` blocks of `r·I`.

use std::ops::Range;

use nalgebra::DMatrix;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest `n_x` accepted; `2^16` examples is already far past desk scale.
pub const MAX_PATTERN_BITS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetParams {
    pub n_x: usize,
    pub n_y: usize,
    pub k_x: usize,
    pub k_y: usize,
    pub r: f64,
}

impl DatasetParams {
    pub fn new(n_x: usize, n_y: usize, k_x: usize, k_y: usize, r: f64) -> Result<Self> {
        let p = DatasetParams { n_x, n_y, k_x, k_y, r };
        p.validate()?;
        Ok(p)
    }

    /// The dataset used throughout the trajectory figures: (3, 1, 3, 1, 1).
    pub fn fig3() -> Self {
        DatasetParams {
            n_x: 3,
            n_y: 1,
            k_x: 3,
            k_y: 1,
            r: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_x == 0 {
            return Err(Error::param("n_x", "at least one pattern bit is required"));
        }
        if self.n_x > MAX_PATTERN_BITS {
            return Err(Error::param(
                "n_x",
                format!("{} exceeds the supported maximum of {MAX_PATTERN_BITS}", self.n_x),
            ));
        }
        if self.n_y > self.n_x {
            return Err(Error::param(
                "n_y",
                format!("n_y = {} must not exceed n_x = {}", self.n_y, self.n_x),
            ));
        }
        if (self.k_x > 0 || self.k_y > 0) && !(self.r > 0.0 && self.r.is_finite()) {
            return Err(Error::param(
                "r",
                format!("identity blocks need a positive finite scale, got {}", self.r),
            ));
        }
        if !self.r.is_finite() || self.r < 0.0 {
            return Err(Error::param(
                "r",
                format!("scale must be finite and >= 0, got {}", self.r),
            ));
        }
        Ok(())
    }

    /// Number of examples, `2^n_x`.
    pub fn patterns(&self) -> usize {
        1 << self.n_x
    }

    pub fn input_dim(&self) -> usize {
        self.n_x + self.k_x * self.patterns()
    }

    pub fn output_dim(&self) -> usize {
        self.n_y + self.k_y * self.patterns()
    }

    pub fn layout(&self) -> BlockLayout {
        let p = self.patterns();
        BlockLayout {
            comp_input_rows: 0..self.n_x,
            noncomp_input_rows: self.n_x..self.n_x + self.k_x * p,
            comp_output_rows: 0..self.n_y,
            noncomp_output_rows: self.n_y..self.n_y + self.k_y * p,
        }
    }
}

/// How the `n_y` compositional output features are picked from the `n_x` input features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureChoice {
    /// Features `0..n_y`.
    #[default]
    DeterministicFirst,
    /// `n_y` distinct features drawn uniformly with the supplied seed.
    SeededRandom,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockLayout {
    pub comp_input_rows: Range<usize>,
    pub noncomp_input_rows: Range<usize>,
    pub comp_output_rows: Range<usize>,
    pub noncomp_output_rows: Range<usize>,
}

impl BlockLayout {
    pub fn input_dim(&self) -> usize {
        self.noncomp_input_rows.end
    }

    pub fn output_dim(&self) -> usize {
        self.noncomp_output_rows.end
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub input: DMatrix<f64>,
    pub output: DMatrix<f64>,
    pub layout: BlockLayout,
    pub params: DatasetParams,
    pub selected_features: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovariancePair {
    pub sigma_x: DMatrix<f64>,
    pub sigma_yx: DMatrix<f64>,
}

/// A column subset of a dataset, used for training and evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub input: DMatrix<f64>,
    pub output: DMatrix<f64>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.input.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.input.ncols() == 0
    }
}

/// The `n_x × 2^n_x` matrix whose column `j` is the sign encoding of `j`
/// (row `i` is bit `i`, least significant first; 0 → −1, 1 → +1).
pub fn sign_patterns(n_bits: usize) -> DMatrix<f64> {
    let p = 1usize << n_bits;
    DMatrix::from_fn(n_bits, p, |i, j| if (j >> i) & 1 == 1 { 1.0 } else { -1.0 })
}

pub fn build_dataset(params: DatasetParams, choice: FeatureChoice, seed: u64) -> Result<Dataset> {
    params.validate()?;
    let p = params.patterns();
    let omega_x = sign_patterns(params.n_x);

    // Row j of Ω_y copies feature selected_features[j], in draw order.
    let selected_features: Vec<usize> = match choice {
        FeatureChoice::DeterministicFirst => (0..params.n_y).collect(),
        FeatureChoice::SeededRandom => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            index::sample(&mut rng, params.n_x, params.n_y).into_vec()
        }
    };

    let layout = params.layout();
    let mut input = DMatrix::zeros(params.input_dim(), p);
    input.rows_mut(0, params.n_x).copy_from(&omega_x);
    for b in 0..params.k_x {
        let start = params.n_x + b * p;
        for j in 0..p {
            input[(start + j, j)] = params.r;
        }
    }

    let mut output = DMatrix::zeros(params.output_dim(), p);
    for (row, &f) in selected_features.iter().enumerate() {
        output.row_mut(row).copy_from(&omega_x.row(f));
    }
    for b in 0..params.k_y {
        let start = params.n_y + b * p;
        for j in 0..p {
            output[(start + j, j)] = params.r;
        }
    }

    Ok(Dataset {
        input,
        output,
        layout,
        params,
        selected_features,
    })
}

impl Dataset {
    pub fn patterns(&self) -> usize {
        self.input.ncols()
    }

    pub fn omega_x(&self) -> DMatrix<f64> {
        rows_of(&self.input, &self.layout.comp_input_rows)
    }

    pub fn omega_y(&self) -> DMatrix<f64> {
        rows_of(&self.output, &self.layout.comp_output_rows)
    }

    pub fn covariances(&self) -> CovariancePair {
        covariances(self)
    }

    pub fn full_batch(&self) -> Batch {
        Batch {
            input: self.input.clone(),
            output: self.output.clone(),
        }
    }

    pub fn batch(&self, columns: &[usize]) -> Batch {
        Batch {
            input: self.input.select_columns(columns),
            output: self.output.select_columns(columns),
        }
    }

    /// Drops the compositional input rows, leaving an identity-only input
    /// over the same `2^n_x` examples. Used to emulate datasets with no
    /// compositional input but more than one example.
    pub fn without_compositional_input(&self) -> Dataset {
        let n = self.layout.comp_input_rows.len();
        let input = self.input.rows(n, self.input.nrows() - n).into_owned();
        let layout = BlockLayout {
            comp_input_rows: 0..0,
            noncomp_input_rows: 0..input.nrows(),
            comp_output_rows: self.layout.comp_output_rows.clone(),
            noncomp_output_rows: self.layout.noncomp_output_rows.clone(),
        };
        Dataset {
            input,
            output: self.output.clone(),
            layout,
            params: self.params,
            selected_features: self.selected_features.clone(),
        }
    }
}

pub(crate) fn rows_of(m: &DMatrix<f64>, rows: &Range<usize>) -> DMatrix<f64> {
    m.rows(rows.start, rows.len()).into_owned()
}

/// `Σx = X Xᵀ / 2^n_x` and `Σyx = Y Xᵀ / 2^n_x`.
pub fn covariances(d: &Dataset) -> CovariancePair {
    let inv = 1.0 / d.patterns() as f64;
    CovariancePair {
        sigma_x: &d.input * d.input.transpose() * inv,
        sigma_yx: &d.output * d.input.transpose() * inv,
    }
}

/// Uniform random train/test split of the example columns. Both halves are
/// returned sorted.
pub fn split(d: &Dataset, n_train: usize, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    split_indices(d.patterns(), n_train, seed)
}

pub fn split_indices(n: usize, n_train: usize, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if n_train == 0 || n_train > n {
        return Err(Error::param("n_train", format!("must lie in 1..={n}, got {n_train}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = index::sample(&mut rng, n, n_train).into_vec();
    train.sort_unstable();
    let mut in_train = vec![false; n];
    for &i in &train {
        in_train[i] = true;
    }
    let test = (0..n).filter(|&i| !in_train[i]).collect();
    Ok((train, test))
}

/// Numerical rank with an absolute singular-value tolerance.
pub fn numerical_rank(m: &DMatrix<f64>, tol: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .filter(|&&s| s > tol)
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn smallest_dataset_matches_hand_construction() {
        let p = DatasetParams::new(1, 1, 1, 0, 2.0).unwrap();
        let d = build_dataset(p, FeatureChoice::DeterministicFirst, 0).unwrap();
        let expected_in = DMatrix::from_row_slice(3, 2, &[-1.0, 1.0, 2.0, 0.0, 0.0, 2.0]);
        assert_eq!(d.input, expected_in);
        assert_eq!(d.output, DMatrix::from_row_slice(1, 2, &[-1.0, 1.0]));
    }

    #[test]
    fn fig3_shapes() {
        let d = build_dataset(DatasetParams::fig3(), FeatureChoice::DeterministicFirst, 0).unwrap();
        assert_eq!(d.input.shape(), (27, 8));
        assert_eq!(d.output.shape(), (9, 8));
    }

    #[test]
    fn full_selection_copies_the_patterns() {
        let p = DatasetParams::new(2, 2, 0, 0, 1.0).unwrap();
        let d = build_dataset(p, FeatureChoice::DeterministicFirst, 0).unwrap();
        assert_eq!(d.input, d.output);
        assert_eq!(d.input.shape(), (2, 4));
    }

    #[test]
    fn rejects_invalid_params() {
        assert!(DatasetParams::new(2, 3, 0, 0, 1.0).is_err());
        assert!(DatasetParams::new(0, 0, 1, 1, 1.0).is_err());
        assert!(DatasetParams::new(2, 1, 1, 0, 0.0).is_err());
        assert!(DatasetParams::new(2, 1, 0, 1, -1.0).is_err());
        // r is irrelevant without identity blocks
        assert!(DatasetParams::new(3, 2, 0, 0, 0.0).is_ok());
    }

    #[test]
    fn patterns_are_distinct_and_balanced() {
        let o = sign_patterns(4);
        for i in 0..4 {
            assert_eq!(o.row(i).sum(), 0.0);
        }
        let cols: std::collections::HashSet<Vec<i8>> =
            o.column_iter().map(|c| c.iter().map(|&v| v as i8).collect()).collect();
        assert_eq!(cols.len(), 16);
    }

    #[test]
    fn covariance_small_cases() {
        let p = DatasetParams::new(1, 1, 0, 0, 1.0).unwrap();
        let c = covariances(&build_dataset(p, FeatureChoice::DeterministicFirst, 0).unwrap());
        assert_eq!(c.sigma_x, DMatrix::from_element(1, 1, 1.0));

        let p = DatasetParams::new(1, 1, 1, 0, 1.0).unwrap();
        let c = covariances(&build_dataset(p, FeatureChoice::DeterministicFirst, 0).unwrap());
        let mut eig: Vec<f64> = c.sigma_x.symmetric_eigenvalues().iter().copied().collect();
        eig.sort_by(|a, b| b.partial_cmp(a).unwrap());
        assert_abs_diff_eq!(eig[0], 1.5, epsilon = 1e-12);
        assert_abs_diff_eq!(eig[1], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(eig[2], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn fig3_input_eigenvalues() {
        let d = build_dataset(DatasetParams::fig3(), FeatureChoice::DeterministicFirst, 0).unwrap();
        let c = covariances(&d);
        let eig = c.sigma_x.symmetric_eigenvalues();
        let near = |v: f64| eig.iter().filter(|&&e| (e - v).abs() < 1e-10).count();
        assert_eq!(near(11.0 / 8.0), 3);
        assert_eq!(near(3.0 / 8.0), 5);
        assert_eq!(near(0.0), 27 - 8);
    }

    #[test]
    fn seeded_feature_choice_is_distinct_and_reproducible() {
        let p = DatasetParams::new(4, 3, 1, 1, 1.0).unwrap();
        let a = build_dataset(p, FeatureChoice::SeededRandom, 11).unwrap();
        let b = build_dataset(p, FeatureChoice::SeededRandom, 11).unwrap();
        assert_eq!(a, b);
        let mut s = a.selected_features.clone();
        s.sort_unstable();
        s.dedup();
        assert_eq!(s.len(), 3);
        for (row, &f) in a.selected_features.iter().enumerate() {
            assert_eq!(a.output.row(row), a.input.row(f));
        }
    }

    #[test]
    fn split_contract() {
        let d = build_dataset(DatasetParams::fig3(), FeatureChoice::DeterministicFirst, 0).unwrap();
        let (tr, te) = split(&d, 3, 5).unwrap();
        assert_eq!(tr.len(), 3);
        assert_eq!(te.len(), 5);
        assert!(tr.iter().all(|i| !te.contains(i)));
        assert_eq!(split(&d, 3, 5).unwrap(), (tr, te));

        let (tr, te) = split(&d, 8, 1).unwrap();
        assert_eq!(tr.len(), 8);
        assert!(te.is_empty());
        assert!(split(&d, 0, 1).is_err());
        assert!(split(&d, 9, 1).is_err());
    }

    #[test]
    fn stripping_compositional_input_keeps_examples() {
        let p = DatasetParams::new(3, 0, 1, 1, 2.0).unwrap();
        let d = build_dataset(p, FeatureChoice::DeterministicFirst, 0)
            .unwrap()
            .without_compositional_input();
        assert_eq!(d.input.shape(), (8, 8));
        assert_eq!(d.input, DMatrix::identity(8, 8) * 2.0);
        assert!(d.layout.comp_input_rows.is_empty());
    }
}
