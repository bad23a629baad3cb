//! Probability that a random sample of sign patterns spans the full
//! compositional feature space, by Monte-Carlo sampling and by enumeration.

use itertools::Itertools;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{numerical_rank, sign_patterns};
use crate::error::{Error, Result};

pub const RANK_TOL: f64 = 1e-8;
pub const MAX_MC_FEATURES: usize = 10;
pub const MAX_ENUM_FEATURES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankTrial {
    pub n_features: usize,
    pub sample_size: usize,
    pub trials: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankEstimate {
    pub probability: f64,
    /// Binomial standard error `√(p(1 − p)/trials)`.
    pub std_error: f64,
    pub full_rank: usize,
    pub trials: usize,
}

fn check_sizes(n_features: usize, sample_size: usize, max_n: usize) -> Result<()> {
    if n_features == 0 || n_features > max_n {
        return Err(Error::param(
            "n_features",
            format!("must lie in 1..={max_n}, got {n_features}"),
        ));
    }
    let p = 1usize << n_features;
    if sample_size == 0 || sample_size > p {
        return Err(Error::param(
            "sample_size",
            format!("must lie in 1..={p}, got {sample_size}"),
        ));
    }
    Ok(())
}

impl RankTrial {
    pub fn validate(&self) -> Result<()> {
        check_sizes(self.n_features, self.sample_size, MAX_MC_FEATURES)?;
        if self.trials == 0 {
            return Err(Error::param("trials", "at least one trial is required"));
        }
        Ok(())
    }
}

fn spans(patterns: &nalgebra::DMatrix<f64>, cols: &[usize]) -> bool {
    cols.len() >= patterns.nrows() && numerical_rank(&patterns.select_columns(cols), RANK_TOL) == patterns.nrows()
}

/// Each trial draws `sample_size` distinct patterns with its own stream of
/// a seeded ChaCha generator, so the result does not depend on scheduling.
pub fn estimate_full_rank_probability(t: &RankTrial) -> Result<RankEstimate> {
    t.validate()?;
    let patterns = sign_patterns(t.n_features);
    let n = patterns.ncols();
    let one = |trial: usize| -> bool {
        let mut rng = ChaCha8Rng::seed_from_u64(t.seed);
        rng.set_stream(trial as u64);
        let cols = index::sample(&mut rng, n, t.sample_size).into_vec();
        spans(&patterns, &cols)
    };

    #[cfg(feature = "parallel")]
    let full_rank = {
        use rayon::prelude::*;
        (0..t.trials).into_par_iter().filter(|&i| one(i)).count()
    };
    #[cfg(not(feature = "parallel"))]
    let full_rank = (0..t.trials).filter(|&i| one(i)).count();

    let p = full_rank as f64 / t.trials as f64;
    Ok(RankEstimate {
        probability: p,
        std_error: (p * (1.0 - p) / t.trials as f64).sqrt(),
        full_rank,
        trials: t.trials,
    })
}

/// Exact fraction of all `sample_size`-subsets that have full rank.
pub fn enumerate_full_rank_probability(n_features: usize, sample_size: usize) -> Result<f64> {
    if n_features > MAX_ENUM_FEATURES {
        return Err(Error::EnumerationTooLarge {
            n: 1 << n_features.min(63),
            k: sample_size,
        });
    }
    check_sizes(n_features, sample_size, MAX_ENUM_FEATURES)?;
    let patterns = sign_patterns(n_features);
    let (mut full, mut total) = (0usize, 0usize);
    for cols in (0..patterns.ncols()).combinations(sample_size) {
        total += 1;
        if spans(&patterns, &cols) {
            full += 1;
        }
    }
    Ok(full as f64 / total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::theory::exact_rank_probability_3features;

    #[test]
    fn enumeration_small_cases() {
        assert!((enumerate_full_rank_probability(3, 3).unwrap() - 32.0 / 56.0).abs() < 1e-15);
        assert_eq!(enumerate_full_rank_probability(3, 2).unwrap(), 0.0);
        assert_eq!(enumerate_full_rank_probability(1, 1).unwrap(), 1.0);
        assert!(matches!(
            enumerate_full_rank_probability(5, 3),
            Err(Error::EnumerationTooLarge { .. })
        ));
        assert!(enumerate_full_rank_probability(3, 9).is_err());
    }

    #[test]
    fn enumeration_matches_opposite_pair_argument() {
        for s in 1..=8 {
            let e = enumerate_full_rank_probability(3, s).unwrap();
            let a = exact_rank_probability_3features(s).unwrap();
            assert!((e - a).abs() < 1e-12, "size {s}: {e} vs {a}");
        }
    }

    #[test]
    fn full_sample_always_spans() {
        let t = RankTrial {
            n_features: 3,
            sample_size: 8,
            trials: 200,
            seed: 1,
        };
        let e = estimate_full_rank_probability(&t).unwrap();
        assert_eq!(e.probability, 1.0);
        assert_eq!(e.std_error, 0.0);
    }

    #[test]
    fn estimate_is_deterministic() {
        let t = RankTrial {
            n_features: 4,
            sample_size: 5,
            trials: 500,
            seed: 9,
        };
        assert_eq!(
            estimate_full_rank_probability(&t).unwrap(),
            estimate_full_rank_probability(&t).unwrap()
        );
        assert!(estimate_full_rank_probability(&RankTrial { trials: 0, ..t }).is_err());
        assert!(estimate_full_rank_probability(&RankTrial { sample_size: 17, ..t }).is_err());
    }
}
