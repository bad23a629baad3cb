//! Exact full-rank probability for samples of three-bit sign patterns.
//!
//! The eight patterns are the vertices of a cube. A sample of three or more
//! distinct vertices is rank deficient exactly when it lies in one of the six
//! diagonal planes `x_i = ±x_j`, each of which holds two opposite pairs.

use crate::error::{Error, Result};

fn choose(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

pub fn exact_rank_probability_3features(sample_size: usize) -> Result<f64> {
    if !(1..=8).contains(&sample_size) {
        return Err(Error::param(
            "sample_size",
            format!("must lie in 1..=8, got {sample_size}"),
        ));
    }
    if sample_size < 3 {
        return Ok(0.0);
    }
    let s = sample_size as u64;
    let deficient = 6 * choose(4, s);
    Ok(1.0 - deficient as f64 / choose(8, s) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_values() {
        assert_eq!(exact_rank_probability_3features(1).unwrap(), 0.0);
        assert_eq!(exact_rank_probability_3features(2).unwrap(), 0.0);
        assert!((exact_rank_probability_3features(3).unwrap() - 32.0 / 56.0).abs() < 1e-15);
        assert!((exact_rank_probability_3features(4).unwrap() - 64.0 / 70.0).abs() < 1e-15);
        for s in 5..=8 {
            assert_eq!(exact_rank_probability_3features(s).unwrap(), 1.0);
        }
        assert!(exact_rank_probability_3features(0).is_err());
        assert!(exact_rank_probability_3features(9).is_err());
    }
}
