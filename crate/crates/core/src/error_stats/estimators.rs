//! Robust and paired estimators over per-path samples.

use crate::error::{invalid, Result};

/// Default number of median-of-means batches.
pub const DEFAULT_BATCHES: usize = 32;

/// Scale factor turning a median absolute deviation into a standard
/// deviation for Gaussian data.
const MAD_TO_SD: f64 = 1.482_602_218_505_602;

/// Median-of-means estimate and the spread of its batch means.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomEstimate {
    pub value: f64,
    /// Robust standard deviation (scaled MAD) of the batch means.
    pub spread: f64,
    pub batches: usize,
}

/// Median of a slice; the mean of the two middle values for even length.
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty());
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Median of means over `batches` batches. Sample `i` of `samples` belongs
/// to batch `indices[i] % batches`, so the estimate depends only on which
/// paths land in which batch, not on their order.
pub fn median_of_means(samples: &[f64], indices: &[u64], batches: usize) -> Result<MomEstimate> {
    if samples.len() != indices.len() {
        return Err(invalid("samples and path indices differ in length"));
    }
    if batches == 0 {
        return Err(invalid("median of means needs at least one batch"));
    }
    let mut per_batch: Vec<Vec<f64>> = vec![Vec::new(); batches];
    for (x, &i) in samples.iter().zip(indices) {
        per_batch[(i % batches as u64) as usize].push(*x);
    }
    if per_batch.iter().any(Vec::is_empty) {
        return Err(invalid(format!(
            "{} samples cannot fill {batches} batches",
            samples.len()
        )));
    }
    // Each batch is summed in sorted order so that permuting the samples
    // cannot change the rounding.
    let means: Vec<f64> = per_batch
        .iter_mut()
        .map(|b| {
            b.sort_by(f64::total_cmp);
            b.iter().sum::<f64>() / b.len() as f64
        })
        .collect();
    let value = median(&means);
    let deviations: Vec<f64> = means.iter().map(|m| (m - value).abs()).collect();
    Ok(MomEstimate {
        value,
        spread: MAD_TO_SD * median(&deviations),
        batches,
    })
}

/// Sample mean and its standard error.
pub fn mean_and_se(samples: &[f64]) -> (f64, f64) {
    let n = samples.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, f64::NAN);
    }
    let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut r = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = 0.5 * (i + j) as f64 + 1.0;
        for k in i..=j {
            r[order[k]] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation (Pearson correlation of average ranks).
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let rx = ranks(x);
    let ry = ranks(y);
    let n = x.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx) * (a - mx)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my) * (b - my)).sum();
    cov / (vx * vy).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), 2.5);
    }

    #[test]
    fn mom_of_constant_samples() {
        let idx: Vec<u64> = (0..64).collect();
        let est = median_of_means(&[2.5; 64], &idx, 32).unwrap();
        assert_eq!(est.value, 2.5);
        assert_eq!(est.spread, 0.0);
    }

    #[test]
    fn mom_resists_a_single_outlier() {
        let idx: Vec<u64> = (0..320).collect();
        let mut s = vec![1.0; 320];
        s[7] = 1e12;
        let est = median_of_means(&s, &idx, 32).unwrap();
        assert_eq!(est.value, 1.0);
    }

    #[test]
    fn mom_needs_every_batch_filled() {
        let idx: Vec<u64> = (0..10).collect();
        assert!(median_of_means(&[1.0; 10], &idx, 32).is_err());
    }

    #[test]
    fn spearman_of_monotone_sequences() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert!((spearman(&x, &[10.0, 20.0, 30.0, 40.0]) - 1.0).abs() < 1e-15);
        assert!((spearman(&x, &[4.0, 3.0, 2.0, 1.0]) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn standard_error_of_known_sample() {
        let (m, se) = mean_and_se(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((se - (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn mom_is_permutation_invariant(
            values in prop::collection::vec(-1e6f64..1e6, 64..200),
            seed in any::<u64>(),
        ) {
            let idx: Vec<u64> = (0..values.len() as u64).collect();
            let a = median_of_means(&values, &idx, 32).unwrap();
            // Shuffle samples together with their indices.
            let mut pairs: Vec<(f64, u64)> = values.iter().copied().zip(idx.iter().copied()).collect();
            pairs.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let (v2, i2): (Vec<f64>, Vec<u64>) = pairs.into_iter().unzip();
            let b = median_of_means(&v2, &i2, 32).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn mom_lies_within_sample_range(values in prop::collection::vec(0f64..1e3, 32..100)) {
            let idx: Vec<u64> = (0..values.len() as u64).collect();
            let est = median_of_means(&values, &idx, 32).unwrap();
            let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(est.value >= lo - 1e-9 && est.value <= hi + 1e-9);
            prop_assert!(est.spread >= 0.0);
        }
    }
}
