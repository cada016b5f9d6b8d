//! Means, standard errors and normal-approximation intervals.

use crate::error::{Error, Result};

/// Mean and standard error (sample standard deviation over √n).
///
/// A single value has standard error 0.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    (mean, (sample_variance(xs) / n).sqrt())
}

/// Unbiased sample variance.
pub fn sample_variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Sample standard deviation.
pub fn sample_sd(xs: &[f64]) -> f64 {
    sample_variance(xs).sqrt()
}

/// 95% interval `mean ∓ 1.96·sd/√n`.
pub fn confidence_interval(mean: f64, sd: f64, n: usize) -> Result<(f64, f64)> {
    if n < 2 {
        return Err(Error::param("confidence interval needs at least two observations"));
    }
    if sd < 0.0 || !sd.is_finite() {
        return Err(Error::param("standard deviation must be finite and non-negative"));
    }
    let half = 1.96 * sd / (n as f64).sqrt();
    Ok((mean - half, mean + half))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_examples() {
        let (lo, hi) = confidence_interval(4.0, 2.0, 400).unwrap();
        assert!((lo - 3.804).abs() < 1e-12 && (hi - 4.196).abs() < 1e-12);
        assert_eq!(confidence_interval(1.5, 0.0, 10).unwrap(), (1.5, 1.5));
        assert!(confidence_interval(1.0, 1.0, 1).is_err());
        let mut last = 0.0;
        for n in (2..200).rev() {
            let (lo, hi) = confidence_interval(0.0, 1.0, n).unwrap();
            assert!(hi - lo > last);
            last = hi - lo;
        }
    }

    #[test]
    fn mean_and_se() {
        let (m, se) = mean_se(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        // sample sd = sqrt(5/3)
        assert!((se - (5.0f64 / 3.0).sqrt() / 2.0).abs() < 1e-12);
        assert_eq!(mean_se(&[7.0]), (7.0, 0.0));
    }
}
