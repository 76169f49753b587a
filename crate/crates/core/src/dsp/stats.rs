//! Scalar statistics used across stages.

use alloc::vec::Vec;


use crate::error::{Error, Result};

pub fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().sum::<f64>() / x.len() as f64
}

/// Standard deviation with the `N − 1` denominator.
pub fn sample_sd(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(x);
    let ss: f64 = x.iter().map(|v| (v - m) * (v - m)).sum();
    (ss / (n - 1) as f64).sqrt()
}

/// Mean of squares.
pub fn mean_power(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
}

/// Pearson product-moment correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(Error::SignalTooShort { needed: 2, got: x.len() });
    }
    let mx = mean(x);
    let my = mean(y);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let dx = a - mx;
        let dy = b - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::ConstantInput);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Biased-moment sample skewness `m3 / m2^1.5`.
pub fn skewness(x: &[f64]) -> Result<f64> {
    if x.len() < 3 {
        return Err(Error::SignalTooShort { needed: 3, got: x.len() });
    }
    let m = mean(x);
    let n = x.len() as f64;
    let (mut m2, mut m3) = (0.0, 0.0);
    for v in x {
        let d = v - m;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
    }
    m2 /= n;
    m3 /= n;
    // Relative floor: values that differ only by rounding count as constant.
    let floor = 1e-13 * m.abs();
    if m2 == 0.0 || m2 <= floor * floor {
        return Err(Error::ConstantInput);
    }
    Ok(m3 / m2.powf(1.5))
}

/// Percentile in `[0, 100]` by linear interpolation between order statistics.
pub fn percentile(x: &[f64], q: f64) -> f64 {
    let mut sorted: Vec<f64> = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    percentile_sorted(&sorted, q)
}

pub fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let pos = (q / 100.0).clamp(0.0, 1.0) * (n - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            let frac = pos - lo as f64;
            sorted[lo] + frac * (sorted[hi] - sorted[lo])
        }
    }
}

pub fn median(x: &[f64]) -> f64 {
    percentile(x, 50.0)
}

/// Median absolute deviation (unscaled).
pub fn mad(x: &[f64]) -> f64 {
    let med = median(x);
    let dev: Vec<f64> = x.iter().map(|v| (v - med).abs()).collect();
    median(&dev)
}

/// Ordinary least squares `y ≈ intercept + slope·x`; returns
/// `(intercept, slope, rms_residual)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<(f64, f64, f64)> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let mx = mean(x);
    let my = mean(y);
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
    }
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let r = b - (intercept + slope * a);
            r * r
        })
        .sum();
    Some((intercept, slope, (ss / x.len() as f64).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Exp};

    #[test]
    fn pearson_cases() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert!((pearson(&x, &x).unwrap() - 1.0).abs() < 1e-15);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson(&x, &neg).unwrap() + 1.0).abs() < 1e-15);
        // Hand computation: dx = [-1,0,1], dy = [-7/3,-1/3,8/3];
        // sxy = 5, sxx = 2, syy = 114/9 → 5 / sqrt(2·114/9) = 0.99339926779...
        let r = pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 7.0]).unwrap();
        assert!((r - 0.993_399_267_798_782_8).abs() < 1e-12, "{r}");
        assert_eq!(pearson(&[1.0, 1.0], &[1.0, 2.0]), Err(Error::ConstantInput));
    }

    #[test]
    fn skewness_cases() {
        assert_eq!(skewness(&[-1.0, 0.0, 1.0]).unwrap(), 0.0);
        assert!(skewness(&[0.0, 0.0, 0.0, 10.0]).unwrap() > 0.0);
        assert_eq!(skewness(&[2.0, 2.0, 2.0]), Err(Error::ConstantInput));
    }

    #[test]
    fn exponential_skewness_is_two() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let exp = Exp::new(1.0).unwrap();
        let x: Vec<f64> = (0..100_000).map(|_| exp.sample(&mut rng)).collect();
        let s = skewness(&x).unwrap();
        assert!((s - 2.0).abs() < 0.1, "{s}");
    }

    #[test]
    fn sd_uses_sample_denominator() {
        // [0,2,0,2]: mean 1, squared deviations sum 4, /(N-1) = 4/3.
        let sd = sample_sd(&[0.0, 2.0, 0.0, 2.0]);
        assert!((sd - (4.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(sample_sd(&[1.0; 4]), 0.0);
    }

    #[test]
    fn percentile_interpolates() {
        let x = vec![4.0, 1.0, 3.0, 2.0];
        assert_eq!(percentile(&x, 0.0), 1.0);
        assert_eq!(percentile(&x, 100.0), 4.0);
        assert_eq!(percentile(&x, 50.0), 2.5);
        assert_eq!(percentile(&x, 75.0), 3.25);
        assert_eq!(mad(&[1.0, 2.0, 3.0, 4.0, 100.0]), 1.0);
    }
}
