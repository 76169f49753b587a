//! Welch power spectral density.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::fft::Fft;
use crate::error::{Error, Result};

/// One-sided PSD in `µV²/Hz`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsdEstimate {
    pub freqs_hz: Vec<f64>,
    pub power: Vec<f64>,
    pub resolution_hz: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Window {
    Hann,
    Rectangular,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Detrend {
    None,
    /// Remove each segment's mean.
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WelchParams {
    pub segment_len: usize,
    pub overlap_fraction: f64,
    pub window: Window,
    pub detrend: Detrend,
}

impl WelchParams {
    /// Two-second Hann segments with 50% overlap and mean removal, shortened
    /// to the signal when needed.
    pub fn default_for(fs: f64, n_samples: usize) -> Self {
        let two_seconds = (2.0 * fs).round() as usize;
        Self {
            segment_len: two_seconds.min(n_samples).max(1),
            overlap_fraction: 0.5,
            window: Window::Hann,
            detrend: Detrend::Constant,
        }
    }
}

fn window_coefficients(window: Window, len: usize) -> Vec<f64> {
    match window {
        Window::Rectangular => vec![1.0; len],
        // Periodic Hann, the usual choice for spectral analysis.
        Window::Hann => (0..len)
            .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / len as f64).cos())
            .collect(),
    }
}

/// Precomputed state for repeated Welch estimates of same-length segments.
pub struct WelchPlan {
    fs: f64,
    params: WelchParams,
    fft: Fft,
    window: Vec<f64>,
    scale: f64,
}

impl WelchPlan {
    pub fn new(fs: f64, params: WelchParams) -> Self {
        let window = window_coefficients(params.window, params.segment_len);
        let wss: f64 = window.iter().map(|w| w * w).sum();
        Self {
            fs,
            params,
            fft: Fft::new(params.segment_len),
            scale: 1.0 / (fs * wss),
            window,
        }
    }

    pub fn estimate(&self, signal: &[f64]) -> Result<PsdEstimate> {
        let len = self.params.segment_len;
        if len == 0 || signal.len() < len {
            return Err(Error::SignalTooShort {
                needed: len.max(1),
                got: signal.len(),
            });
        }
        let overlap = ((self.params.overlap_fraction * len as f64).round() as usize).min(len - 1);
        let step = len - overlap;
        let n_bins = len / 2 + 1;
        let mut acc = vec![0.0; n_bins];
        let mut buf = vec![Complex64::new(0.0, 0.0); len];
        let mut n_segments = 0usize;
        let mut start = 0;
        while start + len <= signal.len() {
            let seg = &signal[start..start + len];
            let offset = match self.params.detrend {
                Detrend::None => 0.0,
                Detrend::Constant => seg.iter().sum::<f64>() / len as f64,
            };
            for ((b, &x), &w) in buf.iter_mut().zip(seg).zip(&self.window) {
                *b = Complex64::new((x - offset) * w, 0.0);
            }
            self.fft.forward(&mut buf);
            for (a, b) in acc.iter_mut().zip(&buf) {
                *a += b.norm_sqr();
            }
            n_segments += 1;
            start += step;
        }
        let norm = self.scale / n_segments as f64;
        for (k, a) in acc.iter_mut().enumerate() {
            let one_sided = if k == 0 || (len.is_multiple_of(2) && k == len / 2) { 1.0 } else { 2.0 };
            *a *= norm * one_sided;
        }
        let df = self.fs / len as f64;
        Ok(PsdEstimate {
            freqs_hz: (0..n_bins).map(|k| k as f64 * df).collect(),
            power: acc,
            resolution_hz: df,
        })
    }
}

/// Averaged windowed periodograms, scaled so that `Σ power·df` approximates
/// the signal variance.
pub fn welch_psd(signal: &[f64], fs: f64, params: WelchParams) -> Result<PsdEstimate> {
    WelchPlan::new(fs, params).estimate(signal)
}

/// Mean PSD over bins with `f_lo ≤ f < f_hi`.
pub fn band_power(psd: &PsdEstimate, f_lo: f64, f_hi: f64) -> Result<f64> {
    let (sum, count) = psd
        .freqs_hz
        .iter()
        .zip(&psd.power)
        .filter(|(f, _)| **f >= f_lo && **f < f_hi)
        .fold((0.0, 0usize), |(s, c), (_, p)| (s + p, c + 1));
    if count == 0 {
        return Err(Error::EmptyBand { lo: f_lo, hi: f_hi });
    }
    Ok(sum / count as f64)
}

/// `Σ power·df` over bins with `f_lo ≤ f < f_hi`.
pub fn integrated_power(psd: &PsdEstimate, f_lo: f64, f_hi: f64) -> f64 {
    psd.freqs_hz
        .iter()
        .zip(&psd.power)
        .filter(|(f, _)| **f >= f_lo && **f < f_hi)
        .map(|(_, p)| p * psd.resolution_hz)
        .sum()
}

/// Default band for 1/f analysis, capped at 90% of Nyquist.
pub const ONE_OVER_F_BAND_HZ: (f64, f64) = (2.0, 35.0);

/// `(ln f, ln P)` over bins with `lo ≤ f ≤ min(hi, 0.45·fs)`; power is
/// floored at the smallest positive normal value.
pub fn log_log_spectrum(psd: &PsdEstimate, fs: f64, band: (f64, f64)) -> Result<(Vec<f64>, Vec<f64>)> {
    let hi = band.1.min(0.45 * fs);
    let (ln_f, ln_p): (Vec<f64>, Vec<f64>) = psd
        .freqs_hz
        .iter()
        .zip(&psd.power)
        .filter(|(f, _)| **f >= band.0 && **f <= hi && **f > 0.0)
        .map(|(f, p)| (f.ln(), p.max(f64::MIN_POSITIVE).ln()))
        .unzip();
    if ln_f.len() < 2 {
        return Err(Error::EmptyBand { lo: band.0, hi });
    }
    Ok((ln_f, ln_p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn sine(freq: f64, fs: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| (2.0 * PI * freq * i as f64 / fs).sin()).collect()
    }

    #[test]
    fn constant_signal_is_all_dc() {
        let x = vec![3.0; 512];
        let params = WelchParams {
            segment_len: 128,
            overlap_fraction: 0.5,
            window: Window::Hann,
            detrend: Detrend::None,
        };
        let psd = welch_psd(&x, 100.0, params).unwrap();
        let dc = psd.power[0];
        assert!(dc > 1.0);
        // A periodic Hann window leaks only into the first neighbour.
        assert!(psd.power[2..].iter().all(|&p| p < 1e-20 * dc.max(1.0)));
    }

    #[test]
    fn sine_peak_matches_direct_dft() {
        let fs = 250.0;
        let x = sine(10.0, fs, 1000);
        let params = WelchParams::default_for(fs, x.len());
        let psd = welch_psd(&x, fs, params).unwrap();
        let peak = (0..psd.power.len())
            .max_by(|&a, &b| psd.power[a].total_cmp(&psd.power[b]))
            .unwrap();
        assert_eq!(psd.freqs_hz[peak], 10.0);

        // Oracle: direct DFT of the first windowed segment.
        let len = params.segment_len;
        let w = window_coefficients(Window::Hann, len);
        let seg: Vec<f64> = x[..len].iter().zip(&w).map(|(a, b)| a * b).collect();
        let dft_mag = |k: usize| -> f64 {
            let (mut re, mut im) = (0.0, 0.0);
            for (j, v) in seg.iter().enumerate() {
                let th = -2.0 * PI * (j * k) as f64 / len as f64;
                re += v * th.cos();
                im += v * th.sin();
            }
            re * re + im * im
        };
        let oracle_peak = (0..=len / 2)
            .max_by(|&a, &b| dft_mag(a).total_cmp(&dft_mag(b)))
            .unwrap();
        assert_eq!(oracle_peak, peak);
    }

    #[test]
    fn white_noise_integrates_to_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x: Vec<f64> = (0..60_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let fs = 500.0;
        let psd = welch_psd(&x, fs, WelchParams::default_for(fs, x.len())).unwrap();
        let total = integrated_power(&psd, 0.0, f64::INFINITY);
        assert!((total - 1.0).abs() < 0.05, "{total}");
    }

    #[test]
    fn repeated_segments_average_to_single_periodogram() {
        let seg: Vec<f64> = (0..64).map(|i| ((i * 7 % 13) as f64).sin()).collect();
        let mut x = Vec::new();
        for _ in 0..5 {
            x.extend_from_slice(&seg);
        }
        let params = WelchParams {
            segment_len: 64,
            overlap_fraction: 0.0,
            window: Window::Hann,
            detrend: Detrend::Constant,
        };
        let many = welch_psd(&x, 64.0, params).unwrap();
        let one = welch_psd(&seg, 64.0, params).unwrap();
        for (a, b) in many.power.iter().zip(&one.power) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1e-12));
        }
    }

    #[test]
    fn band_power_cases() {
        let flat = PsdEstimate {
            freqs_hz: (0..51).map(|k| k as f64).collect(),
            power: vec![2.5; 51],
            resolution_hz: 1.0,
        };
        assert_eq!(band_power(&flat, 8.0, 13.0).unwrap(), 2.5);
        assert_eq!(band_power(&flat, 30.0, 40.0).unwrap(), 2.5);
        assert!(matches!(band_power(&flat, 0.2, 0.5), Err(Error::EmptyBand { .. })));

        let fs = 250.0;
        let x = sine(10.0, fs, 2500);
        let psd = welch_psd(&x, fs, WelchParams::default_for(fs, x.len())).unwrap();
        let alpha = band_power(&psd, 8.0, 13.0).unwrap();
        let gamma = band_power(&psd, 30.0, 40.0).unwrap();
        assert!(alpha > 1e6 * gamma, "{alpha} vs {gamma}");
    }

    #[test]
    fn short_signal_is_rejected() {
        let params = WelchParams {
            segment_len: 64,
            overlap_fraction: 0.5,
            window: Window::Hann,
            detrend: Detrend::Constant,
        };
        assert!(matches!(
            welch_psd(&[0.0; 10], 10.0, params),
            Err(Error::SignalTooShort { .. })
        ));
    }
}
