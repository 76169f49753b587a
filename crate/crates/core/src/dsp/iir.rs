//! Butterworth IIR design (bilinear transform with prewarping) and zero-phase
//! forward-backward application over second-order sections.

use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// One biquad `(b0 + b1 z⁻¹ + b2 z⁻²) / (1 + a1 z⁻¹ + a2 z⁻²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sos {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Sos {
    fn response(&self, z_inv: Complex64) -> Complex64 {
        let z2 = z_inv * z_inv;
        let num = z_inv * self.b[1] + z2 * self.b[2] + self.b[0];
        let den = z_inv * self.a[0] + z2 * self.a[1] + 1.0;
        num / den
    }

    /// Poles strictly inside the unit circle (Jury conditions for a quadratic).
    pub fn is_stable(&self) -> bool {
        let [a1, a2] = self.a;
        a2.abs() < 1.0 && a1.abs() < 1.0 + a2
    }

    /// Direct-form-II-transposed state for a unit step in steady state.
    fn step_state(&self) -> [f64; 2] {
        let [b0, b1, b2] = self.b;
        let [a1, a2] = self.a;
        let gain = (b0 + b1 + b2) / (1.0 + a1 + a2);
        let z2 = b2 - a2 * gain;
        let z1 = b1 - a1 * gain + z2;
        [z1, z2]
    }

    fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (1.0 + self.a[0] + self.a[1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FilterKind {
    Lowpass { cutoff_hz: f64 },
    Highpass { cutoff_hz: f64 },
    Bandpass { low_hz: f64, high_hz: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct IirFilter {
    pub sections: Vec<Sos>,
    /// Butterworth order per band edge.
    pub order: usize,
    pub kind: FilterKind,
    pub fs: f64,
}

impl IirFilter {
    /// Total number of poles across all sections.
    pub fn total_order(&self) -> usize {
        self.sections
            .iter()
            .map(|s| if s.a[1] == 0.0 && s.b[2] == 0.0 { 1 } else { 2 })
            .sum()
    }

    /// Complex frequency response at `freq_hz`.
    pub fn response(&self, freq_hz: f64) -> Complex64 {
        let w = 2.0 * PI * freq_hz / self.fs;
        let z_inv = Complex64::new(w.cos(), -w.sin());
        self.sections
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, s| acc * s.response(z_inv))
    }

    pub fn magnitude_db(&self, freq_hz: f64) -> f64 {
        20.0 * self.response(freq_hz).norm().log10()
    }

    pub fn is_stable(&self) -> bool {
        self.sections.iter().all(Sos::is_stable)
    }

    fn padding(&self) -> usize {
        3 * self.total_order()
    }
}

#[derive(Clone, Copy)]
enum EdgeKind {
    Low,
    High,
}

/// Butterworth sections for one edge. `k` is the prewarped `tan(π fc / fs)`.
fn edge_sections(order: usize, k: f64, edge: EdgeKind) -> Vec<Sos> {
    let mut sections = Vec::with_capacity(order.div_ceil(2));
    for i in 0..order / 2 {
        // Analog prototype pole pair at angle θ from the negative real axis;
        // denominator s² + a s + 1 with a = 2 cos θ. Odd orders also have a
        // real pole at θ = 0.
        let theta = PI * (2 * i + 1 + order % 2) as f64 / (2 * order) as f64;
        let a = 2.0 * theta.cos();
        let a0 = 1.0 + a * k + k * k;
        let a1 = (2.0 * k * k - 2.0) / a0;
        let a2 = (1.0 - a * k + k * k) / a0;
        let b = match edge {
            EdgeKind::Low => {
                let g = k * k / a0;
                [g, 2.0 * g, g]
            }
            EdgeKind::High => {
                let g = 1.0 / a0;
                [g, -2.0 * g, g]
            }
        };
        sections.push(Sos { b, a: [a1, a2] });
    }
    if order % 2 == 1 {
        let a0 = 1.0 + k;
        let a1 = (k - 1.0) / a0;
        let b = match edge {
            EdgeKind::Low => [k / a0, k / a0, 0.0],
            EdgeKind::High => [1.0 / a0, -1.0 / a0, 0.0],
        };
        sections.push(Sos { b, a: [a1, 0.0] });
    }
    sections
}

fn prewarp(cutoff: f64, fs: f64) -> Result<f64> {
    if !(cutoff > 0.0 && cutoff < fs / 2.0) {
        return Err(Error::InvalidCutoff { cutoff, fs });
    }
    Ok((PI * cutoff / fs).tan())
}

/// Butterworth highpass at `f_lo`, cascaded with a lowpass at `f_hi` when
/// given. Each edge gets `order` poles and sits at −3 dB.
pub fn design_butterworth(order: usize, f_lo: f64, f_hi: Option<f64>, fs: f64) -> Result<IirFilter> {
    if order == 0 {
        return Err(Error::InvalidConfig("filter order must be positive".into()));
    }
    let mut sections = edge_sections(order, prewarp(f_lo, fs)?, EdgeKind::High);
    let kind = match f_hi {
        Some(hi) => {
            if hi <= f_lo {
                return Err(Error::InvalidCutoff { cutoff: hi, fs });
            }
            sections.extend(edge_sections(order, prewarp(hi, fs)?, EdgeKind::Low));
            FilterKind::Bandpass {
                low_hz: f_lo,
                high_hz: hi,
            }
        }
        None => FilterKind::Highpass { cutoff_hz: f_lo },
    };
    Ok(IirFilter {
        sections,
        order,
        kind,
        fs,
    })
}

pub fn design_lowpass(order: usize, cutoff: f64, fs: f64) -> Result<IirFilter> {
    if order == 0 {
        return Err(Error::InvalidConfig("filter order must be positive".into()));
    }
    Ok(IirFilter {
        sections: edge_sections(order, prewarp(cutoff, fs)?, EdgeKind::Low),
        order,
        kind: FilterKind::Lowpass { cutoff_hz: cutoff },
        fs,
    })
}

/// Causal cascade filtering with an initial state scaled by `x0`.
fn sosfilt_in_place(sections: &[Sos], x: &mut [f64], x0: f64) {
    let mut level = x0;
    for s in sections {
        let [b0, b1, b2] = s.b;
        let [a1, a2] = s.a;
        let [mut z1, mut z2] = s.step_state();
        z1 *= level;
        z2 *= level;
        for v in x.iter_mut() {
            let xin = *v;
            let y = b0 * xin + z1;
            z1 = b1 * xin - a1 * y + z2;
            z2 = b2 * xin - a2 * y;
            *v = y;
        }
        level *= s.dc_gain();
    }
}

/// Zero-phase forward-backward filtering with odd reflection padding of
/// `3 × order` samples and steady-state initial conditions.
pub fn filtfilt(filter: &IirFilter, signal: &[f64]) -> Result<Vec<f64>> {
    let pad = filter.padding();
    let n = signal.len();
    if n <= pad {
        return Err(Error::SignalTooShort { needed: pad + 1, got: n });
    }
    let mut ext = Vec::with_capacity(n + 2 * pad);
    let first = signal[0];
    let last = signal[n - 1];
    ext.extend((1..=pad).rev().map(|i| 2.0 * first - signal[i]));
    ext.extend_from_slice(signal);
    ext.extend((1..=pad).map(|i| 2.0 * last - signal[n - 1 - i]));

    let x0 = ext[0];
    sosfilt_in_place(&filter.sections, &mut ext, x0);
    ext.reverse();
    let y0 = ext[0];
    sosfilt_in_place(&filter.sections, &mut ext, y0);
    ext.reverse();
    Ok(ext[pad..pad + n].to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    /// Analytic magnitude of the bilinear Butterworth cascade, written from
    /// the closed form rather than from the pole placement.
    fn analytic_gain(order: usize, lo: f64, hi: Option<f64>, fs: f64, f: f64) -> f64 {
        let t = |x: f64| (PI * x / fs).tan();
        let n2 = 2 * order as i32;
        let hp = 1.0 / (1.0 + (t(lo) / t(f)).powi(n2));
        let lp = hi.map_or(1.0, |h| 1.0 / (1.0 + (t(f) / t(h)).powi(n2)));
        (hp * lp).sqrt()
    }

    #[test]
    fn bandpass_matches_analytic_magnitude() {
        let f = design_butterworth(4, 1.0, Some(100.0), 1000.0).unwrap();
        assert!(f.is_stable());
        for freq in [0.3, 1.0, 5.0, 10.0, 50.0, 100.0, 200.0, 450.0] {
            let got = f.response(freq).norm();
            let want = analytic_gain(4, 1.0, Some(100.0), 1000.0, freq);
            assert!((got - want).abs() < 1e-9, "f={freq}: {got} vs {want}");
        }
        assert!((f.magnitude_db(1.0) + 3.0103).abs() < 0.2);
        assert!((f.magnitude_db(100.0) + 3.0103).abs() < 0.2);
        assert!(f.magnitude_db(10.0).abs() < 0.1);
    }

    #[test]
    fn highpass_kills_dc() {
        let f = design_butterworth(4, 1.0, None, 1000.0).unwrap();
        assert_eq!(f.response(0.0).norm(), 0.0);
        assert_eq!(f.total_order(), 4);
    }

    #[test]
    fn odd_order_is_supported() {
        let f = design_butterworth(3, 5.0, Some(40.0), 250.0).unwrap();
        assert_eq!(f.total_order(), 6);
        for freq in [2.0, 5.0, 20.0, 40.0, 80.0] {
            let want = analytic_gain(3, 5.0, Some(40.0), 250.0, freq);
            assert!((f.response(freq).norm() - want).abs() < 1e-9);
        }
    }

    #[test]
    fn invalid_cutoffs_are_rejected() {
        assert!(design_butterworth(4, 0.0, None, 100.0).is_err());
        assert!(design_butterworth(4, 1.0, Some(50.0), 100.0).is_err());
        assert!(design_butterworth(4, 10.0, Some(5.0), 100.0).is_err());
    }

    #[test]
    fn filtfilt_zero_and_dc() {
        let f = design_butterworth(4, 1.0, Some(100.0), 1000.0).unwrap();
        assert!(filtfilt(&f, &vec![0.0; 500]).unwrap().iter().all(|&v| v == 0.0));
        let y = filtfilt(&f, &vec![5.0; 4000]).unwrap();
        assert!(y.iter().all(|v| v.abs() < 1e-6), "{:?}", &y[..4]);
    }

    #[test]
    fn filtfilt_preserves_passband_sine() {
        let fs = 1000.0;
        let f = design_butterworth(4, 1.0, Some(100.0), fs).unwrap();
        let x: Vec<f64> = (0..20_000).map(|i| (2.0 * PI * 10.0 * i as f64 / fs).sin()).collect();
        let y = filtfilt(&f, &x).unwrap();
        let expected_gain = analytic_gain(4, 1.0, Some(100.0), fs, 10.0).powi(2);
        let trim = 5000;
        let peak = y[trim..x.len() - trim].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!((peak - 1.0).abs() < 0.01, "{peak}");
        assert!((peak - expected_gain).abs() < 0.01);
    }

    #[test]
    fn filtfilt_has_zero_lag() {
        let fs = 500.0;
        let f = design_butterworth(4, 5.0, Some(40.0), fs).unwrap();
        let n = 2001;
        let x: Vec<f64> = (0..n)
            .map(|i| {
                let t = (i as f64 - 1000.0) / fs;
                (-t * t / (2.0 * 0.01f64.powi(2))).exp() * (2.0 * PI * 15.0 * t).cos()
            })
            .collect();
        let y = filtfilt(&f, &x).unwrap();
        let xcorr = |lag: i64| -> f64 {
            (0..n as i64)
                .filter_map(|i| {
                    let j = i + lag;
                    (j >= 0 && j < n as i64).then(|| x[i as usize] * y[j as usize])
                })
                .sum()
        };
        let best = (-50..=50).max_by(|&a, &b| xcorr(a).total_cmp(&xcorr(b))).unwrap();
        assert_eq!(best, 0);
        // Symmetric input yields a symmetric output.
        for i in 200..800 {
            assert!((y[1000 - i] - y[1000 + i]).abs() < 1e-6);
        }
    }

    #[test]
    fn filtfilt_is_linear() {
        let f = design_butterworth(2, 3.0, Some(30.0), 200.0).unwrap();
        let x: Vec<f64> = (0..700).map(|i| ((i * 37 % 101) as f64 - 50.0) / 7.0).collect();
        let y = filtfilt(&f, &x).unwrap();
        let scaled: Vec<f64> = x.iter().map(|v| -2.5 * v).collect();
        let ys = filtfilt(&f, &scaled).unwrap();
        for (a, b) in y.iter().zip(&ys) {
            assert!((-2.5 * a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn short_signal_is_rejected() {
        let f = design_butterworth(4, 1.0, Some(100.0), 1000.0).unwrap();
        assert!(matches!(filtfilt(&f, &[1.0; 24]), Err(Error::SignalTooShort { .. })));
        assert!(filtfilt(&f, &[1.0; 25]).is_ok());
    }
}
