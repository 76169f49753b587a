//! Power-line removal by spectral/spatial decomposition.
//!
//! The recording is split into a branch with the line frequency and its
//! harmonics notched out (`X'`) and the complementary narrow-band branch
//! (`X'' = X − X'`). Denoising source separation finds the spatial filters
//! that maximise the ratio of line-band power to total power in `X''`; the
//! strongest components are projected out of `X''` before the branches are
//! summed back.
//!
//! Covariances are accumulated directly in the frequency domain (Parseval),
//! so only the notch bins are visited.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dsp::fft::{inverse_real, real_spectrum, real_spectrum_pair, Fft};
use crate::dsp::stats::{mad, median};
use crate::error::{Error, Result};
use crate::linalg::sym_eigen_desc;
use crate::model::{NRemove, PipelineConfig, Recording, StageReport};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZaplineConfig {
    pub line_freq_hz: f64,
    /// Harmonics to treat (fundamental counts as 1). `None` = all below Nyquist.
    pub n_harmonics: Option<usize>,
    pub n_remove: NRemove,
    /// Half-width of the band around each harmonic used as the DSS bias.
    pub dss_bias_bandwidth_hz: f64,
    /// Half-width of the band zeroed in the clean branch. Must exceed the
    /// bias half-width, otherwise both covariances coincide.
    pub notch_halfwidth_hz: f64,
}

impl ZaplineConfig {
    pub fn new(line_freq_hz: f64) -> Self {
        Self {
            line_freq_hz,
            n_harmonics: None,
            n_remove: NRemove::Auto,
            dss_bias_bandwidth_hz: 0.5,
            notch_halfwidth_hz: 2.0,
        }
    }

    pub fn from_pipeline(cfg: &PipelineConfig, line_freq_hz: f64) -> Self {
        Self {
            n_remove: cfg.zapline_n_remove,
            dss_bias_bandwidth_hz: cfg.zapline_bias_bandwidth_hz,
            notch_halfwidth_hz: cfg.zapline_notch_halfwidth_hz,
            ..Self::new(line_freq_hz)
        }
    }

    fn check(&self) -> Result<()> {
        if self.line_freq_hz != 50.0 && self.line_freq_hz != 60.0 {
            return Err(Error::InvalidConfig(alloc::format!(
                "line frequency must be 50 or 60 Hz, got {}",
                self.line_freq_hz
            )));
        }
        if !(self.dss_bias_bandwidth_hz > 0.0 && self.notch_halfwidth_hz > self.dss_bias_bandwidth_hz) {
            return Err(Error::InvalidConfig(
                "need 0 < dss_bias_bandwidth_hz < notch_halfwidth_hz".into(),
            ));
        }
        Ok(())
    }

    /// Harmonic frequencies below Nyquist.
    pub fn harmonics(&self, fs: f64) -> Vec<f64> {
        let nyquist = fs / 2.0;
        let max = self.n_harmonics.unwrap_or(usize::MAX);
        (1..=max)
            .map(|h| h as f64 * self.line_freq_hz)
            .take_while(|&f| f < nyquist)
            .collect()
    }
}

/// Per-bin weights over the one-sided spectrum `0..=n/2`.
struct BandMasks {
    /// Gain applied to the clean branch (0 in the notch, 0.5 on the taper bins).
    clean_gain: Vec<f64>,
    /// Whether the bin belongs to the DSS bias band.
    bias: Vec<bool>,
}

impl BandMasks {
    fn new(n: usize, fs: f64, cfg: &ZaplineConfig) -> Self {
        let half = n / 2;
        let df = fs / n as f64;
        let mut clean_gain = vec![1.0f64; half + 1];
        let mut bias = vec![false; half + 1];
        for h in cfg.harmonics(fs) {
            let lo = ((h - cfg.notch_halfwidth_hz) / df).ceil().max(0.0) as usize;
            let hi = (((h + cfg.notch_halfwidth_hz) / df).floor() as usize).min(half);
            for k in lo..=hi {
                clean_gain[k] = 0.0;
                if (k as f64 * df - h).abs() <= cfg.dss_bias_bandwidth_hz {
                    bias[k] = true;
                }
            }
            for k in [lo.checked_sub(1), Some(hi + 1)].into_iter().flatten() {
                if k <= half {
                    clean_gain[k] = clean_gain[k].min(0.5);
                }
            }
        }
        Self { clean_gain, bias }
    }

    fn line_bins(&self) -> impl Iterator<Item = usize> + '_ {
        self.clean_gain
            .iter()
            .enumerate()
            .filter(|(_, &g)| g < 1.0)
            .map(|(k, _)| k)
    }
}

/// Weight of one-sided bin `k` in a Parseval sum over a length-`n` spectrum.
fn fold_weight(k: usize, n: usize) -> f64 {
    if k == 0 || (n.is_multiple_of(2) && k == n / 2) {
        1.0
    } else {
        2.0
    }
}

fn spectra(plan: &Fft, rows: &[&[f64]]) -> Vec<Vec<Complex64>> {
    let mut out = Vec::with_capacity(rows.len());
    let mut chunks = rows.chunks_exact(2);
    for pair in &mut chunks {
        let (a, b) = real_spectrum_pair(plan, pair[0], pair[1]);
        out.push(a);
        out.push(b);
    }
    if let [last] = chunks.remainder() {
        out.push(real_spectrum(plan, last));
    }
    out
}

/// The two branches, one row per channel (masked rows stay zero).
#[derive(Debug, Clone, PartialEq)]
pub struct Branches {
    pub clean: Vec<Vec<f64>>,
    pub line: Vec<Vec<f64>>,
}

fn check_length(recording: &Recording) -> Result<()> {
    let needed = (2.0 * recording.sampling_rate_hz).ceil() as usize;
    if recording.n_samples() < needed {
        return Err(Error::SignalTooShort {
            needed,
            got: recording.n_samples(),
        });
    }
    Ok(())
}

/// Splits every channel into the notched branch and its complement. The two
/// branches sum to the input exactly.
pub fn split_branches(recording: &Recording, cfg: &ZaplineConfig) -> Result<Branches> {
    cfg.check()?;
    check_length(recording)?;
    let n = recording.n_samples();
    let fs = recording.sampling_rate_hz;
    let plan = Fft::new(n);
    let masks = BandMasks::new(n, fs, cfg);
    let mut clean = Vec::with_capacity(recording.n_channels());
    let mut line = Vec::with_capacity(recording.n_channels());
    for row in recording.rows() {
        let mut spec = real_spectrum(&plan, row);
        for k in 0..=n / 2 {
            let g = masks.clean_gain[k];
            spec[k] *= g;
            if k != 0 && 2 * k != n {
                spec[n - k] *= g;
            }
        }
        let x_clean = inverse_real(&plan, &spec);
        let x_line: Vec<f64> = row.iter().zip(&x_clean).map(|(x, c)| x - c).collect();
        clean.push(x_clean);
        line.push(x_line);
    }
    Ok(Branches { clean, line })
}

/// DSS result: generalized eigenvalues (descending) and the matching spatial
/// filters as unit-norm columns.
#[derive(Debug, Clone, PartialEq)]
pub struct DssComponents {
    pub eigenvalues: Vec<f64>,
    pub filters: DMatrix<f64>,
    /// Filters scaled so that each component has unit power in the full
    /// covariance (columns of the joint diagonalizer).
    diagonalizer: DMatrix<f64>,
    full_cov: DMatrix<f64>,
}

fn accumulate_cov(
    cov: &mut DMatrix<f64>,
    spectra: &[Vec<Complex64>],
    bins: impl Iterator<Item = (usize, f64)>,
    n: usize,
) {
    let m = spectra.len();
    let scale = 1.0 / (n as f64 * n as f64);
    for (k, w) in bins {
        let w = w * fold_weight(k, n) * scale;
        for i in 0..m {
            let si = spectra[i][k];
            for j in i..m {
                let sj = spectra[j][k];
                cov[(i, j)] += w * (si.re * sj.re + si.im * sj.im);
            }
        }
    }
    for i in 0..m {
        for j in 0..i {
            cov[(i, j)] = cov[(j, i)];
        }
    }
}

fn joint_diagonalize(full: DMatrix<f64>, biased: &DMatrix<f64>) -> Result<DssComponents> {
    let m = full.nrows();
    let trace = full.trace();
    if !(trace > 0.0) {
        return Err(Error::RankZero);
    }
    let mut ridged = full.clone();
    let ridge = 1e-8 * trace / m as f64;
    for i in 0..m {
        ridged[(i, i)] += ridge;
    }
    let (vals, vecs) = sym_eigen_desc(ridged);
    let inv_sqrt = DVector::from_iterator(m, vals.iter().map(|&v| 1.0 / v.max(ridge).sqrt()));
    let whitener = &vecs * DMatrix::from_diagonal(&inv_sqrt);
    let rotated = whitener.transpose() * biased * &whitener;
    let (eigenvalues, rot) = sym_eigen_desc(rotated);
    let diagonalizer = whitener * rot;
    let mut filters = diagonalizer.clone();
    for mut col in filters.column_iter_mut() {
        let norm = col.norm();
        if norm > 0.0 {
            col /= norm;
        }
    }
    Ok(DssComponents {
        eigenvalues,
        filters,
        diagonalizer,
        full_cov: full,
    })
}

/// Solves `C_biased w = λ C_full w` for the rows of the line branch, with
/// `C_biased` the covariance restricted to the bias bands around the line
/// harmonics.
pub fn dss_line_components(line_branch: &[Vec<f64>], fs: f64, cfg: &ZaplineConfig) -> Result<DssComponents> {
    cfg.check()?;
    if line_branch.len() < 2 {
        return Err(Error::InsufficientChannels {
            needed: 2,
            got: line_branch.len(),
        });
    }
    let n = line_branch[0].len();
    let plan = Fft::new(n);
    let rows: Vec<&[f64]> = line_branch.iter().map(Vec::as_slice).collect();
    let spec = spectra(&plan, &rows);
    let masks = BandMasks::new(n, fs, cfg);
    let m = rows.len();
    let mut full = DMatrix::zeros(m, m);
    accumulate_cov(&mut full, &spec, (0..=n / 2).map(|k| (k, 1.0)), n);
    let mut biased = DMatrix::zeros(m, m);
    accumulate_cov(
        &mut biased,
        &spec,
        (0..=n / 2).filter(|&k| masks.bias[k]).map(|k| (k, 1.0)),
        n,
    );
    joint_diagonalize(full, &biased)
}

/// Components above `median + 3·MAD` of the eigenvalue spectrum.
pub fn auto_n_remove(eigenvalues: &[f64]) -> usize {
    let threshold = median(eigenvalues) + 3.0 * mad(eigenvalues);
    eigenvalues.iter().filter(|&&v| v > threshold).count()
}

/// Removes line noise and returns the cleaned recording with its report.
pub fn apply_zapline(recording: &Recording, cfg: &ZaplineConfig) -> Result<(Recording, StageReport)> {
    cfg.check()?;
    check_length(recording)?;
    let active = recording.active_channels();
    if active.len() < 2 {
        return Err(Error::InsufficientChannels {
            needed: 2,
            got: active.len(),
        });
    }
    let fs = recording.sampling_rate_hz;
    let n = recording.n_samples();
    let harmonics = cfg.harmonics(fs);
    let mut report = StageReport::new("zapline")
        .param("line_freq_hz", cfg.line_freq_hz)
        .param("harmonics_hz", harmonics.clone())
        .param("dss_bias_bandwidth_hz", cfg.dss_bias_bandwidth_hz)
        .param("notch_halfwidth_hz", cfg.notch_halfwidth_hz);
    if cfg.n_remove == NRemove::Fixed(0) || harmonics.is_empty() {
        report.set_param("n_remove", 0usize);
        return Ok((recording.clone(), report));
    }

    let plan = Fft::new(n);
    let rows: Vec<&[f64]> = active.iter().map(|&c| recording.channel(c)).collect();
    let spec = spectra(&plan, &rows);
    let masks = BandMasks::new(n, fs, cfg);
    let line_bins: Vec<usize> = masks.line_bins().collect();
    let m = active.len();

    let mut full = DMatrix::zeros(m, m);
    accumulate_cov(
        &mut full,
        &spec,
        line_bins.iter().map(|&k| {
            let g = 1.0 - masks.clean_gain[k];
            (k, g * g)
        }),
        n,
    );
    let mut biased = DMatrix::zeros(m, m);
    accumulate_cov(
        &mut biased,
        &spec,
        line_bins.iter().filter(|&&k| masks.bias[k]).map(|&k| (k, 1.0)),
        n,
    );
    let dss = joint_diagonalize(full, &biased)?;
    let n_remove = match cfg.n_remove {
        NRemove::Auto => auto_n_remove(&dss.eigenvalues),
        NRemove::Fixed(k) => k.min(m),
    };
    let power_before = dss.full_cov.trace();
    report.set_param("n_remove", n_remove);
    report.set_param("eigenvalues", dss.eigenvalues.clone());
    report.set_param("line_band_power_before", power_before / m as f64);
    if n_remove == 0 {
        report.set_param("line_band_power_after", power_before / m as f64);
        return Ok((recording.clone(), report));
    }

    // Least-squares patterns of the removed components: C w_j / (w_jᵀ C w_j).
    let top = dss.diagonalizer.columns(0, n_remove).into_owned();
    let c_top = &dss.full_cov * &top;
    let mut patterns = c_top.clone();
    for j in 0..n_remove {
        let denom = top.column(j).dot(&c_top.column(j));
        if denom > 0.0 {
            let mut col = patterns.column_mut(j);
            col /= denom;
        } else {
            patterns.column_mut(j).fill(0.0);
        }
    }
    let projector = DMatrix::identity(m, m) - &patterns * top.transpose();
    let power_after = (&projector * &dss.full_cov * projector.transpose()).trace();
    report.set_param("line_band_power_after", power_after / m as f64);

    // Component time courses y_j(t) from the line-branch spectra.
    let mut out = recording.clone();
    for j in 0..n_remove {
        let mut comp = vec![Complex64::new(0.0, 0.0); n];
        for &k in &line_bins {
            let g = 1.0 - masks.clean_gain[k];
            let v: Complex64 = (0..m).map(|i| spec[i][k] * (top[(i, j)] * g)).sum();
            comp[k] = v;
            if k != 0 && 2 * k != n {
                comp[n - k] = v.conj();
            }
        }
        let y = inverse_real(&plan, &comp);
        for (i, &c) in active.iter().enumerate() {
            let a = patterns[(i, j)];
            for (o, yv) in out.channel_mut(c).iter_mut().zip(&y) {
                *o -= a * yv;
            }
        }
    }
    Ok((out, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::stats::mean_power;
    use core::f64::consts::PI;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn white(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| StandardNormal.sample(rng)).collect()
    }

    fn sine(freq: f64, fs: f64, n: usize, phase: f64) -> Vec<f64> {
        (0..n).map(|i| (2.0 * PI * freq * i as f64 / fs + phase).sin()).collect()
    }

    #[test]
    fn pure_line_goes_to_line_branch() {
        let fs = 500.0;
        let n = 5000;
        let rec = Recording::from_rows(&[sine(60.0, fs, n, 0.3), sine(60.0, fs, n, 1.1)], fs).unwrap();
        let b = split_branches(&rec, &ZaplineConfig::new(60.0)).unwrap();
        for c in 0..2 {
            assert!(mean_power(&b.clean[c]) < 1e-20);
            let err: f64 = b.line[c].iter().zip(rec.channel(c)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err < 1e-12);
        }
    }

    #[test]
    fn branches_sum_to_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rows: Vec<Vec<f64>> = (0..3).map(|_| white(&mut rng, 1200)).collect();
        let rec = Recording::from_rows(&rows, 250.0).unwrap();
        let b = split_branches(&rec, &ZaplineConfig::new(50.0)).unwrap();
        for c in 0..3 {
            for t in 0..1200 {
                assert!((b.clean[c][t] + b.line[c][t] - rec.channel(c)[t]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn noise_without_line_bins_stays_in_clean_branch() {
        // Oracle construction: shape white noise spectrally, zeroing every
        // bin the notch (plus taper) touches.
        let fs = 500.0;
        let n = 10_000;
        let cfg = ZaplineConfig::new(60.0);
        let masks = BandMasks::new(n, fs, &cfg);
        let plan = Fft::new(n);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut spec = real_spectrum(&plan, &white(&mut rng, n));
        for k in 1..=n / 2 {
            let f = k as f64 * fs / n as f64;
            let mut g = 1.0 / f.sqrt();
            if masks.clean_gain[k] < 1.0 {
                g = 0.0;
            }
            spec[k] *= g;
            if 2 * k != n {
                spec[n - k] *= g;
            }
        }
        spec[0] = Complex64::new(0.0, 0.0);
        let x = inverse_real(&plan, &spec);
        let rec = Recording::from_rows(&[x.clone(), x.iter().map(|v| -0.5 * v).collect()], fs).unwrap();
        let b = split_branches(&rec, &cfg).unwrap();
        for c in 0..2 {
            let ratio = mean_power(&b.line[c]) / mean_power(rec.channel(c));
            assert!(ratio <= 0.02, "{ratio}");
        }
    }

    fn line_mixture(n_ch: usize, patterns: &[(Vec<f64>, f64)], fs: f64, n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows: Vec<Vec<f64>> = (0..n_ch).map(|_| white(&mut rng, n)).collect();
        for (k, (pattern, amp)) in patterns.iter().enumerate() {
            let s = sine(60.0, fs, n, 0.7 * k as f64);
            // Different patterns get independent amplitude modulation.
            let env = sine(0.05 + 0.03 * k as f64, fs, n, 0.0);
            for (row, w) in rows.iter_mut().zip(pattern) {
                for t in 0..n {
                    row[t] += amp * w * s[t] * (1.0 + 0.5 * env[t]);
                }
            }
        }
        rows
    }

    #[test]
    fn single_pattern_dominates_spectrum() {
        let fs = 500.0;
        let pattern: Vec<f64> = (0..8).map(|i| 1.0 - 0.2 * i as f64).collect();
        let rows = line_mixture(8, &[(pattern, 3.0)], fs, 30_000, 3);
        let dss = dss_line_components(&rows, fs, &ZaplineConfig::new(60.0)).unwrap();
        assert!(dss.eigenvalues[0] > 10.0 * dss.eigenvalues[1], "{:?}", dss.eigenvalues);
        for col in dss.filters.column_iter() {
            assert!((col.norm() - 1.0).abs() < 1e-12);
        }
        assert!(dss.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn white_noise_gives_flat_spectrum() {
        let fs = 500.0;
        let rows = line_mixture(8, &[], fs, 120_000, 4);
        let dss = dss_line_components(&rows, fs, &ZaplineConfig::new(60.0)).unwrap();
        let mean = dss.eigenvalues.iter().sum::<f64>() / 8.0;
        for v in &dss.eigenvalues {
            assert!((v / mean - 1.0).abs() < 0.2, "{:?}", dss.eigenvalues);
        }
    }

    #[test]
    fn two_patterns_give_two_dominant_components() {
        let fs = 500.0;
        let p1: Vec<f64> = (0..8).map(|i| if i < 4 { 1.0 } else { 0.0 }).collect();
        let p2: Vec<f64> = (0..8).map(|i| if i >= 4 { 1.0 } else { 0.0 }).collect();
        let rows = line_mixture(8, &[(p1, 3.0), (p2, 2.0)], fs, 30_000, 5);
        let dss = dss_line_components(&rows, fs, &ZaplineConfig::new(60.0)).unwrap();
        let ev = &dss.eigenvalues;
        assert!(ev[1] > 10.0 * ev[2], "{ev:?}");
        assert_eq!(auto_n_remove(ev), 2);
    }

    #[test]
    fn removing_zero_components_is_identity() {
        let fs = 250.0;
        let rows = line_mixture(4, &[(vec![1.0, 0.5, 0.2, 0.1], 5.0)], fs, 2000, 6);
        let rec = Recording::from_rows(&rows, fs).unwrap();
        let cfg = ZaplineConfig {
            n_remove: NRemove::Fixed(0),
            ..ZaplineConfig::new(60.0)
        };
        let (out, report) = apply_zapline(&rec, &cfg).unwrap();
        assert_eq!(out, rec);
        assert_eq!(report.params["n_remove"], 0usize.into());
    }

    #[test]
    fn masked_channels_stay_zero_and_line_is_removed() {
        let fs = 500.0;
        let pattern = vec![1.0, 0.8, 0.0, 0.6, 0.4, 0.9];
        let rows = line_mixture(6, &[(pattern, 4.0)], fs, 20_000, 7);
        let mut rec = Recording::from_rows(&rows, fs).unwrap();
        rec.reject_channel(2);
        let (out, report) = apply_zapline(&rec, &ZaplineConfig::new(60.0)).unwrap();
        assert!(out.channel(2).iter().all(|&v| v == 0.0));
        assert_eq!(report.params["n_remove"], 1usize.into());
        for c in [0, 1, 3, 4, 5] {
            assert!(mean_power(out.channel(c)) <= mean_power(rec.channel(c)) + 1e-9);
        }
    }

    #[test]
    fn too_short_is_rejected() {
        let rec = Recording::from_rows(&[vec![0.0; 100], vec![1.0; 100]], 100.0).unwrap();
        assert!(matches!(
            split_branches(&rec, &ZaplineConfig::new(50.0)),
            Err(Error::SignalTooShort { .. })
        ));
    }
}
