//! Synthetic recordings with known artifacts, and scoring of a pipeline run
//! against the injected ground truth.
//!
//! Brain activity is a set of amplitude-modulated 1/f sources (grouped into
//! spectral families) mixed through random spatial patterns. On top of it
//! the generator can add a rank-1 line hum, flat and hot channels,
//! blink-like one-sided exponential transients, slow drift, and class-coded
//! oscillatory bursts around trial events.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dsp::fft::Fft;
use crate::dsp::{design_butterworth, filtfilt};
use crate::dsp::welch::{band_power, welch_psd, WelchParams};
use crate::error::{Error, Result};
use crate::ica::ComponentDecomposition;
use crate::ml::mix;
use crate::model::{Event, Recording, StageReport};

/// A group of brain sources sharing spectral shape and amplitude.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SourceFamily {
    pub count: usize,
    /// PSD ∝ 1/f^exponent.
    pub exponent: f64,
    pub amplitude_uv: f64,
    /// Optional narrow-band rhythm added on top of the 1/f background.
    pub rhythm_hz: Option<f64>,
    /// Rhythm power relative to the background.
    pub rhythm_ratio: f64,
}

impl Default for SourceFamily {
    fn default() -> Self {
        Self {
            count: 1,
            exponent: 1.0,
            amplitude_uv: 10.0,
            rhythm_hz: None,
            rhythm_ratio: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LineSpec {
    pub freq_hz: f64,
    /// Peak amplitude on a channel with unit pattern weight.
    pub amplitude_uv: f64,
    pub pattern_seed: u64,
    /// Depth of the slow amplitude modulation (0 = constant hum).
    pub modulation: f64,
}

impl Default for LineSpec {
    fn default() -> Self {
        Self {
            freq_hz: 60.0,
            amplitude_uv: 14.0,
            pattern_seed: 1,
            modulation: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BadChannelSpec {
    pub flat: Vec<usize>,
    pub hot: Vec<usize>,
    pub flat_sd_uv: f64,
    pub hot_sd_uv: f64,
}

impl Default for BadChannelSpec {
    fn default() -> Self {
        Self {
            flat: Vec::new(),
            hot: Vec::new(),
            flat_sd_uv: 0.05,
            hot_sd_uv: 500.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpikeSpec {
    /// Channels the transient projects to, strongest first.
    pub component_channels: Vec<usize>,
    pub rate_hz: f64,
    pub amplitude_uv: f64,
    pub decay_s: f64,
}

impl Default for SpikeSpec {
    fn default() -> Self {
        Self {
            component_channels: vec![0, 1, 2, 3],
            rate_hz: 0.1,
            amplitude_uv: 150.0,
            decay_s: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DriftSpec {
    pub amplitude_uv: f64,
    pub freq_hz: f64,
}

impl Default for DriftSpec {
    fn default() -> Self {
        Self {
            amplitude_uv: 80.0,
            freq_hz: 0.15,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassSpec {
    pub n_classes: usize,
    pub trials_per_class: usize,
    /// Burst carrier frequency per class; cycles when shorter than `n_classes`.
    pub band_signature_hz: Vec<f64>,
    /// Peak burst amplitude added to each carrying source, before mixing.
    pub amplitude_uv: f64,
    pub burst_s: f64,
    pub spacing_s: f64,
}

impl Default for ClassSpec {
    fn default() -> Self {
        Self {
            n_classes: 3,
            trials_per_class: 40,
            band_signature_hz: vec![12.0, 20.0, 25.0],
            amplitude_uv: 120.0,
            burst_s: 0.4,
            spacing_s: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub n_channels: usize,
    pub fs: f64,
    pub duration_s: f64,
    pub pink_exponent: f64,
    /// Brain source families; empty means `default_families(n_channels)`.
    pub families: Vec<SourceFamily>,
    pub line: Option<LineSpec>,
    pub bad_channels: BadChannelSpec,
    pub spikes: Option<SpikeSpec>,
    pub drift: Option<DriftSpec>,
    pub classes: Option<ClassSpec>,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_channels: 16,
            fs: 1000.0,
            duration_s: 60.0,
            pink_exponent: 1.0,
            families: Vec::new(),
            line: None,
            bad_channels: BadChannelSpec::default(),
            spikes: None,
            drift: None,
            classes: None,
            seed: 0,
        }
    }
}

impl SynthSpec {
    /// Three families (broadband, alpha-rhythmic, steep) splitting
    /// `n_sources` as evenly as possible.
    pub fn default_families(n_sources: usize, pink_exponent: f64) -> Vec<SourceFamily> {
        let base = n_sources / 3;
        let extra = n_sources % 3;
        let counts = [base + usize::from(extra > 0), base + usize::from(extra > 1), base];
        vec![
            SourceFamily {
                count: counts[0],
                exponent: pink_exponent,
                amplitude_uv: 10.0,
                ..SourceFamily::default()
            },
            SourceFamily {
                count: counts[1],
                exponent: pink_exponent,
                amplitude_uv: 6.0,
                rhythm_hz: Some(10.0),
                rhythm_ratio: 2.0,
            },
            SourceFamily {
                count: counts[2],
                exponent: pink_exponent + 0.6,
                amplitude_uv: 14.0,
                ..SourceFamily::default()
            },
        ]
    }

    fn check(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(String::from(msg)));
        if self.n_channels == 0 || !(self.fs > 0.0) || !(self.duration_s > 0.0) {
            return bad("n_channels, fs and duration_s must be positive");
        }
        let in_range = |c: &usize| *c < self.n_channels;
        if !self.bad_channels.flat.iter().chain(&self.bad_channels.hot).all(in_range) {
            return bad("bad channel index out of range");
        }
        if let Some(s) = &self.spikes {
            if !s.component_channels.iter().all(in_range) || s.rate_hz < 0.0 || s.amplitude_uv < 0.0 {
                return bad("spike spec out of range");
            }
        }
        if let Some(l) = &self.line {
            if l.amplitude_uv < 0.0 {
                return bad("line amplitude must be non-negative");
            }
        }
        if let Some(c) = &self.classes {
            if c.n_classes < 2 || c.band_signature_hz.is_empty() {
                return bad("classes need n_classes ≥ 2 and at least one signature frequency");
            }
        }
        Ok(())
    }
}

/// Exact record of what was injected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub spec: SynthSpec,
    pub flat_channels: Vec<usize>,
    pub hot_channels: Vec<usize>,
    /// Per-channel line amplitude (µV) or empty.
    pub line_pattern: Vec<f64>,
    /// Per-channel weight of the blink transient or empty.
    pub spike_pattern: Vec<f64>,
    pub spike_onsets: Vec<usize>,
    /// Per-trial class label, aligned with the recording's events.
    pub trial_labels: Vec<String>,
    /// Brain source indices carrying each class's burst.
    pub class_sources: Vec<Vec<usize>>,
}

fn rng_for(seed: u64, stream: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(seed, stream, index))
}

fn normalize_unit_variance(x: &mut [f64]) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let sd = var.sqrt();
    for v in x.iter_mut() {
        *v = if sd > 0.0 { (*v - mean) / sd } else { 0.0 };
    }
}

/// Two independent zero-mean Gaussian signals whose amplitude spectra are
/// `gain_a(f)` and `gain_b(f)`, each normalized to unit variance. Both are
/// drawn in the frequency domain and recovered from one complex inverse
/// transform as its real and imaginary parts.
fn shaped_noise_pair(
    n: usize,
    fs: f64,
    gain_a: impl Fn(f64) -> f64,
    gain_b: impl Fn(f64) -> f64,
    rng: &mut impl Rng,
) -> (Vec<f64>, Vec<f64>) {
    let i = Complex64::new(0.0, 1.0);
    let mut z = vec![Complex64::new(0.0, 0.0); n];
    for k in 1..=n / 2 {
        let f = k as f64 * fs / n as f64;
        let nyquist = 2 * k == n;
        let mut draw = |g: f64| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = if nyquist { 0.0 } else { StandardNormal.sample(rng) };
            Complex64::new(g * re, g * im)
        };
        let a = draw(gain_a(f));
        let b = draw(gain_b(f));
        z[k] = a + i * b;
        if !nyquist {
            z[n - k] = a.conj() + i * b.conj();
        }
    }
    Fft::new(n).inverse(&mut z);
    let mut a: Vec<f64> = z.iter().map(|v| v.re).collect();
    let mut b: Vec<f64> = z.iter().map(|v| v.im).collect();
    normalize_unit_variance(&mut a);
    normalize_unit_variance(&mut b);
    (a, b)
}

/// Gaussian noise with PSD ∝ 1/f^exponent (DC removed), unit variance.
pub fn pink_noise(n: usize, fs: f64, exponent: f64, rng: &mut impl Rng) -> Vec<f64> {
    shaped_noise_pair(n, fs, |f| f.powf(-exponent / 2.0), |_| 0.0, rng).0
}

fn brain_source(n: usize, fs: f64, family: &SourceFamily, rng: &mut ChaCha8Rng) -> Vec<f64> {
    // Background and rhythm are independent Gaussians, so their sum is one
    // Gaussian whose PSD is the sum of the two, each scaled to unit power.
    let bins = (1..=n / 2).map(|k| k as f64 * fs / n as f64);
    let pink_power: f64 = bins.clone().map(|f| f.powf(-family.exponent)).sum();
    let bump = |f: f64| family.rhythm_hz.map_or(0.0, |f0| (-(f - f0) * (f - f0)).exp());
    let bump_power: f64 = bins.map(bump).sum();
    let rhythm_weight = if bump_power > 0.0 { family.rhythm_ratio / bump_power } else { 0.0 };
    let psd = |f: f64| f.powf(-family.exponent) / pink_power + rhythm_weight * bump(f);
    // Slow log-normal envelope: symmetric but heavy-tailed, so ICA can
    // separate the sources.
    let (mut x, envelope) = shaped_noise_pair(n, fs, |f| psd(f).sqrt(), |f| if f < 0.5 { 1.0 } else { 0.0 }, rng);
    for (a, e) in x.iter_mut().zip(&envelope) {
        *a *= (0.7 * e).exp();
    }
    normalize_unit_variance(&mut x);
    x.iter_mut().for_each(|v| *v *= family.amplitude_uv);
    x
}

/// Generates the recording (with trial events when classes are requested)
/// and its ground-truth manifest. Identical specs give identical output.
pub fn generate(spec: &SynthSpec) -> Result<(Recording, GroundTruth)> {
    spec.check()?;
    let n = (spec.duration_s * spec.fs).round() as usize;
    let n_ch = spec.n_channels;
    let fs = spec.fs;
    let families = if spec.families.is_empty() {
        SynthSpec::default_families(n_ch, spec.pink_exponent)
    } else {
        spec.families.clone()
    };

    let mut pattern_rng = rng_for(spec.seed, 1, 0);
    let mut sources = Vec::new();
    let mut patterns = Vec::new();
    let mut amplitudes = Vec::new();
    for family in &families {
        for _ in 0..family.count {
            let mut rng = rng_for(spec.seed, 2, sources.len() as u64);
            sources.push(brain_source(n, fs, family, &mut rng));
            patterns.push((0..n_ch).map(|_| StandardNormal.sample(&mut pattern_rng)).collect::<Vec<f64>>());
            amplitudes.push(family.amplitude_uv);
        }
    }

    let mut truth = GroundTruth {
        spec: spec.clone(),
        flat_channels: spec.bad_channels.flat.clone(),
        hot_channels: spec.bad_channels.hot.clone(),
        line_pattern: Vec::new(),
        spike_pattern: Vec::new(),
        spike_onsets: Vec::new(),
        trial_labels: Vec::new(),
        class_sources: Vec::new(),
    };
    let mut events = Vec::new();

    // Class k adds a windowed burst at its signature frequency to every
    // brain source with index ≡ k (mod n_classes), so the class signal lives
    // in existing source patterns rather than in components of its own.
    if let Some(cls) = &spec.classes {
        let mut rng = rng_for(spec.seed, 3, 0);
        truth.class_sources = (0..cls.n_classes)
            .map(|k| (0..sources.len()).filter(|j| j % cls.n_classes == k).collect())
            .collect();
        let mut labels: Vec<usize> = (0..cls.n_classes).flat_map(|k| vec![k; cls.trials_per_class]).collect();
        for i in (1..labels.len()).rev() {
            labels.swap(i, rng.random_range(0..=i));
        }
        let spacing = (cls.spacing_s * fs).round() as usize;
        let half = ((cls.burst_s * fs).round() as usize / 2).max(1);
        for (t, &k) in labels.iter().enumerate() {
            let centre = spacing * (t + 1);
            if centre + half >= n {
                break;
            }
            let f0 = cls.band_signature_hz[k % cls.band_signature_hz.len()];
            for &j in &truth.class_sources[k] {
                let phase = rng.random_range(0.0..2.0 * PI);
                for d in 0..2 * half {
                    let s = centre - half + d;
                    let env = 0.5 - 0.5 * (PI * d as f64 / half as f64).cos();
                    sources[j][s] += cls.amplitude_uv * env * (2.0 * PI * f0 * s as f64 / fs + phase).sin();
                }
            }
            let label = alloc::format!("class{k}");
            truth.trial_labels.push(label.clone());
            events.push(Event::new(centre, label));
        }
    }

    // Mixture with per-channel variance normalized to a gain in [0.85, 1.15]
    // of the nominal amplitude. Gains are evenly spaced over that range and
    // shuffled across channels; independent draws would now and then put a
    // clean channel past a robust outlier fence. The variance is measured above
    // 1 Hz: the steep families carry very different fractions of their power
    // below that, and a full-band match would leave channel spreads after
    // any highpass that look like bad channels.
    let nominal = {
        let total: f64 = amplitudes.iter().map(|a| a * a).sum();
        (total / amplitudes.len().max(1) as f64).sqrt()
    };
    let highpass = design_butterworth(2, 1.0, None, fs).ok();
    let source_var: Vec<f64> = sources
        .iter()
        .map(|x| {
            let filtered = highpass.as_ref().and_then(|h| filtfilt(h, x).ok());
            let x = filtered.as_deref().unwrap_or(x);
            x.iter().map(|v| v * v).sum::<f64>() / n as f64
        })
        .collect();
    let mut gains: Vec<f64> = (0..n_ch).map(|c| 0.85 + 0.3 * (c as f64 + 0.5) / n_ch as f64).collect();
    for i in (1..n_ch).rev() {
        gains.swap(i, pattern_rng.random_range(0..=i));
    }
    let mut data = vec![vec![0.0; n]; n_ch];
    for (c, row) in data.iter_mut().enumerate() {
        let var: f64 = patterns.iter().zip(&source_var).map(|(p, v)| p[c] * p[c] * v).sum();
        let scale = if var > 0.0 { nominal * gains[c] / var.sqrt() } else { 0.0 };
        for (src, p) in sources.iter().zip(&patterns) {
            let w = scale * p[c];
            for (v, x) in row.iter_mut().zip(src) {
                *v += w * x;
            }
        }
    }

    if let Some(line) = &spec.line {
        let mut rng = ChaCha8Rng::seed_from_u64(line.pattern_seed);
        truth.line_pattern = (0..n_ch).map(|_| line.amplitude_uv * rng.random_range(0.3..1.0)).collect();
        let phase = rng.random_range(0.0..2.0 * PI);
        let mod_phase = rng.random_range(0.0..2.0 * PI);
        let hum: Vec<f64> = (0..n)
            .map(|i| {
                let t = i as f64 / fs;
                (1.0 + line.modulation * (2.0 * PI * 0.05 * t + mod_phase).sin()) * (2.0 * PI * line.freq_hz * t + phase).sin()
            })
            .collect();
        for (row, a) in data.iter_mut().zip(&truth.line_pattern) {
            for (v, h) in row.iter_mut().zip(&hum) {
                *v += a * h;
            }
        }
    }

    if let Some(sp) = &spec.spikes {
        let mut rng = rng_for(spec.seed, 4, 0);
        let k = sp.component_channels.len().max(1) as f64;
        truth.spike_pattern = vec![0.0; n_ch];
        for (i, &c) in sp.component_channels.iter().enumerate() {
            truth.spike_pattern[c] = 1.0 - 0.5 * i as f64 / k;
        }
        let len = ((5.0 * sp.decay_s * fs).round() as usize).max(1);
        let template: Vec<f64> = (0..len).map(|d| (-(d as f64) / (sp.decay_s * fs)).exp()).collect();
        if sp.rate_hz > 0.0 {
            let gap = Exp::new(sp.rate_hz).expect("positive rate");
            let mut t = gap.sample(&mut rng);
            while ((t * fs) as usize) + len < n {
                truth.spike_onsets.push((t * fs) as usize);
                t += gap.sample(&mut rng).max(2.0 * sp.decay_s * 5.0 / 5.0);
            }
        }
        for &onset in &truth.spike_onsets {
            for (row, w) in data.iter_mut().zip(&truth.spike_pattern) {
                if *w == 0.0 {
                    continue;
                }
                for (d, v) in template.iter().enumerate() {
                    row[onset + d] += sp.amplitude_uv * w * v;
                }
            }
        }
    }

    if let Some(dr) = &spec.drift {
        let mut rng = rng_for(spec.seed, 5, 0);
        let phase = rng.random_range(0.0..2.0 * PI);
        for row in data.iter_mut() {
            let g = rng.random_range(0.5..1.0) * dr.amplitude_uv;
            for (i, v) in row.iter_mut().enumerate() {
                *v += g * (2.0 * PI * dr.freq_hz * i as f64 / fs + phase).sin();
            }
        }
    }

    for &c in &spec.bad_channels.flat {
        let mut rng = rng_for(spec.seed, 6, c as u64);
        for v in data[c].iter_mut() {
            *v = spec.bad_channels.flat_sd_uv * Distribution::<f64>::sample(&StandardNormal, &mut rng);
        }
    }
    for &c in &spec.bad_channels.hot {
        let mut rng = rng_for(spec.seed, 7, c as u64);
        for v in data[c].iter_mut() {
            *v += spec.bad_channels.hot_sd_uv * Distribution::<f64>::sample(&StandardNormal, &mut rng);
        }
    }

    let line_freq = spec.line.as_ref().map(|l| l.freq_hz);
    let rec = Recording::from_rows(&data, fs)?.with_events(events).with_line_freq(line_freq);
    Ok((rec, truth))
}

/// Precision and recall with the convention that an empty prediction set
/// has precision 1 and an empty truth set has recall 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub precision: f64,
    pub recall: f64,
    pub true_positives: usize,
    pub predicted: usize,
    pub actual: usize,
}

impl Detection {
    pub fn score(predicted: &BTreeSet<usize>, actual: &BTreeSet<usize>) -> Self {
        let tp = predicted.intersection(actual).count();
        Self {
            precision: if predicted.is_empty() { 1.0 } else { tp as f64 / predicted.len() as f64 },
            recall: if actual.is_empty() { 1.0 } else { tp as f64 / actual.len() as f64 },
            true_positives: tp,
            predicted: predicted.len(),
            actual: actual.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthScore {
    pub channels: Detection,
    pub components: Option<Detection>,
    pub line_reduction_db: Option<f64>,
    pub offband_change_db: Option<f64>,
}

/// Ratio of band power after to before (summed over channels active in
/// both), in dB.
pub fn band_power_change_db(before: &Recording, after: &Recording, lo: f64, hi: f64) -> Result<f64> {
    let fs = before.sampling_rate_hz;
    let params = WelchParams::default_for(fs, before.n_samples());
    let (mut pb, mut pa) = (0.0, 0.0);
    for c in 0..before.n_channels().min(after.n_channels()) {
        if !(before.channel_mask[c] && after.channel_mask[c]) {
            continue;
        }
        pb += band_power(&welch_psd(before.channel(c), fs, params)?, lo, hi)?;
        pa += band_power(&welch_psd(after.channel(c), fs, params)?, lo, hi)?;
    }
    Ok(10.0 * (pa / pb).log10())
}

/// Components whose pattern matches an injected artifact pattern
/// (|cosine| > 0.9 over the decomposed channels).
pub fn artifact_components(dec: &ComponentDecomposition, truth: &GroundTruth) -> BTreeSet<usize> {
    let mut out = BTreeSet::new();
    for reference in [&truth.spike_pattern, &truth.line_pattern] {
        if reference.is_empty() {
            continue;
        }
        let r: Vec<f64> = dec.channel_index_map.iter().map(|&c| reference[c]).collect();
        let r_norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r_norm == 0.0 {
            continue;
        }
        for k in 0..dec.n_components() {
            let col = dec.mixing.column(k);
            let dotp: f64 = col.iter().zip(&r).map(|(a, b)| a * b).sum();
            if (dotp / (col.norm() * r_norm)).abs() > 0.9 {
                out.insert(k);
            }
        }
    }
    out
}

/// Inputs beyond the reports that some scores need.
#[derive(Debug, Clone, Copy, Default)]
pub struct ScoreContext<'a> {
    /// The decomposition the MARA stage saw.
    pub decomposition: Option<&'a ComponentDecomposition>,
    /// Line-removal stage input and output.
    pub line_stage: Option<(&'a Recording, &'a Recording)>,
}

/// Scores channel and component rejection and line removal against the
/// manifest.
pub fn score_against_truth(reports: &[StageReport], truth: &GroundTruth, ctx: ScoreContext<'_>) -> Result<TruthScore> {
    let predicted: BTreeSet<usize> = reports
        .iter()
        .flat_map(|r| r.rejected_channel_indices.iter().copied())
        .collect();
    let actual: BTreeSet<usize> = truth.flat_channels.iter().chain(&truth.hot_channels).copied().collect();
    let components = ctx.decomposition.map(|dec| {
        let rejected: BTreeSet<usize> = reports
            .iter()
            .filter(|r| r.stage_name == "ica_mara")
            .flat_map(|r| r.rejected_component_indices.iter().copied())
            .collect();
        Detection::score(&rejected, &artifact_components(dec, truth))
    });
    let (mut line_reduction_db, mut offband_change_db) = (None, None);
    if let (Some((before, after)), Some(line)) = (ctx.line_stage, &truth.spec.line) {
        let f = line.freq_hz;
        line_reduction_db = Some(-band_power_change_db(before, after, f - 1.0, f + 1.0)?);
        offband_change_db = Some(band_power_change_db(before, after, 1.0, 40.0)?);
    }
    Ok(TruthScore {
        channels: Detection::score(&predicted, &actual),
        components,
        line_reduction_db,
        offband_change_db,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::fft::real_spectrum;
    use crate::dsp::stats::sample_sd;
    use crate::mara::feature_one_over_f_fit;

    #[test]
    fn flat_channel_is_flat() {
        let spec = SynthSpec {
            n_channels: 4,
            fs: 250.0,
            duration_s: 10.0,
            bad_channels: BadChannelSpec {
                flat: vec![3],
                ..BadChannelSpec::default()
            },
            ..SynthSpec::default()
        };
        let (rec, truth) = generate(&spec).unwrap();
        assert!(sample_sd(rec.channel(3)) < 0.1);
        assert!(sample_sd(rec.channel(0)) > 5.0);
        assert_eq!(truth.flat_channels, vec![3]);
    }

    #[test]
    fn deterministic() {
        let spec = SynthSpec {
            n_channels: 3,
            fs: 200.0,
            duration_s: 5.0,
            line: Some(LineSpec::default()),
            spikes: Some(SpikeSpec {
                component_channels: vec![0, 1],
                ..SpikeSpec::default()
            }),
            seed: 9,
            ..SynthSpec::default()
        };
        assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
    }

    #[test]
    fn line_power_follows_pattern() {
        let spec = SynthSpec {
            n_channels: 4,
            fs: 500.0,
            duration_s: 20.0,
            line: Some(LineSpec {
                modulation: 0.0,
                amplitude_uv: 200.0,
                ..LineSpec::default()
            }),
            ..SynthSpec::default()
        };
        let (rec, truth) = generate(&spec).unwrap();
        // 60 Hz falls exactly on a DFT bin, so |X_k|·2/N is the amplitude.
        let n = rec.n_samples();
        let plan = Fft::new(n);
        let k = (60.0 * n as f64 / 500.0) as usize;
        for c in 0..4 {
            let amp = real_spectrum(&plan, rec.channel(c))[k].norm() * 2.0 / n as f64;
            assert!((amp / truth.line_pattern[c] - 1.0).abs() < 0.02, "{amp} {}", truth.line_pattern[c]);
        }
    }

    #[test]
    fn pink_noise_has_unit_slope() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = pink_noise(120_000, 1000.0, 1.0, &mut rng);
        let (lambda, _) = feature_one_over_f_fit(&x, 1000.0).unwrap();
        assert!((lambda - 1.0).abs() < 0.15, "{lambda}");
    }

    #[test]
    fn scoring_conventions() {
        let empty = BTreeSet::new();
        let d = Detection::score(&empty, &empty);
        assert_eq!((d.precision, d.recall), (1.0, 1.0));
        let truth: BTreeSet<usize> = [1, 4].into();
        let d = Detection::score(&truth, &truth);
        assert_eq!((d.precision, d.recall), (1.0, 1.0));
        let d = Detection::score(&[1, 2].into(), &truth);
        assert_eq!((d.precision, d.recall), (0.5, 0.5));
    }

    #[test]
    fn classes_produce_events() {
        let spec = SynthSpec {
            n_channels: 6,
            fs: 500.0,
            duration_s: 40.0,
            classes: Some(ClassSpec {
                trials_per_class: 10,
                ..ClassSpec::default()
            }),
            ..SynthSpec::default()
        };
        let (rec, truth) = generate(&spec).unwrap();
        assert_eq!(rec.events.len(), 30);
        assert_eq!(truth.trial_labels.len(), 30);
        assert!(rec.events.windows(2).all(|w| w[1].sample_index - w[0].sample_index == 500));
    }
}
