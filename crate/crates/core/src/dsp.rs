//! Short-time source-filter analysis and resynthesis.
//!
//! Each frame is split into a smooth spectral envelope and a fine-structure
//! ratio (`|X| / envelope`) plus the analysis phase. Multiplying the three back
//! together reproduces the frame spectrum exactly, so an unmodified analysis
//! resynthesizes the input up to edge effects. Converters modify the envelope
//! (frequency warping) and the fine structure (pitch shifting) independently.
//!
//! The envelope is a pitch-adaptive smoother: the power spectrum is averaged
//! over a rectangular window one F0 wide, which flattens harmonic ripple, and
//! the log of the result is then cepstrally liftered below the pitch quefrency.

use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;

use num_complex::Complex64;

use crate::audio::Utterance;
use crate::error::{Error, Result};
use crate::fft::Fft;

/// Absolute floor added to smoothed power before taking logs.
const POWER_FLOOR: f64 = 1e-20;
/// Smoothing width used on unvoiced frames, in Hz.
const UNVOICED_SMOOTHING_HZ: f64 = 200.0;
const UNVOICED_LIFTER: usize = 40;
/// WOLA denominators are floored at this fraction of their interior value so
/// modified frames are attenuated, not amplified, in the first and last
/// quarter frame of an utterance.
const WOLA_FLOOR: f64 = 0.25;

/// Framing, voicing and pitch-search parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct AnalysisConfig {
    pub frame_length: usize,
    pub hop: usize,
    /// Frame RMS at or above which a frame counts as speech.
    pub vad_threshold: f64,
    /// Minimum normalized autocorrelation peak for a voiced decision.
    pub voicing_threshold: f64,
    pub f0_min: f64,
    pub f0_max: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            frame_length: 1024,
            hop: 256,
            vad_threshold: 0.06,
            voicing_threshold: 0.3,
            f0_min: 60.0,
            f0_max: 400.0,
        }
    }
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.frame_length.is_power_of_two() || self.frame_length < 256 {
            return Err(Error::Parameter(format!(
                "frame_length must be a power of two >= 256, got {}",
                self.frame_length
            )));
        }
        if self.hop == 0 || self.hop > self.frame_length / 2 {
            return Err(Error::Parameter(format!(
                "hop must be in 1..={}, got {}",
                self.frame_length / 2,
                self.hop
            )));
        }
        if !(0.0..=1.0).contains(&self.vad_threshold) {
            return Err(Error::Parameter("vad_threshold must be in [0, 1]".to_string()));
        }
        if !(self.f0_min > 0.0 && self.f0_min < self.f0_max) {
            return Err(Error::Parameter("pitch search range must satisfy 0 < f0_min < f0_max".to_string()));
        }
        Ok(())
    }

    pub fn bins(&self) -> usize {
        self.frame_length / 2 + 1
    }
}

/// Per-frame source-filter decomposition of an utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameAnalysis {
    pub sample_rate: u32,
    pub frame_length: usize,
    pub hop: usize,
    /// Hz, 0 on unvoiced frames.
    pub f0: Vec<f64>,
    pub voiced: Vec<bool>,
    /// Smooth magnitude envelope over `frame_length/2 + 1` bins.
    pub envelope: Vec<Vec<f64>>,
    /// `|X| / envelope` at analysis time, carrying harmonics and noise.
    pub fine_structure: Vec<Vec<f64>>,
    pub residual_phase: Vec<Vec<f64>>,
    /// Frame RMS of the unwindowed samples.
    pub energy: Vec<f64>,
    /// Voiced frames whose pitch-shift ratio had to be clamped.
    pub pitch_clamped_frames: usize,
}

impl FrameAnalysis {
    pub fn num_frames(&self) -> usize {
        self.f0.len()
    }

    pub fn bins(&self) -> usize {
        self.frame_length / 2 + 1
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.f0.len();
        let bins = self.bins();
        if self.voiced.len() != n
            || self.envelope.len() != n
            || self.fine_structure.len() != n
            || self.residual_phase.len() != n
            || self.energy.len() != n
        {
            return Err(Error::Contract("per-frame sequences differ in length".to_string()));
        }
        let nyquist = self.sample_rate as f64 / 2.0;
        for t in 0..n {
            if self.envelope[t].len() != bins
                || self.fine_structure[t].len() != bins
                || self.residual_phase[t].len() != bins
            {
                return Err(Error::Contract(format!("frame {t}: spectrum length != {bins}")));
            }
            if self.envelope[t].iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
                return Err(Error::Contract(format!("frame {t}: negative or non-finite envelope")));
            }
            if (self.f0[t] > 0.0) != self.voiced[t] || self.f0[t] >= nyquist || self.f0[t] < 0.0 {
                return Err(Error::Contract(format!("frame {t}: f0/voicing mismatch")));
            }
        }
        Ok(())
    }

    /// Mean and standard deviation of `ln f0` over voiced frames.
    pub fn log_f0_stats(&self) -> Option<(f64, f64)> {
        log_f0_stats(&self.f0)
    }
}

/// Mean and population standard deviation of `ln f0` over entries `> 0`.
pub fn log_f0_stats(f0: &[f64]) -> Option<(f64, f64)> {
    let logs: Vec<f64> = f0.iter().filter(|&&f| f > 0.0).map(|f| f.ln()).collect();
    if logs.is_empty() {
        return None;
    }
    let n = logs.len() as f64;
    let mean = logs.iter().sum::<f64>() / n;
    let var = logs.iter().map(|l| (l - mean) * (l - mean)).sum::<f64>() / n;
    Some((mean, var.sqrt()))
}

/// Periodic Hann window.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

/// Number of whole frames that fit in `len` samples.
pub fn frame_count(len: usize, frame_length: usize, hop: usize) -> usize {
    if len < frame_length {
        0
    } else {
        1 + (len - frame_length) / hop
    }
}

pub fn rms(frame: &[f64]) -> f64 {
    if frame.is_empty() {
        return 0.0;
    }
    (frame.iter().map(|x| x * x).sum::<f64>() / frame.len() as f64).sqrt()
}

fn check_length(utterance: &Utterance, frame_length: usize) -> Result<()> {
    if utterance.samples.len() < frame_length {
        return Err(Error::Analysis(format!(
            "utterance {} has {} samples, shorter than one {frame_length}-sample frame",
            utterance.utterance_id,
            utterance.samples.len()
        )));
    }
    Ok(())
}

/// Per-frame RMS of the unwindowed samples.
pub fn frame_energies(samples: &[f64], frame_length: usize, hop: usize) -> Vec<f64> {
    let n = frame_count(samples.len(), frame_length, hop);
    (0..n)
        .map(|t| rms(&samples[t * hop..t * hop + frame_length]))
        .collect()
}

/// Energy-based voice activity: a frame is active iff its RMS is at least `threshold`.
pub fn voice_activity(
    utterance: &Utterance,
    frame_length: usize,
    hop: usize,
    threshold: f64,
) -> Result<Vec<bool>> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::Parameter(format!("VAD threshold {threshold} outside [0, 1]")));
    }
    if frame_length == 0 || hop == 0 {
        return Err(Error::Parameter("frame_length and hop must be positive".to_string()));
    }
    check_length(utterance, frame_length)?;
    Ok(frame_energies(&utterance.samples, frame_length, hop)
        .into_iter()
        .map(|e| e >= threshold)
        .collect())
}

/// Normalized-autocorrelation pitch estimator for fixed-length frames.
#[derive(Debug, Clone)]
pub struct PitchTracker {
    frame_length: usize,
    sample_rate: f64,
    min_lag: usize,
    max_lag: usize,
    fft: Fft,
}

/// Relative height a shorter-lag peak needs, versus the best peak, to be preferred.
const OCTAVE_PREFERENCE: f64 = 0.9;
const SUBMULTIPLE_TOLERANCE: f64 = 0.02;
const CENTRE_CLIP: f64 = 0.3;

impl PitchTracker {
    pub fn new(frame_length: usize, sample_rate: u32, f0_min: f64, f0_max: f64) -> Self {
        let sr = sample_rate as f64;
        let min_lag = ((sr / f0_max).floor() as usize).max(2);
        let max_lag = ((sr / f0_min).ceil() as usize).min(frame_length / 2);
        Self {
            frame_length,
            sample_rate: sr,
            min_lag,
            max_lag,
            fft: Fft::new(2 * frame_length),
        }
    }

    /// Returns `(f0, peak)`; `f0` is 0 when no interior peak exists in the search range.
    pub fn estimate(&self, frame: &[f64]) -> (f64, f64) {
        let n = self.frame_length;
        debug_assert_eq!(frame.len(), n);
        let mean = frame.iter().sum::<f64>() / n as f64;
        let centred: Vec<f64> = frame.iter().map(|v| v - mean).collect();
        // centre clipping strips formant ringing and keeps the excitation peaks
        let clip = CENTRE_CLIP * centred.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let x: Vec<f64> = centred
            .iter()
            .map(|&v| if v > clip { v - clip } else if v < -clip { v + clip } else { 0.0 })
            .collect();
        let mut spec = self.fft.forward_real(&x);
        for c in spec.iter_mut() {
            *c = Complex64::new(c.norm_sqr(), 0.0);
        }
        let acf = self.fft.inverse_real(&spec);
        let mut cumulative = Vec::with_capacity(n + 1);
        cumulative.push(0.0);
        for v in &x {
            let last = *cumulative.last().unwrap();
            cumulative.push(last + v * v);
        }
        let total = cumulative[n];
        let nccf = |lag: usize| -> f64 {
            let head = cumulative[n - lag];
            let tail = total - cumulative[lag];
            let denom = (head * tail).sqrt();
            if denom <= 1e-12 {
                0.0
            } else {
                acf[lag] / denom
            }
        };
        let lo = self.min_lag - 1;
        let hi = self.max_lag + 1;
        let values: Vec<f64> = (lo..=hi).map(nccf).collect();
        let mut peaks = Vec::new();
        for i in 1..values.len() - 1 {
            if values[i] >= values[i - 1] && values[i] > values[i + 1] {
                peaks.push(i);
            }
        }
        let Some(best) = peaks.iter().map(|&i| values[i]).fold(None, |acc: Option<f64>, v| {
            Some(acc.map_or(v, |a| a.max(v)))
        }) else {
            return (0.0, 0.0);
        };
        if best <= 0.0 {
            return (0.0, best);
        }
        let best_lag = (lo + peaks.iter().copied().find(|&i| values[i] == best).unwrap()) as f64;
        // a shorter lag wins only if it is close to best_lag / k, so formant
        // ringing at unrelated lags cannot displace the period
        let chosen = *peaks
            .iter()
            .find(|&&i| {
                let lag = (lo + i) as f64;
                let k = (best_lag / lag).round();
                values[i] >= OCTAVE_PREFERENCE * best
                    && k >= 1.0
                    && (best_lag - k * lag).abs() <= SUBMULTIPLE_TOLERANCE * best_lag
            })
            .expect("best peak satisfies its own threshold");
        let (ym, y0, yp) = (values[chosen - 1], values[chosen], values[chosen + 1]);
        let curvature = ym - 2.0 * y0 + yp;
        let offset = if curvature.abs() > 1e-15 { 0.5 * (ym - yp) / curvature } else { 0.0 };
        let lag = (lo + chosen) as f64 + offset.clamp(-0.5, 0.5);
        (self.sample_rate / lag, y0)
    }
}

/// Frame-wise F0 and voicing without the spectral decomposition.
pub fn track_pitch(utterance: &Utterance, config: &AnalysisConfig) -> Result<(Vec<f64>, Vec<bool>)> {
    config.validate()?;
    check_length(utterance, config.frame_length)?;
    Ok(pitch_contour(utterance, config))
}

fn pitch_contour(utterance: &Utterance, config: &AnalysisConfig) -> (Vec<f64>, Vec<bool>) {
    let tracker = PitchTracker::new(config.frame_length, utterance.sample_rate, config.f0_min, config.f0_max);
    let n = frame_count(utterance.samples.len(), config.frame_length, config.hop);
    let mut f0 = Vec::with_capacity(n);
    let mut voiced = Vec::with_capacity(n);
    for t in 0..n {
        let frame = &utterance.samples[t * config.hop..t * config.hop + config.frame_length];
        let (f, v) = voicing_decision(&tracker, frame, config, utterance.sample_rate);
        f0.push(f);
        voiced.push(v);
    }
    correct_octaves(&mut f0, config);
    (f0, voiced)
}

/// Frames on each side whose voiced estimates form the reference median.
const CONTINUITY_WINDOW: usize = 8;
/// Multiples and submultiples of the median that are treated as tracking errors.
const ERROR_FACTORS: [f64; 2] = [2.0, 3.0];
/// Largest distance, in octaves, from an exact error factor for a correction.
const FACTOR_SLACK: f64 = 0.2;

/// Moves voiced estimates lying at twice, three times, a half or a third of the
/// median of their voiced neighbours back onto it, when the result stays in
/// the search range. Voicing is not changed.
pub fn correct_octaves(f0: &mut [f64], config: &AnalysisConfig) {
    let raw = f0.to_vec();
    for t in 0..raw.len() {
        if raw[t] <= 0.0 {
            continue;
        }
        let lo = t.saturating_sub(CONTINUITY_WINDOW);
        let hi = (t + CONTINUITY_WINDOW + 1).min(raw.len());
        let mut near: Vec<f64> = raw[lo..hi].iter().copied().filter(|f| *f > 0.0).collect();
        if near.len() < 3 {
            continue;
        }
        near.sort_by(|a, b| a.total_cmp(b));
        let median = near[near.len() / 2];
        let octaves = (raw[t] / median).log2();
        for k in ERROR_FACTORS {
            let corrected = if (octaves + k.log2()).abs() <= FACTOR_SLACK {
                raw[t] * k
            } else if (octaves - k.log2()).abs() <= FACTOR_SLACK {
                raw[t] / k
            } else {
                continue;
            };
            if corrected >= config.f0_min && corrected <= config.f0_max {
                f0[t] = corrected;
            }
            break;
        }
    }
}

fn voicing_decision(tracker: &PitchTracker, frame: &[f64], config: &AnalysisConfig, sample_rate: u32) -> (f64, bool) {
    if rms(frame) < config.vad_threshold || rms(frame) == 0.0 {
        return (0.0, false);
    }
    let (f0, peak) = tracker.estimate(frame);
    if peak >= config.voicing_threshold && f0 > 0.0 && f0 < sample_rate as f64 / 2.0 {
        (f0, true)
    } else {
        (0.0, false)
    }
}

/// Pitch-adaptive smoothed magnitude envelope of one frame's power spectrum.
fn spectral_envelope(power: &[f64], f0: f64, sample_rate: f64, frame_length: usize, fft: &Fft) -> Vec<f64> {
    let bins = power.len();
    let smoothing_hz = if f0 > 0.0 { f0 } else { UNVOICED_SMOOTHING_HZ };
    let half_width = ((smoothing_hz * frame_length as f64 / sample_rate) / 2.0).round() as isize;
    let last = bins as isize - 1;
    let reflect = |k: isize| -> usize {
        let mut k = k;
        if k < 0 {
            k = -k;
        }
        if k > last {
            k = 2 * last - k;
        }
        k.clamp(0, last) as usize
    };
    let mut log_smoothed = Vec::with_capacity(frame_length);
    for k in 0..bins as isize {
        let sum: f64 = (k - half_width..=k + half_width).map(|j| power[reflect(j)]).sum();
        let mean = sum / (2 * half_width + 1) as f64;
        log_smoothed.push(Complex64::new((mean + POWER_FLOOR).ln(), 0.0));
    }
    for k in (1..bins - 1).rev() {
        log_smoothed.push(log_smoothed[k]);
    }
    let mut cepstrum = log_smoothed;
    fft.inverse(&mut cepstrum);
    let lifter = if f0 > 0.0 {
        ((0.75 * sample_rate / f0) as usize).clamp(8, frame_length / 2 - 1)
    } else {
        UNVOICED_LIFTER
    };
    for (q, c) in cepstrum.iter_mut().enumerate() {
        let quefrency = q.min(frame_length - q);
        if quefrency >= lifter {
            *c = Complex64::new(0.0, 0.0);
        }
    }
    fft.forward(&mut cepstrum);
    cepstrum[..bins].iter().map(|c| (0.5 * c.re).exp()).collect()
}

/// Decomposes an utterance into per-frame F0, voicing, envelope, fine structure and phase.
pub fn analyze(utterance: &Utterance, config: &AnalysisConfig) -> Result<FrameAnalysis> {
    config.validate()?;
    check_length(utterance, config.frame_length)?;
    let n = config.frame_length;
    let sr = utterance.sample_rate as f64;
    let window = hann(n);
    let fft = Fft::new(n);
    let (f0s, voicing) = pitch_contour(utterance, config);
    let frames = f0s.len();

    let mut out = FrameAnalysis {
        sample_rate: utterance.sample_rate,
        frame_length: n,
        hop: config.hop,
        f0: Vec::with_capacity(frames),
        voiced: Vec::with_capacity(frames),
        envelope: Vec::with_capacity(frames),
        fine_structure: Vec::with_capacity(frames),
        residual_phase: Vec::with_capacity(frames),
        energy: Vec::with_capacity(frames),
        pitch_clamped_frames: 0,
    };
    for t in 0..frames {
        let frame = &utterance.samples[t * config.hop..t * config.hop + n];
        let (f0, voiced) = (f0s[t], voicing[t]);
        let windowed: Vec<f64> = frame.iter().zip(&window).map(|(x, w)| x * w).collect();
        let spectrum = fft.forward_real(&windowed);
        let power: Vec<f64> = spectrum.iter().map(|c| c.norm_sqr()).collect();
        let envelope = spectral_envelope(&power, f0, sr, n, &fft);
        let fine = spectrum
            .iter()
            .zip(&envelope)
            .map(|(c, e)| if *e > 0.0 { c.norm() / e } else { 0.0 })
            .collect();
        out.f0.push(f0);
        out.voiced.push(voiced);
        out.envelope.push(envelope);
        out.fine_structure.push(fine);
        out.residual_phase.push(spectrum.iter().map(|c| c.arg()).collect());
        out.energy.push(rms(frame));
    }
    Ok(out)
}

/// Weighted overlap-add resynthesis of `envelope * fine_structure * e^{i phase}`.
///
/// Output length is `(frames - 1) * hop + frame_length`; the result is scaled
/// down only if its peak exceeds 1.
pub fn synthesize(analysis: &FrameAnalysis) -> Result<Vec<f64>> {
    analysis.validate()?;
    let frames = analysis.num_frames();
    if frames == 0 {
        return Ok(Vec::new());
    }
    let n = analysis.frame_length;
    let hop = analysis.hop;
    let len = (frames - 1) * hop + n;
    let window = hann(n);
    let fft = Fft::new(n);
    let mut acc = vec![0.0; len];
    let mut norm = vec![0.0; len];
    for t in 0..frames {
        let half: Vec<Complex64> = analysis.envelope[t]
            .iter()
            .zip(&analysis.fine_structure[t])
            .zip(&analysis.residual_phase[t])
            .map(|((e, f), p)| Complex64::from_polar(e * f, *p))
            .collect();
        let frame = fft.inverse_real(&half);
        let start = t * hop;
        for i in 0..n {
            acc[start + i] += window[i] * frame[i];
            norm[start + i] += window[i] * window[i];
        }
    }
    let floor = WOLA_FLOOR * norm.iter().fold(0.0_f64, |m, v| m.max(*v));
    let mut out: Vec<f64> = acc
        .iter()
        .zip(&norm)
        .map(|(a, w)| if *w > 0.0 { a / w.max(floor) } else { 0.0 })
        .collect();
    let peak = out.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if peak > 1.0 {
        for v in out.iter_mut() {
            *v /= peak;
        }
    }
    Ok(out)
}

fn principal_angle(x: f64) -> f64 {
    let wrapped = x - 2.0 * PI * ((x + PI) / (2.0 * PI)).floor();
    if wrapped <= -PI { wrapped + 2.0 * PI } else { wrapped }
}

fn interpolate(values: &[f64], position: f64) -> f64 {
    if position < 0.0 || position > (values.len() - 1) as f64 {
        return 0.0;
    }
    let i = position.floor() as usize;
    if i + 1 >= values.len() {
        return values[values.len() - 1];
    }
    let frac = position - i as f64;
    values[i] * (1.0 - frac) + values[i + 1] * frac
}

/// Scales harmonic spacing of voiced frames by `ratios`, leaving envelopes untouched.
///
/// The fine structure is resampled along frequency and phases are advanced
/// frame to frame at the shifted instantaneous frequencies (phase vocoder with
/// phases locked to the nearest spectral peak), so consecutive frames stay
/// coherent at the new pitch. Unvoiced frames pass
/// through unchanged. Ratios that would move F0 above a quarter of the
/// sampling rate are clamped and counted in `pitch_clamped_frames`.
pub fn shift_pitch(analysis: &FrameAnalysis, ratios: &[f64]) -> Result<FrameAnalysis> {
    analysis.validate()?;
    let frames = analysis.num_frames();
    if ratios.len() != frames {
        return Err(Error::Contract(format!(
            "{} pitch ratios for {frames} frames",
            ratios.len()
        )));
    }
    if let Some(r) = ratios.iter().find(|r| !(**r > 0.0) || !r.is_finite()) {
        return Err(Error::Parameter(format!("pitch ratio {r} is not positive")));
    }
    let n = analysis.frame_length as f64;
    let hop = analysis.hop as f64;
    let bins = analysis.bins();
    let ceiling = analysis.sample_rate as f64 / 4.0;
    let mut out = analysis.clone();
    let mut previous_output: Option<Vec<f64>> = None;

    for t in 0..frames {
        if !analysis.voiced[t] {
            previous_output = None;
            continue;
        }
        let f0 = analysis.f0[t];
        let mut ratio = ratios[t];
        if f0 * ratio > ceiling {
            ratio = ceiling / f0;
            out.pitch_clamped_frames += 1;
        }
        let phase = &analysis.residual_phase[t];
        let frequency: Vec<f64> = (0..bins)
            .map(|k| {
                let centre = 2.0 * PI * k as f64 / n;
                match t.checked_sub(1) {
                    Some(prev) => {
                        let advance = phase[k] - analysis.residual_phase[prev][k] - centre * hop;
                        centre + principal_angle(advance) / hop
                    }
                    None => centre,
                }
            })
            .collect();
        let magnitude: Vec<f64> = analysis.envelope[t]
            .iter()
            .zip(&analysis.fine_structure[t])
            .map(|(e, f)| e * f)
            .collect();
        let owner = peak_regions(&magnitude);
        // Phase of each peak after the shift; other bins keep their offset to their peak.
        let mut peak_phase = vec![0.0; bins];
        for k in 0..bins {
            if owner[k] == k {
                let q = ((k as f64 * ratio).round() as usize).min(bins - 1);
                peak_phase[k] = match &previous_output {
                    Some(prev) => prev[q] + hop * ratio * frequency[k],
                    None => phase[k],
                };
            }
        }
        let mut fine = Vec::with_capacity(bins);
        let mut new_phase = Vec::with_capacity(bins);
        for j in 0..bins {
            let source = j as f64 / ratio;
            fine.push(interpolate(&analysis.fine_structure[t], source));
            let nearest = (source.round() as usize).min(bins - 1);
            let peak = owner[nearest];
            new_phase.push(principal_angle(peak_phase[peak] + phase[nearest] - phase[peak]));
        }
        out.f0[t] = f0 * ratio;
        out.fine_structure[t] = fine;
        out.residual_phase[t] = new_phase.clone();
        previous_output = Some(new_phase);
    }
    Ok(out)
}

/// Index of the spectral peak owning each bin: the nearest local maximum,
/// lower index on ties. A spectrum without maxima is owned by bin 0.
fn peak_regions(magnitude: &[f64]) -> Vec<usize> {
    let n = magnitude.len();
    let peaks: Vec<usize> = (0..n)
        .filter(|&k| {
            let left = k == 0 || magnitude[k] > magnitude[k - 1];
            let right = k + 1 == n || magnitude[k] >= magnitude[k + 1];
            left && right
        })
        .collect();
    if peaks.is_empty() {
        return vec![0; n];
    }
    let mut owner = Vec::with_capacity(n);
    let mut i = 0;
    for k in 0..n {
        while i + 1 < peaks.len() && peaks[i + 1].abs_diff(k) < peaks[i].abs_diff(k) {
            i += 1;
        }
        owner.push(peaks[i]);
    }
    owner
}

/// Mean per-segment SNR in dB over non-overlapping segments, skipping `skip`
/// samples at both ends. Segment SNRs are clamped to `[-10, 35]` dB.
pub fn segmental_snr(reference: &[f64], test: &[f64], segment: usize, skip: usize) -> f64 {
    let len = reference.len().min(test.len());
    if len <= 2 * skip || segment == 0 {
        return f64::NEG_INFINITY;
    }
    let mut total = 0.0;
    let mut count = 0usize;
    let mut start = skip;
    while start + segment <= len - skip {
        let signal: f64 = reference[start..start + segment].iter().map(|x| x * x).sum();
        let noise: f64 = reference[start..start + segment]
            .iter()
            .zip(&test[start..start + segment])
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        if signal > 0.0 {
            let snr = if noise == 0.0 { 35.0 } else { 10.0 * (signal / noise).log10() };
            total += snr.clamp(-10.0, 35.0);
            count += 1;
        }
        start += segment;
    }
    if count == 0 { f64::NEG_INFINITY } else { total / count as f64 }
}
