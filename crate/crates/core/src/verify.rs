//! Cepstral-statistics speaker verification: embeddings, enrollment, cosine
//! scoring and equal error rate.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;


use crate::audio::Utterance;
use crate::dsp::{frame_count, rms, track_pitch, AnalysisConfig};
use crate::error::{Error, Result};
use crate::fft::Fft;

const PRE_EMPHASIS: f64 = 0.97;
const MEL_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct EmbeddingConfig {
    pub frame_length: usize,
    pub hop: usize,
    pub mel_bands: usize,
    /// Cepstral coefficients per frame, c0 included.
    pub cepstra: usize,
    pub vad_threshold: f64,
    /// Multiplier on the two log-F0 entries.
    pub f0_weight: f64,
    /// Framing for the pitch tracker.
    pub pitch: AnalysisConfig,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        Self {
            frame_length: 512,
            hop: 160,
            mel_bands: 40,
            cepstra: 20,
            vad_threshold: 0.06,
            f0_weight: 10.0,
            pitch: AnalysisConfig::default(),
        }
    }
}

impl EmbeddingConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.frame_length.is_power_of_two() || self.frame_length < 64 {
            return Err(Error::Parameter("embedding frame_length must be a power of two >= 64".to_string()));
        }
        if self.hop == 0 || self.hop > self.frame_length {
            return Err(Error::Parameter("embedding hop must be in 1..=frame_length".to_string()));
        }
        if self.cepstra < 2 || self.cepstra > self.mel_bands {
            return Err(Error::Parameter("need 2 <= cepstra <= mel_bands".to_string()));
        }
        if !(self.f0_weight >= 0.0) {
            return Err(Error::Parameter("f0_weight must be nonnegative".to_string()));
        }
        self.pitch.validate()
    }

    /// Embedding length: means of c1.., standard deviations of c0.., log-F0 mean and std.
    pub fn dimension(&self) -> usize {
        (self.cepstra - 1) + self.cepstra + 2
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Embedding {
    pub values: Vec<f64>,
}

impl Embedding {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn dimension(&self) -> usize {
        self.values.len()
    }
}

fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular mel filters over `0..sample_rate/2`, one row per band over `n/2 + 1` bins.
pub fn mel_filterbank(bands: usize, fft_size: usize, sample_rate: u32) -> Vec<Vec<f64>> {
    let bins = fft_size / 2 + 1;
    let top = hz_to_mel(sample_rate as f64 / 2.0);
    let edges: Vec<f64> = (0..bands + 2)
        .map(|i| mel_to_hz(top * i as f64 / (bands + 1) as f64))
        .collect();
    let bin_hz = sample_rate as f64 / fft_size as f64;
    (0..bands)
        .map(|b| {
            let (lo, mid, hi) = (edges[b], edges[b + 1], edges[b + 2]);
            (0..bins)
                .map(|j| {
                    let f = j as f64 * bin_hz;
                    if f <= lo || f >= hi {
                        0.0
                    } else if f <= mid {
                        (f - lo) / (mid - lo)
                    } else {
                        (hi - f) / (hi - mid)
                    }
                })
                .collect()
        })
        .collect()
}

/// Orthonormal DCT-II, first `count` coefficients.
pub fn dct2(x: &[f64], count: usize) -> Vec<f64> {
    let n = x.len() as f64;
    (0..count)
        .map(|k| {
            let scale = if k == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
            scale
                * x.iter()
                    .enumerate()
                    .map(|(i, v)| v * (PI * k as f64 * (i as f64 + 0.5) / n).cos())
                    .sum::<f64>()
        })
        .collect()
}

/// Mel-cepstra of every frame whose RMS reaches the VAD threshold.
pub fn active_mfcc(utterance: &Utterance, config: &EmbeddingConfig) -> Result<Vec<Vec<f64>>> {
    config.validate()?;
    let n = config.frame_length;
    let fft = Fft::new(n);
    let filters = mel_filterbank(config.mel_bands, n, utterance.sample_rate);
    let window: Vec<f64> = (0..n)
        .map(|i| 0.54 - 0.46 * (2.0 * PI * i as f64 / (n - 1) as f64).cos())
        .collect();
    let x = &utterance.samples;
    let frames = frame_count(x.len(), n, config.hop);
    let mut out = Vec::new();
    for t in 0..frames {
        let frame = &x[t * config.hop..t * config.hop + n];
        if rms(frame) < config.vad_threshold {
            continue;
        }
        let emphasized: Vec<f64> = (0..n)
            .map(|i| {
                let prev = if i > 0 { frame[i - 1] } else if t * config.hop > 0 { x[t * config.hop - 1] } else { 0.0 };
                (frame[i] - PRE_EMPHASIS * prev) * window[i]
            })
            .collect();
        let power: Vec<f64> = fft.forward_real(&emphasized).iter().map(|c| c.norm_sqr()).collect();
        let log_mel: Vec<f64> = filters
            .iter()
            .map(|f| (f.iter().zip(&power).map(|(w, p)| w * p).sum::<f64>() + MEL_FLOOR).ln())
            .collect();
        out.push(dct2(&log_mel, config.cepstra));
    }
    Ok(out)
}

/// Cepstral statistics over VAD-active frames plus voiced log-F0 statistics.
///
/// Utterances without voiced frames get zeros in the two F0 entries.
pub fn extract_embedding(utterance: &Utterance, config: &EmbeddingConfig) -> Result<Embedding> {
    let cepstra = active_mfcc(utterance, config)?;
    if cepstra.is_empty() {
        return Err(Error::Embedding(format!(
            "utterance {} has no frames above the VAD threshold",
            utterance.utterance_id
        )));
    }
    let c = config.cepstra;
    let count = cepstra.len() as f64;
    let mut mean = vec![0.0; c];
    for frame in &cepstra {
        for (m, v) in mean.iter_mut().zip(frame) {
            *m += v / count;
        }
    }
    let mut std = vec![0.0; c];
    for frame in &cepstra {
        for ((s, v), m) in std.iter_mut().zip(frame).zip(&mean) {
            *s += (v - m) * (v - m) / count;
        }
    }
    let (f0_mean, f0_std) = if utterance.samples.len() >= config.pitch.frame_length {
        let (f0, _) = track_pitch(utterance, &config.pitch)?;
        crate::dsp::log_f0_stats(&f0).unwrap_or((0.0, 0.0))
    } else {
        (0.0, 0.0)
    };
    let mut values = Vec::with_capacity(config.dimension());
    values.extend_from_slice(&mean[1..]);
    values.extend(std.iter().map(|v| v.sqrt()));
    values.push(config.f0_weight * f0_mean);
    values.push(config.f0_weight * f0_std);
    Ok(Embedding::new(values))
}

/// Component-wise mean of the embeddings that could be extracted.
pub fn enroll(speaker_id: &str, embeddings: &[Result<Embedding>]) -> Result<Embedding> {
    let ok: Vec<&Embedding> = embeddings.iter().filter_map(|e| e.as_ref().ok()).collect();
    let Some(first) = ok.first() else {
        return Err(Error::Enrollment(format!("no usable utterance for speaker {speaker_id}")));
    };
    let d = first.dimension();
    if ok.iter().any(|e| e.dimension() != d) {
        return Err(Error::Contract(format!("speaker {speaker_id}: embedding dimensions differ")));
    }
    let mut mean = vec![0.0; d];
    for e in &ok {
        for (m, v) in mean.iter_mut().zip(&e.values) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= ok.len() as f64;
    }
    Ok(Embedding::new(mean))
}

/// Cosine similarity; 0 when either side is the zero vector.
pub fn score(enrolled: &Embedding, trial: &Embedding) -> Result<f64> {
    if enrolled.dimension() != trial.dimension() {
        return Err(Error::Contract(format!(
            "embedding dimensions differ: {} vs {}",
            enrolled.dimension(),
            trial.dimension()
        )));
    }
    let dot: f64 = enrolled.values.iter().zip(&trial.values).map(|(a, b)| a * b).sum();
    let na: f64 = enrolled.values.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nb: f64 = trial.values.iter().map(|b| b * b).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// Equal error rate and its threshold.
///
/// Thresholds sweep the sorted distinct scores plus one point above the
/// maximum, with FRR(t) = #(genuine < t)/|genuine| and FAR(t) = #(impostor >= t)/|impostor|.
/// The first threshold where the two rates are equal is returned exactly;
/// otherwise both rates and the threshold are interpolated linearly between
/// the two thresholds where FRR - FAR changes sign.
pub fn compute_eer(genuine: &[f64], impostor: &[f64]) -> Result<(f64, f64)> {
    if genuine.is_empty() || impostor.is_empty() {
        return Err(Error::Contract("EER needs nonempty genuine and impostor scores".to_string()));
    }
    if genuine.iter().chain(impostor).any(|s| !s.is_finite()) {
        return Err(Error::Contract("scores must be finite".to_string()));
    }
    let mut g = genuine.to_vec();
    let mut i = impostor.to_vec();
    g.sort_by(|a, b| a.total_cmp(b));
    i.sort_by(|a, b| a.total_cmp(b));
    let mut thresholds: Vec<f64> = g.iter().chain(&i).copied().collect();
    thresholds.sort_by(|a, b| a.total_cmp(b));
    thresholds.dedup();
    let top = *thresholds.last().unwrap();
    thresholds.push(top + top.abs().max(1.0));

    let (ng, ni) = (g.len(), i.len());
    // counts at threshold t: genuine below t, impostor at or above t
    let counts = |t: f64| {
        let below = g.partition_point(|s| *s < t);
        let above = ni - i.partition_point(|s| *s < t);
        (below, above)
    };
    let rates = |(below, above): (usize, usize)| (below as f64 / ng as f64, above as f64 / ni as f64);
    let mut prev: Option<(f64, (usize, usize))> = None;
    for &t in &thresholds {
        let c = counts(t);
        // compare below/ng with above/ni without rounding
        let lhs = c.0 * ni;
        let rhs = c.1 * ng;
        match lhs.cmp(&rhs) {
            Ordering::Equal => return Ok((rates(c).0, t)),
            Ordering::Greater => {
                let (t0, c0) = prev.expect("FRR < FAR at the lowest threshold");
                let (frr0, far0) = rates(c0);
                let (frr1, far1) = rates(c);
                let d0 = frr0 - far0;
                let d1 = frr1 - far1;
                let s = -d0 / (d1 - d0);
                return Ok((frr0 + s * (frr1 - frr0), t0 + s * (t - t0)));
            }
            Ordering::Less => prev = Some((t, c)),
        }
    }
    unreachable!("FRR = 1 and FAR = 0 above the largest score")
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrialRecord {
    pub enrolled_speaker: String,
    pub trial_utterance: String,
    pub trial_speaker: String,
    pub score: f64,
    pub genuine: bool,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvalReport {
    pub genuine_scores: Vec<f64>,
    pub impostor_scores: Vec<f64>,
    pub eer: f64,
    pub threshold: f64,
    pub trials: Vec<TrialRecord>,
}

impl EvalReport {
    pub fn validate(&self) -> Result<()> {
        if self.genuine_scores.is_empty() || self.impostor_scores.is_empty() {
            return Err(Error::Contract("report lacks genuine or impostor scores".to_string()));
        }
        if !(0.0..=1.0).contains(&self.eer) {
            return Err(Error::Contract(format!("EER {} outside [0, 1]", self.eer)));
        }
        let genuine = self.trials.iter().filter(|t| t.genuine).count();
        if genuine != self.genuine_scores.len() || self.trials.len() - genuine != self.impostor_scores.len() {
            return Err(Error::Contract("trial records disagree with score lists".to_string()));
        }
        Ok(())
    }
}

/// A trial utterance's embedding with its identity.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialEmbedding {
    pub utterance_id: String,
    pub speaker_id: String,
    pub embedding: Embedding,
}

/// Scores every (enrolled speaker, trial utterance) pair after subtracting the
/// mean enrollment embedding from both sides.
pub fn run_trials(enrollments: &[(String, Embedding)], trials: &[TrialEmbedding]) -> Result<EvalReport> {
    if enrollments.len() < 2 {
        return Err(Error::Protocol(format!("need at least 2 enrolled speakers, got {}", enrollments.len())));
    }
    if trials.is_empty() {
        return Err(Error::Protocol("no trial utterances".to_string()));
    }
    let d = enrollments[0].1.dimension();
    let mut centre = vec![0.0; d];
    for (speaker, e) in enrollments {
        if e.dimension() != d {
            return Err(Error::Contract(format!("enrollment {speaker} has dimension {}", e.dimension())));
        }
        for (c, v) in centre.iter_mut().zip(&e.values) {
            *c += v / enrollments.len() as f64;
        }
    }
    let centred = |e: &Embedding| Embedding::new(e.values.iter().zip(&centre).map(|(v, c)| v - c).collect());
    let enrolled: Vec<Embedding> = enrollments.iter().map(|(_, e)| centred(e)).collect();
    let mut report = EvalReport {
        genuine_scores: Vec::new(),
        impostor_scores: Vec::new(),
        eer: 0.0,
        threshold: 0.0,
        trials: Vec::with_capacity(enrollments.len() * trials.len()),
    };
    for trial in trials {
        if trial.embedding.dimension() != d {
            return Err(Error::Contract(format!("trial {} has dimension {}", trial.utterance_id, trial.embedding.dimension())));
        }
        let t = centred(&trial.embedding);
        for ((speaker, _), e) in enrollments.iter().zip(&enrolled) {
            let s = score(e, &t)?;
            let genuine = *speaker == trial.speaker_id;
            if genuine {
                report.genuine_scores.push(s);
            } else {
                report.impostor_scores.push(s);
            }
            report.trials.push(TrialRecord {
                enrolled_speaker: speaker.clone(),
                trial_utterance: trial.utterance_id.clone(),
                trial_speaker: trial.speaker_id.clone(),
                score: s,
                genuine,
            });
        }
    }
    if report.genuine_scores.is_empty() {
        return Err(Error::Protocol("no trial utterance belongs to an enrolled speaker".to_string()));
    }
    let (eer, threshold) = compute_eer(&report.genuine_scores, &report.impostor_scores)?;
    report.eer = eer;
    report.threshold = threshold;
    Ok(report)
}
