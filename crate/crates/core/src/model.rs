//! Per-speaker models: k centroid envelopes over pseudo-phonetic classes plus
//! log-F0 statistics.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use rand::Rng;

use crate::audio::Utterance;
use crate::dsp::{analyze, AnalysisConfig};

use crate::error::{Error, Result};
use crate::keyed::keyed_rng;

/// Floor applied before taking the log of an envelope value.
pub const LOG_FLOOR: f64 = 1e-12;

pub fn log_envelope(envelope: &[f64]) -> Vec<f64> {
    envelope.iter().map(|v| v.max(LOG_FLOOR).ln()).collect()
}

/// Mean squared difference of two equal-length vectors.
pub fn mean_squared_distance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64
}

/// Index of the nearest centroid; ties go to the lower index.
pub fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_distance = f64::INFINITY;
    for (i, c) in centroids.iter().enumerate() {
        let d = mean_squared_distance(point, c);
        if d < best_distance {
            best = i;
            best_distance = d;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SpeakerModel {
    pub speaker_id: String,
    pub k: usize,
    /// Geometric-mean envelopes, one per class (exp of the log-domain centroid).
    pub centroids: Vec<Vec<f64>>,
    pub f0_log_mean: f64,
    pub f0_log_std: f64,
}

impl SpeakerModel {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.centroids.len() != self.k {
            return Err(Error::Contract(format!(
                "model {}: {} centroids for k = {}",
                self.speaker_id,
                self.centroids.len(),
                self.k
            )));
        }
        let bins = self.centroids[0].len();
        if self.centroids.iter().any(|c| c.len() != bins || c.iter().any(|v| !(*v >= 0.0))) {
            return Err(Error::Contract(format!("model {}: malformed centroids", self.speaker_id)));
        }
        if !(self.f0_log_std > 0.0) || !self.f0_log_mean.is_finite() {
            return Err(Error::Contract(format!("model {}: invalid pitch statistics", self.speaker_id)));
        }
        Ok(())
    }

    pub fn bins(&self) -> usize {
        self.centroids.first().map_or(0, Vec::len)
    }

    pub fn log_centroids(&self) -> Vec<Vec<f64>> {
        self.centroids.iter().map(|c| log_envelope(c)).collect()
    }

    pub fn pitch_stats(&self) -> (f64, f64) {
        (self.f0_log_mean, self.f0_log_std)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainingConfig {
    pub k: usize,
    pub analysis: AnalysisConfig,
    pub max_iterations: usize,
    pub tolerance: f64,
    /// Cluster only voiced frames instead of every VAD-active frame.
    pub voiced_only: bool,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            k: 8,
            analysis: AnalysisConfig::default(),
            max_iterations: 100,
            tolerance: 1e-6,
            voiced_only: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub centroids: Vec<Vec<f64>>,
    pub assignments: Vec<usize>,
    pub iterations: usize,
}

/// Lloyd's k-means with farthest-point seeding.
///
/// The first centre is a uniformly drawn point from the `seed`-keyed stream;
/// each further centre is the point farthest from those already chosen (lowest
/// index on ties). Iteration stops after `max_iterations` or once no centroid
/// moves by `tolerance` or more. Empty clusters keep their previous centroid.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64, key: &str, max_iterations: usize, tolerance: f64) -> Result<Clustering> {
    if k == 0 {
        return Err(Error::Parameter("k must be at least 1".to_string()));
    }
    if points.len() < k {
        return Err(Error::Parameter(format!("{} points cannot form {k} clusters", points.len())));
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim) {
        return Err(Error::Contract("points differ in dimension".to_string()));
    }
    let mut rng = keyed_rng(seed, "kmeans", key);
    let mut centroids = Vec::with_capacity(k);
    centroids.push(points[rng.random_range(0..points.len())].clone());
    let mut closest: Vec<f64> = points.iter().map(|p| mean_squared_distance(p, &centroids[0])).collect();
    while centroids.len() < k {
        let mut far = 0;
        for (i, d) in closest.iter().enumerate() {
            if *d > closest[far] {
                far = i;
            }
        }
        let chosen = points[far].clone();
        for (d, p) in closest.iter_mut().zip(points) {
            *d = d.min(mean_squared_distance(p, &chosen));
        }
        centroids.push(chosen);
    }

    let mut assignments = alloc::vec![0; points.len()];
    let mut iterations = 0;
    while iterations < max_iterations {
        iterations += 1;
        for (a, p) in assignments.iter_mut().zip(points) {
            *a = nearest(p, &centroids);
        }
        let mut sums = alloc::vec![alloc::vec![0.0; dim]; k];
        let mut counts = alloc::vec![0usize; k];
        for (a, p) in assignments.iter().zip(points) {
            counts[*a] += 1;
            for (s, v) in sums[*a].iter_mut().zip(p) {
                *s += v;
            }
        }
        let mut movement = 0.0_f64;
        for c in 0..k {
            if counts[c] == 0 {
                continue;
            }
            let updated: Vec<f64> = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            let shift = updated
                .iter()
                .zip(&centroids[c])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            movement = movement.max(shift);
            centroids[c] = updated;
        }
        if movement < tolerance {
            break;
        }
    }
    for (a, p) in assignments.iter_mut().zip(points) {
        *a = nearest(p, &centroids);
    }
    Ok(Clustering { centroids, assignments, iterations })
}

/// Seed for a speaker's clustering, fixed per speaker id.
pub const TRAINING_SEED: u64 = 0x5eed_cafe;

/// Trains a model from one speaker's utterances.
///
/// Clusters the log-envelopes of VAD-active frames (voiced only when
/// configured) and takes pitch statistics over voiced frames.
pub fn train_speaker_model(utterances: &[Utterance], config: &TrainingConfig) -> Result<SpeakerModel> {
    let Some(first) = utterances.first() else {
        return Err(Error::Training { speaker: String::new(), reason: "no utterances".to_string() });
    };
    let speaker = first.speaker_id.clone();
    let fail = |reason: String| Error::Training { speaker: speaker.clone(), reason };
    if let Some(other) = utterances.iter().find(|u| u.speaker_id != speaker) {
        return Err(fail(format!("utterance {} belongs to {}", other.utterance_id, other.speaker_id)));
    }
    let mut frames = Vec::new();
    let mut f0 = Vec::new();
    for u in utterances {
        let analysis = analyze(u, &config.analysis)?;
        for t in 0..analysis.num_frames() {
            let active = analysis.energy[t] >= config.analysis.vad_threshold;
            if active && (!config.voiced_only || analysis.voiced[t]) {
                frames.push(log_envelope(&analysis.envelope[t]));
            }
            if analysis.voiced[t] {
                f0.push(analysis.f0[t]);
            }
        }
    }
    if frames.len() < config.k {
        return Err(fail(format!("{} active frames, need at least k = {}", frames.len(), config.k)));
    }
    let (f0_log_mean, f0_log_std) = crate::dsp::log_f0_stats(&f0)
        .filter(|(_, s)| *s > 0.0)
        .ok_or_else(|| fail("too few voiced frames for pitch statistics".to_string()))?;
    let clustering = kmeans(&frames, config.k, TRAINING_SEED, &speaker, config.max_iterations, config.tolerance)?;
    let centroids = clustering
        .centroids
        .iter()
        .map(|c| c.iter().map(|v| v.exp()).collect())
        .collect();
    let model = SpeakerModel { speaker_id: speaker, k: config.k, centroids, f0_log_mean, f0_log_std };
    model.validate()?;
    Ok(model)
}
