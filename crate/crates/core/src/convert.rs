//! The built-in voice converters.
//!
//! VoiceMask warps every frame's envelope with one composite bilinear/quadratic
//! warp and moves pitch statistics to a target speaker. The VTLN converter
//! classifies each frame against the source speaker's centroids and warps it
//! with the power warp matched to that class, so the warp direction can change
//! from frame to frame.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;


use crate::audio::Utterance;
use crate::dsp::{analyze, shift_pitch, synthesize, AnalysisConfig, FrameAnalysis};
use crate::error::{Error, Result};
use crate::model::{log_envelope, mean_squared_distance, nearest, SpeakerModel};
use crate::warp::{distortion_strength, EnvelopeWarp, WarpSpec};

/// Allowed |α| range for VoiceMask draws.
pub const VOICEMASK_ALPHA_RANGE: (f64, f64) = (0.08, 0.10);
pub const VOICEMASK_BETA_RANGE: (f64, f64) = (-2.0, 2.0);
/// Accepted range of the composite warp's distortion strength.
pub const VOICEMASK_DISTORTION_RANGE: (f64, f64) = (0.32, 0.40);
/// Trapezoid points used whenever VoiceMask distortion is evaluated.
pub const DISTORTION_POINTS: usize = 10_001;

/// Default VTLN exponent search grid: 16 log-spaced points over [0.5, 2].
pub fn default_gamma_grid() -> Vec<f64> {
    let (lo, hi) = (0.5_f64.ln(), 2.0_f64.ln());
    (0..16).map(|i| (lo + (hi - lo) * i as f64 / 15.0).exp()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ClassMatch {
    pub target_class: usize,
    pub gamma: f64,
    /// Mean squared log-spectral distance at the optimum.
    pub distance: f64,
}

/// Per source class: matched target class and power-warp exponent.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ClassMapping {
    pub entries: Vec<ClassMatch>,
}

impl ClassMapping {
    pub fn identity(k: usize) -> Self {
        Self {
            entries: (0..k)
                .map(|c| ClassMatch { target_class: c, gamma: 1.0, distance: 0.0 })
                .collect(),
        }
    }

    pub fn validate(&self, source: &SpeakerModel, target: &SpeakerModel) -> Result<()> {
        if self.entries.len() != source.k {
            return Err(Error::Contract(format!(
                "mapping has {} entries for a {}-class source model",
                self.entries.len(),
                source.k
            )));
        }
        for e in &self.entries {
            if e.target_class >= target.k {
                return Err(Error::Contract(format!("target class {} out of range", e.target_class)));
            }
            WarpSpec::Power { gamma: e.gamma }.validate()?;
        }
        Ok(())
    }
}

fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Parameter("empty γ grid".into()));
    }
    if grid.iter().any(|g| !(*g > 0.0) || !g.is_finite()) {
        return Err(Error::Parameter("γ grid entries must be positive".into()));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Parameter("γ grid must be strictly increasing".into()));
    }
    Ok(())
}

/// Exhaustive class matching.
///
/// For each source class, searches every (target class, γ) pair for the
/// smallest mean squared log distance between the power-warped source
/// centroid and the target centroid. Ties prefer smaller `|γ - 1|`, then the
/// lower target class, then the earlier grid entry.
pub fn vtln_match(source: &SpeakerModel, target: &SpeakerModel, gamma_grid: &[f64]) -> Result<ClassMapping> {
    validate_grid(gamma_grid)?;
    source.validate()?;
    target.validate()?;
    let bins = source.bins();
    if target.bins() != bins {
        return Err(Error::Contract(format!(
            "envelope lengths differ: source {} bins, target {} bins",
            bins,
            target.bins()
        )));
    }
    let warps = gamma_grid
        .iter()
        .map(|&gamma| WarpSpec::Power { gamma }.pullback(bins))
        .collect::<Result<Vec<_>>>()?;
    let target_logs = target.log_centroids();
    let mut entries = Vec::with_capacity(source.k);
    for centroid in &source.centroids {
        let mut best: Option<(f64, f64, usize, usize)> = None;
        for (g, warp) in warps.iter().enumerate() {
            let warped = log_envelope(&warp.apply(centroid)?);
            let gamma_offset = (gamma_grid[g] - 1.0).abs();
            for (d, t) in target_logs.iter().enumerate() {
                let candidate = (mean_squared_distance(&warped, t), gamma_offset, d, g);
                if best.is_none_or(|b| candidate < b) {
                    best = Some(candidate);
                }
            }
        }
        let (distance, _, target_class, g) = best.expect("grid and target classes are nonempty");
        entries.push(ClassMatch { target_class, gamma: gamma_grid[g], distance });
    }
    Ok(ClassMapping { entries })
}

/// Log-Gaussian normalization of a pitch contour:
/// `f0' = exp(μt + (ln f0 - μs) σt / σs)` on voiced frames, 0 elsewhere.
pub fn transform_pitch_contour(f0: &[f64], source: (f64, f64), target: (f64, f64)) -> Result<Vec<f64>> {
    let (mu_s, sigma_s) = source;
    let (mu_t, sigma_t) = target;
    if !(sigma_s > 0.0) || !(sigma_t > 0.0) {
        return Err(Error::Domain(format!(
            "pitch standard deviations must be positive (source {sigma_s}, target {sigma_t})"
        )));
    }
    if f0.iter().any(|f| !(*f >= 0.0)) {
        return Err(Error::Domain("negative F0 in contour".into()));
    }
    let scale = sigma_t / sigma_s;
    Ok(f0
        .iter()
        .map(|&f| if f > 0.0 { (mu_t + (f.ln() - mu_s) * scale).exp() } else { 0.0 })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct VoiceMaskParams {
    pub alpha: f64,
    pub beta: f64,
    /// Speaker whose pitch statistics are imposed; the envelope is not matched to them.
    pub target_speaker_id: String,
}

/// True iff `(α, β)` lies in the VoiceMask box and distortion band.
pub fn voicemask_admissible(alpha: f64, beta: f64) -> bool {
    let (a_lo, a_hi) = VOICEMASK_ALPHA_RANGE;
    let (b_lo, b_hi) = VOICEMASK_BETA_RANGE;
    let (d_lo, d_hi) = VOICEMASK_DISTORTION_RANGE;
    if !(alpha.abs() >= a_lo && alpha.abs() <= a_hi && beta >= b_lo && beta <= b_hi) {
        return false;
    }
    match distortion_strength(alpha, beta, DISTORTION_POINTS) {
        Ok(d) => d >= d_lo && d <= d_hi,
        Err(_) => false,
    }
}

impl VoiceMaskParams {
    pub fn validate(&self) -> Result<()> {
        if !voicemask_admissible(self.alpha, self.beta) {
            return Err(Error::Parameter(format!(
                "VoiceMask parameters (α = {}, β = {}) violate |α| ∈ [0.08, 0.10], β ∈ [-2, 2], distortion ∈ [0.32, 0.40]",
                self.alpha, self.beta
            )));
        }
        Ok(())
    }

    pub fn warp(&self) -> WarpSpec {
        WarpSpec::BilinearQuadratic { alpha: self.alpha, beta: self.beta }
    }
}

/// Moves the analysis' pitch statistics from `source` to `target` and shifts the fine structure.
fn retarget_pitch(analysis: &FrameAnalysis, source: (f64, f64), target: (f64, f64)) -> Result<FrameAnalysis> {
    let new_f0 = transform_pitch_contour(&analysis.f0, source, target)?;
    let ratios: Vec<f64> = analysis
        .f0
        .iter()
        .zip(&new_f0)
        .map(|(old, new)| if *old > 0.0 { new / old } else { 1.0 })
        .collect();
    shift_pitch(analysis, &ratios)
}

fn warp_frames(analysis: &mut FrameAnalysis, warps: &[EnvelopeWarp], class_of: impl Fn(usize) -> usize) -> Result<()> {
    for t in 0..analysis.num_frames() {
        analysis.envelope[t] = warps[class_of(t)].apply(&analysis.envelope[t])?;
    }
    Ok(())
}

/// Source pitch statistics measured on the utterance itself.
///
/// Falls back to the target spread when fewer than two distinct voiced values
/// exist, so only the mean is moved.
fn utterance_pitch_stats(analysis: &FrameAnalysis, target: (f64, f64)) -> Option<(f64, f64)> {
    analysis
        .log_f0_stats()
        .map(|(mean, std)| (mean, if std > 0.0 { std } else { target.1 }))
}

/// VoiceMask: one composite warp for every frame, pitch moved to `target`'s statistics.
pub fn convert_voicemask(
    utterance: &Utterance,
    params: &VoiceMaskParams,
    target: &SpeakerModel,
    config: &AnalysisConfig,
) -> Result<Utterance> {
    params.validate()?;
    target.validate()?;
    convert_with_warp(utterance, &params.warp(), target.pitch_stats(), config)
}

/// Applies one warp to every frame's envelope and retargets pitch statistics.
///
/// This is the VoiceMask transform without its parameter-range checks. Source
/// statistics are measured on the utterance itself.
pub fn convert_with_warp(
    utterance: &Utterance,
    warp: &WarpSpec,
    target_stats: (f64, f64),
    config: &AnalysisConfig,
) -> Result<Utterance> {
    let mut analysis = analyze(utterance, config)?;
    let warp = warp.pullback(analysis.bins())?;
    warp_frames(&mut analysis, core::slice::from_ref(&warp), |_| 0)?;
    if let Some(source_stats) = utterance_pitch_stats(&analysis, target_stats) {
        analysis = retarget_pitch(&analysis, source_stats, target_stats)?;
    }
    Ok(utterance.with_samples(synthesize(&analysis)?))
}

/// Class of each frame: nearest source centroid in log-envelope MSE, lower index on ties.
pub fn classify_frames(analysis: &FrameAnalysis, source: &SpeakerModel) -> Vec<usize> {
    let centroids = source.log_centroids();
    analysis
        .envelope
        .iter()
        .map(|env| nearest(&log_envelope(env), &centroids))
        .collect()
}

/// VTLN conversion: per-frame class-dependent power warp plus pitch normalization.
pub fn convert_vtln(
    utterance: &Utterance,
    source: &SpeakerModel,
    target: &SpeakerModel,
    mapping: &ClassMapping,
    config: &AnalysisConfig,
) -> Result<Utterance> {
    source.validate()?;
    target.validate()?;
    mapping.validate(source, target)?;
    let mut analysis = analyze(utterance, config)?;
    if source.bins() != analysis.bins() {
        return Err(Error::Contract(format!(
            "model {} has {} bins, analysis has {}",
            source.speaker_id,
            source.bins(),
            analysis.bins()
        )));
    }
    let warps = mapping
        .entries
        .iter()
        .map(|e| WarpSpec::Power { gamma: e.gamma }.pullback(analysis.bins()))
        .collect::<Result<Vec<_>>>()?;
    let classes = classify_frames(&analysis, source);
    warp_frames(&mut analysis, &warps, |t| classes[t])?;
    analysis = retarget_pitch(&analysis, source.pitch_stats(), target.pitch_stats())?;
    Ok(utterance.with_samples(synthesize(&analysis)?))
}
