//! Synthetic speakers for desk-scale experiments.
//!
//! An utterance is a sequence of isolated vowel segments separated by silence.
//! Each segment is a pulse train at a drifting F0 passed through a cascade of
//! second-order formant resonators. Vowels share one inventory of formant
//! scale factors, so speakers differ by their base formant centres (vocal
//! tract) and their pitch distribution, and frames of one speaker fall into a
//! handful of spectral classes.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::keyed::keyed_rng;

/// Formant scale factors of the shared vowel inventory.
const VOWELS: [[f64; 4]; 5] = [
    [1.0, 1.0, 1.0, 1.0],
    [1.35, 0.8, 1.0, 1.0],
    [0.6, 1.45, 1.12, 1.05],
    [0.62, 0.62, 0.95, 1.0],
    [0.95, 1.2, 1.05, 1.0],
];
/// Pitch drift: AR(1) coefficient per 10 ms control step.
const DRIFT_CORRELATION: f64 = 0.95;
const CONTROL_STEP_SECS: f64 = 0.01;
const PEAK: f64 = 0.9;
const ASPIRATION: f64 = 0.02;
const EDGE_SILENCE_SECS: (f64, f64) = (0.08, 0.15);
const SEGMENT_SECS: (f64, f64) = (0.15, 0.35);
const GAP_SECS: (f64, f64) = (0.04, 0.10);
const RAMP_SECS: f64 = 0.01;
const MIN_FORMANT_GAP: f64 = 350.0;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SyntheticSpeakerSpec {
    pub speaker_id: String,
    /// Mean of ln F0 (log-Hz).
    pub f0_log_mean: f64,
    pub f0_log_std: f64,
    /// 3 or 4 strictly increasing centres, Hz.
    pub formant_centers: Vec<f64>,
    pub formant_bandwidths: Vec<f64>,
    pub seed: u64,
}

impl SyntheticSpeakerSpec {
    pub fn validate(&self, sample_rate: u32) -> Result<()> {
        let bad = |why: &str| Err(Error::Parameter(format!("speaker {}: {why}", self.speaker_id)));
        if !(self.f0_log_std > 0.0) {
            return bad("f0_log_std must be positive");
        }
        if !self.f0_log_mean.is_finite() {
            return bad("f0_log_mean must be finite");
        }
        let n = self.formant_centers.len();
        if !(3..=4).contains(&n) || self.formant_bandwidths.len() != n {
            return bad("need 3 or 4 formants with matching bandwidths");
        }
        if self.formant_centers.windows(2).any(|w| w[0] >= w[1]) || self.formant_centers[0] <= 0.0 {
            return bad("formant centres must be positive and strictly increasing");
        }
        if self.formant_centers[n - 1] >= sample_rate as f64 / 2.0 {
            return bad("formant centres must lie below Nyquist");
        }
        if self.formant_bandwidths.iter().any(|b| !(*b > 0.0)) {
            return bad("formant bandwidths must be positive");
        }
        Ok(())
    }
}

/// Klatt-style resonator with unity gain at DC.
struct Resonator {
    a: f64,
    b: f64,
    c: f64,
    y1: f64,
    y2: f64,
}

impl Resonator {
    fn new(freq: f64, bandwidth: f64, sample_rate: f64) -> Self {
        let r = (-PI * bandwidth / sample_rate).exp();
        let c = -r * r;
        let b = 2.0 * r * (2.0 * PI * freq / sample_rate).cos();
        Self { a: 1.0 - b - c, b, c, y1: 0.0, y2: 0.0 }
    }

    fn step(&mut self, x: f64) -> f64 {
        let y = self.a * x + self.b * self.y1 + self.c * self.y2;
        self.y2 = self.y1;
        self.y1 = y;
        y
    }
}

fn uniform(rng: &mut ChaCha8Rng, range: (f64, f64)) -> f64 {
    rng.random_range(range.0..range.1)
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; 1 - u keeps the log argument in (0, 1].
    let u: f64 = 1.0 - rng.random::<f64>();
    let v: f64 = rng.random();
    (-2.0 * u.ln()).sqrt() * (2.0 * PI * v).cos()
}

/// Renders one vowel segment of `len` samples.
fn render_segment(
    spec: &SyntheticSpeakerSpec,
    vowel: &[f64; 4],
    len: usize,
    sample_rate: f64,
    drift: &mut f64,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    let nyquist = sample_rate / 2.0;
    // merged formants ring long enough to mask the pitch period, so scaled
    // centres are kept apart
    let mut centres: Vec<f64> = spec.formant_centers.iter().zip(vowel).map(|(f, s)| f * s).collect();
    for k in 1..centres.len() {
        centres[k] = centres[k].max(centres[k - 1] + MIN_FORMANT_GAP);
    }
    let mut resonators: Vec<Resonator> = centres
        .iter()
        .zip(&spec.formant_bandwidths)
        .map(|(f, bw)| Resonator::new(f.min(0.9 * nyquist), *bw, sample_rate))
        .collect();
    let control = (CONTROL_STEP_SECS * sample_rate) as usize;
    let steps = len / control + 2;
    let innovation = (1.0 - DRIFT_CORRELATION * DRIFT_CORRELATION).sqrt();
    let mut contour = Vec::with_capacity(steps);
    for _ in 0..steps {
        *drift = DRIFT_CORRELATION * *drift + innovation * standard_normal(rng);
        contour.push((spec.f0_log_mean + spec.f0_log_std * *drift).exp());
    }
    let mut excitation = vec![0.0; len + 1];
    let mut phase = rng.random::<f64>();
    for i in 0..len {
        let pos = i as f64 / control as f64;
        let j = pos.floor() as usize;
        let frac = pos - j as f64;
        let f0 = contour[j] * (1.0 - frac) + contour[j + 1] * frac;
        phase += f0 / sample_rate;
        if phase >= 1.0 {
            phase -= 1.0;
            // split the pulse between the two samples around its true position
            let late = phase / (f0 / sample_rate);
            excitation[i] += 1.0 - late.min(1.0);
            excitation[i + 1] += late.min(1.0);
        }
    }
    let ramp = (RAMP_SECS * sample_rate) as usize;
    let mut tilt = 0.0;
    let mut out = Vec::with_capacity(len);
    for (i, e) in excitation.iter().take(len).enumerate() {
        // one-pole glottal tilt, then a differentiated-pulse source
        tilt = 0.9 * tilt + e;
        let mut y = tilt + ASPIRATION * rng.random_range(-1.0..1.0);
        for r in resonators.iter_mut() {
            y = r.step(y);
        }
        let edge = i.min(len - 1 - i);
        let gain = if edge < ramp { 0.5 - 0.5 * (PI * edge as f64 / ramp as f64).cos() } else { 1.0 };
        out.push(y * gain);
    }
    // remove the DC the unity-gain cascade passes through
    let mean = out.iter().sum::<f64>() / len as f64;
    for v in out.iter_mut() {
        *v -= mean;
    }
    out
}

/// Renders utterance number `index` of a speaker. Deterministic in `(spec, index, duration, rate)`.
pub fn synthesize_utterance(
    spec: &SyntheticSpeakerSpec,
    index: usize,
    duration_secs: f64,
    sample_rate: u32,
) -> Result<Vec<f64>> {
    spec.validate(sample_rate)?;
    let sr = sample_rate as f64;
    let total = (duration_secs * sr).round() as usize;
    let mut rng = keyed_rng(spec.seed, "utterance", &index.to_string());
    let lead = (uniform(&mut rng, EDGE_SILENCE_SECS) * sr) as usize;
    let tail = (EDGE_SILENCE_SECS.0 * sr) as usize;
    let min_segment = (SEGMENT_SECS.0 * sr) as usize;
    if total < lead + tail + min_segment {
        return Err(Error::Parameter(format!(
            "duration {duration_secs}s too short for one voiced segment"
        )));
    }
    let mut samples = vec![0.0; total];
    let mut cursor = lead;
    let mut drift = standard_normal(&mut rng);
    // every utterance cycles through the whole inventory in a shuffled order
    let mut order: Vec<usize> = (0..VOWELS.len()).collect();
    for i in (1..order.len()).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    let mut next = 0;
    while cursor + min_segment + tail <= total {
        let wanted = (uniform(&mut rng, SEGMENT_SECS) * sr) as usize;
        let len = wanted.min(total - tail - cursor);
        let vowel = &VOWELS[order[next % order.len()]];
        next += 1;
        let level = uniform(&mut rng, (0.7, 1.0));
        let segment = render_segment(spec, vowel, len, sr, &mut drift, &mut rng);
        for (dst, v) in samples[cursor..cursor + len].iter_mut().zip(segment) {
            *dst = level * v;
        }
        cursor += len + (uniform(&mut rng, GAP_SECS) * sr) as usize;
    }
    let peak = samples.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        for v in samples.iter_mut() {
            *v *= PEAK / peak;
        }
    }
    Ok(samples)
}

const F1_GRID: [f64; 5] = [400.0, 550.0, 700.0, 850.0, 1000.0];
const F2_GRID: [f64; 5] = [1200.0, 1400.0, 1600.0, 1800.0, 2000.0];
const F3_GRID: [f64; 5] = [2300.0, 2500.0, 2700.0, 2900.0, 3100.0];

/// Largest roster [`speaker_roster`] can produce.
pub const MAX_ROSTER: usize = F1_GRID.len() * F2_GRID.len() * F3_GRID.len();

/// Builds `count` speakers named `{prefix}{index:02}` whose formant triples
/// come from a grid with at least 150 Hz between any two speakers in some
/// formant. Speakers alternate between a low and a high pitch register.
pub fn speaker_roster(count: usize, prefix: &str, seed: u64) -> Result<Vec<SyntheticSpeakerSpec>> {
    if count > MAX_ROSTER {
        return Err(Error::Parameter(format!("at most {MAX_ROSTER} synthetic speakers are supported")));
    }
    let mut combos = Vec::with_capacity(MAX_ROSTER);
    for f1 in F1_GRID {
        for f2 in F2_GRID {
            for f3 in F3_GRID {
                combos.push([f1, f2, f3]);
            }
        }
    }
    let mut rng = keyed_rng(seed, "roster", prefix);
    // Fisher-Yates so consecutive speakers are not grid neighbours
    for i in (1..combos.len()).rev() {
        let j = rng.random_range(0..=i);
        combos.swap(i, j);
    }
    Ok((0..count)
        .map(|i| {
            let register = if i % 2 == 0 { (85.0, 150.0) } else { (160.0, 260.0) };
            let f0 = uniform(&mut rng, register);
            SyntheticSpeakerSpec {
                speaker_id: format!("{prefix}{i:02}"),
                f0_log_mean: f0.ln(),
                f0_log_std: uniform(&mut rng, (0.06, 0.12)),
                formant_centers: combos[i].to_vec(),
                formant_bandwidths: vec![
                    uniform(&mut rng, (60.0, 90.0)),
                    uniform(&mut rng, (90.0, 120.0)),
                    uniform(&mut rng, (120.0, 160.0)),
                ],
                seed: rng.random(),
            }
        })
        .collect())
}
