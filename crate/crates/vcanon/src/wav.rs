//! 16-bit PCM WAV interchange.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};
use vcanon_core::Utterance;

use crate::error::{Error, Result};

const SCALE: f64 = 32768.0;
const RATE_RANGE: std::ops::RangeInclusive<u32> = 8_000..=48_000;

fn format_error(path: &Path, reason: impl Into<String>) -> Error {
    Error::Format { path: path.to_path_buf(), reason: reason.into() }
}

/// Reads linear 16-bit PCM, averaging channels into mono. Samples are code / 32768.
pub fn read_wav(path: &Path, utterance_id: &str, speaker_id: &str) -> Result<Utterance> {
    let reader = WavReader::open(path).map_err(|e| match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => format_error(path, other.to_string()),
    })?;
    let spec = reader.spec();
    if spec.sample_format != SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(format_error(
            path,
            format!(
                "{}-bit {} samples (only 16-bit integer PCM is read)",
                spec.bits_per_sample,
                if spec.sample_format == SampleFormat::Int { "integer" } else { "float" }
            ),
        ));
    }
    if !RATE_RANGE.contains(&spec.sample_rate) {
        return Err(format_error(path, format!("sample rate {} Hz outside 8-48 kHz", spec.sample_rate)));
    }
    let channels = spec.channels as usize;
    if channels == 0 {
        return Err(format_error(path, "zero channels"));
    }
    let codes: Vec<i16> = reader
        .into_samples::<i16>()
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| format_error(path, e.to_string()))?;
    let samples = codes
        .chunks(channels)
        .map(|frame| frame.iter().map(|&c| c as f64 / SCALE).sum::<f64>() / channels as f64)
        .collect();
    Ok(Utterance::new(utterance_id, speaker_id, spec.sample_rate, samples)?)
}

/// Quantizes to 16-bit mono; 1.0 maps to the largest code.
pub fn write_wav(utterance: &Utterance, path: &Path) -> Result<()> {
    utterance.validate()?;
    let spec = WavSpec {
        channels: 1,
        sample_rate: utterance.sample_rate,
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let wrap = |e: hound::Error| match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => format_error(path, other.to_string()),
    };
    let mut writer = WavWriter::new(BufWriter::new(file), spec).map_err(wrap)?;
    for &s in &utterance.samples {
        writer.write_sample(quantize(s)).map_err(wrap)?;
    }
    writer.finalize().map_err(wrap)
}

pub fn quantize(sample: f64) -> i16 {
    (sample * SCALE).round().clamp(i16::MIN as f64, i16::MAX as f64) as i16
}

/// The sample value a 16-bit round trip produces.
pub fn dequantize(sample: f64) -> f64 {
    quantize(sample) as f64 / SCALE
}
