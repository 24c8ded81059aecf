use alloc::string::{String, ToString};
use alloc::vec::Vec;
use alloc::format;

use crate::error::{Error, Result};

/// Mono audio with speaker and utterance identity; samples are in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Utterance {
    pub utterance_id: String,
    pub speaker_id: String,
    pub sample_rate: u32,
    pub samples: Vec<f64>,
}

impl Utterance {
    /// Builds an utterance, rejecting a zero rate or out-of-range / non-finite samples.
    pub fn new(
        utterance_id: impl Into<String>,
        speaker_id: impl Into<String>,
        sample_rate: u32,
        samples: Vec<f64>,
    ) -> Result<Self> {
        let u = Self {
            utterance_id: utterance_id.into(),
            speaker_id: speaker_id.into(),
            sample_rate,
            samples,
        };
        u.validate()?;
        Ok(u)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_rate == 0 {
            return Err(Error::Parameter("sample_rate must be positive".to_string()));
        }
        if let Some((i, v)) = self
            .samples
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || v.abs() > 1.0)
        {
            return Err(Error::Parameter(format!(
                "utterance {}: sample {i} = {v} outside [-1, 1]",
                self.utterance_id
            )));
        }
        Ok(())
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Same identity, new samples.
    pub fn with_samples(&self, samples: Vec<f64>) -> Self {
        Self {
            utterance_id: self.utterance_id.clone(),
            speaker_id: self.speaker_id.clone(),
            sample_rate: self.sample_rate,
            samples,
        }
    }
}
