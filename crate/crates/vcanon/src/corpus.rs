//! In-memory corpora, synthetic generation and external-conversion ingestion.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use vcanon_core::synth::{speaker_roster, synthesize_utterance, SyntheticSpeakerSpec};
use vcanon_core::Utterance;

use crate::error::{Error, Result};
use crate::manifest::{Manifest, ManifestEntry, Split};
use crate::wav::{dequantize, read_wav, write_wav};

/// Source speakers' enrollment and trial utterances plus the target pool's training audio.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Corpus {
    pub enroll: Vec<Utterance>,
    pub trial: Vec<Utterance>,
    pub target_pool: Vec<Utterance>,
}

impl Corpus {
    pub fn from_manifest(manifest: &Manifest) -> Result<Self> {
        Ok(Self {
            enroll: manifest.read_split(Split::Enroll)?,
            trial: manifest.read_split(Split::Trial)?,
            target_pool: manifest.read_split(Split::TargetPool)?,
        })
    }

    /// Distinct speakers of a set of utterances, sorted.
    pub fn speakers(utterances: &[Utterance]) -> Vec<String> {
        utterances.iter().map(|u| u.speaker_id.clone()).collect::<BTreeSet<_>>().into_iter().collect()
    }
}

/// Parameters of the synthetic desk-scale corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticCorpusConfig {
    pub speakers: usize,
    pub utterances_per_speaker: usize,
    pub pool_speakers: usize,
    pub utterances_per_pool_speaker: usize,
    pub duration_secs: f64,
    pub sample_rate: u32,
    pub seed: u64,
}

impl Default for SyntheticCorpusConfig {
    fn default() -> Self {
        Self {
            speakers: 20,
            utterances_per_speaker: 6,
            pool_speakers: 100,
            utterances_per_pool_speaker: 3,
            duration_secs: 2.0,
            sample_rate: 16_000,
            seed: 2019,
        }
    }
}

impl SyntheticCorpusConfig {
    /// Source speakers `spk00..` and pool speakers `tgt000..`, all with distinct formant sets.
    pub fn specs(&self) -> Result<(Vec<SyntheticSpeakerSpec>, Vec<SyntheticSpeakerSpec>)> {
        let mut roster = speaker_roster(self.speakers + self.pool_speakers, "spk", self.seed)?;
        let mut pool = roster.split_off(self.speakers);
        for (i, s) in pool.iter_mut().enumerate() {
            s.speaker_id = format!("tgt{i:03}");
        }
        Ok((roster, pool))
    }
}

pub fn utterance_id(speaker_id: &str, index: usize) -> String {
    format!("{speaker_id}_u{index:02}")
}

/// Renders `count` utterances of one speaker, quantized as a 16-bit file would hold them.
pub fn synthesize_speaker(spec: &SyntheticSpeakerSpec, count: usize, duration_secs: f64, sample_rate: u32) -> Result<Vec<Utterance>> {
    (0..count)
        .map(|i| {
            let samples = synthesize_utterance(spec, i, duration_secs, sample_rate)?;
            let samples = samples.into_iter().map(dequantize).collect();
            Ok(Utterance::new(utterance_id(&spec.speaker_id, i), spec.speaker_id.clone(), sample_rate, samples)?)
        })
        .collect()
}

/// Generates the corpus: each source speaker's first half of utterances
/// (rounded down) goes to enrollment and the rest to trial; pool speakers'
/// utterances form the target-pool split.
pub fn generate_synthetic_corpus(
    sources: &[SyntheticSpeakerSpec],
    utterances_per_speaker: usize,
    pool: &[SyntheticSpeakerSpec],
    utterances_per_pool_speaker: usize,
    duration_secs: f64,
    sample_rate: u32,
) -> Result<Corpus> {
    if utterances_per_speaker < 2 {
        return Err(Error::Config("utterances_per_speaker must be at least 2".into()));
    }
    if !pool.is_empty() && utterances_per_pool_speaker == 0 {
        return Err(Error::Config("pool speakers need at least one utterance".into()));
    }
    let ids: BTreeSet<&str> = sources.iter().chain(pool).map(|s| s.speaker_id.as_str()).collect();
    if ids.len() != sources.len() + pool.len() {
        return Err(Error::Config("speaker ids must be unique".into()));
    }
    let rendered: Vec<Vec<Utterance>> = sources
        .par_iter()
        .map(|s| synthesize_speaker(s, utterances_per_speaker, duration_secs, sample_rate))
        .collect::<Result<_>>()?;
    let enroll_count = utterances_per_speaker / 2;
    let mut corpus = Corpus::default();
    for mut utts in rendered {
        corpus.trial.extend(utts.split_off(enroll_count));
        corpus.enroll.extend(utts);
    }
    corpus.target_pool = pool
        .par_iter()
        .map(|s| synthesize_speaker(s, utterances_per_pool_speaker, duration_secs, sample_rate))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    Ok(corpus)
}

pub fn generate_from_config(config: &SyntheticCorpusConfig) -> Result<Corpus> {
    let (sources, pool) = config.specs()?;
    generate_synthetic_corpus(
        &sources,
        config.utterances_per_speaker,
        &pool,
        config.utterances_per_pool_speaker,
        config.duration_secs,
        config.sample_rate,
    )
}

/// Writes every utterance to `dir/audio/<utterance_id>.wav` and a manifest at
/// `dir/manifest.csv` with relative paths.
pub fn write_corpus(corpus: &Corpus, dir: &Path) -> Result<(Manifest, PathBuf)> {
    let audio = dir.join("audio");
    fs::create_dir_all(&audio).map_err(|e| Error::io(&audio, e))?;
    let splits = [(Split::Enroll, &corpus.enroll), (Split::Trial, &corpus.trial), (Split::TargetPool, &corpus.target_pool)];
    let mut entries = Vec::new();
    for (split, utts) in splits {
        for u in utts.iter() {
            entries.push(ManifestEntry {
                utterance_id: u.utterance_id.clone(),
                speaker_id: u.speaker_id.clone(),
                path: PathBuf::from("audio").join(format!("{}.wav", u.utterance_id)),
                split,
            });
        }
    }
    let manifest = Manifest::new(entries, dir);
    let path = dir.join("manifest.csv");
    manifest.validate(&path)?;
    let all: Vec<&Utterance> = splits.iter().flat_map(|(_, u)| u.iter()).collect();
    all.par_iter()
        .map(|u| write_wav(u, &audio.join(format!("{}.wav", u.utterance_id))))
        .collect::<Result<Vec<()>>>()?;
    manifest.save(&path)?;
    Ok((manifest, path))
}

/// Accepts externally converted trial audio. The manifest must list exactly
/// the trial utterance ids (any split tag); speakers come from the original trial set.
pub fn ingest_external_conversion(external: &Manifest, trial: &[Utterance]) -> Result<Vec<Utterance>> {
    let expected: BTreeSet<&str> = trial.iter().map(|u| u.utterance_id.as_str()).collect();
    let given: BTreeSet<&str> = external.entries.iter().map(|e| e.utterance_id.as_str()).collect();
    let missing: Vec<String> = expected.difference(&given).map(|s| s.to_string()).collect();
    let extra: Vec<String> = given.difference(&expected).map(|s| s.to_string()).collect();
    if !missing.is_empty() || !extra.is_empty() || given.len() != external.entries.len() {
        return Err(Error::Mismatch { missing, extra });
    }
    trial
        .iter()
        .map(|u| {
            let entry = external.entries.iter().find(|e| e.utterance_id == u.utterance_id).expect("checked above");
            read_wav(&external.resolve(entry), &u.utterance_id, &u.speaker_id)
        })
        .collect()
}
