//! Target-selection strategies: which target speaker (and, for VoiceMask,
//! which warp parameters) each utterance is converted with.
//!
//! Every draw comes from a stream keyed by `(master_seed, strategy, key)` where
//! the key is a constant, the speaker id or the utterance id, so a table does
//! not depend on manifest order.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::convert::{
    VoiceMaskParams, DISTORTION_POINTS, VOICEMASK_ALPHA_RANGE, VOICEMASK_BETA_RANGE, VOICEMASK_DISTORTION_RANGE,
};
use crate::error::{Error, Result};
use crate::keyed::keyed_rng;
use crate::warp::distortion_strength;

/// Rejection-sampling budget for one VoiceMask draw.
pub const MAX_SAMPLING_ATTEMPTS: usize = 10_000;
pub const DEFAULT_POOL_SIZE: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Strategy {
    /// One target for every utterance.
    Const,
    /// One target per source speaker.
    Perm,
    /// An independent target per utterance.
    Random,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Const, Strategy::Perm, Strategy::Random];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Const => "const",
            Strategy::Perm => "perm",
            Strategy::Random => "random",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|s| s.name() == name)
            .ok_or_else(|| Error::Parameter(format!("unknown strategy {name:?} (expected const, perm or random)")))
    }

    fn key<'a>(self, speaker_id: &'a str, utterance_id: &'a str) -> &'a str {
        match self {
            Strategy::Const => "",
            Strategy::Perm => speaker_id,
            Strategy::Random => utterance_id,
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ConverterKind {
    /// No conversion; the baseline.
    Identity,
    VoiceMask,
    Vtln,
    /// Audio converted outside this toolkit and ingested afterwards.
    External,
}

impl ConverterKind {
    pub fn name(self) -> &'static str {
        match self {
            ConverterKind::Identity => "identity",
            ConverterKind::VoiceMask => "voice_mask",
            ConverterKind::Vtln => "vtln",
            ConverterKind::External => "external",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        [ConverterKind::Identity, ConverterKind::VoiceMask, ConverterKind::Vtln, ConverterKind::External]
            .into_iter()
            .find(|c| c.name() == name)
            .ok_or_else(|| {
                Error::Parameter(format!(
                    "unknown converter {name:?} (expected identity, voice_mask, vtln or external)"
                ))
            })
    }

    /// Strategies the converter is evaluated under. VoiceMask was only ever
    /// applied with per-utterance draws.
    pub fn supports(self, strategy: Strategy) -> bool {
        !matches!(self, ConverterKind::VoiceMask) || strategy == Strategy::Random
    }
}

impl fmt::Display for ConverterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Candidate targets, in a fixed order.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TargetPool {
    pub speakers: Vec<String>,
    pub pool_seed: u64,
}

impl TargetPool {
    pub fn new(speakers: Vec<String>, pool_seed: u64) -> Result<Self> {
        let pool = Self { speakers, pool_seed };
        pool.validate()?;
        Ok(pool)
    }

    /// Draws `size` distinct speakers from `candidates` with `pool_seed`,
    /// keeping the candidates' relative order.
    pub fn select(candidates: &[String], size: usize, pool_seed: u64) -> Result<Self> {
        if size == 0 || size > candidates.len() {
            return Err(Error::Parameter(format!(
                "pool size {size} must be in 1..={}",
                candidates.len()
            )));
        }
        let mut rng = keyed_rng(pool_seed, "pool", "");
        let mut index: Vec<usize> = (0..candidates.len()).collect();
        for i in 0..size {
            let j = rng.random_range(i..index.len());
            index.swap(i, j);
        }
        let mut chosen = index[..size].to_vec();
        chosen.sort_unstable();
        Self::new(chosen.into_iter().map(|i| candidates[i].clone()).collect(), pool_seed)
    }

    pub fn validate(&self) -> Result<()> {
        if self.speakers.is_empty() {
            return Err(Error::Parameter("target pool is empty".to_string()));
        }
        let mut seen = BTreeSet::new();
        for s in &self.speakers {
            if !seen.insert(s.as_str()) {
                return Err(Error::Parameter(format!("target pool lists {s} twice")));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.speakers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.speakers.is_empty()
    }

    pub fn contains(&self, speaker_id: &str) -> bool {
        self.speakers.iter().any(|s| s == speaker_id)
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> &str {
        &self.speakers[rng.random_range(0..self.speakers.len())]
    }

    /// SHA-256 over the ordered speaker list and seed, hex encoded.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.pool_seed.to_le_bytes());
        for s in &self.speakers {
            hash_str(&mut h, s);
        }
        hex(&h.finalize())
    }
}

/// One (utterance, speaker) pair a table assigns parameters to.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct UtteranceKey {
    pub utterance_id: String,
    pub speaker_id: String,
}

impl UtteranceKey {
    pub fn new(utterance_id: impl Into<String>, speaker_id: impl Into<String>) -> Self {
        Self { utterance_id: utterance_id.into(), speaker_id: speaker_id.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WarpParams {
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Assignment {
    pub utterance_id: String,
    pub speaker_id: String,
    pub target: String,
    /// Present iff the converter is VoiceMask.
    pub warp: Option<WarpParams>,
}

impl Assignment {
    pub fn voicemask_params(&self) -> Option<VoiceMaskParams> {
        self.warp.map(|w| VoiceMaskParams { alpha: w.alpha, beta: w.beta, target_speaker_id: self.target.clone() })
    }
}

/// The realization of a strategy over a set of utterances; rows are sorted by utterance id.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AssignmentTable {
    pub strategy: Strategy,
    pub converter: ConverterKind,
    pub pool: TargetPool,
    pub master_seed: u64,
    pub rows: Vec<Assignment>,
}

/// Draws `(α, β)` with `|α|` uniform on the VoiceMask range (random sign) and
/// `β` uniform on its range, accepting iff the distortion lies in `band`.
pub fn sample_voicemask(rng: &mut ChaCha8Rng, band: (f64, f64), max_attempts: usize) -> Result<WarpParams> {
    let (a_lo, a_hi) = VOICEMASK_ALPHA_RANGE;
    let (b_lo, b_hi) = VOICEMASK_BETA_RANGE;
    for _ in 0..max_attempts {
        let magnitude = rng.random_range(a_lo..=a_hi);
        let alpha = if rng.random::<bool>() { magnitude } else { -magnitude };
        let beta = rng.random_range(b_lo..=b_hi);
        let d = distortion_strength(alpha, beta, DISTORTION_POINTS)?;
        if d >= band.0 && d <= band.1 {
            return Ok(WarpParams { alpha, beta });
        }
    }
    Err(Error::Sampling { attempts: max_attempts, acceptance_rate: 0.0 })
}

/// Assigns a target (and VoiceMask parameters if applicable) to every utterance.
pub fn assign_targets(
    strategy: Strategy,
    utterances: &[UtteranceKey],
    pool: &TargetPool,
    converter: ConverterKind,
    master_seed: u64,
) -> Result<AssignmentTable> {
    pool.validate()?;
    if utterances.is_empty() {
        return Err(Error::Parameter("no utterances to assign".to_string()));
    }
    let mut keys = utterances.to_vec();
    keys.sort();
    if let Some(w) = keys.windows(2).find(|w| w[0].utterance_id == w[1].utterance_id) {
        return Err(Error::Parameter(format!("utterance {} listed twice", w[0].utterance_id)));
    }
    // one draw per distinct key, shared by the rows it covers
    let mut draws: BTreeMap<&str, (String, Option<WarpParams>)> = BTreeMap::new();
    let mut rows = Vec::with_capacity(keys.len());
    for k in &keys {
        let key = strategy.key(&k.speaker_id, &k.utterance_id);
        if !draws.contains_key(key) {
            let mut rng = keyed_rng(master_seed, strategy.name(), key);
            let target = pool.draw(&mut rng).to_string();
            let warp = match converter {
                ConverterKind::VoiceMask => {
                    Some(sample_voicemask(&mut rng, VOICEMASK_DISTORTION_RANGE, MAX_SAMPLING_ATTEMPTS)?)
                }
                _ => None,
            };
            draws.insert(key, (target, warp));
        }
        let (target, warp) = draws[key].clone();
        rows.push(Assignment {
            utterance_id: k.utterance_id.clone(),
            speaker_id: k.speaker_id.clone(),
            target,
            warp,
        });
    }
    let table = AssignmentTable { strategy, converter, pool: pool.clone(), master_seed, rows };
    table.validate()?;
    Ok(table)
}

/// Redraws a table with a new seed: same strategy, pool, converter and utterances.
pub fn resample_assignment(table: &AssignmentTable, fresh_seed: u64) -> Result<AssignmentTable> {
    assign_targets(table.strategy, &table.keys(), &table.pool, table.converter, fresh_seed)
}

impl AssignmentTable {
    pub fn keys(&self) -> Vec<UtteranceKey> {
        self.rows.iter().map(|r| UtteranceKey::new(r.utterance_id.clone(), r.speaker_id.clone())).collect()
    }

    pub fn get(&self, utterance_id: &str) -> Option<&Assignment> {
        self.rows
            .binary_search_by(|r| r.utterance_id.as_str().cmp(utterance_id))
            .ok()
            .map(|i| &self.rows[i])
    }

    /// Target and parameters of a speaker under `perm` or `const`.
    pub fn for_speaker(&self, speaker_id: &str) -> Option<&Assignment> {
        match self.strategy {
            Strategy::Const => self.rows.first(),
            Strategy::Perm => self.rows.iter().find(|r| r.speaker_id == speaker_id),
            Strategy::Random => None,
        }
    }

    /// Checks the structure each strategy implies.
    pub fn validate(&self) -> Result<()> {
        self.pool.validate()?;
        let bad = |why: String| Err(Error::Contract(format!("{} table: {why}", self.strategy)));
        if self.rows.is_empty() {
            return bad("no rows".to_string());
        }
        if let Some(w) = self.rows.windows(2).find(|w| w[0].utterance_id >= w[1].utterance_id) {
            return bad(format!("rows not strictly sorted at {}", w[1].utterance_id));
        }
        for r in &self.rows {
            if !self.pool.contains(&r.target) {
                return bad(format!("{} targets {} outside the pool", r.utterance_id, r.target));
            }
            match (self.converter, r.warp) {
                (ConverterKind::VoiceMask, None) => return bad(format!("{} lacks VoiceMask parameters", r.utterance_id)),
                (ConverterKind::VoiceMask, Some(w)) => {
                    let params = VoiceMaskParams { alpha: w.alpha, beta: w.beta, target_speaker_id: r.target.clone() };
                    params.validate()?;
                }
                (_, Some(_)) => return bad(format!("{} carries warp parameters for {}", r.utterance_id, self.converter)),
                (_, None) => {}
            }
        }
        let same = |a: &Assignment, b: &Assignment| a.target == b.target && a.warp == b.warp;
        match self.strategy {
            Strategy::Const => {
                if let Some(r) = self.rows.iter().find(|r| !same(r, &self.rows[0])) {
                    return bad(format!("{} differs from the shared assignment", r.utterance_id));
                }
            }
            Strategy::Perm => {
                let mut by_speaker: BTreeMap<&str, &Assignment> = BTreeMap::new();
                for r in &self.rows {
                    let first = *by_speaker.entry(&r.speaker_id).or_insert(r);
                    if !same(first, r) {
                        return bad(format!("speaker {} has more than one assignment", r.speaker_id));
                    }
                }
            }
            Strategy::Random => {}
        }
        Ok(())
    }

    /// SHA-256 over every field, floats by bit pattern; hex encoded.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        hash_str(&mut h, self.strategy.name());
        hash_str(&mut h, self.converter.name());
        hash_str(&mut h, &self.pool.fingerprint());
        h.update(self.master_seed.to_le_bytes());
        for r in &self.rows {
            hash_str(&mut h, &r.utterance_id);
            hash_str(&mut h, &r.speaker_id);
            hash_str(&mut h, &r.target);
            match r.warp {
                Some(w) => {
                    h.update([1u8]);
                    h.update(w.alpha.to_bits().to_le_bytes());
                    h.update(w.beta.to_bits().to_le_bytes());
                }
                None => h.update([0u8]),
            }
        }
        hex(&h.finalize())
    }
}

fn hash_str(h: &mut Sha256, s: &str) {
    h.update((s.len() as u64).to_le_bytes());
    h.update(s.as_bytes());
}

fn hex(bytes: &[u8]) -> String {
    const DIGITS: &[u8; 16] = b"0123456789abcdef";
    let mut out = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        out.push(DIGITS[(b >> 4) as usize] as char);
        out.push(DIGITS[(b & 15) as usize] as char);
    }
    out
}
