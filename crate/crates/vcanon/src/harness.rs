//! Linkage attacks: convert the public trial set, let an attacker prepare
//! enrollment audio with some knowledge of the conversion, and measure how
//! well a verifier links trials back to speakers.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use vcanon_core::convert::{convert_voicemask, convert_vtln, default_gamma_grid, vtln_match, ClassMapping};
use vcanon_core::dsp::AnalysisConfig;
use vcanon_core::keyed::derive_seed;
use vcanon_core::model::{train_speaker_model, SpeakerModel, TrainingConfig};
use vcanon_core::strategy::{
    assign_targets, AssignmentTable, ConverterKind, Strategy, TargetPool, UtteranceKey,
};
use vcanon_core::verify::{enroll, extract_embedding, run_trials, Embedding, EmbeddingConfig, EvalReport, TrialEmbedding};
use vcanon_core::Utterance;

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::wav::dequantize;

/// Converter settings shared by the anonymizer and attackers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConverterConfig {
    /// Pseudo-phonetic classes per speaker model.
    pub k: usize,
    pub gamma_grid: Vec<f64>,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub voiced_only: bool,
    pub analysis: AnalysisConfig,
}

impl Default for ConverterConfig {
    fn default() -> Self {
        let t = TrainingConfig::default();
        Self {
            k: t.k,
            gamma_grid: default_gamma_grid(),
            max_iterations: t.max_iterations,
            tolerance: t.tolerance,
            voiced_only: t.voiced_only,
            analysis: t.analysis,
        }
    }
}

impl ConverterConfig {
    pub fn training(&self) -> TrainingConfig {
        TrainingConfig {
            k: self.k,
            analysis: self.analysis,
            max_iterations: self.max_iterations,
            tolerance: self.tolerance,
            voiced_only: self.voiced_only,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if self.gamma_grid.is_empty() || self.gamma_grid.iter().any(|g| !(*g > 0.0)) {
            return Err(Error::Config("gamma_grid must be nonempty and positive".into()));
        }
        if self.gamma_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("gamma_grid must be strictly increasing".into()));
        }
        self.analysis.validate()?;
        Ok(())
    }
}

/// Trains one model per speaker on the given utterances, in parallel.
pub fn train_models(utterances: &[Utterance], config: &ConverterConfig) -> Result<BTreeMap<String, SpeakerModel>> {
    let mut by_speaker: BTreeMap<String, Vec<Utterance>> = BTreeMap::new();
    for u in utterances {
        by_speaker.entry(u.speaker_id.clone()).or_default().push(u.clone());
    }
    let training = config.training();
    let models: Vec<SpeakerModel> = by_speaker
        .par_iter()
        .map(|(_, utts)| train_speaker_model(utts, &training).map_err(Error::from))
        .collect::<Result<_>>()?;
    Ok(models.into_iter().map(|m| (m.speaker_id.clone(), m)).collect())
}

/// Converts utterances under an assignment table.
///
/// `source_models` are needed for VTLN only; VTLN class mappings are computed
/// once per (source, target) pair.
pub struct Converter<'a> {
    pub kind: ConverterKind,
    pub config: &'a ConverterConfig,
    pub target_models: &'a BTreeMap<String, SpeakerModel>,
    pub source_models: Option<&'a BTreeMap<String, SpeakerModel>>,
    mappings: Mutex<HashMap<(String, String), ClassMapping>>,
}

impl<'a> Converter<'a> {
    pub fn new(
        kind: ConverterKind,
        config: &'a ConverterConfig,
        target_models: &'a BTreeMap<String, SpeakerModel>,
        source_models: Option<&'a BTreeMap<String, SpeakerModel>>,
    ) -> Self {
        Self { kind, config, target_models, source_models, mappings: Mutex::new(HashMap::new()) }
    }

    fn target(&self, id: &str) -> vcanon_core::Result<&SpeakerModel> {
        self.target_models
            .get(id)
            .ok_or_else(|| vcanon_core::Error::Parameter(format!("no trained model for target {id}")))
    }

    fn mapping(&self, source: &SpeakerModel, target: &SpeakerModel) -> vcanon_core::Result<ClassMapping> {
        let key = (source.speaker_id.clone(), target.speaker_id.clone());
        if let Some(m) = self.mappings.lock().expect("mapping cache poisoned").get(&key) {
            return Ok(m.clone());
        }
        let m = vtln_match(source, target, &self.config.gamma_grid)?;
        self.mappings.lock().expect("mapping cache poisoned").insert(key, m.clone());
        Ok(m)
    }

    fn convert_one(&self, u: &Utterance, table: &AssignmentTable) -> vcanon_core::Result<Utterance> {
        let row = table
            .get(&u.utterance_id)
            .ok_or_else(|| vcanon_core::Error::Parameter("utterance has no assignment".into()))?;
        match self.kind {
            ConverterKind::Identity => Ok(u.clone()),
            ConverterKind::External => {
                Err(vcanon_core::Error::Parameter("external conversions are ingested, not computed".into()))
            }
            ConverterKind::VoiceMask => {
                let params = row
                    .voicemask_params()
                    .ok_or_else(|| vcanon_core::Error::Parameter("row lacks VoiceMask parameters".into()))?;
                convert_voicemask(u, &params, self.target(&row.target)?, &self.config.analysis)
            }
            ConverterKind::Vtln => {
                let source = self
                    .source_models
                    .and_then(|m| m.get(&u.speaker_id))
                    .ok_or_else(|| vcanon_core::Error::Parameter(format!("no source model for {}", u.speaker_id)))?;
                let target = self.target(&row.target)?;
                let mapping = self.mapping(source, target)?;
                convert_vtln(u, source, target, &mapping, &self.config.analysis)
            }
        }
    }

    /// Converts every utterance; output samples are quantized to 16 bits so
    /// in-memory results equal what a WAV round trip yields.
    pub fn convert_all(&self, utterances: &[Utterance], table: &AssignmentTable) -> Result<Vec<Utterance>> {
        utterances
            .par_iter()
            .map(|u| {
                let out = self
                    .convert_one(u, table)
                    .map_err(|source| Error::Conversion { utterance_id: u.utterance_id.clone(), source })?;
                Ok(out.with_samples(out.samples.iter().map(|s| dequantize(*s)).collect()))
            })
            .collect()
    }
}

fn keys(utterances: &[Utterance]) -> Vec<UtteranceKey> {
    utterances.iter().map(|u| UtteranceKey::new(u.utterance_id.clone(), u.speaker_id.clone())).collect()
}

/// The anonymized trial set and, when known, the secret used to produce it.
#[derive(Debug, Clone)]
pub struct ConvertedTrials {
    pub strategy: Strategy,
    pub master_seed: u64,
    /// Absent for ingested external conversions and when the table is withheld.
    pub table: Option<AssignmentTable>,
    pub utterances: Vec<Utterance>,
    /// VTLN source models, trained on each speaker's own trial audio.
    pub source_models: Option<BTreeMap<String, SpeakerModel>>,
}

/// What the anonymizer does: assign targets to the trial utterances and convert them.
pub fn anonymize(
    kind: ConverterKind,
    strategy: Strategy,
    trial: &[Utterance],
    pool: &TargetPool,
    target_models: &BTreeMap<String, SpeakerModel>,
    config: &ConverterConfig,
    master_seed: u64,
) -> Result<ConvertedTrials> {
    if !kind.supports(strategy) {
        return Err(Error::Config(format!(
            "{kind} is only evaluated under the random strategy, not {strategy}"
        )));
    }
    if kind == ConverterKind::External {
        return Err(Error::Config("external conversions are ingested, not computed".into()));
    }
    let table = assign_targets(strategy, &keys(trial), pool, kind, master_seed)?;
    let source_models = match kind {
        ConverterKind::Vtln => Some(train_models(trial, config)?),
        _ => None,
    };
    let utterances = Converter::new(kind, config, target_models, source_models.as_ref()).convert_all(trial, &table)?;
    Ok(ConvertedTrials { strategy, master_seed, table: Some(table), utterances, source_models })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum AttackerKind {
    /// Unaware of any conversion: enrolls on the raw found speech.
    Ignorant,
    /// Knows converter, strategy, pool and k, but not the targets drawn.
    SemiInformed { attacker_seed: u64 },
    /// Holds the exact assignment table and converter models.
    Informed,
}

impl AttackerKind {
    pub fn name(&self) -> &'static str {
        match self {
            AttackerKind::Ignorant => "ignorant",
            AttackerKind::SemiInformed { .. } => "semi_informed",
            AttackerKind::Informed => "informed",
        }
    }

    /// The three attackers, with the semi-informed seed derived from `master_seed`.
    pub fn all(master_seed: u64) -> [AttackerKind; 3] {
        [AttackerKind::Informed, AttackerKind::SemiInformed { attacker_seed: derive_seed(master_seed, "semi_informed") }, AttackerKind::Ignorant]
    }
}

impl fmt::Display for AttackerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Enrollment audio as the attacker prepares it, plus the table it converted with (if any).
pub struct AttackerEnrollment {
    pub utterances: Vec<Utterance>,
    pub table: Option<AssignmentTable>,
}

/// Prepares the attacker's enrollment set.
///
/// * ignorant: the input, untouched;
/// * semi-informed: the trial strategy re-drawn on the enrollment utterances
///   with `attacker_seed`, converted with source models the attacker trains on
///   the enrollment audio;
/// * informed: under `const`/`perm` each speaker's true assignment replayed on
///   the enrollment utterances with the true source models; under `random`,
///   where enrollment utterances have no true targets, fresh draws from the
///   true pool with the true seed and models.
pub fn prepare_attacker_enrollment(
    attacker: AttackerKind,
    enrollment: &[Utterance],
    trials: Option<&ConvertedTrials>,
    kind: ConverterKind,
    config: &ConverterConfig,
    pool: &TargetPool,
    target_models: &BTreeMap<String, SpeakerModel>,
) -> Result<AttackerEnrollment> {
    if attacker == AttackerKind::Ignorant || kind == ConverterKind::Identity {
        return Ok(AttackerEnrollment { utterances: enrollment.to_vec(), table: None });
    }
    if kind == ConverterKind::External {
        return Err(Error::Config(format!("the {attacker} attacker cannot replay an external conversion")));
    }
    let (table, source_models) = match attacker {
        AttackerKind::Ignorant => unreachable!(),
        AttackerKind::SemiInformed { attacker_seed } => {
            let strategy = trials.map(|t| t.strategy).ok_or_else(|| {
                Error::Config("the semi-informed attacker needs to know the strategy".into())
            })?;
            let table = assign_targets(strategy, &keys(enrollment), pool, kind, attacker_seed)?;
            let models = match kind {
                ConverterKind::Vtln => Some(train_models(enrollment, config)?),
                _ => None,
            };
            (table, models)
        }
        AttackerKind::Informed => {
            let missing = || Error::Config("the informed attacker requires the true assignment table".into());
            let trials = trials.ok_or_else(missing)?;
            let truth = trials.table.as_ref().ok_or_else(missing)?;
            let table = match truth.strategy {
                Strategy::Random => assign_targets(Strategy::Random, &keys(enrollment), &truth.pool, kind, truth.master_seed)?,
                Strategy::Const | Strategy::Perm => replay(truth, enrollment)?,
            };
            (table, trials.source_models.clone())
        }
    };
    let converter = Converter::new(kind, config, target_models, source_models.as_ref());
    let utterances = converter.convert_all(enrollment, &table)?;
    Ok(AttackerEnrollment { utterances, table: Some(table) })
}

/// Copies each speaker's `const`/`perm` assignment onto other utterances of that speaker.
fn replay(truth: &AssignmentTable, utterances: &[Utterance]) -> Result<AssignmentTable> {
    let mut rows = Vec::with_capacity(utterances.len());
    for u in utterances {
        let row = truth.for_speaker(&u.speaker_id).ok_or_else(|| {
            Error::Config(format!("the true table has no assignment for speaker {}", u.speaker_id))
        })?;
        rows.push(vcanon_core::strategy::Assignment {
            utterance_id: u.utterance_id.clone(),
            speaker_id: u.speaker_id.clone(),
            ..row.clone()
        });
    }
    rows.sort_by(|a, b| a.utterance_id.cmp(&b.utterance_id));
    let table = AssignmentTable { rows, ..truth.clone() };
    table.validate()?;
    Ok(table)
}

/// Mean embedding per speaker over that speaker's enrollment utterances.
pub fn enroll_speakers(enrollment: &[Utterance], config: &EmbeddingConfig) -> Result<Vec<(String, Embedding)>> {
    let embeddings: Vec<(String, vcanon_core::Result<Embedding>)> = enrollment
        .par_iter()
        .map(|u| (u.speaker_id.clone(), extract_embedding(u, config)))
        .collect();
    let mut by_speaker: BTreeMap<String, Vec<vcanon_core::Result<Embedding>>> = BTreeMap::new();
    for (s, e) in embeddings {
        by_speaker.entry(s).or_default().push(e);
    }
    by_speaker
        .into_iter()
        .map(|(s, es)| {
            let e = enroll(&s, &es)?;
            Ok((s, e))
        })
        .collect()
}

pub fn embed_trials(trials: &[Utterance], config: &EmbeddingConfig) -> Result<Vec<TrialEmbedding>> {
    trials
        .par_iter()
        .map(|u| {
            Ok(TrialEmbedding {
                utterance_id: u.utterance_id.clone(),
                speaker_id: u.speaker_id.clone(),
                embedding: extract_embedding(u, config)?,
            })
        })
        .collect()
}

/// Seeds and hashes sufficient to re-run a scenario.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub master_seed: u64,
    pub attacker_seed: Option<u64>,
    pub pool_fingerprint: String,
    pub table_fingerprint: Option<String>,
    pub enrollment_table_fingerprint: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub converter: ConverterKind,
    pub strategy: Strategy,
    pub attacker: AttackerKind,
    pub report: EvalReport,
    pub provenance: Provenance,
}

/// Everything a scenario reads besides the trial conversion.
pub struct Evaluation<'a> {
    pub corpus: &'a Corpus,
    pub pool: &'a TargetPool,
    pub target_models: &'a BTreeMap<String, SpeakerModel>,
    pub converter: &'a ConverterConfig,
    pub embedding: &'a EmbeddingConfig,
}

/// Runs one attacker against an already converted trial set.
pub fn run_scenario(eval: &Evaluation<'_>, kind: ConverterKind, trials: &ConvertedTrials, attacker: AttackerKind) -> Result<ScenarioResult> {
    let prepared = prepare_attacker_enrollment(
        attacker,
        &eval.corpus.enroll,
        Some(trials),
        kind,
        eval.converter,
        eval.pool,
        eval.target_models,
    )?;
    let enrollments = enroll_speakers(&prepared.utterances, eval.embedding)?;
    let trial_embeddings = embed_trials(&trials.utterances, eval.embedding)?;
    let report = run_trials(&enrollments, &trial_embeddings)?;
    Ok(ScenarioResult {
        converter: kind,
        strategy: trials.strategy,
        attacker,
        report,
        provenance: Provenance {
            master_seed: trials.master_seed,
            attacker_seed: match attacker {
                AttackerKind::SemiInformed { attacker_seed } => Some(attacker_seed),
                _ => None,
            },
            pool_fingerprint: eval.pool.fingerprint(),
            table_fingerprint: trials.table.as_ref().map(|t| t.fingerprint()),
            enrollment_table_fingerprint: prepared.table.map(|t| t.fingerprint()),
        },
    })
}

/// One grid cell; failures are kept as messages so a grid always completes.
#[derive(Debug, Clone, PartialEq)]
pub struct GridCell {
    pub converter: ConverterKind,
    pub strategy: Strategy,
    pub attacker: AttackerKind,
    pub outcome: std::result::Result<ScenarioResult, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub cells: Vec<GridCell>,
}

/// Runs every supported (converter, strategy) column against every attacker.
/// VoiceMask columns exist only for `random`.
pub fn run_grid(
    eval: &Evaluation<'_>,
    converters: &[ConverterKind],
    strategies: &[Strategy],
    attackers: &[AttackerKind],
    master_seed: u64,
) -> Grid {
    let mut cells = Vec::new();
    for &kind in converters {
        for &strategy in strategies {
            if !kind.supports(strategy) {
                continue;
            }
            let trials = anonymize(kind, strategy, &eval.corpus.trial, eval.pool, eval.target_models, eval.converter, master_seed);
            for &attacker in attackers {
                let outcome = match &trials {
                    Ok(t) => run_scenario(eval, kind, t, attacker).map_err(|e| e.to_string()),
                    Err(e) => Err(e.to_string()),
                };
                if let Err(e) = &outcome {
                    log::warn!("{kind}/{strategy}/{attacker}: {e}");
                }
                cells.push(GridCell { converter: kind, strategy, attacker, outcome });
            }
        }
    }
    Grid { cells }
}

impl Grid {
    pub fn all_failed(&self) -> bool {
        !self.cells.is_empty() && self.cells.iter().all(|c| c.outcome.is_err())
    }

    fn columns(&self) -> Vec<(ConverterKind, Strategy)> {
        let mut cols: Vec<(ConverterKind, Strategy)> = Vec::new();
        for c in &self.cells {
            if !cols.contains(&(c.converter, c.strategy)) {
                cols.push((c.converter, c.strategy));
            }
        }
        cols
    }

    fn rows(&self) -> Vec<AttackerKind> {
        let mut rows: Vec<AttackerKind> = Vec::new();
        for c in &self.cells {
            if !rows.contains(&c.attacker) {
                rows.push(c.attacker);
            }
        }
        rows
    }

    pub fn cell(&self, converter: ConverterKind, strategy: Strategy, attacker: AttackerKind) -> Option<&GridCell> {
        self.cells
            .iter()
            .find(|c| c.converter == converter && c.strategy == strategy && c.attacker == attacker)
    }

    /// EER (%) table: attackers down, converter/strategy across. Failed cells show `error`.
    pub fn to_text_table(&self) -> String {
        let cols = self.columns();
        let headers: Vec<String> = cols.iter().map(|(k, s)| format!("{k}/{s}")).collect();
        let rows = self.rows();
        let label_width = rows.iter().map(|r| r.name().len()).max().unwrap_or(0).max("attacker".len());
        let widths: Vec<usize> = headers.iter().map(|h| h.len().max(7)).collect();
        let mut out = format!("{:<label_width$}", "attacker");
        for (h, w) in headers.iter().zip(&widths) {
            out.push_str(&format!("  {h:>w$}"));
        }
        out.push('\n');
        for r in rows {
            out.push_str(&format!("{:<label_width$}", r.name()));
            for ((k, s), w) in cols.iter().zip(&widths) {
                let text = match self.cell(*k, *s, r).map(|c| &c.outcome) {
                    Some(Ok(res)) => format!("{:.2}", 100.0 * res.report.eer),
                    Some(Err(_)) => "error".to_string(),
                    None => "-".to_string(),
                };
                out.push_str(&format!("  {text:>w$}"));
            }
            out.push('\n');
        }
        out
    }

    /// `converter,strategy,attacker,eer,threshold,genuine,impostor,error` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("converter,strategy,attacker,eer,threshold,genuine,impostor,error\n");
        for c in &self.cells {
            match &c.outcome {
                Ok(r) => out.push_str(&format!(
                    "{},{},{},{},{},{},{},\n",
                    c.converter,
                    c.strategy,
                    c.attacker,
                    r.report.eer,
                    r.report.threshold,
                    r.report.genuine_scores.len(),
                    r.report.impostor_scores.len()
                )),
                Err(e) => out.push_str(&format!(
                    "{},{},{},,,,,\"{}\"\n",
                    c.converter,
                    c.strategy,
                    c.attacker,
                    e.replace('"', "\"\"")
                )),
            }
        }
        out
    }
}
