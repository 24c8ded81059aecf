//! The pipeline steps behind each subcommand. Every step reads its inputs
//! from the run's output directory (see [`Layout`]) and writes its outputs
//! there, so steps can be run one at a time.

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use vcanon_core::model::SpeakerModel;
use vcanon_core::strategy::{AssignmentTable, ConverterKind, TargetPool};
use vcanon_core::Utterance;

use crate::config::{Layout, RunConfig};
use crate::corpus::{generate_from_config, ingest_external_conversion, write_corpus, Corpus};
use crate::error::{Error, Result};
use crate::harness::{anonymize, run_scenario, train_models, ConvertedTrials, Evaluation, Grid, GridCell};
use crate::manifest::{Manifest, ManifestEntry, Split};
use crate::records;
use crate::report::{render_reports, write_results};
use crate::wav::write_wav;

/// Synthesizes the configured corpus into `<out>/corpus`. Returns the manifest path.
pub fn generate(config: &RunConfig) -> Result<PathBuf> {
    config.validate()?;
    let synthetic = config
        .corpus
        .synthetic
        .as_ref()
        .ok_or_else(|| Error::Config("generate needs a [corpus.synthetic] section".into()))?;
    // every input here comes from the config, so core parameter errors are config errors
    let corpus = generate_from_config(synthetic).map_err(|e| match e {
        Error::Core(c) => Error::Config(format!("[corpus.synthetic]: {c}")),
        other => other,
    })?;
    let (_, path) = write_corpus(&corpus, &config.layout()?.corpus_dir())?;
    Ok(path)
}

fn corpus_manifest(config: &RunConfig, layout: &Layout) -> Result<PathBuf> {
    match &config.corpus.manifest {
        Some(m) => Ok(m.clone()),
        None => {
            let path = layout.corpus_manifest();
            if !path.is_file() {
                return Err(Error::Config(format!("{} not found; run `generate` first", path.display())));
            }
            Ok(path)
        }
    }
}

pub fn load_corpus(config: &RunConfig) -> Result<Corpus> {
    let path = corpus_manifest(config, &config.layout()?)?;
    Corpus::from_manifest(&Manifest::load(&path)?)
}

fn pool_path(layout: &Layout) -> PathBuf {
    layout.target_models().with_file_name("target_pool.json")
}

fn create_parent(path: &std::path::Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    Ok(())
}

/// Draws the target pool from the target-pool split and trains one model per pool speaker.
pub fn train_target_models(config: &RunConfig) -> Result<(TargetPool, BTreeMap<String, SpeakerModel>)> {
    config.validate()?;
    let layout = config.layout()?;
    let corpus = load_corpus(config)?;
    let candidates = Corpus::speakers(&corpus.target_pool);
    if candidates.len() < config.pool_size {
        return Err(Error::Config(format!(
            "pool_size {} exceeds the {} speakers in the target-pool split",
            config.pool_size,
            candidates.len()
        )));
    }
    let pool = TargetPool::select(&candidates, config.pool_size, config.pool_seed()?)?;
    let audio: Vec<Utterance> =
        corpus.target_pool.into_iter().filter(|u| pool.contains(&u.speaker_id)).collect();
    let models = train_models(&audio, &config.conversion)?;
    let path = layout.target_models();
    create_parent(&path)?;
    records::persist(&models.values().cloned().collect::<Vec<_>>(), &path)?;
    records::persist(&pool, &pool_path(&layout))?;
    Ok((pool, models))
}

pub fn load_target_models(config: &RunConfig) -> Result<(TargetPool, BTreeMap<String, SpeakerModel>)> {
    let layout = config.layout()?;
    let path = layout.target_models();
    if !path.is_file() {
        return Err(Error::Config(format!("{} not found; run `train-models` first", path.display())));
    }
    let models: Vec<SpeakerModel> = records::load(&path)?;
    let pool: TargetPool = records::load(&pool_path(&layout))?;
    let models: BTreeMap<String, SpeakerModel> = models.into_iter().map(|m| (m.speaker_id.clone(), m)).collect();
    if let Some(missing) = pool.speakers.iter().find(|s| !models.contains_key(*s)) {
        return Err(Error::Config(format!("no trained model for pool speaker {missing}")));
    }
    Ok((pool, models))
}

/// Converts the trial split into `<out>/anonymized` and stores the assignment table.
pub fn anonymize_trials(config: &RunConfig) -> Result<ConvertedTrials> {
    config.validate()?;
    if config.converter == ConverterKind::External {
        return Err(Error::Config("external conversions are produced outside this tool; use `attack`".into()));
    }
    let layout = config.layout()?;
    let corpus = load_corpus(config)?;
    let (pool, models) = load_target_models(config)?;
    let converted = anonymize(
        config.converter,
        config.strategy,
        &corpus.trial,
        &pool,
        &models,
        &config.conversion,
        config.master_seed()?,
    )?;
    let dir = layout.anonymized_dir();
    let audio = dir.join("audio");
    fs::create_dir_all(&audio).map_err(|e| Error::io(&audio, e))?;
    let mut entries = Vec::with_capacity(converted.utterances.len());
    for u in &converted.utterances {
        let rel = PathBuf::from("audio").join(format!("{}.wav", u.utterance_id));
        write_wav(u, &dir.join(&rel))?;
        entries.push(ManifestEntry {
            utterance_id: u.utterance_id.clone(),
            speaker_id: u.speaker_id.clone(),
            path: rel,
            split: Split::Trial,
        });
    }
    Manifest::new(entries, &dir).save(&layout.anonymized_manifest())?;
    if let Some(table) = &converted.table {
        records::persist(table, &layout.assignment_table())?;
    }
    match &converted.source_models {
        Some(m) => records::persist(&m.values().cloned().collect::<Vec<_>>(), &layout.source_models())?,
        None => {
            let stale = layout.source_models();
            if stale.exists() {
                fs::remove_file(&stale).map_err(|e| Error::io(&stale, e))?;
            }
        }
    }
    Ok(converted)
}

/// Reads back what `anonymize` wrote, or ingests the external conversion.
fn load_converted(config: &RunConfig, trial: &[Utterance]) -> Result<ConvertedTrials> {
    let layout = config.layout()?;
    let master_seed = config.master_seed()?;
    if config.converter == ConverterKind::External {
        let path = config.external.as_ref().ok_or_else(|| Error::Config("no external manifest".into()))?;
        let utterances = ingest_external_conversion(&Manifest::load(path)?, trial)?;
        return Ok(ConvertedTrials { strategy: config.strategy, master_seed, table: None, utterances, source_models: None });
    }
    let manifest_path = layout.anonymized_manifest();
    if !manifest_path.is_file() {
        return Err(Error::Config(format!("{} not found; run `anonymize` first", manifest_path.display())));
    }
    let utterances = Manifest::load(&manifest_path)?.read_split(Split::Trial)?;
    let table_path = config.table.clone().unwrap_or_else(|| layout.assignment_table());
    let table: Option<AssignmentTable> = if table_path.is_file() { Some(records::load(&table_path)?) } else { None };
    if let Some(t) = &table {
        if t.converter != config.converter || t.strategy != config.strategy || t.master_seed != master_seed {
            return Err(Error::Config(format!(
                "{} was made with {}/{} and seed {}, but the config asks for {}/{} and seed {}",
                table_path.display(),
                t.converter,
                t.strategy,
                t.master_seed,
                config.converter,
                config.strategy,
                master_seed
            )));
        }
    }
    let source_models = if layout.source_models().is_file() {
        let models: Vec<SpeakerModel> = records::load(&layout.source_models())?;
        Some(models.into_iter().map(|m| (m.speaker_id.clone(), m)).collect())
    } else {
        None
    };
    Ok(ConvertedTrials { strategy: config.strategy, master_seed, table, utterances, source_models })
}

/// Runs every configured attacker against the anonymized trials and writes
/// the results under `<out>/results`.
pub fn attack(config: &RunConfig) -> Result<Grid> {
    config.validate()?;
    let attackers = config.attacker_kinds()?;
    let informed = attackers.contains(&crate::harness::AttackerKind::Informed);
    let corpus = load_corpus(config)?;
    let trials = load_converted(config, &corpus.trial)?;
    if informed && trials.table.is_none() {
        let path = config.table.clone().unwrap_or_else(|| config.layout().map(|l| l.assignment_table()).unwrap_or_default());
        return Err(Error::Config(format!(
            "the informed attacker needs the assignment table, but {} does not exist",
            path.display()
        )));
    }
    let needs_models = attackers.iter().any(|a| *a != crate::harness::AttackerKind::Ignorant);
    let (pool, models) = if needs_models {
        load_target_models(config)?
    } else {
        match load_target_models(config) {
            Ok(loaded) => loaded,
            // the ignorant attacker touches neither; a placeholder pool keeps provenance well-formed
            Err(_) => (TargetPool::new(vec!["none".into()], 0)?, BTreeMap::new()),
        }
    };
    let eval = Evaluation {
        corpus: &corpus,
        pool: &pool,
        target_models: &models,
        converter: &config.conversion,
        embedding: &config.embedding,
    };
    let cells = attackers
        .iter()
        .map(|&attacker| {
            let outcome = run_scenario(&eval, config.converter, &trials, attacker).map_err(|e| e.to_string());
            if let Err(e) = &outcome {
                log::warn!("{attacker}: {e}");
            }
            GridCell { converter: config.converter, strategy: config.strategy, attacker, outcome }
        })
        .collect();
    let grid = Grid { cells };
    write_results(&grid, &config.layout()?.results_dir())?;
    if grid.all_failed() {
        return Err(Error::Evaluation("every attack scenario failed; see results.csv".into()));
    }
    Ok(grid)
}

/// Renders histograms and the summary for a results directory.
pub fn report(results_dir: &std::path::Path) -> Result<String> {
    if !results_dir.is_dir() {
        return Err(Error::Config(format!("results directory {} does not exist", results_dir.display())));
    }
    render_reports(results_dir)
}
