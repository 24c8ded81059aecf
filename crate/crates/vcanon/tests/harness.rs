use std::collections::BTreeMap;

use vcanon::corpus::{generate_from_config, Corpus, SyntheticCorpusConfig};
use vcanon::harness::{anonymize, run_grid, run_scenario, train_models, AttackerKind, ConverterConfig, Evaluation};
use vcanon_core::model::SpeakerModel;
use vcanon_core::strategy::{ConverterKind, Strategy, TargetPool};
use vcanon_core::verify::EmbeddingConfig;

struct Fixture {
    corpus: Corpus,
    pool: TargetPool,
    models: BTreeMap<String, SpeakerModel>,
    converter: ConverterConfig,
    embedding: EmbeddingConfig,
}

impl Fixture {
    fn new() -> Self {
        let corpus = generate_from_config(&SyntheticCorpusConfig {
            speakers: 4,
            utterances_per_speaker: 4,
            pool_speakers: 4,
            utterances_per_pool_speaker: 2,
            duration_secs: 1.0,
            ..SyntheticCorpusConfig::default()
        })
        .unwrap();
        let converter = ConverterConfig { k: 4, ..ConverterConfig::default() };
        let pool = TargetPool::select(&Corpus::speakers(&corpus.target_pool), 4, 3).unwrap();
        let models = train_models(&corpus.target_pool, &converter).unwrap();
        Self { corpus, pool, models, converter, embedding: EmbeddingConfig::default() }
    }

    fn eval(&self) -> Evaluation<'_> {
        Evaluation {
            corpus: &self.corpus,
            pool: &self.pool,
            target_models: &self.models,
            converter: &self.converter,
            embedding: &self.embedding,
        }
    }
}

#[test]
fn identity_conversion_leaves_every_attacker_at_baseline() {
    let f = Fixture::new();
    let eval = f.eval();
    let trials = anonymize(ConverterKind::Identity, Strategy::Perm, &f.corpus.trial, &f.pool, &f.models, &f.converter, 5).unwrap();
    assert_eq!(trials.utterances, f.corpus.trial);
    let baseline = run_scenario(&eval, ConverterKind::Identity, &trials, AttackerKind::Ignorant).unwrap();
    for attacker in AttackerKind::all(5) {
        let r = run_scenario(&eval, ConverterKind::Identity, &trials, attacker).unwrap();
        assert_eq!(r.report.genuine_scores, baseline.report.genuine_scores, "{attacker}");
        assert_eq!(r.report.eer, baseline.report.eer, "{attacker}");
    }
    assert_eq!(baseline.report.genuine_scores.len(), f.corpus.trial.len());
    assert_eq!(baseline.report.impostor_scores.len(), 3 * f.corpus.trial.len());
}

#[test]
fn vtln_grid_is_deterministic() {
    let f = Fixture::new();
    let eval = f.eval();
    let attackers = AttackerKind::all(11);
    let a = run_grid(&eval, &[ConverterKind::Vtln], &[Strategy::Perm], &attackers, 11);
    let b = run_grid(&eval, &[ConverterKind::Vtln], &[Strategy::Perm], &attackers, 11);
    assert_eq!(a, b);
    assert_eq!(a.cells.len(), 3);
    assert!(a.cells.iter().all(|c| c.outcome.is_ok()), "{}", a.to_csv());
    assert_eq!(a.to_text_table().lines().count(), 4);
}

#[test]
fn voicemask_runs_only_under_random() {
    let f = Fixture::new();
    let err = anonymize(ConverterKind::VoiceMask, Strategy::Const, &f.corpus.trial, &f.pool, &f.models, &f.converter, 1)
        .unwrap_err();
    assert_eq!(err.exit_code(), 2);
    let grid = run_grid(&f.eval(), &[ConverterKind::VoiceMask], &Strategy::ALL, &[AttackerKind::Ignorant], 1);
    assert_eq!(grid.cells.len(), 1);
    assert_eq!(grid.cells[0].strategy, Strategy::Random);
    assert!(grid.cells[0].outcome.is_ok());
}

#[test]
fn provenance_records_seeds_and_tables() {
    let f = Fixture::new();
    let trials = anonymize(ConverterKind::Vtln, Strategy::Const, &f.corpus.trial, &f.pool, &f.models, &f.converter, 21).unwrap();
    let table = trials.table.as_ref().unwrap();
    let semi = AttackerKind::SemiInformed { attacker_seed: 99 };
    let r = run_scenario(&f.eval(), ConverterKind::Vtln, &trials, semi).unwrap();
    assert_eq!(r.provenance.master_seed, 21);
    assert_eq!(r.provenance.attacker_seed, Some(99));
    assert_eq!(r.provenance.table_fingerprint, Some(table.fingerprint()));
    assert!(r.provenance.enrollment_table_fingerprint.is_some());
    assert_eq!(r.provenance.pool_fingerprint, f.pool.fingerprint());
}
