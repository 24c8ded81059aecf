//! Run configuration: one TOML file drives every subcommand.
//!
//! ```toml
//! master_seed = 7
//! out_dir = "runs/demo"
//! converter = "vtln"
//! strategy = "perm"
//! attackers = ["informed", "semi_informed", "ignorant"]
//!
//! [corpus.synthetic]
//! speakers = 20
//!
//! [conversion]
//! k = 8
//! ```
//!
//! Relative paths resolve against the directory holding the config file.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vcanon_core::keyed::derive_seed;
use vcanon_core::strategy::{ConverterKind, Strategy, DEFAULT_POOL_SIZE};
use vcanon_core::verify::EmbeddingConfig;

use crate::corpus::SyntheticCorpusConfig;
use crate::error::{Error, Result};
use crate::harness::{AttackerKind, ConverterConfig};

/// Where the audio comes from: an existing manifest or the synthetic generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusSource {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticCorpusConfig>,
}

impl Default for CorpusSource {
    fn default() -> Self {
        Self { manifest: None, synthetic: Some(SyntheticCorpusConfig::default()) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackerName {
    Informed,
    SemiInformed,
    Ignorant,
}

impl AttackerName {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "informed" => Ok(Self::Informed),
            "semi_informed" => Ok(Self::SemiInformed),
            "ignorant" => Ok(Self::Ignorant),
            other => Err(Error::Config(format!(
                "unknown attacker {other:?} (expected informed, semi_informed or ignorant)"
            ))),
        }
    }
}

fn default_converter() -> ConverterKind {
    ConverterKind::Vtln
}

fn default_strategy() -> Strategy {
    Strategy::Perm
}

fn default_pool_size() -> usize {
    DEFAULT_POOL_SIZE
}

fn default_attackers() -> Vec<AttackerName> {
    vec![AttackerName::Informed, AttackerName::SemiInformed, AttackerName::Ignorant]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Required, from the file or `--seed`; nothing is seeded from entropy.
    pub master_seed: Option<u64>,
    /// Required, from the file or `--out`.
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub corpus: CorpusSource,
    #[serde(default = "default_converter")]
    pub converter: ConverterKind,
    #[serde(default = "default_strategy")]
    pub strategy: Strategy,
    #[serde(default = "default_pool_size")]
    pub pool_size: usize,
    #[serde(default = "default_attackers")]
    pub attackers: Vec<AttackerName>,
    /// Semi-informed attacker's seed; derived from `master_seed` when absent.
    pub attacker_seed: Option<u64>,
    /// Assignment table handed to the informed attacker. Defaults to the one
    /// `anonymize` writes.
    pub table: Option<PathBuf>,
    /// Manifest of externally converted trial audio (`converter = "external"`).
    pub external: Option<PathBuf>,
    #[serde(default)]
    pub conversion: ConverterConfig,
    #[serde(default)]
    pub embedding: EmbeddingConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            master_seed: None,
            out_dir: None,
            corpus: CorpusSource::default(),
            converter: default_converter(),
            strategy: default_strategy(),
            pool_size: default_pool_size(),
            attackers: default_attackers(),
            attacker_seed: None,
            table: None,
            external: None,
            conversion: ConverterConfig::default(),
            embedding: EmbeddingConfig::default(),
        }
    }
}

/// Command-line values that replace config scalars.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_toml(text: &str, origin: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("{}: {e}", origin.display())))
    }

    /// Reads a config file and makes its relative paths absolute against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Self::from_toml(&text, path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut config.out_dir, &mut config.corpus.manifest, &mut config.table, &mut config.external]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(config)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn apply(&mut self, overrides: &Overrides) {
        if let Some(seed) = overrides.seed {
            self.master_seed = Some(seed);
        }
        if let Some(out) = &overrides.out {
            self.out_dir = Some(out.clone());
        }
    }

    pub fn master_seed(&self) -> Result<u64> {
        self.master_seed
            .ok_or_else(|| Error::Config("master_seed is required (set it in the config or pass --seed)".into()))
    }

    pub fn layout(&self) -> Result<Layout> {
        let root = self
            .out_dir
            .clone()
            .ok_or_else(|| Error::Config("out_dir is required (set it in the config or pass --out)".into()))?;
        Ok(Layout { root })
    }

    /// Seed of the pool draw.
    pub fn pool_seed(&self) -> Result<u64> {
        Ok(derive_seed(self.master_seed()?, "pool"))
    }

    pub fn attacker_kinds(&self) -> Result<Vec<AttackerKind>> {
        let seed = self.master_seed()?;
        let semi = self.attacker_seed.unwrap_or_else(|| derive_seed(seed, "semi_informed"));
        Ok(self
            .attackers
            .iter()
            .map(|a| match a {
                AttackerName::Informed => AttackerKind::Informed,
                AttackerName::SemiInformed => AttackerKind::SemiInformed { attacker_seed: semi },
                AttackerName::Ignorant => AttackerKind::Ignorant,
            })
            .collect())
    }

    /// Checks everything that does not depend on which subcommand runs.
    pub fn validate(&self) -> Result<()> {
        self.master_seed()?;
        self.layout()?;
        match (&self.corpus.manifest, &self.corpus.synthetic) {
            (Some(_), Some(_)) => {
                return Err(Error::Config("corpus: give either manifest or synthetic, not both".into()))
            }
            (None, None) => return Err(Error::Config("corpus: give a manifest or a synthetic spec".into())),
            (Some(m), None) if !m.is_file() => {
                return Err(Error::Config(format!("corpus manifest {} does not exist", m.display())))
            }
            _ => {}
        }
        if let Some(s) = &self.corpus.synthetic {
            if s.speakers == 0 || s.utterances_per_speaker < 2 {
                return Err(Error::Config("synthetic corpus needs speakers and at least 2 utterances each".into()));
            }
            if !(s.duration_secs > 0.0) || !(8_000..=48_000).contains(&s.sample_rate) {
                return Err(Error::Config("synthetic corpus: duration must be positive, rate 8-48 kHz".into()));
            }
        }
        if self.pool_size == 0 {
            return Err(Error::Config("pool_size must be at least 1".into()));
        }
        if self.attackers.is_empty() {
            return Err(Error::Config("at least one attacker is required".into()));
        }
        if self.attackers.iter().collect::<BTreeSet<_>>().len() != self.attackers.len() {
            return Err(Error::Config("attackers are listed more than once".into()));
        }
        if !self.converter.supports(self.strategy) {
            return Err(Error::Config(format!(
                "{} is only evaluated with the random strategy; {} is not supported",
                self.converter, self.strategy
            )));
        }
        if self.converter == ConverterKind::External {
            if self.attackers.iter().any(|a| *a != AttackerName::Ignorant) {
                return Err(Error::Config(
                    "external conversions can only be attacked by the ignorant attacker".into(),
                ));
            }
            match &self.external {
                None => return Err(Error::Config("converter external needs an `external` manifest".into())),
                Some(p) if !p.is_file() => {
                    return Err(Error::Config(format!("external manifest {} does not exist", p.display())))
                }
                _ => {}
            }
        }
        self.conversion.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.embedding.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }
}

/// File locations under the output directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn corpus_dir(&self) -> PathBuf {
        self.root.join("corpus")
    }

    pub fn corpus_manifest(&self) -> PathBuf {
        self.corpus_dir().join("manifest.csv")
    }

    pub fn target_models(&self) -> PathBuf {
        self.root.join("models").join("target_models.json")
    }

    pub fn anonymized_dir(&self) -> PathBuf {
        self.root.join("anonymized")
    }

    pub fn anonymized_manifest(&self) -> PathBuf {
        self.anonymized_dir().join("manifest.csv")
    }

    pub fn assignment_table(&self) -> PathBuf {
        self.anonymized_dir().join("assignment.json")
    }

    pub fn source_models(&self) -> PathBuf {
        self.anonymized_dir().join("source_models.json")
    }

    pub fn results_dir(&self) -> PathBuf {
        self.root.join("results")
    }
}
