//! Dataset manifests: `utterance_id,speaker_id,path,split` CSV with a header row.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use vcanon_core::strategy::UtteranceKey;
use vcanon_core::Utterance;

use crate::error::{Error, Result};
use crate::wav::read_wav;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Split {
    Train,
    Enroll,
    Trial,
    TargetPool,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Enroll => "enroll",
            Split::Trial => "trial",
            Split::TargetPool => "target-pool",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        [Split::Train, Split::Enroll, Split::Trial, Split::TargetPool]
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| format!("unknown split {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub utterance_id: String,
    pub speaker_id: String,
    /// Relative paths resolve against the manifest's directory.
    pub path: PathBuf,
    pub split: Split,
}

impl ManifestEntry {
    pub fn key(&self) -> UtteranceKey {
        UtteranceKey::new(self.utterance_id.clone(), self.speaker_id.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
    /// Directory relative entry paths are resolved against.
    pub root: PathBuf,
}

impl Manifest {
    pub fn new(entries: Vec<ManifestEntry>, root: impl Into<PathBuf>) -> Self {
        Self { entries, root: root.into() }
    }

    pub fn split(&self, split: Split) -> Vec<&ManifestEntry> {
        self.entries.iter().filter(|e| e.split == split).collect()
    }

    pub fn resolve(&self, entry: &ManifestEntry) -> PathBuf {
        if entry.path.is_absolute() {
            entry.path.clone()
        } else {
            self.root.join(&entry.path)
        }
    }

    /// Structural checks: unique ids, and enroll/trial sharing speakers but not utterances.
    pub fn validate(&self, origin: &Path) -> Result<()> {
        let bad = |reason: String| Err(Error::Manifest { path: origin.to_path_buf(), reason });
        let mut ids = BTreeSet::new();
        for e in &self.entries {
            if !ids.insert(e.utterance_id.as_str()) {
                return bad(format!("utterance {} listed twice", e.utterance_id));
            }
        }
        let speakers = |s: Split| self.split(s).into_iter().map(|e| e.speaker_id.as_str()).collect::<BTreeSet<_>>();
        let (enroll, trial) = (speakers(Split::Enroll), speakers(Split::Trial));
        if !enroll.is_empty() && !trial.is_empty() {
            if let Some(s) = trial.difference(&enroll).next() {
                return bad(format!("trial speaker {s} has no enrollment utterances"));
            }
        }
        Ok(())
    }

    /// Checks that every referenced audio file exists.
    pub fn check_files(&self, origin: &Path) -> Result<()> {
        for e in &self.entries {
            let p = self.resolve(e);
            if !p.is_file() {
                return Err(Error::Manifest {
                    path: origin.to_path_buf(),
                    reason: format!("{}: audio file {} does not exist", e.utterance_id, p.display()),
                });
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
        let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
        if headers.iter().collect::<Vec<_>>() != ["utterance_id", "speaker_id", "path", "split"] {
            return Err(Error::Manifest {
                path: path.to_path_buf(),
                reason: format!("header must be utterance_id,speaker_id,path,split, got {}", headers.iter().collect::<Vec<_>>().join(",")),
            });
        }
        let mut entries = Vec::new();
        for record in reader.records() {
            let r = record.map_err(|e| csv_error(path, e))?;
            let split = r[3].parse().map_err(|reason| Error::Manifest { path: path.to_path_buf(), reason })?;
            entries.push(ManifestEntry {
                utterance_id: r[0].to_string(),
                speaker_id: r[1].to_string(),
                path: PathBuf::from(&r[2]),
                split,
            });
        }
        let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let manifest = Self { entries, root };
        manifest.validate(path)?;
        manifest.check_files(path)?;
        Ok(manifest)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut writer = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        writer
            .write_record(["utterance_id", "speaker_id", "path", "split"])
            .map_err(|e| csv_error(path, e))?;
        for e in &self.entries {
            let p = e.path.to_string_lossy();
            writer
                .write_record([e.utterance_id.as_str(), e.speaker_id.as_str(), &p, e.split.name()])
                .map_err(|e| csv_error(path, e))?;
        }
        writer.flush().map_err(|e| Error::io(path, e))
    }

    /// Reads every audio file of a split, in manifest order.
    pub fn read_split(&self, split: Split) -> Result<Vec<Utterance>> {
        self.split(split)
            .into_iter()
            .map(|e| read_wav(&self.resolve(e), &e.utterance_id, &e.speaker_id))
            .collect()
    }

    /// Speakers of a split with their utterance ids, sorted.
    pub fn speakers(&self, split: Split) -> BTreeMap<String, Vec<String>> {
        let mut out: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for e in self.split(split) {
            out.entry(e.speaker_id.clone()).or_default().push(e.utterance_id.clone());
        }
        out
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::Manifest { path: path.to_path_buf(), reason: e.to_string() }
}
