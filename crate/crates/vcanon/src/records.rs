//! Versioned JSON records for models, assignment tables and reports.
//!
//! Each file is `{"schema": <kind>, "schema_version": <n>, "value": ...}`.
//! Floats are written in shortest round-trip form and parsed exactly, so a
//! load after a persist is bit-identical.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use vcanon_core::model::SpeakerModel;
use vcanon_core::strategy::{AssignmentTable, TargetPool};
use vcanon_core::verify::EvalReport;

use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

pub trait Record: Serialize + DeserializeOwned {
    const SCHEMA: &'static str;
}

impl Record for SpeakerModel {
    const SCHEMA: &'static str = "speaker_model";
}

impl Record for AssignmentTable {
    const SCHEMA: &'static str = "assignment_table";
}

impl Record for EvalReport {
    const SCHEMA: &'static str = "eval_report";
}

impl Record for Vec<SpeakerModel> {
    const SCHEMA: &'static str = "speaker_models";
}

impl Record for TargetPool {
    const SCHEMA: &'static str = "target_pool";
}

impl Record for crate::harness::ScenarioResult {
    const SCHEMA: &'static str = "scenario_result";
}

#[derive(Serialize)]
struct EnvelopeOut<'a, T> {
    schema: &'a str,
    schema_version: u32,
    value: &'a T,
}

#[derive(Deserialize)]
struct Header {
    schema: String,
    schema_version: u32,
}

#[derive(Deserialize)]
struct EnvelopeIn<T> {
    value: T,
}

pub fn to_string<T: Record>(value: &T) -> Result<String> {
    let env = EnvelopeOut { schema: T::SCHEMA, schema_version: SCHEMA_VERSION, value };
    let mut text = serde_json::to_string_pretty(&env).map_err(|e| Error::Config(e.to_string()))?;
    text.push('\n');
    Ok(text)
}

pub fn from_str<T: Record>(text: &str, origin: &Path) -> Result<T> {
    let decode = |reason: String| Error::Decode { path: origin.to_path_buf(), reason };
    let header: Header = serde_json::from_str(text).map_err(|e| decode(format!("bad header: {e}")))?;
    if header.schema != T::SCHEMA {
        return Err(decode(format!("expected a {} record, found {}", T::SCHEMA, header.schema)));
    }
    if header.schema_version != SCHEMA_VERSION {
        return Err(decode(format!(
            "schema version {} is not supported (expected {SCHEMA_VERSION})",
            header.schema_version
        )));
    }
    let env: EnvelopeIn<T> = serde_json::from_str(text).map_err(|e| decode(e.to_string()))?;
    Ok(env.value)
}

pub fn persist<T: Record>(value: &T, path: &Path) -> Result<()> {
    fs::write(path, to_string(value)?).map_err(|e| Error::io(path, e))
}

pub fn load<T: Record>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_str(&text, path)
}
