//! JSON reading and canonical JSON writing for nets, scenarios and reports.

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use crate::net::HybridNet;
use crate::scenario::ScenarioConfig;

/// A document that did not match its schema; `path` points at the offending
/// field (`.` for the root).
#[derive(Clone, Debug, Error, PartialEq)]
#[error("schema error at `{path}`: {message}")]
pub struct SchemaError {
    pub path: String,
    pub message: String,
}

pub fn from_json<T: DeserializeOwned>(text: &str) -> Result<T, SchemaError> {
    let mut de = serde_json::Deserializer::from_str(text);
    let value = serde_path_to_error::deserialize(&mut de).map_err(|e| SchemaError {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    de.end().map_err(|e| SchemaError {
        path: ".".into(),
        message: e.to_string(),
    })?;
    Ok(value)
}

/// Pretty JSON with a trailing newline. Maps are ordered, so output is
/// deterministic for a given value.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("documents serialize to JSON");
    text.push('\n');
    text
}

pub fn net_to_json(net: &HybridNet) -> String {
    to_json(&net.canonical())
}

pub fn net_from_json(text: &str) -> Result<HybridNet, SchemaError> {
    from_json(text)
}

pub fn scenario_to_json(scenario: &ScenarioConfig) -> String {
    to_json(&scenario.canonical())
}

pub fn scenario_from_json(text: &str) -> Result<ScenarioConfig, SchemaError> {
    from_json(text)
}
