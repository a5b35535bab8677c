//! JSON report envelope shared by every CLI command.

use serde::Serialize;
use serde_json::Value;
use std::collections::BTreeMap;

pub const SCHEMA_VERSION: &str = "1.0.0";

/// The one JSON object a successful command prints to standard output.
#[derive(Debug, Serialize)]
pub struct Report {
    pub schema_version: String,
    pub command: String,
    pub parameters: BTreeMap<String, Value>,
    pub results: Value,
    pub elapsed_ms: u64,
    pub tool_version: String,
}

impl Report {
    pub fn new(command: &str, parameters: BTreeMap<String, Value>, results: Value) -> Self {
        Report {
            schema_version: SCHEMA_VERSION.to_string(),
            command: command.to_string(),
            parameters,
            results,
            elapsed_ms: 0,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    pub fn to_pretty_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
