//! Named failure kinds reported as JSON records on stderr.

use std::fmt;

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Usage,
    MissingInput,
    SchemaViolation,
    InvalidConfig,
    CheckpointMismatch,
    ConfigMismatch,
    ModelFailure,
    LlmFailure,
    Io,
}

impl Kind {
    pub fn exit_code(self) -> i32 {
        match self {
            Kind::Usage => 2,
            Kind::MissingInput => 3,
            Kind::SchemaViolation => 4,
            Kind::InvalidConfig => 5,
            Kind::CheckpointMismatch => 6,
            Kind::ConfigMismatch => 7,
            Kind::ModelFailure => 8,
            Kind::LlmFailure => 9,
            Kind::Io => 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub kind: Kind,
    pub message: String,
}

impl Failure {
    pub fn new(kind: Kind, message: impl Into<String>) -> Self {
        Self { kind, message: message.into() }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for Failure {}

#[derive(Debug, Serialize)]
pub struct ErrorRecord<'a> {
    pub error: Kind,
    pub command: &'a str,
    pub message: String,
}

/// Kind and full message of an error chain; errors without a `Failure`
/// inside count as model failures.
pub fn classify(e: &anyhow::Error) -> (Kind, String) {
    let kind = e.chain().find_map(|c| c.downcast_ref::<Failure>()).map_or(Kind::ModelFailure, |f| f.kind);
    let message = e.chain().map(ToString::to_string).collect::<Vec<_>>().join(": ");
    (kind, message)
}

#[cfg(test)]
mod tests {
    use super::*;
    use anyhow::Context;

    #[test]
    fn kind_survives_context() {
        let e: anyhow::Result<()> = Err(Failure::new(Kind::MissingInput, "corpus.jsonl does not exist").into());
        let e = e.context("train-planner").unwrap_err();
        assert_eq!(classify(&e), (Kind::MissingInput, "train-planner: corpus.jsonl does not exist".into()));
        assert_eq!(classify(&anyhow::anyhow!("boom")).0, Kind::ModelFailure);
    }

    #[test]
    fn exit_codes_are_distinct_and_nonzero() {
        let kinds = [
            Kind::Usage,
            Kind::MissingInput,
            Kind::SchemaViolation,
            Kind::InvalidConfig,
            Kind::CheckpointMismatch,
            Kind::ConfigMismatch,
            Kind::ModelFailure,
            Kind::LlmFailure,
            Kind::Io,
        ];
        let mut codes: Vec<i32> = kinds.iter().map(|k| k.exit_code()).collect();
        codes.sort_unstable();
        codes.dedup();
        assert_eq!(codes.len(), kinds.len());
        assert!(codes.iter().all(|&c| c > 0));
    }
}
