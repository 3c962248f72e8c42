//! JSON-lines helpers for persisted intermediates.

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
#[error("line {line}: {source}")]
pub struct JsonlError {
    pub line: usize,
    #[source]
    pub source: serde_json::Error,
}

pub fn to_jsonl<T: Serialize>(items: &[T]) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).expect("serialisable"));
        out.push('\n');
    }
    out
}

/// Blank lines are skipped.
pub fn from_jsonl<T: DeserializeOwned>(text: &str) -> Result<Vec<T>, JsonlError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|source| JsonlError { line: i + 1, source }))
        .collect()
}
