//! Canonical JSONL dataset schema and loader.
//!
//! One example per line:
//! `{"id","language","prompt","response"?,"gold","category"?,"source","split"}`.
//! Loader errors cite the offending line number.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::taxonomy::{Polarity, SafetyCategory};

use super::EvalError;

/// One labeled example in the canonical schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub id: String,
    pub language: String,
    pub prompt: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<String>,
    pub gold: Polarity,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<SafetyCategory>,
    pub source: String,
    pub split: String,
}

impl LabeledExample {
    /// Structural checks beyond serde: non-empty prompt and category only on
    /// unsafe gold labels.
    pub fn validate(&self) -> Result<(), String> {
        if self.id.is_empty() {
            return Err("id must be non-empty".into());
        }
        if self.prompt.trim().is_empty() {
            return Err("prompt must be non-empty".into());
        }
        if self.category.is_some() && self.gold == Polarity::Safe {
            return Err("category is only meaningful when gold=unsafe".into());
        }
        Ok(())
    }
}

/// Load a JSONL dataset, validating every line. Empty files yield an empty
/// dataset; blank lines are skipped.
pub fn load_dataset(path: &Path) -> Result<Vec<LabeledExample>, EvalError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| EvalError::Io { path: path.display().to_string(), reason: e.to_string() })?;
    parse_dataset(&text).map_err(|mut e| {
        if let EvalError::DatasetLine { path: p, .. } = &mut e {
            *p = path.display().to_string();
        }
        e
    })
}

/// Parse JSONL text into examples; line numbers are 1-based.
pub fn parse_dataset(text: &str) -> Result<Vec<LabeledExample>, EvalError> {
    let mut out = Vec::new();
    let mut seen_ids = BTreeSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let example: LabeledExample = serde_json::from_str(raw).map_err(|e| {
            EvalError::DatasetLine { path: String::new(), line, reason: e.to_string() }
        })?;
        example.validate().map_err(|reason| EvalError::DatasetLine {
            path: String::new(),
            line,
            reason,
        })?;
        if !seen_ids.insert(example.id.clone()) {
            return Err(EvalError::DatasetLine {
                path: String::new(),
                line,
                reason: format!("duplicate id {:?}", example.id),
            });
        }
        out.push(example);
    }
    Ok(out)
}

/// Write examples as JSONL.
pub fn write_dataset(path: &Path, examples: &[LabeledExample]) -> Result<(), EvalError> {
    let mut buf = String::new();
    for ex in examples {
        buf.push_str(&serde_json::to_string(ex).expect("examples serialize"));
        buf.push('\n');
    }
    std::fs::write(path, buf)
        .map_err(|e| EvalError::Io { path: path.display().to_string(), reason: e.to_string() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example(id: &str, gold: Polarity) -> LabeledExample {
        LabeledExample {
            id: id.to_string(),
            language: "en".to_string(),
            prompt: format!("prompt {id}"),
            response: None,
            gold,
            category: None,
            source: "unit".to_string(),
            split: "test".to_string(),
        }
    }

    #[test]
    fn empty_file_is_empty_dataset() {
        assert!(parse_dataset("").unwrap().is_empty());
        assert!(parse_dataset("\n\n").unwrap().is_empty());
    }

    #[test]
    fn missing_gold_errors_with_line_number() {
        let text = r#"{"id":"a","language":"en","prompt":"p","gold":"safe","source":"s","split":"t"}
{"id":"b","language":"en","prompt":"p","source":"s","split":"t"}"#;
        match parse_dataset(text) {
            Err(EvalError::DatasetLine { line: 2, reason, .. }) => {
                assert!(reason.contains("gold"), "{reason}");
            }
            other => panic!("expected line-2 error, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_id_rejected() {
        let text = r#"{"id":"a","language":"en","prompt":"p","gold":"safe","source":"s","split":"t"}
{"id":"a","language":"en","prompt":"q","gold":"safe","source":"s","split":"t"}"#;
        match parse_dataset(text) {
            Err(EvalError::DatasetLine { line: 2, reason, .. }) => {
                assert!(reason.contains("duplicate"), "{reason}");
            }
            other => panic!("expected duplicate-id error, got {other:?}"),
        }
    }

    #[test]
    fn category_on_safe_gold_rejected() {
        let text = r#"{"id":"a","language":"en","prompt":"p","gold":"safe","category":2,"source":"s","split":"t"}"#;
        assert!(matches!(parse_dataset(text), Err(EvalError::DatasetLine { line: 1, .. })));
    }

    #[test]
    fn write_then_read_identity() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ds.jsonl");
        let mut examples =
            vec![example("a", Polarity::Safe), example("b", Polarity::Unsafe), example("c", Polarity::Safe)];
        examples[1].category = Some(SafetyCategory::IllegalAndCriminalActivities);
        examples[1].response = Some("a reply".to_string());
        examples[1].language = "ko".to_string();
        write_dataset(&path, &examples).unwrap();
        let loaded = load_dataset(&path).unwrap();
        assert_eq!(loaded, examples);
    }
}
