use std::collections::HashSet;
use std::path::Path;

use serde::Deserialize;

use super::Example;
use crate::error::{Error, Result};

/// Fraction of malformed lines above which a file is rejected outright.
const MAX_MALFORMED_FRACTION: f64 = 0.10;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MalformedLine {
    /// 1-based.
    pub line: usize,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LoadedCorpus {
    pub examples: Vec<Example>,
    pub malformed: Vec<MalformedLine>,
}

#[derive(Deserialize)]
struct Record {
    id: String,
    source: String,
    summary: String,
}

pub fn load_jsonl(path: &Path) -> Result<LoadedCorpus> {
    let text = std::fs::read_to_string(path)?;
    parse_jsonl(&text)
}

/// Parses line-delimited `{"id", "source", "summary"}` records. Blank lines
/// are ignored. Malformed lines are reported; more than 10% malformed is an
/// error.
pub fn parse_jsonl(text: &str) -> Result<LoadedCorpus> {
    let mut out = LoadedCorpus::default();
    let mut ids = HashSet::new();
    let mut records = 0usize;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        records += 1;
        let line_no = i + 1;
        let reason = match serde_json::from_str::<Record>(line) {
            Err(e) => Some(e.to_string()),
            Ok(r) if r.source.trim().is_empty() => Some("empty source".to_string()),
            Ok(r) if !ids.insert(r.id.clone()) => Some(format!("duplicate id {:?}", r.id)),
            Ok(r) => {
                out.examples.push(Example {
                    id: r.id,
                    source: r.source,
                    summary: r.summary,
                });
                None
            }
        };
        if let Some(reason) = reason {
            out.malformed.push(MalformedLine {
                line: line_no,
                reason,
            });
        }
    }
    if records == 0 {
        log::warn!("corpus is empty");
    }
    if records > 0 && out.malformed.len() as f64 > MAX_MALFORMED_FRACTION * records as f64 {
        let listing: Vec<String> = out
            .malformed
            .iter()
            .map(|m| format!("line {}: {}", m.line, m.reason))
            .collect();
        return Err(Error::Corpus(format!(
            "{} of {} lines malformed\n  {}",
            out.malformed.len(),
            records,
            listing.join("\n  ")
        )));
    }
    for m in &out.malformed {
        log::warn!("skipping line {}: {}", m.line, m.reason);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_input_is_valid() {
        let c = parse_jsonl("").unwrap();
        assert!(c.examples.is_empty());
        assert!(c.malformed.is_empty());
    }

    #[test]
    fn preserves_order() {
        let text = r#"{"id":"b","source":"x.","summary":"x"}
{"id":"a","source":"y.","summary":"y"}
{"id":"c","source":"z.","summary":"z"}
"#;
        let c = parse_jsonl(text).unwrap();
        let ids: Vec<&str> = c.examples.iter().map(|e| e.id.as_str()).collect();
        assert_eq!(ids, vec!["b", "a", "c"]);
    }

    #[test]
    fn missing_field_reported_with_line_number() {
        let mut text = String::new();
        for i in 0..10 {
            text.push_str(&format!("{{\"id\":\"{i}\",\"source\":\"s.\",\"summary\":\"t\"}}\n"));
        }
        text.push_str("{\"id\":\"x\",\"source\":\"s.\"}\n");
        let c = parse_jsonl(&text).unwrap();
        assert_eq!(c.examples.len(), 10);
        assert_eq!(c.malformed.len(), 1);
        assert_eq!(c.malformed[0].line, 11);
        assert!(c.malformed[0].reason.contains("summary"));
    }

    #[test]
    fn too_many_malformed_lines_is_an_error() {
        let text = "{\"id\":\"a\",\"source\":\"s.\",\"summary\":\"t\"}\nnot json\n";
        let err = parse_jsonl(text).unwrap_err();
        assert!(matches!(err, Error::Corpus(ref m) if m.contains("line 2")));
    }
}
