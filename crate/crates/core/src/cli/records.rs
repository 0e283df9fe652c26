use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const SCHEMA: &str = "efk-records";
pub const SCHEMA_VERSION: u64 = 1;

pub(super) fn header(command: &str, seed: u64) -> Value {
    json!({"schema": SCHEMA, "version": SCHEMA_VERSION, "command": command, "seed": seed})
}

/// SHA-256 over every input text (length-prefixed) and the argument string.
pub fn inputs_digest(texts: &[&str], args: &str) -> String {
    let mut h = Sha256::new();
    for t in texts.iter().chain(std::iter::once(&args)) {
        h.update((t.len() as u64).to_le_bytes());
        h.update(t.as_bytes());
    }
    format!("sha256:{}", hex::encode(h.finalize()))
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("record line {line}: {msg}")]
pub struct RecordError {
    pub line: usize,
    pub msg: String,
}

/// Reads records output back, checking the header and the fields every
/// record carries: `op`, and either `inputs` plus a `stats` object or an
/// `error` with `kind` and `reason`.
pub fn parse_records(text: &str) -> Result<(Value, Vec<Value>), RecordError> {
    let err = |line: usize, msg: &str| RecordError {
        line,
        msg: msg.to_string(),
    };
    let mut lines = text.lines().enumerate();
    let (_, first) = lines.next().ok_or_else(|| err(1, "missing header"))?;
    let head: Value = serde_json::from_str(first).map_err(|e| err(1, &e.to_string()))?;
    if head["schema"] != SCHEMA || head["version"] != SCHEMA_VERSION || !head["command"].is_string() {
        return Err(err(1, "bad schema header"));
    }
    let mut out = Vec::new();
    for (i, l) in lines {
        let line = i + 1;
        let v: Value = serde_json::from_str(l).map_err(|e| err(line, &e.to_string()))?;
        if v["op"] != head["command"] {
            return Err(err(line, "op differs from the header command"));
        }
        let ok = match v.get("error") {
            Some(e) => e["kind"].is_string() && e["reason"].is_string(),
            None => v["inputs"].as_str().is_some_and(|d| d.starts_with("sha256:")) && v["stats"].is_object(),
        };
        if !ok {
            return Err(err(line, "missing required fields"));
        }
        out.push(v);
    }
    Ok((head, out))
}
