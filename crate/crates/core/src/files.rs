//! Schema-tagged JSON documents.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

/// Parse a JSON document whose top-level `"schema"` field must equal `expected`.
pub fn from_tagged_str<T: DeserializeOwned>(text: &str, expected: &str, origin: &str) -> Result<T> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Parse {
        path: origin.to_string(),
        message: e.to_string(),
    })?;
    let found = value.get("schema").and_then(|s| s.as_str()).unwrap_or("<missing>");
    if found != expected {
        return Err(Error::Schema {
            expected: expected.to_string(),
            found: found.to_string(),
        });
    }
    serde_json::from_value(value).map_err(|e| Error::Parse {
        path: origin.to_string(),
        message: e.to_string(),
    })
}

pub fn read_tagged<T: DeserializeOwned>(path: &Path, expected: &str) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_tagged_str(&text, expected, &path.display().to_string())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    let mut text = serde_json::to_string_pretty(value).expect("serializable document");
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
