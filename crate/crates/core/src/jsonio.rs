//! JSON reading and writing for episode files, manifests, checkpoints and
//! reports.
//!
//! Every float is emitted in decimal with at most 12 significant digits (see
//! [`crate::util::format_sig12`]) so files are reproducible byte-for-byte
//! across platforms. Objects and mixed arrays are pretty-printed; arrays
//! whose elements are all numbers are kept on one line, which keeps `states`
//! rows readable without exploding file sizes.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::util::format_sig12;

/// Render a JSON value with the crate's float formatting rules.
pub fn render(value: &Value) -> String {
    let mut out = String::new();
    write_value(&mut out, value, 0);
    out.push('\n');
    out
}

/// One-line rendering with the same float rules, for JSONL records.
pub fn render_compact(value: &Value) -> String {
    let mut out = String::new();
    write_compact(&mut out, value);
    out
}

fn write_compact(out: &mut String, value: &Value) {
    match value {
        Value::Array(items) => {
            out.push('[');
            for (i, v) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_compact(out, v);
            }
            out.push(']');
        }
        Value::Object(map) => {
            out.push('{');
            for (i, (k, v)) in map.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&serde_json::to_string(k).expect("key escape"));
                out.push(':');
                write_compact(out, v);
            }
            out.push('}');
        }
        other => write_value(out, other, 0),
    }
}

fn write_value(out: &mut String, value: &Value, indent: usize) {
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => write_number(out, n),
        Value::String(s) => {
            out.push_str(&serde_json::to_string(s).expect("string escape"))
        }
        Value::Array(items) => write_array(out, items, indent),
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push_str("{\n");
            for (i, (k, v)) in map.iter().enumerate() {
                push_indent(out, indent + 1);
                out.push_str(&serde_json::to_string(k).expect("key escape"));
                out.push_str(": ");
                write_value(out, v, indent + 1);
                if i + 1 < map.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            push_indent(out, indent);
            out.push('}');
        }
    }
}

fn write_array(out: &mut String, items: &[Value], indent: usize) {
    if items.is_empty() {
        out.push_str("[]");
        return;
    }
    let scalar_only = items
        .iter()
        .all(|v| matches!(v, Value::Number(_) | Value::Bool(_) | Value::Null));
    if scalar_only {
        out.push('[');
        for (i, v) in items.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            write_value(out, v, indent);
        }
        out.push(']');
    } else {
        out.push_str("[\n");
        for (i, v) in items.iter().enumerate() {
            push_indent(out, indent + 1);
            write_value(out, v, indent + 1);
            if i + 1 < items.len() {
                out.push(',');
            }
            out.push('\n');
        }
        push_indent(out, indent);
        out.push(']');
    }
}

fn write_number(out: &mut String, n: &serde_json::Number) {
    if let Some(i) = n.as_i64() {
        out.push_str(&i.to_string());
    } else if let Some(u) = n.as_u64() {
        out.push_str(&u.to_string());
    } else {
        let f = n.as_f64().expect("numeric json value");
        out.push_str(&format_sig12(f));
    }
}

fn push_indent(out: &mut String, levels: usize) {
    for _ in 0..levels {
        out.push_str("  ");
    }
}

/// Serialize `value` and write it atomically (temp file + rename) so readers
/// never observe a half-written document.
pub fn save<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let json = serde_json::to_value(value)
        .map_err(|e| Error::NonFinite(format!("serializing {}: {e}", path.display())))?;
    let text = render(&json);
    let tmp = path.with_extension("tmp");
    let mut file = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    file.write_all(text.as_bytes())
        .map_err(|e| Error::io(&tmp, e))?;
    file.sync_all().map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Load and deserialize a JSON document, reporting line/column on failure.
pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}
