//! Canonical encodings shared by hashing, persistence and the wire protocol.
//!
//! Canonical JSON is compact (no insignificant whitespace) with object keys
//! sorted ascending. Binary field encoding prefixes every field with its
//! 4-byte big-endian byte length.

use serde::Serialize;
use serde_json::Value;

/// Serialize `value` as canonical JSON text.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> String {
    let value = serde_json::to_value(value).expect("value serializes to JSON");
    value_to_json(&value)
}

/// Render an already-built JSON value canonically.
pub fn value_to_json(value: &Value) -> String {
    let mut out = String::new();
    write_value(value, &mut out);
    out
}

fn write_value(value: &Value, out: &mut String) {
    match value {
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, key) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&Value::String(key.clone()).to_string());
                out.push(':');
                write_value(&map[key], out);
            }
            out.push('}');
        }
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_value(item, out);
            }
            out.push(']');
        }
        scalar => out.push_str(&scalar.to_string()),
    }
}

/// Builder for the length-prefixed binary encoding.
#[derive(Debug, Default, Clone)]
pub struct FieldEncoder {
    buf: Vec<u8>,
}

impl FieldEncoder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Append one field: 4-byte big-endian length, then the bytes.
    pub fn field(&mut self, bytes: &[u8]) -> &mut Self {
        let len = u32::try_from(bytes.len()).expect("field shorter than 4 GiB");
        self.buf.extend_from_slice(&len.to_be_bytes());
        self.buf.extend_from_slice(bytes);
        self
    }

    /// Append a list as a field whose content is the 4-byte element count
    /// followed by each element encoded as a field.
    pub fn list<S: AsRef<[u8]>>(&mut self, items: &[S]) -> &mut Self {
        let mut inner = FieldEncoder::new();
        inner.count(items.len());
        for item in items {
            inner.field(item.as_ref());
        }
        self.field(&inner.buf)
    }

    /// Append a bare 4-byte big-endian count (no length prefix).
    pub fn count(&mut self, n: usize) -> &mut Self {
        let n = u32::try_from(n).expect("count fits in u32");
        self.buf.extend_from_slice(&n.to_be_bytes());
        self
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}
