use std::collections::BTreeMap;
use std::ops::Bound;

use super::tx::{sha256, Digest};
use crate::canonical::FieldEncoder;

/// Key-value world state. Keys are namespaced as `contract:key`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WorldState {
    entries: BTreeMap<String, String>,
}

impl WorldState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    /// Entries whose key starts with `prefix`, ascending.
    pub fn range_prefix<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = (&'a str, &'a str)> {
        self.entries
            .range::<str, _>((Bound::Included(prefix), Bound::Unbounded))
            .take_while(move |(k, _)| k.starts_with(prefix))
            .map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub(crate) fn apply(&mut self, writes: BTreeMap<String, Option<String>>) {
        for (key, value) in writes {
            match value {
                Some(v) => {
                    self.entries.insert(key, v);
                }
                None => {
                    self.entries.remove(&key);
                }
            }
        }
    }

    /// SHA-256 over the 4-byte entry count followed by each key and value
    /// as length-prefixed fields, in ascending key order.
    pub fn root(&self) -> Digest {
        let mut enc = FieldEncoder::new();
        enc.count(self.entries.len());
        for (k, v) in &self.entries {
            enc.field(k.as_bytes()).field(v.as_bytes());
        }
        sha256(&enc.finish())
    }
}
