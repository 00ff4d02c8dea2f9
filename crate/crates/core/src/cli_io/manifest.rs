//! Key-value manifest written next to each CSV.

use super::config::ConfigDocument;
use sha2::{Digest, Sha256};
use toml::{Table, Value};

#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub tool_version: String,
    /// Hex SHA-256 of the input document bytes.
    pub input_sha256: String,
    pub records: usize,
    /// `ok`, or the error that ended the run early.
    pub status: String,
    pub resolved: ConfigDocument,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl RunManifest {
    pub fn new(input: &[u8], records: usize, status: impl Into<String>, resolved: ConfigDocument) -> Self {
        Self {
            tool_version: format!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION")),
            input_sha256: sha256_hex(input),
            records,
            status: status.into(),
            resolved,
        }
    }

    pub fn to_toml(&self) -> String {
        let mut t = Table::new();
        t.insert("tool_version".into(), Value::String(self.tool_version.clone()));
        t.insert("input_sha256".into(), Value::String(self.input_sha256.clone()));
        t.insert("records".into(), Value::Integer(self.records as i64));
        t.insert("status".into(), Value::String(self.status.clone()));
        t.insert("resolved".into(), Value::Table(self.resolved.to_table()));
        toml::to_string(&t).expect("tables of plain values always serialize")
    }
}
