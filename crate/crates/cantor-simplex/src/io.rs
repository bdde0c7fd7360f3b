//! Versioned JSON envelopes for every artifact the tools read and write.
//!
//! Every file is `{"schema": "<name>.v1", "payload": ...}` with rationals as
//! `"p/q"` strings. Serialization is deterministic: struct fields keep their
//! declaration order, maps are sorted, and the bytes end with one newline,
//! so identical values produce identical files.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const ALGEBRA_SCHEMA: &str = "algebra.v1";
pub const EMBEDDING_SCHEMA: &str = "embedding.v1";
pub const CHAIN_SCHEMA: &str = "chain.v1";
pub const CLOPEN_SCHEMA: &str = "clopen.v1";
pub const PREFIX_MAP_SCHEMA: &str = "prefixmap.v1";
pub const PARTITION_SCHEMA: &str = "partition.v1";
pub const CERT_SCHEMA: &str = "cert.v1";

#[derive(Debug, Error)]
pub enum IoError {
    #[error("cannot access {path}: {source}")]
    File {
        path: String,
        source: std::io::Error,
    },
    #[error("invalid JSON in {path}: {source}")]
    Json {
        path: String,
        source: serde_json::Error,
    },
    #[error("{path} holds schema {got:?}, expected {want:?}")]
    SchemaMismatch {
        path: String,
        want: String,
        got: String,
    },
}

#[derive(Serialize, Deserialize)]
struct Envelope<T> {
    schema: String,
    payload: T,
}

/// The canonical bytes of a payload under a schema tag.
pub fn to_json_bytes<T: Serialize>(schema: &str, payload: &T) -> Vec<u8> {
    let envelope = Envelope {
        schema: schema.to_string(),
        payload,
    };
    let mut bytes = serde_json::to_vec_pretty(&envelope).expect("payloads serialize");
    bytes.push(b'\n');
    bytes
}

pub fn save<T: Serialize>(path: &Path, schema: &str, payload: &T) -> Result<(), IoError> {
    fs::write(path, to_json_bytes(schema, payload)).map_err(|source| IoError::File {
        path: path.display().to_string(),
        source,
    })
}

pub fn load<T: DeserializeOwned>(path: &Path, schema: &str) -> Result<T, IoError> {
    let name = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|source| IoError::File {
        path: name.clone(),
        source,
    })?;
    let envelope: Envelope<serde_json::Value> =
        serde_json::from_str(&text).map_err(|source| IoError::Json {
            path: name.clone(),
            source,
        })?;
    if envelope.schema != schema {
        return Err(IoError::SchemaMismatch {
            path: name,
            want: schema.to_string(),
            got: envelope.schema,
        });
    }
    serde_json::from_value(envelope.payload).map_err(|source| IoError::Json { path: name, source })
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Digest of a file's raw bytes, for pinning certificate inputs.
pub fn digest_file(path: &Path) -> Result<String, IoError> {
    let bytes = fs::read(path).map_err(|source| IoError::File {
        path: path.display().to_string(),
        source,
    })?;
    Ok(sha256_hex(&bytes))
}
