//! Replayable certificates for every command run.
//!
//! A certificate pins the command line, the digest of every input file, the
//! seed, the exact verdicts, and the witness payload. Re-running the pinned
//! command on unchanged inputs rebuilds the same bytes; [`crate::io`] keeps
//! serialization deterministic, so byte equality is the replay check.

use std::collections::BTreeMap;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::io::{self, IoError, CERT_SCHEMA};
use crate::verify::Verdict;

/// A run certificate: `status` drives the process exit code, `payload` holds
/// the per-check verdicts and witnesses of the subcommand that produced it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Certificate<T> {
    /// The argv that produced this certificate, without the output flag, so
    /// the bytes do not depend on where the file is written.
    pub command: Vec<String>,
    /// Digest of each input file, keyed by flag name.
    pub inputs: BTreeMap<String, String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub status: Verdict,
    pub payload: T,
}

impl<T: Serialize> Certificate<T> {
    /// The canonical bytes of this certificate.
    pub fn to_bytes(&self) -> Vec<u8> {
        io::to_json_bytes(CERT_SCHEMA, self)
    }

    pub fn save(&self, path: &Path) -> Result<(), IoError> {
        io::save(path, CERT_SCHEMA, self)
    }
}

impl<T: DeserializeOwned> Certificate<T> {
    pub fn load(path: &Path) -> Result<Certificate<T>, IoError> {
        io::load(path, CERT_SCHEMA)
    }
}

/// Exit code contract: verified runs exit 0, failures 1, incomplete
/// (budget-bound) runs 3. Malformed input exits 2 before any certificate
/// exists.
pub fn exit_code(status: Verdict) -> i32 {
    match status {
        Verdict::Verified => 0,
        Verdict::Failed => 1,
        Verdict::Incomplete => 3,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Certificate<Vec<String>> {
        Certificate {
            command: vec!["check".into(), "--denoms".into(), "4".into()],
            inputs: BTreeMap::from([("--chain".to_string(), io::sha256_hex(b"chain"))]),
            seed: Some(7),
            status: Verdict::Verified,
            payload: vec!["witness".to_string()],
        }
    }

    #[test]
    fn bytes_replay_identically() {
        let cert = sample();
        assert_eq!(cert.to_bytes(), cert.to_bytes());

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cert.json");
        cert.save(&path).unwrap();
        let back: Certificate<Vec<String>> = Certificate::load(&path).unwrap();
        assert_eq!(back, cert);
        assert_eq!(back.to_bytes(), std::fs::read(&path).unwrap());
    }

    #[test]
    fn status_maps_to_exit_codes() {
        assert_eq!(exit_code(Verdict::Verified), 0);
        assert_eq!(exit_code(Verdict::Failed), 1);
        assert_eq!(exit_code(Verdict::Incomplete), 3);
    }

    #[test]
    fn status_serializes_uppercase() {
        let text = String::from_utf8(sample().to_bytes()).unwrap();
        assert!(text.contains("\"VERIFIED\""));
        assert!(text.contains("\"schema\": \"cert.v1\""));
    }
}
