//! Weight checkpoint files.
//!
//! Layout: magic bytes `FIPC`, a little-endian `u32` header length, a UTF-8
//! JSON header, the raw little-endian `f64` payload, and a trailing 8-byte
//! FNV-1a checksum of the payload. The checksum is also stored in the header
//! and both copies are verified on load. Round trips are bit-exact: loading
//! preserves the header verbatim, so save -> load -> save reproduces the
//! file byte for byte.

use crate::error::{FipError, Result};
use crate::linalg::fnv64;
use crate::net::{NetworkSpec, WeightVector};
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

const MAGIC: &[u8; 4] = b"FIPC";
pub const FORMAT_VERSION: u32 = 1;

/// JSON header of a checkpoint file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format_version: u32,
    pub spec: NetworkSpec,
    /// Payload length in `f64` entries.
    pub n: usize,
    pub created_unix_ms: u64,
    /// Chain of operations that produced these weights, oldest first.
    pub provenance: Vec<String>,
    /// FNV-1a of the payload bytes; duplicated in the file trailer.
    pub payload_checksum: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub payload: Vec<f64>,
}

impl Checkpoint {
    pub fn new(spec: &NetworkSpec, w: &WeightVector, provenance: Vec<String>) -> Self {
        let payload = w.values().to_vec();
        let created_unix_ms = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0);
        Checkpoint {
            header: CheckpointHeader {
                format_version: FORMAT_VERSION,
                spec: spec.clone(),
                n: payload.len(),
                created_unix_ms,
                provenance,
                payload_checksum: checksum_of(&payload),
            },
            payload,
        }
    }

    /// Rebinds the payload to the header's spec, revalidating shape and
    /// finiteness.
    pub fn weights(&self) -> Result<WeightVector> {
        WeightVector::new(&self.header.spec, self.payload.clone())
    }
}

fn checksum_of(payload: &[f64]) -> u64 {
    let bytes: Vec<u8> = payload.iter().flat_map(|v| v.to_le_bytes()).collect();
    fnv64(&bytes)
}

pub fn save_checkpoint(ck: &Checkpoint, path: &Path) -> Result<()> {
    if ck.payload.len() != ck.header.n {
        return Err(FipError::WeightLength {
            expected: ck.header.n,
            got: ck.payload.len(),
        });
    }
    let checksum = checksum_of(&ck.payload);
    let mut header = ck.header.clone();
    header.payload_checksum = checksum;
    let header_json = serde_json::to_string(&header)?;
    let header_bytes = header_json.as_bytes();
    let mut out = Vec::with_capacity(4 + 4 + header_bytes.len() + ck.payload.len() * 8 + 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(header_bytes.len() as u32).to_le_bytes());
    out.extend_from_slice(header_bytes);
    for v in &ck.payload {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&checksum.to_le_bytes());
    std::fs::write(path, out)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let file = path.display().to_string();
    let bytes = std::fs::read(path)?;
    let truncated = |context: &str| FipError::Truncated {
        file: file.clone(),
        context: context.to_string(),
    };
    if bytes.len() < 8 {
        return Err(truncated("shorter than magic + header length"));
    }
    if &bytes[..4] != MAGIC {
        return Err(FipError::BadMagic {
            file,
            got: u32::from_be_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]),
            expected: u32::from_be_bytes(*MAGIC),
        });
    }
    let header_len = u32::from_le_bytes([bytes[4], bytes[5], bytes[6], bytes[7]]) as usize;
    let header_end = 8 + header_len;
    if bytes.len() < header_end {
        return Err(truncated("header extends past end of file"));
    }
    let header_json = std::str::from_utf8(&bytes[8..header_end])
        .map_err(|_| truncated("header is not valid UTF-8"))?;
    // Check the version before committing to the full header schema.
    let probe: serde_json::Value = serde_json::from_str(header_json)?;
    let version = probe
        .get("format_version")
        .and_then(|v| v.as_u64())
        .unwrap_or(0) as u32;
    if version != FORMAT_VERSION {
        return Err(FipError::UnsupportedVersion { version });
    }
    let header: CheckpointHeader = serde_json::from_str(header_json)?;
    let payload_len = header
        .n
        .checked_mul(8)
        .ok_or_else(|| truncated("payload size overflows"))?;
    let payload_end = header_end + payload_len;
    if bytes.len() != payload_end + 8 {
        return Err(truncated("payload or trailing checksum has wrong length"));
    }
    let payload: Vec<f64> = bytes[header_end..payload_end]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let computed = checksum_of(&payload);
    let trailer = u64::from_le_bytes(bytes[payload_end..].try_into().unwrap());
    if trailer != computed {
        return Err(FipError::ChecksumMismatch {
            stored: trailer,
            computed,
        });
    }
    if header.payload_checksum != computed {
        return Err(FipError::ChecksumMismatch {
            stored: header.payload_checksum,
            computed,
        });
    }
    Ok(Checkpoint { header, payload })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::Activation;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample() -> (NetworkSpec, WeightVector) {
        let spec = NetworkSpec::mlp(vec![3, 4, 2], Activation::Tanh).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let vals: Vec<f64> = (0..spec.param_count())
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        let w = WeightVector::new(&spec, vals).unwrap();
        (spec, w)
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let (spec, w) = sample();
        let ck = Checkpoint::new(&spec, &w, vec!["base training".into()]);
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("a.fipc");
        let p2 = dir.path().join("b.fipc");
        save_checkpoint(&ck, &p1).unwrap();
        let loaded = load_checkpoint(&p1).unwrap();
        assert_eq!(loaded.weights().unwrap().values(), w.values());
        save_checkpoint(&loaded, &p2).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    }

    #[test]
    fn corrupted_payload_byte_fails_checksum() {
        let (spec, w) = sample();
        let ck = Checkpoint::new(&spec, &w, vec![]);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.fipc");
        save_checkpoint(&ck, &p).unwrap();
        let mut bytes = std::fs::read(&p).unwrap();
        let flip = bytes.len() - 12; // inside the payload
        bytes[flip] ^= 0xff;
        std::fs::write(&p, bytes).unwrap();
        assert!(matches!(
            load_checkpoint(&p),
            Err(FipError::ChecksumMismatch { .. })
        ));
    }

    #[test]
    fn unknown_version_is_rejected() {
        let (spec, w) = sample();
        let mut ck = Checkpoint::new(&spec, &w, vec![]);
        ck.header.format_version = 999;
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("v.fipc");
        save_checkpoint(&ck, &p).unwrap();
        assert!(matches!(
            load_checkpoint(&p),
            Err(FipError::UnsupportedVersion { version: 999 })
        ));
    }

    #[test]
    fn truncated_and_bad_magic_files_are_rejected() {
        let (spec, w) = sample();
        let ck = Checkpoint::new(&spec, &w, vec![]);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.fipc");
        save_checkpoint(&ck, &p).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        std::fs::write(&p, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(load_checkpoint(&p), Err(FipError::Truncated { .. })));

        let q = dir.path().join("m.fipc");
        let mut bad = bytes.clone();
        bad[0] = b'X';
        std::fs::write(&q, bad).unwrap();
        assert!(matches!(load_checkpoint(&q), Err(FipError::BadMagic { .. })));
    }
}
