use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};

use crate::canonical::{self, FieldEncoder};

/// A SHA-256 digest.
pub type Digest = [u8; 32];

pub const ZERO_DIGEST: Digest = [0u8; 32];

pub fn sha256(bytes: &[u8]) -> Digest {
    Sha256::digest(bytes).into()
}

/// Digest of a handler result: SHA-256 over its UTF-8 bytes.
pub fn result_digest(result: &str) -> Digest {
    sha256(result.as_bytes())
}

/// One committed contract invocation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LedgerTransaction {
    pub seq: u64,
    pub contract: String,
    pub method: String,
    pub args: Vec<String>,
    pub result_digest: Digest,
    pub prev_hash: Digest,
    pub tx_hash: Digest,
}

impl LedgerTransaction {
    /// Build the transaction at `seq`, sealing it with its hash.
    pub fn seal(
        seq: u64,
        contract: &str,
        method: &str,
        args: &[String],
        result_digest: Digest,
        prev_hash: Digest,
    ) -> Self {
        let tx_hash = Self::compute_hash(seq, contract, method, args, &result_digest, &prev_hash);
        Self {
            seq,
            contract: contract.to_owned(),
            method: method.to_owned(),
            args: args.to_vec(),
            result_digest,
            prev_hash,
            tx_hash,
        }
    }

    /// SHA-256 over the length-prefixed fields
    /// `seq (u64 BE) | contract | method | args | resultDigest | prevHash`,
    /// where `args` is itself a field holding a 4-byte count then each arg.
    pub fn compute_hash(
        seq: u64,
        contract: &str,
        method: &str,
        args: &[String],
        result_digest: &Digest,
        prev_hash: &Digest,
    ) -> Digest {
        let mut enc = FieldEncoder::new();
        enc.field(&seq.to_be_bytes())
            .field(contract.as_bytes())
            .field(method.as_bytes())
            .list(args)
            .field(result_digest)
            .field(prev_hash);
        sha256(&enc.finish())
    }

    pub fn hash_is_valid(&self) -> bool {
        Self::compute_hash(
            self.seq,
            &self.contract,
            &self.method,
            &self.args,
            &self.result_digest,
            &self.prev_hash,
        ) == self.tx_hash
    }

    /// Canonical JSON record with lowercase-hex digests.
    pub fn to_json(&self) -> String {
        canonical::to_json(&TxRecord {
            seq: self.seq,
            contract: self.contract.clone(),
            method: self.method.clone(),
            args: self.args.clone(),
            result_digest: hex::encode(self.result_digest),
            prev_hash: hex::encode(self.prev_hash),
            tx_hash: hex::encode(self.tx_hash),
        })
    }

    /// Parse a persisted record. The text must be exactly the canonical
    /// rendering of the record it decodes to.
    pub fn from_json(text: &str) -> Result<Self, String> {
        let rec: TxRecord = serde_json::from_str(text).map_err(|e| e.to_string())?;
        let tx = Self {
            seq: rec.seq,
            contract: rec.contract,
            method: rec.method,
            args: rec.args,
            result_digest: decode_digest(&rec.result_digest)?,
            prev_hash: decode_digest(&rec.prev_hash)?,
            tx_hash: decode_digest(&rec.tx_hash)?,
        };
        if tx.to_json() != text {
            return Err("record is not in canonical form".into());
        }
        Ok(tx)
    }
}

fn decode_digest(s: &str) -> Result<Digest, String> {
    let bytes = hex::decode(s).map_err(|e| e.to_string())?;
    bytes.try_into().map_err(|_| format!("digest must be 32 bytes: {s}"))
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct TxRecord {
    seq: u64,
    contract: String,
    method: String,
    args: Vec<String>,
    result_digest: String,
    prev_hash: String,
    tx_hash: String,
}
