//! Encrypted attachments and the pathology inbox.
//!
//! Document payloads are sealed with AES-256-GCM under the configured key and
//! a fresh 96-bit nonce. The document id is bound in as associated data, so
//! ciphertext moved between documents fails authentication.

use std::fmt;

use aes_gcm::aead::{Aead, AeadCore, KeyInit, OsRng, Payload};
use aes_gcm::{Aes256Gcm, Key, Nonce};
use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::ids::{DocumentId, PatientId, ProcedureId, ReportId};
use crate::store::ActorRef;
use crate::workflow::parse_timestamp;

/// Scheme byte recorded on every stored document.
pub const SCHEME_AES_256_GCM: u8 = 1;

/// Symmetric key for document payloads.
#[derive(Clone)]
pub struct DocumentKey(Key<Aes256Gcm>);

impl DocumentKey {
    /// Parses exactly 64 hex characters.
    pub fn from_hex(hex_key: &str) -> Result<Self> {
        let hex_key = hex_key.trim();
        if hex_key.len() != 64 {
            return Err(Error::ConfigInvalid(
                "encryption key must be 64 hex characters".into(),
            ));
        }
        let bytes = hex::decode(hex_key)
            .map_err(|_| Error::ConfigInvalid("encryption key is not valid hex".into()))?;
        Ok(Self(*Key::<Aes256Gcm>::from_slice(&bytes)))
    }

    /// Seals `plaintext`, returning `(nonce, ciphertext)`.
    pub fn seal(&self, plaintext: &[u8], aad: &[u8]) -> (Vec<u8>, Vec<u8>) {
        let cipher = Aes256Gcm::new(&self.0);
        let nonce = Aes256Gcm::generate_nonce(&mut OsRng);
        let ciphertext = cipher
            .encrypt(&nonce, Payload { msg: plaintext, aad })
            .expect("AES-GCM encryption of in-memory buffer");
        (nonce.to_vec(), ciphertext)
    }

    pub fn open(&self, nonce: &[u8], ciphertext: &[u8], aad: &[u8]) -> Result<Vec<u8>> {
        if nonce.len() != 12 {
            return Err(Error::CorruptCiphertext);
        }
        Aes256Gcm::new(&self.0)
            .decrypt(Nonce::from_slice(nonce), Payload { msg: ciphertext, aad })
            .map_err(|_| Error::CorruptCiphertext)
    }
}

impl fmt::Debug for DocumentKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("DocumentKey(..)")
    }
}

pub fn sha256(bytes: &[u8]) -> [u8; 32] {
    Sha256::digest(bytes).into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DocumentOwner {
    Patient(PatientId),
    Procedure(ProcedureId),
    /// Laboratory results waiting in the pathology inbox.
    Inbox,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DocumentKind {
    Image,
    PathologyReport,
    ConsentScan,
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: DocumentId,
    pub owner: DocumentOwner,
    pub kind: DocumentKind,
    pub media_type: String,
    pub scheme: u8,
    #[serde(with = "b64")]
    pub nonce: Vec<u8>,
    #[serde(with = "b64")]
    pub ciphertext: Vec<u8>,
    #[serde(with = "hex_digest")]
    pub plaintext_sha256: [u8; 32],
    pub size_plain: u64,
    pub uploaded_by: ActorRef,
    pub uploaded_at: DateTime<Utc>,
}

impl Document {
    pub fn aad(id: DocumentId) -> [u8; 8] {
        id.0.to_be_bytes()
    }

    /// Encrypts `plaintext` into a new document.
    #[allow(clippy::too_many_arguments)]
    pub fn seal(
        key: &DocumentKey,
        id: DocumentId,
        owner: DocumentOwner,
        kind: DocumentKind,
        media_type: String,
        plaintext: &[u8],
        uploaded_by: ActorRef,
        uploaded_at: DateTime<Utc>,
    ) -> Self {
        let (nonce, ciphertext) = key.seal(plaintext, &Self::aad(id));
        Self {
            id,
            owner,
            kind,
            media_type,
            scheme: SCHEME_AES_256_GCM,
            nonce,
            ciphertext,
            plaintext_sha256: sha256(plaintext),
            size_plain: plaintext.len() as u64,
            uploaded_by,
            uploaded_at,
        }
    }

    /// Decrypts and re-checks the plaintext digest.
    pub fn open(&self, key: &DocumentKey) -> Result<Vec<u8>> {
        if self.scheme != SCHEME_AES_256_GCM {
            return Err(Error::CorruptCiphertext);
        }
        let plain = key.open(&self.nonce, &self.ciphertext, &Self::aad(self.id))?;
        if sha256(&plain) != self.plaintext_sha256 || plain.len() as u64 != self.size_plain {
            return Err(Error::CorruptCiphertext);
        }
        Ok(plain)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathologyReport {
    pub id: ReportId,
    pub lab_ref: String,
    pub received_at: DateTime<Utc>,
    pub patient_hint: Option<String>,
    pub body_site_hint: Option<String>,
    pub document_id: DocumentId,
    pub allocated_procedure_id: Option<ProcedureId>,
}

/// A laboratory result as delivered to the inbox.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathologyEnvelope {
    #[serde(default)]
    pub lab_ref: Option<String>,
    #[serde(default)]
    pub received_at: Option<String>,
    #[serde(default)]
    pub patient_hint: Option<String>,
    #[serde(default)]
    pub body_site_hint: Option<String>,
    /// Base64 report body.
    #[serde(default)]
    pub body: Option<String>,
}

/// An envelope with all required parts present and decoded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckedEnvelope {
    pub lab_ref: String,
    pub received_at: DateTime<Utc>,
    pub patient_hint: Option<String>,
    pub body_site_hint: Option<String>,
    pub body: Vec<u8>,
}

impl PathologyEnvelope {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::BadEnvelope(e.to_string()))
    }

    pub fn check(&self) -> Result<CheckedEnvelope> {
        let lab_ref = self
            .lab_ref
            .as_deref()
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .ok_or_else(|| Error::BadEnvelope("lab_ref missing".into()))?;
        let received_at = self
            .received_at
            .as_deref()
            .ok_or_else(|| Error::BadEnvelope("received_at missing".into()))
            .and_then(|t| {
                parse_timestamp(t).map_err(|_| Error::BadEnvelope("received_at malformed".into()))
            })?;
        let body = self
            .body
            .as_deref()
            .filter(|b| !b.is_empty())
            .ok_or_else(|| Error::BadEnvelope("body missing".into()))
            .and_then(|b| {
                B64.decode(b)
                    .map_err(|_| Error::BadEnvelope("body is not base64".into()))
            })?;
        if body.is_empty() {
            return Err(Error::BadEnvelope("body missing".into()));
        }
        let hint = |h: &Option<String>| {
            h.as_deref()
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(str::to_owned)
        };
        Ok(CheckedEnvelope {
            lab_ref: lab_ref.to_owned(),
            received_at,
            patient_hint: hint(&self.patient_hint),
            body_site_hint: hint(&self.body_site_hint),
            body,
        })
    }
}

pub(crate) mod b64 {
    use base64::engine::general_purpose::STANDARD;
    use base64::Engine;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&STANDARD.encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let text = String::deserialize(d)?;
        STANDARD.decode(text).map_err(serde::de::Error::custom)
    }
}

mod hex_digest {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8; 32], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[u8; 32], D::Error> {
        let text = String::deserialize(d)?;
        let mut out = [0u8; 32];
        hex::decode_to_slice(text, &mut out).map_err(serde::de::Error::custom)?;
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const KEY: &str = "000102030405060708090a0b0c0d0e0f101112131415161718191a1b1c1d1e1f";

    fn doc(plain: &[u8]) -> (DocumentKey, Document) {
        let key = DocumentKey::from_hex(KEY).unwrap();
        let d = Document::seal(
            &key,
            DocumentId(4),
            DocumentOwner::Patient(PatientId(1)),
            DocumentKind::Image,
            "image/png".into(),
            plain,
            ActorRef::System,
            DateTime::<Utc>::UNIX_EPOCH,
        );
        (key, d)
    }

    #[test]
    fn key_parsing() {
        assert!(DocumentKey::from_hex(KEY).is_ok());
        assert!(DocumentKey::from_hex(&KEY[..62]).is_err());
        assert!(DocumentKey::from_hex(&KEY.replace('0', "g")).is_err());
    }

    #[test]
    fn round_trip_and_nonce_freshness() {
        let plain: Vec<u8> = (0..1024u32).map(|i| (i * 7 % 251) as u8).collect();
        let (key, a) = doc(&plain);
        let (_, b) = doc(&plain);
        assert_ne!(a.nonce, b.nonce);
        assert_ne!(a.ciphertext, b.ciphertext);
        assert_eq!(a.open(&key).unwrap(), plain);
        assert_eq!(a.size_plain, 1024);
        assert_eq!(a.plaintext_sha256, sha256(&plain));
    }

    #[test]
    fn tampering_is_detected() {
        let (key, mut d) = doc(b"some image bytes");
        d.ciphertext[3] ^= 0x01;
        assert_eq!(d.open(&key), Err(Error::CorruptCiphertext));

        let (key, mut d) = doc(b"some image bytes");
        d.id = DocumentId(5);
        assert_eq!(d.open(&key), Err(Error::CorruptCiphertext));

        let (_, d) = doc(b"some image bytes");
        let other = DocumentKey::from_hex(&KEY.replace('1', "2")).unwrap();
        assert_eq!(d.open(&other), Err(Error::CorruptCiphertext));
    }

    #[test]
    fn serialized_document_is_self_describing() {
        let (key, d) = doc(b"payload");
        let v = serde_json::to_value(&d).unwrap();
        assert_eq!(v["scheme"], 1);
        assert_eq!(v["owner"], serde_json::json!({"patient": 1}));
        let back: Document = serde_json::from_value(v).unwrap();
        assert_eq!(back.open(&key).unwrap(), b"payload");
    }

    #[test]
    fn envelope_checks() {
        let good = r#"{"lab_ref":"LAB-1","received_at":"2024-05-01T10:00:00Z","patient_hint":"DOE","body_site_hint":null,"body":"aGVsbG8="}"#;
        let e = PathologyEnvelope::from_json(good).unwrap().check().unwrap();
        assert_eq!(e.body, b"hello");
        assert_eq!(e.patient_hint.as_deref(), Some("DOE"));

        let no_ref = r#"{"received_at":"2024-05-01T10:00:00Z","body":"aGVsbG8="}"#;
        assert!(matches!(
            PathologyEnvelope::from_json(no_ref).unwrap().check(),
            Err(Error::BadEnvelope(_))
        ));
        let no_body = r#"{"lab_ref":"X","received_at":"2024-05-01T10:00:00Z"}"#;
        assert!(matches!(
            PathologyEnvelope::from_json(no_body).unwrap().check(),
            Err(Error::BadEnvelope(_))
        ));
        let extra = r#"{"lab_ref":"X","received_at":"2024-05-01T10:00:00Z","body":"aGk=","x":1}"#;
        assert!(matches!(PathologyEnvelope::from_json(extra), Err(Error::BadEnvelope(_))));
    }
}
