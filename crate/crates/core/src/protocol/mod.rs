//! Entity state machines for sensors, the coordinator (WNC), the cloud (CSP)
//! and users, exchanging the messages in [`messages`].
//!
//! Entities never share memory: each consumes encoded bytes and returns
//! encoded replies. Every primitive call goes through the entity's
//! [`Meter`](crate::metrics::Meter).

pub mod messages;

mod csp;
mod sensor;
mod user;
mod wnc;

pub use csp::Csp;
pub use messages::{DenyReason, Message, MessageKind, SensorEntry, UploadRecord};
pub use sensor::Sensor;
pub use user::{AccessError, Recovered, User};
pub use wnc::{SensorStanding, TrustLogEntry, Wnc, WncConfig, IDENTITY_PREFIX, MAX_ID_BYTES};

use std::fmt;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

use crate::abe::AbeError;
use crate::crypto::{
    AgreementKeyPair, AgreementPublicKey, CryptoError, HashDigest, MacKey, Nonce, SymKey,
};
use crate::ibbe::IbbeError;
use crate::metrics::Meter;
use crate::trust::TrustError;
use crate::wire::{WireError, Writer};

/// Nonce domains; each AEAD key is used under exactly one domain.
pub(crate) const NONCE_PROVISION: u32 = 0x5052_4f56;
pub(crate) const NONCE_ESCROW: u32 = 0x4553_4352;
pub(crate) const NONCE_SENSOR: u32 = 0x5345_4e53;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("not ready: {0}")]
    NotReady(&'static str),
    #[error("unknown peer '{0}'")]
    UnknownPeer(String),
    #[error("chain exhausted: key {needed} requested, chain length {length}")]
    ChainExhausted { needed: u64, length: u64 },
    #[error("no accepted data for epoch {0}")]
    NoDataForEpoch(u64),
    #[error("abe: {0}")]
    Abe(#[from] AbeError),
    #[error("ibbe: {0}")]
    Ibbe(#[from] IbbeError),
    #[error("crypto: {0}")]
    Crypto(#[from] CryptoError),
    #[error("trust: {0}")]
    Trust(#[from] TrustError),
    #[error("encoding: {0}")]
    Wire(#[from] WireError),
}

/// Why a receiver discarded a message.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Reject {
    Malformed,
    UnknownPeer,
    Unexpected,
    HandshakeFailure,
    /// Bad HMAC on sensor traffic.
    AuthFailure,
    TokenMismatch,
    Late,
    Duplicate,
    Untrusted,
    DecryptFailure,
    /// Bad HMAC or seal on coordinator/cloud traffic.
    IntegrityFailure,
    SignatureFailure,
    UnknownId,
    /// A response the recipient could not use.
    Unusable,
}

impl Reject {
    pub fn name(self) -> &'static str {
        match self {
            Reject::Malformed => "Malformed",
            Reject::UnknownPeer => "UnknownPeer",
            Reject::Unexpected => "Unexpected",
            Reject::HandshakeFailure => "HandshakeFailure",
            Reject::AuthFailure => "AuthFailure",
            Reject::TokenMismatch => "TokenMismatch",
            Reject::Late => "Late",
            Reject::Duplicate => "Duplicate",
            Reject::Untrusted => "Untrusted",
            Reject::DecryptFailure => "DecryptFailure",
            Reject::IntegrityFailure => "IntegrityFailure",
            Reject::SignatureFailure => "SignatureFailure",
            Reject::UnknownId => "UnknownId",
            Reject::Unusable => "Unusable",
        }
    }
}

impl fmt::Display for Reject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// An encoded message addressed by entity name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Envelope {
    pub from: String,
    pub to: String,
    pub kind: MessageKind,
    pub bytes: Vec<u8>,
}

impl Envelope {
    pub fn new(from: &str, to: &str, message: &Message) -> Self {
        Self {
            from: from.to_string(),
            to: to.to_string(),
            kind: message.kind(),
            bytes: message.encode(),
        }
    }
}

/// Result of handing one message to an entity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Delivery {
    pub verdict: Result<(), Reject>,
    pub replies: Vec<Envelope>,
}

impl Delivery {
    pub fn accepted(replies: Vec<Envelope>) -> Self {
        Self {
            verdict: Ok(()),
            replies,
        }
    }

    pub fn rejected(reason: Reject) -> Self {
        Self {
            verdict: Err(reason),
            replies: Vec::new(),
        }
    }

    pub fn is_accepted(&self) -> bool {
        self.verdict.is_ok()
    }
}

/// Deterministic per-entity generator derived from the run seed.
pub fn entity_rng(seed: u64, name: &str) -> ChaCha20Rng {
    let mut ikm = seed.to_be_bytes().to_vec();
    ikm.extend_from_slice(name.as_bytes());
    ChaCha20Rng::from_seed(crate::crypto::kdf(&ikm, b"entity-rng").0)
}

/// Pairwise keys of an established link.
#[derive(Clone, PartialEq, Eq)]
pub(crate) struct Link {
    pub mac: MacKey,
    pub enc: SymKey,
}

impl fmt::Debug for Link {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Link(..)")
    }
}

impl Link {
    pub fn encode_into(&self, w: &mut Writer) {
        w.fixed(self.mac.as_bytes()).fixed(self.enc.as_bytes());
    }
}

pub(crate) fn fresh_nonce<R: RngCore>(rng: &mut R) -> [u8; messages::NONCE_BYTES] {
    let mut n = [0u8; messages::NONCE_BYTES];
    rng.fill_bytes(&mut n);
    n
}

fn transcript(initiator: &str, responder: &str, ni: &[u8], nr: &[u8]) -> Vec<u8> {
    let mut w = Writer::new();
    w.str(initiator).str(responder).fixed(ni).fixed(nr);
    w.finish()
}

/// Static-static ECDH against the pinned peer key, split into MAC and
/// encryption subkeys bound to both names and nonces.
pub(crate) fn derive_link(
    meter: &mut Meter,
    mine: &AgreementKeyPair,
    theirs: &AgreementPublicKey,
    initiator: &str,
    responder: &str,
    ni: &[u8],
    nr: &[u8],
) -> Result<Link, CryptoError> {
    let mut label = b"link|".to_vec();
    label.extend_from_slice(&transcript(initiator, responder, ni, nr));
    let base = meter.ecdh(mine, theirs, &label)?;
    Ok(Link {
        mac: meter.kdf_mac(base.as_bytes(), b"link-mac"),
        enc: meter.kdf(base.as_bytes(), b"link-enc"),
    })
}

pub(crate) fn confirm_tag(
    meter: &mut Meter,
    link: &Link,
    initiator: &str,
    responder: &str,
    ni: &[u8],
    nr: &[u8],
) -> HashDigest {
    let mut data = b"key-confirm|".to_vec();
    data.extend_from_slice(&transcript(initiator, responder, ni, nr));
    meter.hmac(&link.mac, &data)
}

pub fn sensor_aad(sensor: &str, key_epoch: u64, window: u64) -> Vec<u8> {
    let mut w = Writer::new();
    w.str("sensor-data").str(sensor).u64(key_epoch).u64(window);
    w.finish()
}

pub fn sensor_nonce(window: u64) -> Nonce {
    Nonce::counter(NONCE_SENSOR, window)
}

/// Label for the pad that hides one chain key inside an upload.
pub fn mask_label(wnc: &str, sensor: &str, key_epoch: u64, window: u64) -> Vec<u8> {
    let mut w = Writer::new();
    w.str("key-mask")
        .str(wnc)
        .str(sensor)
        .u64(key_epoch)
        .u64(window);
    w.finish()
}

pub fn xor32(a: &[u8; 32], b: &[u8]) -> [u8; 32] {
    let mut out = *a;
    out.iter_mut().zip(b).for_each(|(o, x)| *o ^= x);
    out
}
