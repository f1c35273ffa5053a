//! Canonical message encodings.
//!
//! Every message is a 1-byte tag followed by its fields in fixed order.
//! Variable-length fields carry a 4-byte big-endian length prefix. MACs and
//! signatures are computed over the encoding up to (not including) the
//! authenticator, which always comes last.

use std::fmt;

use crate::crypto::Certificate;
use crate::trust::TrustToken;
use crate::wire::{Reader, WireError, Writer};

pub const NONCE_BYTES: usize = 16;
pub const MAC_BYTES: usize = 32;
pub const SIG_BYTES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MessageKind {
    Hello,
    HelloReply,
    Provision,
    Escrow,
    RegisterRequest,
    RegisterResponse,
    SensorData,
    TokenAck,
    Upload,
    AccessRequest,
    AccessResponse,
}

impl MessageKind {
    pub const ALL: [MessageKind; 11] = [
        MessageKind::Hello,
        MessageKind::HelloReply,
        MessageKind::Provision,
        MessageKind::Escrow,
        MessageKind::RegisterRequest,
        MessageKind::RegisterResponse,
        MessageKind::SensorData,
        MessageKind::TokenAck,
        MessageKind::Upload,
        MessageKind::AccessRequest,
        MessageKind::AccessResponse,
    ];

    pub fn tag(self) -> u8 {
        match self {
            MessageKind::Hello => 0x01,
            MessageKind::HelloReply => 0x02,
            MessageKind::Provision => 0x03,
            MessageKind::Escrow => 0x05,
            MessageKind::RegisterRequest => 0x06,
            MessageKind::RegisterResponse => 0x07,
            MessageKind::SensorData => 0x08,
            MessageKind::TokenAck => 0x09,
            MessageKind::Upload => 0x0A,
            MessageKind::AccessRequest => 0x0B,
            MessageKind::AccessResponse => 0x0C,
        }
    }

    pub fn from_tag(tag: u8) -> Option<MessageKind> {
        Self::ALL.into_iter().find(|k| k.tag() == tag)
    }

    pub fn name(self) -> &'static str {
        match self {
            MessageKind::Hello => "Hello",
            MessageKind::HelloReply => "HelloReply",
            MessageKind::Provision => "Provision",
            MessageKind::Escrow => "Escrow",
            MessageKind::RegisterRequest => "RegisterRequest",
            MessageKind::RegisterResponse => "RegisterResponse",
            MessageKind::SensorData => "SensorData",
            MessageKind::TokenAck => "TokenAck",
            MessageKind::Upload => "Upload",
            MessageKind::AccessRequest => "AccessRequest",
            MessageKind::AccessResponse => "AccessResponse",
        }
    }

    pub fn from_name(name: &str) -> Option<MessageKind> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }

    /// Kind of an encoded message, from its first byte.
    pub fn of(bytes: &[u8]) -> Option<MessageKind> {
        bytes.first().and_then(|t| Self::from_tag(*t))
    }
}

impl fmt::Display for MessageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Handshake opener: the sender's static agreement key and a fresh nonce.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hello {
    pub from: String,
    pub to: String,
    pub public_key: Vec<u8>,
    pub nonce: [u8; NONCE_BYTES],
}

/// Handshake answer; `confirm` is an HMAC under the derived link key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HelloReply {
    pub from: String,
    pub to: String,
    pub public_key: Vec<u8>,
    pub nonce: [u8; NONCE_BYTES],
    pub confirm: [u8; MAC_BYTES],
}

/// Chain seed, chain length and initial trust token, sealed under the link.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provision {
    pub from: String,
    pub to: String,
    pub sealed: Vec<u8>,
}

/// Access-control material handed from the coordinator to the cloud.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Escrow {
    pub from: String,
    pub to: String,
    pub abe_public: Vec<u8>,
    pub delegation: Vec<u8>,
    pub ibbe_public: Vec<u8>,
    pub receivers: Vec<String>,
    pub header: Vec<u8>,
    /// Partial master key, sealed under the link.
    pub sealed_master: Vec<u8>,
    /// Identity keys, each wrapped to its user's long-term key.
    pub identity_keys: Vec<(String, Vec<u8>)>,
    pub mac: [u8; MAC_BYTES],
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegisterRequest {
    pub user: String,
    pub to: String,
    pub counter: u64,
    pub signature: [u8; SIG_BYTES],
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegisterResponse {
    pub from: String,
    pub to: String,
    pub abe_public: Vec<u8>,
    pub delegation: Vec<u8>,
    pub ibbe_public: Vec<u8>,
    pub receivers: Vec<String>,
    pub header: Vec<u8>,
    /// Attribute key, wrapped to the user.
    pub sealed_key: Vec<u8>,
    /// Identity key as escrowed; absent for users outside the receiver set.
    pub sealed_identity: Option<Vec<u8>>,
    pub signature: [u8; SIG_BYTES],
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SensorData {
    pub from: String,
    pub to: String,
    /// Epoch of the presented token; the ciphertext uses chain key `key_epoch + 1`.
    pub key_epoch: u64,
    /// Coordinator epoch the reading belongs to.
    pub window: u64,
    pub ciphertext: Vec<u8>,
    pub token: TrustToken,
    pub mac: [u8; MAC_BYTES],
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenAck {
    pub from: String,
    pub to: String,
    pub token: TrustToken,
    pub mac: [u8; MAC_BYTES],
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SensorEntry {
    pub sensor: String,
    pub key_epoch: u64,
    pub ciphertext: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UploadRecord {
    pub wnc: String,
    pub window: u64,
    pub attributes: Vec<String>,
    pub receivers: Vec<String>,
    pub header: Vec<u8>,
    /// ABE ciphertext over the masked chain keys, one per entry.
    pub abe: Vec<u8>,
    pub entries: Vec<SensorEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Upload {
    pub from: String,
    pub to: String,
    pub record: UploadRecord,
    pub mac: [u8; MAC_BYTES],
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccessRequest {
    pub user: String,
    pub to: String,
    pub certificate: Certificate,
    pub attributes: Vec<String>,
    /// Only records from this window onward are wanted.
    pub from_window: u64,
    pub counter: u64,
    pub signature: [u8; SIG_BYTES],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DenyReason {
    NotRegistered,
    Untrusted,
    BadCertificate,
    BadSignature,
    Replay,
}

impl DenyReason {
    const ALL: [DenyReason; 5] = [
        DenyReason::NotRegistered,
        DenyReason::Untrusted,
        DenyReason::BadCertificate,
        DenyReason::BadSignature,
        DenyReason::Replay,
    ];

    fn code(self) -> u8 {
        Self::ALL.iter().position(|r| *r == self).unwrap() as u8 + 1
    }

    fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get((code as usize).checked_sub(1)?).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AccessOutcome {
    Granted(Vec<UploadRecord>),
    Denied(DenyReason),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccessResponse {
    pub from: String,
    pub to: String,
    pub outcome: AccessOutcome,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Message {
    Hello(Hello),
    HelloReply(HelloReply),
    Provision(Provision),
    Escrow(Escrow),
    RegisterRequest(RegisterRequest),
    RegisterResponse(RegisterResponse),
    SensorData(SensorData),
    TokenAck(TokenAck),
    Upload(Upload),
    AccessRequest(AccessRequest),
    AccessResponse(AccessResponse),
}

fn start(kind: MessageKind, from: &str, to: &str) -> Writer {
    let mut w = Writer::with_tag(kind.tag());
    w.str(from).str(to);
    w
}

fn open<'a>(kind: MessageKind, bytes: &'a [u8]) -> Result<(Reader<'a>, String, String), WireError> {
    let mut r = Reader::new(bytes);
    r.expect_tag(kind.tag())?;
    let from = r.string()?;
    let to = r.string()?;
    Ok((r, from, to))
}

fn authed(mut w: Writer, tail: &[u8]) -> Vec<u8> {
    w.fixed(tail);
    w.finish()
}

impl Hello {
    pub fn encode(&self) -> Vec<u8> {
        let mut w = start(MessageKind::Hello, &self.from, &self.to);
        w.bytes(&self.public_key).fixed(&self.nonce);
        w.finish()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        let (mut r, from, to) = open(MessageKind::Hello, bytes)?;
        let public_key = r.bytes()?.to_vec();
        let nonce = r.array()?;
        r.finish()?;
        Ok(Self {
            from,
            to,
            public_key,
            nonce,
        })
    }
}

impl HelloReply {
    fn body(&self) -> Writer {
        let mut w = start(MessageKind::HelloReply, &self.from, &self.to);
        w.bytes(&self.public_key).fixed(&self.nonce);
        w
    }

    pub fn encode(&self) -> Vec<u8> {
        authed(self.body(), &self.confirm)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        let (mut r, from, to) = open(MessageKind::HelloReply, bytes)?;
        let public_key = r.bytes()?.to_vec();
        let nonce = r.array()?;
        let confirm = r.array()?;
        r.finish()?;
        Ok(Self {
            from,
            to,
            public_key,
            nonce,
            confirm,
        })
    }
}

impl Provision {
    pub fn encode(&self) -> Vec<u8> {
        let mut w = start(MessageKind::Provision, &self.from, &self.to);
        w.bytes(&self.sealed);
        w.finish()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        let (mut r, from, to) = open(MessageKind::Provision, bytes)?;
        let sealed = r.bytes()?.to_vec();
        r.finish()?;
        Ok(Self { from, to, sealed })
    }
}

impl Escrow {
    pub fn mac_body(&self) -> Vec<u8> {
        self.body().finish()
    }

    fn body(&self) -> Writer {
        let mut w = start(MessageKind::Escrow, &self.from, &self.to);
        w.bytes(&self.abe_public)
            .bytes(&self.delegation)
            .bytes(&self.ibbe_public)
            .strs(&self.receivers)
            .bytes(&self.header)
            .bytes(&self.sealed_master)
            .u32(self.identity_keys.len() as u32);
        for (id, ct) in &self.identity_keys {
            w.str(id).bytes(ct);
        }
        w
    }

    pub fn encode(&self) -> Vec<u8> {
        authed(self.body(), &self.mac)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        let (mut r, from, to) = open(MessageKind::Escrow, bytes)?;
        let abe_public = r.bytes()?.to_vec();
        let delegation = r.bytes()?.to_vec();
        let ibbe_public = r.bytes()?.to_vec();
        let receivers = r.strings()?;
        let header = r.bytes()?.to_vec();
        let sealed_master = r.bytes()?.to_vec();
        let n = r.count()?;
        let mut identity_keys = Vec::with_capacity(n);
        for _ in 0..n {
            identity_keys.push((r.string()?, r.bytes()?.to_vec()));
        }
        let mac = r.array()?;
        r.finish()?;
        Ok(Self {
            from,
            to,
            abe_public,
            delegation,
            ibbe_public,
            receivers,
            header,
            sealed_master,
            identity_keys,
            mac,
        })
    }
}

impl RegisterRequest {
    pub fn signed_body(&self) -> Vec<u8> {
        self.body().finish()
    }

    fn body(&self) -> Writer {
        let mut w = start(MessageKind::RegisterRequest, &self.user, &self.to);
        w.u64(self.counter);
        w
    }

    pub fn encode(&self) -> Vec<u8> {
        authed(self.body(), &self.signature)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        let (mut r, user, to) = open(MessageKind::RegisterRequest, bytes)?;
        let counter = r.u64()?;
        let signature = r.array()?;
        r.finish()?;
        Ok(Self {
            user,
            to,
            counter,
            signature,
        })
    }
}

impl RegisterResponse {
    pub fn signed_body(&self) -> Vec<u8> {
        self.body().finish()
    }

    fn body(&self) -> Writer {
        let mut w = start(MessageKind::RegisterResponse, &self.from, &self.to);
        w.bytes(&self.abe_public)
            .bytes(&self.delegation)
            .bytes(&self.ibbe_public)
            .strs(&self.receivers)
            .bytes(&self.header)
            .bytes(&self.sealed_key);
        match &self.sealed_identity {
            Some(ct) => w.bool(true).bytes(ct),
            None => w.bool(false),
        };
        w
    }

    pub fn encode(&self) -> Vec<u8> {
        authed(self.body(), &self.signature)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        let (mut r, from, to) = open(MessageKind::RegisterResponse, bytes)?;
        let abe_public = r.bytes()?.to_vec();
        let delegation = r.bytes()?.to_vec();
        let ibbe_public = r.bytes()?.to_vec();
        let receivers = r.strings()?;
        let header = r.bytes()?.to_vec();
        let sealed_key = r.bytes()?.to_vec();
        let sealed_identity = if r.bool()? {
            Some(r.bytes()?.to_vec())
        } else {
            None
        };
        let signature = r.array()?;
        r.finish()?;
        Ok(Self {
            from,
            to,
            abe_public,
            delegation,
            ibbe_public,
            receivers,
            header,
            sealed_key,
            sealed_identity,
            signature,
        })
    }
}

impl SensorData {
    pub fn mac_body(&self) -> Vec<u8> {
        self.body().finish()
    }

    fn body(&self) -> Writer {
        let mut w = start(MessageKind::SensorData, &self.from, &self.to);
        w.u64(self.key_epoch)
            .u64(self.window)
            .bytes(&self.ciphertext);
        self.token.encode_into(&mut w);
        w
    }

    pub fn encode(&self) -> Vec<u8> {
        authed(self.body(), &self.mac)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        let (mut r, from, to) = open(MessageKind::SensorData, bytes)?;
        let key_epoch = r.u64()?;
        let window = r.u64()?;
        let ciphertext = r.bytes()?.to_vec();
        let token = TrustToken::decode_from(&mut r)?;
        let mac = r.array()?;
        r.finish()?;
        Ok(Self {
            from,
            to,
            key_epoch,
            window,
            ciphertext,
            token,
            mac,
        })
    }
}

impl TokenAck {
    pub fn mac_body(&self) -> Vec<u8> {
        self.body().finish()
    }

    fn body(&self) -> Writer {
        let mut w = start(MessageKind::TokenAck, &self.from, &self.to);
        self.token.encode_into(&mut w);
        w
    }

    pub fn encode(&self) -> Vec<u8> {
        authed(self.body(), &self.mac)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        let (mut r, from, to) = open(MessageKind::TokenAck, bytes)?;
        let token = TrustToken::decode_from(&mut r)?;
        let mac = r.array()?;
        r.finish()?;
        Ok(Self {
            from,
            to,
            token,
            mac,
        })
    }
}

impl UploadRecord {
    pub fn encode_into(&self, w: &mut Writer) {
        w.str(&self.wnc)
            .u64(self.window)
            .strs(&self.attributes)
            .strs(&self.receivers)
            .bytes(&self.header)
            .bytes(&self.abe)
            .u32(self.entries.len() as u32);
        for e in &self.entries {
            w.str(&e.sensor).u64(e.key_epoch).bytes(&e.ciphertext);
        }
    }

    pub fn decode_from(r: &mut Reader<'_>) -> Result<Self, WireError> {
        let wnc = r.string()?;
        let window = r.u64()?;
        let attributes = r.strings()?;
        let receivers = r.strings()?;
        let header = r.bytes()?.to_vec();
        let abe = r.bytes()?.to_vec();
        let n = r.count()?;
        let mut entries = Vec::with_capacity(n);
        for _ in 0..n {
            entries.push(SensorEntry {
                sensor: r.string()?,
                key_epoch: r.u64()?,
                ciphertext: r.bytes()?.to_vec(),
            });
        }
        Ok(Self {
            wnc,
            window,
            attributes,
            receivers,
            header,
            abe,
            entries,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        self.encode_into(&mut w);
        w.finish()
    }
}

impl Upload {
    pub fn mac_body(&self) -> Vec<u8> {
        self.body().finish()
    }

    fn body(&self) -> Writer {
        let mut w = start(MessageKind::Upload, &self.from, &self.to);
        self.record.encode_into(&mut w);
        w
    }

    pub fn encode(&self) -> Vec<u8> {
        authed(self.body(), &self.mac)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        let (mut r, from, to) = open(MessageKind::Upload, bytes)?;
        let record = UploadRecord::decode_from(&mut r)?;
        let mac = r.array()?;
        r.finish()?;
        Ok(Self {
            from,
            to,
            record,
            mac,
        })
    }
}

impl AccessRequest {
    pub fn signed_body(&self) -> Vec<u8> {
        self.body().finish()
    }

    fn body(&self) -> Writer {
        let mut w = start(MessageKind::AccessRequest, &self.user, &self.to);
        self.certificate.encode_into(&mut w);
        w.strs(&self.attributes)
            .u64(self.from_window)
            .u64(self.counter);
        w
    }

    pub fn encode(&self) -> Vec<u8> {
        authed(self.body(), &self.signature)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        let (mut r, user, to) = open(MessageKind::AccessRequest, bytes)?;
        let certificate = Certificate::decode_from(&mut r)?;
        let attributes = r.strings()?;
        let from_window = r.u64()?;
        let counter = r.u64()?;
        let signature = r.array()?;
        r.finish()?;
        Ok(Self {
            user,
            to,
            certificate,
            attributes,
            from_window,
            counter,
            signature,
        })
    }
}

impl AccessResponse {
    pub fn encode(&self) -> Vec<u8> {
        let mut w = start(MessageKind::AccessResponse, &self.from, &self.to);
        match &self.outcome {
            AccessOutcome::Granted(records) => {
                w.u8(0).u32(records.len() as u32);
                for rec in records {
                    rec.encode_into(&mut w);
                }
            }
            AccessOutcome::Denied(reason) => {
                w.u8(reason.code());
            }
        }
        w.finish()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        let (mut r, from, to) = open(MessageKind::AccessResponse, bytes)?;
        let outcome = match r.u8()? {
            0 => {
                let n = r.count()?;
                let mut records = Vec::with_capacity(n);
                for _ in 0..n {
                    records.push(UploadRecord::decode_from(&mut r)?);
                }
                AccessOutcome::Granted(records)
            }
            code => AccessOutcome::Denied(
                DenyReason::from_code(code).ok_or(WireError::Invalid("deny reason"))?,
            ),
        };
        r.finish()?;
        Ok(Self { from, to, outcome })
    }
}

impl Message {
    pub fn kind(&self) -> MessageKind {
        match self {
            Message::Hello(_) => MessageKind::Hello,
            Message::HelloReply(_) => MessageKind::HelloReply,
            Message::Provision(_) => MessageKind::Provision,
            Message::Escrow(_) => MessageKind::Escrow,
            Message::RegisterRequest(_) => MessageKind::RegisterRequest,
            Message::RegisterResponse(_) => MessageKind::RegisterResponse,
            Message::SensorData(_) => MessageKind::SensorData,
            Message::TokenAck(_) => MessageKind::TokenAck,
            Message::Upload(_) => MessageKind::Upload,
            Message::AccessRequest(_) => MessageKind::AccessRequest,
            Message::AccessResponse(_) => MessageKind::AccessResponse,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        match self {
            Message::Hello(m) => m.encode(),
            Message::HelloReply(m) => m.encode(),
            Message::Provision(m) => m.encode(),
            Message::Escrow(m) => m.encode(),
            Message::RegisterRequest(m) => m.encode(),
            Message::RegisterResponse(m) => m.encode(),
            Message::SensorData(m) => m.encode(),
            Message::TokenAck(m) => m.encode(),
            Message::Upload(m) => m.encode(),
            Message::AccessRequest(m) => m.encode(),
            Message::AccessResponse(m) => m.encode(),
        }
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        let kind = MessageKind::of(bytes).ok_or(WireError::UnexpectedTag(
            bytes.first().copied().unwrap_or(0),
        ))?;
        Ok(match kind {
            MessageKind::Hello => Message::Hello(Hello::decode(bytes)?),
            MessageKind::HelloReply => Message::HelloReply(HelloReply::decode(bytes)?),
            MessageKind::Provision => Message::Provision(Provision::decode(bytes)?),
            MessageKind::Escrow => Message::Escrow(Escrow::decode(bytes)?),
            MessageKind::RegisterRequest => {
                Message::RegisterRequest(RegisterRequest::decode(bytes)?)
            }
            MessageKind::RegisterResponse => {
                Message::RegisterResponse(RegisterResponse::decode(bytes)?)
            }
            MessageKind::SensorData => Message::SensorData(SensorData::decode(bytes)?),
            MessageKind::TokenAck => Message::TokenAck(TokenAck::decode(bytes)?),
            MessageKind::Upload => Message::Upload(Upload::decode(bytes)?),
            MessageKind::AccessRequest => Message::AccessRequest(AccessRequest::decode(bytes)?),
            MessageKind::AccessResponse => Message::AccessResponse(AccessResponse::decode(bytes)?),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::HashDigest;

    fn token() -> TrustToken {
        TrustToken {
            root: HashDigest([7; 32]),
            epoch: 3,
        }
    }

    fn record() -> UploadRecord {
        UploadRecord {
            wnc: "wnc".into(),
            window: 2,
            attributes: vec!["vital".into(), "zoneA".into()],
            receivers: vec!["alice".into()],
            header: vec![1, 2, 3],
            abe: vec![4; 40],
            entries: vec![SensorEntry {
                sensor: "w1".into(),
                key_epoch: 2,
                ciphertext: vec![9; 20],
            }],
        }
    }

    #[test]
    fn tags_are_unique_and_named() {
        for k in MessageKind::ALL {
            assert_eq!(MessageKind::from_tag(k.tag()), Some(k));
            assert_eq!(MessageKind::from_name(k.name()), Some(k));
        }
        assert_eq!(MessageKind::from_tag(0x04), None);
    }

    #[test]
    fn mac_is_last_and_excluded_from_body() {
        let m = SensorData {
            from: "w1".into(),
            to: "wnc".into(),
            key_epoch: 0,
            window: 0,
            ciphertext: vec![1, 2, 3],
            token: token(),
            mac: [0xAB; 32],
        };
        let bytes = m.encode();
        assert_eq!(&bytes[..bytes.len() - 32], m.mac_body().as_slice());
        assert_eq!(&bytes[bytes.len() - 32..], &[0xAB; 32]);
        assert_eq!(bytes[0], 0x08);
    }

    #[test]
    fn roundtrip_every_kind() {
        let msgs = vec![
            Message::Hello(Hello {
                from: "w1".into(),
                to: "wnc".into(),
                public_key: vec![2; 33],
                nonce: [1; 16],
            }),
            Message::Upload(Upload {
                from: "wnc".into(),
                to: "csp".into(),
                record: record(),
                mac: [5; 32],
            }),
            Message::RegisterResponse(RegisterResponse {
                from: "csp".into(),
                to: "alice".into(),
                abe_public: vec![1],
                delegation: vec![2],
                ibbe_public: vec![3],
                receivers: vec!["alice".into()],
                header: vec![4],
                sealed_key: vec![5],
                sealed_identity: None,
                signature: [6; 64],
            }),
            Message::AccessResponse(AccessResponse {
                from: "csp".into(),
                to: "alice".into(),
                outcome: AccessOutcome::Granted(vec![record(), record()]),
            }),
            Message::AccessResponse(AccessResponse {
                from: "csp".into(),
                to: "alice".into(),
                outcome: AccessOutcome::Denied(DenyReason::Replay),
            }),
            Message::TokenAck(TokenAck {
                from: "wnc".into(),
                to: "w1".into(),
                token: token(),
                mac: [8; 32],
            }),
        ];
        for m in msgs {
            let bytes = m.encode();
            assert_eq!(Message::decode(&bytes).unwrap(), m);
            assert!(Message::decode(&bytes[..bytes.len() - 1]).is_err());
        }
    }
}
