use std::fmt;

use rand_chacha::ChaCha20Rng;
use thiserror::Error;

use super::messages::{
    AccessOutcome, AccessRequest, AccessResponse, DenyReason, RegisterRequest, RegisterResponse,
    UploadRecord,
};
use super::{
    entity_rng, mask_label, sensor_aad, sensor_nonce, xor32, Delivery, Envelope, Message, Reject,
};
use crate::abe::{AbeCiphertext, AbeDecryptionKey, AbeDelegationKey, AbeError, AbePublicKey};
use crate::crypto::{
    ecdh_keygen, AgreementKeyPair, AgreementPublicKey, Certificate, Signature, SignatureKeyPair,
    SymKey, VerificationKey,
};
use crate::ibbe::{BroadcastHeader, BroadcastKey, IbbeError, IbbePublicKey, IdentityKey};
use crate::metrics::Meter;
use crate::wire::{Reader, Writer};

/// Why a user could not open a record it was given.
#[derive(Debug, Error, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AccessError {
    #[error("attribute policy not satisfied")]
    PolicyNotSatisfied,
    #[error("not in the receiver set")]
    NotAReceiver,
    #[error("neither policy nor receiver set admit this user")]
    NoRights,
    #[error("record failed to decrypt")]
    Corrupt,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Recovered {
    pub window: u64,
    pub sensor: String,
    pub plaintext: Vec<u8>,
}

#[derive(Clone)]
pub struct User {
    name: String,
    csp: String,
    agreement: AgreementKeyPair,
    signing: SignatureKeyPair,
    certificate: Option<Certificate>,
    csp_key: Option<VerificationKey>,
    rng: ChaCha20Rng,
    counter: u64,
    /// A registration request is outstanding.
    awaiting: bool,
    abe_public: Option<AbePublicKey>,
    key: Option<AbeDecryptionKey>,
    identity: Option<IdentityKey>,
    ibbe_public: Option<IbbePublicKey>,
    cached: Option<(Vec<u8>, BroadcastKey)>,
    next_window: u64,
    recovered: Vec<Recovered>,
    failures: Vec<(u64, AccessError)>,
    denials: Vec<DenyReason>,
    pub meter: Meter,
}

impl fmt::Debug for User {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("User")
            .field("name", &self.name)
            .field("registered", &self.key.is_some())
            .field("member", &self.identity.is_some())
            .finish_non_exhaustive()
    }
}

impl User {
    pub fn new(name: &str, csp: &str, seed: u64) -> Self {
        let mut rng = entity_rng(seed, name);
        let agreement = ecdh_keygen(&mut rng);
        let signing = SignatureKeyPair::generate(&mut rng);
        Self {
            name: name.to_string(),
            csp: csp.to_string(),
            agreement,
            signing,
            certificate: None,
            csp_key: None,
            rng,
            counter: 0,
            awaiting: false,
            abe_public: None,
            key: None,
            identity: None,
            ibbe_public: None,
            cached: None,
            next_window: 0,
            recovered: Vec::new(),
            failures: Vec::new(),
            denials: Vec::new(),
            meter: Meter::new(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Long-term key that escrowed secrets are wrapped to.
    pub fn wrap_key(&self) -> &AgreementPublicKey {
        self.agreement.public()
    }

    pub fn verification_key(&self) -> VerificationKey {
        self.signing.verification_key()
    }

    pub fn set_certificate(&mut self, cert: Certificate) {
        self.certificate = Some(cert);
    }

    pub fn certificate(&self) -> Option<&Certificate> {
        self.certificate.as_ref()
    }

    /// Pins the cloud's signing key after checking its certificate.
    pub fn pin_csp(&mut self, cert: &Certificate, ca: &VerificationKey) -> bool {
        self.meter.count(crate::metrics::Op::Ver, 1);
        if cert.subject != self.csp || !cert.verify(ca) {
            return false;
        }
        self.csp_key = Some(cert.subject_key.clone());
        true
    }

    pub fn is_registered(&self) -> bool {
        self.key.is_some()
    }

    pub fn is_member(&self) -> bool {
        self.identity.is_some()
    }

    pub fn decryption_key(&self) -> Option<&AbeDecryptionKey> {
        self.key.as_ref()
    }

    pub fn recovered(&self) -> &[Recovered] {
        &self.recovered
    }

    pub fn failures(&self) -> &[(u64, AccessError)] {
        &self.failures
    }

    pub fn denials(&self) -> &[DenyReason] {
        &self.denials
    }

    pub fn register_request(&mut self) -> Envelope {
        self.counter += 1;
        self.awaiting = true;
        let mut req = RegisterRequest {
            user: self.name.clone(),
            to: self.csp.clone(),
            counter: self.counter,
            signature: [0; 64],
        };
        req.signature = self.meter.sign(&self.signing, &req.signed_body()).0;
        Envelope::new(&self.name, &self.csp, &Message::RegisterRequest(req))
    }

    /// Asks for every record carrying all of `attributes` that this user has
    /// not yet seen.
    pub fn access_request(&mut self, attributes: &[String]) -> Option<Envelope> {
        let certificate = self.certificate.clone()?;
        self.counter += 1;
        let mut req = AccessRequest {
            user: self.name.clone(),
            to: self.csp.clone(),
            certificate,
            attributes: attributes.to_vec(),
            from_window: self.next_window,
            counter: self.counter,
            signature: [0; 64],
        };
        req.signature = self.meter.sign(&self.signing, &req.signed_body()).0;
        Some(Envelope::new(
            &self.name,
            &self.csp,
            &Message::AccessRequest(req),
        ))
    }

    pub fn deliver(&mut self, bytes: &[u8]) -> Delivery {
        match Message::decode(bytes) {
            Ok(Message::RegisterResponse(m)) => self.on_register(m),
            Ok(Message::AccessResponse(m)) => self.on_access(m),
            Ok(_) => Delivery::rejected(Reject::Unexpected),
            Err(_) => Delivery::rejected(Reject::Malformed),
        }
    }

    fn on_register(&mut self, m: RegisterResponse) -> Delivery {
        let Some(csp_key) = self.csp_key.clone() else {
            return Delivery::rejected(Reject::Unexpected);
        };
        if m.from != self.csp
            || m.to != self.name
            || !self
                .meter
                .verify(&csp_key, &m.signed_body(), &Signature(m.signature))
        {
            return Delivery::rejected(Reject::SignatureFailure);
        }
        if !self.awaiting {
            return Delivery::rejected(Reject::Duplicate);
        }
        let parsed = (|| {
            let pk = AbePublicKey::from_bytes(&m.abe_public).ok()?;
            let dk = AbeDelegationKey::from_bytes(&m.delegation).ok()?;
            let ipk = IbbePublicKey::from_bytes(&m.ibbe_public).ok()?;
            let hdr = BroadcastHeader::from_bytes(&m.header).ok()?;
            Some((pk, dk, ipk, hdr))
        })();
        let Some((pk, dk, ipk, hdr)) = parsed else {
            return Delivery::rejected(Reject::Malformed);
        };
        let Some(issued) = self
            .meter
            .pke_decrypt(&self.agreement, &m.sealed_key)
            .ok()
            .and_then(|b| AbeDecryptionKey::from_bytes(&b).ok())
        else {
            return Delivery::rejected(Reject::Unusable);
        };
        let Ok(key) = self.meter.abe_rerandomize(&issued, &dk, &mut self.rng) else {
            return Delivery::rejected(Reject::Unusable);
        };
        let mut identity = None;
        let mut cached = None;
        if let Some(ct) = &m.sealed_identity {
            let Some(sk) = self
                .meter
                .pke_decrypt(&self.agreement, ct)
                .ok()
                .and_then(|b| IdentityKey::from_bytes(&b).ok())
            else {
                return Delivery::rejected(Reject::Unusable);
            };
            let Ok(bk) = self
                .meter
                .ibbe_dec(&m.receivers, &self.name, &sk, &hdr, &ipk)
            else {
                return Delivery::rejected(Reject::Unusable);
            };
            cached = Some((m.header.clone(), bk));
            identity = Some(sk);
        }
        self.awaiting = false;
        self.abe_public = Some(pk);
        self.key = Some(key);
        self.identity = identity;
        self.cached = cached;
        self.ibbe_public = Some(ipk);
        Delivery::accepted(Vec::new())
    }

    fn on_access(&mut self, m: AccessResponse) -> Delivery {
        if m.from != self.csp || m.to != self.name {
            return Delivery::rejected(Reject::UnknownPeer);
        }
        match m.outcome {
            AccessOutcome::Denied(reason) => {
                self.denials.push(reason);
                Delivery::accepted(Vec::new())
            }
            AccessOutcome::Granted(records) => {
                for record in &records {
                    self.next_window = self.next_window.max(record.window + 1);
                    match self.open_record(record) {
                        Ok(found) => self.recovered.extend(found),
                        Err(e) => self.failures.push((record.window, e)),
                    }
                }
                Delivery::accepted(Vec::new())
            }
        }
    }

    /// Opens one record: attribute layer, then broadcast layer, then the
    /// sensor ciphertexts.
    pub fn open_record(&mut self, record: &UploadRecord) -> Result<Vec<Recovered>, AccessError> {
        let key = self.key.as_ref().ok_or(AccessError::NoRights)?;
        let member = self.identity.is_some() && record.receivers.iter().any(|r| *r == self.name);
        let ct = AbeCiphertext::from_bytes(&record.abe).map_err(|_| AccessError::Corrupt)?;
        let payload = match (self.meter.abe_decrypt(&ct, key), member) {
            (Err(AbeError::PolicyNotSatisfied), false) => return Err(AccessError::NoRights),
            (Err(AbeError::PolicyNotSatisfied), true) => {
                return Err(AccessError::PolicyNotSatisfied)
            }
            (Err(_), _) => return Err(AccessError::Corrupt),
            (Ok(_), false) => return Err(AccessError::NotAReceiver),
            (Ok(p), true) => p,
        };
        let bk = self.broadcast_key(record)?;
        let masked = parse_masked(&payload, record.entries.len()).ok_or(AccessError::Corrupt)?;
        let mut out = Vec::with_capacity(masked.len());
        for (entry, m) in record.entries.iter().zip(masked) {
            let pad = self.meter.kdf(
                bk.key().as_bytes(),
                &mask_label(&record.wnc, &entry.sensor, entry.key_epoch, record.window),
            );
            let h = SymKey(xor32(&m, pad.as_bytes()));
            let plaintext = self
                .meter
                .open(
                    &h,
                    &sensor_nonce(record.window),
                    &entry.ciphertext,
                    &sensor_aad(&entry.sensor, entry.key_epoch, record.window),
                )
                .map_err(|_| AccessError::Corrupt)?;
            out.push(Recovered {
                window: record.window,
                sensor: entry.sensor.clone(),
                plaintext,
            });
        }
        Ok(out)
    }

    fn broadcast_key(&mut self, record: &UploadRecord) -> Result<BroadcastKey, AccessError> {
        if let Some((hdr, bk)) = &self.cached {
            if *hdr == record.header {
                return Ok(*bk);
            }
        }
        let (Some(sk), Some(ipk)) = (self.identity.as_ref(), self.ibbe_public.as_ref()) else {
            return Err(AccessError::NotAReceiver);
        };
        let hdr = BroadcastHeader::from_bytes(&record.header).map_err(|_| AccessError::Corrupt)?;
        let bk = self
            .meter
            .ibbe_dec(&record.receivers, &self.name, sk, &hdr, ipk)
            .map_err(|e| match e {
                IbbeError::NotAReceiver => AccessError::NotAReceiver,
                _ => AccessError::Corrupt,
            })?;
        self.cached = Some((record.header.clone(), bk));
        Ok(bk)
    }

    /// Everything the user holds, for leak audits.
    pub fn state_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.str(&self.name)
            .bytes(&self.agreement.secret_bytes())
            .bytes(&self.signing.secret_bytes());
        if let Some(k) = &self.key {
            w.bytes(&k.to_bytes());
        }
        if let Some(sk) = &self.identity {
            w.bytes(&sk.to_bytes());
        }
        if let Some((hdr, bk)) = &self.cached {
            w.bytes(hdr).fixed(bk.key().as_bytes());
        }
        for r in &self.recovered {
            w.u64(r.window).str(&r.sensor).bytes(&r.plaintext);
        }
        w.finish()
    }
}

fn parse_masked(payload: &[u8], expected: usize) -> Option<Vec<[u8; 32]>> {
    let mut r = Reader::new(payload);
    let n = r.u32().ok()? as usize;
    if n != expected {
        return None;
    }
    let out = (0..n)
        .map(|_| r.array::<32>().ok())
        .collect::<Option<Vec<_>>>()?;
    r.finish().ok()?;
    Some(out)
}
