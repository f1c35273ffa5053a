use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use rand_chacha::ChaCha20Rng;

use super::messages::{
    AccessOutcome, AccessRequest, AccessResponse, DenyReason, Escrow, Hello, HelloReply,
    RegisterRequest, RegisterResponse, Upload, UploadRecord,
};
use super::wnc::escrow_aad;
use super::{
    confirm_tag, derive_link, entity_rng, fresh_nonce, Delivery, Envelope, Link, Message,
    ProtocolError, Reject, NONCE_ESCROW,
};
use crate::abe::{AbeDelegationKey, AbeMasterKey, AbePublicKey, AccessTree};
use crate::crypto::{
    ecdh_keygen, AgreementKeyPair, AgreementPublicKey, Certificate, Nonce, Signature,
    SignatureKeyPair, VerificationKey,
};
use crate::ibbe::{BroadcastHeader, IbbePublicKey};
use crate::metrics::Meter;
use crate::trust::{
    csp_evaluate, csp_record_event, Decision, EntityTrustRecord, EventKind, TrustEvaluator,
    TrustEvent, TrustPolicy,
};
use crate::wire::Writer;

/// Material received in the escrow message.
#[derive(Debug, Clone)]
struct Escrowed {
    abe_public: AbePublicKey,
    master: AbeMasterKey,
    delegation: Vec<u8>,
    ibbe_public: Vec<u8>,
    receivers: Vec<String>,
    header: Vec<u8>,
    /// Identity keys, still wrapped to their users.
    identity_keys: BTreeMap<String, Vec<u8>>,
}

/// The cloud provider: stores uploads, issues data-attribute keys from the
/// partial master key and gates access on trust.
#[derive(Clone)]
pub struct Csp {
    name: String,
    agreement: AgreementKeyPair,
    signing: SignatureKeyPair,
    rng: ChaCha20Rng,
    ca_key: Option<VerificationKey>,
    wnc: Option<(String, AgreementPublicKey)>,
    link: Option<Link>,
    escrowed: Option<Escrowed>,
    certs: BTreeMap<String, Certificate>,
    wrap_keys: BTreeMap<String, AgreementPublicKey>,
    policies: BTreeMap<String, AccessTree>,
    user_list: BTreeSet<String>,
    counters: BTreeMap<String, u64>,
    records: Vec<UploadRecord>,
    trust: BTreeMap<String, EntityTrustRecord<f64>>,
    evaluator: Arc<dyn TrustEvaluator<f64> + Send + Sync>,
    pub meter: Meter,
}

impl fmt::Debug for Csp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Csp")
            .field("name", &self.name)
            .field("user_list", &self.user_list)
            .field("records", &self.records.len())
            .finish_non_exhaustive()
    }
}

impl Csp {
    pub fn new(name: &str, policies: BTreeMap<String, AccessTree>, seed: u64) -> Self {
        Self::with_evaluator(name, policies, Arc::new(TrustPolicy::default()), seed)
    }

    pub fn with_evaluator(
        name: &str,
        policies: BTreeMap<String, AccessTree>,
        evaluator: Arc<dyn TrustEvaluator<f64> + Send + Sync>,
        seed: u64,
    ) -> Self {
        let mut rng = entity_rng(seed, name);
        let agreement = ecdh_keygen(&mut rng);
        let signing = SignatureKeyPair::generate(&mut rng);
        Self {
            name: name.to_string(),
            agreement,
            signing,
            rng,
            ca_key: None,
            wnc: None,
            link: None,
            escrowed: None,
            certs: BTreeMap::new(),
            wrap_keys: BTreeMap::new(),
            policies,
            user_list: BTreeSet::new(),
            counters: BTreeMap::new(),
            records: Vec::new(),
            trust: BTreeMap::new(),
            evaluator,
            meter: Meter::new(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn public_key(&self) -> &AgreementPublicKey {
        self.agreement.public()
    }

    pub fn verification_key(&self) -> VerificationKey {
        self.signing.verification_key()
    }

    pub fn pin_ca(&mut self, key: VerificationKey) {
        self.ca_key = Some(key);
    }

    pub fn pin_wnc(&mut self, name: &str, key: AgreementPublicKey) {
        self.wnc = Some((name.to_string(), key));
        self.trust
            .insert(name.to_string(), EntityTrustRecord::new(name));
    }

    /// Checks the user's certificate against the root and pins it.
    pub fn enroll_user(&mut self, cert: Certificate, wrap_key: AgreementPublicKey) -> bool {
        let Some(ca) = &self.ca_key else {
            return false;
        };
        self.meter.count(crate::metrics::Op::Ver, 1);
        if !cert.verify(ca) {
            return false;
        }
        let name = cert.subject.clone();
        self.trust
            .insert(name.clone(), EntityTrustRecord::new(name.as_str()));
        self.wrap_keys.insert(name.clone(), wrap_key);
        self.certs.insert(name, cert);
        true
    }

    pub fn user_list(&self) -> &BTreeSet<String> {
        &self.user_list
    }

    pub fn records(&self) -> &[UploadRecord] {
        &self.records
    }

    pub fn trust_records(&self) -> &BTreeMap<String, EntityTrustRecord<f64>> {
        &self.trust
    }

    pub fn abe_public(&self) -> Option<&AbePublicKey> {
        self.escrowed.as_ref().map(|e| &e.abe_public)
    }

    /// The partial master key held by the cloud.
    pub fn partial_master(&self) -> Option<&AbeMasterKey> {
        self.escrowed.as_ref().map(|e| &e.master)
    }

    pub fn escrowed_identity_count(&self) -> usize {
        self.escrowed.as_ref().map_or(0, |e| e.identity_keys.len())
    }

    pub fn deliver(&mut self, from: &str, bytes: &[u8]) -> Delivery {
        match Message::decode(bytes) {
            Ok(Message::Hello(m)) => self.on_hello(m),
            Ok(Message::Escrow(m)) => self.on_escrow(m),
            Ok(Message::RegisterRequest(m)) => self.on_register(m),
            Ok(Message::Upload(m)) => self.on_upload(m),
            Ok(Message::AccessRequest(m)) => self.on_access(m),
            Ok(_) => Delivery::rejected(Reject::Unexpected),
            Err(_) => {
                self.record(from, EventKind::MalformedRequest);
                Delivery::rejected(Reject::Malformed)
            }
        }
    }

    fn record(&mut self, entity: &str, kind: EventKind) {
        if let Some(rec) = self.trust.get_mut(entity) {
            csp_record_event(self.evaluator.as_ref(), rec, TrustEvent::new(kind, 0));
        }
    }

    fn granted(&self, entity: &str) -> bool {
        self.trust
            .get(entity)
            .is_some_and(|r| csp_evaluate(self.evaluator.as_ref(), r) == Decision::Grant)
    }

    fn on_hello(&mut self, m: Hello) -> Delivery {
        let Some((wnc, pinned)) = self.wnc.clone() else {
            return Delivery::rejected(Reject::Unexpected);
        };
        if m.from != wnc || m.to != self.name || m.public_key != pinned.to_bytes() {
            return Delivery::rejected(Reject::HandshakeFailure);
        }
        let nr = fresh_nonce(&mut self.rng);
        let Ok(link) = derive_link(
            &mut self.meter,
            &self.agreement,
            &pinned,
            &wnc,
            &self.name,
            &m.nonce,
            &nr,
        ) else {
            return Delivery::rejected(Reject::HandshakeFailure);
        };
        let confirm = confirm_tag(&mut self.meter, &link, &wnc, &self.name, &m.nonce, &nr);
        self.link = Some(link);
        let reply = Message::HelloReply(HelloReply {
            from: self.name.clone(),
            to: wnc.clone(),
            public_key: self.agreement.public().to_bytes(),
            nonce: nr,
            confirm: confirm.0,
        });
        Delivery::accepted(vec![Envelope::new(&self.name, &wnc, &reply)])
    }

    fn on_escrow(&mut self, m: Escrow) -> Delivery {
        let (Some(link), Some((wnc, _))) = (self.link.clone(), self.wnc.clone()) else {
            return Delivery::rejected(Reject::Unexpected);
        };
        // one escrow per deployment, sealed under a fixed nonce
        if self.escrowed.is_some() {
            return Delivery::rejected(Reject::Duplicate);
        }
        if m.from != wnc || !self.meter.hmac_verify(&link.mac, &m.mac_body(), &m.mac) {
            self.record(&wnc, EventKind::HmacFailure);
            return Delivery::rejected(Reject::IntegrityFailure);
        }
        let Ok(master) = self.meter.open(
            &link.enc,
            &Nonce::counter(NONCE_ESCROW, 0),
            &m.sealed_master,
            &escrow_aad(&m.from, &m.to),
        ) else {
            self.record(&wnc, EventKind::HmacFailure);
            return Delivery::rejected(Reject::IntegrityFailure);
        };
        let parsed = (|| {
            let master = AbeMasterKey::from_bytes(&master).ok()?;
            let abe_public = AbePublicKey::from_bytes(&m.abe_public).ok()?;
            AbeDelegationKey::from_bytes(&m.delegation).ok()?;
            IbbePublicKey::from_bytes(&m.ibbe_public).ok()?;
            BroadcastHeader::from_bytes(&m.header).ok()?;
            Some((master, abe_public))
        })();
        let Some((master, abe_public)) = parsed else {
            self.record(&wnc, EventKind::MalformedRequest);
            return Delivery::rejected(Reject::Malformed);
        };
        self.escrowed = Some(Escrowed {
            abe_public,
            master,
            delegation: m.delegation,
            ibbe_public: m.ibbe_public,
            receivers: m.receivers,
            header: m.header,
            identity_keys: m.identity_keys.into_iter().collect(),
        });
        Delivery::accepted(Vec::new())
    }

    fn on_register(&mut self, m: RegisterRequest) -> Delivery {
        let (Some(cert), Some(policy)) = (self.certs.get(&m.user), self.policies.get(&m.user))
        else {
            return Delivery::rejected(Reject::UnknownId);
        };
        let (cert, policy) = (cert.clone(), policy.clone());
        let Some(escrowed) = self.escrowed.clone() else {
            return Delivery::rejected(Reject::Unexpected);
        };
        if m.to != self.name
            || !self
                .meter
                .verify(&cert.subject_key, &m.signed_body(), &Signature(m.signature))
        {
            self.record(&m.user, EventKind::SignatureFailure);
            return Delivery::rejected(Reject::SignatureFailure);
        }
        // registration and access requests share one counter per user
        if self.counters.get(&m.user).is_some_and(|c| m.counter <= *c) {
            return Delivery::rejected(Reject::Duplicate);
        }
        self.counters.insert(m.user.clone(), m.counter);
        if !self.granted(&m.user) {
            return Delivery::rejected(Reject::Untrusted);
        }
        let Ok(key) = self
            .meter
            .abe_keygen(&policy, &escrowed.master, &mut self.rng)
        else {
            return Delivery::rejected(Reject::UnknownId);
        };
        let wrap_to = self.wrap_keys[&m.user].clone();
        let sealed_key = self
            .meter
            .pke_encrypt(&wrap_to, &key.to_bytes(), &mut self.rng);
        let mut resp = RegisterResponse {
            from: self.name.clone(),
            to: m.user.clone(),
            abe_public: escrowed.abe_public.to_bytes(),
            delegation: escrowed.delegation.clone(),
            ibbe_public: escrowed.ibbe_public.clone(),
            receivers: escrowed.receivers.clone(),
            header: escrowed.header.clone(),
            sealed_key,
            sealed_identity: escrowed.identity_keys.get(&m.user).cloned(),
            signature: [0; 64],
        };
        resp.signature = self.meter.sign(&self.signing, &resp.signed_body()).0;
        self.user_list.insert(m.user.clone());
        Delivery::accepted(vec![Envelope::new(
            &self.name,
            &m.user,
            &Message::RegisterResponse(resp),
        )])
    }

    fn on_upload(&mut self, m: Upload) -> Delivery {
        let (Some(link), Some((wnc, _))) = (self.link.clone(), self.wnc.clone()) else {
            return Delivery::rejected(Reject::Unexpected);
        };
        if m.from != wnc || !self.meter.hmac_verify(&link.mac, &m.mac_body(), &m.mac) {
            self.record(&wnc, EventKind::HmacFailure);
            return Delivery::rejected(Reject::IntegrityFailure);
        }
        // windows only move forward, so anything not newer is a replay
        if self
            .records
            .last()
            .is_some_and(|r| m.record.window <= r.window)
        {
            return Delivery::rejected(Reject::Duplicate);
        }
        if !self.granted(&wnc) {
            return Delivery::rejected(Reject::Untrusted);
        }
        self.records.push(m.record);
        Delivery::accepted(Vec::new())
    }

    fn deny(&self, user: &str, reason: DenyReason, reject: Reject) -> Delivery {
        let msg = Message::AccessResponse(AccessResponse {
            from: self.name.clone(),
            to: user.to_string(),
            outcome: AccessOutcome::Denied(reason),
        });
        Delivery {
            verdict: Err(reject),
            replies: vec![Envelope::new(&self.name, user, &msg)],
        }
    }

    fn on_access(&mut self, m: AccessRequest) -> Delivery {
        let Some(pinned) = self.certs.get(&m.user).cloned() else {
            return Delivery::rejected(Reject::UnknownId);
        };
        if m.certificate != pinned {
            self.record(&m.user, EventKind::SignatureFailure);
            return self.deny(
                &m.user,
                DenyReason::BadCertificate,
                Reject::SignatureFailure,
            );
        }
        if !self.meter.verify(
            &pinned.subject_key,
            &m.signed_body(),
            &Signature(m.signature),
        ) {
            self.record(&m.user, EventKind::SignatureFailure);
            return self.deny(&m.user, DenyReason::BadSignature, Reject::SignatureFailure);
        }
        if self.counters.get(&m.user).is_some_and(|c| m.counter <= *c) {
            return self.deny(&m.user, DenyReason::Replay, Reject::Duplicate);
        }
        self.counters.insert(m.user.clone(), m.counter);
        if !self.user_list.contains(&m.user) {
            return self.deny(&m.user, DenyReason::NotRegistered, Reject::UnknownId);
        }
        if !self.granted(&m.user) {
            return self.deny(&m.user, DenyReason::Untrusted, Reject::Untrusted);
        }
        let wanted: BTreeSet<&str> = m.attributes.iter().map(String::as_str).collect();
        let records: Vec<UploadRecord> = self
            .records
            .iter()
            .filter(|r| r.window >= m.from_window)
            .filter(|r| {
                let have: BTreeSet<&str> = r.attributes.iter().map(String::as_str).collect();
                wanted.is_subset(&have)
            })
            .cloned()
            .collect();
        let msg = Message::AccessResponse(AccessResponse {
            from: self.name.clone(),
            to: m.user.clone(),
            outcome: AccessOutcome::Granted(records),
        });
        Delivery::accepted(vec![Envelope::new(&self.name, &m.user, &msg)])
    }

    /// Reports an entity for abuse; feeds its trust record like any other
    /// event. Severity must lie in `(0, 1]`.
    pub fn report_abuse(&mut self, entity: &str, severity: f64) -> Result<(), ProtocolError> {
        let event = TrustEvent::with_severity(EventKind::ReportedAbuse, severity, 0)?;
        let rec = self
            .trust
            .get_mut(entity)
            .ok_or_else(|| ProtocolError::UnknownPeer(entity.to_string()))?;
        csp_record_event(self.evaluator.as_ref(), rec, event);
        Ok(())
    }

    pub fn ledger_lines(&self) -> Vec<String> {
        self.trust
            .values()
            .map(EntityTrustRecord::ledger_line)
            .collect()
    }

    /// Everything the cloud holds, for key-separation and leak audits.
    pub fn state_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.str(&self.name)
            .bytes(&self.agreement.secret_bytes())
            .bytes(&self.signing.secret_bytes());
        if let Some(link) = &self.link {
            link.encode_into(&mut w);
        }
        if let Some(e) = &self.escrowed {
            w.bytes(&e.abe_public.to_bytes())
                .bytes(&e.master.to_bytes())
                .bytes(&e.delegation)
                .bytes(&e.ibbe_public)
                .strs(&e.receivers)
                .bytes(&e.header);
            for (id, ct) in &e.identity_keys {
                w.str(id).bytes(ct);
            }
        }
        for cert in self.certs.values() {
            w.bytes(&cert.to_bytes());
        }
        for (user, policy) in &self.policies {
            w.str(user).str(&policy.to_string());
        }
        w.strs(&self.user_list.iter().collect::<Vec<_>>());
        for r in &self.records {
            r.encode_into(&mut w);
        }
        for line in self.ledger_lines() {
            w.str(&line);
        }
        w.finish()
    }
}
