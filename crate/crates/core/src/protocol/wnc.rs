use std::collections::{BTreeMap, BTreeSet};

use rand_chacha::ChaCha20Rng;

use super::messages::{
    Escrow, Hello, HelloReply, Provision, SensorData, SensorEntry, TokenAck, Upload, UploadRecord,
    NONCE_BYTES,
};
use super::sensor::provision_aad;
use super::{
    confirm_tag, derive_link, entity_rng, fresh_nonce, mask_label, sensor_aad, sensor_nonce, xor32,
    Delivery, Envelope, Link, Message, ProtocolError, Reject, NONCE_ESCROW, NONCE_PROVISION,
};
use crate::abe::{AbeMasterKey, AbePublicKey, AttributeUniverse};
use crate::crypto::{
    ct_eq, ecdh_keygen, AgreementKeyPair, AgreementPublicKey, ChainCursor, HashDigest, Nonce,
    SymKey,
};
use crate::group::SECURITY_BITS;
use crate::ibbe::{
    BroadcastHeader, BroadcastKey, IbbeMasterKey, IbbeParams, IbbePublicKey, IdentityKey,
};
use crate::metrics::Meter;
use crate::trust::{
    apply_penalty, compute_score, is_trusted, max_score, EventKind, TrustEvent, TrustFactors,
    TrustMerkleTree, TrustPolicy,
};
use crate::wire::Writer;

/// Longest identity the broadcast scheme accepts.
pub const MAX_ID_BYTES: usize = 64;

/// Prefix of the identity attributes in the attribute universe.
pub const IDENTITY_PREFIX: &str = "id:";

#[derive(Debug, Clone)]
struct SensorSlot {
    peer: AgreementPublicKey,
    link: Option<Link>,
    cursor: Option<ChainCursor>,
    tree: Option<TrustMerkleTree>,
    factors: TrustFactors<f64>,
    score: f64,
    accepted_window: Option<u64>,
}

/// Snapshot of one sensor's trust state.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorStanding {
    pub factors: TrustFactors<f64>,
    pub score: f64,
    pub epoch: u64,
    pub root: Option<HashDigest>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrustLogEntry {
    pub window: u64,
    pub sensor: String,
    /// `None` for an accepted message.
    pub event: Option<EventKind>,
    pub score: f64,
}

#[derive(Debug, Clone)]
struct Pending {
    entry: SensorEntry,
    key: SymKey,
}

/// The wearable network coordinator: owns the sensors' trust trees, both
/// master keys and the receiver set.
#[derive(Debug, Clone)]
pub struct Wnc {
    name: String,
    csp: String,
    agreement: AgreementKeyPair,
    rng: ChaCha20Rng,
    sensors: BTreeMap<String, SensorSlot>,
    csp_key: Option<AgreementPublicKey>,
    csp_nonce: Option<[u8; NONCE_BYTES]>,
    csp_link: Option<Link>,
    users: BTreeMap<String, AgreementPublicKey>,
    data_attributes: Vec<String>,
    upload_attributes: BTreeSet<String>,
    receivers: Vec<String>,
    chain_length: u64,
    policy: TrustPolicy<f64>,
    abe: Option<(AbePublicKey, AbeMasterKey)>,
    ibbe: Option<(IbbePublicKey, IbbeMasterKey)>,
    identity_keys: BTreeMap<String, IdentityKey>,
    broadcast: Option<(BroadcastHeader, BroadcastKey)>,
    window: u64,
    pending: Vec<Pending>,
    trust_log: Vec<TrustLogEntry>,
    pub meter: Meter,
}

#[derive(Debug, Clone)]
pub struct WncConfig {
    pub chain_length: u64,
    pub receivers: Vec<String>,
    /// Data attributes; the part of the universe the cloud may issue keys for.
    pub data_attributes: Vec<String>,
    /// Attribute set attached to every upload.
    pub upload_attributes: Vec<String>,
    pub policy: TrustPolicy<f64>,
}

impl Wnc {
    pub fn new(name: &str, csp: &str, config: WncConfig, seed: u64) -> Self {
        let mut rng = entity_rng(seed, name);
        let agreement = ecdh_keygen(&mut rng);
        Self {
            name: name.to_string(),
            csp: csp.to_string(),
            agreement,
            rng,
            sensors: BTreeMap::new(),
            csp_key: None,
            csp_nonce: None,
            csp_link: None,
            users: BTreeMap::new(),
            data_attributes: config.data_attributes,
            upload_attributes: config.upload_attributes.into_iter().collect(),
            receivers: config.receivers,
            chain_length: config.chain_length,
            policy: config.policy,
            abe: None,
            ibbe: None,
            identity_keys: BTreeMap::new(),
            broadcast: None,
            window: 0,
            pending: Vec::new(),
            trust_log: Vec::new(),
            meter: Meter::new(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn public_key(&self) -> &AgreementPublicKey {
        self.agreement.public()
    }

    pub fn pin_sensor(&mut self, name: &str, key: AgreementPublicKey) {
        self.sensors.insert(
            name.to_string(),
            SensorSlot {
                peer: key,
                link: None,
                cursor: None,
                tree: None,
                factors: TrustFactors::full(),
                score: max_score(),
                accepted_window: None,
            },
        );
    }

    pub fn pin_csp(&mut self, key: AgreementPublicKey) {
        self.csp_key = Some(key);
    }

    /// Registers a user's long-term wrapping key.
    pub fn enroll_user(&mut self, name: &str, key: AgreementPublicKey) {
        self.users.insert(name.to_string(), key);
    }

    pub fn window(&self) -> u64 {
        self.window
    }

    pub fn policy(&self) -> &TrustPolicy<f64> {
        &self.policy
    }

    pub fn receivers(&self) -> &[String] {
        &self.receivers
    }

    pub fn universe(&self) -> Result<AttributeUniverse, ProtocolError> {
        let labels = self
            .receivers
            .iter()
            .map(|r| format!("{IDENTITY_PREFIX}{r}"))
            .chain(self.data_attributes.iter().cloned());
        Ok(AttributeUniverse::new(labels)?)
    }

    pub fn abe_public(&self) -> Option<&AbePublicKey> {
        self.abe.as_ref().map(|(pk, _)| pk)
    }

    pub fn abe_master(&self) -> Option<&AbeMasterKey> {
        self.abe.as_ref().map(|(_, mk)| mk)
    }

    pub fn ibbe_public(&self) -> Option<&IbbePublicKey> {
        self.ibbe.as_ref().map(|(pk, _)| pk)
    }

    pub fn ibbe_master(&self) -> Option<&IbbeMasterKey> {
        self.ibbe.as_ref().map(|(_, mk)| mk)
    }

    pub fn identity_keys(&self) -> &BTreeMap<String, IdentityKey> {
        &self.identity_keys
    }

    pub fn trust_log(&self) -> &[TrustLogEntry] {
        &self.trust_log
    }

    pub fn standing(&self, sensor: &str) -> Option<SensorStanding> {
        self.sensors.get(sensor).map(|s| SensorStanding {
            factors: s.factors,
            score: s.score,
            epoch: s.tree.as_ref().map_or(0, |t| t.epoch()),
            root: s.tree.as_ref().map(|t| *t.root()),
        })
    }

    /// `h_i` of a provisioned sensor's chain, recomputed from the retained
    /// seed. Not metered.
    pub fn chain_key(&self, sensor: &str, i: u64) -> Option<SymKey> {
        let mut cursor = self.sensors.get(sensor)?.cursor.clone()?;
        cursor.key_at(i).ok().map(|(k, _)| k)
    }

    pub fn sensor_names(&self) -> impl Iterator<Item = &str> {
        self.sensors.keys().map(String::as_str)
    }

    /// ABE setup over identity and data attributes, IBBE setup, identity key
    /// extraction for the receiver set and the broadcast header for it.
    pub fn setup_keys(&mut self) -> Result<(), ProtocolError> {
        let universe = self.universe()?;
        let abe = self
            .meter
            .abe_setup(SECURITY_BITS, &universe, &mut self.rng)?;
        let params = IbbeParams::new(self.receivers.len().max(1), MAX_ID_BYTES);
        let (ipk, imk) = self.meter.ibbe_setup(params, &mut self.rng)?;
        let mut identity_keys = BTreeMap::new();
        for id in &self.receivers {
            identity_keys.insert(id.clone(), self.meter.ibbe_key_ext(&ipk, &imk, id)?);
        }
        let broadcast = self.meter.ibbe_enc(&self.receivers, &ipk, &mut self.rng)?;
        self.abe = Some(abe);
        self.ibbe = Some((ipk, imk));
        self.identity_keys = identity_keys;
        self.broadcast = Some(broadcast);
        Ok(())
    }

    pub fn csp_hello(&mut self) -> Envelope {
        let nonce = fresh_nonce(&mut self.rng);
        self.csp_nonce = Some(nonce);
        let msg = Message::Hello(Hello {
            from: self.name.clone(),
            to: self.csp.clone(),
            public_key: self.agreement.public().to_bytes(),
            nonce,
        });
        Envelope::new(&self.name, &self.csp, &msg)
    }

    pub fn deliver(&mut self, bytes: &[u8]) -> Delivery {
        match Message::decode(bytes) {
            Ok(Message::Hello(m)) => self.on_sensor_hello(m),
            Ok(Message::HelloReply(m)) => self.on_csp_reply(m),
            Ok(Message::SensorData(m)) => self.on_sensor_data(m),
            Ok(_) => Delivery::rejected(Reject::Unexpected),
            Err(_) => Delivery::rejected(Reject::Malformed),
        }
    }

    fn on_sensor_hello(&mut self, m: Hello) -> Delivery {
        let Some(slot) = self.sensors.get_mut(&m.from) else {
            return Delivery::rejected(Reject::UnknownPeer);
        };
        if slot.link.is_some() {
            return Delivery::rejected(Reject::Unexpected);
        }
        if m.to != self.name || m.public_key != slot.peer.to_bytes() {
            return Delivery::rejected(Reject::HandshakeFailure);
        }
        let nr = fresh_nonce(&mut self.rng);
        let Ok(link) = derive_link(
            &mut self.meter,
            &self.agreement,
            &slot.peer,
            &m.from,
            &self.name,
            &m.nonce,
            &nr,
        ) else {
            return Delivery::rejected(Reject::HandshakeFailure);
        };
        let confirm = confirm_tag(&mut self.meter, &link, &m.from, &self.name, &m.nonce, &nr);
        let reply = Message::HelloReply(HelloReply {
            from: self.name.clone(),
            to: m.from.clone(),
            public_key: self.agreement.public().to_bytes(),
            nonce: nr,
            confirm: confirm.0,
        });

        let seed = SymKey::random(&mut self.rng);
        let cursor = ChainCursor::new(seed, self.chain_length).expect("validated chain length");
        let (tree, token) = self
            .meter
            .tree_init(m.from.as_bytes(), max_score::<f64>())
            .expect("sensor names are nonempty");
        let mut plain = Writer::new();
        plain.fixed(seed.as_bytes()).u64(self.chain_length);
        token.encode_into(&mut plain);
        let sealed = self.meter.seal(
            &link.enc,
            &plain.finish(),
            &Nonce::counter(NONCE_PROVISION, 0),
            &provision_aad(&self.name, &m.from),
        );
        let provision = Message::Provision(Provision {
            from: self.name.clone(),
            to: m.from.clone(),
            sealed,
        });
        slot.link = Some(link);
        slot.cursor = Some(cursor);
        slot.tree = Some(tree);
        Delivery::accepted(vec![
            Envelope::new(&self.name, &m.from, &reply),
            Envelope::new(&self.name, &m.from, &provision),
        ])
    }

    fn on_csp_reply(&mut self, m: HelloReply) -> Delivery {
        let (Some(ni), Some(pinned)) = (self.csp_nonce, self.csp_key.clone()) else {
            return Delivery::rejected(Reject::Unexpected);
        };
        if m.from != self.csp || m.to != self.name || m.public_key != pinned.to_bytes() {
            return Delivery::rejected(Reject::HandshakeFailure);
        }
        let Ok(link) = derive_link(
            &mut self.meter,
            &self.agreement,
            &pinned,
            &self.name,
            &self.csp,
            &ni,
            &m.nonce,
        ) else {
            return Delivery::rejected(Reject::HandshakeFailure);
        };
        let expected = confirm_tag(&mut self.meter, &link, &self.name, &self.csp, &ni, &m.nonce);
        if !ct_eq(expected.as_bytes(), &m.confirm) {
            return Delivery::rejected(Reject::HandshakeFailure);
        }
        self.csp_nonce = None;
        match self.escrow(&link) {
            Ok(env) => {
                self.csp_link = Some(link);
                Delivery::accepted(vec![env])
            }
            Err(_) => Delivery::rejected(Reject::Unexpected),
        }
    }

    fn escrow(&mut self, link: &Link) -> Result<Envelope, ProtocolError> {
        let (pk, mk) = self
            .abe
            .as_ref()
            .ok_or(ProtocolError::NotReady("abe setup"))?;
        let (ipk, _) = self
            .ibbe
            .as_ref()
            .ok_or(ProtocolError::NotReady("ibbe setup"))?;
        let (hdr, _) = self
            .broadcast
            .as_ref()
            .ok_or(ProtocolError::NotReady("broadcast"))?;
        let partial = mk.restrict(&self.data_attributes);
        let sealed_master = self.meter.seal(
            &link.enc,
            &partial.to_bytes(),
            &Nonce::counter(NONCE_ESCROW, 0),
            &escrow_aad(&self.name, &self.csp),
        );
        let mut identity_keys = Vec::with_capacity(self.identity_keys.len());
        for (id, key) in &self.identity_keys {
            let wrap_to = self
                .users
                .get(id)
                .ok_or_else(|| ProtocolError::UnknownPeer(id.clone()))?;
            let ct = self
                .meter
                .pke_encrypt(wrap_to, &key.to_bytes(), &mut self.rng);
            identity_keys.push((id.clone(), ct));
        }
        let mut msg = Escrow {
            from: self.name.clone(),
            to: self.csp.clone(),
            abe_public: pk.to_bytes(),
            delegation: partial.delegation_key().to_bytes(),
            ibbe_public: ipk.to_bytes(),
            receivers: self.receivers.clone(),
            header: hdr.to_bytes(),
            sealed_master,
            identity_keys,
            mac: [0; 32],
        };
        msg.mac = self.meter.hmac(&link.mac, &msg.mac_body()).0;
        Ok(Envelope::new(&self.name, &self.csp, &Message::Escrow(msg)))
    }

    fn penalize(&mut self, sensor: &str, kind: EventKind) {
        let slot = self.sensors.get_mut(sensor).expect("known sensor");
        let event = TrustEvent::new(kind, self.window);
        slot.factors = apply_penalty(&slot.factors, &event, &self.policy.schedule);
        slot.score = compute_score(&slot.factors, &self.policy.weights);
        self.trust_log.push(TrustLogEntry {
            window: self.window,
            sensor: sensor.to_string(),
            event: Some(kind),
            score: slot.score,
        });
    }

    fn on_sensor_data(&mut self, m: SensorData) -> Delivery {
        let window = self.window;
        let Some(slot) = self.sensors.get_mut(&m.from) else {
            return Delivery::rejected(Reject::UnknownPeer);
        };
        let (Some(link), Some(tree)) = (slot.link.clone(), slot.tree.as_ref()) else {
            return Delivery::rejected(Reject::Unexpected);
        };
        if !self.meter.hmac_verify(&link.mac, &m.mac_body(), &m.mac) {
            self.penalize(&m.from, EventKind::AuthFailure);
            return Delivery::rejected(Reject::AuthFailure);
        }
        if m.to != self.name {
            return Delivery::rejected(Reject::Unexpected);
        }
        if !self.meter.verify_token(tree, &m.token) || m.key_epoch != tree.epoch() {
            self.penalize(&m.from, EventKind::UnauthorizedMessage);
            return Delivery::rejected(Reject::TokenMismatch);
        }
        if m.window != window {
            return Delivery::rejected(Reject::Late);
        }
        if slot.accepted_window == Some(window) {
            return Delivery::rejected(Reject::Duplicate);
        }
        if !is_trusted(slot.score, self.policy.threshold) {
            return Delivery::rejected(Reject::Untrusted);
        }
        let cursor = slot.cursor.as_mut().expect("provisioned with tree");
        let Ok(key) = self.meter.chain_key_at(cursor, m.key_epoch + 1) else {
            return Delivery::rejected(Reject::DecryptFailure);
        };
        let opened = self.meter.open(
            &key,
            &sensor_nonce(m.window),
            &m.ciphertext,
            &sensor_aad(&m.from, m.key_epoch, m.window),
        );
        if opened.is_err() {
            self.penalize(&m.from, EventKind::UnauthorizedMessage);
            return Delivery::rejected(Reject::DecryptFailure);
        }
        let slot = self.sensors.get_mut(&m.from).expect("checked above");
        let tree = slot.tree.as_mut().expect("checked above");
        let token = self
            .meter
            .tree_update(tree, slot.score, m.key_epoch + 1)
            .expect("epoch advances by one");
        slot.accepted_window = Some(window);
        self.pending.push(Pending {
            entry: SensorEntry {
                sensor: m.from.clone(),
                key_epoch: m.key_epoch,
                ciphertext: m.ciphertext,
            },
            key,
        });
        self.trust_log.push(TrustLogEntry {
            window,
            sensor: m.from.clone(),
            event: None,
            score: slot.score,
        });
        let mut ack = TokenAck {
            from: self.name.clone(),
            to: m.from.clone(),
            token,
            mac: [0; 32],
        };
        ack.mac = self.meter.hmac(&link.mac, &ack.mac_body()).0;
        Delivery::accepted(vec![Envelope::new(
            &self.name,
            &m.from,
            &Message::TokenAck(ack),
        )])
    }

    /// Closes the current window: penalises silent sensors, then builds the
    /// upload for the accepted readings. The window advances either way.
    pub fn close_epoch(&mut self) -> Result<Envelope, ProtocolError> {
        let window = self.window;
        let silent: Vec<String> = self
            .sensors
            .iter()
            .filter(|(_, s)| s.tree.is_some() && s.accepted_window != Some(window))
            .map(|(n, _)| n.clone())
            .collect();
        for s in silent {
            self.penalize(&s, EventKind::Inactivity);
        }
        let pending = std::mem::take(&mut self.pending);
        self.window += 1;
        if pending.is_empty() {
            return Err(ProtocolError::NoDataForEpoch(window));
        }
        self.upload(window, pending)
    }

    fn upload(&mut self, window: u64, pending: Vec<Pending>) -> Result<Envelope, ProtocolError> {
        let link = self
            .csp_link
            .as_ref()
            .ok_or(ProtocolError::NotReady("no cloud link"))?;
        let (pk, _) = self
            .abe
            .as_ref()
            .ok_or(ProtocolError::NotReady("abe setup"))?;
        let (hdr, bk) = self
            .broadcast
            .as_ref()
            .ok_or(ProtocolError::NotReady("broadcast"))?;
        let mut payload = Writer::new();
        payload.u32(pending.len() as u32);
        for p in &pending {
            let pad = self.meter.kdf(
                bk.key().as_bytes(),
                &mask_label(&self.name, &p.entry.sensor, p.entry.key_epoch, window),
            );
            payload.fixed(&xor32(p.key.as_bytes(), pad.as_bytes()));
        }
        let abe = self.meter.abe_encrypt(
            &payload.finish(),
            &self.upload_attributes,
            pk,
            &mut self.rng,
        )?;
        let record = UploadRecord {
            wnc: self.name.clone(),
            window,
            attributes: self.upload_attributes.iter().cloned().collect(),
            receivers: self.receivers.clone(),
            header: hdr.to_bytes(),
            abe: abe.to_bytes(),
            entries: pending.into_iter().map(|p| p.entry).collect(),
        };
        let mut msg = Upload {
            from: self.name.clone(),
            to: self.csp.clone(),
            record,
            mac: [0; 32],
        };
        msg.mac = self.meter.hmac(&link.mac, &msg.mac_body()).0;
        Ok(Envelope::new(&self.name, &self.csp, &Message::Upload(msg)))
    }

    /// Trust ledger dump lines, one per sensor.
    pub fn ledger_lines(&self) -> Vec<String> {
        self.sensors
            .iter()
            .map(|(name, s)| {
                crate::trust::ledger_line(
                    name,
                    &s.factors,
                    s.score,
                    s.tree.as_ref().map_or(0, |t| t.epoch()),
                    s.tree.as_ref().map(|t| t.root()),
                )
            })
            .collect()
    }
}

pub(crate) fn escrow_aad(from: &str, to: &str) -> Vec<u8> {
    let mut w = Writer::new();
    w.str("escrow").str(from).str(to);
    w.finish()
}
