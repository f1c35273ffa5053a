use rand_chacha::ChaCha20Rng;

use super::messages::{Hello, HelloReply, Provision, SensorData, TokenAck, NONCE_BYTES};
use super::{
    confirm_tag, derive_link, entity_rng, fresh_nonce, sensor_aad, sensor_nonce, Delivery,
    Envelope, Link, Message, ProtocolError, Reject, NONCE_PROVISION,
};
use crate::crypto::{
    ct_eq, ecdh_keygen, AgreementKeyPair, AgreementPublicKey, KeyHashChain, Nonce, SymKey,
};
use crate::metrics::Meter;
use crate::trust::TrustToken;
use crate::wire::{Reader, Writer};

/// A wearable sensor. It holds its link to the coordinator, the key hash
/// chain and the current trust token, which it treats as opaque.
#[derive(Debug, Clone)]
pub struct Sensor {
    name: String,
    wnc: String,
    agreement: AgreementKeyPair,
    wnc_key: Option<AgreementPublicKey>,
    rng: ChaCha20Rng,
    hello_nonce: Option<[u8; NONCE_BYTES]>,
    link: Option<Link>,
    chain: Option<KeyHashChain>,
    token: Option<TrustToken>,
    presented: Option<TrustToken>,
    /// Windows emitted but not yet acknowledged.
    awaiting: Option<u64>,
    emitted: Vec<(u64, Vec<u8>)>,
    pub meter: Meter,
}

impl Sensor {
    pub fn new(name: &str, wnc: &str, seed: u64) -> Self {
        let mut rng = entity_rng(seed, name);
        let agreement = ecdh_keygen(&mut rng);
        Self {
            name: name.to_string(),
            wnc: wnc.to_string(),
            agreement,
            wnc_key: None,
            rng,
            hello_nonce: None,
            link: None,
            chain: None,
            token: None,
            presented: None,
            awaiting: None,
            emitted: Vec::new(),
            meter: Meter::new(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn public_key(&self) -> &AgreementPublicKey {
        self.agreement.public()
    }

    pub fn pin_wnc(&mut self, key: AgreementPublicKey) {
        self.wnc_key = Some(key);
    }

    pub fn token(&self) -> Option<&TrustToken> {
        self.token.as_ref()
    }

    pub fn chain(&self) -> Option<&KeyHashChain> {
        self.chain.as_ref()
    }

    pub fn is_provisioned(&self) -> bool {
        self.chain.is_some() && self.token.is_some()
    }

    /// Plaintexts this sensor has emitted, by window.
    pub fn emitted(&self) -> &[(u64, Vec<u8>)] {
        &self.emitted
    }

    /// Attaches `token` to outgoing data in place of the issued one, while
    /// still keying by the issued epoch. Models a sensor that tampers with
    /// its own standing; honest sensors never call this.
    pub fn present_token(&mut self, token: TrustToken) {
        self.presented = Some(token);
    }

    pub fn hello(&mut self) -> Envelope {
        let nonce = fresh_nonce(&mut self.rng);
        self.hello_nonce = Some(nonce);
        let msg = Message::Hello(Hello {
            from: self.name.clone(),
            to: self.wnc.clone(),
            public_key: self.agreement.public().to_bytes(),
            nonce,
        });
        Envelope::new(&self.name, &self.wnc, &msg)
    }

    /// Encrypts `plaintext` under the next chain key and attaches the token.
    pub fn emit(&mut self, plaintext: &[u8], window: u64) -> Result<Envelope, ProtocolError> {
        let link = self
            .link
            .as_ref()
            .ok_or(ProtocolError::NotReady("no link"))?;
        let chain = self
            .chain
            .as_ref()
            .ok_or(ProtocolError::NotReady("no chain"))?;
        let token = self.token.ok_or(ProtocolError::NotReady("no token"))?;
        let key_epoch = token.epoch;
        let key = chain
            .chain_key(key_epoch + 1)
            .map_err(|_| ProtocolError::ChainExhausted {
                needed: key_epoch + 1,
                length: chain.length(),
            })?;
        let ciphertext = self.meter.seal(
            &key,
            plaintext,
            &sensor_nonce(window),
            &sensor_aad(&self.name, key_epoch, window),
        );
        let mut msg = SensorData {
            from: self.name.clone(),
            to: self.wnc.clone(),
            key_epoch,
            window,
            ciphertext,
            token: self.presented.unwrap_or(token),
            mac: [0; 32],
        };
        msg.mac = self.meter.hmac(&link.mac, &msg.mac_body()).0;
        self.awaiting = Some(window);
        self.emitted.push((window, plaintext.to_vec()));
        Ok(Envelope::new(
            &self.name,
            &self.wnc,
            &Message::SensorData(msg),
        ))
    }

    pub fn deliver(&mut self, bytes: &[u8]) -> Delivery {
        match Message::decode(bytes) {
            Ok(Message::HelloReply(m)) => self.on_hello_reply(m),
            Ok(Message::Provision(m)) => self.on_provision(m),
            Ok(Message::TokenAck(m)) => self.on_token_ack(m),
            Ok(_) => Delivery::rejected(Reject::Unexpected),
            Err(_) => Delivery::rejected(Reject::Malformed),
        }
    }

    fn on_hello_reply(&mut self, m: HelloReply) -> Delivery {
        let (Some(ni), Some(pinned)) = (self.hello_nonce, self.wnc_key.clone()) else {
            return Delivery::rejected(Reject::Unexpected);
        };
        if m.from != self.wnc || m.to != self.name || m.public_key != pinned.to_bytes() {
            return Delivery::rejected(Reject::HandshakeFailure);
        }
        let Ok(link) = derive_link(
            &mut self.meter,
            &self.agreement,
            &pinned,
            &self.name,
            &self.wnc,
            &ni,
            &m.nonce,
        ) else {
            return Delivery::rejected(Reject::HandshakeFailure);
        };
        let expected = confirm_tag(&mut self.meter, &link, &self.name, &self.wnc, &ni, &m.nonce);
        if !ct_eq(expected.as_bytes(), &m.confirm) {
            return Delivery::rejected(Reject::HandshakeFailure);
        }
        self.link = Some(link);
        self.hello_nonce = None;
        Delivery::accepted(Vec::new())
    }

    fn on_provision(&mut self, m: Provision) -> Delivery {
        let Some(link) = self.link.clone() else {
            return Delivery::rejected(Reject::Unexpected);
        };
        if m.from != self.wnc || m.to != self.name {
            return Delivery::rejected(Reject::UnknownPeer);
        }
        if self.chain.is_some() {
            return Delivery::rejected(Reject::Duplicate);
        }
        let aad = provision_aad(&m.from, &m.to);
        let Ok(plain) = self.meter.open(
            &link.enc,
            &Nonce::counter(NONCE_PROVISION, 0),
            &m.sealed,
            &aad,
        ) else {
            return Delivery::rejected(Reject::IntegrityFailure);
        };
        let parsed = (|| {
            let mut r = Reader::new(&plain);
            let seed = SymKey(r.array()?);
            let length = r.u64()?;
            let token = TrustToken::decode_from(&mut r)?;
            r.finish()?;
            Ok::<_, crate::wire::WireError>((seed, length, token))
        })();
        let Ok((seed, length, token)) = parsed else {
            return Delivery::rejected(Reject::Malformed);
        };
        match self.meter.chain_generate(seed, length) {
            Ok(chain) => {
                self.chain = Some(chain);
                self.token = Some(token);
                Delivery::accepted(Vec::new())
            }
            Err(_) => Delivery::rejected(Reject::Malformed),
        }
    }

    fn on_token_ack(&mut self, m: TokenAck) -> Delivery {
        let (Some(link), Some(current)) = (self.link.as_ref(), self.token) else {
            return Delivery::rejected(Reject::Unexpected);
        };
        if m.from != self.wnc || m.to != self.name {
            return Delivery::rejected(Reject::UnknownPeer);
        }
        if !self.meter.hmac_verify(&link.mac, &m.mac_body(), &m.mac) {
            return Delivery::rejected(Reject::IntegrityFailure);
        }
        if m.token.epoch != current.epoch + 1 || self.awaiting.is_none() {
            return Delivery::rejected(Reject::Unexpected);
        }
        self.token = Some(m.token);
        self.awaiting = None;
        Delivery::accepted(Vec::new())
    }

    /// Everything the sensor holds, for leak audits.
    pub fn state_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.str(&self.name).bytes(&self.agreement.secret_bytes());
        if let Some(link) = &self.link {
            link.encode_into(&mut w);
        }
        if let Some(chain) = &self.chain {
            for k in chain.keys() {
                w.fixed(k.as_bytes());
            }
        }
        if let Some(t) = &self.token {
            w.fixed(&t.to_bytes());
        }
        for (window, m) in &self.emitted {
            w.u64(*window).bytes(m);
        }
        w.finish()
    }
}

pub(crate) fn provision_aad(from: &str, to: &str) -> Vec<u8> {
    let mut w = Writer::new();
    w.str("provision").str(from).str(to);
    w.finish()
}
