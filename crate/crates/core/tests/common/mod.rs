#![allow(dead_code)]

use std::collections::{BTreeMap, VecDeque};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use ztac_core::abe::AccessTree;
use ztac_core::crypto::CertificateAuthority;
use ztac_core::metrics::{Meter, Phase};
use ztac_core::protocol::{Csp, Delivery, Envelope, Sensor, User, Wnc, WncConfig};
use ztac_core::TrustPolicy;

pub const WNC: &str = "wnc";
pub const CSP: &str = "csp";

pub struct Setup {
    pub sensors: Vec<&'static str>,
    pub chain_length: u64,
    /// (name, policy, in receiver set)
    pub users: Vec<(&'static str, &'static str, bool)>,
    pub data_attributes: Vec<&'static str>,
    pub upload_attributes: Vec<&'static str>,
    pub seed: u64,
}

impl Default for Setup {
    fn default() -> Self {
        Self {
            sensors: vec!["w1"],
            chain_length: 8,
            users: vec![("alice", "AND(hr, ward-a)", true)],
            data_attributes: vec!["hr", "temp", "ward-a"],
            upload_attributes: vec!["hr", "ward-a"],
            seed: 7,
        }
    }
}

pub struct World {
    pub sensors: BTreeMap<String, Sensor>,
    pub wnc: Wnc,
    pub csp: Csp,
    pub users: BTreeMap<String, User>,
    /// Every envelope routed, in order.
    pub transcript: Vec<Envelope>,
    pub rejections: Vec<(Envelope, Delivery)>,
}

impl World {
    pub fn new(setup: &Setup) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(setup.seed);
        let ca = CertificateAuthority::new("ca", &mut rng);
        let receivers: Vec<String> = setup
            .users
            .iter()
            .filter(|u| u.2)
            .map(|u| u.0.to_string())
            .collect();
        let mut wnc = Wnc::new(
            WNC,
            CSP,
            WncConfig {
                chain_length: setup.chain_length,
                receivers,
                data_attributes: setup
                    .data_attributes
                    .iter()
                    .map(|s| s.to_string())
                    .collect(),
                upload_attributes: setup
                    .upload_attributes
                    .iter()
                    .map(|s| s.to_string())
                    .collect(),
                policy: TrustPolicy::default(),
            },
            setup.seed,
        );
        let policies = setup
            .users
            .iter()
            .map(|(n, p, _)| (n.to_string(), AccessTree::parse(p).unwrap()))
            .collect();
        let mut csp = Csp::new(CSP, policies, setup.seed);
        csp.pin_ca(ca.verification_key());
        csp.pin_wnc(WNC, wnc.public_key().clone());
        wnc.pin_csp(csp.public_key().clone());
        let csp_cert = ca.issue(CSP, &csp.verification_key());

        let mut sensors = BTreeMap::new();
        for s in &setup.sensors {
            let mut sensor = Sensor::new(s, WNC, setup.seed);
            sensor.pin_wnc(wnc.public_key().clone());
            wnc.pin_sensor(s, sensor.public_key().clone());
            sensors.insert(s.to_string(), sensor);
        }
        let mut users = BTreeMap::new();
        for (name, _, _) in &setup.users {
            let mut user = User::new(name, CSP, setup.seed);
            let cert = ca.issue(name, &user.verification_key());
            user.set_certificate(cert.clone());
            assert!(user.pin_csp(&csp_cert, &ca.verification_key()));
            assert!(csp.enroll_user(cert, user.wrap_key().clone()));
            wnc.enroll_user(name, user.wrap_key().clone());
            users.insert(name.to_string(), user);
        }
        Self {
            sensors,
            wnc,
            csp,
            users,
            transcript: Vec::new(),
            rejections: Vec::new(),
        }
    }

    pub fn meters(&mut self) -> Vec<&mut Meter> {
        let mut out: Vec<&mut Meter> = vec![&mut self.wnc.meter, &mut self.csp.meter];
        out.extend(self.sensors.values_mut().map(|s| &mut s.meter));
        out.extend(self.users.values_mut().map(|u| &mut u.meter));
        out
    }

    pub fn set_phase(&mut self, phase: Phase) {
        for m in self.meters() {
            m.set_phase(phase);
        }
    }

    pub fn deliver(&mut self, env: &Envelope) -> Delivery {
        let to = env.to.as_str();
        if to == WNC {
            self.wnc.deliver(&env.bytes)
        } else if to == CSP {
            self.csp.deliver(&env.from, &env.bytes)
        } else if let Some(s) = self.sensors.get_mut(to) {
            s.deliver(&env.bytes)
        } else if let Some(u) = self.users.get_mut(to) {
            u.deliver(&env.bytes)
        } else {
            panic!("no entity named {to}")
        }
    }

    /// Routes `first` and every reply it causes, breadth first.
    pub fn pump(&mut self, first: Envelope) {
        let mut queue = VecDeque::from([first]);
        while let Some(env) = queue.pop_front() {
            self.transcript.push(env.clone());
            let d = self.deliver(&env);
            if !d.is_accepted() {
                self.rejections.push((env, d.clone()));
            }
            queue.extend(d.replies);
        }
    }

    pub fn initialize(&mut self) {
        self.set_phase(Phase::Initialization);
        self.wnc.setup_keys().unwrap();
        let hellos: Vec<Envelope> = self.sensors.values_mut().map(|s| s.hello()).collect();
        for h in hellos {
            self.pump(h);
        }
        let h = self.wnc.csp_hello();
        self.pump(h);
    }

    pub fn register_all(&mut self) {
        self.set_phase(Phase::Registration);
        let reqs: Vec<Envelope> = self
            .users
            .values_mut()
            .map(|u| u.register_request())
            .collect();
        for r in reqs {
            self.pump(r);
        }
    }

    /// One upload window: every sensor listed emits, then the window closes.
    pub fn epoch(&mut self, readings: &[(&str, &[u8])]) -> Option<Envelope> {
        self.set_phase(Phase::Uploading);
        let window = self.wnc.window();
        for (s, m) in readings {
            let env = self.sensors.get_mut(*s).unwrap().emit(m, window).unwrap();
            self.pump(env);
        }
        let upload = self.wnc.close_epoch().ok()?;
        self.pump(upload.clone());
        Some(upload)
    }

    pub fn download(&mut self, user: &str, attributes: &[&str]) {
        self.set_phase(Phase::Downloading);
        let attrs: Vec<String> = attributes.iter().map(|s| s.to_string()).collect();
        let req = self
            .users
            .get_mut(user)
            .unwrap()
            .access_request(&attrs)
            .unwrap();
        self.pump(req);
    }

    pub fn honest_run(&mut self, epochs: u64) {
        self.initialize();
        self.register_all();
        let names: Vec<String> = self.sensors.keys().cloned().collect();
        for e in 0..epochs {
            let msgs: Vec<(String, Vec<u8>)> = names
                .iter()
                .map(|n| (n.clone(), format!("{n} reading {e}").into_bytes()))
                .collect();
            let refs: Vec<(&str, &[u8])> = msgs
                .iter()
                .map(|(n, m)| (n.as_str(), m.as_slice()))
                .collect();
            self.epoch(&refs).expect("honest epoch uploads");
            let users: Vec<String> = self.users.keys().cloned().collect();
            for u in users {
                self.download(&u, &[]);
            }
        }
    }
}

pub fn contains(haystack: &[u8], needle: &[u8]) -> bool {
    !needle.is_empty() && haystack.windows(needle.len()).any(|w| w == needle)
}
