//! Drives the entities over the bus, epoch by epoch.
//!
//! Tick layout inside an epoch starting at `t`:
//!
//! | tick  | event                                   |
//! |-------|-----------------------------------------|
//! | t     | sensors emit                            |
//! | t+1   | readings reach the coordinator          |
//! | t+2   | token acks reach sensors, window closes |
//! | t+3   | upload reaches the cloud, users request |
//! | t+4   | requests reach the cloud                |
//! | t+5   | responses reach users                   |
//!
//! Anything the adversary delays past the end of its epoch lands later.

use std::collections::{BTreeMap, BTreeSet};

use rand::RngCore;
use rand_chacha::ChaCha20Rng;
use ztac_core::abe::AccessTree;
use ztac_core::crypto::CertificateAuthority;
use ztac_core::metrics::{Meter, Phase, Role, Tally};
use ztac_core::protocol::{
    entity_rng, Csp, Delivery, Envelope, MessageKind, Reject, Sensor, User, Wnc, WncConfig,
};

use crate::adversary::AdversaryScript;
use crate::audit::{self, Secrets};
use crate::bus::{AttackMode, Bus, InFlight};
use crate::report::{Invariant, RunReport};
use crate::scenario::ScenarioConfig;

/// Kinds whose integrity the protocol vouches for. `Hello` carries only
/// public values checked against a pin, `AccessResponse` is unsigned.
pub fn authenticated(kind: MessageKind) -> bool {
    !matches!(kind, MessageKind::Hello | MessageKind::AccessResponse)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeliveryLog {
    pub tick: u64,
    pub index: u64,
    pub kind: MessageKind,
    pub from: String,
    pub to: String,
    pub verdict: Result<(), Reject>,
    pub tampered: bool,
    pub injected: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ForkStats {
    pub tried: u64,
    /// Forks of authenticated kinds the receiver accepted.
    pub accepted: Vec<String>,
    pub rejected: BTreeMap<&'static str, u64>,
    pub leaks: Vec<String>,
}

#[derive(Clone)]
pub struct Runner {
    pub config: ScenarioConfig,
    pub world: World,
    pub bus: Bus,
    pub log: Vec<DeliveryLog>,
    pub forks: ForkStats,
    /// Violations noticed while delivering, by invariant name.
    violations: BTreeMap<&'static str, Vec<String>>,
    accepted_data: BTreeSet<(String, u64)>,
    readings: ChaCha20Rng,
    pub emissions: u64,
    pub uploads: u64,
    pub requests: u64,
    pub notes: Vec<String>,
}

impl Runner {
    pub fn new(config: &ScenarioConfig, script: AdversaryScript, mode: AttackMode) -> Self {
        let seed = config.seed;
        let ca = CertificateAuthority::new("ca", &mut entity_rng(seed, "ca"));
        let mut wnc = Wnc::new(
            &config.wnc,
            &config.csp,
            WncConfig {
                chain_length: config.chain_length,
                receivers: config.receivers.clone(),
                data_attributes: config.data_attributes.clone(),
                upload_attributes: config.upload_attributes.clone(),
                policy: config.policy,
            },
            seed,
        );
        let policies: BTreeMap<String, AccessTree> = config
            .users
            .iter()
            .map(|u| (u.name.clone(), u.policy.clone()))
            .collect();
        let mut csp = Csp::new(&config.csp, policies, seed);
        csp.pin_ca(ca.verification_key());
        csp.pin_wnc(&config.wnc, wnc.public_key().clone());
        wnc.pin_csp(csp.public_key().clone());
        let csp_cert = ca.issue(&config.csp, &csp.verification_key());

        let mut sensors = BTreeMap::new();
        for s in &config.sensors {
            let mut sensor = Sensor::new(&s.name, &config.wnc, seed);
            sensor.pin_wnc(wnc.public_key().clone());
            wnc.pin_sensor(&s.name, sensor.public_key().clone());
            sensors.insert(s.name.clone(), sensor);
        }
        let mut users = BTreeMap::new();
        let mut notes = Vec::new();
        for u in &config.users {
            let mut user = User::new(&u.name, &config.csp, seed);
            let cert = ca.issue(&u.name, &user.verification_key());
            user.set_certificate(cert.clone());
            if !user.pin_csp(&csp_cert, &ca.verification_key()) {
                notes.push(format!("{}: cloud certificate rejected", u.name));
            }
            if !csp.enroll_user(cert, user.wrap_key().clone()) {
                notes.push(format!("{}: enrollment refused", u.name));
            }
            wnc.enroll_user(&u.name, user.wrap_key().clone());
            users.insert(u.name.clone(), user);
        }
        Self {
            config: config.clone(),
            world: World {
                wnc_name: config.wnc.clone(),
                csp_name: config.csp.clone(),
                wnc,
                csp,
                sensors,
                users,
            },
            bus: Bus::new(script, mode),
            log: Vec::new(),
            forks: ForkStats::default(),
            violations: BTreeMap::new(),
            accepted_data: BTreeSet::new(),
            readings: entity_rng(seed, "readings"),
            emissions: 0,
            uploads: 0,
            requests: 0,
            notes,
        }
    }

    fn meters(&mut self) -> impl Iterator<Item = &mut Meter> {
        [&mut self.world.wnc.meter, &mut self.world.csp.meter]
            .into_iter()
            .chain(self.world.sensors.values_mut().map(|s| &mut s.meter))
            .chain(self.world.users.values_mut().map(|u| &mut u.meter))
    }

    pub fn set_phase(&mut self, phase: Phase) {
        self.meters().for_each(|m| m.set_phase(phase));
    }

    pub fn tally(&self) -> Tally {
        let mut t = Tally::default();
        t.absorb(Role::Wnc, &self.world.wnc.meter);
        t.absorb(Role::Csp, &self.world.csp.meter);
        self.world.sensors.values().for_each(|s| t.absorb(Role::Sensor, &s.meter));
        self.world.users.values().for_each(|u| t.absorb(Role::User, &u.meter));
        t
    }

    fn violation(&mut self, invariant: &'static str, detail: String) {
        self.violations.entry(invariant).or_default().push(detail);
    }

    pub fn violations(&self, invariant: &str) -> &[String] {
        self.violations.get(invariant).map_or(&[], Vec::as_slice)
    }

    /// Tries a tampered copy against a clone of the receiver and audits what
    /// the clone ends up holding or saying.
    fn try_fork(&mut self, item: &InFlight, label: String, bytes: &[u8]) {
        let (from, to) = (item.env.from.as_str(), item.env.to.as_str());
        let mut fork = self.world.clone();
        let d = fork.route(from, to, bytes);
        self.forks.tried += 1;
        match d.verdict {
            Ok(()) if authenticated(item.env.kind) => self.forks.accepted.push(label.clone()),
            Ok(()) => {}
            Err(r) => *self.forks.rejected.entry(r.name()).or_default() += 1,
        }
        let secrets = Secrets::collect(self);
        let mut hay: Vec<(String, Vec<u8>)> = d
            .replies
            .iter()
            .map(|r| (format!("reply {}->{}", r.from, r.to), r.bytes.clone()))
            .collect();
        if to == self.config.csp {
            hay.push(("cloud state".into(), fork.csp.state_bytes()));
        } else if let Some(u) = fork.users.get(to) {
            if !self.config.authorized_users().contains(to) {
                hay.push((format!("{to} state"), u.state_bytes()));
            }
        } else if let Some(s) = fork.sensors.get(to) {
            let found = secrets.find(&s.state_bytes(), |owner| owner == to);
            self.forks
                .leaks
                .extend(found.into_iter().map(|f| format!("{label}: {f} in {to} state")));
        }
        for (name, bytes) in hay {
            let found = secrets.find(&bytes, |_| false);
            self.forks
                .leaks
                .extend(found.into_iter().map(|f| format!("{label}: {f} in {name}")));
        }
    }

    fn deliver(&mut self, item: InFlight) {
        for (action, bytes) in &item.forks {
            let label = format!("#{} {} {action}", item.index, item.env.kind.name());
            self.try_fork(&item, label, bytes);
        }
        let env = &item.env;
        let gate = (env.kind == MessageKind::SensorData && env.to == self.config.wnc)
            .then(|| self.world.wnc.standing(&env.from))
            .flatten();
        let window = self.world.wnc.window();
        let d = self.world.route(&env.from, &env.to, &env.bytes);
        let entry = DeliveryLog {
            tick: self.bus.now(),
            index: item.index,
            kind: env.kind,
            from: env.from.clone(),
            to: env.to.clone(),
            verdict: d.verdict,
            tampered: item.tampered(),
            injected: item.injected,
        };
        if d.is_accepted() && authenticated(env.kind) {
            if entry.tampered {
                self.violation("integrity", format!("tampered #{} {} accepted", item.index, env.kind.name()));
            }
            if entry.injected {
                self.violation("freshness", format!("replayed {} accepted by {}", env.kind.name(), env.to));
            }
        }
        if d.is_accepted() && env.kind == MessageKind::SensorData {
            if let Some(s) = gate {
                if s.score < self.config.policy.threshold {
                    self.violation(
                        "trust-gating",
                        format!("{} accepted at score {:.2}", env.from, s.score),
                    );
                }
            }
            if !self.accepted_data.insert((env.from.clone(), window)) {
                self.violation("freshness", format!("{} accepted twice in window {window}", env.from));
            }
        }
        if d.is_accepted() && env.kind == MessageKind::AccessRequest {
            self.requests += 1;
        }
        self.log.push(entry);
        for r in d.replies {
            self.bus.send(r);
        }
    }

    /// Delivers everything due at or before `tick`.
    pub fn run_until(&mut self, tick: u64) {
        while let Some(item) = self.bus.next_due(tick) {
            self.deliver(item);
        }
        self.bus.advance_to(tick);
    }

    /// Delivers until nothing is in flight.
    pub fn drain(&mut self) {
        while let Some(item) = self.bus.next_due(u64::MAX) {
            self.deliver(item);
        }
    }

    pub fn initialize(&mut self) {
        self.set_phase(Phase::Initialization);
        if let Err(e) = self.world.wnc.setup_keys() {
            self.notes.push(format!("key setup failed: {e}"));
            return;
        }
        let hellos: Vec<Envelope> = self.world.sensors.values_mut().map(|s| s.hello()).collect();
        for h in hellos {
            self.bus.send(h);
        }
        let h = self.world.wnc.csp_hello();
        self.bus.send(h);
        self.drain();
    }

    pub fn register(&mut self) {
        self.set_phase(Phase::Registration);
        let reqs: Vec<Envelope> = self.world.users.values_mut().map(|u| u.register_request()).collect();
        for r in reqs {
            self.bus.send(r);
        }
        self.drain();
    }

    fn reading(&mut self, sensor: &str, epoch: u64) -> Vec<u8> {
        let mut nonce = [0u8; 8];
        self.readings.fill_bytes(&mut nonce);
        format!("M|{sensor}|e{epoch}|{}", hex::encode(nonce)).into_bytes()
    }

    pub fn epoch(&mut self, e: u64) {
        let t = self.bus.now() + 1;
        self.bus.advance_to(t);
        self.set_phase(Phase::Uploading);
        let window = self.world.wnc.window();
        let names: Vec<String> = self
            .config
            .sensors
            .iter()
            .filter(|s| !s.silent.contains(&e))
            .map(|s| s.name.clone())
            .collect();
        for name in names {
            let m = self.reading(&name, e);
            let sensor = self.world.sensors.get_mut(&name).expect("configured sensor");
            match sensor.emit(&m, window) {
                Ok(env) => {
                    self.emissions += 1;
                    self.bus.send(env);
                }
                Err(err) => self.notes.push(format!("{name} epoch {e}: {err}")),
            }
        }
        self.run_until(t + 2);
        match self.world.wnc.close_epoch() {
            Ok(upload) => {
                self.uploads += 1;
                self.bus.send(upload);
            }
            Err(err) => self.notes.push(format!("epoch {e}: {err}")),
        }
        self.run_until(t + 3);
        self.set_phase(Phase::Downloading);
        let reqs: Vec<Envelope> = self
            .config
            .users
            .iter()
            .filter_map(|u| {
                self.world.users
                    .get_mut(&u.name)
                    .and_then(|user| user.access_request(&u.request))
            })
            .collect();
        for r in reqs {
            self.bus.send(r);
        }
        self.run_until(t + self.config.ticks_per_epoch - 1);
    }

    pub fn run(&mut self) {
        self.set_phase(Phase::Initialization);
        self.initialize();
        self.register();
        for e in 0..self.config.epochs {
            self.epoch(e);
        }
        self.drain();
    }

    pub fn report(&self) -> RunReport {
        let conservation = self.bus.stats().balanced(self.bus.in_flight());
        let leaks = audit::leak_scan(self);
        let separation = audit::key_separation(self);

        let mut integrity: Vec<String> = self.violations("integrity").to_vec();
        integrity.extend(self.forks.accepted.iter().map(|f| format!("fork accepted: {f}")));
        integrity.extend(audit::forged_plaintexts(self));
        let mut leak_details = leaks;
        leak_details.extend(self.forks.leaks.iter().cloned());

        let invariants = vec![
            Invariant::new(
                "conservation",
                if conservation { vec![] } else { vec![format!("{:?}, {} in flight", self.bus.stats(), self.bus.in_flight())] },
            ),
            Invariant::new("leaks", leak_details),
            Invariant::new("integrity", integrity),
            Invariant::new("trust-gating", self.violations("trust-gating").to_vec()),
            Invariant::new("freshness", self.violations("freshness").to_vec()),
            Invariant::new("key-separation", separation.failures()),
        ];
        RunReport::build(self, invariants, separation)
    }
}

/// Every protocol entity, addressable by name.
#[derive(Clone)]
pub struct World {
    pub wnc_name: String,
    pub csp_name: String,
    pub wnc: Wnc,
    pub csp: Csp,
    pub sensors: BTreeMap<String, Sensor>,
    pub users: BTreeMap<String, User>,
}

impl World {
    /// Hands `bytes` to the entity named `to`.
    pub fn route(&mut self, from: &str, to: &str, bytes: &[u8]) -> Delivery {
        if to == self.wnc_name {
            self.wnc.deliver(bytes)
        } else if to == self.csp_name {
            self.csp.deliver(from, bytes)
        } else if let Some(s) = self.sensors.get_mut(to) {
            s.deliver(bytes)
        } else if let Some(u) = self.users.get_mut(to) {
            u.deliver(bytes)
        } else {
            Delivery::rejected(Reject::UnknownPeer)
        }
    }
}

/// Runs a whole scenario and renders its report.
pub fn run_scenario(config: &ScenarioConfig, script: &AdversaryScript, mode: AttackMode) -> (Runner, RunReport) {
    let mut runner = Runner::new(config, script.clone(), mode);
    runner.run();
    let report = runner.report();
    (runner, report)
}
