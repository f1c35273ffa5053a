//! Post-run audits: secret leak scanning, key separation and the cloud-side
//! key recovery attempt.

use aho_corasick::AhoCorasick;
use ztac_core::abe::{abe_decrypt, abe_keygen, AbeCiphertext, AccessTree};
use ztac_core::crypto::{kdf, sym_decrypt_aad, SymKey};
use ztac_core::protocol::{entity_rng, mask_label, sensor_aad, sensor_nonce, xor32, UploadRecord};
use ztac_core::wire::Reader;

use crate::runner::Runner;

#[derive(Debug, Clone)]
pub struct Secret {
    /// Sensor the secret belongs to.
    pub owner: String,
    pub label: String,
    pub bytes: Vec<u8>,
}

/// Every reading plaintext and chain key in the run.
#[derive(Debug, Clone)]
pub struct Secrets {
    pub items: Vec<Secret>,
    matcher: Option<AhoCorasick>,
}

impl Secrets {
    pub fn collect(r: &Runner) -> Self {
        let mut items = Vec::new();
        for (name, s) in &r.world.sensors {
            for (window, m) in s.emitted() {
                items.push(Secret {
                    owner: name.clone(),
                    label: format!("reading {name}/{window}"),
                    bytes: m.clone(),
                });
            }
            if let Some(chain) = s.chain() {
                for (i, k) in chain.keys().iter().enumerate() {
                    items.push(Secret {
                        owner: name.clone(),
                        label: format!("chain key {name}/h{i}"),
                        bytes: k.as_bytes().to_vec(),
                    });
                }
            }
        }
        let matcher = (!items.is_empty()).then(|| {
            AhoCorasick::new(items.iter().map(|s| &s.bytes)).expect("patterns are short")
        });
        Self { items, matcher }
    }

    /// Labels of secrets found in `hay` whose owner `allowed` rejects.
    pub fn find(&self, hay: &[u8], allowed: impl Fn(&str) -> bool) -> Vec<String> {
        let Some(m) = &self.matcher else {
            return Vec::new();
        };
        let mut hits: Vec<usize> = m
            .find_overlapping_iter(hay)
            .map(|h| h.pattern().as_usize())
            .filter(|&i| !allowed(&self.items[i].owner))
            .collect();
        hits.sort_unstable();
        hits.dedup();
        hits.into_iter().map(|i| self.items[i].label.clone()).collect()
    }
}

/// Scans every place a reading or chain key must never appear: the cloud,
/// users without full rights, other sensors and the wire.
pub fn leak_scan(r: &Runner) -> Vec<String> {
    let secrets = Secrets::collect(r);
    let mut out = Vec::new();
    let mut report = |what: &str, found: Vec<String>| {
        out.extend(found.into_iter().map(|f| format!("{f} in {what}")));
    };
    report("cloud state", secrets.find(&r.world.csp.state_bytes(), |_| false));
    let authorized = r.config.authorized_users();
    for (name, u) in &r.world.users {
        if !authorized.contains(name) {
            report(&format!("{name} state"), secrets.find(&u.state_bytes(), |_| false));
        }
    }
    for (name, s) in &r.world.sensors {
        report(&format!("{name} state"), secrets.find(&s.state_bytes(), |o| o == name));
    }
    for (i, bytes) in r.bus.transcript().iter().enumerate() {
        report(&format!("wire message {i}"), secrets.find(bytes, |_| false));
    }
    out
}

/// Recovered plaintexts that no sensor emitted for that window.
pub fn forged_plaintexts(r: &Runner) -> Vec<String> {
    let mut out = Vec::new();
    for (name, u) in &r.world.users {
        for rec in u.recovered() {
            let genuine = r.world.sensors.get(&rec.sensor).is_some_and(|s| {
                s.emitted()
                    .iter()
                    .any(|(w, m)| *w == rec.window && *m == rec.plaintext)
            });
            if !genuine {
                out.push(format!(
                    "{name} recovered a reading {}/{} that was never emitted",
                    rec.sensor, rec.window
                ));
            }
        }
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KeySeparation {
    /// The cloud finished setup (holds an escrow at all).
    pub escrowed: bool,
    pub holds_public_key: bool,
    pub holds_partial_master: bool,
    /// Secrets the cloud must not hold but does.
    pub held: Vec<String>,
    pub attack_attempts: u64,
    /// Whether the cloud could strip the attribute layer on its own.
    pub abe_layer_opened: bool,
    /// Sensor ciphertexts the cloud managed to open.
    pub opened: Vec<String>,
}

impl KeySeparation {
    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.escrowed && !self.holds_public_key {
            out.push("cloud state lacks the attribute public key".into());
        }
        if self.escrowed && !self.holds_partial_master {
            out.push("cloud state lacks its partial master key".into());
        }
        out.extend(self.held.iter().map(|h| format!("cloud holds {h}")));
        out.extend(self.opened.iter().map(|o| format!("cloud opened {o}")));
        out
    }
}

fn contains(hay: &[u8], needle: &[u8]) -> bool {
    !needle.is_empty() && hay.windows(needle.len()).any(|w| w == needle)
}

fn masked_keys(payload: &[u8]) -> Option<Vec<[u8; 32]>> {
    let mut r = Reader::new(payload);
    let n = r.u32().ok()? as usize;
    let out = (0..n)
        .map(|_| r.array::<32>().ok())
        .collect::<Option<Vec<_>>>()?;
    r.finish().ok()?;
    Some(out)
}

fn opens(record: &UploadRecord, i: usize, key: &SymKey) -> bool {
    let e = &record.entries[i];
    sym_decrypt_aad(
        key,
        &sensor_nonce(record.window),
        &e.ciphertext,
        &sensor_aad(&e.sensor, e.key_epoch, record.window),
    )
    .is_ok()
}

/// Checks what the cloud holds, then plays the cloud trying to read sensor
/// data with everything it has.
pub fn key_separation(r: &Runner) -> KeySeparation {
    let csp = &r.world.csp;
    let wnc = &r.world.wnc;
    let state = csp.state_bytes();
    let mut out = KeySeparation {
        escrowed: csp.abe_public().is_some(),
        ..KeySeparation::default()
    };
    out.holds_public_key = csp
        .abe_public()
        .is_some_and(|pk| contains(&state, &pk.to_bytes()));
    out.holds_partial_master = csp
        .partial_master()
        .is_some_and(|mk| contains(&state, &mk.to_bytes()));

    if let Some(m) = wnc.ibbe_master() {
        for (i, enc) in m.secret_encodings().iter().enumerate() {
            if contains(&state, enc) {
                out.held.push(format!("broadcast master secret #{i}"));
            }
        }
    }
    for (id, sk) in wnc.identity_keys() {
        if contains(&state, &sk.secret_encoding()) {
            out.held.push(format!("identity key of {id}"));
        }
    }
    if let (Some(full), Some(part)) = (wnc.abe_master(), csp.partial_master()) {
        let withheld: Vec<&String> = full.labels().iter().filter(|l| !part.contains(l)).collect();
        if !withheld.is_empty() {
            let enc = full.restrict(&withheld).secret_encodings();
            // the last encoding is the shared exponent the cloud holds anyway
            for (i, e) in enc[..enc.len() - 1].iter().enumerate() {
                if contains(&state, e) {
                    out.held.push(format!("withheld attribute secret {}", withheld[i]));
                }
            }
        }
    }
    for (name, s) in &r.world.sensors {
        if let Some(chain) = s.chain() {
            for (i, k) in chain.keys().iter().enumerate() {
                if contains(&state, k.as_bytes()) {
                    out.held.push(format!("chain key {name}/h{i}"));
                }
            }
        }
    }

    // The attack: issue ourselves a key over the partial master, strip the
    // attribute layer, then try every 32-byte string we hold as the pad key.
    let Some(mk) = csp.partial_master() else {
        return out;
    };
    let mut rng = entity_rng(r.config.seed, "cloud-attack");
    let windows: Vec<&[u8]> = state.windows(32).collect();
    for record in csp.records() {
        let leaves: Vec<AccessTree> = record
            .attributes
            .iter()
            .filter(|a| mk.contains(a))
            .map(|a| AccessTree::leaf(a.as_str()))
            .collect();
        if leaves.is_empty() {
            continue;
        }
        let Ok(key) = abe_keygen(&AccessTree::and(leaves), mk, &mut rng) else {
            continue;
        };
        let Ok(ct) = AbeCiphertext::from_bytes(&record.abe) else {
            continue;
        };
        let Some(masked) = abe_decrypt(&ct, &key).ok().and_then(|p| masked_keys(&p)) else {
            continue;
        };
        out.abe_layer_opened = true;
        for (i, m) in masked.iter().enumerate().take(record.entries.len()) {
            let e = &record.entries[i];
            let what = format!("{}/{}", e.sensor, record.window);
            out.attack_attempts += 1;
            if opens(record, i, &SymKey(*m)) {
                out.opened.push(format!("{what} with the masked key itself"));
                continue;
            }
            let label = mask_label(&record.wnc, &e.sensor, e.key_epoch, record.window);
            for w in &windows {
                out.attack_attempts += 1;
                let pad = kdf(w, &label);
                if opens(record, i, &SymKey(xor32(m, pad.as_bytes()))) {
                    out.opened.push(format!("{what} with a pad derived from its own state"));
                    break;
                }
            }
        }
    }
    out
}
