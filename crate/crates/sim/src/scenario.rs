//! Scenario files: one `key = value` per line, `#` starts a comment.
//!
//! ```text
//! seed = 7
//! sensors = w1 w2
//! chain_length = 8
//! epochs = 4
//! receivers = alice
//! data_attributes = hr temp ward-a
//! upload_attributes = hr ward-a
//! user.alice.policy = AND(hr, ward-a)
//! user.alice.request = hr
//! sensor.w2.silent = 2 3
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;
use ztac_core::abe::AccessTree;
use ztac_core::protocol::MAX_ID_BYTES;
use ztac_core::trust::{PenaltySchedule, ScoringWeights};
use ztac_core::TrustPolicy;

pub const MIN_TICKS_PER_EPOCH: u64 = 6;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ConfigError {
    pub field: String,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: `{}`: {}", self.field, self.message),
            None => write!(f, "`{}`: {}", self.field, self.message),
        }
    }
}

fn err(field: &str, line: Option<usize>, message: impl Into<String>) -> ConfigError {
    ConfigError {
        field: field.to_string(),
        line,
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensorSpec {
    pub name: String,
    /// Epochs in which the sensor sends nothing.
    pub silent: BTreeSet<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserSpec {
    pub name: String,
    pub policy: AccessTree,
    /// Requested attribute set λ.
    pub request: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub wnc: String,
    pub csp: String,
    pub sensors: Vec<SensorSpec>,
    pub users: Vec<UserSpec>,
    pub chain_length: u64,
    pub epochs: u64,
    pub ticks_per_epoch: u64,
    pub policy: TrustPolicy,
    pub receivers: Vec<String>,
    pub data_attributes: Vec<String>,
    pub upload_attributes: Vec<String>,
}

impl Default for ScenarioConfig {
    /// One sensor, one authorised user, four epochs.
    fn default() -> Self {
        Self {
            seed: 1,
            wnc: "wnc".into(),
            csp: "csp".into(),
            sensors: vec![SensorSpec {
                name: "w1".into(),
                silent: BTreeSet::new(),
            }],
            users: vec![UserSpec {
                name: "alice".into(),
                policy: AccessTree::parse("AND(hr, ward-a)").expect("valid"),
                request: Vec::new(),
            }],
            chain_length: 8,
            epochs: 4,
            ticks_per_epoch: 8,
            policy: TrustPolicy::default(),
            receivers: vec!["alice".into()],
            data_attributes: vec!["hr".into(), "temp".into(), "ward-a".into()],
            upload_attributes: vec!["hr".into(), "ward-a".into()],
        }
    }
}

fn words(v: &str) -> Vec<String> {
    v.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|w| !w.is_empty())
        .map(str::to_string)
        .collect()
}

fn number<T: std::str::FromStr>(field: &str, line: usize, v: &str) -> Result<T, ConfigError> {
    v.parse()
        .map_err(|_| err(field, Some(line), format!("expected a number, got `{v}`")))
}

fn valid_name(name: &str) -> bool {
    !name.is_empty()
        && name.len() <= MAX_ID_BYTES
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_'))
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = ScenarioConfig {
            sensors: Vec::new(),
            users: Vec::new(),
            receivers: Vec::new(),
            ..Self::default()
        };
        let mut weights = None;
        let mut schedule = PenaltySchedule::default();
        let mut threshold = cfg.policy.threshold;
        let mut silent: BTreeMap<String, (usize, BTreeSet<u64>)> = BTreeMap::new();
        let mut policies: BTreeMap<String, (usize, AccessTree)> = BTreeMap::new();
        let mut requests: BTreeMap<String, (usize, Vec<String>)> = BTreeMap::new();
        let mut seen = BTreeSet::new();

        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let Some((key, value)) = body.split_once('=') else {
                return Err(err(body, Some(line), "expected `key = value`"));
            };
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(err(key, Some(line), "duplicate key"));
            }
            match key {
                "seed" => cfg.seed = number(key, line, value)?,
                "wnc" => cfg.wnc = value.to_string(),
                "csp" => cfg.csp = value.to_string(),
                "sensors" => {
                    cfg.sensors = words(value)
                        .into_iter()
                        .map(|name| SensorSpec {
                            name,
                            silent: BTreeSet::new(),
                        })
                        .collect()
                }
                "chain_length" => cfg.chain_length = number(key, line, value)?,
                "epochs" => cfg.epochs = number(key, line, value)?,
                "ticks_per_epoch" => cfg.ticks_per_epoch = number(key, line, value)?,
                "threshold" => threshold = number(key, line, value)?,
                "penalty.auth" => schedule.auth = number(key, line, value)?,
                "penalty.activity" => schedule.activity = number(key, line, value)?,
                "penalty.report" => schedule.report = number(key, line, value)?,
                "weights" => {
                    let w = words(value)
                        .iter()
                        .map(|x| number::<f64>(key, line, x))
                        .collect::<Result<Vec<_>, _>>()?;
                    let [a, b, c] = w[..] else {
                        return Err(err(key, Some(line), "expected three weights"));
                    };
                    weights = Some(
                        ScoringWeights::new(a, b, c)
                            .map_err(|e| err(key, Some(line), e.to_string()))?,
                    );
                }
                "receivers" => cfg.receivers = words(value),
                "data_attributes" => cfg.data_attributes = words(value),
                "upload_attributes" => cfg.upload_attributes = words(value),
                _ => {
                    let parts: Vec<&str> = key.split('.').collect();
                    match parts[..] {
                        ["user", name, "policy"] => {
                            let tree = AccessTree::parse(value)
                                .map_err(|e| err(key, Some(line), e.to_string()))?;
                            policies.insert(name.to_string(), (line, tree));
                        }
                        ["user", name, "request"] => {
                            requests.insert(name.to_string(), (line, words(value)));
                        }
                        ["sensor", name, "silent"] => {
                            let epochs = words(value)
                                .iter()
                                .map(|x| number::<u64>(key, line, x))
                                .collect::<Result<_, _>>()?;
                            silent.insert(name.to_string(), (line, epochs));
                        }
                        _ => return Err(err(key, Some(line), "unknown key")),
                    }
                }
            }
        }

        for (name, (line, tree)) in policies {
            let request = requests.remove(&name).map(|r| r.1).unwrap_or_default();
            if !valid_name(&name) {
                return Err(err(&format!("user.{name}.policy"), Some(line), "bad user name"));
            }
            cfg.users.push(UserSpec {
                name,
                policy: tree,
                request,
            });
        }
        if let Some((name, (line, _))) = requests.into_iter().next() {
            return Err(err(
                &format!("user.{name}.request"),
                Some(line),
                "user has no policy",
            ));
        }
        for (name, (line, epochs)) in silent {
            let Some(s) = cfg.sensors.iter_mut().find(|s| s.name == name) else {
                return Err(err(
                    &format!("sensor.{name}.silent"),
                    Some(line),
                    "not a listed sensor",
                ));
            };
            s.silent = epochs;
        }
        cfg.policy = TrustPolicy {
            weights: weights.unwrap_or_default(),
            schedule,
            threshold,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Field-level checks shared by the parser and programmatic configs.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.sensors.is_empty() {
            return Err(err("sensors", None, "at least one sensor is required"));
        }
        if self.users.is_empty() {
            return Err(err("user.*.policy", None, "at least one user is required"));
        }
        let mut names = BTreeSet::new();
        let roster = [self.wnc.as_str(), self.csp.as_str()]
            .into_iter()
            .chain(self.sensors.iter().map(|s| s.name.as_str()))
            .chain(self.users.iter().map(|u| u.name.as_str()));
        for n in roster {
            if !valid_name(n) {
                return Err(err("sensors", None, format!("bad entity name `{n}`")));
            }
            if !names.insert(n) {
                return Err(err("sensors", None, format!("entity `{n}` listed twice")));
            }
        }
        if self.epochs == 0 {
            return Err(err("epochs", None, "must be at least 1"));
        }
        if self.chain_length < self.epochs {
            return Err(err(
                "chain_length",
                None,
                format!(
                    "chain length {} is shorter than {} epochs",
                    self.chain_length, self.epochs
                ),
            ));
        }
        if self.ticks_per_epoch < MIN_TICKS_PER_EPOCH {
            return Err(err(
                "ticks_per_epoch",
                None,
                format!("must be at least {MIN_TICKS_PER_EPOCH}"),
            ));
        }
        if !(0.0..=100.0).contains(&self.policy.threshold) {
            return Err(err("threshold", None, "must lie in 0..=100"));
        }
        let s = &self.policy.schedule;
        if [s.auth, s.activity, s.report].iter().any(|p| !(*p >= 0.0)) {
            return Err(err("penalty.*", None, "penalties must be non-negative"));
        }
        if self.receivers.is_empty() {
            return Err(err("receivers", None, "receiver set must be nonempty"));
        }
        let mut seen = BTreeSet::new();
        for r in &self.receivers {
            if !self.users.iter().any(|u| &u.name == r) {
                return Err(err("receivers", None, format!("`{r}` is not a user")));
            }
            if !seen.insert(r) {
                return Err(err("receivers", None, format!("`{r}` listed twice")));
            }
        }
        if self.data_attributes.is_empty() {
            return Err(err("data_attributes", None, "must be nonempty"));
        }
        let data: BTreeSet<&str> = self.data_attributes.iter().map(String::as_str).collect();
        if data.len() != self.data_attributes.len() {
            return Err(err("data_attributes", None, "duplicate attribute"));
        }
        if self.upload_attributes.is_empty() {
            return Err(err("upload_attributes", None, "must be nonempty"));
        }
        for a in &self.upload_attributes {
            if !data.contains(a.as_str()) {
                return Err(err(
                    "upload_attributes",
                    None,
                    format!("`{a}` is not a data attribute"),
                ));
            }
        }
        for u in &self.users {
            for leaf in u.policy.leaves() {
                if !data.contains(leaf) {
                    return Err(err(
                        &format!("user.{}.policy", u.name),
                        None,
                        format!("`{leaf}` is not a data attribute"),
                    ));
                }
            }
        }
        for s in &self.sensors {
            if let Some(e) = s.silent.iter().find(|e| **e >= self.epochs) {
                return Err(err(
                    &format!("sensor.{}.silent", s.name),
                    None,
                    format!("epoch {e} is past the last epoch"),
                ));
            }
        }
        Ok(())
    }

    /// Users who hold both rights over every upload: in the receiver set
    /// and with a policy the upload attributes satisfy.
    pub fn authorized_users(&self) -> BTreeSet<String> {
        let attrs: BTreeSet<&str> = self.upload_attributes.iter().map(String::as_str).collect();
        self.users
            .iter()
            .filter(|u| self.receivers.contains(&u.name) && u.policy.satisfied_by(&attrs))
            .map(|u| u.name.clone())
            .collect()
    }

    /// Canonical text form; parsing it yields an equal config.
    pub fn to_text(&self) -> String {
        let p = &self.policy;
        let mut out = vec![
            format!("seed = {}", self.seed),
            format!("wnc = {}", self.wnc),
            format!("csp = {}", self.csp),
            format!(
                "sensors = {}",
                self.sensors
                    .iter()
                    .map(|s| s.name.as_str())
                    .collect::<Vec<_>>()
                    .join(" ")
            ),
            format!("chain_length = {}", self.chain_length),
            format!("epochs = {}", self.epochs),
            format!("ticks_per_epoch = {}", self.ticks_per_epoch),
            format!("threshold = {}", p.threshold),
            format!("penalty.auth = {}", p.schedule.auth),
            format!("penalty.activity = {}", p.schedule.activity),
            format!("penalty.report = {}", p.schedule.report),
            format!(
                "weights = {} {} {}",
                p.weights.sf1(),
                p.weights.sf2(),
                p.weights.sf3()
            ),
            format!("receivers = {}", self.receivers.join(" ")),
            format!("data_attributes = {}", self.data_attributes.join(" ")),
            format!("upload_attributes = {}", self.upload_attributes.join(" ")),
        ];
        for u in &self.users {
            out.push(format!("user.{}.policy = {}", u.name, u.policy));
            if !u.request.is_empty() {
                out.push(format!("user.{}.request = {}", u.name, u.request.join(" ")));
            }
        }
        for s in &self.sensors {
            if !s.silent.is_empty() {
                let e: Vec<String> = s.silent.iter().map(u64::to_string).collect();
                out.push(format!("sensor.{}.silent = {}", s.name, e.join(" ")));
            }
        }
        out.join("\n") + "\n"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const HONEST: &str = "\
# one sensor, one user
seed = 7
sensors = w1
chain_length = 16
epochs = 4
receivers = alice
data_attributes = hr, temp, ward-a
upload_attributes = hr ward-a
user.alice.policy = AND(hr, ward-a)
user.alice.request = hr
";

    #[test]
    fn parses_and_round_trips() {
        let cfg = ScenarioConfig::parse(HONEST).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.chain_length, 16);
        assert_eq!(cfg.users[0].request, ["hr"]);
        assert_eq!(cfg.data_attributes, ["hr", "temp", "ward-a"]);
        assert_eq!(ScenarioConfig::parse(&cfg.to_text()).unwrap(), cfg);
        assert_eq!(cfg.authorized_users().into_iter().collect::<Vec<_>>(), ["alice"]);
    }

    #[test]
    fn chain_shorter_than_epochs() {
        let e = ScenarioConfig::parse(&HONEST.replace("chain_length = 16", "chain_length = 3"))
            .unwrap_err();
        assert_eq!(e.field, "chain_length");
    }

    #[test]
    fn field_diagnostics() {
        let cases = [
            ("bogus = 1\n", "bogus"),
            ("epochs = four\n", "epochs"),
            ("receivers = zed\n", "receivers"),
            ("upload_attributes = hr heart\n", "upload_attributes"),
            ("user.bob.request = hr\n", "user.bob.request"),
            ("sensor.w9.silent = 1\n", "sensor.w9.silent"),
            ("user.alice.policy = AND(hr\n", "user.alice.policy"),
        ];
        for (patch, field) in cases {
            let key = patch.split('=').next().unwrap().trim();
            let base: String = HONEST
                .lines()
                .filter(|l| !l.starts_with(&format!("{key} ")))
                .map(|l| format!("{l}\n"))
                .collect();
            let e = ScenarioConfig::parse(&(base + patch)).unwrap_err();
            assert_eq!(e.field, field, "{patch}");
        }
        assert!(ScenarioConfig::parse("seed = 1\nseed = 2\n").is_err());
        assert!(ScenarioConfig::parse("epochs = 2\n").unwrap_err().field == "sensors");
    }
}
