//! Run reports: plain text, one `[SECTION]` header per block.
//!
//! Reports carry no wall-clock data, so two runs of the same scenario and
//! seed give byte-identical files.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use ztac_core::metrics::{cell_expression, Op, Phase, Role, Tally};

use crate::audit::KeySeparation;
use crate::bus::AttackMode;
use crate::runner::Runner;

pub const MAGIC: &str = "ztac-sim report v1";

pub const SECTIONS: [&str; 9] = [
    "SCENARIO",
    "ADVERSARY",
    "COUNTS",
    "TABLE2",
    "TIMINGS",
    "TRUST",
    "OUTCOMES",
    "BUS",
    "INVARIANTS",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Invariant {
    pub name: String,
    /// Empty when the invariant holds.
    pub details: Vec<String>,
}

impl Invariant {
    pub fn new(name: &str, details: Vec<String>) -> Self {
        Self {
            name: name.to_string(),
            details,
        }
    }

    pub fn holds(&self) -> bool {
        self.details.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError(pub String);

impl std::fmt::Display for ParseError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunReport {
    pub sections: Vec<(String, Vec<String>)>,
}

/// How many times each phase ran for each role, so cells read per unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Divisors {
    pub sensors: u64,
    pub users: u64,
    pub emissions: u64,
    pub uploads: u64,
    pub requests: u64,
}

impl Divisors {
    pub fn of(phase: Phase, role: Role, d: &Divisors) -> (&'static str, u64) {
        let (unit, n) = match (phase, role) {
            (Phase::Initialization, Role::Sensor) => ("sensor", d.sensors),
            (Phase::Initialization | Phase::Registration, Role::User) => ("user", d.users),
            (Phase::Registration, Role::Csp) => ("user", d.users),
            (Phase::Uploading, Role::Sensor) => ("reading", d.emissions),
            (Phase::Uploading, _) => ("epoch", d.uploads),
            (Phase::Downloading, _) => ("request", d.requests),
            _ => ("run", 1),
        };
        (unit, n.max(1))
    }
}

/// A cell divided by `d`, keeping fractions visible when the split is uneven.
pub fn per_unit_expression(cell: &BTreeMap<Op, u64>, d: u64) -> String {
    if cell.values().all(|n| n % d == 0) {
        let per: BTreeMap<Op, u64> = cell.iter().map(|(op, n)| (*op, n / d)).collect();
        return cell_expression(&per);
    }
    cell.iter()
        .map(|(op, n)| format!("{:.3}{}", *n as f64 / d as f64, op.term()))
        .collect::<Vec<_>>()
        .join(" + ")
}

/// Parses `2T_SHA + T_Enc` back into counts. `0` is the empty cell.
pub fn parse_expression(expr: &str) -> Option<BTreeMap<Op, u64>> {
    let expr = expr.trim();
    if expr == "0" {
        return Some(BTreeMap::new());
    }
    expr.split(" + ")
        .map(|term| {
            let at = term.find("T_").or_else(|| term.find("aux:"))?;
            let (n, name) = term.split_at(at);
            let n = if n.is_empty() { 1 } else { n.parse().ok()? };
            Some((Op::from_term(name)?, n))
        })
        .collect()
}

fn verdict_name(v: &Result<(), ztac_core::protocol::Reject>) -> &'static str {
    match v {
        Ok(()) => "Accepted",
        Err(r) => r.name(),
    }
}

impl RunReport {
    pub fn build(r: &Runner, invariants: Vec<Invariant>, sep: KeySeparation) -> Self {
        let mut sections = Vec::new();
        let cfg = &r.config;

        sections.push(("SCENARIO".to_string(), cfg.to_text().lines().map(str::to_string).collect()));

        let mut adv = vec![format!(
            "mode = {}",
            match r.bus.mode() {
                AttackMode::Live => "live",
                AttackMode::Fork => "fork",
            }
        )];
        adv.extend(r.bus.script().actions.iter().map(|a| a.to_string()));
        sections.push(("ADVERSARY".into(), adv));

        let tally = r.tally();
        sections.push((
            "COUNTS".into(),
            tally
                .0
                .iter()
                .map(|((p, role, op), n)| format!("{} {} {} {n}", p.name(), role.name(), op.term()))
                .collect(),
        ));

        let d = Divisors {
            sensors: cfg.sensors.len() as u64,
            users: cfg.users.len() as u64,
            emissions: r.emissions,
            uploads: r.uploads,
            requests: r.requests,
        };
        let mut table = Vec::new();
        for phase in &Phase::ALL[1..] {
            for role in Role::ALL {
                let (unit, n) = Divisors::of(*phase, role, &d);
                table.push(format!(
                    "{} {} per={unit}:{n} = {}",
                    phase.name(),
                    role.name(),
                    per_unit_expression(&tally.cell(*phase, role), n)
                ));
            }
        }
        sections.push(("TABLE2".into(), table));

        sections.push((
            "TIMINGS".into(),
            vec!["not recorded; run `ztac-sim bench`".into()],
        ));

        let mut trust: Vec<String> = r
            .world
            .wnc
            .ledger_lines()
            .into_iter()
            .chain(r.world.csp.ledger_lines())
            .map(|l| format!("ledger {l}"))
            .collect();
        trust.extend(r.world.wnc.trust_log().iter().map(|e| {
            format!(
                "trajectory window={} sensor={} event={} score={:.2}",
                e.window,
                e.sensor,
                e.event.map_or("none".to_string(), |k| format!("{k:?}")),
                e.score
            )
        }));
        sections.push(("TRUST".into(), trust));

        let mut outcomes = Vec::new();
        for spec in &cfg.users {
            let u = &r.world.users[&spec.name];
            for rec in u.recovered() {
                outcomes.push(format!(
                    "user {} window={} sensor={} recovered",
                    spec.name, rec.window, rec.sensor
                ));
            }
            for (w, e) in u.failures() {
                outcomes.push(format!("user {} window={w} error={e:?}", spec.name));
            }
            for reason in u.denials() {
                outcomes.push(format!("user {} denied={reason:?}", spec.name));
            }
        }
        let mut verdicts: BTreeMap<(&str, &str, bool), u64> = BTreeMap::new();
        for l in &r.log {
            *verdicts
                .entry((l.kind.name(), verdict_name(&l.verdict), l.tampered || l.injected))
                .or_default() += 1;
        }
        for ((kind, v, touched), n) in verdicts {
            let tag = if touched { " adversarial" } else { "" };
            outcomes.push(format!("verdict {kind} {v}{tag} {n}"));
        }
        outcomes.extend(r.notes.iter().map(|n| format!("note {n}")));
        sections.push(("OUTCOMES".into(), outcomes));

        let s = r.bus.stats();
        let mut bus = vec![
            format!("sent = {}", s.sent),
            format!("delivered = {}", s.delivered),
            format!("dropped = {}", s.dropped),
            format!("delayed = {}", s.delayed),
            format!("injected = {}", s.injected),
            format!("tampered = {}", s.tampered),
            format!("in_flight = {}", r.bus.in_flight()),
            format!("forks.tried = {}", r.forks.tried),
            format!("forks.accepted = {}", r.forks.accepted.len()),
        ];
        bus.extend(
            r.forks
                .rejected
                .iter()
                .map(|(k, n)| format!("forks.rejected.{k} = {n}")),
        );
        bus.push(format!("audit.csp_attack_attempts = {}", sep.attack_attempts));
        bus.push(format!("audit.csp_abe_layer_opened = {}", sep.abe_layer_opened));
        sections.push(("BUS".into(), bus));

        let mut inv = Vec::new();
        for i in &invariants {
            if i.holds() {
                inv.push(format!("{} PASS", i.name));
            } else {
                inv.push(format!("{} FAIL {}", i.name, i.details.len()));
                inv.extend(i.details.iter().map(|d| format!("  - {d}")));
            }
        }
        sections.push(("INVARIANTS".into(), inv));
        Self { sections }
    }

    pub fn render(&self) -> String {
        let mut out = format!("{MAGIC}\n");
        for (name, lines) in &self.sections {
            let _ = writeln!(out, "\n[{name}]");
            for l in lines {
                let _ = writeln!(out, "{l}");
            }
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let mut lines = text.lines();
        if lines.next() != Some(MAGIC) {
            return Err(ParseError(format!("missing `{MAGIC}` header")));
        }
        let mut sections: Vec<(String, Vec<String>)> = Vec::new();
        for (i, l) in lines.enumerate() {
            if let Some(name) = l.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                sections.push((name.to_string(), Vec::new()));
            } else if let Some((_, body)) = sections.last_mut() {
                if !l.is_empty() {
                    body.push(l.to_string());
                }
            } else if !l.is_empty() {
                return Err(ParseError(format!("line {}: text before the first section", i + 2)));
            }
        }
        for want in SECTIONS {
            if !sections.iter().any(|(n, _)| n == want) {
                return Err(ParseError(format!("missing section [{want}]")));
            }
        }
        Ok(Self { sections })
    }

    pub fn section(&self, name: &str) -> &[String] {
        self.sections
            .iter()
            .find(|(n, _)| n == name)
            .map_or(&[], |(_, l)| l.as_slice())
    }

    /// `(name, holds)` per invariant.
    pub fn invariants(&self) -> Vec<(String, bool)> {
        self.section("INVARIANTS")
            .iter()
            .filter(|l| !l.starts_with(' '))
            .filter_map(|l| {
                let mut parts = l.split_whitespace();
                Some((parts.next()?.to_string(), parts.next()? == "PASS"))
            })
            .collect()
    }

    pub fn all_invariants_hold(&self) -> bool {
        let inv = self.invariants();
        !inv.is_empty() && inv.iter().all(|(_, ok)| *ok)
    }

    /// Per-unit table cells keyed by (phase, role), as rendered.
    pub fn table2(&self) -> BTreeMap<(Phase, Role), String> {
        self.section("TABLE2")
            .iter()
            .filter_map(|l| {
                let (head, expr) = l.split_once(" = ")?;
                let mut h = head.split_whitespace();
                let phase = Phase::from_name(h.next()?)?;
                let role = Role::from_name(h.next()?)?;
                Some(((phase, role), expr.to_string()))
            })
            .collect()
    }

    /// `key = value` lines of the BUS section.
    pub fn bus(&self) -> BTreeMap<String, String> {
        self.section("BUS")
            .iter()
            .filter_map(|l| l.split_once(" = "))
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect()
    }
}

/// Rebuilds the operation tally from a report's COUNTS section.
pub fn tally_counts(report: &RunReport) -> Result<Tally, ParseError> {
    let mut t = Tally::default();
    for l in report.section("COUNTS") {
        let f: Vec<&str> = l.split_whitespace().collect();
        let bad = || ParseError(format!("bad COUNTS line `{l}`"));
        let [p, r, op, n] = f.as_slice() else {
            return Err(bad());
        };
        t.add(
            Phase::from_name(p).ok_or_else(bad)?,
            Role::from_name(r).ok_or_else(bad)?,
            Op::from_term(op).ok_or_else(bad)?,
            n.parse().map_err(|_| bad())?,
        );
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expressions_roundtrip() {
        let cell = BTreeMap::from([(Op::Enc, 2), (Op::Ecdh, 2), (Op::AbeSetup, 1), (Op::Ibbe, 1)]);
        let s = per_unit_expression(&cell, 1);
        assert_eq!(s, "2T_Enc + 2T_ECDH + T_ABE-Setup + T_IBBE");
        assert_eq!(parse_expression(&s), Some(cell));
        assert_eq!(parse_expression("0"), Some(BTreeMap::new()));
        assert_eq!(per_unit_expression(&BTreeMap::from([(Op::Sha, 8)]), 4), "2T_SHA");
        assert_eq!(per_unit_expression(&BTreeMap::from([(Op::Sha, 3)]), 2), "1.500T_SHA");
        assert_eq!(parse_expression("T_nope"), None);
    }

    #[test]
    fn parse_rejects_garbage() {
        assert!(RunReport::parse("hello").is_err());
        assert!(RunReport::parse(&format!("{MAGIC}\n[COUNTS]\n")).is_err());
    }
}
