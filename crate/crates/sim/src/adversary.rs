//! Dolev-Yao adversary scripts.
//!
//! One action per line: a verb, then `key=value` selectors and arguments.
//!
//! ```text
//! flip kind=SensorData nth=0 bit=100
//! flip kind=Upload bits=0..64/37     # 64 flips, stride 37 bits
//! drop kind=TokenAck from=wnc to=w1
//! replay kind=SensorData nth=2 of=14 # also deliver a copy of message #14
//! delay index=9 ticks=12
//! replace index=3 hex=0800ff
//! ```
//!
//! `index` is the global send index, `nth` counts messages of the selected
//! kind (and link, if given). Bit positions wrap modulo the message length.

use std::fmt;
use std::str::FromStr;

use ztac_core::protocol::{Envelope, MessageKind};

use crate::scenario::ConfigError;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Selector {
    pub index: Option<u64>,
    pub kind: Option<MessageKind>,
    pub nth: Option<u64>,
    pub from: Option<String>,
    pub to: Option<String>,
}

impl Selector {
    /// Whether this selector is about the same stream as `env`, ignoring
    /// `index` and `nth`.
    pub fn same_stream(&self, env: &Envelope) -> bool {
        self.kind.is_none_or(|k| k == env.kind)
            && self.from.as_ref().is_none_or(|f| *f == env.from)
            && self.to.as_ref().is_none_or(|t| *t == env.to)
    }

    /// `nth` is the position of `env` within its stream.
    pub fn matches(&self, index: u64, nth: u64, env: &Envelope) -> bool {
        self.same_stream(env)
            && self.index.is_none_or(|i| i == index)
            && self.nth.is_none_or(|n| n == nth)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Action {
    Drop,
    FlipBit(u64),
    Replace(Vec<u8>),
    /// Deliver a copy of an earlier message (by send index) alongside.
    Replay(u64),
    Delay(u64),
}

impl Action {
    pub fn name(&self) -> &'static str {
        match self {
            Action::Drop => "drop",
            Action::FlipBit(_) => "flip",
            Action::Replace(_) => "replace",
            Action::Replay(_) => "replay",
            Action::Delay(_) => "delay",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdversaryAction {
    pub selector: Selector,
    pub action: Action,
    /// Source line, for diagnostics.
    pub line: usize,
}

impl fmt::Display for AdversaryAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.action.name())?;
        let s = &self.selector;
        if let Some(i) = s.index {
            write!(f, " index={i}")?;
        }
        if let Some(k) = s.kind {
            write!(f, " kind={}", k.name())?;
        }
        if let Some(n) = s.nth {
            write!(f, " nth={n}")?;
        }
        if let Some(x) = &s.from {
            write!(f, " from={x}")?;
        }
        if let Some(x) = &s.to {
            write!(f, " to={x}")?;
        }
        match &self.action {
            Action::Drop => Ok(()),
            Action::FlipBit(b) => write!(f, " bit={b}"),
            Action::Replace(b) => write!(f, " hex={}", hex::encode(b)),
            Action::Replay(i) => write!(f, " of={i}"),
            Action::Delay(t) => write!(f, " ticks={t}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AdversaryScript {
    pub actions: Vec<AdversaryAction>,
}

fn bad(line: usize, field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError {
        field: field.to_string(),
        line: Some(line),
        message: message.into(),
    }
}

fn num<T: FromStr>(line: usize, key: &str, v: &str) -> Result<T, ConfigError> {
    v.parse()
        .map_err(|_| bad(line, key, format!("expected a number, got `{v}`")))
}

/// `A..B` or `A..B/S`.
fn bit_range(line: usize, v: &str) -> Result<Vec<u64>, ConfigError> {
    let (range, step) = v.split_once('/').unwrap_or((v, "1"));
    let (a, b) = range
        .split_once("..")
        .ok_or_else(|| bad(line, "bits", "expected `A..B` or `A..B/S`"))?;
    let (a, b, step): (u64, u64, u64) = (num(line, "bits", a)?, num(line, "bits", b)?, num(line, "bits", step)?);
    if step == 0 || b <= a {
        return Err(bad(line, "bits", "empty range"));
    }
    // count, not span: `0..64/37` is 64 positions 37 bits apart
    Ok((0..b - a).map(|k| a + k * step).collect())
}

impl AdversaryScript {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut actions = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let mut tokens = body.split_whitespace();
            let verb = tokens.next().expect("nonempty line");
            let mut selector = Selector::default();
            let mut args: Vec<(&str, &str)> = Vec::new();
            for t in tokens {
                let (k, v) = t
                    .split_once('=')
                    .ok_or_else(|| bad(line, t, "expected `key=value`"))?;
                match k {
                    "index" => selector.index = Some(num(line, k, v)?),
                    "nth" => selector.nth = Some(num(line, k, v)?),
                    "kind" => {
                        selector.kind = Some(
                            MessageKind::from_name(v)
                                .ok_or_else(|| bad(line, k, format!("unknown message kind `{v}`")))?,
                        )
                    }
                    "from" => selector.from = Some(v.to_string()),
                    "to" => selector.to = Some(v.to_string()),
                    _ => args.push((k, v)),
                }
            }
            let arg = |name: &str| args.iter().find(|(k, _)| *k == name).map(|(_, v)| *v);
            let expected: &[&str] = match verb {
                "drop" => &[],
                "flip" => &["bit", "bits"],
                "replace" => &["hex"],
                "replay" => &["of"],
                "delay" => &["ticks"],
                _ => return Err(bad(line, verb, "unknown action")),
            };
            if let Some((k, _)) = args.iter().find(|(k, _)| !expected.contains(k)) {
                return Err(bad(line, k, format!("not an argument of `{verb}`")));
            }
            let need = |name: &str| {
                arg(name).ok_or_else(|| bad(line, name, format!("`{verb}` needs `{name}=`")))
            };
            let acts = match verb {
                "drop" => vec![Action::Drop],
                "flip" => match (arg("bit"), arg("bits")) {
                    (Some(b), None) => vec![Action::FlipBit(num(line, "bit", b)?)],
                    (None, Some(r)) => bit_range(line, r)?.into_iter().map(Action::FlipBit).collect(),
                    _ => return Err(bad(line, "bit", "give exactly one of `bit=` and `bits=`")),
                },
                "replace" => vec![Action::Replace(
                    hex::decode(need("hex")?).map_err(|e| bad(line, "hex", e.to_string()))?,
                )],
                "replay" => vec![Action::Replay(num(line, "of", need("of")?)?)],
                "delay" => vec![Action::Delay(num(line, "ticks", need("ticks")?)?)],
                _ => unreachable!(),
            };
            actions.extend(acts.into_iter().map(|action| AdversaryAction {
                selector: selector.clone(),
                action,
                line,
            }));
        }
        Ok(Self { actions })
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// `flips` single-bit flips on each of the first `messages` messages of
    /// every listed kind, spread over the message with a stride of `stride`
    /// bits.
    pub fn flip_sweep(kinds: &[MessageKind], messages: u64, flips: u64, stride: u64) -> Self {
        let mut actions = Vec::new();
        for kind in kinds {
            for nth in 0..messages {
                for k in 0..flips {
                    actions.push(AdversaryAction {
                        selector: Selector {
                            kind: Some(*kind),
                            nth: Some(nth),
                            ..Selector::default()
                        },
                        action: Action::FlipBit(k * stride + nth),
                        line: 0,
                    });
                }
            }
        }
        Self { actions }
    }

    pub fn to_text(&self) -> String {
        self.actions.iter().map(|a| format!("{a}\n")).collect()
    }
}

/// Flips bit `bit` (modulo the bit length) of `bytes`, most significant bit
/// first within each byte.
pub fn flip_bit(bytes: &mut [u8], bit: u64) -> Option<u64> {
    if bytes.is_empty() {
        return None;
    }
    let pos = bit % (bytes.len() as u64 * 8);
    bytes[(pos / 8) as usize] ^= 0x80 >> (pos % 8);
    Some(pos)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_print() {
        let text = "\
# comment
flip kind=SensorData nth=0 bit=100
flip kind=Upload bits=0..4/37
drop kind=TokenAck from=wnc to=w1
replay kind=SensorData nth=2 of=14
delay index=9 ticks=12
replace index=3 hex=0800ff
";
        let s = AdversaryScript::parse(text).unwrap();
        assert_eq!(s.actions.len(), 9);
        let bits: Vec<_> = s.actions[1..5]
            .iter()
            .map(|a| match a.action {
                Action::FlipBit(b) => b,
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(bits, [0, 37, 74, 111]);
        assert_eq!(s.actions[5].selector.from.as_deref(), Some("wnc"));
        assert_eq!(s.actions[8].action, Action::Replace(vec![8, 0, 0xff]));
        assert_eq!(AdversaryScript::parse(&s.to_text()).unwrap().actions.len(), 9);
    }

    #[test]
    fn errors_name_the_line_and_field() {
        for (text, field) in [
            ("explode index=1", "explode"),
            ("flip index=1", "bit"),
            ("flip kind=Nope bit=1", "kind"),
            ("delay index=1", "ticks"),
            ("drop index=x", "index"),
            ("drop ticks=3", "ticks"),
            ("flip bits=5..5", "bits"),
        ] {
            let e = AdversaryScript::parse(&format!("\n{text}\n")).unwrap_err();
            assert_eq!((e.field.as_str(), e.line), (field, Some(2)), "{text}");
        }
    }

    #[test]
    fn flip_wraps_and_is_an_involution() {
        let mut b = vec![0u8; 4];
        assert_eq!(flip_bit(&mut b, 33), Some(1));
        assert_eq!(b, [0x40, 0, 0, 0]);
        flip_bit(&mut b, 1);
        assert_eq!(b, [0; 4]);
        assert_eq!(flip_bit(&mut [], 3), None);
    }
}
