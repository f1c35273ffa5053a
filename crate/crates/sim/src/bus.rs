//! Single-threaded discrete-event bus. Every hop takes one tick; events due
//! at the same tick leave in send order.

use std::collections::BTreeMap;

use ztac_core::protocol::Envelope;

use crate::adversary::{flip_bit, Action, AdversaryAction, AdversaryScript};

/// Whether scripted actions alter the live message or are tried against a
/// copy of the receiver.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttackMode {
    Live,
    Fork,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InFlight {
    pub index: u64,
    pub env: Envelope,
    /// Bytes as the sender produced them.
    pub original: Vec<u8>,
    /// A copy injected by the adversary rather than sent by an entity.
    pub injected: bool,
    pub delayed: bool,
    /// Tampered variants to try against a clone of the receiver.
    pub forks: Vec<(AdversaryAction, Vec<u8>)>,
}

impl InFlight {
    pub fn tampered(&self) -> bool {
        self.env.bytes != self.original
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BusStats {
    pub sent: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub delayed: u64,
    pub injected: u64,
    pub tampered: u64,
}

impl BusStats {
    /// Every sent message was delivered or dropped, nothing is in flight.
    pub fn balanced(&self, in_flight: usize) -> bool {
        in_flight == 0 && self.sent + self.injected == self.delivered + self.dropped
    }
}

#[derive(Debug, Clone)]
pub struct Bus {
    now: u64,
    seq: u64,
    queue: BTreeMap<(u64, u64), InFlight>,
    script: AdversaryScript,
    mode: AttackMode,
    /// Messages seen so far in each action's stream.
    stream_pos: Vec<u64>,
    /// Sent bytes by send index, for replays.
    history: Vec<Envelope>,
    /// Every byte string that crossed the wire, sent or delivered.
    transcript: Vec<Vec<u8>>,
    stats: BusStats,
}

impl Bus {
    pub fn new(script: AdversaryScript, mode: AttackMode) -> Self {
        let n = script.actions.len();
        Self {
            now: 0,
            seq: 0,
            queue: BTreeMap::new(),
            script,
            mode,
            stream_pos: vec![0; n],
            history: Vec::new(),
            transcript: Vec::new(),
            stats: BusStats::default(),
        }
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn stats(&self) -> BusStats {
        self.stats
    }

    pub fn in_flight(&self) -> usize {
        self.queue.len()
    }

    pub fn transcript(&self) -> &[Vec<u8>] {
        &self.transcript
    }

    pub fn script(&self) -> &AdversaryScript {
        &self.script
    }

    pub fn mode(&self) -> AttackMode {
        self.mode
    }

    fn schedule(&mut self, at: u64, item: InFlight) {
        self.seq += 1;
        self.queue.insert((at, self.seq), item);
    }

    /// Hands `env` to the network. Returns its send index.
    pub fn send(&mut self, env: Envelope) -> u64 {
        let index = self.stats.sent;
        self.stats.sent += 1;
        self.history.push(env.clone());
        self.transcript.push(env.bytes.clone());

        let matched: Vec<AdversaryAction> = self
            .script
            .actions
            .iter()
            .enumerate()
            .filter(|(_, a)| a.selector.same_stream(&env))
            .filter_map(|(i, a)| {
                let nth = self.stream_pos[i];
                self.stream_pos[i] += 1;
                a.selector.matches(index, nth, &env).then(|| a.clone())
            })
            .collect();

        let mut item = InFlight {
            index,
            original: env.bytes.clone(),
            env,
            injected: false,
            delayed: false,
            forks: Vec::new(),
        };
        let mut at = self.now + 1;
        let mut replays = Vec::new();
        for a in matched {
            if self.mode == AttackMode::Fork {
                let mut bytes = item.original.clone();
                match &a.action {
                    Action::FlipBit(b) => {
                        flip_bit(&mut bytes, *b);
                    }
                    Action::Replace(b) => bytes = b.clone(),
                    // only content changes make sense against a clone
                    _ => continue,
                }
                item.forks.push((a, bytes));
                continue;
            }
            match &a.action {
                Action::Drop => {
                    self.stats.dropped += 1;
                    return index;
                }
                Action::FlipBit(b) => {
                    flip_bit(&mut item.env.bytes, *b);
                }
                Action::Replace(b) => item.env.bytes = b.clone(),
                Action::Replay(of) => {
                    if let Some(old) = self.history.get(*of as usize) {
                        replays.push(old.clone());
                    }
                }
                Action::Delay(t) => {
                    at += t;
                    item.delayed = true;
                }
            }
        }
        if item.delayed {
            self.stats.delayed += 1;
        }
        self.schedule(at, item);
        for old in replays {
            self.stats.injected += 1;
            self.transcript.push(old.bytes.clone());
            let copy = InFlight {
                index,
                original: old.bytes.clone(),
                env: old,
                injected: true,
                delayed: false,
                forks: Vec::new(),
            };
            self.schedule(at, copy);
        }
        index
    }

    /// Removes the next message due at or before `until`, advancing the
    /// clock to its delivery tick.
    pub fn next_due(&mut self, until: u64) -> Option<InFlight> {
        let (&(at, seq), _) = self.queue.first_key_value()?;
        if at > until {
            return None;
        }
        let item = self.queue.remove(&(at, seq)).expect("present");
        self.now = self.now.max(at);
        self.stats.delivered += 1;
        if item.tampered() {
            self.stats.tampered += 1;
            self.transcript.push(item.env.bytes.clone());
        }
        Some(item)
    }

    /// Tick of the latest queued event, if any.
    pub fn horizon(&self) -> Option<u64> {
        self.queue.keys().map(|(t, _)| *t).max()
    }

    pub fn advance_to(&mut self, tick: u64) {
        self.now = self.now.max(tick);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ztac_core::protocol::MessageKind;

    fn env(kind: MessageKind, body: &[u8]) -> Envelope {
        let mut bytes = vec![kind.tag()];
        bytes.extend_from_slice(body);
        Envelope {
            from: "a".into(),
            to: "b".into(),
            kind,
            bytes,
        }
    }

    fn drain(bus: &mut Bus) -> Vec<InFlight> {
        std::iter::from_fn(|| bus.next_due(u64::MAX)).collect()
    }

    #[test]
    fn fifo_within_a_tick_and_conservation() {
        let mut bus = Bus::new(AdversaryScript::default(), AttackMode::Live);
        for i in 0..5u8 {
            bus.send(env(MessageKind::Hello, &[i]));
        }
        let out = drain(&mut bus);
        assert_eq!(out.iter().map(|m| m.env.bytes[1]).collect::<Vec<_>>(), [0, 1, 2, 3, 4]);
        assert!(bus.stats().balanced(bus.in_flight()));
        assert_eq!(bus.now(), 1);
    }

    #[test]
    fn scripted_actions() {
        let script = AdversaryScript::parse(
            "drop kind=Hello nth=1\nflip kind=Hello nth=2 bit=15\ndelay kind=Hello nth=3 ticks=5\nreplay kind=Hello nth=4 of=0\n",
        )
        .unwrap();
        let mut bus = Bus::new(script, AttackMode::Live);
        for i in 0..5u8 {
            bus.send(env(MessageKind::Hello, &[i]));
        }
        let out = drain(&mut bus);
        let bodies: Vec<u8> = out.iter().map(|m| m.env.bytes[1]).collect();
        // #1 dropped, #2 flipped in its low bit, #4 and the replayed #0 at
        // tick 1, #3 last
        assert_eq!(bodies, [0, 3, 4, 0, 3]);
        assert!(out[1].tampered());
        assert!(out[3].injected);
        assert!(out[4].delayed);
        let s = bus.stats();
        assert_eq!((s.sent, s.dropped, s.delayed, s.injected, s.tampered), (5, 1, 1, 1, 1));
        assert!(s.balanced(bus.in_flight()));
        assert_eq!(bus.now(), 6);
    }

    #[test]
    fn fork_mode_leaves_the_live_message_alone() {
        let script = AdversaryScript::parse("flip kind=Hello bits=0..3\n").unwrap();
        let mut bus = Bus::new(script, AttackMode::Fork);
        bus.send(env(MessageKind::Hello, &[0]));
        let out = drain(&mut bus);
        assert!(!out[0].tampered());
        assert_eq!(out[0].forks.len(), 3);
        assert_eq!(out[0].forks[0].1, [0x81, 0]);
    }
}
