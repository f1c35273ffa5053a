use proptest::collection::vec;
use proptest::prelude::*;
use ztac_core::crypto::HashDigest;
use ztac_core::protocol::messages::{
    Message, SensorData, SensorEntry, TokenAck, Upload, UploadRecord,
};
use ztac_core::trust::{
    apply_penalty, compute_score, EventKind, PenaltySchedule, ScoringWeights, TrustEvent,
    TrustFactors, TrustMerkleTree, TrustToken, TOKEN_LEN,
};

const KINDS: [EventKind; 8] = [
    EventKind::AuthFailure,
    EventKind::UnauthorizedMessage,
    EventKind::SignatureFailure,
    EventKind::HmacFailure,
    EventKind::Inactivity,
    EventKind::MalformedRequest,
    EventKind::UserReport,
    EventKind::ReportedAbuse,
];

fn name() -> impl Strategy<Value = String> {
    "[a-z][a-z0-9-]{0,11}"
}

fn token() -> impl Strategy<Value = TrustToken> {
    (any::<[u8; 32]>(), any::<u64>()).prop_map(|(r, epoch)| TrustToken {
        root: HashDigest(r),
        epoch,
    })
}

fn entry() -> impl Strategy<Value = SensorEntry> {
    (name(), any::<u64>(), vec(any::<u8>(), 0..64)).prop_map(|(sensor, key_epoch, ciphertext)| {
        SensorEntry {
            sensor,
            key_epoch,
            ciphertext,
        }
    })
}

fn record() -> impl Strategy<Value = UploadRecord> {
    (
        name(),
        any::<u64>(),
        vec(name(), 0..4),
        vec(name(), 0..4),
        vec(any::<u8>(), 0..80),
        vec(any::<u8>(), 0..120),
        vec(entry(), 0..3),
    )
        .prop_map(
            |(wnc, window, attributes, receivers, header, abe, entries)| UploadRecord {
                wnc,
                window,
                attributes,
                receivers,
                header,
                abe,
                entries,
            },
        )
}

fn message() -> impl Strategy<Value = Message> {
    prop_oneof![
        (
            name(),
            name(),
            any::<u64>(),
            any::<u64>(),
            vec(any::<u8>(), 0..64),
            token(),
            any::<[u8; 32]>()
        )
            .prop_map(|(from, to, key_epoch, window, ciphertext, token, mac)| {
                Message::SensorData(SensorData {
                    from,
                    to,
                    key_epoch,
                    window,
                    ciphertext,
                    token,
                    mac,
                })
            }),
        (name(), name(), token(), any::<[u8; 32]>()).prop_map(|(from, to, token, mac)| {
            Message::TokenAck(TokenAck {
                from,
                to,
                token,
                mac,
            })
        }),
        (name(), name(), record(), any::<[u8; 32]>()).prop_map(|(from, to, record, mac)| {
            Message::Upload(Upload {
                from,
                to,
                record,
                mac,
            })
        }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn score_is_the_weighted_sum(f1 in 0.0f64..=100.0, f2 in 0.0f64..=100.0, f3 in 0.0f64..=100.0) {
        let s = compute_score(&TrustFactors::new(f1, f2, f3), &ScoringWeights::default());
        prop_assert!((s - (0.4 * f1 + 0.4 * f2 + 0.2 * f3)).abs() <= 1e-12);
    }

    #[test]
    fn penalties_never_raise_the_score(
        events in vec((0usize..8, 0.01f64..=1.0), 0..40),
    ) {
        let weights = ScoringWeights::default();
        let schedule = PenaltySchedule::default();
        let mut factors = TrustFactors::<f64>::full();
        let mut last = compute_score(&factors, &weights);
        for (i, (k, sev)) in events.into_iter().enumerate() {
            let ev = TrustEvent::with_severity(KINDS[k], sev, i as u64).unwrap();
            factors = apply_penalty(&factors, &ev, &schedule);
            let s = compute_score(&factors, &weights);
            prop_assert!(s <= last && s >= 0.0);
            last = s;
        }
    }

    #[test]
    fn root_depends_on_score_and_epoch(
        a in 0i64..=10000, b in 0i64..=10000, ea in 1u64..50, eb in 1u64..50,
    ) {
        let root = |centi: i64, epoch: u64| {
            let (mut t, _) = TrustMerkleTree::init(b"w1", 100.0f64).unwrap();
            t.update(centi as f64 / 100.0, epoch).unwrap();
            *t.root()
        };
        prop_assert_eq!(root(a, ea) == root(b, eb), a == b && ea == eb);
    }

    #[test]
    fn any_token_byte_change_fails(pos in 0usize..TOKEN_LEN, delta in 1u8..=255) {
        let (tree, tok) = TrustMerkleTree::init(b"w1", 100.0f64).unwrap();
        let mut bytes = tok.to_bytes();
        bytes[pos] = bytes[pos].wrapping_add(delta);
        let forged = TrustToken::from_bytes(&bytes).unwrap();
        prop_assert!(!tree.verify_token(&forged));
        prop_assert!(tree.verify_token(&tok));
    }

    #[test]
    fn messages_roundtrip(m in message()) {
        let bytes = m.encode();
        let back = Message::decode(&bytes).unwrap();
        prop_assert_eq!(back.encode(), bytes);
    }

    #[test]
    fn truncation_never_decodes(m in message(), cut in 1usize..16) {
        let bytes = m.encode();
        let cut = cut.min(bytes.len());
        prop_assert!(Message::decode(&bytes[..bytes.len() - cut]).is_err());
    }
}
