//! Primitive timings for the cost-table vocabulary. Wall-clock numbers live
//! here only; run reports never include them.

use std::collections::BTreeSet;
use std::hint::black_box;
use std::time::Instant;

use ztac_core::abe::{abe_decrypt, abe_encrypt, abe_keygen, abe_setup, AccessTree, AttributeUniverse};
use ztac_core::crypto::{
    ecdh_keygen, ecdh_shared, hash, sig_verify, sign, sym_encrypt_aad, Nonce, SignatureKeyPair, SymKey,
};
use ztac_core::group::SECURITY_BITS;
use ztac_core::ibbe::{ibbe_enc, ibbe_setup, IbbeParams, IBBE_CONSTRUCTION};
use ztac_core::metrics::Op;
use ztac_core::protocol::entity_rng;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub op: Op,
    pub iters: usize,
    pub median_us: f64,
    pub p95_us: f64,
}

/// Nearest-rank percentile of sorted samples.
fn percentile(sorted: &[f64], p: f64) -> f64 {
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

fn time<F: FnMut()>(op: Op, iters: usize, mut f: F) -> BenchRow {
    f();
    let mut samples: Vec<f64> = (0..iters)
        .map(|_| {
            let t = Instant::now();
            f();
            t.elapsed().as_secs_f64() * 1e6
        })
        .collect();
    samples.sort_by(f64::total_cmp);
    BenchRow {
        op,
        iters,
        median_us: percentile(&samples, 50.0),
        p95_us: percentile(&samples, 95.0),
    }
}

/// One row per cost-table term, in table order.
pub fn bench_primitives(iters: usize) -> Vec<BenchRow> {
    let iters = iters.max(1);
    let mut rng = entity_rng(0, "bench");
    let labels = ["hr", "temp", "ward-a", "ward-b"];
    let universe = AttributeUniverse::new(labels).expect("distinct labels");
    let (pk, mk) = abe_setup(SECURITY_BITS, &universe, &mut rng).expect("setup");
    let policy = AccessTree::parse("AND(hr, ward-a)").expect("policy");
    let attrs: BTreeSet<String> = ["hr", "ward-a"].iter().map(|s| s.to_string()).collect();
    let dk = abe_keygen(&policy, &mk, &mut rng).expect("keygen");
    let payload = [7u8; 68];
    let ct = abe_encrypt(&payload, &attrs, &pk, &mut rng).expect("encrypt");
    let receivers: Vec<String> = ["alice", "bob", "carol", "dave"].iter().map(|s| s.to_string()).collect();
    let (ipk, _) = ibbe_setup(IbbeParams::new(receivers.len(), 64), &mut rng).expect("ibbe setup");
    let a = ecdh_keygen(&mut rng);
    let b = ecdh_keygen(&mut rng);
    let b_pub = b.public().to_bytes();
    let signer = SignatureKeyPair::generate(&mut rng);
    let vk = signer.verification_key();
    let msg = [3u8; 64];
    let sig = sign(&signer, &msg);
    let key = SymKey([9; 32]);

    let mut rows = Vec::with_capacity(Op::TABLE.len());
    for op in Op::TABLE {
        let row = match op {
            Op::Enc => time(op, iters, || {
                black_box(sym_encrypt_aad(&key, &msg, &Nonce::counter(1, 1), b"aad"));
            }),
            Op::Sha => time(op, iters, || {
                black_box(hash(&msg));
            }),
            Op::Ecdh => time(op, iters, || {
                black_box(ecdh_shared(&a, &b_pub, b"bench").expect("valid point"));
            }),
            Op::Ver => time(op, iters, || {
                black_box(sig_verify(&vk, &msg, &sig));
            }),
            Op::AbeSetup => time(op, iters, || {
                black_box(abe_setup(SECURITY_BITS, &universe, &mut rng).expect("setup"));
            }),
            Op::AbeKeyGen => time(op, iters, || {
                black_box(abe_keygen(&policy, &mk, &mut rng).expect("keygen"));
            }),
            Op::AbeEnc => time(op, iters, || {
                black_box(abe_encrypt(&payload, &attrs, &pk, &mut rng).expect("encrypt"));
            }),
            Op::AbeDec => time(op, iters, || {
                black_box(abe_decrypt(&ct, &dk).expect("satisfied"));
            }),
            Op::Ibbe => time(op, iters, || {
                black_box(ibbe_enc(&receivers, &ipk, &mut rng).expect("encrypt"));
            }),
            _ => unreachable!("TABLE holds table terms only"),
        };
        rows.push(row);
    }
    rows
}

pub fn render(rows: &[BenchRow]) -> String {
    let mut out = format!("ibbe construction: {IBBE_CONSTRUCTION}\n");
    out.push_str(&format!("{:<14} {:>7} {:>12} {:>12}\n", "op", "iters", "median_us", "p95_us"));
    for r in rows {
        out.push_str(&format!(
            "{:<14} {:>7} {:>12.2} {:>12.2}\n",
            r.op.term(),
            r.iters,
            r.median_us,
            r.p95_us
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_rank() {
        let s: Vec<f64> = (1..=20).map(f64::from).collect();
        assert_eq!(percentile(&s, 50.0), 10.0);
        assert_eq!(percentile(&s, 95.0), 19.0);
        assert_eq!(percentile(&[4.0], 95.0), 4.0);
    }
}
