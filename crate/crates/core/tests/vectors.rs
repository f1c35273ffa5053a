//! Known-answer checks against vectors produced outside this crate
//! (Python hashlib/hmac and the `cryptography` package).

use std::collections::HashMap;

use ztac_core::crypto::{
    chain_generate, ecdh_shared, hash, hash_parts, hmac_tag, kdf, kdf_stream, sym_decrypt_aad,
    sym_encrypt_aad, AgreementKeyPair, MacKey, Nonce, SymKey,
};
use ztac_core::trust::{init_token, merkle_root, TrustMerkleTree};

fn vectors() -> HashMap<String, String> {
    include_str!("fixtures/vectors.txt")
        .lines()
        .filter_map(|l| {
            l.split_once(" = ")
                .or_else(|| l.strip_suffix(" =").map(|k| (k, "")))
        })
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect()
}

fn bytes(v: &HashMap<String, String>, key: &str) -> Vec<u8> {
    hex::decode(v.get(key).unwrap_or_else(|| panic!("missing {key}"))).unwrap()
}

fn arr32(v: &HashMap<String, String>, key: &str) -> [u8; 32] {
    bytes(v, key).try_into().unwrap()
}

#[test]
fn sha256() {
    let v = vectors();
    for i in 0..4 {
        let msg = bytes(&v, &format!("sha256.{i}.msg"));
        assert_eq!(
            hash(&msg).0.to_vec(),
            bytes(&v, &format!("sha256.{i}.digest"))
        );
    }
    // split input hashes like the concatenation
    let msg = bytes(&v, "sha256.3.msg");
    let (a, b) = msg.split_at(77);
    assert_eq!(hash_parts(&[a, b]).0.to_vec(), bytes(&v, "sha256.3.digest"));
}

#[test]
fn hmac_sha256() {
    let v = vectors();
    for i in 0..2 {
        let key = MacKey(arr32(&v, &format!("hmac.{i}.key")));
        let tag = hmac_tag(&key, &bytes(&v, &format!("hmac.{i}.msg")));
        assert_eq!(tag.0.to_vec(), bytes(&v, &format!("hmac.{i}.tag")));
    }
}

#[test]
fn hkdf_empty_salt() {
    let v = vectors();
    let okm = kdf_stream(&bytes(&v, "hkdf.0.ikm"), &bytes(&v, "hkdf.0.info"), 42);
    assert_eq!(okm, bytes(&v, "hkdf.0.okm42"));
    let k = kdf(&bytes(&v, "hkdf.1.ikm"), &bytes(&v, "hkdf.1.info"));
    assert_eq!(k.0.to_vec(), bytes(&v, "hkdf.1.okm32"));
}

#[test]
fn hash_chain() {
    let v = vectors();
    let chain = chain_generate(SymKey(arr32(&v, "chain.seed")), 16).unwrap();
    for i in [1u64, 5, 16] {
        assert_eq!(
            chain.chain_key(i).unwrap().0,
            arr32(&v, &format!("chain.h{i}"))
        );
    }
    assert!(chain.chain_key(17).is_err());
}

#[test]
fn trust_roots() {
    let v = vectors();
    let (_, t0) = init_token(b"w1", 100.0f64).unwrap();
    assert_eq!(t0.root.0, arr32(&v, "merkle.w1.100.0"));
    assert_eq!(t0.epoch, 0);

    let (mut tree, _) = TrustMerkleTree::init(b"w1", 100.0f64).unwrap();
    let t1 = tree.update(90.0f64, 1).unwrap();
    assert_eq!(t1.root.0, arr32(&v, "merkle.w1.90.1"));

    let (mut tree, _) = TrustMerkleTree::init(b"sensor-2", 100.0f64).unwrap();
    for e in 1..=7 {
        tree.update(if e == 7 { 52.0f64 } else { 100.0 }, e)
            .unwrap();
    }
    assert_eq!(tree.root().0, arr32(&v, "merkle.sensor-2.52.7"));

    let leaves: Vec<_> = (0u8..5).map(|i| hash(&[i])).collect();
    assert_eq!(merkle_root(&leaves).0, arr32(&v, "merkle.five_leaves"));
}

#[test]
fn p256_agreement() {
    let v = vectors();
    let a = AgreementKeyPair::from_secret_bytes(&bytes(&v, "ecdh.a.secret")).unwrap();
    let b = AgreementKeyPair::from_secret_bytes(&bytes(&v, "ecdh.b.secret")).unwrap();
    assert_eq!(b.public().to_bytes(), bytes(&v, "ecdh.b.public"));
    let label = bytes(&v, "ecdh.label");
    let k = ecdh_shared(&a, &bytes(&v, "ecdh.b.public"), &label).unwrap();
    assert_eq!(k.0, arr32(&v, "ecdh.key"));
    let back = ecdh_shared(&b, &a.public().to_bytes(), &label).unwrap();
    assert_eq!(back.0, k.0);
}

#[test]
fn aes_gcm() {
    let v = vectors();
    let key = SymKey(arr32(&v, "gcm.key"));
    let nonce = Nonce(bytes(&v, "gcm.nonce").try_into().unwrap());
    let aad = bytes(&v, "gcm.aad");
    let ct = sym_encrypt_aad(&key, &bytes(&v, "gcm.pt"), &nonce, &aad);
    assert_eq!(ct, bytes(&v, "gcm.ct"));
    assert_eq!(
        sym_decrypt_aad(&key, &nonce, &ct, &aad).unwrap(),
        bytes(&v, "gcm.pt")
    );
}
