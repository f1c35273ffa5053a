//! Symmetric primitives and key material shared by every other module.
//!
//! SHA-256 for hashing, HMAC-SHA256 for message tags, AES-256-GCM for
//! authenticated encryption and HKDF-SHA256 for key derivation. Public-key
//! pieces live in the submodules.

mod chain;
mod ecdh;
mod pke;
mod sign;

pub use chain::{chain_generate, ChainCursor, KeyHashChain};
pub use ecdh::{ecdh_keygen, ecdh_shared, AgreementKeyPair, AgreementPublicKey};
pub use pke::{pke_decrypt, pke_encrypt};
pub use sign::{
    sig_verify, sign, Certificate, CertificateAuthority, Signature, SignatureKeyPair,
    VerificationKey,
};

use std::fmt;

use aes_gcm::aead::{Aead, KeyInit, Payload};
use aes_gcm::Aes256Gcm;
use hkdf::Hkdf;
use hmac::{Hmac, Mac};
use rand::{CryptoRng, RngCore};
use sha2::{Digest, Sha256};
use subtle::ConstantTimeEq;
use thiserror::Error;

pub const DIGEST_LEN: usize = 32;
pub const KEY_LEN: usize = 32;
pub const NONCE_LEN: usize = 12;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CryptoError {
    #[error("authentication failure")]
    AuthenticationFailure,
    #[error("invalid curve point")]
    InvalidPoint,
    #[error("chain index {index} out of range (chain length {length})")]
    IndexOutOfRange { index: u64, length: u64 },
    #[error("hash chain length must be at least 1")]
    InvalidChainLength,
    #[error("malformed key or signature encoding")]
    Malformed,
}

macro_rules! byte_newtype {
    ($(#[$meta:meta])* $name:ident, $len:expr, $debug:literal) => {
        $(#[$meta])*
        #[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub struct $name(pub [u8; $len]);

        impl $name {
            pub fn from_slice(bytes: &[u8]) -> Option<Self> {
                <[u8; $len]>::try_from(bytes).ok().map(Self)
            }

            pub fn as_bytes(&self) -> &[u8; $len] {
                &self.0
            }

            pub fn to_hex(&self) -> String {
                hex::encode(self.0)
            }
        }

        impl AsRef<[u8]> for $name {
            fn as_ref(&self) -> &[u8] {
                &self.0
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, concat!($debug, "({}..)"), &hex::encode(self.0)[..8])
            }
        }
    };
}

byte_newtype!(
    /// SHA-256 output.
    HashDigest, DIGEST_LEN, "HashDigest"
);
byte_newtype!(
    /// Key for HMAC-SHA256 link authentication.
    MacKey, KEY_LEN, "MacKey"
);
byte_newtype!(
    /// AES-256-GCM key; also the unit of the key hash chain.
    SymKey, KEY_LEN, "SymKey"
);
byte_newtype!(Nonce, NONCE_LEN, "Nonce");

impl HashDigest {
    /// Digest bytes reinterpreted as a key of the same width.
    pub fn into_key(self) -> SymKey {
        SymKey(self.0)
    }
}

impl SymKey {
    pub fn random<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        let mut k = [0u8; KEY_LEN];
        rng.fill_bytes(&mut k);
        Self(k)
    }
}

impl MacKey {
    pub fn random<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        let mut k = [0u8; KEY_LEN];
        rng.fill_bytes(&mut k);
        Self(k)
    }
}

impl Nonce {
    /// Counter nonce: 4-byte domain tag followed by a 64-bit big-endian counter.
    pub fn counter(domain: u32, counter: u64) -> Self {
        let mut n = [0u8; NONCE_LEN];
        n[..4].copy_from_slice(&domain.to_be_bytes());
        n[4..].copy_from_slice(&counter.to_be_bytes());
        Self(n)
    }
}

pub fn hash(data: &[u8]) -> HashDigest {
    HashDigest(Sha256::digest(data).into())
}

/// Hash of the concatenation of `parts`.
pub fn hash_parts(parts: &[&[u8]]) -> HashDigest {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
    }
    HashDigest(h.finalize().into())
}

fn hmac_engine(key: &MacKey) -> Hmac<Sha256> {
    <Hmac<Sha256> as Mac>::new_from_slice(&key.0).expect("HMAC accepts any key length")
}

pub fn hmac_tag(key: &MacKey, data: &[u8]) -> HashDigest {
    let mut mac = hmac_engine(key);
    mac.update(data);
    HashDigest(mac.finalize().into_bytes().into())
}

/// Constant-time tag check. Never errors; a tag of the wrong length is simply
/// rejected.
pub fn hmac_verify(key: &MacKey, data: &[u8], tag: &[u8]) -> bool {
    let mut mac = hmac_engine(key);
    mac.update(data);
    mac.verify_slice(tag).is_ok()
}

pub fn ct_eq(a: &[u8], b: &[u8]) -> bool {
    a.len() == b.len() && bool::from(a.ct_eq(b))
}

pub fn sym_encrypt(key: &SymKey, plaintext: &[u8], nonce: &Nonce) -> Vec<u8> {
    sym_encrypt_aad(key, plaintext, nonce, &[])
}

pub fn sym_decrypt(key: &SymKey, nonce: &Nonce, ciphertext: &[u8]) -> Result<Vec<u8>, CryptoError> {
    sym_decrypt_aad(key, nonce, ciphertext, &[])
}

pub fn sym_encrypt_aad(key: &SymKey, plaintext: &[u8], nonce: &Nonce, aad: &[u8]) -> Vec<u8> {
    let cipher = Aes256Gcm::new_from_slice(&key.0).expect("32-byte key");
    cipher
        .encrypt(
            &aes_gcm::Nonce::from(nonce.0),
            Payload {
                msg: plaintext,
                aad,
            },
        )
        .expect("AES-GCM encryption of in-memory buffers cannot fail")
}

pub fn sym_decrypt_aad(
    key: &SymKey,
    nonce: &Nonce,
    ciphertext: &[u8],
    aad: &[u8],
) -> Result<Vec<u8>, CryptoError> {
    let cipher = Aes256Gcm::new_from_slice(&key.0).expect("32-byte key");
    cipher
        .decrypt(
            &aes_gcm::Nonce::from(nonce.0),
            Payload {
                msg: ciphertext,
                aad,
            },
        )
        .map_err(|_| CryptoError::AuthenticationFailure)
}

/// HKDF-SHA256 with an empty salt; `label` is the info string.
pub fn kdf(ikm: &[u8], label: &[u8]) -> SymKey {
    let hk = Hkdf::<Sha256>::new(None, ikm);
    let mut okm = [0u8; KEY_LEN];
    hk.expand(label, &mut okm)
        .expect("32 bytes is a valid HKDF output length");
    SymKey(okm)
}

pub fn kdf_mac(ikm: &[u8], label: &[u8]) -> MacKey {
    MacKey(kdf(ikm, label).0)
}

/// Arbitrary-length HKDF output, used for one-time masks.
pub fn kdf_stream(ikm: &[u8], label: &[u8], len: usize) -> Vec<u8> {
    let hk = Hkdf::<Sha256>::new(None, ikm);
    let mut okm = vec![0u8; len];
    hk.expand(label, &mut okm)
        .expect("mask length within HKDF limit");
    okm
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn hash_is_deterministic_and_distinguishes_inputs() {
        assert_eq!(hash(b"x"), hash(b"x"));
        assert_ne!(hash(b"a"), hash(b"b"));
        assert_eq!(hash_parts(&[b"ab", b"c"]), hash(b"abc"));
    }

    #[test]
    fn hmac_roundtrip_and_wrong_key() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let k = MacKey::random(&mut rng);
        let k2 = MacKey::random(&mut rng);
        let tag = hmac_tag(&k, b"reading");
        assert!(hmac_verify(&k, b"reading", tag.as_ref()));
        assert!(!hmac_verify(&k2, b"reading", tag.as_ref()));
        assert!(!hmac_verify(&k, b"reading", &tag.0[..31]));
    }

    #[test]
    fn hmac_rejects_every_single_bit_flip() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let k = MacKey::random(&mut rng);
        let data: Vec<u8> = (0..64).map(|_| rng.gen()).collect();
        let tag = hmac_tag(&k, &data);
        for _ in 0..1000 {
            let mut d = data.clone();
            let bit = rng.gen_range(0..d.len() * 8);
            d[bit / 8] ^= 1 << (bit % 8);
            assert!(!hmac_verify(&k, &d, tag.as_ref()));
        }
    }

    #[test]
    fn hmac_tags_differ_under_distinct_keys() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let tags: std::collections::BTreeSet<_> = (0..200)
            .map(|_| hmac_tag(&MacKey::random(&mut rng), b"same message"))
            .collect();
        assert_eq!(tags.len(), 200);
    }

    #[test]
    fn aead_roundtrip_1kib() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let k = SymKey::random(&mut rng);
        let msg: Vec<u8> = (0..1024).map(|_| rng.gen()).collect();
        let n = Nonce::counter(1, 0);
        let ct = sym_encrypt(&k, &msg, &n);
        assert_eq!(sym_decrypt(&k, &n, &ct).unwrap(), msg);
    }

    #[test]
    fn aead_wrong_key_fails() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let k = SymKey::random(&mut rng);
        let n = Nonce::counter(1, 7);
        let ct = sym_encrypt(&k, b"vitals", &n);
        assert_eq!(
            sym_decrypt(&SymKey::random(&mut rng), &n, &ct),
            Err(CryptoError::AuthenticationFailure)
        );
    }

    #[test]
    fn aead_rejects_single_bit_mutations_of_nonce_and_ciphertext() {
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        let k = SymKey::random(&mut rng);
        let n = Nonce::counter(9, 3);
        let ct = sym_encrypt(&k, b"heart rate 72, spo2 98", &n);
        let mut framed = n.0.to_vec();
        framed.extend_from_slice(&ct);
        let mut accepted = 0;
        for _ in 0..1000 {
            let mut m = framed.clone();
            let bit = rng.gen_range(0..m.len() * 8);
            m[bit / 8] ^= 1 << (bit % 8);
            let nonce = Nonce::from_slice(&m[..NONCE_LEN]).unwrap();
            if sym_decrypt(&k, &nonce, &m[NONCE_LEN..]).is_ok() {
                accepted += 1;
            }
        }
        assert_eq!(accepted, 0);
    }

    #[test]
    fn kdf_separates_labels() {
        assert_ne!(kdf(b"ikm", b"a"), kdf(b"ikm", b"b"));
        assert_eq!(kdf_stream(b"ikm", b"a", 32), kdf(b"ikm", b"a").0.to_vec());
    }

    #[test]
    fn counter_nonces_are_distinct() {
        assert_ne!(Nonce::counter(1, 0), Nonce::counter(1, 1));
        assert_ne!(Nonce::counter(1, 0), Nonce::counter(2, 0));
    }
}
