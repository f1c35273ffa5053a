//! Public-key encryption to a long-term agreement key (ECIES shape:
//! ephemeral ECDH, HKDF, AES-256-GCM).

use rand::{CryptoRng, RngCore};

use super::{
    ecdh_keygen, kdf, sym_decrypt, sym_encrypt, AgreementKeyPair, AgreementPublicKey, CryptoError,
    Nonce,
};

const EPHEMERAL_LEN: usize = 33;

fn wrap_key(shared: &[u8; 32], ephemeral: &[u8], recipient: &[u8]) -> super::SymKey {
    let mut label = b"pke-wrap|".to_vec();
    label.extend_from_slice(ephemeral);
    label.extend_from_slice(recipient);
    kdf(shared, &label)
}

pub fn pke_encrypt<R: RngCore + CryptoRng>(
    recipient: &AgreementPublicKey,
    plaintext: &[u8],
    rng: &mut R,
) -> Vec<u8> {
    let eph = ecdh_keygen(rng);
    let eph_bytes = eph.public().to_bytes();
    let key = wrap_key(
        &eph.raw_shared(recipient),
        &eph_bytes,
        &recipient.to_bytes(),
    );
    // A fresh key per message, so a fixed nonce is safe.
    let ct = sym_encrypt(&key, plaintext, &Nonce([0; 12]));
    let mut out = eph_bytes;
    out.extend_from_slice(&ct);
    out
}

pub fn pke_decrypt(
    recipient: &AgreementKeyPair,
    ciphertext: &[u8],
) -> Result<Vec<u8>, CryptoError> {
    if ciphertext.len() < EPHEMERAL_LEN {
        return Err(CryptoError::Malformed);
    }
    let (eph_bytes, body) = ciphertext.split_at(EPHEMERAL_LEN);
    let eph = AgreementPublicKey::from_bytes(eph_bytes)
        .map_err(|_| CryptoError::AuthenticationFailure)?;
    let key = wrap_key(
        &recipient.raw_shared(&eph),
        eph_bytes,
        &recipient.public().to_bytes(),
    );
    sym_decrypt(&key, &Nonce([0; 12]), body)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn roundtrip_and_wrong_recipient() {
        let mut rng = ChaCha20Rng::seed_from_u64(21);
        let alice = ecdh_keygen(&mut rng);
        let eve = ecdh_keygen(&mut rng);
        let ct = pke_encrypt(alice.public(), b"identity key", &mut rng);
        assert_eq!(pke_decrypt(&alice, &ct).unwrap(), b"identity key");
        assert!(pke_decrypt(&eve, &ct).is_err());
    }

    #[test]
    fn tamper_rejected() {
        let mut rng = ChaCha20Rng::seed_from_u64(22);
        let alice = ecdh_keygen(&mut rng);
        let ct = pke_encrypt(alice.public(), b"bundle", &mut rng);
        for i in 0..ct.len() {
            let mut m = ct.clone();
            m[i] ^= 0x01;
            assert!(pke_decrypt(&alice, &m).is_err(), "byte {i}");
        }
        assert_eq!(pke_decrypt(&alice, &ct[..10]), Err(CryptoError::Malformed));
    }
}
