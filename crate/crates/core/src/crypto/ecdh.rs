//! ECDH over NIST P-256 followed by HKDF with a per-link context label.

use std::fmt;

use p256::elliptic_curve::sec1::ToEncodedPoint;
use p256::{PublicKey, SecretKey};
use rand::{CryptoRng, RngCore};

use super::{kdf_mac, CryptoError, MacKey};

#[derive(Clone)]
pub struct AgreementKeyPair {
    secret: SecretKey,
    public: AgreementPublicKey,
}

/// A validated P-256 point (never the identity).
#[derive(Clone, PartialEq, Eq)]
pub struct AgreementPublicKey(PublicKey);

impl AgreementPublicKey {
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        PublicKey::from_sec1_bytes(bytes)
            .map(Self)
            .map_err(|_| CryptoError::InvalidPoint)
    }

    /// 33-byte compressed SEC1 encoding.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.0.to_encoded_point(true).as_bytes().to_vec()
    }

    pub(crate) fn inner(&self) -> &PublicKey {
        &self.0
    }
}

impl fmt::Debug for AgreementPublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "AgreementPublicKey({})",
            &hex::encode(self.to_bytes())[..12]
        )
    }
}

impl fmt::Debug for AgreementKeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AgreementKeyPair")
            .field("public", &self.public)
            .finish_non_exhaustive()
    }
}

impl AgreementKeyPair {
    pub fn public(&self) -> &AgreementPublicKey {
        &self.public
    }

    /// Rebuilds a key pair from a 32-byte big-endian scalar.
    pub fn from_secret_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        let secret = SecretKey::from_slice(bytes).map_err(|_| CryptoError::InvalidPoint)?;
        let public = AgreementPublicKey(secret.public_key());
        Ok(Self { secret, public })
    }

    pub fn secret_bytes(&self) -> Vec<u8> {
        self.secret.to_bytes().to_vec()
    }

    pub(crate) fn raw_shared(&self, their: &AgreementPublicKey) -> [u8; 32] {
        let shared =
            p256::ecdh::diffie_hellman(self.secret.to_nonzero_scalar(), their.inner().as_affine());
        let mut out = [0u8; 32];
        out.copy_from_slice(shared.raw_secret_bytes());
        out
    }
}

pub fn ecdh_keygen<R: RngCore + CryptoRng>(rng: &mut R) -> AgreementKeyPair {
    let secret = SecretKey::random(rng);
    let public = AgreementPublicKey(secret.public_key());
    AgreementKeyPair { secret, public }
}

/// `KDF(shared x-coordinate, label)`. Rejects encodings that are not a valid
/// non-identity point.
pub fn ecdh_shared(
    mine: &AgreementKeyPair,
    their_public: &[u8],
    context_label: &[u8],
) -> Result<MacKey, CryptoError> {
    let theirs = AgreementPublicKey::from_bytes(their_public)?;
    Ok(kdf_mac(&mine.raw_shared(&theirs), context_label))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn both_sides_agree_over_many_pairs() {
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        for _ in 0..100 {
            let a = ecdh_keygen(&mut rng);
            let b = ecdh_keygen(&mut rng);
            let ka = ecdh_shared(&a, &b.public().to_bytes(), b"wnc-wi").unwrap();
            let kb = ecdh_shared(&b, &a.public().to_bytes(), b"wnc-wi").unwrap();
            assert_eq!(ka, kb);
        }
    }

    #[test]
    fn labels_separate_keys() {
        let mut rng = ChaCha20Rng::seed_from_u64(12);
        let a = ecdh_keygen(&mut rng);
        let b = ecdh_keygen(&mut rng);
        let pk = b.public().to_bytes();
        assert_ne!(
            ecdh_shared(&a, &pk, b"wnc-wi").unwrap(),
            ecdh_shared(&a, &pk, b"wnc-csp").unwrap()
        );
    }

    #[test]
    fn identity_and_off_curve_points_rejected() {
        let mut rng = ChaCha20Rng::seed_from_u64(13);
        let a = ecdh_keygen(&mut rng);
        // SEC1 encoding of the point at infinity.
        assert_eq!(
            ecdh_shared(&a, &[0x00], b"x"),
            Err(CryptoError::InvalidPoint)
        );
        let mut off = vec![0x04];
        off.extend_from_slice(&[1u8; 64]);
        assert_eq!(ecdh_shared(&a, &off, b"x"), Err(CryptoError::InvalidPoint));
        assert_eq!(ecdh_shared(&a, &[], b"x"), Err(CryptoError::InvalidPoint));
    }
}
