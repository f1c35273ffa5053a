//! ECDSA P-256 signatures and single-issuer certificates.

use std::fmt;

use p256::ecdsa::signature::{Signer, Verifier};
use p256::ecdsa::{SigningKey, VerifyingKey};
use rand::{CryptoRng, RngCore};

use super::CryptoError;
use crate::wire::{Reader, WireError, Writer};

#[derive(Clone)]
pub struct SignatureKeyPair {
    signing: SigningKey,
}

#[derive(Clone, PartialEq, Eq)]
pub struct VerificationKey(VerifyingKey);

/// Fixed-width `r || s` encoding.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct Signature(pub [u8; 64]);

impl fmt::Debug for SignatureKeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SignatureKeyPair")
            .field("verification", &self.verification_key())
            .finish_non_exhaustive()
    }
}

impl fmt::Debug for VerificationKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "VerificationKey({})",
            &hex::encode(self.to_bytes())[..12]
        )
    }
}

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Signature({}..)", &hex::encode(self.0)[..8])
    }
}

impl SignatureKeyPair {
    pub fn generate<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        Self {
            signing: SigningKey::random(rng),
        }
    }

    pub fn verification_key(&self) -> VerificationKey {
        VerificationKey(*self.signing.verifying_key())
    }

    pub fn secret_bytes(&self) -> Vec<u8> {
        self.signing.to_bytes().to_vec()
    }
}

impl VerificationKey {
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        VerifyingKey::from_sec1_bytes(bytes)
            .map(Self)
            .map_err(|_| CryptoError::InvalidPoint)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.0.to_encoded_point(true).as_bytes().to_vec()
    }
}

impl Signature {
    pub fn from_slice(bytes: &[u8]) -> Result<Self, CryptoError> {
        <[u8; 64]>::try_from(bytes)
            .map(Self)
            .map_err(|_| CryptoError::Malformed)
    }
}

/// Deterministic (RFC 6979) ECDSA signature.
pub fn sign(key: &SignatureKeyPair, data: &[u8]) -> Signature {
    let sig: p256::ecdsa::Signature = key.signing.sign(data);
    Signature(sig.to_bytes().into())
}

pub fn sig_verify(key: &VerificationKey, data: &[u8], signature: &Signature) -> bool {
    match p256::ecdsa::Signature::from_slice(&signature.0) {
        Ok(sig) => key.0.verify(data, &sig).is_ok(),
        Err(_) => false,
    }
}

/// Binds a subject identity to a verification key under an issuer signature.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Certificate {
    pub subject: String,
    pub issuer: String,
    pub subject_key: VerificationKey,
    pub signature: Signature,
}

impl Certificate {
    fn tbs(subject: &str, issuer: &str, key: &VerificationKey) -> Vec<u8> {
        let mut w = Writer::new();
        w.str("cert-v1")
            .str(subject)
            .str(issuer)
            .bytes(&key.to_bytes());
        w.finish()
    }

    pub fn verify(&self, issuer_key: &VerificationKey) -> bool {
        sig_verify(
            issuer_key,
            &Self::tbs(&self.subject, &self.issuer, &self.subject_key),
            &self.signature,
        )
    }

    pub fn encode_into(&self, w: &mut Writer) {
        w.str(&self.subject)
            .str(&self.issuer)
            .bytes(&self.subject_key.to_bytes())
            .fixed(&self.signature.0);
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        self.encode_into(&mut w);
        w.finish()
    }

    pub fn decode_from(r: &mut Reader<'_>) -> Result<Self, WireError> {
        let subject = r.string()?;
        let issuer = r.string()?;
        let subject_key = VerificationKey::from_bytes(r.bytes()?)
            .map_err(|_| WireError::Invalid("certificate key"))?;
        let signature = Signature(r.array()?);
        Ok(Self {
            subject,
            issuer,
            subject_key,
            signature,
        })
    }
}

/// The simulation's root of trust.
#[derive(Debug, Clone)]
pub struct CertificateAuthority {
    name: String,
    keys: SignatureKeyPair,
}

impl CertificateAuthority {
    pub fn new<R: RngCore + CryptoRng>(name: impl Into<String>, rng: &mut R) -> Self {
        Self {
            name: name.into(),
            keys: SignatureKeyPair::generate(rng),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn verification_key(&self) -> VerificationKey {
        self.keys.verification_key()
    }

    pub fn issue(&self, subject: &str, key: &VerificationKey) -> Certificate {
        let signature = sign(&self.keys, &Certificate::tbs(subject, &self.name, key));
        Certificate {
            subject: subject.to_string(),
            issuer: self.name.clone(),
            subject_key: key.clone(),
            signature,
        }
    }
}
