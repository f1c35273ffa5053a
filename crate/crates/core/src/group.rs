//! BLS12-381 plumbing shared by the ABE and IBBE schemes.

use ark_bls12_381::{Bls12_381, Fr as Bls12Fr, G1Projective, G2Projective};
use ark_ec::pairing::{Pairing, PairingOutput};
use ark_ec::Group;
use ark_ff::Zero;
use ark_ff::{Field, PrimeField, UniformRand};
use ark_serialize::{CanonicalDeserialize, CanonicalSerialize};
use rand::{CryptoRng, RngCore};

use crate::crypto::{kdf, kdf_stream, SymKey};
use crate::wire::WireError;

pub type Fr = Bls12Fr;
pub type G1 = G1Projective;
pub type G2 = G2Projective;
pub type Gt = PairingOutput<Bls12_381>;

/// Security level of the pairing group in bits.
pub const SECURITY_BITS: u32 = 128;

pub fn g1() -> G1 {
    G1::generator()
}

pub fn g2() -> G2 {
    G2::generator()
}

pub fn gt() -> Gt {
    Gt::generator()
}

/// Neutral element of the target group (written additively).
pub fn gt_identity() -> Gt {
    Gt::zero()
}

pub fn pairing(a: G1, b: G2) -> Gt {
    Bls12_381::pairing(a, b)
}

pub fn multi_pairing(a: &[G1], b: &[G2]) -> Gt {
    Bls12_381::multi_pairing(a.iter().copied(), b.iter().copied())
}

pub fn random_scalar<R: RngCore + CryptoRng>(rng: &mut R) -> Fr {
    Fr::rand(rng)
}

pub fn random_nonzero_scalar<R: RngCore + CryptoRng>(rng: &mut R) -> Fr {
    loop {
        let s = Fr::rand(rng);
        if s != Fr::from(0u64) {
            return s;
        }
    }
}

pub fn inverse(x: Fr) -> Option<Fr> {
    x.inverse()
}

/// Wide reduction of 64 HKDF bytes into the scalar field.
pub fn hash_to_scalar(label: &[u8], data: &[u8]) -> Fr {
    Fr::from_be_bytes_mod_order(&kdf_stream(data, label, 64))
}

pub fn gt_to_key(element: &Gt, label: &[u8]) -> SymKey {
    kdf(&to_bytes(element), label)
}

pub fn to_bytes<T: CanonicalSerialize>(v: &T) -> Vec<u8> {
    let mut out = Vec::with_capacity(v.compressed_size());
    v.serialize_compressed(&mut out)
        .expect("serialization into a Vec cannot fail");
    out
}

/// Deserialises with full validation (on-curve and subgroup checks).
pub fn from_bytes<T: CanonicalDeserialize>(bytes: &[u8]) -> Result<T, WireError> {
    T::deserialize_compressed(bytes).map_err(|_| WireError::Invalid("group element"))
}

/// Lagrange basis polynomial for `i` over `set`, evaluated at zero.
pub fn lagrange_at_zero(i: u64, set: &[u64]) -> Fr {
    let xi = Fr::from(i);
    let mut num = Fr::from(1u64);
    let mut den = Fr::from(1u64);
    for &j in set.iter().filter(|&&j| j != i) {
        let xj = Fr::from(j);
        num *= xj;
        den *= xj - xi;
    }
    num * den.inverse().expect("distinct interpolation points")
}

/// Evaluates `coeffs[0] + coeffs[1] x + ...` at `x`.
pub fn poly_eval(coeffs: &[Fr], x: Fr) -> Fr {
    coeffs
        .iter()
        .rev()
        .fold(Fr::from(0u64), |acc, c| acc * x + c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn lagrange_reconstructs_secret() {
        let mut rng = ChaCha20Rng::seed_from_u64(41);
        let coeffs: Vec<Fr> = (0..3).map(|_| random_scalar(&mut rng)).collect();
        let set = [2u64, 4, 5];
        let recovered: Fr = set
            .iter()
            .map(|&i| poly_eval(&coeffs, Fr::from(i)) * lagrange_at_zero(i, &set))
            .sum();
        assert_eq!(recovered, coeffs[0]);
    }

    #[test]
    fn pairing_is_bilinear() {
        let mut rng = ChaCha20Rng::seed_from_u64(42);
        let a = random_scalar(&mut rng);
        let b = random_scalar(&mut rng);
        assert_eq!(pairing(g1() * a, g2() * b), gt() * (a * b));
    }

    #[test]
    fn serialization_roundtrip_and_rejection() {
        let p = g1() * Fr::from(5u64);
        let bytes = to_bytes(&p);
        assert_eq!(from_bytes::<G1>(&bytes).unwrap(), p);
        assert!(from_bytes::<G1>(&bytes[..10]).is_err());
    }
}
