//! Identity-based broadcast encryption with constant-size headers.
//!
//! Pairing construction in the Delerablée style over BLS12-381:
//!
//! * master key: a secret generator `g ∈ G1` and a scalar `γ`;
//! * public key: `w = g^γ`, `v = e(g, h)` and `h^{γ^i}` for `i = 0..=m`;
//! * identity key: `g^{1 / (γ + H(id))}`;
//! * header for receiver set `S`: `C1 = w^{-k}`, `C2 = h^{k ∏_{j∈S}(γ + H(id_j))}`,
//!   broadcast key `v^k`.
//!
//! A member `i` strips its own factor with
//! `(e(C1, h^{p_i(γ)}) · e(sk_i, C2))^{1 / ∏_{j≠i} H(id_j)}` where
//! `p_i(γ) = (∏_{j≠i}(γ + H(id_j)) − ∏_{j≠i} H(id_j)) / γ`, computable from the
//! public powers of `h`.

use std::collections::BTreeSet;

use rand::{CryptoRng, RngCore};
use thiserror::Error;

use crate::crypto::SymKey;
use crate::group::{
    self, from_bytes, g1, g2, gt_to_key, hash_to_scalar, inverse, multi_pairing, pairing,
    random_nonzero_scalar, to_bytes, Fr, Gt, G1, G2,
};
use crate::wire::{Reader, WireError, Writer};

/// Reported by the benchmark harness.
pub const IBBE_CONSTRUCTION: &str = "pairing-based, constant-size header (Delerablee-style)";

const ID_LABEL: &[u8] = b"ibbe-identity-to-scalar";
const KEY_LABEL: &[u8] = b"ibbe-broadcast-key";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IbbeError {
    #[error("invalid parameters: {0}")]
    InvalidParams(&'static str),
    #[error("identity '{0}' longer than the configured maximum")]
    IdTooLong(String),
    #[error("receiver set is empty")]
    EmptySet,
    #[error("receiver set of {size} exceeds maximum {max}")]
    TooManyReceivers { size: usize, max: usize },
    #[error("duplicate identity '{0}' in receiver set")]
    DuplicateIdentity(String),
    #[error("identity is not in the receiver set")]
    NotAReceiver,
    #[error("identity key does not match the identity")]
    KeyMismatch,
    #[error("encoding: {0}")]
    Wire(#[from] WireError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IbbeParams {
    pub max_receivers: usize,
    /// Maximum identity length in bytes.
    pub id_length: usize,
    pub security_bits: u32,
}

impl IbbeParams {
    pub fn new(max_receivers: usize, id_length: usize) -> Self {
        Self {
            max_receivers,
            id_length,
            security_bits: group::SECURITY_BITS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IbbePublicKey {
    params: IbbeParams,
    w: G1,
    v: Gt,
    h_powers: Vec<G2>,
}

#[derive(Clone, PartialEq, Eq)]
pub struct IbbeMasterKey {
    g: G1,
    gamma: Fr,
}

impl std::fmt::Debug for IbbeMasterKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("IbbeMasterKey(..)")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdentityKey {
    id: String,
    sk: G1,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BroadcastHeader {
    c1: G1,
    c2: G2,
}

/// Broadcast key after KDF; the raw target-group element stays inside this
/// module.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BroadcastKey(SymKey);

impl BroadcastKey {
    pub fn key(&self) -> &SymKey {
        &self.0
    }
}

fn id_scalar(id: &str) -> Fr {
    hash_to_scalar(ID_LABEL, id.as_bytes())
}

/// Coefficients (constant term first) of `∏ (X + r)` over `roots`.
fn poly_from_roots(roots: &[Fr]) -> Vec<Fr> {
    let mut coeffs = vec![Fr::from(1u64)];
    for r in roots {
        let mut next = vec![Fr::from(0u64); coeffs.len() + 1];
        for (i, c) in coeffs.iter().enumerate() {
            next[i] += *c * r;
            next[i + 1] += c;
        }
        coeffs = next;
    }
    coeffs
}

fn check_set(params: &IbbeParams, receivers: &[String]) -> Result<(), IbbeError> {
    if receivers.is_empty() {
        return Err(IbbeError::EmptySet);
    }
    if receivers.len() > params.max_receivers {
        return Err(IbbeError::TooManyReceivers {
            size: receivers.len(),
            max: params.max_receivers,
        });
    }
    let mut seen = BTreeSet::new();
    for id in receivers {
        if id.len() > params.id_length {
            return Err(IbbeError::IdTooLong(id.clone()));
        }
        if !seen.insert(id.as_str()) {
            return Err(IbbeError::DuplicateIdentity(id.clone()));
        }
    }
    Ok(())
}

pub fn ibbe_setup<R: RngCore + CryptoRng>(
    params: IbbeParams,
    rng: &mut R,
) -> Result<(IbbePublicKey, IbbeMasterKey), IbbeError> {
    if params.max_receivers == 0 {
        return Err(IbbeError::InvalidParams("max_receivers must be at least 1"));
    }
    if params.id_length == 0 {
        return Err(IbbeError::InvalidParams("id_length must be at least 1"));
    }
    if params.security_bits == 0 || params.security_bits > group::SECURITY_BITS {
        return Err(IbbeError::InvalidParams("unsupported security level"));
    }
    let g = g1() * random_nonzero_scalar(rng);
    let h = g2() * random_nonzero_scalar(rng);
    let gamma = random_nonzero_scalar(rng);
    let mut h_powers = Vec::with_capacity(params.max_receivers + 1);
    let mut acc = h;
    for _ in 0..=params.max_receivers {
        h_powers.push(acc);
        acc *= gamma;
    }
    Ok((
        IbbePublicKey {
            params,
            w: g * gamma,
            v: pairing(g, h),
            h_powers,
        },
        IbbeMasterKey { g, gamma },
    ))
}

pub fn ibbe_key_ext(
    pk: &IbbePublicKey,
    mk: &IbbeMasterKey,
    id: &str,
) -> Result<IdentityKey, IbbeError> {
    if id.len() > pk.params.id_length {
        return Err(IbbeError::IdTooLong(id.to_string()));
    }
    let denom =
        inverse(mk.gamma + id_scalar(id)).expect("γ + H(id) = 0 only with negligible probability");
    Ok(IdentityKey {
        id: id.to_string(),
        sk: mk.g * denom,
    })
}

pub fn ibbe_enc<R: RngCore + CryptoRng>(
    receivers: &[String],
    pk: &IbbePublicKey,
    rng: &mut R,
) -> Result<(BroadcastHeader, BroadcastKey), IbbeError> {
    check_set(&pk.params, receivers)?;
    let roots: Vec<Fr> = receivers.iter().map(|id| id_scalar(id)).collect();
    let coeffs = poly_from_roots(&roots);
    let k = random_nonzero_scalar(rng);
    let exponent_point: G2 = coeffs.iter().zip(&pk.h_powers).map(|(c, hp)| *hp * c).sum();
    let header = BroadcastHeader {
        c1: -(pk.w * k),
        c2: exponent_point * k,
    };
    let key = pk.v * k;
    Ok((header, BroadcastKey(gt_to_key(&key, KEY_LABEL))))
}

/// Checks `e(sk, h^γ · h^{H(id)}) = v`.
fn key_is_valid(pk: &IbbePublicKey, key: &IdentityKey) -> bool {
    let bound = pk.h_powers[1] + pk.h_powers[0] * id_scalar(&key.id);
    pairing(key.sk, bound) == pk.v
}

pub fn ibbe_dec(
    receivers: &[String],
    id: &str,
    sk: &IdentityKey,
    hdr: &BroadcastHeader,
    pk: &IbbePublicKey,
) -> Result<BroadcastKey, IbbeError> {
    check_set(&pk.params, receivers)?;
    if !receivers.iter().any(|r| r == id) {
        return Err(IbbeError::NotAReceiver);
    }
    if sk.id != id || !key_is_valid(pk, sk) {
        return Err(IbbeError::KeyMismatch);
    }
    let others: Vec<Fr> = receivers
        .iter()
        .filter(|r| r.as_str() != id)
        .map(|r| id_scalar(r))
        .collect();
    let coeffs = poly_from_roots(&others);
    let h_p: G2 = coeffs[1..]
        .iter()
        .zip(&pk.h_powers)
        .map(|(c, hp)| *hp * c)
        .sum();
    let combined = multi_pairing(&[hdr.c1, sk.sk], &[h_p, hdr.c2]);
    let scale = inverse(coeffs[0]).expect("identity hashes are nonzero");
    Ok(BroadcastKey(gt_to_key(&(combined * scale), KEY_LABEL)))
}

impl IbbePublicKey {
    pub fn params(&self) -> &IbbeParams {
        &self.params
    }

    /// Number of `h^{γ^i}` powers, `m + 1`.
    pub fn power_count(&self) -> usize {
        self.h_powers.len()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.u64(self.params.max_receivers as u64)
            .u64(self.params.id_length as u64)
            .u32(self.params.security_bits)
            .bytes(&to_bytes(&self.w))
            .bytes(&to_bytes(&self.v))
            .u32(self.h_powers.len() as u32);
        for p in &self.h_powers {
            w.bytes(&to_bytes(p));
        }
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, IbbeError> {
        let mut r = Reader::new(bytes);
        let params = IbbeParams {
            max_receivers: r.u64()? as usize,
            id_length: r.u64()? as usize,
            security_bits: r.u32()?,
        };
        let w = from_bytes::<G1>(r.bytes()?)?;
        let v = from_bytes::<Gt>(r.bytes()?)?;
        let n = r.count()?;
        let h_powers = (0..n)
            .map(|_| r.bytes().and_then(from_bytes::<G2>))
            .collect::<Result<Vec<_>, _>>()?;
        r.finish()?;
        if h_powers.len() != params.max_receivers + 1 {
            return Err(WireError::Invalid("power count does not match max_receivers").into());
        }
        Ok(Self {
            params,
            w,
            v,
            h_powers,
        })
    }
}

impl IbbeMasterKey {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.bytes(&to_bytes(&self.g)).bytes(&to_bytes(&self.gamma));
        w.finish()
    }

    /// Encodings of the secret values, for state audits.
    pub fn secret_encodings(&self) -> Vec<Vec<u8>> {
        vec![to_bytes(&self.g), to_bytes(&self.gamma)]
    }
}

impl IdentityKey {
    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.str(&self.id).bytes(&to_bytes(&self.sk));
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, IbbeError> {
        let mut r = Reader::new(bytes);
        let id = r.string()?;
        let sk = from_bytes::<G1>(r.bytes()?)?;
        r.finish()?;
        Ok(Self { id, sk })
    }

    /// Encoding of the secret group element alone, for state audits.
    pub fn secret_encoding(&self) -> Vec<u8> {
        to_bytes(&self.sk)
    }
}

impl BroadcastHeader {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.bytes(&to_bytes(&self.c1)).bytes(&to_bytes(&self.c2));
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, IbbeError> {
        let mut r = Reader::new(bytes);
        let c1 = from_bytes::<G1>(r.bytes()?)?;
        let c2 = from_bytes::<G2>(r.bytes()?)?;
        r.finish()?;
        Ok(Self { c1, c2 })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn ids(items: &[&str]) -> Vec<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn setup_sizing_and_errors() {
        let mut rng = ChaCha20Rng::seed_from_u64(61);
        let (pk, _) = ibbe_setup(IbbeParams::new(8, 32), &mut rng).unwrap();
        assert_eq!(pk.power_count(), 9);
        assert!(matches!(
            ibbe_setup(IbbeParams::new(0, 32), &mut rng),
            Err(IbbeError::InvalidParams(_))
        ));
        let (_, a) =
            ibbe_setup(IbbeParams::new(2, 32), &mut ChaCha20Rng::seed_from_u64(1)).unwrap();
        let (_, b) =
            ibbe_setup(IbbeParams::new(2, 32), &mut ChaCha20Rng::seed_from_u64(2)).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn key_extraction() {
        let mut rng = ChaCha20Rng::seed_from_u64(62);
        let (pk, mk) = ibbe_setup(IbbeParams::new(4, 16), &mut rng).unwrap();
        let k = ibbe_key_ext(&pk, &mk, "cmdctrl-east").unwrap();
        assert_eq!(k.id(), "cmdctrl-east");
        assert!(key_is_valid(&pk, &k));
        assert_eq!(
            ibbe_key_ext(&pk, &mk, "an-identity-that-is-too-long"),
            Err(IbbeError::IdTooLong("an-identity-that-is-too-long".into()))
        );
        assert_ne!(
            ibbe_key_ext(&pk, &mk, "a").unwrap().sk,
            ibbe_key_ext(&pk, &mk, "b").unwrap().sk
        );
    }

    #[test]
    fn all_members_recover_same_key() {
        let mut rng = ChaCha20Rng::seed_from_u64(63);
        let (pk, mk) = ibbe_setup(IbbeParams::new(4, 32), &mut rng).unwrap();
        let s = ids(&["alpha", "bravo", "charlie"]);
        let (hdr, key) = ibbe_enc(&s, &pk, &mut rng).unwrap();
        for id in &s {
            let sk = ibbe_key_ext(&pk, &mk, id).unwrap();
            assert_eq!(ibbe_dec(&s, id, &sk, &hdr, &pk).unwrap(), key);
        }
    }

    #[test]
    fn enc_errors_and_freshness() {
        let mut rng = ChaCha20Rng::seed_from_u64(64);
        let (pk, _) = ibbe_setup(IbbeParams::new(2, 32), &mut rng).unwrap();
        assert_eq!(
            ibbe_enc(&ids(&["a", "b", "c"]), &pk, &mut rng),
            Err(IbbeError::TooManyReceivers { size: 3, max: 2 })
        );
        assert_eq!(ibbe_enc(&[], &pk, &mut rng), Err(IbbeError::EmptySet));
        assert_eq!(
            ibbe_enc(&ids(&["a", "a"]), &pk, &mut rng),
            Err(IbbeError::DuplicateIdentity("a".into()))
        );
        let s = ids(&["a", "b"]);
        let (_, k1) = ibbe_enc(&s, &pk, &mut rng).unwrap();
        let (_, k2) = ibbe_enc(&s, &pk, &mut rng).unwrap();
        assert_ne!(k1, k2);
    }

    #[test]
    fn non_member_and_mismatched_keys_rejected() {
        let mut rng = ChaCha20Rng::seed_from_u64(65);
        let (pk, mk) = ibbe_setup(IbbeParams::new(4, 32), &mut rng).unwrap();
        let s = ids(&["alpha", "bravo"]);
        let (hdr, key) = ibbe_enc(&s, &pk, &mut rng).unwrap();
        let outsider = ibbe_key_ext(&pk, &mk, "delta").unwrap();
        assert_eq!(
            ibbe_dec(&s, "delta", &outsider, &hdr, &pk),
            Err(IbbeError::NotAReceiver)
        );
        // A valid key used under a member's name.
        assert_eq!(
            ibbe_dec(&s, "alpha", &outsider, &hdr, &pk),
            Err(IbbeError::KeyMismatch)
        );
        // A key from another master key.
        let (_, other_mk) = ibbe_setup(IbbeParams::new(4, 32), &mut rng).unwrap();
        let foreign = ibbe_key_ext(&pk, &other_mk, "alpha").unwrap();
        assert_eq!(
            ibbe_dec(&s, "alpha", &foreign, &hdr, &pk),
            Err(IbbeError::KeyMismatch)
        );
        // Claiming a different receiver set yields a different key.
        let alpha = ibbe_key_ext(&pk, &mk, "alpha").unwrap();
        let lied = ibbe_dec(&ids(&["alpha"]), "alpha", &alpha, &hdr, &pk).unwrap();
        assert_ne!(lied, key);
    }

    #[test]
    fn header_size_is_independent_of_set_size() {
        let mut rng = ChaCha20Rng::seed_from_u64(66);
        let (pk, _) = ibbe_setup(IbbeParams::new(6, 32), &mut rng).unwrap();
        let sizes: BTreeSet<usize> = (1..=6)
            .map(|n| {
                let s: Vec<String> = (0..n).map(|i| format!("id{i}")).collect();
                ibbe_enc(&s, &pk, &mut rng).unwrap().0.to_bytes().len()
            })
            .collect();
        assert_eq!(sizes.len(), 1);
    }

    #[test]
    fn encodings_roundtrip() {
        let mut rng = ChaCha20Rng::seed_from_u64(67);
        let (pk, mk) = ibbe_setup(IbbeParams::new(3, 32), &mut rng).unwrap();
        let sk = ibbe_key_ext(&pk, &mk, "alpha").unwrap();
        let (hdr, _) = ibbe_enc(&ids(&["alpha"]), &pk, &mut rng).unwrap();
        assert_eq!(IbbePublicKey::from_bytes(&pk.to_bytes()).unwrap(), pk);
        assert_eq!(IdentityKey::from_bytes(&sk.to_bytes()).unwrap(), sk);
        assert_eq!(BroadcastHeader::from_bytes(&hdr.to_bytes()).unwrap(), hdr);
        assert!(BroadcastHeader::from_bytes(&hdr.to_bytes()[1..]).is_err());
    }
}
