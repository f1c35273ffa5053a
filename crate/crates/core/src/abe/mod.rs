//! Key-policy attribute-based encryption over BLS12-381.
//!
//! Small-universe construction with threshold-gate access trees: every
//! universe attribute `i` gets a secret `t_i` and public `T_i = g2^{t_i}`, the
//! master secret `y` is published as `Y = e(g1, g2)^y`. Key generation shares
//! `y` top-down through the tree with one random polynomial of degree `t - 1`
//! per gate; a leaf for attribute `i` holding share `q` gets `g1^{q / t_i}`.
//! Ciphertexts carry `Y^s` masking a random target-group element plus
//! `T_i^s` for every attribute in the set. Decryption pairs leaf components
//! with matching ciphertext components and interpolates in the exponent.
//!
//! Byte payloads are carried by hybrid wrapping: the masked target-group
//! element is hashed into an AES-GCM key that seals the payload.

mod policy;

pub use policy::{tree_satisfies, AccessTree, PolicyError};

use std::collections::{BTreeMap, BTreeSet};

use rand::{CryptoRng, RngCore};
use thiserror::Error;

use crate::crypto::{hash, sym_decrypt_aad, sym_encrypt_aad, Nonce};
use crate::group::{
    self, from_bytes, g1, g2, gt, gt_to_key, inverse, lagrange_at_zero, pairing, poly_eval,
    random_scalar, to_bytes, Fr, Gt, G1, G2,
};
use crate::wire::{Reader, WireError, Writer};

const DEM_LABEL: &[u8] = b"kpabe-dem-key";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AbeError {
    #[error("attribute universe is empty")]
    EmptyUniverse,
    #[error("duplicate attribute '{0}' in universe")]
    DuplicateAttribute(String),
    #[error("unknown attribute '{0}'")]
    UnknownAttribute(String),
    #[error("attribute set is empty")]
    EmptyAttributeSet,
    #[error("unsupported security level {0} bits (max {max})", max = group::SECURITY_BITS)]
    UnsupportedSecurityLevel(u32),
    #[error("ciphertext attributes do not satisfy the key policy")]
    PolicyNotSatisfied,
    #[error("decryption failed: key and ciphertext are inconsistent")]
    DecryptionFailed,
    #[error("key does not match its policy: {0} components for {1} leaves")]
    MalformedKey(usize, usize),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("encoding: {0}")]
    Wire(#[from] WireError),
}

/// Ordered attribute labels; label `k` (0-based) has index `k + 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttributeUniverse {
    labels: Vec<String>,
}

impl AttributeUniverse {
    pub fn new<I, S>(labels: I) -> Result<Self, AbeError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(AbeError::EmptyUniverse);
        }
        let mut seen = BTreeSet::new();
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return Err(AbeError::DuplicateAttribute(l.clone()));
            }
        }
        Ok(Self { labels })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label).map(|p| p + 1)
    }

    pub fn contains(&self, label: &str) -> bool {
        self.index_of(label).is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AbePublicKey {
    attributes: BTreeMap<String, G2>,
    order: Vec<String>,
    target: Gt,
}

/// Per-attribute secrets and the master scalar. May be a partial view holding
/// only some attributes (see [`AbeMasterKey::restrict`]).
#[derive(Clone, PartialEq, Eq)]
pub struct AbeMasterKey {
    secrets: BTreeMap<String, Fr>,
    order: Vec<String>,
    y: Fr,
}

impl std::fmt::Debug for AbeMasterKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AbeMasterKey")
            .field("attributes", &self.order)
            .finish_non_exhaustive()
    }
}

/// Public `g1^{1/t_i}` values that allow a key holder to re-randomise its
/// key without the master key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AbeDelegationKey {
    components: BTreeMap<String, G1>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AbeDecryptionKey {
    policy: AccessTree,
    components: Vec<G1>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AbeCiphertext {
    attributes: Vec<String>,
    masked: Gt,
    components: Vec<G2>,
    payload: Vec<u8>,
}

pub fn abe_setup<R: RngCore + CryptoRng>(
    security_bits: u32,
    universe: &AttributeUniverse,
    rng: &mut R,
) -> Result<(AbePublicKey, AbeMasterKey), AbeError> {
    if security_bits > group::SECURITY_BITS || security_bits == 0 {
        return Err(AbeError::UnsupportedSecurityLevel(security_bits));
    }
    if universe.is_empty() {
        return Err(AbeError::EmptyUniverse);
    }
    let mut secrets = BTreeMap::new();
    let mut publics = BTreeMap::new();
    for label in universe.labels() {
        let t = group::random_nonzero_scalar(rng);
        publics.insert(label.clone(), g2() * t);
        secrets.insert(label.clone(), t);
    }
    let y = random_scalar(rng);
    let order = universe.labels().to_vec();
    Ok((
        AbePublicKey {
            attributes: publics,
            order: order.clone(),
            target: gt() * y,
        },
        AbeMasterKey { secrets, order, y },
    ))
}

fn share_down<F>(node: &AccessTree, secret: Fr, rng: &mut F, leaf: &mut impl FnMut(&str, Fr))
where
    F: RngCore + CryptoRng,
{
    match node {
        AccessTree::Leaf(label) => leaf(label, secret),
        AccessTree::Gate {
            threshold,
            children,
        } => {
            let mut coeffs = Vec::with_capacity(*threshold);
            coeffs.push(secret);
            coeffs.extend((1..*threshold).map(|_| random_scalar(rng)));
            for (i, child) in children.iter().enumerate() {
                share_down(child, poly_eval(&coeffs, Fr::from(i as u64 + 1)), rng, leaf);
            }
        }
    }
}

pub fn abe_keygen<R: RngCore + CryptoRng>(
    policy: &AccessTree,
    mk: &AbeMasterKey,
    rng: &mut R,
) -> Result<AbeDecryptionKey, AbeError> {
    for label in policy.leaves() {
        if !mk.secrets.contains_key(label) {
            return Err(AbeError::UnknownAttribute(label.to_string()));
        }
    }
    let mut components = Vec::with_capacity(policy.leaf_count());
    share_down(policy, mk.y, rng, &mut |label, share| {
        let t_inv = inverse(mk.secrets[label]).expect("attribute secrets are nonzero");
        components.push(g1() * (share * t_inv));
    });
    Ok(AbeDecryptionKey {
        policy: policy.clone(),
        components,
    })
}

/// Re-randomises `key` by adding a fresh sharing of zero over its tree. The
/// result decrypts exactly what `key` decrypts but shares no leaf component
/// with it.
pub fn abe_rerandomize<R: RngCore + CryptoRng>(
    key: &AbeDecryptionKey,
    dk: &AbeDelegationKey,
    rng: &mut R,
) -> Result<AbeDecryptionKey, AbeError> {
    for label in key.policy.leaves() {
        if !dk.components.contains_key(label) {
            return Err(AbeError::UnknownAttribute(label.to_string()));
        }
    }
    let mut deltas = Vec::with_capacity(key.components.len());
    share_down(&key.policy, Fr::from(0u64), rng, &mut |label, share| {
        deltas.push(dk.components[label] * share);
    });
    let components = key
        .components
        .iter()
        .zip(deltas)
        .map(|(c, d)| *c + d)
        .collect();
    Ok(AbeDecryptionKey {
        policy: key.policy.clone(),
        components,
    })
}

fn header_digest(attributes: &[String], masked: &Gt, components: &[G2]) -> Vec<u8> {
    let mut w = Writer::new();
    w.strs(attributes).bytes(&to_bytes(masked));
    for c in components {
        w.bytes(&to_bytes(c));
    }
    hash(w.as_slice()).0.to_vec()
}

pub fn abe_encrypt<R: RngCore + CryptoRng>(
    message: &[u8],
    attrs: &BTreeSet<String>,
    pk: &AbePublicKey,
    rng: &mut R,
) -> Result<AbeCiphertext, AbeError> {
    if attrs.is_empty() {
        return Err(AbeError::EmptyAttributeSet);
    }
    let mut components = Vec::with_capacity(attrs.len());
    let s = random_scalar(rng);
    for a in attrs {
        let t = pk
            .attributes
            .get(a)
            .ok_or_else(|| AbeError::UnknownAttribute(a.clone()))?;
        components.push(*t * s);
    }
    let session = gt() * random_scalar(rng);
    let masked = session + pk.target * s;
    let attributes: Vec<String> = attrs.iter().cloned().collect();
    let aad = header_digest(&attributes, &masked, &components);
    let payload = sym_encrypt_aad(
        &gt_to_key(&session, DEM_LABEL),
        message,
        &Nonce([0; 12]),
        &aad,
    );
    Ok(AbeCiphertext {
        attributes,
        masked,
        components,
        payload,
    })
}

/// Recovers `e(g1, g2)^{q_x(0) s}` for `node`, whose leaves start at key
/// component `first_leaf`. Gates use the first `t` satisfied children in
/// child order.
fn decrypt_node(
    node: &AccessTree,
    first_leaf: usize,
    key: &AbeDecryptionKey,
    ct_components: &BTreeMap<&str, &G2>,
    attrs: &BTreeSet<&str>,
) -> Option<Gt> {
    match node {
        AccessTree::Leaf(label) => ct_components
            .get(label.as_str())
            .map(|e| pairing(key.components[first_leaf], **e)),
        AccessTree::Gate {
            threshold,
            children,
        } => {
            let mut chosen = Vec::with_capacity(*threshold);
            let mut offset = first_leaf;
            for (i, child) in children.iter().enumerate() {
                if chosen.len() < *threshold && child.satisfied_by(attrs) {
                    chosen.push((i as u64 + 1, child, offset));
                }
                offset += child.leaf_count();
            }
            if chosen.len() < *threshold {
                return None;
            }
            let indices: Vec<u64> = chosen.iter().map(|(i, _, _)| *i).collect();
            let mut acc = group::gt_identity();
            for (i, child, off) in chosen {
                let f = decrypt_node(child, off, key, ct_components, attrs)?;
                acc += f * lagrange_at_zero(i, &indices);
            }
            Some(acc)
        }
    }
}

pub fn abe_decrypt(ct: &AbeCiphertext, key: &AbeDecryptionKey) -> Result<Vec<u8>, AbeError> {
    let leaves = key.policy.leaf_count();
    if key.components.len() != leaves {
        return Err(AbeError::MalformedKey(key.components.len(), leaves));
    }
    let attrs: BTreeSet<&str> = ct.attributes.iter().map(String::as_str).collect();
    if !key.policy.satisfied_by(&attrs) {
        return Err(AbeError::PolicyNotSatisfied);
    }
    let ct_components: BTreeMap<&str, &G2> = ct
        .attributes
        .iter()
        .map(String::as_str)
        .zip(ct.components.iter())
        .collect();
    let blinding = decrypt_node(&key.policy, 0, key, &ct_components, &attrs)
        .ok_or(AbeError::PolicyNotSatisfied)?;
    let session = ct.masked - blinding;
    let aad = header_digest(&ct.attributes, &ct.masked, &ct.components);
    sym_decrypt_aad(
        &gt_to_key(&session, DEM_LABEL),
        &Nonce([0; 12]),
        &ct.payload,
        &aad,
    )
    .map_err(|_| AbeError::DecryptionFailed)
}

impl AbePublicKey {
    pub fn attribute_count(&self) -> usize {
        self.attributes.len()
    }

    /// Number of target-group components (always one).
    pub fn target_count(&self) -> usize {
        1
    }

    pub fn labels(&self) -> &[String] {
        &self.order
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.u32(self.order.len() as u32);
        for l in &self.order {
            w.str(l).bytes(&to_bytes(&self.attributes[l]));
        }
        w.bytes(&to_bytes(&self.target));
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, AbeError> {
        let mut r = Reader::new(bytes);
        let n = r.count()?;
        let mut attributes = BTreeMap::new();
        let mut order = Vec::with_capacity(n);
        for _ in 0..n {
            let l = r.string()?;
            attributes.insert(l.clone(), from_bytes::<G2>(r.bytes()?)?);
            order.push(l);
        }
        let target = from_bytes::<Gt>(r.bytes()?)?;
        r.finish()?;
        if attributes.len() != order.len() {
            return Err(WireError::Invalid("duplicate attribute").into());
        }
        Ok(Self {
            attributes,
            order,
            target,
        })
    }
}

impl AbeMasterKey {
    pub fn labels(&self) -> &[String] {
        &self.order
    }

    pub fn contains(&self, label: &str) -> bool {
        self.secrets.contains_key(label)
    }

    /// Partial master key over `labels` (plus `y`). Labels not held are
    /// skipped.
    pub fn restrict<S: AsRef<str>>(&self, labels: &[S]) -> AbeMasterKey {
        let keep: BTreeSet<&str> = labels.iter().map(AsRef::as_ref).collect();
        let order: Vec<String> = self
            .order
            .iter()
            .filter(|l| keep.contains(l.as_str()))
            .cloned()
            .collect();
        let secrets = order.iter().map(|l| (l.clone(), self.secrets[l])).collect();
        AbeMasterKey {
            secrets,
            order,
            y: self.y,
        }
    }

    pub fn delegation_key(&self) -> AbeDelegationKey {
        AbeDelegationKey {
            components: self
                .secrets
                .iter()
                .map(|(l, t)| (l.clone(), g1() * inverse(*t).expect("nonzero")))
                .collect(),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.u32(self.order.len() as u32);
        for l in &self.order {
            w.str(l).bytes(&to_bytes(&self.secrets[l]));
        }
        w.bytes(&to_bytes(&self.y));
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, AbeError> {
        let mut r = Reader::new(bytes);
        let n = r.count()?;
        let mut secrets = BTreeMap::new();
        let mut order = Vec::with_capacity(n);
        for _ in 0..n {
            let l = r.string()?;
            secrets.insert(l.clone(), from_bytes::<Fr>(r.bytes()?)?);
            order.push(l);
        }
        let y = from_bytes::<Fr>(r.bytes()?)?;
        r.finish()?;
        Ok(Self { secrets, order, y })
    }

    /// Encodings of every secret scalar, for state audits.
    pub fn secret_encodings(&self) -> Vec<Vec<u8>> {
        let mut out: Vec<Vec<u8>> = self.secrets.values().map(to_bytes).collect();
        out.push(to_bytes(&self.y));
        out
    }
}

impl AbeDelegationKey {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.u32(self.components.len() as u32);
        for (l, c) in &self.components {
            w.str(l).bytes(&to_bytes(c));
        }
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, AbeError> {
        let mut r = Reader::new(bytes);
        let n = r.count()?;
        let mut components = BTreeMap::new();
        for _ in 0..n {
            let l = r.string()?;
            components.insert(l, from_bytes::<G1>(r.bytes()?)?);
        }
        r.finish()?;
        Ok(Self { components })
    }
}

impl AbeDecryptionKey {
    pub fn policy(&self) -> &AccessTree {
        &self.policy
    }

    pub fn component_count(&self) -> usize {
        self.components.len()
    }

    /// Leaf components paired with their labels, in depth-first leaf order.
    pub fn leaf_components(&self) -> Vec<(String, Vec<u8>)> {
        self.policy
            .leaves()
            .into_iter()
            .map(str::to_string)
            .zip(self.components.iter().map(to_bytes))
            .collect()
    }

    /// Assembles a key from a policy and raw leaf components. No consistency
    /// check is possible without the master key; a mismatched key simply fails
    /// to decrypt.
    pub fn from_parts(policy: AccessTree, leaf_components: &[Vec<u8>]) -> Result<Self, AbeError> {
        let components = leaf_components
            .iter()
            .map(|b| from_bytes::<G1>(b))
            .collect::<Result<Vec<_>, _>>()?;
        if components.len() != policy.leaf_count() {
            return Err(AbeError::MalformedKey(
                components.len(),
                policy.leaf_count(),
            ));
        }
        Ok(Self { policy, components })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.str(&self.policy.to_string());
        w.u32(self.components.len() as u32);
        for c in &self.components {
            w.bytes(&to_bytes(c));
        }
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, AbeError> {
        let mut r = Reader::new(bytes);
        let policy = AccessTree::parse(&r.string()?)?;
        let n = r.count()?;
        let components = (0..n)
            .map(|_| r.bytes().and_then(from_bytes::<G1>))
            .collect::<Result<Vec<_>, _>>()?;
        r.finish()?;
        if components.len() != policy.leaf_count() {
            return Err(AbeError::MalformedKey(
                components.len(),
                policy.leaf_count(),
            ));
        }
        Ok(Self { policy, components })
    }
}

impl AbeCiphertext {
    /// Attribute labels in the clear; attributes are public by design.
    pub fn attributes(&self) -> &[String] {
        &self.attributes
    }

    pub fn attribute_set(&self) -> BTreeSet<String> {
        self.attributes.iter().cloned().collect()
    }

    pub fn component_count(&self) -> usize {
        self.components.len()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.strs(&self.attributes).bytes(&to_bytes(&self.masked));
        w.u32(self.components.len() as u32);
        for c in &self.components {
            w.bytes(&to_bytes(c));
        }
        w.bytes(&self.payload);
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, AbeError> {
        let mut r = Reader::new(bytes);
        let attributes = r.strings()?;
        let masked = from_bytes::<Gt>(r.bytes()?)?;
        let n = r.count()?;
        let components = (0..n)
            .map(|_| r.bytes().and_then(from_bytes::<G2>))
            .collect::<Result<Vec<_>, _>>()?;
        let payload = r.bytes()?.to_vec();
        r.finish()?;
        if components.len() != attributes.len() {
            return Err(WireError::Invalid("component count mismatch").into());
        }
        Ok(Self {
            attributes,
            masked,
            components,
            payload,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn universe() -> AttributeUniverse {
        AttributeUniverse::new(["vital", "urgent", "geoA", "geoB"]).unwrap()
    }

    fn set(items: &[&str]) -> BTreeSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn setup_sizes_and_errors() {
        let mut rng = ChaCha20Rng::seed_from_u64(51);
        let (pk, _) = abe_setup(128, &universe(), &mut rng).unwrap();
        assert_eq!(pk.attribute_count(), 4);
        assert_eq!(pk.target_count(), 1);
        assert_eq!(
            AttributeUniverse::new(Vec::<String>::new()),
            Err(AbeError::EmptyUniverse)
        );
        assert!(matches!(
            AttributeUniverse::new(["a", "a"]),
            Err(AbeError::DuplicateAttribute(_))
        ));
        assert_eq!(
            abe_setup(256, &universe(), &mut rng).unwrap_err(),
            AbeError::UnsupportedSecurityLevel(256)
        );
    }

    #[test]
    fn distinct_seeds_give_distinct_masters() {
        let (_, a) = abe_setup(128, &universe(), &mut ChaCha20Rng::seed_from_u64(1)).unwrap();
        let (_, b) = abe_setup(128, &universe(), &mut ChaCha20Rng::seed_from_u64(2)).unwrap();
        assert_ne!(a.y, b.y);
        let (_, c) = abe_setup(128, &universe(), &mut ChaCha20Rng::seed_from_u64(1)).unwrap();
        assert_eq!(a, c);
    }

    #[test]
    fn keygen_shapes_and_unknown_attribute() {
        let mut rng = ChaCha20Rng::seed_from_u64(52);
        let (_, mk) = abe_setup(128, &universe(), &mut rng).unwrap();
        let k = abe_keygen(&AccessTree::leaf("vital"), &mk, &mut rng).unwrap();
        assert_eq!(k.component_count(), 1);
        let k = abe_keygen(
            &AccessTree::parse("AND(vital, urgent)").unwrap(),
            &mk,
            &mut rng,
        )
        .unwrap();
        assert_eq!(k.component_count(), 2);
        assert_eq!(
            abe_keygen(&AccessTree::leaf("ghost"), &mk, &mut rng),
            Err(AbeError::UnknownAttribute("ghost".into()))
        );
    }

    #[test]
    fn encrypt_shapes_and_errors() {
        let mut rng = ChaCha20Rng::seed_from_u64(53);
        let (pk, _) = abe_setup(128, &universe(), &mut rng).unwrap();
        let ct = abe_encrypt(b"m", &set(&["vital"]), &pk, &mut rng).unwrap();
        assert_eq!(ct.component_count(), 1);
        let ct = abe_encrypt(b"m", &set(&["vital", "urgent", "geoA"]), &pk, &mut rng).unwrap();
        assert_eq!(ct.component_count(), 3);
        assert_eq!(ct.attribute_set(), set(&["vital", "urgent", "geoA"]));
        assert_eq!(
            abe_encrypt(b"m", &BTreeSet::new(), &pk, &mut rng),
            Err(AbeError::EmptyAttributeSet)
        );
        assert_eq!(
            abe_encrypt(b"m", &set(&["nope"]), &pk, &mut rng),
            Err(AbeError::UnknownAttribute("nope".into()))
        );
    }

    #[test]
    fn and_policy_decrypts_only_when_satisfied() {
        let mut rng = ChaCha20Rng::seed_from_u64(54);
        let (pk, mk) = abe_setup(128, &universe(), &mut rng).unwrap();
        let key = abe_keygen(
            &AccessTree::parse("AND(vital, urgent)").unwrap(),
            &mk,
            &mut rng,
        )
        .unwrap();
        let ct = abe_encrypt(b"h_j", &set(&["vital", "urgent"]), &pk, &mut rng).unwrap();
        assert_eq!(abe_decrypt(&ct, &key).unwrap(), b"h_j");
        let ct = abe_encrypt(b"h_j", &set(&["vital"]), &pk, &mut rng).unwrap();
        assert_eq!(abe_decrypt(&ct, &key), Err(AbeError::PolicyNotSatisfied));
    }

    #[test]
    fn more_satisfied_children_than_threshold() {
        let mut rng = ChaCha20Rng::seed_from_u64(55);
        let (pk, mk) = abe_setup(128, &universe(), &mut rng).unwrap();
        let key = abe_keygen(
            &AccessTree::parse("2of(vital, urgent, geoA)").unwrap(),
            &mk,
            &mut rng,
        )
        .unwrap();
        let ct = abe_encrypt(
            b"all three",
            &set(&["vital", "urgent", "geoA"]),
            &pk,
            &mut rng,
        )
        .unwrap();
        assert_eq!(abe_decrypt(&ct, &key).unwrap(), b"all three");
    }

    #[test]
    fn rerandomized_key_still_decrypts_and_differs() {
        let mut rng = ChaCha20Rng::seed_from_u64(56);
        let (pk, mk) = abe_setup(128, &universe(), &mut rng).unwrap();
        let dk = mk.delegation_key();
        let key = abe_keygen(
            &AccessTree::parse("OR(geoB, AND(vital, urgent))").unwrap(),
            &mk,
            &mut rng,
        )
        .unwrap();
        let fresh = abe_rerandomize(&key, &dk, &mut rng).unwrap();
        assert_ne!(fresh.components, key.components);
        let ct = abe_encrypt(b"x", &set(&["vital", "urgent"]), &pk, &mut rng).unwrap();
        assert_eq!(abe_decrypt(&ct, &fresh).unwrap(), b"x");
    }

    #[test]
    fn tampered_payload_or_components_fail() {
        let mut rng = ChaCha20Rng::seed_from_u64(57);
        let (pk, mk) = abe_setup(128, &universe(), &mut rng).unwrap();
        let key = abe_keygen(&AccessTree::leaf("vital"), &mk, &mut rng).unwrap();
        let mut ct = abe_encrypt(b"payload", &set(&["vital"]), &pk, &mut rng).unwrap();
        ct.payload[0] ^= 1;
        assert_eq!(abe_decrypt(&ct, &key), Err(AbeError::DecryptionFailed));
    }

    #[test]
    fn encodings_roundtrip() {
        let mut rng = ChaCha20Rng::seed_from_u64(58);
        let (pk, mk) = abe_setup(128, &universe(), &mut rng).unwrap();
        let key = abe_keygen(
            &AccessTree::parse("AND(vital, OR(geoA, geoB))").unwrap(),
            &mk,
            &mut rng,
        )
        .unwrap();
        let ct = abe_encrypt(b"abc", &set(&["vital", "geoB"]), &pk, &mut rng).unwrap();
        assert_eq!(AbePublicKey::from_bytes(&pk.to_bytes()).unwrap(), pk);
        assert_eq!(AbeMasterKey::from_bytes(&mk.to_bytes()).unwrap(), mk);
        assert_eq!(AbeDecryptionKey::from_bytes(&key.to_bytes()).unwrap(), key);
        let dk = mk.delegation_key();
        assert_eq!(AbeDelegationKey::from_bytes(&dk.to_bytes()).unwrap(), dk);
        let back = AbeCiphertext::from_bytes(&ct.to_bytes()).unwrap();
        assert_eq!(back, ct);
        assert_eq!(abe_decrypt(&back, &key).unwrap(), b"abc");
        assert!(AbeCiphertext::from_bytes(&ct.to_bytes()[..40]).is_err());
    }

    #[test]
    fn restricted_master_key_cannot_issue_withheld_attributes() {
        let mut rng = ChaCha20Rng::seed_from_u64(59);
        let (_, mk) = abe_setup(128, &universe(), &mut rng).unwrap();
        let partial = mk.restrict(&["vital", "urgent"]);
        assert!(partial.contains("vital") && !partial.contains("geoA"));
        assert_eq!(
            abe_keygen(&AccessTree::leaf("geoA"), &partial, &mut rng),
            Err(AbeError::UnknownAttribute("geoA".into()))
        );
    }
}
