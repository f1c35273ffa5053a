//! Operation accounting.
//!
//! Every primitive the protocol uses goes through a [`Meter`] method, so the
//! per-phase tallies are the real call counts. Operations outside the cost
//! table vocabulary (MACs, signing, wrapping, KDFs, trust-tree upkeep, IBBE
//! setup and extraction) are counted too but reported as auxiliary.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::{CryptoRng, RngCore};

use crate::abe::{
    abe_decrypt, abe_encrypt, abe_keygen, abe_rerandomize, abe_setup, AbeCiphertext,
    AbeDecryptionKey, AbeDelegationKey, AbeError, AbeMasterKey, AbePublicKey, AccessTree,
    AttributeUniverse,
};
use crate::crypto::{
    self, chain_generate, ecdh_shared, hmac_tag, hmac_verify, pke_decrypt, pke_encrypt, sig_verify,
    sign, sym_decrypt_aad, sym_encrypt_aad, AgreementKeyPair, AgreementPublicKey, ChainCursor,
    CryptoError, HashDigest, KeyHashChain, MacKey, Nonce, Signature, SignatureKeyPair, SymKey,
    VerificationKey,
};
use crate::ibbe::{
    ibbe_dec, ibbe_enc, ibbe_key_ext, ibbe_setup, BroadcastHeader, BroadcastKey, IbbeError,
    IbbeMasterKey, IbbeParams, IbbePublicKey, IdentityKey,
};
use crate::trust::{Scalar, TrustError, TrustMerkleTree, TrustToken};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Op {
    Enc,
    Sha,
    Ecdh,
    Ver,
    AbeSetup,
    AbeKeyGen,
    AbeEnc,
    AbeDec,
    Ibbe,
    // Auxiliary.
    Hmac,
    Sign,
    Pke,
    Kdf,
    TrustTree,
    IbbeSetup,
    IbbeKeyExt,
}

impl Op {
    pub const TABLE: [Op; 9] = [
        Op::Enc,
        Op::Sha,
        Op::Ecdh,
        Op::Ver,
        Op::AbeSetup,
        Op::AbeKeyGen,
        Op::AbeEnc,
        Op::AbeDec,
        Op::Ibbe,
    ];

    pub const AUXILIARY: [Op; 7] = [
        Op::Hmac,
        Op::Sign,
        Op::Pke,
        Op::Kdf,
        Op::TrustTree,
        Op::IbbeSetup,
        Op::IbbeKeyExt,
    ];

    pub fn is_table_term(self) -> bool {
        Self::TABLE.contains(&self)
    }

    /// Cost-table symbol, e.g. `T_ABE-Enc`.
    pub fn term(self) -> &'static str {
        match self {
            Op::Enc => "T_Enc",
            Op::Sha => "T_SHA",
            Op::Ecdh => "T_ECDH",
            Op::Ver => "T_VER",
            Op::AbeSetup => "T_ABE-Setup",
            Op::AbeKeyGen => "T_ABE-KeyGen",
            Op::AbeEnc => "T_ABE-Enc",
            Op::AbeDec => "T_ABE-Dec",
            Op::Ibbe => "T_IBBE",
            Op::Hmac => "aux:hmac",
            Op::Sign => "aux:sign",
            Op::Pke => "aux:pke",
            Op::Kdf => "aux:kdf",
            Op::TrustTree => "aux:trust-tree",
            Op::IbbeSetup => "aux:ibbe-setup",
            Op::IbbeKeyExt => "aux:ibbe-keyext",
        }
    }

    pub fn from_term(term: &str) -> Option<Op> {
        Self::TABLE
            .iter()
            .chain(Self::AUXILIARY.iter())
            .copied()
            .find(|op| op.term() == term)
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.term())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Phase {
    /// Key generation, certificates and pinning; outside the cost table.
    Enrollment,
    Initialization,
    Registration,
    Uploading,
    Downloading,
}

impl Phase {
    pub const ALL: [Phase; 5] = [
        Phase::Enrollment,
        Phase::Initialization,
        Phase::Registration,
        Phase::Uploading,
        Phase::Downloading,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Phase::Enrollment => "enrollment",
            Phase::Initialization => "initialization",
            Phase::Registration => "registration",
            Phase::Uploading => "uploading",
            Phase::Downloading => "downloading",
        }
    }

    pub fn from_name(name: &str) -> Option<Phase> {
        Self::ALL.into_iter().find(|p| p.name() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Role {
    Sensor,
    Wnc,
    Csp,
    User,
}

impl Role {
    pub const ALL: [Role; 4] = [Role::Sensor, Role::Wnc, Role::Csp, Role::User];

    pub fn name(self) -> &'static str {
        match self {
            Role::Sensor => "sensor",
            Role::Wnc => "wnc",
            Role::Csp => "csp",
            Role::User => "user",
        }
    }

    pub fn from_name(name: &str) -> Option<Role> {
        Self::ALL.into_iter().find(|r| r.name() == name)
    }
}

/// Summed counts keyed by (phase, role, op).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Tally(pub BTreeMap<(Phase, Role, Op), u64>);

impl Tally {
    pub fn add(&mut self, phase: Phase, role: Role, op: Op, n: u64) {
        if n > 0 {
            *self.0.entry((phase, role, op)).or_default() += n;
        }
    }

    pub fn absorb(&mut self, role: Role, meter: &Meter) {
        for (&(phase, op), &n) in &meter.counts {
            self.add(phase, role, op, n);
        }
    }

    pub fn get(&self, phase: Phase, role: Role, op: Op) -> u64 {
        self.0.get(&(phase, role, op)).copied().unwrap_or(0)
    }

    /// Table-term counts for one cell.
    pub fn cell(&self, phase: Phase, role: Role) -> BTreeMap<Op, u64> {
        Op::TABLE
            .iter()
            .map(|&op| (op, self.get(phase, role, op)))
            .filter(|(_, n)| *n > 0)
            .collect()
    }

    pub fn roles(&self) -> BTreeSet<Role> {
        self.0.keys().map(|(_, r, _)| *r).collect()
    }
}

/// Renders a cell as a cost expression, e.g. `2T_ECDH + T_Enc`.
pub fn cell_expression(cell: &BTreeMap<Op, u64>) -> String {
    if cell.is_empty() {
        return "0".to_string();
    }
    cell.iter()
        .map(|(op, n)| match n {
            1 => op.term().to_string(),
            n => format!("{n}{}", op.term()),
        })
        .collect::<Vec<_>>()
        .join(" + ")
}

/// Per-entity counter with instrumented primitive wrappers.
#[derive(Debug, Clone)]
pub struct Meter {
    phase: Phase,
    counts: BTreeMap<(Phase, Op), u64>,
}

impl Default for Meter {
    fn default() -> Self {
        Self::new()
    }
}

impl Meter {
    pub fn new() -> Self {
        Self {
            phase: Phase::Enrollment,
            counts: BTreeMap::new(),
        }
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn set_phase(&mut self, phase: Phase) {
        self.phase = phase;
    }

    pub fn count(&mut self, op: Op, n: u64) {
        if n > 0 {
            *self.counts.entry((self.phase, op)).or_default() += n;
        }
    }

    pub fn counts(&self) -> &BTreeMap<(Phase, Op), u64> {
        &self.counts
    }

    pub fn get(&self, phase: Phase, op: Op) -> u64 {
        self.counts.get(&(phase, op)).copied().unwrap_or(0)
    }

    // Symmetric layer.

    pub fn seal(&mut self, key: &SymKey, plaintext: &[u8], nonce: &Nonce, aad: &[u8]) -> Vec<u8> {
        self.count(Op::Enc, 1);
        sym_encrypt_aad(key, plaintext, nonce, aad)
    }

    pub fn open(
        &mut self,
        key: &SymKey,
        nonce: &Nonce,
        ciphertext: &[u8],
        aad: &[u8],
    ) -> Result<Vec<u8>, CryptoError> {
        self.count(Op::Enc, 1);
        sym_decrypt_aad(key, nonce, ciphertext, aad)
    }

    pub fn hash_parts(&mut self, parts: &[&[u8]]) -> HashDigest {
        self.count(Op::Sha, 1);
        crypto::hash_parts(parts)
    }

    pub fn hmac(&mut self, key: &MacKey, data: &[u8]) -> HashDigest {
        self.count(Op::Hmac, 1);
        hmac_tag(key, data)
    }

    pub fn hmac_verify(&mut self, key: &MacKey, data: &[u8], tag: &[u8]) -> bool {
        self.count(Op::Hmac, 1);
        hmac_verify(key, data, tag)
    }

    pub fn kdf(&mut self, ikm: &[u8], label: &[u8]) -> SymKey {
        self.count(Op::Kdf, 1);
        crypto::kdf(ikm, label)
    }

    pub fn kdf_mac(&mut self, ikm: &[u8], label: &[u8]) -> MacKey {
        self.count(Op::Kdf, 1);
        crypto::kdf_mac(ikm, label)
    }

    pub fn kdf_stream(&mut self, ikm: &[u8], label: &[u8], len: usize) -> Vec<u8> {
        self.count(Op::Kdf, 1);
        crypto::kdf_stream(ikm, label, len)
    }

    /// `n` hashes.
    pub fn chain_generate(&mut self, seed: SymKey, n: u64) -> Result<KeyHashChain, CryptoError> {
        let chain = chain_generate(seed, n)?;
        self.count(Op::Sha, n);
        Ok(chain)
    }

    /// Counts the hashes the cursor actually performs.
    pub fn chain_key_at(
        &mut self,
        cursor: &mut ChainCursor,
        i: u64,
    ) -> Result<SymKey, CryptoError> {
        let (key, steps) = cursor.key_at(i)?;
        self.count(Op::Sha, steps);
        Ok(key)
    }

    // Public-key layer.

    pub fn ecdh(
        &mut self,
        mine: &AgreementKeyPair,
        theirs: &AgreementPublicKey,
        label: &[u8],
    ) -> Result<MacKey, CryptoError> {
        self.count(Op::Ecdh, 1);
        ecdh_shared(mine, &theirs.to_bytes(), label)
    }

    pub fn sign(&mut self, key: &SignatureKeyPair, data: &[u8]) -> Signature {
        self.count(Op::Sign, 1);
        sign(key, data)
    }

    pub fn verify(&mut self, key: &VerificationKey, data: &[u8], sig: &Signature) -> bool {
        self.count(Op::Ver, 1);
        sig_verify(key, data, sig)
    }

    pub fn pke_encrypt<R: RngCore + CryptoRng>(
        &mut self,
        recipient: &AgreementPublicKey,
        plaintext: &[u8],
        rng: &mut R,
    ) -> Vec<u8> {
        self.count(Op::Pke, 1);
        pke_encrypt(recipient, plaintext, rng)
    }

    pub fn pke_decrypt(
        &mut self,
        recipient: &AgreementKeyPair,
        ciphertext: &[u8],
    ) -> Result<Vec<u8>, CryptoError> {
        self.count(Op::Pke, 1);
        pke_decrypt(recipient, ciphertext)
    }

    // Trust tree.

    pub fn tree_init<T: Scalar>(
        &mut self,
        device_id: &[u8],
        seed_score: T,
    ) -> Result<(TrustMerkleTree, TrustToken), TrustError> {
        self.count(Op::TrustTree, 1);
        TrustMerkleTree::init(device_id, seed_score)
    }

    pub fn tree_update<T: Scalar>(
        &mut self,
        tree: &mut TrustMerkleTree,
        score: T,
        epoch: u64,
    ) -> Result<TrustToken, TrustError> {
        self.count(Op::TrustTree, 1);
        tree.update(score, epoch)
    }

    /// One hash: the root recomputation.
    pub fn verify_token(&mut self, tree: &TrustMerkleTree, token: &TrustToken) -> bool {
        self.count(Op::Sha, 1);
        tree.verify_token(token)
    }

    // KP-ABE.

    pub fn abe_setup<R: RngCore + CryptoRng>(
        &mut self,
        security_bits: u32,
        universe: &AttributeUniverse,
        rng: &mut R,
    ) -> Result<(AbePublicKey, AbeMasterKey), AbeError> {
        self.count(Op::AbeSetup, 1);
        abe_setup(security_bits, universe, rng)
    }

    pub fn abe_keygen<R: RngCore + CryptoRng>(
        &mut self,
        policy: &AccessTree,
        mk: &AbeMasterKey,
        rng: &mut R,
    ) -> Result<AbeDecryptionKey, AbeError> {
        self.count(Op::AbeKeyGen, 1);
        abe_keygen(policy, mk, rng)
    }

    /// Counted as a key generation: it produces the key the holder uses.
    pub fn abe_rerandomize<R: RngCore + CryptoRng>(
        &mut self,
        key: &AbeDecryptionKey,
        dk: &AbeDelegationKey,
        rng: &mut R,
    ) -> Result<AbeDecryptionKey, AbeError> {
        self.count(Op::AbeKeyGen, 1);
        abe_rerandomize(key, dk, rng)
    }

    pub fn abe_encrypt<R: RngCore + CryptoRng>(
        &mut self,
        message: &[u8],
        attrs: &BTreeSet<String>,
        pk: &AbePublicKey,
        rng: &mut R,
    ) -> Result<AbeCiphertext, AbeError> {
        self.count(Op::AbeEnc, 1);
        abe_encrypt(message, attrs, pk, rng)
    }

    pub fn abe_decrypt(
        &mut self,
        ct: &AbeCiphertext,
        key: &AbeDecryptionKey,
    ) -> Result<Vec<u8>, AbeError> {
        self.count(Op::AbeDec, 1);
        abe_decrypt(ct, key)
    }

    // IBBE.

    pub fn ibbe_setup<R: RngCore + CryptoRng>(
        &mut self,
        params: IbbeParams,
        rng: &mut R,
    ) -> Result<(IbbePublicKey, IbbeMasterKey), IbbeError> {
        self.count(Op::IbbeSetup, 1);
        ibbe_setup(params, rng)
    }

    pub fn ibbe_key_ext(
        &mut self,
        pk: &IbbePublicKey,
        mk: &IbbeMasterKey,
        id: &str,
    ) -> Result<IdentityKey, IbbeError> {
        self.count(Op::IbbeKeyExt, 1);
        ibbe_key_ext(pk, mk, id)
    }

    pub fn ibbe_enc<R: RngCore + CryptoRng>(
        &mut self,
        receivers: &[String],
        pk: &IbbePublicKey,
        rng: &mut R,
    ) -> Result<(BroadcastHeader, BroadcastKey), IbbeError> {
        self.count(Op::Ibbe, 1);
        ibbe_enc(receivers, pk, rng)
    }

    pub fn ibbe_dec(
        &mut self,
        receivers: &[String],
        id: &str,
        sk: &IdentityKey,
        hdr: &BroadcastHeader,
        pk: &IbbePublicKey,
    ) -> Result<BroadcastKey, IbbeError> {
        self.count(Op::Ibbe, 1);
        ibbe_dec(receivers, id, sk, hdr, pk)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn meter_counts_per_phase() {
        let mut m = Meter::new();
        m.set_phase(Phase::Initialization);
        m.chain_generate(SymKey([1; 32]), 16).unwrap();
        m.hash_parts(&[b"x"]);
        m.set_phase(Phase::Uploading);
        m.seal(&SymKey([2; 32]), b"m", &Nonce([0; 12]), b"");
        assert_eq!(m.get(Phase::Initialization, Op::Sha), 17);
        assert_eq!(m.get(Phase::Uploading, Op::Enc), 1);
        assert_eq!(m.get(Phase::Uploading, Op::Sha), 0);
    }

    #[test]
    fn cursor_counts_only_performed_steps() {
        let mut m = Meter::new();
        let mut c = ChainCursor::new(SymKey([3; 32]), 8).unwrap();
        m.chain_key_at(&mut c, 1).unwrap();
        m.chain_key_at(&mut c, 2).unwrap();
        m.chain_key_at(&mut c, 2).unwrap();
        assert_eq!(m.get(Phase::Enrollment, Op::Sha), 2);
    }

    #[test]
    fn expressions_and_names() {
        let mut cell = BTreeMap::new();
        cell.insert(Op::Ecdh, 2);
        cell.insert(Op::Enc, 2);
        cell.insert(Op::AbeSetup, 1);
        cell.insert(Op::Ibbe, 1);
        assert_eq!(
            cell_expression(&cell),
            "2T_Enc + 2T_ECDH + T_ABE-Setup + T_IBBE"
        );
        assert_eq!(cell_expression(&BTreeMap::new()), "0");
        for op in Op::TABLE.iter().chain(Op::AUXILIARY.iter()) {
            assert_eq!(Op::from_term(op.term()), Some(*op));
        }
        for p in Phase::ALL {
            assert_eq!(Phase::from_name(p.name()), Some(p));
        }
    }
}
