//! Three-leaf Merkle tree per sensor: device id, score, epoch.
//!
//! Leaves are domain separated (`leaf:id:`, `leaf:score:`, `leaf:epoch:`),
//! internal nodes hash `node:` ‖ left ‖ right and an odd node is paired with
//! itself. Scores enter the tree as `round(score · 100)` in big-endian `i64`.

use std::fmt;

use super::{Scalar, TrustError};
use crate::crypto::{ct_eq, hash_parts, HashDigest};
use crate::wire::{Reader, WireError, Writer};

const LEAF_ID: &[u8] = b"leaf:id:";
const LEAF_SCORE: &[u8] = b"leaf:score:";
const LEAF_EPOCH: &[u8] = b"leaf:epoch:";
const NODE: &[u8] = b"node:";

/// Encoded size of a [`TrustToken`].
pub const TOKEN_LEN: usize = 40;

#[derive(Clone, Copy, PartialEq, Eq)]
pub struct TrustToken {
    pub root: HashDigest,
    pub epoch: u64,
}

impl fmt::Debug for TrustToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "TrustToken({}.., epoch {})",
            &self.root.to_hex()[..8],
            self.epoch
        )
    }
}

impl TrustToken {
    pub fn to_bytes(&self) -> [u8; TOKEN_LEN] {
        let mut out = [0u8; TOKEN_LEN];
        out[..32].copy_from_slice(self.root.as_bytes());
        out[32..].copy_from_slice(&self.epoch.to_be_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader::new(bytes);
        let token = Self::decode_from(&mut r)?;
        r.finish()?;
        Ok(token)
    }

    pub fn encode_into(&self, w: &mut Writer) {
        w.fixed(&self.to_bytes());
    }

    pub fn decode_from(r: &mut Reader<'_>) -> Result<Self, WireError> {
        let root = HashDigest(r.array()?);
        let epoch = r.u64()?;
        Ok(Self { root, epoch })
    }
}

fn node(left: &HashDigest, right: &HashDigest) -> HashDigest {
    hash_parts(&[NODE, left.as_bytes(), right.as_bytes()])
}

/// Root over `leaves`, pairing an odd trailing node with itself.
pub fn merkle_root(leaves: &[HashDigest]) -> HashDigest {
    assert!(!leaves.is_empty(), "merkle_root of empty leaf set");
    let mut level = leaves.to_vec();
    while level.len() > 1 {
        level = level
            .chunks(2)
            .map(|pair| node(&pair[0], pair.get(1).unwrap_or(&pair[0])))
            .collect();
    }
    level[0]
}

fn score_centi<T: Scalar>(score: T) -> i64 {
    (score * T::from(100.0).unwrap())
        .round()
        .to_i64()
        .expect("score within 0..=100")
}

fn score_leaf(centi: i64) -> HashDigest {
    hash_parts(&[LEAF_SCORE, &centi.to_be_bytes()])
}

fn epoch_leaf(epoch: u64) -> HashDigest {
    hash_parts(&[LEAF_EPOCH, &epoch.to_be_bytes()])
}

/// WNC-side tree for one sensor. The sensor only ever sees the root.
#[derive(Clone, PartialEq, Eq)]
pub struct TrustMerkleTree {
    leaves: [HashDigest; 3],
    /// `node(id, score)` and `node(epoch, epoch)`.
    level1: [HashDigest; 2],
    root: HashDigest,
    epoch: u64,
    score_centi: i64,
}

impl fmt::Debug for TrustMerkleTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TrustMerkleTree")
            .field("root", &self.root)
            .field("epoch", &self.epoch)
            .field("score_centi", &self.score_centi)
            .finish()
    }
}

impl TrustMerkleTree {
    pub fn init<T: Scalar>(
        device_id: &[u8],
        seed_score: T,
    ) -> Result<(Self, TrustToken), TrustError> {
        if device_id.is_empty() {
            return Err(TrustError::EmptyDeviceId);
        }
        let centi = score_centi(seed_score);
        let mut tree = Self {
            leaves: [
                hash_parts(&[LEAF_ID, device_id]),
                score_leaf(centi),
                epoch_leaf(0),
            ],
            level1: [HashDigest([0; 32]); 2],
            root: HashDigest([0; 32]),
            epoch: 0,
            score_centi: centi,
        };
        tree.rebuild();
        let token = tree.token();
        Ok((tree, token))
    }

    fn rebuild(&mut self) {
        self.level1 = [
            node(&self.leaves[0], &self.leaves[1]),
            node(&self.leaves[2], &self.leaves[2]),
        ];
        self.root = node(&self.level1[0], &self.level1[1]);
    }

    /// Replaces the score and epoch leaves and returns the rotated token.
    pub fn update<T: Scalar>(
        &mut self,
        new_score: T,
        epoch: u64,
    ) -> Result<TrustToken, TrustError> {
        if epoch <= self.epoch {
            return Err(TrustError::NonMonotonicEpoch {
                current: self.epoch,
                requested: epoch,
            });
        }
        self.score_centi = score_centi(new_score);
        self.epoch = epoch;
        self.leaves[1] = score_leaf(self.score_centi);
        self.leaves[2] = epoch_leaf(epoch);
        self.rebuild();
        Ok(self.token())
    }

    /// Recomputes the root from the cached level-one nodes (a single hash)
    /// and compares it and the epoch against the presented token.
    pub fn verify_token(&self, presented: &TrustToken) -> bool {
        let root = node(&self.level1[0], &self.level1[1]);
        ct_eq(root.as_bytes(), presented.root.as_bytes()) & (presented.epoch == self.epoch)
    }

    pub fn token(&self) -> TrustToken {
        TrustToken {
            root: self.root,
            epoch: self.epoch,
        }
    }

    pub fn root(&self) -> &HashDigest {
        &self.root
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn leaves(&self) -> &[HashDigest; 3] {
        &self.leaves
    }

    /// Score as committed in the tree, in hundredths.
    pub fn score_centi(&self) -> i64 {
        self.score_centi
    }

    /// Full recomputation from the leaves.
    pub fn is_consistent(&self) -> bool {
        merkle_root(&self.leaves) == self.root
    }
}

pub fn init_token<T: Scalar>(
    device_id: &[u8],
    seed_score: T,
) -> Result<(TrustMerkleTree, TrustToken), TrustError> {
    TrustMerkleTree::init(device_id, seed_score)
}
