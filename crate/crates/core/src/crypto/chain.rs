use super::{hash, CryptoError, SymKey};

/// Forward hash chain `h_0 = seed`, `h_i = H(h_{i-1})`.
///
/// Each digest is used directly as the next key; both are 32 bytes wide.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyHashChain {
    keys: Vec<SymKey>,
}

/// Builds `h_0..=h_n`. Costs exactly `n` hash evaluations.
pub fn chain_generate(seed: SymKey, n: u64) -> Result<KeyHashChain, CryptoError> {
    if n == 0 {
        return Err(CryptoError::InvalidChainLength);
    }
    let mut keys = Vec::with_capacity(n as usize + 1);
    keys.push(seed);
    for _ in 0..n {
        let next = hash(&keys.last().expect("nonempty").0).into_key();
        keys.push(next);
    }
    Ok(KeyHashChain { keys })
}

impl KeyHashChain {
    pub fn seed(&self) -> &SymKey {
        &self.keys[0]
    }

    /// Chain length `n`; the chain holds `n + 1` keys.
    pub fn length(&self) -> u64 {
        self.keys.len() as u64 - 1
    }

    pub fn chain_key(&self, i: u64) -> Result<SymKey, CryptoError> {
        self.keys
            .get(i as usize)
            .copied()
            .ok_or(CryptoError::IndexOutOfRange {
                index: i,
                length: self.length(),
            })
    }

    pub fn keys(&self) -> &[SymKey] {
        &self.keys
    }
}

/// Incremental walker over a chain that only keeps the seed and the latest
/// position. Used by the coordinator, which never materialises the chain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainCursor {
    seed: SymKey,
    length: u64,
    index: u64,
    current: SymKey,
}

impl ChainCursor {
    pub fn new(seed: SymKey, length: u64) -> Result<Self, CryptoError> {
        if length == 0 {
            return Err(CryptoError::InvalidChainLength);
        }
        Ok(Self {
            seed,
            length,
            index: 0,
            current: seed,
        })
    }

    pub fn seed(&self) -> &SymKey {
        &self.seed
    }

    pub fn length(&self) -> u64 {
        self.length
    }

    pub fn index(&self) -> u64 {
        self.index
    }

    /// Returns `h_i` together with the number of hash evaluations spent.
    /// Moving backwards restarts from the seed.
    pub fn key_at(&mut self, i: u64) -> Result<(SymKey, u64), CryptoError> {
        if i > self.length {
            return Err(CryptoError::IndexOutOfRange {
                index: i,
                length: self.length,
            });
        }
        if i < self.index {
            self.index = 0;
            self.current = self.seed;
        }
        let steps = i - self.index;
        for _ in 0..steps {
            self.current = hash(&self.current.0).into_key();
        }
        self.index = i;
        Ok((self.current, steps))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_length_rejected() {
        assert_eq!(
            chain_generate(SymKey([0; 32]), 0),
            Err(CryptoError::InvalidChainLength)
        );
    }

    #[test]
    fn length_one_has_two_keys() {
        let seed = SymKey([7; 32]);
        let c = chain_generate(seed, 1).unwrap();
        assert_eq!(c.keys().len(), 2);
        assert_eq!(c.chain_key(0).unwrap(), seed);
        assert_eq!(c.chain_key(1).unwrap(), hash(&seed.0).into_key());
        assert!(c.chain_key(2).is_err());
    }

    #[test]
    fn cursor_matches_materialised_chain() {
        let seed = SymKey([3; 32]);
        let chain = chain_generate(seed, 10).unwrap();
        let mut cur = ChainCursor::new(seed, 10).unwrap();
        let (k, steps) = cur.key_at(4).unwrap();
        assert_eq!((k, steps), (chain.chain_key(4).unwrap(), 4));
        let (k, steps) = cur.key_at(5).unwrap();
        assert_eq!((k, steps), (chain.chain_key(5).unwrap(), 1));
        let (k, _) = cur.key_at(2).unwrap();
        assert_eq!(k, chain.chain_key(2).unwrap());
        assert!(cur.key_at(11).is_err());
    }
}
