//! Minimal Merkle forest over the block sequence.
//!
//! Leaves are block hashes numbered from 1. A node is formed as soon as its
//! `arity` children exist and never changes afterwards. The minimal root set
//! `Gamma(k)` has one root per nonzero digit of `k` in base `arity`: a digit of
//! 1 contributes the completed subtree itself, a larger digit `d` contributes a
//! provisional node hashing the `d` completed subtrees at that level.

use thiserror::Error;

use crate::cas::{CasError, CasStore};
use crate::primitives::{Digest, Suite};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MerkleError {
    #[error("arity must be 2 or 4, got {0}")]
    Arity(usize),
    #[error("leaf {index} out of range 1..={count}")]
    LeafIndex { index: u64, count: u64 },
    #[error("empty forest")]
    Empty,
    #[error("malformed proof")]
    Malformed,
}

/// One level of a membership proof: the node's position among `width`
/// siblings and the other `width - 1` digests in order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProofStep {
    pub position: u8,
    pub siblings: Vec<Digest>,
}

impl ProofStep {
    pub fn width(&self) -> usize {
        self.siblings.len() + 1
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MembershipProof {
    pub leaf_index: u64,
    pub steps: Vec<ProofStep>,
}

impl MembershipProof {
    /// `index u32 | levels u8 | per level: width u8, position u8, siblings`.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&(self.leaf_index as u32).to_be_bytes());
        out.push(self.steps.len() as u8);
        for s in &self.steps {
            out.push(s.width() as u8);
            out.push(s.position);
            for d in &s.siblings {
                out.extend_from_slice(d.as_bytes());
            }
        }
        out
    }

    pub fn decode(suite: &Suite, bytes: &[u8]) -> Result<Self, MerkleError> {
        let n = suite.hash_len();
        if bytes.len() < 5 {
            return Err(MerkleError::Malformed);
        }
        let leaf_index = u32::from_be_bytes(bytes[..4].try_into().expect("4 bytes")) as u64;
        let levels = bytes[4] as usize;
        let mut at = 5;
        let mut steps = Vec::with_capacity(levels);
        for _ in 0..levels {
            let head = bytes.get(at..at + 2).ok_or(MerkleError::Malformed)?;
            let (width, position) = (head[0] as usize, head[1]);
            if width < 2 || position as usize >= width {
                return Err(MerkleError::Malformed);
            }
            at += 2;
            let mut siblings = Vec::with_capacity(width - 1);
            for _ in 1..width {
                let raw = bytes.get(at..at + n).ok_or(MerkleError::Malformed)?;
                siblings.push(Digest::from_slice(raw).map_err(|_| MerkleError::Malformed)?);
                at += n;
            }
            steps.push(ProofStep { position, siblings });
        }
        if at != bytes.len() {
            return Err(MerkleError::Malformed);
        }
        Ok(Self { leaf_index, steps })
    }
}

#[derive(Clone, Debug)]
pub struct MerkleForest {
    suite: Suite,
    arity: usize,
    /// `levels[0]` are the leaves; `levels[h]` the completed nodes of height `h`.
    levels: Vec<Vec<Digest>>,
}

pub const DEFAULT_ARITY: usize = 4;

impl MerkleForest {
    pub fn new(suite: Suite, arity: usize) -> Result<Self, MerkleError> {
        if arity != 2 && arity != 4 {
            return Err(MerkleError::Arity(arity));
        }
        Ok(Self {
            suite,
            arity,
            levels: vec![Vec::new()],
        })
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn leaf_count(&self) -> u64 {
        self.levels[0].len() as u64
    }

    /// Completed nodes at height `h` (height 0 are the leaves).
    pub fn level(&self, h: usize) -> &[Digest] {
        self.levels.get(h).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn internal_node_count(&self) -> u64 {
        self.levels[1..].iter().map(|l| l.len() as u64).sum()
    }

    fn node_hash(&self, children: &[Digest]) -> Digest {
        let parts: Vec<&[u8]> = children.iter().map(Digest::as_bytes).collect();
        self.suite.hash_parts(&parts)
    }

    pub fn add_leaf(&mut self, block_hash: Digest) {
        self.levels[0].push(block_hash);
        let mut h = 0;
        while self.levels[h].len().is_multiple_of(self.arity) {
            let len = self.levels[h].len();
            let node = self.node_hash(&self.levels[h][len - self.arity..]);
            if self.levels.len() == h + 1 {
                self.levels.push(Vec::new());
            }
            self.levels[h + 1].push(node);
            h += 1;
        }
    }

    /// Trailing completed nodes per height, highest first, with their digit.
    fn digits(&self) -> Vec<(usize, usize)> {
        (0..self.levels.len())
            .rev()
            .map(|h| (h, self.levels[h].len() % self.arity))
            .filter(|&(_, d)| d > 0)
            .collect()
    }

    /// `Gamma(k)`, most significant digit first.
    pub fn minimal_roots(&self) -> Vec<Digest> {
        self.digits()
            .into_iter()
            .map(|(h, d)| {
                let l = &self.levels[h];
                if d == 1 {
                    l[l.len() - 1]
                } else {
                    self.node_hash(&l[l.len() - d..])
                }
            })
            .collect()
    }

    /// Canonical serialization of `Gamma(k)`: a root count byte, then the roots.
    pub fn gamma_record(&self) -> Vec<u8> {
        serialize_roots(&self.minimal_roots())
    }

    /// `gamma_k = H(Gamma(k))`.
    pub fn gamma(&self) -> Result<Digest, MerkleError> {
        if self.leaf_count() == 0 {
            return Err(MerkleError::Empty);
        }
        Ok(self.suite.hash(&self.gamma_record()))
    }

    pub fn prove(&self, leaf_index: u64) -> Result<MembershipProof, MerkleError> {
        let count = self.leaf_count();
        if leaf_index == 0 || leaf_index > count {
            return Err(MerkleError::LeafIndex { index: leaf_index, count });
        }
        let a = self.arity;
        let mut idx = (leaf_index - 1) as usize;
        let mut steps = Vec::new();
        for level in &self.levels {
            let start = idx - idx % a;
            let tail = level.len() - level.len() % a;
            let end = if start < tail { start + a } else { level.len() };
            if end - start == 1 {
                break;
            }
            steps.push(ProofStep {
                position: (idx - start) as u8,
                siblings: (start..end).filter(|&j| j != idx).map(|j| level[j]).collect(),
            });
            if start >= tail {
                break;
            }
            idx /= a;
        }
        Ok(MembershipProof { leaf_index, steps })
    }

    /// Writes every completed node into CAS under its own digest and returns
    /// how many were new.
    pub fn persist(&self, store: &mut CasStore) -> Result<usize, CasError> {
        self.persist_incremental(store, &mut Vec::new())
    }

    /// Like [`persist`](Self::persist) but skips nodes below `cursor`, which
    /// records per height how many nodes were already written.
    pub fn persist_incremental(&self, store: &mut CasStore, cursor: &mut Vec<usize>) -> Result<usize, CasError> {
        let before = store.len();
        cursor.resize(self.levels.len(), 0);
        for h in 1..self.levels.len() {
            for i in cursor[h]..self.levels[h].len() {
                let children = &self.levels[h - 1][i * self.arity..(i + 1) * self.arity];
                let content: Vec<u8> = children.iter().flat_map(|d| d.as_bytes().to_vec()).collect();
                let name = store.put(&content)?;
                debug_assert_eq!(name, self.levels[h][i]);
            }
            cursor[h] = self.levels[h].len();
        }
        Ok(store.len() - before)
    }

    /// Stores the `Gamma(k)` record in CAS; its name is `gamma_k`.
    pub fn persist_gamma(&self, store: &mut CasStore) -> Result<Digest, CasError> {
        store.put(&self.gamma_record())
    }
}

pub fn serialize_roots(roots: &[Digest]) -> Vec<u8> {
    let mut out = Vec::with_capacity(1 + roots.len() * 32);
    out.push(roots.len() as u8);
    for r in roots {
        out.extend_from_slice(r.as_bytes());
    }
    out
}

/// Checks `proof` by recombining towards a root and looking it up in `roots`.
pub fn verify_proof(
    suite: &Suite,
    roots: &[Digest],
    leaf_index: u64,
    leaf: &Digest,
    proof: &MembershipProof,
) -> bool {
    if proof.leaf_index != leaf_index {
        return false;
    }
    let mut acc = *leaf;
    for step in &proof.steps {
        let width = step.width();
        if step.position as usize >= width {
            return false;
        }
        let mut children: Vec<&[u8]> = Vec::with_capacity(width);
        let mut sib = step.siblings.iter();
        for j in 0..width {
            if j == step.position as usize {
                children.push(acc.as_bytes());
            } else {
                children.push(sib.next().expect("width").as_bytes());
            }
        }
        acc = suite.hash_parts(&children);
    }
    roots.contains(&acc)
}

/// Number of nonzero digits of `k` in base `arity`.
pub fn nonzero_digits(mut k: u64, arity: u64) -> usize {
    let mut n = 0;
    while k > 0 {
        if !k.is_multiple_of(arity) {
            n += 1;
        }
        k /= arity;
    }
    n
}

/// Completed internal nodes after `k` leaves: `sum_{h>=1} floor(k / arity^h)`.
pub fn internal_nodes_for(k: u64, arity: u64) -> u64 {
    let mut total = 0;
    let mut p = arity;
    while p <= k {
        total += k / p;
        p = p.saturating_mul(arity);
    }
    total
}
