//! Broadcast signing with proof, link and signature messages.
//!
//! In interval `k` the transmitter publishes
//!
//! ```text
//! L_k = H(N_{k+1}) ^ N_k
//! S_k = E_{N_k}(H(M_k) ^ H(N_{k+1}))
//! P_k = H(N_k)
//! ```
//!
//! and a receiver holding an authenticated `P_{k-1}` accepts the unique pair
//! `(L_{k-1}, P_k)` with `H(L_{k-1} ^ P_k) == P_{k-1}`, after which
//! `H(M_{k-1}) = P_k ^ D_{L_{k-1} ^ P_k}(S_{k-1})`. A message hash is therefore
//! verifiable exactly one interval after its signature went out.

use std::collections::BTreeMap;

use rand::RngCore;
use thiserror::Error;

use crate::primitives::{Digest, Nonce, PrimitiveError, Suite};

/// Default bound on candidate values held per (interval, category).
pub const DEFAULT_CANDIDATE_CAP: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Category {
    P,
    L,
    S,
}

impl Category {
    pub const ALL: [Category; 3] = [Category::P, Category::L, Category::S];

    pub fn tag(self) -> u8 {
        match self {
            Category::P => b'P',
            Category::L => b'L',
            Category::S => b'S',
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            b'P' => Some(Category::P),
            b'L' => Some(Category::L),
            b'S' => Some(Category::S),
            _ => None,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PlsError {
    #[error(transparent)]
    Primitive(#[from] PrimitiveError),
    #[error("malformed frame: {0}")]
    Frame(&'static str),
    #[error("interval {bin} is not the next unverified interval (expected {expected})")]
    OutOfOrder { bin: u32, expected: u32 },
    #[error("no candidate pair for interval {bin} verifies; solicit more candidates")]
    DosFailure { bin: u32 },
    #[error("no signature candidate for interval {bin}")]
    MissingSignature { bin: u32 },
    #[error("no signature candidate for interval {bin} yields a usable message hash")]
    UnmatchedSignature { bin: u32 },
    #[error("{count} distinct candidate pairs verify at interval {bin}: pre-image break or transmitter compromise")]
    ProtocolBreach { bin: u32, count: usize },
}

/// Everything the transmitter emits in one interval.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PlsBroadcast {
    pub bin: u32,
    pub p: Digest,
    pub l: Digest,
    pub s: Digest,
}

impl PlsBroadcast {
    pub fn payload(&self, cat: Category) -> Digest {
        match cat {
            Category::P => self.p,
            Category::L => self.l,
            Category::S => self.s,
        }
    }

    /// The three hash-length frames of this interval.
    pub fn frames(&self) -> [Frame; 3] {
        Category::ALL.map(|category| Frame {
            category,
            bin: self.bin,
            value: self.payload(category),
        })
    }
}

/// One category of one broadcast: `tag || BIN (u32 BE) || payload`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Frame {
    pub category: Category,
    pub bin: u32,
    pub value: Digest,
}

impl Frame {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(5 + self.value.len());
        out.push(self.category.tag());
        out.extend_from_slice(&self.bin.to_be_bytes());
        out.extend_from_slice(self.value.as_bytes());
        out
    }

    pub fn decode(suite: &Suite, bytes: &[u8]) -> Result<Self, PlsError> {
        if bytes.len() != 5 + suite.hash_len() {
            return Err(PlsError::Frame("length"));
        }
        let category = Category::from_tag(bytes[0]).ok_or(PlsError::Frame("tag"))?;
        let bin = u32::from_be_bytes(bytes[1..5].try_into().expect("4 bytes"));
        let value = Digest::from_slice(&bytes[5..])?;
        Ok(Frame {
            category,
            bin,
            value,
        })
    }
}

/// Transmitter side. Holds the current nonce `N_k`; the next one is drawn
/// inside [`PlsTransmitter::round`] and only ever leaves the state masked in
/// `L_k` or hashed in `S_k`.
#[derive(Clone, Debug)]
pub struct PlsTransmitter {
    suite: Suite,
    round: u32,
    current: Nonce,
}

impl PlsTransmitter {
    /// Starts the protocol with `N_1`, returning the transmitter and `P_1`,
    /// which receivers must authenticate out of band.
    pub fn init(suite: Suite, n1: Nonce) -> (Self, Digest) {
        let p1 = suite.hash(n1.as_bytes());
        (
            Self {
                suite,
                round: 1,
                current: n1,
            },
            p1,
        )
    }

    /// The interval the next call to `round` will broadcast in.
    pub fn round_index(&self) -> u32 {
        self.round
    }

    pub fn suite(&self) -> &Suite {
        &self.suite
    }

    /// Signs `message` in the current interval with a freshly drawn `N_{k+1}`.
    pub fn round<R: RngCore + ?Sized>(&mut self, rng: &mut R, message: &[u8]) -> PlsBroadcast {
        let h_m = self.suite.hash(message);
        let next = Nonce::random(&self.suite, rng);
        self.round_with(h_m, next)
    }

    /// Signs an already computed message hash using `next` as `N_{k+1}`.
    pub fn round_with(&mut self, h_m: Digest, next: Nonce) -> PlsBroadcast {
        let s = &self.suite;
        let h_next = s.hash(next.as_bytes());
        let l = h_next.xor(self.current.as_digest()).expect("suite lengths");
        let plain = h_m.xor(&h_next).expect("suite lengths");
        let sig = s
            .encrypt(self.current.as_digest(), &plain)
            .expect("suite lengths");
        let out = PlsBroadcast {
            bin: self.round,
            p: s.hash(self.current.as_bytes()),
            l,
            s: sig,
        };
        self.current = next;
        self.round += 1;
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IngestOutcome {
    Added,
    Duplicate,
    /// Set already at capacity; the value was dropped and counted.
    Dropped,
    /// The interval is already verified.
    Stale,
}

#[derive(Clone, Debug, Default)]
struct CandidateSets {
    p: Vec<Digest>,
    l: Vec<Digest>,
    s: Vec<Digest>,
}

impl CandidateSets {
    fn get(&self, cat: Category) -> &Vec<Digest> {
        match cat {
            Category::P => &self.p,
            Category::L => &self.l,
            Category::S => &self.s,
        }
    }

    fn get_mut(&mut self, cat: Category) -> &mut Vec<Digest> {
        match cat {
            Category::P => &mut self.p,
            Category::L => &mut self.l,
            Category::S => &mut self.s,
        }
    }
}

/// A successful verification at interval `bin + 1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Verified {
    /// Interval whose message hash was recovered.
    pub bin: u32,
    pub l: Digest,
    pub p_next: Digest,
    /// The nonce `N_bin = L ^ P_next`, public from now on.
    pub revealed: Nonce,
    /// One recovered `H(M)` per signature candidate, in candidate order. Only
    /// the genuine one will ever match real content.
    pub message_hashes: Vec<Digest>,
}

/// Receiver side: collects candidate values per interval and selects the
/// genuine ones against the last authenticated proof.
#[derive(Clone, Debug)]
pub struct PlsReceiver {
    suite: Suite,
    cap: usize,
    verified_p: Digest,
    verified_bin: u32,
    candidates: BTreeMap<u32, CandidateSets>,
    dropped: u64,
    authenticated: Vec<(u32, Vec<Digest>)>,
}

impl PlsReceiver {
    /// `p1` is `P_1`, authenticated out of band.
    pub fn new(suite: Suite, p1: Digest, cap: usize) -> Self {
        Self::resume(suite, 1, p1, cap)
    }

    /// Joins late, trusting `P_bin` for interval `bin`.
    pub fn resume(suite: Suite, bin: u32, p: Digest, cap: usize) -> Self {
        Self {
            suite,
            cap,
            verified_p: p,
            verified_bin: bin,
            candidates: BTreeMap::new(),
            dropped: 0,
            authenticated: Vec::new(),
        }
    }

    pub fn verified_p(&self) -> &Digest {
        &self.verified_p
    }

    /// Interval of the latest authenticated proof.
    pub fn verified_bin(&self) -> u32 {
        self.verified_bin
    }

    pub fn dropped(&self) -> u64 {
        self.dropped
    }

    /// Recovered hashes per verified interval, in order.
    pub fn authenticated(&self) -> &[(u32, Vec<Digest>)] {
        &self.authenticated
    }

    pub fn candidates(&self, bin: u32, cat: Category) -> &[Digest] {
        self.candidates
            .get(&bin)
            .map(|c| c.get(cat).as_slice())
            .unwrap_or(&[])
    }

    /// Every live candidate, for sharing with peers.
    pub fn live_candidates(&self) -> Vec<Frame> {
        let mut out = Vec::new();
        for (&bin, sets) in &self.candidates {
            for cat in Category::ALL {
                for v in sets.get(cat) {
                    out.push(Frame {
                        category: cat,
                        bin,
                        value: *v,
                    });
                }
            }
        }
        out
    }

    pub fn ingest(&mut self, bin: u32, category: Category, value: Digest) -> IngestOutcome {
        // L and S of the verified interval are still needed for the next step.
        let stale = match category {
            Category::P => bin <= self.verified_bin,
            Category::L | Category::S => bin < self.verified_bin,
        };
        if stale || value.len() != self.suite.hash_len() {
            return IngestOutcome::Stale;
        }
        let set = self.candidates.entry(bin).or_default().get_mut(category);
        if set.contains(&value) {
            IngestOutcome::Duplicate
        } else if set.len() >= self.cap {
            self.dropped += 1;
            IngestOutcome::Dropped
        } else {
            set.push(value);
            IngestOutcome::Added
        }
    }

    pub fn ingest_frame(&mut self, frame: &Frame) -> IngestOutcome {
        self.ingest(frame.bin, frame.category, frame.value)
    }

    /// Verifies interval `bin`, which must be the one after the last verified
    /// proof. On success the proof advances to the selected `P_bin`.
    pub fn verify(&mut self, bin: u32) -> Result<Verified, PlsError> {
        self.verify_with(bin, |_| true)
    }

    /// Like [`verify`](Self::verify), but commits only if `usable` holds for
    /// at least one recovered message hash; otherwise the state is untouched
    /// so more signature candidates can be collected.
    pub fn verify_with(&mut self, bin: u32, usable: impl Fn(&Digest) -> bool) -> Result<Verified, PlsError> {
        let prev = self.verified_bin;
        if bin != prev + 1 {
            return Err(PlsError::OutOfOrder {
                bin,
                expected: prev + 1,
            });
        }
        let s = self.suite;
        let mut passing: Vec<(Digest, Digest)> = Vec::new();
        for l in self.candidates(prev, Category::L) {
            for p in self.candidates(bin, Category::P) {
                let n = l.xor(p)?;
                if s.hash(n.as_bytes()) == self.verified_p && !passing.contains(&(*l, *p)) {
                    passing.push((*l, *p));
                }
            }
        }
        let (l, p) = match passing.len() {
            0 => return Err(PlsError::DosFailure { bin }),
            1 => passing[0],
            count => return Err(PlsError::ProtocolBreach { bin, count }),
        };
        let sigs = self.candidates(prev, Category::S);
        if sigs.is_empty() {
            return Err(PlsError::MissingSignature { bin: prev });
        }
        let key = l.xor(&p)?;
        let cipher = s.cipher(&key)?;
        let message_hashes = sigs
            .iter()
            .map(|sig| p.xor(&cipher.decrypt(sig)))
            .collect::<Result<Vec<_>, _>>()?;
        if !message_hashes.iter().any(&usable) {
            return Err(PlsError::UnmatchedSignature { bin: prev });
        }

        self.verified_p = p;
        self.verified_bin = bin;
        self.authenticated.push((prev, message_hashes.clone()));
        self.candidates.retain(|&b, _| b >= bin);
        Ok(Verified {
            bin: prev,
            l,
            p_next: p,
            revealed: Nonce(key),
            message_hashes,
        })
    }
}
