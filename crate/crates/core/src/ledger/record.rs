//! Ledger records, addresses and blocks, with their canonical byte forms.

use std::fmt;

use crate::primitives::{Digest, PrimitiveError, Suite};
use crate::slvp::LvRecord;

/// Two-byte user identifier: the prefix of the user's first proof record.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Uid(pub [u8; 2]);

impl Uid {
    /// `pi(P_1)`: the first `prefix_len` bytes of `p1`, zero padded to two bytes.
    pub fn from_p1(p1: &Digest, prefix_len: usize) -> Uid {
        let mut out = [0u8; 2];
        let n = prefix_len.clamp(1, 2);
        out[..n].copy_from_slice(&p1.as_bytes()[..n]);
        Uid(out)
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

impl fmt::Debug for Uid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Uid({})", self.to_hex())
    }
}

impl fmt::Display for Uid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

/// `alpha(r) = (block, seq)`: the block holding the record and its position
/// among records of the same type and UID in that block.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RecordAddress {
    pub block: u32,
    pub seq: u32,
}

impl RecordAddress {
    pub fn new(block: u32, seq: u32) -> Self {
        Self { block, seq }
    }

    pub fn encode(&self) -> [u8; 8] {
        let mut out = [0u8; 8];
        out[..4].copy_from_slice(&self.block.to_be_bytes());
        out[4..].copy_from_slice(&self.seq.to_be_bytes());
        out
    }
}

impl fmt::Display for RecordAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.block, self.seq)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RecordKind {
    P,
    S,
    Lv,
    C,
    Gamma,
}

impl RecordKind {
    pub fn tag(self) -> u8 {
        match self {
            RecordKind::P => 0x01,
            RecordKind::S => 0x02,
            RecordKind::Lv => 0x03,
            RecordKind::C => 0x04,
            RecordKind::Gamma => 0x05,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Some(match tag {
            0x01 => RecordKind::P,
            0x02 => RecordKind::S,
            0x03 => RecordKind::Lv,
            0x04 => RecordKind::C,
            0x05 => RecordKind::Gamma,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            RecordKind::P => "P",
            RecordKind::S => "S",
            RecordKind::Lv => "LV",
            RecordKind::C => "C",
            RecordKind::Gamma => "GAMMA",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Record {
    P { uid: Uid, digest: Digest },
    S { uid: Uid, ciphertext: Digest },
    Lv { uid: Uid, lv: LvRecord },
    C { uid: Uid, h_m: Digest, ws_name: Digest },
    Gamma { digest: Digest },
}

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum DecodeError {
    #[error("truncated input")]
    Truncated,
    #[error("unknown record tag {0:#04x}")]
    Tag(u8),
    #[error("trailing bytes after record")]
    Trailing,
    #[error(transparent)]
    Primitive(#[from] PrimitiveError),
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], DecodeError> {
        if self.buf.len() < n {
            return Err(DecodeError::Truncated);
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn digest(&mut self, suite: &Suite) -> Result<Digest, DecodeError> {
        Ok(Digest::from_slice(self.take(suite.hash_len())?)?)
    }

    fn uid(&mut self) -> Result<Uid, DecodeError> {
        let b = self.take(2)?;
        Ok(Uid([b[0], b[1]]))
    }
}

impl Record {
    pub fn kind(&self) -> RecordKind {
        match self {
            Record::P { .. } => RecordKind::P,
            Record::S { .. } => RecordKind::S,
            Record::Lv { .. } => RecordKind::Lv,
            Record::C { .. } => RecordKind::C,
            Record::Gamma { .. } => RecordKind::Gamma,
        }
    }

    pub fn uid(&self) -> Option<Uid> {
        match self {
            Record::P { uid, .. }
            | Record::S { uid, .. }
            | Record::Lv { uid, .. }
            | Record::C { uid, .. } => Some(*uid),
            Record::Gamma { .. } => None,
        }
    }

    /// `tag || uid || payload` (no uid for Gamma).
    pub fn encode(&self) -> Vec<u8> {
        let mut out = vec![self.kind().tag()];
        if let Some(uid) = self.uid() {
            out.extend_from_slice(&uid.0);
        }
        match self {
            Record::P { digest, .. } => out.extend_from_slice(digest.as_bytes()),
            Record::S { ciphertext, .. } => out.extend_from_slice(ciphertext.as_bytes()),
            Record::Lv { lv, .. } => {
                out.extend_from_slice(lv.l.as_bytes());
                out.extend_from_slice(lv.v.as_bytes());
            }
            Record::C { h_m, ws_name, .. } => {
                out.extend_from_slice(h_m.as_bytes());
                out.extend_from_slice(ws_name.as_bytes());
            }
            Record::Gamma { digest } => out.extend_from_slice(digest.as_bytes()),
        }
        out
    }

    pub fn decode(suite: &Suite, bytes: &[u8]) -> Result<Record, DecodeError> {
        let mut r = Reader { buf: bytes };
        let rec = Self::read(suite, &mut r)?;
        if !r.buf.is_empty() {
            return Err(DecodeError::Trailing);
        }
        Ok(rec)
    }

    fn read(suite: &Suite, r: &mut Reader<'_>) -> Result<Record, DecodeError> {
        let tag = r.take(1)?[0];
        let kind = RecordKind::from_tag(tag).ok_or(DecodeError::Tag(tag))?;
        Ok(match kind {
            RecordKind::P => Record::P {
                uid: r.uid()?,
                digest: r.digest(suite)?,
            },
            RecordKind::S => Record::S {
                uid: r.uid()?,
                ciphertext: r.digest(suite)?,
            },
            RecordKind::Lv => Record::Lv {
                uid: r.uid()?,
                lv: LvRecord {
                    l: r.digest(suite)?,
                    v: r.digest(suite)?,
                },
            },
            RecordKind::C => Record::C {
                uid: r.uid()?,
                h_m: r.digest(suite)?,
                ws_name: r.digest(suite)?,
            },
            RecordKind::Gamma => Record::Gamma {
                digest: r.digest(suite)?,
            },
        })
    }
}

/// A record on its way to the Fog Server, optionally carrying the two-byte
/// MAC trailer computed with the sender's enrolment key.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Submission {
    pub record: Record,
    pub mac: Option<[u8; 2]>,
}

impl Submission {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = self.record.encode();
        if let Some(m) = self.mac {
            out.extend_from_slice(&m);
        }
        out
    }

    pub fn decode(suite: &Suite, bytes: &[u8]) -> Result<Submission, DecodeError> {
        let mut r = Reader { buf: bytes };
        let record = Record::read(suite, &mut r)?;
        let mac = match r.buf.len() {
            0 => None,
            2 => Some([r.buf[0], r.buf[1]]),
            _ => return Err(DecodeError::Trailing),
        };
        Ok(Submission { record, mac })
    }
}

/// One block: its index, the Merkle digest of all previous blocks, and the
/// records in canonical order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Block {
    pub index: u32,
    pub gamma_prev: Digest,
    pub records: Vec<Record>,
}

impl Block {
    /// `index (u32 BE) || gamma || count (u16 BE) || records`.
    pub fn serialize(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&self.index.to_be_bytes());
        out.extend_from_slice(self.gamma_prev.as_bytes());
        out.extend_from_slice(&(self.records.len() as u16).to_be_bytes());
        for r in &self.records {
            out.extend_from_slice(&r.encode());
        }
        out
    }

    pub fn decode(suite: &Suite, bytes: &[u8]) -> Result<Block, DecodeError> {
        let mut r = Reader { buf: bytes };
        let index = u32::from_be_bytes(r.take(4)?.try_into().expect("4"));
        let gamma_prev = r.digest(suite)?;
        let count = u16::from_be_bytes(r.take(2)?.try_into().expect("2"));
        let mut records = Vec::with_capacity(count as usize);
        for _ in 0..count {
            records.push(Record::read(suite, &mut r)?);
        }
        if !r.buf.is_empty() {
            return Err(DecodeError::Trailing);
        }
        Ok(Block {
            index,
            gamma_prev,
            records,
        })
    }

    pub fn hash(&self, suite: &Suite) -> Digest {
        suite.hash(&self.serialize())
    }

    /// Records paired with their addresses, in block order.
    pub fn addressed(&self) -> Vec<(RecordAddress, &Record)> {
        let mut counters: std::collections::HashMap<(RecordKind, Option<Uid>), u32> =
            std::collections::HashMap::new();
        self.records
            .iter()
            .map(|r| {
                let c = counters.entry((r.kind(), r.uid())).or_insert(0);
                let addr = RecordAddress::new(self.index, *c);
                *c += 1;
                (addr, r)
            })
            .collect()
    }

    pub fn contains(&self, record: &Record) -> bool {
        self.records.contains(record)
    }
}

/// Read access to posted blocks, as needed by the round validator.
pub trait LedgerView {
    /// Block `index`, if posted.
    fn block(&self, index: u32) -> Option<&Block>;

    /// All records under `uid` in blocks strictly between `after` and
    /// `before`, in ascending address order.
    fn records_between(&self, uid: Uid, after: u32, before: u32) -> Vec<(RecordAddress, Record)> {
        let mut out = Vec::new();
        for b in after.saturating_add(1)..before {
            if let Some(block) = self.block(b) {
                out.extend(
                    block
                        .addressed()
                        .into_iter()
                        .filter(|(_, r)| r.uid() == Some(uid))
                        .map(|(a, r)| (a, *r)),
                );
            }
        }
        out
    }
}

/// Blocks stored densely from index 1.
impl LedgerView for [Block] {
    fn block(&self, index: u32) -> Option<&Block> {
        let i = (index as usize).checked_sub(1)?;
        self.get(i).filter(|b| b.index == index)
    }
}

impl LedgerView for Vec<Block> {
    fn block(&self, index: u32) -> Option<&Block> {
        self.as_slice().block(index)
    }
}
