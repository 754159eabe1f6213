//! Write-once content-addressable storage and the proof trigger pipeline.
//!
//! Content is stored under `H(content)` and never rewritten. After the Fog
//! Server closes an SLVP round it stores one `W_S` proof per S-record and arms
//! a trigger on the recovered `H_M`; when the user later uploads content with
//! that hash the trigger fires and yields a C-record for the next block.
//! Triggers that never fire expire into the security log.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::ledger::record::{RecordAddress, Uid};
use crate::primitives::{Digest, Suite};

/// Blocks a trigger waits for its content before it expires.
pub const DEFAULT_EXPIRY_AFTER: u32 = 16;

#[derive(Debug, Error)]
pub enum CasError {
    #[error("hash break: {0} already names different content")]
    HashBreak(Digest),
    #[error("integrity failure: content stored under {0} does not hash to its name")]
    Integrity(Digest),
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("malformed proof object")]
    Malformed,
}

#[derive(Debug)]
enum Backend {
    Memory(BTreeMap<Digest, Vec<u8>>),
    Dir(PathBuf),
}

/// WORM store. Every read is re-hashed before it is returned.
#[derive(Debug)]
pub struct CasStore {
    suite: Suite,
    backend: Backend,
    entries: usize,
    bytes: usize,
}

impl CasStore {
    pub fn in_memory(suite: Suite) -> Self {
        Self {
            suite,
            backend: Backend::Memory(BTreeMap::new()),
            entries: 0,
            bytes: 0,
        }
    }

    /// Opens (or creates) a directory store laid out as `root/ab/cd/<hex>`.
    pub fn open_dir(suite: Suite, root: impl AsRef<Path>) -> Result<Self, CasError> {
        let root = root.as_ref().to_path_buf();
        fs::create_dir_all(&root)?;
        let mut entries = 0;
        let mut bytes = 0;
        for a in fs::read_dir(&root)? {
            let a = a?.path();
            if !a.is_dir() {
                continue;
            }
            for b in fs::read_dir(&a)? {
                let b = b?.path();
                if !b.is_dir() {
                    continue;
                }
                for f in fs::read_dir(&b)? {
                    let meta = f?.metadata()?;
                    entries += 1;
                    bytes += meta.len() as usize;
                }
            }
        }
        Ok(Self {
            suite,
            backend: Backend::Dir(root),
            entries,
            bytes,
        })
    }

    pub fn suite(&self) -> &Suite {
        &self.suite
    }

    pub fn len(&self) -> usize {
        self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries == 0
    }

    /// Total stored content bytes.
    pub fn total_bytes(&self) -> usize {
        self.bytes
    }

    /// Path of the file backing `name`, for directory stores.
    pub fn path_of(&self, name: &Digest) -> Option<PathBuf> {
        match &self.backend {
            Backend::Dir(root) => {
                let hex = name.to_hex();
                Some(root.join(&hex[0..2]).join(&hex[2..4]).join(hex))
            }
            Backend::Memory(_) => None,
        }
    }

    fn raw_get(&self, name: &Digest) -> Result<Option<Vec<u8>>, CasError> {
        match &self.backend {
            Backend::Memory(map) => Ok(map.get(name).cloned()),
            Backend::Dir(_) => {
                let path = self.path_of(name).expect("dir backend");
                match fs::read(path) {
                    Ok(v) => Ok(Some(v)),
                    Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
                    Err(e) => Err(e.into()),
                }
            }
        }
    }

    pub fn put(&mut self, content: &[u8]) -> Result<Digest, CasError> {
        let name = self.suite.hash(content);
        if let Some(existing) = self.raw_get(&name)? {
            if existing != content {
                return Err(CasError::HashBreak(name));
            }
            return Ok(name);
        }
        match &mut self.backend {
            Backend::Memory(map) => {
                map.insert(name, content.to_vec());
            }
            Backend::Dir(_) => {
                let path = self.path_of(&name).expect("dir backend");
                fs::create_dir_all(path.parent().expect("fan-out parent"))?;
                let tmp = path.with_extension("tmp");
                fs::write(&tmp, content)?;
                fs::rename(&tmp, &path)?;
            }
        }
        self.entries += 1;
        self.bytes += content.len();
        Ok(name)
    }

    pub fn get(&self, name: &Digest) -> Result<Option<Vec<u8>>, CasError> {
        match self.raw_get(name)? {
            Some(c) if self.suite.hash(&c) != *name => Err(CasError::Integrity(*name)),
            other => Ok(other),
        }
    }

    pub fn contains(&self, name: &Digest) -> bool {
        matches!(self.raw_get(name), Ok(Some(_)))
    }

    /// Overwrites stored bytes behind the store's back. Fault injection only.
    #[doc(hidden)]
    pub fn tamper(&mut self, name: &Digest, content: &[u8]) -> Result<(), CasError> {
        match &mut self.backend {
            Backend::Memory(map) => {
                map.insert(*name, content.to_vec());
            }
            Backend::Dir(_) => {
                let path = self.path_of(name).expect("dir backend");
                fs::write(path, content)?;
            }
        }
        Ok(())
    }
}

/// Proof data `W_S = (k, UID, H_M, addr(LV), addr(S))`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct WsProof {
    pub k: u32,
    pub uid: Uid,
    pub h_m: Digest,
    pub lv_addr: RecordAddress,
    pub s_addr: RecordAddress,
}

impl WsProof {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(6 + self.h_m.len() + 16);
        out.extend_from_slice(&self.k.to_be_bytes());
        out.extend_from_slice(&self.uid.0);
        out.extend_from_slice(self.h_m.as_bytes());
        out.extend_from_slice(&self.lv_addr.encode());
        out.extend_from_slice(&self.s_addr.encode());
        out
    }

    pub fn decode(suite: &Suite, bytes: &[u8]) -> Result<Self, CasError> {
        let n = suite.hash_len();
        if bytes.len() != 6 + n + 16 {
            return Err(CasError::Malformed);
        }
        let u32_at = |i: usize| u32::from_be_bytes(bytes[i..i + 4].try_into().expect("4 bytes"));
        let o = 6 + n;
        Ok(Self {
            k: u32_at(0),
            uid: Uid([bytes[4], bytes[5]]),
            h_m: Digest::from_slice(&bytes[6..o]).map_err(|_| CasError::Malformed)?,
            lv_addr: RecordAddress::new(u32_at(o), u32_at(o + 4)),
            s_addr: RecordAddress::new(u32_at(o + 8), u32_at(o + 12)),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Trigger {
    pub uid: Uid,
    pub h_m: Digest,
    pub ws_name: Digest,
    pub created_block: u32,
    pub expiry_after: u32,
}

impl Trigger {
    pub fn expired_at(&self, current_block: u32) -> bool {
        current_block > self.created_block.saturating_add(self.expiry_after)
    }
}

/// Confirmation that CAS holds the content and its proof: `C = UID:(H_M, H(W_S))`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CRecord {
    pub uid: Uid,
    pub h_m: Digest,
    pub ws_name: Digest,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Submission {
    Accepted { name: Digest, records: Vec<CRecord> },
    /// No trigger armed for this (uid, hash); content refused.
    NoTrigger,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SecurityLogEntry {
    pub trigger: Trigger,
    pub expired_at: u32,
}

/// Store plus trigger table, as operated by the Fog Server.
#[derive(Debug)]
pub struct Cas {
    store: CasStore,
    expiry_after: u32,
    triggers: BTreeMap<(Uid, Digest), Vec<Trigger>>,
    security_log: Vec<SecurityLogEntry>,
    fired: u64,
}

impl Cas {
    pub fn new(store: CasStore, expiry_after: u32) -> Self {
        Self {
            store,
            expiry_after,
            triggers: BTreeMap::new(),
            security_log: Vec::new(),
            fired: 0,
        }
    }

    pub fn in_memory(suite: Suite) -> Self {
        Self::new(CasStore::in_memory(suite), DEFAULT_EXPIRY_AFTER)
    }

    pub fn store(&self) -> &CasStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut CasStore {
        &mut self.store
    }

    pub fn expiry_after(&self) -> u32 {
        self.expiry_after
    }

    pub fn active_triggers(&self) -> impl Iterator<Item = &Trigger> {
        self.triggers.values().flatten()
    }

    pub fn security_log(&self) -> &[SecurityLogEntry] {
        &self.security_log
    }

    pub fn fired_count(&self) -> u64 {
        self.fired
    }

    /// Stores `ws` and arms a trigger on `(uid, h_m)`. Distinct proofs for the
    /// same hash are all kept; re-registering the same proof is a no-op.
    pub fn register_trigger(&mut self, ws: &WsProof, current_block: u32) -> Result<Digest, CasError> {
        let ws_name = self.store.put(&ws.encode())?;
        let slot = self.triggers.entry((ws.uid, ws.h_m)).or_default();
        if !slot.iter().any(|t| t.ws_name == ws_name) {
            slot.push(Trigger {
                uid: ws.uid,
                h_m: ws.h_m,
                ws_name,
                created_block: current_block,
                expiry_after: self.expiry_after,
            });
        }
        Ok(ws_name)
    }

    pub fn submit_content(&mut self, uid: Uid, content: &[u8]) -> Result<Submission, CasError> {
        let h_m = self.store.suite().hash(content);
        let Some(fired) = self.triggers.remove(&(uid, h_m)) else {
            return Ok(Submission::NoTrigger);
        };
        let name = self.store.put(content)?;
        self.fired += fired.len() as u64;
        Ok(Submission::Accepted {
            name,
            records: fired
                .into_iter()
                .map(|t| CRecord {
                    uid,
                    h_m,
                    ws_name: t.ws_name,
                })
                .collect(),
        })
    }

    /// Removes triggers older than their window, logs them and returns the
    /// names of their proofs. The proof objects themselves stay in the store.
    pub fn expire_triggers(&mut self, current_block: u32) -> Vec<Digest> {
        let mut out = Vec::new();
        self.triggers.retain(|_, slot| {
            slot.retain(|t| {
                if t.expired_at(current_block) {
                    out.push(*t);
                    false
                } else {
                    true
                }
            });
            !slot.is_empty()
        });
        out.sort_by_key(|t| (t.created_block, t.uid, t.h_m, t.ws_name));
        self.security_log.extend(out.iter().map(|t| SecurityLogEntry {
            trigger: *t,
            expired_at: current_block,
        }));
        out.into_iter().map(|t| t.ws_name).collect()
    }
}
