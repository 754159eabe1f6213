//! Noise reduction with the enrolment key: two-byte MACs on everything a
//! thing sends to the Fog Server, and short authenticators telling a thing
//! which Sequencer message to help re-broadcast.
//!
//! A passing MAC carries no protocol authority; it only keeps random noise
//! away from the validator.

use std::collections::BTreeMap;

use crate::ledger::record::{Record, Submission, Uid};
use crate::ledger::registry::UidRegistry;
use crate::pls::Category;
use crate::primitives::{Suite, SymmetricKey};

pub const MAC_LEN: usize = 2;
/// Bytes of `pi(H(M))` in a proxy authenticator.
pub const SHORT_HASH_LEN: usize = 2;

pub fn short_mac(suite: &Suite, key: &SymmetricKey, data: &[u8]) -> [u8; MAC_LEN] {
    let m = suite.mac(key, data, MAC_LEN).expect("mac length");
    [m[0], m[1]]
}

/// Attaches the sender's MAC to a record.
pub fn sign_record(suite: &Suite, key: &SymmetricKey, record: Record) -> Submission {
    Submission {
        record,
        mac: Some(short_mac(suite, key, &record.encode())),
    }
}

/// MAC input for a content upload.
pub fn content_mac_input(uid: Uid, content: &[u8]) -> Vec<u8> {
    [&uid.0[..], content].concat()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FilterVerdict {
    Accept,
    DropUnknownUid,
    DropBadMac,
}

/// The Fog Server gate. When disabled every message passes and only the
/// counters move.
#[derive(Clone, Debug)]
pub struct MacFilter {
    pub enabled: bool,
    pub accepted: u64,
    pub dropped: u64,
}

impl MacFilter {
    pub fn new(enabled: bool) -> Self {
        Self {
            enabled,
            accepted: 0,
            dropped: 0,
        }
    }

    pub fn check(
        &mut self,
        suite: &Suite,
        registry: &UidRegistry,
        uid: Uid,
        message: &[u8],
        trailer: Option<[u8; MAC_LEN]>,
    ) -> FilterVerdict {
        let verdict = if !self.enabled {
            FilterVerdict::Accept
        } else {
            match registry.get(&uid) {
                None => FilterVerdict::DropUnknownUid,
                Some(reg) => match trailer {
                    Some(t) if t == short_mac(suite, &reg.key, message) => FilterVerdict::Accept,
                    _ => FilterVerdict::DropBadMac,
                },
            }
        };
        if verdict == FilterVerdict::Accept {
            self.accepted += 1;
        } else {
            self.dropped += 1;
        }
        verdict
    }

    pub fn check_submission(&mut self, suite: &Suite, registry: &UidRegistry, sub: &Submission) -> FilterVerdict {
        match sub.record.uid() {
            Some(uid) => self.check(suite, registry, uid, &sub.record.encode(), sub.mac),
            None => {
                self.dropped += 1;
                FilterVerdict::DropUnknownUid
            }
        }
    }
}

/// `u = UID || cat || pi(H(M))` extended with `MAC_K(u)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ProxyAuth {
    pub uid: Uid,
    pub category: Category,
    pub short_hash: [u8; SHORT_HASH_LEN],
    pub mac: [u8; MAC_LEN],
}

impl ProxyAuth {
    pub fn body(&self) -> Vec<u8> {
        let mut u = self.uid.0.to_vec();
        u.push(self.category.tag());
        u.extend_from_slice(&self.short_hash);
        u
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut u = self.body();
        u.extend_from_slice(&self.mac);
        u
    }
}

/// Prepared by the Fog Server for `uid` about Sequencer message `m` of
/// category `cat`. `None` for an unknown UID.
pub fn proxy_authenticator(
    suite: &Suite,
    registry: &UidRegistry,
    uid: Uid,
    cat: Category,
    m: &[u8],
) -> Option<ProxyAuth> {
    let reg = registry.get(&uid)?;
    let h = suite.hash(m);
    let mut a = ProxyAuth {
        uid,
        category: cat,
        short_hash: [h.as_bytes()[0], h.as_bytes()[1]],
        mac: [0; MAC_LEN],
    };
    a.mac = short_mac(suite, &reg.key, &a.body());
    Some(a)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RelayDecision {
    /// Latest message matches: join the re-broadcast group.
    Relay,
    /// Missing or different message: ask peers for candidates.
    Solicit,
    /// Bad MAC or not addressed to this device.
    Ignore,
}

/// Device-side handling of an authenticator given the latest message
/// received in each category.
pub fn check_authenticator(
    suite: &Suite,
    uid: Uid,
    key: &SymmetricKey,
    auth: &ProxyAuth,
    latest: &BTreeMap<Category, Vec<u8>>,
) -> RelayDecision {
    if auth.uid != uid || short_mac(suite, key, &auth.body()) != auth.mac {
        return RelayDecision::Ignore;
    }
    match latest.get(&auth.category) {
        Some(m) if suite.hash(m).as_bytes()[..SHORT_HASH_LEN] == auth.short_hash => RelayDecision::Relay,
        _ => RelayDecision::Solicit,
    }
}
