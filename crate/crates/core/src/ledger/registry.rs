//! UID registry and the enrolment handshake.
//!
//! Over an out-of-band channel the device receives a fresh key `K` and the
//! Sequencer's latest proof. It picks `N_1` and a secret `N*` and sends
//! `Q = P_1 || E_K(P_1 ^ N*)`. The Fog Server answers `H(N*)` if the prefix of
//! `P_1` is still free, and `FAIL` otherwise, in which case the device starts
//! over with a new pair.

use std::collections::BTreeMap;

use rand::RngCore;
use thiserror::Error;

use crate::emergency::NonceSchedule;
use crate::ledger::record::Uid;
use crate::primitives::{Digest, Nonce, Suite, SymmetricKey};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Registration {
    pub p1: Digest,
    pub key: SymmetricKey,
    pub enrolment_block: u32,
    /// Emergency signatures are refused up to and including this round.
    pub probation_until: u32,
    /// Chain tops for rounds `1-alpha..=0`, when provisioned at enrolment.
    pub bootstrap: BTreeMap<i64, Nonce>,
}

#[derive(Clone, Debug)]
pub struct UidRegistry {
    suite: Suite,
    prefix_len: usize,
    alpha: usize,
    entries: BTreeMap<Uid, Registration>,
}

impl UidRegistry {
    pub fn new(suite: Suite, prefix_len: usize, alpha: usize) -> Self {
        Self {
            suite,
            prefix_len: prefix_len.clamp(1, 2),
            alpha,
            entries: BTreeMap::new(),
        }
    }

    pub fn prefix_len(&self) -> usize {
        self.prefix_len
    }

    pub fn capacity(&self) -> usize {
        1 << (8 * self.prefix_len)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, uid: &Uid) -> Option<&Registration> {
        self.entries.get(uid)
    }

    pub fn uids(&self) -> impl Iterator<Item = &Uid> {
        self.entries.keys()
    }

    /// Handles `Q` sealed under the session key `key`.
    pub fn fs_enrol(&mut self, key: &SymmetricKey, q: &[u8], block: u32) -> EnrolmentReply {
        let Ok(req) = EnrolmentRequest::decode(&self.suite, q) else {
            return EnrolmentReply::Fail;
        };
        let uid = Uid::from_p1(&req.p1, self.prefix_len);
        if self.entries.contains_key(&uid) {
            return EnrolmentReply::Fail;
        }
        let Ok(masked) = self.suite.decrypt(&key.0, &req.sealed) else {
            return EnrolmentReply::Fail;
        };
        let n_star = masked.xor(&req.p1).expect("suite lengths");
        self.entries.insert(
            uid,
            Registration {
                p1: req.p1,
                key: *key,
                enrolment_block: block,
                probation_until: self.alpha as u32,
                bootstrap: BTreeMap::new(),
            },
        );
        EnrolmentReply::Ack(self.suite.hash(n_star.as_bytes()))
    }

    /// Records bootstrap chain tops; lifts the probation period.
    pub fn provision_bootstrap(&mut self, uid: &Uid, tops: BTreeMap<i64, Nonce>) -> bool {
        match self.entries.get_mut(uid) {
            Some(r) => {
                r.bootstrap = tops;
                r.probation_until = 0;
                true
            }
            None => false,
        }
    }

    /// Withdrawal of a thing: the UID is forgotten.
    pub fn withdraw(&mut self, uid: &Uid) -> Option<Registration> {
        self.entries.remove(uid)
    }
}

/// `Q = P_1 || E_K(P_1 ^ N*)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EnrolmentRequest {
    pub p1: Digest,
    pub sealed: Digest,
}

impl EnrolmentRequest {
    pub fn encode(&self) -> Vec<u8> {
        [self.p1.as_bytes(), self.sealed.as_bytes()].concat()
    }

    pub fn decode(suite: &Suite, bytes: &[u8]) -> Result<Self, crate::primitives::PrimitiveError> {
        let n = suite.hash_len();
        if bytes.len() != 2 * n {
            return Err(crate::primitives::PrimitiveError::LengthMismatch {
                expected: 2 * n,
                actual: bytes.len(),
            });
        }
        Ok(Self {
            p1: Digest::from_slice(&bytes[..n])?,
            sealed: Digest::from_slice(&bytes[n..])?,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnrolmentReply {
    Ack(Digest),
    Fail,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EnrolConfig {
    pub prefix_len: usize,
    pub alpha: usize,
    /// Provision bootstrap chains so emergency signing needs no probation.
    pub bootstrap: bool,
    pub max_attempts: u32,
}

impl Default for EnrolConfig {
    fn default() -> Self {
        Self {
            prefix_len: 2,
            alpha: crate::emergency::DEFAULT_ALPHA,
            bootstrap: false,
            max_attempts: 8,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EnrolError {
    #[error("enrolment failed after {attempts} attempts")]
    Exhausted { attempts: u32 },
    /// Reported out of band, quoting the values involved.
    #[error("bad acknowledgement for P_1={p1} N*={n_star}: got {ack}")]
    AckMismatch { p1: Digest, n_star: Digest, ack: Digest },
}

/// Device state between sending `Q` and receiving the reply.
#[derive(Clone, Debug)]
pub struct PendingEnrolment {
    pub schedule: NonceSchedule,
    pub bootstrap: BTreeMap<i64, Nonce>,
    pub n_star: Nonce,
    pub request: EnrolmentRequest,
}

impl PendingEnrolment {
    pub fn p1(&self) -> Digest {
        self.request.p1
    }

    /// Checks the reply. `Ok(None)` means FAIL: start again with a new pair.
    pub fn complete(&self, reply: EnrolmentReply, suite: &Suite) -> Result<Option<()>, EnrolError> {
        match reply {
            EnrolmentReply::Fail => Ok(None),
            EnrolmentReply::Ack(ack) if ack == suite.hash(self.n_star.as_bytes()) => Ok(Some(())),
            EnrolmentReply::Ack(ack) => Err(EnrolError::AckMismatch {
                p1: self.request.p1,
                n_star: self.n_star.0,
                ack,
            }),
        }
    }
}

/// Device side of step 2: draws `N_1` (the top of the first nonce chain) and
/// `N*` and seals the request under `key`.
pub fn device_request<R: RngCore + ?Sized>(
    suite: &Suite,
    key: &SymmetricKey,
    cfg: &EnrolConfig,
    rng: &mut R,
) -> PendingEnrolment {
    let (mut schedule, bootstrap) = if cfg.bootstrap {
        NonceSchedule::with_bootstrap(*suite, cfg.alpha, rng).expect("alpha > 0")
    } else {
        (NonceSchedule::new(*suite, cfg.alpha), BTreeMap::new())
    };
    let n1 = schedule.next_nonce(rng);
    let n_star = Nonce::random(suite, rng);
    let p1 = suite.hash(n1.as_bytes());
    let sealed = suite
        .encrypt(&key.0, &p1.xor(&n_star.0).expect("suite lengths"))
        .expect("suite lengths");
    PendingEnrolment {
        schedule,
        bootstrap,
        n_star,
        request: EnrolmentRequest { p1, sealed },
    }
}

/// A device that completed enrolment.
#[derive(Clone, Debug)]
pub struct DeviceEnrolment {
    pub uid: Uid,
    pub key: SymmetricKey,
    pub schedule: NonceSchedule,
    pub p1: Digest,
    /// The Sequencer proof handed over with `K`, anchoring the device's PLS receiver.
    pub sequencer_p: Digest,
    pub attempts: u32,
}

/// Runs the handshake between a fresh device and the Fog Server until it
/// succeeds or `cfg.max_attempts` requests have been refused.
pub fn enrol<R: RngCore + ?Sized>(
    registry: &mut UidRegistry,
    sequencer_p: Digest,
    cfg: &EnrolConfig,
    block: u32,
    rng: &mut R,
) -> Result<DeviceEnrolment, EnrolError> {
    let suite = registry.suite;
    let key = SymmetricKey::random(&suite, rng);
    for attempt in 1..=cfg.max_attempts {
        let pending = device_request(&suite, &key, cfg, rng);
        let reply = registry.fs_enrol(&key, &pending.request.encode(), block);
        if pending.complete(reply, &suite)?.is_some() {
            let uid = Uid::from_p1(&pending.p1(), registry.prefix_len);
            if cfg.bootstrap {
                registry.provision_bootstrap(&uid, pending.bootstrap.clone());
            }
            return Ok(DeviceEnrolment {
                uid,
                key,
                schedule: pending.schedule,
                p1: pending.request.p1,
                sequencer_p,
                attempts: attempt,
            });
        }
    }
    Err(EnrolError::Exhausted {
        attempts: cfg.max_attempts,
    })
}
