//! Posting protocol for things: rounds of `S -> LV -> P` records.
//!
//! Round `k` opens once `P_k = H(N_k)` is posted. The user then posts
//! `S_k = E_{N_k}(H(M_k) ^ H(N_{k+1}))`, the link-verify record
//! `L_k || V_k = H(N_{k+1}) ^ N_k || H(H(N_{k+1}) || N_k)` and finally
//! `P_{k+1}`. The Fog Server accepts `P_{k+1}` against the first LV record
//! that links it to `P_k` and carries a matching `V`, unless an LV posted in
//! an earlier block already proves knowledge of the same `N_k`. That earlier
//! proof is what defeats the jam-spoof fork.

use std::collections::{BTreeMap, VecDeque};

use rand::RngCore;

use crate::emergency::NonceSchedule;
use crate::ledger::record::{Block, LedgerView, Record, RecordAddress, Uid};
use crate::primitives::{Digest, Nonce, Suite};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct LvRecord {
    pub l: Digest,
    pub v: Digest,
}

/// `E_{N_k}(h_m ^ H(N_{k+1}))`.
pub fn make_s(suite: &Suite, n_k: &Nonce, h_m: &Digest, n_next: &Nonce) -> Digest {
    let plain = h_m
        .xor(&suite.hash(n_next.as_bytes()))
        .expect("suite lengths");
    suite.encrypt(&n_k.0, &plain).expect("suite lengths")
}

pub fn make_lv(suite: &Suite, n_k: &Nonce, n_next: &Nonce) -> LvRecord {
    let h_next = suite.hash(n_next.as_bytes());
    LvRecord {
        l: h_next.xor(&n_k.0).expect("suite lengths"),
        v: suite.hash_parts(&[h_next.as_bytes(), n_k.as_bytes()]),
    }
}

/// `H_M = P_{k+1} ^ D_{P_{k+1} ^ L}(S)`.
pub fn recover_message_hash(suite: &Suite, s: &Digest, l: &Digest, p_next: &Digest) -> Digest {
    let key = p_next.xor(l).expect("suite lengths");
    p_next
        .xor(&suite.decrypt(&key, s).expect("suite lengths"))
        .expect("suite lengths")
}

/// Does `lv` prove knowledge of `n`, i.e. `V == H(L ^ N || N)`?
pub fn proves_knowledge(suite: &Suite, lv: &LvRecord, n: &Digest) -> bool {
    let h_next = lv.l.xor(n).expect("suite lengths");
    suite.hash_parts(&[h_next.as_bytes(), n.as_bytes()]) == lv.v
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ValidationMode {
    /// Full check: link, verify component, earliest-LV arbitration.
    Slvp,
    /// Classic Guy Fawkes link check only; kept to show the fork it allows.
    LinkOnly,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RejectReason {
    UnknownUid,
    NoValidLv,
    /// An LV in an earlier block already proves knowledge of the revealed nonce.
    EarlierLvWins,
    /// Link-only mode: the candidate continues the chain from the proof
    /// before the last accepted one, so two competing links exist and the
    /// ledger alone cannot tell which is genuine.
    ForkAmbiguity,
}

impl RejectReason {
    pub fn label(&self) -> &'static str {
        match self {
            RejectReason::UnknownUid => "unknown-uid",
            RejectReason::NoValidLv => "no-valid-lv",
            RejectReason::EarlierLvWins => "earlier-lv-wins",
            RejectReason::ForkAmbiguity => "fork-ambiguity",
        }
    }
}

/// Data gathered when a round closes: the selected LV, the nonce it reveals
/// and one recovered hash per S-record in the round window.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Acceptance {
    pub uid: Uid,
    /// The round `k` this proof closes; the accepted record is `P_{k+1}`.
    pub round: u32,
    pub p: Digest,
    pub lv_addr: RecordAddress,
    pub revealed_n: Nonce,
    pub s_results: Vec<(RecordAddress, Digest)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Decision {
    Accept(Acceptance),
    Reject(RejectReason),
}

impl Decision {
    pub fn is_accept(&self) -> bool {
        matches!(self, Decision::Accept(_))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct UidRound {
    pub last_p: Digest,
    /// Block `B` holding `last_p`.
    pub last_p_block: u32,
    pub round: u32,
    /// S records in blocks after this one still belong to the open round:
    /// those posted after the previous LV were not yet claimed.
    s_after: u32,
    prev: Option<(Digest, u32)>,
}

/// Fog Server side of the protocol, one entry per enrolled UID.
#[derive(Clone, Debug)]
pub struct SlvpValidator {
    suite: Suite,
    mode: ValidationMode,
    uids: BTreeMap<Uid, UidRound>,
}

impl SlvpValidator {
    pub fn new(suite: Suite, mode: ValidationMode) -> Self {
        Self {
            suite,
            mode,
            uids: BTreeMap::new(),
        }
    }

    pub fn mode(&self) -> ValidationMode {
        self.mode
    }

    /// Registers the enrolment-authenticated `P_1` posted in `block`.
    pub fn anchor(&mut self, uid: Uid, p1: Digest, block: u32) {
        self.uids.insert(
            uid,
            UidRound {
                last_p: p1,
                last_p_block: block,
                round: 1,
                s_after: block,
                prev: None,
            },
        );
    }

    pub fn remove(&mut self, uid: &Uid) {
        self.uids.remove(uid);
    }

    pub fn state(&self, uid: &Uid) -> Option<&UidRound> {
        self.uids.get(uid)
    }

    /// Decides whether `p` closes the open round of `uid`. `current_block` is
    /// the block being formed; only records in blocks `B+1 .. current_block-1`
    /// are considered. An accepted `p` is recorded as posted in `current_block`.
    pub fn validate_p(
        &mut self,
        uid: Uid,
        p: &Digest,
        view: &(impl LedgerView + ?Sized),
        current_block: u32,
    ) -> Decision {
        let Some(state) = self.uids.get(&uid).copied() else {
            return Decision::Reject(RejectReason::UnknownUid);
        };
        if p.len() != self.suite.hash_len() {
            return Decision::Reject(RejectReason::NoValidLv);
        }
        let s = &self.suite;
        let records = view.records_between(uid, state.last_p_block, current_block);
        let lvs: Vec<(RecordAddress, LvRecord)> = records
            .iter()
            .filter_map(|(a, r)| match r {
                Record::Lv { lv, .. } => Some((*a, *lv)),
                _ => None,
            })
            .collect();

        let mut chosen = None;
        for (addr, lv) in &lvs {
            let n = lv.l.xor(p).expect("suite lengths");
            if s.hash(n.as_bytes()) != state.last_p {
                continue;
            }
            if self.mode == ValidationMode::Slvp
                && s.hash_parts(&[p.as_bytes(), n.as_bytes()]) != lv.v
            {
                continue;
            }
            chosen = Some((*addr, n));
            break;
        }
        let Some((lv_addr, n)) = chosen else {
            return Decision::Reject(self.no_link_reason(uid, &state, p, view, current_block));
        };

        if self.mode == ValidationMode::Slvp
            && lvs
                .iter()
                .any(|(a, other)| a.block < lv_addr.block && proves_knowledge(s, other, &n))
        {
            return Decision::Reject(RejectReason::EarlierLvWins);
        }

        let cipher = s.cipher(&n).expect("suite lengths");
        let s_results = view
            .records_between(uid, state.s_after, current_block)
            .iter()
            .filter_map(|(a, r)| match r {
                Record::S { ciphertext, .. } if a.block < lv_addr.block => {
                    Some((*a, cipher.decrypt(ciphertext).xor(p).expect("suite lengths")))
                }
                _ => None,
            })
            .collect();

        self.uids.insert(
            uid,
            UidRound {
                last_p: *p,
                last_p_block: current_block,
                round: state.round + 1,
                s_after: lv_addr.block - 1,
                prev: Some((state.last_p, state.last_p_block)),
            },
        );
        Decision::Accept(Acceptance {
            uid,
            round: state.round,
            p: *p,
            lv_addr,
            revealed_n: Nonce(n),
            s_results,
        })
    }

    fn no_link_reason(
        &self,
        uid: Uid,
        state: &UidRound,
        p: &Digest,
        view: &(impl LedgerView + ?Sized),
        current_block: u32,
    ) -> RejectReason {
        if self.mode != ValidationMode::LinkOnly {
            return RejectReason::NoValidLv;
        }
        let Some((prev_p, prev_block)) = state.prev else {
            return RejectReason::NoValidLv;
        };
        let competing = view
            .records_between(uid, prev_block, current_block)
            .iter()
            .any(|(_, r)| match r {
                Record::Lv { lv, .. } => {
                    let n = lv.l.xor(p).expect("suite lengths");
                    self.suite.hash(n.as_bytes()) == prev_p
                }
                _ => false,
            });
        if competing {
            RejectReason::ForkAmbiguity
        } else {
            RejectReason::NoValidLv
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    /// Waiting for the proof record that opens the next round.
    AwaitPPosted,
    /// Round open, nothing to sign yet.
    Idle,
    AwaitSPosted,
    AwaitLvPosted,
}

#[derive(Clone, Debug)]
struct Pending {
    record: Record,
    waited: u32,
}

/// A document whose signature round has closed, ready to hand to CAS.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SignedDocument {
    pub round: u32,
    pub h_m: Digest,
    pub content: Vec<u8>,
}

/// Thing side of the protocol. It never learns of acceptance directly; it
/// watches authenticated blocks for its own records and retransmits anything
/// that fails to appear.
#[derive(Clone, Debug)]
pub struct SlvpUser {
    suite: Suite,
    uid: Uid,
    schedule: NonceSchedule,
    round: u32,
    stage: Stage,
    pending: Vec<Pending>,
    queue: VecDeque<Vec<u8>>,
    in_flight: Vec<(Digest, Vec<u8>)>,
    ready: Vec<SignedDocument>,
    retransmit_after: u32,
    retransmissions: u64,
    foreign_p_seen: u64,
    posted_p: Vec<Digest>,
}

/// Default number of blocks a pending record may be missing before it is sent again.
pub const DEFAULT_RETRANSMIT_AFTER: u32 = 2;

impl SlvpUser {
    /// Starts after enrolment: `schedule`'s round-1 nonce is `N_1`, whose
    /// proof `P_1` the Fog Server posts on the user's behalf.
    pub fn new(uid: Uid, schedule: NonceSchedule, retransmit_after: u32) -> Self {
        let suite = *schedule.suite();
        let n1 = schedule.nonce(1).expect("schedule holds N_1");
        let p1 = suite.hash(n1.as_bytes());
        Self {
            suite,
            uid,
            schedule,
            round: 1,
            stage: Stage::AwaitPPosted,
            pending: vec![Pending {
                record: Record::P { uid, digest: p1 },
                waited: 0,
            }],
            queue: VecDeque::new(),
            in_flight: Vec::new(),
            ready: Vec::new(),
            retransmit_after: retransmit_after.max(1),
            retransmissions: 0,
            foreign_p_seen: 0,
            posted_p: Vec::new(),
        }
    }

    pub fn uid(&self) -> Uid {
        self.uid
    }

    pub fn stage(&self) -> Stage {
        self.stage
    }

    /// Round `k`: `P_k` is the newest proof this user has produced.
    pub fn round(&self) -> u32 {
        self.round
    }

    pub fn schedule(&self) -> &NonceSchedule {
        &self.schedule
    }

    pub fn retransmissions(&self) -> u64 {
        self.retransmissions
    }

    /// Proof records under this UID that the user did not produce.
    pub fn foreign_p_seen(&self) -> u64 {
        self.foreign_p_seen
    }

    /// The user's own proofs as observed on the ledger, in order.
    pub fn posted_proofs(&self) -> &[Digest] {
        &self.posted_p
    }

    pub fn current_nonce(&self) -> Nonce {
        self.schedule.nonce(self.round as i64).expect("current chain")
    }

    /// The proof record the user is waiting to see posted, if any.
    pub fn pending_proof(&self) -> Option<Digest> {
        self.pending.iter().find_map(|p| match p.record {
            Record::P { digest, .. } => Some(digest),
            _ => None,
        })
    }

    /// The record most recently handed out for posting in this stage.
    pub fn pending_records(&self) -> Vec<Record> {
        self.pending.iter().map(|p| p.record).collect()
    }

    pub fn queue_document(&mut self, content: Vec<u8>) {
        self.queue.push_back(content);
    }

    pub fn queued(&self) -> usize {
        self.queue.len()
    }

    /// Documents whose round has closed since the last call.
    pub fn take_ready(&mut self) -> Vec<SignedDocument> {
        std::mem::take(&mut self.ready)
    }

    /// Processes one authenticated block and returns the records to send.
    pub fn step<R: RngCore + ?Sized>(&mut self, block: &Block, rng: &mut R) -> Vec<Record> {
        for r in &block.records {
            if let Record::P { uid, digest } = r {
                if *uid == self.uid && !self.pending.iter().any(|p| p.record == *r) {
                    if !self.posted_p.contains(digest) {
                        self.foreign_p_seen += 1;
                    }
                } else if *uid == self.uid {
                    self.posted_p.push(*digest);
                }
            }
        }

        let mut out = Vec::new();
        let before = self.pending.len();
        self.pending.retain(|p| !block.contains(&p.record));
        let progressed = self.pending.len() < before;
        for p in &mut self.pending {
            p.waited += 1;
            if p.waited >= self.retransmit_after {
                p.waited = 0;
                self.retransmissions += 1;
                out.push(p.record);
            }
        }
        if self.pending.is_empty() && (progressed || self.stage == Stage::Idle) {
            out.extend(self.advance(rng));
        }
        out
    }

    fn advance<R: RngCore + ?Sized>(&mut self, rng: &mut R) -> Vec<Record> {
        let s = self.suite;
        match self.stage {
            Stage::AwaitPPosted => {
                if self.round > 1 || !self.in_flight.is_empty() {
                    let closed = self.round - 1;
                    self.ready
                        .extend(self.in_flight.drain(..).map(|(h_m, content)| SignedDocument {
                            round: closed,
                            h_m,
                            content,
                        }));
                }
                self.stage = Stage::Idle;
                self.advance(rng)
            }
            Stage::Idle => {
                if self.queue.is_empty() {
                    return Vec::new();
                }
                let n_k = self.current_nonce();
                let n_next = if self.schedule.latest_round() > self.round as i64 {
                    self.schedule
                        .nonce(self.round as i64 + 1)
                        .expect("generated chain")
                } else {
                    self.schedule.next_nonce(rng)
                };
                let mut out = Vec::new();
                while let Some(content) = self.queue.pop_front() {
                    let h_m = s.hash(&content);
                    let record = Record::S {
                        uid: self.uid,
                        ciphertext: make_s(&s, &n_k, &h_m, &n_next),
                    };
                    self.in_flight.push((h_m, content));
                    self.pending.push(Pending { record, waited: 0 });
                    out.push(record);
                }
                self.stage = Stage::AwaitSPosted;
                out
            }
            Stage::AwaitSPosted => {
                let n_k = self.current_nonce();
                let n_next = self.schedule.nonce(self.round as i64 + 1).expect("next chain");
                let record = Record::Lv {
                    uid: self.uid,
                    lv: make_lv(&s, &n_k, &n_next),
                };
                self.pending.push(Pending { record, waited: 0 });
                self.stage = Stage::AwaitLvPosted;
                vec![record]
            }
            Stage::AwaitLvPosted => {
                let n_next = self.schedule.nonce(self.round as i64 + 1).expect("next chain");
                let record = Record::P {
                    uid: self.uid,
                    digest: s.hash(n_next.as_bytes()),
                };
                self.pending.push(Pending { record, waited: 0 });
                self.round += 1;
                // the previous round stays signable until this proof is posted
                self.schedule.prune(self.round as i64 - 1);
                self.stage = Stage::AwaitPPosted;
                vec![record]
            }
        }
    }
}
