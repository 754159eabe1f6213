//! Deterministic discrete-interval simulation of the whole system.
//!
//! Every interval runs the same phases: the Fog Server closes a block and the
//! Sequencer broadcasts it; each thing receives the broadcast over its direct
//! and proxy paths; things gossip candidate values; receivers verify and
//! authenticate the previous block; things step their posting protocol and
//! submit records; attackers act. All randomness comes from the seed.

pub mod config;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rand::{Rng, RngCore, SeedableRng};
use thiserror::Error;

use crate::cas::CasError;
use crate::emergency::{hors_sign, EmergencyError, EmergencyMessage, HorsParams};
use crate::ledger::filter::{content_mac_input, short_mac, sign_record};
use crate::ledger::fog::{FogConfig, FogServer, FsEvent, SubmitOutcome};
use crate::ledger::record::{Block, Record, Submission, Uid};
use crate::ledger::registry::{EnrolConfig, EnrolError};
use crate::ledger::Sequencer;
use crate::merkle::MerkleError;
use crate::pls::{Frame, PlsError, PlsReceiver};
use crate::primitives::{seeded_rng, Digest, Nonce, PrimitiveError, ProtocolRng, Suite, SymmetricKey};
use crate::slvp::{make_lv, LvRecord, SlvpUser, Stage, ValidationMode};

pub use config::{parse_mode, AttackerModel, ConfigError, SimConfig};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Primitive(#[from] PrimitiveError),
    #[error("enrolment: {0}")]
    Enrol(#[from] EnrolError),
    #[error("cas: {0}")]
    Cas(#[from] CasError),
    #[error("merkle: {0}")]
    Merkle(#[from] MerkleError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum TraceKind {
    Enrol,
    Block,
    Broadcast,
    Ingest,
    Gossip,
    Verify,
    DosFailure,
    Submit,
    FilterDrop,
    Accept,
    Reject,
    TriggerArm,
    TriggerFire,
    TriggerExpire,
    Content,
    Emergency,
    Attack,
    Alarm,
}

impl TraceKind {
    pub fn label(self) -> &'static str {
        match self {
            TraceKind::Enrol => "enrol",
            TraceKind::Block => "block",
            TraceKind::Broadcast => "broadcast",
            TraceKind::Ingest => "ingest",
            TraceKind::Gossip => "gossip",
            TraceKind::Verify => "verify",
            TraceKind::DosFailure => "dos-failure",
            TraceKind::Submit => "submit",
            TraceKind::FilterDrop => "filter-drop",
            TraceKind::Accept => "accept",
            TraceKind::Reject => "reject",
            TraceKind::TriggerArm => "trigger-arm",
            TraceKind::TriggerFire => "trigger-fire",
            TraceKind::TriggerExpire => "trigger-expire",
            TraceKind::Content => "content",
            TraceKind::Emergency => "emergency",
            TraceKind::Attack => "attack",
            TraceKind::Alarm => "alarm",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceEvent {
    pub interval: u32,
    pub actor: String,
    pub kind: TraceKind,
    pub detail: String,
}

impl TraceEvent {
    /// `interval actor kind detail`, space separated.
    pub fn line(&self) -> String {
        format!("{:05} {} {} {}", self.interval, self.actor, self.kind.label(), self.detail)
    }
}

/// How the scripted jam-spoof attack went.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct JamSpoofOutcome {
    pub intercepted_at: Option<u32>,
    pub forged_lv_block: Option<u32>,
    /// `accepted`, `filtered` or `rejected:<reason>`.
    pub forged_p: Option<String>,
    /// First decision on the target's own proof after the interception.
    pub honest_p: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimReport {
    pub config: SimConfig,
    pub blocks_formed: u32,
    /// Highest authenticated block per thing.
    pub verified_chain: Vec<u32>,
    /// Rounds closed by the validator per thing.
    pub rounds_completed: Vec<u32>,
    pub accepts: u64,
    pub rejects: BTreeMap<String, u64>,
    pub triggers_armed: u64,
    pub triggers_fired: u64,
    pub triggers_expired: u64,
    pub content_refused: u64,
    pub mac_dropped: u64,
    pub attacker_records_sent: u64,
    pub attacker_records_reaching_validator: u64,
    pub dos_failures: u64,
    pub unmatched_signatures: u64,
    pub protocol_breaches: u64,
    pub candidates_dropped: u64,
    /// Message hashes authenticated by a receiver that the Sequencer never signed.
    pub forged_hm_accepted: u64,
    /// Proof records accepted that their UID's owner never produced.
    pub forged_p_accepted: u64,
    pub fork_alarms: u64,
    pub retransmissions: u64,
    pub emergency_valid: u64,
    pub emergency_invalid: u64,
    pub emergency_refused: u64,
    pub jam_spoof: Option<JamSpoofOutcome>,
    pub trace_digest: Digest,
    pub trace: Vec<String>,
    /// The ledger as posted.
    pub blocks: Vec<Block>,
}

impl SimReport {
    pub fn integrity_violations(&self) -> u64 {
        self.forged_hm_accepted + self.forged_p_accepted
    }

    /// Highest block any thing can have authenticated by the end of the run.
    pub fn final_block(&self) -> u32 {
        self.blocks_formed.saturating_sub(1)
    }

    pub fn all_verified_to_end(&self) -> bool {
        self.verified_chain.iter().all(|&v| v == self.final_block())
    }

    pub fn reject_count(&self, reason: &str) -> u64 {
        self.rejects.get(reason).copied().unwrap_or(0)
    }

    /// Line-oriented `key: value` summary.
    pub fn render(&self) -> String {
        let mut o = String::new();
        let join = |v: &[u32]| v.iter().map(u32::to_string).collect::<Vec<_>>().join(",");
        let mode = match self.config.mode {
            ValidationMode::Slvp => "slvp",
            ValidationMode::LinkOnly => "gf-baseline",
        };
        let _ = writeln!(o, "mode: {mode}");
        let _ = writeln!(o, "seed: {}", self.config.seed);
        let _ = writeln!(o, "blocks_formed: {}", self.blocks_formed);
        let _ = writeln!(o, "verified_chain: {}", join(&self.verified_chain));
        let _ = writeln!(o, "rounds_completed: {}", join(&self.rounds_completed));
        let _ = writeln!(o, "accepts: {}", self.accepts);
        for (reason, n) in &self.rejects {
            let _ = writeln!(o, "reject.{reason}: {n}");
        }
        let _ = writeln!(o, "triggers_armed: {}", self.triggers_armed);
        let _ = writeln!(o, "triggers_fired: {}", self.triggers_fired);
        let _ = writeln!(o, "triggers_expired: {}", self.triggers_expired);
        let _ = writeln!(o, "content_refused: {}", self.content_refused);
        let _ = writeln!(o, "mac_dropped: {}", self.mac_dropped);
        let _ = writeln!(o, "attacker_records_sent: {}", self.attacker_records_sent);
        let _ = writeln!(
            o,
            "attacker_records_reaching_validator: {}",
            self.attacker_records_reaching_validator
        );
        let _ = writeln!(o, "dos_failures: {}", self.dos_failures);
        let _ = writeln!(o, "unmatched_signatures: {}", self.unmatched_signatures);
        let _ = writeln!(o, "protocol_breaches: {}", self.protocol_breaches);
        let _ = writeln!(o, "candidates_dropped: {}", self.candidates_dropped);
        let _ = writeln!(o, "forged_hm_accepted: {}", self.forged_hm_accepted);
        let _ = writeln!(o, "forged_p_accepted: {}", self.forged_p_accepted);
        let _ = writeln!(o, "integrity_violations: {}", self.integrity_violations());
        let _ = writeln!(o, "fork_alarms: {}", self.fork_alarms);
        let _ = writeln!(o, "retransmissions: {}", self.retransmissions);
        let _ = writeln!(o, "emergency_valid: {}", self.emergency_valid);
        let _ = writeln!(o, "emergency_invalid: {}", self.emergency_invalid);
        let _ = writeln!(o, "emergency_refused: {}", self.emergency_refused);
        if let Some(js) = &self.jam_spoof {
            let opt = |v: &Option<String>| v.clone().unwrap_or_else(|| "none".into());
            let num = |v: Option<u32>| v.map(|x| x.to_string()).unwrap_or_else(|| "none".into());
            let _ = writeln!(o, "jam_spoof.intercepted_at: {}", num(js.intercepted_at));
            let _ = writeln!(o, "jam_spoof.forged_lv_block: {}", num(js.forged_lv_block));
            let _ = writeln!(o, "jam_spoof.forged_p: {}", opt(&js.forged_p));
            let _ = writeln!(o, "jam_spoof.honest_p: {}", opt(&js.honest_p));
        }
        let _ = writeln!(o, "trace_events: {}", self.trace.len());
        let _ = writeln!(o, "trace_digest: {}", self.trace_digest);
        o
    }
}

struct Thing {
    uid: Uid,
    key: SymmetricKey,
    user: SlvpUser,
    rx: PlsReceiver,
    verified_block: u32,
    honest_p: BTreeSet<Digest>,
    docs: u64,
    foreign_seen: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum JsStage {
    Waiting,
    LvSent,
    PSent,
    Done,
}

struct JamSpoof {
    target: usize,
    round: u32,
    stage: JsStage,
    n_hat: Option<Nonce>,
    lv_hat: Option<LvRecord>,
    outcome: JamSpoofOutcome,
}

struct Sim {
    cfg: SimConfig,
    suite: Suite,
    fs: FogServer,
    seq: Sequencer,
    things: Vec<Thing>,
    block_hashes: Vec<Digest>,
    seq_rng: ProtocolRng,
    chan_rng: ProtocolRng,
    thing_rng: ProtocolRng,
    att_rng: ProtocolRng,
    jam_spoof: Option<JamSpoof>,
    jammed: BTreeSet<usize>,
    trace: Vec<TraceEvent>,
    report: SimReport,
    interval: u32,
    hors: Option<HorsParams>,
}

fn label_outcome(o: &SubmitOutcome) -> String {
    match o {
        SubmitOutcome::Accepted(_) => "accepted".into(),
        SubmitOutcome::Rejected(r) => format!("rejected:{}", r.label()),
        SubmitOutcome::Filtered(_) => "filtered".into(),
        SubmitOutcome::Pooled => "pooled".into(),
        SubmitOutcome::Duplicate => "duplicate".into(),
        SubmitOutcome::UnknownUid => "unknown-uid".into(),
        SubmitOutcome::NotAccepted => "not-accepted".into(),
    }
}

fn short(d: &Digest) -> String {
    d.to_hex()[..16].to_string()
}

impl Sim {
    fn new(cfg: SimConfig) -> Result<Self, SimError> {
        cfg.validate()?;
        let suite = Suite::new(cfg.hash_len)?;
        let mut master = seeded_rng(cfg.seed);
        let mut sub = || ProtocolRng::seed_from_u64(master.next_u64());
        let (mut seq_rng, chan_rng, mut thing_rng, att_rng) = (sub(), sub(), sub(), sub());

        let fs_cfg = FogConfig {
            mode: cfg.mode,
            mac_filter: cfg.mac_filter,
            expiry_after: cfg.expiry_after,
            arity: cfg.arity,
            prefix_len: cfg.prefix_len,
            alpha: cfg.alpha,
        };
        let mut fs = FogServer::new(suite, fs_cfg)?;
        let (seq, seq_p1) = Sequencer::init(suite, &mut seq_rng);
        let enrol_cfg = EnrolConfig {
            prefix_len: cfg.prefix_len,
            alpha: cfg.alpha,
            bootstrap: cfg.bootstrap,
            max_attempts: cfg.enrol_attempts,
        };
        let mut things = Vec::with_capacity(cfg.things);
        let mut trace = Vec::new();
        for i in 0..cfg.things {
            let dev = fs.enrol_device(seq_p1, &enrol_cfg, &mut thing_rng)?;
            trace.push(TraceEvent {
                interval: 0,
                actor: format!("thing{i}"),
                kind: TraceKind::Enrol,
                detail: format!("uid={} attempts={} p1={}", dev.uid, dev.attempts, short(&dev.p1)),
            });
            let mut honest_p = BTreeSet::new();
            honest_p.insert(dev.p1);
            things.push(Thing {
                uid: dev.uid,
                key: dev.key,
                user: SlvpUser::new(dev.uid, dev.schedule, cfg.retransmit_after),
                rx: PlsReceiver::new(suite, dev.sequencer_p, cfg.candidate_cap),
                verified_block: 0,
                honest_p,
                docs: 0,
                foreign_seen: 0,
            });
        }
        fs.take_events();

        let slice_bits = cfg.alpha.trailing_zeros() as usize;
        let digest_bits = (126 / slice_bits) * slice_bits;
        let hors = HorsParams::new(cfg.alpha, digest_bits.min(suite.hash_len() * 8)).ok();

        let jam_spoof = cfg.attackers.iter().find_map(|a| match *a {
            AttackerModel::JamSpoof { target, round } => Some(JamSpoof {
                target,
                round,
                stage: JsStage::Waiting,
                n_hat: None,
                lv_hat: None,
                outcome: JamSpoofOutcome::default(),
            }),
            _ => None,
        });
        let jammed = cfg
            .attackers
            .iter()
            .filter_map(|a| match *a {
                AttackerModel::Jam { receivers } => Some(0..receivers),
                _ => None,
            })
            .flatten()
            .collect();

        let report = SimReport {
            config: cfg.clone(),
            blocks_formed: 0,
            verified_chain: Vec::new(),
            rounds_completed: Vec::new(),
            accepts: 0,
            rejects: BTreeMap::new(),
            triggers_armed: 0,
            triggers_fired: 0,
            triggers_expired: 0,
            content_refused: 0,
            mac_dropped: 0,
            attacker_records_sent: 0,
            attacker_records_reaching_validator: 0,
            dos_failures: 0,
            unmatched_signatures: 0,
            protocol_breaches: 0,
            candidates_dropped: 0,
            forged_hm_accepted: 0,
            forged_p_accepted: 0,
            fork_alarms: 0,
            retransmissions: 0,
            emergency_valid: 0,
            emergency_invalid: 0,
            emergency_refused: 0,
            jam_spoof: None,
            trace_digest: Digest::zero(suite.hash_len()),
            trace: Vec::new(),
            blocks: Vec::new(),
        };

        Ok(Self {
            cfg,
            suite,
            fs,
            seq,
            things,
            block_hashes: Vec::new(),
            seq_rng,
            chan_rng,
            thing_rng,
            att_rng,
            jam_spoof,
            jammed,
            trace,
            report,
            interval: 0,
            hors,
        })
    }

    fn log(&mut self, actor: impl Into<String>, kind: TraceKind, detail: impl Into<String>) {
        self.trace.push(TraceEvent {
            interval: self.interval,
            actor: actor.into(),
            kind,
            detail: detail.into(),
        });
    }

    fn thing_index(&self, uid: &Uid) -> Option<usize> {
        self.things.iter().position(|t| t.uid == *uid)
    }

    fn drain_fs_events(&mut self) {
        for e in self.fs.take_events() {
            match e {
                FsEvent::Accept { uid, round, p, lv_addr, signatures } => {
                    self.report.accepts += 1;
                    let honest = self
                        .thing_index(&uid)
                        .is_some_and(|i| self.things[i].honest_p.contains(&p));
                    if !honest {
                        self.report.forged_p_accepted += 1;
                    }
                    self.log(
                        "fs",
                        TraceKind::Accept,
                        format!("uid={uid} round={round} p={} lv={lv_addr} s={signatures} honest={honest}", short(&p)),
                    );
                }
                FsEvent::Reject { uid, p, reason } => {
                    *self.report.rejects.entry(reason.label().to_string()).or_default() += 1;
                    self.log("fs", TraceKind::Reject, format!("uid={uid} p={} reason={}", short(&p), reason.label()));
                }
                FsEvent::Filtered { uid, verdict } => {
                    self.report.mac_dropped += 1;
                    let who = uid.map(|u| u.to_string()).unwrap_or_else(|| "-".into());
                    self.log("fs", TraceKind::FilterDrop, format!("uid={who} verdict={verdict:?}"));
                }
                FsEvent::TriggerArmed { uid, h_m, ws_name } => {
                    self.report.triggers_armed += 1;
                    self.log("cas", TraceKind::TriggerArm, format!("uid={uid} h_m={} ws={}", short(&h_m), short(&ws_name)));
                }
                FsEvent::TriggerFired { uid, h_m, ws_name } => {
                    self.report.triggers_fired += 1;
                    self.log("cas", TraceKind::TriggerFire, format!("uid={uid} h_m={} ws={}", short(&h_m), short(&ws_name)));
                }
                FsEvent::TriggerExpired { ws_name } => {
                    self.report.triggers_expired += 1;
                    self.log("cas", TraceKind::TriggerExpire, format!("ws={}", short(&ws_name)));
                }
                FsEvent::ContentRefused { uid, h_m } => {
                    self.report.content_refused += 1;
                    self.log("cas", TraceKind::Content, format!("uid={uid} h_m={} refused", short(&h_m)));
                }
                FsEvent::Emergency { uid, round, valid } => {
                    self.log("fs", TraceKind::Emergency, format!("uid={uid} round={round} valid={valid}"));
                }
                FsEvent::BlockFormed { index, hash, records } => {
                    self.log("fs", TraceKind::Block, format!("index={index} hash={} records={records}", short(&hash)));
                }
                FsEvent::Enrolled { .. } | FsEvent::Withdrawn { .. } => {}
            }
        }
    }

    fn run(mut self) -> Result<SimReport, SimError> {
        for t in 1..=self.cfg.intervals {
            self.interval = t;
            self.interval_step()?;
        }
        self.finish()
    }

    fn interval_step(&mut self) -> Result<(), SimError> {
        let t = self.interval;
        let block = self.fs.form_block()?;
        self.block_hashes.push(block.hash(&self.suite));
        self.report.blocks_formed += 1;
        self.drain_fs_events();

        let bcast = self.seq.publish(&mut self.seq_rng, &block);
        self.log(
            "sequencer",
            TraceKind::Broadcast,
            format!("bin={} p={} l={} s={}", bcast.bin, short(&bcast.p), short(&bcast.l), short(&bcast.s)),
        );
        self.deliver(&bcast.frames());
        self.gossip();
        let newly = self.verify_all()?;
        self.step_things(newly)?;
        self.attackers_act()?;
        self.drain_fs_events();
        debug_assert_eq!(t, self.interval);
        Ok(())
    }

    fn forged_value(&mut self) -> Digest {
        Digest::random(&mut self.att_rng, self.suite.hash_len())
    }

    fn deliver(&mut self, frames: &[Frame; 3]) {
        let n = self.things.len();
        let corrupt_ps: Vec<f64> = self
            .cfg
            .attackers
            .iter()
            .filter_map(|a| match *a {
                AttackerModel::Corrupt { p } => Some(p),
                _ => None,
            })
            .collect();
        for i in 0..n {
            let mut got = 0;
            for _path in 0..=self.cfg.proxies {
                for f in frames {
                    let value = if self.jammed.contains(&i) {
                        Some(self.forged_value())
                    } else if self.chan_rng.gen_bool(self.cfg.loss_prob) {
                        None
                    } else {
                        let mut v = f.value;
                        if self.chan_rng.gen_bool(self.cfg.corrupt_prob) {
                            let bit = self.chan_rng.gen_range(0..v.len() * 8);
                            v = v.with_bit_flipped(bit);
                        }
                        for &p in &corrupt_ps {
                            if self.att_rng.gen_bool(p) {
                                v = Digest::random(&mut self.att_rng, self.suite.hash_len());
                            }
                        }
                        Some(v)
                    };
                    if let Some(v) = value {
                        self.things[i].rx.ingest(f.bin, f.category, v);
                        got += 1;
                    }
                }
            }
            self.log(format!("thing{i}"), TraceKind::Ingest, format!("bin={} frames={got}", frames[0].bin));
        }
    }

    fn gossip(&mut self) {
        let n = self.things.len();
        for round in 0..self.cfg.gossip_rounds {
            let snapshot: Vec<Vec<Frame>> = self.things.iter().map(|t| t.rx.live_candidates()).collect();
            let mut merged = 0u64;
            for i in 0..n {
                for (j, frames) in snapshot.iter().enumerate() {
                    if i == j || self.chan_rng.gen_bool(self.cfg.loss_prob) {
                        continue;
                    }
                    for f in frames {
                        if self.things[i].rx.ingest_frame(f) == crate::pls::IngestOutcome::Added {
                            merged += 1;
                        }
                    }
                }
            }
            self.log("net", TraceKind::Gossip, format!("round={round} added={merged}"));
        }
    }

    /// Authenticates every block each receiver can now reach, returning the
    /// new blocks per thing.
    fn verify_all(&mut self) -> Result<Vec<Vec<Block>>, SimError> {
        let t = self.interval;
        let mut out = vec![Vec::new(); self.things.len()];
        for i in 0..self.things.len() {
            loop {
                let next = self.things[i].rx.verified_bin() + 1;
                if next > t {
                    break;
                }
                let fs = &self.fs;
                let suite = self.suite;
                let fetch = |h: &Digest| -> Option<Block> {
                    let body = fs.cas().store().get(h).ok()??;
                    Block::decode(&suite, &body).ok().filter(|b| b.index == next - 1)
                };
                match self.things[i].rx.verify_with(next, |h| fetch(h).is_some()) {
                    Ok(v) => {
                        let (h, block) = v
                            .message_hashes
                            .iter()
                            .find_map(|h| fetch(h).map(|b| (*h, b)))
                            .expect("usable hash");
                        if self.block_hashes.get(v.bin as usize - 1) != Some(&h) {
                            self.report.forged_hm_accepted += 1;
                        }
                        self.things[i].verified_block = v.bin;
                        self.log(format!("thing{i}"), TraceKind::Verify, format!("block={} hash={}", v.bin, short(&h)));
                        out[i].push(block);
                    }
                    Err(PlsError::DosFailure { bin }) => {
                        self.report.dos_failures += 1;
                        self.log(format!("thing{i}"), TraceKind::DosFailure, format!("bin={bin}"));
                        break;
                    }
                    Err(PlsError::MissingSignature { bin }) | Err(PlsError::UnmatchedSignature { bin }) => {
                        self.report.unmatched_signatures += 1;
                        self.log(format!("thing{i}"), TraceKind::DosFailure, format!("bin={bin} signature"));
                        break;
                    }
                    Err(PlsError::ProtocolBreach { bin, count }) => {
                        self.report.protocol_breaches += 1;
                        self.log(format!("thing{i}"), TraceKind::Alarm, format!("breach bin={bin} pairs={count}"));
                        break;
                    }
                    Err(e) => return Err(SimError::Primitive(PrimitiveError::Hex(e.to_string()))),
                }
            }
        }
        Ok(out)
    }

    fn step_things(&mut self, newly: Vec<Vec<Block>>) -> Result<(), SimError> {
        for (i, blocks) in newly.into_iter().enumerate() {
            let mut outbound = Vec::new();
            for block in &blocks {
                let th = &mut self.things[i];
                if th.user.queued() == 0 && matches!(th.user.stage(), Stage::Idle | Stage::AwaitPPosted) {
                    th.docs += 1;
                    let doc = format!("thing{i} document {}", th.docs).into_bytes();
                    th.user.queue_document(doc);
                }
                outbound.extend(th.user.step(block, &mut self.thing_rng));
            }
            for r in &outbound {
                if let Record::P { digest, .. } = r {
                    self.things[i].honest_p.insert(*digest);
                }
            }
            let foreign = self.things[i].user.foreign_p_seen();
            if foreign > self.things[i].foreign_seen {
                self.things[i].foreign_seen = foreign;
                self.report.fork_alarms += 1;
                let uid = self.things[i].uid;
                self.log(format!("thing{i}"), TraceKind::Alarm, format!("fork uid={uid} foreign_proofs={foreign}"));
            }
            for doc in self.things[i].user.take_ready() {
                let (uid, key) = (self.things[i].uid, self.things[i].key);
                let mac = short_mac(&self.suite, &key, &content_mac_input(uid, &doc.content));
                let c = self.fs.submit_content(uid, &doc.content, Some(mac))?;
                self.log(
                    format!("thing{i}"),
                    TraceKind::Content,
                    format!("round={} h_m={} c_records={}", doc.round, short(&doc.h_m), c.len()),
                );
            }
            for r in outbound {
                self.uplink(i, r)?;
            }
            self.emergency(i)?;
        }
        Ok(())
    }

    fn uplink(&mut self, i: usize, record: Record) -> Result<(), SimError> {
        let th = &self.things[i];
        let mut sub = sign_record(&self.suite, &th.key, record);
        if self.intercept(i, &record) {
            return Ok(());
        }
        if self.chan_rng.gen_bool(self.cfg.loss_prob) {
            self.log(format!("thing{i}"), TraceKind::Submit, format!("{} lost", record.kind().name()));
            return Ok(());
        }
        if self.chan_rng.gen_bool(self.cfg.corrupt_prob) {
            let mut bytes = sub.record.encode();
            let at = self.chan_rng.gen_range(3..bytes.len());
            bytes[at] ^= 1 << self.chan_rng.gen_range(0..8);
            if let Ok(s) = Submission::decode(&self.suite, &bytes) {
                sub.record = s.record;
            }
        }
        let outcome = self.fs.submit(&sub)?;
        self.log(
            format!("thing{i}"),
            TraceKind::Submit,
            format!("{} {}", sub.record.kind().name(), label_outcome(&outcome)),
        );
        if let (Some(js), Record::P { .. }) = (self.jam_spoof.as_mut(), record) {
            if js.target == i && js.outcome.intercepted_at.is_some() && js.outcome.honest_p.is_none() {
                js.outcome.honest_p = Some(label_outcome(&outcome));
            }
        }
        Ok(())
    }

    /// The jam-spoof attacker swallows the target's first proof closing the
    /// chosen round and learns the nonce it reveals.
    fn intercept(&mut self, i: usize, record: &Record) -> bool {
        let Some(js) = self.jam_spoof.as_mut() else {
            return false;
        };
        let Record::P { uid, digest } = *record else {
            return false;
        };
        if js.target != i || js.stage != JsStage::Waiting || self.things[i].user.round() != js.round + 1 {
            return false;
        }
        let chain = self.fs.blocks();
        let posted_p: BTreeSet<Digest> = chain
            .iter()
            .flat_map(|b| b.records.iter())
            .filter_map(|r| match r {
                Record::P { uid: u, digest } if *u == uid => Some(*digest),
                _ => None,
            })
            .collect();
        let n_k = chain
            .iter()
            .rev()
            .flat_map(|b| b.records.iter())
            .find_map(|r| match r {
                Record::Lv { uid: u, lv } if *u == uid => {
                    let n = lv.l.xor(&digest).ok()?;
                    posted_p.contains(&self.suite.hash(n.as_bytes())).then_some(n)
                }
                _ => None,
            });
        let Some(n_k) = n_k else {
            return false;
        };
        let n_hat = Nonce::random(&self.suite, &mut self.att_rng);
        let lv_hat = make_lv(&self.suite, &Nonce(n_k), &n_hat);
        js.n_hat = Some(n_hat);
        js.lv_hat = Some(lv_hat);
        js.stage = JsStage::LvSent;
        js.outcome.intercepted_at = Some(self.interval);
        let detail = format!("intercept uid={uid} p={} forged_lv={}", short(&digest), short(&lv_hat.l));
        self.log("attacker", TraceKind::Attack, detail);
        let sub = Submission {
            record: Record::Lv { uid, lv: lv_hat },
            mac: None,
        };
        self.attacker_submit(&sub).is_ok()
    }

    fn attacker_submit(&mut self, sub: &Submission) -> Result<SubmitOutcome, SimError> {
        self.report.attacker_records_sent += 1;
        let o = self.fs.submit(sub)?;
        if !matches!(o, SubmitOutcome::Filtered(_)) {
            self.report.attacker_records_reaching_validator += 1;
        }
        Ok(o)
    }

    fn attackers_act(&mut self) -> Result<(), SimError> {
        if let Some(js) = self.jam_spoof.as_ref() {
            if js.stage == JsStage::LvSent {
                let lv = js.lv_hat.expect("forged lv");
                let uid = self.things[js.target].uid;
                let rec = Record::Lv { uid, lv };
                let posted = self.fs.blocks().iter().find(|b| b.contains(&rec)).map(|b| b.index);
                if let Some(b) = posted {
                    let p_hat = self.suite.hash(js.n_hat.expect("forged nonce").as_bytes());
                    let sub = Submission {
                        record: Record::P { uid, digest: p_hat },
                        mac: None,
                    };
                    let o = self.attacker_submit(&sub)?;
                    let label = label_outcome(&o);
                    self.log("attacker", TraceKind::Attack, format!("forged_p uid={uid} p={} {label}", short(&p_hat)));
                    let js = self.jam_spoof.as_mut().expect("present");
                    js.outcome.forged_lv_block = Some(b);
                    js.outcome.forged_p = Some(label);
                    js.stage = JsStage::PSent;
                } else if self.fs.filter().enabled {
                    // dropped by the filter: the attack cannot proceed
                    let js = self.jam_spoof.as_mut().expect("present");
                    js.outcome.forged_p = Some("filtered".into());
                    js.stage = JsStage::Done;
                }
            }
        }

        let floods: Vec<(u32, usize)> = self
            .cfg
            .attackers
            .iter()
            .filter_map(|a| match *a {
                AttackerModel::NoiseFlood { rate, forged_uids } => Some((rate, forged_uids.max(1))),
                _ => None,
            })
            .collect();
        for (rate, uids) in floods {
            let mut reached = 0u64;
            for n in 0..rate {
                let uid = self.things[n as usize % uids.min(self.things.len())].uid;
                let a = self.forged_value();
                let b = self.forged_value();
                let record = match self.att_rng.gen_range(0..3) {
                    0 => Record::S { uid, ciphertext: a },
                    1 => Record::Lv { uid, lv: LvRecord { l: a, v: b } },
                    _ => Record::P { uid, digest: a },
                };
                let mac = Some(self.att_rng.gen::<[u8; 2]>());
                let o = self.attacker_submit(&Submission { record, mac })?;
                if !matches!(o, SubmitOutcome::Filtered(_)) {
                    reached += 1;
                }
            }
            self.log("attacker", TraceKind::Attack, format!("flood sent={rate} reached={reached}"));
        }
        Ok(())
    }

    fn emergency(&mut self, i: usize) -> Result<(), SimError> {
        let every = self.cfg.emergency_every;
        let Some(params) = self.hors else {
            return Ok(());
        };
        if every == 0 || !self.interval.is_multiple_of(every) {
            return Ok(());
        }
        let th = &self.things[i];
        let posted = match th.user.stage() {
            Stage::AwaitPPosted => th.user.round() as i64 - 1,
            _ => th.user.round() as i64,
        };
        if posted < 1 {
            return Ok(());
        }
        let message = format!("thing{i} alarm at interval {}", self.interval).into_bytes();
        let sig = match hors_sign(th.user.schedule(), &params, posted, &th.key, &message) {
            Ok(s) => s,
            Err(EmergencyError::Probation { .. }) => {
                self.report.emergency_refused += 1;
                self.log(format!("thing{i}"), TraceKind::Emergency, format!("round={posted} probation"));
                return Ok(());
            }
            Err(e) => {
                self.report.emergency_invalid += 1;
                self.log(format!("thing{i}"), TraceKind::Emergency, format!("round={posted} error={e}"));
                return Ok(());
            }
        };
        let mut msg = EmergencyMessage {
            uid: th.uid,
            message,
            signature: sig,
            mac: [0; 2],
        };
        msg.mac = short_mac(&self.suite, &th.key, &msg.body());
        match self.fs.receive_emergency(&params, &msg.encode()) {
            Ok(true) => self.report.emergency_valid += 1,
            Ok(false) => self.report.emergency_invalid += 1,
            Err(EmergencyError::Probation { .. }) => self.report.emergency_refused += 1,
            Err(e) => {
                self.report.emergency_invalid += 1;
                self.log(format!("thing{i}"), TraceKind::Emergency, format!("round={posted} error={e}"));
            }
        }
        Ok(())
    }

    fn finish(mut self) -> Result<SimReport, SimError> {
        self.report.verified_chain = self.things.iter().map(|t| t.verified_block).collect();
        self.report.rounds_completed = self
            .things
            .iter()
            .map(|t| {
                self.fs
                    .validator()
                    .state(&t.uid)
                    .map(|s| s.round - 1)
                    .unwrap_or(0)
            })
            .collect();
        self.report.retransmissions = self.things.iter().map(|t| t.user.retransmissions()).sum();
        self.report.candidates_dropped = self.things.iter().map(|t| t.rx.dropped()).sum();
        self.report.jam_spoof = self.jam_spoof.take().map(|js| js.outcome);
        self.report.blocks = self.fs.blocks().to_vec();
        let lines: Vec<String> = self.trace.iter().map(TraceEvent::line).collect();
        let mut joined = lines.join("\n");
        joined.push('\n');
        self.report.trace_digest = self.suite.hash(joined.as_bytes());
        self.report.trace = lines;
        Ok(self.report)
    }
}

/// Runs a scenario with the validation mode given in `config`.
pub fn run(config: &SimConfig) -> Result<SimReport, SimError> {
    Sim::new(config.clone())?.run()
}

/// The same scenario with the link-only validator of the classic protocol.
pub fn run_gf_baseline(config: &SimConfig) -> Result<SimReport, SimError> {
    let cfg = SimConfig {
        mode: ValidationMode::LinkOnly,
        ..config.clone()
    };
    Sim::new(cfg)?.run()
}

/// Runs `base` once per seed on up to `jobs` threads; results in seed order.
pub fn sweep(base: &SimConfig, seeds: &[u64], jobs: usize) -> Vec<Result<SimReport, SimError>> {
    let jobs = jobs.max(1).min(seeds.len().max(1));
    let mut results: Vec<Option<Result<SimReport, SimError>>> = (0..seeds.len()).map(|_| None).collect();
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..jobs)
            .map(|j| {
                scope.spawn(move || {
                    seeds
                        .iter()
                        .enumerate()
                        .skip(j)
                        .step_by(jobs)
                        .map(|(i, &seed)| (i, run(&SimConfig { seed, ..base.clone() })))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for h in handles {
            for (i, r) in h.join().expect("simulation thread") {
                results[i] = Some(r);
            }
        }
    });
    results.into_iter().map(|r| r.expect("every seed ran")).collect()
}
