//! The Fog Server: pools and validates submissions, drives CAS triggers and
//! forms one block per interval.

use std::collections::BTreeMap;

use rand::RngCore;

use crate::cas::{Cas, CasError, CasStore, Submission as CasSubmission, WsProof};
use crate::emergency::{hors_verify, EmergencyError, EmergencyMessage, HorsParams};
use crate::ledger::filter::{content_mac_input, short_mac, FilterVerdict, MacFilter, MAC_LEN};
use crate::ledger::form_block;
use crate::ledger::record::{Block, Record, RecordAddress, Submission, Uid};
use crate::ledger::registry::{enrol, DeviceEnrolment, EnrolConfig, EnrolError, UidRegistry};
use crate::merkle::{MerkleError, MerkleForest};
use crate::primitives::{Digest, Nonce, Suite};
use crate::slvp::{Acceptance, Decision, RejectReason, SlvpValidator, ValidationMode};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FogConfig {
    pub mode: ValidationMode,
    pub mac_filter: bool,
    pub expiry_after: u32,
    pub arity: usize,
    pub prefix_len: usize,
    pub alpha: usize,
}

impl Default for FogConfig {
    fn default() -> Self {
        Self {
            mode: ValidationMode::Slvp,
            mac_filter: true,
            expiry_after: crate::cas::DEFAULT_EXPIRY_AFTER,
            arity: crate::merkle::DEFAULT_ARITY,
            prefix_len: 2,
            alpha: crate::emergency::DEFAULT_ALPHA,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FsEvent {
    Enrolled { uid: Uid, block: u32 },
    Withdrawn { uid: Uid },
    Filtered { uid: Option<Uid>, verdict: FilterVerdict },
    Accept { uid: Uid, round: u32, p: Digest, lv_addr: RecordAddress, signatures: usize },
    Reject { uid: Uid, p: Digest, reason: RejectReason },
    TriggerArmed { uid: Uid, h_m: Digest, ws_name: Digest },
    TriggerFired { uid: Uid, h_m: Digest, ws_name: Digest },
    TriggerExpired { ws_name: Digest },
    ContentRefused { uid: Uid, h_m: Digest },
    Emergency { uid: Uid, round: i64, valid: bool },
    BlockFormed { index: u32, hash: Digest, records: usize },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SubmitOutcome {
    Pooled,
    Duplicate,
    Filtered(FilterVerdict),
    UnknownUid,
    /// Gamma and C records are produced by the Fog Server only.
    NotAccepted,
    Accepted(Acceptance),
    Rejected(RejectReason),
}

#[derive(Debug)]
pub struct FogServer {
    suite: Suite,
    config: FogConfig,
    registry: UidRegistry,
    validator: SlvpValidator,
    cas: Cas,
    forest: MerkleForest,
    persisted: Vec<usize>,
    filter: MacFilter,
    blocks: Vec<Block>,
    pending: Vec<Record>,
    revealed: BTreeMap<Uid, BTreeMap<i64, Nonce>>,
    events: Vec<FsEvent>,
}

impl FogServer {
    pub fn new(suite: Suite, config: FogConfig) -> Result<Self, MerkleError> {
        Self::with_store(suite, config, CasStore::in_memory(suite))
    }

    pub fn with_store(suite: Suite, config: FogConfig, store: CasStore) -> Result<Self, MerkleError> {
        Ok(Self {
            suite,
            config,
            registry: UidRegistry::new(suite, config.prefix_len, config.alpha),
            validator: SlvpValidator::new(suite, config.mode),
            cas: Cas::new(store, config.expiry_after),
            forest: MerkleForest::new(suite, config.arity)?,
            persisted: Vec::new(),
            filter: MacFilter::new(config.mac_filter),
            blocks: Vec::new(),
            pending: Vec::new(),
            revealed: BTreeMap::new(),
            events: Vec::new(),
        })
    }

    pub fn suite(&self) -> &Suite {
        &self.suite
    }

    pub fn config(&self) -> &FogConfig {
        &self.config
    }

    /// Index of the block being formed.
    pub fn current_block(&self) -> u32 {
        self.blocks.len() as u32 + 1
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn registry(&self) -> &UidRegistry {
        &self.registry
    }

    pub fn validator(&self) -> &SlvpValidator {
        &self.validator
    }

    pub fn cas(&self) -> &Cas {
        &self.cas
    }

    pub fn cas_mut(&mut self) -> &mut Cas {
        &mut self.cas
    }

    pub fn forest(&self) -> &MerkleForest {
        &self.forest
    }

    pub fn filter(&self) -> &MacFilter {
        &self.filter
    }

    pub fn pending(&self) -> &[Record] {
        &self.pending
    }

    pub fn events(&self) -> &[FsEvent] {
        &self.events
    }

    pub fn take_events(&mut self) -> Vec<FsEvent> {
        std::mem::take(&mut self.events)
    }

    /// Nonces revealed by accepted rounds (plus bootstrap tops) for `uid`.
    pub fn revealed_nonces(&self, uid: &Uid) -> Option<&BTreeMap<i64, Nonce>> {
        self.revealed.get(uid)
    }

    /// Enrols a new device and queues its `P_1` as the round-1 anchor.
    pub fn enrol_device<R: RngCore + ?Sized>(
        &mut self,
        sequencer_p: Digest,
        cfg: &EnrolConfig,
        rng: &mut R,
    ) -> Result<DeviceEnrolment, EnrolError> {
        let block = self.current_block();
        let dev = enrol(&mut self.registry, sequencer_p, cfg, block, rng)?;
        self.validator.anchor(dev.uid, dev.p1, block);
        self.pending.push(Record::P {
            uid: dev.uid,
            digest: dev.p1,
        });
        let bootstrap = self
            .registry
            .get(&dev.uid)
            .map(|r| r.bootstrap.clone())
            .unwrap_or_default();
        self.revealed.insert(dev.uid, bootstrap);
        self.events.push(FsEvent::Enrolled { uid: dev.uid, block });
        Ok(dev)
    }

    pub fn withdraw(&mut self, uid: &Uid) -> bool {
        self.validator.remove(uid);
        self.revealed.remove(uid);
        let removed = self.registry.withdraw(uid).is_some();
        if removed {
            self.events.push(FsEvent::Withdrawn { uid: *uid });
        }
        removed
    }

    pub fn submit(&mut self, sub: &Submission) -> Result<SubmitOutcome, CasError> {
        let verdict = self.filter.check_submission(&self.suite, &self.registry, sub);
        if verdict != FilterVerdict::Accept {
            self.events.push(FsEvent::Filtered {
                uid: sub.record.uid(),
                verdict,
            });
            return Ok(SubmitOutcome::Filtered(verdict));
        }
        let record = sub.record;
        let Some(uid) = record.uid() else {
            return Ok(SubmitOutcome::NotAccepted);
        };
        if self.registry.get(&uid).is_none() {
            return Ok(SubmitOutcome::UnknownUid);
        }
        match record {
            Record::P { digest, .. } => {
                let current = self.current_block();
                match self.validator.validate_p(uid, &digest, &self.blocks, current) {
                    Decision::Accept(a) => {
                        self.on_accept(&a)?;
                        self.pending.push(record);
                        Ok(SubmitOutcome::Accepted(a))
                    }
                    Decision::Reject(reason) => {
                        self.events.push(FsEvent::Reject {
                            uid,
                            p: digest,
                            reason,
                        });
                        Ok(SubmitOutcome::Rejected(reason))
                    }
                }
            }
            Record::S { .. } | Record::Lv { .. } => {
                if self.pending.contains(&record) {
                    return Ok(SubmitOutcome::Duplicate);
                }
                self.pending.push(record);
                Ok(SubmitOutcome::Pooled)
            }
            Record::C { .. } | Record::Gamma { .. } => Ok(SubmitOutcome::NotAccepted),
        }
    }

    fn on_accept(&mut self, a: &Acceptance) -> Result<(), CasError> {
        self.revealed
            .entry(a.uid)
            .or_default()
            .insert(a.round as i64, a.revealed_n);
        let current = self.current_block();
        for (s_addr, h_m) in &a.s_results {
            let ws = WsProof {
                k: a.round,
                uid: a.uid,
                h_m: *h_m,
                lv_addr: a.lv_addr,
                s_addr: *s_addr,
            };
            let ws_name = self.cas.register_trigger(&ws, current)?;
            self.events.push(FsEvent::TriggerArmed {
                uid: a.uid,
                h_m: *h_m,
                ws_name,
            });
        }
        self.events.push(FsEvent::Accept {
            uid: a.uid,
            round: a.round,
            p: a.p,
            lv_addr: a.lv_addr,
            signatures: a.s_results.len(),
        });
        Ok(())
    }

    /// Content upload for a fired round; returns the C-records queued.
    pub fn submit_content(
        &mut self,
        uid: Uid,
        content: &[u8],
        mac: Option<[u8; MAC_LEN]>,
    ) -> Result<Vec<Record>, CasError> {
        let verdict = self.filter.check(
            &self.suite,
            &self.registry,
            uid,
            &content_mac_input(uid, content),
            mac,
        );
        if verdict != FilterVerdict::Accept {
            self.events.push(FsEvent::Filtered {
                uid: Some(uid),
                verdict,
            });
            return Ok(Vec::new());
        }
        match self.cas.submit_content(uid, content)? {
            CasSubmission::NoTrigger => {
                self.events.push(FsEvent::ContentRefused {
                    uid,
                    h_m: self.suite.hash(content),
                });
                Ok(Vec::new())
            }
            CasSubmission::Accepted { records, .. } => {
                let out: Vec<Record> = records
                    .iter()
                    .map(|c| Record::C {
                        uid: c.uid,
                        h_m: c.h_m,
                        ws_name: c.ws_name,
                    })
                    .collect();
                for c in &records {
                    self.events.push(FsEvent::TriggerFired {
                        uid: c.uid,
                        h_m: c.h_m,
                        ws_name: c.ws_name,
                    });
                }
                self.pending.extend(out.iter().copied());
                Ok(out)
            }
        }
    }

    /// Checks an emergency message against the UID's posted nonce history.
    pub fn receive_emergency(&mut self, params: &HorsParams, bytes: &[u8]) -> Result<bool, EmergencyError> {
        let msg = EmergencyMessage::decode(&self.suite, params, bytes)?;
        let reg = self
            .registry
            .get(&msg.uid)
            .ok_or(EmergencyError::Malformed)?;
        if short_mac(&self.suite, &reg.key, &msg.body()) != msg.mac {
            return Ok(false);
        }
        if msg.signature.round <= reg.probation_until as i64 {
            return Err(EmergencyError::Probation {
                round: msg.signature.round,
                alpha: params.alpha(),
            });
        }
        let empty = BTreeMap::new();
        let nonces = self.revealed.get(&msg.uid).unwrap_or(&empty);
        let valid = hors_verify(&self.suite, params, nonces, &reg.key, &msg.message, &msg.signature)?;
        self.events.push(FsEvent::Emergency {
            uid: msg.uid,
            round: msg.signature.round,
            valid,
        });
        Ok(valid)
    }

    /// Closes the current interval: expires triggers, forms the block, stores
    /// its body and the new Merkle nodes in CAS.
    pub fn form_block(&mut self) -> Result<Block, CasError> {
        let index = self.current_block();
        for ws_name in self.cas.expire_triggers(index) {
            self.events.push(FsEvent::TriggerExpired { ws_name });
        }
        let pending = std::mem::take(&mut self.pending);
        let block = form_block(index, pending, &mut self.forest, &self.suite);
        let hash = self.cas.store_mut().put(&block.serialize())?;
        self.forest
            .persist_incremental(self.cas.store_mut(), &mut self.persisted)?;
        self.forest.persist_gamma(self.cas.store_mut())?;
        self.events.push(FsEvent::BlockFormed {
            index,
            hash,
            records: block.records.len(),
        });
        self.blocks.push(block.clone());
        Ok(block)
    }
}
