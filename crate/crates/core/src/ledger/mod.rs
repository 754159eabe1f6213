//! Blocks, the Sequencer, and the Fog Server's bookkeeping: registry,
//! enrolment, the short-MAC noise filter and block formation.

pub mod filter;
pub mod fog;
pub mod record;
pub mod registry;

use rand::RngCore;

use crate::merkle::MerkleForest;
use crate::pls::{PlsBroadcast, PlsTransmitter};
use crate::primitives::{Digest, Nonce, Suite};

pub use filter::{proxy_authenticator, sign_record, MacFilter, ProxyAuth, RelayDecision};
pub use fog::{FogServer, FsEvent, SubmitOutcome};
pub use record::{Block, LedgerView, Record, RecordAddress, RecordKind, Submission, Uid};
pub use registry::{
    device_request, enrol, DeviceEnrolment, EnrolConfig, EnrolError, EnrolmentReply,
    EnrolmentRequest, UidRegistry,
};

/// Builds block `index`. The head carries `gamma_{index-1}` from `forest` (all
/// zeros for the first block); records are ordered by type tag, then UID,
/// then arrival. The new block's hash is appended to `forest`.
pub fn form_block(index: u32, pending: Vec<Record>, forest: &mut MerkleForest, suite: &Suite) -> Block {
    let gamma_prev = forest.gamma().unwrap_or_else(|_| Digest::zero(suite.hash_len()));
    let mut records = pending;
    records.sort_by_key(|r| (r.kind().tag(), r.uid()));
    let block = Block {
        index,
        gamma_prev,
        records,
    };
    forest.add_leaf(block.hash(suite));
    block
}

/// Air-gapped broadcaster signing one block per interval with PLS.
#[derive(Clone, Debug)]
pub struct Sequencer {
    tx: PlsTransmitter,
}

impl Sequencer {
    /// Returns the Sequencer and its `P_1`, distributed at enrolment.
    pub fn init<R: RngCore + ?Sized>(suite: Suite, rng: &mut R) -> (Self, Digest) {
        let (tx, p1) = PlsTransmitter::init(suite, Nonce::random(&suite, rng));
        (Self { tx }, p1)
    }

    /// Interval the next broadcast goes out in.
    pub fn next_bin(&self) -> u32 {
        self.tx.round_index()
    }

    /// Broadcasts `block` with `M = ` its canonical serialization.
    pub fn publish<R: RngCore + ?Sized>(&mut self, rng: &mut R, block: &Block) -> PlsBroadcast {
        self.tx.round(rng, &block.serialize())
    }
}
