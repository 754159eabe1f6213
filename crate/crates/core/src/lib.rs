//! Hash-chain signatures and a permissioned ledger for constrained devices.
//!
//! The crate covers broadcast signing ([`pls`]), device record posting
//! ([`slvp`]), content-addressed storage with proof triggers ([`cas`]), the
//! minimal Merkle forest over block history ([`merkle`]), the Fog Server and
//! Sequencer ([`ledger`]), zero-latency emergency signatures ([`emergency`])
//! and a deterministic adversarial simulator tying them together ([`netsim`]).

pub mod cas;
pub mod emergency;
pub mod ledger;
pub mod merkle;
pub mod netsim;
pub mod pls;
pub mod primitives;
pub mod slvp;

pub use primitives::{seeded_rng, Digest, Nonce, ProtocolRng, Suite, SymmetricKey};
