//! Zero-latency signatures for emergency messages.
//!
//! Every round nonce is the top of its own Winternitz chain, so the chains of
//! recent rounds form a private key whose public half is the nonce history the
//! Fog Server already holds from posting rounds. Signing reveals values deeper
//! down those chains; a later round always reveals strictly deeper values.
//!
//! GF-HORS slices a keyed-MAC digest of the message into `log2(alpha)`-bit
//! numbers `sigma` and, for each, reveals `N_{k-sigma-1}^[alpha-sigma-1]`, which
//! the verifier hashes `sigma + 1` times up to the posted nonce
//! `N_{k-sigma-1}`. `k` is the round whose proof record was most recently
//! posted, so `N_{k-1}` is the newest nonce already public.

use std::collections::BTreeMap;

use rand::RngCore;
use thiserror::Error;

use crate::ledger::record::Uid;
use crate::primitives::{Digest, Nonce, PrimitiveError, Suite, SymmetricKey, WinternitzChain};

pub const DEFAULT_ALPHA: usize = 64;
pub const DEFAULT_DIGEST_BITS: usize = 126;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EmergencyError {
    #[error(transparent)]
    Primitive(#[from] PrimitiveError),
    #[error("alpha must be a power of two >= 2, got {0}")]
    Alpha(usize),
    #[error("digest bits {bits} must be a positive multiple of {slice} and fit the hash")]
    DigestBits { bits: usize, slice: usize },
    #[error("round {round} is inside the probation period ({alpha} rounds)")]
    Probation { round: i64, alpha: usize },
    #[error("no nonce chain for round {0}")]
    MissingChain(i64),
    #[error("verifier holds no posted nonce for round {0}")]
    MissingNonce(i64),
    #[error("one-time key already used")]
    KeyReused,
    #[error("expected {expected} message bits, got {actual}")]
    MessageBits { expected: usize, actual: usize },
    #[error("malformed emergency message")]
    Malformed,
}

/// Per-round Winternitz chains whose tops are the user's round nonces.
#[derive(Clone, Debug)]
pub struct NonceSchedule {
    suite: Suite,
    alpha: usize,
    chains: BTreeMap<i64, WinternitzChain>,
    latest: i64,
    bootstrapped: bool,
}

impl NonceSchedule {
    pub fn new(suite: Suite, alpha: usize) -> Self {
        Self {
            suite,
            alpha,
            chains: BTreeMap::new(),
            latest: 0,
            bootstrapped: false,
        }
    }

    /// Builds `alpha` chains for rounds `1-alpha ..= 0` up front. Their tops
    /// are handed to the Fog Server at enrolment so signing needs no probation.
    pub fn with_bootstrap<R: RngCore + ?Sized>(
        suite: Suite,
        alpha: usize,
        rng: &mut R,
    ) -> Result<(Self, BTreeMap<i64, Nonce>), EmergencyError> {
        let mut s = Self::new(suite, alpha);
        let mut tops = BTreeMap::new();
        for round in (1 - alpha as i64)..=0 {
            let chain = WinternitzChain::build(&suite, &Nonce::random(&suite, rng), alpha)?;
            tops.insert(round, chain.top());
            s.chains.insert(round, chain);
        }
        s.bootstrapped = true;
        Ok((s, tops))
    }

    pub fn alpha(&self) -> usize {
        self.alpha
    }

    pub fn suite(&self) -> &Suite {
        &self.suite
    }

    pub fn is_bootstrapped(&self) -> bool {
        self.bootstrapped
    }

    /// Index of the newest generated nonce.
    pub fn latest_round(&self) -> i64 {
        self.latest
    }

    /// Generates the chain for the next round from a fresh secret seed and
    /// returns its top.
    pub fn next_nonce<R: RngCore + ?Sized>(&mut self, rng: &mut R) -> Nonce {
        let seed = Nonce::random(&self.suite, rng);
        let chain = WinternitzChain::build(&self.suite, &seed, self.alpha).expect("alpha > 0");
        self.latest += 1;
        let top = chain.top();
        self.chains.insert(self.latest, chain);
        top
    }

    pub fn nonce(&self, round: i64) -> Option<Nonce> {
        self.chains.get(&round).map(|c| c.top())
    }

    pub fn chain(&self, round: i64) -> Result<&WinternitzChain, EmergencyError> {
        self.chains
            .get(&round)
            .ok_or(EmergencyError::MissingChain(round))
    }

    /// Drops chains that can no longer take part in a signature at round `k`.
    pub fn prune(&mut self, k: i64) {
        let keep_from = k - self.alpha as i64;
        self.chains.retain(|&r, _| r >= keep_from);
    }

    fn check_probation(&self, k: i64) -> Result<(), EmergencyError> {
        if !self.bootstrapped && k <= self.alpha as i64 {
            return Err(EmergencyError::Probation {
                round: k,
                alpha: self.alpha,
            });
        }
        Ok(())
    }

    /// The OTS private key between the postings of `P_k` and `P_{k+1}`:
    /// `i -> N_{k-i}^[alpha-i-1]` for `i = 1..alpha-1`.
    pub fn private_window(&self, k: i64) -> Result<BTreeMap<usize, Digest>, EmergencyError> {
        self.check_probation(k)?;
        (1..self.alpha)
            .map(|i| {
                let chain = self.chain(k - i as i64)?;
                Ok((i, chain.value(self.alpha - i - 1)?))
            })
            .collect()
    }
}

/// Parameters of a GF-HORS signature.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HorsParams {
    alpha: usize,
    slice_bits: usize,
    digest_bits: usize,
}

impl HorsParams {
    pub fn new(alpha: usize, digest_bits: usize) -> Result<Self, EmergencyError> {
        if alpha < 2 || !alpha.is_power_of_two() {
            return Err(EmergencyError::Alpha(alpha));
        }
        let slice_bits = alpha.trailing_zeros() as usize;
        if digest_bits == 0 || !digest_bits.is_multiple_of(slice_bits) {
            return Err(EmergencyError::DigestBits {
                bits: digest_bits,
                slice: slice_bits,
            });
        }
        Ok(Self {
            alpha,
            slice_bits,
            digest_bits,
        })
    }

    pub fn alpha(&self) -> usize {
        self.alpha
    }

    pub fn slice_bits(&self) -> usize {
        self.slice_bits
    }

    pub fn digest_bits(&self) -> usize {
        self.digest_bits
    }

    /// Number of slices `t`.
    pub fn sigma_count(&self) -> usize {
        self.digest_bits / self.slice_bits
    }

    pub fn digest_bytes(&self) -> usize {
        self.digest_bits.div_ceil(8)
    }

    pub fn signature_bytes(&self, suite: &Suite) -> usize {
        self.sigma_count() * suite.hash_len()
    }

    /// `(t / alpha)^t`, the bound on a random digest's slices all landing in
    /// a target set of at most `t` values.
    pub fn forgery_bound(&self) -> f64 {
        let t = self.sigma_count() as f64;
        (t / self.alpha as f64).powi(self.sigma_count() as i32)
    }
}

impl Default for HorsParams {
    fn default() -> Self {
        Self::new(DEFAULT_ALPHA, DEFAULT_DIGEST_BITS).expect("valid defaults")
    }
}

/// Reads consecutive `slice_bits`-bit unsigned slices, most significant bit first.
pub fn slices(bytes: &[u8], slice_bits: usize, count: usize) -> Vec<usize> {
    (0..count)
        .map(|j| {
            let mut v = 0usize;
            for b in j * slice_bits..(j + 1) * slice_bits {
                let bit = (bytes[b / 8] >> (7 - b % 8)) & 1;
                v = (v << 1) | bit as usize;
            }
            v
        })
        .collect()
}

/// Keyed-MAC digest truncated to `digest_bits`, and its slices.
pub fn hors_digest(
    suite: &Suite,
    params: &HorsParams,
    key: &SymmetricKey,
    message: &[u8],
) -> Result<(Vec<u8>, Vec<usize>), EmergencyError> {
    let nbytes = params.digest_bytes();
    if nbytes > suite.hash_len() {
        return Err(EmergencyError::DigestBits {
            bits: params.digest_bits,
            slice: params.slice_bits,
        });
    }
    let mut digest = suite.mac(key, message, nbytes)?;
    let spare = nbytes * 8 - params.digest_bits;
    if spare > 0 {
        let last = digest.len() - 1;
        digest[last] &= 0xffu8 << spare;
    }
    let sigmas = slices(&digest, params.slice_bits, params.sigma_count());
    Ok((digest, sigmas))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HorsSignature {
    /// Round `k`: the user's latest posted proof is `P_k`.
    pub round: i64,
    /// One chain value per slice, duplicates kept for fixed-size parsing.
    pub values: Vec<Digest>,
}

pub fn hors_sign(
    schedule: &NonceSchedule,
    params: &HorsParams,
    round: i64,
    key: &SymmetricKey,
    message: &[u8],
) -> Result<HorsSignature, EmergencyError> {
    if schedule.alpha() != params.alpha() {
        return Err(EmergencyError::Alpha(params.alpha()));
    }
    schedule.check_probation(round)?;
    let (_, sigmas) = hors_digest(schedule.suite(), params, key, message)?;
    let alpha = params.alpha();
    let values = sigmas
        .iter()
        .map(|&sigma| {
            let chain = schedule.chain(round - sigma as i64 - 1)?;
            Ok(chain.value(alpha - sigma - 1)?)
        })
        .collect::<Result<Vec<_>, EmergencyError>>()?;
    Ok(HorsSignature { round, values })
}

/// Source of a user's posted round nonces on the verifier side.
pub trait NonceLookup {
    fn posted_nonce(&self, round: i64) -> Option<Nonce>;
}

impl NonceLookup for BTreeMap<i64, Nonce> {
    fn posted_nonce(&self, round: i64) -> Option<Nonce> {
        self.get(&round).copied()
    }
}

/// `Ok(false)` for a bad signature; `Err(MissingNonce)` when the verifier
/// cannot decide because a required posted nonce is unknown.
pub fn hors_verify(
    suite: &Suite,
    params: &HorsParams,
    nonces: &impl NonceLookup,
    key: &SymmetricKey,
    message: &[u8],
    sig: &HorsSignature,
) -> Result<bool, EmergencyError> {
    let (_, sigmas) = hors_digest(suite, params, key, message)?;
    if sig.values.len() != sigmas.len() {
        return Ok(false);
    }
    let mut ok = true;
    for (&sigma, value) in sigmas.iter().zip(&sig.values) {
        let round = sig.round - sigma as i64 - 1;
        let top = nonces
            .posted_nonce(round)
            .ok_or(EmergencyError::MissingNonce(round))?;
        if value.len() != suite.hash_len() || suite.hash_iter(value, sigma + 1) != top.0 {
            ok = false;
        }
    }
    Ok(ok)
}

/// Monte Carlo estimate of the chance that a uniformly random digest's slices
/// all fall inside `target` (the slices of a signed message).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ForgeryEstimate {
    pub trials: u64,
    pub hits: u64,
}

impl ForgeryEstimate {
    pub fn rate(&self) -> f64 {
        self.hits as f64 / self.trials as f64
    }
}

pub fn hors_forgery_rate<R: RngCore + ?Sized>(
    params: &HorsParams,
    target: &[usize],
    trials: u64,
    rng: &mut R,
) -> ForgeryEstimate {
    let mut in_target = vec![false; params.alpha()];
    for &s in target {
        in_target[s] = true;
    }
    let mut buf = vec![0u8; params.digest_bytes()];
    let mut hits = 0;
    for _ in 0..trials {
        rng.fill_bytes(&mut buf);
        if slices(&buf, params.slice_bits(), params.sigma_count())
            .iter()
            .all(|&s| in_target[s])
        {
            hits += 1;
        }
    }
    ForgeryEstimate { trials, hits }
}

/// Lamport one-time key: `bits` pairs of secrets and their hashes.
#[derive(Clone, Debug)]
pub struct LamportKeyPair {
    secrets: Vec<(Nonce, Nonce)>,
    public: Vec<(Digest, Digest)>,
    consumed: bool,
}

impl LamportKeyPair {
    pub fn generate<R: RngCore + ?Sized>(suite: &Suite, bits: usize, rng: &mut R) -> Self {
        let secrets: Vec<(Nonce, Nonce)> = (0..bits)
            .map(|_| (Nonce::random(suite, rng), Nonce::random(suite, rng)))
            .collect();
        let public = secrets
            .iter()
            .map(|(a, b)| (suite.hash(a.as_bytes()), suite.hash(b.as_bytes())))
            .collect();
        Self {
            secrets,
            public,
            consumed: false,
        }
    }

    pub fn public_key(&self) -> &[(Digest, Digest)] {
        &self.public
    }

    pub fn public_key_bytes(&self) -> usize {
        self.public.iter().map(|(a, b)| a.len() + b.len()).sum()
    }

    pub fn is_consumed(&self) -> bool {
        self.consumed
    }

    /// Reveals one secret per bit; the pair is spent afterwards.
    pub fn sign(&mut self, bits: &[bool]) -> Result<Vec<Digest>, EmergencyError> {
        if self.consumed {
            return Err(EmergencyError::KeyReused);
        }
        if bits.len() != self.secrets.len() {
            return Err(EmergencyError::MessageBits {
                expected: self.secrets.len(),
                actual: bits.len(),
            });
        }
        self.consumed = true;
        Ok(bits
            .iter()
            .zip(&self.secrets)
            .map(|(&bit, (zero, one))| if bit { one.0 } else { zero.0 })
            .collect())
    }
}

pub fn lamport_verify(
    suite: &Suite,
    public: &[(Digest, Digest)],
    bits: &[bool],
    values: &[Digest],
) -> bool {
    bits.len() == public.len()
        && values.len() == public.len()
        && bits
            .iter()
            .zip(public)
            .zip(values)
            .all(|((&bit, (zero, one)), v)| suite.hash(v.as_bytes()) == if bit { *one } else { *zero })
}

/// Unpacks the first `n` bits of `bytes`, most significant first.
pub fn bits_of(bytes: &[u8], n: usize) -> Vec<bool> {
    (0..n).map(|i| (bytes[i / 8] >> (7 - i % 8)) & 1 == 1).collect()
}

/// `uid || round (u32 BE) || message || signature values || mac[2]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EmergencyMessage {
    pub uid: Uid,
    pub message: Vec<u8>,
    pub signature: HorsSignature,
    pub mac: [u8; 2],
}

impl EmergencyMessage {
    /// Bytes covered by the trailing MAC.
    pub fn body(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&self.uid.0);
        out.extend_from_slice(&(self.signature.round as u32).to_be_bytes());
        out.extend_from_slice(&self.message);
        for v in &self.signature.values {
            out.extend_from_slice(v.as_bytes());
        }
        out
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = self.body();
        out.extend_from_slice(&self.mac);
        out
    }

    pub fn decode(suite: &Suite, params: &HorsParams, bytes: &[u8]) -> Result<Self, EmergencyError> {
        let sig_len = params.signature_bytes(suite);
        if bytes.len() < 2 + 4 + sig_len + 2 {
            return Err(EmergencyError::Malformed);
        }
        let uid = Uid([bytes[0], bytes[1]]);
        let round = u32::from_be_bytes(bytes[2..6].try_into().expect("4")) as i64;
        let msg_end = bytes.len() - 2 - sig_len;
        let message = bytes[6..msg_end].to_vec();
        let values = bytes[msg_end..bytes.len() - 2]
            .chunks(suite.hash_len())
            .map(Digest::from_slice)
            .collect::<Result<Vec<_>, _>>()?;
        let mac = [bytes[bytes.len() - 2], bytes[bytes.len() - 1]];
        Ok(Self {
            uid,
            message,
            signature: HorsSignature { round, values },
            mac,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::primitives::seeded_rng;
    use std::collections::HashSet;

    fn schedule_with_rounds(alpha: usize, rounds: usize, seed: u64) -> NonceSchedule {
        let mut rng = seeded_rng(seed);
        let mut s = NonceSchedule::new(Suite::default(), alpha);
        for _ in 0..rounds {
            s.next_nonce(&mut rng);
        }
        s
    }

    fn posted(s: &NonceSchedule, upto: i64) -> BTreeMap<i64, Nonce> {
        s.chains
            .iter()
            .filter(|(&r, _)| r <= upto)
            .map(|(&r, c)| (r, c.top()))
            .collect()
    }

    #[test]
    fn nonce_is_alpha_hashes_of_seed() {
        let s = schedule_with_rounds(16, 3, 1);
        let suite = Suite::default();
        for r in 1..=3 {
            let c = s.chain(r).unwrap();
            assert_eq!(suite.hash_iter(c.seed().as_digest(), 16), s.nonce(r).unwrap().0);
        }
    }

    #[test]
    fn nonces_are_distinct() {
        let s = schedule_with_rounds(4, 2_000, 2);
        let set: HashSet<_> = (1..=2_000).map(|r| s.nonce(r).unwrap()).collect();
        assert_eq!(set.len(), 2_000);
    }

    #[test]
    fn window_hashes_up_to_posted_nonces() {
        let suite = Suite::default();
        let s = schedule_with_rounds(8, 20, 3);
        let w = s.private_window(12).unwrap();
        assert_eq!(w.len(), 7);
        for (&i, v) in &w {
            assert_eq!(suite.hash_iter(v, i + 1), s.nonce(12 - i as i64).unwrap().0);
        }
    }

    #[test]
    fn window_deepens_round_over_round() {
        let s = schedule_with_rounds(8, 30, 4);
        let alpha = 8;
        let w_k = s.private_window(15).unwrap();
        let w_next = s.private_window(16).unwrap();
        // chain m = k - i sits at depth alpha - i - 1 at round k and one lower at k + 1
        for m in (15 - 7)..=14i64 {
            let i_now = (15 - m) as usize;
            let i_next = (16 - m) as usize;
            if i_next < alpha {
                let chain = s.chain(m).unwrap();
                let depth_now = chain.values().iter().position(|v| *v == w_k[&i_now]).unwrap();
                let depth_next = chain.values().iter().position(|v| *v == w_next[&i_next]).unwrap();
                assert!(depth_next < depth_now, "chain {m}");
            }
        }
    }

    #[test]
    fn alpha_three_window_shape() {
        // alpha = 3: round k uses N_{k-1}^[1], N_{k-2}^[0]; round k+1 uses
        // N_k^[1], N_{k-1}^[0].
        let s = schedule_with_rounds(3, 10, 5);
        let k = 6;
        let w = s.private_window(k).unwrap();
        assert_eq!(w[&1], s.chain(k - 1).unwrap().value(1).unwrap());
        assert_eq!(w[&2], s.chain(k - 2).unwrap().value(0).unwrap());
        let w2 = s.private_window(k + 1).unwrap();
        assert_eq!(w2[&1], s.chain(k).unwrap().value(1).unwrap());
        assert_eq!(w2[&2], s.chain(k - 1).unwrap().value(0).unwrap());
    }

    #[test]
    fn probation_and_bootstrap() {
        let suite = Suite::default();
        let s = schedule_with_rounds(8, 8, 6);
        assert!(matches!(s.private_window(8), Err(EmergencyError::Probation { .. })));
        let params = HorsParams::new(8, 12).unwrap();
        let key = SymmetricKey(suite.hash(b"k"));
        assert!(matches!(
            hors_sign(&s, &params, 8, &key, b"m"),
            Err(EmergencyError::Probation { .. })
        ));

        let mut rng = seeded_rng(7);
        let (mut b, tops) = NonceSchedule::with_bootstrap(suite, 8, &mut rng).unwrap();
        b.next_nonce(&mut rng);
        let sig = hors_sign(&b, &params, 1, &key, b"alarm").unwrap();
        let mut known = tops.clone();
        known.insert(1, b.nonce(1).unwrap());
        assert!(hors_verify(&suite, &params, &known, &key, b"alarm", &sig).unwrap());
    }

    #[test]
    fn default_params_match_worked_example() {
        let p = HorsParams::default();
        assert_eq!(p.sigma_count(), 21);
        assert_eq!(p.signature_bytes(&Suite::default()), 672);
        let bound = p.forgery_bound();
        assert!(bound > 1e-11 && bound < 1e-9, "{bound}");
    }

    #[test]
    fn digest_slices_below_alpha_and_deterministic() {
        let suite = Suite::default();
        let p = HorsParams::default();
        let key = SymmetricKey(suite.hash(b"key"));
        let (d, s) = hors_digest(&suite, &p, &key, b"reactor").unwrap();
        assert_eq!(d.len(), 16);
        assert_eq!(d[15] & 0b11, 0);
        assert_eq!(s.len(), 21);
        assert!(s.iter().all(|&x| x < 64));
        assert_eq!(hors_digest(&suite, &p, &key, b"reactor").unwrap().1, s);
    }

    #[test]
    fn slices_read_msb_first() {
        assert_eq!(slices(&[0b1010_1100, 0b0100_0000], 3, 4), vec![5, 3, 0, 4]);
        assert_eq!(slices(&[0xff], 1, 8), vec![1; 8]);
    }

    #[test]
    fn sign_verify_and_tamper() {
        let suite = Suite::default();
        let params = HorsParams::default();
        let s = schedule_with_rounds(64, 80, 8);
        let key = SymmetricKey(suite.hash(b"shared"));
        let k = 70;
        let sig = hors_sign(&s, &params, k, &key, b"patient critical").unwrap();
        assert_eq!(sig.values.len(), 21);
        let nonces = posted(&s, k - 1);
        assert!(hors_verify(&suite, &params, &nonces, &key, b"patient critical", &sig).unwrap());
        assert!(!hors_verify(&suite, &params, &nonces, &key, b"patient critical!", &sig).unwrap());
        let mut bad = sig.clone();
        bad.values[3] = bad.values[3].with_bit_flipped(0);
        assert!(!hors_verify(&suite, &params, &nonces, &key, b"patient critical", &bad).unwrap());
        let sparse: BTreeMap<i64, Nonce> = BTreeMap::new();
        assert!(matches!(
            hors_verify(&suite, &params, &sparse, &key, b"patient critical", &sig),
            Err(EmergencyError::MissingNonce(_))
        ));
    }

    #[test]
    fn signature_never_exposes_unposted_nonce_preimage() {
        let suite = Suite::default();
        let params = HorsParams::new(16, 32).unwrap();
        let s = schedule_with_rounds(16, 60, 9);
        let key = SymmetricKey(suite.hash(b"k"));
        let mut rng = seeded_rng(10);
        for k in 17..59i64 {
            for _ in 0..4 {
                let msg = Digest::random(&mut rng, 32);
                let sig = hors_sign(&s, &params, k, &key, msg.as_bytes()).unwrap();
                for v in &sig.values {
                    let h = suite.hash(v.as_bytes());
                    // N_k and later are unposted during round k
                    for r in k..=60 {
                        assert_ne!(h, s.nonce(r).unwrap().0);
                        assert_ne!(*v, s.nonce(r).unwrap().0);
                    }
                }
            }
        }
    }

    #[test]
    fn lamport_round_trip_and_reuse() {
        let suite = Suite::default();
        let mut rng = seeded_rng(11);
        let mut pair = LamportKeyPair::generate(&suite, 16, &mut rng);
        let bits = bits_of(&[0xa5, 0x3c], 16);
        let sig = pair.sign(&bits).unwrap();
        assert!(lamport_verify(&suite, pair.public_key(), &bits, &sig));
        let mut flipped = bits.clone();
        flipped[5] = !flipped[5];
        assert!(!lamport_verify(&suite, pair.public_key(), &flipped, &sig));
        assert_eq!(pair.sign(&bits), Err(EmergencyError::KeyReused));

        let big = LamportKeyPair::generate(&suite, 256, &mut rng);
        assert_eq!(big.public_key_bytes(), 16 * 1024);
    }

    #[test]
    fn emergency_wire_round_trip() {
        let suite = Suite::default();
        let params = HorsParams::new(8, 12).unwrap();
        let mut rng = seeded_rng(12);
        let values = (0..4).map(|_| Digest::random(&mut rng, 32)).collect();
        let m = EmergencyMessage {
            uid: Uid([1, 2]),
            message: b"fire".to_vec(),
            signature: HorsSignature { round: 9, values },
            mac: [7, 7],
        };
        let bytes = m.encode();
        assert_eq!(bytes.len(), 2 + 4 + 4 + 4 * 32 + 2);
        assert_eq!(EmergencyMessage::decode(&suite, &params, &bytes).unwrap(), m);
        assert!(EmergencyMessage::decode(&suite, &params, &bytes[..20]).is_err());
    }

    #[test]
    fn params_validation() {
        assert!(HorsParams::new(48, 126).is_err());
        assert!(HorsParams::new(64, 125).is_err());
        assert_eq!(HorsParams::new(8, 12).unwrap().sigma_count(), 4);
    }
}
