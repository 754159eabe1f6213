//! End-to-end acceptance run: one PASS/FAIL line per criterion.
//!
//! Built with `harness = false` so the summary lines always reach stdout.

use std::collections::{BTreeMap, BTreeSet};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, RngCore};

use plschain::cas::{Cas, CasStore, Submission as CasSubmission, WsProof};
use plschain::emergency::{hors_digest, hors_forgery_rate, hors_sign, hors_verify, HorsParams, NonceSchedule};
use plschain::ledger::filter::{FilterVerdict, MacFilter};
use plschain::ledger::record::{Block, Record, RecordAddress, Uid};
use plschain::ledger::registry::{device_request, enrol, EnrolConfig, EnrolmentReply, UidRegistry};
use plschain::merkle::{verify_proof, MerkleForest};
use plschain::netsim::{self, AttackerModel, SimConfig};
use plschain::pls::{Category, PlsReceiver, PlsTransmitter, DEFAULT_CANDIDATE_CAP};
use plschain::slvp::{make_lv, make_s, Decision, LvRecord, RejectReason, SlvpValidator, ValidationMode};
use plschain::{seeded_rng, Digest, Nonce, Suite, SymmetricKey};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// 1. PLS round trip
fn pls_round_trip() -> Outcome {
    let start = Instant::now();
    let suite = Suite::default();
    let mut rng = seeded_rng(1);
    let (mut tx, p1) = PlsTransmitter::init(suite, Nonce::random(&suite, &mut rng));
    let mut receivers: Vec<PlsReceiver> = (0..4).map(|_| PlsReceiver::new(suite, p1, DEFAULT_CANDIDATE_CAP)).collect();
    let mut sent = Vec::new();
    let mut authenticated = vec![Vec::new(); receivers.len()];
    for k in 1..=101u32 {
        let msg = format!("block body {k}");
        sent.push(suite.hash(msg.as_bytes()));
        let b = tx.round(&mut rng, msg.as_bytes());
        let frames = b.frames();
        ensure(frames.len() == 3, || format!("round {k} published {} items", frames.len()))?;
        ensure(frames.iter().all(|f| f.value.len() == suite.hash_len()), || "item length".into())?;
        for (rx, auth) in receivers.iter_mut().zip(&mut authenticated) {
            for f in &frames {
                rx.ingest_frame(f);
            }
            if k > 1 {
                let v = rx.verify(k).map_err(|e| format!("round {k}: {e}"))?;
                auth.push((v.bin, v.message_hashes));
            }
        }
    }
    for auth in &authenticated {
        ensure(auth.len() == 100, || format!("{} rounds authenticated", auth.len()))?;
        for (i, (bin, hashes)) in auth.iter().enumerate() {
            ensure(*bin == i as u32 + 1 && hashes == &vec![sent[i]], || format!("bin {bin} out of order or wrong"))?;
        }
    }
    // classic Guy Fawkes publishes four hash-length items per round
    let saving = 1.0 - 3.0 / 4.0;
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(5), || format!("took {elapsed:?}"))?;
    Ok(format!("4 receivers x 100 rounds, 3 items/round, saving {:.0}%, {elapsed:.2?}", saving * 100.0))
}

// 2. PLS forgery resistance
fn pls_forgery() -> Outcome {
    let suite = Suite::default();
    let mut rng = seeded_rng(2);
    let (mut tx, p1) = PlsTransmitter::init(suite, Nonce::random(&suite, &mut rng));
    let mut rx = PlsReceiver::new(suite, p1, DEFAULT_CANDIDATE_CAP);
    let k = 10;
    for bin in 1..=k {
        let b = tx.round(&mut rng, format!("m{bin}").as_bytes());
        for f in b.frames() {
            rx.ingest_frame(&f);
        }
        if bin > 1 {
            rx.verify(bin).map_err(|e| e.to_string())?;
        }
    }
    // the attacker has every broadcast up to bin k but not N_{k+1}
    let mut accepted = 0;
    let trials = 100_000;
    for _ in 0..trials {
        let mut live = rx.clone();
        let l = Digest::random(&mut rng, suite.hash_len());
        let s = Digest::random(&mut rng, suite.hash_len());
        let p = Digest::random(&mut rng, suite.hash_len());
        live.ingest(k, Category::L, l);
        live.ingest(k, Category::S, s);
        live.ingest(k + 1, Category::P, p);
        if live.verify(k + 1).is_ok() {
            accepted += 1;
        }
    }
    ensure(accepted == 0, || format!("{accepted} forgeries accepted"))?;
    Ok(format!("{trials} forgeries, 0 accepted"))
}

// 3. jam-spoof delta
fn jam_spoof_delta() -> Outcome {
    let cfg = SimConfig {
        things: 4,
        intervals: 40,
        seed: 11,
        mac_filter: false,
        attackers: vec![AttackerModel::JamSpoof { target: 0, round: 1 }],
        ..SimConfig::default()
    };
    let full = netsim::run(&cfg).map_err(|e| e.to_string())?;
    let again = netsim::run(&cfg).map_err(|e| e.to_string())?;
    let base = netsim::run_gf_baseline(&cfg).map_err(|e| e.to_string())?;
    ensure(full.trace_digest == again.trace_digest, || "not deterministic".into())?;
    let f = full.jam_spoof.clone().unwrap_or_default();
    let b = base.jam_spoof.clone().unwrap_or_default();
    ensure(f.forged_p.as_deref() == Some("rejected:earlier-lv-wins"), || format!("slvp forged P: {:?}", f.forged_p))?;
    ensure(f.honest_p.as_deref() == Some("accepted"), || format!("slvp honest P: {:?}", f.honest_p))?;
    ensure(full.integrity_violations() == 0, || "slvp integrity violation".into())?;
    ensure(b.forged_p.as_deref() == Some("accepted"), || format!("baseline forged P: {:?}", b.forged_p))?;
    ensure(base.forged_p_accepted >= 1, || "baseline fork not counted".into())?;
    ensure(base.reject_count("fork-ambiguity") >= 1, || "baseline ambiguity not flagged".into())?;
    Ok(format!(
        "baseline: forged accepted, honest {}; slvp: forged rejected earlier-lv-wins, honest accepted",
        b.honest_p.unwrap_or_default()
    ))
}

// 4. SLVP validator against a brute-force oracle

#[derive(Debug, PartialEq, Eq)]
enum Expected {
    Accept { lv_block: u32, s_results: BTreeSet<(u32, u32, Digest)> },
    Reject(RejectReason),
}

/// Decides a candidate proof directly from the rules: the first LV (block,
/// then position) that links `p` to `p_prev` (and, in full mode, carries
/// `V = H(p || N)`) is chosen; in full mode any LV in a strictly earlier
/// block with `V = H((L ^ N) || N)` defeats it; S records before the chosen
/// block yield `D_N(S) ^ p`.
fn oracle(suite: &Suite, mode: ValidationMode, p_prev: &Digest, p: &Digest, layout: &[(u32, Record)]) -> Expected {
    let xor = |a: &Digest, b: &Digest| a.xor(b).unwrap();
    let mut chosen: Option<(u32, Digest)> = None;
    for (block, r) in layout {
        if let Record::Lv { lv, .. } = r {
            let n = xor(&lv.l, p);
            let links = suite.hash(n.as_bytes()) == *p_prev;
            let verifies = lv.v == suite.hash_parts(&[p.as_bytes(), n.as_bytes()]);
            if links && (mode == ValidationMode::LinkOnly || verifies) {
                chosen = Some((*block, n));
                break;
            }
        }
    }
    let Some((lv_block, n)) = chosen else {
        return Expected::Reject(RejectReason::NoValidLv);
    };
    if mode == ValidationMode::Slvp {
        let earliest_knowledge = layout
            .iter()
            .filter_map(|(b, r)| match r {
                Record::Lv { lv, .. } => {
                    let h = xor(&lv.l, &n);
                    (lv.v == suite.hash_parts(&[h.as_bytes(), n.as_bytes()])).then_some(*b)
                }
                _ => None,
            })
            .min()
            .expect("the chosen LV proves knowledge");
        if earliest_knowledge < lv_block {
            return Expected::Reject(RejectReason::EarlierLvWins);
        }
    }
    let mut s_results = BTreeSet::new();
    let mut seq: BTreeMap<u32, u32> = BTreeMap::new();
    for (b, r) in layout {
        if let Record::S { ciphertext, .. } = r {
            let i = seq.entry(*b).or_default();
            if *b < lv_block {
                let h = xor(&suite.decrypt(&n, ciphertext).unwrap(), p);
                s_results.insert((*b, *i, h));
            }
            *i += 1;
        }
    }
    Expected::Accept { lv_block, s_results }
}

fn permutations(items: &[usize], r: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if prefix.len() == r {
        out.push(prefix.clone());
        return;
    }
    for &i in items {
        if !prefix.contains(&i) {
            prefix.push(i);
            permutations(items, r, prefix, out);
            prefix.pop();
        }
    }
}

/// Non-decreasing block assignments of `r` records to blocks `lo..=hi`.
fn monotone(r: usize, lo: u32, hi: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if prefix.len() == r {
        out.push(prefix.clone());
        return;
    }
    let from = prefix.last().copied().unwrap_or(lo);
    for b in from..=hi {
        prefix.push(b);
        monotone(r, lo, hi, prefix, out);
        prefix.pop();
    }
}

fn slvp_oracle() -> Outcome {
    let start = Instant::now();
    let suite = Suite::default();
    let mut rng = seeded_rng(4);
    let uid = Uid([0x51, 0x1d]);
    let n1 = Nonce::random(&suite, &mut rng);
    let n2 = Nonce::random(&suite, &mut rng);
    let n_hat = Nonce::random(&suite, &mut rng);
    let n_other = Nonce::random(&suite, &mut rng);
    let p1 = suite.hash(n1.as_bytes());
    let h_m = suite.hash(b"honest document");
    let h_forged = suite.hash(b"forged document");
    let pool = [
        Record::S { uid, ciphertext: make_s(&suite, &n1, &h_m, &n2) },
        Record::Lv { uid, lv: make_lv(&suite, &n1, &n2) },
        Record::Lv { uid, lv: make_lv(&suite, &n1, &n_hat) },
        Record::S { uid, ciphertext: make_s(&suite, &n1, &h_forged, &n_hat) },
        Record::Lv { uid, lv: make_lv(&suite, &n1, &n_other) },
        Record::Lv {
            uid,
            lv: LvRecord {
                l: Digest::random(&mut rng, suite.hash_len()),
                v: Digest::random(&mut rng, suite.hash_len()),
            },
        },
    ];
    let candidates = [suite.hash(n2.as_bytes()), suite.hash(n_hat.as_bytes())];
    let (first_block, last_block) = (2u32, 7u32);
    let current = last_block + 1;

    let mut cases = 0u64;
    let mut accepts = 0u64;
    let idx: Vec<usize> = (0..pool.len()).collect();
    for r in 0..=pool.len() {
        let mut perms = Vec::new();
        permutations(&idx, r, &mut Vec::new(), &mut perms);
        let mut placements = Vec::new();
        monotone(r, first_block, last_block, &mut Vec::new(), &mut placements);
        for perm in &perms {
            for place in &placements {
                let layout: Vec<(u32, Record)> = perm.iter().zip(place).map(|(&i, &b)| (b, pool[i])).collect();
                let mut blocks: Vec<Block> = (1..current)
                    .map(|index| Block {
                        index,
                        gamma_prev: Digest::zero(suite.hash_len()),
                        records: Vec::new(),
                    })
                    .collect();
                blocks[0].records.push(Record::P { uid, digest: p1 });
                for (b, rec) in &layout {
                    blocks[*b as usize - 1].records.push(*rec);
                }
                for mode in [ValidationMode::Slvp, ValidationMode::LinkOnly] {
                    for p in &candidates {
                        let mut v = SlvpValidator::new(suite, mode);
                        v.anchor(uid, p1, 1);
                        let got = match v.validate_p(uid, p, &blocks, current) {
                            Decision::Accept(a) => Expected::Accept {
                                lv_block: a.lv_addr.block,
                                s_results: a.s_results.iter().map(|(ad, h)| (ad.block, ad.seq, *h)).collect(),
                            },
                            Decision::Reject(r) => Expected::Reject(r),
                        };
                        let want = oracle(&suite, mode, &p1, p, &layout);
                        if got != want {
                            return Err(format!("layout {layout:?} mode {mode:?}: got {got:?}, oracle {want:?}"));
                        }
                        cases += 1;
                        accepts += matches!(got, Expected::Accept { .. }) as u64;
                    }
                }
            }
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(60), || format!("took {elapsed:?}"))?;
    Ok(format!("{cases} decisions ({accepts} accepts) match the oracle, {elapsed:.2?}"))
}

// 5. Merkle minimal forest
fn digits_in_base(mut k: u64, base: u64) -> Vec<u64> {
    let mut d = Vec::new();
    while k > 0 {
        d.push(k % base);
        k /= base;
    }
    d
}

fn merkle_forest() -> Outcome {
    let suite = Suite::default();
    let leaf = |i: u64| suite.hash(&i.to_be_bytes());

    // fig 3: seven leaves in a binary forest
    let mut f = MerkleForest::new(suite, 2).map_err(|e| e.to_string())?;
    for i in 1..=7 {
        f.add_leaf(leaf(i));
    }
    let h2 = |a: Digest, b: Digest| suite.hash_parts(&[a.as_bytes(), b.as_bytes()]);
    let r14 = h2(h2(leaf(1), leaf(2)), h2(leaf(3), leaf(4)));
    let r56 = h2(leaf(5), leaf(6));
    ensure(f.minimal_roots() == vec![r14, r56, leaf(7)], || "7-leaf roots differ from {1..4},{5,6},{7}".into())?;

    for arity in [2u64, 4] {
        let mut f = MerkleForest::new(suite, arity as usize).map_err(|e| e.to_string())?;
        for k in 1..=4096u64 {
            f.add_leaf(leaf(k));
            let want = digits_in_base(k, arity).iter().filter(|&&d| d != 0).count();
            ensure(f.minimal_roots().len() == want, || format!("arity {arity} k {k}: |Gamma| != {want}"))?;
            if k <= 256 {
                let roots = f.minimal_roots();
                for i in 1..=k {
                    let proof = f.prove(i).map_err(|e| e.to_string())?;
                    ensure(verify_proof(&suite, &roots, i, &leaf(i), &proof), || {
                        format!("arity {arity} k {k}: proof for {i} fails")
                    })?;
                }
            }
        }
    }

    let mut quad = MerkleForest::new(suite, 4).map_err(|e| e.to_string())?;
    for i in 1..=4096u64 {
        quad.add_leaf(leaf(i));
    }
    // 4^5 + 4^4 + ... + 4^0
    let geometric = (4u64.pow(6) - 1) / 3;
    ensure(quad.internal_node_count() == geometric, || {
        format!("{} internal nodes at 4^6, expected {geometric}", quad.internal_node_count())
    })?;
    let mut big = MerkleForest::new(suite, 4).map_err(|e| e.to_string())?;
    for i in 1..=1_000_000u64 {
        big.add_leaf(leaf(i));
    }
    let n = big.internal_node_count();
    let dev = (n as f64 - 350_000.0).abs() / 350_000.0;
    ensure(dev <= 0.10, || format!("{n} nodes for 10^6 blocks"))?;
    Ok(format!("fig 3 roots, |Gamma| to 4096, proofs to 256, {geometric} nodes at 4^6, {n} at 10^6"))
}

// 6. emergency signatures
fn hors() -> Outcome {
    let suite = Suite::default();
    let params = HorsParams::new(64, 126).map_err(|e| e.to_string())?;
    ensure(params.sigma_count() == 21, || format!("{} sigmas", params.sigma_count()))?;
    ensure(params.signature_bytes(&suite) == 672, || format!("{} bytes", params.signature_bytes(&suite)))?;

    let mut rng = seeded_rng(6);
    let mut schedule = NonceSchedule::new(suite, 64);
    for _ in 0..80 {
        schedule.next_nonce(&mut rng);
    }
    let k = 75;
    let posted: BTreeMap<i64, Nonce> = (1..k).map(|r| (r, schedule.nonce(r).unwrap())).collect();
    let key = SymmetricKey::random(&suite, &mut rng);
    let msg = b"ward 3: infusion pump alarm";
    let sig = hors_sign(&schedule, &params, k, &key, msg).map_err(|e| e.to_string())?;
    ensure(sig.values.len() * suite.hash_len() == 672, || "payload length".into())?;
    ensure(hors_verify(&suite, &params, &posted, &key, msg, &sig) == Ok(true), || "round trip fails".into())?;
    ensure(
        hors_verify(&suite, &params, &posted, &key, b"ward 3: infusion pump alarn", &sig) == Ok(false),
        || "tampered message verifies".into(),
    )?;

    // alpha 8, t 4: Monte Carlo against exhaustive enumeration of all slice tuples
    let small = HorsParams::new(8, 12).map_err(|e| e.to_string())?;
    ensure(small.sigma_count() == 4, || "t != 4".into())?;
    let mut worst: f64 = 1.0;
    for m in 0..20u32 {
        let (_, target) = hors_digest(&suite, &small, &key, &m.to_be_bytes()).map_err(|e| e.to_string())?;
        let set: BTreeSet<usize> = target.iter().copied().collect();
        let mut hits = 0u64;
        for code in 0..8u64.pow(4) {
            if (0..4).all(|j| set.contains(&(((code / 8u64.pow(j)) % 8) as usize))) {
                hits += 1;
            }
        }
        let exact = hits as f64 / 4096.0;
        let est = hors_forgery_rate(&small, &target, 200_000, &mut rng).rate();
        let ratio = est / exact;
        ensure((0.5..=2.0).contains(&ratio), || format!("message {m}: estimate {est}, exhaustive {exact}"))?;
        worst = if (ratio - 1.0).abs() > (worst - 1.0).abs() { ratio } else { worst };
    }
    Ok(format!("21 sigmas / 672 bytes, round trip ok, tamper rejected, worst MC/exact ratio {worst:.3}"))
}

// 7. MAC filter
fn mac_filter() -> Outcome {
    let suite = Suite::default();
    let mut rng = seeded_rng(7);
    let mut registry = UidRegistry::new(suite, 2, 16);
    let dev = enrol(&mut registry, suite.hash(b"seq"), &EnrolConfig { alpha: 16, ..Default::default() }, 1, &mut rng)
        .map_err(|e| e.to_string())?;
    let mut filter = MacFilter::new(true);
    let n: u64 = 10_000_000;
    let mut passed = 0u64;
    let mut msg = [0u8; 35];
    for _ in 0..n {
        rng.fill_bytes(&mut msg);
        let trailer: [u8; 2] = rng.gen();
        if filter.check(&suite, &registry, dev.uid, &msg, Some(trailer)) == FilterVerdict::Accept {
            passed += 1;
        }
    }
    let p = 2f64.powi(-16);
    let mean = n as f64 * p;
    let sigma = (n as f64 * p * (1.0 - p)).sqrt();
    ensure((passed as f64 - mean).abs() <= 3.0 * sigma, || {
        format!("{passed} of {n} passed, expected {mean:.1} +- {:.1}", 3.0 * sigma)
    })?;

    let scenario = |mac_filter: bool| SimConfig {
        seed: 70,
        mac_filter,
        attackers: vec![
            AttackerModel::JamSpoof { target: 0, round: 1 },
            AttackerModel::NoiseFlood { rate: 200, forged_uids: 2 },
        ],
        ..SimConfig::default()
    };
    let on = netsim::run(&scenario(true)).map_err(|e| e.to_string())?;
    let off = netsim::run(&scenario(false)).map_err(|e| e.to_string())?;
    let reduction = 1.0 - on.attacker_records_reaching_validator as f64 / off.attacker_records_reaching_validator as f64;
    ensure(reduction >= 0.99, || {
        format!(
            "reaching validator: {} with filter, {} without",
            on.attacker_records_reaching_validator, off.attacker_records_reaching_validator
        )
    })?;
    Ok(format!(
        "{passed}/{n} random trailers passed (expect {mean:.1}); attacker records reaching validator {} -> {} ({:.2}% reduction)",
        off.attacker_records_reaching_validator,
        on.attacker_records_reaching_validator,
        reduction * 100.0
    ))
}

// 8. CAS and triggers
fn cas_lifecycle() -> Outcome {
    let suite = Suite::default();
    let mut store = CasStore::in_memory(suite);
    let a = store.put(b"write once").map_err(|e| e.to_string())?;
    let b = store.put(b"write once").map_err(|e| e.to_string())?;
    ensure(a == b && store.len() == 1 && a == suite.hash(b"write once"), || "put is not idempotent".into())?;

    let mut rng = seeded_rng(8);
    let mut fired_total = 0u64;
    let mut expired_total = 0u64;
    for scenario in 0..1000 {
        let window = rng.gen_range(1..6u32);
        let mut cas = Cas::new(CasStore::in_memory(suite), window);
        let docs: Vec<Vec<u8>> = (0..rng.gen_range(1..5)).map(|i| format!("doc {scenario}/{i}").into_bytes()).collect();
        let uids = [Uid([1, 1]), Uid([2, 2])];
        let mut registered: BTreeSet<Digest> = BTreeSet::new();
        let mut fired: BTreeMap<Digest, u32> = BTreeMap::new();
        let mut expired: BTreeMap<Digest, u32> = BTreeMap::new();
        let horizon = 20u32;
        for block in 1..=horizon + window + 1 {
            for name in cas.expire_triggers(block) {
                *expired.entry(name).or_default() += 1;
            }
            if block > horizon {
                continue;
            }
            for _ in 0..rng.gen_range(0..3) {
                let uid = uids[rng.gen_range(0..2)];
                let doc = &docs[rng.gen_range(0..docs.len())];
                let ws = WsProof {
                    k: block,
                    uid,
                    h_m: suite.hash(doc),
                    lv_addr: RecordAddress::new(block, 0),
                    s_addr: RecordAddress::new(block - 1, rng.gen_range(0..3)),
                };
                registered.insert(cas.register_trigger(&ws, block).map_err(|e| e.to_string())?);
            }
            if rng.gen_bool(0.3) {
                let uid = uids[rng.gen_range(0..2)];
                let doc = &docs[rng.gen_range(0..docs.len())];
                if let CasSubmission::Accepted { records, name } = cas.submit_content(uid, doc).map_err(|e| e.to_string())? {
                    ensure(name == suite.hash(doc), || "content name".into())?;
                    for c in records {
                        ensure(c.h_m == suite.hash(doc) && c.uid == uid, || "C-record does not match".into())?;
                        *fired.entry(c.ws_name).or_default() += 1;
                    }
                }
            }
        }
        ensure(cas.active_triggers().next().is_none(), || format!("scenario {scenario}: triggers left armed"))?;
        for name in &registered {
            let f = fired.get(name).copied().unwrap_or(0);
            let e = expired.get(name).copied().unwrap_or(0);
            ensure(f + e == 1, || format!("scenario {scenario}: trigger fired {f} and expired {e} times"))?;
            ensure(cas.store().contains(name), || "proof object removed".into())?;
        }
        let logged: BTreeSet<Digest> = cas.security_log().iter().map(|l| l.trigger.ws_name).collect();
        ensure(logged == expired.keys().copied().collect(), || "security log mismatch".into())?;
        for entry in cas.security_log() {
            ensure(entry.expired_at == entry.trigger.created_block + window + 1, || "expired at wrong block".into())?;
        }
        fired_total += fired.len() as u64;
        expired_total += expired.len() as u64;
    }
    Ok(format!("1000 scenarios: {fired_total} triggers fired, {expired_total} expired, none both or neither"))
}

// 9. enrolment under 1-byte prefixes
fn enrolment() -> Outcome {
    let suite = Suite::default();
    let mut rng = seeded_rng(9);
    let cfg = EnrolConfig {
        prefix_len: 1,
        alpha: 16,
        ..EnrolConfig::default()
    };
    let mut registry = UidRegistry::new(suite, 1, 16);
    let mut fails = 0u64;
    for device in 0..256 {
        let key = SymmetricKey::random(&suite, &mut rng);
        loop {
            let pending = device_request(&suite, &key, &cfg, &mut rng);
            match registry.fs_enrol(&key, &pending.request.encode(), 1) {
                EnrolmentReply::Fail => fails += 1,
                EnrolmentReply::Ack(ack) => {
                    ensure(ack == suite.hash(pending.n_star.as_bytes()), || format!("device {device}: ACK != H(N*)"))?;
                    break;
                }
            }
            ensure(fails < 1_000_000, || "collisions never resolved".into())?;
        }
    }
    let prefixes: BTreeSet<u8> = registry.uids().map(|u| u.0[0]).collect();
    ensure(registry.len() == 256 && prefixes.len() == 256, || format!("{} prefixes", prefixes.len()))?;
    Ok(format!("256 devices enrolled after {fails} FAIL replies, 256 unique prefixes"))
}

// 10. determinism and safety
fn determinism_and_safety() -> Outcome {
    let start = Instant::now();
    let things = 4;
    let models: Vec<(Vec<AttackerModel>, bool)> = vec![
        (vec![], true),
        (vec![AttackerModel::Corrupt { p: 0.2 }], true),
        (vec![AttackerModel::JamSpoof { target: 0, round: 1 }], true),
        (vec![AttackerModel::JamSpoof { target: 0, round: 1 }], false),
        (vec![AttackerModel::NoiseFlood { rate: 50, forged_uids: 2 }], true),
        (vec![AttackerModel::NoiseFlood { rate: 50, forged_uids: 2 }], false),
        (vec![AttackerModel::Jam { receivers: 1 }], true),
        (vec![AttackerModel::Jam { receivers: things }], true),
    ];
    let seeds: Vec<u64> = (0..100).collect();
    let jobs = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let mut runs = 0;
    for (attackers, mac_filter) in &models {
        let cfg = SimConfig {
            things,
            intervals: 30,
            loss_prob: 0.1,
            corrupt_prob: 0.01,
            attackers: attackers.clone(),
            mac_filter: *mac_filter,
            ..SimConfig::default()
        };
        let a = netsim::run(&cfg).map_err(|e| e.to_string())?;
        let b = netsim::run(&cfg).map_err(|e| e.to_string())?;
        ensure(a.trace_digest == b.trace_digest && a.trace == b.trace, || "trace differs between identical runs".into())?;
        for r in netsim::sweep(&cfg, &seeds, jobs) {
            let r = r.map_err(|e| e.to_string())?;
            ensure(r.integrity_violations() == 0, || {
                format!("{:?} seed {}: {} integrity violations", attackers, r.config.seed, r.integrity_violations())
            })?;
            runs += 1;
        }
    }
    Ok(format!("{} attacker models x 100 seeds ({runs} runs): 0 integrity violations, {:.2?}", models.len(), start.elapsed()))
}

fn main() -> ExitCode {
    let start = Instant::now();
    let criteria: [Criterion; 10] = [
        ("pls round trip", pls_round_trip),
        ("pls forgery resistance", pls_forgery),
        ("jam-spoof delta", jam_spoof_delta),
        ("slvp validator vs brute-force oracle", slvp_oracle),
        ("merkle minimal forest", merkle_forest),
        ("gf-hors emergency signatures", hors),
        ("mac filter", mac_filter),
        ("cas trigger lifecycle", cas_lifecycle),
        ("enrolment with 1-byte prefixes", enrolment),
        ("determinism and safety", determinism_and_safety),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("criterion {:2} PASS {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:2} FAIL {name}: {why}", i + 1);
            }
        }
    }
    println!("acceptance: {}/10 passed in {:.2?}", 10 - failed, start.elapsed());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
