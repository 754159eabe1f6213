use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use plschain::emergency::{hors_digest, hors_forgery_rate, hors_sign, hors_verify, HorsParams, NonceSchedule};
use plschain::ledger::record::Block;
use plschain::ledger::registry::{enrol, EnrolConfig, UidRegistry};
use plschain::merkle::{internal_nodes_for, nonzero_digits, verify_proof, MerkleForest};
use plschain::netsim::{self, AttackerModel, SimConfig, SimReport};
use plschain::pls::{PlsReceiver, PlsTransmitter, DEFAULT_CANDIDATE_CAP};
use plschain::slvp::ValidationMode;
use plschain::{seeded_rng, Digest, Nonce, Suite, SymmetricKey};

/// A scenario ran but its outcome contradicts what the scenario asserts.
const EXIT_SCENARIO: u8 = 3;

#[derive(Parser)]
#[command(name = "plschain", version, about = "Hash-chain signed IoT ledger: protocols, simulator and tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and print its report.
    Simulate(SimulateArgs),
    /// Run a scripted attack against one or both validators.
    Attack(AttackArgs),
    /// Broadcast-sign a few messages and authenticate them at a receiver.
    PlsDemo(DemoArgs),
    /// Post documents for one thing and show the Fog Server's decisions.
    SlvpDemo(DemoArgs),
    /// Enrol devices and show UID assignment and collisions.
    EnrolDemo(EnrolArgs),
    /// Minimal-root Merkle forest tools.
    Merkle {
        #[command(subcommand)]
        command: MerkleCommand,
    },
    /// Emergency signature parameters, round trip and forgery estimate.
    Hors(HorsArgs),
    /// Decode serialized blocks.
    Inspect(InspectArgs),
}

#[derive(Args)]
struct ScenarioArgs {
    /// Flat `key = value` scenario file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Override one config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Directory for report, trace and blocks.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// Sweep this many consecutive seeds starting at the configured one.
    #[arg(long, default_value_t = 1)]
    seeds: u64,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Slvp,
    GfBaseline,
    Both,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AttackKind {
    JamSpoof,
    NoiseFlood,
    Jam,
    Corrupt,
}

#[derive(Args)]
struct AttackArgs {
    #[arg(value_enum)]
    kind: AttackKind,
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long, value_enum, default_value = "both")]
    mode: Mode,
}

#[derive(Args)]
struct DemoArgs {
    #[arg(long, default_value_t = 5)]
    rounds: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct EnrolArgs {
    #[arg(long, default_value_t = 8)]
    count: usize,
    /// UID prefix length in bytes (1 or 2).
    #[arg(long, default_value_t = 2)]
    prefix_len: usize,
    #[arg(long, default_value_t = 64)]
    max_attempts: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum MerkleCommand {
    /// Minimal roots of a forest over `leaves` synthetic blocks.
    Roots(MerkleArgs),
    /// Membership proof for one leaf (1-based).
    Prove {
        #[command(flatten)]
        forest: MerkleArgs,
        #[arg(long)]
        index: u64,
    },
}

#[derive(Args)]
struct MerkleArgs {
    #[arg(long, default_value_t = 4)]
    arity: usize,
    #[arg(long)]
    leaves: u64,
}

#[derive(Args)]
struct HorsArgs {
    #[arg(long, default_value_t = 64)]
    alpha: usize,
    /// Digest length L in bits.
    #[arg(long, default_value_t = 126)]
    bits: usize,
    /// Monte Carlo trials for the forgery estimate.
    #[arg(long, default_value_t = 100_000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "emergency: patient critical")]
    message: String,
}

#[derive(Args)]
struct InspectArgs {
    /// A block file or a directory of them.
    path: PathBuf,
    #[arg(long, default_value_t = 32)]
    hash_len: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_SCENARIO),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

/// `Ok(false)` when a scenario's assertion failed.
fn dispatch(cmd: Command) -> Result<bool> {
    match cmd {
        Command::Simulate(a) => simulate(a),
        Command::Attack(a) => attack(a),
        Command::PlsDemo(a) => pls_demo(a),
        Command::SlvpDemo(a) => slvp_demo(a),
        Command::EnrolDemo(a) => enrol_demo(a),
        Command::Merkle { command } => merkle(command),
        Command::Hors(a) => hors(a),
        Command::Inspect(a) => inspect(a),
    }
}

fn load_config(args: &ScenarioArgs, base: SimConfig) -> Result<SimConfig> {
    let mut cfg = match &args.config {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            SimConfig::parse(&text)?
        }
        None => base,
    };
    for o in &args.overrides {
        let (k, v) = o.split_once('=').with_context(|| format!("`{o}` is not KEY=VALUE"))?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_config(cfg: &SimConfig) {
    println!("[config]");
    print!("{}", cfg.to_text());
    println!("[/config]");
}

fn write_outputs(dir: &Path, report: &SimReport) -> Result<()> {
    let blocks = dir.join("blocks");
    fs::create_dir_all(&blocks).with_context(|| format!("creating {}", blocks.display()))?;
    fs::write(dir.join("config.cfg"), report.config.to_text())?;
    fs::write(dir.join("report.txt"), report.render())?;
    let mut trace = report.trace.join("\n");
    trace.push('\n');
    fs::write(dir.join("trace.txt"), trace)?;
    for b in &report.blocks {
        fs::write(blocks.join(format!("{:06}.blk", b.index)), b.serialize())?;
    }
    Ok(())
}

fn mode_name(m: ValidationMode) -> &'static str {
    match m {
        ValidationMode::Slvp => "slvp",
        ValidationMode::LinkOnly => "gf-baseline",
    }
}

fn modes(m: Mode) -> Vec<ValidationMode> {
    match m {
        Mode::Slvp => vec![ValidationMode::Slvp],
        Mode::GfBaseline => vec![ValidationMode::LinkOnly],
        Mode::Both => vec![ValidationMode::LinkOnly, ValidationMode::Slvp],
    }
}

fn simulate(a: SimulateArgs) -> Result<bool> {
    let mut cfg = load_config(&a.scenario, SimConfig::default())?;
    let mut ok = true;
    for mode in a.mode.map(modes).unwrap_or_else(|| vec![cfg.mode]) {
        cfg.mode = mode;
        print_config(&cfg);
        let seeds: Vec<u64> = (0..a.seeds.max(1)).map(|i| cfg.seed.wrapping_add(i)).collect();
        for (seed, r) in seeds.iter().zip(netsim::sweep(&cfg, &seeds, a.jobs)) {
            let r = r?;
            print!("{}", r.render());
            // the link-only baseline is expected to accept forks
            if mode == ValidationMode::Slvp && r.integrity_violations() > 0 {
                ok = false;
            }
            if let Some(dir) = &a.scenario.out {
                let dir = if seeds.len() > 1 || a.mode == Some(Mode::Both) {
                    dir.join(format!("{}-seed{seed}", mode_name(mode)))
                } else {
                    dir.clone()
                };
                write_outputs(&dir, &r)?;
            }
        }
    }
    Ok(ok)
}

fn attack(a: AttackArgs) -> Result<bool> {
    let attacker = match a.kind {
        AttackKind::JamSpoof => AttackerModel::JamSpoof { target: 0, round: 1 },
        AttackKind::NoiseFlood => AttackerModel::NoiseFlood { rate: 100, forged_uids: 2 },
        AttackKind::Jam => AttackerModel::Jam { receivers: 1 },
        AttackKind::Corrupt => AttackerModel::Corrupt { p: 0.2 },
    };
    let base = SimConfig {
        attackers: vec![attacker],
        // the forged link only reaches the validator when the filter is off
        mac_filter: a.kind != AttackKind::JamSpoof,
        ..SimConfig::default()
    };
    let mut cfg = load_config(&a.scenario, base)?;
    let mut ok = true;
    for mode in modes(a.mode) {
        cfg.mode = mode;
        print_config(&cfg);
        let r = netsim::run(&cfg)?;
        print!("{}", r.render());
        let expected = match (a.kind, mode) {
            (AttackKind::JamSpoof, ValidationMode::Slvp) => {
                let js = r.jam_spoof.clone().unwrap_or_default();
                let defended = js.forged_p.as_deref() == Some("rejected:earlier-lv-wins")
                    && js.honest_p.as_deref() == Some("accepted");
                defended && r.integrity_violations() == 0
            }
            (AttackKind::JamSpoof, ValidationMode::LinkOnly) => {
                cfg.mac_filter || r.jam_spoof.as_ref().and_then(|j| j.forged_p.as_deref()) == Some("accepted")
            }
            _ => r.integrity_violations() == 0,
        };
        println!("scenario: {}", if expected { "as-expected" } else { "unexpected" });
        ok &= expected;
        if let Some(dir) = &a.scenario.out {
            write_outputs(&dir.join(mode_name(mode)), &r)?;
        }
    }
    Ok(ok)
}

fn pls_demo(a: DemoArgs) -> Result<bool> {
    let suite = Suite::default();
    let mut rng = seeded_rng(a.seed);
    let (mut tx, p1) = PlsTransmitter::init(suite, Nonce::random(&suite, &mut rng));
    let mut rx = PlsReceiver::new(suite, p1, DEFAULT_CANDIDATE_CAP);
    println!("p1: {p1}");
    let mut sent = BTreeMap::new();
    let mut ok = true;
    for k in 1..=a.rounds + 1 {
        let msg = format!("message {k}");
        sent.insert(k, suite.hash(msg.as_bytes()));
        let b = tx.round(&mut rng, msg.as_bytes());
        println!("broadcast bin={} L={} S={} P={}", b.bin, b.l, b.s, b.p);
        for f in b.frames() {
            rx.ingest_frame(&f);
        }
        if k == 1 {
            continue;
        }
        let v = rx.verify(k)?;
        let good = v.message_hashes.first() == sent.get(&v.bin);
        ok &= good;
        println!("verified bin={} h_m={} match={}", v.bin, v.message_hashes[0], good);
    }
    Ok(ok)
}

fn slvp_demo(a: DemoArgs) -> Result<bool> {
    let cfg = SimConfig {
        things: 1,
        seed: a.seed,
        intervals: 4 + 6 * a.rounds,
        ..SimConfig::default()
    };
    let r = netsim::run(&cfg)?;
    for line in &r.trace {
        let kind = line.split(' ').nth(2).unwrap_or("");
        if matches!(kind, "enrol" | "submit" | "accept" | "reject" | "trigger-arm" | "trigger-fire" | "content") {
            println!("{line}");
        }
    }
    println!("rounds_completed: {}", r.rounds_completed[0]);
    Ok(r.rounds_completed[0] >= a.rounds && r.integrity_violations() == 0)
}

fn enrol_demo(a: EnrolArgs) -> Result<bool> {
    let suite = Suite::default();
    let mut rng = seeded_rng(a.seed);
    let cfg = EnrolConfig {
        prefix_len: a.prefix_len,
        max_attempts: a.max_attempts,
        ..EnrolConfig::default()
    };
    let mut reg = UidRegistry::new(suite, a.prefix_len, cfg.alpha);
    let seq_p = suite.hash(b"sequencer");
    let mut retries = 0;
    for i in 0..a.count {
        let dev = enrol(&mut reg, seq_p, &cfg, 1, &mut rng)?;
        retries += dev.attempts - 1;
        println!("device={i} uid={} attempts={} p1={}", dev.uid, dev.attempts, dev.p1);
    }
    println!("registered: {}", reg.len());
    println!("capacity: {}", reg.capacity());
    println!("collision_retries: {retries}");
    Ok(reg.len() == a.count)
}

fn leaf(i: u64) -> Digest {
    Suite::default().hash(format!("block {i}").as_bytes())
}

fn build_forest(a: &MerkleArgs) -> Result<MerkleForest> {
    let mut f = MerkleForest::new(Suite::default(), a.arity)?;
    for i in 1..=a.leaves {
        f.add_leaf(leaf(i));
    }
    Ok(f)
}

/// Leaf ranges (1-based, inclusive) covered by each root, most significant first.
fn root_groups(k: u64, arity: u64) -> Vec<(u64, u64)> {
    let mut digits = Vec::new();
    let (mut rest, mut weight) = (k, 1u64);
    while rest > 0 {
        digits.push((rest % arity) * weight);
        rest /= arity;
        weight *= arity;
    }
    let mut start = 1;
    digits
        .into_iter()
        .rev()
        .filter(|&n| n > 0)
        .map(|n| {
            let g = (start, start + n - 1);
            start += n;
            g
        })
        .collect()
}

fn merkle(cmd: MerkleCommand) -> Result<bool> {
    match cmd {
        MerkleCommand::Roots(a) => {
            let f = build_forest(&a)?;
            let roots = f.minimal_roots();
            println!("leaves: {}", a.leaves);
            println!("arity: {}", a.arity);
            println!("roots: {}", roots.len());
            for (i, ((lo, hi), r)) in root_groups(a.leaves, a.arity as u64).into_iter().zip(&roots).enumerate() {
                println!("root {}: leaves {lo}..{hi} {r}", i + 1);
            }
            println!("nonzero_digits: {}", nonzero_digits(a.leaves, a.arity as u64));
            println!("internal_nodes: {}", f.internal_node_count());
            println!("internal_nodes_closed_form: {}", internal_nodes_for(a.leaves, a.arity as u64));
            if a.leaves > 0 {
                println!("gamma: {}", f.gamma()?);
            }
            Ok(roots.len() == nonzero_digits(a.leaves, a.arity as u64))
        }
        MerkleCommand::Prove { forest, index } => {
            if index == 0 || index > forest.leaves {
                bail!("index must be in 1..={}", forest.leaves);
            }
            let f = build_forest(&forest)?;
            let proof = f.prove(index)?;
            let ok = verify_proof(&Suite::default(), &f.minimal_roots(), index, &leaf(index), &proof);
            println!("leaf: {index} {}", leaf(index));
            println!("levels: {}", proof.steps.len());
            for (h, s) in proof.steps.iter().enumerate() {
                let sib: Vec<String> = s.siblings.iter().map(|d| d.to_hex()).collect();
                println!("level {h}: position={} siblings={}", s.position, sib.join(","));
            }
            println!("proof: {}", hex::encode(proof.encode()));
            println!("verified: {ok}");
            Ok(ok)
        }
    }
}

fn hors(a: HorsArgs) -> Result<bool> {
    let suite = Suite::default();
    let params = HorsParams::new(a.alpha, a.bits)?;
    let mut rng = seeded_rng(a.seed);
    let mut schedule = NonceSchedule::new(suite, a.alpha);
    for _ in 0..=a.alpha + 1 {
        schedule.next_nonce(&mut rng);
    }
    let k = schedule.latest_round();
    let posted: BTreeMap<i64, Nonce> = (1..k).filter_map(|r| schedule.nonce(r).map(|n| (r, n))).collect();
    let key = SymmetricKey::random(&suite, &mut rng);
    let msg = a.message.as_bytes();
    let sig = hors_sign(&schedule, &params, k, &key, msg)?;
    let verified = hors_verify(&suite, &params, &posted, &key, msg, &sig)?;
    let mut tampered = msg.to_vec();
    tampered.push(b'!');
    let forged = hors_verify(&suite, &params, &posted, &key, &tampered, &sig)?;
    let (_, sigmas) = hors_digest(&suite, &params, &key, msg)?;
    let est = hors_forgery_rate(&params, &sigmas, a.trials, &mut rng);

    println!("alpha: {}", params.alpha());
    println!("slice_bits: {}", params.slice_bits());
    println!("digest_bits: {}", params.digest_bits());
    println!("sigmas: {}", params.sigma_count());
    println!("signature_bytes: {}", params.signature_bytes(&suite));
    println!("round: {k}");
    println!("verify: {verified}");
    println!("tampered_verify: {forged}");
    println!("forgery_trials: {}", est.trials);
    println!("forgery_hits: {}", est.hits);
    println!("forgery_rate: {:e}", est.rate());
    println!("forgery_bound: {:e}", params.forgery_bound());
    Ok(verified && !forged)
}

fn inspect(a: InspectArgs) -> Result<bool> {
    let suite = Suite::new(a.hash_len)?;
    let files = if a.path.is_dir() {
        let mut v: Vec<PathBuf> = fs::read_dir(&a.path)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file())
            .collect();
        v.sort();
        v
    } else {
        vec![a.path.clone()]
    };
    for p in files {
        let bytes = fs::read(&p).with_context(|| format!("reading {}", p.display()))?;
        let b = Block::decode(&suite, &bytes).with_context(|| format!("decoding {}", p.display()))?;
        println!("block {} hash={} gamma_prev={} records={}", b.index, b.hash(&suite), b.gamma_prev, b.records.len());
        for (addr, r) in b.addressed() {
            let uid = r.uid().map(|u| u.to_string()).unwrap_or_else(|| "-".into());
            println!("  {addr} {} uid={uid} {}", r.kind().name(), hex::encode(r.encode()));
        }
    }
    Ok(true)
}
