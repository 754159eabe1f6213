//! Scenario description and its flat `key = value` text form.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::slvp::ValidationMode;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("bad value for `{key}`: {value}")]
    Value { key: String, value: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AttackerModel {
    None,
    /// Replaces each Sequencer frame on each delivery path with a forged
    /// value with probability `p`.
    Corrupt { p: f64 },
    /// Intercepts thing `target`'s proof that closes `round`, keeps it from
    /// the Fog Server and forks the thing's chain with its own link and proof.
    JamSpoof { target: usize, round: u32 },
    /// `rate` random records per interval under the UIDs of the first
    /// `forged_uids` things.
    NoiseFlood { rate: u32, forged_uids: usize },
    /// Jams the Sequencer broadcast at the first `receivers` things for the
    /// whole run, feeding them forged frames instead.
    Jam { receivers: usize },
}

impl fmt::Display for AttackerModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttackerModel::None => write!(f, "none"),
            AttackerModel::Corrupt { p } => write!(f, "corrupt:{p}"),
            AttackerModel::JamSpoof { target, round } => write!(f, "jam-spoof:{target}:{round}"),
            AttackerModel::NoiseFlood { rate, forged_uids } => write!(f, "noise-flood:{rate}:{forged_uids}"),
            AttackerModel::Jam { receivers } => write!(f, "jam:{receivers}"),
        }
    }
}

impl FromStr for AttackerModel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let num = |i: usize| -> Result<&str, String> {
            parts.get(i).copied().ok_or_else(|| format!("missing field {i} in `{s}`"))
        };
        let bad = |e: &dyn fmt::Display| format!("`{s}`: {e}");
        match parts[0] {
            "none" => Ok(AttackerModel::None),
            "corrupt" => Ok(AttackerModel::Corrupt {
                p: num(1)?.parse().map_err(|e| bad(&e))?,
            }),
            "jam-spoof" => Ok(AttackerModel::JamSpoof {
                target: num(1).unwrap_or("0").parse().map_err(|e| bad(&e))?,
                round: num(2).unwrap_or("1").parse().map_err(|e| bad(&e))?,
            }),
            "noise-flood" => Ok(AttackerModel::NoiseFlood {
                rate: num(1)?.parse().map_err(|e| bad(&e))?,
                forged_uids: num(2).unwrap_or("1").parse().map_err(|e| bad(&e))?,
            }),
            "jam" => Ok(AttackerModel::Jam {
                receivers: num(1).unwrap_or("1").parse().map_err(|e| bad(&e))?,
            }),
            other => Err(format!("unknown attacker `{other}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub things: usize,
    pub intervals: u32,
    /// Logical interval length in seconds; bookkeeping only.
    pub tau: f64,
    /// Clock skew bound; informational, must be far below `tau`.
    pub epsilon: f64,
    pub loss_prob: f64,
    pub corrupt_prob: f64,
    /// Extra delivery paths per receiver.
    pub proxies: usize,
    pub gossip_rounds: usize,
    pub attackers: Vec<AttackerModel>,
    pub seed: u64,
    pub mac_filter: bool,
    pub mode: ValidationMode,
    pub alpha: usize,
    pub prefix_len: usize,
    pub hash_len: usize,
    pub arity: usize,
    pub expiry_after: u32,
    pub candidate_cap: usize,
    pub retransmit_after: u32,
    /// Send an emergency message every this many intervals (0: never).
    pub emergency_every: u32,
    /// Provision bootstrap chains at enrolment.
    pub bootstrap: bool,
    /// Maximum enrolment attempts per thing.
    pub enrol_attempts: u32,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            things: 4,
            intervals: 40,
            tau: 900.0,
            epsilon: 1.0,
            loss_prob: 0.0,
            corrupt_prob: 0.0,
            proxies: 1,
            gossip_rounds: 2,
            attackers: Vec::new(),
            seed: 0,
            mac_filter: true,
            mode: ValidationMode::Slvp,
            alpha: 16,
            prefix_len: 2,
            hash_len: 32,
            arity: 4,
            expiry_after: crate::cas::DEFAULT_EXPIRY_AFTER,
            candidate_cap: crate::pls::DEFAULT_CANDIDATE_CAP,
            retransmit_after: crate::slvp::DEFAULT_RETRANSMIT_AFTER,
            emergency_every: 0,
            bootstrap: false,
            enrol_attempts: 8,
        }
    }
}

fn mode_name(m: ValidationMode) -> &'static str {
    match m {
        ValidationMode::Slvp => "slvp",
        ValidationMode::LinkOnly => "gf-baseline",
    }
}

pub fn parse_mode(s: &str) -> Option<ValidationMode> {
    match s {
        "slvp" => Some(ValidationMode::Slvp),
        "gf-baseline" | "gf" | "link-only" => Some(ValidationMode::LinkOnly),
        _ => None,
    }
}

fn parse_bool(s: &str) -> Option<bool> {
    match s {
        "on" | "true" | "yes" | "1" => Some(true),
        "off" | "false" | "no" | "0" => Some(false),
        _ => None,
    }
}

impl SimConfig {
    /// Parses `key = value` lines; `#` starts a comment. Unset keys keep
    /// their defaults. `attacker` may repeat.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = SimConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or(ConfigError::Syntax { line: i + 1 })?;
            cfg.set(k.trim(), v.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        fn p<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
            value.parse().map_err(|_| ConfigError::Value {
                key: key.into(),
                value: value.into(),
            })
        }
        let bad = || ConfigError::Value {
            key: key.into(),
            value: value.into(),
        };
        match key {
            "things" => self.things = p(key, value)?,
            "intervals" => self.intervals = p(key, value)?,
            "tau" => self.tau = p(key, value)?,
            "epsilon" => self.epsilon = p(key, value)?,
            "loss_prob" => self.loss_prob = p(key, value)?,
            "corrupt_prob" => self.corrupt_prob = p(key, value)?,
            "proxies" => self.proxies = p(key, value)?,
            "gossip_rounds" => self.gossip_rounds = p(key, value)?,
            "seed" => self.seed = p(key, value)?,
            "mac_filter" => self.mac_filter = parse_bool(value).ok_or_else(bad)?,
            "mode" => self.mode = parse_mode(value).ok_or_else(bad)?,
            "alpha" => self.alpha = p(key, value)?,
            "prefix_len" => self.prefix_len = p(key, value)?,
            "hash_len" => self.hash_len = p(key, value)?,
            "arity" => self.arity = p(key, value)?,
            "expiry_after" => self.expiry_after = p(key, value)?,
            "candidate_cap" => self.candidate_cap = p(key, value)?,
            "retransmit_after" => self.retransmit_after = p(key, value)?,
            "emergency_every" => self.emergency_every = p(key, value)?,
            "bootstrap" => self.bootstrap = parse_bool(value).ok_or_else(bad)?,
            "enrol_attempts" => self.enrol_attempts = p(key, value)?,
            "attacker" => {
                let a: AttackerModel = value.parse().map_err(|_| bad())?;
                if a != AttackerModel::None {
                    self.attackers.push(a);
                }
            }
            "attackers" => {
                self.attackers.clear();
                for part in value.split(',').filter(|s| !s.trim().is_empty()) {
                    let a: AttackerModel = part.parse().map_err(|_| bad())?;
                    if a != AttackerModel::None {
                        self.attackers.push(a);
                    }
                }
            }
            other => return Err(ConfigError::UnknownKey(other.into())),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let inv = |m: &str| Err(ConfigError::Invalid(m.into()));
        for (name, p) in [("loss_prob", self.loss_prob), ("corrupt_prob", self.corrupt_prob)] {
            if !(0.0..=1.0).contains(&p) {
                return inv(&format!("{name} must lie in [0, 1]"));
            }
        }
        if self.things == 0 {
            return inv("things must be at least 1");
        }
        if self.intervals < 2 {
            return inv("intervals must be at least 2");
        }
        if self.alpha < 2 || !self.alpha.is_power_of_two() {
            return inv("alpha must be a power of two >= 2");
        }
        if !(1..=2).contains(&self.prefix_len) {
            return inv("prefix_len must be 1 or 2");
        }
        if self.hash_len != 16 && self.hash_len != 32 {
            return inv("hash_len must be 16 or 32");
        }
        if self.arity != 2 && self.arity != 4 {
            return inv("arity must be 2 or 4");
        }
        if self.things > 1 << (8 * self.prefix_len) {
            return inv("more things than UID prefixes");
        }
        if self.candidate_cap == 0 || self.retransmit_after == 0 || self.enrol_attempts == 0 {
            return inv("candidate_cap, retransmit_after and enrol_attempts must be positive");
        }
        if self.tau <= self.epsilon {
            return inv("tau must be much larger than epsilon");
        }
        for a in &self.attackers {
            match *a {
                AttackerModel::Corrupt { p } if !(0.0..=1.0).contains(&p) => {
                    return inv("corrupt probability must lie in [0, 1]");
                }
                AttackerModel::JamSpoof { target, round } if target >= self.things || round == 0 => {
                    return inv("jam-spoof target out of range");
                }
                AttackerModel::NoiseFlood { forged_uids, .. } if forged_uids > self.things => {
                    return inv("noise-flood forged_uids exceeds things");
                }
                AttackerModel::Jam { receivers } if receivers > self.things => {
                    return inv("jam receivers exceeds things");
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Canonical text form; parsing it yields an equal config.
    pub fn to_text(&self) -> String {
        let attackers: Vec<String> = self.attackers.iter().map(|a| a.to_string()).collect();
        let onoff = |b: bool| if b { "on" } else { "off" };
        let lines = [
            format!("things = {}", self.things),
            format!("intervals = {}", self.intervals),
            format!("tau = {}", self.tau),
            format!("epsilon = {}", self.epsilon),
            format!("loss_prob = {}", self.loss_prob),
            format!("corrupt_prob = {}", self.corrupt_prob),
            format!("proxies = {}", self.proxies),
            format!("gossip_rounds = {}", self.gossip_rounds),
            format!("attackers = {}", attackers.join(",")),
            format!("seed = {}", self.seed),
            format!("mac_filter = {}", onoff(self.mac_filter)),
            format!("mode = {}", mode_name(self.mode)),
            format!("alpha = {}", self.alpha),
            format!("prefix_len = {}", self.prefix_len),
            format!("hash_len = {}", self.hash_len),
            format!("arity = {}", self.arity),
            format!("expiry_after = {}", self.expiry_after),
            format!("candidate_cap = {}", self.candidate_cap),
            format!("retransmit_after = {}", self.retransmit_after),
            format!("emergency_every = {}", self.emergency_every),
            format!("bootstrap = {}", onoff(self.bootstrap)),
            format!("enrol_attempts = {}", self.enrol_attempts),
        ];
        let mut out = lines.join("\n");
        out.push('\n');
        out
    }
}
