//! Run configuration: cluster shape, network model, adversary roster,
//! ballot driving, workload and the timed script.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::command::ProcessId;
use crate::leader::LeaderCertThreshold;
use crate::wire::BallotKind;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConfigError {
    #[error("N >= 3f+1 is required, got N={n}, f={f}")]
    TooFewAcceptors { n: u32, f: u32 },
    #[error("unknown byzantine strategy `{0}`")]
    UnknownStrategy(String),
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("bad value for `{key}`: {value}")]
    BadValue { key: String, value: String },
    #[error("line {line}: {reason}")]
    BadLine { line: usize, reason: String },
    #[error("unknown process `{0}`")]
    UnknownProcess(String),
    #[error("{0} byzantine acceptors exceed f")]
    TooManyByzantine(usize),
    #[error("learners are never byzantine ({0})")]
    ByzantineLearner(ProcessId),
    #[error("at least one proposer and one learner are required")]
    MissingRole,
}

/// Network delay model. Times are virtual ticks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DelayModel {
    Uniform { lo: u64, hi: u64 },
    /// Mostly `lo..=hi`, with a heavy tail up to ten times `hi` and the
    /// given percentage of duplicated deliveries.
    Adversarial { lo: u64, hi: u64, dup_percent: u32 },
}

impl fmt::Display for DelayModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DelayModel::Uniform { lo, hi } => write!(f, "uniform {lo} {hi}"),
            DelayModel::Adversarial { lo, hi, dup_percent } => write!(f, "adversarial {lo} {hi} {dup_percent}"),
        }
    }
}

/// Which ballots the leader's periodic driver starts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BallotPolicy {
    Classic,
    /// Fast ballots, falling back to one classic ballot when a fast ballot
    /// stalls with work pending.
    Fast,
    Alternate,
    /// Only scripted ballots.
    Manual,
}

impl FromStr for BallotPolicy {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        Ok(match s {
            "classic" => Self::Classic,
            "fast" => Self::Fast,
            "alternate" => Self::Alternate,
            "manual" => Self::Manual,
            _ => return Err(()),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Strategy {
    Silent,
    OmitP1bCommands,
    EquivocateLeader,
    NonExtensionLeader,
    DoubleVoteAcceptor,
    FalseSuspector,
    ForgeCommand,
}

impl Strategy {
    pub const ALL: [Strategy; 7] = [
        Strategy::Silent,
        Strategy::OmitP1bCommands,
        Strategy::EquivocateLeader,
        Strategy::NonExtensionLeader,
        Strategy::DoubleVoteAcceptor,
        Strategy::FalseSuspector,
        Strategy::ForgeCommand,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Silent => "silent",
            Strategy::OmitP1bCommands => "omit-p1b-commands",
            Strategy::EquivocateLeader => "equivocate-leader",
            Strategy::NonExtensionLeader => "non-extension-leader",
            Strategy::DoubleVoteAcceptor => "double-vote-acceptor",
            Strategy::FalseSuspector => "false-suspector",
            Strategy::ForgeCommand => "forge-command",
        }
    }
}

impl FromStr for Strategy {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, ConfigError> {
        if s == "equivocate-verify" {
            return Ok(Strategy::DoubleVoteAcceptor);
        }
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| ConfigError::UnknownStrategy(s.to_string()))
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SignatureScheme {
    Hash,
    Ed25519,
}

/// Commands injected automatically at random correct proposers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Workload {
    pub commands: u32,
    pub keys: u32,
    pub universal_percent: u32,
    pub read_percent: u32,
    pub start: u64,
    /// Mean gap between injections.
    pub interval: u64,
}

impl Default for Workload {
    fn default() -> Self {
        Self {
            commands: 0,
            keys: 3,
            universal_percent: 0,
            read_percent: 0,
            start: 10,
            interval: 20,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Tamper {
    Reverse,
    Inject,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Action {
    Ballot(BallotKind),
    /// Command at proposer index `proposer` (0-based among proposers).
    Inject {
        proposer: u32,
        reads: Vec<String>,
        writes: Vec<String>,
        universal: bool,
    },
    Crash(ProcessId),
    /// Messages crossing the group boundary are held until `until`.
    Partition { group: Vec<ProcessId>, until: u64 },
    /// Messages of `tag` to `dst` carrying ballot number `ballot` are held
    /// until `until`. Used to force delivery orders around checkpoints.
    Hold { dst: ProcessId, tag: u8, ballot: u64, until: u64 },
    Checkpoint,
    Suspect,
    /// Corrupts what the oracle observes for one learner, to exercise the
    /// failure path of the checker itself.
    Tamper { learner: ProcessId, how: Tamper },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScriptEntry {
    pub at: u64,
    pub action: Action,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimConfig {
    pub n_acceptors: u32,
    pub f: u32,
    pub n_proposers: u32,
    pub n_learners: u32,
    pub seed: u64,
    /// Virtual-time horizon.
    pub max_steps: u64,
    /// Delivered events without learner growth before correct acceptors
    /// suspect the leader.
    pub progress_timeout: u64,
    /// Period of the wall-clock side of the progress monitor.
    pub monitor_interval: u64,
    pub delay: DelayModel,
    /// From this time on the network is synchronous.
    pub sync_after: Option<u64>,
    pub sync_delay: u64,
    pub byzantine: BTreeMap<ProcessId, Strategy>,
    pub ballots: BallotPolicy,
    pub ballot_interval: u64,
    pub workload: Workload,
    pub signatures: SignatureScheme,
    pub leader_threshold: LeaderCertThreshold,
    pub expect_liveness: bool,
    pub record_trace: bool,
    pub script: Vec<ScriptEntry>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_acceptors: 4,
            f: 1,
            n_proposers: 2,
            n_learners: 2,
            seed: 0,
            max_steps: 20_000,
            progress_timeout: 600,
            monitor_interval: 600,
            delay: DelayModel::Uniform { lo: 1, hi: 10 },
            sync_after: None,
            sync_delay: 5,
            byzantine: BTreeMap::new(),
            ballots: BallotPolicy::Fast,
            ballot_interval: 100,
            workload: Workload::default(),
            signatures: SignatureScheme::Hash,
            leader_threshold: LeaderCertThreshold::Quorum,
            expect_liveness: false,
            record_trace: false,
            script: Vec::new(),
        }
    }
}

impl SimConfig {
    pub fn acceptor(&self, i: u32) -> ProcessId {
        ProcessId(i)
    }

    pub fn proposer(&self, i: u32) -> ProcessId {
        ProcessId(self.n_acceptors + i)
    }

    pub fn learner(&self, i: u32) -> ProcessId {
        ProcessId(self.n_acceptors + self.n_proposers + i)
    }

    pub fn n_processes(&self) -> u32 {
        self.n_acceptors + self.n_proposers + self.n_learners
    }

    pub fn is_acceptor(&self, p: ProcessId) -> bool {
        p.0 < self.n_acceptors
    }

    pub fn is_proposer(&self, p: ProcessId) -> bool {
        p.0 >= self.n_acceptors && p.0 < self.n_acceptors + self.n_proposers
    }

    pub fn is_learner(&self, p: ProcessId) -> bool {
        p.0 >= self.n_acceptors + self.n_proposers && p.0 < self.n_processes()
    }

    /// Resolves `a3`, `p0`, `l1` or a raw numeric id.
    pub fn resolve(&self, name: &str) -> Result<ProcessId, ConfigError> {
        let bad = || ConfigError::UnknownProcess(name.to_string());
        let (role, idx) = name.split_at(name.find(|c: char| c.is_ascii_digit()).ok_or_else(bad)?);
        let i: u32 = idx.parse().map_err(|_| bad())?;
        let (pid, limit) = match role {
            "a" => (self.acceptor(i), self.n_acceptors),
            "p" => (self.proposer(i), self.n_proposers),
            "l" => (self.learner(i), self.n_learners),
            "" => (ProcessId(i), self.n_processes()),
            _ => return Err(bad()),
        };
        if (role.is_empty() && pid.0 >= limit) || (!role.is_empty() && i >= limit) {
            return Err(bad());
        }
        Ok(pid)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n_acceptors < 3 * self.f + 1 {
            return Err(ConfigError::TooFewAcceptors {
                n: self.n_acceptors,
                f: self.f,
            });
        }
        if self.n_proposers == 0 || self.n_learners == 0 {
            return Err(ConfigError::MissingRole);
        }
        let mut byz_acceptors = 0;
        for &p in self.byzantine.keys() {
            if p.0 >= self.n_processes() {
                return Err(ConfigError::UnknownProcess(p.to_string()));
            }
            if self.is_learner(p) {
                return Err(ConfigError::ByzantineLearner(p));
            }
            if self.is_acceptor(p) {
                byz_acceptors += 1;
            }
        }
        if byz_acceptors > self.f as usize {
            return Err(ConfigError::TooManyByzantine(byz_acceptors));
        }
        let (DelayModel::Uniform { lo, hi } | DelayModel::Adversarial { lo, hi, .. }) = self.delay;
        if lo == 0 || hi < lo {
            return Err(ConfigError::BadValue {
                key: "delay".into(),
                value: self.delay.to_string(),
            });
        }
        for e in &self.script {
            if let Action::Inject { proposer, .. } = e.action {
                if proposer >= self.n_proposers {
                    return Err(ConfigError::UnknownProcess(format!("p{proposer}")));
                }
            }
        }
        Ok(())
    }

    pub fn is_byzantine(&self, p: ProcessId) -> bool {
        self.byzantine.contains_key(&p)
    }
}
