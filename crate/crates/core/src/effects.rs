//! What a role handler produces: messages to send plus trace notes.

use std::fmt;

use crate::command::{CommandId, ProcessId};
use crate::wire::{Ballot, BallotKind, Message};

/// Message addressing, resolved by the host (simulator) against the
/// configured process sets.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Dest {
    To(ProcessId),
    /// Every acceptor, the sender's own acceptor role included.
    Acceptors,
    /// Every acceptor except the sender.
    OtherAcceptors,
    Learners,
    Proposers,
}

/// An outgoing message. `depth` counts network hops on the longest causal
/// chain from the originating client request.
#[derive(Clone, Debug)]
pub struct Outbound {
    pub dest: Dest,
    pub msg: Message,
    pub depth: u32,
}

/// How a learner came to learn a sequence.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LearnPath {
    /// `N - f` certified P2B messages.
    Certified(BallotKind),
    /// `f + 1` matching P2B_UNIV messages.
    Universal(BallotKind),
}

/// Decision points worth recording in a trace.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Note {
    ByzantineLeaderSuspected { ballot: Ballot, leader: ProcessId },
    ForgedCommand { from: ProcessId, id: CommandId },
    InvalidCertificate { from: ProcessId, what: &'static str },
    IncomparableProven { ballot: Ballot },
    Voted { ballot: Ballot, len: usize },
    Proven { ballot: Ballot, len: usize },
    ViewInstalled { view: u64 },
    LeaderElected { view: u64 },
    Phase2a { ballot: Ballot, len: usize },
    Learned {
        commands: Vec<CommandId>,
        depth: u32,
        path: LearnPath,
        senders: usize,
    },
    CheckpointPaused { id: CommandId },
    CheckpointReset { id: CommandId },
    CheckpointExecuted { id: CommandId },
    BufferedPostCheckpoint { head: CommandId },
    DiscardedPreCheckpoint,
}

impl fmt::Display for LearnPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LearnPath::Certified(k) => write!(f, "certified-{k}"),
            LearnPath::Universal(k) => write!(f, "universal-{k}"),
        }
    }
}

impl fmt::Display for Note {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Note::ByzantineLeaderSuspected { ballot, leader } => write!(f, "guard-reject {ballot} leader={leader}"),
            Note::ForgedCommand { from, id } => write!(f, "forged {id} from {from}"),
            Note::InvalidCertificate { from, what } => write!(f, "bad-cert from {from}: {what}"),
            Note::IncomparableProven { ballot } => write!(f, "incomparable-proven {ballot}"),
            Note::Voted { ballot, len } => write!(f, "voted {ballot} len={len}"),
            Note::Proven { ballot, len } => write!(f, "proven {ballot} len={len}"),
            Note::ViewInstalled { view } => write!(f, "view {view}"),
            Note::LeaderElected { view } => write!(f, "leader view={view}"),
            Note::Phase2a { ballot, len } => write!(f, "phase2a {ballot} len={len}"),
            Note::Learned {
                commands,
                depth,
                path,
                senders,
            } => {
                write!(f, "learned {path} depth={depth} from={senders} [")?;
                for (i, c) in commands.iter().enumerate() {
                    write!(f, "{}{c}", if i == 0 { "" } else { " " })?;
                }
                f.write_str("]")
            }
            Note::CheckpointPaused { id } => write!(f, "checkpoint-paused {id}"),
            Note::CheckpointReset { id } => write!(f, "checkpoint-reset {id}"),
            Note::CheckpointExecuted { id } => write!(f, "checkpoint-executed {id}"),
            Note::BufferedPostCheckpoint { head } => write!(f, "buffered head={head}"),
            Note::DiscardedPreCheckpoint => f.write_str("discarded pre-checkpoint"),
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct Effects {
    pub out: Vec<Outbound>,
    pub notes: Vec<Note>,
}

impl Effects {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn send(&mut self, dest: Dest, msg: Message, depth: u32) {
        self.out.push(Outbound { dest, msg, depth });
    }

    pub fn note(&mut self, n: Note) {
        self.notes.push(n);
    }

    pub fn extend(&mut self, other: Effects) {
        self.out.extend(other.out);
        self.notes.extend(other.notes);
    }

    pub fn is_empty(&self) -> bool {
        self.out.is_empty() && self.notes.is_empty()
    }
}
