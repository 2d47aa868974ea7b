//! Byzantine Generalized Paxos: command algebra, signatures, wire codec, the
//! five role state machines and a deterministic simulator to run them in.

pub mod acceptor;
pub mod codec;
pub mod command;
pub mod commute;
pub mod crypto;
pub mod effects;
pub mod env;
pub mod leader;
pub mod learner;
pub mod membership;
pub mod proposer;
pub mod sequence;
pub mod sim;
pub mod testutil;
pub mod wire;

pub use command::{Command, CommandError, CommandId, Footprint, ProcessId, CHECKPOINT_TAG};
pub use commute::CommutativityOracle;
pub use membership::Membership;
pub use sequence::{CmdSequence, SequenceError};
pub use wire::{Ballot, BallotKind, Message};
