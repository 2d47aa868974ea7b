//! Deterministic discrete-event simulator with an adversarial network,
//! Byzantine behaviours and a global invariant oracle.

pub mod byzantine;
pub mod config;
pub mod network;
pub mod oracle;
pub mod runner;
pub mod scenario;
pub mod trace;

pub use config::{Action, BallotPolicy, ConfigError, DelayModel, ScriptEntry, SignatureScheme, SimConfig, Strategy, Tamper, Workload};
pub use oracle::{InvariantOracle, Property, Verdict, Violation};
pub use runner::{run, LearnRecord, Outcome, RunStats};
pub use scenario::parse_scenario;
pub use trace::Trace;
