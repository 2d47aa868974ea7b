use std::sync::Arc;

use crate::command::Command;
use crate::commute::CommutativityOracle;
use crate::crypto::{sequence_digest, Digest, Keyring};
use crate::membership::Membership;
use crate::sequence::CmdSequence;

/// Read-only context shared by every role of one run.
#[derive(Clone, Debug)]
pub struct RoleEnv {
    pub membership: Membership,
    pub keyring: Arc<Keyring>,
    pub oracle: Arc<CommutativityOracle>,
}

impl RoleEnv {
    pub fn new(membership: Membership, keyring: Keyring, oracle: CommutativityOracle) -> Self {
        Self {
            membership,
            keyring: Arc::new(keyring),
            oracle: Arc::new(oracle),
        }
    }

    pub fn digest(&self, s: &CmdSequence) -> Digest {
        sequence_digest(s, &self.oracle)
    }

    /// A command is admissible when its signature verifies and its issuer
    /// fits its kind: checkpoints come from acceptors (hosting the leader),
    /// client commands from anyone else.
    pub fn admissible(&self, c: &Command) -> bool {
        let from_acceptor = self.membership.is_acceptor(c.id().proposer);
        c.is_checkpoint() == from_acceptor && c.verify(&self.keyring)
    }

    /// First inadmissible command of `s`, if any.
    pub fn first_inadmissible<'a>(&self, s: &'a CmdSequence) -> Option<&'a Command> {
        s.iter().find(|c| !self.admissible(c))
    }
}
