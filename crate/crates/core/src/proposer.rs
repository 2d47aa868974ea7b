//! Proposer: turns client requests into signed commands and routes them to
//! the acceptors (fast ballot) or the current leader (classic ballot).

use std::collections::BTreeMap;

use crate::command::{Command, CommandError, CommandId, Footprint, ProcessId};
use crate::crypto::Signer;
use crate::effects::{Dest, Effects};
use crate::membership::Membership;
use crate::sequence::CmdSequence;
use crate::wire::{BallotKind, Message};

/// Client requests leave the proposer one hop from their origin.
const REQUEST_DEPTH: u32 = 1;

#[derive(Debug)]
pub struct Proposer {
    signer: Signer,
    membership: Membership,
    ballot_type: Option<BallotKind>,
    view: u64,
    next_seqno: u64,
    buffered: Vec<Command>,
    outstanding: BTreeMap<CommandId, Command>,
}

impl Proposer {
    pub fn new(signer: Signer, membership: Membership) -> Self {
        Self {
            signer,
            membership,
            ballot_type: None,
            view: 0,
            next_seqno: 0,
            buffered: Vec::new(),
            outstanding: BTreeMap::new(),
        }
    }

    pub fn id(&self) -> ProcessId {
        self.signer.id()
    }

    pub fn ballot_type(&self) -> Option<BallotKind> {
        self.ballot_type
    }

    pub fn outstanding(&self) -> impl Iterator<Item = &Command> {
        self.outstanding.values()
    }

    pub fn signer(&self) -> &Signer {
        &self.signer
    }

    pub fn leader(&self) -> ProcessId {
        self.membership.leader_of(self.view)
    }

    /// Signs the next command without sending it.
    pub fn make_command(
        &mut self,
        payload: Vec<u8>,
        footprint: Footprint,
        universal: bool,
    ) -> Result<Command, CommandError> {
        let id = CommandId::new(self.id(), self.next_seqno);
        let c = Command::signed(id, payload, footprint, universal, self.signer.keys(), self.signer.provider())?;
        self.next_seqno += 1;
        Ok(c)
    }

    pub fn on_ballot(&mut self, kind: BallotKind) -> Effects {
        self.ballot_type = Some(kind);
        let mut fx = Effects::new();
        for c in std::mem::take(&mut self.buffered) {
            self.outstanding.insert(c.id(), c);
        }
        // anything not yet learned is offered again in the new ballot
        for c in self.outstanding.values() {
            self.route(c, &mut fx);
        }
        fx
    }

    /// Signs a command for the request and routes it, or buffers it until
    /// the first BALLOT arrives.
    pub fn on_command_request(
        &mut self,
        payload: Vec<u8>,
        footprint: Footprint,
        universal: bool,
    ) -> Result<(Command, Effects), CommandError> {
        let c = self.make_command(payload, footprint, universal)?;
        let fx = self.submit(c.clone());
        Ok((c, fx))
    }

    /// Routes an already-built command.
    pub fn submit(&mut self, c: Command) -> Effects {
        let mut fx = Effects::new();
        if self.ballot_type.is_none() {
            self.buffered.push(c);
            return fx;
        }
        self.route(&c, &mut fx);
        self.outstanding.insert(c.id(), c);
        fx
    }

    fn route(&self, c: &Command, fx: &mut Effects) {
        let value = CmdSequence::single(c.clone());
        match self.ballot_type {
            Some(BallotKind::Fast) => fx.send(Dest::Acceptors, Message::P2aFast { value }, REQUEST_DEPTH),
            Some(BallotKind::Classic) => {
                fx.send(Dest::To(self.leader()), Message::Propose { prop: value }, REQUEST_DEPTH)
            }
            None => {}
        }
    }

    /// Harness notification: a new leader took over `view`.
    pub fn on_view_installed(&mut self, view: u64) -> Effects {
        let mut fx = Effects::new();
        if view <= self.view {
            return fx;
        }
        self.view = view;
        if self.ballot_type == Some(BallotKind::Classic) {
            for c in self.outstanding.values() {
                self.route(c, &mut fx);
            }
        }
        fx
    }

    /// Harness notification: `id` has been learned and need not be re-sent.
    pub fn on_learned(&mut self, id: CommandId) {
        self.outstanding.remove(&id);
    }
}
