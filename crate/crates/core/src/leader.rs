//! Leader: starts ballots, gathers phase 1b quorums and picks the phase 2a
//! value. The role runs on the acceptor process `view mod N`.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::command::{Command, CommandId, ProcessId};
use crate::crypto::{check_proven_cert, LeaderCert, ProvenCert, Signer, ViewChangeProof};
use crate::effects::{Dest, Effects, Note};
use crate::env::RoleEnv;
use crate::sequence::CmdSequence;
use crate::wire::{Ballot, BallotKind, Message};

/// How many valid view-change proofs a LEADER message needs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum LeaderCertThreshold {
    /// `N - f`.
    #[default]
    Quorum,
    /// `f + 1`.
    WeakQuorum,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LeaderError {
    #[error("{id} is not the leader of view {view}")]
    NotLeader { id: ProcessId, view: u64 },
}

#[derive(Debug)]
pub struct Leader {
    signer: Signer,
    env: RoleEnv,
    threshold: LeaderCertThreshold,
    view: u64,
    ballot_number: u64,
    current: Option<Ballot>,
    proposals: CmdSequence,
    /// Proven sequences reported for the current ballot, with the ballot
    /// each was proven at.
    accepted: BTreeMap<ProcessId, (Ballot, CmdSequence)>,
    not_accepted: CmdSequence,
    p1b_depth: u32,
    phase2_done: bool,
    pending_checkpoint: Option<Command>,
    checkpoint_seqno: u64,
}

impl Leader {
    pub fn new(signer: Signer, env: RoleEnv, threshold: LeaderCertThreshold) -> Self {
        Self {
            signer,
            env,
            threshold,
            view: 0,
            ballot_number: 0,
            current: None,
            proposals: CmdSequence::new(),
            accepted: BTreeMap::new(),
            not_accepted: CmdSequence::new(),
            p1b_depth: 0,
            phase2_done: false,
            pending_checkpoint: None,
            checkpoint_seqno: 0,
        }
    }

    pub fn id(&self) -> ProcessId {
        self.signer.id()
    }

    pub fn view(&self) -> u64 {
        self.view
    }

    pub fn is_leader(&self) -> bool {
        self.env.membership.leader_of(self.view) == self.id()
    }

    pub fn current_ballot(&self) -> Option<Ballot> {
        self.current
    }

    pub fn proposals(&self) -> &CmdSequence {
        &self.proposals
    }

    pub fn pending_checkpoint(&self) -> Option<&Command> {
        self.pending_checkpoint.as_ref()
    }

    pub fn on_leader_cert(&mut self, view: u64, proofs: BTreeMap<ProcessId, ViewChangeProof>, depth: u32) -> Effects {
        if view <= self.view || self.env.membership.leader_of(view) != self.id() {
            return Effects::new();
        }
        let cert = LeaderCert { view, proofs };
        let valid = cert.valid_proofs(&self.env.keyring, &self.env.membership);
        let needed = match self.threshold {
            LeaderCertThreshold::Quorum => self.env.membership.quorum(),
            LeaderCertThreshold::WeakQuorum => self.env.membership.weak_quorum(),
        };
        if valid < needed {
            return Effects::new();
        }
        self.view = view;
        self.current = None;
        self.accepted.clear();
        self.not_accepted = CmdSequence::new();
        // a new leader first collects state with a classic ballot
        let mut fx = self.next_ballot(BallotKind::Classic, depth + 1);
        fx.notes.insert(0, Note::LeaderElected { view });
        fx
    }

    pub fn trigger_next_ballot(&mut self, kind: BallotKind) -> Result<Effects, LeaderError> {
        if !self.is_leader() {
            return Err(LeaderError::NotLeader {
                id: self.id(),
                view: self.view,
            });
        }
        Ok(self.next_ballot(kind, 1))
    }

    fn next_ballot(&mut self, kind: BallotKind, depth: u32) -> Effects {
        self.ballot_number += 1;
        let ballot = Ballot::new(self.view, self.ballot_number, kind);
        self.current = Some(ballot);
        self.accepted.clear();
        self.not_accepted = CmdSequence::new();
        self.p1b_depth = 0;
        self.phase2_done = false;
        let mut fx = Effects::new();
        fx.send(Dest::Proposers, Message::Ballot { kind }, depth);
        let view = self.view;
        let msg = match kind {
            BallotKind::Fast => Message::Fast { ballot, view },
            BallotKind::Classic => Message::P1a { ballot, view },
        };
        fx.send(Dest::Acceptors, msg, depth);
        fx
    }

    /// Ballot used for universal proposals that bypass phase 1.
    fn ballot_l(&self) -> Ballot {
        self.current
            .unwrap_or(Ballot::new(self.view, self.ballot_number, BallotKind::Classic))
    }

    pub fn on_propose(&mut self, from: ProcessId, prop: CmdSequence, depth: u32) -> Effects {
        let mut fx = Effects::new();
        if !self.is_leader() {
            return fx;
        }
        let admissible: CmdSequence = prop
            .iter()
            .filter(|c| {
                let ok = !c.is_checkpoint() && self.env.admissible(c);
                if !ok {
                    fx.note(Note::ForgedCommand { from, id: c.id() });
                }
                ok
            })
            .cloned()
            .collect();
        if admissible.is_empty() {
            return fx;
        }
        if admissible.is_universally_commutative() {
            let msg = Message::P2aClassic {
                ballot: self.ballot_l(),
                view: self.view,
                value: admissible,
            };
            fx.send(Dest::Acceptors, msg, depth + 1);
        } else {
            self.proposals = self.proposals.concat(&admissible);
        }
        fx
    }

    /// Checks the proven part of a P1B. Returns the ballot the sequence was
    /// proven at, or `None` if the report is not backed by a valid
    /// certificate.
    fn proven_ballot(&self, proven: &CmdSequence, cert: Option<&ProvenCert>) -> Option<Ballot> {
        if proven.is_empty() {
            return Some(Ballot::ZERO);
        }
        let cert = cert?;
        let matches = cert.value == *proven
            // after a checkpoint an acceptor keeps only C*, still backed by
            // the certificate of the sequence that ended with it
            || (proven.len() == 1
                && proven.as_slice()[0].is_checkpoint()
                && cert.value.last() == proven.first());
        (matches && check_proven_cert(cert, &self.env.keyring, &self.env.membership, &self.env.oracle))
            .then_some(cert.ballot)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn on_p1b(
        &mut self,
        from: ProcessId,
        ballot: Ballot,
        proven: CmdSequence,
        val_a: CmdSequence,
        proven_cert: Option<ProvenCert>,
        depth: u32,
    ) -> Effects {
        let mut fx = Effects::new();
        let Some(current) = self.current else {
            return fx;
        };
        if ballot != current
            || current.kind != BallotKind::Classic
            || self.phase2_done
            || !self.env.membership.is_acceptor(from)
            || self.accepted.contains_key(&from)
        {
            return fx;
        }
        let Some(at) = self.proven_ballot(&proven, proven_cert.as_ref()) else {
            fx.note(Note::InvalidCertificate {
                from,
                what: "p1b proven",
            });
            return fx;
        };
        if let Some(c) = self.env.first_inadmissible(&val_a) {
            fx.note(Note::ForgedCommand { from, id: c.id() });
            return fx;
        }
        let proven = from_last_checkpoint(&proven);
        let unproven: CmdSequence = val_a
            .without(&proven)
            .iter()
            .filter(|c| !c.is_checkpoint())
            .cloned()
            .collect();
        self.accepted.insert(from, (at, proven));
        self.not_accepted.extend_raw(&unproven);
        self.p1b_depth = self.p1b_depth.max(depth);
        if self.accepted.len() >= self.env.membership.quorum() {
            fx.extend(self.phase_2a());
        }
        fx
    }

    /// Builds the proposal from the P1B quorum: the largest proven sequence
    /// of the newest ballot, then the reported unproven commands, then new
    /// proposals, then a pending checkpoint.
    fn phase_2a(&mut self) -> Effects {
        let mut fx = Effects::new();
        let Some(ballot) = self.current else {
            return fx;
        };
        self.phase2_done = true;
        let newest = self.accepted.values().map(|(b, _)| *b).max().unwrap_or(Ballot::ZERO);
        let group: BTreeMap<ProcessId, CmdSequence> = self
            .accepted
            .iter()
            .filter(|(_, (b, _))| *b == newest)
            .map(|(p, (_, s))| (*p, s.clone()))
            .collect();
        let max_tried = match self.env.oracle.largest_seq(&group) {
            Ok(s) => s,
            Err(_) => {
                fx.note(Note::IncomparableProven { ballot });
                return fx;
            }
        };
        let previous = self.not_accepted.remove_duplicates();
        let mut value = max_tried.concat(&previous).concat(&self.proposals);
        if let Some(cp) = &self.pending_checkpoint {
            if max_tried.contains_id(cp.id()) {
                self.pending_checkpoint = None;
            } else {
                value = value.concat(&CmdSequence::single(cp.clone()));
            }
        }
        self.proposals = CmdSequence::new();
        fx.note(Note::Phase2a {
            ballot,
            len: value.len(),
        });
        let msg = Message::P2aClassic {
            ballot,
            view: self.view,
            value,
        };
        fx.send(Dest::Acceptors, msg, self.p1b_depth + 1);
        fx
    }

    /// Queues a checkpoint command for the next classic proposal.
    pub fn request_checkpoint(&mut self) -> CommandId {
        if let Some(cp) = &self.pending_checkpoint {
            return cp.id();
        }
        let id = CommandId::new(self.id(), self.checkpoint_seqno);
        self.checkpoint_seqno += 1;
        let cp = Command::checkpoint(id, self.signer.keys(), self.signer.provider());
        self.pending_checkpoint = Some(cp);
        id
    }
}

/// The suffix starting at the last checkpoint command, or the whole
/// sequence if it holds none past the head.
fn from_last_checkpoint(s: &CmdSequence) -> CmdSequence {
    match s.iter().rposition(|c| c.is_checkpoint()) {
        Some(k) if k > 0 => s.as_slice()[k..].iter().cloned().collect(),
        _ => s.clone(),
    }
}
