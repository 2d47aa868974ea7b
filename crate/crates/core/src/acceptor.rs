//! Acceptor: view-change participation, phase 1b replies, the verification
//! round and phase 2b votes, plus the checkpoint pause/reset.

use std::collections::{BTreeMap, BTreeSet};

use crate::command::{CommandId, ProcessId};
use crate::crypto::{
    valid_suspicions, Digest, ProvenCert, Signer, SuspicionProof, VerifyProof, ViewChangeProof,
};
use crate::effects::{Dest, Effects, Note};
use crate::env::RoleEnv;
use crate::sequence::CmdSequence;
use crate::wire::{Ballot, Message};

#[derive(Debug, Default)]
struct VoteSlot {
    value: CmdSequence,
    proofs: BTreeMap<ProcessId, (VerifyProof, u32)>,
}

#[derive(Debug)]
pub struct Acceptor {
    signer: Signer,
    env: RoleEnv,
    learners: BTreeSet<ProcessId>,
    view: u64,
    leader: ProcessId,
    suspicions: BTreeMap<ProcessId, SuspicionProof>,
    new_view: BTreeMap<u64, BTreeMap<ProcessId, ViewChangeProof>>,
    bal_a: Ballot,
    /// `None` is the empty vote: nothing accepted in `bal_a` yet.
    val_a: Option<CmdSequence>,
    proven: CmdSequence,
    proven_ballot: Ballot,
    proven_cert: Option<ProvenCert>,
    fast_bal: BTreeSet<Ballot>,
    proofs: BTreeMap<Ballot, BTreeMap<Digest, VoteSlot>>,
    p2b_sent: BTreeSet<(Ballot, Digest)>,
    paused: Option<CommandId>,
    checkpoints_done: BTreeSet<CommandId>,
    acks: BTreeMap<CommandId, BTreeSet<ProcessId>>,
}

impl Acceptor {
    pub fn new(signer: Signer, env: RoleEnv, learners: BTreeSet<ProcessId>) -> Self {
        Self {
            signer,
            env,
            learners,
            view: 0,
            leader: ProcessId(0),
            suspicions: BTreeMap::new(),
            new_view: BTreeMap::new(),
            bal_a: Ballot::ZERO,
            val_a: None,
            proven: CmdSequence::new(),
            proven_ballot: Ballot::ZERO,
            proven_cert: None,
            fast_bal: BTreeSet::new(),
            proofs: BTreeMap::new(),
            p2b_sent: BTreeSet::new(),
            paused: None,
            checkpoints_done: BTreeSet::new(),
            acks: BTreeMap::new(),
        }
    }

    pub fn id(&self) -> ProcessId {
        self.signer.id()
    }

    pub fn signer(&self) -> &Signer {
        &self.signer
    }

    pub fn view(&self) -> u64 {
        self.view
    }

    pub fn leader(&self) -> ProcessId {
        self.leader
    }

    pub fn bal_a(&self) -> Ballot {
        self.bal_a
    }

    pub fn val_a(&self) -> Option<&CmdSequence> {
        self.val_a.as_ref()
    }

    pub fn proven(&self) -> &CmdSequence {
        &self.proven
    }

    pub fn proven_ballot(&self) -> Ballot {
        self.proven_ballot
    }

    pub fn is_paused(&self) -> bool {
        self.paused.is_some()
    }

    /// Commands held in `val_a` and `proven`.
    pub fn stored_len(&self) -> usize {
        self.val_a.as_ref().map_or(0, CmdSequence::len) + self.proven.len()
    }

    fn ack_threshold(&self) -> usize {
        self.env.membership.quorum().min(self.learners.len()).max(1)
    }

    /// Routes an acceptor-bound message. Leader-bound variants are ignored.
    pub fn handle(&mut self, from: ProcessId, msg: Message, depth: u32) -> Effects {
        match msg {
            Message::P1a { ballot, view } => self.on_p1a(from, ballot, view, depth),
            Message::Fast { ballot, view } => self.on_fast(from, ballot, view),
            Message::Verify {
                view,
                ballot,
                value,
                proof,
            } => self.on_verify(from, view, ballot, value, proof, depth),
            Message::P2aClassic { ballot, view, value } => self.on_p2a_classic(from, ballot, view, value, depth),
            Message::P2aFast { value } => self.on_p2a_fast(from, value, depth),
            Message::Suspicion { view, proof } => self.on_suspicion(from, view, proof, depth),
            Message::ViewChange {
                new_view,
                suspicions,
                change_proof,
            } => self.on_view_change(from, new_view, suspicions, change_proof, depth),
            Message::CheckpointAck { checkpoint } => self.on_checkpoint_ack(from, checkpoint),
            _ => Effects::new(),
        }
    }

    // ---- view change ----

    pub fn suspect_leader(&mut self) -> Effects {
        let mut fx = Effects::new();
        if self.suspicions.contains_key(&self.id()) {
            return fx;
        }
        let proof = SuspicionProof::sign(&self.signer, self.view);
        self.suspicions.insert(self.id(), proof.clone());
        fx.send(Dest::OtherAcceptors, Message::Suspicion { view: self.view, proof }, 1);
        self.maybe_start_view_change(&mut fx, 1);
        fx
    }

    pub fn on_suspicion(&mut self, from: ProcessId, view: u64, proof: SuspicionProof, depth: u32) -> Effects {
        let mut fx = Effects::new();
        if view != self.view || proof.acceptor != from || proof.view != view || !self.env.membership.is_acceptor(from)
        {
            return fx;
        }
        if !self.suspicions.contains_key(&from) && proof.verify(&self.env.keyring) {
            self.suspicions.insert(from, proof);
        }
        self.maybe_start_view_change(&mut fx, depth + 1);
        fx
    }

    fn maybe_start_view_change(&mut self, fx: &mut Effects, depth: u32) {
        let next = self.view + 1;
        if self.suspicions.len() <= self.env.membership.f as usize {
            return;
        }
        if self.new_view.get(&next).is_some_and(|m| m.contains_key(&self.id())) {
            return;
        }
        let change_proof = ViewChangeProof::sign(&self.signer, next);
        let me = self.id();
        self.new_view.entry(next).or_default().insert(me, change_proof.clone());
        let msg = Message::ViewChange {
            new_view: next,
            suspicions: self.suspicions.clone(),
            change_proof,
        };
        fx.send(Dest::OtherAcceptors, msg, depth);
        self.maybe_install(next, fx, depth);
    }

    pub fn on_view_change(
        &mut self,
        from: ProcessId,
        new_view: u64,
        suspicions: BTreeMap<ProcessId, SuspicionProof>,
        change_proof: ViewChangeProof,
        depth: u32,
    ) -> Effects {
        let mut fx = Effects::new();
        if new_view <= self.view || !self.env.membership.is_acceptor(from) {
            return fx;
        }
        let m = &self.env.membership;
        if valid_suspicions(&suspicions, new_view - 1, &self.env.keyring, m) <= m.f as usize {
            return fx;
        }
        if change_proof.acceptor != from || change_proof.new_view != new_view || !change_proof.verify(&self.env.keyring) {
            return fx;
        }
        let me = self.id();
        let entry = self.new_view.entry(new_view).or_default();
        entry.insert(from, change_proof);
        if let std::collections::btree_map::Entry::Vacant(slot) = entry.entry(me) {
            let own = ViewChangeProof::sign(&self.signer, new_view);
            slot.insert(own.clone());
            let msg = Message::ViewChange {
                new_view,
                suspicions,
                change_proof: own,
            };
            fx.send(Dest::OtherAcceptors, msg, depth + 1);
        }
        self.maybe_install(new_view, &mut fx, depth + 1);
        fx
    }

    fn maybe_install(&mut self, new_view: u64, fx: &mut Effects, depth: u32) {
        if new_view <= self.view {
            return;
        }
        let Some(proofs) = self.new_view.get(&new_view) else {
            return;
        };
        if proofs.len() < self.env.membership.quorum() {
            return;
        }
        let proofs = proofs.clone();
        self.view = new_view;
        self.leader = self.env.membership.leader_of(new_view);
        self.suspicions.clear();
        self.new_view = self.new_view.split_off(&(new_view + 1));
        fx.note(Note::ViewInstalled { view: new_view });
        fx.send(Dest::To(self.leader), Message::Leader { view: new_view, proofs }, depth);
    }

    // ---- agreement ----

    fn advance_to(&mut self, ballot: Ballot) {
        self.bal_a = ballot;
        self.val_a = None;
        self.proofs = self.proofs.split_off(&ballot);
        self.p2b_sent.retain(|(b, _)| *b >= ballot);
    }

    pub fn on_p1a(&mut self, from: ProcessId, ballot: Ballot, view: u64, depth: u32) -> Effects {
        let mut fx = Effects::new();
        if self.paused.is_some() || view != self.view || from != self.leader || self.bal_a >= ballot {
            return fx;
        }
        let msg = Message::P1b {
            ballot,
            bal_a: self.bal_a,
            proven: self.proven.clone(),
            val_a: self.val_a.clone().unwrap_or_default(),
            proven_cert: if self.proven.is_empty() {
                None
            } else {
                self.proven_cert.clone()
            },
        };
        fx.send(Dest::To(from), msg, depth + 1);
        self.advance_to(ballot);
        fx
    }

    pub fn on_fast(&mut self, from: ProcessId, ballot: Ballot, view: u64) -> Effects {
        if self.paused.is_some() || view != self.view || from != self.leader {
            return Effects::new();
        }
        self.fast_bal.insert(ballot);
        if ballot > self.bal_a {
            // fast votes append to the current vote, which must extend proven.
            // Only rebase on entry: within a ballot votes must only grow.
            let keep = self
                .val_a
                .take()
                .filter(|v| self.env.oracle.eq_prefix(&self.proven, v))
                .unwrap_or_else(|| self.proven.clone());
            self.advance_to(ballot);
            self.val_a = Some(keep);
        }
        Effects::new()
    }

    pub fn on_p2a_classic(
        &mut self,
        from: ProcessId,
        ballot: Ballot,
        view: u64,
        value: CmdSequence,
        depth: u32,
    ) -> Effects {
        let mut fx = Effects::new();
        if self.paused.is_some() || view != self.view || from != self.leader {
            return fx;
        }
        if let Some(c) = self.env.first_inadmissible(&value) {
            fx.note(Note::ForgedCommand { from, id: c.id() });
            return fx;
        }
        if !value.is_empty() && value.is_universally_commutative() {
            if ballot >= self.bal_a {
                fx.send(Dest::Learners, Message::P2bUniv { ballot, value }, depth + 1);
            }
            return fx;
        }
        if ballot < self.bal_a {
            return fx;
        }
        if ballot > self.bal_a {
            self.advance_to(ballot);
        }
        if self.val_a.is_some() || self.fast_bal.contains(&ballot) {
            return fx;
        }
        if !self.env.oracle.eq_prefix(&self.proven, &value) {
            fx.note(Note::ByzantineLeaderSuspected { ballot, leader: from });
            return fx;
        }
        self.val_a = Some(value.clone());
        self.vote(ballot, value, depth + 1, &mut fx);
        fx
    }

    pub fn on_p2a_fast(&mut self, from: ProcessId, value: CmdSequence, depth: u32) -> Effects {
        let mut fx = Effects::new();
        if self.paused.is_some() || value.is_empty() || !self.fast_bal.contains(&self.bal_a) {
            return fx;
        }
        if let Some(c) = value.iter().find(|c| c.is_checkpoint() || !self.env.admissible(c)) {
            fx.note(Note::ForgedCommand { from, id: c.id() });
            return fx;
        }
        let ballot = self.bal_a;
        if value.is_universally_commutative() {
            fx.send(Dest::Learners, Message::P2bUniv { ballot, value }, depth + 1);
            return fx;
        }
        let base = self.val_a.clone().unwrap_or_else(|| self.proven.clone());
        let next = base.concat(&value);
        if next.len() == base.len() {
            return fx;
        }
        self.val_a = Some(next.clone());
        self.vote(ballot, next, depth + 1, &mut fx);
        fx
    }

    fn vote(&mut self, ballot: Ballot, value: CmdSequence, depth: u32, fx: &mut Effects) {
        let digest = self.env.digest(&value);
        let proof = VerifyProof::sign(&self.signer, ballot, digest);
        fx.note(Note::Voted {
            ballot,
            len: value.len(),
        });
        let me = self.id();
        let slot = self.proofs.entry(ballot).or_default().entry(digest).or_default();
        if slot.proofs.is_empty() {
            slot.value = value.clone();
        }
        slot.proofs.insert(me, (proof.clone(), depth));
        let msg = Message::Verify {
            view: self.view,
            ballot,
            value,
            proof,
        };
        fx.send(Dest::OtherAcceptors, msg, depth);
        self.check_quorum(ballot, digest, fx);
    }

    #[allow(clippy::too_many_arguments)]
    pub fn on_verify(
        &mut self,
        from: ProcessId,
        view: u64,
        ballot: Ballot,
        value: CmdSequence,
        proof: VerifyProof,
        depth: u32,
    ) -> Effects {
        let mut fx = Effects::new();
        // votes for a ballot this acceptor has already left are not collected:
        // it may have reported its state to a newer leader already
        if self.paused.is_some() || view != self.view || ballot < self.bal_a || !self.env.membership.is_acceptor(from) {
            return fx;
        }
        if proof.acceptor != from || proof.ballot != ballot || proof.ballot.view != ballot.view {
            return fx;
        }
        let digest = self.env.digest(&value);
        if proof.digest != digest || !proof.verify(&self.env.keyring) {
            return fx;
        }
        let slot = self.proofs.entry(ballot).or_default().entry(digest).or_default();
        if slot.proofs.is_empty() {
            slot.value = value;
        }
        slot.proofs.entry(from).or_insert((proof, depth));
        self.check_quorum(ballot, digest, &mut fx);
        fx
    }

    fn check_quorum(&mut self, ballot: Ballot, digest: Digest, fx: &mut Effects) {
        let Some(slot) = self.proofs.get(&ballot).and_then(|m| m.get(&digest)) else {
            return;
        };
        if slot.proofs.len() < self.env.membership.quorum() || self.p2b_sent.contains(&(ballot, digest)) {
            return;
        }
        let cert = ProvenCert {
            ballot,
            value: slot.value.clone(),
            proofs: slot.proofs.iter().map(|(p, (proof, _))| (*p, proof.clone())).collect(),
        };
        let depth = slot.proofs.values().map(|(_, d)| *d).max().unwrap_or(0) + 1;
        let value = slot.value.clone();
        self.p2b_sent.insert((ballot, digest));
        let extends = self.proven.is_empty()
            || ballot > self.proven_ballot
            || (ballot == self.proven_ballot
                && value.len() > self.proven.len()
                && self.env.oracle.eq_prefix(&self.proven, &value));
        if extends {
            self.proven = value.clone();
            self.proven_ballot = ballot;
            self.proven_cert = Some(cert.clone());
            fx.note(Note::Proven {
                ballot,
                len: value.len(),
            });
        }
        fx.send(
            Dest::Learners,
            Message::P2b {
                ballot,
                value: value.clone(),
                cert,
            },
            depth,
        );
        if let Some(last) = value.last() {
            if extends && last.is_checkpoint() && !self.checkpoints_done.contains(&last.id()) {
                self.paused = Some(last.id());
                fx.note(Note::CheckpointPaused { id: last.id() });
                self.maybe_resume(fx);
            }
        }
    }

    // ---- checkpoint ----

    pub fn on_checkpoint_ack(&mut self, from: ProcessId, checkpoint: CommandId) -> Effects {
        let mut fx = Effects::new();
        if !self.learners.contains(&from) || self.checkpoints_done.contains(&checkpoint) {
            return fx;
        }
        self.acks.entry(checkpoint).or_default().insert(from);
        self.maybe_resume(&mut fx);
        fx
    }

    fn maybe_resume(&mut self, fx: &mut Effects) {
        let Some(id) = self.paused else {
            return;
        };
        if self.acks.get(&id).map_or(0, BTreeSet::len) < self.ack_threshold() {
            return;
        }
        let cp = self.proven.last().expect("paused on a proven checkpoint").clone();
        self.proven = CmdSequence::single(cp.clone());
        self.val_a = Some(CmdSequence::single(cp));
        self.proofs.clear();
        self.paused = None;
        self.acks.remove(&id);
        self.checkpoints_done.insert(id);
        fx.note(Note::CheckpointReset { id });
    }
}
