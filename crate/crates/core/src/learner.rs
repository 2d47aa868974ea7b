//! Learner: collects phase 2b votes and merges decided sequences into its
//! learned state, acknowledging checkpoints back to the acceptors.

use std::collections::{BTreeMap, BTreeSet};

use crate::command::{Command, CommandId, ProcessId};
use crate::crypto::{Digest, ProvenCert};
use crate::effects::{Dest, Effects, LearnPath, Note};
use crate::env::RoleEnv;
use crate::sequence::CmdSequence;
use crate::wire::{Ballot, Message};

#[derive(Debug, Default)]
struct Tally {
    value: CmdSequence,
    senders: BTreeMap<ProcessId, u32>,
}

#[derive(Debug)]
struct Pending {
    value: CmdSequence,
    depth: u32,
    path: LearnPath,
    senders: usize,
}

#[derive(Debug)]
pub struct Learner {
    id: ProcessId,
    env: RoleEnv,
    certified: BTreeMap<(Ballot, Digest), Tally>,
    universal: BTreeMap<(Ballot, Digest), Tally>,
    decided: BTreeSet<(Ballot, Digest, bool)>,
    learned: CmdSequence,
    executed: Vec<Command>,
    executed_ids: BTreeSet<CommandId>,
    buffered: Vec<Pending>,
}

impl Learner {
    pub fn new(id: ProcessId, env: RoleEnv) -> Self {
        Self {
            id,
            env,
            certified: BTreeMap::new(),
            universal: BTreeMap::new(),
            decided: BTreeSet::new(),
            learned: CmdSequence::new(),
            executed: Vec::new(),
            executed_ids: BTreeSet::new(),
            buffered: Vec::new(),
        }
    }

    pub fn id(&self) -> ProcessId {
        self.id
    }

    /// Learned sequence since the last checkpoint.
    pub fn learned(&self) -> &CmdSequence {
        &self.learned
    }

    /// Every command ever learned, in execution order.
    pub fn executed(&self) -> &[Command] {
        &self.executed
    }

    pub fn has_executed(&self, id: CommandId) -> bool {
        self.executed_ids.contains(&id)
    }

    pub fn buffered_len(&self) -> usize {
        self.buffered.len()
    }

    pub fn handle(&mut self, from: ProcessId, msg: Message, depth: u32) -> Effects {
        match msg {
            Message::P2b { ballot, value, cert } => self.on_p2b(from, ballot, value, cert, depth),
            Message::P2bUniv { ballot, value } => self.on_p2b_univ(from, ballot, value, depth),
            _ => Effects::new(),
        }
    }

    pub fn on_p2b(&mut self, from: ProcessId, ballot: Ballot, value: CmdSequence, cert: ProvenCert, depth: u32) -> Effects {
        let mut fx = Effects::new();
        let m = &self.env.membership;
        if !m.is_acceptor(from) {
            return fx;
        }
        let digest = self.env.digest(&value);
        if self.decided.contains(&(ballot, digest, false)) {
            return fx;
        }
        if cert.ballot != ballot || cert.ballot.kind != ballot.kind {
            fx.note(Note::InvalidCertificate {
                from,
                what: "ballot mismatch",
            });
            return fx;
        }
        if cert.valid_proofs(&digest, &self.env.keyring, m) < m.quorum() {
            fx.note(Note::InvalidCertificate {
                from,
                what: "too few valid proofs",
            });
            return fx;
        }
        let quorum = m.quorum();
        let tally = self.certified.entry((ballot, digest)).or_default();
        if tally.senders.is_empty() {
            tally.value = value;
        }
        tally.senders.entry(from).or_insert(depth);
        if tally.senders.len() >= quorum {
            let tally = self.certified.remove(&(ballot, digest)).expect("present");
            self.decided.insert((ballot, digest, false));
            let pending = Pending {
                depth: tally.senders.values().copied().max().unwrap_or(0),
                senders: tally.senders.len(),
                value: tally.value,
                path: LearnPath::Certified(ballot.kind),
            };
            self.apply(pending, &mut fx);
        }
        fx
    }

    pub fn on_p2b_univ(&mut self, from: ProcessId, ballot: Ballot, value: CmdSequence, depth: u32) -> Effects {
        let mut fx = Effects::new();
        if !self.env.membership.is_acceptor(from) || value.is_empty() || !value.is_universally_commutative() {
            return fx;
        }
        let digest = self.env.digest(&value);
        if self.decided.contains(&(ballot, digest, true)) {
            return fx;
        }
        if let Some(c) = self.env.first_inadmissible(&value) {
            fx.note(Note::ForgedCommand { from, id: c.id() });
            return fx;
        }
        let tally = self.universal.entry((ballot, digest)).or_default();
        if tally.senders.is_empty() {
            tally.value = value;
        }
        tally.senders.entry(from).or_insert(depth);
        if tally.senders.len() > self.env.membership.f as usize {
            let tally = self.universal.remove(&(ballot, digest)).expect("present");
            self.decided.insert((ballot, digest, true));
            let pending = Pending {
                depth: tally.senders.values().copied().max().unwrap_or(0),
                senders: tally.senders.len(),
                value: tally.value,
                path: LearnPath::Universal(ballot.kind),
            };
            self.merge(pending, &mut fx);
        }
        fx
    }

    fn apply(&mut self, p: Pending, fx: &mut Effects) {
        let current_head = self.learned.first().filter(|c| c.is_checkpoint()).map(Command::id);
        match p.value.first() {
            Some(head) if head.is_checkpoint() => {
                if !self.executed_ids.contains(&head.id()) {
                    fx.note(Note::BufferedPostCheckpoint { head: head.id() });
                    self.buffered.push(p);
                } else if current_head == Some(head.id()) {
                    self.merge(p, fx);
                } else {
                    fx.note(Note::DiscardedPreCheckpoint);
                }
            }
            _ if current_head.is_some() => fx.note(Note::DiscardedPreCheckpoint),
            _ => self.merge(p, fx),
        }
    }

    fn merge(&mut self, p: Pending, fx: &mut Effects) {
        let mut added = Vec::new();
        let mut last_checkpoint = None;
        for c in p.value.iter() {
            if self.executed_ids.insert(c.id()) {
                self.learned.push_raw(c.clone());
                self.executed.push(c.clone());
                added.push(c.id());
                if c.is_checkpoint() {
                    last_checkpoint = Some(c.id());
                }
            }
        }
        if added.is_empty() {
            return;
        }
        fx.note(Note::Learned {
            commands: added,
            depth: p.depth,
            path: p.path,
            senders: p.senders,
        });
        if let Some(id) = last_checkpoint {
            let at = self.learned.iter().position(|c| c.id() == id).expect("just appended");
            let tail: CmdSequence = self.learned.iter().skip(at).cloned().collect();
            self.learned = tail;
            fx.note(Note::CheckpointExecuted { id });
            fx.send(Dest::Acceptors, Message::CheckpointAck { checkpoint: id }, p.depth + 1);
            for b in std::mem::take(&mut self.buffered) {
                self.apply(b, fx);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{cluster, cmd, seq, univ, TestCluster};
    use crate::wire::BallotKind;

    fn learner(c: &TestCluster) -> Learner {
        Learner::new(ProcessId(50), c.env.clone())
    }

    fn b(n: u64) -> Ballot {
        Ballot::new(0, n, BallotKind::Classic)
    }

    fn deliver(l: &mut Learner, c: &TestCluster, ballot: Ballot, value: &CmdSequence, from: &[u32]) -> Effects {
        let cert = c.cert(ballot, value, &[0, 1, 2]);
        let mut fx = Effects::new();
        for &i in from {
            fx.extend(l.on_p2b(ProcessId(i), ballot, value.clone(), cert.clone(), 5));
        }
        fx
    }

    #[test]
    fn learns_after_quorum_of_matching_p2b() {
        let c = cluster(4, 1);
        let mut l = learner(&c);
        let x = cmd(0, &[], &["x"]);
        deliver(&mut l, &c, b(1), &seq(&[&x]), &[0, 1]);
        assert!(l.learned().is_empty());
        let fx = deliver(&mut l, &c, b(1), &seq(&[&x]), &[2]);
        assert_eq!(l.learned(), &seq(&[&x]));
        assert!(matches!(&fx.notes[0], Note::Learned { depth: 5, senders: 3, .. }));
    }

    #[test]
    fn duplicate_sender_counts_once() {
        let c = cluster(4, 1);
        let mut l = learner(&c);
        let x = cmd(0, &[], &["x"]);
        deliver(&mut l, &c, b(1), &seq(&[&x]), &[0, 0, 0, 1]);
        assert!(l.learned().is_empty());
    }

    #[test]
    fn certificate_with_too_few_proofs_is_rejected() {
        let c = cluster(4, 1);
        let mut l = learner(&c);
        let v = seq(&[&cmd(0, &[], &["x"])]);
        let cert = c.cert(b(1), &v, &[0, 1]);
        for i in 0..3 {
            let fx = l.on_p2b(ProcessId(i), b(1), v.clone(), cert.clone(), 5);
            assert!(matches!(fx.notes[0], Note::InvalidCertificate { .. }));
        }
        assert!(l.learned().is_empty());
    }

    #[test]
    fn certificate_for_other_value_is_rejected() {
        let c = cluster(4, 1);
        let mut l = learner(&c);
        let v = seq(&[&cmd(0, &[], &["x"])]);
        let w = seq(&[&cmd(1, &[], &["x"])]);
        let cert = c.cert(b(1), &w, &[0, 1, 2]);
        let fx = l.on_p2b(ProcessId(0), b(1), v, cert, 5);
        assert!(matches!(fx.notes[0], Note::InvalidCertificate { .. }));
    }

    #[test]
    fn merge_is_idempotent_and_extends() {
        let c = cluster(4, 1);
        let mut l = learner(&c);
        let (x, y) = (cmd(0, &[], &["x"]), cmd(1, &[], &["y"]));
        deliver(&mut l, &c, b(1), &seq(&[&x]), &[0, 1, 2]);
        deliver(&mut l, &c, b(2), &seq(&[&x]), &[0, 1, 2]);
        assert_eq!(l.executed().len(), 1);
        deliver(&mut l, &c, b(3), &seq(&[&x, &y]), &[0, 1, 2]);
        assert_eq!(l.learned(), &seq(&[&x, &y]));
    }

    #[test]
    fn universal_needs_f_plus_one() {
        let c = cluster(4, 1);
        let mut l = learner(&c);
        let u = seq(&[&univ(7)]);
        l.on_p2b_univ(ProcessId(0), b(1), u.clone(), 2);
        assert!(l.learned().is_empty());
        l.on_p2b_univ(ProcessId(0), b(1), u.clone(), 2);
        assert!(l.learned().is_empty());
        let fx = l.on_p2b_univ(ProcessId(1), b(1), u.clone(), 2);
        assert_eq!(l.learned(), &u);
        assert!(matches!(&fx.notes[0], Note::Learned { path: LearnPath::Universal(_), depth: 2, .. }));
    }

    #[test]
    fn non_universal_p2b_univ_is_ignored() {
        let c = cluster(4, 1);
        let mut l = learner(&c);
        let v = seq(&[&cmd(0, &[], &["x"])]);
        for i in 0..4 {
            l.on_p2b_univ(ProcessId(i), b(1), v.clone(), 2);
        }
        assert!(l.learned().is_empty());
    }

    #[test]
    fn checkpoint_acks_and_trims_learned() {
        let c = cluster(4, 1);
        let mut l = learner(&c);
        let x = cmd(0, &[], &["x"]);
        let cp = c.checkpoint(0, 0);
        let fx = deliver(&mut l, &c, b(1), &seq(&[&x, &cp]), &[0, 1, 2]);
        let ack = fx.out.iter().find(|o| o.msg.name() == "CHECKPOINT_ACK").unwrap();
        assert_eq!(ack.dest, Dest::Acceptors);
        assert_eq!(l.learned(), &seq(&[&cp]));
        assert_eq!(l.executed().len(), 2);
    }

    #[test]
    fn post_checkpoint_value_waits_for_checkpoint() {
        let c = cluster(4, 1);
        let mut l = learner(&c);
        let (x, y) = (cmd(0, &[], &["x"]), cmd(1, &[], &["y"]));
        let cp = c.checkpoint(0, 0);
        let fx = deliver(&mut l, &c, b(2), &seq(&[&cp, &y]), &[0, 1, 2]);
        assert!(matches!(fx.notes[0], Note::BufferedPostCheckpoint { .. }));
        assert_eq!(l.buffered_len(), 1);
        deliver(&mut l, &c, b(1), &seq(&[&x, &cp]), &[0, 1, 2]);
        assert_eq!(l.buffered_len(), 0);
        assert_eq!(l.learned(), &seq(&[&cp, &y]));
        let ids: Vec<_> = l.executed().iter().map(Command::id).collect();
        assert_eq!(ids, vec![x.id(), cp.id(), y.id()]);
    }

    #[test]
    fn pre_checkpoint_value_after_checkpoint_is_discarded() {
        let c = cluster(4, 1);
        let mut l = learner(&c);
        let (x, z) = (cmd(0, &[], &["x"]), cmd(2, &[], &["z"]));
        let cp = c.checkpoint(0, 0);
        deliver(&mut l, &c, b(1), &seq(&[&x, &cp]), &[0, 1, 2]);
        let fx = deliver(&mut l, &c, b(1), &seq(&[&x, &z]), &[0, 1, 2]);
        assert!(matches!(fx.notes[0], Note::DiscardedPreCheckpoint));
        assert_eq!(l.executed().len(), 2);
    }
}
