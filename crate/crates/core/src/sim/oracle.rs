//! Global invariant checker. It sees only snapshots of learner output and
//! the registry of commands that were really proposed.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use crate::command::{Command, CommandId, ProcessId};
use crate::commute::CommutativityOracle;
use crate::sequence::CmdSequence;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Property {
    Consistency,
    Nontriviality,
    Stability,
    Liveness,
    /// Two valid certificates at one ballot that no single history explains.
    CertAudit,
    /// A correct acceptor voted for a value that does not extend its proven
    /// sequence.
    PrefixGuard,
    /// A command with a bad signature was learned.
    Forgery,
    /// A correct acceptor's successive votes in a ballot did not extend one
    /// another.
    VoteMonotonicity,
}

impl Property {
    pub fn name(self) -> &'static str {
        match self {
            Property::Consistency => "consistency",
            Property::Nontriviality => "nontriviality",
            Property::Stability => "stability",
            Property::Liveness => "liveness",
            Property::CertAudit => "cert-audit",
            Property::PrefixGuard => "prefix-guard",
            Property::Forgery => "forgery",
            Property::VoteMonotonicity => "vote-monotonicity",
        }
    }

    /// The three safety properties of the problem statement.
    pub fn is_core_safety(self) -> bool {
        matches!(self, Property::Consistency | Property::Nontriviality | Property::Stability)
    }
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub step: u64,
    pub property: Property,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Verdict {
    pub violations: Vec<Violation>,
}

impl Verdict {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn count(&self, p: Property) -> usize {
        self.violations.iter().filter(|v| v.property == p).count()
    }
}

/// Violations past this many are counted but not kept.
const MAX_KEPT: usize = 64;

#[derive(Debug)]
pub struct InvariantOracle {
    algebra: Arc<CommutativityOracle>,
    registry: HashMap<CommandId, Command>,
    snapshots: BTreeMap<ProcessId, CmdSequence>,
    verdict: Verdict,
    dropped: usize,
}

impl InvariantOracle {
    pub fn new(algebra: Arc<CommutativityOracle>) -> Self {
        Self {
            algebra,
            registry: HashMap::new(),
            snapshots: BTreeMap::new(),
            verdict: Verdict::default(),
            dropped: 0,
        }
    }

    /// Records a command as proposed.
    pub fn register(&mut self, c: Command) {
        self.registry.insert(c.id(), c);
    }

    pub fn is_registered(&self, id: CommandId) -> bool {
        self.registry.contains_key(&id)
    }

    pub fn report(&mut self, step: u64, property: Property, detail: String) {
        if self.verdict.violations.len() < MAX_KEPT {
            self.verdict.violations.push(Violation { step, property, detail });
        } else {
            self.dropped += 1;
        }
    }

    /// Checks a learner's new output against its previous snapshot, the
    /// registry and every other learner.
    pub fn observe(&mut self, step: u64, learner: ProcessId, observed: CmdSequence) {
        let prev = self.snapshots.remove(&learner);
        if let Some(prev) = &prev {
            if !self.algebra.eq_prefix(prev, &observed) {
                self.report(step, Property::Stability, format!("{learner} output no longer extends its previous output"));
            }
        }
        let fresh: Vec<Command> = observed
            .iter()
            .filter(|c| prev.as_ref().is_none_or(|p| !p.contains_id(c.id())))
            .cloned()
            .collect();
        for c in fresh {
            if self.registry.get(&c.id()) != Some(&c) {
                self.report(step, Property::Nontriviality, format!("{learner} learned unproposed command {}", c.id()));
            }
        }
        let clashes: Vec<ProcessId> = self
            .snapshots
            .iter()
            .filter(|(other, seq)| **other != learner && !self.algebra.compatible(seq, &observed))
            .map(|(other, _)| *other)
            .collect();
        for other in clashes {
            self.report(step, Property::Consistency, format!("{learner} and {other} learned incompatible sequences"));
        }
        self.snapshots.insert(learner, observed);
    }

    /// Every id in `expected` must be in every learner's snapshot.
    pub fn check_liveness(&mut self, step: u64, learners: &[ProcessId], expected: &[CommandId]) {
        for &l in learners {
            let missing = match self.snapshots.get(&l) {
                Some(s) => expected.iter().filter(|id| !s.contains_id(**id)).count(),
                None => expected.len(),
            };
            if missing > 0 {
                self.report(step, Property::Liveness, format!("{l} is missing {missing} commands"));
            }
        }
    }

    pub fn verdict(&self) -> &Verdict {
        &self.verdict
    }

    pub fn into_verdict(self) -> Verdict {
        self.verdict
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{cmd, seq};

    fn oracle(cmds: &[&Command]) -> InvariantOracle {
        let mut o = InvariantOracle::new(Arc::new(CommutativityOracle::keyset()));
        for c in cmds {
            o.register((*c).clone());
        }
        o
    }

    #[test]
    fn commuting_orders_are_consistent() {
        let (a, b) = (cmd(0, &[], &["x"]), cmd(1, &[], &["y"]));
        let mut o = oracle(&[&a, &b]);
        o.observe(1, ProcessId(10), seq(&[&a, &b]));
        o.observe(2, ProcessId(11), seq(&[&b, &a]));
        assert!(o.verdict().passed());
    }

    #[test]
    fn interfering_opposite_orders_are_flagged() {
        let (a, c) = (cmd(0, &[], &["x"]), cmd(2, &["x"], &[]));
        let mut o = oracle(&[&a, &c]);
        o.observe(1, ProcessId(10), seq(&[&a, &c]));
        o.observe(2, ProcessId(11), seq(&[&c, &a]));
        assert_eq!(o.verdict().count(Property::Consistency), 1);
    }

    #[test]
    fn unregistered_command_is_flagged() {
        let a = cmd(0, &[], &["x"]);
        let mut o = oracle(&[]);
        o.observe(1, ProcessId(10), seq(&[&a]));
        assert_eq!(o.verdict().count(Property::Nontriviality), 1);
    }

    #[test]
    fn shrinking_output_is_flagged() {
        let (a, b) = (cmd(0, &[], &["x"]), cmd(1, &[], &["x"]));
        let mut o = oracle(&[&a, &b]);
        o.observe(1, ProcessId(10), seq(&[&a, &b]));
        o.observe(2, ProcessId(10), seq(&[&a]));
        assert_eq!(o.verdict().count(Property::Stability), 1);
    }

    #[test]
    fn liveness_counts_missing() {
        let (a, b) = (cmd(0, &[], &["x"]), cmd(1, &[], &["x"]));
        let mut o = oracle(&[&a, &b]);
        o.observe(1, ProcessId(10), seq(&[&a]));
        o.check_liveness(9, &[ProcessId(10)], &[a.id(), b.id()]);
        assert_eq!(o.verdict().count(Property::Liveness), 1);
    }
}
