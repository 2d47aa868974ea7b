//! The interference relation between commands.

use std::collections::BTreeSet;

use crate::command::{Command, CommandId};

/// Decides which command pairs must be totally ordered.
///
/// Whatever the mode, a universal command commutes with everything and the
/// checkpoint marker interferes with every non-universal command.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub enum CommutativityOracle {
    /// Two commands interfere when one writes a key the other reads or writes.
    #[default]
    KeySet,
    /// Interference is an explicit set of unordered id pairs.
    Explicit(BTreeSet<(CommandId, CommandId)>),
}

impl CommutativityOracle {
    pub fn keyset() -> Self {
        CommutativityOracle::KeySet
    }

    /// Builds an explicit relation; pairs are stored normalized so the
    /// relation is symmetric by construction.
    pub fn explicit(pairs: impl IntoIterator<Item = (CommandId, CommandId)>) -> Self {
        CommutativityOracle::Explicit(
            pairs
                .into_iter()
                .filter(|(a, b)| a != b)
                .map(|(a, b)| if a <= b { (a, b) } else { (b, a) })
                .collect(),
        )
    }

    pub fn commute(&self, a: &Command, b: &Command) -> bool {
        if a.is_universal() || b.is_universal() {
            return true;
        }
        if a.is_checkpoint() || b.is_checkpoint() {
            return false;
        }
        match self {
            CommutativityOracle::KeySet => {
                let (fa, fb) = (a.footprint(), b.footprint());
                fa.writes.is_disjoint(&fb.writes)
                    && fa.writes.is_disjoint(&fb.reads)
                    && fb.writes.is_disjoint(&fa.reads)
            }
            CommutativityOracle::Explicit(rel) => {
                let (x, y) = (a.id(), b.id());
                let key = if x <= y { (x, y) } else { (y, x) };
                !rel.contains(&key)
            }
        }
    }

    pub fn interferes(&self, a: &Command, b: &Command) -> bool {
        !self.commute(a, b)
    }
}
