//! Command sequences and the algebra every role relies on: equivalence up to
//! reordering of commuting commands, eq-prefix, canonical forms, and the
//! append/merge helpers used by the leader and learners.

use std::collections::{BTreeMap, BinaryHeap, HashMap, HashSet};
use std::cmp::Reverse;
use std::fmt;

use thiserror::Error;

use crate::command::{Command, CommandId, ProcessId};
use crate::commute::CommutativityOracle;

/// An ordered list of commands.
///
/// Protocol operations keep ids unique; a raw list with repeats can still be
/// built (e.g. before [`CmdSequence::remove_duplicates`]).
#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct CmdSequence {
    items: Vec<Command>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SequenceError {
    #[error("proven sequences from {a} and {b} are neither equivalent nor extensions of one another")]
    IncomparableProvenSequences { a: ProcessId, b: ProcessId },
}

impl CmdSequence {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn single(c: Command) -> Self {
        Self { items: vec![c] }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Command> {
        self.items.iter()
    }

    pub fn as_slice(&self) -> &[Command] {
        &self.items
    }

    pub fn first(&self) -> Option<&Command> {
        self.items.first()
    }

    pub fn last(&self) -> Option<&Command> {
        self.items.last()
    }

    pub fn ids(&self) -> impl Iterator<Item = CommandId> + '_ {
        self.items.iter().map(Command::id)
    }

    pub fn contains_id(&self, id: CommandId) -> bool {
        self.items.iter().any(|c| c.id() == id)
    }

    pub fn has_duplicates(&self) -> bool {
        let mut seen = HashSet::with_capacity(self.items.len());
        !self.items.iter().all(|c| seen.insert(c.id()))
    }

    /// Raw append; does not deduplicate.
    pub fn push_raw(&mut self, c: Command) {
        self.items.push(c);
    }

    /// Raw concatenation; does not deduplicate.
    pub fn extend_raw(&mut self, other: &CmdSequence) {
        self.items.extend(other.items.iter().cloned());
    }

    /// `self • other`: appends the commands of `other` whose id is not
    /// already present.
    pub fn concat(&self, other: &CmdSequence) -> CmdSequence {
        let mut seen: HashSet<CommandId> = self.ids().collect();
        let mut items = self.items.clone();
        for c in &other.items {
            if seen.insert(c.id()) {
                items.push(c.clone());
            }
        }
        CmdSequence { items }
    }

    /// The learner's merge: walk `new` and append every command `old` does
    /// not contain yet.
    pub fn merge_sequences(old: &CmdSequence, new: &CmdSequence) -> CmdSequence {
        let mut out = old.clone();
        for c in &new.items {
            if !out.contains_id(c.id()) {
                out.items.push(c.clone());
            }
        }
        out
    }

    /// Keeps the first occurrence of each id.
    pub fn remove_duplicates(&self) -> CmdSequence {
        let mut seen = HashSet::with_capacity(self.items.len());
        CmdSequence {
            items: self.items.iter().filter(|c| seen.insert(c.id())).cloned().collect(),
        }
    }

    /// Commands of `self` whose id does not occur in `other`, in `self`'s order.
    pub fn without(&self, other: &CmdSequence) -> CmdSequence {
        let drop: HashSet<CommandId> = other.ids().collect();
        CmdSequence {
            items: self.items.iter().filter(|c| !drop.contains(&c.id())).cloned().collect(),
        }
    }

    /// Vacuously true for the empty sequence.
    pub fn is_universally_commutative(&self) -> bool {
        self.items.iter().all(Command::is_universal)
    }

    pub fn reversed(&self) -> CmdSequence {
        CmdSequence {
            items: self.items.iter().rev().cloned().collect(),
        }
    }

    pub fn prefix(&self, n: usize) -> CmdSequence {
        CmdSequence {
            items: self.items[..n.min(self.items.len())].to_vec(),
        }
    }
}

impl From<Vec<Command>> for CmdSequence {
    fn from(items: Vec<Command>) -> Self {
        CmdSequence { items }
    }
}

impl FromIterator<Command> for CmdSequence {
    fn from_iter<I: IntoIterator<Item = Command>>(iter: I) -> Self {
        CmdSequence {
            items: iter.into_iter().collect(),
        }
    }
}

impl<'a> IntoIterator for &'a CmdSequence {
    type Item = &'a Command;
    type IntoIter = std::slice::Iter<'a, Command>;

    fn into_iter(self) -> Self::IntoIter {
        self.items.iter()
    }
}

impl fmt::Debug for CmdSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.items.iter()).finish()
    }
}

impl CommutativityOracle {
    /// Unique representative of `s`'s equivalence class: the linear extension
    /// of the interference order induced by `s` that always emits the
    /// smallest available id first.
    pub fn canonicalize(&self, s: &CmdSequence) -> CmdSequence {
        let n = s.len();
        if n < 2 {
            return s.clone();
        }
        let items = s.as_slice();
        let mut indegree = vec![0usize; n];
        let mut successors: Vec<Vec<usize>> = vec![Vec::new(); n];
        for i in 0..n {
            for j in (i + 1)..n {
                if self.interferes(&items[i], &items[j]) {
                    successors[i].push(j);
                    indegree[j] += 1;
                }
            }
        }
        let mut ready: BinaryHeap<Reverse<(CommandId, usize)>> = indegree
            .iter()
            .enumerate()
            .filter(|(_, d)| **d == 0)
            .map(|(i, _)| Reverse((items[i].id(), i)))
            .collect();
        let mut out = Vec::with_capacity(n);
        while let Some(Reverse((_, i))) = ready.pop() {
            out.push(items[i].clone());
            for &j in &successors[i] {
                indegree[j] -= 1;
                if indegree[j] == 0 {
                    ready.push(Reverse((items[j].id(), j)));
                }
            }
        }
        CmdSequence { items: out }
    }

    /// `s1 ~ s2`: same commands, same relative order of every interfering pair.
    pub fn equivalent(&self, s1: &CmdSequence, s2: &CmdSequence) -> bool {
        if s1.len() != s2.len() {
            return false;
        }
        if s1 == s2 {
            return true;
        }
        self.canonicalize(s1) == self.canonicalize(s2)
    }

    /// `x ⊑ y`: some extension of `x` is equivalent to `y`.
    ///
    /// This requires the commands of `y` restricted to `x` to be equivalent
    /// to `x`, and additionally that no command of `y` outside `x` is ordered
    /// before a command of `x` it interferes with.
    pub fn eq_prefix(&self, x: &CmdSequence, y: &CmdSequence) -> bool {
        if x.is_empty() {
            return true;
        }
        if x.len() > y.len() {
            return false;
        }
        let positions: HashMap<CommandId, usize> =
            y.iter().enumerate().map(|(i, c)| (c.id(), i)).collect();
        let mut in_x = vec![false; y.len()];
        for c in x {
            match positions.get(&c.id()) {
                Some(&p) if y.items[p] == *c => in_x[p] = true,
                _ => return false,
            }
        }
        let restricted: CmdSequence = y
            .iter()
            .zip(&in_x)
            .filter(|(_, keep)| **keep)
            .map(|(c, _)| c.clone())
            .collect();
        if !self.equivalent(x, &restricted) {
            return false;
        }
        // an outside command may not precede an x command it interferes with
        for (pos_c, c) in y.iter().enumerate() {
            if in_x[pos_c] {
                continue;
            }
            for (pos_a, a) in y.iter().enumerate().skip(pos_c + 1) {
                if in_x[pos_a] && self.interferes(a, c) {
                    return false;
                }
            }
        }
        true
    }

    /// True iff the two sequences can be extended to equivalent sequences.
    pub fn compatible(&self, a: &CmdSequence, b: &CmdSequence) -> bool {
        self.eq_prefix(b, &a.concat(b))
    }

    /// Largest of a set of mutually comparable proven sequences. Ties in
    /// length are equivalent, and the canonical representative is returned.
    pub fn largest_seq(
        &self,
        proven: &BTreeMap<ProcessId, CmdSequence>,
    ) -> Result<CmdSequence, SequenceError> {
        let mut ordered: Vec<(&ProcessId, &CmdSequence)> = proven.iter().collect();
        ordered.sort_by_key(|(p, s)| (s.len(), **p));
        for (i, (pa, sa)) in ordered.iter().enumerate() {
            for (pb, sb) in ordered.iter().skip(i + 1) {
                if !self.eq_prefix(sa, sb) {
                    return Err(SequenceError::IncomparableProvenSequences { a: **pa, b: **pb });
                }
            }
        }
        let Some((_, longest)) = ordered.last() else {
            return Ok(CmdSequence::new());
        };
        let ties = ordered.iter().filter(|(_, s)| s.len() == longest.len()).count();
        if ties > 1 {
            Ok(self.canonicalize(longest))
        } else {
            Ok((*longest).clone())
        }
    }
}
