//! Shared helpers for the integration tests: scenario loading, a brute-force
//! model of the command algebra, and one sample of every wire message.

#![allow(dead_code)]

use std::collections::{BTreeMap, HashSet, VecDeque};
use std::path::PathBuf;

use bgp_core::crypto::{SuspicionProof, VerifyProof, ViewChangeProof};
use bgp_core::sim::{parse_scenario, SimConfig};
use bgp_core::testutil::{checkpoint, cluster, cmd, seq, univ};
use bgp_core::{Ballot, BallotKind, CmdSequence, Command, CommandId, Message, ProcessId};

pub fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

pub fn scenario(name: &str) -> SimConfig {
    let text = std::fs::read_to_string(scenario_path(name)).unwrap_or_else(|e| panic!("{name}: {e}"));
    parse_scenario(&text).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

/// Compares `actual` with a golden file; `BGP_BLESS=1` rewrites it instead.
pub fn check_golden(name: &str, actual: &str) -> Result<(), String> {
    let path = golden_dir().join(name);
    if std::env::var_os("BGP_BLESS").is_some() {
        std::fs::create_dir_all(golden_dir()).map_err(|e| e.to_string())?;
        std::fs::write(&path, actual).map_err(|e| e.to_string())?;
        return Ok(());
    }
    let expected = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    if expected == actual {
        Ok(())
    } else {
        let line = expected
            .lines()
            .zip(actual.lines())
            .position(|(a, b)| a != b)
            .unwrap_or(expected.lines().count().min(actual.lines().count()));
        Err(format!("{name} differs from golden at line {}", line + 1))
    }
}

// ---- brute-force algebra ----
//
// Written from the definitions only: two sequences are equivalent when one
// can be turned into the other by swapping adjacent commuting commands, and
// x is an eq-prefix of y when x followed by some ordering of the remaining
// commands is equivalent to y.

pub mod brute {
    use super::*;

    pub fn interferes(a: &Command, b: &Command) -> bool {
        if a.is_universal() || b.is_universal() {
            return false;
        }
        if a.is_checkpoint() || b.is_checkpoint() {
            return true;
        }
        let hits = |w: &std::collections::BTreeSet<String>, other: &Command| {
            w.iter().any(|k| other.write_keys().contains(k) || other.read_keys().contains(k))
        };
        hits(a.write_keys(), b) || hits(b.write_keys(), a)
    }

    pub fn ids(s: &[Command]) -> Vec<CommandId> {
        s.iter().map(Command::id).collect()
    }

    /// Every id ordering reachable from `s` by adjacent commuting swaps.
    pub fn class(s: &[Command]) -> HashSet<Vec<CommandId>> {
        let mut seen: HashSet<Vec<CommandId>> = HashSet::new();
        let mut queue = VecDeque::new();
        seen.insert(ids(s));
        queue.push_back(s.to_vec());
        while let Some(cur) = queue.pop_front() {
            for i in 0..cur.len().saturating_sub(1) {
                if interferes(&cur[i], &cur[i + 1]) {
                    continue;
                }
                let mut next = cur.clone();
                next.swap(i, i + 1);
                if seen.insert(ids(&next)) {
                    queue.push_back(next);
                }
            }
        }
        seen
    }

    pub fn equivalent(a: &[Command], b: &[Command]) -> bool {
        let mut sa = a.to_vec();
        let mut sb = b.to_vec();
        sa.sort_by_key(Command::id);
        sb.sort_by_key(Command::id);
        sa == sb && class(a).contains(&ids(b))
    }

    /// `x ⊑ y` given the precomputed class of `y`.
    pub fn eq_prefix_in(x: &[Command], y: &[Command], y_class: &HashSet<Vec<CommandId>>) -> bool {
        if x.iter().any(|c| !y.contains(c)) {
            return false;
        }
        let rest: Vec<Command> = y.iter().filter(|c| !x.contains(c)).cloned().collect();
        let mut found = false;
        permutations(&rest, &mut |z| {
            if !found {
                let mut candidate = ids(x);
                candidate.extend(z.iter().map(Command::id));
                found = y_class.contains(&candidate);
            }
        });
        found
    }

    pub fn eq_prefix(x: &[Command], y: &[Command]) -> bool {
        eq_prefix_in(x, y, &class(y))
    }

    /// Smallest id ordering in the class, lexicographically.
    pub fn canonical(s: &[Command]) -> Vec<CommandId> {
        class(s).into_iter().min().unwrap_or_default()
    }

    pub fn permutations<T: Clone>(items: &[T], visit: &mut impl FnMut(&[T])) {
        fn go<T: Clone>(items: &mut Vec<T>, k: usize, visit: &mut impl FnMut(&[T])) {
            if k == items.len() {
                visit(items);
                return;
            }
            for i in k..items.len() {
                items.swap(k, i);
                go(items, k + 1, visit);
                items.swap(k, i);
            }
        }
        let mut v = items.to_vec();
        go(&mut v, 0, visit);
    }

    /// Every ordered selection of distinct elements of `items`, including
    /// the empty one.
    pub fn arrangements<T: Clone>(items: &[T], visit: &mut impl FnMut(&[T])) {
        let n = items.len();
        for mask in 0u32..(1 << n) {
            let subset: Vec<T> = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| items[i].clone()).collect();
            permutations(&subset, visit);
        }
    }
}

/// Footprint shapes used by the exhaustive algebra check: a read or a write
/// of one of three keys, plus a universal command.
pub const SHAPES: usize = 7;

pub fn shaped(shape: usize, seqno: u64) -> Command {
    const KEYS: [&str; 3] = ["x", "y", "z"];
    match shape {
        6 => univ(seqno),
        s if s % 2 == 0 => cmd(seqno, &[KEYS[s / 2]], &[]),
        s => cmd(seqno, &[], &[KEYS[s / 2]]),
    }
}

// ---- wire samples ----

/// One instance of every message variant, with signed proofs where the
/// variant carries them.
pub fn sample_messages() -> Vec<Message> {
    let c = cluster(4, 1);
    let (a, b, u) = (cmd(1, &["x"], &["y"]), cmd(2, &[], &["x"]), univ(3));
    let value = seq(&[&a, &b]);
    let fast = Ballot::new(0, 1, BallotKind::Fast);
    let classic = Ballot::new(1, 2, BallotKind::Classic);
    let cert = c.cert(classic, &value, &[0, 1, 2]);
    let d = c.env.digest(&value);
    let suspicions: BTreeMap<ProcessId, SuspicionProof> = (0..2)
        .map(|i| (ProcessId(i), SuspicionProof::sign(&c.acceptors[i as usize], 0)))
        .collect();
    let changes: BTreeMap<ProcessId, ViewChangeProof> = (0..3)
        .map(|i| (ProcessId(i), ViewChangeProof::sign(&c.acceptors[i as usize], 1)))
        .collect();
    vec![
        Message::Propose { prop: value.clone() },
        Message::Ballot { kind: BallotKind::Fast },
        Message::Fast { ballot: fast, view: 0 },
        Message::P1a { ballot: classic, view: 1 },
        Message::P1b {
            ballot: classic,
            bal_a: fast,
            proven: value.clone(),
            val_a: seq(&[&a, &b, &u]),
            proven_cert: Some(cert.clone()),
        },
        Message::P1b {
            ballot: classic,
            bal_a: Ballot::ZERO,
            proven: CmdSequence::new(),
            val_a: CmdSequence::new(),
            proven_cert: None,
        },
        Message::P2aClassic {
            ballot: classic,
            view: 1,
            value: seq(&[&checkpoint(9), &a]),
        },
        Message::P2aFast { value: seq(&[&u]) },
        Message::Verify {
            view: 1,
            ballot: classic,
            value: value.clone(),
            proof: VerifyProof::sign(&c.acceptors[3], classic, d),
        },
        Message::P2b { ballot: classic, value, cert },
        Message::P2bUniv { ballot: fast, value: seq(&[&u]) },
        Message::Suspicion {
            view: 0,
            proof: SuspicionProof::sign(&c.acceptors[1], 0),
        },
        Message::ViewChange {
            new_view: 1,
            suspicions,
            change_proof: ViewChangeProof::sign(&c.acceptors[2], 1),
        },
        Message::Leader { view: 1, proofs: changes },
        Message::CheckpointAck {
            checkpoint: CommandId::new(ProcessId(0), 7),
        },
    ]
}
