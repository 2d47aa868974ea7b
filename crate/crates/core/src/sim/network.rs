//! Delivery-time model: random delays, duplication, partition windows and
//! targeted holds. Nothing is ever dropped; held traffic is released when
//! its window closes.

use std::collections::BTreeSet;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::command::ProcessId;
use crate::wire::Message;

use super::config::DelayModel;

#[derive(Debug)]
struct Partition {
    group: BTreeSet<ProcessId>,
    until: u64,
}

#[derive(Debug)]
struct Hold {
    dst: ProcessId,
    tag: u8,
    ballot: u64,
    until: u64,
}

#[derive(Debug)]
pub struct Network {
    model: DelayModel,
    sync_after: Option<u64>,
    sync_delay: u64,
    partitions: Vec<Partition>,
    holds: Vec<Hold>,
}

/// Ballot number a message is about, if any.
pub fn ballot_number(msg: &Message) -> Option<u64> {
    match msg {
        Message::Fast { ballot, .. }
        | Message::P1a { ballot, .. }
        | Message::P1b { ballot, .. }
        | Message::P2aClassic { ballot, .. }
        | Message::Verify { ballot, .. }
        | Message::P2b { ballot, .. }
        | Message::P2bUniv { ballot, .. } => Some(ballot.number),
        _ => None,
    }
}

impl Network {
    pub fn new(model: DelayModel, sync_after: Option<u64>, sync_delay: u64) -> Self {
        Self {
            model,
            sync_after,
            sync_delay: sync_delay.max(1),
            partitions: Vec::new(),
            holds: Vec::new(),
        }
    }

    pub fn partition(&mut self, group: impl IntoIterator<Item = ProcessId>, until: u64) {
        self.partitions.push(Partition {
            group: group.into_iter().collect(),
            until,
        });
    }

    pub fn hold(&mut self, dst: ProcessId, tag: u8, ballot: u64, until: u64) {
        self.holds.push(Hold { dst, tag, ballot, until });
    }

    pub fn is_synchronous(&self, now: u64) -> bool {
        self.sync_after.is_some_and(|s| now >= s)
    }

    /// Delivery times for one send; more than one means duplicates.
    pub fn schedule(&self, rng: &mut ChaCha8Rng, now: u64, src: ProcessId, dst: ProcessId, msg: &Message) -> Vec<u64> {
        let mut release = now;
        for p in &self.partitions {
            if now < p.until && p.group.contains(&src) != p.group.contains(&dst) {
                release = release.max(p.until);
            }
        }
        let number = ballot_number(msg);
        for h in &self.holds {
            if now < h.until && h.dst == dst && h.tag == msg.tag() && number == Some(h.ballot) {
                release = release.max(h.until);
            }
        }
        if self.is_synchronous(now) {
            return vec![release + rng.gen_range(1..=self.sync_delay)];
        }
        match self.model {
            DelayModel::Uniform { lo, hi } => vec![release + rng.gen_range(lo..=hi)],
            DelayModel::Adversarial { lo, hi, dup_percent } => {
                let delay = |rng: &mut ChaCha8Rng| {
                    if rng.gen_range(0..100) < 10 {
                        rng.gen_range(hi..=hi * 10)
                    } else {
                        rng.gen_range(lo..=hi)
                    }
                };
                let mut times = vec![release + delay(rng)];
                if rng.gen_range(0..100) < dup_percent {
                    times.push(release + delay(rng));
                }
                times
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wire::BallotKind;
    use rand::SeedableRng;

    fn fast() -> Message {
        Message::Ballot { kind: BallotKind::Fast }
    }

    #[test]
    fn uniform_stays_in_bounds() {
        let n = Network::new(DelayModel::Uniform { lo: 3, hi: 7 }, None, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..500 {
            let t = n.schedule(&mut rng, 100, ProcessId(0), ProcessId(1), &fast());
            assert_eq!(t.len(), 1);
            assert!((103..=107).contains(&t[0]));
        }
    }

    #[test]
    fn partition_holds_crossing_traffic_only() {
        let mut n = Network::new(DelayModel::Uniform { lo: 1, hi: 1 }, None, 1);
        n.partition([ProcessId(0)], 50);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(n.schedule(&mut rng, 10, ProcessId(0), ProcessId(1), &fast()), vec![51]);
        assert_eq!(n.schedule(&mut rng, 10, ProcessId(1), ProcessId(2), &fast()), vec![11]);
        assert_eq!(n.schedule(&mut rng, 60, ProcessId(0), ProcessId(1), &fast()), vec![61]);
    }

    #[test]
    fn adversarial_duplicates_and_sync_does_not() {
        let n = Network::new(DelayModel::Adversarial { lo: 1, hi: 5, dup_percent: 50 }, Some(1000), 2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let dups = (0..400)
            .filter(|_| n.schedule(&mut rng, 0, ProcessId(0), ProcessId(1), &fast()).len() == 2)
            .count();
        assert!(dups > 100 && dups < 300);
        for _ in 0..100 {
            let t = n.schedule(&mut rng, 1000, ProcessId(0), ProcessId(1), &fast());
            assert_eq!(t.len(), 1);
            assert!((1001..=1002).contains(&t[0]));
        }
    }
}
