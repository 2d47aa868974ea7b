//! Byzantine behaviours, written as filters over a correct role's traffic.
//! An adversary holds only its own signing key.

use crate::command::{Command, CommandId, Footprint, ProcessId};
use crate::crypto::{Signer, SuspicionProof, VerifyProof};
use crate::effects::Dest;
use crate::env::RoleEnv;
use crate::sequence::CmdSequence;
use crate::wire::Message;

use super::config::Strategy;

/// One message as it actually leaves an adversary.
#[derive(Clone, Debug)]
pub struct Emission {
    pub dst: ProcessId,
    pub msg: Message,
    pub depth: u32,
    /// Set on phase 2a values rewritten by the non-extension strategy.
    pub tainted: bool,
}

/// Seqnos of forged commands start here, far from honest ones.
const FORGED_BASE: u64 = 1 << 40;

#[derive(Debug)]
pub struct Adversary {
    strategy: Strategy,
    signer: Signer,
    env: RoleEnv,
    forged: u64,
}

fn swap_last_two(s: &CmdSequence) -> CmdSequence {
    let mut items = s.as_slice().to_vec();
    let n = items.len();
    if n >= 2 {
        items.swap(n - 1, n - 2);
    }
    items.into_iter().collect()
}

impl Adversary {
    pub fn new(strategy: Strategy, signer: Signer, env: RoleEnv) -> Self {
        Self {
            strategy,
            signer,
            env,
            forged: 0,
        }
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    pub fn accepts_input(&self) -> bool {
        self.strategy != Strategy::Silent
    }

    /// A command whose signature does not match its content.
    pub fn forge(&mut self) -> Command {
        let id = CommandId::new(self.signer.id(), FORGED_BASE + self.forged);
        self.forged += 1;
        let fp = Footprint::writes(["k0"]);
        let honest = Command::signed(id, b"honest".to_vec(), fp.clone(), false, self.signer.keys(), self.signer.provider())
            .expect("plain command");
        Command::from_parts(id, b"forged".to_vec(), fp, false, honest.signature().clone())
    }

    fn verify_for(&self, ballot: crate::wire::Ballot, view: u64, value: CmdSequence) -> Message {
        let digest = self.env.digest(&value);
        Message::Verify {
            view,
            ballot,
            proof: VerifyProof::sign(&self.signer, ballot, digest),
            value,
        }
    }

    /// Rewrites one outgoing message to `dst`; `ordinal` is the position of
    /// `dst` among the recipients of the original send.
    pub fn transform(&mut self, ordinal: usize, dst: ProcessId, msg: Message, depth: u32) -> Vec<Emission> {
        let keep = |msg: Message| Emission {
            dst,
            msg,
            depth,
            tainted: false,
        };
        let me = self.signer.id();
        match (self.strategy, msg) {
            (Strategy::Silent, _) => vec![],
            (
                Strategy::OmitP1bCommands,
                Message::P1b {
                    ballot,
                    bal_a,
                    proven,
                    val_a,
                    proven_cert,
                },
            ) => vec![keep(Message::P1b {
                ballot,
                bal_a,
                proven,
                val_a: val_a.prefix(val_a.len() / 2),
                proven_cert,
            })],
            (Strategy::EquivocateLeader, Message::P2aClassic { ballot, view, value }) if value.len() >= 2 => {
                let value = if ordinal % 2 == 1 { swap_last_two(&value) } else { value };
                vec![keep(Message::P2aClassic { ballot, view, value })]
            }
            (Strategy::EquivocateLeader, Message::Verify { view, ballot, value, proof }) if proof.acceptor == me => {
                let other = self.verify_for(ballot, view, swap_last_two(&value));
                vec![keep(Message::Verify { view, ballot, value, proof }), keep(other)]
            }
            (Strategy::NonExtensionLeader, Message::P2aClassic { ballot, view, value }) => {
                if value.len() < 2 {
                    return vec![];
                }
                let rest: CmdSequence = value.iter().skip(1).cloned().collect();
                vec![Emission {
                    dst,
                    msg: Message::P2aClassic {
                        ballot,
                        view,
                        value: rest.reversed(),
                    },
                    depth,
                    tainted: true,
                }]
            }
            (Strategy::DoubleVoteAcceptor, Message::Verify { view, ballot, value, proof }) if proof.acceptor == me => {
                let other = self.verify_for(ballot, view, value.reversed());
                vec![keep(Message::Verify { view, ballot, value, proof }), keep(other)]
            }
            (
                Strategy::ForgeCommand,
                Message::P1b {
                    ballot,
                    bal_a,
                    proven,
                    val_a,
                    proven_cert,
                },
            ) => {
                let forged = CmdSequence::single(self.forge());
                vec![keep(Message::P1b {
                    ballot,
                    bal_a,
                    proven,
                    val_a: val_a.concat(&forged),
                    proven_cert,
                })]
            }
            (Strategy::ForgeCommand, Message::P2aClassic { ballot, view, value }) => {
                let forged = CmdSequence::single(self.forge());
                vec![keep(Message::P2aClassic {
                    ballot,
                    view,
                    value: value.concat(&forged),
                })]
            }
            (_, msg) => vec![keep(msg)],
        }
    }

    /// Unprompted traffic, emitted on the monitor's clock.
    pub fn tick(&mut self, view: u64, leader: ProcessId) -> Vec<(Dest, Message)> {
        match self.strategy {
            Strategy::FalseSuspector if self.env.membership.is_acceptor(self.signer.id()) => {
                let proof = SuspicionProof::sign(&self.signer, view);
                vec![(Dest::OtherAcceptors, Message::Suspicion { view, proof })]
            }
            Strategy::ForgeCommand => {
                let value = CmdSequence::single(self.forge());
                vec![
                    (Dest::Acceptors, Message::P2aFast { value: value.clone() }),
                    (Dest::To(leader), Message::Propose { prop: value }),
                ]
            }
            _ => vec![],
        }
    }
}
