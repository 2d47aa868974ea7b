//! Protocol messages and their byte codec.
//!
//! Every message starts with a one-byte tag; see `docs/wire.md` for the
//! per-variant layouts. Decoding is strict: any input accepted by
//! [`decode`] re-encodes to the same bytes.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::hash::{Hash, Hasher};

use thiserror::Error;

use crate::codec::{Decode, DecodeError, Encode, Reader, Writer};
use crate::command::{CommandId, ProcessId};
use crate::crypto::{Digest, ProvenCert, Signature, SuspicionProof, VerifyProof, ViewChangeProof};
use crate::sequence::CmdSequence;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BallotKind {
    Classic,
    Fast,
}

impl fmt::Display for BallotKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BallotKind::Classic => "classic",
            BallotKind::Fast => "fast",
        })
    }
}

/// One extension round. Ordered by `(view, number)`; `kind` rides along
/// and takes no part in comparisons.
#[derive(Clone, Copy, Debug)]
pub struct Ballot {
    pub view: u64,
    pub number: u64,
    pub kind: BallotKind,
}

impl Ballot {
    pub const ZERO: Ballot = Ballot {
        view: 0,
        number: 0,
        kind: BallotKind::Classic,
    };

    pub fn new(view: u64, number: u64, kind: BallotKind) -> Self {
        Self { view, number, kind }
    }

    fn key(&self) -> (u64, u64) {
        (self.view, self.number)
    }
}

impl Default for Ballot {
    fn default() -> Self {
        Ballot::ZERO
    }
}

impl PartialEq for Ballot {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl Eq for Ballot {}

impl PartialOrd for Ballot {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ballot {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key().cmp(&other.key())
    }
}

impl Hash for Ballot {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.key().hash(state)
    }
}

impl fmt::Display for Ballot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}{}", self.view, self.number, if self.kind == BallotKind::Fast { "f" } else { "c" })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Message {
    Propose {
        prop: CmdSequence,
    },
    Ballot {
        kind: BallotKind,
    },
    Fast {
        ballot: Ballot,
        view: u64,
    },
    P1a {
        ballot: Ballot,
        view: u64,
    },
    /// `proven_cert` backs `proven`; it is absent while `proven` is empty.
    P1b {
        ballot: Ballot,
        bal_a: Ballot,
        proven: CmdSequence,
        val_a: CmdSequence,
        proven_cert: Option<ProvenCert>,
    },
    P2aClassic {
        ballot: Ballot,
        view: u64,
        value: CmdSequence,
    },
    P2aFast {
        value: CmdSequence,
    },
    Verify {
        view: u64,
        ballot: Ballot,
        value: CmdSequence,
        proof: VerifyProof,
    },
    P2b {
        ballot: Ballot,
        value: CmdSequence,
        cert: ProvenCert,
    },
    P2bUniv {
        ballot: Ballot,
        value: CmdSequence,
    },
    Suspicion {
        view: u64,
        proof: SuspicionProof,
    },
    ViewChange {
        new_view: u64,
        suspicions: BTreeMap<ProcessId, SuspicionProof>,
        change_proof: ViewChangeProof,
    },
    Leader {
        view: u64,
        proofs: BTreeMap<ProcessId, ViewChangeProof>,
    },
    CheckpointAck {
        checkpoint: CommandId,
    },
}

pub mod tag {
    pub const PROPOSE: u8 = 0x01;
    pub const BALLOT: u8 = 0x02;
    pub const FAST: u8 = 0x03;
    pub const P1A: u8 = 0x04;
    pub const P1B: u8 = 0x05;
    pub const P2A_CLASSIC: u8 = 0x06;
    pub const P2A_FAST: u8 = 0x07;
    pub const VERIFY: u8 = 0x08;
    pub const P2B: u8 = 0x09;
    pub const P2B_UNIV: u8 = 0x0A;
    pub const SUSPICION: u8 = 0x0B;
    pub const VIEW_CHANGE: u8 = 0x0C;
    pub const LEADER: u8 = 0x0D;
    pub const CHECKPOINT_ACK: u8 = 0x0E;

    pub const NAMES: [(u8, &str); 14] = [
        (PROPOSE, "PROPOSE"),
        (BALLOT, "BALLOT"),
        (FAST, "FAST"),
        (P1A, "P1A"),
        (P1B, "P1B"),
        (P2A_CLASSIC, "P2A_CLASSIC"),
        (P2A_FAST, "P2A_FAST"),
        (VERIFY, "VERIFY"),
        (P2B, "P2B"),
        (P2B_UNIV, "P2B_UNIV"),
        (SUSPICION, "SUSPICION"),
        (VIEW_CHANGE, "VIEW_CHANGE"),
        (LEADER, "LEADER"),
        (CHECKPOINT_ACK, "CHECKPOINT_ACK"),
    ];

    pub fn from_name(name: &str) -> Option<u8> {
        NAMES.iter().find(|(_, n)| *n == name).map(|(t, _)| *t)
    }
}

impl Message {
    pub fn tag(&self) -> u8 {
        match self {
            Message::Propose { .. } => tag::PROPOSE,
            Message::Ballot { .. } => tag::BALLOT,
            Message::Fast { .. } => tag::FAST,
            Message::P1a { .. } => tag::P1A,
            Message::P1b { .. } => tag::P1B,
            Message::P2aClassic { .. } => tag::P2A_CLASSIC,
            Message::P2aFast { .. } => tag::P2A_FAST,
            Message::Verify { .. } => tag::VERIFY,
            Message::P2b { .. } => tag::P2B,
            Message::P2bUniv { .. } => tag::P2B_UNIV,
            Message::Suspicion { .. } => tag::SUSPICION,
            Message::ViewChange { .. } => tag::VIEW_CHANGE,
            Message::Leader { .. } => tag::LEADER,
            Message::CheckpointAck { .. } => tag::CHECKPOINT_ACK,
        }
    }

    pub fn name(&self) -> &'static str {
        tag::NAMES[(self.tag() - 1) as usize].1
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WireError {
    #[error("malformed message: {0}")]
    MalformedMessage(#[from] DecodeError),
}

pub fn encode(m: &Message) -> Vec<u8> {
    m.to_bytes()
}

pub fn decode(bytes: &[u8]) -> Result<Message, WireError> {
    Ok(Message::from_bytes(bytes)?)
}

impl Encode for BallotKind {
    fn encode_to(&self, w: &mut Writer) {
        w.put_u8(match self {
            BallotKind::Classic => 0,
            BallotKind::Fast => 1,
        });
    }
}

impl Decode for BallotKind {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        match r.u8()? {
            0 => Ok(BallotKind::Classic),
            1 => Ok(BallotKind::Fast),
            value => Err(DecodeError::InvalidByte {
                what: "ballot kind",
                value,
            }),
        }
    }
}

impl Encode for Ballot {
    fn encode_to(&self, w: &mut Writer) {
        w.put_u64(self.view);
        w.put_u64(self.number);
        self.kind.encode_to(w);
    }
}

impl Decode for Ballot {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(Ballot {
            view: r.u64()?,
            number: r.u64()?,
            kind: BallotKind::decode_from(r)?,
        })
    }
}

impl Encode for Digest {
    fn encode_to(&self, w: &mut Writer) {
        w.put_raw(&self.0);
    }
}

impl Decode for Digest {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(Digest(r.array()?))
    }
}

impl Encode for VerifyProof {
    fn encode_to(&self, w: &mut Writer) {
        self.acceptor.encode_to(w);
        self.ballot.encode_to(w);
        self.digest.encode_to(w);
        self.sig.encode_to(w);
    }
}

impl Decode for VerifyProof {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(VerifyProof {
            acceptor: ProcessId::decode_from(r)?,
            ballot: Ballot::decode_from(r)?,
            digest: Digest::decode_from(r)?,
            sig: Signature::decode_from(r)?,
        })
    }
}

impl Encode for SuspicionProof {
    fn encode_to(&self, w: &mut Writer) {
        self.acceptor.encode_to(w);
        w.put_u64(self.view);
        self.sig.encode_to(w);
    }
}

impl Decode for SuspicionProof {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(SuspicionProof {
            acceptor: ProcessId::decode_from(r)?,
            view: r.u64()?,
            sig: Signature::decode_from(r)?,
        })
    }
}

impl Encode for ViewChangeProof {
    fn encode_to(&self, w: &mut Writer) {
        self.acceptor.encode_to(w);
        w.put_u64(self.new_view);
        self.sig.encode_to(w);
    }
}

impl Decode for ViewChangeProof {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(ViewChangeProof {
            acceptor: ProcessId::decode_from(r)?,
            new_view: r.u64()?,
            sig: Signature::decode_from(r)?,
        })
    }
}

fn put_map<V: Encode>(w: &mut Writer, m: &BTreeMap<ProcessId, V>) {
    w.put_len(m.len());
    for (k, v) in m {
        k.encode_to(w);
        v.encode_to(w);
    }
}

fn get_map<V: Decode>(r: &mut Reader<'_>, min_entry: usize) -> Result<BTreeMap<ProcessId, V>, DecodeError> {
    let n = r.count(min_entry)?;
    let mut out = BTreeMap::new();
    let mut last: Option<ProcessId> = None;
    for _ in 0..n {
        let k = ProcessId::decode_from(r)?;
        if last.is_some_and(|l| l >= k) {
            return Err(DecodeError::NotCanonical("map"));
        }
        last = Some(k);
        out.insert(k, V::decode_from(r)?);
    }
    Ok(out)
}

// smallest encodings of map entries: key + proof with an empty signature
const MIN_VERIFY_ENTRY: usize = 4 + 4 + 17 + 32 + 4;
const MIN_VIEW_ENTRY: usize = 4 + 4 + 8 + 4;

impl Encode for ProvenCert {
    fn encode_to(&self, w: &mut Writer) {
        self.ballot.encode_to(w);
        self.value.encode_to(w);
        put_map(w, &self.proofs);
    }
}

impl Decode for ProvenCert {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(ProvenCert {
            ballot: Ballot::decode_from(r)?,
            value: CmdSequence::decode_from(r)?,
            proofs: get_map(r, MIN_VERIFY_ENTRY)?,
        })
    }
}

impl Encode for Message {
    fn encode_to(&self, w: &mut Writer) {
        w.put_u8(self.tag());
        match self {
            Message::Propose { prop } => prop.encode_to(w),
            Message::Ballot { kind } => kind.encode_to(w),
            Message::Fast { ballot, view } | Message::P1a { ballot, view } => {
                ballot.encode_to(w);
                w.put_u64(*view);
            }
            Message::P1b {
                ballot,
                bal_a,
                proven,
                val_a,
                proven_cert,
            } => {
                ballot.encode_to(w);
                bal_a.encode_to(w);
                proven.encode_to(w);
                val_a.encode_to(w);
                w.put_bool(proven_cert.is_some());
                if let Some(c) = proven_cert {
                    c.encode_to(w);
                }
            }
            Message::P2aClassic { ballot, view, value } => {
                ballot.encode_to(w);
                w.put_u64(*view);
                value.encode_to(w);
            }
            Message::P2aFast { value } => value.encode_to(w),
            Message::Verify {
                view,
                ballot,
                value,
                proof,
            } => {
                w.put_u64(*view);
                ballot.encode_to(w);
                value.encode_to(w);
                proof.encode_to(w);
            }
            Message::P2b { ballot, value, cert } => {
                ballot.encode_to(w);
                value.encode_to(w);
                cert.encode_to(w);
            }
            Message::P2bUniv { ballot, value } => {
                ballot.encode_to(w);
                value.encode_to(w);
            }
            Message::Suspicion { view, proof } => {
                w.put_u64(*view);
                proof.encode_to(w);
            }
            Message::ViewChange {
                new_view,
                suspicions,
                change_proof,
            } => {
                w.put_u64(*new_view);
                put_map(w, suspicions);
                change_proof.encode_to(w);
            }
            Message::Leader { view, proofs } => {
                w.put_u64(*view);
                put_map(w, proofs);
            }
            Message::CheckpointAck { checkpoint } => checkpoint.encode_to(w),
        }
    }
}

impl Decode for Message {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let t = r.u8()?;
        Ok(match t {
            tag::PROPOSE => Message::Propose {
                prop: CmdSequence::decode_from(r)?,
            },
            tag::BALLOT => Message::Ballot {
                kind: BallotKind::decode_from(r)?,
            },
            tag::FAST => Message::Fast {
                ballot: Ballot::decode_from(r)?,
                view: r.u64()?,
            },
            tag::P1A => Message::P1a {
                ballot: Ballot::decode_from(r)?,
                view: r.u64()?,
            },
            tag::P1B => Message::P1b {
                ballot: Ballot::decode_from(r)?,
                bal_a: Ballot::decode_from(r)?,
                proven: CmdSequence::decode_from(r)?,
                val_a: CmdSequence::decode_from(r)?,
                proven_cert: if r.bool("certificate flag")? {
                    Some(ProvenCert::decode_from(r)?)
                } else {
                    None
                },
            },
            tag::P2A_CLASSIC => Message::P2aClassic {
                ballot: Ballot::decode_from(r)?,
                view: r.u64()?,
                value: CmdSequence::decode_from(r)?,
            },
            tag::P2A_FAST => Message::P2aFast {
                value: CmdSequence::decode_from(r)?,
            },
            tag::VERIFY => Message::Verify {
                view: r.u64()?,
                ballot: Ballot::decode_from(r)?,
                value: CmdSequence::decode_from(r)?,
                proof: VerifyProof::decode_from(r)?,
            },
            tag::P2B => Message::P2b {
                ballot: Ballot::decode_from(r)?,
                value: CmdSequence::decode_from(r)?,
                cert: ProvenCert::decode_from(r)?,
            },
            tag::P2B_UNIV => Message::P2bUniv {
                ballot: Ballot::decode_from(r)?,
                value: CmdSequence::decode_from(r)?,
            },
            tag::SUSPICION => Message::Suspicion {
                view: r.u64()?,
                proof: SuspicionProof::decode_from(r)?,
            },
            tag::VIEW_CHANGE => Message::ViewChange {
                new_view: r.u64()?,
                suspicions: get_map(r, MIN_VIEW_ENTRY)?,
                change_proof: ViewChangeProof::decode_from(r)?,
            },
            tag::LEADER => Message::Leader {
                view: r.u64()?,
                proofs: get_map(r, MIN_VIEW_ENTRY)?,
            },
            tag::CHECKPOINT_ACK => Message::CheckpointAck {
                checkpoint: CommandId::decode_from(r)?,
            },
            other => return Err(DecodeError::UnknownTag(other)),
        })
    }
}
