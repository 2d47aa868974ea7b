//! Commands: the unit of agreement.
//!
//! A [`Command`] is immutable once built and cheap to clone (the data sits
//! behind an `Arc`), because the same command is copied into many sequences,
//! messages and certificates during a run.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::codec::Writer;
use crate::crypto::{KeyPair, Keyring, Signature, SignatureProvider};

/// Payload tag reserved for the checkpoint command.
pub const CHECKPOINT_TAG: &[u8] = b"\x00bgp:checkpoint";

/// Identifier of a process (acceptor, proposer or learner).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ProcessId(pub u32);

impl fmt::Display for ProcessId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0)
    }
}

/// Globally unique command identity: issuing process plus a per-issuer counter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CommandId {
    pub proposer: ProcessId,
    pub seqno: u64,
}

impl CommandId {
    pub fn new(proposer: ProcessId, seqno: u64) -> Self {
        Self { proposer, seqno }
    }
}

impl fmt::Display for CommandId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.proposer.0, self.seqno)
    }
}

/// Keys a command reads and writes; drives the key-set interference mode.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Footprint {
    pub reads: BTreeSet<String>,
    pub writes: BTreeSet<String>,
}

impl Footprint {
    pub fn new<R, W, S>(reads: R, writes: W) -> Self
    where
        R: IntoIterator<Item = S>,
        W: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            reads: reads.into_iter().map(Into::into).collect(),
            writes: writes.into_iter().map(Into::into).collect(),
        }
    }

    pub fn reads<S: Into<String>>(keys: impl IntoIterator<Item = S>) -> Self {
        Self {
            reads: keys.into_iter().map(Into::into).collect(),
            writes: BTreeSet::new(),
        }
    }

    pub fn writes<S: Into<String>>(keys: impl IntoIterator<Item = S>) -> Self {
        Self {
            reads: BTreeSet::new(),
            writes: keys.into_iter().map(Into::into).collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.reads.is_empty() && self.writes.is_empty()
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CommandError {
    #[error("universally commutative command {0} must not touch any key")]
    UniversalWithKeys(CommandId),
    #[error("payload of command {0} uses the reserved checkpoint tag")]
    ReservedPayload(CommandId),
}

#[derive(Debug, PartialEq, Eq, Hash)]
struct CommandData {
    id: CommandId,
    payload: Vec<u8>,
    footprint: Footprint,
    universal: bool,
    sig: Signature,
}

/// A signed client command.
#[derive(Clone)]
pub struct Command(Arc<CommandData>);

impl Command {
    /// Builds and signs a client command.
    pub fn signed(
        id: CommandId,
        payload: impl Into<Vec<u8>>,
        footprint: Footprint,
        universal: bool,
        keys: &KeyPair,
        provider: &dyn SignatureProvider,
    ) -> Result<Self, CommandError> {
        let payload = payload.into();
        if payload.starts_with(CHECKPOINT_TAG) {
            return Err(CommandError::ReservedPayload(id));
        }
        if universal && !footprint.is_empty() {
            return Err(CommandError::UniversalWithKeys(id));
        }
        Ok(Self::sign_raw(id, payload, footprint, universal, keys, provider))
    }

    /// Builds the checkpoint marker. It interferes with every
    /// non-universal command, so it pins the order around it.
    pub fn checkpoint(id: CommandId, keys: &KeyPair, provider: &dyn SignatureProvider) -> Self {
        let mut payload = CHECKPOINT_TAG.to_vec();
        payload.extend_from_slice(&id.seqno.to_be_bytes());
        Self::sign_raw(id, payload, Footprint::default(), false, keys, provider)
    }

    /// Assembles a command from raw parts without validating the signature.
    /// Used by the decoder and by adversarial strategies.
    pub fn from_parts(
        id: CommandId,
        payload: Vec<u8>,
        footprint: Footprint,
        universal: bool,
        sig: Signature,
    ) -> Self {
        Command(Arc::new(CommandData {
            id,
            payload,
            footprint,
            universal,
            sig,
        }))
    }

    fn sign_raw(
        id: CommandId,
        payload: Vec<u8>,
        footprint: Footprint,
        universal: bool,
        keys: &KeyPair,
        provider: &dyn SignatureProvider,
    ) -> Self {
        let statement = signing_statement(id, &payload, &footprint, universal);
        let sig = provider.sign(keys, &statement);
        Self::from_parts(id, payload, footprint, universal, sig)
    }

    pub fn id(&self) -> CommandId {
        self.0.id
    }

    pub fn payload(&self) -> &[u8] {
        &self.0.payload
    }

    pub fn footprint(&self) -> &Footprint {
        &self.0.footprint
    }

    pub fn read_keys(&self) -> &BTreeSet<String> {
        &self.0.footprint.reads
    }

    pub fn write_keys(&self) -> &BTreeSet<String> {
        &self.0.footprint.writes
    }

    pub fn is_universal(&self) -> bool {
        self.0.universal
    }

    pub fn signature(&self) -> &Signature {
        &self.0.sig
    }

    pub fn is_checkpoint(&self) -> bool {
        self.0.payload.starts_with(CHECKPOINT_TAG)
    }

    /// Bytes covered by the issuer's signature.
    pub fn statement(&self) -> Vec<u8> {
        signing_statement(self.0.id, &self.0.payload, &self.0.footprint, self.0.universal)
    }

    /// True iff the signature verifies under the issuer's registered key and
    /// the universal flag is consistent with the footprint.
    pub fn verify(&self, keyring: &Keyring) -> bool {
        if self.0.universal && (!self.0.footprint.is_empty() || self.is_checkpoint()) {
            return false;
        }
        keyring.verify(self.0.id.proposer, &self.statement(), &self.0.sig)
    }
}

fn signing_statement(id: CommandId, payload: &[u8], footprint: &Footprint, universal: bool) -> Vec<u8> {
    let mut w = Writer::new();
    w.put_str("command");
    crate::codec::put_unsigned_command(&mut w, id, payload, footprint, universal);
    w.into_bytes()
}

impl PartialEq for Command {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self.0 == other.0
    }
}

impl Eq for Command {}

impl std::hash::Hash for Command {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.0.hash(state)
    }
}

impl fmt::Debug for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_checkpoint() {
            return write!(f, "C*{}", self.id());
        }
        write!(f, "{}", self.id())?;
        if self.is_universal() {
            write!(f, "u")?;
        }
        let fp = self.footprint();
        if !fp.reads.is_empty() {
            write!(f, "r{:?}", fp.reads)?;
        }
        if !fp.writes.is_empty() {
            write!(f, "w{:?}", fp.writes)?;
        }
        Ok(())
    }
}
