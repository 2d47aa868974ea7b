//! Transferable signatures and the certificates built from them.
//!
//! Two providers are available behind [`SignatureProvider`]:
//!
//! * [`Ed25519Provider`], real asymmetric signatures;
//! * [`HashProvider`], an HMAC-SHA256 scheme whose secrets live in a registry
//!   held by the provider, so anyone holding the provider can verify by
//!   recomputation. Processes only ever receive their own [`KeyPair`], which
//!   is what keeps signatures unforgeable inside the simulator.
//!
//! Proofs over command sequences sign a digest of the sequence's canonical
//! form, so proofs for equivalent sequences collate.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::{Arc, RwLock};

use hmac::{Hmac, Mac};
use sha2::{Digest as _, Sha256};

use crate::codec::{Encode, Writer};
use crate::command::ProcessId;
use crate::commute::CommutativityOracle;
use crate::membership::Membership;
use crate::sequence::CmdSequence;
use crate::wire::Ballot;

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PublicKey(Vec<u8>);

impl PublicKey {
    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }
}

impl fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PublicKey({})", hex::encode(&self.0[..self.0.len().min(8)]))
    }
}

#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Signature(Vec<u8>);

impl Signature {
    pub fn from_bytes(bytes: Vec<u8>) -> Self {
        Signature(bytes)
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }
}

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Sig({})", hex::encode(&self.0[..self.0.len().min(6)]))
    }
}

#[derive(Clone)]
pub struct KeyPair {
    public: PublicKey,
    secret: [u8; 32],
}

impl KeyPair {
    pub fn public(&self) -> &PublicKey {
        &self.public
    }
}

impl fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KeyPair").field("public", &self.public).finish_non_exhaustive()
    }
}

pub trait SignatureProvider: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;

    /// Deterministic key generation from 32 seed bytes.
    fn keypair_from_seed(&self, seed: [u8; 32]) -> KeyPair;

    fn sign(&self, key: &KeyPair, statement: &[u8]) -> Signature;

    /// Never panics; malformed keys or signatures simply fail.
    fn verify(&self, public: &PublicKey, statement: &[u8], sig: &Signature) -> bool;
}

type HmacSha256 = Hmac<Sha256>;

/// Keyed-hash signatures with verification by recomputation.
#[derive(Debug, Default)]
pub struct HashProvider {
    registry: RwLock<HashMap<PublicKey, [u8; 32]>>,
}

impl HashProvider {
    pub fn new() -> Self {
        Self::default()
    }

    fn mac(secret: &[u8; 32], statement: &[u8]) -> HmacSha256 {
        let mut mac = HmacSha256::new_from_slice(secret).expect("hmac accepts any key length");
        mac.update(statement);
        mac
    }
}

impl SignatureProvider for HashProvider {
    fn name(&self) -> &'static str {
        "hmac-sha256"
    }

    fn keypair_from_seed(&self, seed: [u8; 32]) -> KeyPair {
        let mut h = Sha256::new();
        h.update(b"bgp/hash-provider/public");
        h.update(seed);
        let public = PublicKey(h.finalize().to_vec());
        self.registry
            .write()
            .expect("key registry poisoned")
            .insert(public.clone(), seed);
        KeyPair { public, secret: seed }
    }

    fn sign(&self, key: &KeyPair, statement: &[u8]) -> Signature {
        Signature(Self::mac(&key.secret, statement).finalize().into_bytes().to_vec())
    }

    fn verify(&self, public: &PublicKey, statement: &[u8], sig: &Signature) -> bool {
        let registry = self.registry.read().expect("key registry poisoned");
        match registry.get(public) {
            Some(secret) => Self::mac(secret, statement).verify_slice(&sig.0).is_ok(),
            None => false,
        }
    }
}

#[derive(Debug, Default, Clone, Copy)]
pub struct Ed25519Provider;

impl SignatureProvider for Ed25519Provider {
    fn name(&self) -> &'static str {
        "ed25519"
    }

    fn keypair_from_seed(&self, seed: [u8; 32]) -> KeyPair {
        let signing = ed25519_dalek::SigningKey::from_bytes(&seed);
        KeyPair {
            public: PublicKey(signing.verifying_key().to_bytes().to_vec()),
            secret: seed,
        }
    }

    fn sign(&self, key: &KeyPair, statement: &[u8]) -> Signature {
        use ed25519_dalek::Signer as _;
        let signing = ed25519_dalek::SigningKey::from_bytes(&key.secret);
        Signature(signing.sign(statement).to_bytes().to_vec())
    }

    fn verify(&self, public: &PublicKey, statement: &[u8], sig: &Signature) -> bool {
        use ed25519_dalek::Verifier as _;
        let Ok(pk_bytes) = <[u8; 32]>::try_from(public.as_bytes()) else {
            return false;
        };
        let Ok(vk) = ed25519_dalek::VerifyingKey::from_bytes(&pk_bytes) else {
            return false;
        };
        let Ok(sig) = ed25519_dalek::Signature::from_slice(&sig.0) else {
            return false;
        };
        vk.verify(statement, &sig).is_ok()
    }
}

/// Public keys of every process, shared by all verifiers in a run.
#[derive(Clone, Debug)]
pub struct Keyring {
    provider: Arc<dyn SignatureProvider>,
    publics: BTreeMap<ProcessId, PublicKey>,
}

impl Keyring {
    pub fn new(provider: Arc<dyn SignatureProvider>) -> Self {
        Self {
            provider,
            publics: BTreeMap::new(),
        }
    }

    pub fn register(&mut self, id: ProcessId, public: PublicKey) {
        self.publics.insert(id, public);
    }

    pub fn provider(&self) -> &dyn SignatureProvider {
        self.provider.as_ref()
    }

    pub fn public(&self, id: ProcessId) -> Option<&PublicKey> {
        self.publics.get(&id)
    }

    pub fn verify(&self, signer: ProcessId, statement: &[u8], sig: &Signature) -> bool {
        match self.publics.get(&signer) {
            Some(pk) => self.provider.verify(pk, statement, sig),
            None => false,
        }
    }
}

/// A process's own signing capability.
#[derive(Clone, Debug)]
pub struct Signer {
    id: ProcessId,
    keys: KeyPair,
    provider: Arc<dyn SignatureProvider>,
}

impl Signer {
    pub fn new(id: ProcessId, keys: KeyPair, provider: Arc<dyn SignatureProvider>) -> Self {
        Self { id, keys, provider }
    }

    pub fn id(&self) -> ProcessId {
        self.id
    }

    pub fn keys(&self) -> &KeyPair {
        &self.keys
    }

    pub fn provider(&self) -> &dyn SignatureProvider {
        self.provider.as_ref()
    }

    pub fn sign(&self, statement: &[u8]) -> Signature {
        self.provider.sign(&self.keys, statement)
    }
}

/// SHA-256 over an encoded value.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Digest(pub [u8; 32]);

impl Digest {
    pub fn of(bytes: &[u8]) -> Self {
        Digest(Sha256::digest(bytes).into())
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", hex::encode(&self.0[..4]))
    }
}

/// Digest of the canonical form of `s`; equivalent sequences share it.
pub fn sequence_digest(s: &CmdSequence, oracle: &CommutativityOracle) -> Digest {
    Digest::of(&oracle.canonicalize(s).to_bytes())
}

pub fn verify_statement(ballot: &Ballot, digest: &Digest) -> Vec<u8> {
    let mut w = Writer::new();
    w.put_str("verify");
    w.put_u64(ballot.view);
    w.put_u64(ballot.number);
    w.put_raw(&digest.0);
    w.into_bytes()
}

pub fn suspicion_statement(view: u64) -> Vec<u8> {
    let mut w = Writer::new();
    w.put_str("suspicion");
    w.put_u64(view);
    w.into_bytes()
}

pub fn view_change_statement(view: u64) -> Vec<u8> {
    let mut w = Writer::new();
    w.put_str("view_change");
    w.put_u64(view);
    w.into_bytes()
}

/// An acceptor's signed commitment to `(ballot, digest)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct VerifyProof {
    pub acceptor: ProcessId,
    pub ballot: Ballot,
    pub digest: Digest,
    pub sig: Signature,
}

impl VerifyProof {
    pub fn sign(signer: &Signer, ballot: Ballot, digest: Digest) -> Self {
        let sig = signer.sign(&verify_statement(&ballot, &digest));
        Self {
            acceptor: signer.id(),
            ballot,
            digest,
            sig,
        }
    }

    pub fn verify(&self, keyring: &Keyring) -> bool {
        keyring.verify(self.acceptor, &verify_statement(&self.ballot, &self.digest), &self.sig)
    }
}

/// `N - f` verify proofs showing that `value` gathered quorum support.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ProvenCert {
    pub ballot: Ballot,
    pub value: CmdSequence,
    pub proofs: BTreeMap<ProcessId, VerifyProof>,
}

impl ProvenCert {
    /// Number of proofs from distinct known acceptors that verify for
    /// `(ballot, digest)`.
    pub fn valid_proofs(&self, digest: &Digest, keyring: &Keyring, membership: &Membership) -> usize {
        self.proofs
            .iter()
            .filter(|(from, p)| {
                **from == p.acceptor
                    && membership.is_acceptor(p.acceptor)
                    && p.ballot == self.ballot
                    && p.ballot.view == self.ballot.view
                    && p.digest == *digest
                    && p.verify(keyring)
            })
            .count()
    }
}

/// True iff at least `N - f` proofs from distinct acceptors verify for the
/// certificate's ballot and the digest of its value's canonical form.
pub fn check_proven_cert(
    cert: &ProvenCert,
    keyring: &Keyring,
    membership: &Membership,
    oracle: &CommutativityOracle,
) -> bool {
    let digest = sequence_digest(&cert.value, oracle);
    cert.valid_proofs(&digest, keyring, membership) >= membership.quorum()
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SuspicionProof {
    pub acceptor: ProcessId,
    pub view: u64,
    pub sig: Signature,
}

impl SuspicionProof {
    pub fn sign(signer: &Signer, view: u64) -> Self {
        Self {
            acceptor: signer.id(),
            view,
            sig: signer.sign(&suspicion_statement(view)),
        }
    }

    pub fn verify(&self, keyring: &Keyring) -> bool {
        keyring.verify(self.acceptor, &suspicion_statement(self.view), &self.sig)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ViewChangeProof {
    pub acceptor: ProcessId,
    pub new_view: u64,
    pub sig: Signature,
}

impl ViewChangeProof {
    pub fn sign(signer: &Signer, new_view: u64) -> Self {
        Self {
            acceptor: signer.id(),
            new_view,
            sig: signer.sign(&view_change_statement(new_view)),
        }
    }

    pub fn verify(&self, keyring: &Keyring) -> bool {
        keyring.verify(self.acceptor, &view_change_statement(self.new_view), &self.sig)
    }
}

/// Counts suspicion proofs for `view` from distinct acceptors.
pub fn valid_suspicions(
    proofs: &BTreeMap<ProcessId, SuspicionProof>,
    view: u64,
    keyring: &Keyring,
    membership: &Membership,
) -> usize {
    proofs
        .iter()
        .filter(|(from, p)| {
            **from == p.acceptor && membership.is_acceptor(p.acceptor) && p.view == view && p.verify(keyring)
        })
        .count()
}

/// View-change proofs assembled for a new leader.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LeaderCert {
    pub view: u64,
    pub proofs: BTreeMap<ProcessId, ViewChangeProof>,
}

impl LeaderCert {
    pub fn valid_proofs(&self, keyring: &Keyring, membership: &Membership) -> usize {
        self.proofs
            .iter()
            .filter(|(from, p)| {
                **from == p.acceptor
                    && membership.is_acceptor(p.acceptor)
                    && p.new_view == self.view
                    && p.verify(keyring)
            })
            .count()
    }
}
