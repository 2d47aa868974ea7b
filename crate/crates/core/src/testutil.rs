//! Small builders for tests, examples and benches.
//!
//! Commands are signed by a fixed proposer (`p100`) under a process-wide
//! hash provider, so command values built here compare equal across calls.

use std::sync::{Arc, OnceLock};

use crate::command::{Command, CommandId, Footprint, ProcessId};
use crate::crypto::{HashProvider, KeyPair, Keyring, SignatureProvider};
use crate::sequence::CmdSequence;

pub const TEST_PROPOSER: ProcessId = ProcessId(100);

struct Shared {
    provider: Arc<HashProvider>,
    keys: KeyPair,
}

fn shared() -> &'static Shared {
    static SHARED: OnceLock<Shared> = OnceLock::new();
    SHARED.get_or_init(|| {
        let provider = Arc::new(HashProvider::new());
        let keys = provider.keypair_from_seed([0xc0; 32]);
        Shared { provider, keys }
    })
}

/// Keyed command `TEST_PROPOSER.seqno` with the given footprint.
pub fn cmd(seqno: u64, reads: &[&str], writes: &[&str]) -> Command {
    let s = shared();
    Command::signed(
        CommandId::new(TEST_PROPOSER, seqno),
        format!("c{seqno}").into_bytes(),
        Footprint::new(reads.iter().copied(), writes.iter().copied()),
        false,
        &s.keys,
        s.provider.as_ref(),
    )
    .expect("valid test command")
}

pub fn univ(seqno: u64) -> Command {
    let s = shared();
    Command::signed(
        CommandId::new(TEST_PROPOSER, seqno),
        format!("u{seqno}").into_bytes(),
        Footprint::default(),
        true,
        &s.keys,
        s.provider.as_ref(),
    )
    .expect("valid test command")
}

pub fn checkpoint(seqno: u64) -> Command {
    let s = shared();
    Command::checkpoint(CommandId::new(TEST_PROPOSER, seqno), &s.keys, s.provider.as_ref())
}

pub fn seq(items: &[&Command]) -> CmdSequence {
    items.iter().map(|c| (*c).clone()).collect()
}

/// A keyring that knows the test proposer.
pub fn keyring() -> Keyring {
    let s = shared();
    let mut k = Keyring::new(s.provider.clone());
    k.register(TEST_PROPOSER, s.keys.public().clone());
    k
}

/// Acceptors `0..n` with signing keys, plus the test proposer, under the
/// shared provider.
pub struct TestCluster {
    pub env: crate::env::RoleEnv,
    pub acceptors: Vec<crate::crypto::Signer>,
}

pub fn cluster(n: u32, f: u32) -> TestCluster {
    use crate::crypto::Signer;
    let s = shared();
    let mut ring = keyring();
    let acceptors: Vec<Signer> = (0..n)
        .map(|i| {
            let mut seed = [0xa0; 32];
            seed[..4].copy_from_slice(&i.to_be_bytes());
            let k = s.provider.keypair_from_seed(seed);
            ring.register(ProcessId(i), k.public().clone());
            Signer::new(ProcessId(i), k, s.provider.clone())
        })
        .collect();
    TestCluster {
        env: crate::env::RoleEnv::new(
            crate::membership::Membership::new(n, f),
            ring,
            crate::commute::CommutativityOracle::keyset(),
        ),
        acceptors,
    }
}

impl TestCluster {
    /// A certificate for `value` at `ballot`, signed by the listed acceptors.
    pub fn cert(&self, ballot: crate::wire::Ballot, value: &CmdSequence, signers: &[usize]) -> crate::crypto::ProvenCert {
        use crate::crypto::VerifyProof;
        let d = self.env.digest(value);
        crate::crypto::ProvenCert {
            ballot,
            value: value.clone(),
            proofs: signers
                .iter()
                .map(|&i| (ProcessId(i as u32), VerifyProof::sign(&self.acceptors[i], ballot, d)))
                .collect(),
        }
    }

    /// Checkpoint command issued by acceptor `by`.
    pub fn checkpoint(&self, by: usize, seqno: u64) -> Command {
        let signer = &self.acceptors[by];
        Command::checkpoint(CommandId::new(signer.id(), seqno), signer.keys(), signer.provider())
    }
}
