use crate::command::ProcessId;

/// The acceptor set `{0, .., n-1}` and the fault bound.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Membership {
    pub n: u32,
    pub f: u32,
}

impl Membership {
    pub fn new(n: u32, f: u32) -> Self {
        Self { n, f }
    }

    /// `N >= 3f + 1`.
    pub fn is_valid(&self) -> bool {
        self.n > 3 * self.f
    }

    /// `N - f`.
    pub fn quorum(&self) -> usize {
        (self.n - self.f) as usize
    }

    /// `f + 1`: enough to contain one correct process.
    pub fn weak_quorum(&self) -> usize {
        self.f as usize + 1
    }

    pub fn is_acceptor(&self, p: ProcessId) -> bool {
        p.0 < self.n
    }

    pub fn acceptors(&self) -> impl Iterator<Item = ProcessId> {
        (0..self.n).map(ProcessId)
    }

    /// Leader rotation: `view mod N`.
    pub fn leader_of(&self, view: u64) -> ProcessId {
        ProcessId((view % self.n as u64) as u32)
    }
}
