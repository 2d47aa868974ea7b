//! The event loop: one run of one configuration under one seed.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::acceptor::Acceptor;
use crate::command::{Command, CommandId, Footprint, ProcessId};
use crate::commute::CommutativityOracle;
use crate::crypto::{check_proven_cert, Digest, Ed25519Provider, HashProvider, Keyring, Signature, SignatureProvider, Signer};
use crate::effects::{Dest, Effects, LearnPath, Note};
use crate::env::RoleEnv;
use crate::leader::Leader;
use crate::learner::Learner;
use crate::membership::Membership;
use crate::proposer::Proposer;
use crate::sequence::CmdSequence;
use crate::wire::{Ballot, BallotKind, Message};

use super::byzantine::{Adversary, Emission};
use super::config::{Action, BallotPolicy, ConfigError, SignatureScheme, SimConfig, Tamper};
use super::network::Network;
use super::oracle::{InvariantOracle, Property, Verdict};
use super::trace::Trace;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LearnRecord {
    pub learner: ProcessId,
    pub path: LearnPath,
    pub depth: u32,
    pub senders: usize,
    pub commands: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RunStats {
    pub events: u64,
    pub final_time: u64,
    /// Commands injected at correct proposers.
    pub proposed: usize,
    pub learns: Vec<LearnRecord>,
    /// View -> number of correct acceptors that installed it.
    pub views_installed: BTreeMap<u64, usize>,
    /// `(view, leader)` for every correct leader that took over.
    pub elected: Vec<(u64, ProcessId)>,
    /// Rewritten non-extending phase 2a values delivered to correct
    /// acceptors whose proven sequence they fail to extend.
    pub guard_offers: usize,
    pub guard_rejections: usize,
    pub leader_suspected_notes: usize,
    pub forged_emitted: usize,
    pub certs_audited: usize,
    pub checkpoints: Vec<CommandId>,
    /// `(acceptor, stored length right after reset)`.
    pub checkpoint_resets: Vec<(ProcessId, usize)>,
    pub buffered_post_checkpoint: usize,
    pub discarded_pre_checkpoint: usize,
    /// First command of each correct learner's learned sequence.
    pub learned_heads: Vec<(ProcessId, Option<CommandId>)>,
    pub learned_lens: Vec<(ProcessId, usize)>,
    /// Final stored length per correct acceptor.
    pub stored_lens: Vec<(ProcessId, usize)>,
    /// Final `(view, leader)` per correct acceptor.
    pub final_views: Vec<(ProcessId, u64, ProcessId)>,
}

impl RunStats {
    pub fn view_changes(&self) -> usize {
        self.views_installed.len()
    }
}

#[derive(Debug)]
pub struct Outcome {
    pub verdict: Verdict,
    pub trace: Trace,
    pub stats: RunStats,
}

#[derive(Debug)]
enum Event {
    Deliver {
        src: ProcessId,
        dst: ProcessId,
        msg: Message,
        depth: u32,
        tainted: bool,
    },
    Script(usize),
    Inject(usize),
    BallotTick,
    MonitorTick,
}

#[derive(Debug)]
struct InjectSpec {
    proposer: u32,
    reads: Vec<String>,
    writes: Vec<String>,
    universal: bool,
}

#[derive(Debug)]
struct Node {
    acceptor: Option<Acceptor>,
    leader: Option<Leader>,
    proposer: Option<Proposer>,
    learner: Option<Learner>,
    adversary: Option<Adversary>,
    crashed: bool,
    last_tick_growth: u64,
}

/// Runs `config` to its horizon or to quiescence.
pub fn run(config: &SimConfig) -> Result<Outcome, ConfigError> {
    config.validate()?;
    let mut sim = Simulation::new(config.clone());
    sim.run();
    Ok(sim.finish())
}

struct Simulation {
    cfg: SimConfig,
    env: RoleEnv,
    nodes: Vec<Node>,
    queue: BTreeMap<(u64, u64), Event>,
    seq: u64,
    live_events: usize,
    now: u64,
    step: u64,
    rng: ChaCha8Rng,
    net: Network,
    oracle: InvariantOracle,
    trace: Trace,
    stats: RunStats,
    injects: Vec<InjectSpec>,
    pending_inputs: usize,
    expected: Vec<CommandId>,
    expected_set: HashSet<CommandId>,
    learned_by_all: HashSet<CommandId>,
    growth: u64,
    since_growth: u64,
    monitor_growth: u64,
    /// No suspicion is raised before this time; set after every view change
    /// so a new leader gets a full timeout to make progress.
    grace_until: u64,
    /// Notes raised while handling the current event, for its trace entry.
    event_notes: Vec<String>,
    tamper: BTreeMap<ProcessId, Tamper>,
    certs: HashMap<Ballot, Vec<(Digest, CmdSequence)>>,
    cert_seen: HashSet<(Ballot, Digest)>,
    votes: HashMap<(ProcessId, Ballot), CmdSequence>,
}

fn key_seed(run_seed: u64, pid: ProcessId) -> [u8; 32] {
    let mut s = [0x5a; 32];
    s[..8].copy_from_slice(&run_seed.to_be_bytes());
    s[8..12].copy_from_slice(&pid.0.to_be_bytes());
    s
}

impl Simulation {
    fn new(cfg: SimConfig) -> Self {
        let provider: Arc<dyn SignatureProvider> = match cfg.signatures {
            SignatureScheme::Hash => Arc::new(HashProvider::new()),
            SignatureScheme::Ed25519 => Arc::new(Ed25519Provider),
        };
        let mut keyring = Keyring::new(provider.clone());
        let signers: Vec<Signer> = (0..cfg.n_processes())
            .map(|i| {
                let pid = ProcessId(i);
                let keys = provider.keypair_from_seed(key_seed(cfg.seed, pid));
                keyring.register(pid, keys.public().clone());
                Signer::new(pid, keys, provider.clone())
            })
            .collect();
        let membership = Membership::new(cfg.n_acceptors, cfg.f);
        let env = RoleEnv::new(membership, keyring, CommutativityOracle::keyset());
        let learners: BTreeSet<ProcessId> = (0..cfg.n_learners).map(|i| cfg.learner(i)).collect();

        let nodes = signers
            .into_iter()
            .map(|signer| {
                let pid = signer.id();
                let adversary = cfg
                    .byzantine
                    .get(&pid)
                    .map(|s| Adversary::new(*s, signer.clone(), env.clone()));
                let mut node = Node {
                    acceptor: None,
                    leader: None,
                    proposer: None,
                    learner: None,
                    adversary,
                    crashed: false,
                    last_tick_growth: u64::MAX,
                };
                if cfg.is_acceptor(pid) {
                    node.acceptor = Some(Acceptor::new(signer.clone(), env.clone(), learners.clone()));
                    node.leader = Some(Leader::new(signer, env.clone(), cfg.leader_threshold));
                } else if cfg.is_proposer(pid) {
                    node.proposer = Some(Proposer::new(signer, membership));
                } else {
                    node.learner = Some(Learner::new(pid, env.clone()));
                }
                node
            })
            .collect();

        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let net = Network::new(cfg.delay, cfg.sync_after, cfg.sync_delay);
        let oracle = InvariantOracle::new(env.oracle.clone());
        let trace = Trace::new(cfg.record_trace);

        let correct_proposers: Vec<u32> = (0..cfg.n_proposers)
            .filter(|i| !cfg.is_byzantine(cfg.proposer(*i)))
            .collect();
        let pool = if correct_proposers.is_empty() {
            (0..cfg.n_proposers).collect()
        } else {
            correct_proposers
        };
        let w = &cfg.workload;
        let mut injects = Vec::new();
        let mut at = w.start;
        let mut inject_times = Vec::new();
        for _ in 0..w.commands {
            at += rng.gen_range(1..=2 * w.interval.max(1));
            let proposer = pool[rng.gen_range(0..pool.len())];
            let universal = rng.gen_range(0..100) < w.universal_percent;
            let key = format!("k{}", rng.gen_range(0..w.keys.max(1)));
            let read = rng.gen_range(0..100) < w.read_percent;
            let (reads, writes) = match (universal, read) {
                (true, _) => (vec![], vec![]),
                (false, true) => (vec![key], vec![]),
                (false, false) => (vec![], vec![key]),
            };
            injects.push(InjectSpec {
                proposer,
                reads,
                writes,
                universal,
            });
            inject_times.push(at);
        }

        let mut sim = Self {
            env,
            nodes,
            queue: BTreeMap::new(),
            seq: 0,
            live_events: 0,
            now: 0,
            step: 0,
            rng,
            net,
            oracle,
            trace,
            stats: RunStats::default(),
            injects,
            pending_inputs: 0,
            expected: Vec::new(),
            expected_set: HashSet::new(),
            learned_by_all: HashSet::new(),
            growth: 0,
            since_growth: 0,
            monitor_growth: 0,
            grace_until: 0,
            event_notes: Vec::new(),
            tamper: BTreeMap::new(),
            certs: HashMap::new(),
            cert_seen: HashSet::new(),
            votes: HashMap::new(),
            cfg,
        };
        for (i, t) in inject_times.into_iter().enumerate() {
            sim.push(t, Event::Inject(i));
        }
        for i in 0..sim.cfg.script.len() {
            let at = sim.cfg.script[i].at;
            sim.push(at, Event::Script(i));
        }
        sim.pending_inputs = sim.injects.len() + sim.cfg.script.len();
        sim.push(1, Event::BallotTick);
        let mi = sim.cfg.monitor_interval.max(1);
        sim.push(mi, Event::MonitorTick);
        sim
    }

    fn push(&mut self, at: u64, e: Event) {
        if !matches!(e, Event::BallotTick | Event::MonitorTick) {
            self.live_events += 1;
        }
        self.queue.insert((at, self.seq), e);
        self.seq += 1;
    }

    fn is_correct(&self, p: ProcessId) -> bool {
        !self.cfg.is_byzantine(p)
    }

    fn correct_learners(&self) -> Vec<ProcessId> {
        (0..self.cfg.n_learners).map(|i| self.cfg.learner(i)).collect()
    }

    fn all_learned(&self) -> bool {
        self.learned_by_all.len() == self.expected.len()
    }

    fn work_pending(&self) -> bool {
        !self.all_learned()
    }

    fn run(&mut self) {
        while let Some(((at, _), event)) = self.queue.pop_first() {
            if at > self.cfg.max_steps {
                break;
            }
            if !matches!(event, Event::BallotTick | Event::MonitorTick) {
                self.live_events -= 1;
            }
            self.now = at;
            self.step += 1;
            let mut line = self.handle(event);
            for n in self.event_notes.drain(..) {
                line.push_str("\n  note ");
                line.push_str(&n);
            }
            let state = self.fingerprint();
            self.trace.push(line, &state);
            if self.live_events == 0 && self.pending_inputs == 0 && self.all_learned() && self.quiet_leaders() {
                break;
            }
        }
    }

    fn quiet_leaders(&self) -> bool {
        self.nodes.iter().all(|n| {
            n.crashed
                || n.adversary.is_some()
                || n.leader.as_ref().is_none_or(|l| l.pending_checkpoint().is_none())
                    && n.acceptor.as_ref().is_none_or(|a| !a.is_paused())
        })
    }

    fn fingerprint(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.nodes.len() * 24);
        for n in &self.nodes {
            if let Some(a) = &n.acceptor {
                out.extend_from_slice(&a.view().to_be_bytes());
                out.extend_from_slice(&a.bal_a().number.to_be_bytes());
                out.extend_from_slice(&(a.stored_len() as u32).to_be_bytes());
            }
            if let Some(l) = &n.learner {
                out.extend_from_slice(&(l.executed().len() as u32).to_be_bytes());
            }
        }
        out
    }

    fn handle(&mut self, event: Event) -> String {
        let (step, now) = (self.step, self.now);
        match event {
            Event::Deliver {
                src,
                dst,
                msg,
                depth,
                tainted,
            } => {
                let line = format!("{step} t={now} deliver {src}->{dst} {} d={depth}", msg.name());
                self.deliver(src, dst, msg, depth, tainted);
                line
            }
            Event::Script(i) => {
                self.pending_inputs -= 1;
                let action = self.cfg.script[i].action.clone();
                let line = format!("{step} t={now} action {action:?}");
                self.act(action);
                line
            }
            Event::Inject(i) => {
                self.pending_inputs -= 1;
                let spec = &self.injects[i];
                let (p, r, w, u) = (spec.proposer, spec.reads.clone(), spec.writes.clone(), spec.universal);
                let id = self.inject(p, r, w, u);
                format!("{step} t={now} inject {}", id.map_or("-".to_string(), |id| id.to_string()))
            }
            Event::BallotTick => {
                self.ballot_tick();
                let next = now + self.cfg.ballot_interval.max(1);
                self.push(next, Event::BallotTick);
                format!("{step} t={now} tick ballot")
            }
            Event::MonitorTick => {
                if self.work_pending() && self.growth == self.monitor_growth && now >= self.grace_until {
                    self.suspect_all();
                }
                self.monitor_growth = self.growth;
                let next = now + self.cfg.monitor_interval.max(1);
                self.push(next, Event::MonitorTick);
                format!("{step} t={now} tick monitor")
            }
        }
    }

    // ---- inputs ----

    fn inject(&mut self, proposer: u32, reads: Vec<String>, writes: Vec<String>, universal: bool) -> Option<CommandId> {
        let pid = self.cfg.proposer(proposer);
        let correct = self.is_correct(pid);
        let node = &mut self.nodes[pid.0 as usize];
        if node.crashed {
            return None;
        }
        let p = node.proposer.as_mut()?;
        let payload = format!("op{}", self.step).into_bytes();
        let (c, fx) = p.on_command_request(payload, Footprint::new(reads, writes), universal).ok()?;
        let id = c.id();
        self.oracle.register(c);
        if correct {
            self.stats.proposed += 1;
            self.expected.push(id);
            self.expected_set.insert(id);
        }
        self.process(pid, fx);
        Some(id)
    }

    fn act(&mut self, action: Action) {
        match action {
            Action::Ballot(kind) => {
                for pid in self.active_leaders() {
                    let fx = self.nodes[pid.0 as usize]
                        .leader
                        .as_mut()
                        .and_then(|l| l.trigger_next_ballot(kind).ok());
                    if let Some(fx) = fx {
                        self.process(pid, fx);
                    }
                }
            }
            Action::Inject {
                proposer,
                reads,
                writes,
                universal,
            } => {
                self.inject(proposer, reads, writes, universal);
            }
            Action::Crash(p) => self.nodes[p.0 as usize].crashed = true,
            Action::Partition { group, until } => self.net.partition(group, until),
            Action::Hold { dst, tag, ballot, until } => self.net.hold(dst, tag, ballot, until),
            Action::Checkpoint => {
                for pid in self.active_leaders() {
                    let leader = self.nodes[pid.0 as usize].leader.as_mut().expect("leader role");
                    let id = leader.request_checkpoint();
                    let cp = leader.pending_checkpoint().expect("just requested").clone();
                    self.oracle.register(cp);
                    self.stats.checkpoints.push(id);
                }
            }
            Action::Suspect => self.suspect_all(),
            Action::Tamper { learner, how } => {
                self.tamper.insert(learner, how);
                self.observe(learner);
            }
        }
    }

    /// Live processes that consider themselves leader of the view their
    /// acceptor is in.
    fn active_leaders(&self) -> Vec<ProcessId> {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| !n.crashed)
            .filter_map(|(i, n)| {
                let (l, a) = (n.leader.as_ref()?, n.acceptor.as_ref()?);
                (l.is_leader() && l.view() == a.view()).then_some(ProcessId(i as u32))
            })
            .collect()
    }

    fn ballot_tick(&mut self) {
        for i in 0..self.nodes.len() {
            let pid = ProcessId(i as u32);
            let node = &self.nodes[i];
            if node.crashed || node.adversary.is_none() {
                continue;
            }
            let (view, leader) = match (&node.acceptor, &node.proposer) {
                (Some(a), _) => (a.view(), a.leader()),
                (None, Some(p)) => (0, p.leader()),
                _ => continue,
            };
            let sends = self.nodes[i].adversary.as_mut().expect("adversary").tick(view, leader);
            let mut fx = Effects::new();
            for (dest, msg) in sends {
                if matches!(msg, Message::P2aFast { .. }) {
                    self.stats.forged_emitted += 1;
                }
                fx.send(dest, msg, 1);
            }
            self.process(pid, fx);
        }
        if self.cfg.ballots == BallotPolicy::Manual {
            return;
        }
        let pending = self.work_pending();
        for pid in self.active_leaders() {
            let node = &self.nodes[pid.0 as usize];
            let leader = node.leader.as_ref().expect("leader role");
            let stalled = node.last_tick_growth == self.growth;
            let pending = pending || leader.pending_checkpoint().is_some();
            let current = leader.current_ballot().map(|b| b.kind);
            let kind = match (self.cfg.ballots, current) {
                (BallotPolicy::Classic, None) => Some(BallotKind::Classic),
                (_, None) => Some(BallotKind::Fast),
                (BallotPolicy::Classic, Some(_)) => pending.then_some(BallotKind::Classic),
                (BallotPolicy::Fast, Some(BallotKind::Classic)) => Some(BallotKind::Fast),
                (BallotPolicy::Fast, Some(BallotKind::Fast)) => (pending && stalled).then_some(BallotKind::Classic),
                (BallotPolicy::Alternate, Some(BallotKind::Fast)) => pending.then_some(BallotKind::Classic),
                (BallotPolicy::Alternate, Some(BallotKind::Classic)) => pending.then_some(BallotKind::Fast),
                (BallotPolicy::Manual, _) => None,
            };
            let growth = self.growth;
            let node = &mut self.nodes[pid.0 as usize];
            node.last_tick_growth = growth;
            if let Some(kind) = kind {
                if let Some(fx) = node.leader.as_mut().and_then(|l| l.trigger_next_ballot(kind).ok()) {
                    self.process(pid, fx);
                }
            }
        }
    }

    fn suspect_all(&mut self) {
        self.since_growth = 0;
        self.grace_until = self.now + self.cfg.monitor_interval;
        for i in 0..self.nodes.len() {
            if self.nodes[i].crashed {
                continue;
            }
            let fx = match self.nodes[i].acceptor.as_mut() {
                Some(a) => a.suspect_leader(),
                None => continue,
            };
            self.process(ProcessId(i as u32), fx);
        }
    }

    // ---- delivery ----

    fn deliver(&mut self, src: ProcessId, dst: ProcessId, msg: Message, depth: u32, tainted: bool) {
        let correct = self.is_correct(dst);
        let node = &mut self.nodes[dst.0 as usize];
        if node.crashed || node.adversary.as_ref().is_some_and(|a| !a.accepts_input()) {
            return;
        }
        let mut guard_offer = false;
        if tainted && correct {
            if let (Some(a), Message::P2aClassic { value, .. }) = (&node.acceptor, &msg) {
                guard_offer = !self.env.oracle.eq_prefix(a.proven(), value);
            }
        }
        let fx = match msg {
            Message::Propose { prop } => node.leader.as_mut().map(|l| l.on_propose(src, prop, depth)),
            Message::P1b {
                ballot,
                proven,
                val_a,
                proven_cert,
                ..
            } => node
                .leader
                .as_mut()
                .map(|l| l.on_p1b(src, ballot, proven, val_a, proven_cert, depth)),
            Message::Leader { view, proofs } => node.leader.as_mut().map(|l| l.on_leader_cert(view, proofs, depth)),
            Message::Ballot { kind } => node.proposer.as_mut().map(|p| p.on_ballot(kind)),
            m @ (Message::P2b { .. } | Message::P2bUniv { .. }) => node.learner.as_mut().map(|l| l.handle(src, m, depth)),
            m => node.acceptor.as_mut().map(|a| a.handle(src, m, depth)),
        };
        let Some(fx) = fx else {
            return;
        };
        if guard_offer {
            self.stats.guard_offers += 1;
            if fx.notes.iter().any(|n| matches!(n, Note::Voted { .. })) {
                self.oracle.report(self.step, Property::PrefixGuard, format!("{dst} voted for a non-extending value"));
            } else {
                self.stats.guard_rejections += 1;
            }
        }
        if self.is_correct(dst) {
            self.since_growth += u64::from(self.work_pending());
            if self.since_growth >= self.cfg.progress_timeout.max(1) && self.now >= self.grace_until {
                self.process(dst, fx);
                self.suspect_all();
                return;
            }
        }
        self.process(dst, fx);
    }

    fn process(&mut self, src: ProcessId, fx: Effects) {
        let correct = self.is_correct(src);
        let mut learned = false;
        for note in fx.notes {
            self.event_notes.push(format!("{src} {note}"));
            match note {
                Note::LeaderElected { view } => {
                    if correct {
                        self.stats.elected.push((view, src));
                    }
                    for i in 0..self.cfg.n_proposers {
                        let pid = self.cfg.proposer(i);
                        let node = &mut self.nodes[pid.0 as usize];
                        if node.crashed {
                            continue;
                        }
                        if let Some(pfx) = node.proposer.as_mut().map(|p| p.on_view_installed(view)) {
                            self.process(pid, pfx);
                        }
                    }
                }
                Note::ViewInstalled { view } if correct => {
                    *self.stats.views_installed.entry(view).or_default() += 1;
                    self.since_growth = 0;
                    self.grace_until = self.grace_until.max(self.now + self.cfg.monitor_interval);
                }
                Note::Learned {
                    commands,
                    depth,
                    path,
                    senders,
                } => {
                    learned = true;
                    self.stats.learns.push(LearnRecord {
                        learner: src,
                        path,
                        depth,
                        senders,
                        commands: commands.len(),
                    });
                    self.after_learn(src, &commands);
                }
                Note::CheckpointReset { .. } if correct => {
                    let len = self.nodes[src.0 as usize].acceptor.as_ref().map_or(0, Acceptor::stored_len);
                    self.stats.checkpoint_resets.push((src, len));
                }
                Note::BufferedPostCheckpoint { .. } => self.stats.buffered_post_checkpoint += 1,
                Note::DiscardedPreCheckpoint => self.stats.discarded_pre_checkpoint += 1,
                Note::ByzantineLeaderSuspected { .. } if correct => self.stats.leader_suspected_notes += 1,
                _ => {}
            }
        }
        if learned {
            self.observe(src);
        }
        for out in fx.out {
            let recipients = self.expand(src, out.dest);
            let emissions: Vec<Emission> = match self.nodes[src.0 as usize].adversary.as_mut() {
                Some(adv) => recipients
                    .iter()
                    .enumerate()
                    .flat_map(|(i, dst)| adv.transform(i, *dst, out.msg.clone(), out.depth))
                    .collect(),
                None => recipients
                    .into_iter()
                    .map(|dst| Emission {
                        dst,
                        msg: out.msg.clone(),
                        depth: out.depth,
                        tainted: false,
                    })
                    .collect(),
            };
            for e in emissions {
                self.audit(src, correct, &e.msg);
                for t in self.net.schedule(&mut self.rng, self.now, src, e.dst, &e.msg) {
                    self.push(
                        t,
                        Event::Deliver {
                            src,
                            dst: e.dst,
                            msg: e.msg.clone(),
                            depth: e.depth,
                            tainted: e.tainted,
                        },
                    );
                }
            }
        }
    }

    fn expand(&self, src: ProcessId, dest: Dest) -> Vec<ProcessId> {
        let c = &self.cfg;
        match dest {
            Dest::To(p) if p.0 < c.n_processes() => vec![p],
            Dest::To(_) => vec![],
            Dest::Acceptors => (0..c.n_acceptors).map(|i| c.acceptor(i)).collect(),
            Dest::OtherAcceptors => (0..c.n_acceptors).map(|i| c.acceptor(i)).filter(|p| *p != src).collect(),
            Dest::Learners => (0..c.n_learners).map(|i| c.learner(i)).collect(),
            Dest::Proposers => (0..c.n_proposers).map(|i| c.proposer(i)).collect(),
        }
    }

    /// Certificate and vote audits over everything that goes on the wire.
    fn audit(&mut self, src: ProcessId, correct: bool, msg: &Message) {
        match msg {
            Message::P2b { cert, .. } => {
                let digest = self.env.digest(&cert.value);
                if !self.cert_seen.insert((cert.ballot, digest)) {
                    return;
                }
                if !check_proven_cert(cert, &self.env.keyring, &self.env.membership, &self.env.oracle) {
                    return;
                }
                self.stats.certs_audited += 1;
                let others = self.certs.entry(cert.ballot).or_default();
                let algebra = &self.env.oracle;
                let clash = others.iter().any(|(_, v)| match cert.ballot.kind {
                    BallotKind::Classic => !algebra.equivalent(v, &cert.value),
                    BallotKind::Fast => !algebra.eq_prefix(v, &cert.value) && !algebra.eq_prefix(&cert.value, v),
                });
                others.push((digest, cert.value.clone()));
                if clash {
                    self.oracle.report(
                        self.step,
                        Property::CertAudit,
                        format!("conflicting certificates at ballot {}", cert.ballot),
                    );
                }
            }
            Message::Verify { ballot, value, proof, .. } if correct && proof.acceptor == src => {
                let key = (src, *ballot);
                if let Some(prev) = self.votes.get(&key) {
                    if !self.env.oracle.eq_prefix(prev, value) {
                        self.oracle.report(
                            self.step,
                            Property::VoteMonotonicity,
                            format!("{src} voted non-extending values at {ballot}: {:?} then {:?}", prev.ids().collect::<Vec<_>>(), value.ids().collect::<Vec<_>>()),
                        );
                    }
                }
                self.votes.insert(key, value.clone());
            }
            _ => {}
        }
    }

    fn after_learn(&mut self, learner: ProcessId, commands: &[CommandId]) {
        let learners = self.correct_learners();
        for id in commands {
            if !self.expected_set.contains(id) || self.learned_by_all.contains(id) {
                continue;
            }
            let everywhere = learners.iter().all(|l| {
                self.nodes[l.0 as usize]
                    .learner
                    .as_ref()
                    .is_some_and(|x| x.has_executed(*id))
            });
            if everywhere {
                self.learned_by_all.insert(*id);
                if let Some(p) = self.nodes.get_mut(id.proposer.0 as usize).and_then(|n| n.proposer.as_mut()) {
                    p.on_learned(*id);
                }
            }
        }
        let l = self.nodes[learner.0 as usize].learner.as_ref().expect("learner");
        for c in l.executed().iter().rev().take(commands.len()) {
            if !c.verify(&self.env.keyring) {
                let id = c.id();
                self.oracle.report(self.step, Property::Forgery, format!("{learner} learned forged command {id}"));
            }
        }
        self.growth += commands.len() as u64;
        self.since_growth = 0;
    }

    fn observe(&mut self, learner: ProcessId) {
        let l = self.nodes[learner.0 as usize].learner.as_ref().expect("learner");
        let mut seen: CmdSequence = l.executed().iter().cloned().collect();
        match self.tamper.get(&learner) {
            Some(Tamper::Reverse) => seen = seen.reversed(),
            Some(Tamper::Inject) => {
                let fake = Command::from_parts(
                    CommandId::new(ProcessId(u32::MAX), 0),
                    b"fabricated".to_vec(),
                    Footprint::writes(["k0"]),
                    false,
                    Signature::default(),
                );
                seen.push_raw(fake);
            }
            None => {}
        }
        self.oracle.observe(self.step, learner, seen);
    }

    fn finish(mut self) -> Outcome {
        if self.cfg.expect_liveness {
            let learners = self.correct_learners();
            let expected = self.expected.clone();
            self.oracle.check_liveness(self.step, &learners, &expected);
        }
        let mut stats = std::mem::take(&mut self.stats);
        stats.events = self.trace.events();
        stats.final_time = self.now;
        for (i, n) in self.nodes.iter().enumerate() {
            let pid = ProcessId(i as u32);
            if let Some(l) = &n.learner {
                stats.learned_heads.push((pid, l.learned().first().map(Command::id)));
                stats.learned_lens.push((pid, l.executed().len()));
            }
            if let Some(a) = &n.acceptor {
                if self.cfg.is_byzantine(pid) || n.crashed {
                    continue;
                }
                stats.stored_lens.push((pid, a.stored_len()));
                stats.final_views.push((pid, a.view(), a.leader()));
            }
        }
        Outcome {
            verdict: self.oracle.into_verdict(),
            trace: self.trace,
            stats,
        }
    }
}
