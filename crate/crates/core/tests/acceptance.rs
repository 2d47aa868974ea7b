//! Acceptance suite. Runs every criterion once and prints one line each:
//!
//! `criterion <n> <name>: PASS|FAIL <detail>`
//!
//! The process exits non-zero if any criterion fails. Run alone with
//! `cargo test -p bgp-core --test acceptance`.

mod common;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use bgp_core::effects::LearnPath;
use bgp_core::sim::{run, Outcome, Property, SimConfig, Strategy};
use bgp_core::wire::{decode, encode};
use bgp_core::{BallotKind, CommutativityOracle, ProcessId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{brute, sample_messages, scenario, shaped, SHAPES};

// ---- pinned tolerances ----

/// Runs per strategy per cluster size in the safety campaign.
const SEEDS_PER_STRATEGY: u64 = 150;
const MIN_CAMPAIGN_RUNS: usize = 1000;
const CAMPAIGN_BUDGET: Duration = Duration::from_secs(300);
const MIN_LIVENESS_RUNS: usize = 200;
const FAST_DEPTH: u32 = 3;
const UNIVERSAL_DEPTH: u32 = 2;
const CONFLICT_RUNS: u64 = 100;
const VIEW_CHANGE_RUNS: u64 = 100;
const CHECKPOINT_RUNS: u64 = 100;
const ALGEBRA_MAX_LEN: usize = 5;
const ALGEBRA_BUDGET: Duration = Duration::from_secs(10);
const FUZZ_CASES: usize = 100_000;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn run_ok(cfg: &SimConfig) -> Outcome {
    run(cfg).unwrap_or_else(|e| panic!("config rejected: {e}"))
}

// ---- shared safety campaign ----

struct CampaignRun {
    label: String,
    n: u32,
    f: u32,
    byzantine: BTreeMap<ProcessId, Strategy>,
    outcome: Outcome,
}

struct Campaign {
    runs: Vec<CampaignRun>,
    elapsed: Duration,
}

/// Every strategy as the view-0 leader, with a forging proposer; at N=7 a
/// second faulty acceptor runs a rotating strategy as well.
fn campaign() -> Campaign {
    let start = Instant::now();
    let mut runs = Vec::new();
    for base in ["campaign_n4.scn", "campaign_n7.scn"] {
        let template = scenario(base);
        for (i, &leader_strategy) in Strategy::ALL.iter().enumerate() {
            for seed in 0..SEEDS_PER_STRATEGY {
                let mut cfg = template.clone();
                cfg.seed = seed;
                cfg.byzantine.clear();
                cfg.byzantine.insert(cfg.acceptor(0), leader_strategy);
                cfg.byzantine.insert(cfg.proposer(1), Strategy::ForgeCommand);
                if cfg.f >= 2 {
                    let other = Strategy::ALL[(i + 3) % Strategy::ALL.len()];
                    cfg.byzantine.insert(cfg.acceptor(4), other);
                }
                let label = format!("N={} a0:{} seed {seed}", cfg.n_acceptors, leader_strategy.name());
                runs.push(CampaignRun {
                    label,
                    n: cfg.n_acceptors,
                    f: cfg.f,
                    byzantine: cfg.byzantine.clone(),
                    outcome: run_ok(&cfg),
                });
            }
        }
    }
    Campaign {
        runs,
        elapsed: start.elapsed(),
    }
}

// ---- criteria ----

fn safety(c: &Campaign) -> Check {
    let mut detail = Vec::new();
    for n in [4, 7] {
        let runs: Vec<&CampaignRun> = c.runs.iter().filter(|r| r.n == n).collect();
        ensure(runs.len() >= MIN_CAMPAIGN_RUNS, || format!("only {} runs at N={n}", runs.len()))?;
        for r in &runs {
            let bad: Vec<_> = r.outcome.verdict.violations.iter().filter(|v| v.property.is_core_safety()).collect();
            ensure(bad.is_empty(), || format!("{}: {:?}", r.label, bad[0]))?;
        }
        detail.push(format!("N={n}: {} runs", runs.len()));
    }
    ensure(c.elapsed < CAMPAIGN_BUDGET, || format!("campaign took {:?}", c.elapsed))?;
    Ok(format!("{}, 0 safety violations, {:.1?}", detail.join(", "), c.elapsed))
}

fn final_leader_is_correct(r: &CampaignRun) -> bool {
    r.outcome
        .stats
        .final_views
        .iter()
        .all(|(_, _, leader)| !r.byzantine.contains_key(leader))
}

fn liveness(c: &Campaign) -> Check {
    let mut counted = 0;
    for name in ["happy.scn", "crash_leader.scn", "false_suspector.scn"] {
        for seed in 0..50 {
            let mut cfg = scenario(name);
            cfg.seed = seed;
            let o = run_ok(&cfg);
            ensure(o.verdict.count(Property::Liveness) == 0, || format!("{name} seed {seed}: {:?}", o.verdict.violations))?;
            counted += 1;
        }
    }
    for r in c.runs.iter().filter(|r| final_leader_is_correct(r)) {
        ensure(r.outcome.verdict.count(Property::Liveness) == 0, || {
            format!("{}: {:?}", r.label, r.outcome.verdict.violations)
        })?;
        counted += 1;
    }
    ensure(counted >= MIN_LIVENESS_RUNS, || format!("only {counted} synchronous runs"))?;
    Ok(format!("{counted} synchronous runs with a correct final leader, 0 misses"))
}

fn depth(c: &Campaign) -> Check {
    let mut fast = 0;
    let mut universal = 0;
    let mut check = |label: &str, f: u32, o: &Outcome| -> Result<(), String> {
        for l in &o.stats.learns {
            match l.path {
                LearnPath::Certified(BallotKind::Fast) => {
                    ensure(l.depth == FAST_DEPTH, || format!("{label}: fast learn at depth {}", l.depth))?;
                    fast += 1;
                }
                LearnPath::Universal(_) => {
                    ensure(l.depth == UNIVERSAL_DEPTH, || format!("{label}: universal learn at depth {}", l.depth))?;
                    ensure(l.senders == f as usize + 1, || format!("{label}: universal learn from {} senders", l.senders))?;
                    universal += 1;
                }
                LearnPath::Certified(BallotKind::Classic) => {}
            }
        }
        Ok(())
    };
    for name in ["happy.scn", "universal.scn"] {
        for seed in 0..100 {
            let mut cfg = scenario(name);
            cfg.seed = seed;
            check(&format!("{name} seed {seed}"), cfg.f, &run_ok(&cfg))?;
        }
    }
    for r in &c.runs {
        check(&r.label, r.f, &r.outcome)?;
    }
    ensure(fast > 0 && universal > 0, || format!("fast={fast} universal={universal}"))?;
    Ok(format!("{fast} fast learns all at depth 3, {universal} universal learns all at depth 2 from f+1"))
}

fn conflict() -> Check {
    let mut resolved_by_classic = 0;
    for seed in 0..CONFLICT_RUNS {
        let mut cfg = scenario("conflict.scn");
        cfg.seed = seed;
        let o = run_ok(&cfg);
        ensure(o.verdict.passed(), || format!("seed {seed}: {:?}", o.verdict.violations))?;
        ensure(o.stats.learned_lens.iter().all(|(_, n)| *n == 2), || {
            format!("seed {seed}: learned {:?}", o.stats.learned_lens)
        })?;
        if o.stats.learns.iter().any(|l| l.path == LearnPath::Certified(BallotKind::Classic)) {
            resolved_by_classic += 1;
        }
    }
    ensure(resolved_by_classic > 0, || "no run needed the classic ballot".into())?;
    Ok(format!(
        "{CONFLICT_RUNS} runs, both commands learned in one order everywhere, {resolved_by_classic} settled by the classic ballot"
    ))
}

fn view_change() -> Check {
    for seed in 0..VIEW_CHANGE_RUNS {
        let mut cfg = scenario("crash_leader.scn");
        cfg.seed = seed;
        let o = run_ok(&cfg);
        let s = &o.stats;
        ensure(o.verdict.passed(), || format!("crash seed {seed}: {:?}", o.verdict.violations))?;
        ensure(s.views_installed.keys().copied().collect::<Vec<_>>() == vec![1], || {
            format!("crash seed {seed}: views {:?}", s.views_installed)
        })?;
        let expected = ProcessId((1 % cfg.n_acceptors as u64) as u32);
        ensure(s.final_views.iter().all(|(_, v, l)| *v == 1 && *l == expected), || {
            format!("crash seed {seed}: final views {:?}", s.final_views)
        })?;
    }
    for seed in 0..VIEW_CHANGE_RUNS {
        let mut cfg = scenario("false_suspector.scn");
        cfg.seed = seed;
        let o = run_ok(&cfg);
        ensure(o.verdict.passed(), || format!("suspector seed {seed}: {:?}", o.verdict.violations))?;
        ensure(o.stats.view_changes() == 0, || {
            format!("suspector seed {seed}: views {:?}", o.stats.views_installed)
        })?;
    }
    Ok(format!(
        "{VIEW_CHANGE_RUNS} crash runs each with exactly one view change to a1, {VIEW_CHANGE_RUNS} false-suspector runs with none"
    ))
}

fn guards(c: &Campaign) -> Check {
    let with = |s: Strategy| c.runs.iter().filter(move |r| r.byzantine.values().any(|x| *x == s));
    let (mut offers, mut rejections, mut suspected) = (0, 0, 0);
    for r in with(Strategy::NonExtensionLeader) {
        let s = &r.outcome.stats;
        ensure(s.guard_rejections == s.guard_offers, || {
            format!("{}: {} of {} rejected", r.label, s.guard_rejections, s.guard_offers)
        })?;
        ensure(r.outcome.verdict.count(Property::PrefixGuard) == 0, || r.label.clone())?;
        offers += s.guard_offers;
        rejections += s.guard_rejections;
        suspected += s.leader_suspected_notes;
    }
    ensure(offers > 0 && suspected > 0, || "non-extension proposals never reached a guard".into())?;
    let mut forged = 0;
    for r in &c.runs {
        ensure(r.outcome.verdict.count(Property::Forgery) == 0, || format!("{}: forged command learned", r.label))?;
        forged += r.outcome.stats.forged_emitted;
    }
    ensure(forged > 0, || "no forged command was ever sent".into())?;
    let mut audited = 0;
    for r in with(Strategy::DoubleVoteAcceptor) {
        ensure(r.outcome.verdict.count(Property::CertAudit) == 0, || format!("{}: conflicting certificates", r.label))?;
        audited += r.outcome.stats.certs_audited;
    }
    ensure(audited > 0, || "no certificate audited".into())?;
    Ok(format!(
        "{rejections}/{offers} non-extending proposals rejected, {forged} forged sends never learned, {audited} certificates audited"
    ))
}

fn checkpointing() -> Check {
    let (mut buffered, mut discarded) = (0, 0);
    for seed in 0..CHECKPOINT_RUNS {
        let mut cfg = scenario("checkpoint.scn");
        cfg.seed = seed;
        let o = run_ok(&cfg);
        let s = &o.stats;
        ensure(o.verdict.passed(), || format!("seed {seed}: {:?}", o.verdict.violations))?;
        let cp = *s.checkpoints.first().ok_or_else(|| format!("seed {seed}: no checkpoint issued"))?;
        ensure(s.learned_heads.iter().all(|(_, h)| *h == Some(cp)), || {
            format!("seed {seed}: heads {:?}", s.learned_heads)
        })?;
        ensure(s.checkpoint_resets.len() == cfg.n_acceptors as usize, || {
            format!("seed {seed}: resets {:?}", s.checkpoint_resets)
        })?;
        ensure(s.checkpoint_resets.iter().all(|(_, len)| *len == 2), || {
            format!("seed {seed}: stored after reset {:?}", s.checkpoint_resets)
        })?;
        ensure(s.buffered_post_checkpoint > 0 && s.discarded_pre_checkpoint > 0, || {
            format!(
                "seed {seed}: buffered {} discarded {}",
                s.buffered_post_checkpoint, s.discarded_pre_checkpoint
            )
        })?;
        buffered += s.buffered_post_checkpoint;
        discarded += s.discarded_pre_checkpoint;
    }
    Ok(format!(
        "{CHECKPOINT_RUNS} runs, all learners start at the checkpoint, {buffered} early and {discarded} late deliveries handled"
    ))
}

/// True if key indices first appear in order x, y, z. Renaming keys maps
/// every other sequence onto one of these.
fn keys_in_first_use_order(shapes: &[usize]) -> bool {
    let mut next = 0;
    for &s in shapes {
        if s >= 6 {
            continue;
        }
        let k = s / 2;
        if k > next {
            return false;
        }
        if k == next {
            next += 1;
        }
    }
    true
}

fn algebra() -> Check {
    let start = Instant::now();
    let oracle = CommutativityOracle::keyset();
    let pool: Vec<Vec<_>> = (0..SHAPES)
        .map(|s| (0..ALGEBRA_MAX_LEN as u64 + 1).map(|i| shaped(s, i)).collect())
        .collect();
    let foreign = shaped(1, 99);
    let (mut sequences, mut pairs) = (0usize, 0usize);
    for len in 0..=ALGEBRA_MAX_LEN {
        let mut shapes = vec![0usize; len];
        loop {
            if keys_in_first_use_order(&shapes) {
                let y: Vec<_> = shapes.iter().enumerate().map(|(i, &s)| pool[s][i].clone()).collect();
                let ys = y.iter().cloned().collect();
                let cls = brute::class(&y);
                let canon = cls.iter().min().cloned().unwrap_or_default();
                let mut fail = None;
                brute::permutations(&y, &mut |p| {
                    if fail.is_some() {
                        return;
                    }
                    let ps = p.iter().cloned().collect();
                    let member = cls.contains(&brute::ids(p));
                    if oracle.equivalent(&ys, &ps) != member {
                        fail = Some(format!("equivalent({:?}, {:?})", brute::ids(&y), brute::ids(p)));
                    } else if member && oracle.canonicalize(&ps).ids().collect::<Vec<_>>() != canon {
                        fail = Some(format!("canonicalize({:?})", brute::ids(p)));
                    }
                    pairs += 1;
                });
                brute::arrangements(&y, &mut |x| {
                    if fail.is_some() {
                        return;
                    }
                    let xs = x.iter().cloned().collect();
                    if oracle.eq_prefix(&xs, &ys) != brute::eq_prefix_in(x, &y, &cls) {
                        fail = Some(format!("eq_prefix({:?}, {:?})", brute::ids(x), brute::ids(&y)));
                    }
                    pairs += 1;
                });
                let mut with_foreign = y.clone();
                with_foreign.truncate(len.saturating_sub(1));
                with_foreign.push(foreign.clone());
                if oracle.eq_prefix(&with_foreign.iter().cloned().collect(), &ys) {
                    fail = Some(format!("eq_prefix accepted a foreign command against {:?}", brute::ids(&y)));
                }
                if let Some(f) = fail {
                    return Err(f);
                }
                sequences += 1;
            }
            // next shape vector, odometer style
            let mut i = 0;
            while i < len {
                shapes[i] += 1;
                if shapes[i] < SHAPES {
                    break;
                }
                shapes[i] = 0;
                i += 1;
            }
            if i == len {
                break;
            }
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < ALGEBRA_BUDGET, || format!("took {elapsed:?}"))?;
    Ok(format!("{sequences} sequences, {pairs} comparisons against brute force, {elapsed:.1?}"))
}

fn trace_text(cfg: &SimConfig) -> String {
    let mut cfg = cfg.clone();
    cfg.record_trace = true;
    let o = run_ok(&cfg);
    let mut out = Vec::new();
    o.trace.write_to(&mut out, &o.verdict).expect("in-memory write");
    String::from_utf8(out).expect("trace is utf-8")
}

fn determinism_and_codec() -> Check {
    for (name, seed) in [("campaign_n7.scn", 3), ("checkpoint.scn", 1), ("crash_leader.scn", 2)] {
        let mut cfg = scenario(name);
        cfg.seed = seed;
        ensure(trace_text(&cfg) == trace_text(&cfg), || format!("{name} seed {seed}: traces differ"))?;
    }

    let samples = sample_messages();
    let mut tags: Vec<u8> = samples.iter().map(|m| m.tag()).collect();
    tags.dedup();
    ensure(tags.len() == bgp_core::wire::tag::NAMES.len(), || format!("samples cover {} variants", tags.len()))?;
    for m in &samples {
        let bytes = encode(m);
        let back = decode(&bytes).map_err(|e| format!("{}: {e}", m.name()))?;
        ensure(&back == m && encode(&back) == bytes, || format!("{} does not round-trip", m.name()))?;
    }

    let encoded: Vec<Vec<u8>> = samples.iter().map(encode).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut accepted = 0;
    for case in 0..FUZZ_CASES {
        let input: Vec<u8> = if case % 2 == 0 {
            let len = rng.gen_range(0..200);
            let mut v: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
            if let Some(b) = v.first_mut() {
                *b = rng.gen_range(0..16);
            }
            v
        } else {
            let mut v = encoded[rng.gen_range(0..encoded.len())].clone();
            for _ in 0..rng.gen_range(1..4) {
                match rng.gen_range(0..3) {
                    0 if !v.is_empty() => {
                        let i = rng.gen_range(0..v.len());
                        v[i] = rng.gen();
                    }
                    1 => v.truncate(rng.gen_range(0..=v.len())),
                    _ => v.push(rng.gen()),
                }
            }
            v
        };
        let result = catch_unwind(AssertUnwindSafe(|| decode(&input)));
        match result {
            Err(_) => return Err(format!("decoder panicked on case {case}: {}", hex::encode(&input))),
            Ok(Ok(m)) => {
                accepted += 1;
                ensure(encode(&m) == input, || format!("case {case} decoded but is not canonical"))?;
            }
            Ok(Err(_)) => {}
        }
    }

    let wire_golden: String = samples.iter().map(|m| format!("{} {}\n", m.name(), hex::encode(encode(m)))).collect();
    common::check_golden("wire_samples.hex", &wire_golden)?;
    let mut cfg = scenario("happy.scn");
    cfg.seed = 7;
    common::check_golden("happy_seed7.trace", &trace_text(&cfg))?;

    Ok(format!(
        "traces repeat exactly, {} variants round-trip, {FUZZ_CASES} fuzz cases ({accepted} decoded) without a panic, goldens match",
        tags.len()
    ))
}

type Criterion<'a> = (&'static str, Box<dyn Fn() -> Check + 'a>);

fn main() {
    let c = campaign();
    let criteria: [Criterion<'_>; 9] = [
        ("safety campaign", Box::new(|| safety(&c))),
        ("liveness", Box::new(|| liveness(&c))),
        ("message-step depth", Box::new(|| depth(&c))),
        ("conflict arbitration", Box::new(conflict)),
        ("view change", Box::new(view_change)),
        ("guard efficacy", Box::new(|| guards(&c))),
        ("checkpointing", Box::new(checkpointing)),
        ("algebra vs brute force", Box::new(algebra)),
        ("determinism and codec", Box::new(determinism_and_codec)),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        match result {
            Ok(detail) => println!("criterion {} {name}: PASS {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} {name}: FAIL {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
