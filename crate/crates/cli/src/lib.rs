//! Library side of the `bgp` binary: loading scenarios, running them and
//! turning outcomes into reports.

use std::collections::BTreeMap;
use std::ops::Range;
use std::path::{Path, PathBuf};

use bgp_core::sim::{parse_scenario, run, ConfigError, Outcome, SimConfig};
use rayon::prelude::*;
use thiserror::Error;

pub mod report;

/// Process exit statuses.
pub const EXIT_PASS: i32 = 0;
pub const EXIT_VIOLATION: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error("invalid scenario: {0}")]
    Config(#[from] ConfigError),
    #[error("bad seed range `{0}`, expected a..b or a..=b")]
    Seeds(String),
    #[error("cannot start worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        EXIT_CONFIG
    }
}

pub fn load_scenario(path: &Path) -> Result<SimConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_owned(),
        source,
    })?;
    Ok(parse_scenario(&text)?)
}

/// Parses `a..b` (half-open) or `a..=b`.
pub fn parse_seeds(s: &str) -> Result<Range<u64>, CliError> {
    let bad = || CliError::Seeds(s.to_string());
    let (lo, hi) = s.split_once("..").ok_or_else(bad)?;
    let (hi, inclusive) = match hi.strip_prefix('=') {
        Some(h) => (h, true),
        None => (hi, false),
    };
    let lo: u64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: u64 = hi.trim().parse().map_err(|_| bad())?;
    let hi = if inclusive { hi.checked_add(1).ok_or_else(bad)? } else { hi };
    if hi <= lo {
        return Err(bad());
    }
    Ok(lo..hi)
}

/// What one run produced, minus the trace.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunSummary {
    pub seed: u64,
    pub passed: bool,
    pub violations: Vec<ViolationLine>,
    pub events: u64,
    pub final_time: u64,
    /// `(path, depth) -> learns`.
    pub depths: BTreeMap<(String, u32), usize>,
    pub view_changes: usize,
    pub learned: Vec<(String, usize)>,
    pub digest: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ViolationLine {
    pub step: u64,
    pub property: String,
    pub detail: String,
}

impl RunSummary {
    pub fn from_outcome(seed: u64, o: &Outcome) -> Self {
        let mut depths = BTreeMap::new();
        for l in &o.stats.learns {
            *depths.entry((l.path.to_string(), l.depth)).or_default() += 1;
        }
        RunSummary {
            seed,
            passed: o.verdict.passed(),
            violations: o
                .verdict
                .violations
                .iter()
                .map(|v| ViolationLine {
                    step: v.step,
                    property: v.property.to_string(),
                    detail: v.detail.clone(),
                })
                .collect(),
            events: o.stats.events,
            final_time: o.stats.final_time,
            depths,
            view_changes: o.stats.view_changes(),
            learned: o.stats.learned_lens.iter().map(|(p, n)| (p.to_string(), *n)).collect(),
            digest: o.trace.final_digest(),
        }
    }
}

/// Runs one seed. The trace is recorded only when `record` is set.
pub fn run_one(cfg: &SimConfig, seed: u64, record: bool) -> Result<Outcome, CliError> {
    let mut cfg = cfg.clone();
    cfg.seed = seed;
    cfg.record_trace = record;
    Ok(run(&cfg)?)
}

/// Runs every seed on `jobs` worker threads. Results come back in seed
/// order whatever the scheduling.
pub fn run_campaign(cfg: &SimConfig, seeds: Range<u64>, jobs: usize) -> Result<Vec<RunSummary>, CliError> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build()?;
    pool.install(|| {
        seeds
            .into_par_iter()
            .map(|seed| {
                let o = run_one(cfg, seed, false)?;
                log::info!("seed {seed}: {}", if o.verdict.passed() { "pass" } else { "fail" });
                Ok(RunSummary::from_outcome(seed, &o))
            })
            .collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_ranges() {
        assert_eq!(parse_seeds("0..100").unwrap(), 0..100);
        assert_eq!(parse_seeds("5..=5").unwrap(), 5..6);
        assert!(parse_seeds("3..3").is_err());
        assert!(parse_seeds("x..4").is_err());
        assert!(parse_seeds("7").is_err());
    }
}
