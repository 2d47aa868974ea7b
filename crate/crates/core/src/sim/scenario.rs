//! Scenario files: `key = value` lines, then a `[script]` section of
//! `step <t>: <action>` lines. `#` starts a comment. See docs/formats.md.

use std::collections::BTreeSet;

use crate::command::ProcessId;
use crate::leader::LeaderCertThreshold;
use crate::wire::{tag, BallotKind};

use super::config::{Action, BallotPolicy, ConfigError, DelayModel, ScriptEntry, SignatureScheme, SimConfig, Tamper};

fn bad(key: &str, value: &str) -> ConfigError {
    ConfigError::BadValue {
        key: key.to_string(),
        value: value.to_string(),
    }
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| bad(key, value))
}

fn boolean(key: &str, value: &str) -> Result<bool, ConfigError> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(bad(key, value)),
    }
}

/// Parses scenario text and validates the result.
pub fn parse_scenario(text: &str) -> Result<SimConfig, ConfigError> {
    let mut cfg = SimConfig::default();
    let mut seen = BTreeSet::new();
    let mut byzantine_raw: Option<String> = None;
    let mut script_raw: Vec<(usize, String)> = Vec::new();
    let mut in_script = false;

    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if line == "[script]" {
            in_script = true;
            continue;
        }
        if in_script {
            script_raw.push((i + 1, line.to_string()));
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::BadLine {
            line: i + 1,
            reason: "expected `key = value`".into(),
        })?;
        let (key, value) = (key.trim(), value.trim());
        if !seen.insert(key.to_string()) {
            return Err(ConfigError::BadLine {
                line: i + 1,
                reason: format!("duplicate key `{key}`"),
            });
        }
        match key {
            "acceptors" => cfg.n_acceptors = num(key, value)?,
            "f" => cfg.f = num(key, value)?,
            "proposers" => cfg.n_proposers = num(key, value)?,
            "learners" => cfg.n_learners = num(key, value)?,
            "seed" => cfg.seed = num(key, value)?,
            "max_steps" => cfg.max_steps = num(key, value)?,
            "progress_timeout" => cfg.progress_timeout = num(key, value)?,
            "monitor_interval" => cfg.monitor_interval = num(key, value)?,
            "delay" => cfg.delay = parse_delay(value)?,
            "sync_after" => cfg.sync_after = Some(num(key, value)?),
            "sync_delay" => cfg.sync_delay = num(key, value)?,
            "byzantine" => byzantine_raw = Some(value.to_string()),
            "ballots" => cfg.ballots = value.parse::<BallotPolicy>().map_err(|_| bad(key, value))?,
            "ballot_interval" => cfg.ballot_interval = num(key, value)?,
            "workload" => cfg.workload.commands = num(key, value)?,
            "workload_keys" => cfg.workload.keys = num(key, value)?,
            "workload_universal" => cfg.workload.universal_percent = num(key, value)?,
            "workload_reads" => cfg.workload.read_percent = num(key, value)?,
            "workload_start" => cfg.workload.start = num(key, value)?,
            "workload_interval" => cfg.workload.interval = num(key, value)?,
            "signatures" => {
                cfg.signatures = match value {
                    "hash" => SignatureScheme::Hash,
                    "ed25519" => SignatureScheme::Ed25519,
                    _ => return Err(bad(key, value)),
                }
            }
            "leader_threshold" => {
                cfg.leader_threshold = match value {
                    "quorum" => LeaderCertThreshold::Quorum,
                    "weak" => LeaderCertThreshold::WeakQuorum,
                    _ => return Err(bad(key, value)),
                }
            }
            "expect_liveness" => cfg.expect_liveness = boolean(key, value)?,
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
    }
    if cfg.n_acceptors < 3 * cfg.f + 1 {
        return Err(ConfigError::TooFewAcceptors {
            n: cfg.n_acceptors,
            f: cfg.f,
        });
    }
    if let Some(raw) = byzantine_raw {
        for item in raw.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (who, strategy) = item.split_once(':').ok_or_else(|| bad("byzantine", item))?;
            let pid = cfg.resolve(who.trim())?;
            cfg.byzantine.insert(pid, strategy.trim().parse()?);
        }
    }
    for (line, text) in script_raw {
        let entry = parse_script_line(&cfg, &text).map_err(|reason| match reason {
            ScriptErr::Config(e) => e,
            ScriptErr::Msg(reason) => ConfigError::BadLine { line, reason },
        })?;
        cfg.script.push(entry);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn parse_delay(value: &str) -> Result<DelayModel, ConfigError> {
    let parts: Vec<&str> = value.split_whitespace().collect();
    let n = |s: &str| num::<u64>("delay", s);
    match parts.as_slice() {
        ["uniform", lo, hi] => Ok(DelayModel::Uniform { lo: n(lo)?, hi: n(hi)? }),
        ["adversarial", lo, hi, dup] => Ok(DelayModel::Adversarial {
            lo: n(lo)?,
            hi: n(hi)?,
            dup_percent: num("delay", dup)?,
        }),
        _ => Err(bad("delay", value)),
    }
}

enum ScriptErr {
    Config(ConfigError),
    Msg(String),
}

impl From<ConfigError> for ScriptErr {
    fn from(e: ConfigError) -> Self {
        ScriptErr::Config(e)
    }
}

fn msg(s: impl Into<String>) -> ScriptErr {
    ScriptErr::Msg(s.into())
}

fn parse_script_line(cfg: &SimConfig, line: &str) -> Result<ScriptEntry, ScriptErr> {
    let rest = line.strip_prefix("step").ok_or_else(|| msg("expected `step <t>: <action>`"))?;
    let (at, action) = rest.split_once(':').ok_or_else(|| msg("missing `:`"))?;
    let at: u64 = at.trim().parse().map_err(|_| msg(format!("bad step `{}`", at.trim())))?;
    let words: Vec<&str> = action.split_whitespace().collect();
    let time = |s: &str| s.parse::<u64>().map_err(|_| msg(format!("bad time `{s}`")));
    let action = match words.as_slice() {
        ["ballot", "fast"] => Action::Ballot(BallotKind::Fast),
        ["ballot", "classic"] => Action::Ballot(BallotKind::Classic),
        ["inject", who, opts @ ..] => {
            let pid = cfg.resolve(who)?;
            if !cfg.is_proposer(pid) {
                return Err(msg(format!("`{who}` is not a proposer")));
            }
            let (mut reads, mut writes, mut universal) = (Vec::new(), Vec::new(), false);
            for o in opts {
                let keys = |s: &str| s.split(',').filter(|k| !k.is_empty()).map(String::from).collect::<Vec<_>>();
                if let Some(k) = o.strip_prefix("w=") {
                    writes = keys(k);
                } else if let Some(k) = o.strip_prefix("r=") {
                    reads = keys(k);
                } else if *o == "universal" {
                    universal = true;
                } else {
                    return Err(msg(format!("bad inject option `{o}`")));
                }
            }
            Action::Inject {
                proposer: pid.0 - cfg.n_acceptors,
                reads,
                writes,
                universal,
            }
        }
        ["crash", who] => Action::Crash(cfg.resolve(who)?),
        ["partition", group, "until", t] => {
            let group = group
                .split(',')
                .map(|g| cfg.resolve(g))
                .collect::<Result<Vec<ProcessId>, _>>()?;
            Action::Partition { group, until: time(t)? }
        }
        ["hold", who, name, ballot, "until", t] => Action::Hold {
            dst: cfg.resolve(who)?,
            tag: tag::from_name(name).ok_or_else(|| msg(format!("unknown message `{name}`")))?,
            ballot: time(ballot)?,
            until: time(t)?,
        },
        ["checkpoint"] => Action::Checkpoint,
        ["suspect"] => Action::Suspect,
        ["tamper", who, how] => {
            let learner = cfg.resolve(who)?;
            if !cfg.is_learner(learner) {
                return Err(msg(format!("`{who}` is not a learner")));
            }
            let how = match *how {
                "reverse" => Tamper::Reverse,
                "inject" => Tamper::Inject,
                _ => return Err(msg(format!("bad tamper mode `{how}`"))),
            };
            Action::Tamper { learner, how }
        }
        _ => return Err(msg(format!("unknown action `{}`", action.trim()))),
    };
    Ok(ScriptEntry { at, action })
}
