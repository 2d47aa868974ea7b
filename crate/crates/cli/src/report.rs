//! Text and json-lines renderings of run and campaign results.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde_json::json;

use crate::RunSummary;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Text,
    JsonLines,
}

fn hist<K: std::fmt::Display>(h: &BTreeMap<K, usize>) -> String {
    if h.is_empty() {
        return "-".into();
    }
    h.iter().map(|(k, n)| format!("{k}:{n}")).collect::<Vec<_>>().join(" ")
}

pub fn run_report(scenario: &str, s: &RunSummary, format: Format) -> String {
    let mut out = String::new();
    match format {
        Format::Text => {
            let depths: BTreeMap<String, usize> = s.depths.iter().map(|((p, d), n)| (format!("{p}@{d}"), *n)).collect();
            let learned: Vec<String> = s.learned.iter().map(|(l, n)| format!("{l}={n}")).collect();
            let _ = writeln!(out, "scenario     {scenario}");
            let _ = writeln!(out, "seed         {}", s.seed);
            let _ = writeln!(out, "verdict      {}", if s.passed { "pass" } else { "fail" });
            for v in &s.violations {
                let _ = writeln!(out, "violation    step={} {} {}", v.step, v.property, v.detail);
            }
            let _ = writeln!(out, "events       {}", s.events);
            let _ = writeln!(out, "virtual time {}", s.final_time);
            let _ = writeln!(out, "learned      {}", learned.join(" "));
            let _ = writeln!(out, "depths       {}", hist(&depths));
            let _ = writeln!(out, "view changes {}", s.view_changes);
            let _ = writeln!(out, "digest       {}", s.digest);
        }
        Format::JsonLines => {
            let line = json!({
                "kind": "run",
                "scenario": scenario,
                "seed": s.seed,
                "verdict": if s.passed { "pass" } else { "fail" },
                "events": s.events,
                "virtual_time": s.final_time,
                "view_changes": s.view_changes,
                "learned": s.learned.iter().map(|(l, n)| json!({"learner": l, "commands": n})).collect::<Vec<_>>(),
                "digest": s.digest,
            });
            let _ = writeln!(out, "{line}");
            for ((path, depth), n) in &s.depths {
                let _ = writeln!(out, "{}", json!({"kind": "depth", "path": path, "depth": depth, "learns": n}));
            }
            for v in &s.violations {
                let _ = writeln!(out, "{}", json!({"kind": "violation", "step": v.step, "property": v.property, "detail": v.detail}));
            }
        }
    }
    out
}

/// Aggregate of a seed range.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CampaignSummary {
    pub runs: usize,
    pub passed: usize,
    pub failed_seeds: Vec<u64>,
    pub violations: BTreeMap<String, usize>,
    pub fast_depths: BTreeMap<u32, usize>,
    pub classic_depths: BTreeMap<u32, usize>,
    pub universal_depths: BTreeMap<u32, usize>,
    pub view_changes: BTreeMap<usize, usize>,
}

impl CampaignSummary {
    pub fn from_runs(runs: &[RunSummary]) -> Self {
        let mut c = CampaignSummary {
            runs: runs.len(),
            ..Default::default()
        };
        for r in runs {
            if r.passed {
                c.passed += 1;
            } else {
                c.failed_seeds.push(r.seed);
            }
            for v in &r.violations {
                *c.violations.entry(v.property.clone()).or_default() += 1;
            }
            for ((path, depth), n) in &r.depths {
                let h = match path.as_str() {
                    "certified-fast" => &mut c.fast_depths,
                    "certified-classic" => &mut c.classic_depths,
                    _ => &mut c.universal_depths,
                };
                *h.entry(*depth).or_default() += n;
            }
            *c.view_changes.entry(r.view_changes).or_default() += 1;
        }
        c
    }
}

pub fn campaign_report(scenario: &str, seeds: &str, c: &CampaignSummary, format: Format) -> String {
    let mut out = String::new();
    match format {
        Format::Text => {
            let failed: Vec<String> = c.failed_seeds.iter().map(u64::to_string).collect();
            let _ = writeln!(out, "scenario          {scenario}");
            let _ = writeln!(out, "seeds             {seeds}");
            let _ = writeln!(out, "runs              {}", c.runs);
            let _ = writeln!(out, "passed            {}", c.passed);
            let _ = writeln!(out, "failed            {}", c.failed_seeds.len());
            if !failed.is_empty() {
                let _ = writeln!(out, "failed seeds      {}", failed.join(" "));
            }
            let _ = writeln!(out, "violations        {}", hist(&c.violations));
            let _ = writeln!(out, "fast-path depth   {}", hist(&c.fast_depths));
            let _ = writeln!(out, "classic depth     {}", hist(&c.classic_depths));
            let _ = writeln!(out, "universal depth   {}", hist(&c.universal_depths));
            let _ = writeln!(out, "view changes      {}", hist(&c.view_changes));
        }
        Format::JsonLines => {
            let h = |m: &BTreeMap<u32, usize>| m.iter().map(|(k, v)| (k.to_string(), json!(v))).collect::<serde_json::Map<_, _>>();
            let line = json!({
                "kind": "campaign",
                "scenario": scenario,
                "seeds": seeds,
                "runs": c.runs,
                "passed": c.passed,
                "failed_seeds": c.failed_seeds,
                "violations": c.violations,
                "fast_depths": h(&c.fast_depths),
                "classic_depths": h(&c.classic_depths),
                "universal_depths": h(&c.universal_depths),
                "view_changes": c.view_changes.iter().map(|(k, v)| (k.to_string(), json!(v))).collect::<serde_json::Map<_, _>>(),
            });
            let _ = writeln!(out, "{line}");
        }
    }
    out
}
