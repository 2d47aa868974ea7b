//! Event trace with a running state digest. The digest chain is always
//! kept; the text records only when asked for.

use std::io::{self, Write};

use sha2::{Digest as _, Sha256};

use super::oracle::Verdict;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceRecord {
    pub line: String,
    pub state: [u8; 32],
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trace {
    record: bool,
    records: Vec<TraceRecord>,
    head: [u8; 32],
    events: u64,
}

impl Trace {
    pub fn new(record: bool) -> Self {
        Self {
            record,
            records: Vec::new(),
            head: [0; 32],
            events: 0,
        }
    }

    /// Appends one event. `state` is a fingerprint of process state after
    /// the event was handled.
    pub fn push(&mut self, line: String, state: &[u8]) {
        let mut h = Sha256::new();
        h.update(self.head);
        h.update(line.as_bytes());
        h.update(state);
        self.head = h.finalize().into();
        self.events += 1;
        if self.record {
            self.records.push(TraceRecord { line, state: self.head });
        }
    }

    pub fn events(&self) -> u64 {
        self.events
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn final_digest(&self) -> String {
        hex::encode(self.head)
    }

    /// Writes the records, then the verdict block.
    pub fn write_to(&self, w: &mut impl Write, verdict: &Verdict) -> io::Result<()> {
        for r in &self.records {
            writeln!(w, "{}", r.line)?;
            writeln!(w, "  state {}", hex::encode(r.state))?;
        }
        writeln!(w, "verdict {}", if verdict.passed() { "pass" } else { "fail" })?;
        for v in &verdict.violations {
            writeln!(w, "violation step={} property={} {}", v.step, v.property, v.detail)?;
        }
        writeln!(w, "events {}", self.events)?;
        writeln!(w, "digest {}", self.final_digest())?;
        writeln!(w, "end")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_depends_on_order() {
        let mut a = Trace::new(false);
        a.push("x".into(), b"1");
        a.push("y".into(), b"2");
        let mut b = Trace::new(false);
        b.push("y".into(), b"2");
        b.push("x".into(), b"1");
        assert_ne!(a.final_digest(), b.final_digest());
        assert!(a.records().is_empty());
    }

    #[test]
    fn recorded_trace_ends_with_verdict() {
        let mut t = Trace::new(true);
        t.push("1 t=0 action".into(), b"");
        let mut out = Vec::new();
        t.write_to(&mut out, &Verdict::default()).unwrap();
        let s = String::from_utf8(out).unwrap();
        assert!(s.starts_with("1 t=0 action\n  state "));
        assert!(s.contains("verdict pass\n"));
        assert!(s.ends_with("end\n"));
    }
}
