use std::path::PathBuf;
use std::process::{Command, Output};

fn scenario(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
        .display()
        .to_string()
}

fn bgp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bgp"))
        .args(args)
        .env_remove("BGP_LOG_LEVEL")
        .output()
        .expect("bgp runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn happy_path_exits_zero() {
    let o = bgp(&["run-scenario", "--scenario", &scenario("happy.scn"), "--seed", "1"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("verdict      pass"));
}

#[test]
fn too_few_acceptors_exits_two_and_cites_the_bound() {
    let o = bgp(&["run-scenario", "--scenario", &scenario("too_few_acceptors.scn")]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("N >= 3f+1"));
}

#[test]
fn missing_file_and_bad_range_exit_two() {
    assert_eq!(bgp(&["run-scenario", "--scenario", "/nonexistent.scn"]).status.code(), Some(2));
    let o = bgp(&["campaign", "--scenario", &scenario("happy.scn"), "--seeds", "9..2"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn violation_fixture_exits_one() {
    let o = bgp(&["run-scenario", "--scenario", &scenario("tampered_learner.scn"), "--report", "json-lines"]);
    assert_eq!(o.status.code(), Some(1));
    let out = stdout(&o);
    assert!(out.lines().any(|l| l.contains("\"property\":\"consistency\"")));
    for line in out.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["kind"].is_string());
    }
}

#[test]
fn output_and_trace_are_byte_identical_across_invocations() {
    let dir = tempfile::tempdir().unwrap();
    let (t1, t2) = (dir.path().join("a.trace"), dir.path().join("b.trace"));
    let args = |t: &PathBuf| {
        vec![
            "run-scenario".to_string(),
            "--scenario".into(),
            scenario("campaign_n4.scn"),
            "--seed".into(),
            "12".into(),
            "--trace-out".into(),
            t.display().to_string(),
        ]
    };
    let run = |t: &PathBuf| {
        let a = args(t);
        bgp(&a.iter().map(String::as_str).collect::<Vec<_>>())
    };
    let (o1, o2) = (run(&t1), run(&t2));
    assert_eq!(o1.status.code(), Some(0));
    assert_eq!(o1.stdout, o2.stdout);
    let (a, b) = (std::fs::read_to_string(&t1).unwrap(), std::fs::read_to_string(&t2).unwrap());
    assert_eq!(a, b);
    assert!(a.contains("\nverdict pass\n") && a.ends_with("end\n"));
    let digest = stdout(&o1).lines().find_map(|l| l.strip_prefix("digest")).unwrap().trim().to_string();
    assert!(a.contains(&format!("digest {digest}\n")));
}

fn campaign(name: &str, seeds: &str, jobs: &str) -> Output {
    bgp(&["campaign", "--scenario", &scenario(name), "--seeds", seeds, "--jobs", jobs])
}

fn field<'a>(out: &'a str, key: &str) -> &'a str {
    out.lines()
        .find_map(|l| l.strip_prefix(key))
        .unwrap_or_else(|| panic!("no {key} in\n{out}"))
        .trim()
}

#[test]
fn fault_free_campaign_learns_fast_at_depth_three() {
    let o = campaign("happy.scn", "0..100", "2");
    let out = stdout(&o);
    assert_eq!(o.status.code(), Some(0), "{out}");
    assert_eq!(field(&out, "passed"), "100");
    let fast = field(&out, "fast-path depth");
    assert!(fast.starts_with("3:") && !fast.contains(' '), "{fast}");
}

#[test]
fn universal_campaign_learns_at_depth_two() {
    let out = stdout(&campaign("universal.scn", "0..20", "1"));
    assert!(field(&out, "universal depth").starts_with("2:"));
    assert_eq!(field(&out, "fast-path depth"), "-");
}

#[test]
fn faulty_campaign_passes_and_ignores_job_count() {
    let a = campaign("campaign_n4.scn", "0..100", "1");
    let b = campaign("campaign_n4.scn", "0..100", "3");
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(field(&stdout(&a), "passed"), "100");
    assert_eq!(a.stdout, b.stdout);
}
