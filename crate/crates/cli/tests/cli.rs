use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_riesz-tf"));
    cmd.args(args).env_remove("RIESZ_TF_FERRARI_ORDER").env_remove("RIESZ_TF_FERRARI_PANELS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn solve_critical_case_passes_regime_check() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = run(&["solve", "--q", "1.5", "--potential", "vz:1", "--out", out], &[]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    let report = json(&dir.path().join("result.json"));
    assert_eq!(report["regime"], "ii");
    assert_eq!(report["verdicts"]["regime"]["verdict"], "pass");
    assert_eq!(report["pass"], true);
    let density = std::fs::read_to_string(dir.path().join("density.csv")).unwrap();
    assert!(density.starts_with("r,rho,u,V\n"));
    assert_eq!(density.lines().count(), report["nodes"].as_u64().unwrap() as usize + 1);
}

#[test]
fn inadmissible_exponent_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["solve", "--q", "0.9", "--out", dir.path().to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("inadmissible"), "{}", stderr(&o));
}

#[test]
fn unknown_config_key_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "q = 1.5\nbogus = 2\n").unwrap();
    let o = run(&["solve", "--config", cfg.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("bogus"));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# regime v\nq = 0.9\npotential = \"vz:1\"\n").unwrap();
    let out = dir.path().join("o");
    let o = run(&["solve", "--config", cfg.to_str().unwrap(), "--q", "2", "--out", out.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(json(&out.join("result.json"))["params"]["q"], 2.0);
}

#[test]
fn bump_ordering_is_strict() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        &["solve", "--q", "1.8", "--potential", "bump:1,1", "--verify", "ordering", "--out", dir.path().to_str().unwrap()],
        &[],
    );
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    let ordering = &json(&dir.path().join("result.json"))["verdicts"]["ordering"];
    assert_eq!(ordering["ordered"], true);
    assert_eq!(ordering["coincide"], false);
}

#[test]
fn sweep_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = |out: &str| vec!["sweep", "--q", "1.4,5/3,2", "--potential", "vz:1", "--out", out].into_iter().map(String::from).collect::<Vec<_>>();
    let pa = args(a.path().to_str().unwrap());
    let pb = args(b.path().to_str().unwrap());
    let oa = run(&pa.iter().map(String::as_str).collect::<Vec<_>>(), &[("RIESZ_TF_THREADS", "1")]);
    let ob = run(&pb.iter().map(String::as_str).collect::<Vec<_>>(), &[("RIESZ_TF_THREADS", "4")]);
    assert_eq!(oa.status.code(), Some(0), "{}", stdout(&oa));
    assert_eq!(ob.status.code(), Some(0));
    let ca = std::fs::read(a.path().join("sweep.csv")).unwrap();
    let cb = std::fs::read(b.path().join("sweep.csv")).unwrap();
    assert_eq!(ca, cb);
    assert_eq!(String::from_utf8(ca).unwrap().lines().count(), 4);
}

#[test]
fn sweep_without_verification_skips_checks() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["sweep", "--q", "2", "--verify", "none", "--out", dir.path().to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(0));
    let mut rdr = csv::Reader::from_path(dir.path().join("sweep.csv")).unwrap();
    let headers = rdr.headers().unwrap().clone();
    let row = rdr.records().next().unwrap().unwrap();
    for col in ["regime_pass", "mass_pass", "sharp_pass", "ordering_pass"] {
        let i = headers.iter().position(|h| h == col).unwrap();
        assert_eq!(&row[i], "skipped");
    }
}

#[test]
fn barriers_pass_and_write_samples() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["verify-barriers", "--barrier", "gbeta:1.5", "--barrier", "log:1", "--out", dir.path().to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let text = std::fs::read_to_string(dir.path().join("barriers.csv")).unwrap();
    assert!(text.starts_with("family,r,value,compensated\n"));
    assert_eq!(text.lines().count(), 1 + 2 * 20);
    let report = json(&dir.path().join("barriers.json"));
    assert_eq!(report["reports"].as_array().unwrap().len(), 2);
}

#[test]
fn selftest_passes() {
    let o = run(&["selftest"], &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let o = run(&["selftest", "--d", "3", "--alpha", "1.5"], &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
}

#[test]
fn coarse_ferrari_controls_fail_selftest() {
    let o = run(&["selftest"], &[("RIESZ_TF_FERRARI_ORDER", "1"), ("RIESZ_TF_FERRARI_PANELS", "1")]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("FAIL"));
}

#[test]
fn regimes_table_lists_thresholds() {
    let o = run(&["regimes", "--q", "1.4"], &[]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert!(s.contains("q1") && s.contains("regime i "));
}
