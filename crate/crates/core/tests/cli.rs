use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn satdist(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_satdist")).args(args).output().expect("spawn satdist")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn without_timing(json: &str) -> Value {
    let mut v: Value = serde_json::from_str(json).unwrap();
    v.as_object_mut().unwrap().remove("timing");
    v
}

#[test]
fn learn_writes_report_and_sidecars() {
    let dir = TempDir::new().unwrap();
    let f = write(dir.path(), "or.cnf", "c x1 or x2\np cnf 3 1\n1 2 0\n");
    let out = dir.path().join("run");
    let o = satdist(&[
        "learn", "--function", &f, "--epsilon", "0.3", "--delta", "0.2", "--samples", "50", "--seed", "4",
        "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["schema"], "satdist-report/1");
    assert_eq!(report["num_trials"], 2);
    assert_eq!(report["n"], 3);
    assert_eq!(report["satisfying_count"], 6);
    let trials = report["trials"].as_array().unwrap();
    assert_eq!(trials.len(), 2);
    for t in trials {
        let m = &t["exact"];
        assert!(m["l1"].as_f64().unwrap() <= m["pinsker_bound"].as_f64().unwrap() + 1e-12);
        let c = &t["confusion"];
        let total: u64 = ["tp", "fp", "tn", "fn"].iter().map(|k| c[k].as_u64().unwrap()).sum();
        assert_eq!(total, 8);
    }
    let weights = fs::read_to_string(out.join("weights.txt")).unwrap();
    assert_eq!(weights.lines().count(), 3);
    let trace = fs::read_to_string(out.join("trace_trial_1.csv")).unwrap();
    assert!(trace.starts_with("t,risk_estimate,iterate_norm\n"));
    let t = report["iterations_per_trial"].as_u64().unwrap() as usize;
    assert_eq!(trace.lines().count(), t + 1);
}

#[test]
fn learn_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let f = write(dir.path(), "f.hex", "e8\n");
    let args = |out: &str| {
        vec![
            "learn".to_string(), "--function".into(), f.clone(), "--format".into(), "tt-hex".into(),
            "--epsilon".into(), "0.2".into(), "--samples".into(), "40".into(), "--seed".into(), "17".into(),
            "--surrogate".into(), "phuber".into(), "--out".into(), out.to_string(),
        ]
    };
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let argv = args(out.to_str().unwrap());
        let o = satdist(&argv.iter().map(String::as_str).collect::<Vec<_>>());
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let ra = fs::read_to_string(a.join("report.json")).unwrap();
    let rb = fs::read_to_string(b.join("report.json")).unwrap();
    assert_eq!(without_timing(&ra), without_timing(&rb));
    assert_eq!(fs::read(a.join("weights.txt")).unwrap(), fs::read(b.join("weights.txt")).unwrap());
}

#[test]
fn learn_from_config_file_with_override() {
    let dir = TempDir::new().unwrap();
    let f = write(dir.path(), "f.ltf", "1 1 1 ; 1\n");
    let cfg = write(
        dir.path(),
        "cfg.json",
        &format!(r#"{{"function": {f:?}, "format": "ltf", "epsilon": 0.5, "samples": 30, "seed": 1}}"#),
    );
    let o = satdist(&["learn", "--config", &cfg, "--delta", "0.5"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["config"]["format"], "ltf");
    assert_eq!(report["config"]["delta"], 0.5);
    assert_eq!(report["num_trials"], 1);
    assert_eq!(report["satisfying_count"], 4);
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let sat = write(dir.path(), "sat.cnf", "p cnf 2 1\n1 2 0\n");
    let unsat = write(dir.path(), "unsat.cnf", "p cnf 2 2\n1 0\n-1 0\n");
    let broken = write(dir.path(), "broken.cnf", "p cnf 2 1\n1 5 0\n");

    assert_eq!(satdist(&["learn", "--function", &sat, "--epsilon", "-1"]).status.code(), Some(2));
    assert_eq!(satdist(&["learn", "--function", &sat, "--delta", "1.5"]).status.code(), Some(2));
    assert_eq!(satdist(&["learn", "--function", &sat, "--samples", "4"]).status.code(), Some(2));
    assert_eq!(satdist(&["learn", "--function", &broken]).status.code(), Some(2));
    assert_eq!(satdist(&["learn", "--function", "/nonexistent/f.cnf"]).status.code(), Some(2));
    assert_eq!(satdist(&["learn"]).status.code(), Some(2));
    assert_eq!(satdist(&["learn", "--function", &unsat]).status.code(), Some(3));
    assert_eq!(satdist(&["learn", "--function", &sat, "--surrogate", "sine"]).status.code(), Some(2));
}

#[test]
fn enumerate_lists_and_exports() {
    let dir = TempDir::new().unwrap();
    let f = write(dir.path(), "or.cnf", "p cnf 2 1\n1 2 0\n");
    let o = satdist(&["enumerate", "--function", &f]);
    assert!(o.status.success());
    assert_eq!(String::from_utf8(o.stdout).unwrap(), "1 -+\n2 +-\n3 ++\n");

    let o = satdist(&["enumerate", "--function", &f, "--csv"]);
    let csv = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "index,bits,prob");
    assert_eq!(lines[1], "0,--,0");
    assert!(lines[4].starts_with("3,++,0.333"));

    let hex = write(dir.path(), "and.hex", "8");
    let o = satdist(&["enumerate", "--function", &hex, "--format", "tt-hex"]);
    assert_eq!(String::from_utf8(o.stdout).unwrap(), "3 ++\n");
}

#[test]
fn eval_between_weight_files() {
    let dir = TempDir::new().unwrap();
    let p = write(dir.path(), "p.txt", "0\n0\n");
    let q = write(dir.path(), "q.txt", "0.5\n-0.5\n");
    let o = satdist(&["eval", "--p", &p, "--q", &q]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let kl = v["kl"].as_f64().unwrap();
    // KL(U, P_w) = Σ ln(2cosh w_i) − n ln 2 when P is uniform
    let expected = 2.0 * ((2.0 * 0.5f64.cosh()).ln() - std::f64::consts::LN_2);
    assert!((kl - expected).abs() < 1e-12);
    assert!(v["l1"].as_f64().unwrap() <= v["pinsker_bound"].as_f64().unwrap());
    assert!((v["entropy_p"].as_f64().unwrap() - 2.0 * std::f64::consts::LN_2).abs() < 1e-12);

    let r = write(dir.path(), "r.txt", "0.1\n");
    assert_eq!(satdist(&["eval", "--p", &p, "--q", &r]).status.code(), Some(2));
}

#[test]
fn gen_emits_parseable_instances() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("g.cnf");
    let o = satdist(&[
        "gen", "--kind", "cnf", "--n", "8", "--clauses", "12", "--width", "3", "--seed", "5", "--satisfiable",
        "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let text = fs::read_to_string(&out).unwrap();
    let f = satdist::boolfn::parse_dimacs(&text).unwrap();
    assert_eq!(f.n(), 8);
    assert!(!satdist::boolfn::enumerate_satisfying(&f).unwrap().is_empty());

    let o = satdist(&["gen", "--kind", "ltf", "--n", "5", "--seed", "5"]);
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(satdist::boolfn::parse_ltf(&text).unwrap().n(), 5);
    let again = satdist(&["gen", "--kind", "ltf", "--n", "5", "--seed", "5"]);
    assert_eq!(String::from_utf8(again.stdout).unwrap(), text);
}
