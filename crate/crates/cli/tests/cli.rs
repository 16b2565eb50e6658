use std::path::Path;
use std::process::{Command, Output};

use fgmc::dump::DumpReader;
use serde_json::Value;

fn fgmc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fgmc")).args(args).env_remove("FGMC_SEED").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn exact_pm1_cancels() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.json");
    let o = fgmc(&["exact", "--preset", "pm(1)", "--size", "3", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let s = read_json(&out);
    assert_eq!(s["bins"]["plus"]["count"], "256");
    assert_eq!(s["bins"]["minus"]["count"], "256");
    assert_eq!(s["z_f"][0].as_f64().unwrap(), 0.0);
}

#[test]
fn exact_methods_agree() {
    let o = fgmc(&["exact", "--preset", "neg13", "--size", "3", "--method", "both", "--json"]);
    assert!(o.status.success());
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["agree"], true);
    assert_eq!(v["brute"]["bins"], v["transfer"]["bins"]);
}

#[test]
fn exact_complex_has_four_bins() {
    let o = fgmc(&["exact", "--preset", "cplx15i", "--size", "2", "--json"]);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let total: u64 = ["plus", "minus", "plus_i", "minus_i"]
        .iter()
        .map(|b| v["bins"][b]["count"].as_str().unwrap().parse::<u64>().unwrap())
        .sum();
    assert_eq!(total, 16);
}

#[test]
fn kernel_files_are_read() {
    let dir = tempfile::tempdir().unwrap();
    let k = dir.path().join("k.json");
    std::fs::write(&k, r#"{"entries": [[[1.3, 0], [-1, 0]], [[-1, 0], [1, 0]]]}"#).unwrap();
    let a = fgmc(&["exact", "--kernel-file", k.to_str().unwrap(), "--size", "3", "--json"]);
    let b = fgmc(&["exact", "--preset", "neg13", "--size", "3", "--json"]);
    let (a, b): (Value, Value) = (serde_json::from_str(&stdout(&a)).unwrap(), serde_json::from_str(&stdout(&b)).unwrap());
    assert_eq!(a["bins"], b["bins"]);
}

#[test]
fn exit_codes_follow_error_kinds() {
    assert_eq!(fgmc(&["exact", "--preset", "nope", "--size", "3"]).status.code(), Some(2));
    assert_eq!(fgmc(&["exact", "--size", "3"]).status.code(), Some(2));
    assert_eq!(fgmc(&["exact", "--preset", "neg13", "--size", "3", "--bogus"]).status.code(), Some(2));
    assert_eq!(fgmc(&["exact", "--preset", "neg13", "--size", "20"]).status.code(), Some(3));
    assert_eq!(fgmc(&["exact", "--preset", "cplx15i", "--size", "6", "--method", "brute"]).status.code(), Some(3));
    let o = fgmc(&["estimate", "--preset", "cplx15i", "--size", "3", "--estimator", "count_absgibbs"]);
    assert_eq!(o.status.code(), Some(4));
    let dir = tempfile::tempdir().unwrap();
    let k = dir.path().join("hard.json");
    std::fs::write(&k, r#"{"entries": [[[1, 0], [0, 0]], [[0, 0], [1, 0]]]}"#).unwrap();
    let o = fgmc(&["estimate", "--kernel-file", k.to_str().unwrap(), "--size", "3", "--estimator", "ogata_tanemura"]);
    assert_eq!(o.status.code(), Some(4));
    let o = fgmc(&["estimate", "--preset", "neg13", "--size", "3", "--K", "0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn degenerate_run_writes_valid_files() {
    let dir = tempfile::tempdir().unwrap();
    let o = fgmc(&[
        "estimate", "--preset", "neg13", "--size", "6", "--chains", "1", "--K", "1", "--svg", "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "chain_id,k,estimate_log2,estimate_re,estimate_im");
    assert_eq!(lines.len(), 2);
    assert!(lines[1].starts_with("0,1,"));
    let s = read_json(&dir.path().join("summary.json"));
    assert_eq!(s["K"], 1);
    assert_eq!(s["quantities"][0]["finals_log2"].as_array().unwrap().len(), 1);
    let svg = std::fs::read_to_string(dir.path().join("traces.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("polyline"));
}

#[test]
fn config_file_sits_between_flags_and_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(
        &cfg,
        r#"{"preset": "neg13", "size": 4, "estimator": "count_uniform", "K": "1e3", "chains": 5, "seed": 3}"#,
    )
    .unwrap();
    let out = dir.path().join("o");
    let o = fgmc(&["estimate", "--config", cfg.to_str().unwrap(), "--chains", "2", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = read_json(&out.join("summary.json"));
    assert_eq!(s["chains"], 2);
    assert_eq!(s["K"], 1000);
    assert_eq!(s["seed"], 3);
    assert_eq!(s["estimator"], "count_uniform");
    assert_eq!(s["burn_in"], 100);
}

#[test]
fn seed_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let run = |seed: Option<&str>, sub: &str| {
        let out = dir.path().join(sub);
        let mut c = Command::new(env!("CARGO_BIN_EXE_fgmc"));
        c.args(["estimate", "--preset", "neg13", "--size", "3", "--K", "50", "--chains", "2", "--out"]).arg(&out);
        c.env_remove("FGMC_SEED");
        if let Some(s) = seed {
            c.env("FGMC_SEED", s);
        }
        assert!(c.output().unwrap().status.success());
        (read_json(&out.join("summary.json"))["seed"].clone(), std::fs::read(out.join("trace.csv")).unwrap())
    };
    let (s1, a) = run(Some("41"), "a");
    let (s2, b) = run(Some("41"), "b");
    let (s3, _) = run(None, "c");
    assert_eq!((s1, s3), (Value::from(41), Value::from(0)));
    assert_eq!(s2, 41);
    assert_eq!(a, b);
    let mut c = Command::new(env!("CARGO_BIN_EXE_fgmc"));
    c.args(["estimate", "--preset", "neg13", "--size", "3"]).env("FGMC_SEED", "abc");
    assert_eq!(c.output().unwrap().status.code(), Some(2));
}

#[test]
fn sample_dumps_hold_the_estimator_samples() {
    let dir = tempfile::tempdir().unwrap();
    let o = fgmc(&[
        "estimate", "--preset", "neg13", "--size", "3", "--estimator", "ogata_tanemura", "--bin", "minus", "--K",
        "40", "--chains", "2", "--seed", "8", "--dump-samples", "--out", dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let f = std::fs::File::open(dir.path().join("samples_chain1.bin")).unwrap();
    let r = DumpReader::new(std::io::BufReader::new(f)).unwrap();
    let h = r.header().clone();
    assert_eq!((h.rows, h.cols, h.seed, h.chain_id), (3, 3, 8, 1));
    let model = fgmc::GridModel::square(3, fgmc::PairwiseKernel::neg13()).unwrap();
    let xs: Vec<_> = r.map(|x| x.unwrap()).collect();
    assert_eq!(xs.len(), 40);
    assert!(xs.iter().all(|x| model.classify(x).unwrap() == fgmc::PhaseBin::MINUS));
}

#[test]
fn all_bins_assemble_z_f() {
    let dir = tempfile::tempdir().unwrap();
    let o = fgmc(&[
        "estimate", "--preset", "cplx15i", "--size", "3", "--bin", "all", "--K", "2000", "--chains", "4", "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = read_json(&dir.path().join("summary.json"));
    assert_eq!(s["quantities"].as_array().unwrap().len(), 4);
    assert_eq!(s["cancellation"], false);
    for b in ["plus", "minus", "plus_i", "minus_i"] {
        assert!(dir.path().join(format!("trace_z_{b}.csv")).exists() || b == "plus");
    }
}

#[test]
fn dual_check_examples() {
    let o = fgmc(&["dual-check", "--preset", "pm(1)", "--size", "3"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("PASS"));
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d.json");
    let o = fgmc(&["dual-check", "--preset", "neg13", "--size", "2", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let v = read_json(&out);
    assert!(v["ratio"][0].as_f64().unwrap() > 0.0);
    assert_eq!(v["zero_equivalence"], true);
    let o = fgmc(&["dual-check", "--preset", "ones", "--size", "2", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let v = read_json(&out);
    assert_eq!(v["z_f"][0].as_f64().unwrap(), 16.0);
    assert_eq!(fgmc(&["dual-check", "--preset", "ones", "--size", "5"]).status.code(), Some(3));
}

#[test]
fn presets_are_listed() {
    let o = fgmc(&["presets"]);
    assert!(o.status.success());
    let s = stdout(&o);
    for p in ["neg13", "cplx15i", "pm(a)", "ones"] {
        assert!(s.contains(p));
    }
}
