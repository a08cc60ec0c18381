use std::path::Path;
use std::process::{Command, Output};

fn koopman(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_koopman")).args(args).env_remove("KOOPMAN_THREADS").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn error_json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stderr).unwrap()
}

fn csv_field(text: &str, key: &[&str], column: &str) -> String {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header = rdr.headers().unwrap().clone();
    let col = header.iter().position(|h| h == column).unwrap();
    for rec in rdr.records() {
        let rec = rec.unwrap();
        if key.iter().enumerate().all(|(i, k)| &rec[i] == *k) {
            return rec[col].to_string();
        }
    }
    panic!("no row {key:?}");
}

#[test]
fn moments_csv_has_gaussian_fourth_moment() {
    let o = koopman(&["moments"]);
    assert!(o.status.success());
    let v: f64 = csv_field(&stdout(&o), &["2", "0"], "closed_form").parse().unwrap();
    assert_eq!(v, 3.0);
    let e: f64 = csv_field(&stdout(&o), &["2", "0"], "abs_error").parse().unwrap();
    assert_eq!(e, 0.0);
}

#[test]
fn bundled_counts_give_known_s() {
    let o = koopman(&["bell-counts"]);
    assert!(o.status.success());
    let s: f64 = csv_field(&stdout(&o), &["S"], "value").parse().unwrap();
    assert!((s - 2.714004).abs() < 1e-6, "{s}");
}

#[test]
fn appendix_passes_at_tsirelson() {
    let o = koopman(&["bell-appendix", "--format", "json"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["command"], "bell-appendix");
    assert!(text.contains("2.8284271"));
}

#[test]
fn gns_checks_emit_residual_tables() {
    for check in ["inner", "hermite", "lowering", "translate", "projection", "polarization", "modulation"] {
        let o = koopman(&["gns", "-N", "16", "--max-degree", "2", "--check", check]);
        assert!(o.status.success(), "{check}: {}", String::from_utf8_lossy(&o.stderr));
        let text = stdout(&o);
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        assert!(rdr.records().count() > 0, "{check}");
    }
    let o = koopman(&["--format", "json", "gns", "--check", "translate", "--kappa", "0.5"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["result"]["check"], "translate");
    assert!(v["result"]["max_abs_error"].as_f64().unwrap() < 1e-9);
}

#[test]
fn json_output_is_enveloped() {
    let o = koopman(&["--format", "json", "cat", "--alpha", "0.4", "--beta-re", "0.2"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["schema_version"], 1);
    assert!(v["result"].is_object());
}

#[test]
fn exit_codes() {
    let o = koopman(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
    let o = koopman(&[]);
    assert_eq!(o.status.code(), Some(2));

    let o = koopman(&["moments", "--kt", "-1"]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(error_json(&o)["schema_version"], 1);
    let o = koopman(&["gns", "-N", "2"]);
    assert_eq!(o.status.code(), Some(3));

    let o = koopman(&["bell-counts", "--file", "/nonexistent/counts.csv"]);
    assert_eq!(o.status.code(), Some(4));
    assert_eq!(error_json(&o)["error"]["code"], 4);

    let dir = tempfile_dir();
    let bad = dir.join("bad.csv");
    std::fs::write(&bad, "t_ns,station,detector,eom,valid\n10,A,1,0,1\n5,A,1,0,1\n").unwrap();
    let o = koopman(&["coincide", "--alice", bad.to_str().unwrap(), "--bob", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(5));
    assert!(error_json(&o)["error"]["message"].as_str().unwrap().contains('3'));
}

#[test]
fn invalid_thread_count_is_a_flag_error() {
    let o = Command::new(env!("CARGO_BIN_EXE_koopman"))
        .arg("moments")
        .env("KOOPMAN_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(3));
}

fn tempfile_dir() -> std::path::PathBuf {
    let d = std::env::temp_dir().join(format!("koopman-cli-{}-{:?}", std::process::id(), std::thread::current().id()));
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn simulate(out: &Path, seed: &str) -> serde_json::Value {
    let o = koopman(&["sim-events", "--duration-ns", "20000000", "--seed", seed, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).unwrap()
}

#[test]
fn simulate_then_coincide() {
    let dir = tempfile_dir();
    let a = dir.join("a.csv");
    let b = dir.join("b.csv");
    let bin = dir.join("a.bin");
    let summary = simulate(&a, "11");
    simulate(&b, "11");
    simulate(&bin, "11");
    assert_eq!(summary["result"]["config"]["seed"], 11);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let run = |path: &Path| {
        let p = path.to_str().unwrap();
        let o = koopman(&["--format", "json", "coincide", "--alice", p, "--bob", p]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        serde_json::from_slice::<serde_json::Value>(&o.stdout).unwrap()
    };
    let from_csv = run(&a);
    let from_bin = run(&bin);
    assert_eq!(from_csv["result"]["counts"], from_bin["result"]["counts"]);
    assert!(from_csv["result"]["coincidences"].as_u64().unwrap() > 0);
}
