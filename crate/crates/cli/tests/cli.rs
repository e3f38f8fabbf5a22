use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const H2: &str = "-1.99134 II\n-0.02882925 XI\n-0.02882925 IX\n0.0541175 ZI\n0.0541175 IZ\n\
                  0.01495595 XX\n0.000151287 XZ\n0.000151287 ZX\n0.05900925 ZZ\n";

fn c4chem(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_c4chem")).args(args).output().unwrap()
}

fn setup(dir: &Path, extra: &str) -> String {
    fs::write(dir.join("h2.txt"), H2).unwrap();
    let cfg = dir.join("cfg.toml");
    fs::write(
        &cfg,
        format!(
            "[hamiltonian]\npath = \"h2.txt\"\n[experiment]\nvariant = \"both\"\nshots = 500\nseed = 3\n\
             [bootstrap]\nresamples = 200\nsweep_increment = 400\n{extra}"
        ),
    )
    .unwrap();
    cfg.to_string_lossy().into_owned()
}

fn json(bytes: &[u8]) -> serde_json::Value {
    serde_json::from_slice(bytes).unwrap()
}

#[test]
fn solve_reports_ground_energy() {
    let d = tempfile::tempdir().unwrap();
    let cfg = setup(d.path(), "");
    let out = c4chem(&["solve", "--config", &cfg]);
    assert!(out.status.success());
    let e = json(&out.stdout)["exact_energy"].as_f64().unwrap();
    assert!((e + 2.08025).abs() < 1e-4);
}

#[test]
fn run_then_estimate_sweep_compare() {
    let d = tempfile::tempdir().unwrap();
    let cfg = setup(d.path(), "");
    let out_dir = d.path().join("out");
    let out = out_dir.to_string_lossy().into_owned();
    let run = c4chem(&["run", "--config", &cfg, "--out", &out, "--noise", "h1-like"]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let results = json(&fs::read(out_dir.join("results.json")).unwrap());
    assert_eq!(results["complete"], true);

    let enc = out_dir.join("store_encoded.csv").to_string_lossy().into_owned();
    let unenc = out_dir.join("store_unencoded.csv").to_string_lossy().into_owned();
    let est = c4chem(&[
        "estimate",
        "--config",
        &cfg,
        "--noise",
        "h1-like",
        "--variant",
        "encoded",
        "--store",
        &enc,
    ]);
    assert!(est.status.success(), "{}", String::from_utf8_lossy(&est.stderr));
    let stored = results["results"]
        .as_array()
        .unwrap()
        .iter()
        .find(|r| r["variant"] == "encoded")
        .unwrap();
    assert_eq!(json(&est.stdout)["energy"], stored["energy"]);

    let sweep = c4chem(&["sweep", "--config", &cfg, "--variant", "unencoded", "--store", &unenc]);
    assert!(sweep.status.success());
    let csv = String::from_utf8(sweep.stdout).unwrap();
    assert!(csv.starts_with("shots,estimate,median,iqr_low,iqr_high,ci_low,ci_high\n"));
    assert_eq!(csv, fs::read_to_string(out_dir.join("sweep_unencoded.csv")).unwrap());

    let cmp = c4chem(&["compare", "--config", &cfg, "--encoded", &enc, "--unencoded", &unenc]);
    assert!(cmp.status.success());
    let p = json(&cmp.stdout)["prob_better"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&p));
}

#[test]
fn audit_writes_csv() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().to_string_lossy().into_owned();
    let a = c4chem(&["audit", "--block", "measurement", "--setting", "XX", "--out", &out]);
    assert!(a.status.success());
    let csv = fs::read_to_string(d.path().join("audit_measurement_XX.csv")).unwrap();
    assert!(csv.starts_with("block,setting,location,gate,fault,class"));
    assert!(String::from_utf8(a.stderr).unwrap().contains("undetected 0"));
}

#[test]
fn exit_codes() {
    let d = tempfile::tempdir().unwrap();
    let cfg = setup(d.path(), "[output]\ncolour = true\n");
    assert_eq!(c4chem(&["run", "--config", &cfg]).status.code(), Some(2));

    let cfg = setup(d.path(), "");
    assert_eq!(
        c4chem(&["run", "--config", &cfg, "--noise", "wild"]).status.code(),
        Some(2)
    );
    assert_eq!(
        c4chem(&["run", "--config", &cfg, "--shots", "0"]).status.code(),
        Some(2)
    );
    assert_eq!(c4chem(&["audit", "--block", "nowhere"]).status.code(), Some(2));

    let store = d.path().join("empty.csv");
    fs::write(&store, "index,setting,outcome,accepted,reason\n0,ZZ,,0,flag-disagree\n").unwrap();
    let s = store.to_string_lossy().into_owned();
    let code = c4chem(&["estimate", "--config", &cfg, "--variant", "encoded", "--store", &s])
        .status
        .code();
    assert_eq!(code, Some(4));
}
