use std::fs;
use std::process::{Command, Output};

fn fockchan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fockchan"))
        .args(args)
        .env_remove("FOCKCHAN_CONFIG")
        .output()
        .expect("binary runs")
}

fn json(path: &std::path::Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn kraus_writes_export() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("att.json");
    let o = fockchan(&["kraus", "--family", "att", "--kappa", "0.8", "--n-add", "1", "--dim", "20", "--check", "-o", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["dim_in"], 20);
    assert!(v["completeness_defect"].as_f64().unwrap() <= 1e-12);
    assert_eq!(v["operators"].as_array().unwrap().len(), 21);
}

#[test]
fn kraus_amplifier_records_cutoff() {
    let o = fockchan(&["kraus", "--family", "amp", "--kappa", "1.5", "--n-add", "1", "--tol", "1e-8", "--check"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["kraus_cutoff"].as_u64().unwrap() > 20);
    assert!(v["completeness_defect"].as_f64().unwrap() <= 1e-8);
}

#[test]
fn domain_and_usage_errors() {
    assert_eq!(fockchan(&["kraus", "--kappa", "1.2", "--family", "att"]).status.code(), Some(2));
    assert_eq!(fockchan(&["kraus", "--family", "att"]).status.code(), Some(2));
    assert_eq!(fockchan(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(fockchan(&["--help"]).status.code(), Some(0));
}

#[test]
fn cohinfo_cases() {
    let o = fockchan(&["cohinfo", "--family", "conj", "--kappa-sq-minus-one", "1.5", "--n-add", "0", "--input", "diag:0.6,0.4"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["i_coh"].as_f64().unwrap() + 0.2239).abs() < 1e-3);

    let o = fockchan(&["cohinfo", "--family", "att", "--kappa", "1", "--input", "diag:1"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["i_coh"].as_f64().unwrap(), 0.0);

    let o = fockchan(&["cohinfo", "--table2"]);
    let rows: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 5);
    assert!((rows[0]["result"]["i_coh"].as_f64().unwrap() - 0.10573).abs() < 2e-3);
}

#[test]
fn cohinfo_leakage_exits_3() {
    let o = fockchan(&["cohinfo", "--family", "amp", "--kappa", "1.5", "--n-add", "2", "--input", "fock:3", "--truncation", "15"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("leakage"));
}

#[test]
fn sweep_csv_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let args = |p: &std::path::Path| {
        fockchan(&["sweep", "--family", "conj", "--kappa-sq-minus-one", "1.5", "--kind", "n-add", "--grid", "1..10",
            "--input", "diag:0.6,0.4", "--truncation", "110", "-o", p.to_str().unwrap()])
    };
    assert_eq!(args(&a).status.code(), Some(0));
    assert_eq!(args(&b).status.code(), Some(0));
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text, fs::read_to_string(&b).unwrap());
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let i: Vec<f64> = rdr.records().map(|r| r.unwrap()[3].parse().unwrap()).collect();
    assert_eq!(i.len(), 10);
    assert!(i.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn config_file_and_env() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"family": "conj", "kappa-sq-minus-one": 1.5, "input": "diag:0.6,0.4"}"#).unwrap();
    let o = fockchan(&["cohinfo", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["i_coh"].as_f64().unwrap() + 0.2239).abs() < 1e-3);

    let o = Command::new(env!("CARGO_BIN_EXE_fockchan"))
        .args(["cohinfo", "--config", cfg.to_str().unwrap(), "--n-add", "1"])
        .env("FOCKCHAN_INPUT", "diag:0.6,0.4")
        .output()
        .unwrap();
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["i_coh"].as_f64().unwrap() - 0.10573).abs() < 1e-4);
}

#[test]
fn state_json_input() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("rho.json");
    fs::write(&p, r#"{"dim": 2, "diag": [0.6, 0.4]}"#).unwrap();
    let o = fockchan(&["cohinfo", "--family", "conj", "--kappa-sq-minus-one", "1.5", "--input", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn verify_isolated_and_faulted() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let o = fockchan(&["verify", "--suite", "errcorr", "--dim", "6", "-o", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["suites"].as_array().unwrap().len(), 1);
    assert_eq!(v["suites"][0]["suite"], "errcorr");

    let o = fockchan(&["verify", "--suite", "completeness", "--dim", "6", "--perturb-kraus", "1e-3", "-o", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("completeness"));
}
