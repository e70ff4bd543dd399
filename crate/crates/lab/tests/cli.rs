use std::fs;
use std::process::Command;

fn fpp() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_fpp"));
    c.env_remove("FPP_THREADS");
    c
}

#[test]
fn unknown_flag_exits_with_usage_error() {
    let out = fpp().args(["sample", "--bogus"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn validate_succeeds() {
    let out = fpp().arg("validate").output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(!String::from_utf8_lossy(&out.stdout).contains("FAIL"));
}

#[test]
fn envelope_writes_three_columns() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("f.csv");
    let output = dir.path().join("fup.csv");
    let mut text = String::from("r,f\n");
    for i in 0..=40 {
        text.push_str(&format!("{},0.5\n", (i as f64 / 4.0).exp2()));
    }
    fs::write(&input, text).unwrap();
    let st = fpp().arg("envelope").arg("--in").arg(&input).arg("--out").arg(&output).status().unwrap();
    assert!(st.success());
    let got = fs::read_to_string(&output).unwrap();
    let mut lines = got.lines();
    assert_eq!(lines.next(), Some("r,f_up,case"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 41);
    assert!(rows.iter().all(|r| r.ends_with(",1.0000000000000000e0,1")));
}

#[test]
fn invalid_lengths_are_reported_by_field() {
    let dir = tempfile::tempdir().unwrap();
    let out = fpp().args(["sample", "--n", "16,8", "--reps", "0", "--out"]).arg(dir.path()).output().unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("sample.xnorms") && err.contains("sample.replicas"), "{err}");
}

#[test]
fn exponents_prints_chi_with_standard_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = fpp()
        .args(["exponents", "--dim", "2", "--dist", "exp:1", "--n", "8,16,32,64", "--reps", "200", "--seed", "7", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let chi = &v["directions"][0]["chi"];
    assert!(chi["chi_hat"].as_f64().unwrap().is_finite());
    assert!(chi["stderr"].as_f64().unwrap() > 0.0);
}

#[test]
fn thread_count_comes_from_the_environment() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for (dir, threads) in [(&a, "1"), (&b, "3")] {
        let st = fpp().env("FPP_THREADS", threads).args(["sample", "--n", "8,16", "--reps", "20", "--out"]).arg(dir.path()).status().unwrap();
        assert!(st.success());
    }
    let tele: serde_json::Value = serde_json::from_str(&fs::read_to_string(b.path().join("telemetry.json")).unwrap()).unwrap();
    assert_eq!(tele["threads"], 3);
    for f in ["archive.csv", "manifest.json"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}
