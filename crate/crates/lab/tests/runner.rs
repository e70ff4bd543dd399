use std::fs;

use fpp_lab::archive::read_archive;
use fpp_lab::config::{ConfigError, ExperimentConfig};
use fpp_lab::output::sha256_hex;
use fpp_lab::runner::{run, Pipeline};

fn small(out: &std::path::Path) -> ExperimentConfig {
    let mut c = ExperimentConfig::default();
    c.sample.directions = vec!["1:0".into(), "1:1".into(), "0:1".into()];
    c.sample.xnorms = vec![12.0];
    c.sample.replicas = 1;
    c.run.out = out.to_path_buf();
    c
}

#[test]
fn one_replica_gives_one_row_per_direction() {
    let dir = tempfile::tempdir().unwrap();
    let m = run(small(dir.path()).validate().unwrap(), Pipeline::Sample).unwrap();
    assert!(m.ok());
    let a = read_archive(fs::File::open(dir.path().join("archive.csv")).unwrap()).unwrap();
    assert_eq!(a.records().len(), 3);
    let mut dirs: Vec<&str> = a.records().iter().map(|r| r.key.dir.as_str()).collect();
    dirs.sort();
    assert_eq!(dirs, ["0:1", "1:0", "1:1"]);
}

#[test]
fn repeated_runs_have_identical_checksums() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let mut sums = Vec::new();
    for d in [&a, &b] {
        let mut c = small(d.path());
        c.sample.xnorms = vec![8.0, 16.0, 24.0];
        c.sample.replicas = 30;
        sums.push(run(c.validate().unwrap(), Pipeline::Modgap).unwrap().checksums);
    }
    assert_eq!(sums[0], sums[1]);
    for (rel, sum) in &sums[0] {
        assert_eq!(&sha256_hex(&fs::read(a.path().join(rel)).unwrap()), sum, "{rel}");
    }
    assert!(sums[0].contains_key("moments.json"));
}

#[test]
fn out_of_order_lengths_fail_validation() {
    let mut c = ExperimentConfig::default();
    c.sample.xnorms = vec![32.0, 16.0];
    match c.validate() {
        Err(ConfigError::Invalid(v)) => assert_eq!(v.iter().map(|x| x.field).collect::<Vec<_>>(), ["sample.xnorms"]),
        other => panic!("expected a validation error, got {other:?}"),
    }
}

#[test]
fn manifest_leaves_out_machine_details() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small(dir.path());
    c.run.threads = 2;
    run(c.validate().unwrap(), Pipeline::Sample).unwrap();
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["config"]["run"]["threads"], 0);
    assert_eq!(m["config"]["run"]["out"], "");
    assert!(m.get("wall_clock_s").is_none());
    assert!(dir.path().join("telemetry.json").exists());
}

#[test]
fn coinciding_endpoints_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small(dir.path());
    c.sample.xnorms = vec![12.0, 12.2];
    assert!(run(c.validate().unwrap(), Pipeline::Sample).is_err());
}
