mod common;

use common::cli;
use serde_json::Value;

fn json(b: &[u8]) -> Value {
    serde_json::from_slice(b).unwrap()
}

#[test]
fn reference_commands() {
    let out = cli(&["dk", "--q", "17,19,17"], None);
    assert!(out.status.success());
    assert_eq!(json(&out.stdout)["count"], 6);

    let out = cli(&["dk", "--q", "17,100,17"], None);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out.stdout)["count"], 0);

    let out = cli(&["cusps", "--rho1", "17"], None);
    assert!(out.status.success());
    assert_eq!(json(&out.stdout)["cusps"].as_array().unwrap().len(), 6);
}

#[test]
fn exit_codes() {
    // usage
    for args in [&["frobnicate"][..], &["dk"], &["dk", "--q", "1,2"], &["trace", "--trajectory", "/no/such/file.json"], &["--config", "/no/such/project.json", "dk", "--q", "17,19,17"]] {
        let out = cli(args, None);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
    // domain: diagnostic on stdout
    let out = cli(&["dk", "--q", "17,0,17"], None);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out.stdout)["error"], "INVALID_JOINT");
    let out = cli(&["plan", "--q", "17,19,17", "--from", "0", "--to", "3", "--n", "32"], None);
    assert_eq!(out.status.code(), Some(2));
    assert!(json(&out.stdout)["error"].is_string());
    // help and version
    assert_eq!(cli(&["--help"], None).status.code(), Some(0));
    assert_eq!(cli(&["--version"], None).status.code(), Some(0));
}

#[test]
fn out_flag_writes_the_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sub/ik.json");
    let out = cli(&["ik", "--pose", "17,-2.62,0.79", "--out", path.to_str().unwrap()], None);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let v = json(&std::fs::read(&path).unwrap());
    assert_eq!(v["joint"][0].as_f64(), Some(17.0));
}

#[test]
fn warm_and_cold_cache_give_the_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["cs-mesh", "--rho1", "17", "--aspect", "2", "--n", "64"];
    let uncached = cli(&args, None);
    assert!(uncached.status.success(), "{}", String::from_utf8_lossy(&uncached.stdout));
    let cold = cli(&args, Some(dir.path()));
    let files = std::fs::read_dir(dir.path()).unwrap().count();
    assert!(files > 0, "cache directory stays empty");
    let warm = cli(&args, Some(dir.path()));
    assert!(uncached.status.success());
    assert_eq!(uncached.stdout, cold.stdout);
    assert_eq!(cold.stdout, warm.stdout);
    // sibling aspect was seeded by the same build
    let other = cli(&["cs-mesh", "--rho1", "17", "--aspect", "1", "--n", "64"], Some(dir.path()));
    assert_eq!(other.stdout, cli(&["cs-mesh", "--rho1", "17", "--aspect", "1", "--n", "64"], None).stdout);
}

#[test]
fn project_file_sets_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let geom = dir.path().join("geometry.json");
    std::fs::write(&geom, r#"{"a2x": 15.91, "a3": [0.0, 10.0], "d": [17.04, 16.54, 20.84]}"#).unwrap();
    let project = dir.path().join("project.json");
    std::fs::write(&project, r#"{"geometry": "geometry.json", "rho1": 14}"#).unwrap();
    let a = cli(&["--config", project.to_str().unwrap(), "cusps"], None);
    let b = cli(&["cusps", "--rho1", "14"], None);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn classify_fixture_matches_the_reference_taxonomy() {
    let out = cli(&["classify-loop", "--fixture"], None);
    assert!(out.status.success());
    let v = json(&out.stdout);
    assert_eq!(v["counts"]["SINGULAR_STOP"], 8);
    assert_eq!(v["counts"]["LOOP_SAME_MODE"], 2);
    assert_eq!(v["counts"]["MODE_CHANGE"], 2);
    assert_eq!(v["enclosed"].as_array().unwrap().len(), 1);
}

#[test]
fn repro_twice_is_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ra = cli(&["repro", "--dir", a.path().to_str().unwrap()], None);
    let rb = cli(&["repro", "--dir", b.path().to_str().unwrap()], None);
    assert!(ra.status.success(), "{}", String::from_utf8_lossy(&ra.stderr));
    assert_eq!(ra.stdout, rb.stdout);
    let summary = json(&ra.stdout);
    assert!(summary["claims"].as_array().unwrap().iter().all(|c| c["pass"] == true), "{summary}");
    let mut names: Vec<_> = std::fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() > 20);
    for n in names {
        assert_eq!(std::fs::read(a.path().join(&n)).unwrap(), std::fs::read(b.path().join(&n)).unwrap(), "{n:?}");
    }
}
