use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn abprofile(args: &[&str], out: &Path) -> Output {
    let conf = fixtures().join("toy.conf");
    Command::new(env!("CARGO_BIN_EXE_abprofile"))
        .args(args)
        .arg("--config")
        .arg(&conf)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn ok(o: &Output) {
    assert!(o.status.success(), "exit {:?}\n{}", o.status.code(), String::from_utf8_lossy(&o.stderr));
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

const BUNDLE: &[&str] = &[
    "prepared/records.csv",
    "prepared/clusters.json",
    "numbered/numbered.csv",
    "numbered/failures.csv",
    "annotations.json",
    "kept.csv",
    "fingerprints.csv",
    "sampling.json",
    "similarity/heavy.csv",
    "similarity/light.csv",
    "similarity/fingerprint.csv",
    "tests.json",
    "salient.csv",
    "association_targeting.csv",
    "association_reference.csv",
    "bench.csv",
    "tree.dot",
    "tree.json",
    "recommendations.csv",
    "manifest.json",
];

/// Every CSV and JSON file under `dir`, relative path to contents.
fn numeric_artifacts(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.extension().is_some_and(|x| x == "csv" || x == "json") {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.push((rel, std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn toy_run_writes_the_full_bundle() {
    let d = tempfile::tempdir().unwrap();
    ok(&abprofile(&["run-all", "--png"], d.path()));
    for f in BUNDLE.iter().chain(&["similarity/heavy.png"]) {
        assert!(d.path().join(f).is_file(), "{f} missing");
    }
    let fp = read(&d.path().join("fingerprints.csv"));
    assert_eq!(fp.lines().count(), 13, "header plus 12 records");
    let bench = read(&d.path().join("bench.csv"));
    assert_eq!(bench.lines().count(), 1 + 3 * 6);
    let manifest: serde_json::Value = serde_json::from_str(&read(&d.path().join("manifest.json"))).unwrap();
    assert_eq!(manifest["seed"], 7);
    assert_eq!(manifest["stages"].as_object().unwrap().len(), 7);
}

#[test]
fn reruns_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    ok(&abprofile(&["run-all"], a.path()));
    ok(&abprofile(&["run-all", "--threads", "1"], b.path()));
    let (x, y) = (numeric_artifacts(a.path()), numeric_artifacts(b.path()));
    assert_eq!(x.len(), y.len());
    for ((pa, ca), (pb, cb)) in x.iter().zip(&y) {
        assert_eq!(pa, pb);
        assert!(ca == cb, "{pa} differs between runs");
    }
}

#[test]
fn stages_rerun_from_persisted_inputs_match_the_full_run() {
    let (full, staged) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    ok(&abprofile(&["run-all"], full.path()));
    for s in ["prepare", "number", "annotate", "similarity", "salient", "classify", "recommend"] {
        ok(&abprofile(&[s], staged.path()));
    }
    assert_eq!(numeric_artifacts(full.path()), numeric_artifacts(staged.path()));
}

#[test]
fn missing_germline_dir_is_a_config_error_before_compute() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("bundle");
    let o = abprofile(&["run-all", "--set", "germline_dir=/no/such/germlines"], &out);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("germline_dir"));
    assert!(!out.exists(), "nothing may be written");
}

#[test]
fn bad_values_and_bad_inputs_have_distinct_exit_codes() {
    let d = tempfile::tempdir().unwrap();
    let o = abprofile(&["prepare", "--set", "biasing_threshold=1.2"], d.path());
    assert_eq!(o.status.code(), Some(2));

    let bad = d.path().join("bad.csv");
    std::fs::write(&bad, "id,dataset_id,set_label,heavy,light\nx1,D,targeting,EVQL#,\n").unwrap();
    let o = abprofile(&["prepare", "--set", &format!("targeting={}", bad.display())], &d.path().join("o"));
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn stage_without_upstream_fails_with_stage_code() {
    let d = tempfile::tempdir().unwrap();
    let o = abprofile(&["salient"], d.path());
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("run annotate first"));
}

#[test]
fn annotate_after_number_writes_fingerprints() {
    let d = tempfile::tempdir().unwrap();
    ok(&abprofile(&["prepare"], d.path()));
    ok(&abprofile(&["number"], d.path()));
    assert!(!d.path().join("fingerprints.csv").exists());
    ok(&abprofile(&["annotate"], d.path()));
    assert!(read(&d.path().join("fingerprints.csv")).starts_with("id,GermHV:"));
}

#[test]
fn classify_mask_restricts_the_benchmark() {
    let d = tempfile::tempdir().unwrap();
    ok(&abprofile(&["run-all"], d.path()));
    ok(&abprofile(&["classify", "--mask", "germline"], d.path()));
    let bench = read(&d.path().join("bench.csv"));
    let rows: Vec<&str> = bench.lines().skip(1).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r.split(',').nth(1) == Some("germline")));
}

#[test]
fn stop_flag_reaches_the_tree() {
    let d = tempfile::tempdir().unwrap();
    ok(&abprofile(&["run-all"], d.path()));
    let m0: serde_json::Value = serde_json::from_str(&read(&d.path().join("manifest.json"))).unwrap();
    ok(&abprofile(&["recommend", "--stop=global"], d.path()));
    let m1: serde_json::Value = serde_json::from_str(&read(&d.path().join("manifest.json"))).unwrap();
    assert_ne!(m0["stages"]["recommend"]["params_hash"], m1["stages"]["recommend"]["params_hash"]);
    let tree = abprofile_core::designtree::from_json(&read(&d.path().join("tree.json"))).unwrap();
    assert!(tree.node_count() >= 1);
    assert!(read(&d.path().join("tree.dot")).starts_with("digraph"));
}

#[test]
fn resume_skips_and_staleness_is_detected() {
    let d = tempfile::tempdir().unwrap();
    ok(&abprofile(&["run-all"], d.path()));
    let before = numeric_artifacts(d.path());
    ok(&abprofile(&["run-all", "--resume"], d.path()));
    assert_eq!(before, numeric_artifacts(d.path()));

    // a changed parameter reruns only that stage under --resume
    ok(&abprofile(&["run-all", "--resume", "--set", "min_se=0.5"], d.path()));
    assert_eq!(read(&d.path().join("bench.csv")).as_bytes(), before.iter().find(|x| x.0 == "bench.csv").unwrap().1);

    let fp = d.path().join("fingerprints.csv");
    let mut text = read(&fp);
    text = text.replacen("t1,0", "t1,1", 1);
    std::fs::write(&fp, text).unwrap();
    let o = abprofile(&["salient"], d.path());
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("fingerprints.csv"));
    ok(&abprofile(&["salient", "--force"], d.path()));
}

#[test]
fn compare_salient_reports_overlap() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    ok(&abprofile(&["run-all"], a.path()));
    ok(&abprofile(&["run-all", "--seed", "99"], b.path()));
    let out = a.path().join("cmp.json");
    let o = Command::new(env!("CARGO_BIN_EXE_abprofile"))
        .args(["compare-salient", "--a"])
        .arg(a.path().join("salient.csv"))
        .arg("--b")
        .arg(b.path().join("salient.csv"))
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    ok(&o);
    let v: serde_json::Value = serde_json::from_str(&read(&out)).unwrap();
    for k in ["fet", "importance", "both_methods"] {
        assert!(v[k]["common"].is_array(), "{k}");
    }
}
