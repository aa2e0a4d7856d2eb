use std::process::Command;

fn bvt() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bvt"))
}

#[test]
fn unknown_suite_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = bvt().args(["verify", "--suite", "nope", "--out"]).arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown suite"));
}

#[test]
fn bad_config_file_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "suite = mixing\nlevel = 42\n").unwrap();
    let out = bvt().args(["verify", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn mixing_suite_passes_and_report_reads_back() {
    let dir = tempfile::tempdir().unwrap();
    let out = bvt().args(["verify", "--suite", "mixing", "--kmax", "6", "--out"]).arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("suite mixing: PASS"));
    assert!(dir.path().join("report.json").exists());

    let out = bvt().args(["report", "--out"]).arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("flow-map oracle"));
}

#[test]
fn catalog_lists_every_variant_with_its_trace() {
    let dir = tempfile::tempdir().unwrap();
    let out = bvt().args(["catalog", "--kmax", "5", "--out"]).arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    for (name, tr) in [("outward", "+1.00"), ("inward_depauw", "-1.00"), ("corollary", "+1.00")] {
        let line = text.lines().find(|l| l.starts_with(name)).unwrap_or_else(|| panic!("{name} missing"));
        assert!(line.contains(tr), "{line}");
    }
    assert!(dir.path().join("beta3.ppm").exists());
}

#[test]
fn simulate_writes_csv_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = bvt()
        .args(["simulate", "--level", "4", "--horizon", "0.125", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let conserved = std::fs::read_to_string(dir.path().join("conserved.csv")).unwrap();
    assert!(conserved.starts_with("step,t,mass,l1,l2,boundary_flux"));
    assert!(dir.path().join("snapshots.csv").exists());
}
