use std::path::Path;
use std::process::Command;

fn bkpz(out: &Path, args: &[&str]) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_bkpz"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("run bkpz")
        .status
        .code()
        .expect("exit code")
}

fn spectrum_config(dir: &Path, tolerance: &str) -> String {
    let path = dir.join(format!("spectrum-{tolerance}.toml"));
    std::fs::write(
        &path,
        format!("name = \"spec\"\n[spectrum]\nn = 64\nk_max = 32\noracle_modes = 32\ntolerance = {tolerance}\n"),
    )
    .unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn passing_run_exits_zero_and_writes_a_record() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = spectrum_config(dir.path(), "1e-6");
    let out = dir.path().join("runs");
    assert_eq!(bkpz(&out, &["spectrum", "--config", &cfg]), 0);
    assert!(out.join("spec/record.json").exists());
    assert!(out.join("spec/spectrum.csv").exists());
}

#[test]
fn failed_check_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = spectrum_config(dir.path(), "0.0");
    assert_eq!(bkpz(&dir.path().join("runs"), &["spectrum", "--config", &cfg]), 1);
}

#[test]
fn bad_config_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "name = \"x\"\n[spectrum]\nbogus = 3\n").unwrap();
    let out = dir.path().join("runs");
    assert_eq!(bkpz(&out, &["spectrum", "--config", path.to_str().unwrap()]), 2);
    assert_eq!(bkpz(&out, &["spectrum", "--curve", "triangle"]), 2);
}

#[test]
fn suite_reports_the_worst_outcome() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("suite.toml");
    let entry = |name: &str, tol: &str| {
        format!("[[experiment]]\nname = \"{name}\"\n[experiment.spectrum]\nn = 64\nk_max = 32\noracle_modes = 32\ntolerance = {tol}\n\n")
    };
    std::fs::write(&manifest, entry("a", "1e-6") + &entry("b", "1e-6")).unwrap();
    let out = dir.path().join("runs");
    assert_eq!(bkpz(&out, &["suite", manifest.to_str().unwrap()]), 0);
    assert!(out.join("suite.json").exists());
    std::fs::write(&manifest, entry("a", "1e-6") + &entry("b", "0.0")).unwrap();
    assert_eq!(bkpz(&out, &["suite", manifest.to_str().unwrap()]), 1);
}
