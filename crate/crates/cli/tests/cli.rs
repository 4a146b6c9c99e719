use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_delay-frost"))
}

fn scenario(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(format!("{name}.toml"))
}

#[test]
fn run_report_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("deg");
    let status = bin().arg("run").arg(scenario("degeneration")).arg("--out").arg(&out).output().unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    assert!(out.join("trace.csv").exists() && out.join("summary.json").exists() && out.join("config.toml").exists());

    let report = bin().arg("report").arg(&out).output().unwrap();
    assert!(report.status.success());
    assert!(String::from_utf8_lossy(&report.stdout).contains("all checks passed"));

    let plot = bin().arg("plot").arg(&out).output().unwrap();
    assert!(plot.status.success());
    assert!(out.join("estimates.svg").exists());
}

#[test]
fn output_root_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let status = bin().arg("run").arg(scenario("gradient_tracking")).env("DFROST_OUTPUT_ROOT", dir.path()).output().unwrap().status;
    assert!(status.success());
    assert!(dir.path().join("gradient_tracking").join("trace.csv").exists());
}

#[test]
fn failing_check_gives_nonzero_exit() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(scenario("dgd")).unwrap().replace("tolerance = 1e-2", "tolerance = 1e-12");
    let cfg = dir.path().join("strict.toml");
    std::fs::write(&cfg, text).unwrap();
    let out = bin().arg("run").arg(&cfg).arg("--out").arg(dir.path().join("o")).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("[FAIL] final accuracy"));
}

#[test]
fn invalid_config_lists_violations() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(scenario("degeneration"))
        .unwrap()
        .replace("curvatures = [[1.0, 1.0], [1.0, 1.0], [1.0, 1.0], [1.0, 1.0]]", "curvatures = [[1.0, 1.0], [1.0, 1.0], [1.0, 1.0], [3.0, 3.0]]")
        .replace("kappa = 0.05", "kappa = 5.0");
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, text).unwrap();
    let out = bin().arg("run").arg(&cfg).arg("--out").arg(dir.path().join("o")).output().unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("3/4"), "{err}");
    assert!(err.contains("kappa") || err.contains("gain"), "{err}");
}

#[test]
fn compare_two_scenarios() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["compare"])
        .arg(scenario("frost"))
        .arg(scenario("addopt"))
        .arg("--out")
        .arg(dir.path())
        .args(["--tolerance", "1e-6"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(String::from_utf8_lossy(&out.stdout).contains("[PASS] consensus gap"));
}

#[test]
fn plot_without_trace_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin().arg("plot").arg(dir.path()).output().unwrap();
    assert!(!out.status.success());
}
