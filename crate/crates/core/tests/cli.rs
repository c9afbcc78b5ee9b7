use std::fs;
use std::process::Command;

fn dyntrack() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_dyntrack"));
    cmd.env("RUST_LOG", "warn");
    cmd
}

#[test]
fn run_then_audit() {
    let root = tempfile::tempdir().unwrap();
    let config = root.path().join("suite.cfg");
    fs::write(
        &config,
        "# small scenario II suite\nscenario = II\np = 4\nhorizon = 400\nstep_grid = log 0.001 1 6\n\
         algorithms = diffusion, dgt\ninit = optimum\noutput_dir = out\n",
    )
    .unwrap();
    let out = dyntrack().env("DYNTRACK_OUTPUT_ROOT", root.path()).args(["run", "--config"]).arg(&config).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("tail_max"));

    let dir = root.path().join("out");
    let summary = fs::read_to_string(dir.join("summary.csv")).unwrap();
    assert!(summary.starts_with("algorithm,alpha,beta,n,steady_state_error,theory_bound\n"));
    assert_eq!(summary.lines().count(), 3);
    let csv = fs::read_to_string(dir.join("dgt.csv")).unwrap();
    assert!(csv.starts_with("k,tracking_error,consensus_dev,avg_error,y_dev\n"));
    assert_eq!(csv.lines().count(), 402);

    let audit = dyntrack().args(["audit", "--record"]).arg(dir.join("dgt.csv")).output().unwrap();
    assert!(audit.status.success(), "{}", String::from_utf8_lossy(&audit.stderr));
    let text = fs::read_to_string(dir.join("audit.txt")).unwrap();
    assert!(text.contains("consensus_dgt"));
    assert!(text.contains("result=pass"));
}

#[test]
fn audit_rejects_unsupported_algorithm() {
    let root = tempfile::tempdir().unwrap();
    let config = root.path().join("c.cfg");
    fs::write(&config, "scenario = static\np = 2\nhorizon = 50\nstep_values = 0.1\nalgorithms = extra\noutput_dir = out\n")
        .unwrap();
    let out = dyntrack().env("DYNTRACK_OUTPUT_ROOT", root.path()).args(["run", "--config"]).arg(&config).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let audit = dyntrack().args(["audit", "--record"]).arg(root.path().join("out/extra.csv")).output().unwrap();
    assert!(!audit.status.success());
}

#[test]
fn bad_config_is_reported() {
    let root = tempfile::tempdir().unwrap();
    let config = root.path().join("bad.cfg");
    fs::write(&config, "scenario = II\nbogus = 1\n").unwrap();
    let out = dyntrack().args(["run", "--config"]).arg(&config).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));
}

#[test]
fn bounds_prints_both_algorithms() {
    let out = dyntrack()
        .args(["bounds", "--mu", "1", "--L", "1", "--beta", "0.5", "--alpha", "1e-4", "--dx", "0.01", "--D", "2", "--dg", "3"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("diffusion:") && text.contains("dgt:"));
    assert_eq!(text.matches("rho(A) = ").count(), 2);
    assert_eq!(text.matches("bound = ").count(), 2);

    let out = dyntrack()
        .args(["bounds", "--mu", "1", "--L", "1", "--beta", "0.5", "--alpha", "0.5"])
        .output()
        .unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("domain error"));
}
