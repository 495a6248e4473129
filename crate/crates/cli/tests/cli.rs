use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use vche::config::load_config;
use vche::snapshot;

fn vche(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vche"))
        .arg("--out")
        .arg(out)
        .args(args)
        .env("VCHE_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn forward_csv_is_reproducible_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        let o = vche(&out, &["--seed", seed, "forward", "--steps", "6"]);
        assert!(o.status.success(), "{}", stdout(&o));
        fs::read(out.join("trajectory.csv")).unwrap()
    };
    let a = run("a", "4");
    assert_eq!(a, run("b", "4"));
    assert_ne!(a, run("c", "5"));
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("step,time,l2,h1,da,"));
    assert_eq!(text.lines().count(), 1 + 7);
}

#[test]
fn forward_snapshots_every_k_steps() {
    let dir = tempfile::tempdir().unwrap();
    let o = vche(dir.path(), &["forward", "--steps", "6", "--snapshot-every", "3"]);
    assert!(o.status.success());
    for n in [0, 3, 6] {
        assert!(dir.path().join(format!("state_{n:04}.bin")).exists());
    }
    assert!(!dir.path().join("state_0001.bin").exists());
    let last = snapshot::load(&dir.path().join("state_0006.bin")).unwrap();
    assert_eq!(last, snapshot::load(&dir.path().join("final_state.bin")).unwrap());
}

#[test]
fn solve_writes_report_and_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let o = vche(dir.path(), &["solve", "--kind", "J3", "--kappa", "1e-2", "--steps", "4"]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert_eq!(stdout(&o).matches("PASS").count(), 4);
    let report: toml::Value = toml::from_str(&fs::read_to_string(dir.path().join("report.toml")).unwrap()).unwrap();
    assert_eq!(report["kind"].as_str(), Some("J3"));
    let u = snapshot::load_control(&dir.path().join("control.ctrl")).unwrap();
    assert_eq!(u.steps(), 4);
    let lam = snapshot::load_control(&dir.path().join("adjoint.ctrl")).unwrap();
    assert_eq!(lam.values().len(), u.values().len());
    assert!(dir.path().join("adjoint_0.bin").exists());
    let cfg = load_config(&dir.path().join("config.toml")).unwrap();
    assert_eq!(cfg.control.kappa, 1e-2);
    assert_eq!(cfg.time.steps, 4);
}

#[test]
fn failed_assertions_set_the_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["grad-check", "--steps", "4", "--directions", "1", "--tol", "0"];
    let o = vche(dir.path(), &args);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).starts_with("FAIL"));
    let mut lenient = vec!["--no-assert"];
    lenient.extend(args);
    assert!(vche(dir.path(), &lenient).status.success());
}

#[test]
fn rest_target_sweep_fails_on_a_degenerate_fit() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("rest.toml");
    fs::write(&cfg, "[time]\nsteps = 4\n[cost.target]\nkind = \"zero\"\n").unwrap();
    let out = dir.path().join("out");
    let o = vche(&out, &["--config", cfg.to_str().unwrap(), "kappa-sweep", "--kind", "J1", "--kappas", "1e-2,1e-3"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL J1 rate: degenerate fit"));
    let csv = fs::read_to_string(out.join("sweep_J1.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn invalid_config_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[control]\nlower = [0.5, -1.0, -1.0]\n").unwrap();
    let o = vche(&dir.path().join("out"), &["--config", cfg.to_str().unwrap(), "forward"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("a_i <= 0 < b_i"));
    let o = vche(&dir.path().join("out"), &["solve", "--kind", "J2", "--method", "PROX_GRAD"]);
    assert_eq!(o.status.code(), Some(2));
}
