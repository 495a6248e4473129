use std::fs;

use vche::config::load_config;
use vche::{Error, FieldSpec, Grid, Method, RunConfig, SparsityKind, SpectralField};

const RUN: &str = r#"
[time]
steps = 8

[control]
gamma = 0.02
kappa = 1e-3
sparsity = "J2"
lower = [-0.5, -1.0, -1.0]
upper = [0.5, 1.0, 1.0]

[solver]
method = "FIXED_POINT"
kkt_tol = 1e-9

[experiment]
kappas = [1e-3, 1e-4, 1e-5]
kinds = ["J2"]
"#;

#[test]
fn run_file_loads_and_echoes() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    fs::write(&path, RUN).unwrap();
    let cfg = load_config(&path).unwrap();
    assert_eq!(cfg.time.steps, 8);
    assert_eq!(cfg.control.sparsity, SparsityKind::J2);
    assert_eq!(cfg.solver.method, Method::FixedPoint);
    assert_eq!(cfg.experiment.kappas, vec![1e-3, 1e-4, 1e-5]);
    assert_eq!(cfg.problem().bounds().lower[0], -0.5);
    let echo = dir.path().join("echo.toml");
    fs::write(&echo, cfg.to_toml()).unwrap();
    assert_eq!(load_config(&echo).unwrap(), cfg);
}

#[test]
fn prox_grad_with_j2_is_rejected_at_load() {
    let text = RUN.replace("FIXED_POINT", "PROX_GRAD");
    assert!(matches!(RunConfig::from_toml(&text), Err(Error::Config { .. })));
}

#[test]
fn bad_box_names_the_admissibility_condition() {
    let text = RUN.replace("lower = [-0.5", "lower = [0.5");
    let msg = RunConfig::from_toml(&text).unwrap_err().to_string();
    assert!(msg.contains("a_i <= 0 < b_i"), "{msg}");
}

#[test]
fn missing_file_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    assert!(load_config(&dir.path().join("absent.toml")).is_err());
}

#[test]
fn snapshot_fields_are_read_from_disk() {
    let dir = tempfile::tempdir().unwrap();
    let g = Grid::cubic(8).unwrap();
    let f = SpectralField::trig_mode(&g, [1, 0, 0], [0.0, 0.3, 0.0], [0.0; 3]).unwrap();
    let path = dir.path().join("target.bin");
    vche::snapshot::save(&f, &path).unwrap();
    let text = format!("[cost.target]\nkind = \"snapshot\"\npath = {:?}\n", path.to_str().unwrap());
    let cfg = RunConfig::from_toml(&text).unwrap();
    assert_eq!(cfg.cost.target, FieldSpec::Snapshot { path: path.clone() });
    assert_eq!(cfg.cost.target.build(&g, 0.5, 1.0).unwrap(), f);
}
