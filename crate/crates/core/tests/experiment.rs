mod common;

use common::*;
use vche::experiment::{run_convergence_study, run_kappa_sweep, run_support_curve, solve_reference, ExperimentSpec};
use vche::{FieldSpec, ReducedProblem, SolveOptions, SparsityKind};

fn problem() -> ReducedProblem {
    let mut cfg = benchmark();
    cfg.time.steps = 8;
    ReducedProblem::from_config(&cfg).unwrap()
}

fn spec(kappas: Vec<f64>) -> ExperimentSpec {
    ExperimentSpec {
        kappas,
        ..ExperimentSpec::default()
    }
}

#[test]
fn rest_target_gives_zero_distances_and_a_degenerate_fit() {
    let mut cfg = benchmark();
    cfg.time.steps = 4;
    cfg.cost.target = FieldSpec::Zero;
    let p = ReducedProblem::from_config(&cfg).unwrap();
    let s = run_convergence_study(&p, SparsityKind::J1, &spec(vec![1e-2, 1e-3, 1e-4]), &SolveOptions::default(), None)
        .unwrap();
    assert!(s.sweep.points.iter().all(|pt| pt.distance == 0.0));
    assert!(s.sweep.fit.degenerate);
    assert_eq!(s.final_ratio, 0.0);
    assert!(s.passed(1e-3));
}

#[test]
fn zero_kappa_reproduces_the_reference() {
    let p = problem();
    let opts = SolveOptions::default();
    let reference = solve_reference(&p, &opts).unwrap();
    let s = run_kappa_sweep(&p, SparsityKind::J1, &spec(vec![0.0]), &opts, Some(reference.clone())).unwrap();
    assert_eq!(s.points[0].distance, 0.0);
    assert!(s.fit.degenerate);
    // J2 runs a different solver, so only the tolerance is shared
    let s = run_kappa_sweep(&p, SparsityKind::J2, &spec(vec![0.0]), &opts, Some(reference)).unwrap();
    assert!(s.points[0].distance <= 1e-8);
}

#[test]
fn increasing_grids_are_rejected() {
    let p = problem();
    let opts = SolveOptions::default();
    assert!(run_kappa_sweep(&p, SparsityKind::J1, &spec(vec![1e-4, 1e-3]), &opts, None).is_err());
    assert!(run_kappa_sweep(&p, SparsityKind::J1, &spec(vec![1e-3, 1e-3]), &opts, None).is_err());
    assert!(run_kappa_sweep(&p, SparsityKind::J1, &spec(vec![]), &opts, None).is_err());
}

#[test]
fn sweep_distances_shrink_with_kappa() {
    let p = problem();
    let opts = SolveOptions::default();
    let s = run_kappa_sweep(&p, SparsityKind::J3, &spec(vec![1e-5, 1e-6, 1e-7]), &opts, None).unwrap();
    assert!(s.points.windows(2).all(|w| w[1].distance < w[0].distance));
    assert!(s.fit.low_confidence && !s.fit.degenerate);
    assert!((s.fit.slope - 1.0).abs() < 0.05, "slope {}", s.fit.slope);
}

#[test]
fn sweep_csv_is_reproducible() {
    let p = problem();
    let opts = SolveOptions::default();
    let sp = ExperimentSpec {
        warm_start: false,
        ..spec(vec![1e-3, 1e-4])
    };
    let csv = || {
        let s = run_kappa_sweep(&p, SparsityKind::J1, &sp, &opts, None).unwrap();
        let mut out = Vec::new();
        s.write_csv(&mut out).unwrap();
        out
    };
    let a = csv();
    assert_eq!(a, csv());
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 3);
}

#[test]
fn support_patterns_differ_between_time_and_space_sparsity() {
    let p = problem();
    let opts = SolveOptions::default();
    let sp = ExperimentSpec {
        support_kappas: vec![0.1, 0.03, 0.01],
        ..ExperimentSpec::default()
    };
    let j3 = run_support_curve(&p, SparsityKind::J3, &sp, &opts).unwrap();
    assert!(j3.passed());
    // J3 switches whole time traces on or off
    assert!(j3.rows.iter().all(|r| r.time_varying_points == 0));
    assert!(j3.rows.iter().any(|r| r.point_fraction > 0.0));
    let j2 = run_support_curve(&p, SparsityKind::J2, &sp, &opts).unwrap();
    assert!(j2.passed());
    assert!(j2.rows.iter().any(|r| r.time_varying_points > 0));
    let mut out = Vec::new();
    j2.write_csv(&mut out).unwrap();
    assert_eq!(String::from_utf8(out).unwrap().lines().count(), 1 + 3 + 1);
}
