mod common;

use common::*;
use vche::config::{CostKind, FieldSpec};
use vche::sensitivity::{grad_check, reduced_gradient, write_grad_check_csv};
use vche::{ProblemConfig, ReducedProblem};

fn problem(kind: CostKind, steps: usize) -> ReducedProblem {
    let mut cfg = benchmark();
    cfg.time.steps = steps;
    cfg.cost.kind = kind;
    cfg.initial = FieldSpec::TwoMode {
        amplitude: 0.3,
        ramp: false,
    };
    ReducedProblem::from_config(&cfg).unwrap()
}

#[test]
fn taylor_remainders_have_orders_two_and_three() {
    for kind in [CostKind::QuadraticTracking, CostKind::GradientTracking] {
        let p = problem(kind, 8);
        let mut r = rng(21);
        let u = uniform_control(&p, &mut r, 0.5);
        let v = uniform_control(&p, &mut r, 1.0);
        let g = p.gradient(&u).unwrap();
        let (_, q) = p.hessian_vec_at(&g, &v).unwrap();
        let f0 = g.eval.value();
        let d1 = g.gradient.inner(&v);
        let mut r1 = Vec::new();
        let mut r2 = Vec::new();
        for h in [0.2, 0.1, 0.05, 0.025] {
            let mut w = u.clone();
            w.axpy(h, &v);
            let f = p.value(&w).unwrap();
            r1.push((f - f0 - h * d1).abs());
            r2.push((f - f0 - h * d1 - 0.5 * h * h * q).abs());
        }
        for k in 0..3 {
            let o1 = (r1[k] / r1[k + 1]).log2();
            let o2 = (r2[k] / r2[k + 1]).log2();
            assert!((o1 - 2.0).abs() < 0.15, "{kind:?} first-order remainder order {o1}");
            assert!(o2 > 2.8, "{kind:?} second-order remainder order {o2}");
        }
    }
}

#[test]
fn gradient_check_for_gradient_tracking() {
    let p = problem(CostKind::GradientTracking, 6);
    let mut r = rng(22);
    let u = uniform_control(&p, &mut r, 0.5);
    let dirs: Vec<_> = (0..3).map(|_| uniform_control(&p, &mut r, 1.0)).collect();
    let hs: Vec<f64> = (1..=6).map(|e| 10f64.powi(-e)).collect();
    let rows = grad_check(&p, &u, &dirs, &hs).unwrap();
    for d in 0..3 {
        let best = rows.iter().filter(|r| r.direction == d).map(|r| r.rel_error).fold(f64::INFINITY, f64::min);
        assert!(best <= 1e-6, "direction {d}: {best}");
    }
    let mut csv = Vec::new();
    write_grad_check_csv(&rows, &mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert_eq!(text.lines().count(), 1 + rows.len());
    assert!(text.starts_with("direction,h,fd_value,analytic_value,rel_error"));
}

#[test]
fn reduced_gradient_is_strongly_monotone_in_the_tikhonov_part() {
    // the tracking part may bend either way; at this control scale it stays well above -gamma/2
    let mut cfg: ProblemConfig = benchmark();
    cfg.time.steps = 6;
    let p = ReducedProblem::from_config(&cfg).unwrap();
    let mut r = rng(23);
    let u1 = uniform_control(&p, &mut r, 0.5);
    let u2 = uniform_control(&p, &mut r, 0.5);
    let g1 = reduced_gradient(&u1, &cfg).unwrap();
    let g2 = reduced_gradient(&u2, &cfg).unwrap();
    let d = u1.sub(&u2);
    let mono = g1.sub(&g2).inner(&d);
    assert!(mono >= cfg.control.gamma * d.inner(&d) * 0.5);
}

#[test]
fn gradient_at_zero_for_rest_target_vanishes() {
    let mut cfg = benchmark();
    cfg.cost.target = FieldSpec::Zero;
    let u = ReducedProblem::from_config(&cfg).unwrap().zero_control();
    assert_eq!(reduced_gradient(&u, &cfg).unwrap().max_abs(), 0.0);
}
