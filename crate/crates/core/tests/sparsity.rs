mod common;

use common::*;
use proptest::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use vche::sparsity::{
    directional_derivative, group_prox, j_value, kkt_fixed_point, prox_step, sigma_j2, subgradient, support_stats,
    write_support_csv,
};
use vche::{Bounds, ControlField, Grid, SparsityKind};

const KINDS: [SparsityKind; 3] = [SparsityKind::J1, SparsityKind::J2, SparsityKind::J3];

fn small(rng: &mut ChaCha8Rng, steps: usize, zeros: f64) -> ControlField {
    let g = Grid::cubic(4).unwrap();
    let vals = (0..steps * 3 * g.len())
        .map(|_| if rng.gen::<f64>() < zeros { 0.0 } else { rng.gen_range(-1.0..1.0) })
        .collect();
    ControlField::from_values(&g, steps, 1.0 / steps as f64, vals).unwrap()
}

fn kind_strategy() -> impl Strategy<Value = SparsityKind> {
    prop::sample::select(KINDS.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scalar_prox_matches_bisection(seed in 0u64..10_000, s in 0.01f64..10.0, kappa in 0.0f64..1.0,
                                     lo in -2.0f64..0.0, hi in 0.01f64..2.0) {
        let mut r = rng(seed);
        let w = small(&mut r, 2, 0.0).scale(3.0);
        let b = Bounds::new([lo; 3], [hi; 3]).unwrap();
        let out = prox_step(&w, s, kappa, &b, SparsityKind::J1).unwrap();
        let tau = s * kappa;
        for (&wi, &oi) in w.values().iter().zip(out.values()) {
            let x = bisect_min(|x| x - wi + if x >= 0.0 { tau } else { -tau }, lo, hi);
            prop_assert!((x - oi).abs() <= 1e-12);
        }
    }

    #[test]
    fn group_prox_matches_splitting_oracle(seed in 0u64..10_000, m in 1usize..24, frac in 0.0f64..1.5,
                                           lo in -2.0f64..0.0, hi in 0.01f64..2.0) {
        let mut r = rng(seed);
        let dt = 1.0 / m as f64;
        let w: Vec<f64> = (0..m).map(|_| r.gen_range(-2.0..2.0)).collect();
        let tau = frac * w.iter().map(|v| dt * v * v).sum::<f64>().sqrt();
        let mut out = vec![0.0; m];
        group_prox(&w, dt, tau, lo, hi, &mut out);
        let oracle = dykstra_group_prox(&w, dt, tau, lo, hi);
        let d = out.iter().zip(&oracle).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert!(d <= 1e-9, "deviation {}", d);
        prop_assert!(group_objective(&out, &w, dt, tau) <= group_objective(&oracle, &w, dt, tau) + 1e-13);
    }

    #[test]
    fn constructed_subgradients_satisfy_the_inequality(seed in 0u64..10_000, kind in kind_strategy(),
                                                       kappa in 0.001f64..1.0) {
        let mut r = rng(seed);
        let u = small(&mut r, 4, 0.4);
        let lam = small(&mut r, 4, 0.0).scale(0.5);
        let z = subgradient(&u, &lam, kappa, kind).unwrap();
        let ju = j_value(&u, kind);
        for _ in 0..20 {
            let v = small(&mut r, 4, 0.3);
            let jv = j_value(&v, kind);
            prop_assert!(ju + z.values.inner(&v.sub(&u)) <= jv + 1e-12 * jv.max(1.0));
        }
    }

    #[test]
    fn directional_derivative_is_a_one_sided_limit(seed in 0u64..10_000, kind in kind_strategy()) {
        let mut r = rng(seed);
        let u = small(&mut r, 4, 0.4);
        let v = small(&mut r, 4, 0.2);
        let d = directional_derivative(&u, &v, kind).unwrap();
        // Richardson on the one-sided quotient; short traces make the curvature term large
        let q = |t: f64| {
            let mut w = u.clone();
            w.axpy(t, &v);
            (j_value(&w, kind) - j_value(&u, kind)) / t
        };
        let fd = 2.0 * q(5e-8) - q(1e-7);
        prop_assert!((fd - d).abs() <= 1e-5 * d.abs().max(1.0), "{} vs {}", fd, d);
    }

    #[test]
    fn j3_kkt_map_minimises_its_model(seed in 0u64..10_000, kappa in 0.01f64..0.5, gamma in 0.1f64..2.0) {
        // x -> gamma/2 |x|^2 + <lambda, x> + kappa j3(x) over the box
        let mut r = rng(seed);
        let lam = small(&mut r, 4, 0.0);
        let u = small(&mut r, 4, 0.0);
        let b = Bounds::symmetric(0.7);
        let x = kkt_fixed_point(&u, &lam, kappa, gamma, &b, SparsityKind::J3).unwrap().u_next;
        let model = |y: &ControlField| 0.5 * gamma * y.inner(y) + lam.inner(y) + kappa * j_value(y, SparsityKind::J3);
        let f0 = model(&x);
        for _ in 0..10 {
            let mut y = x.clone();
            y.axpy(1e-3, &small(&mut r, 4, 0.0));
            let y = y.project(&b);
            prop_assert!(model(&y) >= f0 - 1e-14);
        }
    }
}

#[test]
fn kkt_map_is_idempotent_for_separable_kinds() {
    let mut r = rng(5);
    let lam = small(&mut r, 4, 0.0);
    let b = Bounds::symmetric(1.0);
    for kind in [SparsityKind::J1, SparsityKind::J3] {
        let first = kkt_fixed_point(&lam.scale(0.0), &lam, 0.2, 0.5, &b, kind).unwrap();
        let again = kkt_fixed_point(&first.u_next, &lam, 0.2, 0.5, &b, kind).unwrap();
        assert_eq!(again.residual, 0.0);
    }
}

#[test]
fn idle_components_use_the_time_scale() {
    let mut r = rng(6);
    let mut u = small(&mut r, 4, 0.0);
    let npts = u.points();
    for n in 0..4 {
        for x in 0..npts {
            let i = u.index(n, 1, x);
            u.values_mut()[i] = 0.0;
        }
    }
    let s = sigma_j2(&u);
    // T = 1
    assert!(s.iter().all(|row| row[1] == 1.0));
    let total: f64 = s.iter().map(|row| u.dt() * row[0] * row[0]).sum();
    assert!((total - 1.0).abs() < 1e-14);
}

#[test]
fn support_csv_has_one_row_per_node() {
    let mut r = rng(7);
    let u = small(&mut r, 4, 0.5);
    let s = support_stats(&u, 1e-12);
    assert!(s.fraction > 0.3 && s.fraction < 0.7);
    let mut out = Vec::new();
    write_support_csv(&u, 1e-12, &mut out).unwrap();
    assert_eq!(String::from_utf8(out).unwrap().lines().count(), 1 + 4 * 3 * u.points());
}
