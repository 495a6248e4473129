#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vche::config::FieldSpec;
use vche::{ControlField, ProblemConfig, ReducedProblem};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// The canonical 8^3, M = 16 benchmark.
pub fn benchmark() -> ProblemConfig {
    ProblemConfig::default()
}

pub fn benchmark_problem() -> ReducedProblem {
    ReducedProblem::from_config(&benchmark()).unwrap()
}

/// Benchmark with a nonzero initial state, for derivative checks away from rest.
pub fn moving_problem(steps: usize) -> ReducedProblem {
    let mut cfg = benchmark();
    cfg.time.steps = steps;
    cfg.initial = FieldSpec::TwoMode {
        amplitude: 0.3,
        ramp: false,
    };
    ReducedProblem::from_config(&cfg).unwrap()
}

pub fn uniform_control(p: &ReducedProblem, rng: &mut ChaCha8Rng, amp: f64) -> ControlField {
    p.zero_control().map(|_| amp * rng.gen_range(-1.0..1.0))
}

/// Random control with a prescribed fraction of exact zeros, whole zero time traces and whole
/// zero time slices, so every branch of the subdifferentials gets exercised.
pub fn holey_control(p: &ReducedProblem, rng: &mut ChaCha8Rng) -> ControlField {
    let mut u = uniform_control(p, rng, 1.0);
    let (steps, npts) = (u.steps(), u.points());
    for n in 0..steps {
        for c in 0..3 {
            let slice_zero = rng.gen::<f64>() < 0.1;
            for x in 0..npts {
                let i = u.index(n, c, x);
                if slice_zero || rng.gen::<f64>() < 0.3 {
                    u.values_mut()[i] = 0.0;
                }
            }
        }
    }
    for c in 0..3 {
        for x in 0..npts {
            if rng.gen::<f64>() < 0.2 {
                for n in 0..steps {
                    let i = u.index(n, c, x);
                    u.values_mut()[i] = 0.0;
                }
            }
        }
    }
    u
}

/// Minimiser on `[lo, hi]` of a convex function given by its right derivative, by bisection
/// on the sign of that derivative.
pub fn bisect_min(right_derivative: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    if right_derivative(lo) >= 0.0 {
        return lo;
    }
    if right_derivative(hi) < 0.0 {
        return hi;
    }
    // invariant: f'_+(lo) < 0 <= f'_+(hi)
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if right_derivative(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Minimiser over the box of `1/2 sum dt (x - w)^2 + tau (sum dt x^2)^{1/2}` by the
/// Dykstra-type splitting of the box projection and the Euclidean group shrink.
pub fn dykstra_group_prox(w: &[f64], dt: f64, tau: f64, lo: f64, hi: f64) -> Vec<f64> {
    // in Euclidean coordinates the penalty reads dt * (tau / sqrt(dt)) |x|
    let te = tau / dt.sqrt();
    let shrink = |v: &[f64]| -> Vec<f64> {
        let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        let s = if n > te { 1.0 - te / n } else { 0.0 };
        v.iter().map(|a| a * s).collect()
    };
    let m = w.len();
    let mut x = w.to_vec();
    let mut p = vec![0.0; m];
    let mut q = vec![0.0; m];
    for _ in 0..1_000_000 {
        let xp: Vec<f64> = x.iter().zip(&p).map(|(a, b)| a + b).collect();
        let y = shrink(&xp);
        let pn: Vec<f64> = xp.iter().zip(&y).map(|(a, b)| a - b).collect();
        let yq: Vec<f64> = y.iter().zip(&q).map(|(a, b)| a + b).collect();
        let xn: Vec<f64> = yq.iter().map(|v| v.clamp(lo, hi)).collect();
        let qn: Vec<f64> = yq.iter().zip(&xn).map(|(a, b)| a - b).collect();
        // x can sit on the box while the correction terms still move
        let diff = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
        let change = diff(&xn, &x).max(diff(&pn, &p)).max(diff(&qn, &q)).max(diff(&xn, &y));
        x = xn;
        p = pn;
        q = qn;
        if change < 1e-14 {
            break;
        }
    }
    x
}

/// Group prox objective, for comparing candidate minimisers.
pub fn group_objective(x: &[f64], w: &[f64], dt: f64, tau: f64) -> f64 {
    let fit: f64 = x.iter().zip(w).map(|(a, b)| 0.5 * dt * (a - b).powi(2)).sum();
    fit + tau * x.iter().map(|a| dt * a * a).sum::<f64>().sqrt()
}
