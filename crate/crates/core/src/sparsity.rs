//! The sparsity functionals, their subdifferentials, proximal maps and the projection-formula
//! fixed point that characterises optimality.
//!
//! All three functionals act component-wise (`|u|` is read as `sum_i |u_i|`):
//!
//! * `j1(u) = sum_i int_Q |u_i|`
//! * `j2(u) = sum_i ( int_0^T |u_i(t)|_{L^1}^2 dt )^{1/2}`
//! * `j3(u) = sum_i int_Omega ( int_0^T u_i^2 dt )^{1/2} dx`
//!
//! Quadrature matches the control pairing: node weight `dV dt` on every interval.

use std::io::Write;

use crate::config::SparsityKind;
use crate::control::{Bounds, ControlField};
use crate::error::{Error, Result};

/// Per-(interval, component) `L^1(Omega)` mass `a[n][c] = sum_x dV |u|`.
fn slice_l1(u: &ControlField) -> Vec<[f64; 3]> {
    let dv = u.grid().cell_volume();
    (0..u.steps())
        .map(|n| {
            let s = u.slice(n);
            std::array::from_fn(|c| s[c].iter().map(|v| v.abs()).sum::<f64>() * dv)
        })
        .collect()
}

/// `|u_c|_{L^2(0,T; L^1)}` per component.
fn component_l2l1(u: &ControlField, a: &[[f64; 3]]) -> [f64; 3] {
    std::array::from_fn(|c| a.iter().map(|r| u.dt() * r[c] * r[c]).sum::<f64>().sqrt())
}

/// Time-trace norms `r[c][x] = (sum_n dt u^2)^{1/2}`.
fn trace_norms(u: &ControlField) -> [Vec<f64>; 3] {
    let npts = u.points();
    std::array::from_fn(|c| {
        (0..npts)
            .map(|x| {
                let s: f64 = (0..u.steps()).map(|n| u.get(n, c, x).powi(2)).sum();
                (s * u.dt()).sqrt()
            })
            .collect()
    })
}

pub fn j_value(u: &ControlField, kind: SparsityKind) -> f64 {
    match kind {
        SparsityKind::None => 0.0,
        SparsityKind::J1 => u.values().iter().map(|v| v.abs()).sum::<f64>() * u.node_weight(),
        SparsityKind::J2 => component_l2l1(u, &slice_l1(u)).iter().sum(),
        SparsityKind::J3 => {
            let dv = u.grid().cell_volume();
            trace_norms(u).iter().map(|r| r.iter().sum::<f64>()).sum::<f64>() * dv
        }
    }
}

/// `sigma_c(t_n)` of the time-directional functional. A component that vanishes identically
/// gets the constant `min(1, T^{-1/2})`, the largest value keeping the interval inside the
/// dual unit ball of `L^2(0,T; L^inf)`; it equals the corollary's value 1 for `T <= 1`.
pub fn sigma_j2(u: &ControlField) -> Vec<[f64; 3]> {
    let a = slice_l1(u);
    let norm = component_l2l1(u, &a);
    let t = u.dt() * u.steps() as f64;
    let idle = (1.0 / t.sqrt()).min(1.0);
    a.iter()
        .map(|r| std::array::from_fn(|c| if norm[c] > 0.0 { r[c] / norm[c] } else { idle }))
        .collect()
}

/// A subgradient `zeta in dj(u)` together with the scale data it was built from.
#[derive(Clone, Debug)]
pub struct SubgradientField {
    pub kind: SparsityKind,
    pub values: ControlField,
    /// `sigma_c(t_n)` for J2.
    pub sigma: Option<Vec<[f64; 3]>>,
    /// Time-trace norms `|u_c(x)|_{L^2(0,T)}` for J3.
    pub trace_norms: Option<[Vec<f64>; 3]>,
    /// Largest deviation between the projection formula `Proj(-lambda/kappa)` and the
    /// subgradient; zero at points satisfying the optimality system.
    pub formula_defect: f64,
}

fn clip(v: f64, lo: f64, hi: f64) -> f64 {
    v.max(lo).min(hi)
}

/// Subgradient of `j` at `u` selected by the projection formulas.
///
/// Where `dj(u)` is single-valued (`u_i != 0` for J1/J2, a nonzero time trace for J3) that
/// value is used; elsewhere the projection of `-lambda/kappa` onto the admissible set of
/// values. The result is always an element of `dj(u)`.
pub fn subgradient(u: &ControlField, lambda: &ControlField, kappa: f64, kind: SparsityKind) -> Result<SubgradientField> {
    if !(kappa > 0.0) {
        return Err(Error::UndefinedSubgradient(format!(
            "the projection formulas need kappa > 0, got {kappa}"
        )));
    }
    u.same_shape(lambda)?;
    let npts = u.points();
    let mut zeta = ControlField::zeros(u.grid(), u.steps(), u.dt());
    let mut defect = 0.0f64;
    let mut sigma = None;
    let mut traces = None;
    match kind {
        SparsityKind::None => {
            return Err(Error::UndefinedSubgradient("kind NONE has no sparsity term".into()));
        }
        SparsityKind::J1 | SparsityKind::J2 => {
            let s = if kind == SparsityKind::J2 {
                sigma_j2(u)
            } else {
                vec![[1.0; 3]; u.steps()]
            };
            for n in 0..u.steps() {
                for c in 0..3 {
                    let sc = s[n][c];
                    for x in 0..npts {
                        let i = u.index(n, c, x);
                        let formula = clip(-lambda.values()[i] / kappa, -sc, sc);
                        let uv = u.values()[i];
                        let z = if uv != 0.0 { sc * uv.signum() } else { formula };
                        defect = defect.max((z - formula).abs());
                        zeta.values_mut()[i] = z;
                    }
                }
            }
            if kind == SparsityKind::J2 {
                sigma = Some(s);
            }
        }
        SparsityKind::J3 => {
            let r = trace_norms(u);
            let lr = trace_norms(lambda);
            for c in 0..3 {
                for x in 0..npts {
                    if r[c][x] > 0.0 {
                        for n in 0..u.steps() {
                            let i = u.index(n, c, x);
                            zeta.values_mut()[i] = u.values()[i] / r[c][x];
                        }
                        // on the support the formula projects -lambda/kappa onto the unit ball
                        let shrink = if lr[c][x] > kappa { kappa / lr[c][x] } else { 1.0 };
                        let mut d2 = 0.0;
                        for n in 0..u.steps() {
                            let i = u.index(n, c, x);
                            let d = zeta.values()[i] + lambda.values()[i] / kappa * shrink;
                            d2 += u.dt() * d * d;
                        }
                        defect = defect.max(d2.sqrt());
                    } else {
                        let shrink = if lr[c][x] > kappa { kappa / lr[c][x] } else { 1.0 };
                        for n in 0..u.steps() {
                            let i = u.index(n, c, x);
                            zeta.values_mut()[i] = -lambda.values()[i] / kappa * shrink;
                        }
                        if lr[c][x] > kappa {
                            defect = defect.max(lr[c][x] / kappa - 1.0);
                        }
                    }
                }
            }
            traces = Some(r);
        }
    }
    Ok(SubgradientField {
        kind,
        values: zeta,
        sigma,
        trace_norms: traces,
        formula_defect: defect,
    })
}

/// One-sided directional derivative `j'(u; v)`.
pub fn directional_derivative(u: &ControlField, v: &ControlField, kind: SparsityKind) -> Result<f64> {
    u.same_shape(v)?;
    let dv = u.grid().cell_volume();
    let dt = u.dt();
    let npts = u.points();
    // derivative of |u| along v
    let abs_dir = |a: f64, b: f64| if a != 0.0 { a.signum() * b } else { b.abs() };
    Ok(match kind {
        SparsityKind::None => 0.0,
        SparsityKind::J1 => {
            u.values()
                .iter()
                .zip(v.values())
                .map(|(&a, &b)| abs_dir(a, b))
                .sum::<f64>()
                * u.node_weight()
        }
        SparsityKind::J2 => {
            let a = slice_l1(u);
            let norm = component_l2l1(u, &a);
            let mut total = 0.0;
            for c in 0..3 {
                if norm[c] == 0.0 {
                    let av: Vec<f64> = (0..u.steps())
                        .map(|n| v.slice(n)[c].iter().map(|x| x.abs()).sum::<f64>() * dv)
                        .collect();
                    total += av.iter().map(|x| dt * x * x).sum::<f64>().sqrt();
                } else {
                    for n in 0..u.steps() {
                        let (us, vs) = (u.slice(n)[c], v.slice(n)[c]);
                        let da: f64 = us.iter().zip(vs).map(|(&p, &q)| abs_dir(p, q)).sum::<f64>() * dv;
                        total += dt * a[n][c] * da / norm[c];
                    }
                }
            }
            total
        }
        SparsityKind::J3 => {
            let r = trace_norms(u);
            let mut total = 0.0;
            for c in 0..3 {
                for x in 0..npts {
                    if r[c][x] > 0.0 {
                        let uv: f64 = (0..u.steps()).map(|n| u.get(n, c, x) * v.get(n, c, x)).sum();
                        total += dt * uv / r[c][x];
                    } else {
                        let vv: f64 = (0..u.steps()).map(|n| v.get(n, c, x).powi(2)).sum();
                        total += (dt * vv).sqrt();
                    }
                }
            }
            total * dv
        }
    })
}

/// Minimiser over `x in [lo, hi]^M` of `1/2 sum_n dt (x_n - w_n)^2 + tau (sum_n dt x_n^2)^{1/2}`.
///
/// The minimiser has the form `x = clip(w r / (r + tau))` with `r = |x|`. The map
/// `r -> |clip(w r / (r + tau))| / r` is strictly decreasing, so `r` is found by bisection;
/// `x = 0` exactly when the part of `w` in the tangent cone of the box at 0 has norm at most
/// `tau`.
pub fn group_prox(w: &[f64], dt: f64, tau: f64, lo: f64, hi: f64, out: &mut [f64]) {
    let norm = |xs: &mut dyn Iterator<Item = f64>| xs.map(|v| dt * v * v).sum::<f64>().sqrt();
    if tau <= 0.0 {
        for (o, &v) in out.iter_mut().zip(w) {
            *o = clip(v, lo, hi);
        }
        return;
    }
    let cone = norm(&mut w.iter().map(|&v| {
        let v = if lo >= 0.0 { v.max(0.0) } else { v };
        if hi <= 0.0 {
            v.min(0.0)
        } else {
            v
        }
    }));
    if cone <= tau {
        out.iter_mut().for_each(|o| *o = 0.0);
        return;
    }
    // without clipping the minimiser is the plain group shrink
    let wn = norm(&mut w.iter().copied());
    let shrink = 1.0 - tau / wn;
    if shrink > 0.0 && w.iter().all(|&v| v * shrink >= lo && v * shrink <= hi) {
        for (o, &v) in out.iter_mut().zip(w) {
            *o = v * shrink;
        }
        return;
    }
    let excess = |r: f64| {
        let th = r / (r + tau);
        norm(&mut w.iter().map(|&v| clip(v * th, lo, hi))) - r
    };
    // excess(0+) > 0 and excess(|clip(w)|) <= 0
    let mut a = 0.0;
    let mut b = norm(&mut w.iter().map(|&v| clip(v, lo, hi)));
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if excess(m) > 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    let r = 0.5 * (a + b);
    let th = r / (r + tau);
    for (o, &v) in out.iter_mut().zip(w) {
        *o = clip(v * th, lo, hi);
    }
}

/// Proximal map of `s kappa j + I_box` in the `L^2(Q)` metric, evaluated at `w`.
///
/// Exact for J1 (soft threshold then clip) and J3 (see [`group_prox`]); J2 has no prox here,
/// use [`kkt_fixed_point`].
pub fn prox_step(w: &ControlField, s: f64, kappa: f64, bounds: &Bounds, kind: SparsityKind) -> Result<ControlField> {
    let tau = s * kappa;
    match kind {
        SparsityKind::None => Ok(w.project(bounds)),
        SparsityKind::J1 => {
            let mut out = w.clone();
            let vals = out.values_mut();
            for (i, v) in vals.iter_mut().enumerate() {
                let c = w.comp_of(i);
                let soft = v.signum() * (v.abs() - tau).max(0.0);
                *v = bounds.clip(c, soft);
            }
            Ok(out)
        }
        SparsityKind::J3 => {
            let mut out = w.clone();
            let steps = w.steps();
            let mut trace = vec![0.0; steps];
            let mut res = vec![0.0; steps];
            for c in 0..3 {
                for x in 0..w.points() {
                    for n in 0..steps {
                        trace[n] = w.get(n, c, x);
                    }
                    group_prox(&trace, w.dt(), tau, bounds.lower[c], bounds.upper[c], &mut res);
                    for n in 0..steps {
                        let i = w.index(n, c, x);
                        out.values_mut()[i] = res[n];
                    }
                }
            }
            Ok(out)
        }
        SparsityKind::J2 => Err(Error::Unsupported(
            "no proximal map for J2; use the projection-formula fixed point (kkt_fixed_point)".into(),
        )),
    }
}

/// Image of the projection-formula map and the distance to it.
#[derive(Clone, Debug)]
pub struct KktStep {
    pub u_next: ControlField,
    pub residual: f64,
}

/// `u_next = Proj_[a,b](-(lambda + kappa zeta) / gamma)` with `zeta` from the projection
/// formulas; `residual = |u - u_next|_{L^2(Q)}` vanishes exactly at points satisfying the
/// first-order system.
///
/// J1 and J2 use `zeta = Proj_[-sigma, sigma](-lambda/kappa)` (`sigma = 1` for J1, `sigma(u)`
/// for J2), which makes the map a soft threshold of `lambda` by `kappa sigma`. J3 uses the
/// group form: the map is the exact minimiser of `gamma/2 |x|^2 + <lambda, x> + kappa j3(x)`
/// over the box.
pub fn kkt_fixed_point(
    u: &ControlField,
    lambda: &ControlField,
    kappa: f64,
    gamma: f64,
    bounds: &Bounds,
    kind: SparsityKind,
) -> Result<KktStep> {
    if !(gamma > 0.0) {
        return Err(Error::Unsupported(format!(
            "gamma = {gamma}: the bang-bang regime has no projection formula"
        )));
    }
    if kappa < 0.0 {
        return Err(Error::config("control.kappa", "must be non-negative"));
    }
    u.same_shape(lambda)?;
    let kind = if kappa == 0.0 { SparsityKind::None } else { kind };
    let u_next = match kind {
        SparsityKind::None | SparsityKind::J1 | SparsityKind::J2 => {
            let s = match kind {
                SparsityKind::J2 => sigma_j2(u),
                _ => vec![[1.0; 3]; u.steps()],
            };
            let mut out = lambda.clone();
            let npts = u.points();
            for (i, v) in out.values_mut().iter_mut().enumerate() {
                let n = i / (3 * npts);
                let c = (i / npts) % 3;
                let t = kappa * s[n][c];
                let soft = v.signum() * (v.abs() - t).max(0.0);
                *v = bounds.clip(c, -soft / gamma);
            }
            out
        }
        SparsityKind::J3 => prox_step(&lambda.scale(-1.0 / gamma), 1.0 / gamma, kappa, bounds, kind)?,
    };
    let residual = u.sub(&u_next).norm();
    Ok(KktStep { u_next, residual })
}

/// Support sizes under the three sparsity views.
#[derive(Clone, Debug, PartialEq)]
pub struct SupportStats {
    pub tol: f64,
    /// Fraction of space-time-component nodes with `|u_i| > tol`.
    pub fraction: f64,
    /// Per interval: fraction of space-component nodes with `|u_i| > tol`.
    pub per_time: Vec<f64>,
    /// Fraction of space-component nodes whose time trace has `|u_i(x)|_{L^2(0,T)} > tol`.
    pub point_fraction: f64,
    /// Space-component nodes whose activity changes in time.
    pub time_varying_points: usize,
}

impl SupportStats {
    pub fn per_time_spread(&self) -> f64 {
        let max = self.per_time.iter().cloned().fold(0.0, f64::max);
        let min = self.per_time.iter().cloned().fold(1.0, f64::min);
        (max - min).max(0.0)
    }
}

/// Default support tolerance `1e-10 * max bound`.
pub fn default_support_tol(bounds: &Bounds) -> f64 {
    1e-10 * bounds.scale()
}

pub fn support_stats(u: &ControlField, tol: f64) -> SupportStats {
    let npts = u.points();
    let steps = u.steps();
    let mut active = 0usize;
    let mut per_time = Vec::with_capacity(steps);
    for n in 0..steps {
        let s = u.slice(n);
        let k: usize = s.iter().map(|c| c.iter().filter(|v| v.abs() > tol).count()).sum();
        active += k;
        per_time.push(k as f64 / (3 * npts) as f64);
    }
    let r = trace_norms(u);
    let mut point_active = 0usize;
    let mut varying = 0usize;
    for c in 0..3 {
        for x in 0..npts {
            if r[c][x] > tol * (u.dt() * steps as f64).sqrt() {
                point_active += 1;
            }
            let on = (0..steps).filter(|&n| u.get(n, c, x).abs() > tol).count();
            if on != 0 && on != steps {
                varying += 1;
            }
        }
    }
    SupportStats {
        tol,
        fraction: active as f64 / u.values().len().max(1) as f64,
        per_time,
        point_fraction: point_active as f64 / (3 * npts) as f64,
        time_varying_points: varying,
    }
}

/// Support map CSV: `point,time,component,value,active`.
pub fn write_support_csv<W: Write>(u: &ControlField, tol: f64, mut out: W) -> Result<()> {
    writeln!(out, "point,time,component,value,active")?;
    for n in 0..u.steps() {
        for c in 0..3 {
            for x in 0..u.points() {
                let v = u.get(n, c, x);
                writeln!(out, "{x},{n},{c},{v:?},{}", u8::from(v.abs() > tol))?;
            }
        }
    }
    Ok(())
}

/// `M^ = max |lambda|` of the costate at the zero control: for `kappa > M^` the zero control
/// satisfies the first-order system (for J2/J3 when `T <= 1`).
pub fn estimate_threshold_m(problem: &crate::sensitivity::ReducedProblem) -> Result<f64> {
    let g = problem.gradient(&problem.zero_control())?;
    Ok(g.lambda.max_abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(steps: usize, rng: &mut ChaCha8Rng, zero_frac: f64) -> ControlField {
        let g = Grid::cubic(4).unwrap();
        let vals = (0..steps * 3 * g.len())
            .map(|_| if rng.gen::<f64>() < zero_frac { 0.0 } else { rng.gen_range(-1.0..1.0) })
            .collect();
        ControlField::from_values(&g, steps, 0.25, vals).unwrap()
    }

    #[test]
    fn constant_field_values() {
        let g = Grid::cubic(4).unwrap();
        let u = ControlField::from_fn(&g, 4, 0.25, |_, _, _| 0.5);
        let q = u.cylinder_volume();
        assert!((j_value(&u, SparsityKind::J1) - 1.5 * q).abs() < 1e-12 * q);
        // |u_c(t)|_{L^1} = 0.5 |Omega|, L^2 in time over T = 1
        let expect = 3.0 * 0.5 * g.volume();
        assert!((j_value(&u, SparsityKind::J2) - expect).abs() < 1e-12 * expect);
        assert!((j_value(&u, SparsityKind::J3) - expect).abs() < 1e-12 * expect);
        for kind in [SparsityKind::J1, SparsityKind::J2, SparsityKind::J3] {
            assert_eq!(j_value(&u.scale(0.0), kind), 0.0);
        }
    }

    #[test]
    fn prox_scalar_examples() {
        let g = Grid::cubic(4).unwrap();
        let b = Bounds::symmetric(1.0);
        for (w, expect) in [(0.7, 0.2), (0.3, 0.0), (-2.0, -1.0)] {
            let u = ControlField::from_fn(&g, 2, 0.5, |_, _, _| w);
            let p = prox_step(&u, 1.0, 0.5, &b, SparsityKind::J1).unwrap();
            assert!(p.values().iter().all(|v| (v - expect).abs() < 1e-15));
        }
        let u = ControlField::from_fn(&g, 2, 0.5, |_, _, _| 0.3);
        assert!(matches!(prox_step(&u, 1.0, 0.5, &b, SparsityKind::J2), Err(Error::Unsupported(_))));
        assert_eq!(prox_step(&u, 1.0, 0.0, &b, SparsityKind::J3).unwrap(), u);
    }

    #[test]
    fn group_prox_halves_trace() {
        // |w| = 2 in the dt-weighted norm
        let w = [2.0, -2.0, 2.0, 2.0];
        let mut out = [0.0; 4];
        group_prox(&w, 0.25, 1.0, -10.0, 10.0, &mut out);
        for (o, v) in out.iter().zip(w) {
            assert!((o - 0.5 * v).abs() < 1e-14);
        }
        group_prox(&w, 0.25, 2.5, -10.0, 10.0, &mut out);
        assert!(out.iter().all(|&o| o == 0.0));
    }

    #[test]
    fn kkt_map_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = random(4, &mut rng, 0.0);
        let b = Bounds::symmetric(1.0);
        let zero = u.scale(0.0);
        let k = kkt_fixed_point(&u, &zero, 0.0, 0.1, &b, SparsityKind::J1).unwrap();
        assert_eq!(k.u_next.max_abs(), 0.0);
        assert!((k.residual - u.norm()).abs() < 1e-14);
        let lam = u.scale(0.4);
        for kind in [SparsityKind::J1, SparsityKind::J2, SparsityKind::J3] {
            let k = kkt_fixed_point(&zero, &lam, 0.5, 0.1, &b, kind).unwrap();
            if kind == SparsityKind::J1 {
                assert_eq!(k.u_next.max_abs(), 0.0);
            }
            let z = subgradient(&zero, &lam, 0.5, SparsityKind::J1).unwrap();
            assert!(z.values.sub(&lam.scale(-2.0)).max_abs() < 1e-15);
        }
        assert!(kkt_fixed_point(&u, &lam, 0.5, 0.0, &b, SparsityKind::J1).is_err());
        assert!(matches!(
            subgradient(&u, &lam, 0.0, SparsityKind::J1),
            Err(Error::UndefinedSubgradient(_))
        ));
    }

    #[test]
    fn support_of_half_saturated_field() {
        let g = Grid::cubic(4).unwrap();
        let u = ControlField::from_fn(&g, 4, 0.25, |x, _, _| if x[0] < 3.0 { 1.0 } else { 0.0 });
        let s = support_stats(&u, 1e-10);
        assert!((s.fraction - 0.5).abs() < 1e-15);
        assert_eq!(s.time_varying_points, 0);
        assert_eq!(support_stats(&u.scale(0.0), 1e-10).fraction, 0.0);
    }
}
