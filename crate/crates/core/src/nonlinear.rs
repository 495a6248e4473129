//! The trilinear form `b(u, v, w) = sum_ij int u_i d_i v_j w_j` and the operator
//! `<B~(u, v), w> = b(u, v, w) - b(w, v, u)`, evaluated pseudo-spectrally.
//!
//! Every operand carries only modes with `|k_i| < n_i / 3`, so all quadratic products are
//! alias-free on the retained modes and cubic products integrate exactly on the grid.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{project_coeffs, SpectralField};
use crate::grid::Grid;
#[allow(unused_imports)]
use crate::par::*;

/// Physical samples of a field and of its gradient, `grad[i][j] = d_i f_j`.
#[derive(Clone, Debug)]
pub struct PhysicalField {
    pub vals: [Vec<f64>; 3],
    pub grad: [[Vec<f64>; 3]; 3],
}

impl PhysicalField {
    pub fn of(f: &SpectralField) -> Self {
        let g = f.grid();
        let mut jobs: Vec<Vec<Complex64>> = Vec::with_capacity(12);
        for c in 0..3 {
            jobs.push(f.coeffs()[c].clone());
        }
        for axis in 0..3 {
            for comp in 0..3 {
                let mut d = vec![Complex64::new(0.0, 0.0); g.len()];
                for &i in g.active() {
                    d[i] = f.coeffs()[comp][i] * Complex64::new(0.0, g.kvec(i)[axis]);
                }
                jobs.push(d);
            }
        }
        let mut out: Vec<Vec<f64>> = par_iter!(jobs).map(|c| g.inverse_real(c)).collect();
        let grad_flat: Vec<Vec<f64>> = out.drain(3..).collect();
        let mut grad_iter = grad_flat.into_iter();
        let grad = std::array::from_fn(|_| std::array::from_fn(|_| grad_iter.next().unwrap()));
        let mut val_iter = out.into_iter();
        let vals = std::array::from_fn(|_| val_iter.next().unwrap());
        PhysicalField { vals, grad }
    }
}

/// `(u . grad) v`, component `j = sum_i u_i d_i v_j`.
fn convective(u: &[Vec<f64>; 3], grad_v: &[[Vec<f64>; 3]; 3], j: usize, x: usize) -> f64 {
    u[0][x] * grad_v[0][j][x] + u[1][x] * grad_v[1][j][x] + u[2][x] * grad_v[2][j][x]
}

/// `(grad v)^T u`, component `j = sum_i u_i d_j v_i`.
fn transposed(u: &[Vec<f64>; 3], grad_v: &[[Vec<f64>; 3]; 3], j: usize, x: usize) -> f64 {
    u[0][x] * grad_v[j][0][x] + u[1][x] * grad_v[j][1][x] + u[2][x] * grad_v[j][2][x]
}

/// Component `j` of `(u . grad) v - (grad v)^T u` at point `x`.
#[inline]
pub(crate) fn btilde_at(u: &[Vec<f64>; 3], grad_v: &[[Vec<f64>; 3]; 3], j: usize, x: usize) -> f64 {
    convective(u, grad_v, j, x) - transposed(u, grad_v, j, x)
}

/// Component `j` of `(p . grad) y - (y . grad) p` at point `x`.
#[inline]
pub(crate) fn commutator_at(y: &PhysicalField, p: &PhysicalField, j: usize, x: usize) -> f64 {
    convective(&p.vals, &y.grad, j, x) - convective(&y.vals, &p.grad, j, x)
}

/// Leray projection of the pointwise field `x -> (f(0, x), f(1, x), f(2, x))`.
pub(crate) fn project_pointwise(grid: &Grid, f: impl Fn(usize, usize) -> f64) -> SpectralField {
    let n = grid.len();
    let comps = std::array::from_fn(|j| (0..n).map(|x| f(j, x)).collect());
    project_physical(grid, comps)
}

/// Leray projection of a physical vector field given component-wise.
pub(crate) fn project_physical(grid: &Grid, comps: [Vec<f64>; 3]) -> SpectralField {
    let spec: Vec<Vec<Complex64>> = par_iter!(comps).map(|v| grid.forward_real(v)).collect();
    let mut it = spec.into_iter();
    let coeffs = std::array::from_fn(|_| it.next().unwrap());
    project_coeffs(grid, &coeffs)
}

/// `B~(u, v)` from physical samples of `u` and of `grad v`.
pub(crate) fn btilde_phys(grid: &Grid, u: &[Vec<f64>; 3], grad_v: &[[Vec<f64>; 3]; 3]) -> SpectralField {
    project_pointwise(grid, |j, x| btilde_at(u, grad_v, j, x))
}

fn same_grid(fields: &[&SpectralField]) -> Result<()> {
    let g = fields[0].grid();
    if fields.iter().any(|f| f.grid() != g) {
        return Err(Error::GridMismatch);
    }
    Ok(())
}

/// `b(u, v, w) = sum_ij int u_i (d v_j / d x_i) w_j dx`.
pub fn trilinear_b(u: &SpectralField, v: &SpectralField, w: &SpectralField) -> Result<f64> {
    same_grid(&[u, v, w])?;
    let g = u.grid();
    let up = u.to_physical();
    let wp = w.to_physical();
    let gv = PhysicalField::of(v).grad;
    let mut s = 0.0;
    for x in 0..g.len() {
        for j in 0..3 {
            s += convective(&up, &gv, j, x) * wp[j][x];
        }
    }
    Ok(s * g.cell_volume())
}

/// Divergence-free representative of `B~(u, v)`: `<B~(u,v), w> = b(u,v,w) - b(w,v,u)` for
/// every divergence-free `w`.
pub fn btilde(u: &SpectralField, v: &SpectralField) -> Result<SpectralField> {
    same_grid(&[u, v])?;
    let up = u.to_physical();
    let gv = PhysicalField::of(v).grad;
    Ok(btilde_phys(u.grid(), &up, &gv))
}
