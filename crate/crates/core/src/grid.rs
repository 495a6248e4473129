//! Periodic box discretisation: wavenumber tables, dealiasing mask and 3D FFTs.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::error::{Error, Result};

/// Fourier grid on the periodic box `[0, L0) x [0, L1) x [0, L2)`.
///
/// Coefficients are stored in FFT order along every axis (`0, 1, .., n/2-1, -n/2, .., -1`)
/// with the last axis contiguous: `index = (i0 * n1 + i1) * n2 + i2`.
#[derive(Clone)]
pub struct Grid {
    inner: Arc<GridData>,
}

struct GridData {
    dims: [usize; 3],
    box_length: [f64; 3],
    dealias: f64,
    kint: Vec<[i64; 3]>,
    kvec: Vec<[f64; 3]>,
    k2: Vec<f64>,
    retained: Vec<bool>,
    active: Vec<usize>,
    neg: Vec<usize>,
    kmax: f64,
    plans: [[Arc<dyn Fft<f64>>; 2]; 3],
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
            || (self.inner.dims == other.inner.dims
                && self.inner.box_length == other.inner.box_length
                && self.inner.dealias == other.inner.dealias)
    }
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("dims", &self.inner.dims)
            .field("box_length", &self.inner.box_length)
            .field("dealias", &self.inner.dealias)
            .finish()
    }
}

/// Signed wavenumber of FFT index `i` on an axis with `n` points.
pub fn signed_wavenumber(i: usize, n: usize) -> i64 {
    if i < n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

impl Grid {
    pub fn new(dims: [usize; 3], box_length: [f64; 3], dealias: f64) -> Result<Self> {
        for (axis, &n) in dims.iter().enumerate() {
            if n < 4 || n % 2 != 0 {
                return Err(Error::config(
                    format!("grid.n[{axis}]"),
                    format!("must be even and >= 4, got {n}"),
                ));
            }
        }
        for (axis, &l) in box_length.iter().enumerate() {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::config(
                    format!("grid.box_length[{axis}]"),
                    format!("must be positive, got {l}"),
                ));
            }
        }
        if !(dealias > 0.0 && dealias <= 1.0) {
            return Err(Error::config(
                "grid.dealias",
                format!("must lie in (0, 1], got {dealias}"),
            ));
        }

        let [n0, n1, n2] = dims;
        let len = n0 * n1 * n2;
        let mut kint = Vec::with_capacity(len);
        let mut kvec = Vec::with_capacity(len);
        let mut k2 = Vec::with_capacity(len);
        let mut retained = Vec::with_capacity(len);
        let mut neg = Vec::with_capacity(len);
        let mut active = Vec::new();
        let mut kmax: f64 = 0.0;
        for i0 in 0..n0 {
            for i1 in 0..n1 {
                for i2 in 0..n2 {
                    let idx = (i0 * n1 + i1) * n2 + i2;
                    let ki = [
                        signed_wavenumber(i0, n0),
                        signed_wavenumber(i1, n1),
                        signed_wavenumber(i2, n2),
                    ];
                    let kv = [
                        2.0 * PI * ki[0] as f64 / box_length[0],
                        2.0 * PI * ki[1] as f64 / box_length[1],
                        2.0 * PI * ki[2] as f64 / box_length[2],
                    ];
                    // Strict 2/3-type rule: |k_i| < dealias * n_i / 2 keeps every quadratic
                    // product alias-free on the retained modes (3 K < n).
                    let keep = ki
                        .iter()
                        .zip(dims.iter())
                        .all(|(&k, &n)| (k.unsigned_abs() as f64) < dealias * n as f64 / 2.0);
                    let kk = kv[0] * kv[0] + kv[1] * kv[1] + kv[2] * kv[2];
                    if keep && ki != [0, 0, 0] {
                        active.push(idx);
                        kmax = kmax.max(kk.sqrt());
                    }
                    let j0 = (n0 - i0) % n0;
                    let j1 = (n1 - i1) % n1;
                    let j2 = (n2 - i2) % n2;
                    neg.push((j0 * n1 + j1) * n2 + j2);
                    kint.push(ki);
                    kvec.push(kv);
                    k2.push(kk);
                    retained.push(keep);
                }
            }
        }

        let mut planner = FftPlanner::new();
        let plan = |p: &mut FftPlanner<f64>, n: usize| {
            [
                p.plan_fft(n, FftDirection::Forward),
                p.plan_fft(n, FftDirection::Inverse),
            ]
        };
        let plans = [plan(&mut planner, n0), plan(&mut planner, n1), plan(&mut planner, n2)];

        Ok(Grid {
            inner: Arc::new(GridData {
                dims,
                box_length,
                dealias,
                kint,
                kvec,
                k2,
                retained,
                active,
                neg,
                kmax,
                plans,
            }),
        })
    }

    /// Cubic `n^3` grid on the `2*pi` box with the 2/3 rule.
    pub fn cubic(n: usize) -> Result<Self> {
        Self::new([n; 3], [2.0 * PI; 3], 2.0 / 3.0)
    }

    pub fn dims(&self) -> [usize; 3] {
        self.inner.dims
    }
    pub fn box_length(&self) -> [f64; 3] {
        self.inner.box_length
    }
    pub fn dealias(&self) -> f64 {
        self.inner.dealias
    }
    /// Number of grid points (and of Fourier coefficients per component).
    pub fn len(&self) -> usize {
        self.inner.k2.len()
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
    pub fn volume(&self) -> f64 {
        self.inner.box_length.iter().product()
    }
    pub fn cell_volume(&self) -> f64 {
        self.volume() / self.len() as f64
    }
    pub fn kint(&self, idx: usize) -> [i64; 3] {
        self.inner.kint[idx]
    }
    pub fn kvec(&self, idx: usize) -> [f64; 3] {
        self.inner.kvec[idx]
    }
    pub fn k2(&self, idx: usize) -> f64 {
        self.inner.k2[idx]
    }
    pub fn k2_all(&self) -> &[f64] {
        &self.inner.k2
    }
    /// Whether mode `idx` survives dealiasing (the zero mode included).
    pub fn is_retained(&self, idx: usize) -> bool {
        self.inner.retained[idx]
    }
    /// Retained nonzero modes; the only modes a velocity-type field may occupy.
    pub fn active(&self) -> &[usize] {
        &self.inner.active
    }
    /// Index of the mode `-k`.
    pub fn neg_index(&self, idx: usize) -> usize {
        self.inner.neg[idx]
    }
    /// Largest retained `|k|`.
    pub fn kmax(&self) -> f64 {
        self.inner.kmax
    }
    /// Smallest nonzero `|k|^2` among retained modes.
    pub fn k2_min(&self) -> f64 {
        self.inner
            .active
            .iter()
            .map(|&i| self.inner.k2[i])
            .fold(f64::INFINITY, f64::min)
    }

    /// Physical coordinates of grid point `idx`.
    pub fn point(&self, idx: usize) -> [f64; 3] {
        let [_, n1, n2] = self.inner.dims;
        let i2 = idx % n2;
        let i1 = (idx / n2) % n1;
        let i0 = idx / (n1 * n2);
        let [l0, l1, l2] = self.inner.box_length;
        let [m0, m1, m2] = self.inner.dims;
        [
            l0 * i0 as f64 / m0 as f64,
            l1 * i1 as f64 / m1 as f64,
            l2 * i2 as f64 / m2 as f64,
        ]
    }

    /// Unnormalised in-place 3D transform.
    pub(crate) fn fft3(&self, data: &mut [Complex64], direction: FftDirection) {
        let [n0, n1, n2] = self.inner.dims;
        debug_assert_eq!(data.len(), n0 * n1 * n2);
        let d = match direction {
            FftDirection::Forward => 0,
            FftDirection::Inverse => 1,
        };
        // axis 2: rows are contiguous, one batched call
        self.inner.plans[2][d].process(data);

        // axis 1: gather columns into a contiguous buffer
        let mut buf = vec![Complex64::new(0.0, 0.0); data.len()];
        for i0 in 0..n0 {
            for i2 in 0..n2 {
                let col = (i0 * n2 + i2) * n1;
                for i1 in 0..n1 {
                    buf[col + i1] = data[(i0 * n1 + i1) * n2 + i2];
                }
            }
        }
        self.inner.plans[1][d].process(&mut buf);
        for i0 in 0..n0 {
            for i2 in 0..n2 {
                let col = (i0 * n2 + i2) * n1;
                for i1 in 0..n1 {
                    data[(i0 * n1 + i1) * n2 + i2] = buf[col + i1];
                }
            }
        }

        // axis 0
        let plane = n1 * n2;
        for p in 0..plane {
            for i0 in 0..n0 {
                buf[p * n0 + i0] = data[i0 * plane + p];
            }
        }
        self.inner.plans[0][d].process(&mut buf);
        for p in 0..plane {
            for i0 in 0..n0 {
                data[i0 * plane + p] = buf[p * n0 + i0];
            }
        }
    }

    /// Fourier coefficients `c(k) = N^{-1} sum_x f(x) e^{-ik.x}` of a real grid function.
    pub(crate) fn forward_real(&self, values: &[f64]) -> Vec<Complex64> {
        let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fft3(&mut data, FftDirection::Forward);
        let scale = 1.0 / self.len() as f64;
        data.iter_mut().for_each(|c| *c *= scale);
        data
    }

    /// Real part of `sum_k c(k) e^{ik.x}` on the grid.
    pub(crate) fn inverse_real(&self, coeffs: &[Complex64]) -> Vec<f64> {
        let mut data = coeffs.to_vec();
        self.fft3(&mut data, FftDirection::Inverse);
        data.into_iter().map(|c| c.re).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_odd_or_small_dims() {
        assert!(Grid::new([6, 8, 8], [1.0; 3], 2.0 / 3.0).is_ok());
        assert!(Grid::new([7, 8, 8], [1.0; 3], 2.0 / 3.0).is_err());
        assert!(Grid::new([2, 8, 8], [1.0; 3], 2.0 / 3.0).is_err());
        assert!(Grid::new([8, 8, 8], [0.0, 1.0, 1.0], 2.0 / 3.0).is_err());
        assert!(Grid::new([8, 8, 8], [1.0; 3], 0.0).is_err());
    }

    #[test]
    fn active_set_is_symmetric_and_alias_free() {
        for n in [4, 6, 8, 12, 16] {
            let g = Grid::cubic(n).unwrap();
            let kmax_int = g
                .active()
                .iter()
                .map(|&i| g.kint(i).iter().map(|k| k.abs()).max().unwrap())
                .max()
                .unwrap();
            assert!(3 * kmax_int < n as i64, "n={n} K={kmax_int}");
            for &i in g.active() {
                let j = g.neg_index(i);
                assert!(g.active().contains(&j));
                let (a, b) = (g.kint(i), g.kint(j));
                assert_eq!([a[0] + b[0], a[1] + b[1], a[2] + b[2]], [0, 0, 0]);
            }
        }
        assert_eq!(Grid::cubic(8).unwrap().active().len(), 124);
    }

    #[test]
    fn fft_roundtrip_and_single_mode() {
        let g = Grid::new([8, 6, 4], [2.0 * PI, 3.0, 1.5], 1.0).unwrap();
        let vals: Vec<f64> = (0..g.len())
            .map(|i| {
                let x = g.point(i);
                (2.0 * PI * x[1] / 3.0).cos() + 0.5
            })
            .collect();
        let c = g.forward_real(&vals);
        let back = g.inverse_real(&c);
        for (a, b) in vals.iter().zip(&back) {
            assert!((a - b).abs() < 1e-13);
        }
        // cos(2 pi y / L1) has coefficients 1/2 at k=(0,+-1,0), mean 0.5
        assert!((c[0].re - 0.5).abs() < 1e-14);
        let idx = |i0: usize, i1: usize, i2: usize| (i0 * 6 + i1) * 4 + i2;
        assert!((c[idx(0, 1, 0)].re - 0.5).abs() < 1e-14);
        assert!((c[idx(0, 5, 0)].re - 0.5).abs() < 1e-14);
    }
}
