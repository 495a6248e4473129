//! Divergence-free spectral fields and the diagonal operators acting on them.
//!
//! On the periodic box the Stokes operator `A = -P Laplacian` is diagonal in Fourier space
//! with symbol `|k|^2`, so `A^s`, the Helmholtz filter `F = I + alpha^2 A` and `F^{-1}` are
//! exact mode-wise multipliers.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::grid::Grid;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Tolerance on Hermitian symmetry for fields coming from outside the crate.
const HERMITIAN_TOL: f64 = 1e-12;

/// A complex vector field on the grid with no structural guarantees.
#[derive(Clone, Debug)]
pub struct RawField {
    pub grid: Grid,
    pub coeffs: [Vec<Complex64>; 3],
}

impl RawField {
    pub fn zeros(grid: &Grid) -> Self {
        let n = grid.len();
        RawField {
            grid: grid.clone(),
            coeffs: [vec![ZERO; n], vec![ZERO; n], vec![ZERO; n]],
        }
    }

    /// Fourier coefficients of a real vector field sampled on the grid points.
    pub fn from_physical(grid: &Grid, values: [&[f64]; 3]) -> Self {
        RawField {
            grid: grid.clone(),
            coeffs: values.map(|v| grid.forward_real(v)),
        }
    }

    /// Largest `|c(-k) - conj(c(k))|` relative to the largest coefficient.
    pub fn hermitian_defect(&self) -> f64 {
        let scale = max_abs(&self.coeffs);
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst: f64 = 0.0;
        for c in &self.coeffs {
            for (i, v) in c.iter().enumerate() {
                let w = c[self.grid.neg_index(i)];
                worst = worst.max((v - w.conj()).norm());
            }
        }
        worst / scale
    }
}

fn max_abs(coeffs: &[Vec<Complex64>; 3]) -> f64 {
    coeffs
        .iter()
        .flat_map(|c| c.iter())
        .fold(0.0, |m: f64, v| m.max(v.norm()))
}

/// Real, mean-free, dealiased, divergence-free vector field stored as Fourier coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    grid: Grid,
    coeffs: [Vec<Complex64>; 3],
}

/// Parseval norms: `l2 = |f|`, `h1 = |A^{1/2} f|`, `da = |A f|`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Norms {
    pub l2: f64,
    pub h1: f64,
    pub da: f64,
}

/// Leray projection (composed with dealiasing and the mean-free gauge) of a raw field.
///
/// Fails if the input is not Hermitian, i.e. does not represent a real field.
pub fn leray_project(raw: &RawField) -> Result<SpectralField> {
    let defect = raw.hermitian_defect();
    if defect > HERMITIAN_TOL {
        return Err(Error::InvalidField(format!(
            "input is not Hermitian (relative defect {defect:e})"
        )));
    }
    Ok(project_coeffs(&raw.grid, &raw.coeffs))
}

/// Projection without the Hermitian check. The real part is taken mode-wise, which is the
/// exact spectral counterpart of discarding the imaginary part in physical space.
pub(crate) fn project_coeffs(grid: &Grid, coeffs: &[Vec<Complex64>; 3]) -> SpectralField {
    let mut out = SpectralField::zeros(grid);
    for &i in grid.active() {
        let j = grid.neg_index(i);
        let r = [
            0.5 * (coeffs[0][i] + coeffs[0][j].conj()),
            0.5 * (coeffs[1][i] + coeffs[1][j].conj()),
            0.5 * (coeffs[2][i] + coeffs[2][j].conj()),
        ];
        let k = grid.kvec(i);
        let kr = r[0] * k[0] + r[1] * k[1] + r[2] * k[2];
        let inv = 1.0 / grid.k2(i);
        for c in 0..3 {
            out.coeffs[c][i] = r[c] - kr * (k[c] * inv);
        }
    }
    out
}

impl SpectralField {
    pub fn zeros(grid: &Grid) -> Self {
        let n = grid.len();
        SpectralField {
            grid: grid.clone(),
            coeffs: [vec![ZERO; n], vec![ZERO; n], vec![ZERO; n]],
        }
    }

    /// Random field with independent Gaussian coefficients on every active mode, damped by
    /// `(1 + |k|^2)^{-decay/2}`, then projected.
    pub fn random<R: Rng + ?Sized>(grid: &Grid, rng: &mut R, amplitude: f64, decay: f64) -> Self {
        let mut raw = RawField::zeros(grid);
        for &i in grid.active() {
            let j = grid.neg_index(i);
            if j < i {
                continue;
            }
            let damp = amplitude * (1.0 + grid.k2(i)).powf(-0.5 * decay);
            for c in 0..3 {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                let v = Complex64::new(re, im) * damp;
                raw.coeffs[c][i] = v;
                raw.coeffs[c][j] = v.conj();
            }
        }
        project_coeffs(grid, &raw.coeffs)
    }

    /// The real field `amp * cos(k.x) + amp_sin * sin(k.x)` for an integer wavenumber `k`,
    /// projected. `k` must be a retained nonzero mode.
    pub fn trig_mode(grid: &Grid, k: [i64; 3], amp_cos: [f64; 3], amp_sin: [f64; 3]) -> Result<Self> {
        let dims = grid.dims();
        let mut idx = 0;
        for a in 0..3 {
            let n = dims[a] as i64;
            let i = k[a].rem_euclid(n) as usize;
            idx = idx * dims[a] + i;
        }
        if !grid.active().contains(&idx) {
            return Err(Error::InvalidField(format!("mode {k:?} is not an active mode")));
        }
        let j = grid.neg_index(idx);
        let mut raw = RawField::zeros(grid);
        for c in 0..3 {
            // a cos + b sin = (a - i b)/2 e^{ikx} + (a + i b)/2 e^{-ikx}
            let v = Complex64::new(0.5 * amp_cos[c], -0.5 * amp_sin[c]);
            raw.coeffs[c][idx] += v;
            raw.coeffs[c][j] += v.conj();
        }
        Ok(project_coeffs(grid, &raw.coeffs))
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn coeffs(&self) -> &[Vec<Complex64>; 3] {
        &self.coeffs
    }

    /// Builds a field from external coefficients, verifying every invariant.
    pub fn from_coeffs(grid: &Grid, coeffs: [Vec<Complex64>; 3]) -> Result<Self> {
        if coeffs.iter().any(|c| c.len() != grid.len()) {
            return Err(Error::ShapeMismatch("coefficient length != grid size".into()));
        }
        let scale = max_abs(&coeffs);
        let raw = RawField {
            grid: grid.clone(),
            coeffs,
        };
        if raw.hermitian_defect() > HERMITIAN_TOL {
            return Err(Error::InvalidField("coefficients are not Hermitian".into()));
        }
        let f = SpectralField {
            grid: grid.clone(),
            coeffs: raw.coeffs,
        };
        let active = grid.active();
        for c in &f.coeffs {
            for (i, v) in c.iter().enumerate() {
                if v.norm() > 0.0 && active.binary_search(&i).is_err() {
                    return Err(Error::InvalidField(format!(
                        "nonzero coefficient outside the retained modes at index {i}"
                    )));
                }
            }
        }
        if scale > 0.0 && f.divergence_defect() > 1e-12 {
            return Err(Error::InvalidField("field is not divergence-free".into()));
        }
        Ok(f)
    }

    pub(crate) fn coeffs_mut(&mut self) -> &mut [Vec<Complex64>; 3] {
        &mut self.coeffs
    }

    /// `max |k . c(k)| / (max |c| * kmax)`; zero for the zero field.
    pub fn divergence_defect(&self) -> f64 {
        let scale = max_abs(&self.coeffs) * self.grid.kmax().max(1e-300);
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst: f64 = 0.0;
        for i in 0..self.grid.len() {
            let k = self.grid.kvec(i);
            let d = self.coeffs[0][i] * k[0] + self.coeffs[1][i] * k[1] + self.coeffs[2][i] * k[2];
            worst = worst.max(d.norm());
        }
        worst / scale
    }

    pub fn max_coeff(&self) -> f64 {
        max_abs(&self.coeffs)
    }

    /// `L^2(Omega)` pairing `(f, g) = |Omega| sum_k Re(f(k) conj(g(k)))`.
    pub fn inner(&self, other: &SpectralField) -> f64 {
        let mut s = 0.0;
        for &i in self.grid.active() {
            for c in 0..3 {
                let a = self.coeffs[c][i];
                let b = other.coeffs[c][i];
                s += a.re * b.re + a.im * b.im;
            }
        }
        s * self.grid.volume()
    }

    /// Weighted pairing `|Omega| sum_k w(|k|^2) Re(f conj g)`.
    pub fn inner_weighted(&self, other: &SpectralField, weight: impl Fn(f64) -> f64) -> f64 {
        let mut s = 0.0;
        for &i in self.grid.active() {
            let w = weight(self.grid.k2(i));
            let mut m = 0.0;
            for c in 0..3 {
                let a = self.coeffs[c][i];
                let b = other.coeffs[c][i];
                m += a.re * b.re + a.im * b.im;
            }
            s += w * m;
        }
        s * self.grid.volume()
    }

    pub fn norms(&self) -> Norms {
        let l2 = self.inner(self).max(0.0).sqrt();
        let h1 = self.inner_weighted(self, |k2| k2).max(0.0).sqrt();
        let da = self.inner_weighted(self, |k2| k2 * k2).max(0.0).sqrt();
        Norms { l2, h1, da }
    }

    /// Multiply every mode by `symbol(|k|^2)`.
    pub fn map_symbol(&self, symbol: impl Fn(f64) -> f64) -> SpectralField {
        let mut out = SpectralField::zeros(&self.grid);
        for &i in self.grid.active() {
            let s = symbol(self.grid.k2(i));
            for c in 0..3 {
                out.coeffs[c][i] = self.coeffs[c][i] * s;
            }
        }
        out
    }

    pub fn scale(&self, a: f64) -> SpectralField {
        self.map_symbol(|_| a)
    }

    /// `self += a * x`
    pub fn axpy(&mut self, a: f64, x: &SpectralField) {
        for &i in x.grid.active() {
            for c in 0..3 {
                self.coeffs[c][i] += x.coeffs[c][i] * a;
            }
        }
    }

    pub fn add(&self, other: &SpectralField) -> SpectralField {
        let mut out = self.clone();
        out.axpy(1.0, other);
        out
    }

    pub fn sub(&self, other: &SpectralField) -> SpectralField {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    /// Physical-space samples of the three components.
    pub fn to_physical(&self) -> [Vec<f64>; 3] {
        let g = &self.grid;
        [
            g.inverse_real(&self.coeffs[0]),
            g.inverse_real(&self.coeffs[1]),
            g.inverse_real(&self.coeffs[2]),
        ]
    }

    /// `grad[i][j] = d f_j / d x_i` sampled on the grid.
    pub fn gradient_physical(&self) -> [[Vec<f64>; 3]; 3] {
        let g = &self.grid;
        let deriv = |axis: usize, comp: usize| {
            let mut d = vec![ZERO; g.len()];
            for &i in g.active() {
                d[i] = self.coeffs[comp][i] * Complex64::new(0.0, g.kvec(i)[axis]);
            }
            g.inverse_real(&d)
        };
        std::array::from_fn(|axis| std::array::from_fn(|comp| deriv(axis, comp)))
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.iter().all(|v| *v == ZERO))
    }
}

/// Fractional Stokes power `A^s`, `s >= 0` (or negative when the zero mode vanishes).
pub fn apply_stokes(f: &SpectralField, power: f64) -> Result<SpectralField> {
    if power < 0.0 && f.coeffs.iter().any(|c| c[0] != ZERO) {
        return Err(Error::SingularOperator(format!(
            "A^{power} applied to a field with a nonzero mean"
        )));
    }
    if power == 0.0 {
        return Ok(f.clone());
    }
    Ok(f.map_symbol(|k2| k2.powf(power)))
}

/// Helmholtz filter `F = I + alpha^2 A` or its inverse.
pub fn helmholtz(f: &SpectralField, alpha: f64, invert: bool) -> SpectralField {
    let a2 = alpha * alpha;
    if invert {
        f.map_symbol(|k2| 1.0 / (1.0 + a2 * k2))
    } else {
        f.map_symbol(|k2| 1.0 + a2 * k2)
    }
}

pub fn norms(f: &SpectralField) -> Norms {
    f.norms()
}
