//! Fields on the polar grid and their Fourier-in-angle representation.
//!
//! A `ScalarField` stores real samples indexed radius-major. Angular
//! calculus runs through `ModeField`, the complex Fourier representation per
//! radius. First-order calculus is organized around the spin raising and
//! lowering maps
//!
//!   raise = d_1 + i d_2 : mode m -> (D_r - m/r) at mode m+1,
//!   lower = d_1 - i d_2 : mode m -> (D_r + m/r) at mode m-1,
//!
//! which the elliptic module composes exactly in its solves.

use num_complex::Complex64;
use rustfft::num_complex::Complex;

use crate::error::{Error, Result};
use crate::grid::PolarGrid;

#[derive(Clone, Debug)]
pub struct ScalarField {
    grid: PolarGrid,
    values: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct ModeField {
    grid: PolarGrid,
    /// Radius-major FFT bins: coeffs[j * n_theta + t], normalized so that
    /// u(r_j, theta_k) = sum_t coeffs[j, t] exp(i m(t) theta_k).
    coeffs: Vec<Complex64>,
}

/// Symmetric traceless 2-tensor: stores the (11) and (12) components; the
/// other two are determined by symmetry and tracelessness.
#[derive(Clone, Debug)]
pub struct TensorField {
    pub xx: ScalarField,
    pub xy: ScalarField,
}

impl ScalarField {
    pub fn zeros(grid: &PolarGrid) -> Self {
        ScalarField {
            grid: grid.clone(),
            values: vec![0.0; grid.len()],
        }
    }

    /// Sample a pointwise function of (r, theta) on the grid.
    pub fn from_fn(grid: &PolarGrid, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.len());
        for &r in grid.r_nodes() {
            for &theta in grid.theta_nodes() {
                let v = f(r, theta);
                if !v.is_finite() {
                    return Err(Error::NonFiniteSample { r, theta, value: v });
                }
                values.push(v);
            }
        }
        Ok(ScalarField {
            grid: grid.clone(),
            values,
        })
    }

    pub fn from_values(grid: &PolarGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch("value count"));
        }
        for (i, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                let j = i / grid.n_theta();
                let k = i % grid.n_theta();
                return Err(Error::NonFiniteSample {
                    r: grid.r_nodes()[j],
                    theta: grid.theta_nodes()[k],
                    value: v,
                });
            }
        }
        Ok(ScalarField {
            grid: grid.clone(),
            values,
        })
    }

    pub(crate) fn from_values_unchecked(grid: &PolarGrid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        ScalarField {
            grid: grid.clone(),
            values,
        }
    }

    /// Sample a purely radial profile.
    pub fn from_radial(grid: &PolarGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::from_fn(grid, |r, _| f(r))
    }

    pub fn grid(&self) -> &PolarGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    #[inline]
    pub fn at(&self, j: usize, k: usize) -> f64 {
        self.values[j * self.grid.n_theta() + k]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> ScalarField {
        assert!(self.grid == other.grid, "grid mismatch");
        ScalarField {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn scaled(&self, c: f64) -> ScalarField {
        self.map(|v| c * v)
    }

    pub fn add(&self, other: &ScalarField) -> ScalarField {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &ScalarField) -> ScalarField {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &ScalarField) -> ScalarField {
        self.zip_map(other, |a, b| a * b)
    }

    /// a*self + b*other, the workhorse of field assembly.
    pub fn axpy(&self, a: f64, other: &ScalarField, b: f64) -> ScalarField {
        self.zip_map(other, |x, y| a * x + b * y)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, &v| m.max(v.abs()))
    }

    /// Plain discrete L^2 norm over the plane (quadrature-weighted).
    pub fn l2_norm(&self) -> f64 {
        let tw = self.grid.theta_weight();
        let nt = self.grid.n_theta();
        let mut acc = 0.0;
        for (j, &w) in self.grid.radial_weights().iter().enumerate() {
            let row = &self.values[j * nt..(j + 1) * nt];
            let s: f64 = row.iter().map(|&v| v * v).sum();
            acc += w * tw * s;
        }
        acc.sqrt()
    }

    pub fn to_modes(&self) -> ModeField {
        let nt = self.grid.n_theta();
        let nr = self.grid.n_r();
        let fft = self.grid.fft_forward();
        let scale = 1.0 / nt as f64;
        let mut coeffs = vec![Complex64::new(0.0, 0.0); self.values.len()];
        let mut buf: Vec<Complex<f64>> = vec![Complex::new(0.0, 0.0); nt];
        for j in 0..nr {
            for k in 0..nt {
                buf[k] = Complex::new(self.values[j * nt + k], 0.0);
            }
            fft.process(&mut buf);
            for t in 0..nt {
                coeffs[j * nt + t] = buf[t] * scale;
            }
        }
        ModeField {
            grid: self.grid.clone(),
            coeffs,
        }
    }
}

impl ModeField {
    pub fn zeros(grid: &PolarGrid) -> Self {
        ModeField {
            grid: grid.clone(),
            coeffs: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn from_complex_values(grid: &PolarGrid, values: &[Complex64]) -> Self {
        assert_eq!(values.len(), grid.len());
        let nt = grid.n_theta();
        let nr = grid.n_r();
        let fft = grid.fft_forward();
        let scale = 1.0 / nt as f64;
        let mut coeffs = vec![Complex64::new(0.0, 0.0); values.len()];
        let mut buf: Vec<Complex<f64>> = vec![Complex::new(0.0, 0.0); nt];
        for j in 0..nr {
            buf.copy_from_slice(&values[j * nt..(j + 1) * nt]);
            fft.process(&mut buf);
            for t in 0..nt {
                coeffs[j * nt + t] = buf[t] * scale;
            }
        }
        ModeField {
            grid: grid.clone(),
            coeffs,
        }
    }

    pub fn grid(&self) -> &PolarGrid {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    /// Radial profile of the FFT bin t, as a complex vector.
    pub fn mode_profile(&self, t: usize) -> Vec<Complex64> {
        let nt = self.grid.n_theta();
        (0..self.grid.n_r())
            .map(|j| self.coeffs[j * nt + t])
            .collect()
    }

    pub fn set_mode_profile(&mut self, t: usize, profile: &[Complex64]) {
        let nt = self.grid.n_theta();
        for (j, &v) in profile.iter().enumerate() {
            self.coeffs[j * nt + t] = v;
        }
    }

    pub fn to_complex_values(&self) -> Vec<Complex64> {
        let nt = self.grid.n_theta();
        let nr = self.grid.n_r();
        let ifft = self.grid.fft_inverse();
        let mut out = vec![Complex64::new(0.0, 0.0); self.coeffs.len()];
        let mut buf: Vec<Complex<f64>> = vec![Complex::new(0.0, 0.0); nt];
        for j in 0..nr {
            buf.copy_from_slice(&self.coeffs[j * nt..(j + 1) * nt]);
            ifft.process(&mut buf);
            out[j * nt..(j + 1) * nt].copy_from_slice(&buf);
        }
        out
    }

    /// Inverse transform, keeping the real part (the imaginary part of a
    /// Hermitian-symmetric spectrum is round-off).
    pub fn to_scalar(&self) -> ScalarField {
        let vals = self.to_complex_values();
        ScalarField::from_values_unchecked(&self.grid, vals.iter().map(|c| c.re).collect())
    }

    /// Relative spectral content in the top representable angular modes,
    /// used to detect unresolved data.
    pub fn top_mode_content(&self) -> f64 {
        let nt = self.grid.n_theta();
        let top = self.grid.max_mode();
        let mut top_sum = 0.0f64;
        let mut total = 0.0f64;
        for j in 0..self.grid.n_r() {
            let w = self.grid.radial_weights()[j];
            for t in 0..nt {
                let m = self.grid.signed_mode(t);
                let p = w * self.coeffs[j * nt + t].norm_sqr();
                total += p;
                if m.abs() >= top {
                    top_sum += p;
                }
            }
        }
        if total == 0.0 {
            0.0
        } else {
            (top_sum / total).sqrt()
        }
    }

    /// Apply a per-mode radial map built from the signed mode index.
    fn ladder(&self, shift: i64, radial: impl Fn(i64, &[Complex64]) -> Vec<Complex64>) -> ModeField {
        let nt = self.grid.n_theta();
        let half = nt as i64 / 2;
        let mut out = ModeField::zeros(&self.grid);
        for t in 0..nt {
            let m = self.grid.signed_mode(t);
            if m == -half {
                continue; // Nyquist carries no oriented mode
            }
            let target = m + shift;
            if target.abs() > half - 1 {
                continue;
            }
            let profile = self.mode_profile(t);
            let mapped = radial(m, &profile);
            let tt = target.rem_euclid(nt as i64) as usize;
            out.set_mode_profile(tt, &mapped);
        }
        out
    }

    /// Spin raising: d_1 + i d_2.
    pub fn raise(&self) -> ModeField {
        let dr = self.grid.dr_matrix().clone();
        let r = self.grid.r_nodes().to_vec();
        self.ladder(1, move |m, u| {
            let mut v = apply_real_matrix(&dr, u);
            for (j, val) in v.iter_mut().enumerate() {
                *val -= (m as f64 / r[j]) * u[j];
            }
            v
        })
    }

    /// Spin lowering: d_1 - i d_2.
    pub fn lower(&self) -> ModeField {
        let dr = self.grid.dr_matrix().clone();
        let r = self.grid.r_nodes().to_vec();
        self.ladder(-1, move |m, u| {
            let mut v = apply_real_matrix(&dr, u);
            for (j, val) in v.iter_mut().enumerate() {
                *val += (m as f64 / r[j]) * u[j];
            }
            v
        })
    }

    /// Spectral angular derivative.
    pub fn dtheta(&self) -> ModeField {
        let nt = self.grid.n_theta();
        let half = nt as i64 / 2;
        let mut out = self.clone();
        for j in 0..self.grid.n_r() {
            for t in 0..nt {
                let m = self.grid.signed_mode(t);
                let c = &mut out.coeffs[j * nt + t];
                if m == -half {
                    *c = Complex64::new(0.0, 0.0);
                } else {
                    *c *= Complex64::new(0.0, m as f64);
                }
            }
        }
        out
    }

    /// Mode-wise Laplacian u_k'' + u_k'/r - k^2 u_k / r^2.
    pub fn laplacian(&self) -> ModeField {
        let nt = self.grid.n_theta();
        let dr = self.grid.dr_matrix();
        let drr = self.grid.drr_matrix();
        let r = self.grid.r_nodes();
        let mut out = ModeField::zeros(&self.grid);
        for t in 0..nt {
            let m = self.grid.signed_mode(t);
            let u = self.mode_profile(t);
            let du = apply_real_matrix(dr, &u);
            let ddu = apply_real_matrix(drr, &u);
            let k2 = (m * m) as f64;
            let mapped: Vec<Complex64> = (0..u.len())
                .map(|j| ddu[j] + du[j] / r[j] - k2 * u[j] / (r[j] * r[j]))
                .collect();
            out.set_mode_profile(t, &mapped);
        }
        out
    }

    /// Evaluate at an arbitrary point by radial Lagrange interpolation of
    /// each mode profile and exact angular summation.
    pub fn eval(&self, r: f64, theta: f64) -> Complex64 {
        let nt = self.grid.n_theta();
        let (base, w) = self.grid.interp_stencil(r);
        let mut acc = Complex64::new(0.0, 0.0);
        for t in 0..nt {
            let m = self.grid.signed_mode(t);
            let mut c = Complex64::new(0.0, 0.0);
            for (i, &wi) in w.iter().enumerate() {
                c += self.coeffs[(base + i) * nt + t] * wi;
            }
            acc += c * Complex64::new(0.0, m as f64 * theta).exp();
        }
        acc
    }
}

pub(crate) fn apply_real_matrix(m: &nalgebra::DMatrix<f64>, u: &[Complex64]) -> Vec<Complex64> {
    let n = u.len();
    let re = nalgebra::DVector::from_iterator(n, u.iter().map(|c| c.re));
    let im = nalgebra::DVector::from_iterator(n, u.iter().map(|c| c.im));
    let vre = m * re;
    let vim = m * im;
    (0..n).map(|j| Complex64::new(vre[j], vim[j])).collect()
}

impl TensorField {
    pub fn zeros(grid: &PolarGrid) -> Self {
        TensorField {
            xx: ScalarField::zeros(grid),
            xy: ScalarField::zeros(grid),
        }
    }

    pub fn new(xx: ScalarField, xy: ScalarField) -> Self {
        assert!(xx.grid() == xy.grid(), "grid mismatch");
        TensorField { xx, xy }
    }

    pub fn grid(&self) -> &PolarGrid {
        self.xx.grid()
    }

    /// Contraction T_ij T_ij = 2 (T11^2 + T12^2).
    pub fn norm_squared_field(&self) -> ScalarField {
        self.xx.zip_map(&self.xy, |a, b| 2.0 * (a * a + b * b))
    }

    pub fn add(&self, other: &TensorField) -> TensorField {
        TensorField {
            xx: self.xx.add(&other.xx),
            xy: self.xy.add(&other.xy),
        }
    }

    pub fn sub(&self, other: &TensorField) -> TensorField {
        TensorField {
            xx: self.xx.sub(&other.xx),
            xy: self.xy.sub(&other.xy),
        }
    }

    pub fn scaled(&self, c: f64) -> TensorField {
        TensorField {
            xx: self.xx.scaled(c),
            xy: self.xy.scaled(c),
        }
    }

    /// Pointwise multiply both components by a scalar field.
    pub fn scaled_by(&self, s: &ScalarField) -> TensorField {
        TensorField {
            xx: self.xx.mul(s),
            xy: self.xy.mul(s),
        }
    }

    /// Spin-2 combination T11 + i T12 in mode space.
    pub fn plus_modes(&self) -> ModeField {
        let vals: Vec<Complex64> = self
            .xx
            .values()
            .iter()
            .zip(self.xy.values())
            .map(|(&a, &b)| Complex64::new(a, b))
            .collect();
        ModeField::from_complex_values(self.grid(), &vals)
    }

    pub fn from_plus_values(grid: &PolarGrid, vals: &[Complex64]) -> TensorField {
        TensorField {
            xx: ScalarField::from_values_unchecked(grid, vals.iter().map(|c| c.re).collect()),
            xy: ScalarField::from_values_unchecked(grid, vals.iter().map(|c| c.im).collect()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn grid() -> PolarGrid {
        PolarGrid::new(64, 16, 4.0).unwrap()
    }

    #[test]
    fn discretize_zero_and_single_harmonic() {
        let g = grid();
        let z = ScalarField::from_fn(&g, |_, _| 0.0).unwrap();
        assert_eq!(z.max_abs(), 0.0);

        let c = ScalarField::from_fn(&g, |_, th| th.cos()).unwrap();
        let modes = c.to_modes();
        let nt = g.n_theta();
        for t in 0..nt {
            let m = g.signed_mode(t);
            let amp: f64 = modes.mode_profile(t).iter().map(|c| c.norm()).sum();
            if m.abs() == 1 {
                assert!(amp > 1.0);
            } else {
                assert!(amp < 1e-12, "mode {m} amplitude {amp}");
            }
        }
    }

    #[test]
    fn discretize_radial_gaussian_matches_samples() {
        let g = grid();
        let f = ScalarField::from_fn(&g, |r, _| (-r * r).exp()).unwrap();
        for (j, &r) in g.r_nodes().iter().enumerate() {
            assert_relative_eq!(f.at(j, 3), (-r * r).exp(), epsilon = 1e-15);
        }
    }

    #[test]
    fn discretize_rejects_non_finite() {
        let g = grid();
        let bad = ScalarField::from_fn(&g, |r, _| if r > 1.0 { f64::NAN } else { 0.0 });
        assert!(matches!(bad, Err(Error::NonFiniteSample { .. })));
    }

    #[test]
    fn mode_round_trip_is_identity() {
        let g = grid();
        let f = ScalarField::from_fn(&g, |r, th| {
            (-0.3 * r).exp() * (1.0 + (2.0 * th).sin() + 0.3 * (5.0 * th).cos())
        })
        .unwrap();
        let back = f.to_modes().to_scalar();
        let scale = f.max_abs();
        for (a, b) in f.values().iter().zip(back.values()) {
            assert!((a - b).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn dtheta_is_exact_on_harmonics() {
        let g = grid();
        let f = ScalarField::from_fn(&g, |_, th| (3.0 * th).sin()).unwrap();
        let d = f.to_modes().dtheta().to_scalar();
        for (j, _) in g.r_nodes().iter().enumerate() {
            for (k, &th) in g.theta_nodes().iter().enumerate() {
                assert_relative_eq!(d.at(j, k), 3.0 * (3.0 * th).cos(), epsilon = 1e-12);
            }
        }
    }
}
