//! Polar grid on R^2: compactified radial nodes, plane quadrature, radial
//! differentiation matrices and cached mode-wise factorizations.
//!
//! The radial coordinate is mapped by r = L s/(1-s) with a uniform
//! cell-centered s-grid on (0, 1), so there is no node at r = 0 and the
//! outermost node sits at r ~ L(2 n_r - 1). Angles are uniform on [0, 2pi).

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use nalgebra::{DMatrix, DVector};
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Strength of the symmetric high-order regularization added to the radial
/// first-derivative matrix. It is O(h^7)-consistent, so it sits far below the
/// 4th-order truncation error on resolved fields, while keeping the composed
/// spin-ladder operators nonsingular on the odd-even grid mode.
const DISSIPATION: f64 = 1.0 / 64.0;

/// Stencil width used for quadrature weights and off-grid interpolation.
const LAGRANGE_WIDTH: usize = 6;

struct GridInner {
    n_r: usize,
    n_theta: usize,
    map_scale: f64,
    s: Vec<f64>,
    r: Vec<f64>,
    theta: Vec<f64>,
    /// Quadrature weights including the r dr Jacobian: integral over the
    /// plane of f is sum_j sum_k radial_weights[j] * (2 pi / n_theta) * f_jk.
    radial_weights: Vec<f64>,
    /// d/dr matrix (4th order in s, mapped).
    dr: DMatrix<f64>,
    /// d^2/dr^2 matrix (4th order in s, mapped).
    drr: DMatrix<f64>,
    fft_fwd: Arc<dyn Fft<f64>>,
    fft_inv: Arc<dyn Fft<f64>>,
    scalar_factors: Mutex<HashMap<u32, Arc<RadialFactor>>>,
}

/// A factored mode-wise radial operator together with its assembled matrix
/// (kept so residuals can be measured against exactly what was inverted).
/// Rows are equilibrated before factoring; the mapped-coordinate operators
/// span many orders of magnitude between the inner and outer nodes.
pub struct RadialFactor {
    pub matrix: DMatrix<f64>,
    row_scale: Vec<f64>,
    lu: nalgebra::linalg::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl RadialFactor {
    fn new(matrix: DMatrix<f64>) -> Self {
        let n = matrix.nrows();
        let mut scaled = matrix.clone();
        let mut row_scale = vec![1.0; n];
        for i in 0..n {
            let m = (0..n).fold(0.0f64, |acc, j| acc.max(scaled[(i, j)].abs()));
            if m > 0.0 {
                row_scale[i] = 1.0 / m;
                for j in 0..n {
                    scaled[(i, j)] *= row_scale[i];
                }
            }
        }
        let lu = scaled.lu();
        RadialFactor {
            matrix,
            row_scale,
            lu,
        }
    }

    pub fn solve(&self, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        let scaled = DVector::from_iterator(
            rhs.len(),
            rhs.iter().zip(&self.row_scale).map(|(&b, &s)| b * s),
        );
        self.lu.solve(&scaled).ok_or(Error::SolveFailed {
            mode: -1,
            reason: "singular radial operator",
        })
    }
}

/// Cheap-to-clone handle to the grid data and its operator caches.
#[derive(Clone)]
pub struct PolarGrid {
    inner: Arc<GridInner>,
}

impl fmt::Debug for PolarGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PolarGrid")
            .field("n_r", &self.inner.n_r)
            .field("n_theta", &self.inner.n_theta)
            .field("map_scale", &self.inner.map_scale)
            .finish()
    }
}

impl PartialEq for PolarGrid {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
            || (self.inner.n_r == other.inner.n_r
                && self.inner.n_theta == other.inner.n_theta
                && self.inner.map_scale == other.inner.map_scale)
    }
}

impl PolarGrid {
    pub fn new(n_r: usize, n_theta: usize, map_scale: f64) -> Result<Self> {
        if n_r < 16 {
            return Err(Error::InvalidGrid(format!("n_r = {n_r} too small (>= 16)")));
        }
        if n_theta < 8 || n_theta % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "n_theta = {n_theta} must be even and >= 8"
            )));
        }
        if !(map_scale > 0.0) || !map_scale.is_finite() {
            return Err(Error::InvalidGrid(format!("map_scale = {map_scale}")));
        }

        let h = 1.0 / n_r as f64;
        let s: Vec<f64> = (0..n_r).map(|j| (j as f64 + 0.5) * h).collect();
        let r: Vec<f64> = s.iter().map(|&s| map_scale * s / (1.0 - s)).collect();
        let theta: Vec<f64> = (0..n_theta)
            .map(|k| 2.0 * std::f64::consts::PI * k as f64 / n_theta as f64)
            .collect();

        // dr/ds and d^2s/dr^2 at the nodes.
        let rp: Vec<f64> = s.iter().map(|&s| map_scale / (1.0 - s).powi(2)).collect();
        let sp: Vec<f64> = rp.iter().map(|&rp| 1.0 / rp).collect();
        let spp: Vec<f64> = s
            .iter()
            .map(|&s| -2.0 * (1.0 - s).powi(3) / map_scale.powi(2))
            .collect();

        let s_weights = cell_centered_weights(n_r, h);
        let radial_weights: Vec<f64> = (0..n_r)
            .map(|j| s_weights[j] * r[j] * rp[j])
            .collect();

        let ds1 = build_ds1(n_r, h);
        let ds2 = build_ds2(n_r, h);

        let mut dr = DMatrix::zeros(n_r, n_r);
        let mut drr = DMatrix::zeros(n_r, n_r);
        for i in 0..n_r {
            for j in 0..n_r {
                let d1 = ds1[(i, j)];
                let d2 = ds2[(i, j)];
                if d1 != 0.0 {
                    dr[(i, j)] = sp[i] * d1;
                    drr[(i, j)] += spp[i] * d1;
                }
                if d2 != 0.0 {
                    drr[(i, j)] += sp[i] * sp[i] * d2;
                }
            }
        }

        let mut planner = FftPlanner::new();
        let fft_fwd = planner.plan_fft_forward(n_theta);
        let fft_inv = planner.plan_fft_inverse(n_theta);

        Ok(PolarGrid {
            inner: Arc::new(GridInner {
                n_r,
                n_theta,
                map_scale,
                s,
                r,
                theta,
                radial_weights,
                dr,
                drr,
                fft_fwd,
                fft_inv,
                scalar_factors: Mutex::new(HashMap::new()),
            }),
        })
    }

    pub fn n_r(&self) -> usize {
        self.inner.n_r
    }

    pub fn n_theta(&self) -> usize {
        self.inner.n_theta
    }

    pub fn map_scale(&self) -> f64 {
        self.inner.map_scale
    }

    pub fn len(&self) -> usize {
        self.inner.n_r * self.inner.n_theta
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn r_nodes(&self) -> &[f64] {
        &self.inner.r
    }

    pub fn s_nodes(&self) -> &[f64] {
        &self.inner.s
    }

    pub fn theta_nodes(&self) -> &[f64] {
        &self.inner.theta
    }

    pub fn r_min(&self) -> f64 {
        self.inner.r[0]
    }

    pub fn r_max(&self) -> f64 {
        self.inner.r[self.inner.n_r - 1]
    }

    /// Largest representable angular mode, |m| <= n_theta/2 - 1.
    pub fn max_mode(&self) -> i64 {
        self.inner.n_theta as i64 / 2 - 1
    }

    /// Radial quadrature weights with the r dr Jacobian folded in.
    pub fn radial_weights(&self) -> &[f64] {
        &self.inner.radial_weights
    }

    /// Angular quadrature weight (uniform trapezoid on the circle).
    pub fn theta_weight(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.inner.n_theta as f64
    }

    pub fn dr_matrix(&self) -> &DMatrix<f64> {
        &self.inner.dr
    }

    pub fn drr_matrix(&self) -> &DMatrix<f64> {
        &self.inner.drr
    }

    pub(crate) fn fft_forward(&self) -> Arc<dyn Fft<f64>> {
        self.inner.fft_fwd.clone()
    }

    pub(crate) fn fft_inverse(&self) -> Arc<dyn Fft<f64>> {
        self.inner.fft_inv.clone()
    }

    /// Signed angular mode for an FFT bin index.
    pub fn signed_mode(&self, bin: usize) -> i64 {
        let n = self.inner.n_theta as i64;
        let t = bin as i64;
        if t <= n / 2 - 1 {
            t
        } else {
            t - n
        }
    }

    /// Mode-wise scalar Laplace operator D_rr + (1/r) D_r - k^2/r^2 with the
    /// decay boundary rows installed, factored and cached per |k|.
    pub fn scalar_factor(&self, k: u32) -> Arc<RadialFactor> {
        if let Some(f) = self.inner.scalar_factors.lock().unwrap().get(&k) {
            return f.clone();
        }
        let m = self.assemble_scalar_operator(k);
        let factor = Arc::new(RadialFactor::new(m));
        self.inner
            .scalar_factors
            .lock()
            .unwrap()
            .insert(k, factor.clone());
        factor
    }

    fn assemble_scalar_operator(&self, k: u32) -> DMatrix<f64> {
        let n = self.inner.n_r;
        let r = &self.inner.r;
        let dr = &self.inner.dr;
        let drr = &self.inner.drr;
        let kk = k as f64;

        let mut a = DMatrix::zeros(n, n);
        for i in 1..n - 1 {
            for j in 0..n {
                let v = drr[(i, j)] + dr[(i, j)] / r[i];
                if v != 0.0 {
                    a[(i, j)] = v;
                }
            }
            a[(i, i)] -= kk * kk / (r[i] * r[i]);
        }
        self.install_boundary_rows(&mut a, k as i64);
        a
    }

    /// Replace the first and last rows with the regularity and decay
    /// boundary conditions for angular order |m|.
    fn install_boundary_rows(&self, a: &mut DMatrix<f64>, m: i64) {
        let n = self.inner.n_r;
        let r = &self.inner.r;
        let dr = &self.inner.dr;
        let k = m.unsigned_abs() as f64;

        // Inner row: u'(r0) - (|m|/r0) u(r0) = g, with g supplied per solve.
        for j in 0..n {
            a[(0, j)] = dr[(0, j)];
        }
        a[(0, 0)] -= k / r[0];

        // Outer row: decay. Mode 0 pins the far constant to zero; higher
        // modes get the Robin relation exact on r^{-|m|}.
        for j in 0..n {
            a[(n - 1, j)] = 0.0;
        }
        if m == 0 {
            a[(n - 1, n - 1)] = 1.0;
        } else {
            for j in 0..n {
                a[(n - 1, j)] = dr[(n - 1, j)];
            }
            a[(n - 1, n - 1)] += k.max(1.0) / r[n - 1];
        }
    }

    /// Inhomogeneous part of the inner regularity row: the integrated source
    /// relation u' - (|m|/r) u = r^{-|m|-1} int_0^r rho^{|m|+1} f drho,
    /// evaluated from a two-term parity fit of the source through the first
    /// two nodes (one term above |m| = 4, where the correction is far below
    /// round-off anyway).
    pub fn inner_bc_rhs(&self, m: i64, f0: num_complex::Complex64, f1: num_complex::Complex64) -> num_complex::Complex64 {
        let k = m.unsigned_abs() as f64;
        let r0 = self.inner.r[0];
        let r1 = self.inner.r[1];
        if m.unsigned_abs() <= 4 {
            // f(rho) ~ rho^k (d0 + d2 rho^2); solve for d0, d2 from the
            // first two nodes, in the scaled variable (rho/r0)^k.
            let q = (r1 / r0).powf(k);
            // f0 = r0^k d0h + r0^k d2h r0^2 with d0h = d0 r0^k-normalized:
            // write f(rho) = (rho/r0)^k (e0 + e2 rho^2).
            // f0 = e0 + e2 r0^2; f1 = q (e0 + e2 r1^2).
            let det = r1 * r1 - r0 * r0;
            let e2 = (f1 / q - f0) / det;
            let e0 = f0 - e2 * r0 * r0;
            // int_0^{r0} rho^{k+1} (rho/r0)^k (e0 + e2 rho^2) drho
            //   = r0^{k+2} [ e0/(2k+2) + e2 r0^2/(2k+4) ] / r0^k ... folded:
            // r^{-k-1} * int = r0 [ e0/(2k+2) + e2 r0^2/(2k+4) ].
            e0 * r0 / (2.0 * k + 2.0) + e2 * r0.powi(3) / (2.0 * k + 4.0)
        } else {
            f0 * r0 / (2.0 * k + 2.0)
        }
    }

    /// Lagrange interpolation stencil in s for an off-grid radius.
    /// Returns the first node index and the weights.
    pub fn interp_stencil(&self, r_eval: f64) -> (usize, [f64; LAGRANGE_WIDTH]) {
        let n = self.inner.n_r;
        let s_eval = r_eval / (self.inner.map_scale + r_eval);
        let h = 1.0 / n as f64;
        let cell = ((s_eval / h - 0.5).floor() as i64).clamp(0, n as i64 - 1) as usize;
        let base = cell
            .saturating_sub(LAGRANGE_WIDTH / 2 - 1)
            .min(n - LAGRANGE_WIDTH);
        let mut w = [0.0; LAGRANGE_WIDTH];
        for i in 0..LAGRANGE_WIDTH {
            let mut l = 1.0;
            let si = self.inner.s[base + i];
            for j in 0..LAGRANGE_WIDTH {
                if j != i {
                    let sj = self.inner.s[base + j];
                    l *= (s_eval - sj) / (si - sj);
                }
            }
            w[i] = l;
        }
        (base, w)
    }
}

/// Fornberg finite-difference weights: weights of derivatives 0..=m at the
/// point z from samples at the nodes x.
pub fn fd_weights(z: f64, x: &[f64], m: usize) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut c = vec![vec![0.0; n]; m + 1];
    let mut c1 = 1.0;
    let mut c4 = x[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// Composite interpolatory quadrature weights on the uniform cell-centered
/// grid: each cell integrates the 6-point Lagrange interpolant through the
/// nearest midpoints (one-sided near the ends), O(h^6).
fn cell_centered_weights(n: usize, h: f64) -> Vec<f64> {
    // 4-point Gauss-Legendre on [0,1], exact through degree 7.
    const GX: [f64; 4] = [
        0.06943184420297371,
        0.33000947820757187,
        0.6699905217924281,
        0.9305681557970263,
    ];
    const GW: [f64; 4] = [
        0.17392742256872693,
        0.32607257743127307,
        0.32607257743127307,
        0.17392742256872693,
    ];

    let node = |i: usize| (i as f64 + 0.5) * h;
    let mut w = vec![0.0; n];
    for cell in 0..n {
        let a = cell
            .saturating_sub(2)
            .min(n - LAGRANGE_WIDTH);
        let lo = cell as f64 * h;
        for g in 0..4 {
            let x = lo + GX[g] * h;
            let gw = GW[g] * h;
            for i in 0..LAGRANGE_WIDTH {
                let xi = node(a + i);
                let mut l = 1.0;
                for j in 0..LAGRANGE_WIDTH {
                    if j != i {
                        let xj = node(a + j);
                        l *= (x - xj) / (xi - xj);
                    }
                }
                w[a + i] += gw * l;
            }
        }
    }
    w
}

/// 6th-order first derivative in s on the uniform cell-centered grid, with
/// one-sided closures and the tapered symmetric regularization.
fn build_ds1(n: usize, h: f64) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(n, n);
    let xs: Vec<f64> = (0..n).map(|j| j as f64 * h).collect();

    for i in 0..n {
        let (base, width) = if i < 3 {
            (0, 8)
        } else if i + 3 >= n {
            (n - 8, 8)
        } else {
            (i - 3, 7)
        };
        let stencil: Vec<f64> = (0..width).map(|j| xs[base + j]).collect();
        let w = fd_weights(xs[i], &stencil, 1);
        for j in 0..width {
            d[(i, base + j)] += w[1][j];
        }
    }

    // Symmetric 8th-difference regularization on rows where the 9-point
    // stencil fits. Coefficients are binomial(8, k) with alternating sign.
    let diss: [f64; 9] = [1.0, -8.0, 28.0, -56.0, 70.0, -56.0, 28.0, -8.0, 1.0];
    if n >= 9 {
        for i in 4..n - 4 {
            for (k, &c) in diss.iter().enumerate() {
                d[(i, i + k - 4)] += DISSIPATION * c / h;
            }
        }
    }
    d
}

/// 6th-order second derivative in s with one-sided closures.
fn build_ds2(n: usize, h: f64) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(n, n);
    let xs: Vec<f64> = (0..n).map(|j| j as f64 * h).collect();

    for i in 0..n {
        let (base, width) = if i < 3 {
            (0, 8)
        } else if i + 3 >= n {
            (n - 8, 8)
        } else {
            (i - 3, 7)
        };
        let stencil: Vec<f64> = (0..width).map(|j| xs[base + j]).collect();
        let w = fd_weights(xs[i], &stencil, 2);
        for j in 0..width {
            d[(i, base + j)] += w[2][j];
        }
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn fornberg_reproduces_centered_stencils() {
        let x = [-2.0, -1.0, 0.0, 1.0, 2.0];
        let w = fd_weights(0.0, &x, 2);
        let d1 = [1.0 / 12.0, -8.0 / 12.0, 0.0, 8.0 / 12.0, -1.0 / 12.0];
        let d2 = [-1.0 / 12.0, 16.0 / 12.0, -30.0 / 12.0, 16.0 / 12.0, -1.0 / 12.0];
        for j in 0..5 {
            assert_relative_eq!(w[1][j], d1[j], epsilon = 1e-13);
            assert_relative_eq!(w[2][j], d2[j], epsilon = 1e-13);
        }
    }

    #[test]
    fn nodes_strictly_increasing_and_positive() {
        let g = PolarGrid::new(64, 16, 4.0).unwrap();
        let r = g.r_nodes();
        assert!(r[0] > 0.0);
        for j in 1..r.len() {
            assert!(r[j] > r[j - 1]);
        }
        assert_eq!(g.theta_nodes().len(), 16);
    }

    #[test]
    fn quadrature_weights_positive() {
        for n in [64usize, 128, 256] {
            let g = PolarGrid::new(n, 16, 4.0).unwrap();
            assert!(g.radial_weights().iter().all(|&w| w > 0.0));
        }
    }

    #[test]
    fn radial_quadrature_reproduces_gaussian_integral() {
        // int_0^inf 2 e^{-r^2} r dr = 1, and with the exponential weight
        // int_0^inf e^{-r} r dr = 1.
        let g = PolarGrid::new(256, 16, 4.0).unwrap();
        let gauss: f64 = g
            .r_nodes()
            .iter()
            .zip(g.radial_weights())
            .map(|(&r, &w)| w * 2.0 * (-r * r).exp())
            .sum();
        assert_relative_eq!(gauss, 1.0, epsilon = 1e-10);
        let expo: f64 = g
            .r_nodes()
            .iter()
            .zip(g.radial_weights())
            .map(|(&r, &w)| w * (-r).exp())
            .sum();
        assert_relative_eq!(expo, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn radial_derivative_is_fourth_order_on_smooth_data() {
        let err = |n: usize| -> f64 {
            let g = PolarGrid::new(n, 16, 4.0).unwrap();
            let u: DVector<f64> = DVector::from_iterator(
                n,
                g.r_nodes().iter().map(|&r| (-r * r).exp()),
            );
            let du = g.dr_matrix() * &u;
            g.r_nodes()
                .iter()
                .enumerate()
                .map(|(j, &r)| (du[j] - (-2.0 * r * (-r * r).exp())).abs())
                .fold(0.0, f64::max)
        };
        let e1 = err(128);
        let e2 = err(256);
        assert!(e2 < e1 / 8.0, "e(128) = {e1:.3e}, e(256) = {e2:.3e}");
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(PolarGrid::new(8, 16, 4.0).is_err());
        assert!(PolarGrid::new(64, 7, 4.0).is_err());
        assert!(PolarGrid::new(64, 6, 4.0).is_err());
        assert!(PolarGrid::new(64, 16, 0.0).is_err());
    }

    #[test]
    fn interp_stencil_reproduces_smooth_profile() {
        let g = PolarGrid::new(128, 16, 4.0).unwrap();
        let vals: Vec<f64> = g.r_nodes().iter().map(|&r| 1.0 / (1.0 + r * r)).collect();
        for &re in &[0.3, 1.7, 5.0, 40.0] {
            let (base, w) = g.interp_stencil(re);
            let p: f64 = (0..LAGRANGE_WIDTH).map(|i| w[i] * vals[base + i]).sum();
            assert_relative_eq!(p, 1.0 / (1.0 + re * re), epsilon = 1e-7);
        }
    }
}
