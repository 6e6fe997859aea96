//! Closed-form background objects: the angular data b, B on the circle, the
//! explicit tensor blocks H2, H3, the mean-curvature blocks tau2, tau3, the
//! normalized profile Psi, and the divergence identity they satisfy.

use serde::{Deserialize, Serialize};

use crate::cutoff;
use crate::error::{Error, Result};
use crate::field::{ScalarField, TensorField};
use crate::grid::PolarGrid;

/// Real Fourier series on the circle: cos[k] multiplies cos(k theta)
/// (cos[0] is the constant), sin[k] multiplies sin((k+1) theta).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FourierSeries {
    #[serde(default)]
    pub cos: Vec<f64>,
    #[serde(default)]
    pub sin: Vec<f64>,
}

impl FourierSeries {
    pub fn zero() -> Self {
        FourierSeries::default()
    }

    pub fn is_zero(&self) -> bool {
        self.cos.iter().all(|&c| c == 0.0) && self.sin.iter().all(|&s| s == 0.0)
    }

    pub fn max_mode(&self) -> usize {
        self.cos.len().saturating_sub(1).max(self.sin.len())
    }

    pub fn eval(&self, theta: f64) -> f64 {
        let mut v = 0.0;
        for (k, &c) in self.cos.iter().enumerate() {
            v += c * (k as f64 * theta).cos();
        }
        for (i, &s) in self.sin.iter().enumerate() {
            v += s * ((i + 1) as f64 * theta).sin();
        }
        v
    }

    pub fn deriv(&self, theta: f64) -> f64 {
        let mut v = 0.0;
        for (k, &c) in self.cos.iter().enumerate() {
            v -= c * k as f64 * (k as f64 * theta).sin();
        }
        for (i, &s) in self.sin.iter().enumerate() {
            let k = (i + 1) as f64;
            v += s * k * (k * theta).cos();
        }
        v
    }

    pub fn deriv2(&self, theta: f64) -> f64 {
        let mut v = 0.0;
        for (k, &c) in self.cos.iter().enumerate() {
            let k = k as f64;
            v -= c * k * k * (k * theta).cos();
        }
        for (i, &s) in self.sin.iter().enumerate() {
            let k = (i + 1) as f64;
            v -= s * k * k * (k * theta).sin();
        }
        v
    }

    /// Integral over the circle.
    pub fn integral(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.cos.first().copied().unwrap_or(0.0)
    }

    /// W^{1,2}(S^1) norm, computed spectrally.
    pub fn w12_norm(&self) -> f64 {
        let pi = std::f64::consts::PI;
        let mut sq = 2.0 * pi * self.cos.first().copied().unwrap_or(0.0).powi(2);
        for (k, &c) in self.cos.iter().enumerate().skip(1) {
            sq += pi * (1.0 + (k * k) as f64) * c * c;
        }
        for (i, &s) in self.sin.iter().enumerate() {
            let k2 = ((i + 1) * (i + 1)) as f64;
            sq += pi * (1.0 + k2) * s * s;
        }
        sq.sqrt()
    }

    pub fn scaled(&self, t: f64) -> FourierSeries {
        FourierSeries {
            cos: self.cos.iter().map(|&c| c * t).collect(),
            sin: self.sin.iter().map(|&s| s * t).collect(),
        }
    }

    /// True when the cos(theta) and sin(theta) coefficients vanish.
    pub fn is_dipole_free(&self) -> bool {
        self.cos.get(1).copied().unwrap_or(0.0) == 0.0
            && self.sin.first().copied().unwrap_or(0.0) == 0.0
    }
}

/// Remove the k = +-1 Fourier components; everything else is untouched.
pub fn project_orthogonal(raw: &FourierSeries) -> FourierSeries {
    let mut out = raw.clone();
    if out.cos.len() > 1 {
        out.cos[1] = 0.0;
    }
    if !out.sin.is_empty() {
        out.sin[0] = 0.0;
    }
    out
}

/// Angular data of the construction: the free datum btilde (orthogonal to
/// the first harmonics), the second-order datum B, and the solved dipole
/// pair (rho, eta) with b(theta) = rho cos(theta - eta) + btilde(theta).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AngularData {
    pub rho: f64,
    pub eta: f64,
    pub btilde: FourierSeries,
    pub b_big: FourierSeries,
}

impl AngularData {
    pub fn new(btilde: FourierSeries, b_big: FourierSeries) -> Result<Self> {
        if !btilde.is_dipole_free() {
            return Err(Error::InvalidConfig(
                "btilde must have vanishing cos(theta) and sin(theta) coefficients".into(),
            ));
        }
        Ok(AngularData {
            rho: 0.0,
            eta: 0.0,
            btilde,
            b_big,
        })
    }

    pub fn zero() -> Self {
        AngularData {
            rho: 0.0,
            eta: 0.0,
            btilde: FourierSeries::zero(),
            b_big: FourierSeries::zero(),
        }
    }

    /// Replace the dipole pair by its Cartesian components
    /// (rho cos eta, rho sin eta).
    pub fn with_dipole(&self, v1: f64, v2: f64) -> AngularData {
        let rho = v1.hypot(v2);
        let eta = if rho == 0.0 {
            0.0
        } else {
            v2.atan2(v1).rem_euclid(2.0 * std::f64::consts::PI)
        };
        AngularData {
            rho,
            eta,
            btilde: self.btilde.clone(),
            b_big: self.b_big.clone(),
        }
    }

    pub fn b(&self, theta: f64) -> f64 {
        self.rho * (theta - self.eta).cos() + self.btilde.eval(theta)
    }

    pub fn b_prime(&self, theta: f64) -> f64 {
        -self.rho * (theta - self.eta).sin() + self.btilde.deriv(theta)
    }

    pub fn b_second(&self, theta: f64) -> f64 {
        -self.rho * (theta - self.eta).cos() + self.btilde.deriv2(theta)
    }

    /// Largest angular mode carried by the data (b has the dipole on top of
    /// btilde; B enters with one extra harmonic through the tensor blocks).
    pub fn max_mode(&self) -> usize {
        self.btilde.max_mode().max(self.b_big.max_mode()).max(1)
    }
}

/// The default normalized profile: Psi = 2 e^{-r^2}, with integral 2 pi.
pub fn default_psi(grid: &PolarGrid) -> ScalarField {
    ScalarField::from_fn(grid, |r, _| 2.0 * (-r * r).exp()).expect("finite")
}

/// Cartesian gradient of the default profile, in closed form.
pub fn default_psi_gradient(grid: &PolarGrid) -> (ScalarField, ScalarField) {
    let d1 = ScalarField::from_fn(grid, |r, th| -4.0 * r * th.cos() * (-r * r).exp())
        .expect("finite");
    let d2 = ScalarField::from_fn(grid, |r, th| -4.0 * r * th.sin() * (-r * r).exp())
        .expect("finite");
    (d1, d2)
}

/// Closed-form background fields for a given state of the iteration.
#[derive(Clone, Debug)]
pub struct BackgroundFields {
    pub h2: TensorField,
    pub h3: TensorField,
    pub tau2: ScalarField,
    pub tau3: ScalarField,
    pub psi: ScalarField,
    /// r_c / alpha, with the zero-source convention ratio = 0 when r_c = 0.
    pub ratio: f64,
    pub theta_c: f64,
}

/// The ratio r_c/alpha with the trivial-point convention.
pub fn center_ratio(alpha: f64, r_c: f64) -> Result<f64> {
    if r_c == 0.0 {
        Ok(0.0)
    } else if alpha <= 0.0 {
        Err(Error::DegenerateRatio {
            rc: r_c,
            alpha,
            floor: 0.0,
        })
    } else {
        Ok(r_c / alpha)
    }
}

/// Assemble H2, H3, tau2, tau3 and Psi from the angular data and the state
/// parameters. The conformal factor enters only through the finiteness
/// check on e^{-lambda}.
pub fn build_background(
    ang: &AngularData,
    alpha: f64,
    r_c: f64,
    theta_c: f64,
    lambda: &ScalarField,
) -> Result<BackgroundFields> {
    let grid = lambda.grid();
    if (ang.max_mode() + 2) as i64 > grid.max_mode() {
        return Err(Error::UnresolvedSpectrum {
            content: ang.max_mode() as f64,
        });
    }
    let ratio = center_ratio(alpha, r_c)?;
    for &v in lambda.values() {
        if !(-v).exp().is_finite() {
            return Err(Error::InvalidMatter(format!(
                "e^(-lambda) overflows (lambda = {v})"
            )));
        }
    }

    let nt = grid.n_theta();
    let thetas = grid.theta_nodes().to_vec();
    // Angular factors sampled once.
    let b: Vec<f64> = thetas.iter().map(|&t| ang.b(t)).collect();
    let bp: Vec<f64> = thetas.iter().map(|&t| ang.b_prime(t)).collect();
    let bb: Vec<f64> = thetas.iter().map(|&t| ang.b_big.eval(t)).collect();
    let bbp: Vec<f64> = thetas.iter().map(|&t| ang.b_big.deriv(t)).collect();
    // w = b sin(theta - theta_c) and its derivative.
    let w: Vec<f64> = thetas
        .iter()
        .enumerate()
        .map(|(k, &t)| b[k] * (t - theta_c).sin())
        .collect();
    let wp: Vec<f64> = thetas
        .iter()
        .enumerate()
        .map(|(k, &t)| bp[k] * (t - theta_c).sin() + b[k] * (t - theta_c).cos())
        .collect();

    let n = grid.len();
    let mut h2xx = vec![0.0; n];
    let mut h2xy = vec![0.0; n];
    let mut h3xx = vec![0.0; n];
    let mut h3xy = vec![0.0; n];
    let mut t2 = vec![0.0; n];
    let mut t3 = vec![0.0; n];
    for (j, &r) in grid.r_nodes().iter().enumerate() {
        let c1 = cutoff::chi_over_r(r);
        let c2 = cutoff::chi_over_r2(r);
        for k in 0..nt {
            let th = thetas[k];
            let (c2t, s2t) = ((2.0 * th).cos(), (2.0 * th).sin());
            let i = j * nt + k;
            // H2 = -b (chi/2r) M - (ratio/2) w' (chi/r^2) M - ratio w (chi/r^2) N
            let gm = -0.5 * b[k] * c1 - 0.5 * ratio * wp[k] * c2;
            let gn = -ratio * w[k] * c2;
            h2xx[i] = gm * c2t - gn * s2t;
            h2xy[i] = gm * s2t + gn * c2t;
            // H3 = (chi/r^2) ( -(1-alpha) B N - (B'/2) M )
            let gm3 = -0.5 * bbp[k] * c2;
            let gn3 = -(1.0 - alpha) * bb[k] * c2;
            h3xx[i] = gm3 * c2t - gn3 * s2t;
            h3xy[i] = gm3 * s2t + gn3 * c2t;
            t2[i] = b[k] * c1 + ratio * wp[k] * c2;
            t3[i] = bbp[k] * c2;
        }
    }

    Ok(BackgroundFields {
        h2: TensorField::new(
            ScalarField::from_values_unchecked(grid, h2xx),
            ScalarField::from_values_unchecked(grid, h2xy),
        ),
        h3: TensorField::new(
            ScalarField::from_values_unchecked(grid, h3xx),
            ScalarField::from_values_unchecked(grid, h3xy),
        ),
        tau2: ScalarField::from_values_unchecked(grid, t2),
        tau3: ScalarField::from_values_unchecked(grid, t3),
        psi: default_psi(grid),
        ratio,
        theta_c,
    })
}

impl BackgroundFields {
    /// Closed form of (1/2) d_j tau2 - d_i H2_ij: the divergence identity.
    /// Component j = 1 is chi'/r b cos + (chi'/r^2) ratio (w cos)', and the
    /// sine analogue for j = 2.
    pub fn identity_rhs(&self, ang: &AngularData, grid: &PolarGrid) -> (ScalarField, ScalarField) {
        let nt = grid.n_theta();
        let thetas = grid.theta_nodes();
        let tc = self.theta_c;
        let mut v1 = vec![0.0; grid.len()];
        let mut v2 = vec![0.0; grid.len()];
        for (j, &r) in grid.r_nodes().iter().enumerate() {
            let cp = cutoff::chi_prime(r);
            if cp == 0.0 {
                continue;
            }
            for (k, &th) in thetas.iter().enumerate() {
                let b = ang.b(th);
                let bp = ang.b_prime(th);
                let w = b * (th - tc).sin();
                let wp = bp * (th - tc).sin() + b * (th - tc).cos();
                let i = j * nt + k;
                // (w cos)' = w' cos - w sin ; (w sin)' = w' sin + w cos
                v1[i] = cp / r * b * th.cos()
                    + cp / (r * r) * self.ratio * (wp * th.cos() - w * th.sin());
                v2[i] = cp / r * b * th.sin()
                    + cp / (r * r) * self.ratio * (wp * th.sin() + w * th.cos());
            }
        }
        (
            ScalarField::from_values_unchecked(grid, v1),
            ScalarField::from_values_unchecked(grid, v2),
        )
    }

    /// (1/2) d_j tau2 - d_i H2_ij evaluated through the closed-form block
    /// calculus: radial profile derivatives analytic, angular derivatives of
    /// the band-limited data exact.
    pub fn identity_lhs(&self, ang: &AngularData, grid: &PolarGrid) -> (ScalarField, ScalarField) {
        let tc = self.theta_c;
        let ratio = self.ratio;
        // Gradient of tau2 = b (chi/r) + ratio w' (chi/r^2).
        let phi1 = |r: f64| (cutoff::chi_over_r(r), cutoff::chi_prime(r) / r - cutoff::chi_over_r2(r));
        let phi2 = |r: f64| {
            (
                cutoff::chi_over_r2(r),
                cutoff::chi_prime(r) / (r * r) - 2.0 * cutoff::chi_over_r2(r) / r,
            )
        };
        let b = |th: f64| ang.b(th);
        let bp = |th: f64| ang.b_prime(th);
        let w = |th: f64| ang.b(th) * (th - tc).sin();
        let wp = |th: f64| ang.b_prime(th) * (th - tc).sin() + ang.b(th) * (th - tc).cos();
        let wpp = |th: f64| {
            ang.b_second(th) * (th - tc).sin() + 2.0 * ang.b_prime(th) * (th - tc).cos()
                - ang.b(th) * (th - tc).sin()
        };

        let (g1a, g2a) = scalar_block_gradient(grid, phi1, &b, &bp);
        let (g1b, g2b) = scalar_block_gradient(grid, phi2, &wp, &wpp);
        let grad_tau2_1 = g1a.zip_map(&g1b, |a, bv| a + ratio * bv);
        let grad_tau2_2 = g2a.zip_map(&g2b, |a, bv| a + ratio * bv);

        // Divergence of H2 = sum of two angular blocks.
        let gm1 = |th: f64| -0.5 * b(th);
        let gm1p = |th: f64| -0.5 * bp(th);
        let zero = |_: f64| 0.0;
        let (d1a, d2a) = tensor_block_divergence(grid, phi1, &gm1, &gm1p, &zero, &zero);
        let gm2 = |th: f64| -0.5 * ratio * wp(th);
        let gm2p = |th: f64| -0.5 * ratio * wpp(th);
        let gn2 = |th: f64| -ratio * w(th);
        let gn2p = |th: f64| -ratio * wp(th);
        let (d1b, d2b) = tensor_block_divergence(grid, phi2, &gm2, &gm2p, &gn2, &gn2p);

        (
            grad_tau2_1.zip_map(&d1a.add(&d1b), |g, d| 0.5 * g - d),
            grad_tau2_2.zip_map(&d2a.add(&d2b), |g, d| 0.5 * g - d),
        )
    }
}

/// Gradient of g(theta) phi(r): phi' g xhat_j + phi g' thetahat_j / r.
pub fn scalar_block_gradient(
    grid: &PolarGrid,
    phi: impl Fn(f64) -> (f64, f64),
    g: &dyn Fn(f64) -> f64,
    gp: &dyn Fn(f64) -> f64,
) -> (ScalarField, ScalarField) {
    let nt = grid.n_theta();
    let mut v1 = vec![0.0; grid.len()];
    let mut v2 = vec![0.0; grid.len()];
    for (j, &r) in grid.r_nodes().iter().enumerate() {
        let (p, pp) = phi(r);
        for (k, &th) in grid.theta_nodes().iter().enumerate() {
            let i = j * nt + k;
            let (c, s) = (th.cos(), th.sin());
            v1[i] = pp * g(th) * c - p * gp(th) * s / r;
            v2[i] = pp * g(th) * s + p * gp(th) * c / r;
        }
    }
    (
        ScalarField::from_values_unchecked(grid, v1),
        ScalarField::from_values_unchecked(grid, v2),
    )
}

/// Closed-form row divergences of the angular block
/// T = phi(r) (g_M(theta) M_theta + g_N(theta) N_theta).
pub fn tensor_block_divergence(
    grid: &PolarGrid,
    phi: impl Fn(f64) -> (f64, f64),
    g_m: &dyn Fn(f64) -> f64,
    g_m_prime: &dyn Fn(f64) -> f64,
    g_n: &dyn Fn(f64) -> f64,
    g_n_prime: &dyn Fn(f64) -> f64,
) -> (ScalarField, ScalarField) {
    let nt = grid.n_theta();
    let mut v1 = vec![0.0; grid.len()];
    let mut v2 = vec![0.0; grid.len()];
    for (j, &r) in grid.r_nodes().iter().enumerate() {
        let (p, pp) = phi(r);
        for (k, &th) in grid.theta_nodes().iter().enumerate() {
            let i = j * nt + k;
            let (c, s) = (th.cos(), th.sin());
            let (gm, gmp, gn, gnp) = (g_m(th), g_m_prime(th), g_n(th), g_n_prime(th));
            v1[i] = pp * (gm * c - gn * s) + p / r * (gmp * s + gnp * c + 2.0 * gm * c - 2.0 * gn * s);
            v2[i] = pp * (gm * s + gn * c) + p / r * (-gmp * c + gnp * s + 2.0 * gm * s + 2.0 * gn * c);
        }
    }
    (
        ScalarField::from_values_unchecked(grid, v1),
        ScalarField::from_values_unchecked(grid, v2),
    )
}

/// Sup-norm discrepancy between the block-calculus evaluation of
/// (1/2) d_j tau2 - d_i H2_ij and its closed form.
pub fn divergence_identity_residual(
    ang: &AngularData,
    alpha: f64,
    r_c: f64,
    theta_c: f64,
    grid: &PolarGrid,
) -> Result<f64> {
    let lambda = ScalarField::zeros(grid);
    let bg = build_background(ang, alpha, r_c, theta_c, &lambda)?;
    let (l1, l2) = bg.identity_lhs(ang, grid);
    let (r1, r2) = bg.identity_rhs(ang, grid);
    Ok(l1
        .sub(&r1)
        .max_abs()
        .max(l2.sub(&r2).max_abs()))
}

/// Same discrepancy with the left side differentiated by the raw discrete
/// field operators; dominated by the finite-difference error across the
/// cutoff transition. Diagnostic only.
pub fn divergence_identity_residual_fd(
    ang: &AngularData,
    alpha: f64,
    r_c: f64,
    theta_c: f64,
    grid: &PolarGrid,
) -> Result<f64> {
    let lambda = ScalarField::zeros(grid);
    let bg = build_background(ang, alpha, r_c, theta_c, &lambda)?;
    let (g1, g2) = crate::calculus::gradient(&bg.tau2);
    let (d1, d2) = crate::calculus::divergence(&bg.h2);
    let (r1, r2) = bg.identity_rhs(ang, grid);
    let e1 = g1.zip_map(&d1, |g, d| 0.5 * g - d).sub(&r1).max_abs();
    let e2 = g2.zip_map(&d2, |g, d| 0.5 * g - d).sub(&r2).max_abs();
    Ok(e1.max(e2))
}
