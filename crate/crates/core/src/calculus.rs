//! Field-level differential and integral calculus on the polar grid.

use crate::error::{Error, Result};
use crate::field::{ScalarField, TensorField};
use crate::norms::{tail_exponent, Tail};

/// Moment weight for plane integrals.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MomentWeight {
    One,
    X1,
    X2,
}

impl MomentWeight {
    fn degree(self) -> f64 {
        match self {
            MomentWeight::One => 0.0,
            _ => 1.0,
        }
    }
}

/// Sample a pointwise function on the grid.
pub fn discretize(
    grid: &crate::grid::PolarGrid,
    f: impl Fn(f64, f64) -> f64,
) -> Result<ScalarField> {
    ScalarField::from_fn(grid, f)
}

/// Plane integral of f times a moment weight, by tensor-product quadrature
/// (trapezoid in theta, mapped interpolatory rule in r). Rejects integrands
/// whose fitted tail is too shallow for the requested moment.
pub fn integrate(f: &ScalarField, weight: MomentWeight) -> Result<f64> {
    let required = -2.0 - weight.degree();
    if let Tail::Decay { exponent, .. } = tail_exponent(f) {
        if exponent >= required {
            return Err(Error::DivergentTail {
                exponent,
                required,
            });
        }
    }
    Ok(moment_unchecked(f, weight))
}

/// The raw quadrature moment, without the tail diagnostic. The solver uses
/// this internally where the integrand family is already validated.
pub fn moment_unchecked(f: &ScalarField, weight: MomentWeight) -> f64 {
    let grid = f.grid();
    let nt = grid.n_theta();
    let tw = grid.theta_weight();
    let theta = grid.theta_nodes();
    let mut acc = 0.0;
    for (j, (&wr, &r)) in grid
        .radial_weights()
        .iter()
        .zip(grid.r_nodes())
        .enumerate()
    {
        let row = &f.values()[j * nt..(j + 1) * nt];
        let s: f64 = match weight {
            MomentWeight::One => row.iter().sum(),
            MomentWeight::X1 => row
                .iter()
                .zip(theta)
                .map(|(&v, &th)| v * r * th.cos())
                .sum(),
            MomentWeight::X2 => row
                .iter()
                .zip(theta)
                .map(|(&v, &th)| v * r * th.sin())
                .sum(),
        };
        acc += wr * tw * s;
    }
    acc
}

/// Cartesian gradient (d_1 f, d_2 f): spectral in theta, 4th-order mapped
/// finite differences in r.
pub fn gradient(f: &ScalarField) -> (ScalarField, ScalarField) {
    let modes = f.to_modes();
    let plus = modes.raise();
    let minus = modes.lower();
    let vplus = plus.to_complex_values();
    let vminus = minus.to_complex_values();
    let n = vplus.len();
    let mut d1 = Vec::with_capacity(n);
    let mut d2 = Vec::with_capacity(n);
    for i in 0..n {
        let p = vplus[i];
        let m = vminus[i];
        d1.push(0.5 * (p.re + m.re));
        d2.push(0.5 * (p.im - m.im));
    }
    (
        ScalarField::from_values_unchecked(f.grid(), d1),
        ScalarField::from_values_unchecked(f.grid(), d2),
    )
}

/// Mode-wise Laplacian d_rr + d_r/r - k^2/r^2.
pub fn laplacian(f: &ScalarField) -> ScalarField {
    f.to_modes().laplacian().to_scalar()
}

/// Row divergences (d_i K_i1, d_i K_i2) of a symmetric traceless tensor,
/// computed by spin-lowering the combination K11 + i K12.
pub fn divergence(k: &TensorField) -> (ScalarField, ScalarField) {
    let lowered = k.plus_modes().lower().to_complex_values();
    let grid = k.grid();
    let d1: Vec<f64> = lowered.iter().map(|c| c.re).collect();
    let d2: Vec<f64> = lowered.iter().map(|c| c.im).collect();
    (
        ScalarField::from_values_unchecked(grid, d1),
        ScalarField::from_values_unchecked(grid, d2),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::PolarGrid;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn grid(n_r: usize) -> PolarGrid {
        PolarGrid::new(n_r, 32, 4.0).unwrap()
    }

    #[test]
    fn integrate_zero_is_zero() {
        let g = grid(64);
        let z = ScalarField::zeros(&g);
        assert_eq!(integrate(&z, MomentWeight::One).unwrap(), 0.0);
    }

    #[test]
    fn integrate_gaussian_mass() {
        // int 2 e^{-r^2} dx = 2 pi
        let g = grid(256);
        let f = ScalarField::from_fn(&g, |r, _| 2.0 * (-r * r).exp()).unwrap();
        let v = integrate(&f, MomentWeight::One).unwrap();
        assert_relative_eq!(v, 2.0 * PI, epsilon = 1e-9);
    }

    #[test]
    fn integrate_gaussian_first_moment() {
        // int 4 x1 e^{-r^2} * x1 dx = 2 pi
        let g = grid(256);
        let f = ScalarField::from_fn(&g, |r, th| 4.0 * r * th.cos() * (-r * r).exp()).unwrap();
        let v = integrate(&f, MomentWeight::X1).unwrap();
        assert_relative_eq!(v, 2.0 * PI, epsilon = 1e-8);
    }

    #[test]
    fn integrate_rejects_shallow_tail() {
        let g = grid(128);
        // ~ r^{-2} tail: not integrable against the plane measure.
        let f = ScalarField::from_fn(&g, |r, _| 1.0 / (1.0 + r * r)).unwrap();
        assert!(matches!(
            integrate(&f, MomentWeight::One),
            Err(Error::DivergentTail { .. })
        ));
    }

    #[test]
    fn gradient_of_gaussian_matches_symbolic() {
        let g = grid(256);
        let f = ScalarField::from_fn(&g, |r, _| (-r * r).exp()).unwrap();
        let (d1, d2) = gradient(&f);
        let mut worst = 0.0f64;
        for (j, &r) in g.r_nodes().iter().enumerate() {
            for (k, &th) in g.theta_nodes().iter().enumerate() {
                let e1 = -2.0 * r * th.cos() * (-r * r).exp();
                let e2 = -2.0 * r * th.sin() * (-r * r).exp();
                worst = worst.max((d1.at(j, k) - e1).abs()).max((d2.at(j, k) - e2).abs());
            }
        }
        assert!(worst < 5e-6, "worst gradient error {worst:.3e}");
    }

    #[test]
    fn gradient_of_windowed_x1_matches_symbolic() {
        // f = x1 w(r) with a wide far cutoff; the symbolic oracle carries the
        // window's derivative, so the comparison isolates the scheme error.
        let g = grid(256);
        let w = |r: f64| 1.0 / (1.0 + (r / 20.0).powi(8));
        let wp = |r: f64| {
            let q = (r / 20.0).powi(8);
            -8.0 * q / r / (1.0 + q).powi(2)
        };
        let f = ScalarField::from_fn(&g, |r, th| r * th.cos() * w(r)).unwrap();
        let (d1, d2) = gradient(&f);
        for (j, &r) in g.r_nodes().iter().enumerate() {
            if !(0.05..8.0).contains(&r) {
                continue;
            }
            for (k, &th) in g.theta_nodes().iter().enumerate() {
                let (c, s) = (th.cos(), th.sin());
                let e1 = w(r) + r * c * wp(r) * c;
                let e2 = r * c * wp(r) * s;
                assert!((d1.at(j, k) - e1).abs() < 1e-7, "r = {r}");
                assert!((d2.at(j, k) - e2).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn gradient_mode2_polynomial_matches_symbolic() {
        // f = r^2 cos 2theta * w(r) = (x1^2 - x2^2) w:
        // d_1 f = 2 x1 w + (x1^2 - x2^2) w' x1/r, and the x2 analogue.
        let g = grid(256);
        let w = |r: f64| (-(r / 6.0).powi(8)).exp();
        let wp = |r: f64| -8.0 * (r / 6.0).powi(8) / r * w(r);
        let f = ScalarField::from_fn(&g, |r, th| r * r * (2.0 * th).cos() * w(r)).unwrap();
        let (d1, d2) = gradient(&f);
        for (j, &r) in g.r_nodes().iter().enumerate() {
            if !(0.05..3.0).contains(&r) {
                continue;
            }
            for (k, &th) in g.theta_nodes().iter().enumerate() {
                let x1 = r * th.cos();
                let x2 = r * th.sin();
                let base = x1 * x1 - x2 * x2;
                let e1 = 2.0 * x1 * w(r) + base * wp(r) * x1 / r;
                let e2 = -2.0 * x2 * w(r) + base * wp(r) * x2 / r;
                assert!((d1.at(j, k) - e1).abs() < 1e-7, "r={r} th={th}");
                assert!((d2.at(j, k) - e2).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn laplacian_of_constant_window_vanishes_inside() {
        let g = grid(256);
        let w = |r: f64| 1.0 / (1.0 + (r / 30.0).powi(10));
        let f = ScalarField::from_fn(&g, |r, _| w(r)).unwrap();
        let lap = laplacian(&f);
        for (j, &r) in g.r_nodes().iter().enumerate() {
            if r < 3.0 {
                for k in 0..g.n_theta() {
                    assert!(lap.at(j, k).abs() < 1e-7, "r = {r}: {}", lap.at(j, k));
                }
            }
        }
    }

    #[test]
    fn laplacian_of_gaussian_matches_symbolic() {
        let g = grid(256);
        let f = ScalarField::from_fn(&g, |r, _| (-r * r).exp()).unwrap();
        let lap = laplacian(&f);
        let mut worst = 0.0f64;
        for (j, &r) in g.r_nodes().iter().enumerate() {
            let expect = (4.0 * r * r - 4.0) * (-r * r).exp();
            worst = worst.max((lap.at(j, 0) - expect).abs());
        }
        assert!(worst < 5e-5, "worst laplacian error {worst:.3e}");
    }

    #[test]
    fn laplacian_kills_harmonic_polynomials_in_window() {
        // r^k cos k theta are harmonic: the Laplacian of the windowed field
        // reduces to pure window terms, Delta(fw) = 2 grad f . grad w + f
        // Delta w, which the symbolic oracle carries.
        let g = grid(256);
        let w = |r: f64| (-(r / 8.0).powi(8)).exp();
        let wp = |r: f64| -8.0 * (r / 8.0).powi(8) / r * w(r);
        let wpp = |r: f64| {
            let q = (r / 8.0).powi(8);
            (-56.0 * q / (r * r) + 64.0 * q * q / (r * r)) * w(r)
        };
        for k in 0..=2i32 {
            let f = ScalarField::from_fn(&g, |r, th| {
                r.powi(k) * (k as f64 * th).cos() * w(r)
            })
            .unwrap();
            let lap = laplacian(&f);
            for (j, &r) in g.r_nodes().iter().enumerate() {
                if !(0.05..3.0).contains(&r) {
                    continue;
                }
                for (kk, &th) in g.theta_nodes().iter().enumerate() {
                    let ang = (k as f64 * th).cos();
                    let lap_w = wpp(r) + wp(r) / r;
                    let expect =
                        ang * (2.0 * k as f64 * r.powi(k - 1) * wp(r) + r.powi(k) * lap_w);
                    assert!(
                        (lap.at(j, kk) - expect).abs() < 1e-6,
                        "k={k} r={r}: {} vs {expect}",
                        lap.at(j, kk)
                    );
                }
            }
        }
    }

    #[test]
    fn divergence_of_zero_tensor_is_zero() {
        let g = grid(64);
        let k = TensorField::zeros(&g);
        let (d1, d2) = divergence(&k);
        assert_eq!(d1.max_abs(), 0.0);
        assert_eq!(d2.max_abs(), 0.0);
    }

    #[test]
    fn divergence_of_rotation_blocks_vanishes_on_annulus() {
        // d_i (M/r^2)_ij = d_i (N/r^2)_ij = 0 for r > 0: the discrete
        // operator sees this on the annulus at solver-noise level (the
        // profile is smooth there).
        let g = grid(256);
        for block in [
            crate::elliptic::m_theta_block(&g, |r| 1.0 / (r * r)),
            crate::elliptic::n_theta_block(&g, |r| 1.0 / (r * r)),
        ] {
            let (d1, d2) = divergence(&block);
            for (j, &r) in g.r_nodes().iter().enumerate() {
                if (2.0..=10.0).contains(&r) {
                    for k in 0..g.n_theta() {
                        assert!(d1.at(j, k).abs() < 1e-8, "r = {r}");
                        assert!(d2.at(j, k).abs() < 1e-8);
                    }
                }
            }
        }
    }

    #[test]
    fn integration_by_parts_on_compact_field() {
        // For smooth compactly-supported f, int d_1 f dx = 0.
        let g = grid(256);
        let f = ScalarField::from_fn(&g, |r, th| (-r * r).exp() * (1.0 + 0.5 * th.sin())).unwrap();
        let (d1, _) = gradient(&f);
        let v = moment_unchecked(&d1, MomentWeight::One);
        assert!(v.abs() < 1e-9, "int d1 f = {v:.3e}");
    }
}
