//! Built-in verification suite: exact identities, elliptic oracles, and
//! norm checks, each reported as a named pass/fail line. Quantities with no
//! asserted threshold (empirical constants, raw finite-difference variants)
//! are reported as diagnostics.

use serde::Serialize;

use crate::ansatz::{self, AngularData, FourierSeries};
use crate::calculus::{integrate, laplacian, MomentWeight};
use crate::cutoff;
use crate::elliptic::{m_theta_block, mcowen_solve, momentum_solve, n_theta_block, poisson_expand};
use crate::error::Result;
use crate::field::ScalarField;
use crate::grid::PolarGrid;
use crate::io::GridMeta;
use crate::norms::sobolev_norm;

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct Diagnostic {
    pub name: String,
    pub value: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerificationReport {
    pub grid: GridMeta,
    pub delta: f64,
    pub all_pass: bool,
    pub checks: Vec<Check>,
    pub diagnostics: Vec<Diagnostic>,
}

fn check(checks: &mut Vec<Check>, name: &str, value: f64, threshold: f64) {
    checks.push(Check {
        name: name.to_string(),
        value,
        threshold,
        pass: value.is_finite() && value <= threshold,
    });
}

/// Exponential integral E1(x) for x > 0, by series below 1 and the
/// continued fraction (modified Lentz) above.
pub fn exp_integral_e1(x: f64) -> f64 {
    assert!(x > 0.0);
    if x < 1.0 {
        // E1(x) = -gamma - ln x + sum_{k>=1} (-1)^{k+1} x^k / (k k!)
        const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
        let mut sum = 0.0;
        let mut term = 1.0;
        for k in 1..60 {
            term *= -x / k as f64;
            sum -= term / k as f64;
        }
        -EULER_GAMMA - x.ln() + sum
    } else {
        let tiny = 1e-300;
        let mut b = x + 1.0;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..200 {
            let a = -(i as f64) * (i as f64);
            b += 2.0;
            d = 1.0 / (a * d + b);
            c = b + a / c;
            let del = c * d;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                break;
            }
        }
        h * (-x).exp()
    }
}

/// Max deviation of the mode-0 Poisson remainder from (1/2) E1(r^2) over
/// the window r in [2, 20], for the source 2 e^{-r^2}.
fn poisson_remainder_vs_expint(grid: &PolarGrid, delta: f64) -> Result<(f64, f64)> {
    let f = ScalarField::from_fn(grid, |r, _| 2.0 * (-r * r).exp())?;
    let (asym, _) = poisson_expand(&f, delta)?;
    let mut worst = 0.0f64;
    for (j, &r) in grid.r_nodes().iter().enumerate() {
        if (2.0..=20.0).contains(&r) {
            let expect = 0.5 * exp_integral_e1(r * r);
            worst = worst.max((asym.remainder.at(j, 0) - expect).abs());
        }
    }
    Ok(((asym.log_coeff - 1.0).abs(), worst))
}

fn annulus_max(f: &ScalarField, lo: f64, hi: f64) -> f64 {
    let nt = f.grid().n_theta();
    let mut m = 0.0f64;
    for (j, &r) in f.grid().r_nodes().iter().enumerate() {
        if (lo..=hi).contains(&r) {
            for k in 0..nt {
                m = m.max(f.values()[j * nt + k].abs());
            }
        }
    }
    m
}

/// Tiny deterministic generator for the randomized product-estimate check.
struct XorShift(u64);

impl XorShift {
    fn next_f64(&mut self) -> f64 {
        let mut x = self.0;
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        self.0 = x;
        (x >> 11) as f64 / (1u64 << 53) as f64
    }

    fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }
}

/// Empirical constant in the product estimate
/// ||uv||_{H0_delta} <= C ||u||_{H1_d1} ||v||_{H1_d2} with delta < d1+d2+1,
/// over seeded random Gaussian bumps.
fn product_estimate_constant(grid: &PolarGrid) -> Result<f64> {
    let mut rng = XorShift(0x9e3779b97f4a7c15);
    let mut worst = 0.0f64;
    for _ in 0..8 {
        let (a1, x1, y1, w1) = (
            rng.uniform(0.2, 1.0),
            rng.uniform(-0.5, 0.5),
            rng.uniform(-0.5, 0.5),
            rng.uniform(0.7, 1.4),
        );
        let (a2, x2, y2, w2) = (
            rng.uniform(0.2, 1.0),
            rng.uniform(-0.5, 0.5),
            rng.uniform(-0.5, 0.5),
            rng.uniform(0.7, 1.4),
        );
        let u = ScalarField::from_fn(grid, |r, th| {
            let dx = r * th.cos() - x1;
            let dy = r * th.sin() - y1;
            a1 * (-(dx * dx + dy * dy) / (w1 * w1)).exp()
        })?;
        let v = ScalarField::from_fn(grid, |r, th| {
            let dx = r * th.cos() - x2;
            let dy = r * th.sin() - y2;
            a2 * (-(dx * dx + dy * dy) / (w2 * w2)).exp()
        })?;
        let (d1, d2) = (-0.3, -0.3);
        let delta = d1 + d2 + 0.5; // < d1 + d2 + 1
        let lhs = sobolev_norm(&u.mul(&v), 0, delta)?;
        let rhs = sobolev_norm(&u, 1, d1)? * sobolev_norm(&v, 1, d2)?;
        worst = worst.max(lhs / rhs);
    }
    Ok(worst)
}

/// Observed convergence order of the raw finite-difference calculus on a
/// smooth manufactured tensor field (the cutoff profiles are measured
/// separately; their Gevrey regularity keeps raw differences far from the
/// asymptotic regime at practical resolutions).
fn fd_order_on_smooth_blocks(n_theta: usize, map_scale: f64) -> Result<f64> {
    let err_at = |n_r: usize| -> Result<f64> {
        let g = PolarGrid::new(n_r, n_theta, map_scale)?;
        // T = phi M with phi = r^2 e^{-r^2}: compare raw divergence against
        // the closed form.
        let phi = |r: f64| r * r * (-r * r).exp();
        let phip = |r: f64| (2.0 * r - 2.0 * r * r * r) * (-r * r).exp();
        let t = m_theta_block(&g, phi);
        let (d1, _) = crate::calculus::divergence(&t);
        let one = |_: f64| 1.0;
        let zero = |_: f64| 0.0;
        let (e1, _) =
            ansatz::tensor_block_divergence(&g, |r| (phi(r), phip(r)), &one, &zero, &zero, &zero);
        Ok(d1.sub(&e1).l2_norm())
    };
    let coarse = err_at(96)?;
    let fine = err_at(192)?;
    Ok((coarse / fine).log2())
}

/// Run the whole verification suite on one grid.
pub fn run_verification(grid: &PolarGrid, delta: f64) -> Result<VerificationReport> {
    let mut checks = Vec::new();
    let mut diagnostics = Vec::new();
    let two_pi = 2.0 * std::f64::consts::PI;

    // Quadrature reproduces the Gaussian mass.
    let gauss = ScalarField::from_fn(grid, |r, _| 2.0 * (-r * r).exp())?;
    let mass = integrate(&gauss, MomentWeight::One)?;
    check(&mut checks, "quadrature_gaussian_mass", (mass - two_pi).abs(), 1e-8);

    // Psi normalization.
    let psi = ansatz::default_psi(grid);
    let psi_int = integrate(&psi, MomentWeight::One)?;
    check(&mut checks, "psi_integral", (psi_int - two_pi).abs(), 1e-8);

    // M:M = 2, M:N = 0 pointwise.
    let m = m_theta_block(grid, |_| 1.0);
    let n = n_theta_block(grid, |_| 1.0);
    let mm = m
        .norm_squared_field()
        .map(|v| (v - 2.0).abs())
        .max_abs();
    let mn = m
        .xx
        .mul(&n.xx)
        .add(&m.xy.mul(&n.xy))
        .map(|v| 2.0 * v.abs())
        .max_abs();
    check(&mut checks, "m_contraction", mm, 1e-14);
    check(&mut checks, "m_n_orthogonality", mn, 1e-14);

    // Divergence-free rotation blocks on the annulus, closed-form path.
    let phi = |r: f64| (1.0 / (r * r), -2.0 / (r * r * r));
    let one = |_: f64| 1.0;
    let zero = |_: f64| 0.0;
    let (dm1, dm2) = ansatz::tensor_block_divergence(grid, phi, &one, &zero, &zero, &zero);
    let (dn1, dn2) = ansatz::tensor_block_divergence(grid, phi, &zero, &zero, &one, &zero);
    let calcmn = annulus_max(&dm1, 2.0, 10.0)
        .max(annulus_max(&dm2, 2.0, 10.0))
        .max(annulus_max(&dn1, 2.0, 10.0))
        .max(annulus_max(&dn2, 2.0, 10.0));
    check(&mut checks, "rotation_block_divergence", calcmn, 1e-8);
    // Raw-difference variant, for the record.
    let mb = m_theta_block(grid, |r| 1.0 / (r * r));
    let (rd1, rd2) = crate::calculus::divergence(&mb);
    diagnostics.push(Diagnostic {
        name: "rotation_block_divergence_raw_fd".into(),
        value: annulus_max(&rd1, 2.0, 10.0).max(annulus_max(&rd2, 2.0, 10.0)),
    });

    // Divergence identity for the explicit background blocks.
    let ang = AngularData::zero().with_dipole(1.0, 0.0);
    let r_dip = ansatz::divergence_identity_residual(&ang, 0.1, 0.0, 0.0, grid)?;
    check(&mut checks, "divergence_identity_dipole", r_dip, 1e-8);
    let btilde = FourierSeries {
        cos: vec![1.0],
        sin: vec![0.0, 1.0],
    };
    let ang = AngularData::new(btilde, FourierSeries::zero())?;
    let r_off = ansatz::divergence_identity_residual(
        &ang,
        1.0,
        0.3,
        std::f64::consts::PI / 4.0,
        grid,
    )?;
    check(&mut checks, "divergence_identity_offset", r_off, 1e-6);
    diagnostics.push(Diagnostic {
        name: "divergence_identity_offset_raw_fd".into(),
        value: ansatz::divergence_identity_residual_fd(
            &ang,
            1.0,
            0.3,
            std::f64::consts::PI / 4.0,
            grid,
        )?,
    });

    // Laplacian oracle on the Gaussian.
    let f = ScalarField::from_fn(grid, |r, _| (-r * r).exp())?;
    let lap = laplacian(&f);
    let lap_exact =
        ScalarField::from_fn(grid, |r, _| (4.0 * r * r - 4.0) * (-r * r).exp())?;
    check(
        &mut checks,
        "laplacian_gaussian_oracle",
        lap.sub(&lap_exact).max_abs(),
        1e-4,
    );

    // Elliptic solves against their oracles.
    let source = ScalarField::from_fn(grid, |r, _| (4.0 * r * r - 4.0) * (-r * r).exp())?;
    let (u, rep) = mcowen_solve(&source, delta)?;
    let exact = ScalarField::from_fn(grid, |r, _| (-r * r).exp())?;
    check(
        &mut checks,
        "mcowen_gaussian_recovery",
        u.sub(&exact).l2_norm() / exact.l2_norm(),
        1e-6,
    );
    check(&mut checks, "mcowen_solve_residual", rep.residual_rel, 1e-10);

    let (dm, dworst) = poisson_remainder_vs_expint(grid, delta)?;
    check(&mut checks, "poisson_log_coefficient", dm, 1e-8);
    check(&mut checks, "poisson_remainder_vs_exp_integral", dworst, 1e-6);

    let f1 = ScalarField::from_fn(grid, |r, th| 4.0 * r * th.cos() * (-r * r).exp())?;
    let f2 = ScalarField::from_fn(grid, |r, th| 4.0 * r * th.sin() * (-r * r).exp())?;
    let sol = momentum_solve(&f1, &f2, delta)?;
    check(&mut checks, "momentum_a_charge", (sol.a_coeff - 2.0).abs(), 1e-6);
    check(
        &mut checks,
        "momentum_divergence_residual",
        sol.report.residual_rel,
        1e-9,
    );
    let g1 = ScalarField::from_fn(grid, |r, th| -4.0 * r * th.sin() * (-r * r).exp())?;
    let g2 = ScalarField::from_fn(grid, |r, th| 4.0 * r * th.cos() * (-r * r).exp())?;
    let sol_j = momentum_solve(&g1, &g2, delta)?;
    check(&mut checks, "momentum_j_charge", (sol_j.j_coeff - 2.0).abs(), 1e-6);

    // Weighted-norm closed form.
    let w = ScalarField::from_fn(grid, |r, _| (1.0 + r * r).powf(-1.5))?;
    let nv = sobolev_norm(&w, 0, 0.0)?;
    check(
        &mut checks,
        "weighted_norm_closed_form",
        (nv - (std::f64::consts::PI / 2.0).sqrt()).abs(),
        1e-7,
    );

    // Cutoff identities.
    let chi_inside = (0..200)
        .map(|i| {
            let r = 1.0 * i as f64 / 199.0;
            cutoff::chi_log(r).abs().max(cutoff::chi_over_r(r).abs())
        })
        .fold(0.0f64, f64::max);
    check(&mut checks, "cutoff_vanishes_inside", chi_inside, 0.0);

    // Unasserted empirical quantities.
    diagnostics.push(Diagnostic {
        name: "product_estimate_constant".into(),
        value: product_estimate_constant(grid)?,
    });
    diagnostics.push(Diagnostic {
        name: "fd_order_smooth_blocks".into(),
        value: fd_order_on_smooth_blocks(grid.n_theta().min(32), grid.map_scale())?,
    });

    let all_pass = checks.iter().all(|c| c.pass);
    Ok(VerificationReport {
        grid: GridMeta::of(grid),
        delta,
        all_pass,
        checks,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exp_integral_reference_values() {
        // Abramowitz & Stegun 5.1: E1(1) = 0.2193839344, E1(4) = 0.0037793516.
        assert_relative_eq!(exp_integral_e1(1.0), 0.21938393439552, epsilon = 1e-10);
        assert_relative_eq!(exp_integral_e1(4.0), 0.0037793524, epsilon = 1e-8);
        assert_relative_eq!(exp_integral_e1(0.5), 0.5597735948, epsilon = 1e-8);
    }

    #[test]
    fn verification_passes_on_default_grid() {
        let g = PolarGrid::new(256, 32, 4.0).unwrap();
        let report = run_verification(&g, -0.5).unwrap();
        for c in &report.checks {
            assert!(c.pass, "{}: {:.3e} > {:.3e}", c.name, c.value, c.threshold);
        }
        assert!(report.all_pass);
    }
}
