//! Shared fixtures and independent numerical oracles for the integration
//! and acceptance suites. The oracles here deliberately avoid the library's
//! own quadrature and special-function code paths.
#![allow(dead_code)] // each test target uses its own subset

use deficit_core::ansatz::AngularData;
use deficit_core::field::ScalarField;
use deficit_core::grid::PolarGrid;
use deficit_core::matter::{
    build_sources, matter_from_gaussians, GaussianSpec, MatterComponent, SourceFields,
};
use deficit_core::solver::{Problem, SolverState};

/// Adaptive Simpson quadrature, the independent 1-D integration oracle.
pub fn simpson_adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(a: f64, fa: f64, b: f64, fb: f64, fm: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        fm: f64,
        whole: f64,
        tol: f64,
        depth: usize,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(a, fa, m, fm, flm);
        let right = simpson(m, fm, b, fb, frm);
        if depth == 0 || (left + right - whole).abs() < 15.0 * tol {
            left + right + (left + right - whole) / 15.0
        } else {
            recurse(f, a, fa, m, fm, flm, left, 0.5 * tol, depth - 1)
                + recurse(f, m, fm, b, fb, frm, right, 0.5 * tol, depth - 1)
        }
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = simpson(a, fa, b, fb, fm);
    recurse(f, a, fa, b, fb, fm, whole, tol, 48)
}

/// Exponential integral E1(x) = int_x^inf e^{-t}/t dt by direct quadrature
/// (tail beyond x + 60 is below 1e-26 relative for x >= 1).
pub fn e1_oracle(x: f64) -> f64 {
    simpson_adaptive(&|t: f64| (-t).exp() / t, x, x + 60.0, 1e-15)
}

/// Two offset wave-map Gaussians (gamma_dot and gamma), the standard
/// experiment family: nonzero energy, momentum, dipole and angular content.
pub fn gaussian_problem(grid: &PolarGrid, a: f64) -> Problem {
    let m = matter_from_gaussians(
        grid,
        &[
            GaussianSpec {
                which: MatterComponent::GammaDot,
                amplitude: a,
                center: (0.5, 0.0),
                width: 1.0,
            },
            GaussianSpec {
                which: MatterComponent::Gamma,
                amplitude: a,
                center: (-0.2, 0.35),
                width: 1.0,
            },
        ],
    )
    .unwrap();
    let sources = build_sources(&m).unwrap();
    Problem::new(grid.clone(), -0.5, sources, AngularData::zero()).unwrap()
}

/// Off-center energy-only source: gamma_dot Gaussian at (0.5, 0).
pub fn offcenter_problem(grid: &PolarGrid, a: f64) -> Problem {
    let m = matter_from_gaussians(
        grid,
        &[GaussianSpec {
            which: MatterComponent::GammaDot,
            amplitude: a,
            center: (0.5, 0.0),
            width: 1.0,
        }],
    )
    .unwrap();
    let sources = build_sources(&m).unwrap();
    Problem::new(grid.clone(), -0.5, sources, AngularData::zero()).unwrap()
}

/// Directly supplied sources with epsilon linear in the amplitude:
/// q_dot = q_grad = a g, p bounded by the pointwise Cauchy-Schwarz budget.
pub fn direct_problem(grid: &PolarGrid, a: f64) -> Problem {
    let g = |r: f64, th: f64| {
        let dx = r * th.cos() - 0.5;
        let dy = r * th.sin();
        (-(dx * dx + dy * dy)).exp()
    };
    let q = ScalarField::from_fn(grid, |r, th| a * g(r, th)).unwrap();
    let p1 = ScalarField::from_fn(grid, |r, th| 0.5 * a * g(r, th) * th.cos()).unwrap();
    let p2 = ScalarField::from_fn(grid, |r, th| 0.3 * a * g(r, th)).unwrap();
    let sources = SourceFields::from_parts(p1, p2, q.clone(), q).unwrap();
    Problem::new(grid.clone(), -0.5, sources, AngularData::zero()).unwrap()
}

/// A deterministic pair of states inside the a-priori ball of a problem.
pub fn state_pair(problem: &Problem, grid: &PolarGrid) -> (SolverState, SolverState) {
    let e = problem.epsilon;
    let s1 = SolverState {
        alpha: problem.alpha0 * 1.1,
        c1: 0.02 * e,
        c2: -0.01 * e,
        lambda_tilde: ScalarField::from_fn(grid, |r, th| {
            0.05 * e * (-r * r).exp() * (1.0 + 0.3 * th.cos())
        })
        .unwrap(),
    };
    let s2 = SolverState {
        alpha: problem.alpha0 * 0.9,
        c1: -0.015 * e,
        c2: 0.02 * e,
        lambda_tilde: ScalarField::from_fn(grid, |r, th| {
            0.04 * e * (-0.8 * r * r).exp() * (1.0 - 0.2 * (2.0 * th).sin())
        })
        .unwrap(),
    };
    (s1, s2)
}

/// Least-squares slope of ln y against ln x.
pub fn loglog_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0.ln()).sum();
    let sy: f64 = pts.iter().map(|p| p.1.ln()).sum();
    let sxx: f64 = pts.iter().map(|p| p.0.ln().powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| p.0.ln() * p.1.ln()).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}
