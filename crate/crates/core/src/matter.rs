//! Quadratic source fields built from wave-map data (gamma, omega) and
//! their time derivatives, and the smallness functional epsilon.

use serde::{Deserialize, Serialize};

use crate::calculus::{gradient, integrate, MomentWeight};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::PolarGrid;

/// Wave-map data: the scalar pair u = (gamma, omega) and its rescaled time
/// derivative (gamma_dot, omega_dot).
#[derive(Clone, Debug)]
pub struct MatterData {
    pub gamma: ScalarField,
    pub omega: ScalarField,
    pub gamma_dot: ScalarField,
    pub omega_dot: ScalarField,
}

impl MatterData {
    pub fn zero(grid: &PolarGrid) -> Self {
        MatterData {
            gamma: ScalarField::zeros(grid),
            omega: ScalarField::zeros(grid),
            gamma_dot: ScalarField::zeros(grid),
            omega_dot: ScalarField::zeros(grid),
        }
    }

    fn validate(&self) -> Result<()> {
        for v in self.gamma.values() {
            if !(-4.0 * v).exp().is_finite() {
                return Err(Error::InvalidMatter(format!(
                    "e^(-4 gamma) overflows (gamma = {v})"
                )));
            }
        }
        Ok(())
    }
}

/// The quadratic sources entering the constraints: the momentum density
/// pair p_j = udot . d_j u, the energy densities udot^2 and |grad u|^2, and
/// the derived angular/radial momenta.
#[derive(Clone, Debug)]
pub struct SourceFields {
    pub p1: ScalarField,
    pub p2: ScalarField,
    pub q_dot: ScalarField,
    pub q_grad: ScalarField,
}

impl SourceFields {
    pub fn zero(grid: &PolarGrid) -> Self {
        SourceFields {
            p1: ScalarField::zeros(grid),
            p2: ScalarField::zeros(grid),
            q_dot: ScalarField::zeros(grid),
            q_grad: ScalarField::zeros(grid),
        }
    }

    pub fn grid(&self) -> &PolarGrid {
        self.p1.grid()
    }

    /// Directly supplied sources must satisfy the positivity invariants.
    pub fn from_parts(
        p1: ScalarField,
        p2: ScalarField,
        q_dot: ScalarField,
        q_grad: ScalarField,
    ) -> Result<Self> {
        if q_dot.values().iter().any(|&v| v < 0.0) || q_grad.values().iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidMatter(
                "energy densities must be pointwise nonnegative".into(),
            ));
        }
        Ok(SourceFields {
            p1,
            p2,
            q_dot,
            q_grad,
        })
    }

    /// Angular momentum density p_theta = x1 p2 - x2 p1.
    pub fn p_theta(&self) -> ScalarField {
        let grid = self.grid();
        let nt = grid.n_theta();
        let mut v = vec![0.0; grid.len()];
        for (j, &r) in grid.r_nodes().iter().enumerate() {
            for (k, &th) in grid.theta_nodes().iter().enumerate() {
                let i = j * nt + k;
                v[i] = r * th.cos() * self.p2.values()[i] - r * th.sin() * self.p1.values()[i];
            }
        }
        ScalarField::from_values_unchecked(grid, v)
    }

    /// Radial momentum density p_r = x1 p1 + x2 p2 (this is r d_r-weighted).
    pub fn p_r(&self) -> ScalarField {
        let grid = self.grid();
        let nt = grid.n_theta();
        let mut v = vec![0.0; grid.len()];
        for (j, &r) in grid.r_nodes().iter().enumerate() {
            for (k, &th) in grid.theta_nodes().iter().enumerate() {
                let i = j * nt + k;
                v[i] = r * th.cos() * self.p1.values()[i] + r * th.sin() * self.p2.values()[i];
            }
        }
        ScalarField::from_values_unchecked(grid, v)
    }

    /// Total energy density udot^2 + |grad u|^2.
    pub fn energy_density(&self) -> ScalarField {
        self.q_dot.add(&self.q_grad)
    }

    pub fn is_zero(&self) -> bool {
        self.p1.max_abs() == 0.0
            && self.p2.max_abs() == 0.0
            && self.q_dot.max_abs() == 0.0
            && self.q_grad.max_abs() == 0.0
    }
}

/// Assemble the quadratic sources from wave-map data with the scalar
/// product udot . d_j u = 2 gdot d_j g + (1/2) e^{-4g} wdot d_j w.
pub fn build_sources(m: &MatterData) -> Result<SourceFields> {
    m.validate()?;
    let (dg1, dg2) = gradient(&m.gamma);
    let (dw1, dw2) = gradient(&m.omega);
    let e4: Vec<f64> = m.gamma.values().iter().map(|&g| (-4.0 * g).exp()).collect();
    let grid = m.gamma.grid();

    let n = grid.len();
    let mut p1 = vec![0.0; n];
    let mut p2 = vec![0.0; n];
    let mut qd = vec![0.0; n];
    let mut qg = vec![0.0; n];
    for i in 0..n {
        let gd = m.gamma_dot.values()[i];
        let wd = m.omega_dot.values()[i];
        p1[i] = 2.0 * gd * dg1.values()[i] + 0.5 * e4[i] * wd * dw1.values()[i];
        p2[i] = 2.0 * gd * dg2.values()[i] + 0.5 * e4[i] * wd * dw2.values()[i];
        qd[i] = 2.0 * gd * gd + 0.5 * e4[i] * wd * wd;
        qg[i] = 2.0 * (dg1.values()[i].powi(2) + dg2.values()[i].powi(2))
            + 0.5 * e4[i] * (dw1.values()[i].powi(2) + dw2.values()[i].powi(2));
    }
    Ok(SourceFields {
        p1: ScalarField::from_values_unchecked(grid, p1),
        p2: ScalarField::from_values_unchecked(grid, p2),
        q_dot: ScalarField::from_values_unchecked(grid, qd),
        q_grad: ScalarField::from_values_unchecked(grid, qg),
    })
}

/// The smallness functional epsilon = int (udot^2 + |grad u|^2).
pub fn epsilon(s: &SourceFields) -> Result<f64> {
    integrate(&s.energy_density(), MomentWeight::One)
}

/// Which wave-map component a built-in Gaussian lands on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatterComponent {
    Gamma,
    Omega,
    GammaDot,
    OmegaDot,
}

/// One offset Gaussian a e^{-|x - x0|^2 / width^2}.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianSpec {
    pub which: MatterComponent,
    pub amplitude: f64,
    #[serde(default)]
    pub center: (f64, f64),
    #[serde(default = "default_width")]
    pub width: f64,
}

fn default_width() -> f64 {
    1.0
}

/// Sum the Gaussian components into wave-map data.
pub fn matter_from_gaussians(grid: &PolarGrid, specs: &[GaussianSpec]) -> Result<MatterData> {
    let mut m = MatterData::zero(grid);
    for spec in specs {
        if !(spec.width > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "gaussian width must be positive, got {}",
                spec.width
            )));
        }
        let (x0, y0) = spec.center;
        let a = spec.amplitude;
        let w2 = spec.width * spec.width;
        let bump = ScalarField::from_fn(grid, |r, th| {
            let dx = r * th.cos() - x0;
            let dy = r * th.sin() - y0;
            a * (-(dx * dx + dy * dy) / w2).exp()
        })?;
        let target = match spec.which {
            MatterComponent::Gamma => &mut m.gamma,
            MatterComponent::Omega => &mut m.omega,
            MatterComponent::GammaDot => &mut m.gamma_dot,
            MatterComponent::OmegaDot => &mut m.omega_dot,
        };
        *target = target.add(&bump);
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn grid() -> PolarGrid {
        PolarGrid::new(256, 32, 4.0).unwrap()
    }

    #[test]
    fn zero_matter_gives_zero_sources() {
        let g = grid();
        let s = build_sources(&MatterData::zero(&g)).unwrap();
        assert!(s.is_zero());
        assert_eq!(epsilon(&s).unwrap(), 0.0);
    }

    #[test]
    fn pure_gamma_dot_sources() {
        // gamma_dot = a e^{-r^2}: q_dot = 2 a^2 e^{-2 r^2}, p = 0, q_grad = 0.
        let g = grid();
        let a = 0.3;
        let mut m = MatterData::zero(&g);
        m.gamma_dot = ScalarField::from_fn(&g, |r, _| a * (-r * r).exp()).unwrap();
        let s = build_sources(&m).unwrap();
        assert_eq!(s.p1.max_abs(), 0.0);
        assert_eq!(s.q_grad.max_abs(), 0.0);
        for (j, &r) in g.r_nodes().iter().enumerate() {
            assert_relative_eq!(
                s.q_dot.at(j, 0),
                2.0 * a * a * (-2.0 * r * r).exp(),
                epsilon = 1e-15
            );
        }
    }

    #[test]
    fn gamma_gradient_energy_matches_symbolic() {
        // gamma = a e^{-r^2}: q_grad = 2 |grad gamma|^2 = 8 a^2 r^2 e^{-2 r^2}.
        let g = grid();
        let a = 0.2;
        let mut m = MatterData::zero(&g);
        m.gamma = ScalarField::from_fn(&g, |r, _| a * (-r * r).exp()).unwrap();
        let s = build_sources(&m).unwrap();
        assert_eq!(s.q_dot.max_abs(), 0.0);
        let mut worst = 0.0f64;
        for (j, &r) in g.r_nodes().iter().enumerate() {
            let expect = 8.0 * a * a * r * r * (-2.0 * r * r).exp();
            worst = worst.max((s.q_grad.at(j, 0) - expect).abs());
        }
        assert!(worst < 1e-9, "worst {worst:.3e}");
    }

    #[test]
    fn epsilon_gaussian_value_and_linearity() {
        // q_dot = q_grad = a e^{-r^2} -> epsilon = 2 a pi; quadrupling the
        // sources quadruples epsilon.
        let g = grid();
        let a = 0.01;
        let f = ScalarField::from_fn(&g, |r, _| a * (-r * r).exp()).unwrap();
        let s = SourceFields::from_parts(
            ScalarField::zeros(&g),
            ScalarField::zeros(&g),
            f.clone(),
            f.clone(),
        )
        .unwrap();
        let e = epsilon(&s).unwrap();
        assert_relative_eq!(e, 2.0 * a * PI, epsilon = 1e-12);

        let s4 = SourceFields::from_parts(
            ScalarField::zeros(&g),
            ScalarField::zeros(&g),
            f.scaled(4.0),
            f.scaled(4.0),
        )
        .unwrap();
        assert_relative_eq!(epsilon(&s4).unwrap(), 4.0 * e, epsilon = 1e-12);
    }

    #[test]
    fn quadratic_scaling_of_sources() {
        // Scaling (gamma_dot, omega_dot) and the gradients by t scales the
        // sources by t^2 (gamma itself fixed at zero here).
        let g = grid();
        let mut m = MatterData::zero(&g);
        m.gamma_dot = ScalarField::from_fn(&g, |r, th| (-r * r).exp() * (1.0 + 0.3 * th.sin()))
            .unwrap();
        m.omega = ScalarField::from_fn(&g, |r, _| 0.5 * (-r * r).exp()).unwrap();
        m.omega_dot = ScalarField::from_fn(&g, |r, th| 0.2 * (-r * r).exp() * th.cos()).unwrap();
        let s1 = build_sources(&m).unwrap();

        let t = 0.5;
        let mt = MatterData {
            gamma: m.gamma.clone(),
            omega: m.omega.scaled(t),
            gamma_dot: m.gamma_dot.scaled(t),
            omega_dot: m.omega_dot.scaled(t),
        };
        let st = build_sources(&mt).unwrap();
        for i in 0..g.len() {
            assert_relative_eq!(
                st.q_dot.values()[i],
                t * t * s1.q_dot.values()[i],
                epsilon = 1e-14
            );
            assert_relative_eq!(
                st.p1.values()[i],
                t * t * s1.p1.values()[i],
                epsilon = 1e-14
            );
        }
    }

    #[test]
    fn cauchy_schwarz_pointwise() {
        let g = grid();
        let m = matter_from_gaussians(
            &g,
            &[
                GaussianSpec {
                    which: MatterComponent::GammaDot,
                    amplitude: 0.2,
                    center: (0.5, 0.0),
                    width: 1.0,
                },
                GaussianSpec {
                    which: MatterComponent::Gamma,
                    amplitude: 0.1,
                    center: (-0.2, 0.4),
                    width: 1.2,
                },
                GaussianSpec {
                    which: MatterComponent::OmegaDot,
                    amplitude: 0.15,
                    center: (0.0, -0.3),
                    width: 0.9,
                },
            ],
        )
        .unwrap();
        let s = build_sources(&m).unwrap();
        for i in 0..g.len() {
            let lhs = s.p1.values()[i].powi(2) + s.p2.values()[i].powi(2);
            let rhs = s.q_dot.values()[i] * s.q_grad.values()[i];
            assert!(lhs <= rhs * (1.0 + 1e-12) + 1e-30, "at {i}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn rejects_exponential_overflow() {
        let g = grid();
        let mut m = MatterData::zero(&g);
        m.gamma = ScalarField::from_fn(&g, |_, _| -300.0).unwrap();
        assert!(matches!(
            build_sources(&m),
            Err(crate::error::Error::InvalidMatter(_))
        ));
    }

    #[test]
    fn rejects_negative_energy_density() {
        let g = grid();
        let bad = ScalarField::from_fn(&g, |r, _| -(-r * r).exp()).unwrap();
        assert!(SourceFields::from_parts(
            ScalarField::zeros(&g),
            ScalarField::zeros(&g),
            bad,
            ScalarField::zeros(&g),
        )
        .is_err());
    }

    #[test]
    fn momentum_identities() {
        // p_theta and p_r are consistent with p1, p2 by construction.
        let g = grid();
        let m = matter_from_gaussians(
            &g,
            &[
                GaussianSpec {
                    which: MatterComponent::GammaDot,
                    amplitude: 0.2,
                    center: (0.5, 0.0),
                    width: 1.0,
                },
                GaussianSpec {
                    which: MatterComponent::Gamma,
                    amplitude: 0.1,
                    center: (0.0, 0.4),
                    width: 1.0,
                },
            ],
        )
        .unwrap();
        let s = build_sources(&m).unwrap();
        let pt = s.p_theta();
        let pr = s.p_r();
        let nt = g.n_theta();
        for (j, &r) in g.r_nodes().iter().enumerate() {
            for (k, &th) in g.theta_nodes().iter().enumerate() {
                let i = j * nt + k;
                let x1 = r * th.cos();
                let x2 = r * th.sin();
                let et = x1 * s.p2.values()[i] - x2 * s.p1.values()[i];
                let er = x1 * s.p1.values()[i] + x2 * s.p2.values()[i];
                assert_relative_eq!(pt.values()[i], et, epsilon = 1e-14);
                assert_relative_eq!(pr.values()[i], er, epsilon = 1e-14);
            }
        }
    }
}
