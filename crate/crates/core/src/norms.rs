//! Weighted Sobolev norms and tail-decay diagnostics on the unbounded
//! domain. Norms truncate at the grid's outer radius; the tail fit is the
//! honesty check that the truncation converged.

use crate::calculus::gradient;
use crate::error::{Error, Result};
use crate::field::ScalarField;

/// Fitted far-field decay of a field.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Tail {
    /// Least-squares slope of log |profile| vs log r over the fit window.
    Decay { exponent: f64, window: (f64, f64) },
    /// The angular-L2 profile sits below the floor on the outer grid.
    NumericallyZero,
}

impl Tail {
    pub fn exponent(&self) -> Option<f64> {
        match *self {
            Tail::Decay { exponent, .. } => Some(exponent),
            Tail::NumericallyZero => None,
        }
    }
}

const PROFILE_FLOOR_REL: f64 = 1e-14;
const MIN_FIT_POINTS: usize = 8;

/// Angular-L2 radial profile sqrt(mean_theta f^2).
pub fn angular_profile(f: &ScalarField) -> Vec<f64> {
    let nt = f.grid().n_theta();
    (0..f.grid().n_r())
        .map(|j| {
            let row = &f.values()[j * nt..(j + 1) * nt];
            (row.iter().map(|&v| v * v).sum::<f64>() / nt as f64).sqrt()
        })
        .collect()
}

/// Least-squares decay exponent of the angular-L2 profile on the outer
/// radial window. Falls back to the outermost window where the profile is
/// above the relative floor, so super-polynomially decaying fields report
/// steep slopes instead of noise.
pub fn tail_exponent(f: &ScalarField) -> Tail {
    let grid = f.grid();
    let n = grid.n_r();
    let profile = angular_profile(f);
    let peak = profile.iter().fold(0.0f64, |m, &p| m.max(p));
    if peak == 0.0 {
        return Tail::NumericallyZero;
    }
    let floor = PROFILE_FLOOR_REL * peak;

    // Usable nodes on the outer half of the grid.
    let usable: Vec<usize> = (n / 2..n).filter(|&j| profile[j] > floor).collect();
    if usable.len() < MIN_FIT_POINTS {
        return Tail::NumericallyZero;
    }
    // Prefer the outer quarter when it is fully usable; otherwise take the
    // outermost usable run of comparable length.
    let take = (n / 4).max(MIN_FIT_POINTS).min(usable.len());
    let window = &usable[usable.len() - take..];

    let r = grid.r_nodes();
    let mut sx = 0.0;
    let mut sy = 0.0;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for &j in window {
        let x = r[j].ln();
        let y = profile[j].ln();
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    let m = window.len() as f64;
    let slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    Tail::Decay {
        exponent: slope,
        window: (r[window[0]], r[*window.last().unwrap()]),
    }
}

/// Weighted L2 norm with weight (1+r^2)^{w/2}.
fn weighted_l2(f: &ScalarField, w: f64) -> f64 {
    let grid = f.grid();
    let nt = grid.n_theta();
    let tw = grid.theta_weight();
    let mut acc = 0.0;
    for (j, (&wr, &r)) in grid
        .radial_weights()
        .iter()
        .zip(grid.r_nodes())
        .enumerate()
    {
        let weight = (1.0 + r * r).powf(w);
        let row = &f.values()[j * nt..(j + 1) * nt];
        let s: f64 = row.iter().map(|&v| v * v).sum();
        acc += wr * tw * weight * s;
    }
    acc.sqrt()
}

/// Discrete H^m_delta norm per the weighted-space definition:
/// sum over |beta| <= m of || (1+|x|^2)^{(delta+|beta|)/2} D^beta f ||_L2.
/// Mixed second derivatives use the canonical order d_2 d_1.
pub fn sobolev_norm(f: &ScalarField, m: usize, delta: f64) -> Result<f64> {
    if m > 2 {
        return Err(Error::UnsupportedOrder { m });
    }
    if let Tail::Decay { exponent, .. } = tail_exponent(f) {
        let required = -1.0 - delta;
        if exponent >= required {
            return Err(Error::DivergentTail {
                exponent,
                required,
            });
        }
    }
    Ok(sobolev_norm_raw(f, m, delta))
}

/// The norm without the tail diagnostic, for internal iteration metrics
/// where the integrand family is already validated.
pub(crate) fn sobolev_norm_raw(f: &ScalarField, m: usize, delta: f64) -> f64 {
    let mut total = weighted_l2(f, delta);
    if m >= 1 {
        let (d1, d2) = gradient(f);
        total += weighted_l2(&d1, delta + 1.0) + weighted_l2(&d2, delta + 1.0);
        if m >= 2 {
            let (d11, d21) = gradient(&d1);
            let (_, d22) = gradient(&d2);
            total += weighted_l2(&d11, delta + 2.0)
                + weighted_l2(&d21, delta + 2.0)
                + weighted_l2(&d22, delta + 2.0);
        }
    }
    total
}

/// H^m_delta norm together with the tail diagnostic used to qualify the
/// outer truncation.
#[derive(Clone, Debug, serde::Serialize)]
pub struct NormReport {
    pub value: f64,
    pub tail_exponent: Option<f64>,
    /// Margin between the fitted decay and the integrability requirement;
    /// positive means the truncated integral converged.
    pub tail_margin: Option<f64>,
}

pub fn sobolev_norm_report(f: &ScalarField, m: usize, delta: f64) -> Result<NormReport> {
    let value = sobolev_norm(f, m, delta)?;
    let tail = tail_exponent(f);
    let (tail_exponent, tail_margin) = match tail {
        Tail::Decay { exponent, .. } => (Some(exponent), Some(-1.0 - delta - exponent)),
        Tail::NumericallyZero => (None, None),
    };
    Ok(NormReport {
        value,
        tail_exponent,
        tail_margin,
    })
}
