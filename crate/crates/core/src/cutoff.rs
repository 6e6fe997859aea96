//! The radial cutoff: smooth, identically 0 for r <= 1 and 1 for r >= 2,
//! built from the exponential bump sigma(t) = exp(-1/t).

/// Below this argument exp(-1/t) underflows; return exact zeros to keep the
/// derivative formulas free of inf * 0.
const T_FLOOR: f64 = 1.0 / 700.0;

fn sigma(t: f64) -> f64 {
    if t <= T_FLOOR {
        0.0
    } else {
        (-1.0 / t).exp()
    }
}

fn sigma_prime(t: f64) -> f64 {
    if t <= T_FLOOR {
        0.0
    } else {
        (-1.0 / t).exp() / (t * t)
    }
}

fn sigma_second(t: f64) -> f64 {
    if t <= T_FLOOR {
        0.0
    } else {
        (-1.0 / t).exp() * (1.0 / t.powi(4) - 2.0 / t.powi(3))
    }
}

/// Transition profile S on [0, 1]: S = sigma(t) / (sigma(t) + sigma(1-t)).
fn s(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let a = sigma(t);
        let b = sigma(1.0 - t);
        a / (a + b)
    }
}

fn s_prime(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        0.0
    } else {
        let a = sigma(t);
        let b = sigma(1.0 - t);
        let d = a + b;
        (sigma_prime(t) * b + a * sigma_prime(1.0 - t)) / (d * d)
    }
}

fn s_second(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        0.0
    } else {
        let a = sigma(t);
        let b = sigma(1.0 - t);
        let d = a + b;
        let n = sigma_prime(t) * b + a * sigma_prime(1.0 - t);
        let n_prime = sigma_second(t) * b - a * sigma_second(1.0 - t);
        let d_prime = sigma_prime(t) - sigma_prime(1.0 - t);
        n_prime / (d * d) - 2.0 * n * d_prime / (d * d * d)
    }
}

/// chi(r): 0 for r <= 1, 1 for r >= 2, smooth monotone in between.
pub fn chi(r: f64) -> f64 {
    s(r - 1.0)
}

pub fn chi_prime(r: f64) -> f64 {
    s_prime(r - 1.0)
}

pub fn chi_second(r: f64) -> f64 {
    s_second(r - 1.0)
}

/// chi(r) ln r, exactly zero for r <= 1.
pub fn chi_log(r: f64) -> f64 {
    if r <= 1.0 {
        0.0
    } else {
        chi(r) * r.ln()
    }
}

/// chi(r)/r, exactly zero for r <= 1.
pub fn chi_over_r(r: f64) -> f64 {
    if r <= 1.0 {
        0.0
    } else {
        chi(r) / r
    }
}

/// chi(r)/r^2, exactly zero for r <= 1.
pub fn chi_over_r2(r: f64) -> f64 {
    if r <= 1.0 {
        0.0
    } else {
        chi(r) / (r * r)
    }
}

/// Laplacian of chi(r) ln r: supported in [1, 2].
pub fn laplacian_chi_log(r: f64) -> f64 {
    if !(1.0..=2.0).contains(&r) {
        return 0.0;
    }
    chi_second(r) * r.ln() + chi_prime(r) * r.ln() / r + 2.0 * chi_prime(r) / r
}

/// Radial factor of the Laplacian of chi(r) cos(theta)/r: supported in [1, 2].
pub fn laplacian_chi_dipole(r: f64) -> f64 {
    if !(1.0..=2.0).contains(&r) {
        return 0.0;
    }
    chi_second(r) / r - chi_prime(r) / (r * r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn plateau_values() {
        assert_eq!(chi(0.5), 0.0);
        assert_eq!(chi(1.0), 0.0);
        assert_eq!(chi(2.0), 1.0);
        assert_eq!(chi(10.0), 1.0);
        assert_relative_eq!(chi(1.5), 0.5, epsilon = 1e-14);
        assert_relative_eq!(chi_prime(1.5), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn monotone_and_bounded() {
        let mut prev = -1.0;
        for i in 0..=1000 {
            let r = 0.5 + 2.5 * i as f64 / 1000.0;
            let c = chi(r);
            assert!((0.0..=1.0).contains(&c));
            assert!(c >= prev - 1e-15);
            assert!(chi_prime(r) >= 0.0);
            prev = c;
        }
    }

    #[test]
    fn derivatives_match_central_differences() {
        let h = 1e-5;
        for &r in &[1.1, 1.3, 1.5, 1.62, 1.9] {
            let num1 = (chi(r + h) - chi(r - h)) / (2.0 * h);
            assert_relative_eq!(chi_prime(r), num1, epsilon = 1e-6, max_relative = 1e-6);
            let num2 = (chi_prime(r + h) - chi_prime(r - h)) / (2.0 * h);
            assert_relative_eq!(chi_second(r), num2, epsilon = 1e-4, max_relative = 1e-5);
        }
    }

    #[test]
    fn support_of_derivative() {
        for &r in &[0.0, 0.99, 1.0, 2.0, 2.01, 50.0] {
            assert_eq!(chi_prime(r), 0.0, "r = {r}");
            assert_eq!(chi_second(r), 0.0);
        }
    }

    #[test]
    fn log_and_dipole_profiles_vanish_inside() {
        for &r in &[0.2, 0.7, 1.0] {
            assert_eq!(chi_log(r), 0.0);
            assert_eq!(chi_over_r(r), 0.0);
        }
    }
}
