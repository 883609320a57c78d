//! Thin wrappers over `puruspe` with the argument ranges this crate needs.

use std::f64::consts::PI;

pub fn gamma(x: f64) -> f64 {
    puruspe::gamma(x)
}

pub fn ln_gamma(x: f64) -> f64 {
    puruspe::ln_gamma(x)
}

/// Bessel function of the first kind, order `nu >= 0`, argument `x >= 0`.
pub fn bessel_j(nu: f64, x: f64) -> f64 {
    if x == 0.0 {
        return if nu == 0.0 { 1.0 } else { 0.0 };
    }
    if x > 2000.0 {
        return bessel_j_asymptotic(nu, x);
    }
    puruspe::Jnu_Ynu(nu, x).0
}

fn bessel_j_asymptotic(nu: f64, x: f64) -> f64 {
    let mu = 4.0 * nu * nu;
    let t = 8.0 * x;
    let p = 1.0 - (mu - 1.0) * (mu - 9.0) / (2.0 * t * t)
        + (mu - 1.0) * (mu - 9.0) * (mu - 25.0) * (mu - 49.0) / (24.0 * t.powi(4));
    let q = (mu - 1.0) / t - (mu - 1.0) * (mu - 9.0) * (mu - 25.0) / (6.0 * t.powi(3));
    let w = x - 0.5 * nu * PI - 0.25 * PI;
    (2.0 / (PI * x)).sqrt() * (p * w.cos() - q * w.sin())
}

/// Modified Bessel function of the second kind, `x > 0`.
pub fn bessel_k(nu: f64, x: f64) -> f64 {
    let nu = nu.abs();
    if x > 700.0 {
        return 0.0;
    }
    puruspe::Inu_Knu(nu, x).1
}

/// Surface area of the unit sphere in `R^m`.
pub fn sphere_area(m: usize) -> f64 {
    2.0 * PI.powf(m as f64 / 2.0) / gamma(m as f64 / 2.0)
}

/// Angular average of `e^{i k.x}` over the unit sphere in `R^n`, as a
/// function of `x = |k||x|`: cos for n=1, J0 for n=2, sin(x)/x for n=3.
pub fn radial_kernel(n: usize, x: f64) -> f64 {
    let x = x.abs();
    let half = n as f64 / 2.0;
    if x < 0.5 {
        let mut term = 1.0;
        let mut sum = 1.0;
        let z = -0.25 * x * x;
        for k in 1..12 {
            term *= z / (k as f64 * (half + k as f64 - 1.0));
            sum += term;
        }
        return sum;
    }
    match n {
        1 => x.cos(),
        3 => x.sin() / x,
        _ => gamma(half) * (2.0 / x).powf(half - 1.0) * bessel_j(half - 1.0, x),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::{integrate, integrate_to_infinity, Tolerance};

    #[test]
    fn bessel_j0_matches_integral_representation() {
        for &x in &[0.3, 2.5, 11.0, 40.0] {
            let r = integrate(|t| (x * t.sin()).cos(), 0.0, PI, Tolerance::new(1e-13, 1e-12)).unwrap();
            assert!((bessel_j(0.0, x) - r.value / PI).abs() < 1e-12, "x={x}");
        }
    }

    #[test]
    fn bessel_k_matches_integral_representation() {
        // K_nu(x) = int_0^inf e^{-x cosh t} cosh(nu t) dt
        for &(nu, x) in &[(1.0 / 3.0, 0.2), (0.5, 1.0), (0.75, 3.0), (1.3, 0.05)] {
            let r = integrate_to_infinity(
                |t: f64| (-x * t.cosh()).exp() * (nu * t).cosh(),
                0.0,
                1.0,
                Tolerance::new(1e-14, 1e-12),
            )
            .unwrap();
            let k = bessel_k(nu, x);
            assert!(((k - r.value) / r.value).abs() < 1e-10, "nu={nu} x={x}: {k} vs {}", r.value);
        }
    }

    #[test]
    fn asymptotic_branch_at_switch_point() {
        // reference values at x = 2000 from 30-digit arithmetic
        for &(nu, exact) in &[(0.0, 0.00709834183319962), (0.5, 0.016593059088036), (1.0, 0.0163701415228542)] {
            let b = bessel_j_asymptotic(nu, 2000.0);
            assert!((b - exact).abs() < 1e-14, "nu={nu}: {b} vs {exact}");
            let a = puruspe::Jnu_Ynu(nu, 2000.0).0;
            assert!((a - exact).abs() < 1e-11, "nu={nu}: {a} vs {exact}");
        }
    }

    #[test]
    fn radial_kernel_branches_agree() {
        for n in 1..=4 {
            let series = radial_kernel(n, 0.4999999);
            let direct = match n {
                1 => 0.4999999f64.cos(),
                3 => 0.4999999f64.sin() / 0.4999999,
                _ => gamma(n as f64 / 2.0)
                    * (2.0 / 0.4999999f64).powf(n as f64 / 2.0 - 1.0)
                    * bessel_j(n as f64 / 2.0 - 1.0, 0.4999999),
            };
            assert!((series - direct).abs() < 1e-13, "n={n}");
        }
    }

    #[test]
    fn sphere_areas() {
        assert!((sphere_area(1) - 2.0).abs() < 1e-14);
        assert!((sphere_area(2) - 2.0 * PI).abs() < 1e-13);
        assert!((sphere_area(3) - 4.0 * PI).abs() < 1e-13);
    }
}
