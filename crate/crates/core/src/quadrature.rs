//! Superlinear Taylor remainder of `z -> |z|^{2 sigma} z`.
//!
//! For `z_theta = z0 + theta z*`,
//! `G_sigma = (sigma+1) z* \int_0^1 (|z_theta|^{2 sigma} - |z0|^{2 sigma}) dtheta
//!          + sigma conj(z*) \int_0^1 (|z_theta|^{2 sigma-2} z_theta^2 - |z0|^{2 sigma-2} z0^2) dtheta`,
//! so that `|z0+z*|^{2 sigma}(z0+z*) = |z0|^{2 sigma} z0 + (sigma+1)|z0|^{2 sigma} z*
//! + sigma |z0|^{2 sigma-2} z0^2 conj(z*) + G_sigma`.

use crate::error::{invalid, Result};
use crate::spectral::C64;

const GL8_NODES: [f64; 4] = [0.1834346424956498, 0.5255324099163290, 0.7966664774136267, 0.9602898564975363];
const GL8_WEIGHTS: [f64; 4] = [0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763];

/// `|z|^p` with `0^0 = 1`.
#[inline]
fn abs_pow(z: C64, p: f64) -> f64 {
    if p == 0.0 {
        1.0
    } else {
        z.norm_sqr().powf(0.5 * p)
    }
}

#[inline]
fn integrand(z0: C64, zs: C64, sigma: f64, theta: f64, base_real: f64, base_complex: C64) -> C64 {
    let z = z0 + zs * theta;
    let r2 = z.norm_sqr();
    let a = r2.powf(sigma);
    let b = if sigma == 1.0 { z * z } else { r2.powf(sigma - 1.0) * z * z };
    zs * ((sigma + 1.0) * (a - base_real)) + zs.conj() * (sigma * (b - base_complex))
}

fn gauss_legendre(f: &impl Fn(f64) -> C64, a: f64, b: f64) -> C64 {
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    let mut acc = C64::new(0.0, 0.0);
    for (x, w) in GL8_NODES.iter().zip(GL8_WEIGHTS) {
        acc += (f(mid - half * x) + f(mid + half * x)) * w;
    }
    acc * half
}

/// Closed form for `sigma = 1`: `conj(z0) z*^2 + 2 z0 |z*|^2 + |z*|^2 z*`.
#[inline]
pub fn taylor_g_cubic(z0: C64, zs: C64) -> C64 {
    let m = zs.norm_sqr();
    z0.conj() * zs * zs + z0 * (2.0 * m) + zs * m
}

/// 8-node Gauss-Legendre in `theta`. Panels are graded geometrically
/// towards the point of `[0, 1]` closest to the origin when `z_theta`
/// passes near it, where the integrand loses smoothness.
pub fn taylor_g_quadrature(z0: C64, zs: C64, sigma: f64) -> C64 {
    let m = zs.norm_sqr();
    if m == 0.0 {
        return C64::new(0.0, 0.0);
    }
    let base_real = abs_pow(z0, 2.0 * sigma);
    let base_complex = abs_pow(z0, 2.0 * sigma - 2.0) * z0 * z0;
    let f = |theta: f64| integrand(z0, zs, sigma, theta, base_real, base_complex);
    let p = (-(z0.conj() * zs).re / m).clamp(0.0, 1.0);
    let scale = (z0 + zs * p).norm() / m.sqrt();
    let mut acc = C64::new(0.0, 0.0);
    for (a, b) in [(p, 0.0), (p, 1.0)] {
        let len = (b - a).abs();
        if len == 0.0 {
            continue;
        }
        let dir = (b - a).signum();
        let mut outer = len;
        while outer > 0.5 * scale && outer > 1e-15 {
            let inner = GRADING * outer;
            let (x0, x1) = (a + dir * inner, a + dir * outer);
            acc += gauss_legendre(&f, x0.min(x1), x0.max(x1));
            outer = inner;
        }
        let x1 = a + dir * outer;
        acc += gauss_legendre(&f, a.min(x1), a.max(x1));
    }
    acc
}

const GRADING: f64 = 0.5;

/// `G_sigma[z*]` around `z0`; closed form at `sigma = 1`.
#[inline]
pub fn taylor_g_unchecked(z0: C64, zs: C64, sigma: f64) -> C64 {
    if sigma == 1.0 {
        taylor_g_cubic(z0, zs)
    } else {
        taylor_g_quadrature(z0, zs, sigma)
    }
}

pub fn taylor_g_pointwise(z0: C64, zs: C64, sigma: f64) -> Result<C64> {
    if !(sigma.is_finite() && sigma >= 1.0) {
        return invalid(format!("taylor remainder needs sigma >= 1, got {sigma}"));
    }
    if !(z0.re.is_finite() && z0.im.is_finite() && zs.re.is_finite() && zs.im.is_finite()) {
        return invalid("taylor remainder needs finite arguments");
    }
    Ok(taylor_g_unchecked(z0, zs, sigma))
}

/// `|z1|^{2 sigma} z1 - (|z0|^{2 sigma} z0 + linear part + G)` with `z1 = z0 + z*`.
pub fn identity_defect(z0: C64, zs: C64, sigma: f64, g: C64) -> C64 {
    let z1 = z0 + zs;
    let lhs = abs_pow(z1, 2.0 * sigma) * z1;
    let linear = abs_pow(z0, 2.0 * sigma) * z0
        + zs * ((sigma + 1.0) * abs_pow(z0, 2.0 * sigma))
        + zs.conj() * (sigma * abs_pow(z0, 2.0 * sigma - 2.0)) * z0 * z0;
    lhs - linear - g
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Adaptive Simpson oracle on the same integrand.
    fn adaptive(z0: C64, zs: C64, sigma: f64, tol: f64) -> C64 {
        let br = abs_pow(z0, 2.0 * sigma);
        let bc = abs_pow(z0, 2.0 * sigma - 2.0) * z0 * z0;
        let f = |t: f64| integrand(z0, zs, sigma, t, br, bc);
        fn simpson(f: &dyn Fn(f64) -> C64, a: f64, b: f64, fa: C64, fm: C64, fb: C64, whole: C64, tol: f64, depth: u32) -> C64 {
            let m = 0.5 * (a + b);
            let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
            let (flm, frm) = (f(lm), f(rm));
            let left = (fa + flm * 4.0 + fm) * ((m - a) / 6.0);
            let right = (fm + frm * 4.0 + fb) * ((b - m) / 6.0);
            let delta = left + right - whole;
            if depth == 0 || delta.norm() <= 15.0 * tol {
                left + right + delta / 15.0
            } else {
                simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                    + simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
            }
        }
        let (fa, fm, fb) = (f(0.0), f(0.5), f(1.0));
        let whole = (fa + fm * 4.0 + fb) / 6.0;
        simpson(&f, 0.0, 1.0, fa, fm, fb, whole, tol, 40)
    }

    #[test]
    fn zero_increment() {
        for s in [1.0, 1.5] {
            assert_eq!(taylor_g_pointwise(C64::new(0.3, 2.0), C64::new(0.0, 0.0), s).unwrap(), C64::new(0.0, 0.0));
        }
    }

    #[test]
    fn cubic_unit_example() {
        let g = taylor_g_pointwise(C64::new(1.0, 0.0), C64::new(1.0, 0.0), 1.0).unwrap();
        assert!((g - C64::new(4.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn fractional_example_matches_adaptive_oracle() {
        let (z0, zs) = (C64::new(1.0, 1.0), C64::new(0.3, -0.2));
        let g = taylor_g_pointwise(z0, zs, 1.5).unwrap();
        assert!((g - adaptive(z0, zs, 1.5, 1e-15)).norm() < 1e-10);
        assert!(identity_defect(z0, zs, 1.5, g).norm() < 1e-10);
    }

    #[test]
    fn zero_base_point_is_accepted() {
        let zs = C64::new(0.4, 0.1);
        for s in [1.0, 1.3, 1.5] {
            let g = taylor_g_pointwise(C64::new(0.0, 0.0), zs, s).unwrap();
            assert!(identity_defect(C64::new(0.0, 0.0), zs, s, g).norm() < 1e-10);
        }
        assert!(taylor_g_pointwise(C64::new(1.0, 0.0), zs, 0.5).is_err());
    }

    proptest! {
        #[test]
        fn defining_identity(a in -2.0f64..2.0, b in -2.0f64..2.0, c in -2.0f64..2.0, d in -2.0f64..2.0,
                             sigma in prop::sample::select(vec![1.0, 1.25, 1.5, 1.75])) {
            let (z0, zs) = (C64::new(a, b), C64::new(c, d));
            let g = taylor_g_pointwise(z0, zs, sigma).unwrap();
            prop_assert!(identity_defect(z0, zs, sigma, g).norm() < 1e-10);
        }

        #[test]
        fn cubic_closed_form_matches_quadrature(a in -3.0f64..3.0, b in -3.0f64..3.0, c in -3.0f64..3.0, d in -3.0f64..3.0) {
            let (z0, zs) = (C64::new(a, b), C64::new(c, d));
            prop_assert!((taylor_g_cubic(z0, zs) - taylor_g_quadrature(z0, zs, 1.0)).norm() < 1e-10);
        }

        #[test]
        fn quadratic_smallness(a in 0.5f64..2.0, c in -1.0f64..1.0, d in -1.0f64..1.0, eps in 1e-4f64..1e-1) {
            let (z0, zs) = (C64::new(a, 0.0), C64::new(c, d) * eps);
            let g = taylor_g_pointwise(z0, zs, 1.5).unwrap();
            prop_assert!(g.norm() <= 10.0 * zs.norm_sqr() * (1.0 + a));
        }
    }
}
