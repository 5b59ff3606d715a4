//! Split-step integrators for the transformed equation
//! `i v_t - H_0 v = sum_j lambda_j t^{sigma_j-2} |v|^{2 sigma_j} v` and the
//! original equation `i u_t - H_0 u = lambda1 |u|^2 u + lambda2 |u|^{2 sigma} u`.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{invalid, LabError, Result};
use crate::fixedpoint::Trajectory;
use crate::params::ModelParams;
use crate::profiles::ProfileModel;
use crate::spectral::{ComplexField, Grid, GridSpec, C64};

fn check_finite(state: &[C64], time: f64, what: &str) -> Result<()> {
    match state.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
        Some(j) => Err(LabError::NumericalAbort { node: j, time, detail: format!("{what}: non-finite sample") }),
        None => Ok(()),
    }
}

/// Geometric steps from `t0` to `t1`; each step is
/// `K(h/2) N(t, t+h) K(h/2)` with the exact phase rotation
/// `N: v -> v exp(-i sum_j lambda_j |v|^{2 sigma_j} \int_t^{t+h} s^{sigma_j-2} ds)`.
pub fn evolve_v(v0: &ComplexField, t0: f64, t1: f64, steps: usize, params: &ModelParams) -> Result<ComplexField> {
    if !(t0 > 0.0 && t1 > t0 && t1.is_finite()) {
        return invalid(format!("evolve_v needs 0 < t0 < t1, got t0 = {t0}, t1 = {t1}"));
    }
    if steps == 0 {
        return invalid("evolve_v needs at least one step");
    }
    let grid = v0.grid().clone();
    let couplings = params.couplings();
    let log_ratio = (t1 / t0).ln();
    let mut state = v0.samples().to_vec();
    let mut ta = t0;
    for k in 1..=steps {
        let tb = if k == steps { t1 } else { t0 * (log_ratio * k as f64 / steps as f64).exp() };
        let half = grid.free_weights(0.5 * (tb - ta));
        state = grid.filter(&state, &half);
        if !couplings.is_empty() {
            let integrals: Vec<(f64, f64)> =
                couplings.iter().map(|c| (c.lambda * c.weight_integral(ta, tb), c.sigma)).collect();
            for z in state.iter_mut() {
                let r2 = z.norm_sqr();
                let phase: f64 = integrals.iter().map(|&(w, s)| w * if s == 1.0 { r2 } else { r2.powf(s) }).sum();
                *z *= C64::from_polar(1.0, -phase);
            }
        }
        state = grid.filter(&state, &half);
        ta = tb;
    }
    check_finite(&state, t1, "evolve_v")?;
    Ok(ComplexField::from_raw(&grid, state))
}

/// Uniform Strang steps from `t0` to `t1` (either direction). Steps of
/// opposite sign invert each other exactly up to rounding.
pub fn evolve_u(u0: &ComplexField, t0: f64, t1: f64, steps: usize, params: &ModelParams) -> Result<ComplexField> {
    if !(t0.is_finite() && t1.is_finite()) {
        return invalid("evolve_u needs finite times");
    }
    if steps == 0 {
        return invalid("evolve_u needs at least one step");
    }
    let grid = u0.grid().clone();
    let h = (t1 - t0) / steps as f64;
    let half = grid.free_weights(0.5 * h);
    let (l1, l2, sigma) = (params.lambda1, params.lambda2, params.sigma);
    let mut state = u0.samples().to_vec();
    for _ in 0..steps {
        state = grid.filter(&state, &half);
        if l1 != 0.0 || l2 != 0.0 {
            for z in state.iter_mut() {
                let r2 = z.norm_sqr();
                let phase = h * (l1 * r2 + if l2 != 0.0 { l2 * r2.powf(sigma) } else { 0.0 });
                *z *= C64::from_polar(1.0, -phase);
            }
        }
        state = grid.filter(&state, &half);
    }
    check_finite(&state, t1, "evolve_u")?;
    Ok(ComplexField::from_raw(&grid, state))
}

/// Trigonometric interpolation of `f` onto a grid with `factor` times as
/// many nodes over the same interval.
pub fn refine_spectral(f: &ComplexField, factor: usize) -> Result<ComplexField> {
    if factor == 0 || !factor.is_power_of_two() {
        return invalid(format!("refinement factor {factor} must be a power of two"));
    }
    let spec = f.spec();
    let n = spec.n_points();
    let fine = Grid::with_size(n * factor, spec.half_width())?;
    let coeffs = f.grid().dft(f.samples());
    let mut padded = vec![C64::new(0.0, 0.0); n * factor];
    for (k, c) in coeffs.iter().enumerate() {
        if k < n / 2 {
            padded[k] = *c;
        } else if k > n / 2 {
            padded[k + (factor - 1) * n] = *c;
        } else if factor == 1 {
            padded[k] = *c;
        } else {
            padded[k] = *c * 0.5;
            padded[k + (factor - 1) * n] = *c * 0.5;
        }
    }
    let mut samples = fine.idft(padded);
    samples.iter_mut().for_each(|z| *z *= factor as f64);
    Ok(ComplexField::from_raw(&fine, samples))
}

/// Smallest power of two `m` for which the u-grid built by [`u_from_v`]
/// resolves the chirp `e^{i x^2 / (2 t_u)}` together with the band of `v`:
/// `pi m n / (2 t_u L) >= L + pi n / (2 L t_u)`.
pub fn u_oversample(spec: GridSpec, t_u: f64) -> usize {
    let (n, l) = (spec.n_points() as f64, spec.half_width());
    let need = 2.0 * t_u * l * l / (std::f64::consts::PI * n) + 1.0;
    (need.ceil().max(1.0) as usize).next_power_of_two()
}

/// `u(t_u) = M(t_u) D(t_u) conj(v(1/t_u))` on the grid
/// `[-t_u L, t_u L)` with `oversample * n` nodes.
pub fn u_from_v(v: &ComplexField, t_u: f64, oversample: usize) -> Result<ComplexField> {
    if !(t_u.is_finite() && t_u > 0.0) {
        return invalid(format!("u_from_v needs t_u > 0, got {t_u}"));
    }
    let fine = refine_spectral(v, oversample)?;
    let spec = fine.spec();
    let ugrid: Arc<Grid> = Grid::with_size(spec.n_points(), spec.half_width() * t_u)?;
    let pre = C64::new(0.0, t_u).powf(-0.5);
    let samples = ugrid
        .nodes()
        .iter()
        .zip(fine.samples())
        .map(|(&x, z)| pre * C64::from_polar(1.0, x * x / (2.0 * t_u)) * z.conj())
        .collect();
    ComplexField::from_samples(&ugrid, samples)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct EndpointReport {
    pub t_u: f64,
    pub oversample: usize,
    pub u_grid_points: usize,
    pub u_half_width: f64,
    pub mass_v: f64,
    pub mass_u_start: f64,
    pub mass_u0: f64,
    pub phi_norm: f64,
    pub mass_defect: f64,
}

/// Builds `u(1/T)` from the constructed `v(T)` and integrates the original
/// equation back to `t = 0`. `oversample = None` picks [`u_oversample`].
pub fn wave_operator_endpoint(v_t: &ComplexField, t_max: f64, phi_norm: f64, oversample: Option<usize>, steps: usize, params: &ModelParams) -> Result<(ComplexField, EndpointReport)> {
    let t_u = 1.0 / t_max;
    let oversample = oversample.unwrap_or_else(|| u_oversample(v_t.spec(), t_u));
    let u_start = u_from_v(v_t, t_u, oversample)?;
    let u0 = evolve_u(&u_start, t_u, 0.0, steps, params)?;
    let spec = u0.spec();
    let mass_u0 = u0.l2_norm();
    let report = EndpointReport {
        t_u,
        oversample,
        u_grid_points: spec.n_points(),
        u_half_width: spec.half_width(),
        mass_v: v_t.l2_norm(),
        mass_u_start: u_start.l2_norm(),
        mass_u0,
        phi_norm,
        mass_defect: (mass_u0 - phi_norm).abs(),
    };
    Ok((u0, report))
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct CrossReport {
    pub steps: usize,
    pub absolute: f64,
    pub relative: f64,
}

/// Starts `evolve_v` from the constructed `v(t_min)` and compares with the
/// constructed `v(T)`.
pub fn cross_validate(constructed: &Trajectory, model: &ProfileModel, steps: usize) -> Result<CrossReport> {
    let mesh = constructed.mesh();
    let (t_min, t_max) = (mesh.t_min(), mesh.t_max());
    let start = &model.profile_vp(t_min)? + &constructed.fields()[0];
    let target = &model.profile_vp(t_max)? + constructed.last();
    let evolved = evolve_v(&start, t_min, t_max, steps, model.params())?;
    let absolute = (&evolved - &target).l2_norm();
    let scale = target.l2_norm();
    Ok(CrossReport { steps, absolute, relative: if scale > 0.0 { absolute / scale } else { absolute } })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::ScatteringDatum;
    use crate::spectral::free_propagate;

    fn max_diff(a: &ComplexField, b: &ComplexField) -> f64 {
        a.samples().iter().zip(b.samples()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    fn gaussian(g: &Arc<Grid>) -> ComplexField {
        ComplexField::from_fn(g, |x| C64::new((-x * x / 2.0).exp(), 0.0))
    }

    #[test]
    fn uncoupled_flows_are_free() {
        let g = Grid::with_size(512, 20.0).unwrap();
        let p = ModelParams { lambda1: 0.0, lambda2: 0.0, ..ModelParams::defocusing() };
        let f = gaussian(&g);
        let v = evolve_v(&f, 0.01, 0.5, 37, &p).unwrap();
        assert!(max_diff(&v, &free_propagate(&f, 0.49).unwrap()) < 1e-12);
        let u = evolve_u(&f, 0.0, 1.0, 10, &p).unwrap();
        let a = C64::new(1.0, 1.0);
        let exact = ComplexField::from_fn(&g, |x| a.powf(-0.5) * (-x * x / (2.0 * a)).exp());
        assert!(max_diff(&u, &exact) < 1e-8);
    }

    #[test]
    fn mass_conservation() {
        let g = Grid::with_size(512, 20.0).unwrap();
        let p = ModelParams { lambda2: 0.5, ..ModelParams::defocusing() };
        let f = gaussian(&g).scale_real(2.0);
        let v = evolve_v(&f, 1e-3, 0.1, 1000, &p).unwrap();
        assert!((v.l2_norm() - f.l2_norm()).abs() <= 1e-10 * f.l2_norm());
        let u = evolve_u(&f, 0.0, 1.0, 1000, &p).unwrap();
        assert!((u.l2_norm() - f.l2_norm()).abs() <= 1e-10 * f.l2_norm());
    }

    #[test]
    fn u_flow_is_reversible() {
        let g = Grid::with_size(512, 20.0).unwrap();
        let p = ModelParams { lambda1: -1.0, lambda2: 0.5, ..ModelParams::defocusing() };
        let f = gaussian(&g);
        let there = evolve_u(&f, 0.0, 1.0, 200, &p).unwrap();
        let back = evolve_u(&there, 1.0, 0.0, 200, &p).unwrap();
        assert!(max_diff(&back, &f) < 1e-8);
    }

    #[test]
    fn both_evolvers_are_second_order() {
        let g = Grid::with_size(256, 20.0).unwrap();
        let p = ModelParams { lambda2: 0.5, ..ModelParams::defocusing() };
        let f = gaussian(&g).scale_real(1.5);
        let order = |run: &dyn Fn(usize) -> ComplexField| {
            let (a, b, c) = (run(100), run(200), run(400));
            ((&a - &b).l2_norm() / (&b - &c).l2_norm()).log2()
        };
        let ov = order(&|s| evolve_v(&f, 1e-3, 0.1, s, &p).unwrap());
        let ou = order(&|s| evolve_u(&f, 0.0, 1.0, s, &p).unwrap());
        assert!(ov >= 1.8 && ou >= 1.8, "v order {ov}, u order {ou}");
    }

    #[test]
    fn small_data_stays_near_profile() {
        let g = Grid::with_size(512, 20.0).unwrap();
        let p = ModelParams::defocusing();
        let m = ProfileModel::new(Arc::new(ScatteringDatum::gaussian(&g, 0.1, 3.0).unwrap()), p);
        let v = evolve_v(&m.profile_vp(1e-3).unwrap(), 1e-3, 0.1, 400, &p).unwrap();
        let gap = (&v - &m.profile_vp(0.1).unwrap()).l2_norm();
        assert!(gap <= 0.1f64.powf(p.beta + p.alpha / 2.0) * m.datum().phi().l2_norm());
    }

    #[test]
    fn spectral_refinement_is_exact_for_band_limited_data() {
        let g = Grid::with_size(64, 10.0).unwrap();
        let xi = 3.0 * g.spec().frequency_spacing();
        let f = ComplexField::from_fn(&g, |x| C64::from_polar(1.0, xi * x) + C64::new((2.0 * xi * x).cos(), 0.0));
        let fine = refine_spectral(&f, 4).unwrap();
        let exact = ComplexField::from_fn(fine.grid(), |x| C64::from_polar(1.0, xi * x) + C64::new((2.0 * xi * x).cos(), 0.0));
        assert!(max_diff(&fine, &exact) < 1e-12);
        assert!((fine.l2_norm() - f.l2_norm()).abs() < 1e-12);
    }

    #[test]
    fn u_bridge_preserves_mass() {
        let g = Grid::with_size(256, 20.0).unwrap();
        let v = gaussian(&g).scale(C64::new(0.3, 1.0));
        let u = u_from_v(&v, 10.0, 4).unwrap();
        assert_eq!(u.spec().n_points(), 1024);
        assert!((u.l2_norm() - v.l2_norm()).abs() < 1e-12 * v.l2_norm());
    }

    #[test]
    fn oversampling_resolves_the_chirp() {
        assert_eq!(u_oversample(GridSpec::new(1024, 20.0).unwrap(), 10.0), 4);
        assert_eq!(u_oversample(GridSpec::new(1024, 80.0).unwrap(), 10.0), 64);
    }

    #[test]
    fn free_endpoint_is_inverse_fourier_transform_of_datum() {
        // u(0) = u_+ with hat(u_+) = phi; phi = A e^{-x^2/w^2} gives u_+ = A w / sqrt(2) e^{-x^2 w^2 / 4}.
        let g = Grid::with_size(256, 20.0).unwrap();
        let p = ModelParams { lambda1: 0.0, lambda2: 0.0, ..ModelParams::defocusing() };
        let (a, w, t) = (1.5, 3.0, 0.1);
        let phi = ComplexField::from_fn(&g, |x| C64::new(a * (-(x / w).powi(2)).exp(), 0.0));
        let v_t = free_propagate(&phi.conj(), t).unwrap();
        let (u0, rep) = wave_operator_endpoint(&v_t, t, phi.l2_norm(), None, 50, &p).unwrap();
        let exact = ComplexField::from_fn(u0.grid(), |x| C64::new(a * w / 2f64.sqrt() * (-x * x * w * w / 4.0).exp(), 0.0));
        assert!(max_diff(&u0, &exact) < 1e-10, "{}", max_diff(&u0, &exact));
        assert!(rep.mass_defect < 1e-12);
    }

    #[test]
    fn rejects_bad_times() {
        let g = Grid::with_size(64, 10.0).unwrap();
        let f = gaussian(&g);
        let p = ModelParams::defocusing();
        assert!(evolve_v(&f, 0.0, 0.1, 10, &p).is_err());
        assert!(evolve_v(&f, 0.2, 0.1, 10, &p).is_err());
        assert!(evolve_u(&f, 0.0, f64::NAN, 10, &p).is_err());
    }
}
