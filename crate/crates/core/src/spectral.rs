//! Periodic spectral discretization of the line.
//!
//! A [`Grid`] samples `[-L, L)` at `n` equispaced nodes `x_j = -L + j dx`
//! with `dx = 2L / n`. Dual frequencies are `xi_k = k pi / L` in FFT order
//! (`k = 0, 1, .., n/2 - 1, -n/2, .., -1`).
//!
//! Normalization: the physical spectrum returned by
//! [`ComplexField::spectrum`] approximates the unitary Fourier transform
//! `(2 pi)^{-1/2} \int e^{-i x xi} f(x) dx` by the Riemann sum over the grid,
//! i.e. `f^_k = dx / sqrt(2 pi) * e^{-i xi_k x_0} * DFT(f)_k`. With this
//! scaling the discrete Plancherel identity
//! `sum_k |f^_k|^2 dxi = dx sum_j |f_j|^2`, `dxi = pi / L`, holds exactly.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;

use crate::error::{invalid, LabError, Result};

pub type C64 = Complex64;

/// Size and extent of the periodic truncation `[-L, L)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GridSpec {
    n_points: usize,
    half_width: f64,
}

impl GridSpec {
    pub fn new(n_points: usize, half_width: f64) -> Result<Self> {
        if n_points < 4 || !n_points.is_power_of_two() {
            return invalid(format!("grid size {n_points} is not a power of two >= 4"));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return invalid(format!("grid half width {half_width} must be positive"));
        }
        Ok(Self { n_points, half_width })
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.n_points as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        -self.half_width + j as f64 * self.spacing()
    }

    /// Frequency of DFT bin `k` (FFT ordering).
    pub fn frequency(&self, k: usize) -> f64 {
        let n = self.n_points as i64;
        let k = k as i64;
        let signed = if k < n / 2 { k } else { k - n };
        signed as f64 * std::f64::consts::PI / self.half_width
    }

    /// Spacing of the dual lattice, `pi / L`.
    pub fn frequency_spacing(&self) -> f64 {
        std::f64::consts::PI / self.half_width
    }

    pub fn max_frequency(&self) -> f64 {
        self.n_points as f64 / 2.0 * self.frequency_spacing()
    }
}

/// A [`GridSpec`] together with its node/frequency tables and FFT plans.
///
/// Immutable after construction; share it behind an `Arc`.
pub struct Grid {
    spec: GridSpec,
    nodes: Vec<f64>,
    frequencies: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid").field("spec", &self.spec).finish()
    }
}

impl Grid {
    pub fn new(spec: GridSpec) -> Arc<Self> {
        let n = spec.n_points();
        let mut planner = FftPlanner::new();
        Arc::new(Self {
            spec,
            nodes: (0..n).map(|j| spec.node(j)).collect(),
            frequencies: (0..n).map(|k| spec.frequency(k)).collect(),
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        })
    }

    pub fn with_size(n_points: usize, half_width: f64) -> Result<Arc<Self>> {
        Ok(Self::new(GridSpec::new(n_points, half_width)?))
    }

    pub fn spec(&self) -> GridSpec {
        self.spec
    }

    pub fn len(&self) -> usize {
        self.spec.n_points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn spacing(&self) -> f64 {
        self.spec.spacing()
    }

    /// Unnormalized forward DFT.
    pub(crate) fn dft(&self, samples: &[C64]) -> Vec<C64> {
        let mut buf = samples.to_vec();
        self.forward.process(&mut buf);
        buf
    }

    /// Inverse of [`Grid::dft`] (includes the `1/n`).
    pub(crate) fn idft(&self, coeffs: Vec<C64>) -> Vec<C64> {
        let mut buf = coeffs;
        self.inverse.process(&mut buf);
        let scale = 1.0 / self.len() as f64;
        buf.iter_mut().for_each(|z| *z *= scale);
        buf
    }

    /// Applies `weights[k]` to DFT bin `k` of `samples`.
    pub(crate) fn filter(&self, samples: &[C64], weights: &[C64]) -> Vec<C64> {
        let mut coeffs = self.dft(samples);
        coeffs.iter_mut().zip(weights).for_each(|(c, w)| *c *= w);
        self.idft(coeffs)
    }

    /// Weights of the free flow `e^{-i t xi^2 / 2}` for every bin.
    pub(crate) fn free_weights(&self, t: f64) -> Vec<C64> {
        self.frequencies
            .iter()
            .map(|&xi| C64::from_polar(1.0, -0.5 * t * xi * xi))
            .collect()
    }
}

/// Complex samples on a grid.
#[derive(Clone)]
pub struct ComplexField {
    grid: Arc<Grid>,
    samples: Vec<C64>,
}

impl fmt::Debug for ComplexField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ComplexField")
            .field("grid", &self.grid.spec)
            .field("l2", &self.l2_norm())
            .finish()
    }
}

impl ComplexField {
    pub fn from_samples(grid: &Arc<Grid>, samples: Vec<C64>) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(LabError::GridMismatch(format!(
                "{} samples for a grid of {} nodes",
                samples.len(),
                grid.len()
            )));
        }
        if let Some(j) = samples.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return invalid(format!("non-finite sample at node {j}"));
        }
        Ok(Self { grid: Arc::clone(grid), samples })
    }

    /// Samples `f(x_j)`. Panics if `f` produces a non-finite value.
    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(f64) -> C64) -> Self {
        let samples = grid.nodes().iter().map(|&x| f(x)).collect();
        Self::from_samples(grid, samples).expect("from_fn: non-finite sample")
    }

    pub fn zeros(grid: &Arc<Grid>) -> Self {
        Self { grid: Arc::clone(grid), samples: vec![C64::new(0.0, 0.0); grid.len()] }
    }

    /// Internal constructor for results of arithmetic that cannot introduce
    /// non-finite values by themselves.
    pub(crate) fn from_raw(grid: &Arc<Grid>, samples: Vec<C64>) -> Self {
        debug_assert_eq!(samples.len(), grid.len());
        Self { grid: Arc::clone(grid), samples }
    }

    /// Band-limited random field: independent complex Gaussian-like
    /// coefficients on `|xi| <= cutoff`, modulated by a real Gaussian
    /// envelope of width `envelope` so the field decays before the boundary.
    pub fn random_band_limited<R: Rng>(
        grid: &Arc<Grid>,
        rng: &mut R,
        cutoff: f64,
        envelope: f64,
    ) -> Self {
        let modes: Vec<(f64, C64)> = grid
            .frequencies()
            .iter()
            .filter(|xi| xi.abs() <= cutoff)
            .map(|&xi| (xi, C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))))
            .collect();
        Self::from_fn(grid, |x| {
            let carrier: C64 = modes.iter().map(|&(xi, c)| c * C64::from_polar(1.0, xi * x)).sum();
            carrier * (-(x / envelope).powi(2)).exp()
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn spec(&self) -> GridSpec {
        self.grid.spec
    }

    pub fn samples(&self) -> &[C64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<C64> {
        self.samples
    }

    pub fn same_grid(&self, other: &ComplexField) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || self.grid.spec == other.grid.spec
    }

    pub fn ensure_same_grid(&self, other: &ComplexField) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(LabError::GridMismatch(format!(
                "{:?} vs {:?}",
                self.grid.spec, other.grid.spec
            )))
        }
    }

    pub fn is_finite(&self) -> bool {
        self.samples.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Discrete L² norm `(dx sum |f_j|^2)^{1/2}`.
    pub fn l2_norm(&self) -> f64 {
        (self.grid.spacing() * self.samples.iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt()
    }

    pub fn linf_norm(&self) -> f64 {
        self.samples.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `<f, g> = \int f conj(g) dx` by grid quadrature.
    pub fn inner(&self, other: &ComplexField) -> C64 {
        assert!(self.same_grid(other), "inner: grid mismatch");
        let s: C64 = self.samples.iter().zip(&other.samples).map(|(a, b)| a * b.conj()).sum();
        s * self.grid.spacing()
    }

    /// Physical spectrum in FFT order (see module docs for the scaling).
    pub fn spectrum(&self) -> Vec<C64> {
        let spec = self.grid.spec;
        let scale = spec.spacing() / (2.0 * std::f64::consts::PI).sqrt();
        let x0 = spec.node(0);
        self.grid
            .dft(&self.samples)
            .into_iter()
            .zip(self.grid.frequencies())
            .map(|(c, &xi)| c * scale * C64::from_polar(1.0, -xi * x0))
            .collect()
    }

    /// `sum_k |f^_k|^2 dxi`, the Plancherel side of the squared L² norm.
    pub fn spectral_l2_norm(&self) -> f64 {
        let dxi = self.grid.spec.frequency_spacing();
        (self.spectrum().iter().map(|c| c.norm_sqr()).sum::<f64>() * dxi).sqrt()
    }

    pub fn conj(&self) -> Self {
        Self::from_raw(&self.grid, self.samples.iter().map(|z| z.conj()).collect())
    }

    pub fn scale(&self, c: C64) -> Self {
        Self::from_raw(&self.grid, self.samples.iter().map(|z| z * c).collect())
    }

    pub fn scale_real(&self, c: f64) -> Self {
        Self::from_raw(&self.grid, self.samples.iter().map(|z| z * c).collect())
    }

    /// Pointwise map `(x_j, f_j) -> g_j`.
    pub fn map(&self, f: impl Fn(f64, C64) -> C64) -> Self {
        let samples = self.grid.nodes().iter().zip(&self.samples).map(|(&x, &z)| f(x, z)).collect();
        Self::from_raw(&self.grid, samples)
    }

    /// Pointwise combination with another field on the same grid.
    pub fn zip_map(&self, other: &ComplexField, f: impl Fn(C64, C64) -> C64) -> Self {
        assert!(self.same_grid(other), "zip_map: grid mismatch");
        let samples = self.samples.iter().zip(&other.samples).map(|(&a, &b)| f(a, b)).collect();
        Self::from_raw(&self.grid, samples)
    }

    /// Pointwise product with real weights given per node.
    pub fn weighted(&self, weights: &[f64]) -> Self {
        assert_eq!(weights.len(), self.samples.len());
        Self::from_raw(&self.grid, self.samples.iter().zip(weights).map(|(z, w)| z * w).collect())
    }

    /// `self + c * other`.
    pub fn axpy(&self, c: C64, other: &ComplexField) -> Self {
        self.zip_map(other, |a, b| a + c * b)
    }

    /// Spectral derivative, multiplier `i xi`.
    pub fn derivative(&self) -> Self {
        let weights: Vec<C64> = self.grid.frequencies().iter().map(|&xi| C64::new(0.0, xi)).collect();
        Self::from_raw(&self.grid, self.grid.filter(&self.samples, &weights))
    }

    /// Largest boundary sample relative to the peak. Values far below one
    /// indicate the periodic truncation does not see the data.
    pub fn boundary_ratio(&self) -> f64 {
        let peak = self.linf_norm();
        if peak == 0.0 {
            return 0.0;
        }
        let n = self.samples.len();
        self.samples[0].norm().max(self.samples[n - 1].norm()) / peak
    }
}

impl Add for &ComplexField {
    type Output = ComplexField;
    fn add(self, rhs: &ComplexField) -> ComplexField {
        self.zip_map(rhs, |a, b| a + b)
    }
}

impl Sub for &ComplexField {
    type Output = ComplexField;
    fn sub(self, rhs: &ComplexField) -> ComplexField {
        self.zip_map(rhs, |a, b| a - b)
    }
}

impl Neg for &ComplexField {
    type Output = ComplexField;
    fn neg(self) -> ComplexField {
        self.scale_real(-1.0)
    }
}

impl Mul<C64> for &ComplexField {
    type Output = ComplexField;
    fn mul(self, rhs: C64) -> ComplexField {
        self.scale(rhs)
    }
}

/// Fourier multiplier: the output spectrum is `m(xi) * spectrum(f)`.
pub fn apply_multiplier(f: &ComplexField, m: impl Fn(f64) -> C64) -> Result<ComplexField> {
    let weights: Vec<C64> = f.grid.frequencies().iter().map(|&xi| m(xi)).collect();
    if let Some(k) = weights.iter().position(|w| !(w.re.is_finite() && w.im.is_finite())) {
        return invalid(format!("multiplier is not finite at xi = {}", f.grid.frequencies()[k]));
    }
    Ok(ComplexField::from_raw(&f.grid, f.grid.filter(&f.samples, &weights)))
}

/// Free Schrödinger flow `e^{-i t H_0}`, `H_0 = -(1/2) d²/dx²`.
pub fn free_propagate(f: &ComplexField, t: f64) -> Result<ComplexField> {
    if !t.is_finite() {
        return invalid(format!("free_propagate: time {t} is not finite"));
    }
    let weights = f.grid.free_weights(t);
    Ok(ComplexField::from_raw(&f.grid, f.grid.filter(&f.samples, &weights)))
}

/// Remainder of the free flow, `R(t) f = e^{-i t H_0} f - f`, for `t >= 0`.
pub fn remainder_r(f: &ComplexField, t: f64) -> Result<ComplexField> {
    if !(t.is_finite() && t >= 0.0) {
        return invalid(format!("remainder_r: time {t} must be non-negative"));
    }
    // (e^{-i theta} - 1) = -2 i sin(theta/2) e^{-i theta/2}; avoids cancellation for tiny theta.
    let weights: Vec<C64> = f
        .grid
        .frequencies()
        .iter()
        .map(|&xi| {
            let half = 0.25 * t * xi * xi;
            C64::new(0.0, -2.0 * half.sin()) * C64::from_polar(1.0, -half)
        })
        .collect();
    Ok(ComplexField::from_raw(&f.grid, f.grid.filter(&f.samples, &weights)))
}

/// `H^s` norm with weight `<xi>^s = (1 + xi^2)^{s/2}`, evaluated on the
/// Plancherel side.
pub fn sobolev_norm(f: &ComplexField, s: f64) -> f64 {
    let coeffs = f.grid.dft(&f.samples);
    let scale = f.grid.spacing() / f.grid.len() as f64;
    let sum: f64 = coeffs
        .iter()
        .zip(f.grid.frequencies())
        .map(|(c, &xi)| (1.0 + xi * xi).powf(s) * c.norm_sqr())
        .sum();
    (sum * scale).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grid() -> Arc<Grid> {
        Grid::with_size(256, 20.0).unwrap()
    }

    fn gaussian(g: &Arc<Grid>) -> ComplexField {
        ComplexField::from_fn(g, |x| C64::new((-x * x / 2.0).exp(), 0.0))
    }

    fn mode(g: &Arc<Grid>, k: i64) -> ComplexField {
        let xi = k as f64 * g.spec().frequency_spacing();
        ComplexField::from_fn(g, |x| C64::from_polar(1.0, xi * x))
    }

    fn max_diff(a: &ComplexField, b: &ComplexField) -> f64 {
        a.samples().iter().zip(b.samples()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn grid_spec_validation() {
        assert!(GridSpec::new(100, 1.0).is_err());
        assert!(GridSpec::new(128, 0.0).is_err());
        let s = GridSpec::new(8, 2.0).unwrap();
        assert_eq!(s.node(0), -2.0);
        assert_eq!(s.spacing(), 0.5);
        assert_eq!(s.frequency(1), std::f64::consts::PI / 2.0);
        assert_eq!(s.frequency(7), -std::f64::consts::PI / 2.0);
    }

    #[test]
    fn plancherel_holds() {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let f = ComplexField::random_band_limited(&g, &mut rng, 5.0, 4.0);
        let (a, b) = (f.l2_norm(), f.spectral_l2_norm());
        assert!((a - b).abs() <= 1e-12 * a);
        assert!((sobolev_norm(&f, 0.0) - a).abs() <= 1e-12 * a);
    }

    #[test]
    fn spectrum_of_gaussian_matches_continuous_transform() {
        // F[e^{-x^2/2}] = e^{-xi^2/2} under the unitary convention.
        let g = grid();
        let spec = gaussian(&g).spectrum();
        for (c, &xi) in spec.iter().zip(g.frequencies()) {
            assert!((c - C64::new((-xi * xi / 2.0).exp(), 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn identity_multiplier() {
        let g = grid();
        let f = gaussian(&g);
        let out = apply_multiplier(&f, |_| C64::new(1.0, 0.0)).unwrap();
        assert!(max_diff(&out, &f) < 1e-14);
    }

    #[test]
    fn derivative_of_single_mode() {
        let g = grid();
        let k = 3;
        let f = mode(&g, k);
        let xi = k as f64 * g.spec().frequency_spacing();
        let out = apply_multiplier(&f, |x| C64::new(0.0, x)).unwrap();
        let expected = f.scale(C64::new(0.0, xi));
        assert!(max_diff(&out, &expected) < 1e-12);
    }

    #[test]
    fn bracket_multiplier_matches_direct_dft_oracle() {
        // Oracle: direct O(n^2) DFT with explicit weights.
        let g = Grid::with_size(64, 8.0).unwrap();
        let f = gaussian(&g);
        let out = apply_multiplier(&f, |xi| C64::new((1.0 + xi * xi).sqrt(), 0.0)).unwrap();
        let n = g.len();
        let mut coeffs = vec![C64::new(0.0, 0.0); n];
        for (k, c) in coeffs.iter_mut().enumerate() {
            for (j, s) in f.samples().iter().enumerate() {
                *c += s * C64::from_polar(1.0, -2.0 * std::f64::consts::PI * (j * k) as f64 / n as f64);
            }
            let xi = g.frequencies()[k];
            *c *= (1.0 + xi * xi).sqrt();
        }
        for (j, o) in out.samples().iter().enumerate() {
            let mut v = C64::new(0.0, 0.0);
            for (k, c) in coeffs.iter().enumerate() {
                v += c * C64::from_polar(1.0, 2.0 * std::f64::consts::PI * (j * k) as f64 / n as f64);
            }
            v /= n as f64;
            assert!((v - o).norm() < 1e-12, "node {j}");
        }
    }

    #[test]
    fn non_finite_multiplier_rejected() {
        let g = grid();
        let f = gaussian(&g);
        assert!(apply_multiplier(&f, |xi| C64::new(1.0 / xi, 0.0)).is_err());
    }

    #[test]
    fn free_flow_simple_cases() {
        let g = grid();
        let f = gaussian(&g);
        assert!(max_diff(&free_propagate(&f, 0.0).unwrap(), &f) < 1e-15);
        let k = 5;
        let m = mode(&g, k);
        let xi = k as f64 * g.spec().frequency_spacing();
        let t = 0.37;
        let expected = m.scale(C64::from_polar(1.0, -t * xi * xi / 2.0));
        assert!(max_diff(&free_propagate(&m, t).unwrap(), &expected) < 1e-12);
        assert!(free_propagate(&f, f64::NAN).is_err());
    }

    #[test]
    fn free_gaussian_closed_form() {
        let g = Grid::with_size(512, 20.0).unwrap();
        let f = gaussian(&g);
        let t = 1.0;
        let out = free_propagate(&f, t).unwrap();
        let a = C64::new(1.0, t);
        let exact = ComplexField::from_fn(&g, |x| a.powf(-0.5) * (-x * x / (2.0 * a)).exp());
        assert!(max_diff(&out, &exact) < 1e-10);
    }

    #[test]
    fn group_law() {
        let g = grid();
        let f = gaussian(&g);
        let a = free_propagate(&free_propagate(&f, 0.3).unwrap(), -0.8).unwrap();
        let b = free_propagate(&f, -0.5).unwrap();
        assert!(max_diff(&a, &b) < 1e-13);
    }

    #[test]
    fn remainder_on_mode_and_zero_time() {
        let g = grid();
        let f = gaussian(&g);
        assert_eq!(remainder_r(&f, 0.0).unwrap().linf_norm(), 0.0);
        assert!(remainder_r(&f, -1.0).is_err());
        let k = 4;
        let m = mode(&g, k);
        let xi = k as f64 * g.spec().frequency_spacing();
        for t in [1e-3, 0.1, 1.0] {
            let r = remainder_r(&m, t).unwrap();
            let exact = 2.0 * (t * xi * xi / 4.0).sin().abs();
            assert!((r.l2_norm() / m.l2_norm() - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn remainder_bound_with_constant_two() {
        let g = grid();
        let f = gaussian(&g);
        for t in [1e-3, 1e-2, 1e-1, 1.0] {
            let r = remainder_r(&f, t).unwrap().l2_norm();
            for delta in [0.0, 0.5, 1.0] {
                let ratio = r / (t.powf(delta) * sobolev_norm(&f, 2.0 * delta));
                assert!(ratio <= 2.0, "t={t} delta={delta} ratio={ratio}");
            }
        }
    }

    #[test]
    fn sobolev_norm_cases() {
        let g = grid();
        assert_eq!(sobolev_norm(&ComplexField::zeros(&g), 1.3), 0.0);
        let k = 2;
        let m = mode(&g, k);
        let xi = k as f64 * g.spec().frequency_spacing();
        let bracket = (1.0 + xi * xi).sqrt();
        assert!((sobolev_norm(&m, 1.0) - bracket * m.l2_norm()).abs() < 1e-12 * m.l2_norm());
        let f = gaussian(&g);
        let df = f.derivative();
        let expected = (f.l2_norm().powi(2) + df.l2_norm().powi(2)).sqrt();
        assert!((sobolev_norm(&f, 1.0) - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn gagliardo_nirenberg_constant() {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let f = ComplexField::random_band_limited(&g, &mut rng, 3.0, 3.0);
            let ratio = f.linf_norm() / (f.derivative().l2_norm() * f.l2_norm()).sqrt();
            assert!(ratio <= 2f64.sqrt() + 1e-6);
        }
    }

    #[test]
    fn boundary_ratio_of_gaussian() {
        let g = grid();
        assert!(gaussian(&g).boundary_ratio() <= 1e-12);
    }
}
