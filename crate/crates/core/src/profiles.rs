//! Scattering data and the asymptotic profiles built from them.
//!
//! With `phi` the final-state profile, the v-picture profile is
//! `v_p(t) = exp(-i lambda1 |phi|^2 log t - i lambda2 |phi|^{2 sigma} t^{sigma-1}/(sigma-1)) conj(phi)`
//! and the u-picture phase functions are
//! `w_p(t) = exp(-i lambda1 |phi|^2 log t) phi` and
//! `w~_p(t) = w_p(t) exp(-i lambda2 |phi|^{2 sigma} t^{1-sigma}/(1-sigma))`.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{invalid, LabError, Result};
use crate::params::{Coupling, ModelParams};
use crate::spectral::{sobolev_norm, ComplexField, Grid, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DatumKind {
    Gaussian,
    Sech,
    Tabulated,
}

impl std::str::FromStr for DatumKind {
    type Err = LabError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Self::Gaussian),
            "sech" => Ok(Self::Sech),
            "tabulated" => Ok(Self::Tabulated),
            other => invalid(format!("unknown datum kind `{other}`")),
        }
    }
}

/// The final-state profile `phi` sampled on a grid.
#[derive(Clone, Debug)]
pub struct ScatteringDatum {
    kind: DatumKind,
    amplitude: f64,
    width: f64,
    phi: ComplexField,
    dphi: ComplexField,
    modulus: Vec<f64>,
    sup: f64,
}

impl ScatteringDatum {
    /// `A exp(-x^2 / w^2)`.
    pub fn gaussian(grid: &Arc<Grid>, amplitude: f64, width: f64) -> Result<Self> {
        check_shape(amplitude, width)?;
        let modulus: Vec<f64> = grid
            .nodes()
            .iter()
            .map(|&x| amplitude.abs() * (-(x / width).powi(2)).exp())
            .collect();
        let phi = ComplexField::from_fn(grid, |x| C64::new(amplitude * (-(x / width).powi(2)).exp(), 0.0));
        let dphi = ComplexField::from_fn(grid, |x| {
            C64::new(-2.0 * x / (width * width) * amplitude * (-(x / width).powi(2)).exp(), 0.0)
        });
        Ok(Self { kind: DatumKind::Gaussian, amplitude, width, phi, dphi, modulus, sup: amplitude.abs() })
    }

    /// `A sech(x / w)`.
    pub fn sech(grid: &Arc<Grid>, amplitude: f64, width: f64) -> Result<Self> {
        check_shape(amplitude, width)?;
        let sech = |x: f64| 1.0 / (x / width).cosh();
        let modulus: Vec<f64> = grid.nodes().iter().map(|&x| amplitude.abs() * sech(x)).collect();
        let phi = ComplexField::from_fn(grid, |x| C64::new(amplitude * sech(x), 0.0));
        let dphi = ComplexField::from_fn(grid, |x| {
            C64::new(-amplitude / width * sech(x) * (x / width).tanh(), 0.0)
        });
        Ok(Self { kind: DatumKind::Sech, amplitude, width, phi, dphi, modulus, sup: amplitude.abs() })
    }

    /// Arbitrary samples; the derivative is spectral and `||phi||_inf` is
    /// the sampled maximum.
    pub fn tabulated(phi: ComplexField) -> Self {
        let dphi = phi.derivative();
        let modulus: Vec<f64> = phi.samples().iter().map(|z| z.norm()).collect();
        let sup = modulus.iter().cloned().fold(0.0, f64::max);
        Self { kind: DatumKind::Tabulated, amplitude: sup, width: f64::NAN, phi, dphi, modulus, sup }
    }

    pub fn from_kind(kind: DatumKind, grid: &Arc<Grid>, amplitude: f64, width: f64) -> Result<Self> {
        match kind {
            DatumKind::Gaussian => Self::gaussian(grid, amplitude, width),
            DatumKind::Sech => Self::sech(grid, amplitude, width),
            DatumKind::Tabulated => invalid("tabulated data must be loaded from a file"),
        }
    }

    /// Parses the two-column text format written by [`write_table`].
    pub fn from_table(grid: &Arc<Grid>, text: &str) -> Result<Self> {
        Ok(Self::tabulated(read_table(grid, text)?))
    }

    pub fn kind(&self) -> DatumKind {
        self.kind
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.phi.grid()
    }

    pub fn phi(&self) -> &ComplexField {
        &self.phi
    }

    /// Closed-form derivative for analytic kinds.
    pub fn dphi(&self) -> &ComplexField {
        &self.dphi
    }

    /// `|phi|` per node, from the closed form where available.
    pub fn modulus(&self) -> &[f64] {
        &self.modulus
    }

    pub fn sup_norm(&self) -> f64 {
        self.sup
    }

    pub fn is_zero(&self) -> bool {
        self.sup == 0.0
    }
}

fn check_shape(amplitude: f64, width: f64) -> Result<()> {
    if !amplitude.is_finite() {
        return invalid("datum amplitude must be finite");
    }
    if !(width.is_finite() && width > 0.0) {
        return invalid(format!("datum width {width} must be positive"));
    }
    Ok(())
}

/// Reads `x value` lines (`#` starts a comment). Values use the
/// `re+imi` notation, e.g. `1.5e0-2e-1i`. The abscissae must be the grid
/// nodes in order.
pub fn read_table(grid: &Arc<Grid>, text: &str) -> Result<ComplexField> {
    let tol = 1e-9 * grid.spec().half_width();
    let mut samples = Vec::with_capacity(grid.len());
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut cols = line.split_whitespace();
        let (Some(xs), Some(zs), None) = (cols.next(), cols.next(), cols.next()) else {
            return invalid(format!("line {}: expected two columns", lineno + 1));
        };
        let x: f64 = xs
            .parse()
            .map_err(|_| LabError::InvalidInput(format!("line {}: bad abscissa `{xs}`", lineno + 1)))?;
        let z: C64 = zs
            .parse()
            .map_err(|_| LabError::InvalidInput(format!("line {}: bad value `{zs}`", lineno + 1)))?;
        let j = samples.len();
        if j >= grid.len() {
            return Err(LabError::GridMismatch(format!("more than {} rows", grid.len())));
        }
        let node = grid.nodes()[j];
        if (x - node).abs() > tol {
            return Err(LabError::GridMismatch(format!(
                "line {}: x = {x} but grid node {j} is {node}",
                lineno + 1
            )));
        }
        samples.push(z);
    }
    ComplexField::from_samples(grid, samples)
}

/// Writes a field in the format accepted by [`read_table`].
pub fn write_table(f: &ComplexField) -> String {
    let mut out = String::with_capacity(48 * f.samples().len());
    for (x, z) in f.grid().nodes().iter().zip(f.samples()) {
        out.push_str(&format!("{x:.17e} {:.17e}{:+.17e}i\n", z.re, z.im));
    }
    out
}

/// Per-coupling power tables of `|phi|`.
#[derive(Clone, Debug)]
pub(crate) struct PowerTable {
    pub(crate) coupling: Coupling,
    /// `|phi|^{2 sigma}`
    pub(crate) p2s: Vec<f64>,
    /// `|phi|^{2 sigma - 2}`
    pub(crate) p2s2: Vec<f64>,
}

/// A datum together with model parameters; evaluates the profiles.
#[derive(Clone, Debug)]
pub struct ProfileModel {
    datum: Arc<ScatteringDatum>,
    params: ModelParams,
    tables: Vec<PowerTable>,
    /// `Re[phi d_x conj(phi)]`
    re_phi_dphibar: Vec<f64>,
}

impl ProfileModel {
    pub fn new(datum: Arc<ScatteringDatum>, params: ModelParams) -> Self {
        let tables = params
            .couplings()
            .into_iter()
            .map(|coupling| {
                let s = coupling.sigma;
                let m = datum.modulus();
                PowerTable {
                    coupling,
                    p2s: m.iter().map(|a| a.powf(2.0 * s)).collect(),
                    p2s2: m.iter().map(|a| a.powf(2.0 * s - 2.0)).collect(),
                }
            })
            .collect();
        let re_phi_dphibar = datum
            .phi()
            .samples()
            .iter()
            .zip(datum.dphi().samples())
            .map(|(p, d)| (p * d.conj()).re)
            .collect();
        Self { datum, params, tables, re_phi_dphibar }
    }

    pub fn datum(&self) -> &Arc<ScatteringDatum> {
        &self.datum
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.datum.grid()
    }

    pub(crate) fn tables(&self) -> &[PowerTable] {
        &self.tables
    }

    pub(crate) fn re_phi_dphibar(&self) -> &[f64] {
        &self.re_phi_dphibar
    }

    /// Pointwise v-picture phase `sum_j lambda_j |phi|^{2 sigma_j} Theta_j(t)`.
    fn vp_phase(&self, t: f64) -> Vec<f64> {
        let mut phase = vec![0.0; self.grid().len()];
        for tab in &self.tables {
            let theta = tab.coupling.lambda * tab.coupling.phase_integral(t);
            phase.iter_mut().zip(&tab.p2s).for_each(|(p, a)| *p += theta * a);
        }
        phase
    }

    pub fn profile_vp(&self, t: f64) -> Result<ComplexField> {
        check_time(t)?;
        let phase = self.vp_phase(t);
        let samples = self
            .datum
            .phi()
            .samples()
            .iter()
            .zip(&phase)
            .map(|(p, &th)| C64::from_polar(1.0, -th) * p.conj())
            .collect();
        Ok(ComplexField::from_raw(self.grid(), samples))
    }

    pub fn profile_wp(&self, t: f64) -> Result<ComplexField> {
        check_time(t)?;
        let log_t = t.ln();
        let l1 = self.params.lambda1;
        Ok(self.phase_times_phi(|j| -l1 * self.datum.modulus()[j].powi(2) * log_t))
    }

    pub fn profile_wtilde(&self, t: f64) -> Result<ComplexField> {
        check_time(t)?;
        let log_t = t.ln();
        let (l1, l2, s) = (self.params.lambda1, self.params.lambda2, self.params.sigma);
        let extra = t.powf(1.0 - s) / (1.0 - s);
        Ok(self.phase_times_phi(|j| {
            let m = self.datum.modulus()[j];
            -l1 * m * m * log_t - l2 * m.powf(2.0 * s) * extra
        }))
    }

    fn phase_times_phi(&self, phase: impl Fn(usize) -> f64) -> ComplexField {
        let samples = self
            .datum
            .phi()
            .samples()
            .iter()
            .enumerate()
            .map(|(j, p)| C64::from_polar(1.0, phase(j)) * p)
            .collect();
        ComplexField::from_raw(self.grid(), samples)
    }

    /// `(||w_p - w~_p||, ||d_x (w_p - w~_p)||)` at `t >= 1`.
    pub fn profile_gap(&self, t: f64) -> Result<(f64, f64)> {
        if !(t.is_finite() && t >= 1.0) {
            return invalid(format!("profile_gap: time {t} must be >= 1"));
        }
        let gap = &self.profile_wp(t)? - &self.profile_wtilde(t)?;
        Ok((gap.l2_norm(), gap.derivative().l2_norm()))
    }
}

pub(crate) fn check_time(t: f64) -> Result<()> {
    if t.is_finite() && t > 0.0 {
        Ok(())
    } else {
        invalid(format!("time {t} must be positive"))
    }
}

/// `||e^{i gamma phi1} phi2||_{H^s} / (<gamma> (1 + ||phi1||_{H^{max(s, 1/2+nu)}}) ||phi2||_{H^s})`.
pub fn phase_multiplication_ratio(phi1: &[f64], phi2: &ComplexField, gamma: f64, s: f64, nu: f64) -> f64 {
    let grid = phi2.grid();
    let rotated = ComplexField::from_raw(
        grid,
        phi2.samples().iter().zip(phi1).map(|(z, &a)| z * C64::from_polar(1.0, gamma * a)).collect(),
    );
    let phi1_field = ComplexField::from_raw(grid, phi1.iter().map(|&a| C64::new(a, 0.0)).collect());
    let bracket = (1.0 + gamma * gamma).sqrt();
    sobolev_norm(&rotated, s)
        / (bracket * (1.0 + sobolev_norm(&phi1_field, s.max(0.5 + nu))) * sobolev_norm(phi2, s))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Arc<Grid> {
        Grid::with_size(1024, 20.0).unwrap()
    }

    fn max_diff(a: &ComplexField, b: &ComplexField) -> f64 {
        a.samples().iter().zip(b.samples()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    fn model(lambda1: f64, lambda2: f64) -> ProfileModel {
        let d = ScatteringDatum::gaussian(&grid(), 1.0, 3.0).unwrap();
        ProfileModel::new(Arc::new(d), ModelParams { lambda1, lambda2, ..ModelParams::defocusing() })
    }

    #[test]
    fn analytic_derivatives_match_spectral() {
        let g = grid();
        for d in [
            ScatteringDatum::gaussian(&g, 2.0, 3.0).unwrap(),
            ScatteringDatum::sech(&g, 1.0, 0.7).unwrap(),
        ] {
            assert!(max_diff(&d.phi().derivative(), d.dphi()) < 1e-8, "{:?}", d.kind());
            assert!(d.phi().boundary_ratio() <= 1e-12);
            assert_eq!(d.sup_norm(), d.amplitude());
        }
    }

    #[test]
    fn vp_at_one_is_conjugate() {
        let m = model(1.0, 0.0);
        let vp = m.profile_vp(1.0).unwrap();
        assert!(max_diff(&vp, &m.datum().phi().conj()) == 0.0);
        assert!(m.profile_vp(0.0).is_err());
    }

    #[test]
    fn vp_modulus_is_exact() {
        let m = model(1.0, 1.0);
        for t in [1e-4, 0.3, 1.0] {
            let vp = m.profile_vp(t).unwrap();
            for (z, a) in vp.samples().iter().zip(m.datum().modulus()) {
                assert!((z.norm() - a).abs() <= 4.0 * f64::EPSILON * a.max(1e-300));
            }
        }
    }

    #[test]
    fn vp_matches_pointwise_phase_formula() {
        // Independent oracle: phase built from scalar formulas per node.
        let g = grid();
        let d = Arc::new(ScatteringDatum::gaussian(&g, 1.0, 3.0).unwrap());
        let p = ModelParams { lambda1: 1.0, lambda2: 1.0, sigma: 1.5, ..ModelParams::defocusing() };
        let vp = ProfileModel::new(d, p).profile_vp(0.5).unwrap();
        let t: f64 = 0.5;
        for (&x, z) in g.nodes().iter().zip(vp.samples()) {
            let phi = (-(x / 3.0) * (x / 3.0)).exp();
            let ph = -(phi * phi) * t.ln() - phi.powi(3) * t.sqrt() / 0.5;
            let expect = C64::new(ph.cos(), ph.sin()) * phi;
            assert!((z - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn vp_is_conjugate_time_inversion_of_wtilde() {
        let m = model(1.0, 0.7);
        let t = 0.05;
        let a = m.profile_vp(t).unwrap();
        let b = m.profile_wtilde(1.0 / t).unwrap().conj();
        assert!(max_diff(&a, &b) < 1e-12);
    }

    #[test]
    fn wp_trivial_cases() {
        let phi = model(0.0, 0.0).datum().phi().clone();
        let m0 = model(0.0, 0.4);
        assert!(max_diff(&m0.profile_wp(7.0).unwrap(), &phi) == 0.0);
        let m = model(1.0, 0.4);
        assert!(max_diff(&m.profile_wp(1.0).unwrap(), &phi) == 0.0);
        let m2 = model(1.0, 0.0);
        assert!(max_diff(&m2.profile_wp(5.0).unwrap(), &m2.profile_wtilde(5.0).unwrap()) == 0.0);
        // w~_p(1) = w_p(1) exp(-i lambda2 |phi|^{2 sigma} / (1 - sigma))
        let wt = m.profile_wtilde(1.0).unwrap();
        for ((z, p), a) in wt.samples().iter().zip(phi.samples()).zip(m.datum().modulus()) {
            let expect = p * C64::from_polar(1.0, -0.4 * a.powi(3) / (1.0 - 1.5));
            assert!((z - expect).norm() < 1e-14);
        }
    }

    #[test]
    fn profile_gap_cases() {
        assert_eq!(model(1.0, 0.0).profile_gap(10.0).unwrap(), (0.0, 0.0));
        let m = model(1.0, 0.5);
        let (l2, _) = m.profile_gap(1.0).unwrap();
        let g = m.grid();
        let dx = g.spacing();
        let oracle: f64 = g
            .nodes()
            .iter()
            .map(|&x| {
                let phi = (-(x / 3.0) * (x / 3.0)).exp();
                let th = -0.5 * phi.powi(3) / (1.0 - 1.5);
                ((1.0 - th.cos()).powi(2) + th.sin().powi(2)) * phi * phi * dx
            })
            .sum::<f64>()
            .sqrt();
        assert!((l2 - oracle).abs() < 1e-12);
        assert!(m.profile_gap(0.5).is_err());
    }

    #[test]
    fn wtilde_ode_residual_is_second_order() {
        // i d/dt w~ = lambda1 t^{-1} |w~|^2 w~ + lambda2 t^{-sigma} |w~|^{2 sigma} w~
        let m = model(1.0, 0.8);
        let t = 2.0;
        let rhs_coeff: Vec<f64> = m
            .datum()
            .modulus()
            .iter()
            .map(|a| a * a / t + 0.8 * t.powf(-1.5) * a.powi(3))
            .collect();
        let w = m.profile_wtilde(t).unwrap();
        let residual = |h: f64| {
            let d = &m.profile_wtilde(t + h).unwrap() - &m.profile_wtilde(t - h).unwrap();
            let lhs = d.scale(C64::new(0.0, 1.0 / (2.0 * h)));
            (&lhs - &w.weighted(&rhs_coeff)).l2_norm()
        };
        let order = (residual(0.02) / residual(0.01)).log2();
        assert!(order >= 1.9, "order {order}");
    }

    #[test]
    fn vp_ode_residual_is_second_order() {
        let m = model(1.0, 0.8);
        let t = 0.5;
        let rhs_coeff: Vec<f64> =
            m.datum().modulus().iter().map(|a| a * a / t + 0.8 * t.powf(-0.5) * a.powi(3)).collect();
        let v = m.profile_vp(t).unwrap();
        let residual = |h: f64| {
            let d = &m.profile_vp(t + h).unwrap() - &m.profile_vp(t - h).unwrap();
            let lhs = d.scale(C64::new(0.0, 1.0 / (2.0 * h)));
            (&lhs - &v.weighted(&rhs_coeff)).l2_norm()
        };
        let order = (residual(0.01) / residual(0.005)).log2();
        assert!(order >= 1.9, "order {order}");
    }

    #[test]
    fn table_round_trip() {
        let g = Grid::with_size(64, 8.0).unwrap();
        let f = ComplexField::from_fn(&g, |x| C64::new((-x * x).exp(), -0.25 * x * (-x * x).exp()));
        let text = format!("# x value\n{}", write_table(&f));
        let back = read_table(&g, &text).unwrap();
        assert!(max_diff(&f, &back) == 0.0);
        let d = ScatteringDatum::from_table(&g, &text).unwrap();
        assert_eq!(d.kind(), DatumKind::Tabulated);
        assert!(read_table(&g, "0.0 1+0i\n").is_err());
        let bad = Grid::with_size(32, 8.0).unwrap();
        assert!(read_table(&bad, &text).is_err());
    }
}
