//! Linearization around the profile `v_p`:
//! `i psi_t = H_0 psi + V(t) psi`, with the real-linear potential
//! `V(t) psi = sum_j lambda_j t^{sigma_j-2} (|phi|^{2 sigma_j} psi + 2 sigma_j |phi|^{2 sigma_j-2} Re[conj(v_p) psi] v_p)`
//! `        = c1 psi + c2 conj(psi)`.
//!
//! Only `psi` is stored; the second component of the pair is `conj(psi)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, LabError, Result};
use crate::mesh::TimeMesh;
use crate::params::Preset;
use crate::profiles::{check_time, ProfileModel};
use crate::spectral::{ComplexField, C64};

/// `(psi, conj psi)` represented by its first component.
#[derive(Clone, Debug)]
pub struct PairField {
    psi: ComplexField,
}

impl PairField {
    pub fn new(psi: ComplexField) -> Self {
        Self { psi }
    }

    pub fn psi(&self) -> &ComplexField {
        &self.psi
    }

    pub fn second(&self) -> ComplexField {
        self.psi.conj()
    }

    pub fn into_inner(self) -> ComplexField {
        self.psi
    }

    /// `Q_alpha` of the pair: the scalar functional on the first component
    /// plus the functional on the conjugate of the second.
    pub fn pair_q_alpha(&self, model: &ProfileModel, t: f64) -> Result<f64> {
        let first = modified_energy(&self.psi, model, t)?.q_alpha;
        let second = modified_energy(&self.second().conj(), model, t)?.q_alpha;
        Ok(first + second)
    }
}

/// Pointwise coefficients `c1` (real) and `c2` of the potential at a time.
#[derive(Clone, Debug)]
pub struct PotentialCoefficients {
    pub c1: Vec<f64>,
    pub c2: Vec<C64>,
}

pub fn potential_coefficients(model: &ProfileModel, t: f64) -> Result<PotentialCoefficients> {
    check_time(t)?;
    let n = model.grid().len();
    let mut c1 = vec![0.0; n];
    let mut c2 = vec![C64::new(0.0, 0.0); n];
    if model.tables().is_empty() {
        return Ok(PotentialCoefficients { c1, c2 });
    }
    let vp = model.profile_vp(t)?;
    for tab in model.tables() {
        let (lambda, sigma) = (tab.coupling.lambda, tab.coupling.sigma);
        let w = lambda * tab.coupling.weight(t);
        for j in 0..n {
            let z = vp.samples()[j];
            c1[j] += w * (sigma + 1.0) * tab.p2s[j];
            c2[j] += z * z * (w * sigma * tab.p2s2[j]);
        }
    }
    Ok(PotentialCoefficients { c1, c2 })
}

/// The potential acting on `psi`, evaluated from the `Re[conj(v_p) psi]` form.
pub fn potential_apply(psi: &PairField, model: &ProfileModel, t: f64) -> Result<ComplexField> {
    check_time(t)?;
    let grid = model.grid();
    psi.psi.ensure_same_grid(model.datum().phi())?;
    let vp = model.profile_vp(t)?;
    let mut out = vec![C64::new(0.0, 0.0); grid.len()];
    for tab in model.tables() {
        let w = tab.coupling.lambda * tab.coupling.weight(t);
        let sigma = tab.coupling.sigma;
        for (j, o) in out.iter_mut().enumerate() {
            let (p, v) = (psi.psi.samples()[j], vp.samples()[j]);
            let re = (v.conj() * p).re;
            *o += (p * tab.p2s[j] + v * (2.0 * sigma * tab.p2s2[j] * re)) * w;
        }
    }
    Ok(ComplexField::from_raw(grid, out))
}

/// Exact flow of `i psi_tau = c1 psi + c2 conj(psi)` over `tau`, in place.
///
/// For `(a, b) = (Re psi, Im psi)` the flow is `exp(tau M)` with
/// `M = [[q, c1 - p], [-(c1 + p), -q]]`, `c2 = p + i q`. `M` is traceless
/// with `M^2 = -Delta I`, `Delta = c1^2 - |c2|^2`.
pub(crate) fn potential_flow(psi: &mut [C64], coeffs: &PotentialCoefficients, tau: f64) {
    for ((z, &c1), &c2) in psi.iter_mut().zip(&coeffs.c1).zip(&coeffs.c2) {
        let (p, q) = (c2.re, c2.im);
        let delta = c1 * c1 - p * p - q * q;
        let x = delta * tau * tau;
        let (c, s) = if x.abs() < 1e-4 {
            (1.0 - x / 2.0 + x * x / 24.0, tau * (1.0 - x / 6.0 + x * x / 120.0))
        } else if delta > 0.0 {
            let w = delta.sqrt();
            ((w * tau).cos(), (w * tau).sin() / w)
        } else {
            let k = (-delta).sqrt();
            ((k * tau).cosh(), (k * tau).sinh() / k)
        };
        let (a, b) = (z.re, z.im);
        let ma = q * a + (c1 - p) * b;
        let mb = -(c1 + p) * a - q * b;
        *z = C64::new(c * a + s * ma, c * b + s * mb);
    }
}

/// Strang substeps `V(h/2) K(h) V(h/2)` with coefficients frozen at each
/// substep midpoint, advancing from `a` to `b` in `steps` equal substeps.
pub fn propagate_uniform(psi: &ComplexField, a: f64, b: f64, steps: usize, model: &ProfileModel) -> Result<ComplexField> {
    if !(a > 0.0 && b >= a) {
        return invalid(format!("linearized propagation needs 0 < s <= t, got s = {a}, t = {b}"));
    }
    if b == a {
        return Ok(psi.clone());
    }
    let steps = steps.max(1);
    let h = (b - a) / steps as f64;
    let grid = psi.grid().clone();
    let kinetic = grid.free_weights(h);
    let coupled = !model.tables().is_empty();
    let mut state = psi.samples().to_vec();
    for k in 0..steps {
        let tm = a + (k as f64 + 0.5) * h;
        if coupled {
            let coeffs = potential_coefficients(model, tm)?;
            potential_flow(&mut state, &coeffs, 0.5 * h);
            state = grid.filter(&state, &kinetic);
            potential_flow(&mut state, &coeffs, 0.5 * h);
        } else {
            state = grid.filter(&state, &kinetic);
        }
    }
    if let Some(j) = state.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(LabError::NumericalAbort { node: j, time: b, detail: "linearized propagation".into() });
    }
    Ok(ComplexField::from_raw(&grid, state))
}

/// Breakpoints `s`, mesh nodes inside `(s, t)`, `t`.
pub(crate) fn breakpoints(mesh: &TimeMesh, s: f64, t: f64) -> Vec<f64> {
    let mut pts = vec![s];
    pts.extend(mesh.interior(s, t));
    pts.push(t);
    pts
}

/// `U(t, s) psi0`: each mesh interval met between `s` and `t` is split into
/// `substeps` Strang substeps.
pub fn propagate(psi0: &PairField, s: f64, t: f64, mesh: &TimeMesh, substeps: usize, model: &ProfileModel) -> Result<PairField> {
    if s > t {
        return invalid(format!("backward linearized propagation is not supported (s = {s} > t = {t})"));
    }
    if !(mesh.contains(s) && mesh.contains(t)) {
        return invalid(format!("propagation times [{s}, {t}] leave the mesh range"));
    }
    let mut psi = psi0.psi.clone();
    for w in breakpoints(mesh, s, t).windows(2) {
        psi = propagate_uniform(&psi, w[0], w[1], substeps, model)?;
    }
    Ok(PairField::new(psi))
}

/// Terms of the modified energies at one time.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct EnergyBreakdown {
    pub kinetic: f64,
    pub mass_w: f64,
    pub d1: f64,
    pub d2: f64,
    pub q_alpha: f64,
    pub q_tilde: f64,
}

/// `Re[conj(v_p) psi]` and `Im[conj(v_p) psi]` per node.
fn projections(psi: &ComplexField, vp: &ComplexField) -> (Vec<f64>, Vec<f64>) {
    psi.samples().iter().zip(vp.samples()).map(|(p, v)| {
        let z = v.conj() * p;
        (z.re, z.im)
    }).unzip()
}

pub fn modified_energy(psi: &ComplexField, model: &ProfileModel, t: f64) -> Result<EnergyBreakdown> {
    check_time(t)?;
    psi.ensure_same_grid(model.datum().phi())?;
    let dx = psi.grid().spacing();
    let alpha = model.params().alpha;
    let norm2 = psi.l2_norm().powi(2);
    let kinetic = 0.25 * psi.derivative().l2_norm().powi(2);
    let mass_w = t.powf(-alpha) * norm2;
    let (mut d1, mut d2) = (0.0, 0.0);
    if !model.tables().is_empty() {
        let vp = model.profile_vp(t)?;
        let (re, _) = projections(psi, &vp);
        for tab in model.tables() {
            let sigma = tab.coupling.sigma;
            let quad: f64 = re.iter().zip(&tab.p2s2).map(|(r, w)| w * r * r).sum::<f64>() * dx;
            let d = tab.coupling.lambda * sigma * tab.coupling.weight(t) * quad;
            if sigma == 1.0 {
                d1 = d;
            } else {
                d2 = d;
            }
        }
    }
    let q_alpha = kinetic + mass_w + d1;
    Ok(EnergyBreakdown { kinetic, mass_w, d1, d2, q_alpha, q_tilde: q_alpha + d2 })
}

/// Right side of the modified energy identity for `d/dt Q~_alpha[psi(t)]`.
pub fn energy_identity_rhs(psi: &ComplexField, model: &ProfileModel, t: f64) -> Result<f64> {
    check_time(t)?;
    psi.ensure_same_grid(model.datum().phi())?;
    let dx = psi.grid().spacing();
    let alpha = model.params().alpha;
    let mut rhs = -alpha * t.powf(-alpha - 1.0) * psi.l2_norm().powi(2);
    if model.tables().is_empty() {
        return Ok(rhs);
    }
    let vp = model.profile_vp(t)?;
    let (re, im) = projections(psi, &vp);
    let dpsi = psi.derivative();
    let rp = model.re_phi_dphibar();
    for tab in model.tables() {
        let (lambda, sigma) = (tab.coupling.lambda, tab.coupling.sigma);
        let w = tab.coupling.weight(t);
        let mut rr = 0.0;
        let mut ri = 0.0;
        let mut grad = 0.0;
        for j in 0..re.len() {
            rr += tab.p2s2[j] * re[j] * re[j];
            ri += tab.p2s2[j] * re[j] * im[j];
            // Im( d_x psi * conj(weight * psi) )
            grad += tab.p2s2[j] * rp[j] * (dpsi.samples()[j] * psi.samples()[j].conj()).im;
        }
        rhs -= lambda * sigma * (2.0 - sigma) * (w / t) * rr * dx;
        rhs -= 4.0 * lambda * sigma * w * t.powf(-alpha) * ri * dx;
        rhs -= lambda * sigma * w * grad * dx;
    }
    Ok(rhs)
}

/// Energy-ratio audit over sampled initial states.
#[derive(Clone, Debug, Serialize)]
pub struct AuditReport {
    pub preset: Preset,
    pub focusing_lambda: f64,
    pub alpha: f64,
    pub mesh_intervals: usize,
    /// `sup Q_alpha(t) / Q_alpha(s)` over `s <= t` per state.
    pub state_ratios: Vec<f64>,
    pub sup_ratio: f64,
    /// `max |D2| / Q_alpha` over every state and node.
    pub d2_fraction: f64,
    pub min_q_alpha: f64,
}

/// Initial states at `t`: `v_p`, `i v_p`, two off-center bumps and
/// `random` seeded band-limited fields.
pub fn audit_states(model: &ProfileModel, t: f64, seed: u64, random: usize) -> Result<Vec<ComplexField>> {
    let grid = model.grid();
    let mut states = Vec::new();
    if !model.datum().is_zero() {
        let vp = model.profile_vp(t)?;
        states.push(vp.scale(C64::new(0.0, 1.0)));
        states.push(vp);
    }
    for (x0, k) in [(-4.0, 1.5), (3.0, -0.5)] {
        states.push(ComplexField::from_fn(grid, |x| {
            C64::from_polar((-(x - x0) * (x - x0)).exp(), k * x)
        }));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..random {
        states.push(ComplexField::random_band_limited(grid, &mut rng, 3.0, 3.0));
    }
    Ok(states)
}

/// Propagates every state from `t_min` through the mesh nodes up to `T`
/// and records the running energy ratios.
pub fn energy_ratio_audit(model: &ProfileModel, mesh: &TimeMesh, states: &[ComplexField], substeps: usize) -> Result<AuditReport> {
    let params = model.params();
    let sup_phi = model.datum().sup_norm();
    params.validate_alpha_window(sup_phi)?;
    let results: Vec<Result<(f64, f64, f64)>> = states
        .par_iter()
        .map(|psi0| {
            let nodes = mesh.nodes();
            let mut psi = psi0.clone();
            let mut running_min = f64::INFINITY;
            let mut ratio: f64 = 1.0;
            let mut d2: f64 = 0.0;
            let mut qmin = f64::INFINITY;
            for k in 0..nodes.len() {
                if k > 0 {
                    psi = propagate_uniform(&psi, nodes[k - 1], nodes[k], substeps, model)?;
                }
                let e = modified_energy(&psi, model, nodes[k])?;
                qmin = qmin.min(e.q_alpha);
                if e.q_alpha > 0.0 {
                    running_min = running_min.min(e.q_alpha);
                    ratio = ratio.max(e.q_alpha / running_min);
                    d2 = d2.max(e.d2.abs() / e.q_alpha);
                }
            }
            Ok((ratio, d2, qmin))
        })
        .collect();
    let mut state_ratios = Vec::with_capacity(states.len());
    let (mut d2_fraction, mut min_q_alpha) = (0.0f64, f64::INFINITY);
    for r in results {
        let (ratio, d2, qmin) = r?;
        state_ratios.push(ratio);
        d2_fraction = d2_fraction.max(d2);
        min_q_alpha = min_q_alpha.min(qmin);
    }
    let sup_ratio = state_ratios.iter().cloned().fold(0.0, f64::max);
    Ok(AuditReport {
        preset: params.preset(),
        focusing_lambda: params.focusing_lambda(sup_phi),
        alpha: params.alpha,
        mesh_intervals: mesh.intervals(),
        state_ratios,
        sup_ratio,
        d2_fraction,
        min_q_alpha,
    })
}

/// Centered-difference residual `|dQ~/dt - rhs|` at `t_c` for half-width
/// `h`, with `psi_minus` given at `t_c - h`.
pub fn identity_residual(psi_minus: &ComplexField, t_c: f64, h: f64, substeps: usize, model: &ProfileModel) -> Result<f64> {
    let psi_c = propagate_uniform(psi_minus, t_c - h, t_c, substeps, model)?;
    let psi_p = propagate_uniform(&psi_c, t_c, t_c + h, substeps, model)?;
    let q_m = modified_energy(psi_minus, model, t_c - h)?.q_tilde;
    let q_p = modified_energy(&psi_p, model, t_c + h)?.q_tilde;
    let rhs = energy_identity_rhs(&psi_c, model, t_c)?;
    Ok(((q_p - q_m) / (2.0 * h) - rhs).abs())
}

/// Observed orders of [`identity_residual`] under halving of `h`, starting
/// from a state propagated from `t0` to each `t_c - h`.
pub fn identity_residual_orders(psi0: &ComplexField, t0: f64, t_c: f64, h0: f64, levels: usize, substeps: usize, model: &ProfileModel) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut residuals = Vec::with_capacity(levels);
    for l in 0..levels {
        let h = h0 / (1u64 << l) as f64;
        let start = propagate_uniform(psi0, t0, t_c - h, 64, model)?;
        residuals.push(identity_residual(&start, t_c, h, substeps, model)?);
    }
    let orders = residuals.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    Ok((residuals, orders))
}
