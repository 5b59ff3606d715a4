//! Duhamel formulation for `v_* = v - v_p` and its Picard solution.
//!
//! With `e1(t) = R(t) v_p(t)` and
//! `e2 = sum_j lambda_j t^{sigma_j-2} (-R(t)(|phi|^{2 sigma_j} v_p) + (sigma_j+1)|phi|^{2 sigma_j} e1 + sigma_j |phi|^{2 sigma_j-2} v_p^2 conj(e1))`
//! the correction solves
//! `v_*(t) = e1(t) - \int_{t_min}^t U(t, s) i(G[v_*](s) + e2(s)) ds`
//! on the truncated interval `[t_min, T]`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, LabError, Result};
use crate::linearized::{modified_energy, propagate_uniform};
use crate::mesh::TimeMesh;
use crate::profiles::{check_time, ProfileModel};
use crate::quadrature::taylor_g_unchecked;
use crate::rates::fit_rate;
use crate::spectral::{remainder_r, ComplexField, C64};

/// One field per mesh node.
#[derive(Clone, Debug)]
pub struct Trajectory {
    mesh: TimeMesh,
    fields: Vec<ComplexField>,
}

impl Trajectory {
    pub fn new(mesh: TimeMesh, fields: Vec<ComplexField>) -> Result<Self> {
        if fields.len() != mesh.len() {
            return invalid(format!("{} fields for {} mesh nodes", fields.len(), mesh.len()));
        }
        if let Some(first) = fields.first() {
            for f in &fields[1..] {
                first.ensure_same_grid(f)?;
            }
        }
        Ok(Self { mesh, fields })
    }

    pub fn zeros(mesh: &TimeMesh, model: &ProfileModel) -> Self {
        let z = ComplexField::zeros(model.grid());
        Self { mesh: mesh.clone(), fields: vec![z; mesh.len()] }
    }

    /// `e1` at every node.
    pub fn from_e1(mesh: &TimeMesh, model: &ProfileModel) -> Result<Self> {
        let fields = mesh.nodes().par_iter().map(|&t| error_e1(model, t)).collect::<Result<Vec<_>>>()?;
        Ok(Self { mesh: mesh.clone(), fields })
    }

    pub fn mesh(&self) -> &TimeMesh {
        &self.mesh
    }

    pub fn fields(&self) -> &[ComplexField] {
        &self.fields
    }

    pub fn last(&self) -> &ComplexField {
        self.fields.last().expect("trajectories are non-empty")
    }

    pub fn difference(&self, other: &Trajectory) -> Result<Trajectory> {
        if self.mesh != other.mesh {
            return invalid("trajectories live on different meshes");
        }
        let fields = self.fields.iter().zip(&other.fields).map(|(a, b)| a - b).collect();
        Ok(Trajectory { mesh: self.mesh.clone(), fields })
    }

    /// `v = v_p + v_*` at every node.
    pub fn full_solution(&self, model: &ProfileModel) -> Result<Vec<ComplexField>> {
        self.mesh
            .nodes()
            .iter()
            .zip(&self.fields)
            .map(|(&t, f)| Ok(&model.profile_vp(t)? + f))
            .collect()
    }
}

/// `sup_k t_k^{-beta} (||d_x f_k|| + t_k^{-alpha/2} ||f_k||)`.
pub fn x_norm(vstar: &Trajectory, alpha: f64, beta: f64) -> f64 {
    vstar
        .mesh
        .nodes()
        .iter()
        .zip(&vstar.fields)
        .map(|(&t, f)| t.powf(-beta) * (f.derivative().l2_norm() + t.powf(-0.5 * alpha) * f.l2_norm()))
        .fold(0.0, f64::max)
}

/// `G[v_*](t) = sum_j lambda_j t^{sigma_j - 2} G_{sigma_j}[v_*]` around `v_p(t)`.
pub fn g_of(vstar: &ComplexField, model: &ProfileModel, t: f64) -> Result<ComplexField> {
    check_time(t)?;
    vstar.ensure_same_grid(model.datum().phi())?;
    let vp = model.profile_vp(t)?;
    Ok(g_with_profile(vstar, &vp, model, t))
}

fn g_with_profile(vstar: &ComplexField, vp: &ComplexField, model: &ProfileModel, t: f64) -> ComplexField {
    let weights: Vec<(f64, f64)> = model
        .tables()
        .iter()
        .map(|tab| (tab.coupling.lambda * tab.coupling.weight(t), tab.coupling.sigma))
        .collect();
    let samples: Vec<C64> = vp
        .samples()
        .par_iter()
        .zip(vstar.samples())
        .map(|(&z0, &zs)| weights.iter().map(|&(w, s)| taylor_g_unchecked(z0, zs, s) * w).sum())
        .collect();
    ComplexField::from_raw(vstar.grid(), samples)
}

pub fn error_e1(model: &ProfileModel, t: f64) -> Result<ComplexField> {
    check_time(t)?;
    remainder_r(&model.profile_vp(t)?, t)
}

pub fn error_e2(model: &ProfileModel, t: f64) -> Result<ComplexField> {
    check_time(t)?;
    let vp = model.profile_vp(t)?;
    let e1 = remainder_r(&vp, t)?;
    let mut out = ComplexField::zeros(model.grid());
    for tab in model.tables() {
        let (lambda, sigma) = (tab.coupling.lambda, tab.coupling.sigma);
        let w = lambda * tab.coupling.weight(t);
        let r = remainder_r(&vp.weighted(&tab.p2s), t)?;
        let samples: Vec<C64> = (0..vp.samples().len())
            .map(|j| {
                let (v, e) = (vp.samples()[j], e1.samples()[j]);
                -r.samples()[j] + e * ((sigma + 1.0) * tab.p2s[j]) + v * v * e.conj() * (sigma * tab.p2s2[j])
            })
            .collect();
        out = out.axpy(C64::new(w, 0.0), &ComplexField::from_raw(model.grid(), samples));
    }
    Ok(out)
}

/// Data of the Duhamel map that do not depend on the iterate.
pub struct DuhamelContext<'a> {
    model: &'a ProfileModel,
    mesh: TimeMesh,
    substeps: usize,
    e1: Vec<ComplexField>,
    /// Slab midpoints `sqrt(t_k t_{k+1})`.
    mids: Vec<f64>,
    vp_mid: Vec<ComplexField>,
    e2_mid: Vec<ComplexField>,
}

impl<'a> DuhamelContext<'a> {
    pub fn new(model: &'a ProfileModel, mesh: &TimeMesh, substeps: usize) -> Result<Self> {
        let nodes = mesh.nodes();
        let mids: Vec<f64> = nodes.windows(2).map(|w| (w[0] * w[1]).sqrt()).collect();
        let e1 = nodes.par_iter().map(|&t| error_e1(model, t)).collect::<Result<Vec<_>>>()?;
        let vp_mid = mids.par_iter().map(|&t| model.profile_vp(t)).collect::<Result<Vec<_>>>()?;
        let e2_mid = mids.par_iter().map(|&t| error_e2(model, t)).collect::<Result<Vec<_>>>()?;
        Ok(Self { model, mesh: mesh.clone(), substeps: substeps.max(1), e1, mids, vp_mid, e2_mid })
    }

    pub fn mesh(&self) -> &TimeMesh {
        &self.mesh
    }

    pub fn e1_trajectory(&self) -> Trajectory {
        Trajectory { mesh: self.mesh.clone(), fields: self.e1.clone() }
    }

    /// Forcing `i (G[v_m](t_m) + e2(t_m))` on slab `k`, with `v_m` the
    /// linear interpolant of the iterate at the slab midpoint.
    pub fn forcing(&self, vstar: &Trajectory, k: usize) -> ComplexField {
        let nodes = self.mesh.nodes();
        let (ta, tb, tm) = (nodes[k], nodes[k + 1], self.mids[k]);
        let theta = (tm - ta) / (tb - ta);
        let vm = vstar.fields[k].zip_map(&vstar.fields[k + 1], |a, b| a + (b - a) * theta);
        let g = g_with_profile(&vm, &self.vp_mid[k], self.model, tm);
        (&g + &self.e2_mid[k]).scale(C64::new(0.0, 1.0))
    }

    /// One application of the discrete Duhamel map.
    pub fn apply(&self, vstar: &Trajectory) -> Result<Trajectory> {
        if vstar.mesh != self.mesh {
            return invalid("iterate lives on a different mesh");
        }
        let nodes = self.mesh.nodes();
        let mut out = Vec::with_capacity(nodes.len());
        out.push(self.e1[0].clone());
        let mut integral = ComplexField::zeros(self.model.grid());
        for k in 0..nodes.len() - 1 {
            let (ta, tb, tm) = (nodes[k], nodes[k + 1], self.mids[k]);
            let f = self.forcing(vstar, k);
            let carried = propagate_uniform(&integral, ta, tb, self.substeps, self.model)?;
            let kick = propagate_uniform(&f, tm, tb, self.substeps, self.model)?;
            integral = carried.axpy(C64::new(tb - ta, 0.0), &kick);
            if let Some(j) = integral.samples().iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
                return Err(LabError::NumericalAbort {
                    node: k + 1,
                    time: tb,
                    detail: format!("non-finite Duhamel integral at grid point {j}"),
                });
            }
            out.push(&self.e1[k + 1] - &integral);
        }
        Ok(Trajectory { mesh: self.mesh.clone(), fields: out })
    }
}

/// `Phi[v_*]` with a fresh context.
pub fn phi_map(vstar: &Trajectory, model: &ProfileModel, substeps: usize) -> Result<Trajectory> {
    DuhamelContext::new(model, &vstar.mesh, substeps)?.apply(vstar)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialIterate {
    /// `v^(0) = e1`
    E1,
    Zero,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub substeps: usize,
    pub initial: InitialIterate,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-9, max_iter: 60, substeps: 4, initial: InitialIterate::E1 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct IterationReport {
    pub iterations: usize,
    /// X-norm of each iterate, starting with the initial one.
    pub x_norms: Vec<f64>,
    /// `||v^(n+1) - v^(n)||_X`.
    pub diff_history: Vec<f64>,
    /// `diff_{n+1} / diff_n`.
    pub factor_history: Vec<f64>,
    /// `||Phi[v^(0)] - v||_X / ||v^(0) - v||_X` for the returned fixed point
    /// `v` (0 when the initial iterate is already the fixed point).
    pub contraction_factor: f64,
    pub max_factor: f64,
    /// `max_n ||v^(n)||_X`.
    pub ball_radius: f64,
    /// `||v - Phi[v]||_X` for the returned iterate.
    pub residual: f64,
    /// Envelope bound of the untreated `(0, t_min]` Duhamel contribution.
    pub tail_bound: f64,
    /// Fitted exponent `p` of `sqrt(Q_alpha[forcing])(t) ~ t^p` near `t_min`.
    pub tail_forcing_exponent: f64,
}

fn factors(diffs: &[f64]) -> Vec<f64> {
    diffs.windows(2).map(|w| if w[0] > 0.0 { w[1] / w[0] } else { 0.0 }).collect()
}

/// Picard iteration `v^(n+1) = Phi[v^(n)]` until the X-norm difference
/// falls below `tol`.
pub fn solve_fixed_point(model: &ProfileModel, mesh: &TimeMesh, opts: SolverOptions) -> Result<(Trajectory, IterationReport)> {
    let ctx = DuhamelContext::new(model, mesh, opts.substeps)?;
    solve_with_context(&ctx, opts)
}

pub fn solve_with_context(ctx: &DuhamelContext<'_>, opts: SolverOptions) -> Result<(Trajectory, IterationReport)> {
    if !(opts.tol > 0.0) || opts.max_iter == 0 {
        return invalid("solver needs tol > 0 and max_iter >= 1");
    }
    let params = ctx.model.params();
    let (alpha, beta) = (params.alpha, params.beta);
    let mut v = match opts.initial {
        InitialIterate::E1 => ctx.e1_trajectory(),
        InitialIterate::Zero => Trajectory::zeros(&ctx.mesh, ctx.model),
    };
    let initial = v.clone();
    let mut first = None;
    let mut x_norms = vec![x_norm(&v, alpha, beta)];
    let mut diffs = Vec::new();
    let mut converged = false;
    for _ in 0..opts.max_iter {
        let next = ctx.apply(&v)?;
        let d = x_norm(&next.difference(&v)?, alpha, beta);
        if first.is_none() {
            first = Some(next.clone());
        }
        v = next;
        x_norms.push(x_norm(&v, alpha, beta));
        diffs.push(d);
        if d < opts.tol {
            converged = true;
            break;
        }
    }
    let factor_history = factors(&diffs);
    if !converged {
        return Err(LabError::NoContraction {
            iterations: diffs.len(),
            last_factor: factor_history.last().copied().unwrap_or(f64::NAN),
            factor_history,
            diff_history: diffs,
        });
    }
    let residual = x_norm(&ctx.apply(&v)?.difference(&v)?, alpha, beta);
    let spread = x_norm(&initial.difference(&v)?, alpha, beta);
    let contraction_factor = match first {
        Some(first) if spread > 0.0 => x_norm(&first.difference(&v)?, alpha, beta) / spread,
        _ => 0.0,
    };
    let (tail_bound, tail_forcing_exponent) = tail_bound(ctx, &v)?;
    let report = IterationReport {
        iterations: diffs.len(),
        ball_radius: x_norms.iter().cloned().fold(0.0, f64::max),
        x_norms,
        max_factor: factor_history.iter().cloned().fold(0.0, f64::max),
        contraction_factor,
        factor_history,
        diff_history: diffs,
        residual,
        tail_bound,
        tail_forcing_exponent,
    };
    Ok((v, report))
}

/// Fits `sqrt(Q_alpha[F])(t) ~ c t^p` on the first slabs and bounds the
/// omitted contribution by `3 t_min^{-beta} \int_0^{t_min} c s^p ds`.
fn tail_bound(ctx: &DuhamelContext<'_>, v: &Trajectory) -> Result<(f64, f64)> {
    let slabs = ctx.mids.len().min(8);
    let mut series = Vec::with_capacity(slabs);
    for k in 0..slabs {
        let f = ctx.forcing(v, k);
        let q = modified_energy(&f, ctx.model, ctx.mids[k])?.q_alpha;
        if q > 0.0 {
            series.push((ctx.mids[k], q.sqrt()));
        }
    }
    if series.len() < 5 {
        return Ok((0.0, f64::NAN));
    }
    let fit = fit_rate(&series)?;
    let t_min = ctx.mesh.t_min();
    let beta = ctx.model.params().beta;
    if fit.slope <= -1.0 {
        return Ok((f64::INFINITY, fit.slope));
    }
    let integral = fit.intercept.exp() * t_min.powf(fit.slope + 1.0) / (fit.slope + 1.0);
    Ok((3.0 * t_min.powf(-beta) * integral, fit.slope))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::ModelParams;
    use crate::profiles::ScatteringDatum;
    use crate::quadrature::identity_defect;
    use crate::spectral::Grid;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn model_with(amplitude: f64, p: ModelParams, n: usize) -> ProfileModel {
        let g = Grid::with_size(n, 20.0).unwrap();
        ProfileModel::new(Arc::new(ScatteringDatum::gaussian(&g, amplitude, 3.0).unwrap()), p)
    }

    fn random_small(m: &ProfileModel, seed: u64, size: f64) -> ComplexField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ComplexField::random_band_limited(m.grid(), &mut rng, 2.0, 3.0).scale_real(size)
    }

    fn max_diff(a: &ComplexField, b: &ComplexField) -> f64 {
        a.samples().iter().zip(b.samples()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn g_trivial_and_cubic() {
        let m = model_with(1.0, ModelParams::defocusing(), 256);
        let t = 0.2;
        assert_eq!(g_of(&ComplexField::zeros(m.grid()), &m, t).unwrap().linf_norm(), 0.0);
        let vs = random_small(&m, 1, 0.1);
        let g = g_of(&vs, &m, t).unwrap();
        let vp = m.profile_vp(t).unwrap();
        let expect = vp.zip_map(&vs, |p, s| (p.conj() * s * s + p * 2.0 * s.norm_sqr() + s * s.norm_sqr()) / t);
        assert!(max_diff(&g, &expect) < 1e-14);
        assert!(g_of(&vs, &m, 0.0).is_err());
    }

    #[test]
    fn g_is_nonlinearity_minus_linear_part() {
        // Oracle: sum_j lambda_j t^{s_j-2} (|v|^{2 s_j} v - |v_p|^{2 s_j} v_p) - V v_* - G = 0.
        let p = ModelParams { lambda2: 0.6, ..ModelParams::defocusing() };
        let m = model_with(1.4, p, 256);
        let t = 0.07;
        let vs = random_small(&m, 2, 0.3);
        let g = g_of(&vs, &m, t).unwrap();
        let lin = crate::linearized::potential_apply(&crate::linearized::PairField::new(vs.clone()), &m, t).unwrap();
        let vp = m.profile_vp(t).unwrap();
        for j in 0..vs.samples().len() {
            let (z0, zs) = (vp.samples()[j], vs.samples()[j]);
            let z1 = z0 + zs;
            let mut diff = C64::new(0.0, 0.0);
            for (l, s) in [(1.0, 1.0), (0.6, 1.5)] {
                let w = l * t.powf(s - 2.0);
                diff += (z1 * z1.norm().powf(2.0 * s) - z0 * z0.norm().powf(2.0 * s)) * w;
            }
            let defect = diff - lin.samples()[j] - g.samples()[j];
            assert!(defect.norm() < 1e-10 * (1.0 + diff.norm()), "node {j}: {defect}");
            let _ = identity_defect;
        }
    }

    #[test]
    fn g_quadratic_smallness_constant_is_stable() {
        let p = ModelParams { lambda2: 0.6, ..ModelParams::defocusing() };
        let t = 0.1;
        let mut constants = Vec::new();
        for n in [256, 512] {
            let m = model_with(1.0, p, n);
            let mut c: f64 = 0.0;
            for eps in [1e-3, 1e-2, 1e-1] {
                let vs = random_small(&m, 3, eps);
                let g = g_of(&vs, &m, t).unwrap();
                let s = vs.linf_norm();
                c = c.max(g.l2_norm() / ((s.powi(3) + s) * vs.l2_norm()));
            }
            constants.push(c);
        }
        assert!((constants[0] - constants[1]).abs() <= 0.1 * constants[0], "{constants:?}");
    }

    #[test]
    fn zero_datum_errors_vanish() {
        let m = model_with(0.0, ModelParams::defocusing(), 128);
        assert_eq!(error_e1(&m, 0.01).unwrap().linf_norm(), 0.0);
        assert_eq!(error_e2(&m, 0.01).unwrap().linf_norm(), 0.0);
        let uncoupled = model_with(1.0, ModelParams { lambda1: 0.0, lambda2: 0.0, ..ModelParams::defocusing() }, 128);
        assert_eq!(error_e2(&uncoupled, 0.01).unwrap().linf_norm(), 0.0);
    }

    #[test]
    fn e1_decays_at_least_linearly() {
        let m = model_with(0.25, ModelParams::defocusing(), 1024);
        let series: Vec<_> = crate::rates::log_space(1e-3, 1e-1, 9)
            .into_iter()
            .map(|t| (t, error_e1(&m, t).unwrap().l2_norm()))
            .collect();
        let fit = fit_rate(&series).unwrap();
        assert!(fit.slope >= 1.0 - 0.15, "slope {}", fit.slope);
    }

    #[test]
    fn phi_map_basic_properties() {
        let m = model_with(1.0, ModelParams::defocusing(), 256);
        let mesh = TimeMesh::new(0.1, 1e-3, 20).unwrap();
        let v = Trajectory::from_e1(&mesh, &m).unwrap();
        let out = phi_map(&v, &m, 2).unwrap();
        assert!(max_diff(&out.fields()[0], &v.fields()[0]) == 0.0);
        let zero = model_with(0.0, ModelParams::defocusing(), 256);
        let z = Trajectory::zeros(&mesh, &zero);
        let out = phi_map(&z, &zero, 2).unwrap();
        assert!(out.fields().iter().all(|f| f.linf_norm() == 0.0));
    }

    #[test]
    fn phi_map_slab_rule_is_second_order() {
        let m = model_with(2.0, ModelParams::defocusing(), 256);
        let base = TimeMesh::new(0.1, 1e-3, 100).unwrap();
        let outs: Vec<Trajectory> = [1, 2, 4]
            .iter()
            .map(|&f| {
                let mesh = base.refined(f);
                phi_map(&Trajectory::from_e1(&mesh, &m).unwrap(), &m, 2).unwrap()
            })
            .collect();
        let gap = |a: &Trajectory, b: &Trajectory, stride: usize| {
            (0..a.fields().len()).map(|k| (&a.fields()[k] - &b.fields()[k * stride]).l2_norm()).fold(0.0, f64::max)
        };
        let d1 = gap(&outs[0], &outs[1], 2);
        let d2 = gap(&outs[1], &outs[2], 2);
        let order = (d1 / d2).log2();
        assert!(order >= 1.8, "order {order} ({d1:e}, {d2:e})");
    }

    #[test]
    fn x_norm_cases() {
        let m = model_with(1.0, ModelParams::defocusing(), 256);
        let mesh = TimeMesh::new(0.1, 1e-3, 10).unwrap();
        assert_eq!(x_norm(&Trajectory::zeros(&mesh, &m), 0.75, 0.2), 0.0);
        // single mode scaled so ||f|| = t^{beta+alpha/2}, ||f'|| = t^beta
        let g = m.grid();
        let (alpha, beta) = (0.75, 0.2);
        let fields: Vec<ComplexField> = mesh
            .nodes()
            .iter()
            .map(|&t| {
                let xi = 1.0 / t.powf(alpha / 2.0);
                let k = (xi / g.spec().frequency_spacing()).round();
                let xi = k * g.spec().frequency_spacing();
                let mode = ComplexField::from_fn(g, |x| C64::from_polar(1.0, xi * x));
                let n = mode.l2_norm();
                mode.scale_real(t.powf(beta) / (xi * n))
            })
            .collect();
        let traj = Trajectory::new(mesh.clone(), fields).unwrap();
        // the manufactured norms hold up to the frequency rounding
        let rounded: f64 = traj
            .mesh()
            .nodes()
            .iter()
            .zip(traj.fields())
            .map(|(&t, f)| t.powf(-beta) * (f.derivative().l2_norm() + t.powf(-alpha / 2.0) * f.l2_norm()))
            .fold(0.0, f64::max);
        assert_eq!(x_norm(&traj, alpha, beta), rounded);
        assert!((rounded - 2.0).abs() < 0.05);
    }

    #[test]
    fn zero_datum_converges_immediately() {
        let m = model_with(0.0, ModelParams::defocusing(), 128);
        let mesh = TimeMesh::new(0.1, 1e-3, 10).unwrap();
        let (v, r) = solve_fixed_point(&m, &mesh, SolverOptions::default()).unwrap();
        assert_eq!(r.iterations, 1);
        assert!(v.fields().iter().all(|f| f.linf_norm() == 0.0));
    }

    #[test]
    fn small_problem_contracts_and_is_unique() {
        let m = model_with(1.0, ModelParams::defocusing(), 256);
        let mesh = TimeMesh::new(0.1, 1e-3, 30).unwrap();
        let opts = SolverOptions { tol: 1e-10, ..SolverOptions::default() };
        let (a, ra) = solve_fixed_point(&m, &mesh, opts).unwrap();
        assert!(ra.contraction_factor < 1.0);
        assert!(ra.residual <= opts.tol);
        let (b, _) = solve_fixed_point(&m, &mesh, SolverOptions { initial: InitialIterate::Zero, ..opts }).unwrap();
        assert!(x_norm(&a.difference(&b).unwrap(), 0.75, 0.2) <= 10.0 * opts.tol);
    }
}
