//! Norm bridges between the u-picture (`t_u >= 1`) and the v-picture
//! (`t_v = 1 / t_u`), and a closed-form check of the Dollard factorization
//! `e^{-i t H_0} = M(t) D(t) F M(t)`.

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::spectral::{ComplexField, C64};

/// A pseudo-conformal time pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NormBridge {
    pub t_u: f64,
    pub t_v: f64,
}

impl NormBridge {
    pub fn new(t_u: f64) -> Result<Self> {
        if !(t_u.is_finite() && t_u >= 1.0) {
            return invalid(format!("bridge time t_u = {t_u} must be >= 1"));
        }
        Ok(Self { t_u, t_v: 1.0 / t_u })
    }

    /// `|t_u t_v - 1|`, which is at most one rounding unit.
    pub fn defect(&self) -> f64 {
        (self.t_u * self.t_v - 1.0).abs()
    }
}

/// u-picture norms recovered from v-picture fields.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct UGapNorms {
    /// `||x e^{i t H_0}(u - u~_p)|| = ||d_x (v - v_p)||`
    pub weighted_gap: f64,
    /// `||u - u~_p|| = ||v - v_p||`
    pub l2_gap: f64,
    /// `||u||_inf = t_u^{-1/2} ||v||_inf`
    pub linf_u: f64,
}

impl UGapNorms {
    /// `||<x> e^{i t H_0}(u - u~_p)||`.
    pub fn bracket_gap(&self) -> f64 {
        self.l2_gap.hypot(self.weighted_gap)
    }
}

pub fn u_gap_norms(v: &ComplexField, vp: &ComplexField, bridge: NormBridge) -> Result<UGapNorms> {
    v.ensure_same_grid(vp)?;
    let gap = v - vp;
    Ok(UGapNorms {
        weighted_gap: gap.derivative().l2_norm(),
        l2_gap: gap.l2_norm(),
        linf_u: v.linf_norm() / bridge.t_u.sqrt(),
    })
}

fn free_gaussian(t: f64, x: f64) -> C64 {
    let a = C64::new(1.0, t);
    a.powf(-0.5) * (-x * x / (2.0 * a)).exp()
}

/// `M(t) D(t) F M(t)` applied to `e^{-x^2/2}`, in closed form.
fn dollard_gaussian(t: f64, x: f64) -> C64 {
    // M(t) e^{-x^2/2} = e^{-a x^2/2}, F maps it to a^{-1/2} e^{-xi^2/(2a)}.
    let a = C64::new(1.0, -1.0 / t);
    let it = C64::new(0.0, t);
    let chirp = C64::from_polar(1.0, x * x / (2.0 * t));
    chirp * it.powf(-0.5) * a.powf(-0.5) * (-x * x / (2.0 * t * t * a)).exp()
}

/// Largest mismatch between the two sides of the Dollard factorization on
/// `A e^{-x^2/2}`, sampled at `samples` points of `[-x_max, x_max]`.
pub fn dollard_check_scaled(t: f64, amplitude: f64, x_max: f64, samples: usize) -> Result<f64> {
    if !(t.is_finite() && t > 0.0) {
        return invalid(format!("dollard_check: time {t} must be positive"));
    }
    let n = samples.max(2);
    Ok((0..n)
        .map(|j| {
            let x = -x_max + 2.0 * x_max * j as f64 / (n - 1) as f64;
            (amplitude * (free_gaussian(t, x) - dollard_gaussian(t, x))).norm()
        })
        .fold(0.0, f64::max))
}

pub fn dollard_check(t: f64) -> Result<f64> {
    dollard_check_scaled(t, 1.0, 20.0, 2001)
}
