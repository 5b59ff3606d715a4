//! Geometric time mesh on `[t_min, T]`.

use serde::Serialize;

use crate::error::{invalid, Result};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TimeMesh {
    t_max: f64,
    t_min: f64,
    intervals: usize,
    #[serde(skip)]
    nodes: Vec<f64>,
}

impl TimeMesh {
    /// Nodes `t_k = t_min (T / t_min)^{k/K}`, `k = 0..=K`.
    pub fn new(t_max: f64, t_min: f64, intervals: usize) -> Result<Self> {
        if !(t_min.is_finite() && t_max.is_finite() && t_min > 0.0 && t_min < t_max && t_max <= 1.0) {
            return invalid(format!("mesh needs 0 < t_min < T <= 1, got t_min = {t_min}, T = {t_max}"));
        }
        if intervals == 0 {
            return invalid("mesh needs at least one interval");
        }
        let log_ratio = (t_max / t_min).ln();
        let mut nodes: Vec<f64> = (0..=intervals)
            .map(|k| t_min * (log_ratio * k as f64 / intervals as f64).exp())
            .collect();
        nodes[0] = t_min;
        nodes[intervals] = t_max;
        Ok(Self { t_max, t_min, intervals, nodes })
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn t_min(&self) -> f64 {
        self.t_min
    }

    /// `K`, the number of intervals.
    pub fn intervals(&self) -> usize {
        self.intervals
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn ratio(&self) -> f64 {
        (self.t_max / self.t_min).powf(1.0 / self.intervals as f64)
    }

    /// Same range with `factor` times as many intervals.
    pub fn refined(&self, factor: usize) -> Self {
        Self::new(self.t_max, self.t_min, self.intervals * factor.max(1)).expect("refining a valid mesh")
    }

    pub fn contains(&self, t: f64) -> bool {
        let slack = 1e-12 * self.t_max;
        t >= self.t_min - slack && t <= self.t_max + slack
    }

    /// Mesh nodes strictly inside `(s, t)`.
    pub fn interior(&self, s: f64, t: f64) -> impl Iterator<Item = f64> + '_ {
        self.nodes.iter().copied().filter(move |&x| x > s && x < t)
    }
}
