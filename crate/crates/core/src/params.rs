//! Model couplings, exponents and the admissible parameter windows.

use serde::Serialize;

use crate::error::{invalid, LabError, Result};

/// Couplings and exponents of
/// `i u_t - H_0 u = lambda1 |u|^2 u + lambda2 |u|^{2 sigma} u`.
///
/// The cubic power `sigma_1 = 1` is fixed; `sigma` is the short-range power.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ModelParams {
    pub lambda1: f64,
    pub lambda2: f64,
    pub sigma: f64,
    pub alpha: f64,
    pub beta: f64,
    pub epsilon_reg: f64,
    pub delta_audit: f64,
    pub nu_audit: f64,
    pub gamma_rate: f64,
}

/// One term `lambda t^{sigma - 2} |v|^{2 sigma} v` of the transformed nonlinearity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Coupling {
    pub lambda: f64,
    pub sigma: f64,
}

impl Coupling {
    /// `t^{sigma - 2}`.
    pub fn weight(&self, t: f64) -> f64 {
        t.powf(self.sigma - 2.0)
    }

    /// Antiderivative of [`Coupling::weight`]: `log t` for `sigma = 1`,
    /// `t^{sigma-1} / (sigma - 1)` otherwise.
    pub fn phase_integral(&self, t: f64) -> f64 {
        if self.sigma == 1.0 {
            t.ln()
        } else {
            t.powf(self.sigma - 1.0) / (self.sigma - 1.0)
        }
    }

    /// `\int_a^b s^{sigma-2} ds`, evaluated without cancellation for close endpoints.
    pub fn weight_integral(&self, a: f64, b: f64) -> f64 {
        if self.sigma == 1.0 {
            (b / a).ln()
        } else {
            let p = self.sigma - 1.0;
            // b^p - a^p = a^p (exp(p log(b/a)) - 1)
            a.powf(p) * (p * (b / a).ln()).exp_m1() / p
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Defocusing,
    Focusing,
    /// `lambda1 = 0`; no window applies.
    Uncoupled,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self::defocusing()
    }
}

impl ModelParams {
    pub fn defocusing() -> Self {
        Self {
            lambda1: 1.0,
            lambda2: 0.0,
            sigma: 1.5,
            alpha: 0.75,
            beta: 0.2,
            epsilon_reg: 1.0,
            delta_audit: 1.0,
            nu_audit: 0.05,
            gamma_rate: 0.1,
        }
    }

    pub fn focusing() -> Self {
        Self { lambda1: -1.0, alpha: 1.2, beta: 0.15, ..Self::defocusing() }
    }

    /// Checks ranges that do not depend on the datum.
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.lambda1,
            self.lambda2,
            self.sigma,
            self.alpha,
            self.beta,
            self.epsilon_reg,
            self.delta_audit,
            self.nu_audit,
            self.gamma_rate,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return invalid("model parameters must be finite");
        }
        if !(self.sigma > 1.0 && self.sigma < 2.0) {
            return Err(LabError::ParameterWindow {
                what: format!("sigma = {}", self.sigma),
                admissible: "1 < sigma < 2".into(),
            });
        }
        if self.alpha < 0.0 {
            return invalid(format!("alpha = {} must be non-negative", self.alpha));
        }
        if self.epsilon_reg <= 0.0 || self.nu_audit <= 0.0 || self.gamma_rate <= 0.0 {
            return invalid("epsilon, nu and gamma must be positive");
        }
        if !(self.delta_audit > 0.5 && self.delta_audit <= 1.0) {
            return invalid(format!("delta = {} must lie in (1/2, 1]", self.delta_audit));
        }
        Ok(())
    }

    pub fn preset(&self) -> Preset {
        if self.lambda1 > 0.0 {
            Preset::Defocusing
        } else if self.lambda1 < 0.0 {
            Preset::Focusing
        } else {
            Preset::Uncoupled
        }
    }

    /// `Lambda = 2 |lambda1| ||phi||_inf^2`.
    pub fn focusing_lambda(&self, phi_sup: f64) -> f64 {
        2.0 * self.lambda1.abs() * phi_sup * phi_sup
    }

    /// The `alpha` window of the focusing energy estimate, `(max{1, Lambda}, 2)`.
    pub fn focusing_alpha_window(&self, phi_sup: f64) -> (f64, f64) {
        (self.focusing_lambda(phi_sup).max(1.0), 2.0)
    }

    /// Rejects `alpha` outside the focusing window (and data above the
    /// threshold). Defocusing and uncoupled parameters pass.
    pub fn validate_alpha_window(&self, phi_sup: f64) -> Result<()> {
        if self.preset() != Preset::Focusing {
            return Ok(());
        }
        let strength = self.lambda1.abs() * phi_sup * phi_sup;
        if strength >= 1.0 {
            return Err(LabError::ParameterWindow {
                what: format!("|lambda1| ||phi||_inf^2 = {strength}"),
                admissible: "|lambda1| ||phi||_inf^2 < 1".into(),
            });
        }
        let (lo, hi) = self.focusing_alpha_window(phi_sup);
        if !(self.alpha > lo && self.alpha < hi) {
            return Err(LabError::ParameterWindow {
                what: format!("alpha = {}", self.alpha),
                admissible: format!("({lo}, {hi})"),
            });
        }
        Ok(())
    }

    /// Full window check for the existence theorems, including `beta`.
    pub fn validate_window(&self, phi_sup: f64) -> Result<()> {
        self.validate()?;
        match self.preset() {
            Preset::Defocusing => {
                if !(self.alpha >= 2.0 / 3.0 && self.alpha < 1.0) {
                    return Err(LabError::ParameterWindow {
                        what: format!("alpha = {}", self.alpha),
                        admissible: "[2/3, 1)".into(),
                    });
                }
                let cap = (self.epsilon_reg / 2.0).min(0.5);
                if !(self.beta > 0.0 && self.beta < cap) {
                    return Err(LabError::ParameterWindow {
                        what: format!("beta = {}", self.beta),
                        admissible: format!("(0, {cap})"),
                    });
                }
            }
            Preset::Focusing => {
                self.validate_alpha_window(phi_sup)?;
                let cap = (self.epsilon_reg / 2.0).min(1.0 - self.alpha / 2.0);
                if !(self.beta > 0.0 && self.beta < cap) {
                    return Err(LabError::ParameterWindow {
                        what: format!("beta = {}", self.beta),
                        admissible: format!("(0, {cap})"),
                    });
                }
            }
            Preset::Uncoupled => {
                if self.beta <= 0.0 {
                    return invalid(format!("beta = {} must be positive", self.beta));
                }
            }
        }
        Ok(())
    }

    /// Nonzero couplings, cubic term first.
    pub fn couplings(&self) -> Vec<Coupling> {
        [
            Coupling { lambda: self.lambda1, sigma: 1.0 },
            Coupling { lambda: self.lambda2, sigma: self.sigma },
        ]
        .into_iter()
        .filter(|c| c.lambda != 0.0)
        .collect()
    }
}
