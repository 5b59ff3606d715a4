//! Numerical construction of modified wave operators for the
//! one-dimensional NLS
//! `i u_t + (1/2) u_xx = lambda1 |u|^2 u + lambda2 |u|^{2 sigma} u`, `1 < sigma < 2`.
//!
//! The pseudo-conformal transform maps large times for `u` to small times
//! for `v`. Writing `v = v_p + v_*` and linearizing around the profile
//! `v_p` gives a Duhamel equation for `v_*` that is solved by Picard
//! iteration on a geometric time mesh.

pub mod conformal;
pub mod error;
pub mod evolver;
pub mod experiments;
pub mod fixedpoint;
pub mod linearized;
pub mod mesh;
pub mod params;
pub mod profiles;
pub mod quadrature;
pub mod rates;
pub mod spectral;

pub use error::{LabError, Result};
pub use mesh::TimeMesh;
pub use params::{ModelParams, Preset};
pub use profiles::{DatumKind, ProfileModel, ScatteringDatum};
pub use spectral::{ComplexField, Grid, GridSpec, C64};
