//! Flat `key = value` scenario files.
//!
//! Lines are `key = value`; `#` starts a comment. Keys missing from the file
//! keep the defocusing defaults of [`Scenario::defocusing_default`].

use std::path::Path;
use std::sync::Arc;

use modscat_core::experiments::Scenario;
use modscat_core::profiles::read_table;
use modscat_core::{DatumKind, Grid, GridSpec, LabError, Result, ScatteringDatum};

/// Every accepted key, in documentation order.
pub const KEYS: [&str; 21] = [
    "grid.n",
    "grid.L",
    "mesh.T",
    "mesh.tmin",
    "mesh.K",
    "mesh.substeps",
    "model.lambda1",
    "model.lambda2",
    "model.sigma",
    "model.alpha",
    "model.beta",
    "model.epsilon",
    "audit.delta",
    "audit.nu",
    "datum.kind",
    "datum.A",
    "datum.width",
    "datum.file",
    "tol.fixedpoint",
    "fixedpoint.max_iter",
    "seed",
];

fn bad(line: usize, msg: impl std::fmt::Display) -> LabError {
    LabError::InvalidInput(format!("config line {line}: {msg}"))
}

fn number<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| bad(line, format!("`{key}` expects a number, got `{value}`")))
}

/// Parses `text`; `datum.file` is resolved against `base_dir`.
pub fn parse(text: &str, base_dir: &Path) -> Result<Scenario> {
    let mut sc = Scenario::defocusing_default();
    let (mut n, mut half_width) = (sc.grid.n_points(), sc.grid.half_width());
    let mut file = None;
    let mut seen = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(bad(line, format!("expected `key = value`, got `{content}`")));
        };
        let (key, value) = (key.trim(), value.trim());
        if !KEYS.contains(&key) {
            return Err(bad(line, format!("unknown key `{key}`")));
        }
        if seen.contains(&key) {
            return Err(bad(line, format!("duplicate key `{key}`")));
        }
        seen.push(key);
        let p = &mut sc.params;
        match key {
            "grid.n" => n = number(line, key, value)?,
            "grid.L" => half_width = number(line, key, value)?,
            "mesh.T" => sc.t_max = number(line, key, value)?,
            "mesh.tmin" => sc.t_min = number(line, key, value)?,
            "mesh.K" => sc.intervals = number(line, key, value)?,
            "mesh.substeps" => sc.substeps = number(line, key, value)?,
            "model.lambda1" => p.lambda1 = number(line, key, value)?,
            "model.lambda2" => p.lambda2 = number(line, key, value)?,
            "model.sigma" => p.sigma = number(line, key, value)?,
            "model.alpha" => p.alpha = number(line, key, value)?,
            "model.beta" => p.beta = number(line, key, value)?,
            "model.epsilon" => p.epsilon_reg = number(line, key, value)?,
            "audit.delta" => p.delta_audit = number(line, key, value)?,
            "audit.nu" => p.nu_audit = number(line, key, value)?,
            "datum.kind" => sc.datum = value.parse::<DatumKind>().map_err(|e| bad(line, e))?,
            "datum.A" => sc.amplitude = number(line, key, value)?,
            "datum.width" => sc.width = number(line, key, value)?,
            "datum.file" => file = Some(base_dir.join(value)),
            "tol.fixedpoint" => sc.tol = number(line, key, value)?,
            "fixedpoint.max_iter" => sc.max_iter = number(line, key, value)?,
            "seed" => sc.seed = number(line, key, value)?,
            _ => unreachable!("key list and match arms agree"),
        }
    }
    sc.grid = GridSpec::new(n, half_width)?;
    match (sc.datum, file) {
        (DatumKind::Tabulated, Some(path)) => {
            let text = std::fs::read_to_string(&path)
                .map_err(|e| LabError::InvalidInput(format!("cannot read {}: {e}", path.display())))?;
            let grid = Grid::new(sc.grid);
            let phi = read_table(&grid, &text)?;
            let datum = ScatteringDatum::tabulated(phi);
            sc.amplitude = datum.sup_norm();
            sc.table = Some(Arc::new(datum));
        }
        (DatumKind::Tabulated, None) => return Err(LabError::InvalidInput("datum.kind = tabulated needs datum.file".into())),
        (_, Some(_)) => return Err(LabError::InvalidInput("datum.file is only read with datum.kind = tabulated".into())),
        (_, None) => {}
    }
    Ok(sc)
}

pub fn load(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| LabError::InvalidInput(format!("cannot read {}: {e}", path.display())))?;
    parse(&text, path.parent().unwrap_or(Path::new(".")))
}
