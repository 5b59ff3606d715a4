//! Output directory layout, `summary.json` and exit-code mapping.

use std::fs;
use std::path::{Path, PathBuf};

use modscat_core::experiments::{Outcome, Scenario, Table, SCHEMA_VERSION};
use modscat_core::LabError;
use serde::Serialize;
use serde_json::{json, Value};

/// A run that could not produce a verdict.
#[derive(Debug)]
pub enum Failure {
    /// Bad configuration or parameters (exit 2).
    Config(LabError),
    /// An error raised while computing (exit 2 or 3 by kind).
    Run(LabError),
    Io(PathBuf, std::io::Error),
}

impl Failure {
    pub fn from_run(e: LabError) -> Self {
        Failure::Run(e)
    }

    pub fn code(&self) -> u8 {
        match self {
            Failure::Run(LabError::NumericalAbort { .. }) => 3,
            Failure::Run(LabError::NoContraction { .. }) => 1,
            _ => 2,
        }
    }

    pub fn message(&self) -> String {
        match self {
            Failure::Config(e) | Failure::Run(e) => format!("error: {e}"),
            Failure::Io(p, e) => format!("error: {}: {e}", p.display()),
        }
    }
}

pub struct Report {
    out: PathBuf,
    command: String,
    seed: u64,
    scenario: Value,
    criteria: Vec<Value>,
    extra: serde_json::Map<String, Value>,
}

fn write(path: &Path, body: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Failure::Io(dir.to_path_buf(), e))?;
    }
    fs::write(path, body).map_err(|e| Failure::Io(path.to_path_buf(), e))
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

impl Report {
    pub fn new(command: &str, sc: &Scenario, out: &Path) -> Result<Self, Failure> {
        fs::create_dir_all(out).map_err(|e| Failure::Io(out.to_path_buf(), e))?;
        Ok(Self {
            out: out.to_path_buf(),
            command: command.into(),
            seed: sc.seed,
            scenario: to_value(sc),
            criteria: Vec::new(),
            extra: serde_json::Map::new(),
        })
    }

    pub fn tables(&self, experiment: &str, tables: &[Table]) -> Result<(), Failure> {
        for t in tables {
            write(&self.out.join(experiment).join(format!("{}.csv", t.name)), &t.to_csv())?;
        }
        Ok(())
    }

    pub fn text(&self, experiment: &str, file: &str, body: &str) -> Result<(), Failure> {
        write(&self.out.join(experiment).join(file), body)
    }

    pub fn outcome(&mut self, o: Outcome) -> Result<(), Failure> {
        self.tables(&o.name, &o.tables)?;
        self.criteria.push(to_value(&o));
        Ok(())
    }

    pub fn no_contraction(&mut self, name: &str, factors: &[f64], diffs: &[f64]) -> Result<(), Failure> {
        let mut t = Table::new("iterations", &["iteration", "difference", "factor"]);
        for (k, d) in diffs.iter().enumerate() {
            let f = if k == 0 { f64::NAN } else { factors.get(k - 1).copied().unwrap_or(f64::NAN) };
            t.push(vec![(k + 1) as f64, *d, f]);
        }
        self.tables(name, &[t])?;
        self.criteria.push(json!({ "name": name, "passed": false, "summary": "no contraction" }));
        Ok(())
    }

    pub fn value<T: Serialize>(&mut self, key: &str, v: &T) -> Result<(), Failure> {
        self.extra.insert(key.into(), to_value(v));
        Ok(())
    }

    pub fn finish(self, passed: bool) -> Result<(), Failure> {
        let mut summary = json!({
            "schema_version": SCHEMA_VERSION,
            "command": self.command,
            "seed": self.seed,
            "scenario": self.scenario,
            "criteria": self.criteria,
            "passed": passed,
        });
        if let Value::Object(map) = &mut summary {
            map.extend(self.extra);
        }
        let body = serde_json::to_string_pretty(&summary).expect("json values serialize");
        write(&self.out.join("summary.json"), &(body + "\n"))
    }
}
