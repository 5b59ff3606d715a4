//! `modscat`: config-driven runner for the acceptance experiments.
//!
//! Exit codes: 0 pass, 1 criterion failure, 2 config error, 3 numerical abort.

mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use modscat_core::conformal::{u_gap_norms, NormBridge};
use modscat_core::experiments::{run_criterion, Scenario, Suite, Table, CRITERIA};
use modscat_core::fixedpoint::{solve_fixed_point, IterationReport};
use modscat_core::profiles::write_table;
use modscat_core::rates::fit_rate;
use modscat_core::{ComplexField, LabError};

use output::{Failure, Report};

#[derive(Parser, Debug)]
#[command(name = "modscat", version, about = "Modified wave operators for the 1D cubic-plus-short-range NLS")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Scenario file (flat `key = value`).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Overrides the `seed` key.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Restricts `verify` to one criterion; required by `run`.
    #[arg(long, global = true)]
    experiment: Option<String>,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// All acceptance criteria (or `--experiment NAME`).
    Verify,
    /// One named criterion.
    Run,
    /// Picard construction of v_* with gap tables.
    Construct {
        /// Also write two-column field dumps.
        #[arg(long)]
        dump: bool,
    },
    /// Fitted decay rates of the constructed gaps.
    Rates,
    /// Energy-ratio audit for the configured preset.
    EnergyAudit,
    /// Focusing threshold, alpha window and focusing audit.
    FocusingThreshold,
    /// Fixed point against direct evolution.
    CrossValidate,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Verify => "verify",
            Command::Run => "run",
            Command::Construct { .. } => "construct",
            Command::Rates => "rates",
            Command::EnergyAudit => "energy-audit",
            Command::FocusingThreshold => "focusing-threshold",
            Command::CrossValidate => "cross-validate",
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(passed) => ExitCode::from(if passed { 0 } else { 1 }),
        Err(f) => {
            eprintln!("{}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn load_base(cli: &Cli) -> Result<Option<Scenario>, Failure> {
    let Some(path) = &cli.config else { return Ok(None) };
    let mut sc = config::load(path).map_err(Failure::Config)?;
    if let Some(seed) = cli.seed {
        sc.seed = seed;
    }
    sc.validate().map_err(Failure::Config)?;
    Ok(Some(sc))
}

fn execute(cli: &Cli) -> Result<bool, Failure> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Config(LabError::InvalidInput(format!("--threads: {e}"))))?;
    }
    let base = load_base(cli)?;
    let suite = match &base {
        Some(b) => Suite::from_base(b),
        None => {
            let s = Suite::default();
            match cli.seed {
                Some(seed) => s.with_seed(seed),
                None => s,
            }
        }
    };
    let base = base.unwrap_or_else(|| suite.defocusing.clone());
    let mut report = Report::new(cli.command.name(), &base, &cli.out)?;
    let passed = match cli.command {
        Command::Verify => {
            let names: Vec<&str> = match &cli.experiment {
                Some(name) => vec![known(name)?],
                None => CRITERIA.to_vec(),
            };
            criteria(&mut report, &suite, &names)?
        }
        Command::Run => {
            let Some(name) = &cli.experiment else {
                return Err(Failure::Config(LabError::InvalidInput(format!(
                    "`run` needs --experiment NAME; known: {}",
                    CRITERIA.join(", ")
                ))));
            };
            criteria(&mut report, &suite, &[known(name)?])?
        }
        Command::Construct { dump } => construct(&mut report, &base, dump)?,
        Command::Rates => rates(&mut report, &base)?,
        Command::EnergyAudit => {
            let name = if base.params.lambda1 < 0.0 { "focusing-audit" } else { "energy-audit" };
            single(&mut report, name, &base)?
        }
        Command::FocusingThreshold => focusing_threshold(&mut report, &suite)?,
        Command::CrossValidate => single(&mut report, "cross-validation", &base)?,
    };
    report.finish(passed)?;
    Ok(passed)
}

fn known(name: &str) -> Result<&'static str, Failure> {
    CRITERIA.iter().copied().find(|c| *c == name).ok_or_else(|| {
        Failure::Config(LabError::InvalidInput(format!("unknown experiment `{name}`; known: {}", CRITERIA.join(", "))))
    })
}

fn criteria(report: &mut Report, suite: &Suite, names: &[&str]) -> Result<bool, Failure> {
    let mut all = true;
    for name in names {
        all &= single(report, name, suite.scenario_for(name))?;
    }
    Ok(all)
}

fn single(report: &mut Report, name: &str, sc: &Scenario) -> Result<bool, Failure> {
    match run_criterion(name, sc) {
        Ok(outcome) => {
            println!("[{}] {:>2} {}: {}", outcome.status(), outcome.id, outcome.name, outcome.summary);
            let passed = outcome.passed;
            report.outcome(outcome)?;
            Ok(passed)
        }
        Err(LabError::NoContraction { iterations, last_factor, factor_history, diff_history }) => {
            println!("[FAIL] {name}: no contraction after {iterations} iterations (last factor {last_factor:.3e})");
            report.no_contraction(name, &factor_history, &diff_history)?;
            Ok(false)
        }
        Err(e) => Err(Failure::from_run(e)),
    }
}

fn gap_table(base: &Scenario) -> Result<(Table, IterationReport, Vec<ComplexField>), Failure> {
    let model = base.model().map_err(Failure::Config)?;
    let mesh = base.mesh().map_err(Failure::Config)?;
    let (traj, it) = solve_fixed_point(&model, &mesh, base.solver_options()).map_err(Failure::from_run)?;
    let mut table = Table::new("gaps", &["t_v", "t_u", "l2_gap", "weighted_gap", "bracket_gap", "linf_u"]);
    let full = traj.full_solution(&model).map_err(Failure::from_run)?;
    for (&t, v) in mesh.nodes().iter().zip(&full) {
        let vp = model.profile_vp(t).map_err(Failure::from_run)?;
        let g = u_gap_norms(v, &vp, NormBridge::new(1.0 / t).map_err(Failure::from_run)?).map_err(Failure::from_run)?;
        table.push(vec![t, 1.0 / t, g.l2_gap, g.weighted_gap, g.bracket_gap(), g.linf_u]);
    }
    let last = vec![model.datum().phi().clone(), full.last().cloned().expect("non-empty"), traj.last().clone()];
    Ok((table, it, last))
}

fn construct(report: &mut Report, base: &Scenario, dump: bool) -> Result<bool, Failure> {
    let (gaps, it, fields) = match gap_table(base) {
        Ok(v) => v,
        Err(Failure::Run(LabError::NoContraction { iterations, last_factor, factor_history, diff_history })) => {
            println!("[FAIL] construct: no contraction after {iterations} iterations (last factor {last_factor:.3e})");
            report.no_contraction("construct", &factor_history, &diff_history)?;
            return Ok(false);
        }
        Err(e) => return Err(e),
    };
    let mut iters = Table::new("iterations", &["iteration", "x_norm", "difference"]);
    for (k, x) in it.x_norms.iter().enumerate() {
        let d = if k == 0 { f64::NAN } else { it.diff_history[k - 1] };
        iters.push(vec![k as f64, *x, d]);
    }
    let passed = it.contraction_factor < 1.0;
    let max_gap = gaps.rows.iter().map(|r| r[2].max(r[3])).fold(0.0, f64::max);
    println!(
        "[{}] construct: {} iterations, contraction factor {:.4}, ball radius {:.4}, residual {:.2e}, max gap {max_gap:.3e}, tail bound {:.2e}",
        if passed { "PASS" } else { "FAIL" },
        it.iterations,
        it.contraction_factor,
        it.ball_radius,
        it.residual,
        it.tail_bound
    );
    report.tables("construct", &[gaps, iters])?;
    if dump {
        let [phi, v_t, vstar_t] = <[_; 3]>::try_from(fields).expect("three fields");
        report.text("construct", "phi.dat", &write_table(&phi))?;
        report.text("construct", "v_T.dat", &write_table(&v_t))?;
        report.text("construct", "vstar_T.dat", &write_table(&vstar_t))?;
    }
    report.value("iteration_report", &it)?;
    Ok(passed)
}

fn rates(report: &mut Report, base: &Scenario) -> Result<bool, Failure> {
    let (gaps, _, _) = gap_table(base)?;
    let p = base.params;
    let limits = [("l2_gap", 2, p.beta + p.alpha / 2.0 - 0.1), ("weighted_gap", 3, p.beta - 0.1)];
    let mut csv = String::from("quantity,slope,intercept,r_squared,limit,passed\n");
    let mut all = true;
    for (name, col, limit) in limits {
        let series: Vec<(f64, f64)> = gaps.rows.iter().map(|r| (r[0], r[col])).filter(|s| s.1 > 0.0).collect();
        let fit = fit_rate(&series).map_err(Failure::from_run)?;
        let ok = fit.slope >= limit;
        all &= ok;
        println!("[{}] rates {name}: slope {:.4} (limit {limit:.4}), r^2 {:.4}", if ok { "PASS" } else { "FAIL" }, fit.slope, fit.r_squared);
        csv.push_str(&format!("{name},{:.12e},{:.12e},{:.12e},{limit:.12e},{}\n", fit.slope, fit.intercept, fit.r_squared, ok as u8));
    }
    report.tables("rates", &[gaps])?;
    report.text("rates", "rates.csv", &csv)?;
    Ok(all)
}

fn focusing_threshold(report: &mut Report, suite: &Suite) -> Result<bool, Failure> {
    let sc = &suite.focusing;
    let sup = sc.datum().map_err(Failure::Config)?.sup_norm();
    let threshold = sc.params.lambda1.abs() * sup * sup;
    let (lo, hi) = sc.params.focusing_alpha_window(sup);
    println!("focusing threshold |lambda1| ||phi||_inf^2 = {threshold:.6} (< 1 required), alpha window ({lo:.6}, {hi})");
    let mut t = Table::new("threshold", &["lambda1", "phi_sup", "threshold", "alpha_low", "alpha_high", "alpha"]);
    t.push(vec![sc.params.lambda1, sup, threshold, lo, hi, sc.params.alpha]);
    report.tables("focusing-threshold", &[t])?;
    let audit = single(report, "focusing-audit", sc)?;
    Ok(audit && threshold < 1.0)
}
