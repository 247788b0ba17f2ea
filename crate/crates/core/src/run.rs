//! Batch driver: solves or studies a configured problem, runs the
//! verification checks and writes fields, traces and a manifest.
//!
//! The manifest echoes the effective config followed by `#`-prefixed result
//! lines, so it can be fed back as a config to reproduce the run.

use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::analysis::{
    derivative_periodicity, energy_balance, mirror_symmetry_defect, norms_and_flux, poiseuille_nodal_errors,
    pressure_jump, strong_residual, PressureJump,
};
use crate::config::{RateBand, ReportKind, RunConfig};
use crate::error::{Error, Result};
use crate::mms::{manufactured_solution_study, ConvergenceTable, RateStatus, TrigonometricFlow};
use crate::problem::Discretization;
use crate::solver::{solve, FieldSolution, ProblemKind};
use crate::vtk::write_fields;

pub const MANIFEST: &str = "MANIFEST";
pub const FIELDS: &str = "fields.vtk";
pub const TRACES: &str = "traces.csv";
pub const CONVERGENCE: &str = "convergence.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMode {
    /// Solve and run the checks that apply to a single mesh.
    Solve,
    /// Solve plus the full identity suite, including a refined solve on curved channels.
    Verify,
    /// Manufactured-solution mesh study.
    Convergence,
}

impl RunMode {
    pub fn name(self) -> &'static str {
        match self {
            RunMode::Solve => "solve",
            RunMode::Verify => "verify",
            RunMode::Convergence => "convergence",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bound {
    AtMost(f64),
    AtLeast(f64),
    Within(RateBand),
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bound::AtMost(v) => write!(f, "<= {v:e}"),
            Bound::AtLeast(v) => write!(f, ">= {v:e}"),
            Bound::Within(b) => write!(f, "in {:e} +- {:e}", b.expected, b.band),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: Bound,
}

impl Check {
    pub fn new(name: impl Into<String>, value: f64, bound: Bound) -> Self {
        Self {
            name: name.into(),
            value,
            bound,
        }
    }

    pub fn passed(&self) -> bool {
        match self.bound {
            Bound::AtMost(limit) => self.value <= limit,
            Bound::AtLeast(limit) => self.value >= limit,
            Bound::Within(band) => band.contains(self.value),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub mode: RunMode,
    /// `None` when every solve succeeded, otherwise the failure message.
    pub failure: Option<String>,
    pub checks: Vec<Check>,
    pub stats: Vec<(String, String)>,
    /// Files written, relative to the output directory.
    pub files: Vec<String>,
}

impl RunReport {
    fn new(mode: RunMode) -> Self {
        Self {
            mode,
            failure: None,
            checks: Vec::new(),
            stats: Vec::new(),
            files: Vec::new(),
        }
    }

    pub fn converged(&self) -> bool {
        self.failure.is_none()
    }

    pub fn success(&self) -> bool {
        self.converged() && self.checks.iter().all(Check::passed)
    }

    /// 0 on success, 1 when a solve failed or a check did not pass.
    pub fn exit_code(&self) -> i32 {
        if self.success() {
            0
        } else {
            1
        }
    }

    fn stat(&mut self, name: &str, value: impl fmt::Display) {
        self.stats.push((name.to_string(), value.to_string()));
    }

    fn check(&mut self, name: impl Into<String>, value: f64, limit: Option<f64>, at_least: bool) {
        if let Some(limit) = limit {
            let bound = if at_least {
                Bound::AtLeast(limit)
            } else {
                Bound::AtMost(limit)
            };
            self.checks.push(Check::new(name, value, bound));
        }
    }

    /// Result lines appended to the manifest.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# mode = {}", self.mode.name());
        match &self.failure {
            None => {
                let _ = writeln!(s, "# status = converged");
            }
            Some(msg) => {
                let _ = writeln!(s, "# status = FAILED: {msg}");
            }
        }
        for c in &self.checks {
            let verdict = if c.passed() { "PASS" } else { "FAIL" };
            let _ = writeln!(s, "# check {} = {:e} {} {verdict}", c.name, c.value, c.bound);
        }
        for (name, value) in &self.stats {
            let _ = writeln!(s, "# stat {name} = {value}");
        }
        for f in &self.files {
            let _ = writeln!(s, "# file {f}");
        }
        let _ = writeln!(s, "# result = {}", if self.success() { "PASS" } else { "FAIL" });
        s
    }
}

/// Validates the config, checks the output directory and runs. Config and
/// I/O problems are returned as errors before anything is written; solver
/// failures produce a report with a failing status.
pub fn run(config: &RunConfig, mode: RunMode) -> Result<RunReport> {
    config.validate()?;
    let geometry = config.geometry()?;
    if mode == RunMode::Convergence && !geometry.is_straight() {
        return Err(Error::ConfigField {
            field: "geometry.profile".into(),
            message: "the manufactured solution needs a straight channel".into(),
        });
    }
    let dir = config.output.as_path();
    prepare_output(dir)?;

    let mut report = RunReport::new(mode);
    let outcome = match mode {
        RunMode::Convergence => convergence_run(config, dir, &mut report),
        _ => field_run(config, mode, dir, &mut report),
    };
    match outcome {
        Ok(()) => {}
        Err(e @ Error::Io { .. }) => return Err(e),
        Err(e) => report.failure = Some(e.to_string()),
    }
    let manifest = format!("{}\n{}", config.to_config_string(), report.summary());
    write_file(&dir.join(MANIFEST), &manifest)?;
    Ok(report)
}

fn prepare_output(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_file(&dir.join(MANIFEST), "# status = running\n")
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn field_run(config: &RunConfig, mode: RunMode, dir: &Path, report: &mut RunReport) -> Result<()> {
    let geometry = config.geometry()?;
    let disc = Discretization::new(&geometry, config.nx, config.ny)?;
    report.stat("unknowns", disc.num_unknowns());
    let solution = match solve(&disc, config.problem, config.lambda, &config.solver) {
        Ok(s) => s,
        Err(Error::NonConvergence {
            iterations,
            last_update,
            last,
        }) => {
            report.failure = Some(format!(
                "no convergence after {iterations} iterations (last update {last_update:e}); outputs hold the last iterate"
            ));
            *last
        }
        Err(e) => return Err(e),
    };

    let tol = &config.tolerances;
    let straight = geometry.is_straight();
    let d = &solution.diagnostics;
    report.stat("iterations", d.iterations);
    report.stat("newton_steps", d.newton_steps);
    report.stat("linear_residual", format!("{:e}", d.linear_residual));

    let norms = norms_and_flux(&disc, &solution);
    report.stat("velocity_l2", format!("{:e}", norms.velocity_l2));
    report.stat("velocity_h1", format!("{:e}", norms.velocity_h1));
    report.stat("pressure_l2", format!("{:e}", norms.pressure_l2));
    report.stat("flow_rate", format!("{:e}", norms.flow_rate));
    let div = if norms.velocity_h1 > 0.0 {
        norms.divergence_residual / norms.velocity_h1
    } else {
        norms.divergence_residual
    };
    report.check("divergence", div, tol.divergence, false);

    let jump = pressure_jump(&disc, &solution)?;
    let mismatch = derivative_periodicity(&disc, &solution)?;
    report.stat("mean_jump", format!("{:e}", jump.mean_jump));
    report.stat("max_jump_deviation", format!("{:e}", jump.max_deviation));
    report.stat("derivative_mismatch", format!("{mismatch:e}"));
    if straight {
        report.check("pressure_jump", jump.max_deviation, tol.jump, false);
        report.check(
            "flow_rate",
            (norms.flow_rate - 2.0 * config.lambda / 3.0).abs(),
            tol.flow_rate,
            false,
        );
        report.check("derivative_periodicity", mismatch, tol.derivative_periodicity, false);
    }

    if config.wants(ReportKind::Energy) {
        let e = energy_balance(&disc, &solution);
        report.stat("dissipation", format!("{:e}", e.dissipation));
        report.stat("convection", format!("{:e}", e.convection));
        report.stat("work", format!("{:e}", e.work));
        let limit = match solution.kind {
            ProblemKind::Stokes => tol.energy_stokes,
            ProblemKind::NavierStokes => tol.energy_navier_stokes,
        };
        report.check("energy_identity", e.relative_error(), limit, false);
    }

    if mode == RunMode::Verify {
        verify_extras(config, &disc, &solution, &jump, mismatch, report)?;
    }

    if config.wants(ReportKind::Fields) {
        write_fields(&disc.mesh, &solution, dir.join(FIELDS))?;
        report.files.push(FIELDS.into());
    }
    if config.wants(ReportKind::Traces) {
        write_file(&dir.join(TRACES), &traces_csv(&jump))?;
        report.files.push(TRACES.into());
    }
    Ok(())
}

fn verify_extras(
    config: &RunConfig,
    disc: &Discretization,
    solution: &FieldSolution,
    jump: &PressureJump,
    mismatch: f64,
    report: &mut RunReport,
) -> Result<()> {
    let tol = &config.tolerances;
    if disc.geometry.is_mirror_symmetric() && config.ny.is_multiple_of(2) {
        let defect = mirror_symmetry_defect(disc, solution)?;
        report.check("mirror_symmetry", defect, tol.symmetry, false);
    }
    if disc.geometry.is_straight() {
        let (eu, ep) = poiseuille_nodal_errors(disc, solution)?;
        report.check("poiseuille_velocity", eu, tol.oracle, false);
        report.check("poiseuille_pressure", ep, tol.oracle, false);
        let r = strong_residual(disc, solution, None);
        report.stat("strong_momentum_residual", format!("{:e}", r.momentum));
        report.stat("strong_divergence_residual", format!("{:e}", r.divergence));
        return Ok(());
    }
    let fine = Discretization::new(&disc.geometry, 2 * config.nx, 2 * config.ny)?;
    let fine_solution = solve(&fine, config.problem, config.lambda, &config.solver)?;
    let fine_jump = pressure_jump(&fine, &fine_solution)?;
    let fine_mismatch = derivative_periodicity(&fine, &fine_solution)?;
    let coarse_dev = jump.mean_deviation(config.lambda);
    let fine_dev = fine_jump.mean_deviation(config.lambda);
    report.stat("refined_mean_jump", format!("{:e}", fine_jump.mean_jump));
    report.stat("refined_derivative_mismatch", format!("{fine_mismatch:e}"));
    if coarse_dev > 0.0 && fine_dev > 0.0 {
        report.check("mean_jump_rate", (coarse_dev / fine_dev).log2(), tol.jump_rate, true);
    }
    if mismatch > 0.0 {
        report.check("derivative_ratio", fine_mismatch / mismatch, tol.derivative_ratio, false);
    }
    Ok(())
}

/// Section traces: `y, p_gamma0, p_gamma1, jump, dudx_gamma0, dudx_gamma1`,
/// where `dudx` is the streamwise derivative of the streamwise velocity.
pub fn traces_csv(jump: &PressureJump) -> String {
    let mut s = String::from("y,p_gamma0,p_gamma1,jump,dudx_gamma0,dudx_gamma1\n");
    let (a, b) = (&jump.gamma0, &jump.gamma1);
    for k in 0..a.y.len() {
        let _ = writeln!(
            s,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            a.y[k], a.pressure[k], b.pressure[k], jump.jump[k], a.du1_dx[k], b.du1_dx[k]
        );
    }
    s
}

fn convergence_run(config: &RunConfig, dir: &Path, report: &mut RunReport) -> Result<()> {
    let exact = TrigonometricFlow {
        lambda: config.lambda,
        amplitude: config.convergence.amplitude,
        pressure_amplitude: config.convergence.pressure_amplitude,
    };
    let table = manufactured_solution_study(
        &config.geometry()?,
        &exact,
        config.problem,
        &config.convergence.meshes,
        &config.solver,
    )?;
    rate_checks(config, &table, report);
    if config.wants(ReportKind::Convergence) {
        write_file(&dir.join(CONVERGENCE), &table.to_csv())?;
        report.files.push(CONVERGENCE.into());
    }
    Ok(())
}

fn rate_checks(config: &RunConfig, table: &ConvergenceTable, report: &mut RunReport) {
    let status = match table.status {
        RateStatus::Trusted => "trusted",
        RateStatus::Untrusted => "untrusted",
        RateStatus::Exact => "exact",
    };
    report.stat("rate_status", status);
    let names = ["velocity_l2", "velocity_h1", "pressure_l2"];
    for (i, name) in names.iter().enumerate() {
        report.stat(&format!("fitted_rate_{name}"), format!("{:.6}", table.fitted[i]));
    }
    match table.status {
        RateStatus::Exact => {
            let worst = table
                .rows
                .iter()
                .flat_map(|r| [r.velocity_l2, r.velocity_h1, r.pressure_l2])
                .fold(0.0, f64::max);
            report.check("exact_errors", worst, Some(1e-10), false);
        }
        RateStatus::Untrusted => {
            report.checks.push(Check::new("monotone_errors", 0.0, Bound::AtLeast(1.0)));
        }
        RateStatus::Trusted => {
            let t = &config.tolerances;
            let bands = [t.rate_velocity_l2, t.rate_velocity_h1, t.rate_pressure_l2];
            for (k, rates) in table.rates.iter().enumerate() {
                let label = format!(
                    "{}->{}",
                    (1.0 / table.rows[k].h).round(),
                    (1.0 / table.rows[k + 1].h).round()
                );
                for (i, name) in names.iter().enumerate() {
                    if let Some(band) = bands[i] {
                        report
                            .checks
                            .push(Check::new(format!("rate_{name}[{label}]"), rates[i], Bound::Within(band)));
                    }
                }
            }
        }
    }
}

/// One run of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub label: String,
    pub config: RunConfig,
}

/// Varies `lambda` and/or the mesh (`n x n`) of `base`; each point writes to
/// its own subdirectory of the base output directory.
pub fn sweep_points(base: &RunConfig, lambdas: &[f64], meshes: &[usize]) -> Vec<SweepPoint> {
    let lambdas: Vec<Option<f64>> = if lambdas.is_empty() {
        vec![None]
    } else {
        lambdas.iter().copied().map(Some).collect()
    };
    let meshes: Vec<Option<usize>> = if meshes.is_empty() {
        vec![None]
    } else {
        meshes.iter().copied().map(Some).collect()
    };
    let mut points = Vec::new();
    for &l in &lambdas {
        for &m in &meshes {
            let mut config = base.clone();
            let mut parts = Vec::new();
            if let Some(l) = l {
                config.lambda = l;
                parts.push(format!("lambda_{l}"));
            }
            if let Some(n) = m {
                config.nx = n;
                config.ny = n;
                parts.push(format!("mesh_{n}"));
            }
            let label = if parts.is_empty() {
                "base".to_string()
            } else {
                parts.join("_")
            };
            config.output = base.output.join(&label);
            points.push(SweepPoint { label, config });
        }
    }
    points
}

/// Runs every sweep point in parallel and writes a `SWEEP` summary into the
/// base output directory.
pub fn run_sweep(base: &RunConfig, mode: RunMode, lambdas: &[f64], meshes: &[usize]) -> Result<Vec<(String, RunReport)>> {
    base.validate()?;
    let points = sweep_points(base, lambdas, meshes);
    for p in &points {
        p.config.validate()?;
    }
    let results: Vec<Result<(String, RunReport)>> = points
        .par_iter()
        .map(|p| run(&p.config, mode).map(|r| (p.label.clone(), r)))
        .collect();
    let results = results.into_iter().collect::<Result<Vec<_>>>()?;
    let mut summary = String::new();
    for (label, r) in &results {
        let _ = writeln!(summary, "{label} {}", if r.success() { "PASS" } else { "FAIL" });
    }
    write_file(&base.output.join("SWEEP"), &summary)?;
    Ok(results)
}

/// Applies command-line overrides of the output directory and `lambda`.
pub fn apply_overrides(mut config: RunConfig, out: Option<PathBuf>, lambda: Option<f64>) -> RunConfig {
    if let Some(out) = out {
        config.output = out;
    }
    if let Some(l) = lambda {
        config.lambda = l;
    }
    config
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn check_bounds() {
        assert!(Check::new("a", 1e-9, Bound::AtMost(1e-8)).passed());
        assert!(!Check::new("a", 2.0, Bound::AtMost(1.0)).passed());
        assert!(Check::new("a", 2.1, Bound::AtLeast(2.0)).passed());
        assert!(!Check::new("a", f64::NAN, Bound::AtMost(1.0)).passed());
        let band = RateBand { expected: 2.0, band: 0.2 };
        assert!(Check::new("a", 1.85, Bound::Within(band)).passed());
        assert!(!Check::new("a", 2.25, Bound::Within(band)).passed());
    }

    #[test]
    fn sweep_labels_and_directories() {
        let base = RunConfig::default();
        let points = sweep_points(&base, &[0.5, 2.0], &[4, 8]);
        assert_eq!(points.len(), 4);
        assert_eq!(points[0].label, "lambda_0.5_mesh_4");
        assert_eq!(points[3].config.output, base.output.join("lambda_2_mesh_8"));
        assert_eq!((points[3].config.nx, points[3].config.lambda), (8, 2.0));
        assert_eq!(sweep_points(&base, &[], &[])[0].label, "base");
    }
}
