//! Run configuration: a flat `key = value` text format with `[section]` headers.
//!
//! ```text
//! # comment
//! [geometry]
//! profile = cosine        # straight | cosine | tabulated
//! amplitude = 0.2
//! periods = 1
//!
//! [mesh]
//! nx = 16
//! ny = 16
//!
//! [physics]
//! lambda = 1
//! problem = navier-stokes # stokes | navier-stokes
//! ```
//!
//! A tabulated profile lists `x y_bottom y_top` triples separated by `;` in
//! `samples`. Tolerances accept `off` to disable a check; `newton_switch`
//! accepts `off` for pure Picard. [`RunConfig::to_config_string`] writes
//! every effective value, and parsing that output yields the same config.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geometry::{ChannelGeometry, WallProfile};
use crate::solver::{ProblemKind, SolveOptions};

impl FromStr for ProblemKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "stokes" => Ok(ProblemKind::Stokes),
            "navier-stokes" | "navier_stokes" | "ns" => Ok(ProblemKind::NavierStokes),
            other => Err(format!("unknown problem `{other}` (expected stokes or navier-stokes)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReportKind {
    Fields,
    Traces,
    Convergence,
    Energy,
}

impl ReportKind {
    pub const ALL: [ReportKind; 4] = [
        ReportKind::Fields,
        ReportKind::Traces,
        ReportKind::Convergence,
        ReportKind::Energy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ReportKind::Fields => "fields",
            ReportKind::Traces => "traces",
            ReportKind::Convergence => "convergence",
            ReportKind::Energy => "energy",
        }
    }
}

impl FromStr for ReportKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        ReportKind::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| format!("unknown report `{s}` (expected fields, traces, convergence or energy)"))
    }
}

/// Expected convergence rate with a symmetric acceptance band.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateBand {
    pub expected: f64,
    pub band: f64,
}

impl RateBand {
    pub fn contains(&self, rate: f64) -> bool {
        (rate - self.expected).abs() <= self.band
    }
}

/// Verification tolerances. `None` disables the check.
#[derive(Debug, Clone, PartialEq)]
pub struct Tolerances {
    /// Pointwise `|p(1, y) - p(0, y) + lambda|` on straight channels.
    pub jump: Option<f64>,
    /// `|Q - 2 lambda / 3|` on straight channels.
    pub flow_rate: Option<f64>,
    pub energy_stokes: Option<f64>,
    pub energy_navier_stokes: Option<f64>,
    /// `max_q |int q div u|` relative to `|u|_{H1}`.
    pub divergence: Option<f64>,
    /// Absolute section derivative mismatch on straight channels.
    pub derivative_periodicity: Option<f64>,
    /// Largest mismatch ratio between a mesh and its refinement (curved walls, verify mode).
    pub derivative_ratio: Option<f64>,
    /// Smallest observed rate of the mean jump error (curved walls, verify mode).
    pub jump_rate: Option<f64>,
    pub symmetry: Option<f64>,
    /// Nodal error against the Poiseuille solution (straight channels, verify mode).
    pub oracle: Option<f64>,
    pub rate_velocity_l2: Option<RateBand>,
    pub rate_velocity_h1: Option<RateBand>,
    pub rate_pressure_l2: Option<RateBand>,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            jump: Some(1e-8),
            flow_rate: Some(1e-8),
            energy_stokes: Some(1e-10),
            energy_navier_stokes: Some(1e-8),
            divergence: Some(1e-10),
            derivative_periodicity: Some(1e-8),
            derivative_ratio: Some(0.6),
            jump_rate: Some(2.0),
            symmetry: Some(1e-8),
            oracle: Some(1e-8),
            rate_velocity_l2: Some(RateBand { expected: 3.0, band: 0.3 }),
            rate_velocity_h1: Some(RateBand { expected: 2.0, band: 0.2 }),
            rate_pressure_l2: Some(RateBand { expected: 2.0, band: 0.3 }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceConfig {
    /// Resolutions `n` of the `n x n` meshes.
    pub meshes: Vec<usize>,
    pub amplitude: f64,
    pub pressure_amplitude: f64,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        Self {
            meshes: vec![8, 16, 32, 64],
            amplitude: 0.5,
            pressure_amplitude: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub profile: WallProfile,
    pub nx: usize,
    pub ny: usize,
    pub lambda: f64,
    pub problem: ProblemKind,
    pub solver: SolveOptions,
    pub output: PathBuf,
    pub reports: Vec<ReportKind>,
    pub tolerances: Tolerances,
    pub convergence: ConvergenceConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            profile: WallProfile::Straight,
            nx: 16,
            ny: 16,
            lambda: 1.0,
            problem: ProblemKind::Stokes,
            solver: SolveOptions::default(),
            output: PathBuf::from("out"),
            reports: ReportKind::ALL.to_vec(),
            tolerances: Tolerances::default(),
            convergence: ConvergenceConfig::default(),
        }
    }
}

fn field_error(field: &str, message: impl Into<String>) -> Error {
    Error::ConfigField {
        field: field.to_string(),
        message: message.into(),
    }
}

impl RunConfig {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Parses and validates a config.
    pub fn parse(text: &str) -> Result<Self> {
        let mut config = RunConfig::default();
        let mut section = String::new();
        let mut seen: Vec<String> = Vec::new();
        for (index, raw) in text.lines().enumerate() {
            let line = index + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(rest) = content.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| Error::Config {
                    line,
                    message: format!("unterminated section header `{content}`"),
                })?;
                section = name.trim().to_string();
                if !SECTIONS.contains(&section.as_str()) {
                    return Err(Error::Config {
                        line,
                        message: format!("unknown section [{section}]"),
                    });
                }
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::Config {
                line,
                message: format!("expected `key = value`, found `{content}`"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            if section.is_empty() {
                return Err(Error::Config {
                    line,
                    message: format!("key `{key}` outside any section"),
                });
            }
            let qualified = format!("{section}.{key}");
            if seen.contains(&qualified) {
                return Err(Error::Config {
                    line,
                    message: format!("duplicate key `{qualified}`"),
                });
            }
            config
                .set(&section, key, value)
                .map_err(|message| Error::Config {
                    line,
                    message: format!("`{qualified}`: {message}"),
                })?;
            seen.push(qualified);
        }
        config.validate()?;
        Ok(config)
    }

    fn set(&mut self, section: &str, key: &str, value: &str) -> std::result::Result<(), String> {
        match (section, key) {
            ("geometry", "profile") => {
                self.profile = match value {
                    "straight" => WallProfile::Straight,
                    "cosine" => match self.profile {
                        WallProfile::Cosine { .. } => self.profile.clone(),
                        _ => WallProfile::Cosine {
                            amplitude: 0.0,
                            periods: 1,
                        },
                    },
                    "tabulated" => match self.profile {
                        WallProfile::Tabulated(_) => self.profile.clone(),
                        _ => WallProfile::Tabulated(Vec::new()),
                    },
                    other => return Err(format!("unknown profile `{other}` (expected straight, cosine or tabulated)")),
                }
            }
            ("geometry", "amplitude") => {
                let a = parse_real(value)?;
                match &mut self.profile {
                    WallProfile::Cosine { amplitude, .. } => *amplitude = a,
                    _ => return Err("amplitude requires `profile = cosine` earlier in the section".into()),
                }
            }
            ("geometry", "periods") => {
                let k = value.parse::<u32>().map_err(|e| format!("`{value}`: {e}"))?;
                match &mut self.profile {
                    WallProfile::Cosine { periods, .. } => *periods = k,
                    _ => return Err("periods requires `profile = cosine` earlier in the section".into()),
                }
            }
            ("geometry", "samples") => {
                let samples = parse_samples(value)?;
                match &mut self.profile {
                    WallProfile::Tabulated(s) => *s = samples,
                    _ => return Err("samples requires `profile = tabulated` earlier in the section".into()),
                }
            }
            ("mesh", "nx") => self.nx = parse_count(value)?,
            ("mesh", "ny") => self.ny = parse_count(value)?,
            ("physics", "lambda") => self.lambda = parse_real(value)?,
            ("physics", "problem") => self.problem = value.parse()?,
            ("solver", "linear_tol") => self.solver.linear_tol = parse_real(value)?,
            ("solver", "nonlinear_tol") => self.solver.nonlinear_tol = parse_real(value)?,
            ("solver", "max_iterations") => self.solver.max_iterations = parse_count(value)?,
            ("solver", "newton_switch") => self.solver.newton_switch = parse_optional(value)?,
            ("output", "directory") => self.output = PathBuf::from(value),
            ("output", "reports") => {
                self.reports = Vec::new();
                for item in value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                    let kind: ReportKind = item.parse()?;
                    if !self.reports.contains(&kind) {
                        self.reports.push(kind);
                    }
                }
            }
            ("tolerances", "jump") => self.tolerances.jump = parse_optional(value)?,
            ("tolerances", "flow_rate") => self.tolerances.flow_rate = parse_optional(value)?,
            ("tolerances", "energy_stokes") => self.tolerances.energy_stokes = parse_optional(value)?,
            ("tolerances", "energy_navier_stokes") => self.tolerances.energy_navier_stokes = parse_optional(value)?,
            ("tolerances", "divergence") => self.tolerances.divergence = parse_optional(value)?,
            ("tolerances", "derivative_periodicity") => self.tolerances.derivative_periodicity = parse_optional(value)?,
            ("tolerances", "derivative_ratio") => self.tolerances.derivative_ratio = parse_optional(value)?,
            ("tolerances", "jump_rate") => self.tolerances.jump_rate = parse_optional(value)?,
            ("tolerances", "symmetry") => self.tolerances.symmetry = parse_optional(value)?,
            ("tolerances", "oracle") => self.tolerances.oracle = parse_optional(value)?,
            ("tolerances", "rate_velocity_l2") => self.tolerances.rate_velocity_l2 = parse_band(value)?,
            ("tolerances", "rate_velocity_h1") => self.tolerances.rate_velocity_h1 = parse_band(value)?,
            ("tolerances", "rate_pressure_l2") => self.tolerances.rate_pressure_l2 = parse_band(value)?,
            ("convergence", "meshes") => {
                self.convergence.meshes = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(parse_count)
                    .collect::<std::result::Result<_, _>>()?
            }
            ("convergence", "amplitude") => self.convergence.amplitude = parse_real(value)?,
            ("convergence", "pressure_amplitude") => self.convergence.pressure_amplitude = parse_real(value)?,
            (section, key) => return Err(format!("unknown key `{key}` in [{section}]")),
        }
        Ok(())
    }

    /// Checks every field; errors name the offending `section.key`.
    pub fn validate(&self) -> Result<()> {
        if self.nx == 0 {
            return Err(field_error("mesh.nx", "must be at least 1"));
        }
        if self.ny == 0 {
            return Err(field_error("mesh.ny", "must be at least 1"));
        }
        if !self.lambda.is_finite() {
            return Err(field_error("physics.lambda", "must be finite"));
        }
        self.geometry().map_err(|e| field_error("geometry", e.to_string()))?;
        self.solver
            .validate()
            .map_err(|e| field_error("solver", e.to_string()))?;
        if self.output.as_os_str().is_empty() {
            return Err(field_error("output.directory", "must not be empty"));
        }
        let t = &self.tolerances;
        let scalars = [
            ("jump", t.jump),
            ("flow_rate", t.flow_rate),
            ("energy_stokes", t.energy_stokes),
            ("energy_navier_stokes", t.energy_navier_stokes),
            ("divergence", t.divergence),
            ("derivative_periodicity", t.derivative_periodicity),
            ("derivative_ratio", t.derivative_ratio),
            ("jump_rate", t.jump_rate),
            ("symmetry", t.symmetry),
            ("oracle", t.oracle),
        ];
        for (name, value) in scalars {
            if let Some(v) = value {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(field_error(&format!("tolerances.{name}"), "must be finite and non-negative"));
                }
            }
        }
        let bands = [
            ("rate_velocity_l2", t.rate_velocity_l2),
            ("rate_velocity_h1", t.rate_velocity_h1),
            ("rate_pressure_l2", t.rate_pressure_l2),
        ];
        for (name, band) in bands {
            if let Some(b) = band {
                if !(b.expected.is_finite() && b.band.is_finite() && b.band >= 0.0) {
                    return Err(field_error(&format!("tolerances.{name}"), "needs a finite rate and non-negative band"));
                }
            }
        }
        let c = &self.convergence;
        if c.meshes.len() < 2 {
            return Err(field_error("convergence.meshes", "needs at least two resolutions"));
        }
        if c.meshes.contains(&0) {
            return Err(field_error("convergence.meshes", "resolutions must be at least 1"));
        }
        if !(c.amplitude.is_finite() && c.pressure_amplitude.is_finite()) {
            return Err(field_error("convergence", "amplitudes must be finite"));
        }
        Ok(())
    }

    pub fn geometry(&self) -> Result<ChannelGeometry> {
        ChannelGeometry::new(self.profile.clone())
    }

    pub fn wants(&self, report: ReportKind) -> bool {
        self.reports.contains(&report)
    }

    /// Writes every effective value in the parseable format.
    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "[geometry]");
        match &self.profile {
            WallProfile::Straight => {
                let _ = writeln!(s, "profile = straight");
            }
            WallProfile::Cosine { amplitude, periods } => {
                let _ = writeln!(s, "profile = cosine\namplitude = {amplitude:e}\nperiods = {periods}");
            }
            WallProfile::Tabulated(samples) => {
                let rows: Vec<String> = samples
                    .iter()
                    .map(|[x, b, t]| format!("{x:e} {b:e} {t:e}"))
                    .collect();
                let _ = writeln!(s, "profile = tabulated\nsamples = {}", rows.join("; "));
            }
        }
        let _ = writeln!(s, "\n[mesh]\nnx = {}\nny = {}", self.nx, self.ny);
        let _ = writeln!(s, "\n[physics]\nlambda = {:e}\nproblem = {}", self.lambda, self.problem.name());
        let o = &self.solver;
        let _ = writeln!(
            s,
            "\n[solver]\nlinear_tol = {:e}\nnonlinear_tol = {:e}\nmax_iterations = {}\nnewton_switch = {}",
            o.linear_tol,
            o.nonlinear_tol,
            o.max_iterations,
            optional(o.newton_switch)
        );
        let reports: Vec<&str> = self.reports.iter().map(|r| r.name()).collect();
        let _ = writeln!(
            s,
            "\n[output]\ndirectory = {}\nreports = {}",
            self.output.display(),
            reports.join(", ")
        );
        let t = &self.tolerances;
        let _ = writeln!(s, "\n[tolerances]");
        for (name, value) in [
            ("jump", t.jump),
            ("flow_rate", t.flow_rate),
            ("energy_stokes", t.energy_stokes),
            ("energy_navier_stokes", t.energy_navier_stokes),
            ("divergence", t.divergence),
            ("derivative_periodicity", t.derivative_periodicity),
            ("derivative_ratio", t.derivative_ratio),
            ("jump_rate", t.jump_rate),
            ("symmetry", t.symmetry),
            ("oracle", t.oracle),
        ] {
            let _ = writeln!(s, "{name} = {}", optional(value));
        }
        for (name, band) in [
            ("rate_velocity_l2", t.rate_velocity_l2),
            ("rate_velocity_h1", t.rate_velocity_h1),
            ("rate_pressure_l2", t.rate_pressure_l2),
        ] {
            match band {
                Some(b) => {
                    let _ = writeln!(s, "{name} = {:e} +- {:e}", b.expected, b.band);
                }
                None => {
                    let _ = writeln!(s, "{name} = off");
                }
            }
        }
        let c = &self.convergence;
        let meshes: Vec<String> = c.meshes.iter().map(|n| n.to_string()).collect();
        let _ = writeln!(
            s,
            "\n[convergence]\nmeshes = {}\namplitude = {:e}\npressure_amplitude = {:e}",
            meshes.join(", "),
            c.amplitude,
            c.pressure_amplitude
        );
        s
    }
}

const SECTIONS: [&str; 7] = ["geometry", "mesh", "physics", "solver", "output", "tolerances", "convergence"];

fn optional(v: Option<f64>) -> String {
    v.map_or_else(|| "off".to_string(), |v| format!("{v:e}"))
}

fn parse_real(value: &str) -> std::result::Result<f64, String> {
    let v: f64 = value.parse().map_err(|_| format!("`{value}` is not a number"))?;
    if v.is_nan() {
        return Err("NaN is not allowed".into());
    }
    Ok(v)
}

fn parse_count(value: &str) -> std::result::Result<usize, String> {
    value
        .parse()
        .map_err(|_| format!("`{value}` is not a non-negative integer"))
}

fn parse_optional(value: &str) -> std::result::Result<Option<f64>, String> {
    if value == "off" {
        Ok(None)
    } else {
        parse_real(value).map(Some)
    }
}

/// `rate` or `rate +- band`; a bare rate keeps a zero band.
fn parse_band(value: &str) -> std::result::Result<Option<RateBand>, String> {
    if value == "off" {
        return Ok(None);
    }
    let (expected, band) = match value.split_once("+-") {
        Some((e, b)) => (parse_real(e.trim())?, parse_real(b.trim())?),
        None => (parse_real(value)?, 0.0),
    };
    Ok(Some(RateBand { expected, band }))
}

fn parse_samples(value: &str) -> std::result::Result<Vec<[f64; 3]>, String> {
    value
        .split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|row| {
            let v: Vec<f64> = row
                .split_whitespace()
                .map(parse_real)
                .collect::<std::result::Result<_, _>>()?;
            <[f64; 3]>::try_from(v).map_err(|v| format!("sample `{row}` has {} values, expected 3", v.len()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_from_empty_text() {
        assert_eq!(RunConfig::parse("").unwrap(), RunConfig::default());
    }

    #[test]
    fn full_config_parses() {
        let text = "
# wavy run
[geometry]
profile = cosine
amplitude = 0.2   # throat 0.6
periods = 2

[mesh]
nx = 8
ny = 12

[physics]
lambda = 2.5
problem = navier-stokes

[solver]
newton_switch = off
max_iterations = 7

[output]
directory = results/wavy
reports = traces, energy

[tolerances]
jump = off
rate_velocity_h1 = 2 +- 0.1

[convergence]
meshes = 4, 8, 16
";
        let c = RunConfig::parse(text).unwrap();
        assert_eq!(c.profile, WallProfile::Cosine { amplitude: 0.2, periods: 2 });
        assert_eq!((c.nx, c.ny), (8, 12));
        assert_eq!(c.lambda, 2.5);
        assert_eq!(c.problem, ProblemKind::NavierStokes);
        assert_eq!(c.solver.newton_switch, None);
        assert_eq!(c.solver.max_iterations, 7);
        assert_eq!(c.output, PathBuf::from("results/wavy"));
        assert_eq!(c.reports, vec![ReportKind::Traces, ReportKind::Energy]);
        assert_eq!(c.tolerances.jump, None);
        assert_eq!(c.tolerances.rate_velocity_h1, Some(RateBand { expected: 2.0, band: 0.1 }));
        assert_eq!(c.convergence.meshes, vec![4, 8, 16]);
    }

    #[test]
    fn errors_name_the_line() {
        let cases = [
            ("[mesh]\nnx = 4\nny = four\n", 3),
            ("[mesh]\nnx 4\n", 2),
            ("nx = 4\n", 1),
            ("[meshes]\n", 1),
            ("[physics]\nproblem = euler\n", 2),
            ("[mesh]\nnx = 4\nnx = 5\n", 3),
            ("[geometry]\namplitude = 0.1\n", 2),
            ("[solver]\ntolerance = 1\n", 2),
        ];
        for (text, expected) in cases {
            match RunConfig::parse(text) {
                Err(Error::Config { line, .. }) => assert_eq!(line, expected, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn validation_names_the_field() {
        let cases = [
            ("[mesh]\nny = 0\n", "mesh.ny"),
            ("[physics]\nlambda = inf\n", "physics.lambda"),
            ("[geometry]\nprofile = cosine\namplitude = 0.5\n", "geometry"),
            ("[solver]\nmax_iterations = 0\n", "solver"),
            ("[tolerances]\njump = -1\n", "tolerances.jump"),
            ("[convergence]\nmeshes = 8\n", "convergence.meshes"),
        ];
        for (text, expected) in cases {
            match RunConfig::parse(text) {
                Err(Error::ConfigField { field, .. }) => assert_eq!(field, expected, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn serialization_round_trips() {
        let mut c = RunConfig::default();
        c.profile = WallProfile::Tabulated(vec![[0.0, -1.0, 1.0], [0.5, -0.8, 0.9], [1.0, -1.0, 1.0]]);
        c.lambda = 0.1 + 0.2;
        c.solver.newton_switch = None;
        c.tolerances.oracle = None;
        c.tolerances.rate_pressure_l2 = None;
        c.reports = vec![ReportKind::Energy, ReportKind::Fields];
        let text = c.to_config_string();
        assert_eq!(RunConfig::parse(&text).unwrap(), c);

        let wavy = RunConfig {
            profile: WallProfile::Cosine { amplitude: 1.0 / 3.0, periods: 3 },
            ..RunConfig::default()
        };
        assert_eq!(RunConfig::parse(&wavy.to_config_string()).unwrap(), wavy);
    }
}
