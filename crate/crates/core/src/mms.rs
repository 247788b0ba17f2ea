//! Manufactured-solution convergence studies.
//!
//! A body force `f = -Lap u + (u.grad)u + grad p` is derived by hand from
//! chosen exact fields and added to the pressure-loss load; the discrete
//! errors are then tabulated over a sequence of meshes.

use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::analysis::solution_errors;
use crate::assembly::assemble_body_force;
use crate::error::{Error, Result};
use crate::geometry::ChannelGeometry;
use crate::problem::Discretization;
use crate::solver::{solve_navier_stokes_forced, solve_stokes_forced, ProblemKind, SolveOptions};

/// Errors below this are treated as roundoff when classifying a table.
const ROUNDOFF: f64 = 1e-10;

/// Exact fields for a manufactured problem. Velocity must vanish on the walls
/// and be periodic between the sections; the pressure may drop by `lambda`.
pub trait ManufacturedSolution: Sync {
    fn lambda(&self) -> f64;
    fn velocity(&self, x: f64, y: f64) -> [f64; 2];
    /// `[[du1/dx, du1/dy], [du2/dx, du2/dy]]`.
    fn velocity_gradient(&self, x: f64, y: f64) -> [[f64; 2]; 2];
    fn pressure(&self, x: f64, y: f64) -> f64;
    /// Body force for the given problem kind.
    fn body_force(&self, kind: ProblemKind, x: f64, y: f64) -> [f64; 2];
}

/// Poiseuille flow plus a periodic stream-function perturbation in the
/// straight channel:
///
/// ```text
/// psi = a (1 - y^2)^2 sin(2 pi x)
/// u   = (lambda (1 - y^2) / 2 + d psi/dy, -d psi/dx)
/// p   = -lambda x + lambda / 2 + c cos(2 pi x) sin(pi y)
/// ```
///
/// The default `c = 5` keeps the pressure error dominated by its own
/// interpolation term, so the quadratic rate is visible from `h = 1/8`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrigonometricFlow {
    pub lambda: f64,
    pub amplitude: f64,
    pub pressure_amplitude: f64,
}

impl Default for TrigonometricFlow {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            amplitude: 0.5,
            pressure_amplitude: 5.0,
        }
    }
}

impl ManufacturedSolution for TrigonometricFlow {
    fn lambda(&self) -> f64 {
        self.lambda
    }

    fn velocity(&self, x: f64, y: f64) -> [f64; 2] {
        let (a, k) = (self.amplitude, 2.0 * PI);
        let g = y - y * y * y;
        let h = (1.0 - y * y).powi(2);
        [
            self.lambda * (1.0 - y * y) / 2.0 - 4.0 * a * g * (k * x).sin(),
            -k * a * h * (k * x).cos(),
        ]
    }

    fn velocity_gradient(&self, x: f64, y: f64) -> [[f64; 2]; 2] {
        let (a, k) = (self.amplitude, 2.0 * PI);
        let (s, c) = ((k * x).sin(), (k * x).cos());
        let g = y - y * y * y;
        let dg = 1.0 - 3.0 * y * y;
        let h = (1.0 - y * y).powi(2);
        [
            [-4.0 * a * k * g * c, -self.lambda * y - 4.0 * a * dg * s],
            [k * k * a * h * s, 4.0 * k * a * g * c],
        ]
    }

    fn pressure(&self, x: f64, y: f64) -> f64 {
        -self.lambda * x
            + self.lambda / 2.0
            + self.pressure_amplitude * (2.0 * PI * x).cos() * (PI * y).sin()
    }

    fn body_force(&self, kind: ProblemKind, x: f64, y: f64) -> [f64; 2] {
        let (a, k, cp) = (self.amplitude, 2.0 * PI, self.pressure_amplitude);
        let (s, c) = ((k * x).sin(), (k * x).cos());
        let g = y - y * y * y;
        let h = (1.0 - y * y).powi(2);
        let lap = [
            4.0 * a * k * k * g * s - self.lambda + 24.0 * a * y * s,
            k * a * c * (k * k * h + 4.0 * (1.0 - 3.0 * y * y)),
        ];
        let grad_p = [
            -self.lambda - cp * k * s * (PI * y).sin(),
            cp * PI * c * (PI * y).cos(),
        ];
        let mut f = [-lap[0] + grad_p[0], -lap[1] + grad_p[1]];
        if kind == ProblemKind::NavierStokes {
            let u = self.velocity(x, y);
            let du = self.velocity_gradient(x, y);
            f[0] += u[0] * du[0][0] + u[1] * du[0][1];
            f[1] += u[0] * du[1][0] + u[1] * du[1][1];
        }
        f
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub h: f64,
    pub dofs: usize,
    pub velocity_l2: f64,
    pub velocity_h1: f64,
    pub pressure_l2: f64,
}

impl ConvergenceRow {
    fn errors(&self) -> [f64; 3] {
        [self.velocity_l2, self.velocity_h1, self.pressure_l2]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateStatus {
    /// Errors decrease monotonically; rates are meaningful.
    Trusted,
    /// Some error sequence is not monotone.
    Untrusted,
    /// Every error is at roundoff level: the exact solution is in the discrete space.
    Exact,
}

/// Errors per mesh (sorted by decreasing `h`) with observed rates.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    /// `log2(e(h) / e(h/2))` per consecutive pair, for `[u L2, u H1, p L2]`.
    pub rates: Vec<[f64; 3]>,
    /// Least-squares slope of `log e` against `log h` over all rows.
    pub fitted: [f64; 3],
    pub status: RateStatus,
}

impl ConvergenceTable {
    pub fn new(mut rows: Vec<ConvergenceRow>) -> Self {
        rows.sort_by(|a, b| b.h.total_cmp(&a.h));
        let rates = rows
            .windows(2)
            .map(|w| {
                let (c, f) = (w[0].errors(), w[1].errors());
                let ratio = (w[0].h / w[1].h).ln();
                std::array::from_fn(|i| (c[i] / f[i]).ln() / ratio)
            })
            .collect();
        let fitted = std::array::from_fn(|i| {
            fit_slope(&rows.iter().map(|r| (r.h, r.errors()[i])).collect::<Vec<_>>())
        });
        let status = if rows.iter().all(|r| r.errors().iter().all(|&e| e < ROUNDOFF)) {
            RateStatus::Exact
        } else if rows
            .windows(2)
            .all(|w| (0..3).all(|i| w[1].errors()[i] < w[0].errors()[i]))
        {
            RateStatus::Trusted
        } else {
            RateStatus::Untrusted
        };
        Self {
            rows,
            rates,
            fitted,
            status,
        }
    }

    /// Adds a row and recomputes the rates.
    pub fn push(&mut self, row: ConvergenceRow) {
        let mut rows = std::mem::take(&mut self.rows);
        rows.push(row);
        *self = Self::new(rows);
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("h,dofs,err_u_l2,err_u_h1,err_p_l2,rate_u_l2,rate_u_h1,rate_p_l2\n");
        for (k, r) in self.rows.iter().enumerate() {
            let _ = write!(
                out,
                "{:.17e},{},{:.17e},{:.17e},{:.17e}",
                r.h, r.dofs, r.velocity_l2, r.velocity_h1, r.pressure_l2
            );
            match (k.checked_sub(1).map(|j| self.rates[j]), self.status) {
                (Some(rate), RateStatus::Exact) => {
                    let _ = rate;
                    out.push_str(",exact,exact,exact\n");
                }
                (Some(rate), _) => {
                    let _ = writeln!(out, ",{:.6},{:.6},{:.6}", rate[0], rate[1], rate[2]);
                }
                (None, _) => out.push_str(",,,\n"),
            }
        }
        out
    }
}

fn fit_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    if points.len() < 2 {
        return f64::NAN;
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Solves the forced problem on `n x n` meshes of `geometry` for every `n`
/// and tabulates the errors against `exact`. Mesh size is `h = 1 / n`.
pub fn manufactured_solution_study<M: ManufacturedSolution>(
    geometry: &ChannelGeometry,
    exact: &M,
    kind: ProblemKind,
    resolutions: &[usize],
    opts: &SolveOptions,
) -> Result<ConvergenceTable> {
    if resolutions.len() < 2 {
        return Err(Error::Analysis("a convergence study needs at least two meshes".into()));
    }
    let mut rows = Vec::with_capacity(resolutions.len());
    for &n in resolutions {
        let disc = Discretization::new(geometry, n, n)?;
        let body = assemble_body_force(&disc.mesh, &disc.dofs, |x, y| exact.body_force(kind, x, y));
        let solution = match kind {
            ProblemKind::Stokes => solve_stokes_forced(&disc, exact.lambda(), Some(&body), opts)?,
            ProblemKind::NavierStokes => solve_navier_stokes_forced(&disc, exact.lambda(), Some(&body), opts)?,
        };
        let [velocity_l2, velocity_h1, pressure_l2] = solution_errors(
            &disc,
            &solution,
            |x, y| exact.velocity(x, y),
            |x, y| exact.velocity_gradient(x, y),
            |x, y| exact.pressure(x, y),
        );
        rows.push(ConvergenceRow {
            h: 1.0 / n as f64,
            dofs: disc.num_unknowns(),
            velocity_l2,
            velocity_h1,
            pressure_l2,
        });
    }
    Ok(ConvergenceTable::new(rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Central differences of the exact fields, independent of the hand-derived force.
    fn fd_body_force(m: &TrigonometricFlow, kind: ProblemKind, x: f64, y: f64) -> [f64; 2] {
        let h = 1e-4;
        let u = |x, y| m.velocity(x, y);
        let mut f = [0.0; 2];
        for c in 0..2 {
            let lap = (u(x + h, y)[c] + u(x - h, y)[c] + u(x, y + h)[c] + u(x, y - h)[c] - 4.0 * u(x, y)[c]) / (h * h);
            let dp = if c == 0 {
                (m.pressure(x + h, y) - m.pressure(x - h, y)) / (2.0 * h)
            } else {
                (m.pressure(x, y + h) - m.pressure(x, y - h)) / (2.0 * h)
            };
            f[c] = -lap + dp;
            if kind == ProblemKind::NavierStokes {
                let ux = (u(x + h, y)[c] - u(x - h, y)[c]) / (2.0 * h);
                let uy = (u(x, y + h)[c] - u(x, y - h)[c]) / (2.0 * h);
                let v = u(x, y);
                f[c] += v[0] * ux + v[1] * uy;
            }
        }
        f
    }

    #[test]
    fn body_force_matches_finite_differences() {
        let m = TrigonometricFlow::default();
        for &(x, y) in &[(0.1, 0.2), (0.37, -0.81), (0.9, 0.55), (0.5, 0.0)] {
            for kind in [ProblemKind::Stokes, ProblemKind::NavierStokes] {
                let exact = m.body_force(kind, x, y);
                let fd = fd_body_force(&m, kind, x, y);
                for c in 0..2 {
                    assert!((exact[c] - fd[c]).abs() < 1e-4 * (1.0 + fd[c].abs()), "{kind:?} {x} {y}: {exact:?} vs {fd:?}");
                }
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences_and_field_is_admissible() {
        let m = TrigonometricFlow::default();
        let h = 1e-6;
        for &(x, y) in &[(0.2, 0.3), (0.77, -0.4)] {
            let g = m.velocity_gradient(x, y);
            for c in 0..2 {
                let dx = (m.velocity(x + h, y)[c] - m.velocity(x - h, y)[c]) / (2.0 * h);
                let dy = (m.velocity(x, y + h)[c] - m.velocity(x, y - h)[c]) / (2.0 * h);
                assert!((g[c][0] - dx).abs() < 1e-7 && (g[c][1] - dy).abs() < 1e-7);
            }
            assert!((g[0][0] + g[1][1]).abs() < 1e-12);
        }
        for y in [-0.6, 0.1, 0.8] {
            let (a, b) = (m.velocity(0.0, y), m.velocity(1.0, y));
            assert!((a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12);
            assert!((m.pressure(1.0, y) - m.pressure(0.0, y) + m.lambda).abs() < 1e-12);
        }
        for x in [0.0, 0.3, 0.6] {
            assert!(m.velocity(x, 1.0).iter().all(|v| v.abs() < 1e-15));
            assert!(m.velocity(x, -1.0).iter().all(|v| v.abs() < 1e-15));
        }
    }

    #[test]
    fn table_bookkeeping() {
        let row = |h: f64, e: f64| ConvergenceRow {
            h,
            dofs: 0,
            velocity_l2: e * h.powi(3),
            velocity_h1: e * h * h,
            pressure_l2: e * h * h,
        };
        let mut t = ConvergenceTable::new(vec![row(0.25, 1.0), row(0.5, 1.0)]);
        assert_eq!(t.rates.len(), 1);
        assert!((t.rates[0][0] - 3.0).abs() < 1e-12);
        t.push(row(0.125, 1.0));
        assert_eq!(t.rows.len(), 3);
        assert_eq!(t.rates.len(), 2);
        assert!((t.fitted[1] - 2.0).abs() < 1e-12);
        assert_eq!(t.status, RateStatus::Trusted);
        t.push(row(0.0625, 5.0));
        assert_eq!(t.status, RateStatus::Untrusted);
        assert_eq!(t.to_csv().lines().count(), 5);
    }

    #[test]
    fn poiseuille_study_is_exact() {
        let exact = TrigonometricFlow {
            amplitude: 0.0,
            pressure_amplitude: 0.0,
            ..TrigonometricFlow::default()
        };
        let t = manufactured_solution_study(
            &ChannelGeometry::straight(),
            &exact,
            ProblemKind::Stokes,
            &[2, 4],
            &SolveOptions::default(),
        )
        .unwrap();
        assert_eq!(t.status, RateStatus::Exact);
        assert!(t.to_csv().contains("exact"));
    }
}
