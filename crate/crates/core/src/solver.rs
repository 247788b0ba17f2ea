//! Linear saddle-point solves and the Picard/Newton iteration for the
//! steady Navier-Stokes problem.

use faer::sparse::{SparseColMat, Triplet};
use faer::linalg::solvers::Solve;
use faer::Col;

use crate::assembly::{assemble_convection_jacobian, assemble_convection_skew};
use crate::constraints::{expand_solution, PressureGauge, ReducedSystem};
use crate::error::{Error, Result};
use crate::problem::Discretization;
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    Stokes,
    NavierStokes,
}

impl ProblemKind {
    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::Stokes => "stokes",
            ProblemKind::NavierStokes => "navier-stokes",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Relative residual required of every linear solve.
    pub linear_tol: f64,
    /// Relative update (H1 seminorm) and residual tolerance of the nonlinear iteration.
    pub nonlinear_tol: f64,
    pub max_iterations: usize,
    /// Switch from Picard to Newton once the relative update drops below
    /// this value; `None` keeps Picard throughout.
    pub newton_switch: Option<f64>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            linear_tol: 1e-12,
            nonlinear_tol: 1e-10,
            max_iterations: 50,
            newton_switch: Some(1e-3),
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        let ok = self.linear_tol > 0.0
            && self.nonlinear_tol > 0.0
            && self.max_iterations >= 1
            && self.newton_switch.is_none_or(|s| s > 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::ConfigField {
                field: "solver".into(),
                message: format!("invalid solver options {self:?}"),
            })
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    /// Relative residual of the last linear solve.
    pub linear_residual: f64,
    /// Nonlinear iterations performed after the Stokes initial guess.
    pub iterations: usize,
    /// Relative H1-seminorm update per iteration.
    pub update_norms: Vec<f64>,
    /// Relative reduced nonlinear residual per iteration.
    pub residual_norms: Vec<f64>,
    /// Number of those iterations that used the Newton linearisation.
    pub newton_steps: usize,
}

/// Velocity and pressure coefficients of a discrete solution.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSolution {
    /// Interleaved quadratic velocity coefficients (see [`crate::dofs`]).
    pub velocity: Vec<f64>,
    /// Linear pressure coefficients with zero mean.
    pub pressure: Vec<f64>,
    pub lambda: f64,
    pub kind: ProblemKind,
    pub diagnostics: Diagnostics,
}

/// Converts the leading `n x n` block of a CSR matrix to faer's column-major
/// sparse format, adding `pin` to one diagonal entry.
fn to_faer(matrix: &CsrMatrix, n: usize, pin: Option<(usize, f64)>) -> Result<SparseColMat<usize, f64>> {
    let mut triplets: Vec<Triplet<usize, usize, f64>> = matrix
        .triplets()
        .filter(|&(r, c, _)| r < n && c < n)
        .map(|(r, c, v)| Triplet::new(r, c, v))
        .collect();
    if let Some((k, v)) = pin {
        triplets.push(Triplet::new(k, k, v));
    }
    SparseColMat::try_new_from_triplets(n, n, &triplets).map_err(|e| Error::LinearSolve {
        size: matrix.nrows(),
        reason: format!("{e:?}"),
    })
}

fn factorize(a: SparseColMat<usize, f64>, size: usize) -> Result<impl Fn(&[f64]) -> Vec<f64>> {
    let lu = a.sp_lu().map_err(|e| Error::LinearSolve {
        size,
        reason: format!("LU factorization failed: {e:?}"),
    })?;
    Ok(move |b: &[f64]| -> Vec<f64> {
        let x = lu.solve(Col::from_fn(b.len(), |i| b[i]));
        (0..b.len()).map(|i| x[i]).collect()
    })
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn residual(matrix: &CsrMatrix, x: &[f64], rhs: &[f64]) -> Vec<f64> {
    matrix.mul_vec(x).iter().zip(rhs).map(|(a, b)| b - a).collect()
}

fn check_shape(matrix: &CsrMatrix, rhs: &[f64]) -> Result<()> {
    let n = matrix.nrows();
    if matrix.ncols() != n || rhs.len() != n {
        return Err(Error::LinearSolve {
            size: n,
            reason: format!("shape mismatch: {}x{} with rhs {}", n, matrix.ncols(), rhs.len()),
        });
    }
    Ok(())
}

/// Applies `solve` followed by up to three steps of iterative refinement
/// against `matrix`.
fn refine(matrix: &CsrMatrix, rhs: &[f64], tol: f64, solve: impl Fn(&[f64]) -> Vec<f64>) -> Result<(Vec<f64>, f64)> {
    let n = matrix.nrows();
    let rhs_norm = norm(rhs);
    let mut x = solve(rhs);
    let mut r = residual(matrix, &x, rhs);
    let mut rel = norm(&r) / rhs_norm;
    for _ in 0..3 {
        if rel <= tol || !rel.is_finite() {
            break;
        }
        let dx = solve(&r);
        let candidate: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a + b).collect();
        let rc = residual(matrix, &candidate, rhs);
        let rel_c = norm(&rc) / rhs_norm;
        if rel_c >= rel {
            break;
        }
        (x, r, rel) = (candidate, rc, rel_c);
    }
    if !rel.is_finite() {
        let pivot = x.iter().position(|v| !v.is_finite()).unwrap_or(0);
        return Err(Error::LinearSolve {
            size: n,
            reason: format!("singular factorization (non-finite solution at unknown {pivot})"),
        });
    }
    if rel > tol {
        return Err(Error::LinearSolve {
            size: n,
            reason: format!("relative residual {rel:e} exceeds tolerance {tol:e}"),
        });
    }
    Ok((x, rel))
}

/// Sparse LU solve of a square system with up to three steps of iterative
/// refinement. Returns the solution and its relative residual.
pub fn solve_linear_saddle(matrix: &CsrMatrix, rhs: &[f64], tol: f64) -> Result<(Vec<f64>, f64)> {
    check_shape(matrix, rhs)?;
    let n = matrix.nrows();
    if norm(rhs) == 0.0 {
        return Ok((vec![0.0; n], 0.0));
    }
    let solve = factorize(to_faer(matrix, n, None)?, n)?;
    refine(matrix, rhs, tol, solve)
}

/// Solves a zero-mean bordered system `[[K, m], [m^T, 0]]` without
/// factorizing the dense border.
///
/// `K` is singular with the constant pressure `z` in its kernel on both
/// sides, so the multiplier is `z.r / z.m` and the remaining system is
/// consistent. It is solved with `K + m_k e_k e_k^T`, which is nonsingular
/// because `z_k != 0`, and the mean is restored by adding a multiple of `z`.
pub fn solve_zero_mean_saddle(system: &ReducedSystem, tol: f64) -> Result<(Vec<f64>, f64)> {
    let matrix = &system.matrix;
    let rhs = &system.rhs;
    check_shape(matrix, rhs)?;
    let dim = matrix.nrows();
    let nu = system.num_velocity();
    let np = system.num_pressure();
    if system.gauge != PressureGauge::ZeroMean || dim != nu + np + 1 || np == 0 {
        return solve_linear_saddle(matrix, rhs, tol);
    }
    if norm(rhs) == 0.0 {
        return Ok((vec![0.0; dim], 0.0));
    }
    let mean = &system.mean;
    let total: f64 = mean.iter().sum();
    let k = (0..np).max_by(|&a, &b| mean[a].total_cmp(&mean[b])).unwrap_or(0);
    let inner = factorize(to_faer(matrix, nu + np, Some((nu + k, mean[k])))?, dim)?;
    let solve = |r: &[f64]| -> Vec<f64> {
        let mu = r[nu..nu + np].iter().sum::<f64>() / total;
        let shifted: Vec<f64> = (0..nu + np)
            .map(|i| if i < nu { r[i] } else { r[i] - mean[i - nu] * mu })
            .collect();
        let mut x = inner(&shifted);
        let alpha = (r[dim - 1] - mean.iter().zip(&x[nu..]).map(|(m, p)| m * p).sum::<f64>()) / total;
        for p in &mut x[nu..] {
            *p += alpha;
        }
        x.push(mu);
        x
    };
    refine(matrix, rhs, tol, solve)
}

fn solve_reduced(
    disc: &Discretization,
    system: &ReducedSystem,
    opts: &SolveOptions,
) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let (x, rel) = solve_zero_mean_saddle(system, opts.linear_tol).map_err(|e| match e {
        Error::LinearSolve { size, reason } => Error::LinearSolve {
            size,
            reason: format!("{reason} on {}", disc.label()),
        },
        other => other,
    })?;
    let (u, p) = expand_solution(&x, system);
    Ok((u, p, rel))
}

fn full_load(disc: &Discretization, lambda: f64, body: Option<&[f64]>) -> Vec<f64> {
    let mut f = disc.load(lambda);
    if let Some(body) = body {
        for (a, b) in f.iter_mut().zip(body) {
            *a += b;
        }
    }
    f
}

/// Stokes solution for pressure-loss coefficient `lambda`.
pub fn solve_stokes(disc: &Discretization, lambda: f64, opts: &SolveOptions) -> Result<FieldSolution> {
    solve_stokes_forced(disc, lambda, None, opts)
}

/// Stokes solution with an additional body-force load vector.
pub fn solve_stokes_forced(
    disc: &Discretization,
    lambda: f64,
    body: Option<&[f64]>,
    opts: &SolveOptions,
) -> Result<FieldSolution> {
    opts.validate()?;
    let f = full_load(disc, lambda, body);
    let system = disc.reduced.with_velocity_block(&disc.system.a, &f);
    let (velocity, pressure, rel) = solve_reduced(disc, &system, opts)?;
    Ok(FieldSolution {
        velocity,
        pressure,
        lambda,
        kind: ProblemKind::Stokes,
        diagnostics: Diagnostics {
            linear_residual: rel,
            ..Diagnostics::default()
        },
    })
}

pub fn solve_navier_stokes(disc: &Discretization, lambda: f64, opts: &SolveOptions) -> Result<FieldSolution> {
    solve_navier_stokes_forced(disc, lambda, None, opts)
}

/// Picard (Oseen) iteration started from the Stokes solution, switching to
/// Newton once the update is small. Returns the first iterate meeting both
/// the update and the residual tolerance.
pub fn solve_navier_stokes_forced(
    disc: &Discretization,
    lambda: f64,
    body: Option<&[f64]>,
    opts: &SolveOptions,
) -> Result<FieldSolution> {
    let stokes = solve_stokes_forced(disc, lambda, body, opts)?;
    let f = full_load(disc, lambda, body);
    let f_reduced_norm = norm(&disc.reduced.reduction.reduce_vector(&f));
    let a = &disc.system.a;

    let mut u = stokes.velocity;
    let mut p = stokes.pressure;
    let mut diag = Diagnostics {
        linear_residual: stokes.diagnostics.linear_residual,
        ..Diagnostics::default()
    };
    let mut convection = assemble_convection_skew(&disc.mesh, &disc.dofs, &u);
    let mut use_newton = false;

    for _ in 0..opts.max_iterations {
        let mut block = a.add_scaled(&convection, 1.0);
        let mut rhs = f.clone();
        if use_newton {
            let jac = assemble_convection_jacobian(&disc.mesh, &disc.dofs, &u);
            let ju = jac.mul_vec(&u);
            block = block.add_scaled(&jac, 1.0);
            for (r, v) in rhs.iter_mut().zip(ju) {
                *r += v;
            }
            diag.newton_steps += 1;
        }
        let system = disc.reduced.with_velocity_block(&block, &rhs);
        let (u_new, p_new, rel) = solve_reduced(disc, &system, opts)?;
        diag.linear_residual = rel;
        diag.iterations += 1;

        let delta: Vec<f64> = u_new.iter().zip(&u).map(|(a, b)| a - b).collect();
        let scale = a.bilinear(&u_new, &u_new).max(0.0).sqrt();
        let update = a.bilinear(&delta, &delta).max(0.0).sqrt();
        let rel_update = if scale > 0.0 { update / scale } else { update };

        convection = assemble_convection_skew(&disc.mesh, &disc.dofs, &u_new);
        let res = nonlinear_residual(disc, &a.add_scaled(&convection, 1.0), &u_new, &p_new, &f);
        let rel_res = if f_reduced_norm > 0.0 { res / f_reduced_norm } else { res };

        diag.update_norms.push(rel_update);
        diag.residual_norms.push(rel_res);
        u = u_new;
        p = p_new;

        if rel_update <= opts.nonlinear_tol && rel_res <= opts.nonlinear_tol {
            return Ok(FieldSolution {
                velocity: u,
                pressure: p,
                lambda,
                kind: ProblemKind::NavierStokes,
                diagnostics: diag,
            });
        }
        if let Some(switch) = opts.newton_switch {
            use_newton = use_newton || rel_update < switch;
        }
    }

    let last_update = diag.update_norms.last().copied().unwrap_or(f64::NAN);
    Err(Error::NonConvergence {
        iterations: diag.iterations,
        last_update,
        last: Box::new(FieldSolution {
            velocity: u,
            pressure: p,
            lambda,
            kind: ProblemKind::NavierStokes,
            diagnostics: diag,
        }),
    })
}

/// Euclidean norm of the reduced momentum residual `P^T (K u + B^T p - f)`.
fn nonlinear_residual(disc: &Discretization, block: &CsrMatrix, u: &[f64], p: &[f64], f: &[f64]) -> f64 {
    let ku = block.mul_vec(u);
    let btp = disc.system.b.mul_transpose_vec(p);
    let r: Vec<f64> = ku.iter().zip(&btp).zip(f).map(|((a, b), c)| a + b - c).collect();
    norm(&disc.reduced.reduction.reduce_vector(&r))
}

/// Dispatches on the problem kind.
pub fn solve(disc: &Discretization, kind: ProblemKind, lambda: f64, opts: &SolveOptions) -> Result<FieldSolution> {
    match kind {
        ProblemKind::Stokes => solve_stokes(disc, lambda, opts),
        ProblemKind::NavierStokes => solve_navier_stokes(disc, lambda, opts),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ChannelGeometry;
    use crate::sparse::TripletBuilder;

    #[test]
    fn zero_rhs_gives_zero_solution() {
        let m = CsrMatrix::identity(4);
        let (x, rel) = solve_linear_saddle(&m, &[0.0; 4], 1e-12).unwrap();
        assert_eq!(x, vec![0.0; 4]);
        assert_eq!(rel, 0.0);
    }

    #[test]
    fn indefinite_two_by_two() {
        // [[0, 1], [1, 0]] needs pivoting
        let mut b = TripletBuilder::new(2, 2);
        b.push(0, 1, 1.0);
        b.push(1, 0, 1.0);
        let (x, _) = solve_linear_saddle(&b.build(), &[2.0, 3.0], 1e-14).unwrap();
        assert_eq!(x, vec![3.0, 2.0]);
    }

    #[test]
    fn bordered_solve_matches_full_factorization() {
        let disc = Discretization::new(&ChannelGeometry::cosine(0.2, 1).unwrap(), 4, 6).unwrap();
        let mut system = disc.reduced.clone();
        system.rhs = (0..system.dim()).map(|i| ((i * 7 % 11) as f64 - 5.0) / 3.0).collect();
        let (full, _) = solve_linear_saddle(&system.matrix, &system.rhs, 1e-12).unwrap();
        let (bordered, rel) = solve_zero_mean_saddle(&system, 1e-12).unwrap();
        assert!(rel <= 1e-12);
        for (a, b) in full.iter().zip(&bordered) {
            assert!((a - b).abs() < 1e-9 * (1.0 + a.abs()), "{a} vs {b}");
        }
    }

    #[test]
    fn singular_matrix_is_reported() {
        let mut b = TripletBuilder::new(2, 2);
        b.push(0, 0, 1.0);
        b.push(1, 0, 1.0);
        let err = solve_linear_saddle(&b.build(), &[1.0, 2.0], 1e-12).unwrap_err();
        assert!(matches!(err, Error::LinearSolve { size: 2, .. }), "{err}");
    }

    #[test]
    fn stokes_with_zero_lambda_is_zero() {
        let disc = Discretization::new(&ChannelGeometry::cosine(0.2, 1).unwrap(), 3, 3).unwrap();
        let s = solve_stokes(&disc, 0.0, &SolveOptions::default()).unwrap();
        assert!(s.velocity.iter().all(|&v| v == 0.0));
        assert!(s.pressure.iter().all(|&v| v == 0.0));
        let ns = solve_navier_stokes(&disc, 0.0, &SolveOptions::default()).unwrap();
        assert_eq!(ns.diagnostics.iterations, 1);
        assert!(ns.velocity.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn options_are_validated() {
        let opts = SolveOptions {
            max_iterations: 0,
            ..SolveOptions::default()
        };
        assert!(opts.validate().is_err());
    }

    #[test]
    fn non_convergence_carries_last_iterate() {
        let disc = Discretization::new(&ChannelGeometry::cosine(0.3, 1).unwrap(), 4, 4).unwrap();
        let opts = SolveOptions {
            max_iterations: 1,
            newton_switch: None,
            ..SolveOptions::default()
        };
        match solve_navier_stokes(&disc, 20.0, &opts) {
            Err(Error::NonConvergence { iterations, last, .. }) => {
                assert_eq!(iterations, 1);
                assert_eq!(last.diagnostics.update_norms.len(), 1);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }
}
