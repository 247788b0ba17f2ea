//! Post-processing: section traces, the inlet/outlet pressure drop,
//! periodicity of the streamwise derivative, strong-form residuals, norms
//! and the energy balance of discrete solutions.

use std::collections::HashMap;

use crate::assembly::{assemble_convection_skew, eval_velocity};
use crate::element::Triangle;
use crate::error::{Error, Result};
use crate::geometry::ChannelGeometry;
use crate::mesh::{BoundaryTag, Mesh, LOCAL_EDGES, PAIRING_TOL};
use crate::problem::Discretization;
use crate::quadrature::QuadratureRule;
use crate::solver::{FieldSolution, ProblemKind};

/// Closed-form plane Poiseuille flow `(u1, u2, p)` in the straight channel,
/// with the pressure gauged to zero mean.
pub fn poiseuille_exact(geom: &ChannelGeometry, lambda: f64, point: [f64; 2]) -> Result<(f64, f64, f64)> {
    if !geom.is_straight() {
        return Err(Error::Analysis(
            "Poiseuille flow is only exact in the straight channel".into(),
        ));
    }
    let [x, y] = point;
    Ok((lambda * (1.0 - y * y) / 2.0, 0.0, -lambda * x + lambda / 2.0))
}

/// Samples of pressure and streamwise velocity derivatives along one section.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceProfile {
    pub tag: BoundaryTag,
    /// Strictly increasing ordinates in `(-1, 1)`: the section's non-corner nodes.
    pub y: Vec<f64>,
    pub pressure: Vec<f64>,
    pub du1_dx: Vec<f64>,
    pub du2_dx: Vec<f64>,
}

/// Section node (corner excluded) with the owning section edges.
struct SectionSample {
    node: usize,
    edges: Vec<usize>,
}

fn section_samples(mesh: &Mesh, tag: BoundaryTag) -> Vec<SectionSample> {
    let mut by_node: HashMap<usize, Vec<usize>> = HashMap::new();
    for (e, edge) in mesh.boundary_edges().iter().enumerate() {
        if edge.tag == tag {
            for n in [edge.vertices[0], edge.vertices[1], edge.midpoint] {
                by_node.entry(n).or_default().push(e);
            }
        }
    }
    let mut samples: Vec<SectionSample> = by_node
        .into_iter()
        .filter(|(n, _)| mesh.node_tag(*n) == Some(tag))
        .map(|(node, mut edges)| {
            edges.sort_unstable();
            SectionSample { node, edges }
        })
        .collect();
    samples.sort_by(|a, b| mesh.node(a.node)[1].total_cmp(&mesh.node(b.node)[1]));
    samples
}

fn section_midpoint_pressure(mesh: &Mesh, pressure: &[f64], sample: &SectionSample) -> f64 {
    if sample.node < mesh.num_vertices() {
        return pressure[sample.node];
    }
    let edge = &mesh.boundary_edges()[sample.edges[0]];
    0.5 * (pressure[edge.vertices[0]] + pressure[edge.vertices[1]])
}

/// `du/dx` at a node, evaluated inside each element owning a section edge
/// through the node and averaged.
fn one_sided_dudx(mesh: &Mesh, velocity: &[f64], sample: &SectionSample) -> [f64; 2] {
    let mut sum = [0.0; 2];
    for &e in &sample.edges {
        let edge = &mesh.boundary_edges()[e];
        let tri = Triangle::new(mesh.vertex_coords(edge.element));
        let nodes = mesh.triangles()[edge.element];
        let l = tri.barycentric(mesh.node(sample.node));
        let (_, du) = eval_velocity(velocity, &nodes, &Triangle::p2_values(&l), &tri.p2_gradients(&l));
        sum[0] += du[0][0];
        sum[1] += du[1][0];
    }
    let n = sample.edges.len() as f64;
    [sum[0] / n, sum[1] / n]
}

pub fn section_trace(mesh: &Mesh, solution: &FieldSolution, tag: BoundaryTag) -> TraceProfile {
    let samples = section_samples(mesh, tag);
    let mut profile = TraceProfile {
        tag,
        y: Vec::with_capacity(samples.len()),
        pressure: Vec::with_capacity(samples.len()),
        du1_dx: Vec::with_capacity(samples.len()),
        du2_dx: Vec::with_capacity(samples.len()),
    };
    for s in &samples {
        let d = one_sided_dudx(mesh, &solution.velocity, s);
        profile.y.push(mesh.node(s.node)[1]);
        profile.pressure.push(section_midpoint_pressure(mesh, &solution.pressure, s));
        profile.du1_dx.push(d[0]);
        profile.du2_dx.push(d[1]);
    }
    profile
}

fn matched_traces(mesh: &Mesh, solution: &FieldSolution) -> Result<(TraceProfile, TraceProfile)> {
    let left = section_trace(mesh, solution, BoundaryTag::Gamma0);
    let right = section_trace(mesh, solution, BoundaryTag::Gamma1);
    if left.y.is_empty() || left.y.len() != right.y.len() {
        return Err(Error::Analysis(format!(
            "section traces have unmatched sizes {} and {}",
            left.y.len(),
            right.y.len()
        )));
    }
    let tol = 2.0 * PAIRING_TOL;
    if let Some(k) = (0..left.y.len()).find(|&k| (left.y[k] - right.y[k]).abs() > tol) {
        return Err(Error::Analysis(format!(
            "unmatched section ordinates {} and {}",
            left.y[k], right.y[k]
        )));
    }
    Ok((left, right))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PressureJump {
    pub gamma0: TraceProfile,
    pub gamma1: TraceProfile,
    /// `p(1, y) - p(0, y)` at the matched ordinates.
    pub jump: Vec<f64>,
    /// Section average `(1/2) int (p(1, y) - p(0, y)) dy`.
    pub mean_jump: f64,
    /// `max |jump + lambda|` over all section vertices, corners included.
    pub max_deviation: f64,
}

impl PressureJump {
    pub fn mean_deviation(&self, lambda: f64) -> f64 {
        (self.mean_jump + lambda).abs()
    }
}

/// Compares the discrete pressure on the outlet with the inlet at matched
/// ordinates. The continuous solution satisfies `p(1, y) = p(0, y) - lambda`.
pub fn pressure_jump(disc: &Discretization, solution: &FieldSolution) -> Result<PressureJump> {
    let mesh = &disc.mesh;
    let (gamma0, gamma1) = matched_traces(mesh, solution)?;
    let jump: Vec<f64> = gamma1.pressure.iter().zip(&gamma0.pressure).map(|(b, a)| b - a).collect();

    let pairs: Vec<(usize, usize)> = mesh
        .periodic_pairs()
        .iter()
        .filter(|p| p.left < mesh.num_vertices())
        .map(|p| (p.left, p.right))
        .collect();
    let mut integral = 0.0;
    let mut length = 0.0;
    let mut max_deviation: f64 = 0.0;
    for (k, &(l, r)) in pairs.iter().enumerate() {
        let j = solution.pressure[r] - solution.pressure[l];
        max_deviation = max_deviation.max((j + solution.lambda).abs());
        if k + 1 < pairs.len() {
            let (l2, r2) = pairs[k + 1];
            let j2 = solution.pressure[r2] - solution.pressure[l2];
            let dy = mesh.node(l2)[1] - mesh.node(l)[1];
            integral += 0.5 * (j + j2) * dy;
            length += dy;
        }
    }
    Ok(PressureJump {
        gamma0,
        gamma1,
        jump,
        mean_jump: integral / length,
        max_deviation,
    })
}

/// `max |du/dx(1, y) - du/dx(0, y)|` over matched ordinates and both
/// components, using one-sided element derivatives on each section.
pub fn derivative_periodicity(disc: &Discretization, solution: &FieldSolution) -> Result<f64> {
    let (left, right) = matched_traces(&disc.mesh, solution)?;
    let mismatch = (0..left.y.len())
        .map(|k| {
            (right.du1_dx[k] - left.du1_dx[k])
                .abs()
                .max((right.du2_dx[k] - left.du2_dx[k]).abs())
        })
        .fold(0.0, f64::max);
    Ok(mismatch)
}

/// Element-wise strong residual in L2: momentum `-Lap u + (u.grad)u + grad p - f`
/// (convection only for Navier-Stokes solutions) and `div u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrongResidual {
    pub momentum: f64,
    pub divergence: f64,
}

pub fn strong_residual(
    disc: &Discretization,
    solution: &FieldSolution,
    body_force: Option<&(dyn Fn(f64, f64) -> [f64; 2] + Sync)>,
) -> StrongResidual {
    let mesh = &disc.mesh;
    let rule = QuadratureRule::triangle_degree5();
    let convective = solution.kind == ProblemKind::NavierStokes;
    let (mut momentum, mut divergence) = (0.0, 0.0);
    for k in 0..mesh.num_triangles() {
        let tri = Triangle::new(mesh.vertex_coords(k));
        let nodes = mesh.triangles()[k];
        let hess = tri.p2_hessians();
        let mut lap = [0.0; 2];
        for (n, h) in hess.iter().enumerate() {
            for (c, l) in lap.iter_mut().enumerate() {
                *l += solution.velocity[2 * nodes[n] + c] * (h[0][0] + h[1][1]);
            }
        }
        let mut grad_p = [0.0; 2];
        for (i, g) in tri.grad_bary.iter().enumerate() {
            grad_p[0] += solution.pressure[nodes[i]] * g[0];
            grad_p[1] += solution.pressure[nodes[i]] * g[1];
        }
        for (l, w) in rule.iter() {
            let s = Triangle::p2_values(l);
            let g = tri.p2_gradients(l);
            let (u, du) = eval_velocity(&solution.velocity, &nodes, &s, &g);
            let mut r = [-lap[0] + grad_p[0], -lap[1] + grad_p[1]];
            if convective {
                r[0] += u[0] * du[0][0] + u[1] * du[0][1];
                r[1] += u[0] * du[1][0] + u[1] * du[1][1];
            }
            if let Some(f) = body_force {
                let [x, y] = tri.point(l);
                let fv = f(x, y);
                r[0] -= fv[0];
                r[1] -= fv[1];
            }
            let jw = w * tri.jacobian();
            momentum += jw * (r[0] * r[0] + r[1] * r[1]);
            let div = du[0][0] + du[1][1];
            divergence += jw * div * div;
        }
    }
    StrongResidual {
        momentum: momentum.sqrt(),
        divergence: divergence.sqrt(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms {
    pub velocity_l2: f64,
    /// `|u|_{H1}`, the gradient part only.
    pub velocity_h1_semi: f64,
    pub velocity_h1: f64,
    pub pressure_l2: f64,
    /// `Q = int_{Gamma1} u1 dy`.
    pub flow_rate: f64,
    /// `max_q |int q div u|`.
    pub divergence_residual: f64,
}

pub fn norms_and_flux(disc: &Discretization, solution: &FieldSolution) -> Norms {
    let mesh = &disc.mesh;
    let rule = QuadratureRule::triangle_degree5();
    let (mut l2, mut semi, mut p2) = (0.0, 0.0, 0.0);
    for k in 0..mesh.num_triangles() {
        let tri = Triangle::new(mesh.vertex_coords(k));
        let nodes = mesh.triangles()[k];
        for (l, w) in rule.iter() {
            let s = Triangle::p2_values(l);
            let g = tri.p2_gradients(l);
            let (u, du) = eval_velocity(&solution.velocity, &nodes, &s, &g);
            let p: f64 = (0..3).map(|i| solution.pressure[nodes[i]] * l[i]).sum();
            let jw = w * tri.jacobian();
            l2 += jw * (u[0] * u[0] + u[1] * u[1]);
            semi += jw * du.iter().flatten().map(|d| d * d).sum::<f64>();
            p2 += jw * p * p;
        }
    }
    let flow_rate = disc.system.f.iter().zip(&solution.velocity).map(|(a, b)| a * b).sum();
    let divergence_residual = disc
        .system
        .b
        .mul_vec(&solution.velocity)
        .iter()
        .fold(0.0, |m: f64, v| m.max(v.abs()));
    Norms {
        velocity_l2: l2.sqrt(),
        velocity_h1_semi: semi.sqrt(),
        velocity_h1: (l2 + semi).sqrt(),
        pressure_l2: p2.sqrt(),
        flow_rate,
        divergence_residual,
    }
}

/// Terms of the discrete energy balance `a(u, u) + bs(u; u, u) = lambda int_{Gamma1} u1 dy`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyBalance {
    /// `a(u, u)`.
    pub dissipation: f64,
    /// `bs(u; u, u)`, zero by antisymmetry.
    pub convection: f64,
    /// `lambda int_{Gamma1} u1 dy`.
    pub work: f64,
}

impl EnergyBalance {
    /// `|a + bs - work| / a`, or the absolute defect when `a = 0`.
    pub fn relative_error(&self) -> f64 {
        let defect = (self.dissipation + self.convection - self.work).abs();
        if self.dissipation > 0.0 {
            defect / self.dissipation
        } else {
            defect
        }
    }
}

pub fn energy_balance(disc: &Discretization, solution: &FieldSolution) -> EnergyBalance {
    let u = &solution.velocity;
    let convection = match solution.kind {
        ProblemKind::Stokes => 0.0,
        ProblemKind::NavierStokes => assemble_convection_skew(&disc.mesh, &disc.dofs, u).bilinear(u, u),
    };
    EnergyBalance {
        dissipation: disc.system.a.bilinear(u, u),
        convection,
        work: solution.lambda * disc.system.f.iter().zip(u).map(|(a, b)| a * b).sum::<f64>(),
    }
}

/// Largest deviation from `u1(x, -y) = u1(x, y)`, `u2(x, -y) = -u2(x, y)`,
/// `p(x, -y) = p(x, y)`, relative to the largest nodal magnitude.
pub fn mirror_symmetry_defect(disc: &Discretization, solution: &FieldSolution) -> Result<f64> {
    let mesh = &disc.mesh;
    let key = |p: [f64; 2]| ((p[0] * 1e9).round() as i64, (p[1] * 1e9).round() as i64);
    let index: HashMap<(i64, i64), usize> = mesh.nodes().iter().enumerate().map(|(n, &p)| (key(p), n)).collect();
    let scale_u = solution.velocity.iter().fold(0.0, |m: f64, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let scale_p = solution.pressure.iter().fold(0.0, |m: f64, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let mut defect: f64 = 0.0;
    for (n, &[x, y]) in mesh.nodes().iter().enumerate() {
        let m = *index
            .get(&key([x, -y]))
            .ok_or_else(|| Error::Analysis(format!("node ({x}, {y}) has no mirror image")))?;
        let u = &solution.velocity;
        defect = defect.max((u[2 * m] - u[2 * n]).abs() / scale_u);
        defect = defect.max((u[2 * m + 1] + u[2 * n + 1]).abs() / scale_u);
        if n < mesh.num_vertices() {
            if m >= mesh.num_vertices() {
                return Err(Error::Analysis("mirror of a vertex is not a vertex".into()));
            }
            defect = defect.max((solution.pressure[m] - solution.pressure[n]).abs() / scale_p);
        }
    }
    Ok(defect)
}

/// L2 and H1 velocity errors and the mean-free L2 pressure error against exact fields.
pub fn solution_errors<U, G, P>(
    disc: &Discretization,
    solution: &FieldSolution,
    velocity: U,
    gradient: G,
    pressure: P,
) -> [f64; 3]
where
    U: Fn(f64, f64) -> [f64; 2],
    G: Fn(f64, f64) -> [[f64; 2]; 2],
    P: Fn(f64, f64) -> f64,
{
    let mesh = &disc.mesh;
    let rule = QuadratureRule::triangle_degree5();
    let (mut eu, mut egrad) = (0.0, 0.0);
    let (mut ep_mean, mut ep_sq, mut volume) = (0.0, 0.0, 0.0);
    for k in 0..mesh.num_triangles() {
        let tri = Triangle::new(mesh.vertex_coords(k));
        let nodes = mesh.triangles()[k];
        for (l, w) in rule.iter() {
            let [x, y] = tri.point(l);
            let s = Triangle::p2_values(l);
            let g = tri.p2_gradients(l);
            let (u, du) = eval_velocity(&solution.velocity, &nodes, &s, &g);
            let (ue, ge) = (velocity(x, y), gradient(x, y));
            let ph: f64 = (0..3).map(|i| solution.pressure[nodes[i]] * l[i]).sum();
            let ep = ph - pressure(x, y);
            let jw = w * tri.jacobian();
            eu += jw * ((u[0] - ue[0]).powi(2) + (u[1] - ue[1]).powi(2));
            for a in 0..2 {
                for b in 0..2 {
                    egrad += jw * (du[a][b] - ge[a][b]).powi(2);
                }
            }
            ep_mean += jw * ep;
            ep_sq += jw * ep * ep;
            volume += jw;
        }
    }
    let pressure_err = (ep_sq - ep_mean * ep_mean / volume).max(0.0).sqrt();
    [eu.sqrt(), (eu + egrad).sqrt(), pressure_err]
}

/// Largest nodal velocity and pressure errors against the Poiseuille solution.
pub fn poiseuille_nodal_errors(disc: &Discretization, solution: &FieldSolution) -> Result<(f64, f64)> {
    let mesh = &disc.mesh;
    let mut eu: f64 = 0.0;
    let mut ep: f64 = 0.0;
    for (n, &p) in mesh.nodes().iter().enumerate() {
        let (u1, u2, pe) = poiseuille_exact(&disc.geometry, solution.lambda, p)?;
        eu = eu
            .max((solution.velocity[2 * n] - u1).abs())
            .max((solution.velocity[2 * n + 1] - u2).abs());
        if n < mesh.num_vertices() {
            ep = ep.max((solution.pressure[n] - pe).abs());
        }
    }
    Ok((eu, ep))
}

/// Pressure at every quadratic node; midpoints take the edge average.
pub fn nodal_pressures(mesh: &Mesh, pressure: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; mesh.num_nodes()];
    out[..mesh.num_vertices()].copy_from_slice(&pressure[..mesh.num_vertices()]);
    for t in mesh.triangles() {
        for (e, [a, b]) in LOCAL_EDGES.iter().enumerate() {
            out[t[3 + e]] = 0.5 * (pressure[t[*a]] + pressure[t[*b]]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{interpolate_pressure, interpolate_velocity};
    use crate::solver::Diagnostics;

    fn poiseuille(disc: &Discretization, lambda: f64) -> FieldSolution {
        FieldSolution {
            velocity: interpolate_velocity(&disc.mesh, |_, y| [lambda * (1.0 - y * y) / 2.0, 0.0]),
            pressure: interpolate_pressure(&disc.mesh, |x, _| -lambda * x + lambda / 2.0),
            lambda,
            kind: ProblemKind::Stokes,
            diagnostics: Diagnostics::default(),
        }
    }

    #[test]
    fn poiseuille_oracle_values() {
        let g = ChannelGeometry::straight();
        assert_eq!(poiseuille_exact(&g, 1.0, [0.5, 0.0]).unwrap(), (0.5, 0.0, 0.0));
        let (u1, u2, _) = poiseuille_exact(&g, 1.0, [0.3, 1.0]).unwrap();
        assert_eq!((u1, u2), (0.0, 0.0));
        for y in [-0.9, -0.2, 0.0, 0.7] {
            let (_, _, p1) = poiseuille_exact(&g, 2.0, [1.0, y]).unwrap();
            let (_, _, p0) = poiseuille_exact(&g, 2.0, [0.0, y]).unwrap();
            assert_eq!(p1 - p0, -2.0);
        }
        let wavy = ChannelGeometry::cosine(0.2, 1).unwrap();
        assert!(poiseuille_exact(&wavy, 1.0, [0.5, 0.0]).is_err());
    }

    #[test]
    fn interpolated_poiseuille_passes_every_identity() {
        let disc = Discretization::new(&ChannelGeometry::straight(), 4, 6).unwrap();
        let sol = poiseuille(&disc, 1.0);
        let jump = pressure_jump(&disc, &sol).unwrap();
        assert!(jump.max_deviation < 1e-12);
        assert!((jump.mean_jump + 1.0).abs() < 1e-12);
        assert!(jump.jump.iter().all(|j| (j + 1.0).abs() < 1e-12));
        assert_eq!(jump.gamma0.y.len(), 2 * 6 - 1);
        assert!(jump.gamma0.y.windows(2).all(|w| w[0] < w[1]));
        assert!(derivative_periodicity(&disc, &sol).unwrap() < 1e-12);
        let r = strong_residual(&disc, &sol, None);
        assert!(r.momentum < 1e-10 && r.divergence < 1e-12, "{r:?}");
        let norms = norms_and_flux(&disc, &sol);
        assert!((norms.flow_rate - 2.0 / 3.0).abs() < 1e-14);
        assert!((norms.velocity_h1_semi.powi(2) - 2.0 / 3.0).abs() < 1e-13);
        let e = energy_balance(&disc, &sol);
        assert!((e.dissipation - 2.0 / 3.0).abs() < 1e-13);
        assert!((e.work - 2.0 / 3.0).abs() < 1e-14);
        assert!(mirror_symmetry_defect(&disc, &sol).unwrap() < 1e-15);
    }

    #[test]
    fn jump_is_gauge_invariant() {
        let disc = Discretization::new(&ChannelGeometry::straight(), 3, 4).unwrap();
        let mut sol = poiseuille(&disc, 1.5);
        let before = pressure_jump(&disc, &sol).unwrap();
        for p in &mut sol.pressure {
            *p += 7.25;
        }
        let after = pressure_jump(&disc, &sol).unwrap();
        for (a, b) in before.jump.iter().zip(&after.jump) {
            assert!((a - b).abs() < 1e-13);
        }
        assert!((before.mean_jump - after.mean_jump).abs() < 1e-13);
    }

    #[test]
    fn zero_solution_is_trivial() {
        let disc = Discretization::new(&ChannelGeometry::cosine(0.2, 1).unwrap(), 3, 3).unwrap();
        let sol = poiseuille(&disc, 0.0);
        assert_eq!(pressure_jump(&disc, &sol).unwrap().max_deviation, 0.0);
        assert_eq!(derivative_periodicity(&disc, &sol).unwrap(), 0.0);
        let r = strong_residual(&disc, &sol, None);
        assert_eq!((r.momentum, r.divergence), (0.0, 0.0));
        let n = norms_and_flux(&disc, &sol);
        assert_eq!((n.velocity_h1, n.pressure_l2, n.flow_rate), (0.0, 0.0, 0.0));
    }

    #[test]
    fn exact_fields_have_zero_error() {
        let disc = Discretization::new(&ChannelGeometry::straight(), 3, 3).unwrap();
        let sol = poiseuille(&disc, 2.0);
        let e = solution_errors(
            &disc,
            &sol,
            |_, y| [1.0 - y * y, 0.0],
            |_, y| [[0.0, -2.0 * y], [0.0, 0.0]],
            |x, _| -2.0 * x + 3.0,
        );
        assert!(e.iter().all(|&v| v < 1e-12), "{e:?}");
        let (eu, ep) = poiseuille_nodal_errors(&disc, &sol).unwrap();
        assert!(eu < 1e-15 && ep < 1e-15);
    }
}
