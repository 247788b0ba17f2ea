//! Global finite-element operators.
//!
//! Element contributions are computed in parallel and scattered into the
//! global triplet list in element order, so every assembled matrix is
//! bitwise independent of the thread count.

use rayon::prelude::*;

use crate::dofs::DofMap;
use crate::element::Triangle;
use crate::error::{Error, Result};
use crate::mesh::{BoundaryTag, Mesh};
use crate::quadrature::QuadratureRule;
use crate::sparse::{CsrMatrix, TripletBuilder};

/// Assembled blocks of the Stokes / Oseen saddle-point problem.
#[derive(Debug, Clone)]
pub struct SparseSystem {
    /// Vector Laplacian `int grad(u) : grad(v)`.
    pub a: CsrMatrix,
    /// Divergence coupling `-int q div(v)`, pressure rows by velocity columns.
    pub b: CsrMatrix,
    /// Skew convection linearised at some state, if any.
    pub convection: Option<CsrMatrix>,
    /// Right-hand side on the velocity dofs.
    pub f: Vec<f64>,
    /// Pressure mean functional `int q`.
    pub mean: Vec<f64>,
}

impl SparseSystem {
    pub fn assemble(mesh: &Mesh, dofs: &DofMap, lambda: f64) -> Result<Self> {
        Ok(Self {
            a: assemble_vector_laplacian(mesh, dofs),
            b: assemble_divergence(mesh, dofs),
            convection: None,
            f: assemble_pressure_loss_rhs(mesh, dofs, lambda)?,
            mean: assemble_pressure_mean(mesh),
        })
    }

    pub fn num_velocity(&self) -> usize {
        self.a.nrows()
    }

    pub fn num_pressure(&self) -> usize {
        self.b.nrows()
    }

    /// `A + N` when a convection block is present, otherwise `A`.
    pub fn velocity_block(&self) -> CsrMatrix {
        match &self.convection {
            Some(n) => self.a.add_scaled(n, 1.0),
            None => self.a.clone(),
        }
    }
}

struct ElementGeometry {
    tri: Triangle,
    nodes: [usize; 6],
}

fn element(mesh: &Mesh, k: usize) -> ElementGeometry {
    ElementGeometry {
        tri: Triangle::new(mesh.vertex_coords(k)),
        nodes: mesh.triangles()[k],
    }
}

/// Value and gradient `[[du1/dx, du1/dy], [du2/dx, du2/dy]]` of a velocity field.
#[inline]
pub(crate) fn eval_velocity(
    field: &[f64],
    nodes: &[usize; 6],
    values: &[f64; 6],
    grads: &[[f64; 2]; 6],
) -> ([f64; 2], [[f64; 2]; 2]) {
    let mut u = [0.0; 2];
    let mut du = [[0.0; 2]; 2];
    for k in 0..6 {
        for c in 0..2 {
            let coeff = field[2 * nodes[k] + c];
            u[c] += coeff * values[k];
            du[c][0] += coeff * grads[k][0];
            du[c][1] += coeff * grads[k][1];
        }
    }
    (u, du)
}

fn scatter_blocks(
    mesh: &Mesh,
    n: usize,
    locals: Vec<[[f64; 6]; 6]>,
) -> CsrMatrix {
    let mut b = TripletBuilder::with_capacity(n, n, locals.len() * 72);
    for (k, local) in locals.iter().enumerate() {
        let nodes = mesh.triangles()[k];
        for m in 0..6 {
            for q in 0..6 {
                for c in 0..2 {
                    b.push(2 * nodes[m] + c, 2 * nodes[q] + c, local[m][q]);
                }
            }
        }
    }
    b.build()
}

/// `int grad(u) : grad(v)` over quadratic vector fields.
pub fn assemble_vector_laplacian(mesh: &Mesh, dofs: &DofMap) -> CsrMatrix {
    let rule = QuadratureRule::triangle_degree5();
    let locals: Vec<[[f64; 6]; 6]> = (0..mesh.num_triangles())
        .into_par_iter()
        .map(|k| {
            let el = element(mesh, k);
            let mut local = [[0.0; 6]; 6];
            for (l, w) in rule.iter() {
                let g = el.tri.p2_gradients(l);
                let jw = w * el.tri.jacobian();
                for m in 0..6 {
                    for q in 0..6 {
                        local[m][q] += jw * (g[m][0] * g[q][0] + g[m][1] * g[q][1]);
                    }
                }
            }
            local
        })
        .collect();
    scatter_blocks(mesh, dofs.num_velocity(), locals)
}

/// Divergence coupling with entries `-int q div(v)`.
pub fn assemble_divergence(mesh: &Mesh, dofs: &DofMap) -> CsrMatrix {
    let rule = QuadratureRule::triangle_degree5();
    let locals: Vec<[[f64; 12]; 3]> = (0..mesh.num_triangles())
        .into_par_iter()
        .map(|k| {
            let el = element(mesh, k);
            let mut local = [[0.0; 12]; 3];
            for (l, w) in rule.iter() {
                let g = el.tri.p2_gradients(l);
                let q = Triangle::p1_values(l);
                let jw = w * el.tri.jacobian();
                for (i, row) in local.iter_mut().enumerate() {
                    for n in 0..6 {
                        for c in 0..2 {
                            row[2 * n + c] -= jw * q[i] * g[n][c];
                        }
                    }
                }
            }
            local
        })
        .collect();
    let mut b = TripletBuilder::with_capacity(dofs.num_pressure(), dofs.num_velocity(), locals.len() * 36);
    for (k, local) in locals.iter().enumerate() {
        let nodes = mesh.triangles()[k];
        for (i, row) in local.iter().enumerate() {
            for n in 0..6 {
                for c in 0..2 {
                    b.push(nodes[i], 2 * nodes[n] + c, row[2 * n + c]);
                }
            }
        }
    }
    b.build()
}

/// `int q` for every linear pressure basis function.
pub fn assemble_pressure_mean(mesh: &Mesh) -> Vec<f64> {
    let mut mean = vec![0.0; mesh.num_vertices()];
    for k in 0..mesh.num_triangles() {
        let third = mesh.area(k) / 3.0;
        for &v in &mesh.triangles()[k][..3] {
            mean[v] += third;
        }
    }
    mean
}

/// The pressure-loss functional `lambda int_{Gamma1} v1 dy` as a load vector.
pub fn assemble_pressure_loss_rhs(mesh: &Mesh, dofs: &DofMap, lambda: f64) -> Result<Vec<f64>> {
    let mut f = vec![0.0; dofs.num_velocity()];
    let rule = QuadratureRule::edge_gauss3();
    let mut any = false;
    for edge in mesh.edges_tagged(BoundaryTag::Gamma1) {
        any = true;
        let [a, b] = edge.vertices;
        let length = (mesh.node(b)[1] - mesh.node(a)[1]).abs();
        for (p, w) in rule.iter() {
            let t = p[1];
            let shape = [(1.0 - t) * (1.0 - 2.0 * t), t * (2.0 * t - 1.0), 4.0 * t * (1.0 - t)];
            for (node, s) in [a, b, edge.midpoint].into_iter().zip(shape) {
                f[DofMap::velocity_dof(node, 0)] += lambda * w * length * s;
            }
        }
    }
    if !any {
        return Err(Error::MissingBoundary(BoundaryTag::Gamma1.name()));
    }
    Ok(f)
}

/// Load vector `int f . v` of a body force.
pub fn assemble_body_force<F>(mesh: &Mesh, dofs: &DofMap, force: F) -> Vec<f64>
where
    F: Fn(f64, f64) -> [f64; 2] + Sync,
{
    let rule = QuadratureRule::triangle_degree5();
    let locals: Vec<[[f64; 2]; 6]> = (0..mesh.num_triangles())
        .into_par_iter()
        .map(|k| {
            let el = element(mesh, k);
            let mut local = [[0.0; 2]; 6];
            for (l, w) in rule.iter() {
                let [x, y] = el.tri.point(l);
                let fv = force(x, y);
                let s = Triangle::p2_values(l);
                let jw = w * el.tri.jacobian();
                for n in 0..6 {
                    for c in 0..2 {
                        local[n][c] += jw * fv[c] * s[n];
                    }
                }
            }
            local
        })
        .collect();
    let mut f = vec![0.0; dofs.num_velocity()];
    for (k, local) in locals.iter().enumerate() {
        for (n, &node) in mesh.triangles()[k].iter().enumerate() {
            f[2 * node] += local[n][0];
            f[2 * node + 1] += local[n][1];
        }
    }
    f
}

/// `b(u, v, w) = int (u . grad) v . w`.
pub fn trilinear_form(mesh: &Mesh, u: &[f64], v: &[f64], w: &[f64]) -> f64 {
    let rule = QuadratureRule::triangle_degree5();
    let partial: Vec<f64> = (0..mesh.num_triangles())
        .into_par_iter()
        .map(|k| {
            let el = element(mesh, k);
            let mut sum = 0.0;
            for (l, wq) in rule.iter() {
                let s = Triangle::p2_values(l);
                let g = el.tri.p2_gradients(l);
                let (uu, _) = eval_velocity(u, &el.nodes, &s, &g);
                let (_, dv) = eval_velocity(v, &el.nodes, &s, &g);
                let (ww, _) = eval_velocity(w, &el.nodes, &s, &g);
                let conv = [
                    uu[0] * dv[0][0] + uu[1] * dv[0][1],
                    uu[0] * dv[1][0] + uu[1] * dv[1][1],
                ];
                sum += wq * el.tri.jacobian() * (conv[0] * ww[0] + conv[1] * ww[1]);
            }
            sum
        })
        .collect();
    partial.iter().sum()
}

/// Matrix of the skew form `bs(w; v, z) = (b(w, v, z) - b(w, z, v)) / 2`,
/// with `z` indexing rows and `v` columns. The matrix is antisymmetric.
pub fn assemble_convection_skew(mesh: &Mesh, dofs: &DofMap, w: &[f64]) -> CsrMatrix {
    let rule = QuadratureRule::triangle_degree5();
    let locals: Vec<[[f64; 6]; 6]> = (0..mesh.num_triangles())
        .into_par_iter()
        .map(|k| {
            let el = element(mesh, k);
            let mut local = [[0.0; 6]; 6];
            for (l, wq) in rule.iter() {
                let s = Triangle::p2_values(l);
                let g = el.tri.p2_gradients(l);
                let (ww, _) = eval_velocity(w, &el.nodes, &s, &g);
                let jw = 0.5 * wq * el.tri.jacobian();
                let adv: [f64; 6] = std::array::from_fn(|n| ww[0] * g[n][0] + ww[1] * g[n][1]);
                for m in 0..6 {
                    for q in 0..6 {
                        local[m][q] += jw * (adv[q] * s[m] - adv[m] * s[q]);
                    }
                }
            }
            local
        })
        .collect();
    scatter_blocks(mesh, dofs.num_velocity(), locals)
}

/// Derivative of `v -> N(v) v` in the convecting argument at `u`:
/// entry `(i, j)` is `bs(phi_j; u, phi_i)`. Newton's Jacobian is
/// `A + N(u) + J(u)`.
pub fn assemble_convection_jacobian(mesh: &Mesh, dofs: &DofMap, u: &[f64]) -> CsrMatrix {
    let rule = QuadratureRule::triangle_degree5();
    let locals: Vec<[[f64; 12]; 12]> = (0..mesh.num_triangles())
        .into_par_iter()
        .map(|k| {
            let el = element(mesh, k);
            let mut local = [[0.0; 12]; 12];
            for (l, wq) in rule.iter() {
                let s = Triangle::p2_values(l);
                let g = el.tri.p2_gradients(l);
                let (uu, du) = eval_velocity(u, &el.nodes, &s, &g);
                let jw = 0.5 * wq * el.tri.jacobian();
                for m in 0..6 {
                    for d in 0..2 {
                        for n in 0..6 {
                            for c in 0..2 {
                                local[2 * m + d][2 * n + c] +=
                                    jw * s[n] * (s[m] * du[d][c] - g[m][c] * uu[d]);
                            }
                        }
                    }
                }
            }
            local
        })
        .collect();
    let mut b = TripletBuilder::with_capacity(dofs.num_velocity(), dofs.num_velocity(), locals.len() * 144);
    for (k, local) in locals.iter().enumerate() {
        let nodes = mesh.triangles()[k];
        for i in 0..12 {
            for j in 0..12 {
                b.push(2 * nodes[i / 2] + i % 2, 2 * nodes[j / 2] + j % 2, local[i][j]);
            }
        }
    }
    b.build()
}

/// Nodal interpolant of a vector field into the quadratic velocity space.
pub fn interpolate_velocity<F>(mesh: &Mesh, field: F) -> Vec<f64>
where
    F: Fn(f64, f64) -> [f64; 2],
{
    mesh.nodes()
        .iter()
        .flat_map(|&[x, y]| field(x, y))
        .collect()
}

/// Nodal interpolant of a scalar field into the linear pressure space.
pub fn interpolate_pressure<F>(mesh: &Mesh, field: F) -> Vec<f64>
where
    F: Fn(f64, f64) -> f64,
{
    mesh.nodes()[..mesh.num_vertices()]
        .iter()
        .map(|&[x, y]| field(x, y))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ChannelGeometry;
    use crate::mesh::build_channel_mesh;

    fn setup(geom: ChannelGeometry, nx: usize, ny: usize) -> (Mesh, DofMap) {
        let mesh = build_channel_mesh(&geom, nx, ny).unwrap();
        let dofs = DofMap::new(&mesh).unwrap();
        (mesh, dofs)
    }

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn laplacian_is_symmetric_with_constant_kernel() {
        let (mesh, dofs) = setup(ChannelGeometry::cosine(0.2, 1).unwrap(), 5, 4);
        let a = assemble_vector_laplacian(&mesh, &dofs);
        assert_eq!(a.asymmetry(), 0.0);
        let constant = interpolate_velocity(&mesh, |_, _| [1.3, -0.7]);
        let r = a.mul_vec(&constant);
        assert!(r.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn laplacian_energy_of_parabola() {
        // int_{-1}^{1} y^2 dy = 2/3
        for n in [1, 2, 5] {
            let (mesh, dofs) = setup(ChannelGeometry::straight(), n, n);
            let a = assemble_vector_laplacian(&mesh, &dofs);
            let u = interpolate_velocity(&mesh, |_, y| [(1.0 - y * y) / 2.0, 0.0]);
            assert!((a.bilinear(&u, &u) - 2.0 / 3.0).abs() < 1e-13);
        }
    }

    #[test]
    fn divergence_of_poiseuille_vanishes() {
        let (mesh, dofs) = setup(ChannelGeometry::straight(), 4, 4);
        let b = assemble_divergence(&mesh, &dofs);
        let u = interpolate_velocity(&mesh, |_, y| [(1.0 - y * y) / 2.0, 0.0]);
        assert!(b.mul_vec(&u).iter().all(|v| v.abs() < 1e-14));
        let c = interpolate_velocity(&mesh, |_, _| [2.0, 1.0]);
        assert!(b.mul_vec(&c).iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn divergence_of_linear_field_on_two_triangles() {
        // div (x, 0) = 1, so entries are -int q: 2/3 at the diagonal vertices, 1/3 elsewhere
        let (mesh, dofs) = setup(ChannelGeometry::straight(), 1, 1);
        let b = assemble_divergence(&mesh, &dofs);
        let u = interpolate_velocity(&mesh, |x, _| [x, 0.0]);
        let r = b.mul_vec(&u);
        let expected = [-2.0 / 3.0, -1.0 / 3.0, -1.0 / 3.0, -2.0 / 3.0];
        for (got, want) in r.iter().zip(expected) {
            assert!((got - want).abs() < 1e-14, "{r:?}");
        }
        let mean = assemble_pressure_mean(&mesh);
        assert!((mean.iter().sum::<f64>() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn pressure_loss_rhs_partition_of_unity() {
        let (mesh, dofs) = setup(ChannelGeometry::cosine(0.2, 1).unwrap(), 3, 5);
        let zero = assemble_pressure_loss_rhs(&mesh, &dofs, 0.0).unwrap();
        assert!(zero.iter().all(|&v| v == 0.0));
        let f = assemble_pressure_loss_rhs(&mesh, &dofs, 1.0).unwrap();
        assert!((f.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        let lam = assemble_pressure_loss_rhs(&mesh, &dofs, 2.5).unwrap();
        assert!((lam.iter().sum::<f64>() - 5.0).abs() < 1e-13);
        for (dof, &v) in f.iter().enumerate() {
            let node = dof / 2;
            if v != 0.0 {
                assert_eq!(dof % 2, 0);
                assert_eq!(mesh.node(node)[0], 1.0);
            }
        }
    }

    #[test]
    fn pressure_loss_rhs_needs_outlet() {
        let mesh = Mesh::from_triangles(vec![[0.0, 0.0], [0.5, 0.0], [0.0, 0.5]], &[[0, 1, 2]]).unwrap();
        let dofs = DofMap::new(&mesh).unwrap();
        assert!(matches!(
            assemble_pressure_loss_rhs(&mesh, &dofs, 1.0),
            Err(Error::MissingBoundary(_))
        ));
    }

    #[test]
    fn trilinear_form_on_reference_triangle() {
        // u = (1, 0), v = (x^2, 0), w = (y, 0): int_T 2 x y = 2 * 1!1!/4! = 1/12
        let mesh = Mesh::from_triangles(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], &[[0, 1, 2]]).unwrap();
        let u = interpolate_velocity(&mesh, |_, _| [1.0, 0.0]);
        let v = interpolate_velocity(&mesh, |x, _| [x * x, 0.0]);
        let w = interpolate_velocity(&mesh, |_, y| [y, 0.0]);
        assert!((trilinear_form(&mesh, &u, &v, &w) - 1.0 / 12.0).abs() < 1e-15);
        let zero = vec![0.0; u.len()];
        assert_eq!(trilinear_form(&mesh, &zero, &v, &w), 0.0);
    }

    #[test]
    fn poiseuille_self_convection_vanishes() {
        let (mesh, dofs) = setup(ChannelGeometry::straight(), 4, 4);
        let u = interpolate_velocity(&mesh, |_, y| [(1.0 - y * y) / 2.0, 0.0]);
        let n = assemble_convection_skew(&mesh, &dofs, &u);
        let nu = n.mul_vec(&u);
        // only constrained rows can see the boundary flux; none of it is in the interior
        for node in 0..mesh.num_nodes() {
            if mesh.node_tag(node).is_none() {
                assert!(nu[2 * node].abs() < 1e-14 && nu[2 * node + 1].abs() < 1e-14);
            }
        }
        for k in 0..3 {
            let w = interpolate_velocity(&mesh, |x, y| [(x * (k as f64 + 1.0)).sin(), y * x]);
            assert!(trilinear_form(&mesh, &u, &u, &w).abs() < 1e-14);
        }
    }

    #[test]
    fn convection_matrix_matches_skew_trilinear_form() {
        let (mesh, dofs) = setup(ChannelGeometry::cosine(0.2, 1).unwrap(), 3, 3);
        let w = interpolate_velocity(&mesh, |x, y| [1.0 + x * y, (3.0 * x).sin()]);
        let v = interpolate_velocity(&mesh, |x, y| [y * y, x - y]);
        let z = interpolate_velocity(&mesh, |x, y| [(x + y).cos(), x * x]);
        let n = assemble_convection_skew(&mesh, &dofs, &w);
        let expected = 0.5 * (trilinear_form(&mesh, &w, &v, &z) - trilinear_form(&mesh, &w, &z, &v));
        assert!((n.bilinear(&z, &v) - expected).abs() < 1e-13);
        assert!(n.add_scaled(&n.transpose(), 1.0).max_abs() < 1e-15);
        let zero = vec![0.0; w.len()];
        assert_eq!(assemble_convection_skew(&mesh, &dofs, &zero).max_abs(), 0.0);
    }

    #[test]
    fn convection_jacobian_is_directional_derivative() {
        let (mesh, dofs) = setup(ChannelGeometry::cosine(0.2, 1).unwrap(), 3, 3);
        let u = interpolate_velocity(&mesh, |x, y| [1.0 - y * y, 0.3 * (6.0 * x).sin()]);
        let d = interpolate_velocity(&mesh, |x, y| [x * y, y - x * x]);
        let j = assemble_convection_jacobian(&mesh, &dofs, &u);
        let nd = assemble_convection_skew(&mesh, &dofs, &d);
        let jd = j.mul_vec(&d);
        let ndu = nd.mul_vec(&u);
        for (a, b) in jd.iter().zip(&ndu) {
            assert!((a - b).abs() < 1e-13);
        }
        assert!(dot(&jd, &jd) > 0.0);
    }
}
