//! Affine triangles with quadratic (velocity) and linear (pressure) shape functions.

/// Geometry of one straight-sided triangle.
#[derive(Debug, Clone, Copy)]
pub struct Triangle {
    pub vertices: [[f64; 2]; 3],
    pub area: f64,
    /// Gradients of the barycentric coordinates (constant on the element).
    pub grad_bary: [[f64; 2]; 3],
}

impl Triangle {
    pub fn new(vertices: [[f64; 2]; 3]) -> Self {
        let [p0, p1, p2] = vertices;
        let det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
        let inv = 1.0 / det;
        let grad_bary = [
            [(p1[1] - p2[1]) * inv, (p2[0] - p1[0]) * inv],
            [(p2[1] - p0[1]) * inv, (p0[0] - p2[0]) * inv],
            [(p0[1] - p1[1]) * inv, (p1[0] - p0[0]) * inv],
        ];
        Self {
            vertices,
            area: 0.5 * det,
            grad_bary,
        }
    }

    /// Physical point of barycentric coordinates `l`.
    pub fn point(&self, l: &[f64; 3]) -> [f64; 2] {
        let v = &self.vertices;
        [
            l[0] * v[0][0] + l[1] * v[1][0] + l[2] * v[2][0],
            l[0] * v[0][1] + l[1] * v[1][1] + l[2] * v[2][1],
        ]
    }

    /// Quadrature scaling from reference weights (measure 1/2) to this element.
    pub fn jacobian(&self) -> f64 {
        2.0 * self.area
    }

    /// Barycentric coordinates of a physical point.
    pub fn barycentric(&self, p: [f64; 2]) -> [f64; 3] {
        let v0 = self.vertices[0];
        let (dx, dy) = (p[0] - v0[0], p[1] - v0[1]);
        let l1 = self.grad_bary[1][0] * dx + self.grad_bary[1][1] * dy;
        let l2 = self.grad_bary[2][0] * dx + self.grad_bary[2][1] * dy;
        [1.0 - l1 - l2, l1, l2]
    }

    /// Quadratic shape function values in local order `[v0, v1, v2, m01, m12, m20]`.
    pub fn p2_values(l: &[f64; 3]) -> [f64; 6] {
        [
            l[0] * (2.0 * l[0] - 1.0),
            l[1] * (2.0 * l[1] - 1.0),
            l[2] * (2.0 * l[2] - 1.0),
            4.0 * l[0] * l[1],
            4.0 * l[1] * l[2],
            4.0 * l[2] * l[0],
        ]
    }

    pub fn p2_gradients(&self, l: &[f64; 3]) -> [[f64; 2]; 6] {
        let g = &self.grad_bary;
        let vertex = |i: usize| {
            let s = 4.0 * l[i] - 1.0;
            [s * g[i][0], s * g[i][1]]
        };
        let edge = |i: usize, j: usize| {
            [
                4.0 * (l[i] * g[j][0] + l[j] * g[i][0]),
                4.0 * (l[i] * g[j][1] + l[j] * g[i][1]),
            ]
        };
        [vertex(0), vertex(1), vertex(2), edge(0, 1), edge(1, 2), edge(2, 0)]
    }

    /// Constant Hessians `[[dxx, dxy], [dxy, dyy]]` of the quadratic shape functions.
    pub fn p2_hessians(&self) -> [[[f64; 2]; 2]; 6] {
        let g = &self.grad_bary;
        let outer = |i: usize, j: usize| {
            let mut h = [[0.0; 2]; 2];
            for (a, row) in h.iter_mut().enumerate() {
                for (b, entry) in row.iter_mut().enumerate() {
                    *entry = 4.0 * (g[i][a] * g[j][b] + g[j][a] * g[i][b]);
                }
            }
            h
        };
        let vertex = |i: usize| {
            let mut h = outer(i, i);
            for row in h.iter_mut() {
                for entry in row.iter_mut() {
                    *entry *= 0.5;
                }
            }
            h
        };
        [vertex(0), vertex(1), vertex(2), outer(0, 1), outer(1, 2), outer(2, 0)]
    }

    pub fn p1_values(l: &[f64; 3]) -> [f64; 3] {
        *l
    }
}

/// Element stiffness matrix `int grad(phi_i) . grad(phi_j)` for linear shape functions.
pub fn p1_stiffness(vertices: [[f64; 2]; 3]) -> [[f64; 3]; 3] {
    let t = Triangle::new(vertices);
    let mut k = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let g = &t.grad_bary;
            k[i][j] = t.area * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
        }
    }
    k
}

#[cfg(test)]
mod tests {
    use super::*;

    const REF: [[f64; 2]; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];

    #[test]
    fn p1_stiffness_on_unit_right_triangle() {
        // hand integration on the reference element
        let k = p1_stiffness(REF);
        let expected = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((k[i][j] - expected[i][j]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn p2_is_nodal_and_partition_of_unity() {
        let nodes = [
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
            [0.5, 0.5, 0.0],
            [0.0, 0.5, 0.5],
            [0.5, 0.0, 0.5],
        ];
        for (i, l) in nodes.iter().enumerate() {
            let v = Triangle::p2_values(l);
            for (j, &vj) in v.iter().enumerate() {
                assert!((vj - if i == j { 1.0 } else { 0.0 }).abs() < 1e-15);
            }
        }
        let t = Triangle::new([[0.3, -0.2], [1.1, 0.1], [0.2, 0.9]]);
        let l = [0.2, 0.5, 0.3];
        let grads = t.p2_gradients(&l);
        let sum = grads.iter().fold([0.0, 0.0], |a, g| [a[0] + g[0], a[1] + g[1]]);
        assert!(sum[0].abs() < 1e-13 && sum[1].abs() < 1e-13);
        assert!((Triangle::p2_values(&l).iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn p2_reproduces_quadratic_derivatives() {
        // f = x^2 + 3xy - y^2 interpolated exactly
        let t = Triangle::new([[0.3, -0.2], [1.1, 0.1], [0.2, 0.9]]);
        let f = |p: [f64; 2]| p[0] * p[0] + 3.0 * p[0] * p[1] - p[1] * p[1];
        let bary = [
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
            [0.5, 0.5, 0.0],
            [0.0, 0.5, 0.5],
            [0.5, 0.0, 0.5],
        ];
        let coeffs: Vec<f64> = bary.iter().map(|l| f(t.point(l))).collect();
        let l = [0.1, 0.6, 0.3];
        let p = t.point(&l);
        let grads = t.p2_gradients(&l);
        let gx: f64 = grads.iter().zip(&coeffs).map(|(g, c)| g[0] * c).sum();
        let gy: f64 = grads.iter().zip(&coeffs).map(|(g, c)| g[1] * c).sum();
        assert!((gx - (2.0 * p[0] + 3.0 * p[1])).abs() < 1e-12);
        assert!((gy - (3.0 * p[0] - 2.0 * p[1])).abs() < 1e-12);
        let hess = t.p2_hessians();
        let h = |a: usize, b: usize| hess.iter().zip(&coeffs).map(|(h, c)| h[a][b] * c).sum::<f64>();
        assert!((h(0, 0) - 2.0).abs() < 1e-11);
        assert!((h(0, 1) - 3.0).abs() < 1e-11);
        assert!((h(1, 0) - 3.0).abs() < 1e-11);
        assert!((h(1, 1) + 2.0).abs() < 1e-11);
    }

    #[test]
    fn barycentric_inverts_point() {
        let t = Triangle::new([[0.3, -0.2], [1.1, 0.1], [0.2, 0.9]]);
        let l = [0.25, 0.45, 0.3];
        let back = t.barycentric(t.point(&l));
        for k in 0..3 {
            assert!((back[k] - l[k]).abs() < 1e-14);
        }
    }
}
