//! Legacy VTK (ASCII) output of velocity and pressure.
//!
//! Every quadratic triangle is written as four linear triangles through its
//! vertices and edge midpoints, so the points are exactly the quadratic nodes.

use std::fmt::Write as _;
use std::path::Path;

use crate::analysis::nodal_pressures;
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::solver::FieldSolution;

const VTK_TRIANGLE: u8 = 5;

/// Local sub-triangles in `[v0, v1, v2, m01, m12, m20]` numbering.
const SPLIT: [[usize; 3]; 4] = [[0, 3, 5], [3, 1, 4], [5, 4, 2], [3, 4, 5]];

/// Renders the solution as a legacy VTK unstructured grid. Numbers use 17
/// significant digits, so identical solutions give identical text.
pub fn fields_to_vtk(mesh: &Mesh, solution: &FieldSolution) -> String {
    let nodes = mesh.nodes();
    let cells = 4 * mesh.num_triangles();
    let mut s = String::with_capacity(120 * nodes.len() + 40 * cells);
    let _ = writeln!(
        s,
        "# vtk DataFile Version 3.0\n{} channel flow, lambda = {:.16e}\nASCII\nDATASET UNSTRUCTURED_GRID",
        solution.kind.name(),
        solution.lambda
    );
    let _ = writeln!(s, "POINTS {} double", nodes.len());
    for [x, y] in nodes {
        let _ = writeln!(s, "{x:.16e} {y:.16e} {:.16e}", 0.0);
    }
    let _ = writeln!(s, "CELLS {cells} {}", 4 * cells);
    for t in mesh.triangles() {
        for [a, b, c] in SPLIT {
            let _ = writeln!(s, "3 {} {} {}", t[a], t[b], t[c]);
        }
    }
    let _ = writeln!(s, "CELL_TYPES {cells}");
    for _ in 0..cells {
        let _ = writeln!(s, "{VTK_TRIANGLE}");
    }
    let _ = writeln!(s, "POINT_DATA {}\nVECTORS velocity double", nodes.len());
    for n in 0..nodes.len() {
        let _ = writeln!(
            s,
            "{:.16e} {:.16e} {:.16e}",
            solution.velocity[2 * n],
            solution.velocity[2 * n + 1],
            0.0
        );
    }
    let _ = writeln!(s, "SCALARS pressure double 1\nLOOKUP_TABLE default");
    for p in nodal_pressures(mesh, &solution.pressure) {
        let _ = writeln!(s, "{p:.16e}");
    }
    s
}

pub fn write_fields(mesh: &Mesh, solution: &FieldSolution, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, fields_to_vtk(mesh, solution)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{Diagnostics, ProblemKind};

    fn square() -> Mesh {
        let vertices = vec![[0.0, -1.0], [1.0, -1.0], [1.0, 1.0], [0.0, 1.0]];
        Mesh::from_triangles(vertices, &[[0, 1, 2], [0, 2, 3]]).unwrap()
    }

    #[test]
    fn two_triangles_give_eight_cells() {
        let mesh = square();
        let n = mesh.num_nodes();
        let sol = FieldSolution {
            velocity: vec![0.0; 2 * n],
            pressure: vec![0.0; mesh.num_vertices()],
            lambda: 0.0,
            kind: ProblemKind::Stokes,
            diagnostics: Diagnostics::default(),
        };
        let text = fields_to_vtk(&mesh, &sol);
        assert!(text.contains(&format!("POINTS {n} double")));
        assert!(text.contains("CELLS 8 32"));
        assert!(text.contains("CELL_TYPES 8"));
        assert_eq!(text.lines().filter(|l| *l == "5").count(), 8);
    }

    #[test]
    fn sub_triangles_keep_orientation() {
        let mesh = square();
        for t in mesh.triangles() {
            for [a, b, c] in SPLIT {
                let [p, q, r] = [mesh.node(t[a]), mesh.node(t[b]), mesh.node(t[c])];
                let cross = (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0]);
                assert!(cross > 0.0);
            }
        }
    }
}
