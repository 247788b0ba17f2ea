//! Degree-of-freedom numbering for the quadratic velocity / linear pressure pair.
//!
//! Velocity dofs are interleaved by node: component `c` of node `n` is dof
//! `2 n + c`. Pressure dofs are the mesh vertices, numbered as the vertices.

use crate::error::{Error, Result};
use crate::mesh::{BoundaryTag, Mesh};

#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    num_nodes: usize,
    num_pressure: usize,
    dirichlet: Vec<usize>,
    /// `(slave, master)`: slave on the outlet section, master on the inlet.
    periodic: Vec<(usize, usize)>,
}

impl DofMap {
    /// Velocity vanishes on every wall node (corners included); the remaining
    /// outlet nodes are slaved to their inlet partners. Pressure is left free.
    pub fn new(mesh: &Mesh) -> Result<Self> {
        let num_nodes = mesh.num_nodes();
        let mut dirichlet = Vec::new();
        for n in 0..num_nodes {
            if mesh.node_tag(n) == Some(BoundaryTag::Gamma2) {
                dirichlet.extend([2 * n, 2 * n + 1]);
            }
        }
        let mut periodic = Vec::new();
        for pair in mesh.periodic_pairs() {
            let left = mesh.node_tag(pair.left);
            let right = mesh.node_tag(pair.right);
            match (left, right) {
                (Some(BoundaryTag::Gamma2), Some(BoundaryTag::Gamma2)) => {}
                (Some(BoundaryTag::Gamma0), Some(BoundaryTag::Gamma1)) => {
                    for c in 0..2 {
                        periodic.push((2 * pair.right + c, 2 * pair.left + c));
                    }
                }
                _ => {
                    return Err(Error::Mesh(format!(
                        "periodic pair ({}, {}) mixes wall and section nodes",
                        pair.left, pair.right
                    )))
                }
            }
        }
        periodic.sort_unstable();
        Ok(Self {
            num_nodes,
            num_pressure: mesh.num_vertices(),
            dirichlet,
            periodic,
        })
    }

    pub fn num_velocity(&self) -> usize {
        2 * self.num_nodes
    }

    pub fn num_pressure(&self) -> usize {
        self.num_pressure
    }

    #[inline]
    pub fn velocity_dof(node: usize, component: usize) -> usize {
        2 * node + component
    }

    /// Sorted velocity dofs on the walls.
    pub fn dirichlet(&self) -> &[usize] {
        &self.dirichlet
    }

    /// Sorted `(slave, master)` velocity dof pairs.
    pub fn periodic(&self) -> &[(usize, usize)] {
        &self.periodic
    }
}
