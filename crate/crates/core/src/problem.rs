use crate::assembly::{assemble_pressure_loss_rhs, SparseSystem};
use crate::constraints::{apply_constraints, ConstraintSet, ReducedSystem};
use crate::dofs::DofMap;
use crate::error::Result;
use crate::geometry::ChannelGeometry;
use crate::mesh::{build_channel_mesh, Mesh};

/// Everything that depends on the mesh but not on the pressure-loss
/// coefficient: mesh, dof numbering, constraints and the assembled Stokes
/// blocks. The load vector is stored for `lambda = 1` and scaled on use.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub geometry: ChannelGeometry,
    pub mesh: Mesh,
    pub dofs: DofMap,
    pub constraints: ConstraintSet,
    /// Stokes blocks with the unit pressure-loss load.
    pub system: SparseSystem,
    /// Constrained Stokes system with the unit pressure-loss load.
    pub reduced: ReducedSystem,
}

impl Discretization {
    pub fn new(geometry: &ChannelGeometry, nx: usize, ny: usize) -> Result<Self> {
        let mesh = build_channel_mesh(geometry, nx, ny)?;
        Self::from_mesh(geometry.clone(), mesh)
    }

    pub fn from_mesh(geometry: ChannelGeometry, mesh: Mesh) -> Result<Self> {
        let dofs = DofMap::new(&mesh)?;
        let constraints = ConstraintSet::from_dofs(&dofs, &mesh);
        let system = SparseSystem::assemble(&mesh, &dofs, 1.0)?;
        let reduced = apply_constraints(&system, &constraints)?;
        Ok(Self {
            geometry,
            mesh,
            dofs,
            constraints,
            system,
            reduced,
        })
    }

    /// Pressure-loss load vector for coefficient `lambda`.
    pub fn load(&self, lambda: f64) -> Vec<f64> {
        self.system.f.iter().map(|v| lambda * v).collect()
    }

    /// Same as [`Discretization::load`], recomputed from the mesh.
    pub fn assemble_load(&self, lambda: f64) -> Result<Vec<f64>> {
        assemble_pressure_loss_rhs(&self.mesh, &self.dofs, lambda)
    }

    /// Label used in diagnostics.
    pub fn label(&self) -> String {
        match self.mesh.grid() {
            Some((nx, ny)) => format!("{nx}x{ny} channel mesh"),
            None => format!("{}-triangle mesh", self.mesh.num_triangles()),
        }
    }

    pub fn num_unknowns(&self) -> usize {
        self.reduced.dim()
    }
}
