//! Reduction of the assembled saddle-point system to the constrained space:
//! homogeneous Dirichlet walls, velocity periodicity between the sections,
//! and a zero-mean pressure gauge enforced by a Lagrange multiplier.

use std::collections::HashSet;

use crate::assembly::SparseSystem;
use crate::dofs::DofMap;
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::sparse::{CsrMatrix, TripletBuilder};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PressureGauge {
    /// Bordered system with one multiplier enforcing `int p = 0`.
    ZeroMean,
    /// No gauge; the pressure block keeps its constant kernel.
    Free,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSet {
    num_velocity: usize,
    dirichlet: Vec<usize>,
    periodic: Vec<(usize, usize)>,
    gauge: PressureGauge,
    /// Node coordinates indexed by velocity dof / 2, used in diagnostics.
    locations: Vec<[f64; 2]>,
}

impl ConstraintSet {
    pub fn new(
        num_velocity: usize,
        dirichlet: Vec<usize>,
        periodic: Vec<(usize, usize)>,
        gauge: PressureGauge,
    ) -> Self {
        Self {
            num_velocity,
            dirichlet,
            periodic,
            gauge,
            locations: Vec::new(),
        }
    }

    /// No constraints and no gauge.
    pub fn empty(num_velocity: usize) -> Self {
        Self::new(num_velocity, Vec::new(), Vec::new(), PressureGauge::Free)
    }

    pub fn from_dofs(dofs: &DofMap, mesh: &Mesh) -> Self {
        Self {
            num_velocity: dofs.num_velocity(),
            dirichlet: dofs.dirichlet().to_vec(),
            periodic: dofs.periodic().to_vec(),
            gauge: PressureGauge::ZeroMean,
            locations: mesh.nodes().to_vec(),
        }
    }

    pub fn with_locations(mut self, mesh: &Mesh) -> Self {
        self.locations = mesh.nodes().to_vec();
        self
    }

    pub fn dirichlet(&self) -> &[usize] {
        &self.dirichlet
    }

    pub fn periodic(&self) -> &[(usize, usize)] {
        &self.periodic
    }

    pub fn gauge(&self) -> PressureGauge {
        self.gauge
    }

    pub fn num_velocity(&self) -> usize {
        self.num_velocity
    }

    fn location(&self, dof: usize) -> Option<[f64; 2]> {
        self.locations.get(dof / 2).copied()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_velocity;
        let dirichlet: HashSet<usize> = self.dirichlet.iter().copied().collect();
        let mut slaves = HashSet::new();
        for &dof in &self.dirichlet {
            if dof >= n {
                return Err(Error::Constraint(format!("Dirichlet dof {dof} out of range {n}")));
            }
        }
        for &(slave, master) in &self.periodic {
            if slave >= n || master >= n {
                return Err(Error::Constraint(format!(
                    "periodic pair ({slave}, {master}) out of range {n}"
                )));
            }
            if slave == master {
                return Err(Error::Constraint(format!("dof {slave} is slaved to itself")));
            }
            if dirichlet.contains(&slave) {
                return Err(Error::ConstraintConflict {
                    dof: slave,
                    location: self.location(slave),
                });
            }
            if dirichlet.contains(&master) {
                return Err(Error::Constraint(format!(
                    "master dof {master} of slave {slave} is a Dirichlet dof"
                )));
            }
            if !slaves.insert(slave) {
                return Err(Error::Constraint(format!("dof {slave} has two masters")));
            }
        }
        for &(_, master) in &self.periodic {
            if slaves.contains(&master) {
                return Err(Error::Constraint(format!(
                    "master dof {master} is itself a slave"
                )));
            }
        }
        Ok(())
    }

    /// Projects a full velocity vector onto the constrained space: walls are
    /// zeroed and slaves copy their masters. Idempotent.
    pub fn enforce(&self, u: &mut [f64]) {
        for &d in &self.dirichlet {
            u[d] = 0.0;
        }
        for &(slave, master) in &self.periodic {
            u[slave] = u[master];
        }
    }

    pub fn reduction(&self) -> Result<Reduction> {
        self.validate()?;
        let mut map: Vec<Option<usize>> = vec![Some(usize::MAX); self.num_velocity];
        for &d in &self.dirichlet {
            map[d] = None;
        }
        let slaves: HashSet<usize> = self.periodic.iter().map(|p| p.0).collect();
        let mut next = 0;
        for (dof, slot) in map.iter_mut().enumerate() {
            if slot.is_some() && !slaves.contains(&dof) {
                *slot = Some(next);
                next += 1;
            }
        }
        for &(slave, master) in &self.periodic {
            map[slave] = map[master];
        }
        Ok(Reduction {
            map,
            num_reduced: next,
        })
    }
}

/// The prolongation `P` from reduced to full velocity coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Reduction {
    map: Vec<Option<usize>>,
    num_reduced: usize,
}

impl Reduction {
    pub fn num_full(&self) -> usize {
        self.map.len()
    }

    pub fn num_reduced(&self) -> usize {
        self.num_reduced
    }

    /// Reduced index of a full dof, `None` on the walls.
    pub fn index(&self, dof: usize) -> Option<usize> {
        self.map[dof]
    }

    /// `P^T M P`.
    pub fn reduce_matrix(&self, m: &CsrMatrix) -> CsrMatrix {
        let mut b = TripletBuilder::with_capacity(self.num_reduced, self.num_reduced, m.nnz());
        for (r, c, v) in m.triplets() {
            if let (Some(i), Some(j)) = (self.map[r], self.map[c]) {
                b.push(i, j, v);
            }
        }
        b.build()
    }

    /// `M P` for a matrix acting on velocities from the left.
    pub fn reduce_columns(&self, m: &CsrMatrix) -> CsrMatrix {
        let mut b = TripletBuilder::with_capacity(m.nrows(), self.num_reduced, m.nnz());
        for (r, c, v) in m.triplets() {
            if let Some(j) = self.map[c] {
                b.push(r, j, v);
            }
        }
        b.build()
    }

    /// `P^T f`.
    pub fn reduce_vector(&self, f: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.num_reduced];
        for (dof, &v) in f.iter().enumerate() {
            if let Some(i) = self.map[dof] {
                out[i] += v;
            }
        }
        out
    }

    /// `P u`.
    pub fn expand(&self, reduced: &[f64]) -> Vec<f64> {
        self.map.iter().map(|m| m.map_or(0.0, |i| reduced[i])).collect()
    }

    /// Reduced coordinates of a full vector already in the constrained space.
    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.num_reduced];
        for (dof, m) in self.map.iter().enumerate() {
            if let Some(i) = *m {
                out[i] = full[dof];
            }
        }
        out
    }
}

/// The constrained saddle-point system
///
/// ```text
/// [ P^T K P   (B P)^T   0 ] [u]   [P^T f]
/// [ B P       0         m ] [p] = [  0  ]
/// [ 0         m^T       0 ] [mu]  [  0  ]
/// ```
///
/// where the last row and column exist only with the zero-mean gauge.
#[derive(Debug, Clone)]
pub struct ReducedSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub reduction: Reduction,
    /// `B P`.
    pub divergence: CsrMatrix,
    pub mean: Vec<f64>,
    pub gauge: PressureGauge,
}

impl ReducedSystem {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn num_velocity(&self) -> usize {
        self.reduction.num_reduced()
    }

    pub fn num_pressure(&self) -> usize {
        self.mean.len()
    }

    /// Rebuilds the system with a new full velocity block and load vector,
    /// keeping the divergence coupling and gauge.
    pub fn with_velocity_block(&self, block: &CsrMatrix, f: &[f64]) -> ReducedSystem {
        let velocity = self.reduction.reduce_matrix(block);
        let rhs = self.reduction.reduce_vector(f);
        bordered(
            velocity,
            self.divergence.clone(),
            &self.mean,
            self.gauge,
            rhs,
            self.reduction.clone(),
        )
    }

    /// Velocity block `P^T K P` of the current matrix.
    pub fn velocity_block(&self) -> CsrMatrix {
        let n = self.num_velocity();
        let mut b = TripletBuilder::new(n, n);
        for (r, c, v) in self.matrix.triplets() {
            if r < n && c < n {
                b.push(r, c, v);
            }
        }
        b.build()
    }
}

fn bordered(
    velocity: CsrMatrix,
    divergence: CsrMatrix,
    mean: &[f64],
    gauge: PressureGauge,
    velocity_rhs: Vec<f64>,
    reduction: Reduction,
) -> ReducedSystem {
    let nu = velocity.nrows();
    let np = divergence.nrows();
    let extra = usize::from(gauge == PressureGauge::ZeroMean);
    let dim = nu + np + extra;
    let mut b = TripletBuilder::with_capacity(dim, dim, velocity.nnz() + 2 * divergence.nnz() + 2 * np);
    for (r, c, v) in velocity.triplets() {
        b.push(r, c, v);
    }
    for (r, c, v) in divergence.triplets() {
        b.push(nu + r, c, v);
        b.push(c, nu + r, v);
    }
    if extra == 1 {
        for (q, &m) in mean.iter().enumerate() {
            b.push(nu + q, nu + np, m);
            b.push(nu + np, nu + q, m);
        }
    }
    let mut rhs = velocity_rhs;
    rhs.resize(dim, 0.0);
    ReducedSystem {
        matrix: b.build(),
        rhs,
        reduction,
        divergence,
        mean: mean.to_vec(),
        gauge,
    }
}

pub fn apply_constraints(system: &SparseSystem, cs: &ConstraintSet) -> Result<ReducedSystem> {
    if cs.num_velocity() != system.num_velocity() {
        return Err(Error::Constraint(format!(
            "constraint set covers {} velocity dofs, system has {}",
            cs.num_velocity(),
            system.num_velocity()
        )));
    }
    let reduction = cs.reduction()?;
    let velocity = reduction.reduce_matrix(&system.velocity_block());
    let divergence = reduction.reduce_columns(&system.b);
    let rhs = reduction.reduce_vector(&system.f);
    Ok(bordered(velocity, divergence, &system.mean, cs.gauge(), rhs, reduction))
}

/// Full velocity and zero-mean pressure from a reduced solution vector.
pub fn expand_solution(x: &[f64], system: &ReducedSystem) -> (Vec<f64>, Vec<f64>) {
    let nu = system.num_velocity();
    let np = system.num_pressure();
    let velocity = system.reduction.expand(&x[..nu]);
    let mut pressure = x[nu..nu + np].to_vec();
    let volume: f64 = system.mean.iter().sum();
    if volume > 0.0 {
        let shift = dot(&system.mean, &pressure) / volume;
        for p in &mut pressure {
            *p -= shift;
        }
    }
    (velocity, pressure)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
