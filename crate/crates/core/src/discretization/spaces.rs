use nalgebra::DVector;

use crate::error::{FsiError, Result};
use crate::geometry::ReferenceDomain;

/// Velocity component of a fluid DOF.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Component {
    Axial = 0,
    Radial = 1,
}

/// Q1 velocity space on the structured reference mesh, with the essential
/// conditions `u_z = 0` on the top boundary and `u_r = 0` on inlet, outlet
/// and bottom eliminated from the DOF set. The radial Q1 DOFs on the top
/// boundary are eliminated as well: the wall trace is carried by the lifted
/// beam velocity (see [`CoupledLayout`]).
///
/// Nodes are numbered column by column: `node = i * (nr + 1) + j` for the
/// node at `(z_i, r_j)`; global DOF `2 * node + component`.
#[derive(Debug, Clone, PartialEq)]
pub struct FluidSpace {
    domain: ReferenceDomain,
    free_of_global: Vec<Option<usize>>,
    global_of_free: Vec<usize>,
}

impl FluidSpace {
    pub fn new(domain: ReferenceDomain) -> Self {
        let (nz, nr) = (domain.nz, domain.nr);
        let n_global = 2 * (nz + 1) * (nr + 1);
        let mut free_of_global = vec![None; n_global];
        let mut global_of_free = Vec::new();
        for i in 0..=nz {
            for j in 0..=nr {
                let node = i * (nr + 1) + j;
                let axial_fixed = j == nr;
                let radial_fixed = j == 0 || j == nr || i == 0 || i == nz;
                for (comp, fixed) in [(0usize, axial_fixed), (1usize, radial_fixed)] {
                    if !fixed {
                        free_of_global[2 * node + comp] = Some(global_of_free.len());
                        global_of_free.push(2 * node + comp);
                    }
                }
            }
        }
        Self { domain, free_of_global, global_of_free }
    }

    pub fn domain(&self) -> &ReferenceDomain {
        &self.domain
    }

    pub fn n_nodes(&self) -> usize {
        (self.domain.nz + 1) * (self.domain.nr + 1)
    }

    pub fn n_global(&self) -> usize {
        self.free_of_global.len()
    }

    pub fn n_free(&self) -> usize {
        self.global_of_free.len()
    }

    pub fn node(&self, i: usize, j: usize) -> usize {
        i * (self.domain.nr + 1) + j
    }

    pub fn node_coords(&self, node: usize) -> (f64, f64) {
        let i = node / (self.domain.nr + 1);
        let j = node % (self.domain.nr + 1);
        (i as f64 * self.domain.hz(), j as f64 * self.domain.hr())
    }

    pub fn global_dof(&self, node: usize, comp: Component) -> usize {
        2 * node + comp as usize
    }

    pub fn free_index(&self, node: usize, comp: Component) -> Option<usize> {
        self.free_of_global[2 * node + comp as usize]
    }

    pub fn free_of_global(&self, g: usize) -> Option<usize> {
        self.free_of_global[g]
    }

    /// `(node, component)` of a free DOF.
    pub fn dof_owner(&self, free: usize) -> (usize, Component) {
        let g = self.global_of_free[free];
        let comp = if g % 2 == 0 { Component::Axial } else { Component::Radial };
        (g / 2, comp)
    }

    /// Corner nodes of cell `(i, j)` in counter-clockwise order starting at
    /// the lower-left corner.
    pub fn cell_nodes(&self, i: usize, j: usize) -> [usize; 4] {
        [self.node(i, j), self.node(i + 1, j), self.node(i + 1, j + 1), self.node(i, j + 1)]
    }

    /// Free DOF indices of a cell, ordered `(node_0, z), (node_0, r), (node_1, z), ...`.
    pub fn cell_dofs(&self, i: usize, j: usize) -> [Option<usize>; 8] {
        let nodes = self.cell_nodes(i, j);
        let mut out = [None; 8];
        for (a, &n) in nodes.iter().enumerate() {
            out[2 * a] = self.free_of_global[2 * n];
            out[2 * a + 1] = self.free_of_global[2 * n + 1];
        }
        out
    }

    /// Scatter a free-DOF vector into the full nodal vector (masked entries zero).
    pub fn expand(&self, free: &DVector<f64>) -> DVector<f64> {
        let mut full = DVector::zeros(self.n_global());
        for (k, &g) in self.global_of_free.iter().enumerate() {
            full[g] = free[k];
        }
        full
    }

    /// Restrict a full nodal vector to the free DOFs.
    pub fn restrict(&self, full: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.n_free(), self.global_of_free.iter().map(|&g| full[g]))
    }
}

/// Cubic Hermite beam space on the uniform partition of `(0, L)` with the
/// clamped end DOFs removed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamSpace {
    pub length: f64,
    pub elements: usize,
}

impl BeamSpace {
    pub fn ndof(&self) -> usize {
        2 * self.elements.saturating_sub(1)
    }

    pub fn element_width(&self) -> f64 {
        self.length / self.elements as f64
    }
}

/// Layout of the coupled velocity vector `[Q1 free DOFs ; wall DOFs]`.
///
/// The wall velocity lives in the beam space; inside the fluid it enters as
/// the lift `v(z) psi(r) e_r`, with `psi` the Q1 hat of the top node row, so
/// `u(z, 1) = v(z) e_r` holds by construction and both substeps see the same
/// wall velocity space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoupledLayout {
    offset: usize,
    n_wall: usize,
}

impl CoupledLayout {
    /// Coupled index of the first wall DOF.
    pub fn offset(&self) -> usize {
        self.offset
    }

    pub fn n_wall(&self) -> usize {
        self.n_wall
    }

    pub fn n_total(&self) -> usize {
        self.offset + self.n_wall
    }

    /// Coupled index of beam DOF `k`.
    pub fn wall_dof(&self, k: usize) -> usize {
        self.offset + k
    }

    /// Wall velocity (beam coefficients) carried by a coupled vector.
    pub fn wall_velocity(&self, u: &DVector<f64>) -> DVector<f64> {
        u.rows(self.offset, self.n_wall).into_owned()
    }

    pub fn set_wall_velocity(&self, u: &mut DVector<f64>, v: &DVector<f64>) {
        u.rows_mut(self.offset, self.n_wall).copy_from(v);
    }

    /// A coupled vector that is zero outside the wall block.
    pub fn scatter(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.n_total());
        self.set_wall_velocity(&mut out, v);
        out
    }
}

/// Builds the fluid space, the beam space and their coupling.
///
/// The beam partition must coincide with the top row of the fluid mesh
/// (`n_struct == nz`).
pub fn build_spaces(
    domain: ReferenceDomain,
    n_struct: usize,
) -> Result<(FluidSpace, BeamSpace, CoupledLayout)> {
    if n_struct == 0 {
        return Err(FsiError::config("domain.n_struct", "must be at least 1"));
    }
    if n_struct != domain.nz {
        return Err(FsiError::config(
            "domain.n_struct",
            format!("beam elements ({n_struct}) must match axial fluid cells ({})", domain.nz),
        ));
    }
    let fluid = FluidSpace::new(domain);
    let beam = BeamSpace { length: domain.length, elements: n_struct };
    let layout = CoupledLayout { offset: fluid.n_free(), n_wall: beam.ndof() };
    Ok((fluid, beam, layout))
}
