use std::sync::Arc;

use nalgebra::{DVector, Vector2};

use super::beam::StructureForms;
use super::spaces::{build_spaces, BeamSpace, Component, CoupledLayout, FluidSpace};
use crate::error::Result;
use crate::geometry::{hermite_shape, AleFrame, ReferenceDomain, WallProfile};
use crate::quadrature::GaussRule;
use crate::sparse::{CscMatrix, CscPattern};

/// Local basis size of a cell: eight Q1 functions `(corner a, component c)`
/// at `2a + c`, then the four lifted beam functions of the cell's element
/// (nonzero in the top cell row only, radial component).
const NLOC: usize = 12;

/// Gauss points per cell along `z` and `r`; the lifted beam functions are
/// cubic in `z`, and four points integrate their products exactly on a flat wall.
const QZ: usize = 4;
const QR: usize = 2;
const NQ: usize = QZ * QR;

/// One local vector basis function at a point: its nonzero component, the
/// value of that component, and the (transformed) gradient of that component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Shape {
    pub comp: usize,
    pub value: f64,
    pub grad: Vector2<f64>,
}

const NO_SHAPE: Shape = Shape { comp: 1, value: 0.0, grad: Vector2::new(0.0, 0.0) };

/// Data of one quadrature point inside a cell, with the ALE frame of a
/// fixed profile already applied to the shape gradients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct QuadPoint {
    pub z: f64,
    pub r: f64,
    /// Quadrature weight including the cell area.
    pub weight: f64,
    pub jacobian: f64,
    pub shapes: [Shape; NLOC],
    /// Beam shape values at this `z`, for the wall velocity `v(z)`.
    pub wall: [f64; 4],
}

/// Quadrature points of every cell for one wall profile: the full tensor rule and
/// the one-point rule used by the penalty form.
#[derive(Debug, Clone, PartialEq)]
pub struct CellQuadrature {
    full: Vec<[QuadPoint; NQ]>,
    center: Vec<QuadPoint>,
}

/// All fluid-step operators for one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct AssembledForms {
    /// `((R + eta*^n) u, q)`
    pub mass: CscMatrix,
    /// `((eta*^{n+1} - eta*^n) u, q)`; the factor 1/2 is applied by the scheme.
    pub jump_mass: CscMatrix,
    /// `2 nu ((R + eta*^n) D(u), D(q))`
    pub viscous: CscMatrix,
    /// `(div u, div q)` under one-point quadrature; scaled by `1/epsilon` downstream.
    pub penalty: CscMatrix,
    /// Skew advection `b(a; u, q)` for the frozen transport field.
    pub advection: CscMatrix,
    pub quadrature: CellQuadrature,
}

/// Spaces, structure forms and the state-independent fluid operators of a
/// mesh: built once per run and shared by every step and every path.
///
/// Velocity vectors are coupled vectors `[Q1 free DOFs ; wall DOFs]` (see
/// [`CoupledLayout`]).
#[derive(Debug, Clone)]
pub struct Discretization {
    pub domain: ReferenceDomain,
    pub fluid: FluidSpace,
    pub beam: BeamSpace,
    pub layout: CoupledLayout,
    pub structure: StructureForms,
    pattern: Arc<CscPattern>,
    /// Beam mass embedded in the wall block.
    wall_mass: CscMatrix,
    /// Unweighted `(u, q)`.
    plain_mass: CscMatrix,
    flux_in: DVector<f64>,
    flux_out: DVector<f64>,
}

/// Reference-domain shapes of cell `(i, j)` at local coordinates `(xi, zeta)`;
/// gradients are `(d_z, d_r)` on the reference domain.
fn reference_shapes(domain: &ReferenceDomain, j: usize, xi: f64, zeta: f64) -> ([Shape; NLOC], [f64; 4]) {
    let (hz, hr) = (domain.hz(), domain.hr());
    let nx = [1.0 - xi, xi, xi, 1.0 - xi];
    let ny = [1.0 - zeta, 1.0 - zeta, zeta, zeta];
    let dx = [-1.0, 1.0, 1.0, -1.0];
    let dy = [-1.0, -1.0, 1.0, 1.0];
    let mut out = [NO_SHAPE; NLOC];
    for a in 0..4 {
        let value = nx[a] * ny[a];
        let grad = Vector2::new(dx[a] * ny[a] / hz, nx[a] * dy[a] / hr);
        for c in 0..2 {
            out[2 * a + c] = Shape { comp: c, value, grad };
        }
    }
    let (val, d1, _) = hermite_shape(xi, hz);
    if j + 1 == domain.nr {
        // psi(r) = zeta on the top row
        for h in 0..4 {
            out[8 + h] = Shape { comp: 1, value: val[h] * zeta, grad: Vector2::new(d1[h] * zeta, val[h] / hr) };
        }
    }
    (out, val)
}

impl Discretization {
    pub fn new(domain: ReferenceDomain, n_struct: usize) -> Result<Self> {
        let (fluid, beam, layout) = build_spaces(domain, n_struct)?;
        let structure = StructureForms::assemble(&beam);
        let mut disc = Self {
            domain,
            fluid,
            beam,
            layout,
            structure,
            pattern: Arc::new(CscPattern::from_entries(0, Vec::new())),
            wall_mass: CscMatrix::zeros(Arc::new(CscPattern::from_entries(0, Vec::new()))),
            plain_mass: CscMatrix::zeros(Arc::new(CscPattern::from_entries(0, Vec::new()))),
            flux_in: DVector::zeros(0),
            flux_out: DVector::zeros(0),
        };
        let n = layout.n_total();
        let mut entries = Vec::new();
        for i in 0..domain.nz {
            for j in 0..domain.nr {
                let dofs = disc.cell_dofs(i, j);
                for a in dofs.iter().flatten() {
                    for b in dofs.iter().flatten() {
                        entries.push((*a, *b));
                    }
                }
            }
        }
        // the beam mass couples wall DOFs of neighbouring elements only,
        // which the top-row cells already connect
        disc.pattern = Arc::new(CscPattern::from_entries(n, entries));

        let mut wall_mass = CscMatrix::zeros(disc.pattern.clone());
        let nw = layout.n_wall();
        for p in 0..nw {
            for q in 0..nw {
                let m = disc.structure.mass[(p, q)];
                if m != 0.0 {
                    wall_mass.add(layout.wall_dof(p), layout.wall_dof(q), m);
                }
            }
        }
        disc.wall_mass = wall_mass;
        disc.plain_mass = disc.weighted_mass(|_, _| 1.0);

        let hr = domain.hr();
        let mut flux_in = DVector::zeros(n);
        let mut flux_out = DVector::zeros(n);
        for (i, flux) in [(0, &mut flux_in), (domain.nz, &mut flux_out)] {
            for j in 0..=domain.nr {
                if let Some(k) = disc.fluid.free_index(disc.fluid.node(i, j), Component::Axial) {
                    flux[k] = if j == 0 || j == domain.nr { 0.5 * hr } else { hr };
                }
            }
        }
        disc.flux_in = flux_in;
        disc.flux_out = flux_out;
        Ok(disc)
    }

    /// Length of a coupled velocity vector.
    pub fn n_free(&self) -> usize {
        self.layout.n_total()
    }

    pub fn pattern(&self) -> &Arc<CscPattern> {
        &self.pattern
    }

    /// Beam mass on the wall block of the coupled vector.
    pub fn wall_mass(&self) -> &CscMatrix {
        &self.wall_mass
    }

    /// `int_O u . q` on the reference domain.
    pub fn plain_mass(&self) -> &CscMatrix {
        &self.plain_mass
    }

    /// `int_0^1 q_z(0, r) dr` as a coupled vector.
    pub fn flux_in(&self) -> &DVector<f64> {
        &self.flux_in
    }

    /// `int_0^1 q_z(L, r) dr` as a coupled vector.
    pub fn flux_out(&self) -> &DVector<f64> {
        &self.flux_out
    }

    /// Coupled indices of the local basis of cell `(i, j)`.
    pub fn cell_dofs(&self, i: usize, j: usize) -> [Option<usize>; NLOC] {
        let mut out = [None; NLOC];
        out[..8].copy_from_slice(&self.fluid.cell_dofs(i, j));
        if j + 1 == self.domain.nr {
            for (h, d) in WallProfile::element_dofs(self.beam.elements, i).into_iter().enumerate() {
                out[8 + h] = d.map(|k| self.layout.wall_dof(k));
            }
        }
        out
    }

    /// Quadrature data of every cell under the ALE frame of `profile`.
    pub fn quadrature(&self, profile: &WallProfile) -> Result<CellQuadrature> {
        let d = &self.domain;
        let (hz, hr) = (d.hz(), d.hr());
        let (rz, rr) = (GaussRule::new(QZ), GaussRule::new(QR));
        let point = |i: usize, j: usize, xi: f64, zeta: f64, weight: f64| -> Result<QuadPoint> {
            let s = profile.eval_in_element(i, xi);
            let z = (i as f64 + xi) * hz;
            let r = (j as f64 + zeta) * hr;
            let frame = AleFrame::new(s.value, s.slope, d.radius, z, r)?;
            let (mut shapes, wall) = reference_shapes(d, j, xi, zeta);
            for sh in shapes.iter_mut() {
                let (gz, gr) = frame.transform(sh.grad[0], sh.grad[1]);
                sh.grad = Vector2::new(gz, gr);
            }
            Ok(QuadPoint { z, r, weight, jacobian: frame.jacobian, shapes, wall })
        };
        let mut full = Vec::with_capacity(d.nz * d.nr);
        let mut center = Vec::with_capacity(d.nz * d.nr);
        for i in 0..d.nz {
            for j in 0..d.nr {
                let mut pts = [point(i, j, 0.5, 0.5, 0.0)?; NQ];
                let mut k = 0;
                for (zeta, wz) in rr.on(0.0, 1.0) {
                    for (xi, wx) in rz.on(0.0, 1.0) {
                        pts[k] = point(i, j, xi, zeta, wx * wz * hz * hr)?;
                        k += 1;
                    }
                }
                full.push(pts);
                center.push(point(i, j, 0.5, 0.5, hz * hr)?);
            }
        }
        Ok(CellQuadrature { full, center })
    }

    fn cell_index(&self, i: usize, j: usize) -> usize {
        i * self.domain.nr + j
    }

    /// Visits every cell, accumulating a local matrix (indexed
    /// `[test][trial]`) built by `local` and scattering it into a fresh
    /// matrix.
    fn assemble_cells(&self, mut local: impl FnMut(usize, usize, &mut [[f64; NLOC]; NLOC])) -> CscMatrix {
        let mut out = CscMatrix::zeros(self.pattern.clone());
        for i in 0..self.domain.nz {
            for j in 0..self.domain.nr {
                let mut m = [[0.0; NLOC]; NLOC];
                local(i, j, &mut m);
                let dofs = self.cell_dofs(i, j);
                for (row, dr) in dofs.iter().enumerate() {
                    let Some(gr) = dr else { continue };
                    for (col, dc) in dofs.iter().enumerate() {
                        let Some(gc) = dc else { continue };
                        if m[row][col] != 0.0 {
                            out.add(*gr, *gc, m[row][col]);
                        }
                    }
                }
            }
        }
        out
    }

    /// `(w u, q)` for a weight depending on `z` only, evaluated per
    /// quadrature point by `weight(cell_i, xi)`.
    pub fn weighted_mass(&self, weight: impl Fn(usize, f64) -> f64) -> CscMatrix {
        let (hz, hr) = (self.domain.hz(), self.domain.hr());
        let (rz, rr) = (GaussRule::new(QZ), GaussRule::new(QR));
        self.assemble_cells(|i, j, m| {
            for (zeta, wz) in rr.on(0.0, 1.0) {
                for (xi, wx) in rz.on(0.0, 1.0) {
                    let w = wx * wz * hz * hr * weight(i, xi);
                    let (sh, _) = reference_shapes(&self.domain, j, xi, zeta);
                    for a in 0..NLOC {
                        for b in 0..NLOC {
                            if sh[a].comp == sh[b].comp {
                                m[b][a] += w * sh[a].value * sh[b].value;
                            }
                        }
                    }
                }
            }
        })
    }

    /// `((R + eta) u, q)`
    pub fn jacobian_mass(&self, profile: &WallProfile) -> CscMatrix {
        let radius = self.domain.radius;
        self.weighted_mass(|i, xi| radius + profile.eval_in_element(i, xi).value)
    }

    /// `((eta_b - eta_a) u, q)`
    pub fn jump_mass(&self, from: &WallProfile, to: &WallProfile) -> CscMatrix {
        self.weighted_mass(|i, xi| to.eval_in_element(i, xi).value - from.eval_in_element(i, xi).value)
    }

    /// `2 nu ((R + eta) D(u), D(q))`
    pub fn viscous(&self, quad: &CellQuadrature, nu: f64) -> CscMatrix {
        self.assemble_cells(|i, j, m| {
            for p in &quad.full[self.cell_index(i, j)] {
                let w = nu * p.weight * p.jacobian;
                for (a, sa) in p.shapes.iter().enumerate() {
                    for (b, sb) in p.shapes.iter().enumerate() {
                        // grad(phi_a e_c) : grad(phi_b e_d) + grad(phi_a e_c) : grad(phi_b e_d)^T
                        let same = if sa.comp == sb.comp { sa.grad.dot(&sb.grad) } else { 0.0 };
                        m[b][a] += w * (same + sa.grad[sb.comp] * sb.grad[sa.comp]);
                    }
                }
            }
        })
    }

    /// `(div u, div q)` with one-point quadrature and no Jacobian weight.
    pub fn penalty(&self, quad: &CellQuadrature) -> CscMatrix {
        self.assemble_cells(|i, j, m| {
            let p = &quad.center[self.cell_index(i, j)];
            for (a, sa) in p.shapes.iter().enumerate() {
                for (b, sb) in p.shapes.iter().enumerate() {
                    m[b][a] += p.weight * sa.grad[sa.comp] * sb.grad[sb.comp];
                }
            }
        })
    }

    /// Local coefficients of a coupled vector on cell `(i, j)`.
    fn local_coeffs(&self, i: usize, j: usize, u: &DVector<f64>) -> [f64; NLOC] {
        self.cell_dofs(i, j).map(|d| d.map_or(0.0, |k| u[k]))
    }

    /// Skew advection `1/2 ((R + eta) [(a . grad) u . q - (a . grad) q . u])`
    /// with transport field `a = u_f - r v_f(z) e_r`, where `v_f` is the wall
    /// velocity carried by the coupled vector `frozen`.
    pub fn advection(&self, quad: &CellQuadrature, frozen: &DVector<f64>) -> CscMatrix {
        let wall = self.layout.wall_velocity(frozen);
        self.assemble_cells(|i, j, m| {
            let coeffs = self.local_coeffs(i, j, frozen);
            let wall_dofs = WallProfile::element_dofs(self.beam.elements, i);
            for p in &quad.full[self.cell_index(i, j)] {
                let mut a = Vector2::zeros();
                for (s, c) in p.shapes.iter().zip(coeffs) {
                    a[s.comp] += c * s.value;
                }
                let v: f64 = wall_dofs.iter().zip(p.wall).map(|(d, h)| d.map_or(0.0, |k| wall[k] * h)).sum();
                a[1] -= p.r * v;
                let w = 0.5 * p.weight * p.jacobian;
                for (ka, sa) in p.shapes.iter().enumerate() {
                    let ta = a.dot(&sa.grad);
                    for (kb, sb) in p.shapes.iter().enumerate() {
                        if sa.comp != sb.comp {
                            continue;
                        }
                        let tb = a.dot(&sb.grad);
                        m[kb][ka] += w * (ta * sb.value - tb * sa.value);
                    }
                }
            }
        })
    }

    /// Every fluid-step operator for the geometry pair `(eta*^n, eta*^{n+1})`
    /// with the advection linearized about `frozen`.
    pub fn assemble_all(
        &self,
        star_n: &WallProfile,
        star_np1: &WallProfile,
        frozen: &DVector<f64>,
        nu: f64,
    ) -> Result<AssembledForms> {
        let quadrature = self.quadrature(star_n)?;
        Ok(AssembledForms {
            mass: self.jacobian_mass(star_n),
            jump_mass: self.jump_mass(star_n, star_np1),
            viscous: self.viscous(&quadrature, nu),
            penalty: self.penalty(&quadrature),
            advection: self.advection(&quadrature, frozen),
            quadrature,
        })
    }

    /// Velocity of a coupled vector at local coordinates of cell `(i, j)`.
    pub fn velocity_at(&self, i: usize, j: usize, xi: f64, zeta: f64, u: &DVector<f64>) -> Vector2<f64> {
        let (sh, _) = reference_shapes(&self.domain, j, xi, zeta);
        let mut out = Vector2::zeros();
        for (s, c) in sh.iter().zip(self.local_coeffs(i, j, u)) {
            out[s.comp] += c * s.value;
        }
        out
    }

    /// `int_O (R + eta)^p |u|^2` for a coupled vector.
    pub fn weighted_norm_sq(&self, profile: &WallProfile, power: i32, u: &DVector<f64>) -> f64 {
        if power == 0 {
            return self.plain_mass.quadratic(u);
        }
        let radius = self.domain.radius;
        self.weighted_mass(|i, xi| (radius + profile.eval_in_element(i, xi).value).powi(power)).quadratic(u)
    }
}
