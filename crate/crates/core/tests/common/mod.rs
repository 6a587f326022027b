//! Dense reference implementation of the discrete operators and both
//! substeps, written against physical coordinates and explicit inverse ALE
//! Jacobians rather than the element-local kernels of the library. Used to
//! cross-check assembly and the splitting steps on tiny meshes.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};

const G2: [(f64, f64); 2] = [(0.5 - 0.288_675_134_594_812_9, 0.5), (0.5 + 0.288_675_134_594_812_9, 0.5)];

/// Four-point Gauss-Legendre on `[0, 1]`.
fn g4() -> [(f64, f64); 4] {
    let (a, b) = (0.339_981_043_584_856_3, 0.861_136_311_594_052_6);
    let (wa, wb) = (0.652_145_154_862_546_1, 0.347_854_845_137_453_9);
    [(0.5 - 0.5 * b, 0.5 * wb), (0.5 - 0.5 * a, 0.5 * wa), (0.5 + 0.5 * a, 0.5 * wa), (0.5 + 0.5 * b, 0.5 * wb)]
}

#[derive(Debug, Clone)]
pub struct Mirror {
    pub length: f64,
    pub radius: f64,
    pub nz: usize,
    pub nr: usize,
    pub hz: f64,
    pub hr: f64,
}

/// One global nodal fluid unknown: node `(i, j)`, component `c` (0 axial, 1 radial).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dof {
    pub i: usize,
    pub j: usize,
    pub c: usize,
}

impl Mirror {
    pub fn new(length: f64, radius: f64, nz: usize, nr: usize) -> Self {
        Self { length, radius, nz, nr, hz: length / nz as f64, hr: 1.0 / nr as f64 }
    }

    // ---- wall: cubic Hermite in z, clamped, coefficients (value, slope) per interior node

    fn nodal(&self, coeffs: &[f64], k: usize) -> (f64, f64) {
        if k == 0 || k == self.nz {
            (0.0, 0.0)
        } else {
            (coeffs[2 * (k - 1)], coeffs[2 * (k - 1) + 1])
        }
    }

    /// `(eta, eta', eta'')` at `z`, evaluated inside element `e`.
    pub fn wall(&self, coeffs: &[f64], e: usize, z: f64) -> (f64, f64, f64) {
        let h = self.hz;
        let (z0, z1) = (e as f64 * h, (e + 1) as f64 * h);
        let (a0, s0) = self.nodal(coeffs, e);
        let (a1, s1) = self.nodal(coeffs, e + 1);
        // cubic p(z) = c0 + c1 x + c2 x^2 + c3 x^3 with x = z - z0, from the
        // four end conditions
        let c0 = a0;
        let c1 = s0;
        let c2 = (3.0 * (a1 - a0) / h - 2.0 * s0 - s1) / h;
        let c3 = (s0 + s1 - 2.0 * (a1 - a0) / h) / (h * h);
        debug_assert!(z >= z0 - 1e-12 && z <= z1 + 1e-12);
        let x = z - z0;
        (c0 + x * (c1 + x * (c2 + x * c3)), c1 + x * (2.0 * c2 + 3.0 * c3 * x), 2.0 * c2 + 6.0 * c3 * x)
    }

    /// Beam basis function `b` (value/slope DOF of interior node) in element `e`.
    fn beam_basis(&self, b: usize, e: usize, z: f64) -> (f64, f64, f64) {
        let mut c = vec![0.0; 2 * (self.nz - 1)];
        c[b] = 1.0;
        self.wall(&c, e, z)
    }

    pub fn beam_ndof(&self) -> usize {
        2 * (self.nz - 1)
    }

    /// Beam mass and stiffness.
    pub fn structure(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        let nb = self.beam_ndof();
        let mut m = DMatrix::zeros(nb, nb);
        let mut s = DMatrix::zeros(nb, nb);
        for e in 0..self.nz {
            for (t, wt) in g4() {
                let z = (e as f64 + t) * self.hz;
                let wq = wt * self.hz;
                for a in 0..nb {
                    let fa = self.beam_basis(a, e, z);
                    for b in 0..nb {
                        let fb = self.beam_basis(b, e, z);
                        m[(a, b)] += wq * fa.0 * fb.0;
                        s[(a, b)] += wq * (fa.1 * fb.1 + fa.2 * fb.2);
                    }
                }
            }
        }
        (m, s)
    }

    // ---- fluid: bilinear Lagrange on the reference rectangle

    pub fn n_nodes(&self) -> usize {
        (self.nz + 1) * (self.nr + 1)
    }

    /// Nodal DOFs plus beam coefficients: the full unknown count.
    pub fn n_full(&self) -> usize {
        2 * self.n_nodes() + self.beam_ndof()
    }

    pub fn is_free(&self, d: Dof) -> bool {
        match d.c {
            0 => d.j != self.nr,
            _ => d.j != 0 && d.j != self.nr && d.i != 0 && d.i != self.nz,
        }
    }

    /// Wall lift profile `psi(r)`: linear from 0 at `1 - hr` to 1 at the wall.
    fn psi(&self, r: f64) -> (f64, f64) {
        let base = 1.0 - self.hr;
        if r < base {
            (0.0, 0.0)
        } else {
            ((r - base) / self.hr, 1.0 / self.hr)
        }
    }

    fn node_index(&self, i: usize, j: usize) -> usize {
        i * (self.nr + 1) + j
    }

    /// Value and reference gradient of the nodal basis of `(i, j)` at a point
    /// inside cell `(ci, cj)`.
    fn q1(&self, i: usize, j: usize, ci: usize, cj: usize, z: f64, r: f64) -> (f64, Vector2<f64>) {
        if !(i == ci || i == ci + 1) || !(j == cj || j == cj + 1) {
            return (0.0, Vector2::zeros());
        }
        let (zi, rj) = (i as f64 * self.hz, j as f64 * self.hr);
        let fz = 1.0 - (z - zi).abs() / self.hz;
        let fr = 1.0 - (r - rj).abs() / self.hr;
        let dz = if i == ci { -1.0 / self.hz } else { 1.0 / self.hz };
        let dr = if j == cj { -1.0 / self.hr } else { 1.0 / self.hr };
        (fz * fr, Vector2::new(dz * fr, fz * dr))
    }

    /// Inverse-transpose of the ALE deformation gradient at `(z, r)`.
    fn inv_t(&self, eta: (f64, f64, f64), r: f64) -> (Matrix2<f64>, f64) {
        let jac = self.radius + eta.0;
        let f = Matrix2::new(1.0, 0.0, r * eta.1, jac);
        (f.try_inverse().expect("invertible").transpose(), jac)
    }

    fn all_dofs(&self) -> Vec<Dof> {
        let mut v = Vec::new();
        for i in 0..=self.nz {
            for j in 0..=self.nr {
                for c in 0..2 {
                    v.push(Dof { i, j, c });
                }
            }
        }
        v
    }

    fn global(&self, d: Dof) -> usize {
        2 * self.node_index(d.i, d.j) + d.c
    }

    /// Global index of beam coefficient `b`.
    pub fn beam_global(&self, b: usize) -> usize {
        2 * self.n_nodes() + b
    }

    /// Radial velocity of the wall-coefficient block of a full vector.
    fn wall_velocity_at(&self, full: &DVector<f64>, e: usize, z: f64) -> f64 {
        let c: Vec<f64> = (0..self.beam_ndof()).map(|b| full[self.beam_global(b)]).collect();
        self.wall(&c, e, z).0
    }

    /// Dense assembly over cell quadrature: `f(point, trial, test)` returns
    /// the integrand for a pair of vector basis functions.
    fn assemble<F>(&self, eta: &[f64], center_only: bool, mut f: F) -> DMatrix<f64>
    where
        F: FnMut(&Point, &Basis, &Basis) -> f64,
    {
        let n = self.n_full();
        let mut out = DMatrix::zeros(n, n);
        let dofs = self.all_dofs();
        let pts: Vec<(f64, f64, f64)> = if center_only {
            vec![(0.5, 0.5, 1.0)]
        } else {
            let mut v = Vec::new();
            for (a, wa) in g4() {
                for (b, wb) in G2 {
                    v.push((a, b, wa * wb));
                }
            }
            v
        };
        for ci in 0..self.nz {
            for cj in 0..self.nr {
                for &(tz, tr, w) in &pts {
                    let z = (ci as f64 + tz) * self.hz;
                    let r = (cj as f64 + tr) * self.hr;
                    let e = self.wall(eta, ci, z);
                    let (inv_t, jac) = self.inv_t(e, r);
                    let pt = Point { z, r, ci, weight: w * self.hz * self.hr, jac, inv_t };
                    // row c of the gradient holds the transformed gradient
                    let make = |c: usize, v: f64, g: Vector2<f64>| {
                        let mut value = Vector2::zeros();
                        value[c] = v;
                        let gt = inv_t * g;
                        let mut grad = Matrix2::zeros();
                        grad[(c, 0)] = gt[0];
                        grad[(c, 1)] = gt[1];
                        Basis { value, grad }
                    };
                    let mut basis: Vec<(usize, Basis)> = dofs
                        .iter()
                        .map(|d| {
                            let (v, g) = self.q1(d.i, d.j, ci, cj, z, r);
                            (self.global(*d), make(d.c, v, g))
                        })
                        .collect();
                    let (ps, dps) = self.psi(r);
                    for b in 0..self.beam_ndof() {
                        let (h, dh, _) = self.beam_basis(b, ci, z);
                        basis.push((self.beam_global(b), make(1, h * ps, Vector2::new(dh * ps, h * dps))));
                    }
                    for (ga, ba) in &basis {
                        if ba.value.norm() == 0.0 && ba.grad.norm() == 0.0 {
                            continue;
                        }
                        for (gb, bb) in &basis {
                            out[(*gb, *ga)] += f(&pt, ba, bb);
                        }
                    }
                }
            }
        }
        out
    }

    pub fn mass(&self, weight_coeffs: &[f64], plus_radius: bool) -> DMatrix<f64> {
        let radius = if plus_radius { self.radius } else { 0.0 };
        let zero = vec![0.0; self.beam_ndof()];
        self.assemble(&zero, false, |p, u, q| {
            let w = radius + self.wall(weight_coeffs, p.ci, p.z).0;
            p.weight * w * u.value.dot(&q.value)
        })
    }

    pub fn viscous(&self, eta: &[f64], nu: f64) -> DMatrix<f64> {
        self.assemble(eta, false, |p, u, q| {
            let du = 0.5 * (u.grad + u.grad.transpose());
            let dq = 0.5 * (q.grad + q.grad.transpose());
            p.weight * 2.0 * nu * p.jac * du.component_mul(&dq).sum()
        })
    }

    pub fn penalty(&self, eta: &[f64]) -> DMatrix<f64> {
        self.assemble(eta, true, |p, u, q| p.weight * u.grad.trace() * q.grad.trace())
    }

    /// Skew advection with transport `a = u_f - r v_f(z) e_r`.
    pub fn advection(&self, eta: &[f64], frozen_full: &DVector<f64>) -> DMatrix<f64> {
        let field = |p: &Point| -> Vector2<f64> {
            let wall = self.wall_velocity_at(frozen_full, p.ci, p.z);
            let mut a = Vector2::zeros();
            let cj = ((p.r / self.hr).floor() as usize).min(self.nr - 1);
            for i in 0..=self.nz {
                for j in 0..=self.nr {
                    let (phi, _) = self.q1(i, j, p.ci, cj, p.z, p.r);
                    let k = self.node_index(i, j);
                    a[0] += phi * frozen_full[2 * k];
                    a[1] += phi * frozen_full[2 * k + 1];
                }
            }
            a[1] += self.psi(p.r).0 * wall;
            a[1] -= p.r * wall;
            a
        };
        self.assemble(eta, false, |p, u, q| {
            let a = field(p);
            let conv_u = u.grad * a;
            let conv_q = q.grad * a;
            0.5 * p.weight * p.jac * (conv_u.dot(&q.value) - conv_q.dot(&u.value))
        })
    }

    /// `int_0^1 q_z(z_end, r) dr` for every global DOF.
    pub fn flux(&self, outlet: bool) -> DVector<f64> {
        let i_end = if outlet { self.nz } else { 0 };
        let mut out = DVector::zeros(self.n_full());
        for j in 0..=self.nr {
            let mut acc = 0.0;
            for cj in 0..self.nr {
                for (t, w) in G2 {
                    let r = (cj as f64 + t) * self.hr;
                    let fr = (1.0 - (r - j as f64 * self.hr).abs() / self.hr).max(0.0);
                    acc += w * self.hr * fr;
                }
            }
            out[2 * self.node_index(i_end, j)] = acc;
        }
        out
    }

    /// Global indices of a coupled vector: the free nodal DOFs in the order
    /// given by `owner` (free index to `(node, component)`), then the beam
    /// coefficients.
    pub fn free_globals(&self, owner: impl Fn(usize) -> (usize, usize), n_fluid: usize) -> Vec<usize> {
        let mut out: Vec<usize> = (0..n_fluid)
            .map(|k| {
                let (node, c) = owner(k);
                2 * node + c
            })
            .collect();
        out.extend(self.wall_globals());
        out
    }

    /// The free nodal DOFs in ascending global order, then the beam coefficients.
    pub fn free_set(&self) -> Vec<usize> {
        let mut out: Vec<usize> =
            self.all_dofs().into_iter().filter(|d| self.is_free(*d)).map(|d| self.global(d)).collect();
        out.extend(self.wall_globals());
        out
    }

    /// Global indices of the beam coefficients.
    pub fn wall_globals(&self) -> Vec<usize> {
        (0..self.beam_ndof()).map(|b| self.beam_global(b)).collect()
    }
}

pub struct Point {
    pub z: f64,
    pub r: f64,
    pub ci: usize,
    pub weight: f64,
    pub jac: f64,
    pub inv_t: Matrix2<f64>,
}

pub struct Basis {
    pub value: Vector2<f64>,
    pub grad: Matrix2<f64>,
}

pub fn restrict(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), idx.len(), |a, b| m[(idx[a], idx[b])])
}

pub fn restrict_vec(v: &DVector<f64>, idx: &[usize]) -> DVector<f64> {
    DVector::from_fn(idx.len(), |a, _| v[idx[a]])
}

pub fn expand_vec(v: &DVector<f64>, idx: &[usize], n: usize) -> DVector<f64> {
    let mut out = DVector::zeros(n);
    for (a, &g) in idx.iter().enumerate() {
        out[g] = v[a];
    }
    out
}

pub fn rel_err(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let scale = b.norm().max(a.norm());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).norm() / scale
    }
}

pub fn rel_err_vec(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let scale = b.norm().max(a.norm());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).norm() / scale
    }
}

/// Structure substep by dense LU.
pub fn structure_step(
    m: &DMatrix<f64>,
    s: &DMatrix<f64>,
    eta: &DVector<f64>,
    v: &DVector<f64>,
    dt: f64,
) -> (DVector<f64>, DVector<f64>) {
    if m.nrows() == 0 {
        return (eta.clone(), DVector::zeros(0));
    }
    let a = m + s * (dt * dt);
    let rhs = m * v - s * eta * dt;
    let v = a.lu().solve(&rhs).expect("nonsingular");
    (eta + &v * dt, v)
}

pub struct FluidData<'a> {
    pub nu: f64,
    pub epsilon: f64,
    pub dt: f64,
    pub star_n: &'a [f64],
    pub star_np1: &'a [f64],
    /// Coupled `u^n`.
    pub u: &'a DVector<f64>,
    pub v_half: &'a DVector<f64>,
    pub xi: f64,
    pub p_in: f64,
    pub p_out: f64,
    pub tol: f64,
    pub max_iterations: usize,
    pub damping: f64,
    pub damping_after: usize,
}

/// Fluid substep by dense Picard iteration; `free` lists the global index
/// of each coupled entry. Returns `(u^{n+1}, iterations)`.
pub fn fluid_step(mirror: &Mirror, free: &[usize], d: &FluidData<'_>) -> (DVector<f64>, usize) {
    let n_full = mirror.n_full();
    let (m_beam, _) = mirror.structure();
    let mass = restrict(&mirror.mass(d.star_n, true), free);
    let jump: Vec<f64> = d.star_np1.iter().zip(d.star_n).map(|(a, b)| a - b).collect();
    let jump_mass = restrict(&mirror.mass(&jump, false), free);
    let visc = restrict(&mirror.viscous(d.star_n, d.nu), free);
    let pen = restrict(&mirror.penalty(d.star_n), free);

    let walls = mirror.wall_globals();
    let wall_pos: Vec<usize> = walls.iter().map(|g| free.iter().position(|f| f == g).unwrap()).collect();
    let mut wall_embedded = DMatrix::zeros(free.len(), free.len());
    for (p, &a) in wall_pos.iter().enumerate() {
        for (q, &b) in wall_pos.iter().enumerate() {
            wall_embedded[(a, b)] = m_beam[(p, q)];
        }
    }
    let base = &mass + &jump_mass * 0.5 + &visc * d.dt + &pen * (d.dt / d.epsilon) + &wall_embedded;

    let v_n = DVector::from_fn(wall_pos.len(), |p, _| d.u[wall_pos[p]]);
    let coupling = &m_beam * d.v_half;
    let flux_in = restrict_vec(&mirror.flux(false), free);
    let flux_out = restrict_vec(&mirror.flux(true), free);
    let mut rhs = &mass * d.u * (1.0 + d.xi) + (flux_in * d.p_in - flux_out * d.p_out) * d.dt;
    let wall_force = &m_beam * &v_n * d.xi;
    for (p, &a) in wall_pos.iter().enumerate() {
        rhs[a] += coupling[p] + wall_force[p];
    }

    let mut iterate = d.u.clone();
    for (p, &a) in wall_pos.iter().enumerate() {
        iterate[a] = d.v_half[p];
    }
    for k in 1..=d.max_iterations {
        let adv = restrict(&mirror.advection(d.star_n, &expand_vec(&iterate, free, n_full)), free);
        let system = &base + adv * d.dt;
        let sol = system.lu().solve(&rhs).expect("nonsingular");
        let diff = (&sol - &iterate).norm();
        let size = sol.norm();
        let res = if size > 0.0 { diff / size } else { diff };
        if res <= d.tol || diff == 0.0 {
            return (sol, k);
        }
        iterate = if k >= d.damping_after && d.damping < 1.0 { &iterate + (&sol - &iterate) * d.damping } else { sol };
    }
    panic!("mirror Picard iteration did not converge");
}
