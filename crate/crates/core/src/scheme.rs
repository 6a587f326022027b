//! Lie splitting time loop.
//!
//! Each step runs the structure subproblem (elastic wall, fluid frozen), then
//! updates the geometric cutoff with the new displacement, then solves the
//! penalized fluid subproblem on the frozen geometry `eta*` with the wall
//! velocity shared as the wall block of the coupled velocity vector.

use std::sync::Arc;

use nalgebra::{Cholesky, DVector, Dyn};

use crate::diagnostics::{EnergyLedger, StepRecord};
use crate::discretization::{h2_norm, hs_norm, AssembledForms, Discretization, StructureForms};
use crate::error::{FsiError, Result};
use crate::geometry::WallProfile;
use crate::noise::{apply_g, sample_path, NoisePath, NoiseSpec, PathKey};
use crate::sparse::{CscMatrix, DirectSolver};

/// Fixed-point controls of the fluid substep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PicardSettings {
    pub tol: f64,
    pub max_iterations: usize,
    /// Relaxation factor applied to the transport field once `damping_after`
    /// iterations have passed; `1.0` disables damping.
    pub damping: f64,
    pub damping_after: usize,
}

impl Default for PicardSettings {
    fn default() -> Self {
        Self { tol: 1e-10, max_iterations: 50, damping: 0.5, damping_after: 20 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeParams {
    pub nu: f64,
    pub epsilon: f64,
    pub delta: f64,
    /// Sobolev exponent of the cutoff test.
    pub s: f64,
    pub steps: usize,
    pub dt: f64,
    pub picard: PicardSettings,
    pub halt_at_stop: bool,
}

/// Initial wall displacement and coupled velocity (fluid DOFs followed by
/// the wall velocity in beam coefficients).
#[derive(Debug, Clone, PartialEq)]
pub struct InitialState {
    pub eta: WallProfile,
    pub u: DVector<f64>,
}

/// Frozen artificial displacement and the running admissibility flag.
#[derive(Debug, Clone, PartialEq)]
pub struct CutoffState {
    pub theta: bool,
    pub eta_star: WallProfile,
    pub frozen_at: Option<usize>,
    pub delta: f64,
    pub s: f64,
    /// `inf_z (R + eta)` of the last candidate.
    pub min_gap: f64,
    /// `|R + eta|_{H^s}` of the last candidate.
    pub hs_norm: f64,
}

/// Admissibility band test: `delta < inf (R + eta)` and `|R + eta|_{H^s} < 1/delta`.
pub fn admissible(min_gap: f64, hs: f64, delta: f64) -> bool {
    delta < min_gap && hs < 1.0 / delta
}

impl CutoffState {
    /// Cutoff state for the initial displacement.
    pub fn initial(eta0: &WallProfile, radius: f64, delta: f64, s: f64) -> Result<Self> {
        let min_gap = radius + eta0.min_value();
        let hs = hs_norm(eta0, radius, s)?;
        Ok(Self {
            theta: admissible(min_gap, hs, delta),
            eta_star: eta0.clone(),
            frozen_at: None,
            delta,
            s,
            min_gap,
            hs_norm: hs,
        })
    }
}

/// Tests `candidate` (the displacement of time level `step`) and returns the
/// updated cutoff: the flag can only drop, and `eta*` stops following the
/// displacement from the first drop on.
pub fn update_cutoff(state: &CutoffState, candidate: &WallProfile, radius: f64, step: usize) -> Result<CutoffState> {
    let min_gap = radius + candidate.min_value();
    let hs = hs_norm(candidate, radius, state.s)?;
    let theta = state.theta && admissible(min_gap, hs, state.delta);
    let mut next = CutoffState { theta, min_gap, hs_norm: hs, ..state.clone() };
    if theta {
        next.eta_star = candidate.clone();
    } else if state.theta {
        next.frozen_at = Some(step);
    }
    Ok(next)
}

/// Structure subproblem with a prefactored `M_H + dt^2 S`.
#[derive(Debug, Clone)]
pub struct StructureSolver {
    dt: f64,
    factor: Option<Cholesky<f64, Dyn>>,
}

impl StructureSolver {
    pub fn new(forms: &StructureForms, dt: f64) -> Result<Self> {
        if forms.mass.nrows() == 0 {
            return Ok(Self { dt, factor: None });
        }
        let system = &forms.mass + &forms.stiffness * (dt * dt);
        let factor = Cholesky::new(system)
            .ok_or_else(|| FsiError::SolverFailure("structure system is not positive definite".into()))?;
        Ok(Self { dt, factor: Some(factor) })
    }

    /// Returns `(eta^{n+1/2}, v^{n+1/2})` from `(eta^n, v^n)`:
    /// `(M_H + dt^2 S) v = M_H v^n - dt S eta^n`, `eta^{n+1/2} = eta^n + dt v`.
    pub fn step(
        &self,
        forms: &StructureForms,
        eta: &DVector<f64>,
        v_wall: &DVector<f64>,
    ) -> Result<(DVector<f64>, DVector<f64>)> {
        let Some(factor) = &self.factor else {
            return Ok((eta.clone(), DVector::zeros(0)));
        };
        let rhs = &forms.mass * v_wall - &forms.stiffness * eta * self.dt;
        let v = factor.solve(&rhs);
        if v.iter().any(|x| !x.is_finite()) {
            return Err(FsiError::SolverFailure("non-finite structure velocity".into()));
        }
        let eta_half = eta + &v * self.dt;
        Ok((eta_half, v))
    }
}

/// One-shot structure step (factorizes on every call).
pub fn structure_step(
    forms: &StructureForms,
    eta: &DVector<f64>,
    v_wall: &DVector<f64>,
    dt: f64,
) -> Result<(DVector<f64>, DVector<f64>)> {
    StructureSolver::new(forms, dt)?.step(forms, eta, v_wall)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PicardStats {
    pub iterations: usize,
    pub residual: f64,
}

/// Data of one fluid substep.
#[derive(Debug, Clone, Copy)]
pub struct FluidStepInput<'a> {
    /// Coupled `u^n`; its wall block is `v^n`.
    pub u: &'a DVector<f64>,
    /// `v^{n+1/2}`
    pub v_half: &'a DVector<f64>,
    pub star_n: &'a WallProfile,
    pub star_np1: &'a WallProfile,
    pub increment: &'a [f64],
    pub p_in: f64,
    pub p_out: f64,
}

#[derive(Debug, Clone)]
pub struct FluidStepOutput {
    /// Coupled `u^{n+1}`; its wall block is `v^{n+1}`.
    pub u: DVector<f64>,
    pub v: DVector<f64>,
    /// Operators at `eta*^n`, advection linearized about the last iterate.
    pub forms: AssembledForms,
    pub picard: PicardStats,
    /// `Phi(dW)`
    pub xi: f64,
}

fn l2(x: &DVector<f64>) -> f64 {
    x.norm()
}

/// Fluid subproblem by Picard iteration on the advection transport field.
///
/// The returned velocity is the last undamped linear solve, so it satisfies
/// the discrete equations exactly for the transport field it was built with;
/// skewness of the advection then makes the energy balance exact.
pub fn fluid_step(
    disc: &Discretization,
    solver: &DirectSolver,
    params: &SchemeParams,
    noise: &NoiseSpec,
    input: FluidStepInput<'_>,
) -> Result<FluidStepOutput> {
    let dt = params.dt;
    let layout = &disc.layout;
    let v_n = layout.wall_velocity(input.u);

    let quadrature = disc.quadrature(input.star_n)?;
    let mass = disc.jacobian_mass(input.star_n);
    let jump_mass = disc.jump_mass(input.star_n, input.star_np1);
    let viscous = disc.viscous(&quadrature, params.nu);
    let penalty = disc.penalty(&quadrature);

    let mut base = mass.clone();
    base.axpy(0.5, &jump_mass);
    base.axpy(dt, &viscous);
    base.axpy(dt / params.epsilon, &penalty);
    base.axpy(1.0, disc.wall_mass());

    let forcing = apply_g(&mass, &disc.structure.mass, input.u, &v_n, input.increment, noise)?;
    let mut rhs = mass.mul_vec(input.u);
    rhs += layout.scatter(&(&disc.structure.mass * input.v_half));
    rhs += disc.flux_in() * (dt * input.p_in) - disc.flux_out() * (dt * input.p_out);
    rhs += &forcing.fluid;
    rhs += layout.scatter(&forcing.structure);

    let mut iterate = input.u.clone();
    layout.set_wall_velocity(&mut iterate, input.v_half);

    let settings = params.picard;
    let mut residual = f64::INFINITY;
    for k in 1..=settings.max_iterations {
        let advection = disc.advection(&quadrature, &iterate);
        let mut system = base.clone();
        system.axpy(dt, &advection);
        let solution = solver.solve(&system, &rhs)?;
        let diff = l2(&(&solution - &iterate));
        let size = l2(&solution);
        residual = if size > 0.0 { diff / size } else { diff };
        if residual <= settings.tol || diff == 0.0 {
            let v = layout.wall_velocity(&solution);
            return Ok(FluidStepOutput {
                u: solution,
                v,
                forms: AssembledForms { mass, jump_mass, viscous, penalty, advection, quadrature },
                picard: PicardStats { iterations: k, residual },
                xi: forcing.xi,
            });
        }
        iterate = if k >= settings.damping_after && settings.damping < 1.0 {
            &iterate + (&solution - &iterate) * settings.damping
        } else {
            solution
        };
    }
    Err(FsiError::PicardDivergence { iterations: settings.max_iterations, residual })
}

/// Everything needed to run paths of one scenario; shared read-only by
/// concurrent paths.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub disc: Arc<Discretization>,
    pub params: SchemeParams,
    pub initial: InitialState,
    /// Step-averaged `(P_in^n, P_out^n)`.
    pub pressure: Vec<(f64, f64)>,
    pub noise: NoiseSpec,
    structure: StructureSolver,
    fluid_solver: DirectSolver,
}

impl Simulation {
    pub fn new(
        disc: Arc<Discretization>,
        params: SchemeParams,
        initial: InitialState,
        pressure: Vec<(f64, f64)>,
        noise: NoiseSpec,
    ) -> Result<Self> {
        if pressure.len() != params.steps {
            return Err(FsiError::config("pressure", "one averaged value pair per step is required"));
        }
        noise.validate()?;
        check_initial_data(&disc, &params, &initial)?;
        let structure = StructureSolver::new(&disc.structure, params.dt)?;
        let fluid_solver = DirectSolver::new(disc.pattern().clone())?;
        Ok(Self { disc, params, initial, pressure, noise, structure, fluid_solver })
    }

    pub fn sample_noise(&self, key: PathKey) -> Result<NoisePath> {
        sample_path(&self.noise, key, self.params.steps, self.params.dt)
    }

    pub fn fluid_solver(&self) -> &DirectSolver {
        &self.fluid_solver
    }

    pub fn run_path(&self, key: PathKey) -> Result<Trajectory> {
        let noise = self.sample_noise(key)?;
        self.run_with_noise(&noise)
    }

    /// Energy `E = 1/2 (|u|_{M(R + eta*)}^2 + |v|^2 + |eta|_S^2)`.
    fn energy(&self, mass: &CscMatrix, u: &DVector<f64>, v: &DVector<f64>, eta: &DVector<f64>) -> f64 {
        let s = &self.disc.structure;
        0.5 * (mass.quadratic(u) + s.beam_sq(v) + s.elastic_sq(eta))
    }

    pub fn run_with_noise(&self, noise: &NoisePath) -> Result<Trajectory> {
        let disc = &self.disc;
        let p = &self.params;
        let radius = disc.domain.radius;
        let s_forms = &disc.structure;
        let elements = disc.beam.elements;
        let length = disc.domain.length;

        let mut cutoff = CutoffState::initial(&self.initial.eta, radius, p.delta, p.s)?;
        let mut u = self.initial.u.clone();
        let mut eta = self.initial.eta.coeffs().clone();
        let mut mass_n = disc.jacobian_mass(&cutoff.eta_star);
        let quad0 = disc.quadrature(&cutoff.eta_star)?;
        let div0 = disc.penalty(&quad0).quadratic(&u).max(0.0).sqrt();

        let mut traj = Trajectory {
            dt: p.dt,
            steps: p.steps,
            u: vec![u.clone()],
            v: vec![disc.layout.wall_velocity(&u)],
            eta: vec![eta.clone()],
            eta_star: vec![cutoff.eta_star.coeffs().clone()],
            theta: vec![cutoff.theta],
            v_half: Vec::with_capacity(p.steps),
            tau_idx: p.steps,
            frozen_at: None,
            ledger: EnergyLedger::new(p.delta),
        };
        let e0 = self.energy(&mass_n, &u, &traj.v[0], &eta);
        traj.ledger.records.push(StepRecord::initial(e0, div0, &cutoff));

        for n in 0..p.steps {
            let v_n = disc.layout.wall_velocity(&u);
            let (eta_half, v_half) = self.structure.step(s_forms, &eta, &v_n)?;
            let candidate = WallProfile::from_coeffs(length, elements, eta_half.clone())?;
            let next_cutoff = update_cutoff(&cutoff, &candidate, radius, n + 1)?;

            let increment = noise.increment(n);
            let (p_in, p_out) = self.pressure[n];
            let out = fluid_step(
                disc,
                &self.fluid_solver,
                p,
                &self.noise,
                FluidStepInput {
                    u: &u,
                    v_half: &v_half,
                    star_n: &cutoff.eta_star,
                    star_np1: &next_cutoff.eta_star,
                    increment,
                    p_in,
                    p_out,
                },
            )?;

            let mass_np1 = if next_cutoff.eta_star == cutoff.eta_star {
                mass_n.clone()
            } else {
                disc.jacobian_mass(&next_cutoff.eta_star)
            };
            let e_n = self.energy(&mass_n, &u, &v_n, &eta);
            let e_half = 0.5 * (mass_n.quadratic(&u) + s_forms.beam_sq(&v_half) + s_forms.elastic_sq(&eta_half));
            let e_np1 = self.energy(&mass_np1, &out.u, &out.v, &eta_half);
            let d_eta = &eta_half - &eta;
            let wall_jump_sq = s_forms.beam_sq(&(&v_half - &v_n));
            let c1 = 0.5 * (wall_jump_sq + s_forms.elastic_sq(&d_eta));
            let du = &out.u - &u;
            let c2 = 0.25 * (mass_n.quadratic(&du) + s_forms.beam_sq(&(&v_half - &out.v)));
            let penalty_sq = out.forms.penalty.quadratic(&out.u);
            let dissipation = p.dt * (out.forms.viscous.quadratic(&out.u) + penalty_sq / p.epsilon);
            let pressure_work = p.dt * (p_in * disc.flux_in().dot(&out.u) - p_out * disc.flux_out().dot(&out.u));
            let stoch_work = out.xi * (mass_n.quadratic(&u) + s_forms.beam_sq(&v_n));
            let g_norm = self.noise.phi_norm()
                * (disc.weighted_norm_sq(&cutoff.eta_star, 2, &u) + s_forms.beam_sq(&v_n)).sqrt();

            traj.ledger.records.push(StepRecord {
                step: n + 1,
                t: (n + 1) as f64 * p.dt,
                energy: e_np1,
                energy_prev: e_n,
                energy_half: e_half,
                dissipation,
                c1,
                c2,
                div_residual: penalty_sq.max(0.0).sqrt(),
                theta: next_cutoff.theta,
                min_gap: next_cutoff.min_gap,
                hs_norm: next_cutoff.hs_norm,
                stoch_work,
                incr_norm: self.noise.increment_norm(increment),
                stopped: !next_cutoff.theta,
                pressure_work,
                g_norm,
                wall_jump_sq,
                xi: out.xi,
                picard_iterations: out.picard.iterations,
                picard_residual: out.picard.residual,
            });

            u = out.u;
            eta = eta_half;
            mass_n = mass_np1;
            if !next_cutoff.theta && traj.tau_idx == p.steps {
                traj.tau_idx = n + 1;
                traj.frozen_at = next_cutoff.frozen_at;
            }
            cutoff = next_cutoff;
            traj.u.push(u.clone());
            traj.v.push(out.v);
            traj.eta.push(eta.clone());
            traj.eta_star.push(cutoff.eta_star.coeffs().clone());
            traj.theta.push(cutoff.theta);
            traj.v_half.push(v_half);
            if p.halt_at_stop && !cutoff.theta {
                break;
            }
        }
        Ok(traj)
    }
}

/// Checks the admissibility of the initial configuration: `delta < R + eta0`,
/// `|R + eta0|_{H^2} < 1/delta`, and the cutoff band at time zero, so that
/// the stopping index is positive.
pub fn check_initial_data(disc: &Discretization, params: &SchemeParams, initial: &InitialState) -> Result<()> {
    let radius = disc.domain.radius;
    let eta0 = &initial.eta;
    if eta0.elements() != disc.beam.elements || (eta0.length() - disc.domain.length).abs() > 0.0 {
        return Err(FsiError::config("initial.eta0", "profile does not match the beam partition"));
    }
    if initial.u.len() != disc.n_free() {
        return Err(FsiError::config("initial.u0", "velocity does not match the fluid space"));
    }
    let gap = radius + eta0.min_value();
    if gap <= params.delta {
        return Err(FsiError::InitialData(format!("inf (R + eta0) = {gap} does not exceed delta = {}", params.delta)));
    }
    let h2 = h2_norm(eta0, radius);
    if h2 >= 1.0 / params.delta {
        return Err(FsiError::InitialData(format!("|R + eta0|_H2 = {h2} is not below 1/delta = {}", 1.0 / params.delta)));
    }
    let hs = hs_norm(eta0, radius, params.s)?;
    if hs >= 1.0 / params.delta {
        return Err(FsiError::InitialData(format!(
            "|R + eta0|_H^s = {hs} is not below 1/delta = {}",
            1.0 / params.delta
        )));
    }
    Ok(())
}

/// States of one path at every time level, with the piecewise-constant and
/// piecewise-linear time interpolants.
///
/// Index `n` of `u`, `v`, `eta`, `eta_star`, `theta` is time level `n`
/// (`0..=steps_run`); `v_half[n]` is the intermediate wall velocity of step
/// `n -> n+1`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub dt: f64,
    pub steps: usize,
    pub u: Vec<DVector<f64>>,
    pub v: Vec<DVector<f64>>,
    pub eta: Vec<DVector<f64>>,
    pub eta_star: Vec<DVector<f64>>,
    pub theta: Vec<bool>,
    pub v_half: Vec<DVector<f64>>,
    /// First time level with `theta = 0`, or `steps`.
    pub tau_idx: usize,
    pub frozen_at: Option<usize>,
    pub ledger: EnergyLedger,
}

impl Trajectory {
    /// Number of steps actually taken (less than `steps` after a halt).
    pub fn steps_run(&self) -> usize {
        self.v_half.len()
    }

    pub fn stopped(&self) -> bool {
        self.tau_idx < self.steps
    }

    /// Interval `[t^n, t^{n+1})` containing `t`.
    fn left_index(&self, t: f64) -> usize {
        ((t / self.dt).floor().max(0.0) as usize).min(self.steps_run() - 1)
    }

    /// Interval `(t^n, t^{n+1}]` containing `t`.
    fn right_index(&self, t: f64) -> usize {
        ((t / self.dt).ceil() as usize).clamp(1, self.steps_run()) - 1
    }

    fn weights(&self, t: f64) -> (usize, f64) {
        let n = self.left_index(t);
        (n, (t - n as f64 * self.dt) / self.dt)
    }

    /// `u_N(t) = u^n` on `[t^n, t^{n+1})`
    pub fn u_n(&self, t: f64) -> &DVector<f64> {
        &self.u[self.left_index(t)]
    }

    /// `u_N^+(t) = u^{n+1}` on `(t^n, t^{n+1}]`
    pub fn u_plus(&self, t: f64) -> &DVector<f64> {
        &self.u[self.right_index(t) + 1]
    }

    pub fn v_n(&self, t: f64) -> &DVector<f64> {
        &self.v[self.left_index(t)]
    }

    pub fn v_plus(&self, t: f64) -> &DVector<f64> {
        &self.v[self.right_index(t) + 1]
    }

    /// `v_N^#(t) = v^{n+1/2}` on `[t^n, t^{n+1})`
    pub fn v_sharp(&self, t: f64) -> &DVector<f64> {
        &self.v_half[self.left_index(t)]
    }

    /// `v_N^*(t) = theta(eta^{n+1}) v^{n+1/2}`
    pub fn v_star(&self, t: f64) -> DVector<f64> {
        let n = self.left_index(t);
        if self.theta[n + 1] {
            self.v_half[n].clone()
        } else {
            DVector::zeros(self.v_half[n].len())
        }
    }

    pub fn eta_n(&self, t: f64) -> &DVector<f64> {
        &self.eta[self.left_index(t)]
    }

    pub fn eta_plus(&self, t: f64) -> &DVector<f64> {
        &self.eta[self.right_index(t) + 1]
    }

    pub fn eta_star_n(&self, t: f64) -> &DVector<f64> {
        &self.eta_star[self.left_index(t)]
    }

    fn linear(family: &[DVector<f64>], n: usize, w: f64) -> DVector<f64> {
        &family[n] * (1.0 - w) + &family[n + 1] * w
    }

    pub fn u_tilde(&self, t: f64) -> DVector<f64> {
        let (n, w) = self.weights(t);
        Self::linear(&self.u, n, w)
    }

    pub fn v_tilde(&self, t: f64) -> DVector<f64> {
        let (n, w) = self.weights(t);
        Self::linear(&self.v, n, w)
    }

    pub fn eta_tilde(&self, t: f64) -> DVector<f64> {
        let (n, w) = self.weights(t);
        Self::linear(&self.eta, n, w)
    }

    pub fn eta_star_tilde(&self, t: f64) -> DVector<f64> {
        let (n, w) = self.weights(t);
        Self::linear(&self.eta_star, n, w)
    }

    /// `d/dt eta~_N` on the open interval containing `t`.
    pub fn eta_tilde_rate(&self, t: f64) -> DVector<f64> {
        let n = self.left_index(t);
        (&self.eta[n + 1] - &self.eta[n]) / self.dt
    }

    /// `d/dt eta~*_N` on the open interval containing `t`.
    pub fn eta_star_tilde_rate(&self, t: f64) -> DVector<f64> {
        let n = self.left_index(t);
        (&self.eta_star[n + 1] - &self.eta_star[n]) / self.dt
    }

    /// `|| div^{eta*_N} u_N^+ ||_{L2(0,T; L2)}`
    pub fn div_l2(&self) -> f64 {
        self.ledger.records[1..].iter().map(|r| self.dt * r.div_residual * r.div_residual).sum::<f64>().sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ReferenceDomain;

    fn disc(nz: usize, nr: usize) -> Arc<Discretization> {
        Arc::new(Discretization::new(ReferenceDomain::new(1.0, 1.0, nz, nr).unwrap(), nz).unwrap())
    }

    fn params(steps: usize, dt: f64) -> SchemeParams {
        SchemeParams {
            nu: 1.0,
            epsilon: 1e-3,
            delta: 0.1,
            s: 1.75,
            steps,
            dt,
            picard: PicardSettings::default(),
            halt_at_stop: false,
        }
    }

    #[test]
    fn zero_is_a_fixed_point_of_the_structure_step() {
        let d = disc(4, 2);
        let (eta, v) = structure_step(&d.structure, &DVector::zeros(6), &DVector::zeros(6), 0.1).unwrap();
        assert_eq!(eta, DVector::zeros(6));
        assert_eq!(v, DVector::zeros(6));
    }

    #[test]
    fn structure_identity_is_exact() {
        let d = disc(5, 2);
        let f = &d.structure;
        let eta = DVector::from_fn(8, |i, _| 0.01 * (i as f64 + 1.0).sin());
        let v = DVector::from_fn(8, |i, _| 0.3 * (i as f64 * 1.7).cos());
        let (eh, vh) = structure_step(f, &eta, &v, 0.05).unwrap();
        let e_n = 0.5 * (f.beam_sq(&v) + f.elastic_sq(&eta));
        let e_half = 0.5 * (f.beam_sq(&vh) + f.elastic_sq(&eh));
        let c1 = 0.5 * (f.beam_sq(&(&vh - &v)) + f.elastic_sq(&(&eh - &eta)));
        assert!((e_half + c1 - e_n).abs() <= 1e-13 * e_n);
    }

    #[test]
    fn cutoff_semantics() {
        let zero = WallProfile::zero(1.0, 2);
        let state = CutoffState::initial(&zero, 1.0, 0.1, 1.75).unwrap();
        assert!(state.theta);
        let next = update_cutoff(&state, &zero, 1.0, 1).unwrap();
        assert!(next.theta);
        assert_eq!(next.eta_star, zero);

        let collapsed = WallProfile::from_coeffs(1.0, 2, DVector::from_vec(vec![-0.95, 0.0])).unwrap();
        let dropped = update_cutoff(&next, &collapsed, 1.0, 2).unwrap();
        assert!(!dropped.theta);
        assert_eq!(dropped.frozen_at, Some(2));
        assert_eq!(dropped.eta_star, zero);

        let again = update_cutoff(&dropped, &zero, 1.0, 3).unwrap();
        assert!(!again.theta);
        assert_eq!(again.frozen_at, Some(2));
        assert_eq!(again.eta_star, zero);
    }

    #[test]
    fn zero_data_fluid_step_converges_in_one_iteration() {
        let d = disc(3, 2);
        let p = params(1, 0.01);
        let solver = DirectSolver::new(d.pattern().clone()).unwrap();
        let zero = WallProfile::zero(1.0, 3);
        let u = DVector::zeros(d.n_free());
        let out = fluid_step(
            &d,
            &solver,
            &p,
            &NoiseSpec::default(),
            FluidStepInput {
                u: &u,
                v_half: &DVector::zeros(4),
                star_n: &zero,
                star_np1: &zero,
                increment: &[0.0],
                p_in: 0.0,
                p_out: 0.0,
            },
        )
        .unwrap();
        assert_eq!(out.picard.iterations, 1);
        assert_eq!(out.u, u);
        assert_eq!(out.v, DVector::zeros(4));
    }

    #[test]
    fn kinematic_constraint_is_shared() {
        let d = disc(4, 2);
        let steps = 5;
        let sim = Simulation::new(
            d.clone(),
            params(steps, 0.01),
            InitialState { eta: WallProfile::zero(1.0, 4), u: DVector::zeros(d.n_free()) },
            vec![(1.0, 0.0); steps],
            NoiseSpec::default(),
        )
        .unwrap();
        let traj = sim.run_path(PathKey { master_seed: 0, path: 0 }).unwrap();
        for n in 0..=steps {
            assert_eq!(traj.v[n], d.layout.wall_velocity(&traj.u[n]));
        }
        assert!(traj.u[steps].norm() > 0.0);
        assert_eq!(traj.tau_idx, steps);
    }

    #[test]
    fn inadmissible_initial_data_is_rejected() {
        let d = disc(2, 2);
        let eta = WallProfile::from_coeffs(1.0, 2, DVector::from_vec(vec![-0.95, 0.0])).unwrap();
        let err = Simulation::new(
            d.clone(),
            params(1, 0.1),
            InitialState { eta, u: DVector::zeros(d.n_free()) },
            vec![(0.0, 0.0)],
            NoiseSpec::default(),
        )
        .unwrap_err();
        assert!(matches!(err, FsiError::InitialData(_)));
    }
}
