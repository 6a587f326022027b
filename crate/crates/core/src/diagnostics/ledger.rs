use nalgebra::DVector;

use crate::discretization::Discretization;
use crate::geometry::WallProfile;
use crate::scheme::CutoffState;

/// Column set of the per-path ledger CSV.
pub const LEDGER_COLUMNS: [&str; 14] = [
    "step",
    "t",
    "E",
    "E_half",
    "D",
    "C1",
    "C2",
    "div_residual",
    "theta",
    "min_gap",
    "hs_norm",
    "stoch_work",
    "incr_norm",
    "stopped",
];

/// Bookkeeping of step `n -> n+1`, stored under `step = n + 1`. Row 0
/// describes the initial state.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub t: f64,
    /// `E^{n+1}`
    pub energy: f64,
    /// `E^n`
    pub energy_prev: f64,
    /// `E^{n+1/2}`
    pub energy_half: f64,
    pub dissipation: f64,
    pub c1: f64,
    pub c2: f64,
    /// `|div^{eta*^n} u^{n+1}|_{L2}`
    pub div_residual: f64,
    pub theta: bool,
    pub min_gap: f64,
    pub hs_norm: f64,
    /// `(G(U^n, eta*^n) dW_n, U^n)`
    pub stoch_work: f64,
    /// `|dW_n|_{U_0}`
    pub incr_norm: f64,
    pub stopped: bool,
    /// `dt (P_in int u_z(0,.) - P_out int u_z(L,.))` at `u^{n+1}`
    pub pressure_work: f64,
    /// `|G(U^n, eta*^n)|_{L2(U_0; L2)}`
    pub g_norm: f64,
    /// `|v^{n+1/2} - v^n|^2`
    pub wall_jump_sq: f64,
    pub xi: f64,
    pub picard_iterations: usize,
    pub picard_residual: f64,
}

impl StepRecord {
    pub(crate) fn initial(energy: f64, div_residual: f64, cutoff: &CutoffState) -> Self {
        Self {
            step: 0,
            t: 0.0,
            energy,
            energy_prev: energy,
            energy_half: energy,
            dissipation: 0.0,
            c1: 0.0,
            c2: 0.0,
            div_residual,
            theta: cutoff.theta,
            min_gap: cutoff.min_gap,
            hs_norm: cutoff.hs_norm,
            stoch_work: 0.0,
            incr_norm: 0.0,
            stopped: !cutoff.theta,
            pressure_work: 0.0,
            g_norm: 0.0,
            wall_jump_sq: 0.0,
            xi: 0.0,
            picard_iterations: 0,
            picard_residual: 0.0,
        }
    }
}

/// `lhs <= rhs + tolerance`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InequalityCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub tolerance: f64,
}

impl InequalityCheck {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs + self.tolerance
    }

    pub fn slack(&self) -> f64 {
        self.rhs - self.lhs
    }
}

/// Relative roundoff allowance of the inequality checks.
const ROUNDOFF: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyLedger {
    pub delta: f64,
    pub records: Vec<StepRecord>,
}

impl EnergyLedger {
    pub fn new(delta: f64) -> Self {
        Self { delta, records: Vec::new() }
    }

    /// Step records, without the initial row.
    pub fn steps(&self) -> &[StepRecord] {
        self.records.get(1..).unwrap_or(&[])
    }

    /// Young constant of the noise term: the fluid part carries `1/delta`
    /// (from `R + eta* > delta`), the wall part is split twice.
    pub fn noise_constant(&self) -> f64 {
        (1.0 / self.delta).max(2.0)
    }

    /// `|E^{n+1/2} + C_1^n - E^n| / E^n` (absolute when `E^n = 0`).
    pub fn structure_defect(&self, r: &StepRecord) -> f64 {
        let d = (r.energy_half + r.c1 - r.energy_prev).abs();
        if r.energy_prev > 0.0 {
            d / r.energy_prev
        } else {
            d
        }
    }

    fn step_rhs_terms(&self, r: &StepRecord) -> f64 {
        r.pressure_work.abs()
            + self.noise_constant() * r.incr_norm * r.incr_norm * r.g_norm * r.g_norm
            + r.stoch_work.abs()
            + 0.25 * r.wall_jump_sq
    }

    /// `E^{n+1} + D^n + C_2^n <= E^{n+1/2} + |pressure work| + C_G |dW|^2 |G|^2
    /// + |(G dW, U^n)| + 1/4 |v^{n+1/2} - v^n|^2`
    pub fn fluid_check(&self, r: &StepRecord) -> InequalityCheck {
        let lhs = r.energy + r.dissipation + r.c2;
        let rhs = r.energy_half + self.step_rhs_terms(r);
        InequalityCheck { lhs, rhs, tolerance: ROUNDOFF * (lhs.abs() + rhs.abs()) }
    }

    /// Summed form for every `m`: `E^m + sum_{n<m} (D + C_1 + C_2) <= E^0 +
    /// sum_{n<m} (right-hand terms of the step inequality)`.
    pub fn summed_checks(&self) -> Vec<InequalityCheck> {
        let Some(first) = self.records.first() else { return Vec::new() };
        let e0 = first.energy;
        let (mut lhs_sum, mut rhs_sum, mut scale) = (0.0, 0.0, e0.abs());
        self.steps()
            .iter()
            .map(|r| {
                lhs_sum += r.dissipation + r.c1 + r.c2;
                let terms = self.step_rhs_terms(r);
                rhs_sum += terms;
                scale += r.energy_prev.abs() + r.dissipation + r.c1 + r.c2 + terms;
                InequalityCheck {
                    lhs: r.energy + lhs_sum,
                    rhs: e0 + rhs_sum,
                    tolerance: ROUNDOFF * (scale + r.energy.abs()),
                }
            })
            .collect()
    }

    /// Smallest of every `E`, `D`, `C_1`, `C_2` entry.
    pub fn min_sign_entry(&self) -> f64 {
        self.records
            .iter()
            .flat_map(|r| [r.energy, r.energy_half, r.dissipation, r.c1, r.c2])
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_energy(&self) -> f64 {
        self.records.iter().map(|r| r.energy).fold(0.0, f64::max)
    }

    pub fn sum_dissipation(&self) -> f64 {
        self.steps().iter().map(|r| r.dissipation).sum()
    }

    pub fn sum_c1(&self) -> f64 {
        self.steps().iter().map(|r| r.c1).sum()
    }

    pub fn sum_c2(&self) -> f64 {
        self.steps().iter().map(|r| r.c2).sum()
    }

    /// `int_0^T |div u|^2 dt` for a step `dt`.
    pub fn div_sq_integral(&self, dt: f64) -> f64 {
        self.steps().iter().map(|r| dt * r.div_residual * r.div_residual).sum()
    }
}

/// `E = 1/2 (int_O (R + eta*) |u|^2 + |v|^2 + |d_z eta|^2 + |d_zz eta|^2)` by
/// quadrature, for coupled `u`, beam velocity `v` and displacement `eta`.
pub fn energy(
    disc: &Discretization,
    u: &DVector<f64>,
    v: &DVector<f64>,
    eta: &DVector<f64>,
    eta_star: &WallProfile,
) -> f64 {
    let s = &disc.structure;
    0.5 * (disc.weighted_norm_sq(eta_star, 1, u) + s.beam_sq(v) + s.elastic_sq(eta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ReferenceDomain;

    #[test]
    fn zero_state_has_zero_energy() {
        let d = Discretization::new(ReferenceDomain::new(1.0, 1.0, 2, 2).unwrap(), 2).unwrap();
        let e = energy(&d, &DVector::zeros(d.n_free()), &DVector::zeros(2), &DVector::zeros(2), &WallProfile::zero(1.0, 2));
        assert_eq!(e, 0.0);
    }

    #[test]
    fn lifted_wall_velocity_energy() {
        // u = v(z) zeta e_r on the top cell row: int |u|^2 = |v|^2 hr / 3
        let d = Discretization::new(ReferenceDomain::new(1.0, 1.0, 3, 2).unwrap(), 3).unwrap();
        let v = DVector::from_vec(vec![0.4, -1.1, 0.9, 0.3]);
        let mut u = DVector::zeros(d.n_free());
        d.layout.set_wall_velocity(&mut u, &v);
        let fluid = d.weighted_norm_sq(&WallProfile::zero(1.0, 3), 1, &u);
        let expected = d.structure.beam_sq(&v) * 0.5 / 3.0;
        assert!((fluid - expected).abs() < 1e-14, "{fluid} vs {expected}");
        let e = energy(&d, &u, &v, &DVector::zeros(4), &WallProfile::zero(1.0, 3));
        assert!((e - 0.5 * (fluid + d.structure.beam_sq(&v))).abs() < 1e-15);
    }

    fn record(energy_prev: f64, energy_half: f64, c1: f64, energy: f64) -> StepRecord {
        let mut r = StepRecord::initial(0.0, 0.0, &CutoffState {
            theta: true,
            eta_star: WallProfile::zero(1.0, 1),
            frozen_at: None,
            delta: 0.1,
            s: 1.75,
            min_gap: 1.0,
            hs_norm: 1.0,
        });
        r.step = 1;
        r.energy_prev = energy_prev;
        r.energy_half = energy_half;
        r.c1 = c1;
        r.energy = energy;
        r
    }

    #[test]
    fn checks_on_hand_built_records() {
        let mut ledger = EnergyLedger::new(0.25);
        assert_eq!(ledger.noise_constant(), 4.0);
        ledger.records.push(record(2.0, 2.0, 0.0, 2.0));
        ledger.records.push(record(2.0, 1.5, 0.5, 1.4));
        let r = &ledger.records[1];
        assert_eq!(ledger.structure_defect(r), 0.0);
        assert!(ledger.fluid_check(r).holds());
        assert!(ledger.summed_checks().iter().all(InequalityCheck::holds));
        let mut bad = r.clone();
        bad.energy = 1.6;
        assert!(!ledger.fluid_check(&bad).holds());
    }
}
