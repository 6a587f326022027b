//! Run configuration: JSON schema, defaults, validation and scenario
//! construction.

use std::f64::consts::PI;
use std::path::Path;
use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::diagnostics::SweepAxis;
use crate::discretization::{Component, Discretization};
use crate::error::{FsiError, Result};
use crate::geometry::{ReferenceDomain, WallProfile};
use crate::noise::NoiseSpec;
use crate::quadrature::GaussRule;
use crate::scheme::{check_initial_data, InitialState, PicardSettings, SchemeParams, Simulation};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DomainConfig {
    #[serde(rename = "L")]
    pub length: f64,
    #[serde(rename = "R")]
    pub radius: f64,
    pub nz: usize,
    pub nr: usize,
    /// Beam elements; must equal `nz`. Defaults to `nz`.
    pub n_struct: Option<usize>,
}

impl Default for DomainConfig {
    fn default() -> Self {
        Self { length: 1.0, radius: 1.0, nz: 8, nr: 4, n_struct: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhysicsConfig {
    pub nu: f64,
    pub delta: f64,
    pub epsilon: f64,
    pub s: f64,
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        Self { nu: 1.0, delta: 0.1, epsilon: 1e-3, s: 1.75 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeConfig {
    #[serde(rename = "T")]
    pub final_time: f64,
    #[serde(rename = "N")]
    pub steps: usize,
}

impl Default for TimeConfig {
    fn default() -> Self {
        Self { final_time: 0.1, steps: 32 }
    }
}

/// Boundary pressure data `P(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PressureProfile {
    Constant { value: f64 },
    /// `values[i]` on `[times[i], times[i+1])`, the last value until `T`;
    /// `times` starts at 0 and increases.
    Table { times: Vec<f64>, values: Vec<f64> },
    /// `amplitude sin(pi t / duration)` on `[0, duration]`, zero afterwards.
    HalfSineBurst { amplitude: f64, duration: f64 },
}

impl PressureProfile {
    pub fn value(&self, t: f64) -> f64 {
        match self {
            PressureProfile::Constant { value } => *value,
            PressureProfile::Table { times, values } => {
                let k = times.partition_point(|&s| s <= t).saturating_sub(1);
                values[k]
            }
            PressureProfile::HalfSineBurst { amplitude, duration } => {
                if (0.0..=*duration).contains(&t) {
                    amplitude * (PI * t / duration).sin()
                } else {
                    0.0
                }
            }
        }
    }

    /// `(1/dt) int_a^b P`: exact for constant and table data, 5-point Gauss
    /// (split at the end of a burst) otherwise.
    pub fn average(&self, a: f64, b: f64) -> f64 {
        let dt = b - a;
        match self {
            PressureProfile::Constant { value } => *value,
            PressureProfile::Table { times, values } => {
                let mut acc = 0.0;
                for k in 0..values.len() {
                    let lo = times[k].max(a);
                    let hi = times.get(k + 1).copied().unwrap_or(f64::INFINITY).min(b);
                    if hi > lo {
                        acc += values[k] * (hi - lo);
                    }
                }
                acc / dt
            }
            PressureProfile::HalfSineBurst { duration, .. } => {
                let rule = GaussRule::new(5);
                let mut pieces = vec![(a, b)];
                if *duration > a && *duration < b {
                    pieces = vec![(a, *duration), (*duration, b)];
                }
                let mut acc = 0.0;
                for (lo, hi) in pieces {
                    for (t, w) in rule.on(lo, hi) {
                        acc += w * self.value(t);
                    }
                }
                acc / dt
            }
        }
    }

    fn validate(&self, field: &str) -> Result<()> {
        match self {
            PressureProfile::Constant { value } if !value.is_finite() => {
                Err(FsiError::config(format!("{field}.value"), "must be finite"))
            }
            PressureProfile::Table { times, values } => {
                if times.is_empty() || times.len() != values.len() {
                    return Err(FsiError::config(format!("{field}.times"), "needs one time per value"));
                }
                if times[0] != 0.0 || times.windows(2).any(|w| !(w[0] < w[1])) {
                    return Err(FsiError::config(format!("{field}.times"), "must start at 0 and increase"));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(FsiError::config(format!("{field}.values"), "must be finite"));
                }
                Ok(())
            }
            PressureProfile::HalfSineBurst { amplitude, duration } => {
                if !amplitude.is_finite() {
                    return Err(FsiError::config(format!("{field}.amplitude"), "must be finite"));
                }
                if !(*duration > 0.0 && duration.is_finite()) {
                    return Err(FsiError::config(format!("{field}.duration"), "must be positive"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PressureConfig {
    pub inlet: PressureProfile,
    pub outlet: PressureProfile,
}

impl Default for PressureConfig {
    fn default() -> Self {
        Self {
            inlet: PressureProfile::Constant { value: 0.0 },
            outlet: PressureProfile::Constant { value: 0.0 },
        }
    }
}

/// Initial wall displacement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DisplacementProfile {
    Zero,
    /// `amplitude sin^2(pi z / L)`
    Sin2 { amplitude: f64 },
    /// `amplitude cos^2(pi (z - center) / width)` on `|z - center| < width/2`.
    Bump { amplitude: f64, center: f64, width: f64 },
    /// Raw Hermite data at the interior nodes.
    Nodal { values: Vec<f64>, slopes: Vec<f64> },
}

/// Initial wall velocity, interpolated into the beam space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WallVelocityProfile {
    Zero,
    /// `amplitude sin(mode pi z / L)`
    Sine { amplitude: f64, mode: u32 },
}

/// Initial fluid velocity on the reference domain. The radial component is
/// `r v0(z)` in every case, which matches the wall trace at `r = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FluidProfile {
    Zero,
    /// `u_z = amplitude (1 - r^2)`
    Poiseuille { amplitude: f64 },
    /// `u_z = amplitude sin(pi z / L) (1 - r^2)`, not divergence free.
    Compressive { amplitude: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialConfig {
    pub eta0: DisplacementProfile,
    pub v0: WallVelocityProfile,
    pub u0: FluidProfile,
}

impl Default for InitialConfig {
    fn default() -> Self {
        Self { eta0: DisplacementProfile::Zero, v0: WallVelocityProfile::Zero, u0: FluidProfile::Zero }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    Path,
    Ensemble,
    Sweep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub mode: RunMode,
    pub paths: usize,
    pub master_seed: u64,
    pub sweep_axis: Option<String>,
    pub sweep_values: Vec<f64>,
    pub halt_at_stop: bool,
    /// Bridge refinement of the stochastic-error diagnostic; `null` skips it.
    pub refinement: Option<usize>,
    /// Dyadic shifts of the tightness diagnostic; 0 skips it.
    pub tightness_levels: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            mode: RunMode::Path,
            paths: 1,
            master_seed: 0,
            sweep_axis: None,
            sweep_values: Vec::new(),
            halt_at_stop: false,
            refinement: None,
            tightness_levels: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub tol_picard: f64,
    pub max_picard: usize,
    pub damping: f64,
    pub damping_after: usize,
    pub linear: String,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let p = PicardSettings::default();
        Self {
            tol_picard: p.tol,
            max_picard: p.max_iterations,
            damping: p.damping,
            damping_after: p.damping_after,
            linear: "direct".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub directory: String,
    pub formats: Vec<String>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { directory: "out".into(), formats: vec!["csv".into(), "json".into()] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub domain: DomainConfig,
    pub physics: PhysicsConfig,
    pub time: TimeConfig,
    pub pressure: PressureConfig,
    pub initial: InitialConfig,
    pub noise: NoiseSpec,
    pub run: RunSection,
    pub solver: SolverConfig,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            domain: DomainConfig::default(),
            physics: PhysicsConfig::default(),
            time: TimeConfig::default(),
            pressure: PressureConfig::default(),
            initial: InitialConfig::default(),
            noise: NoiseSpec::default(),
            run: RunSection::default(),
            solver: SolverConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

fn positive(field: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(FsiError::config(field, format!("must be positive and finite, got {x}")))
    }
}

fn smooth_bump(z: f64, center: f64, width: f64) -> (f64, f64) {
    let x = z - center;
    if x.abs() >= 0.5 * width {
        return (0.0, 0.0);
    }
    let arg = PI * x / width;
    (arg.cos().powi(2), -(PI / width) * (2.0 * arg).sin())
}

impl RunConfig {
    /// Parses and validates a JSON document, including the admissibility
    /// of the initial data.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let config: RunConfig =
            serde_json::from_str(text).map_err(|e| FsiError::config("<document>", e.to_string()))?;
        config.validate()?;
        config.check_initial_data()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("configuration serializes")
    }

    pub fn dt(&self) -> f64 {
        self.time.final_time / self.time.steps as f64
    }

    pub fn n_struct(&self) -> usize {
        self.domain.n_struct.unwrap_or(self.domain.nz)
    }

    /// Replaces implicit defaults with their values so a serialized copy
    /// records every setting that affects the run.
    pub fn resolved(&self) -> Self {
        let mut c = self.clone();
        c.domain.n_struct = Some(self.n_struct());
        c
    }

    /// Structural checks with the dotted path of the first offending field.
    pub fn validate(&self) -> Result<()> {
        let d = &self.domain;
        positive("domain.L", d.length)?;
        positive("domain.R", d.radius)?;
        if d.nz == 0 {
            return Err(FsiError::config("domain.nz", "must be at least 1"));
        }
        if d.nr == 0 {
            return Err(FsiError::config("domain.nr", "must be at least 1"));
        }
        let n_struct = self.n_struct();
        if n_struct == 0 || n_struct != d.nz {
            return Err(FsiError::config("domain.n_struct", format!("must equal nz = {}", d.nz)));
        }
        let p = &self.physics;
        positive("physics.nu", p.nu)?;
        positive("physics.delta", p.delta)?;
        positive("physics.epsilon", p.epsilon)?;
        if !(p.s > 1.5 && p.s < 2.0) {
            return Err(FsiError::config("physics.s", format!("must lie in (3/2, 2), got {}", p.s)));
        }
        positive("time.T", self.time.final_time)?;
        if self.time.steps == 0 {
            return Err(FsiError::config("time.N", "must be at least 1"));
        }
        self.pressure.inlet.validate("pressure.inlet")?;
        self.pressure.outlet.validate("pressure.outlet")?;
        match &self.initial.eta0 {
            DisplacementProfile::Nodal { values, slopes } => {
                let n = d.nz.saturating_sub(1);
                if values.len() != n {
                    return Err(FsiError::config("initial.eta0.values", format!("expected {n} interior values")));
                }
                if slopes.len() != n {
                    return Err(FsiError::config("initial.eta0.slopes", format!("expected {n} interior slopes")));
                }
            }
            DisplacementProfile::Bump { width, .. } => positive("initial.eta0.width", *width)?,
            _ => {}
        }
        self.noise.validate()?;
        let r = &self.run;
        if r.paths == 0 {
            return Err(FsiError::config("run.paths", "must be at least 1"));
        }
        if let Some(axis) = &r.sweep_axis {
            axis.parse::<SweepAxis>().map_err(|_| FsiError::config("run.sweep_axis", "must be N or epsilon"))?;
        }
        if r.mode == RunMode::Sweep && (r.sweep_axis.is_none() || r.sweep_values.is_empty()) {
            return Err(FsiError::config("run.sweep_values", "sweep mode needs an axis and values"));
        }
        if r.refinement.is_some_and(|m| m < 2) {
            return Err(FsiError::config("run.refinement", "must be at least 2"));
        }
        let s = &self.solver;
        positive("solver.tol_picard", s.tol_picard)?;
        if s.max_picard == 0 {
            return Err(FsiError::config("solver.max_picard", "must be at least 1"));
        }
        if !(s.damping > 0.0 && s.damping <= 1.0) {
            return Err(FsiError::config("solver.damping", "must lie in (0, 1]"));
        }
        if s.linear != "direct" {
            return Err(FsiError::config("solver.linear", "only `direct` is available"));
        }
        for f in &self.output.formats {
            if f != "csv" && f != "json" {
                return Err(FsiError::config("output.formats", format!("unknown format `{f}`")));
            }
        }
        Ok(())
    }

    pub fn reference_domain(&self) -> Result<ReferenceDomain> {
        ReferenceDomain::new(self.domain.length, self.domain.radius, self.domain.nz, self.domain.nr)
    }

    pub fn discretization(&self) -> Result<Discretization> {
        Discretization::new(self.reference_domain()?, self.n_struct())
    }

    pub fn initial_profile(&self) -> Result<WallProfile> {
        let (l, n) = (self.domain.length, self.domain.nz);
        Ok(match &self.initial.eta0 {
            DisplacementProfile::Zero => WallProfile::zero(l, n),
            DisplacementProfile::Sin2 { amplitude } => {
                let a = *amplitude;
                WallProfile::interpolate(l, n, |z| a * (PI * z / l).sin().powi(2), |z| a * (PI / l) * (2.0 * PI * z / l).sin())
            }
            DisplacementProfile::Bump { amplitude, center, width } => {
                let (a, c, w) = (*amplitude, *center, *width);
                WallProfile::interpolate(l, n, |z| a * smooth_bump(z, c, w).0, |z| a * smooth_bump(z, c, w).1)
            }
            DisplacementProfile::Nodal { values, slopes } => {
                let coeffs = DVector::from_iterator(
                    2 * values.len(),
                    values.iter().zip(slopes).flat_map(|(v, s)| [*v, *s]),
                );
                WallProfile::from_coeffs(l, n, coeffs)?
            }
        })
    }

    /// Coupled initial velocity: nodal Q1 interpolation of `u0` and of the
    /// radial extension `r v0(z)`, and the Hermite interpolant of `v0` in the
    /// wall block.
    pub fn initial_velocity(&self, disc: &Discretization) -> DVector<f64> {
        let l = self.domain.length;
        let (wall, wall_slope) = match &self.initial.v0 {
            WallVelocityProfile::Zero => (0.0, 0.0),
            WallVelocityProfile::Sine { amplitude, mode } => (*amplitude, f64::from(*mode) * PI / l),
        };
        let wall_value = |z: f64| wall * (wall_slope * z).sin();
        let axial = |z: f64, r: f64| match &self.initial.u0 {
            FluidProfile::Zero => 0.0,
            FluidProfile::Poiseuille { amplitude } => amplitude * (1.0 - r * r),
            FluidProfile::Compressive { amplitude } => amplitude * (PI * z / l).sin() * (1.0 - r * r),
        };
        let fluid = &disc.fluid;
        let mut u = DVector::zeros(disc.n_free());
        for k in 0..fluid.n_free() {
            let (node, comp) = fluid.dof_owner(k);
            let (z, r) = fluid.node_coords(node);
            u[k] = match comp {
                Component::Axial => axial(z, r),
                Component::Radial => r * wall_value(z),
            };
        }
        let h = l / self.domain.nz as f64;
        let mut v = DVector::zeros(disc.layout.n_wall());
        for k in 1..self.domain.nz {
            let z = k as f64 * h;
            v[2 * (k - 1)] = wall_value(z);
            v[2 * (k - 1) + 1] = wall * wall_slope * (wall_slope * z).cos();
        }
        disc.layout.set_wall_velocity(&mut u, &v);
        u
    }

    pub fn scheme_params(&self) -> SchemeParams {
        SchemeParams {
            nu: self.physics.nu,
            epsilon: self.physics.epsilon,
            delta: self.physics.delta,
            s: self.physics.s,
            steps: self.time.steps,
            dt: self.dt(),
            picard: PicardSettings {
                tol: self.solver.tol_picard,
                max_iterations: self.solver.max_picard,
                damping: self.solver.damping,
                damping_after: self.solver.damping_after,
            },
            halt_at_stop: self.run.halt_at_stop,
        }
    }

    /// Step-averaged `(P_in^n, P_out^n)`.
    pub fn pressure_averages(&self) -> Vec<(f64, f64)> {
        let dt = self.dt();
        (0..self.time.steps)
            .map(|n| {
                let (a, b) = (n as f64 * dt, (n + 1) as f64 * dt);
                (self.pressure.inlet.average(a, b), self.pressure.outlet.average(a, b))
            })
            .collect()
    }

    fn check_initial_data(&self) -> Result<()> {
        let disc = self.discretization()?;
        let initial = InitialState { eta: self.initial_profile()?, u: self.initial_velocity(&disc) };
        check_initial_data(&disc, &self.scheme_params(), &initial)
    }

    /// Builds the scenario; the discretization can be shared between
    /// configurations that differ only in time or physics parameters.
    pub fn simulation_with(&self, disc: Arc<Discretization>) -> Result<Simulation> {
        self.validate()?;
        let initial = InitialState { eta: self.initial_profile()?, u: self.initial_velocity(&disc) };
        Simulation::new(disc, self.scheme_params(), initial, self.pressure_averages(), self.noise.clone())
    }

    pub fn simulation(&self) -> Result<Simulation> {
        self.simulation_with(Arc::new(self.discretization()?))
    }

    /// Copy with one sweep parameter replaced.
    pub fn with_axis_value(&self, axis: SweepAxis, value: f64) -> Result<Self> {
        let mut c = self.clone();
        match axis {
            SweepAxis::Steps => {
                if !(value >= 1.0 && value.fract() == 0.0) {
                    return Err(FsiError::config("run.sweep_values", format!("N must be a positive integer, got {value}")));
                }
                c.time.steps = value as usize;
            }
            SweepAxis::Epsilon => c.physics.epsilon = value,
        }
        c.validate()?;
        Ok(c)
    }
}
