use rayon::prelude::*;
use serde::Serialize;

use super::ledger::EnergyLedger;
use super::shift::tightness;
use super::stochastic::stochastic_error;
use crate::error::{FsiError, Result};
use crate::noise::PathKey;
use crate::scheme::Simulation;

/// Running mean and variance (Welford), fed in a fixed order.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Welford {
    count: usize,
    mean: f64,
    m2: f64,
}

impl Welford {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance; zero for fewer than two samples.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    /// 95% normal-approximation half-width of the mean.
    pub fn half_width(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            1.96 * (self.variance() / self.count as f64).sqrt()
        }
    }

    pub fn summary(&self) -> StatSummary {
        StatSummary { count: self.count, mean: self.mean, variance: self.variance(), half_width: self.half_width() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StatSummary {
    pub count: usize,
    pub mean: f64,
    pub variance: f64,
    pub half_width: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleOptions {
    pub paths: usize,
    pub master_seed: u64,
    /// Worker cap; `None` uses every available core.
    pub threads: Option<usize>,
    /// Bridge refinement for the stochastic-error estimate; `None` skips it.
    pub refinement: Option<usize>,
    /// Number of dyadic shifts in the tightness diagnostic; `0` skips it.
    pub tightness_levels: usize,
}

impl Default for EnsembleOptions {
    fn default() -> Self {
        Self { paths: 1, master_seed: 0, threads: None, refinement: None, tightness_levels: 0 }
    }
}

/// Per-path statistics extracted from a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathSummary {
    pub path: u64,
    pub max_energy: f64,
    pub sum_dissipation: f64,
    pub sum_c1: f64,
    pub sum_c2: f64,
    pub div_sq_integral: f64,
    pub div_l2: f64,
    pub tau_idx: usize,
    pub tau: f64,
    pub stopped: bool,
    pub max_structure_defect: f64,
    pub fluid_violations: usize,
    pub summed_violations: usize,
    pub min_sign_entry: f64,
    pub max_picard_iterations: usize,
    pub stochastic_error: Option<f64>,
    pub tightness: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathOutcome {
    pub path: u64,
    pub result: std::result::Result<PathSummary, FsiError>,
    pub ledger: Option<EnergyLedger>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathFailure {
    pub path: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleReport {
    pub paths: usize,
    pub completed: usize,
    pub master_seed: u64,
    pub failures: Vec<PathFailure>,
    pub max_energy: StatSummary,
    pub sum_dissipation: StatSummary,
    pub sum_c1: StatSummary,
    pub sum_c2: StatSummary,
    pub div_sq_integral: StatSummary,
    pub div_l2: StatSummary,
    pub tau: StatSummary,
    pub stopped_fraction: f64,
    pub stochastic_error: Option<StatSummary>,
    pub tightness: Option<StatSummary>,
    pub max_structure_defect: f64,
    pub fluid_violations: usize,
    pub summed_violations: usize,
}

fn summarize(sim: &Simulation, key: PathKey, options: &EnsembleOptions) -> Result<(PathSummary, EnergyLedger)> {
    let noise = sim.sample_noise(key)?;
    let traj = sim.run_with_noise(&noise)?;
    let ledger = &traj.ledger;
    let dt = sim.params.dt;
    let stochastic = match options.refinement {
        Some(m) => Some(stochastic_error(&traj, &noise, &sim.noise, &sim.disc, m)?),
        None => None,
    };
    let tight = (options.tightness_levels > 0).then(|| tightness(&traj, &sim.disc, options.tightness_levels));
    let div_sq = ledger.div_sq_integral(dt);
    let summary = PathSummary {
        path: key.path,
        max_energy: ledger.max_energy(),
        sum_dissipation: ledger.sum_dissipation(),
        sum_c1: ledger.sum_c1(),
        sum_c2: ledger.sum_c2(),
        div_sq_integral: div_sq,
        div_l2: div_sq.sqrt(),
        tau_idx: traj.tau_idx,
        tau: traj.tau_idx as f64 * dt,
        stopped: traj.stopped(),
        max_structure_defect: ledger.steps().iter().map(|r| ledger.structure_defect(r)).fold(0.0, f64::max),
        fluid_violations: ledger.steps().iter().filter(|r| !ledger.fluid_check(r).holds()).count(),
        summed_violations: ledger.summed_checks().iter().filter(|c| !c.holds()).count(),
        min_sign_entry: ledger.min_sign_entry(),
        max_picard_iterations: ledger.steps().iter().map(|r| r.picard_iterations).max().unwrap_or(0),
        stochastic_error: stochastic,
        tightness: tight,
    };
    Ok((summary, traj.ledger))
}

fn thread_pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| FsiError::config("threads", e.to_string()))
}

/// Runs paths `0..M` concurrently and reduces their statistics in path
/// order. Path failures are recorded, not propagated.
pub fn ensemble_run(sim: &Simulation, options: &EnsembleOptions) -> Result<(EnsembleReport, Vec<PathOutcome>)> {
    if options.paths == 0 {
        return Err(FsiError::config("run.paths", "must be at least 1"));
    }
    let pool = thread_pool(options.threads)?;
    let outcomes: Vec<PathOutcome> = pool.install(|| {
        (0..options.paths as u64)
            .into_par_iter()
            .map(|path| {
                let key = PathKey { master_seed: options.master_seed, path };
                match summarize(sim, key, options) {
                    Ok((summary, ledger)) => PathOutcome { path, result: Ok(summary), ledger: Some(ledger) },
                    Err(e) => PathOutcome { path, result: Err(e), ledger: None },
                }
            })
            .collect()
    });
    Ok((reduce(options, &outcomes), outcomes))
}

fn reduce(options: &EnsembleOptions, outcomes: &[PathOutcome]) -> EnsembleReport {
    let mut acc: [Welford; 7] = Default::default();
    let mut stoch = Welford::default();
    let mut tight = Welford::default();
    let mut failures = Vec::new();
    let (mut stopped, mut fluid_violations, mut summed_violations) = (0usize, 0usize, 0usize);
    let mut max_defect: f64 = 0.0;
    for o in outcomes {
        match &o.result {
            Ok(s) => {
                for (w, x) in acc.iter_mut().zip([
                    s.max_energy,
                    s.sum_dissipation,
                    s.sum_c1,
                    s.sum_c2,
                    s.div_sq_integral,
                    s.div_l2,
                    s.tau,
                ]) {
                    w.push(x);
                }
                if let Some(e) = s.stochastic_error {
                    stoch.push(e);
                }
                if let Some(t) = s.tightness {
                    tight.push(t);
                }
                stopped += usize::from(s.stopped);
                fluid_violations += s.fluid_violations;
                summed_violations += s.summed_violations;
                max_defect = max_defect.max(s.max_structure_defect);
            }
            Err(e) => failures.push(PathFailure { path: o.path, error: e.to_string() }),
        }
    }
    let completed = acc[0].count();
    EnsembleReport {
        paths: outcomes.len(),
        completed,
        master_seed: options.master_seed,
        failures,
        max_energy: acc[0].summary(),
        sum_dissipation: acc[1].summary(),
        sum_c1: acc[2].summary(),
        sum_c2: acc[3].summary(),
        div_sq_integral: acc[4].summary(),
        div_l2: acc[5].summary(),
        tau: acc[6].summary(),
        stopped_fraction: if completed == 0 { 0.0 } else { stopped as f64 / completed as f64 },
        stochastic_error: (stoch.count() > 0).then(|| stoch.summary()),
        tightness: (tight.count() > 0).then(|| tight.summary()),
        max_structure_defect: max_defect,
        fluid_violations,
        summed_violations,
    }
}

/// Least-squares slope of `log y` against `log x`.
pub fn fit_loglog_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 || x.iter().chain(y).any(|&v| !(v > 0.0)) {
        return None;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = x.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SweepAxis {
    #[serde(rename = "N")]
    Steps,
    #[serde(rename = "epsilon")]
    Epsilon,
}

impl std::str::FromStr for SweepAxis {
    type Err = FsiError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "N" => Ok(SweepAxis::Steps),
            "epsilon" => Ok(SweepAxis::Epsilon),
            other => Err(FsiError::config("run.sweep_axis", format!("unknown axis `{other}` (expected N or epsilon)"))),
        }
    }
}

impl std::fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SweepAxis::Steps => "N",
            SweepAxis::Epsilon => "epsilon",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub dt: f64,
    pub report: EnsembleReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub axis: SweepAxis,
    pub rows: Vec<SweepRow>,
    /// Log-log slope of the mean `|div u|_{L2(0,T;L2)}` against epsilon.
    pub div_slope: Option<f64>,
    /// Log-log slope of the mean stochastic error against `dt`.
    pub stochastic_error_slope: Option<f64>,
    /// Largest ratio between consecutive mean `max E^n`.
    pub max_energy_ratio: Option<f64>,
}

/// Reruns the ensemble for each value with the same path keys (common
/// random numbers); `build` produces the scenario for one axis value.
pub fn sweep(
    axis: SweepAxis,
    values: &[f64],
    build: impl Fn(f64) -> Result<Simulation>,
    options: &EnsembleOptions,
) -> Result<SweepTable> {
    if values.is_empty() {
        return Err(FsiError::config("run.sweep_values", "at least one value is required"));
    }
    if values.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(FsiError::config("run.sweep_values", "values must be strictly increasing"));
    }
    let mut rows = Vec::with_capacity(values.len());
    for &value in values {
        let sim = build(value)?;
        let (report, _) = ensemble_run(&sim, options)?;
        rows.push(SweepRow { value, dt: sim.params.dt, report });
    }
    let div_slope = match axis {
        SweepAxis::Epsilon => {
            let y: Vec<f64> = rows.iter().map(|r| r.report.div_l2.mean).collect();
            fit_loglog_slope(values, &y)
        }
        SweepAxis::Steps => None,
    };
    let stochastic_error_slope = match axis {
        SweepAxis::Steps => {
            let dts: Vec<f64> = rows.iter().map(|r| r.dt).collect();
            let y: Option<Vec<f64>> = rows.iter().map(|r| r.report.stochastic_error.map(|s| s.mean)).collect();
            y.and_then(|y| fit_loglog_slope(&dts, &y))
        }
        SweepAxis::Epsilon => None,
    };
    let max_energy_ratio = (rows.len() >= 2).then(|| {
        rows.windows(2)
            .map(|w| {
                let (a, b) = (w[0].report.max_energy.mean, w[1].report.max_energy.mean);
                (a / b).max(b / a)
            })
            .fold(1.0, f64::max)
    });
    Ok(SweepTable { axis, rows, div_slope, stochastic_error_slope, max_energy_ratio })
}
