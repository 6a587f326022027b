//! Run orchestration and on-disk artifacts: `manifest.json`, per-path
//! `ledger.csv`, `report.json` and, for sweeps, `table.csv`.
//!
//! Floats are written in Rust's shortest round-trip form, so a reader that
//! parses them back recovers the exact `f64`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;

use crate::config::{RunConfig, RunMode};
use crate::diagnostics::{
    ensemble_run, sweep, EnergyLedger, EnsembleOptions, EnsembleReport, SweepAxis, SweepTable, LEDGER_COLUMNS,
};
use crate::error::{FsiError, Result};
use crate::noise::GENERATOR_ID;

/// Shortest representation that parses back to the same value.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

pub fn ledger_csv(ledger: &EnergyLedger) -> String {
    let mut out = LEDGER_COLUMNS.join(",");
    out.push('\n');
    for r in &ledger.records {
        let fields = [
            r.step.to_string(),
            fmt_f64(r.t),
            fmt_f64(r.energy),
            fmt_f64(r.energy_half),
            fmt_f64(r.dissipation),
            fmt_f64(r.c1),
            fmt_f64(r.c2),
            fmt_f64(r.div_residual),
            u8::from(r.theta).to_string(),
            fmt_f64(r.min_gap),
            fmt_f64(r.hs_norm),
            fmt_f64(r.stoch_work),
            fmt_f64(r.incr_norm),
            u8::from(r.stopped).to_string(),
        ];
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

pub const TABLE_COLUMNS: [&str; 13] = [
    "axis",
    "value",
    "dt",
    "paths",
    "completed",
    "max_energy_mean",
    "max_energy_half_width",
    "div_l2_mean",
    "div_l2_half_width",
    "stochastic_error_mean",
    "stochastic_error_half_width",
    "stopped_fraction",
    "fluid_violations",
];

pub fn table_csv(table: &SweepTable) -> String {
    let mut out = TABLE_COLUMNS.join(",");
    out.push('\n');
    for row in &table.rows {
        let r = &row.report;
        let (se_mean, se_hw) = match &r.stochastic_error {
            Some(s) => (fmt_f64(s.mean), fmt_f64(s.half_width)),
            None => (String::new(), String::new()),
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            table.axis,
            fmt_f64(row.value),
            fmt_f64(row.dt),
            r.paths,
            r.completed,
            fmt_f64(r.max_energy.mean),
            fmt_f64(r.max_energy.half_width),
            fmt_f64(r.div_l2.mean),
            fmt_f64(r.div_l2.half_width),
            se_mean,
            se_hw,
            fmt_f64(r.stopped_fraction),
            r.fluid_violations,
        );
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct Seeds {
    pub master_seed: u64,
    pub noise_seed: u64,
    pub paths: usize,
    pub generator: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub code_version: String,
    pub mode: RunMode,
    pub dt: f64,
    pub seeds: Seeds,
    pub config: RunConfig,
}

impl Manifest {
    pub fn new(config: &RunConfig) -> Self {
        let config = config.resolved();
        Self {
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            mode: config.run.mode,
            dt: config.dt(),
            seeds: Seeds {
                master_seed: config.run.master_seed,
                noise_seed: config.noise.seed,
                paths: config.run.paths,
                generator: GENERATOR_ID.to_string(),
            },
            config,
        }
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| FsiError::Io(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

/// Relative location of a path's ledger inside an ensemble directory.
pub fn path_ledger_file(path: u64) -> PathBuf {
    PathBuf::from("paths").join(format!("path_{path:05}")).join("ledger.csv")
}

#[derive(Debug, Clone)]
pub enum RunOutcome {
    Path { report: EnsembleReport },
    Ensemble { report: EnsembleReport },
    Sweep { table: SweepTable },
}

impl RunOutcome {
    /// Number of paths that ended in an error.
    pub fn failures(&self) -> usize {
        match self {
            RunOutcome::Path { report } | RunOutcome::Ensemble { report } => report.failures.len(),
            RunOutcome::Sweep { table } => table.rows.iter().map(|r| r.report.failures.len()).sum(),
        }
    }
}

fn options(config: &RunConfig, threads: Option<usize>) -> EnsembleOptions {
    EnsembleOptions {
        paths: config.run.paths,
        master_seed: config.run.master_seed,
        threads,
        refinement: config.run.refinement,
        tightness_levels: config.run.tightness_levels,
    }
}

/// Runs `config` in its configured mode and writes every artifact to `out`.
/// Path failures are reported in the outcome, not as an error.
pub fn execute(config: &RunConfig, threads: Option<usize>, out: &Path) -> Result<RunOutcome> {
    config.validate()?;
    let csv = config.output.formats.iter().any(|f| f == "csv");
    let json = config.output.formats.iter().any(|f| f == "json");
    fs::create_dir_all(out)?;
    write_json(&out.join("manifest.json"), &Manifest::new(config))?;

    match config.run.mode {
        RunMode::Path | RunMode::Ensemble => {
            let mut cfg = config.clone();
            if cfg.run.mode == RunMode::Path {
                cfg.run.paths = 1;
            }
            let sim = cfg.simulation()?;
            let (report, outcomes) = ensemble_run(&sim, &options(&cfg, threads))?;
            if csv {
                for o in &outcomes {
                    let Some(ledger) = &o.ledger else { continue };
                    let file = if cfg.run.mode == RunMode::Path {
                        out.join("ledger.csv")
                    } else {
                        out.join(path_ledger_file(o.path))
                    };
                    if let Some(parent) = file.parent() {
                        fs::create_dir_all(parent)?;
                    }
                    fs::write(file, ledger_csv(ledger))?;
                }
            }
            if json {
                write_json(&out.join("report.json"), &report)?;
            }
            Ok(if cfg.run.mode == RunMode::Path {
                RunOutcome::Path { report }
            } else {
                RunOutcome::Ensemble { report }
            })
        }
        RunMode::Sweep => {
            let axis: SweepAxis = config
                .run
                .sweep_axis
                .as_deref()
                .ok_or_else(|| FsiError::config("run.sweep_axis", "required in sweep mode"))?
                .parse()?;
            // the mesh does not depend on the axis value
            let disc = Arc::new(config.discretization()?);
            let table = sweep(
                axis,
                &config.run.sweep_values,
                |value| config.with_axis_value(axis, value)?.simulation_with(Arc::clone(&disc)),
                &options(config, threads),
            )?;
            if csv {
                fs::write(out.join("table.csv"), table_csv(&table))?;
            }
            if json {
                write_json(&out.join("report.json"), &table)?;
            }
            Ok(RunOutcome::Sweep { table })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0, -2.5e-300, 1.0 / 3.0, 6.02214076e23, 0.0] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_f64(1.0), "1.0");
    }

    #[test]
    fn path_run_writes_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let config = RunConfig::from_json_str(
            r#"{"domain": {"nz": 2, "nr": 2}, "time": {"T": 0.01, "N": 3},
                "initial": {"u0": {"kind": "poiseuille", "amplitude": 1.0}}}"#,
        )
        .unwrap();
        let outcome = execute(&config, Some(1), dir.path()).unwrap();
        assert_eq!(outcome.failures(), 0);
        let ledger = fs::read_to_string(dir.path().join("ledger.csv")).unwrap();
        let lines: Vec<&str> = ledger.lines().collect();
        assert_eq!(lines[0], LEDGER_COLUMNS.join(","));
        assert_eq!(lines.len(), 1 + 4);
        assert!(lines.iter().skip(1).all(|l| l.split(',').count() == 14));
        let manifest: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
        assert_eq!(manifest["config"]["domain"]["n_struct"], 2);
        assert_eq!(manifest["seeds"]["generator"], GENERATOR_ID);
        assert!(dir.path().join("report.json").exists());
    }
}
