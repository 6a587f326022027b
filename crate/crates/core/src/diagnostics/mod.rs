//! Energy bookkeeping, trajectory diagnostics and Monte Carlo drivers.

mod ensemble;
mod ledger;
mod shift;
mod stochastic;

pub use ensemble::{
    ensemble_run, fit_loglog_slope, sweep, EnsembleOptions, EnsembleReport, PathOutcome, PathSummary,
    StatSummary, SweepAxis, SweepRow, SweepTable, Welford,
};
pub use ledger::{energy, EnergyLedger, InequalityCheck, StepRecord, LEDGER_COLUMNS};
pub use shift::{tightness, time_shift_norm};
pub use stochastic::{expected_bridge_error_per_step, stochastic_error};
