//! End-to-end sweeps and audits driven by a flat configuration file.

pub mod audit;
pub mod config;
pub mod output;
pub mod sweep;

pub use audit::{
    adjacent_boxes, run_audit, write_audit, AuditRecord, AuditSweepReport, CorrectionByM, LadderStep, AUDIT_CSV_HEADER,
};
pub use config::{AuditSettings, ExperimentConfig, OutputSettings, SweepSettings, OUTPUT_DIR_ENV};
pub use output::{fmt_g17, read_columns, write_csv, write_json};
pub use sweep::{
    box_shapes, run_sweep, write_sweep, KappaTable, SweepRecord, SweepReport, SweepVerdicts, SWEEP_CSV_HEADER,
};
