//! Batch experiment drivers, flat key-value configuration, and
//! deterministic CSV emission for the `strata` command-line tool.

mod config;
mod csvio;
mod runners;

pub use config::{CurveKind, DensityKind, ExampleKind, ExperimentConfig, ExperimentKind};
pub use csvio::{fmt_f, read_validated, CsvDoc, SCHEMA_LINE};
pub use runners::{
    build_density, build_example, quad_spec, run_cell_sweep, run_pipeline, run_scaling,
    run_weak_convergence, BuiltExample, CellSweepRun, ScalingRun, FORM_DENSITY_TOL,
};
