//! Test cases, error metrics, cost accounting and the run driver.

mod cases;
mod config;
mod metrics;
mod one_d;
mod run;

pub use cases::{
    analytic_solution, initial_field, tracer_value, CaseId, CaseSpec, MeshKind, SchemeId, Tracer,
    DEFAULT_MOUNTAIN_HEIGHT,
};
pub use config::{parse_config_text, RunConfig, DEFAULT_BLOWUP_FACTOR};
pub use metrics::{convergence_slope, error_norms, multiply_count, weighted_error_norms, ErrorNorms};
pub use one_d::{bump_profile, cell_average, periodic_bump, ppm_revolution_errors};
pub use run::{determinism_check, format_time, run_case, write_field_csv, RunResult, RunStatus};
