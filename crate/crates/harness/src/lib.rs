//! Correctness and benchmark harness for the differentiation backends.
//!
//! Scenarios bundle a function, a typical input, contexts, one operator and
//! a backend-independent reference. The harness checks every operator
//! variant against the reference, times prepared versus unprepared
//! execution, and emits a fixed-schema CSV plus human-readable tables.

mod bench;
mod check;
mod drive;
mod error;
pub mod functions;
mod report;
mod scenario;
mod suite;

pub use bench::{BenchConfig, BenchmarkRecord};
pub use check::{default_tolerance, CheckReport, CheckStatus};
pub use error::HarnessError;
pub use report::{checks_to_table, records_to_csv, records_to_markdown, CSV_HEADER};
pub use scenario::{
    build_scenario, default_size, resolve_scenario_names, scenario_names, Reference,
    RunnableScenario, Scenario, ScenarioData,
};
pub use suite::{
    parse_backend, rejoin_backend_args, run_checks, run_suite, PreparedMode, SuiteConfig,
    SuiteOutcome,
};
