//! Dataset-to-circuit flow for bespoke approximate MLPs: CSV ingestion,
//! run configuration, the staged pipeline, Pareto analysis and reports.
//! The algorithms themselves live in `bespoke-core`.

pub mod artifacts;
pub mod config;
pub mod csv_input;
pub mod hygiene;
pub mod pareto;
pub mod pipeline;
pub mod report;
