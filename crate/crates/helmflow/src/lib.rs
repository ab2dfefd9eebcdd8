//! File formats, reports and the `helmflow` command line on top of
//! [`helmflow_core`].

pub mod cli;
pub mod exec;
pub mod report;
pub mod schema;

pub use cli::run;
pub use exec::RayonExecutor;
pub use schema::{network_to_json, parse_network, SchemaError};
