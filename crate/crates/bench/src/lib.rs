//! Benchmark targets, experiment models, data simulation and the
//! method-comparison harness for `bopp`.

pub mod data;
pub mod error;
pub mod experiment;
pub mod functions;
pub mod models;
pub mod registry;

pub use error::{BenchError, Result};
pub use experiment::{run_experiment, ExperimentSpec, Method, ResultRow, ResultsTable, SummaryRow};
pub use functions::{branin, hartmann6, Benchmark};
pub use registry::{build_model, AnyModel, BuiltModel, GroundTruth, ModelOptions, ModelVisitor, MODEL_IDS};
