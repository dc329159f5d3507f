//! Trace-based model substrate: distributions, values and the handler
//! interface models execute through.

mod dist;
mod model;
mod value;

pub use dist::{normal_ln_pdf, BaseMeasure, Dist, DistKind};
pub use model::{
    run_model, Address, Binding, Choice, Ctx, Execution, ExecutionRecord, Flow, FnModel, Handler, Model,
    ObservePolicy, OptimPolicy, StepOutcome,
};
pub use value::{NamedTheta, Theta, Value};
